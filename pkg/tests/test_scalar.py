"""Three-unimodular decompositions and the homogeneity certificate."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from derivlab import (
    identity_map,
    make_matrix_algebra,
    scalar_homogeneity_certificate,
    three_unimodular,
    unit_circle_grid,
)
from derivlab.algebra import LinearMap
from derivlab.sampling import ball_point, generator

A = make_matrix_algebra(2)


def random_disk_points(count, radius, seed):
    rng = generator(seed, "disk")
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    angle = rng.uniform(0.0, 2.0 * np.pi, count)
    return r * np.exp(1j * angle)


class TestThreeUnimodular:
    def test_extreme_point(self):
        triple = three_unimodular(3.0)
        assert triple.as_tuple() == (1.0 + 0j, 1.0 + 0j, 1.0 + 0j)

    def test_zero_sums_to_zero(self):
        triple = three_unimodular(0.0)
        assert abs(triple.total) <= 1e-13
        for theta in triple.as_tuple():
            assert abs(abs(theta) - 1.0) <= 1e-14

    def test_u_zero_branch(self):
        # |w| = 1 makes the remainder vanish and selects the (i, -i) pair
        triple = three_unimodular(1.0)
        assert triple.as_tuple() == (1j, -1j, 1.0 + 0j)

    def test_generic_value(self):
        triple = three_unimodular(1.5)
        assert abs(triple.total - 1.5) <= 1e-13
        for theta in triple.as_tuple():
            assert abs(abs(theta) - 1.0) <= 1e-14

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            three_unimodular(3.5)

    def test_seeded_disk_sweep(self):
        for w in random_disk_points(10000, 3.0, seed=23):
            triple = three_unimodular(w)
            for theta in triple.as_tuple():
                assert abs(abs(theta) - 1.0) <= 1e-14
            assert abs(triple.total - w) <= 1e-13

    @given(re=st.floats(-2.1, 2.1), im=st.floats(-2.1, 2.1))
    @settings(max_examples=300, deadline=None)
    def test_property_sum_and_modulus(self, re, im):
        w = complex(re, im)
        triple = three_unimodular(w)
        assert abs(triple.total - w) <= 1e-13
        for theta in triple.as_tuple():
            assert abs(abs(theta) - 1.0) <= 1e-14

    def test_determinism(self):
        assert three_unimodular(0.3 + 0.4j) == three_unimodular(0.3 + 0.4j)


def test_scaling_margin_for_step_count():
    # M = floor(4|g|) + 1 always leaves |3g/M| < 3/4
    rng = generator(29, "gamma")
    magnitudes = 10.0 ** rng.uniform(-6, 6, 10000)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 10000))
    for gamma in magnitudes * phases:
        m_steps = np.floor(4.0 * abs(gamma)) + 1
        assert abs(3.0 * gamma / m_steps) < 0.75


class TestHomogeneityCertificate:
    def setup_method(self):
        rng = generator(31, "matrix")
        mat = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        self.d = LinearMap(mat, A, A)

    def test_unit_gamma(self):
        rng = generator(33, "a")
        a = A.element(ball_point(A, rng, 1.0))
        assert scalar_homogeneity_certificate(self.d, 1.0, a) <= 1e-12

    def test_reference_gamma(self):
        # |gamma| = sqrt(13), so M = 15 steps
        gamma = 2.0 + 3.0j
        assert int(np.floor(4 * abs(gamma)) + 1) == 15
        rng = generator(35, "a")
        a = A.element(ball_point(A, rng, 1.0))
        assert scalar_homogeneity_certificate(self.d, gamma, a) <= 1e-11

    def test_zero_map(self):
        zero = LinearMap(np.zeros((4, 4)), A, A)
        a = A.basis_element(0)
        assert scalar_homogeneity_certificate(zero, 2.0 - 1.0j, a) == 0.0

    def test_zero_gamma(self):
        a = A.basis_element(1)
        assert scalar_homogeneity_certificate(self.d, 0.0, a) <= 1e-13

    def test_scaled_tolerance_full_sweep(self):
        rng = generator(37, "sweep")
        d_norm = self.d.operator_norm()
        for _ in range(500):
            gamma = complex(rng.uniform(-1e6, 1e6), rng.uniform(-1e6, 1e6))
            a = A.element(ball_point(A, rng, 4.0))
            cert = scalar_homogeneity_certificate(self.d, gamma, a)
            assert cert <= 1e-10 * (1.0 + abs(gamma)) * d_norm * max(a.norm(), 1e-30)


def test_unit_circle_grid():
    grid = unit_circle_grid(64)
    assert len(grid) == 64
    assert np.allclose(np.abs(grid), 1.0)
    assert grid[0] == 1.0 + 0j
    identity = identity_map(A)
    # homogeneity of a plain matrix holds at every grid point
    a = A.basis_element(2)
    for lam in grid[:8]:
        assert np.allclose(identity.apply_coords(lam * a.coords), lam * a.coords)
