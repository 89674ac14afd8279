"""Derivation subspaces, inner solves, verdicts, and the round trip.

The subspace dimensions are validated against brute-force oracles built
from element-level operations (mul, act_left, act_right) and a plain
matrix-rank call, independently of the library's vectorized constraint
assembly.
"""

import numpy as np
import pytest

from derivlab import (
    DerivationTriple,
    LinearMap,
    PreconditionError,
    act_left,
    act_right,
    approx_contractibility_roundtrip,
    conjugation_map,
    constant_control,
    derivation_space,
    dual_bimodule,
    endomorphism_residual,
    get_algebra,
    identity_map,
    inner_derivation,
    inner_solve,
    inner_space,
    is_amenable,
    is_contractible,
    leibniz_residual,
    make_algebra,
    make_matrix_algebra,
    mul,
    sigma_endo_certificate,
    zero_bimodule,
)
from derivlab.algebra import regular_bimodule
from derivlab.perturb import PerturbationSpec, extend_with_annihilator, make_annihilator_perturbation
from derivlab.sampling import ball_point, generator


def brute_force_derivation_dim(algebra, module, sigma, tau, tol=1e-8):
    """Element-by-element constraint assembly plus a rank call."""
    n, m = algebra.dim, module.dim
    if m == 0:
        return 0
    columns = []
    for r in range(m):
        for s in range(n):
            candidate = np.zeros((m, n), dtype=complex)
            candidate[r, s] = 1.0
            defects = []
            for i in range(n):
                for j in range(n):
                    ei, ej = algebra.basis_element(i), algebra.basis_element(j)
                    lhs = candidate @ mul(ei, ej).coords
                    t1 = act_right(
                        module.element(candidate @ ei.coords),
                        algebra.element(sigma.matrix[:, j]),
                    ).coords
                    t2 = act_left(
                        algebra.element(tau.matrix[:, i]),
                        module.element(candidate @ ej.coords),
                    ).coords
                    defects.append(lhs - t1 - t2)
            columns.append(np.concatenate(defects))
    system = np.array(columns).T
    return n * m - np.linalg.matrix_rank(system, tol=tol)


def brute_force_inner_dim(algebra, module, sigma, tau, tol=1e-8):
    n, m = algebra.dim, module.dim
    if m == 0:
        return 0
    vectors = []
    for s in range(m):
        x = module.basis_element(s)
        columns = []
        for i in range(n):
            value = (
                act_right(x, algebra.element(sigma.matrix[:, i])).coords
                - act_left(algebra.element(tau.matrix[:, i]), x).coords
            )
            columns.append(value)
        vectors.append(np.array(columns).T.reshape(-1))
    return int(np.linalg.matrix_rank(np.array(vectors).T, tol=tol))


@pytest.fixture(scope="module")
def m2():
    a = make_matrix_algebra(2)
    return a, regular_bimodule(a), identity_map(a)


@pytest.fixture(scope="module")
def duals():
    a = get_algebra("dual-numbers")
    return a, regular_bimodule(a), identity_map(a)


class TestResiduals:
    def test_exact_inner_triple_residual(self, m2):
        a, module, sid = m2
        rng = generator(61, "inner")
        x = module.element(ball_point(module, rng, 1.0))
        triple = DerivationTriple(inner_derivation(module, sid, sid, x), sid, sid)
        for _ in range(100):
            u = a.element(ball_point(a, rng, 2.0))
            v = a.element(ball_point(a, rng, 2.0))
            assert leibniz_residual(triple, u, v) <= 1e-13

    def test_endomorphism_is_half_half_derivation(self, m2):
        # an endomorphism phi satisfies the product rule for the pair
        # (phi/2, phi/2): phi(ab) = phi(a) (phi(b)/2) + (phi(a)/2) phi(b)
        a, module, sid = m2
        u = a.unit_coords.copy()
        u[2] += 1.0
        phi = conjugation_map(a, u)
        half = LinearMap(0.5 * phi.matrix, a, a)
        d_map = LinearMap(phi.matrix, a, module)
        triple = DerivationTriple(d_map, half, half)
        rng = generator(63, "half")
        for _ in range(100):
            x = a.element(ball_point(a, rng, 2.0))
            y = a.element(ball_point(a, rng, 2.0))
            assert leibniz_residual(triple, x, y) <= 1e-13

    def test_zero_map_is_a_derivation_for_anything(self, m2):
        a, module, sid = m2
        rng = generator(65, "zero")
        arbitrary = LinearMap(
            generator(66, "m").standard_normal((a.dim, a.dim)), a, a
        )
        triple = DerivationTriple(
            LinearMap(np.zeros((module.dim, a.dim)), a, module), arbitrary, sid
        )
        u = a.element(ball_point(a, rng, 1.0))
        v = a.element(ball_point(a, rng, 1.0))
        assert leibniz_residual(triple, u, v) == 0.0

    def test_identity_endomorphism_residual(self, m2):
        a, _, sid = m2
        assert endomorphism_residual(sid, a.basis_element(1), a.basis_element(2)) == 0.0

    def test_conjugation_endomorphism_residual(self, m2):
        a, _, _ = m2
        u = a.unit_coords.copy()
        u[1] += 1.0
        conj = conjugation_map(a, u)
        rng = generator(67, "conj")
        for _ in range(100):
            x = a.element(ball_point(a, rng, 2.0))
            y = a.element(ball_point(a, rng, 2.0))
            assert endomorphism_residual(conj, x, y) <= 1e-13


class TestSigmaCertificate:
    def test_exact_triple_zero_certificate(self, m2):
        a, module, sid = m2
        x = module.element(ball_point(module, generator(69, "x"), 1.0))
        triple = DerivationTriple(inner_derivation(module, sid, sid, x), sid, sid)
        cert = sigma_endo_certificate(triple, samples=100, seed=1)
        assert cert.max_cancellation <= 1e-13
        assert cert.tau_basis_residual == 0.0
        assert cert.ran_trivial  # unital algebra

    def test_zero_derivation_certifies_for_any_sigma(self, m2):
        a, module, sid = m2
        weird = LinearMap(generator(70, "w").standard_normal((a.dim, a.dim)), a, a)
        triple = DerivationTriple(
            LinearMap(np.zeros((module.dim, a.dim)), a, module), weird, sid
        )
        cert = sigma_endo_certificate(triple, samples=50, seed=2)
        assert cert.max_cancellation == 0.0
        assert not cert.d_full_row_rank

    def test_surjective_d_reported(self, m2):
        a, module, sid = m2
        d_map = LinearMap(np.eye(a.dim, dtype=complex), a, module)
        triple = DerivationTriple(d_map, sid, sid)
        cert = sigma_endo_certificate(triple, samples=10, seed=3)
        assert cert.d_full_row_rank


class TestSubspaces:
    def test_matrix2_dims_match_brute_force(self, m2):
        a, module, sid = m2
        ds = derivation_space(a, module, sid, sid)
        ins = inner_space(a, module, sid, sid)
        assert ds.dim == brute_force_derivation_dim(a, module, sid, sid) == 3
        assert ins.dim == brute_force_inner_dim(a, module, sid, sid) == 3

    def test_dual_numbers_dims_match_brute_force_and_hand_argument(self, duals):
        # hand oracle: d(eps eps) = 0 forces 2 eps d(eps) = 0, so d(eps) is
        # a multiple of eps; the unit forces d(e0) = 0: dimension 1.
        # commutativity makes every inner map vanish: dimension 0.
        a, module, sid = duals
        ds = derivation_space(a, module, sid, sid)
        ins = inner_space(a, module, sid, sid)
        assert ds.dim == brute_force_derivation_dim(a, module, sid, sid) == 1
        assert ins.dim == brute_force_inner_dim(a, module, sid, sid) == 0
        witness = ds.matrix(0)
        assert abs(witness[0, 0]) <= 1e-10  # d(e0) = 0
        assert abs(witness[0, 1]) <= 1e-10  # d(eps) has no unit component
        assert abs(witness[1, 1]) == pytest.approx(1.0, abs=1e-10)

    def test_zero_module_dims(self, m2):
        a, _, sid = m2
        z = zero_bimodule(a)
        assert derivation_space(a, z, sid, sid).dim == 0
        assert inner_space(a, z, sid, sid).dim == 0

    def test_twisted_dims_match_brute_force(self, m2):
        a, module, sid = m2
        u = a.unit_coords.copy()
        u[1] += 1.0
        conj = conjugation_map(a, u)
        ds = derivation_space(a, module, conj, sid)
        ins = inner_space(a, module, conj, sid)
        assert ds.dim == brute_force_derivation_dim(a, module, conj, sid)
        assert ins.dim == brute_force_inner_dim(a, module, conj, sid)

    def test_inner_space_contained_in_derivation_space(self, m2):
        a, module, sid = m2
        ds = derivation_space(a, module, sid, sid)
        ins = inner_space(a, module, sid, sid)
        for idx in range(ins.dim):
            assert ds.projection_residual(ins.vectors[idx]) <= 1e-9

    def test_every_derivation_basis_vector_satisfies_the_rule(self, m2):
        a, module, sid = m2
        ds = derivation_space(a, module, sid, sid)
        rng = generator(71, "check")
        for idx in range(ds.dim):
            triple = DerivationTriple(ds.linear_map(idx), sid, sid)
            for _ in range(20):
                u = a.element(ball_point(a, rng, 1.0))
                v = a.element(ball_point(a, rng, 1.0))
                assert leibniz_residual(triple, u, v) <= 1e-10

    def test_dims_invariant_under_weight_rescaling(self):
        a = make_matrix_algebra(2)
        b = make_algebra(a.structure, weights=2.0 * np.ones(4), unit=a.unit_coords)
        for alg in (a, b):
            module = regular_bimodule(alg)
            sid = identity_map(alg)
            assert derivation_space(alg, module, sid, sid).dim == 3
            assert inner_space(alg, module, sid, sid).dim == 3

    def test_endomorphism_lies_in_half_half_derivation_space(self, m2):
        a, module, _ = m2
        u = a.unit_coords.copy()
        u[1] += 1.0
        phi = conjugation_map(a, u)
        half = LinearMap(0.5 * phi.matrix, a, a)
        ds = derivation_space(a, module, half, half)
        assert ds.projection_residual(phi.matrix.reshape(-1)) <= 1e-10


class TestInnerSolve:
    def test_recovers_inner_derivation_up_to_kernel(self, m2):
        a, module, sid = m2
        x = module.basis_element(1)  # the off-diagonal unit
        d_map = inner_derivation(module, sid, sid, x)
        result = inner_solve(DerivationTriple(d_map, sid, sid), tol=1e-9)
        assert result.feasible
        rebuilt = inner_derivation(module, sid, sid, result.x)
        assert np.abs(rebuilt.matrix - d_map.matrix).max() <= 1e-12

    def test_dual_numbers_noninner_derivation_infeasible(self, duals):
        a, module, sid = duals
        d_mat = np.zeros((2, 2), dtype=complex)
        d_mat[1, 1] = 1.0  # d(eps) = eps
        result = inner_solve(DerivationTriple(LinearMap(d_mat, a, module), sid, sid))
        assert not result.feasible
        assert result.residual > result.tolerance

    def test_zero_derivation_feasible_with_zero_witness(self, m2):
        a, module, sid = m2
        zero = LinearMap(np.zeros((module.dim, a.dim)), a, module)
        result = inner_solve(DerivationTriple(zero, sid, sid))
        assert result.feasible
        assert np.all(result.x.coords == 0)

    def test_success_implies_small_leibniz_for_rebuilt_map(self, m2):
        a, module, sid = m2
        x = module.element(ball_point(module, generator(73, "x"), 1.0))
        d_map = inner_derivation(module, sid, sid, x)
        result = inner_solve(DerivationTriple(d_map, sid, sid))
        rebuilt = DerivationTriple(
            inner_derivation(module, sid, sid, result.x), sid, sid
        )
        for i in range(a.dim):
            for j in range(a.dim):
                assert (
                    leibniz_residual(rebuilt, a.basis_element(i), a.basis_element(j))
                    <= 1e-10
                )


class TestVerdicts:
    def test_matrix2_contractible(self, m2):
        a, module, sid = m2
        report = is_contractible(a, module, sid, sid)
        assert report.contractible
        assert (report.derivation_dim, report.inner_dim) == (3, 3)
        assert report.witness is None

    def test_dual_numbers_not_contractible_with_witness(self, duals):
        a, module, sid = duals
        report = is_contractible(a, module, sid, sid)
        assert not report.contractible
        assert (report.derivation_dim, report.inner_dim) == (1, 0)
        witness = report.witness.matrix
        assert abs(witness[1, 1]) == pytest.approx(1.0, abs=1e-9)

    def test_zero_module_contractible(self, m2):
        a, _, sid = m2
        report = is_contractible(a, zero_bimodule(a), sid, sid)
        assert report.contractible
        assert (report.derivation_dim, report.inner_dim) == (0, 0)

    def test_nonmultiplicative_twist_rejected(self, m2):
        a, module, sid = m2
        half = LinearMap(0.5 * np.eye(a.dim, dtype=complex), a, a)
        with pytest.raises(PreconditionError):
            is_contractible(a, module, half, sid)

    def test_matrix2_amenable_matches_dual_brute_force(self, m2):
        a, module, sid = m2
        report = is_amenable(a, module, sid, sid)
        dual = dual_bimodule(module)
        assert report.contractible
        assert report.kind == "amenability"
        assert report.derivation_dim == brute_force_derivation_dim(a, dual, sid, sid)
        assert report.inner_dim == brute_force_inner_dim(a, dual, sid, sid)

    def test_dual_numbers_amenability_computed_not_assumed(self, duals):
        a, module, sid = duals
        report = is_amenable(a, module, sid, sid)
        dual = dual_bimodule(module)
        assert report.derivation_dim == brute_force_derivation_dim(a, dual, sid, sid)
        assert report.inner_dim == brute_force_inner_dim(a, dual, sid, sid)

    def test_zero_module_amenable(self, m2):
        a, _, sid = m2
        assert is_amenable(a, zero_bimodule(a), sid, sid).contractible


class TestRoundtrip:
    def build(self, epsilon, seed=81):
        a = make_matrix_algebra(2)
        module, ann = extend_with_annihilator(regular_bimodule(a))
        sid = identity_map(a)
        x = module.element(ball_point(module, generator(seed, "x"), 1.0))
        d0 = inner_derivation(module, sid, sid, x)
        triple = DerivationTriple(d0, sid, sid)
        maps = make_annihilator_perturbation(
            triple, PerturbationSpec(mode="annihilator", epsilon=epsilon, seed=seed), ann
        )
        return a, module, sid, maps

    def test_noisy_inner_derivation_roundtrip(self):
        a, module, sid, maps = self.build(1e-3)
        result = approx_contractibility_roundtrip(
            maps.f, maps.control, a, module, sid, sid, samples=1000, seed=5
        )
        assert result.feasible
        assert result.beta <= 3e-3 * (1.0 + module.action_bound) + 1e-9
        assert result.scaling_residual <= 1e-10

    def test_exact_inner_derivation_beta_negligible(self):
        a, module, sid, maps = self.build(0.0)
        result = approx_contractibility_roundtrip(
            maps.f, constant_control(0.0), a, module, sid, sid, samples=300, seed=6
        )
        assert result.feasible
        assert result.beta <= 1e-12

    def test_dual_numbers_infeasible_certificate(self):
        a = get_algebra("dual-numbers")
        module, ann = extend_with_annihilator(regular_bimodule(a))
        sid = identity_map(a)
        d_mat = np.zeros((3, 2), dtype=complex)
        d_mat[1, 1] = 1.0  # d(eps) = eps inside the extended module
        triple = DerivationTriple(LinearMap(d_mat, a, module), sid, sid)
        maps = make_annihilator_perturbation(
            triple, PerturbationSpec(mode="annihilator", epsilon=1e-3, seed=7), ann
        )
        result = approx_contractibility_roundtrip(
            maps.f, maps.control, a, module, sid, sid, samples=300, seed=8
        )
        assert not result.feasible
        assert result.witness is not None
        witness = result.witness.matrix
        assert abs(witness[1, 1] - 1.0) <= 1e-9
        assert np.abs(witness[:, 0]).max() <= 1e-9
        assert result.inner_residual > 0.5  # the derivation is far from inner
