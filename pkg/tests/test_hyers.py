"""Direct-method extraction: convergence, bounds, diagnostics."""

import numpy as np
import pytest

from derivlab import (
    ConvergenceError,
    DerivationTriple,
    LinearMap,
    PNormControl,
    PointMap,
    PreconditionError,
    constant_control,
    extract_additive,
    extract_triple,
    identity_map,
    inner_derivation,
    make_matrix_algebra,
    partial_sum_bound,
    summed_control,
    verify_stability_bound,
)
from derivlab.algebra import regular_bimodule
from derivlab.hyers import restricted_lambda_mode
from derivlab.perturb import PerturbationSpec, extend_with_annihilator, make_annihilator_perturbation
from derivlab.sampling import ball_point, generator


@pytest.fixture(scope="module")
def setup():
    a = make_matrix_algebra(2)
    module, ann = extend_with_annihilator(regular_bimodule(a))
    sid = identity_map(a)
    x0 = module.element(ball_point(module, generator(41, "x0"), 1.0))
    d0 = inner_derivation(module, sid, sid, x0)
    return a, module, ann, sid, d0


def perturbed(setup, epsilon, seed=51):
    a, module, ann, sid, d0 = setup
    triple = DerivationTriple(d0, sid, sid)
    spec = PerturbationSpec(mode="annihilator", epsilon=epsilon, seed=seed)
    return make_annihilator_perturbation(triple, spec, ann)


class TestExtractAdditive:
    def test_exactly_linear_input_one_iteration(self, setup):
        a, module, _, _, d0 = setup
        report = extract_additive(PointMap.from_linear_map(d0), constant_control(1e-6))
        assert all(it == 1 for it in report.per_basis_iterations)
        assert np.abs(report.limit.matrix - d0.matrix).max() <= 1e-14

    def test_reextraction_is_bit_identical(self, setup):
        a, module, _, _, d0 = setup
        phi = constant_control(1e-6)
        first = extract_additive(PointMap.from_linear_map(d0), phi, seed=1)
        second = extract_additive(PointMap.from_linear_map(first.limit), phi, seed=1)
        assert np.array_equal(first.limit.matrix, second.limit.matrix)

    def test_bounded_perturbation_vanishes_in_limit(self, setup):
        # oracle: the unperturbed matrix itself
        _, _, _, _, d0 = setup
        maps = perturbed(setup, 1e-3)
        report = extract_additive(maps.f, maps.control, tol=1e-11, seed=2)
        assert np.abs(report.limit.matrix - d0.matrix).max() <= 1e-10

    def test_bound_check_holds_on_reported_samples(self, setup):
        maps = perturbed(setup, 1e-2)
        report = extract_additive(maps.f, maps.control, seed=3)
        assert report.bound_ok
        for sample in report.bound_check:
            assert sample.lhs <= sample.rhs + 1e-9 * (1.0 + sample.rhs)

    def test_apriori_and_aposteriori_consistency(self, setup):
        # realized error at each basis point is below the full series bound,
        # which splits as partial sum at the stop index plus the tail
        a, _, _, _, d0 = setup
        maps = perturbed(setup, 1e-2)
        report = extract_additive(maps.f, maps.control, seed=4)
        for i in range(a.dim):
            basis = a.basis_element(i)
            realized = (maps.f.eval(basis) - report.limit.apply(basis)).norm()
            n_stop = report.per_basis_iterations[i]
            budget = partial_sum_bound(maps.control, basis, n_stop) + report.per_basis_tail_bound[i]
            total = summed_control(maps.control, basis, basis).upper
            assert realized <= total + 1e-12
            assert budget <= total + 1e-12

    def test_uniqueness_across_budgets(self, setup):
        maps = perturbed(setup, 1e-3)
        first = extract_additive(maps.f, maps.control, max_n=48, tol=1e-10, seed=5)
        second = extract_additive(maps.f, maps.control, max_n=40, tol=1e-10, seed=5)
        assert np.abs(first.limit.matrix - second.limit.matrix).max() <= 10 * 1e-10

    def test_doubling_identity_exact(self, setup):
        maps = perturbed(setup, 1e-3)
        report = extract_additive(maps.f, maps.control, seed=6)
        rng = generator(7, "doubling")
        a = ball_point(report.limit.domain, rng, 1.0)
        assert np.array_equal(
            report.limit.apply_coords(2.0 * a), 2.0 * report.limit.apply_coords(a)
        )

    def test_zero_not_fixed_rejected(self, setup):
        a, module, _, _, _ = setup
        shift = module.basis_element(0)

        def evaluator(x):
            return module.element(shift.coords + 0.0 * x.coords[0])

        with pytest.raises(PreconditionError):
            PointMap(evaluator, a, module)

    def test_nonconvergence_raises_with_diagnostics(self, setup):
        # sublinear growth: deltas decay like 2^(-n/10), far too slow for
        # the budget, and the matching control keeps the tail above tol
        a, module, _, _, _ = setup
        direction = module.basis_element(0)

        def evaluator(x):
            return module.element(x.norm() ** 0.9 * direction.coords)

        pmap = PointMap(evaluator, a, module)
        phi = PNormControl(0.0, 1.0, 0.9)
        with pytest.raises(ConvergenceError) as err:
            extract_additive(pmap, phi, max_n=48, tol=1e-10)
        assert "delta" in str(err.value)

    def test_uncontrolled_defect_caught_by_additivity_guard(self, setup):
        # superlinear defect: the constant control's tail certificate stops
        # the iteration early, but the pointwise limits cannot be additive
        a, module, _, _, _ = setup
        direction = module.basis_element(1)

        def evaluator(x):
            return module.element(x.norm() ** 1.2 * direction.coords)

        pmap = PointMap(evaluator, a, module)
        with pytest.raises(ConvergenceError):
            extract_additive(pmap, constant_control(1e-3), max_n=48, tol=1e-8)


class TestExtractTriple:
    def test_exact_inputs_are_their_own_limits(self, setup):
        a, module, _, sid, d0 = setup
        phi = constant_control(1e-9)
        result = extract_triple(
            PointMap.from_linear_map(d0),
            PointMap.from_linear_map(sid),
            PointMap.from_linear_map(sid),
            phi,
        )
        assert np.array_equal(result.sigma.limit.matrix, np.eye(a.dim))
        assert np.array_equal(result.tau.limit.matrix, np.eye(a.dim))
        assert np.array_equal(result.d.limit.matrix, d0.matrix)

    def test_linear_twist_maps_extract_exactly(self, setup):
        # a linear endomorphism candidate is fixed by the doubling limit,
        # bit for bit, even when the main map carries noise
        from derivlab import conjugation_map

        a, module, ann, _, _ = setup
        u = a.unit_coords.copy()
        u[1] += 1.0
        conj = conjugation_map(a, u)
        x0 = module.element(ball_point(module, generator(42, "x1"), 1.0))
        d0 = inner_derivation(module, conj, conj, x0)
        triple = DerivationTriple(d0, conj, conj)
        spec = PerturbationSpec(mode="annihilator", epsilon=1e-3, seed=52)
        maps = make_annihilator_perturbation(triple, spec, ann)
        result = extract_triple(maps.f, maps.g_sigma, maps.g_tau, maps.control, seed=8)
        assert np.array_equal(result.tau.limit.matrix, conj.matrix)
        assert np.array_equal(result.sigma.limit.matrix, conj.matrix)

    def test_perturbed_triple_leibniz_residual(self, setup):
        from derivlab import leibniz_residual

        a, module, _, _, _ = setup
        maps = perturbed(setup, 1e-3)
        result = extract_triple(maps.f, maps.g_sigma, maps.g_tau, maps.control, seed=9)
        triple = DerivationTriple(result.d.limit, result.sigma.limit, result.tau.limit)
        rng = generator(10, "leibniz")
        worst = 0.0
        for _ in range(500):
            u = a.element(ball_point(a, rng, 1.0))
            v = a.element(ball_point(a, rng, 1.0))
            worst = max(worst, leibniz_residual(triple, u, v))
        assert worst <= 1e-9


class TestStabilityBound:
    def test_exact_map_never_violates(self, setup):
        _, _, _, _, d0 = setup
        pmap = PointMap.from_linear_map(d0)
        report = verify_stability_bound(pmap, d0, constant_control(0.0), samples=200, seed=11)
        assert report.satisfied
        assert report.max_violation <= 0.0

    def test_certified_perturbation_zero_violations(self, setup):
        maps = perturbed(setup, 1e-2)
        extraction = extract_additive(maps.f, maps.control, seed=12)
        report = verify_stability_bound(maps.f, extraction.limit, maps.control,
                                        samples=1000, seed=13)
        assert report.num_violations == 0

    def test_adversarial_map_flagged_not_raised(self, setup):
        # a linear bias survives the doubling limit, so pretending the
        # limit is d0 must produce reported violations
        a, module, _, _, d0 = setup
        bias = np.zeros((module.dim, a.dim), dtype=complex)
        bias[0, 0] = 1.0
        biased = LinearMap(d0.matrix + bias, a, module)
        report = verify_stability_bound(
            PointMap.from_linear_map(biased), d0, constant_control(1e-3),
            samples=200, seed=14,
        )
        assert report.num_violations > 0
        assert report.max_violation > 0
        assert report.worst_point is not None


class TestRestrictedLambdaMode:
    def test_extraction_unchanged_and_complex_homogeneous(self, setup):
        restricted_lambda_mode(True)
        try:
            maps = perturbed(setup, 1e-3)
            report = extract_additive(maps.f, maps.control, seed=15)
            lam = np.exp(1j * np.pi / 4)
            rng = generator(16, "homog")
            a = ball_point(report.limit.domain, rng, 1.0)
            # the assembled matrix is complex-linear by construction
            assert np.allclose(
                report.limit.apply_coords(lam * a),
                lam * report.limit.apply_coords(a),
                atol=1e-14,
            )
        finally:
            restricted_lambda_mode(False)

    def test_toggle_changes_grid(self):
        from derivlab.hyers import current_lambda_mode, lambda_grid

        assert current_lambda_mode() == "full"
        assert len(lambda_grid()) == 64
        restricted_lambda_mode(True)
        try:
            assert current_lambda_mode() == "one-i"
            assert np.array_equal(lambda_grid(), np.array([1.0 + 0j, 1j]))
        finally:
            restricted_lambda_mode(False)
