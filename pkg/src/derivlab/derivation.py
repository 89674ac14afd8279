"""Twisted derivations: residuals, subspaces, inner solves and verdicts.

A linear map d : A -> X is a twisted derivation for a pair of linear maps
(sigma, tau) on A when d(ab) = d(a).sigma(b) + tau(a).d(b). The set of such
maps is the nullspace of an explicit linear system; the inner ones, those of
the form d_x(a) = x.sigma(a) - tau(a).x, form the image of an explicit
linear map from the module. Comparing the two subspaces decides
contractibility, and the same comparison on the dual module decides
amenability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    AlgebraElement,
    Bimodule,
    FiniteAlgebra,
    LinearMap,
    ModuleElement,
    act_left,
    act_right,
    dual_bimodule,
    mul,
    right_annihilator,
)
from .control import ControlFunction
from .encoding import encode_complex
from .errors import PreconditionError, SpaceMismatchError
from .sampling import SCALE_GRID, ball_point, generator

SVD_RTOL = 1e-10
MEMBERSHIP_TOL = 1e-9

VERDICT_CONTRACTIBLE = "contractible"
VERDICT_NOT_CONTRACTIBLE = "not_contractible"


@dataclass(frozen=True)
class DerivationTriple:
    """A candidate derivation with its two twisting maps."""

    d: LinearMap
    sigma: LinearMap
    tau: LinearMap

    def __post_init__(self):
        algebra = self.d.domain
        for name, m in (("sigma", self.sigma), ("tau", self.tau)):
            if not (m.domain.same_space(algebra) and m.codomain.same_space(algebra)):
                raise SpaceMismatchError(f"{name} must be an operator on the algebra")
        module = self.d.codomain
        if isinstance(module, Bimodule) and not module.algebra.same_space(algebra):
            raise SpaceMismatchError("derivation codomain is a module over a different algebra")

    @property
    def algebra(self) -> FiniteAlgebra:
        return self.d.domain

    @property
    def module(self) -> Bimodule:
        return self.d.codomain


def leibniz_residual(triple: DerivationTriple, a: AlgebraElement, b: AlgebraElement) -> float:
    """|d(ab) - d(a).sigma(b) - tau(a).d(b)| in the module norm."""
    d, sigma, tau = triple.d, triple.sigma, triple.tau
    lhs = d.apply(mul(a, b))
    first = act_right(d.apply(a), sigma.apply(b))
    second = act_left(tau.apply(a), d.apply(b))
    return (lhs - first - second).norm()


def endomorphism_residual(s: LinearMap, a: AlgebraElement, b: AlgebraElement) -> float:
    """|s(ab) - s(a) s(b)| in the algebra norm."""
    return (s.apply(mul(a, b)) - mul(s.apply(a), s.apply(b))).norm()


def _basis_endo_residual(algebra: FiniteAlgebra, s: LinearMap) -> float:
    """Worst |s(e_i e_j) - s(e_i) s(e_j)| over all basis pairs."""
    worst = 0.0
    for i in range(algebra.dim):
        ei = algebra.basis_element(i)
        for j in range(algebra.dim):
            worst = max(worst, endomorphism_residual(s, ei, algebra.basis_element(j)))
    return worst


@dataclass
class EndoCertificate:
    """Sampled evidence that the first twisting map multiplies correctly.

    The cancellation identity d(c).(sigma(ab) - sigma(a)sigma(b)) = 0 holds
    whenever tau is multiplicative; it upgrades to 'sigma is an
    endomorphism' when the algebra has no annihilating directions to hide
    in, which is what the two side-condition flags report.
    """

    max_cancellation: float
    tau_basis_residual: float
    ran_trivial: bool
    d_full_row_rank: bool
    samples: int

    def to_dict(self) -> dict:
        return {
            "max_cancellation": self.max_cancellation,
            "tau_basis_residual": self.tau_basis_residual,
            "ran_trivial": self.ran_trivial,
            "d_full_row_rank": self.d_full_row_rank,
            "samples": self.samples,
        }


def sigma_endo_certificate(triple: DerivationTriple, samples: int = 200,
                           seed: int = 0) -> EndoCertificate:
    """Evaluate |d(c).(sigma(ab) - sigma(a)sigma(b))| on sampled triples.

    Also reports whether the right annihilator of the algebra is trivial
    and whether d has full row rank (surjectivity onto the module), the two
    side conditions under which a zero certificate forces sigma to be
    multiplicative (unless d = 0).
    """
    algebra = triple.algebra
    rng = generator(seed, "sigma-endo")
    worst = 0.0
    for _ in range(samples):
        a = algebra.element(ball_point(algebra, rng, 1.0))
        b = algebra.element(ball_point(algebra, rng, 1.0))
        c = algebra.element(ball_point(algebra, rng, 1.0))
        defect = triple.sigma.apply(mul(a, b)) - mul(triple.sigma.apply(a), triple.sigma.apply(b))
        value = act_right(triple.d.apply(c), defect).norm()
        worst = max(worst, value)
    ran = right_annihilator(algebra)
    rank = np.linalg.matrix_rank(triple.d.matrix, tol=None) if triple.d.matrix.size else 0
    return EndoCertificate(
        max_cancellation=float(worst),
        tau_basis_residual=float(_basis_endo_residual(algebra, triple.tau)),
        ran_trivial=bool(ran.shape[0] == 0),
        d_full_row_rank=bool(rank == triple.module.dim),
        samples=samples,
    )


class SubspaceBasis:
    """Orthonormal basis of a space of vectorized linear maps A -> X.

    Vectors are row-major flattenings of (module dim) x (algebra dim)
    matrices, orthonormal under the standard hermitian inner product.
    """

    def __init__(self, vectors: np.ndarray, domain, codomain):
        self.vectors = np.asarray(vectors, dtype=complex)
        self.domain = domain
        self.codomain = codomain
        self.map_shape = (codomain.dim, domain.dim)
        self.vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def matrix(self, index: int) -> np.ndarray:
        return self.vectors[index].reshape(self.map_shape)

    def linear_map(self, index: int) -> LinearMap:
        return LinearMap(self.matrix(index), self.domain, self.codomain)

    def projection_residual(self, vec) -> float:
        """Distance from vec (a flattened map or LinearMap) to the span."""
        if isinstance(vec, LinearMap):
            vec = vec.matrix.reshape(-1)
        v = np.asarray(vec, dtype=complex).reshape(-1)
        if self.dim == 0:
            return float(np.linalg.norm(v))
        coeffs = self.vectors.conj() @ v
        return float(np.linalg.norm(v - self.vectors.T @ coeffs))

    def contains(self, vec, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.projection_residual(vec) <= tol


def _sigma_right_matrices(module: Bimodule, sigma: LinearMap) -> list[np.ndarray]:
    """Per-basis matrices of x -> x.sigma(e_i)."""
    return [module.right_matrix(sigma.matrix[:, i]) for i in range(module.algebra.dim)]


def _tau_left_matrices(module: Bimodule, tau: LinearMap) -> list[np.ndarray]:
    """Per-basis matrices of x -> tau(e_i).x."""
    return [module.left_matrix(tau.matrix[:, i]) for i in range(module.algebra.dim)]


def derivation_space(algebra: FiniteAlgebra, module: Bimodule,
                     sigma: LinearMap, tau: LinearMap,
                     rtol: float = SVD_RTOL) -> SubspaceBasis:
    """Orthonormal basis of all maps D with D(e_i e_j) = D(e_i).sigma(e_j)
    + tau(e_i).D(e_j).

    The constraint is linear in the entries of D, one block of module-dim
    rows per basis pair, and the basis is the SVD nullspace of the stacked
    system with a relative singular-value cutoff.
    """
    n, m = algebra.dim, module.dim
    if m == 0:
        return SubspaceBasis(np.zeros((0, 0), dtype=complex), algebra, module)
    right_sigma = _sigma_right_matrices(module, sigma)
    left_tau = _tau_left_matrices(module, tau)
    eye_m = np.eye(m, dtype=complex)
    blocks = []
    for i in range(n):
        e_i = np.zeros((1, n), dtype=complex)
        e_i[0, i] = 1.0
        for j in range(n):
            e_j = np.zeros((1, n), dtype=complex)
            e_j[0, j] = 1.0
            product_row = algebra.structure[i, j].reshape(1, n)
            block = (
                np.kron(eye_m, product_row)
                - np.kron(right_sigma[j], e_i)
                - np.kron(left_tau[i], e_j)
            )
            blocks.append(block)
    system = np.vstack(blocks)
    _, s, vh = np.linalg.svd(system)
    cutoff = rtol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return SubspaceBasis(vh[rank:].conj(), algebra, module)


def _inner_operator_matrix(algebra: FiniteAlgebra, module: Bimodule,
                           sigma: LinearMap, tau: LinearMap) -> np.ndarray:
    """Matrix of x -> vec(d_x), shape (module dim * algebra dim, module dim)."""
    n, m = algebra.dim, module.dim
    right_sigma = _sigma_right_matrices(module, sigma)
    left_tau = _tau_left_matrices(module, tau)
    op = np.zeros((m * n, m), dtype=complex)
    for i in range(n):
        diff = right_sigma[i] - left_tau[i]
        # column i of d_x lands at vec indices k * n + i
        op[i::n, :] = diff
    return op


def inner_space(algebra: FiniteAlgebra, module: Bimodule,
                sigma: LinearMap, tau: LinearMap,
                rtol: float = SVD_RTOL) -> SubspaceBasis:
    """Orthonormal basis of the image of x -> (a -> x.sigma(a) - tau(a).x)."""
    if module.dim == 0:
        return SubspaceBasis(np.zeros((0, 0), dtype=complex), algebra, module)
    op = _inner_operator_matrix(algebra, module, sigma, tau)
    u, s, _ = np.linalg.svd(op)
    cutoff = rtol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return SubspaceBasis(u[:, :rank].T, algebra, module)


def inner_derivation(module: Bimodule, sigma: LinearMap, tau: LinearMap,
                     x: ModuleElement) -> LinearMap:
    """The map a -> x.sigma(a) - tau(a).x as a LinearMap."""
    algebra = module.algebra
    op = _inner_operator_matrix(algebra, module, sigma, tau)
    vec = op @ x.coords
    return LinearMap(vec.reshape(module.dim, algebra.dim), algebra, module)


@dataclass
class InnerSolveResult:
    """Least-squares solve of x.sigma(e_i) - tau(e_i).x = d(e_i)."""

    feasible: bool
    x: ModuleElement | None
    residual: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "x": None if self.x is None else encode_complex(self.x.coords),
            "residual": self.residual,
            "tolerance": self.tolerance,
        }


def inner_solve(triple: DerivationTriple, tol: float = MEMBERSHIP_TOL) -> InnerSolveResult:
    """Find x with d_x = d, or report infeasibility.

    The stacked system has one module-dim block per algebra basis vector
    and is solved by least squares; the residual judged is the worst basis
    defect |x.sigma(e_i) - tau(e_i).x - d(e_i)| in the module norm, and the
    feasibility threshold scales with the operator norm of d.
    """
    algebra, module = triple.algebra, triple.module
    op = _inner_operator_matrix(algebra, module, triple.sigma, triple.tau)
    rhs = triple.d.matrix.reshape(-1)
    if module.dim == 0:
        return InnerSolveResult(True, module.zero(), 0.0, tol)
    x_coords, *_ = np.linalg.lstsq(op, rhs, rcond=None)
    defect = (op @ x_coords - rhs).reshape(module.dim, algebra.dim)
    residual = max(
        (module.norm(defect[:, i]) for i in range(algebra.dim)), default=0.0
    )
    threshold = tol * (1.0 + triple.d.operator_norm())
    x = module.element(x_coords)
    if residual <= threshold:
        return InnerSolveResult(True, x, float(residual), threshold)
    return InnerSolveResult(False, None, float(residual), threshold)


@dataclass
class ContractibilityReport:
    """Dimensions of the two subspaces and the inclusion verdict."""

    derivation_dim: int
    inner_dim: int
    verdict: str
    witness: LinearMap | None
    max_projection_residual: float
    kind: str = "contractibility"

    @property
    def contractible(self) -> bool:
        return self.verdict == VERDICT_CONTRACTIBLE

    def to_dict(self) -> dict:
        return {
            "derivation_dim": self.derivation_dim,
            "inner_dim": self.inner_dim,
            "verdict": self.verdict,
            "witness": None if self.witness is None else encode_complex(self.witness.matrix),
            "max_projection_residual": self.max_projection_residual,
            "kind": self.kind,
        }


def _require_endomorphisms(algebra: FiniteAlgebra, sigma: LinearMap, tau: LinearMap,
                           tol: float = 1e-10) -> None:
    for name, m in (("sigma", sigma), ("tau", tau)):
        residual = _basis_endo_residual(algebra, m)
        if residual > tol:
            raise PreconditionError(
                f"{name} is not multiplicative (basis residual {residual:.3e}); "
                "contractibility verdicts require endomorphisms"
            )


def is_contractible(algebra: FiniteAlgebra, module: Bimodule,
                    sigma: LinearMap, tau: LinearMap,
                    membership_tol: float = MEMBERSHIP_TOL) -> ContractibilityReport:
    """Decide whether every twisted derivation into the module is inner.

    Computes both subspaces and tests inclusion by projection residuals of
    the derivation basis vectors onto the inner span. The witness, when the
    verdict is negative, is the first derivation basis vector that sticks
    out, reshaped to a map.
    """
    _require_endomorphisms(algebra, sigma, tau)
    derivations = derivation_space(algebra, module, sigma, tau)
    inners = inner_space(algebra, module, sigma, tau)
    witness = None
    worst = 0.0
    for idx in range(derivations.dim):
        residual = inners.projection_residual(derivations.vectors[idx])
        worst = max(worst, residual)
        if residual > membership_tol and witness is None:
            witness = derivations.linear_map(idx)
    verdict = VERDICT_CONTRACTIBLE if witness is None else VERDICT_NOT_CONTRACTIBLE
    return ContractibilityReport(
        derivation_dim=derivations.dim,
        inner_dim=inners.dim,
        verdict=verdict,
        witness=witness,
        max_projection_residual=float(worst),
    )


def is_amenable(algebra: FiniteAlgebra, module: Bimodule,
                sigma: LinearMap, tau: LinearMap,
                membership_tol: float = MEMBERSHIP_TOL) -> ContractibilityReport:
    """Contractibility computed over the dual module."""
    report = is_contractible(algebra, dual_bimodule(module), sigma, tau, membership_tol)
    report.kind = "amenability"
    return report


@dataclass
class RoundtripResult:
    """Outcome of the approximate-to-exact contractibility round trip.

    Feasible outcome: an element x whose inner derivation uniformly
    approximates the original approximate map, with the realized bound
    beta. Infeasible outcome: the exact extracted derivation as a witness
    that no such x exists even approximately (a uniform bound would scale
    away under doubling and force exactness).
    """

    feasible: bool
    x: ModuleElement | None
    beta: float | None
    beta_bound: float | None
    inner_residual: float
    scaling_residual: float | None
    witness: LinearMap | None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "x": None if self.x is None else encode_complex(self.x.coords),
            "beta": self.beta,
            "beta_bound": self.beta_bound,
            "inner_residual": self.inner_residual,
            "scaling_residual": self.scaling_residual,
            "witness": None if self.witness is None else encode_complex(self.witness.matrix),
        }


def approx_contractibility_roundtrip(approx_map, phi: ControlFunction,
                                     algebra: FiniteAlgebra, module: Bimodule,
                                     sigma: LinearMap, tau: LinearMap,
                                     tol: float = MEMBERSHIP_TOL,
                                     samples: int = 1000, seed: int = 0) -> RoundtripResult:
    """Round-trip an approximate twisted derivation through the exact theory.

    Verifies the constant-budget hypotheses by sampling, extracts the exact
    limit d, and solves for an inner representative. On success the
    realized uniform bound beta = max |x.sigma(a) - tau(a).x - f(a)| is
    reported and must not exceed the budget plus the inner residual slack.
    On failure the exact derivation itself certifies that no x works: a
    uniform bound at all scales collapses to zero under doubling.
    """
    from .control import PNormControl
    from .hyers import PointMap, extract_additive
    from .perturb import verify_hypotheses

    if not isinstance(phi, PNormControl) or phi.beta != 0.0:
        raise PreconditionError("round trip requires a constant control budget")
    hypothesis = verify_hypotheses(
        approx_map,
        PointMap.from_linear_map(sigma),
        PointMap.from_linear_map(tau),
        phi,
        samples=max(200, samples // 5),
        seed=seed,
    )
    if hypothesis.verdict != "satisfied":
        raise PreconditionError(
            "the supplied map violates the approximate-derivation hypotheses; "
            f"worst ratio {hypothesis.worst_ratio():.3g}"
        )

    report = extract_additive(approx_map, phi, seed=seed)
    d = report.limit
    triple = DerivationTriple(d, sigma, tau)
    solve = inner_solve(triple, tol)
    alpha = phi.alpha

    if not solve.feasible:
        return RoundtripResult(
            feasible=False,
            x=None,
            beta=None,
            beta_bound=None,
            inner_residual=solve.residual,
            scaling_residual=None,
            witness=d,
        )

    d_x = inner_derivation(module, sigma, tau, solve.x)
    rng = generator(seed, "roundtrip-beta")
    beta = 0.0
    for k in range(samples):
        coords = ball_point(algebra, rng, SCALE_GRID[k % len(SCALE_GRID)])
        lhs = module.norm(d_x.apply_coords(coords) - approx_map.eval_coords(coords))
        beta = max(beta, lhs)
    slack = max(1e-9, solve.residual * (1.0 + max(SCALE_GRID)))
    beta_bound = alpha + slack
    if beta > beta_bound:
        raise PreconditionError(
            f"realized uniform bound {beta:.3e} exceeds the certified budget "
            f"{beta_bound:.3e}"
        )

    # doubling collapse: the inner defect against d, evaluated at 2^40 a
    # and scaled back, stays at the solve residual (exact for linear maps)
    scale = 2.0**40
    scaling_residual = 0.0
    rng = generator(seed, "roundtrip-scaling")
    for _ in range(16):
        coords = ball_point(algebra, rng, 1.0)
        value = module.norm(
            d_x.apply_coords(scale * coords) - d.apply_coords(scale * coords)
        ) / scale
        scaling_residual = max(scaling_residual, value)
    if scaling_residual > 1e-10:
        raise PreconditionError(
            f"doubling collapse failed: residual {scaling_residual:.3e}"
        )

    return RoundtripResult(
        feasible=True,
        x=solve.x,
        beta=float(beta),
        beta_bound=float(beta_bound),
        inner_residual=solve.residual,
        scaling_residual=float(scaling_residual),
        witness=None,
    )
