"""Manufactured approximate derivations and hypothesis verification.

The annihilator construction is the workhorse: noise valued in a subspace
killed by both module actions makes every product cross term vanish
exactly, so the additivity and product-rule defects are globally certified
by a constant budget rather than merely sampled. The clamped construction
trades that certificate for arbitrary control shapes inside a bounded
trust region, verified honestly by sampling; outside the safe regime the
cross terms grow with the partner's norm, which is exactly the negative
control the verifier is expected to flag.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import Bimodule, module_annihilator
from .control import ControlFunction, constant_control, control_from_dict
from .encoding import encode_complex
from .errors import ConstructionError, PreconditionError
from .hyers import PointMap, current_lambda_mode, lambda_grid
from .sampling import SCALE_GRID, ball_point, generator, hashed_unit_floats

QUANT_GRID = 2.0**-20


@dataclass(frozen=True)
class PerturbationSpec:
    """Recipe for a manufactured perturbation.

    mode "annihilator": bounded noise of size epsilon valued in a killed
    subspace. mode "clamped": noise bounded by the control inside a trust
    region of the given radius, smoothly cut off at twice the radius.
    """

    mode: str
    epsilon: float = 0.0
    control: ControlFunction | None = None
    region_radius: float = 1.0
    cap: float = float("inf")
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("annihilator", "clamped"):
            raise ConstructionError(f"unknown perturbation mode {self.mode!r}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0.0:
            raise ConstructionError("epsilon must be finite and nonnegative")
        if self.mode == "clamped":
            if self.control is None:
                raise ConstructionError("clamped mode needs a control function")
            if not self.region_radius > 0.0:
                raise ConstructionError("region_radius must be positive")

    def to_dict(self) -> dict:
        if self.mode == "annihilator":
            return {"mode": "annihilator", "epsilon": self.epsilon, "seed": self.seed}
        doc = {
            "mode": "clamped",
            "control": self.control.to_dict(),
            "region_radius": self.region_radius,
            "seed": self.seed,
        }
        if np.isfinite(self.cap):
            doc["cap"] = self.cap
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "PerturbationSpec":
        mode = doc.get("mode")
        if mode == "annihilator":
            return PerturbationSpec(
                mode="annihilator",
                epsilon=float(doc.get("epsilon", 0.0)),
                seed=int(doc.get("seed", 0)),
            )
        if mode == "clamped":
            return PerturbationSpec(
                mode="clamped",
                control=control_from_dict(doc["control"]),
                region_radius=float(doc.get("region_radius", 1.0)),
                cap=float(doc.get("cap", float("inf"))),
                seed=int(doc.get("seed", 0)),
            )
        raise ConstructionError(f"unknown perturbation mode {mode!r}")


def _keyed_direction(seed: int, label: bytes, coords: np.ndarray, out_dim: int):
    """Deterministic (direction, magnitude) keyed by the quantized input.

    The input coordinates are snapped to a 2^-20 grid so the noise is a
    genuine function of its argument; the snapped bytes plus the seed key a
    hash stream that yields a complex direction and a magnitude in [0, 1).
    Returns zeros at the (snapped) origin so the noise fixes 0.
    """
    snapped = np.round(coords / QUANT_GRID) * QUANT_GRID
    snapped = np.where(snapped == 0.0, 0.0, snapped)  # normalize -0.0
    if out_dim == 0 or not np.any(snapped != 0.0):
        return np.zeros(out_dim, dtype=complex), 0.0
    payload = (
        int(seed).to_bytes(8, "little", signed=True)
        + label
        + np.ascontiguousarray(snapped).tobytes()
    )
    floats = hashed_unit_floats(payload, 2 * out_dim + 1)
    direction = (2.0 * floats[:out_dim] - 1.0) + 1j * (2.0 * floats[out_dim:2 * out_dim] - 1.0)
    magnitude = floats[-1] * (1.0 - 1e-12)
    return direction, magnitude


@dataclass
class PerturbedMaps:
    """An approximate derivation with its two approximate twisting maps."""

    f: PointMap
    g_sigma: PointMap
    g_tau: PointMap
    control: ControlFunction
    report: "HypothesisReport | None" = None


def extend_with_annihilator(module: Bimodule, k: int = 1):
    """Append a k-dimensional summand with zero actions on both sides.

    Returns the extended module and the orthonormal basis (rows) of the
    appended annihilator directions. Standard fixture: every bimodule can
    host certified annihilator noise after this extension.
    """
    if module.norm_kind != "l1":
        raise ConstructionError("only weighted-l1 modules can be extended")
    if k < 1:
        raise ConstructionError("extension dimension must be at least 1")
    n, m = module.algebra.dim, module.dim
    left = np.zeros((n, m + k, m + k), dtype=complex)
    right = np.zeros((m + k, n, m + k), dtype=complex)
    left[:, :m, :m] = module.left_action
    right[:m, :, :m] = module.right_action
    weights = np.concatenate([module.norm_weights, np.ones(k)])
    extended = Bimodule(module.algebra, left, right, weights=weights)
    basis = np.zeros((k, m + k), dtype=complex)
    for j in range(k):
        basis[j, m + j] = 1.0
    return extended, basis


def _check_annihilator_basis(module: Bimodule, basis: np.ndarray, tol: float = 1e-12):
    n = module.algebra.dim
    eye = np.eye(n)
    for z in basis:
        for i in range(n):
            if (
                module.norm(module.left_matrix(eye[i]) @ z) > tol
                or module.norm(module.right_matrix(eye[i]) @ z) > tol
            ):
                raise ConstructionError(
                    "supplied basis is not annihilated by the module actions"
                )


def make_annihilator_perturbation(d0, spec: PerturbationSpec, annihilator_basis=None):
    """Perturb a derivation triple by noise valued in a killed subspace.

    f(a) = d(a) + eta(a) with |eta(a)| <= epsilon and eta input-keyed
    deterministic; the twisting maps are passed through exactly. Since the
    noise values are annihilated by both actions, every cross term in the
    product defect vanishes identically and the defects are globally
    bounded: additivity by 3 epsilon, the product rule by epsilon. The
    returned control, constant 3 epsilon, therefore certifies the
    hypotheses everywhere, not just on samples.
    """
    if spec.mode != "annihilator":
        raise ConstructionError("spec mode must be 'annihilator'")
    module = d0.module
    basis = module_annihilator(module) if annihilator_basis is None else np.asarray(
        annihilator_basis, dtype=complex
    )
    if basis.shape[0] == 0 and spec.epsilon > 0.0:
        raise ConstructionError(
            "the module has no killed directions to host the noise; "
            "extend it first (extend_with_annihilator)"
        )
    if basis.shape[0]:
        _check_annihilator_basis(module, basis)
    epsilon = spec.epsilon
    seed = spec.seed
    d_matrix = d0.d

    def evaluator(a):
        value = d_matrix.apply_coords(a.coords)
        if epsilon > 0.0:
            coeffs, magnitude = _keyed_direction(seed, b"ann", a.coords, basis.shape[0])
            raw = coeffs @ basis
            scale = module.norm(raw)
            if scale > 0.0:
                value = value + (epsilon * magnitude / scale) * raw
        return module.element(value)

    f = PointMap(evaluator, d0.algebra, module)
    g_sigma = PointMap.from_linear_map(d0.sigma)
    g_tau = PointMap.from_linear_map(d0.tau)
    return PerturbedMaps(f, g_sigma, g_tau, constant_control(3.0 * epsilon))


def _smooth_cutoff(t: float, radius: float) -> float:
    # 1 inside the region, smoothly 0 beyond twice the radius
    if t <= radius:
        return 1.0
    if t >= 2.0 * radius:
        return 0.0
    s = (2.0 * radius - t) / radius
    return s * s * (3.0 - 2.0 * s)


def make_clamped_perturbation(d0, spec: PerturbationSpec, samples: int = 10000,
                              seed: int | None = None):
    """Perturb a derivation triple by region-limited noise.

    |eta(a)| <= min(phi(a, a) / 3, cap) inside the trust region, smoothly
    cut off at twice the region radius. Unlike the annihilator mode nothing
    cancels: the product cross terms eta(a).sigma(b) and tau(a).eta(b) grow
    with the partner's norm, so the hypotheses are only verified by
    sampling pairs inside the region and the report must be read, not
    assumed. Oversized regions are expected to fail.
    """
    if spec.mode != "clamped":
        raise ConstructionError("spec mode must be 'clamped'")
    module = d0.module
    phi = spec.control
    radius = spec.region_radius
    cap = spec.cap
    d_matrix = d0.d
    algebra = d0.algebra
    noise_seed = spec.seed

    def evaluator(a):
        value = d_matrix.apply_coords(a.coords)
        norm_a = algebra.norm(a.coords)
        cut = _smooth_cutoff(norm_a, radius)
        if cut > 0.0:
            budget = min(phi.evaluate(a, a) / 3.0, cap) * cut
            if budget > 0.0:
                coeffs, magnitude = _keyed_direction(
                    noise_seed, b"clamp", a.coords, module.dim
                )
                scale = module.norm(coeffs)
                if scale > 0.0:
                    value = value + (budget * magnitude / scale) * coeffs
        return module.element(value)

    f = PointMap(evaluator, algebra, module)
    g_sigma = PointMap.from_linear_map(d0.sigma)
    g_tau = PointMap.from_linear_map(d0.tau)
    # sample inside the trust region: the scale grid stretched to end at it
    region_scales = tuple(s * radius / max(SCALE_GRID) for s in SCALE_GRID)
    report = verify_hypotheses(
        f, g_sigma, g_tau, phi,
        samples=samples,
        seed=spec.seed if seed is None else seed,
        scales=region_scales,
    )
    return PerturbedMaps(f, g_sigma, g_tau, phi, report)


@dataclass
class HypothesisWitness:
    equation: str
    ratio: float
    scale: float
    lam: complex
    a: np.ndarray
    b: np.ndarray

    def to_dict(self) -> dict:
        return {
            "equation": self.equation,
            "ratio": self.ratio,
            "scale": self.scale,
            "lambda": [self.lam.real, self.lam.imag],
            "a": encode_complex(self.a),
            "b": encode_complex(self.b),
        }


@dataclass
class HypothesisReport:
    """Worst sampled defect-to-budget ratios, one per hypothesis family.

    additive_max: additivity defect of the main map under unimodular
    scaling. twist_additive_max: same for the two twisting candidates.
    product_max: the twisted product-rule defect. multiplicative_max: the
    multiplicativity defect of the tau candidate (None when not checked).
    Satisfied means every checked ratio is at most 1.
    """

    additive_max: float
    twist_additive_max: float
    product_max: float
    multiplicative_max: float | None
    samples: int
    lambda_mode: str
    verdict: str = "satisfied"
    witness: HypothesisWitness | None = None

    def maxima(self) -> dict:
        out = {
            "additive_max": self.additive_max,
            "twist_additive_max": self.twist_additive_max,
            "product_max": self.product_max,
        }
        if self.multiplicative_max is not None:
            out["multiplicative_max"] = self.multiplicative_max
        return out

    def worst_ratio(self) -> float:
        return max(self.maxima().values())

    def to_dict(self) -> dict:
        doc = dict(self.maxima())
        if self.multiplicative_max is None:
            doc["multiplicative_max"] = None
        doc.update(
            samples=self.samples,
            lambda_mode=self.lambda_mode,
            verdict=self.verdict,
            witness=None if self.witness is None else self.witness.to_dict(),
        )
        return doc


def _ratio(defect: float, budget: float, dust: float = 0.0) -> float:
    # a zero budget means the defect must vanish; floating point gets a
    # scale-aware dust allowance so exact maps are not flagged
    if budget > 0.0:
        return defect / budget
    return 0.0 if defect <= dust else float("inf")


def verify_hypotheses(f: PointMap, g_sigma: PointMap, g_tau: PointMap,
                      phi: ControlFunction, lambda_mode: str | None = None,
                      samples: int = 2000, seed: int = 0,
                      scales=SCALE_GRID, check_multiplicative: bool = True) -> HypothesisReport:
    """Sample the approximate-derivation hypotheses for arbitrary maps.

    Draws seeded pairs across the scale grid and unimodular scalars from
    the active grid (the full 64 roots of unity, or {1, i} in restricted
    mode), and records the worst defect/budget ratio per hypothesis. The
    verdict is 'violated' with a concrete witness as soon as any ratio
    exceeds 1; violations are report content, never exceptions.
    """
    if f.domain.dim == 0:
        raise PreconditionError("cannot sample a zero-dimensional algebra")
    mode = lambda_mode or current_lambda_mode()
    lambdas = lambda_grid(mode)
    rng = generator(seed, "hypotheses")
    algebra = f.domain
    module = f.codomain

    maxima = {"additive": 0.0, "twist_additive": 0.0, "product": 0.0, "multiplicative": 0.0}
    witness = None

    def record(name, ratio, scale, lam, a, b):
        nonlocal witness
        if ratio > maxima[name]:
            maxima[name] = ratio
        # worst offender across all samples and hypothesis families
        if ratio > 1.0 and (witness is None or ratio > witness.ratio):
            witness = HypothesisWitness(name, float(ratio), float(scale), complex(lam), a, b)

    for k in range(samples):
        scale = scales[k % len(scales)]
        lam = complex(lambdas[k % len(lambdas)])
        a = ball_point(algebra, rng, scale)
        b = ball_point(algebra, rng, scale)
        ea = algebra.element(a)
        eb = algebra.element(b)
        budget = phi.evaluate(ea, eb)
        dust = 1e-12 * (1.0 + scale) * (1.0 + scale)

        fa = f.eval_coords(a)
        fb = f.eval_coords(b)
        defect = module.norm(f.eval_coords(lam * (a + b)) - lam * fa - lam * fb)
        record("additive", _ratio(defect, budget, dust), scale, lam, a, b)

        for g in (g_sigma, g_tau):
            defect = algebra.norm(
                g.eval_coords(lam * (a + b)) - lam * g.eval_coords(a) - lam * g.eval_coords(b)
            )
            record("twist_additive", _ratio(defect, budget, dust), scale, lam, a, b)

        ab = np.einsum("i,j,ijk->k", a, b, algebra.structure)
        product_defect = module.norm(
            f.eval_coords(ab)
            - module.right_matrix(g_sigma.eval_coords(b)) @ fa
            - module.left_matrix(g_tau.eval_coords(a)) @ fb
        )
        record("product", _ratio(product_defect, budget, dust), scale, lam, a, b)

        if check_multiplicative:
            mult_defect = algebra.norm(
                g_tau.eval_coords(ab)
                - np.einsum(
                    "i,j,ijk->k",
                    g_tau.eval_coords(a),
                    g_tau.eval_coords(b),
                    algebra.structure,
                )
            )
            record("multiplicative", _ratio(mult_defect, budget, dust), scale, lam, a, b)

    report = HypothesisReport(
        additive_max=maxima["additive"],
        twist_additive_max=maxima["twist_additive"],
        product_max=maxima["product"],
        multiplicative_max=maxima["multiplicative"] if check_multiplicative else None,
        samples=samples,
        lambda_mode=mode,
        verdict="violated" if witness is not None else "satisfied",
        witness=witness,
    )
    return report
