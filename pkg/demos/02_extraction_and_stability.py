"""The direct method at work: from a noisy map to its exact linear limit.

A derivation d0 is hidden behind bounded noise valued in a killed
direction of the module, which certifies a constant defect budget. The
doubling iteration recovers d0, and the distance from the noisy map to
the limit stays below the summed control at every sampled point. Run with

    python3 demos/02_extraction_and_stability.py
"""
import numpy as np

from derivlab import (
    DerivationTriple,
    PerturbationSpec,
    extend_with_annihilator,
    extract_additive,
    identity_map,
    inner_derivation,
    make_annihilator_perturbation,
    make_matrix_algebra,
    verify_stability_bound,
)
from derivlab.algebra import regular_bimodule
from derivlab.sampling import ball_point, generator

algebra = make_matrix_algebra(2)
module, killed = extend_with_annihilator(regular_bimodule(algebra))
ident = identity_map(algebra)

x = module.element(ball_point(module, generator(2024, "x"), 1.0))
d0 = inner_derivation(module, ident, ident, x)
triple = DerivationTriple(d0, ident, ident)

print(f"{'epsilon':>10s} {'budget':>10s} {'|d - d0|':>12s} "
      f"{'iterations':>10s} {'violations':>10s}")
for epsilon in (1e-1, 1e-2, 1e-3, 1e-4):
    spec = PerturbationSpec(mode="annihilator", epsilon=epsilon, seed=99)
    maps = make_annihilator_perturbation(triple, spec, killed)
    report = extract_additive(maps.f, maps.control, seed=1)
    stability = verify_stability_bound(maps.f, report.limit, maps.control,
                                       samples=1000, seed=2)
    drift = np.abs(report.limit.matrix - d0.matrix).max()
    print(f"{epsilon:10.0e} {maps.control.alpha:10.0e} {drift:12.2e} "
          f"{max(report.per_basis_iterations):10d} {stability.num_violations:10d}")

print("\nThe budget column is the certified constant control (three times")
print("the noise size); the recovered map drifts from the hidden one by")
print("orders of magnitude less, and the distance |f(a) - d(a)| never")
print("exceeds the summed control on a thousand sampled points per row.")
