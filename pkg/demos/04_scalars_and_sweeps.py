"""Unit-circle scalar machinery and parameter sweeps.

Any scalar of modulus at most 3 splits into three unimodular scalars;
replaying that split through a matrix reproduces full complex scaling
from additivity alone. The sweep at the end reproduces the stability
envelope across noise sizes as plot-ready CSV. Run with

    python3 demos/04_scalars_and_sweeps.py
"""
import numpy as np

from derivlab import (
    make_matrix_algebra,
    scalar_homogeneity_certificate,
    three_unimodular,
)
from derivlab.algebra import LinearMap
from derivlab.cli import ExperimentConfig, sweep
from derivlab.sampling import ball_point, generator

print("three-unimodular splits:")
for w in (3.0, 1.5, 0.0, -2.0 + 1.0j):
    triple = three_unimodular(w)
    parts = ", ".join(f"{t:.4f}" for t in triple.as_tuple())
    print(f"  {w!s:12s} = {parts}   (sum error {abs(triple.total - w):.1e})")

# The homogeneity chain: gamma sliced into M steps of modulus < 3/4, each
# split into three unimodulars, all pushed through a matrix. The result
# must land on gamma times the matrix value.
algebra = make_matrix_algebra(2)
rng = generator(404, "demo")
d = LinearMap(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)),
              algebra, algebra)
a = algebra.element(ball_point(algebra, rng, 1.0))
for gamma in (1.0, 2.0 + 3.0j, -17.25, 1e4 * 1j):
    defect = scalar_homogeneity_certificate(d, gamma, a)
    print(f"homogeneity defect at gamma={gamma!s:12s}: {defect:.2e}")

# Sweep: one CSV row per noise size, realized worst error against the
# summed-control envelope on unit-norm samples.
print("\nepsilon sweep (extract pipeline):")
config = ExperimentConfig(fixture="matrix:2", seed=5, samples=200)
print(sweep(config, {"perturbation.epsilon": [1e-1, 1e-2, 1e-3]}))
