"""Tour of the structural layer: algebras, norms, modules, annihilators.

Every algebra is given by structure constants and carries a weighted l1
norm certified to be submultiplicative at construction. Run with

    python3 demos/01_algebras_and_norms.py
"""
import numpy as np

from derivlab import (
    dual_bimodule,
    get_algebra,
    left_annihilator,
    make_algebra,
    right_annihilator,
)
from derivlab.algebra import regular_bimodule

# The builtin registry covers the fixtures used throughout the package.
for name in ("matrix:2", "dual-numbers", "upper-triangular:3", "zero-product:2"):
    algebra = get_algebra(name)
    ran = right_annihilator(algebra).shape[0]
    lan = left_annihilator(algebra).shape[0]
    unital = "unital" if algebra.unit_coords is not None else "non-unital"
    print(f"{name:20s} dim={algebra.dim:2d} {unital:10s} ran-dim={ran} lan-dim={lan}")

# In matrix:2, basis index p = 2*i + j is the matrix unit with a single 1
# at row i, column j. Their products follow the delta rule:
m2 = get_algebra("matrix:2")
e01, e10 = m2.basis_element(1), m2.basis_element(2)
print("\nE01 * E10 =", (e01 * e10).coords, " (the top-left matrix unit)")
print("E01 * E01 =", (e01 * e01).coords, " (zero: the indices do not chain)")

# The norm is submultiplicative by construction, not by sampling luck.
a = m2.element([1 + 2j, 0.5, -1, 0.25j])
b = m2.element([0, 3, -2j, 1])
print(f"\n|a b| = {(a * b).norm():.6f} <= |a| |b| = {a.norm() * b.norm():.6f}")

# Weights rescale automatically when the raw ones fail the basis-pair
# certification. Here e1*e1 = 4*e0 forces a factor of 4.
structure = np.zeros((2, 2, 2), dtype=complex)
structure[0, 0, 0] = structure[0, 1, 1] = structure[1, 0, 1] = 1.0
structure[1, 1, 0] = 4.0
loud = make_algebra(structure, unit_index=0)
print("\nrescale factor for the loud product:", loud.rescale_factor)
print("certified weights:", loud.norm_weights)

# Modules: the algebra acting on itself, and its dual with the exact dual
# norm (a weighted sup norm). The double dual returns the original tensors
# entrywise.
module = regular_bimodule(m2)
dual = dual_bimodule(module)
double = dual_bimodule(dual)
print("\nregular module action bound:", module.action_bound)
print("dual module norm kind:", dual.norm_kind)
print("double dual tensors identical:",
      np.array_equal(double.left_action, module.left_action))
