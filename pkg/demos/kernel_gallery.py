"""Tour of the shipped approximate-Dirac kernels.

Prints, for each kernel, its support radius, mass, certified moment order,
and how the L1 norm of |x| delta_eps shrinks with epsilon -- the quantities
that drive the convergence rates of the regularized assembly.
"""

import numpy as np

from regfem import KERNEL_NAMES, ScaledDirac, l1_growth, make_kernel, moment

print("kernel        r0      mass          |moment (1,0)|   certified k")
for name in KERNEL_NAMES:
    k = make_kernel(name, 2).with_certified_order()
    mass = moment(k, (0, 0))
    m1 = abs(moment(k, (1, 0)))
    print(f"{name:12s}  {k.support_radius:.3f}   {mass:.12f}  {m1:.2e}"
          f"         {k.moment_order}")

print()
print("L1 norm of |x| delta_eps, halving eps each row (ratio -> 2):")
k = make_kernel("tensor-c1", 2)
prev = None
for eps in (0.4, 0.2, 0.1, 0.05):
    val = l1_growth(ScaledDirac(k, eps), 1)
    ratio = "" if prev is None else f"   ratio {prev / val:.4f}"
    print(f"  eps = {eps:5.2f}   {val:.6e}{ratio}")
    prev = val
