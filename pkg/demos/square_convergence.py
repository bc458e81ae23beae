"""Convergence of the regularized method on the unit-square benchmark.

The exact solution is the log potential of a circle of radius 0.2; the jump
in its normal derivative is smeared over a band of width eps = h by the
tensor-product cosine kernel.  With four refinements the L2 error should
decay like #DoFs^(-3/4) and the H1 error like #DoFs^(-1/4).
"""

from regfem import StudyConfig, fitted_slopes, predicted_rates, run_convergence
from regfem.cli import format_csv

cfg = StudyConfig(case="square", kernel="tensor-c1", q=1.0, c=1.0, levels=4)
rows = run_convergence(cfg)
print(format_csv(rows), end="")

h1, l2 = fitted_slopes(rows)
pred = predicted_rates("square", cfg.q)
print(f"\nfitted DoF slopes:    H1 {h1:+.3f}   L2 {l2:+.3f}")
print(f"predicted slopes:     H1 {pred.h1_dof_slope:+.3f}   "
      f"L2 {pred.l2_dof_slope:+.3f}")
