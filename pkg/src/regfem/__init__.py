"""Finite elements for elliptic interface problems with regularized forcing.

The singular surface term int_Gamma f v is replaced by a convolution with a
scaled approximate Dirac kernel; this package provides the kernels, structured
meshes, a Q1 solver, the two right-hand-side assemblies (regularized and
direct), and a convergence-study harness for the shipped benchmark cases.
"""

from .analysis import (ConvergenceRow, RatePrediction, StudyConfig, TestCase,
                       boundary_g, dof_slope, eoc, exact_grad_u, exact_u,
                       fitted_slopes, h1_error, l2_error, make_case,
                       predicted_rates, run_convergence)
from .coupling import (SpatialIndex, SupportOverflowError, SurfaceQuadrature,
                       assemble_rhs_direct, assemble_rhs_regularized,
                       rhs_consistency_gap, surface_quadrature)
from .fem import (FeFunction, FeSpace, PointLocationError, SolverError,
                  apply_dirichlet, assemble_stiffness, assemble_volume_load,
                  dump_matrix_triplets, evaluate, evaluate_gradient,
                  locate_points, make_space, solve_cg)
from .kernels import (KERNEL_NAMES, MollifierKernel, Profile, ScaledDirac,
                      certify_moment_order, eval_kernel, eval_profile,
                      eval_scaled, l1_growth, make_kernel, moment)
from .mesh import (InterfaceDescriptor, SurfaceMesh, VolumeMesh,
                   build_interface, build_volume, closest_point_project,
                   dump_mesh, refine_global, volume_mesh_size)

__version__ = "0.1.0"
