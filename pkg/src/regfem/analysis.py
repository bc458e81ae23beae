"""Test cases, error norms, convergence rates, and the study driver."""

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import coupling, fem, mesh
from .kernels import ScaledDirac, make_kernel


@dataclass(frozen=True)
class TestCase:
    """One benchmark configuration with its piecewise closed-form solution."""

    kind: str
    dim: int
    center: tuple
    radius: float
    f: float

    @property
    def descriptor(self):
        return mesh.InterfaceDescriptor(self.center, self.radius)


def make_case(kind):
    if kind == "square":
        return TestCase("square", 2, (0.3, 0.3), 0.2, 1.0 / 0.2)
    if kind == "lshape":
        return TestCase("lshape", 2, (-0.5, -0.5), 0.2, 1.5)
    if kind == "cube":
        return TestCase("cube", 3, (0.3, 0.3, 0.3), 0.2, 1.0 / 0.2 ** 2)
    raise ValueError(f"unknown case {kind!r}")


def _log_potential(points, center, radius):
    r = np.linalg.norm(points - np.asarray(center), axis=-1)
    return np.where(r > radius, -np.log(np.maximum(r, 1e-300)), -np.log(radius))


def _log_potential_grad(points, center, radius):
    v = points - np.asarray(center)
    r = np.linalg.norm(v, axis=-1)
    outside = (r > radius)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = -v / (r * r)[..., None]
    return np.where(outside, g, 0.0)


def _corner_angle(points):
    """Polar angle in [0, 2 pi) with the branch cut on {x >= 0, y = 0}."""
    theta = np.arctan2(points[..., 1], points[..., 0])
    return np.where(theta < 0.0, theta + 2.0 * np.pi, theta)


def exact_u(case, points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if case.kind == "square":
        return _log_potential(points, case.center, case.radius)
    if case.kind == "lshape":
        rr = np.linalg.norm(points, axis=-1)
        theta = _corner_angle(points)
        corner = rr ** (1.0 / 3.0) * np.sin(theta / 3.0)
        return corner + 0.3 * _log_potential(points, case.center, case.radius)
    if case.kind == "cube":
        r = np.linalg.norm(points - np.asarray(case.center), axis=-1)
        return np.where(r > case.radius, 1.0 / np.maximum(r, 1e-300),
                        1.0 / case.radius)
    raise ValueError(case.kind)


def exact_grad_u(case, points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if case.kind == "square":
        return _log_potential_grad(points, case.center, case.radius)
    if case.kind == "lshape":
        rr = np.linalg.norm(points, axis=-1)
        theta = _corner_angle(points)
        with np.errstate(divide="ignore", invalid="ignore"):
            amp = (1.0 / 3.0) * rr ** (-2.0 / 3.0)
        er = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        et = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        corner = amp[..., None] * (np.sin(theta / 3.0)[..., None] * er
                                   + np.cos(theta / 3.0)[..., None] * et)
        return corner + 0.3 * _log_potential_grad(points, case.center, case.radius)
    if case.kind == "cube":
        v = points - np.asarray(case.center)
        r = np.linalg.norm(v, axis=-1)
        outside = (r > case.radius)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = -v / (r ** 3)[..., None]
        return np.where(outside, g, 0.0)
    raise ValueError(case.kind)


def boundary_g(case):
    """Dirichlet datum: the trace of the exact solution."""
    return lambda points: exact_u(case, points)


def _cellwise_errors(fe, case, quad_order):
    msh = fe.space.mesh
    dim = msh.dim
    ref_pts, ref_wts = fem.gauss_rule(dim, quad_order)
    values, grads = fem.shape_eval(dim, ref_pts)
    l2_sq = 0.0
    h1_semi_sq = 0.0
    for start in range(0, msh.n_cells, fem._CHUNK):
        conn = msh.cells[start:start + fem._CHUNK]
        coords = msh.vertices[conn]
        coefs = fe.coefficients[conn]
        J = np.einsum("qia,cib->cqba", grads, coords)
        detJ = np.linalg.det(J)
        gphys = np.einsum("qia,cqab->cqib", grads, np.linalg.inv(J))
        phys = np.einsum("qi,cia->cqa", values, coords)
        flat = phys.reshape(-1, dim)
        uh = coefs @ values.T                              # (nc, nq)
        du = uh - exact_u(case, flat).reshape(uh.shape)
        guh = np.einsum("cqia,ci->cqa", gphys, coefs)
        dg = guh - exact_grad_u(case, flat).reshape(guh.shape)
        wdet = ref_wts[None, :] * detJ
        l2_sq += float(np.sum(wdet * du * du))
        h1_semi_sq += float(np.sum(wdet * np.sum(dg * dg, axis=-1)))
    return l2_sq, h1_semi_sq


def l2_error(fe, case, quad_order=4):
    l2_sq, _ = _cellwise_errors(fe, case, quad_order)
    return np.sqrt(l2_sq)


def h1_error(fe, case, quad_order=4):
    """Full H1 norm of the error (L2 part plus gradient part)."""
    l2_sq, h1_semi_sq = _cellwise_errors(fe, case, quad_order)
    return np.sqrt(l2_sq + h1_semi_sq)


def eoc(errors, hs):
    """Experimental orders of convergence between consecutive levels."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if len(errors) < 2:
        raise ValueError("need at least two levels for an EOC")
    if np.any(errors <= 0.0):
        raise ValueError("EOC undefined for zero error values")
    return list(np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:]))


def dof_slope(errors, dofs, last=3):
    """Least-squares slope of log error vs log #DoFs over the last levels."""
    errors = np.asarray(errors, dtype=float)
    dofs = np.asarray(dofs, dtype=float)
    if np.any(errors <= 0.0):
        raise ValueError("slope undefined for zero error values")
    sl = slice(-last, None) if len(errors) > last else slice(None)
    return float(np.polyfit(np.log(dofs[sl]), np.log(errors[sl]), 1)[0])


@dataclass(frozen=True)
class RatePrediction:
    """Expected log error vs log #DoFs slopes for epsilon = c * h^q."""

    kind: str
    q: float
    h1_dof_slope: float
    l2_dof_slope: float


def predicted_rates(case_kind, q):
    """Slope predictions for the shipped cases.

    Derived from the a priori bounds h^min{beta, s q} (H1) and
    h^min{beta + r, r + s q, (1+s) q} (L2) with the per-case regularity
    parameters, rescaled by h ~ #DoFs^(-1/d).
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q}")
    if case_kind == "square":
        # s = 1/2, r = 1, beta = 1/2 (up to an arbitrarily small loss), d = 2
        return RatePrediction("square", q,
                              -min(0.25, q / 4.0),
                              -min(0.75, 0.5 + q / 4.0, 3.0 * q / 4.0))
    if case_kind == "lshape":
        # s = 1/2, r = 2/3, beta = 1/3, d = 2
        return RatePrediction("lshape", q,
                              -min(1.0 / 6.0, q / 4.0),
                              -min(0.5, 1.0 / 3.0 + q / 4.0, 3.0 * q / 4.0))
    if case_kind == "cube":
        # s = 1/2, r = 1, beta = 1/2, d = 3
        return RatePrediction("cube", q,
                              -min(1.0 / 6.0, q / 6.0),
                              -min(0.5, 1.0 / 3.0 + q / 6.0, q / 2.0))
    raise ValueError(f"unknown case {case_kind!r}")


@dataclass
class ConvergenceRow:
    level: int
    h: float
    h0: float
    epsilon: float
    n_dofs: int
    err_l2: float
    err_h1: float
    eoc_l2: float = None
    eoc_h1: float = None
    assemble_ms: float = 0.0
    solve_ms: float = 0.0


@dataclass
class StudyConfig:
    """Settings for one convergence study; defaults follow the CLI."""

    case: str = "square"
    kernel: str = "tensor-c1"
    rhs_mode: str = "regularized"
    q: float = 1.0
    c: float = 1.0
    levels: int = 4
    base_level: int = None
    surface_quad_order: int = 4
    volume_quad_order: int = 3
    volume_subdiv: int = 1
    error_quad_order: int = 4
    deterministic: bool = False
    allow_support_overflow: bool = False
    out_path: str = None

    def validate(self):
        if self.case not in ("square", "lshape", "cube"):
            raise ValueError(f"invalid case {self.case!r}")
        if self.kernel not in ("radial-c1", "tensor-c1", "tensor-cinf", "tensor-linf"):
            raise ValueError(f"invalid kernel {self.kernel!r}")
        if self.rhs_mode not in ("regularized", "direct"):
            raise ValueError(f"invalid rhs mode {self.rhs_mode!r}")
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"q must be in (0, 1], got {self.q}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.volume_subdiv < 1:
            raise ValueError("volume_subdiv must be >= 1")
        return self


@lru_cache(maxsize=8)
def _cached_level(case_kind, level):
    """Mesh, space, and unconstrained stiffness shared across kernel sweeps."""
    msh = mesh.build_volume(case_kind, level)
    space = fem.make_space(msh)
    A = fem.assemble_stiffness(space)
    return msh, space, A


def clear_level_cache():
    _cached_level.cache_clear()


def _auto_base_level(case, cfg, kernel, max_level=6):
    """Smallest level at which the kernel support stays inside the domain."""
    for level in range(0, max_level + 1):
        surf = mesh.build_interface(case.descriptor, case.dim, level)
        eps = cfg.c * mesh.volume_mesh_size(case.kind, level) ** cfg.q
        margin = eps * kernel.support_radius + surf.h0
        dist = float(np.min(mesh.domain_boundary_distance(case.kind,
                                                          surf.vertices)))
        if dist > margin:
            return level
    raise coupling.SupportOverflowError(
        f"no level up to {max_level} satisfies the interface-containment "
        f"condition for case={case.kind}, q={cfg.q}, c={cfg.c}; pass an "
        f"explicit base_level with allow_support_overflow")


def run_convergence(cfg):
    """Run the refinement study described by ``cfg`` and return its rows."""
    cfg.validate()
    case = make_case(cfg.case)
    kernel = make_kernel(cfg.kernel, case.dim)
    base = cfg.base_level
    if base is None:
        base = _auto_base_level(case, cfg, kernel)

    rows = []
    for level in range(base, base + cfg.levels):
        msh, space, A = _cached_level(case.kind, level)
        surf = mesh.build_interface(case.descriptor, case.dim, level)
        eps = cfg.c * msh.h ** cfg.q
        margin = eps * kernel.support_radius + surf.h0
        dist = float(np.min(msh.boundary_distance(surf.vertices)))
        if (cfg.rhs_mode == "regularized" and dist <= margin
                and not cfg.allow_support_overflow):
            raise coupling.SupportOverflowError(
                f"level {level}: kernel support margin {margin:.4g} exceeds "
                f"interface-boundary distance {dist:.4g}")

        squad = coupling.surface_quadrature(surf, case.f,
                                            cfg.surface_quad_order)
        t0 = time.perf_counter()
        if cfg.rhs_mode == "regularized":
            rhs = coupling.assemble_rhs_regularized(
                space, squad, ScaledDirac(kernel, eps),
                vol_order=cfg.volume_quad_order,
                vol_subdiv=cfg.volume_subdiv,
                allow_support_overflow=cfg.allow_support_overflow)
        else:
            rhs = coupling.assemble_rhs_direct(space, squad)
        assemble_ms = 1e3 * (time.perf_counter() - t0)

        Abc, rhsbc, _ = fem.apply_dirichlet(A, rhs, boundary_g(case), space)
        t0 = time.perf_counter()
        x = fem.solve_cg(Abc, rhsbc)
        solve_ms = 1e3 * (time.perf_counter() - t0)

        fe = fem.FeFunction(space, x)
        rows.append(ConvergenceRow(
            level=level, h=msh.h, h0=surf.h0, epsilon=eps,
            n_dofs=space.n_dofs,
            err_l2=l2_error(fe, case, cfg.error_quad_order),
            err_h1=h1_error(fe, case, cfg.error_quad_order),
            assemble_ms=assemble_ms, solve_ms=solve_ms))

    if len(rows) >= 2:
        e_l2 = [r.err_l2 for r in rows]
        e_h1 = [r.err_h1 for r in rows]
        hs = [r.h for r in rows]
        for i, (cl2, ch1) in enumerate(zip(eoc(e_l2, hs), eoc(e_h1, hs)), start=1):
            rows[i].eoc_l2 = cl2
            rows[i].eoc_h1 = ch1
    return rows


def fitted_slopes(rows, last=3):
    """(h1_slope, l2_slope) of log error against log #DoFs."""
    dofs = [r.n_dofs for r in rows]
    return (dof_slope([r.err_h1 for r in rows], dofs, last),
            dof_slope([r.err_l2 for r in rows], dofs, last))
