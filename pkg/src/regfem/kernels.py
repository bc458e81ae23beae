"""Approximate Dirac kernels built from compactly supported 1D profiles.

A kernel psi is either radially symmetric, psi(x) = I_d * p(|x|), or a
tensor product of a symmetric 1D profile, psi(x) = prod_i c1 * p(x_i).
Both constructions integrate to one and vanish outside a ball of radius
``support_radius``.  Scaling by a length epsilon gives the one-parameter
family delta_eps(x) = eps^-d * psi(x/eps) used to smear surface data.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.integrate import quad


class Profile(Enum):
    """Shipped even 1D profiles, all supported in [-1, 1]."""

    COSINE_C1 = "cosine-c1"
    BUMP_CINF = "bump-cinf"
    BOX_LINF = "box-linf"


KERNEL_NAMES = ("radial-c1", "tensor-c1", "tensor-cinf", "tensor-linf")


def eval_profile(profile, t):
    """Evaluate a 1D profile at t (scalar or array); exactly 0 for |t| >= 1."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    out = np.zeros_like(t)
    if profile is Profile.COSINE_C1:
        out[inside] = 0.5 * (1.0 + np.cos(np.pi * t[inside]))
    elif profile is Profile.BUMP_CINF:
        ti = t[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    elif profile is Profile.BOX_LINF:
        out[inside] = 0.5
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return out if out.ndim else float(out)


def _profile_func(profile):
    return lambda t: eval_profile(profile, t)


@lru_cache(maxsize=None)
def profile_mass_1d(profile):
    """Integral of the raw profile over [-1, 1], to adaptive-quadrature accuracy."""
    val, _ = quad(_profile_func(profile), -1.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    if val <= 0.0:
        raise ValueError(f"profile {profile} has nonpositive integral")
    return val


@lru_cache(maxsize=None)
def radial_normalization(profile, dim):
    """Scaling factor making x -> p(|x|) integrate to one over the unit ball.

    Computed from the radial integral of r^(d-1) p(r) on [0, 1] by adaptive
    quadrature (closed forms are reserved for tests).
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    p = _profile_func(profile)
    val, _ = quad(lambda r: p(r) * r ** (dim - 1), 0.0, 1.0,
                  epsabs=1e-13, epsrel=1e-13, limit=200)
    sphere_area = 2.0 * np.pi if dim == 2 else 4.0 * np.pi
    total = sphere_area * val
    if total <= 0.0:
        raise ValueError(f"profile {profile} has nonpositive radial integral")
    return 1.0 / total


@dataclass(frozen=True)
class MollifierKernel:
    """Unit-mass kernel in dimension ``dim`` with certified moment order.

    ``construction`` is "radial" or "tensor".  For radial kernels
    ``normalization`` is the unit-ball scaling factor; for tensor kernels it
    is the 1D normalization applied to each factor (1 for the cosine and box
    profiles, 1/integral for the bump).
    """

    dim: int
    construction: str
    profile: Profile
    normalization: float
    support_radius: float
    moment_order: int = field(default=-1, compare=False)

    def with_certified_order(self):
        return MollifierKernel(self.dim, self.construction, self.profile,
                               self.normalization, self.support_radius,
                               certify_moment_order(self))


def make_kernel(name, dim):
    """Build one of the shipped kernels from its selection string."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if name == "radial-c1":
        return MollifierKernel(dim, "radial", Profile.COSINE_C1,
                               radial_normalization(Profile.COSINE_C1, dim), 1.0)
    profiles = {"tensor-c1": Profile.COSINE_C1,
                "tensor-cinf": Profile.BUMP_CINF,
                "tensor-linf": Profile.BOX_LINF}
    if name not in profiles:
        raise ValueError(f"unknown kernel {name!r}; choose from {KERNEL_NAMES}")
    profile = profiles[name]
    return MollifierKernel(dim, "tensor", profile, 1.0 / profile_mass_1d(profile),
                           float(np.sqrt(dim)))


def eval_kernel(kernel, x):
    """Evaluate psi at points x of shape (..., dim)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != kernel.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != kernel dim {kernel.dim}")
    if kernel.construction == "radial":
        r = np.linalg.norm(x, axis=-1)
        return kernel.normalization * eval_profile(kernel.profile, r)
    vals = eval_profile(kernel.profile, x) * kernel.normalization
    return np.prod(vals, axis=-1)


@dataclass(frozen=True)
class ScaledDirac:
    """delta_eps(x) = eps^-d psi(x/eps), supported in the eps*r0 ball."""

    kernel: MollifierKernel
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def support_radius(self):
        return self.epsilon * self.kernel.support_radius


def eval_scaled(dirac, x):
    """Evaluate delta_eps at points x of shape (..., dim)."""
    x = np.asarray(x, dtype=float)
    return eval_kernel(dirac.kernel, x / dirac.epsilon) / dirac.epsilon ** dirac.kernel.dim


def _gauss_on(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _integrate_kernel(kernel, integrand, npts):
    """Integrate integrand(points) * psi(points) over the kernel support.

    Tensor kernels use a tensor Gauss grid on the support box; radial kernels
    use polar (2D) or spherical (3D) product Gauss so the profile is sampled
    along smooth rays only.
    """
    d = kernel.dim
    if kernel.construction == "tensor":
        x1, w1 = _gauss_on(-1.0, 1.0, npts)
        grids = np.meshgrid(*([x1] * d), indexing="ij")
        wgrids = np.meshgrid(*([w1] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
        return float(np.sum(wts * eval_kernel(kernel, pts) * integrand(pts)))
    r, wr = _gauss_on(0.0, 1.0, npts)
    phi, wphi = _gauss_on(0.0, 2.0 * np.pi, max(npts, 32))
    if d == 2:
        R, P = np.meshgrid(r, phi, indexing="ij")
        pts = np.stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()], axis=-1)
        wts = (np.outer(wr * r, wphi)).ravel()
    else:
        th, wth = _gauss_on(0.0, np.pi, max(npts, 32))
        R, T, P = np.meshgrid(r, th, phi, indexing="ij")
        pts = np.stack([(R * np.sin(T) * np.cos(P)).ravel(),
                        (R * np.sin(T) * np.sin(P)).ravel(),
                        (R * np.cos(T)).ravel()], axis=-1)
        wts = (wr * r * r)[:, None, None] * (wth * np.sin(th))[None, :, None] \
            * wphi[None, None, :]
        wts = wts.ravel()
    return float(np.sum(wts * eval_kernel(kernel, pts) * integrand(pts)))


def moment(kernel, alpha, quad_points_per_axis=64):
    """Numeric moment integral of y^alpha psi(y) over the support."""
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if len(alpha) == 1 and kernel.dim > 1 and alpha[0] == 0:
        alpha = (0,) * kernel.dim
    if len(alpha) != kernel.dim:
        raise ValueError(f"multi-index length {len(alpha)} != dim {kernel.dim}")
    if sum(alpha) > 4:
        raise ValueError("moments are only certified up to total order 4")

    def monomial(pts):
        out = np.ones(len(pts))
        for axis, a in enumerate(alpha):
            if a:
                out *= pts[:, axis] ** a
        return out

    return _integrate_kernel(kernel, monomial, quad_points_per_axis)


def certify_moment_order(kernel, tol=1e-8, max_order=3):
    """Largest k <= max_order with all moments of total order 1..k below tol."""
    d = kernel.dim
    for k in range(1, max_order + 1):
        for alpha in np.ndindex(*((k + 1,) * d)):
            if sum(alpha) != k:
                continue
            if abs(moment(kernel, alpha)) > tol:
                return k - 1
    return max_order


def l1_growth(dirac, m, quad_points_per_axis=64):
    """L1 norm of |x|^m delta_eps over its support."""
    if m < 0:
        raise ValueError("growth exponent m must be nonnegative")
    eps = dirac.epsilon

    def weight(pts):
        # delta_eps support points are eps * (kernel support points)
        return np.linalg.norm(eps * pts, axis=-1) ** m if m else np.ones(len(pts))

    # substitute x = eps*y: integral of |x|^m delta_eps equals
    # integral of |eps y|^m psi(y) over the kernel support
    return _integrate_kernel(dirac.kernel, weight, quad_points_per_axis)
