"""Q1 finite element space, stiffness assembly, boundary conditions, solver.

One degree of freedom per mesh vertex; shape functions are multilinear
Lagrange polynomials on the reference cell [0,1]^dim with tensor-ordered
local numbering (x fastest axis first in 2D: (0,0), (1,0), (0,1), (1,1)).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    pass


class PointLocationError(RuntimeError):
    pass


def gauss_rule(dim, order):
    """Tensor Gauss rule on [0,1]^dim with ``order`` points per axis."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return points, weights


def composite_gauss_rule(dim, order, nsub):
    """Gauss rule replicated on an nsub^dim uniform subdivision of [0,1]^dim.

    For integrands with jumps inside the cell (e.g. box-profile kernels) the
    composite rule converges where raising the Gauss order does not.
    """
    if nsub < 1:
        raise ValueError("nsub must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts1 = ((x[None, :] + np.arange(nsub)[:, None]) / nsub).ravel()
    wts1 = np.tile(w / nsub, nsub)
    grids = np.meshgrid(*([pts1] * dim), indexing="ij")
    wgrids = np.meshgrid(*([wts1] * dim), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return points, weights


def shape_eval(dim, ref_points):
    """Q1 shape values and reference gradients at points in [0,1]^dim.

    Returns (values, gradients) with shapes (nq, 2^dim) and (nq, 2^dim, dim).
    """
    xi = np.atleast_2d(np.asarray(ref_points, dtype=float))
    nq = len(xi)
    nloc = 2 ** dim
    values = np.ones((nq, nloc))
    grads = np.zeros((nq, nloc, dim))
    for i in range(nloc):
        bits = [(i >> a) & 1 for a in range(dim)]
        factors = np.stack([xi[:, a] if b else 1.0 - xi[:, a]
                            for a, b in enumerate(bits)], axis=-1)  # (nq, dim)
        values[:, i] = np.prod(factors, axis=-1)
        for a in range(dim):
            others = np.prod(np.delete(factors, a, axis=1), axis=1)
            grads[:, i, a] = (1.0 if bits[a] else -1.0) * others
    return values, grads


def map_to_physical(cell_coords, ref_points):
    """Multilinear map of reference points into a cell given its vertex coords."""
    cell_coords = np.asarray(cell_coords, dtype=float)
    values, _ = shape_eval(cell_coords.shape[-1], ref_points)
    return values @ cell_coords


def jacobian(cell_coords, ref_points):
    """Jacobian dx/dxi at each reference point, shape (nq, dim, dim)."""
    cell_coords = np.asarray(cell_coords, dtype=float)
    _, grads = shape_eval(cell_coords.shape[-1], ref_points)
    return np.einsum("qia,ib->qba", grads, cell_coords)


def inverse_map(cell_coords, x, tol=1e-12, max_iter=20):
    """Newton inversion of the cell map, started from the cell center."""
    cell_coords = np.asarray(cell_coords, dtype=float)
    dim = cell_coords.shape[-1]
    x = np.asarray(x, dtype=float)
    xi = np.full(dim, 0.5)
    for _ in range(max_iter):
        r = map_to_physical(cell_coords, xi)[0] - x
        if np.linalg.norm(r) < tol:
            return xi
        J = jacobian(cell_coords, xi)[0]
        xi = xi - np.linalg.solve(J, r)
    raise PointLocationError(
        f"Newton inverse map did not converge for point {x}")


@dataclass
class FeSpace:
    """Vertex-based Q1 space on a volume mesh."""

    mesh: object
    dof_coords: np.ndarray
    boundary_dofs: np.ndarray
    n_dofs: int


def make_space(mesh, boundary_tol=1e-12):
    coords = mesh.vertices
    if mesh.case in ("square", "cube"):
        on_bnd = np.any((np.abs(coords) < boundary_tol)
                        | (np.abs(coords - 1.0) < boundary_tol), axis=1)
    elif mesh.case == "lshape":
        x, y = coords[:, 0], coords[:, 1]
        on_bnd = ((np.abs(np.abs(x) - 1.0) < boundary_tol)
                  | (np.abs(np.abs(y) - 1.0) < boundary_tol)
                  | ((np.abs(y) < boundary_tol) & (x >= -boundary_tol))
                  | ((np.abs(x) < boundary_tol) & (y <= boundary_tol)))
        # interior re-entrant corner edges terminate at the outer boundary,
        # so the predicate above covers exactly the L-shape boundary
    else:
        raise ValueError(f"unknown case {mesh.case!r}")
    return FeSpace(mesh=mesh, dof_coords=coords,
                   boundary_dofs=np.nonzero(on_bnd)[0],
                   n_dofs=len(coords))


_CHUNK = 65536


def assemble_stiffness(space, quad_order=2):
    """Dirichlet-form stiffness matrix in CSR format.

    A_ij = sum_cells sum_q w_q grad(phi_i) . grad(phi_j) |det J| with the
    gradients pulled back through J^-T; cells processed in fixed chunks so
    the accumulation order is deterministic.
    """
    mesh = space.mesh
    dim = mesh.dim
    nloc = 2 ** dim
    ref_pts, ref_wts = gauss_rule(dim, quad_order)
    _, ref_grads = shape_eval(dim, ref_pts)

    rows, cols, vals = [], [], []
    for start in range(0, mesh.n_cells, _CHUNK):
        conn = mesh.cells[start:start + _CHUNK]
        coords = mesh.vertices[conn]                      # (nc, nloc, dim)
        J = np.einsum("qia,cib->cqba", ref_grads, coords)  # (nc, nq, dim, dim)
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0.0):
            raise ValueError("cell with nonpositive Jacobian determinant")
        Jinv = np.linalg.inv(J)
        gphys = np.einsum("qia,cqab->cqib", ref_grads, Jinv)
        ke = np.einsum("q,cq,cqia,cqja->cij", ref_wts, detJ, gphys, gphys)
        rows.append(np.repeat(conn, nloc, axis=1).ravel())
        cols.append(np.tile(conn, (1, nloc)).ravel())
        vals.append(ke.ravel())
    n = space.n_dofs
    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble_volume_load(space, f, quad_order=2):
    """Load vector for a volume density f(points) -> values."""
    mesh = space.mesh
    dim = mesh.dim
    ref_pts, ref_wts = gauss_rule(dim, quad_order)
    values, ref_grads = shape_eval(dim, ref_pts)
    rhs = np.zeros(space.n_dofs)
    for start in range(0, mesh.n_cells, _CHUNK):
        conn = mesh.cells[start:start + _CHUNK]
        coords = mesh.vertices[conn]
        J = np.einsum("qia,cib->cqba", ref_grads, coords)
        detJ = np.linalg.det(J)
        phys = np.einsum("qi,cia->cqa", values, coords)
        fvals = f(phys.reshape(-1, dim)).reshape(phys.shape[:2])
        local = np.einsum("q,cq,cq,qi->ci", ref_wts, detJ, fvals, values)
        np.add.at(rhs, conn.ravel(), local.ravel())
    return rhs


def apply_dirichlet(A, rhs, g, space):
    """Symmetric elimination of Dirichlet boundary values.

    g may be a scalar or a callable on coordinate arrays.  Boundary rows and
    columns are replaced by identity; interior entries of the right-hand side
    absorb A[:, b] * g_b.  Returns (A', rhs', full_values) where full_values
    holds the prescribed boundary data (and zeros inside).
    """
    bdofs = space.boundary_dofs
    coords = space.dof_coords[bdofs]
    gvals = np.full(len(bdofs), float(g)) if np.isscalar(g) else np.asarray(g(coords), dtype=float)

    xb = np.zeros(space.n_dofs)
    xb[bdofs] = gvals
    rhs2 = rhs - A @ xb
    interior = np.ones(space.n_dofs, dtype=bool)
    interior[bdofs] = False
    P = sp.diags(interior.astype(float))
    A2 = (P @ A @ P + sp.diags((~interior).astype(float))).tocsr()
    rhs2 = np.where(interior, rhs2, gvals_full(space.n_dofs, bdofs, gvals))
    return A2, rhs2, xb


def gvals_full(n, bdofs, gvals):
    out = np.zeros(n)
    out[bdofs] = gvals
    return out


def solve_cg(A, rhs, rel_tol=1e-10, max_iter=None):
    """Jacobi-preconditioned conjugate gradients on an SPD system."""
    n = A.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    b_norm = np.linalg.norm(rhs)
    if b_norm == 0.0:
        return np.zeros(n)
    Minv = 1.0 / A.diagonal()
    x = np.zeros(n)
    r = rhs.copy()
    z = Minv * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        if np.linalg.norm(r) <= rel_tol * b_norm:
            return x
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = Minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not reach rel_tol={rel_tol} in {max_iter} iterations")


def locate_points(mesh, points, tol=1e-10):
    """Owning cell id and reference coordinates for each point.

    Uses structured-grid arithmetic on the mesh blocks; points on shared
    cell boundaries are claimed by the lower-index cell (the Q1 basis is
    continuous there, so the choice does not affect evaluations).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cell_ids = np.full(len(points), -1, dtype=np.int64)
    ref = np.zeros_like(points)
    offset = 0
    remaining = np.ones(len(points), dtype=bool)
    for blk in mesh.blocks:
        inside = remaining & blk.contains(points, tol)
        if np.any(inside):
            local = (points[inside] - np.asarray(blk.origin)) / blk.spacing
            idx = np.clip(np.floor(local).astype(np.int64), 0, blk.n - 1)
            ref_local = local - idx
            if mesh.dim == 2:
                cid = idx[:, 0] * blk.n + idx[:, 1]
            else:
                cid = (idx[:, 0] * blk.n + idx[:, 1]) * blk.n + idx[:, 2]
            cell_ids[inside] = offset + cid
            ref[inside] = ref_local
            remaining[inside] = False
        offset += blk.n ** mesh.dim
    if np.any(remaining):
        raise PointLocationError(
            f"{remaining.sum()} points outside the mesh, e.g. {points[remaining][0]}")
    return cell_ids, ref


@dataclass
class FeFunction:
    space: FeSpace
    coefficients: np.ndarray

    def __call__(self, points):
        return evaluate(self, points)


def evaluate(fe, points):
    """Point values of a finite element function."""
    cell_ids, ref = locate_points(fe.space.mesh, points)
    values, _ = shape_eval(fe.space.mesh.dim, ref)
    conn = fe.space.mesh.cells[cell_ids]
    return np.einsum("qi,qi->q", values, fe.coefficients[conn])


def evaluate_gradient(fe, points):
    """Point gradients of a finite element function."""
    mesh = fe.space.mesh
    cell_ids, ref = locate_points(mesh, points)
    _, grads = shape_eval(mesh.dim, ref)
    conn = mesh.cells[cell_ids]
    coords = mesh.vertices[conn]
    J = np.einsum("qia,qib->qba", grads, coords)
    gphys = np.einsum("qia,qab->qib", grads, np.linalg.inv(J))
    return np.einsum("qia,qi->qa", gphys, fe.coefficients[conn])


def dump_matrix_triplets(A, path):
    """Debug export of a sparse matrix as 'row col value' lines."""
    coo = A.tocoo()
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
