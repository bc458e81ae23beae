"""Structured volume meshes and polytopal interface meshes.

Volume meshes are unions of axis-aligned blocks, each subdivided into a
uniform grid of quads (2D) or hexes (3D) with vertex-based Q1 connectivity.
Interface meshes approximate a circle or sphere by an inscribed polygon or a
radially projected cube surface; all their vertices lie on the exact curve.
"""

from dataclasses import dataclass, field

import numpy as np

BASE_DIVISIONS = {"square": 8, "lshape": 8, "cube": 4}
BASE_SEGMENTS_2D = 32
BASE_FACE_DIVISIONS_3D = 4


@dataclass(frozen=True)
class Block:
    """One axis-aligned grid block: origin corner, cells per axis, cell size."""

    origin: tuple
    n: int
    spacing: float

    def contains(self, points, tol=1e-12):
        p = np.asarray(points, dtype=float)
        lo = np.asarray(self.origin)
        hi = lo + self.n * self.spacing
        return np.all((p >= lo - tol) & (p <= hi + tol), axis=-1)


@dataclass
class VolumeMesh:
    dim: int
    vertices: np.ndarray          # (nv, dim)
    cells: np.ndarray             # (nc, 2**dim), tensor-ordered vertex ids
    level: int
    h: float                      # max cell diameter
    case: str
    blocks: list = field(default_factory=list)
    cell_block: np.ndarray = None  # (nc,) owning block id
    _boundary_facets: np.ndarray = None

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def cell_size(self):
        return self.blocks[0].spacing

    @property
    def boundary_facets(self):
        """Facets referenced by exactly one cell, as vertex-id tuples."""
        if self._boundary_facets is None:
            self._boundary_facets = _extract_boundary_facets(self)
        return self._boundary_facets

    def boundary_distance(self, points):
        """Distance from interior points to the domain boundary."""
        return domain_boundary_distance(self.case, points)


_LSHAPE_BOUNDARY_SEGMENTS = (
    ((-1.0, -1.0), (-1.0, 1.0)),
    ((-1.0, 1.0), (1.0, 1.0)),
    ((1.0, 1.0), (1.0, 0.0)),
    ((1.0, 0.0), (0.0, 0.0)),   # re-entrant edge along y = 0
    ((0.0, 0.0), (0.0, -1.0)),  # re-entrant edge along x = 0
    ((0.0, -1.0), (-1.0, -1.0)),
)


def _point_segment_distance(points, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    t = np.clip((points - a) @ ab / (ab @ ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def domain_boundary_distance(case, points):
    """Distance from interior points of a shipped domain to its boundary."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if case in ("square", "cube"):
        return np.minimum(p, 1.0 - p).min(axis=1)
    if case == "lshape":
        d = np.full(len(p), np.inf)
        for a, b in _LSHAPE_BOUNDARY_SEGMENTS:
            d = np.minimum(d, _point_segment_distance(p, a, b))
        return d
    raise ValueError(f"unknown case {case!r}")


def volume_mesh_size(case, level):
    """Maximal cell diameter of build_volume(case, level), without building it."""
    dim = 3 if case == "cube" else 2
    return np.sqrt(dim) / (BASE_DIVISIONS[case] * 2 ** level)


def _grid_vertices(origin, n, spacing, dim):
    axes = [origin[a] + spacing * np.arange(n + 1) for a in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _grid_cells(n, dim):
    """Tensor-ordered Q1 connectivity for an n^dim grid (ij-flattened ids)."""
    if dim == 2:
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        v00 = i * (n + 1) + j
        return np.stack([v00, v00 + (n + 1), v00 + 1, v00 + (n + 1) + 1],
                        axis=-1).reshape(-1, 4)
    i, j, k = np.meshgrid(*([np.arange(n)] * 3), indexing="ij")
    s1, s2 = (n + 1) ** 2, n + 1
    v = i * s1 + j * s2 + k
    corners = [v, v + s1, v + s2, v + s1 + s2,
               v + 1, v + s1 + 1, v + s2 + 1, v + s1 + s2 + 1]
    return np.stack(corners, axis=-1).reshape(-1, 8)


def build_volume(case, level):
    """Build the volume mesh for one of the shipped domains.

    square: n x n grid on (0,1)^2, n = 8 * 2^level.
    lshape: three unit blocks covering (-1,1)^2 minus [0,1]x[-1,0], each n x n.
    cube:   n x n x n grid on (0,1)^3, n = 4 * 2^level.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if case == "square":
        n = BASE_DIVISIONS["square"] * 2 ** level
        spacing = 1.0 / n
        blocks = [Block((0.0, 0.0), n, spacing)]
        dim = 2
    elif case == "cube":
        n = BASE_DIVISIONS["cube"] * 2 ** level
        spacing = 1.0 / n
        blocks = [Block((0.0, 0.0, 0.0), n, spacing)]
        dim = 3
    elif case == "lshape":
        n = BASE_DIVISIONS["lshape"] * 2 ** level
        spacing = 1.0 / n
        blocks = [Block((-1.0, -1.0), n, spacing),
                  Block((-1.0, 0.0), n, spacing),
                  Block((0.0, 0.0), n, spacing)]
        dim = 2
    else:
        raise ValueError(f"unknown case {case!r}")

    vertices = []
    cells = []
    cell_block = []
    vertex_ids = {}
    for bi, blk in enumerate(blocks):
        verts = _grid_vertices(blk.origin, blk.n, blk.spacing, dim)
        # dedup across blocks via integer lattice keys
        keys = np.rint((verts - np.min([b.origin for b in blocks], axis=0))
                       / blk.spacing).astype(np.int64)
        local_ids = np.empty(len(verts), dtype=np.int64)
        for li, key in enumerate(map(tuple, keys)):
            gid = vertex_ids.get(key)
            if gid is None:
                gid = len(vertices)
                vertex_ids[key] = gid
                vertices.append(verts[li])
            local_ids[li] = gid
        conn = local_ids[_grid_cells(blk.n, dim)]
        cells.append(conn)
        cell_block.append(np.full(len(conn), bi))

    mesh = VolumeMesh(dim=dim,
                      vertices=np.asarray(vertices),
                      cells=np.concatenate(cells),
                      level=level,
                      h=spacing * np.sqrt(dim),
                      case=case,
                      blocks=blocks,
                      cell_block=np.concatenate(cell_block))
    return mesh


def refine_global(mesh):
    """Split every cell into 2^dim congruent children; h halves exactly.

    For these uniform block grids the refined mesh coincides with the mesh
    built directly at level + 1 (up to vertex ordering), so it is rebuilt.
    """
    return build_volume(mesh.case, mesh.level + 1)


_FACE_LOCAL = {
    2: [(0, 1), (2, 3), (0, 2), (1, 3)],
    3: [(0, 1, 3, 2), (4, 5, 7, 6), (0, 1, 5, 4),
        (2, 3, 7, 6), (0, 2, 6, 4), (1, 3, 7, 5)],
}


def _extract_boundary_facets(mesh):
    counts = {}
    for cell in mesh.cells:
        for face in _FACE_LOCAL[mesh.dim]:
            ids = tuple(cell[list(face)])
            key = tuple(sorted(ids))
            if key in counts:
                counts[key] = None
            else:
                counts[key] = ids
    return np.asarray([ids for ids in counts.values() if ids is not None])


@dataclass(frozen=True)
class InterfaceDescriptor:
    """Analytic circle/sphere: center point and radius."""

    center: tuple
    radius: float


@dataclass
class SurfaceMesh:
    dim: int                      # ambient dimension
    vertices: np.ndarray
    facets: np.ndarray            # (nf, 2) segments or (nf, 4) quads
    level: int
    h0: float
    descriptor: InterfaceDescriptor


def build_interface(descriptor, dim, level):
    """Codim-1 mesh of the circle (dim 2) or sphere (dim 3) at a level.

    2D: regular polygon with 32 * 2^level segments.  3D: cube-surface
    quadrangulation with 6 * (4 * 2^level)^2 facets, vertices projected
    radially onto the sphere.
    """
    if descriptor.radius <= 0.0:
        raise ValueError("radius must be positive")
    c = np.asarray(descriptor.center, dtype=float)
    R = descriptor.radius
    if dim == 2:
        n = BASE_SEGMENTS_2D * 2 ** level
        ang = 2.0 * np.pi * np.arange(n) / n
        vertices = c + R * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        facets = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=-1)
        h0 = 2.0 * R * np.sin(np.pi / n)
        return SurfaceMesh(2, vertices, facets, level, h0, descriptor)
    if dim != 3:
        raise ValueError("dim must be 2 or 3")
    n = BASE_FACE_DIVISIONS_3D * 2 ** level
    vertex_ids = {}
    vertices = []
    facets = []
    axes = np.linspace(-1.0, 1.0, n + 1)

    def vid(p):
        key = tuple(np.rint(p * n).astype(np.int64))
        gid = vertex_ids.get(key)
        if gid is None:
            gid = len(vertices)
            vertex_ids[key] = gid
            q = p / np.linalg.norm(p)
            vertices.append(c + R * q)
        return gid

    for axis in range(3):
        for side in (-1.0, 1.0):
            grid = np.empty((n + 1, n + 1), dtype=np.int64)
            for i, u in enumerate(axes):
                for j, v in enumerate(axes):
                    p = np.empty(3)
                    p[axis] = side
                    p[(axis + 1) % 3] = u
                    p[(axis + 2) % 3] = v
                    grid[i, j] = vid(p)
            for i in range(n):
                for j in range(n):
                    quad = (grid[i, j], grid[i + 1, j],
                            grid[i + 1, j + 1], grid[i, j + 1])
                    if side > 0:
                        facets.append(quad)
                    else:
                        facets.append(quad[::-1])
    vertices = np.asarray(vertices)
    facets = np.asarray(facets)
    diffs = vertices[facets]
    h0 = float(np.max(np.linalg.norm(diffs - np.roll(diffs, 1, axis=1),
                                     axis=-1)))
    return SurfaceMesh(3, vertices, facets, level, h0, descriptor)


def closest_point_project(x, descriptor):
    """Radial projection of x onto the circle/sphere; undefined at the center."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(descriptor.center, dtype=float)
    v = x - c
    r = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(r == 0.0):
        raise ValueError("closest-point projection undefined at the center")
    return c + descriptor.radius * v / r


def dump_mesh(mesh, path):
    """Plain-text dump: one vertex per line 'id x y [z]', one cell per line."""
    with open(path, "w") as fh:
        for i, v in enumerate(mesh.vertices):
            fh.write(f"{i} " + " ".join(f"{x:.17g}" for x in v) + "\n")
        for i, cell in enumerate(mesh.cells):
            fh.write(f"{i} " + " ".join(str(int(j)) for j in cell) + "\n")
