"""Boundary-fitted disk meshes, the exact boundary chart and quadratic cell maps.

Each mesh cell T~ = (P0, P1, P2) (counterclockwise) is the image of the
reference triangle under the affine map sending (1,0), (0,1), (0,0) to
P0, P1, P2.  The quadratic map F_T is the P2 interpolant of that affine map
with the midpoint of a boundary edge moved onto the circular arc; every other
control point is left in place, so cells without a boundary edge stay affine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from .errors import DomainError, GeometryError, InversionError, MeshGenerationError
from .quadrature import gauss_interval, quadrature_rule
from .reference import EDGE_VERTICES, GRAD_LAMBDA, barycentric

# --- P2 geometry shape functions on the reference triangle ---------------------


def p2_shape(xhat: np.ndarray):
    """Values (Q, 6) and gradients (Q, 6, 2) of the six P2 nodal functions
    (vertices 0..2 then edge midpoints 0..2) at reference points."""
    lam = barycentric(np.atleast_2d(xhat))
    g = GRAD_LAMBDA
    vals = np.empty(lam.shape[:-1] + (6,))
    grads = np.empty(lam.shape[:-1] + (6, 2))
    for i in range(3):
        vals[..., i] = lam[..., i] * (2 * lam[..., i] - 1)
        grads[..., i, :] = (4 * lam[..., i] - 1)[..., None] * g[i]
    for k in range(3):
        a, b = EDGE_VERTICES[k]
        vals[..., 3 + k] = 4 * lam[..., a] * lam[..., b]
        grads[..., 3 + k, :] = 4 * (lam[..., a, None] * g[b] + lam[..., b, None] * g[a])
    return vals, grads


def _p2_hessians() -> np.ndarray:
    """Constant second derivatives (6, 2, 2) of the P2 nodal functions."""
    g = GRAD_LAMBDA
    h = np.empty((6, 2, 2))
    for i in range(3):
        h[i] = 4 * np.outer(g[i], g[i])
    for k in range(3):
        a, b = EDGE_VERTICES[k]
        h[3 + k] = 4 * (np.outer(g[a], g[b]) + np.outer(g[b], g[a]))
    return h


P2_HESSIANS = _p2_hessians()
P2_NODES = np.array(
    [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.5], [0.5, 0.0], [0.5, 0.5]]
)


def adjugate(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def det2(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


# --- chart ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiskChart:
    """Exact description of the circle boundary and the blend map G.

    For a cell with boundary edge (v1, v2) and interior vertex v3, G in
    barycentric coordinates is  lam3*v3 + (1-lam3)*arc(lam2/(lam1+lam2)),
    where arc runs along the minor arc from v1 to v2 at constant speed.
    G is the identity on every other cell.
    """

    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def boundary_param(self, theta):
        theta = np.asarray(theta, dtype=float)
        c = np.asarray(self.center)
        return c + self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def project_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center)
        d = x - c
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        if np.any(r == 0):
            raise DomainError("the center has no unique closest boundary point")
        return c + self.radius * d / r

    def _angles(self, v1, v2):
        c = np.asarray(self.center)
        d1 = np.asarray(v1, dtype=float) - c
        d2 = np.asarray(v2, dtype=float) - c
        t1 = np.arctan2(d1[..., 1], d1[..., 0])
        t2 = np.arctan2(d2[..., 1], d2[..., 0])
        delta = np.mod(t2 - t1 + np.pi, 2 * np.pi) - np.pi
        return t1, delta

    def arc(self, v1, v2, s):
        """Constant-speed point on the minor arc from v1 (s=0) to v2 (s=1)."""
        t1, delta = self._angles(v1, v2)
        return self.boundary_param(t1 + np.asarray(s, dtype=float) * delta)

    def arc_derivative(self, v1, v2, s):
        t1, delta = self._angles(v1, v2)
        th = t1 + np.asarray(s, dtype=float) * delta
        return self.radius * delta * np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def arc_midpoint(self, v1, v2):
        return self.arc(v1, v2, 0.5)

    def blend(self, v1, v2, v3, lam):
        """G evaluated at barycentric coordinates lam = (lam1, lam2, lam3)."""
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        l1, l2, l3 = lam[:, 0], lam[:, 1], lam[:, 2]
        out = np.empty((lam.shape[0], 2))
        top = np.isclose(l3, 1.0, rtol=0, atol=1e-15)
        out[top] = np.asarray(v3, dtype=float)
        s = l2[~top] / (l1[~top] + l2[~top])
        out[~top] = l3[~top, None] * np.asarray(v3) + (1 - l3[~top, None]) * self.arc(v1, v2, s)
        return out


# --- meshes -----------------------------------------------------------------------


@dataclass
class AffineMesh:
    """Straight-sided triangulation with edge adjacency.

    Global edges are oriented from the lower to the higher vertex index.  The
    left cell traverses the edge in that direction when walking its own
    boundary counterclockwise; the edge normal points out of the left cell and
    the tangent is that normal rotated by +90 degrees.
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_vertex: np.ndarray
    edges: np.ndarray = field(init=False)
    edge_cells: np.ndarray = field(init=False)
    edge_boundary: np.ndarray = field(init=False)
    cell_edges: np.ndarray = field(init=False)
    cell_edge_sign: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.int64)
        self.boundary_vertex = np.asarray(self.boundary_vertex, dtype=bool)
        a = self.vertices[self.cells]
        signed = 0.5 * ((a[:, 0, 0] - a[:, 2, 0]) * (a[:, 1, 1] - a[:, 2, 1])
                        - (a[:, 1, 0] - a[:, 2, 0]) * (a[:, 0, 1] - a[:, 2, 1]))
        if np.any(signed <= 0):
            raise GeometryError("cells must be counterclockwise with positive area")
        self._build_edges()

    def _build_edges(self):
        n = len(self.cells)
        loc = np.empty((n, 3, 2), dtype=np.int64)
        for k, (a, b) in enumerate(EDGE_VERTICES):
            loc[:, k, 0] = self.cells[:, a]
            loc[:, k, 1] = self.cells[:, b]
        lo = loc.min(axis=2).ravel()
        hi = loc.max(axis=2).ravel()
        keys = lo * (len(self.vertices) + 1) + hi
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        self.edges = np.column_stack([lo[first], hi[first]])
        self.cell_edges = inv.reshape(n, 3)
        forward = (loc[:, :, 0] < loc[:, :, 1]).ravel()
        self.cell_edge_sign = np.where(forward, 1, -1).reshape(n, 3)
        ec = np.full((len(uniq), 2), -1, dtype=np.int64)
        cell_of = np.repeat(np.arange(n), 3)
        slot = np.where(forward, 0, 1)
        if np.any(np.bincount(inv * 2 + slot, minlength=2 * len(uniq)) > 1):
            raise GeometryError("edge shared by two cells with the same orientation")
        ec[inv, slot] = cell_of
        self.edge_cells = ec
        self.edge_boundary = (ec == -1).any(axis=1)

    @classmethod
    def from_cells(cls, vertices, cells, boundary_vertex=None) -> "AffineMesh":
        """Build a mesh, reorienting clockwise cells; boundary vertices default
        to the endpoints of edges with a single neighbour."""
        v = np.asarray(vertices, dtype=float)
        c = np.array(cells, dtype=np.int64)
        a = v[c]
        signed = (a[:, 0, 0] - a[:, 2, 0]) * (a[:, 1, 1] - a[:, 2, 1]) - (
            a[:, 1, 0] - a[:, 2, 0]
        ) * (a[:, 0, 1] - a[:, 2, 1])
        flip = signed < 0
        c[flip] = c[flip][:, [1, 0, 2]]
        if boundary_vertex is None:
            tmp = cls(v, c, np.zeros(len(v), dtype=bool))
            bv = np.zeros(len(v), dtype=bool)
            bv[tmp.edges[tmp.edge_boundary].ravel()] = True
            tmp.boundary_vertex = bv
            return tmp
        return cls(v, c, boundary_vertex)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def areas(self) -> np.ndarray:
        a = self.vertices[self.cells]
        return 0.5 * ((a[:, 0, 0] - a[:, 2, 0]) * (a[:, 1, 1] - a[:, 2, 1])
                      - (a[:, 1, 0] - a[:, 2, 0]) * (a[:, 0, 1] - a[:, 2, 1]))

    @cached_property
    def diameters(self) -> np.ndarray:
        a = self.vertices[self.cells]
        d = np.linalg.norm(a - np.roll(a, 1, axis=1), axis=2)
        return d.max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def cell_boundary_edge(self) -> np.ndarray:
        """Local index of each cell's boundary edge, or -1."""
        be = self.edge_boundary[self.cell_edges] & self.boundary_vertex[self.edges[self.cell_edges]].all(axis=2)
        out = np.full(self.n_cells, -1)
        rows, cols = np.nonzero(be)
        if len(np.unique(rows)) != len(rows):
            raise GeometryError("a cell has more than one boundary edge")
        out[rows] = cols
        return out

    def edge_normals(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return np.column_stack([d[:, 1], -d[:, 0]])


def generate_disk_mesh(n_boundary: int, chart: DiskChart | None = None, max_retries: int = 5) -> AffineMesh:
    """Concentric-ring Delaunay mesh of the disk with ``n_boundary`` equispaced
    boundary vertices.

    Ring spacing follows the boundary spacing so that triangles are close to
    equilateral.  Points on the boundary circle are cocircular, so a Delaunay
    triangle with three boundary vertices cannot occur while interior points
    exist; the check is kept and repaired by inserting an interior point.
    """
    if int(n_boundary) != n_boundary or n_boundary < 8:
        raise DomainError("n_boundary must be an integer >= 8")
    chart = chart or DiskChart()
    n_boundary = int(n_boundary)
    ds = 2 * np.pi / n_boundary
    n_rings = max(2, int(np.ceil(1.0 / (ds * np.sqrt(3.0) / 2.0))))
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        r = k / n_rings
        m = n_boundary if k == n_rings else max(5, int(round(2 * np.pi * r / ds)))
        theta = 2 * np.pi * (np.arange(m) + 0.5 * (k % 2)) / m
        if k == n_rings:
            theta = 2 * np.pi * np.arange(m) / m
        pts.append(r * np.column_stack([np.cos(theta), np.sin(theta)]))
    pts = np.vstack(pts)
    rel = pts - np.asarray(chart.center)
    pts = np.asarray(chart.center) + chart.radius * rel
    n_int = len(pts) - n_boundary
    bflag = np.zeros(len(pts), dtype=bool)
    bflag[n_int:] = True
    # exact boundary positions
    pts[bflag] = chart.boundary_param(2 * np.pi * np.arange(n_boundary) / n_boundary)

    for _ in range(max_retries + 1):
        tri = Delaunay(pts)
        cells = tri.simplices
        bad = bflag[cells].all(axis=1)
        if not bad.any():
            mesh = AffineMesh.from_cells(pts, cells, bflag)
            if np.any(mesh.boundary_vertex[mesh.edges].all(axis=1) & ~mesh.edge_boundary):
                raise MeshGenerationError("interior edge joins two boundary vertices")
            return mesh
        # local refinement: pull the centroid of each offending cell inward
        c = pts[cells[bad]].mean(axis=1)
        c = np.asarray(chart.center) + 0.9 * (c - np.asarray(chart.center))
        pts = np.vstack([c, pts])
        bflag = np.concatenate([np.zeros(len(c), dtype=bool), bflag])
    raise MeshGenerationError("could not remove cells with three boundary vertices")


# --- mesh file I/O -----------------------------------------------------------------


def write_mesh(mesh: AffineMesh, path) -> None:
    lines = [f"vertices {mesh.n_vertices} / cells {mesh.n_cells} / edges {mesh.n_edges}"]
    for (x, y), b in zip(mesh.vertices, mesh.boundary_vertex):
        lines.append(f"{x:.17g} {y:.17g} {int(b)}")
    for i, j, k in mesh.cells:
        lines.append(f"{i} {j} {k}")
    for (i, j), (lc, rc), b in zip(mesh.edges, mesh.edge_cells, mesh.edge_boundary):
        lines.append(f"{i} {j} {lc} {rc} {int(b)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> AffineMesh:
    text = Path(path).read_text().splitlines()
    head = text[0].replace("/", " ").split()
    try:
        nv, nc, ne = int(head[1]), int(head[3]), int(head[5])
    except (IndexError, ValueError) as exc:
        raise DomainError(f"malformed mesh header: {text[0]!r}") from exc
    vrows = [ln.split() for ln in text[1 : 1 + nv]]
    verts = np.array([[float(r[0]), float(r[1])] for r in vrows])
    bflag = np.array([int(r[2]) for r in vrows], dtype=bool)
    cells = np.array([[int(t) for t in ln.split()] for ln in text[1 + nv : 1 + nv + nc]], dtype=np.int64)
    mesh = AffineMesh(verts, cells, bflag)
    erows = np.array([[int(t) for t in ln.split()] for ln in text[1 + nv + nc : 1 + nv + nc + ne]], dtype=np.int64)
    if len(erows) != ne or not np.array_equal(erows[:, :2], mesh.edges) or not np.array_equal(erows[:, 2:4], mesh.edge_cells):
        raise DomainError("edge table inconsistent with cells")
    return mesh


# --- cell maps ----------------------------------------------------------------------


@dataclass(frozen=True)
class GeoMap:
    """Quadratic map of the reference triangle onto one physical cell."""

    control_points: np.ndarray  # (6, 2): vertices, then edge midpoints
    curved: bool
    parent_area: float

    @property
    def parent_diameter(self) -> float:
        v = self.control_points[:3]
        return float(max(np.linalg.norm(v[i] - v[j]) for i, j in ((0, 1), (1, 2), (2, 0))))


@dataclass(frozen=True)
class MapData:
    x: np.ndarray
    DF: np.ndarray
    det: np.ndarray
    A: np.ndarray
    R: np.ndarray
    dDF: np.ndarray  # (2, 2, 2): d DF[a, b] / d xhat_c at [a, b, c]
    dA: np.ndarray  # (..., 2, 2, 2): d A[a, b] / d xhat_c at [..., c, a, b]


class CellMaps:
    """Control points of all cell maps, with vectorized evaluation."""

    def __init__(self, control: np.ndarray, curved: np.ndarray, parent_area: np.ndarray):
        self.control = np.asarray(control, dtype=float)
        self.curved = np.asarray(curved, dtype=bool)
        self.parent_area = np.asarray(parent_area, dtype=float)
        self.hessian = np.einsum("nia,ibc->nabc", self.control, P2_HESSIANS)

    def __len__(self) -> int:
        return len(self.control)

    def __getitem__(self, i: int) -> GeoMap:
        return GeoMap(self.control[i].copy(), bool(self.curved[i]), float(self.parent_area[i]))

    def evaluate(self, xhat: np.ndarray, cells=slice(None)) -> "GeometryAtPoints":
        return geometry_at(self.control[cells], xhat, self.hessian[cells])


@dataclass
class GeometryAtPoints:
    x: np.ndarray  # (n, Q, 2)
    DF: np.ndarray  # (n, Q, 2, 2)
    det: np.ndarray  # (n, Q)
    hessian: np.ndarray  # (n, 2, 2, 2)

    @cached_property
    def adj(self) -> np.ndarray:
        return adjugate(self.DF)

    @cached_property
    def Jinv(self) -> np.ndarray:
        return self.adj / self.det[..., None, None]

    @cached_property
    def A(self) -> np.ndarray:
        return self.DF / self.det[..., None, None]

    @cached_property
    def R(self) -> np.ndarray:
        return np.swapaxes(self.Jinv, -1, -2)

    @cached_property
    def ddet(self) -> np.ndarray:
        """d det / d xhat_c, shape (n, Q, 2)."""
        return np.einsum("nqba,nabc->nqc", self.adj, self.hessian)

    @cached_property
    def dA(self) -> np.ndarray:
        """d A / d xhat_c, shape (n, Q, 2(c), 2, 2)."""
        det = self.det[..., None, None, None]
        h = np.moveaxis(self.hessian, -1, 1)[:, None]  # (n, 1, c, a, b)
        return h / det - self.DF[:, :, None] * self.ddet[..., None, None] / det**2


def geometry_at(control: np.ndarray, xhat: np.ndarray, hessian=None) -> GeometryAtPoints:
    vals, grads = p2_shape(xhat)
    x = np.einsum("qi,nia->nqa", vals, control)
    DF = np.einsum("qib,nia->nqab", grads, control)
    if hessian is None:
        hessian = np.einsum("nia,ibc->nabc", control, P2_HESSIANS)
    return GeometryAtPoints(x, DF, det2(DF), hessian)


def _check_positive(control: np.ndarray, what: str):
    rule = quadrature_rule(6)
    pts = np.vstack([rule.all_points, P2_NODES, [[1 / 3, 1 / 3]]])
    det = geometry_at(control, pts).det
    if np.any(det <= 0):
        bad = np.nonzero((det <= 0).any(axis=1))[0]
        raise GeometryError(f"non-positive Jacobian determinant in {what} {bad[:5].tolist()}")


def affine_control_points(mesh: AffineMesh) -> np.ndarray:
    v = mesh.vertices[mesh.cells]
    mids = np.stack([0.5 * (v[:, a] + v[:, b]) for a, b in EDGE_VERTICES], axis=1)
    return np.concatenate([v, mids], axis=1)


def build_cell_maps(mesh: AffineMesh, chart: DiskChart | None) -> CellMaps:
    """Maps for every cell; ``chart=None`` gives the straight (affine) maps."""
    control = affine_control_points(mesh)
    curved = np.zeros(mesh.n_cells, dtype=bool)
    if chart is not None:
        loc = mesh.cell_boundary_edge
        cells = np.nonzero(loc >= 0)[0]
        k = loc[cells]
        a = mesh.cells[cells, EDGE_VERTICES[k, 0]]
        b = mesh.cells[cells, EDGE_VERTICES[k, 1]]
        control[cells, 3 + k] = chart.arc_midpoint(mesh.vertices[a], mesh.vertices[b])
        curved[cells] = True
    _check_positive(control, "cells")
    return CellMaps(control, curved, mesh.areas.copy())


def build_cell_map(mesh: AffineMesh, chart: DiskChart | None, cell: int) -> GeoMap:
    if not 0 <= cell < mesh.n_cells:
        raise DomainError(f"cell index {cell} out of range")
    v = mesh.vertices[mesh.cells[cell]]
    control = np.vstack([v, [0.5 * (v[a] + v[b]) for a, b in EDGE_VERTICES]])
    curved = False
    k = mesh.cell_boundary_edge[cell]
    if chart is not None and k >= 0:
        a, b = EDGE_VERTICES[k]
        control[3 + k] = chart.arc_midpoint(v[a], v[b])
        curved = True
    _check_positive(control[None], "cell")
    return GeoMap(control, curved, float(mesh.areas[cell]))


def map_eval(gmap: GeoMap, p) -> MapData:
    """All map quantities at reference point(s) ``p``."""
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    if np.any(barycentric(np.atleast_2d(p)) < -1e-10):
        raise DomainError("reference point outside the reference triangle")
    g = geometry_at(gmap.control_points[None], np.atleast_2d(p))
    if np.any(g.det <= 0):
        raise GeometryError("non-positive Jacobian determinant")
    out = MapData(
        x=g.x[0], DF=g.DF[0], det=g.det[0], A=g.A[0], R=g.R[0],
        dDF=g.hessian[0], dA=g.dA[0],
    )
    if single:
        out = MapData(out.x[0], out.DF[0], out.det[0], out.A[0], out.R[0], out.dDF, out.dA[0])
    return out


def forward_map(gmap: GeoMap, p) -> np.ndarray:
    vals, _ = p2_shape(np.atleast_2d(p))
    return vals @ gmap.control_points


def invert_map(gmap: GeoMap, x, max_iter: int = 30, return_iterations: bool = False):
    """Newton inversion of F_T starting at the barycenter."""
    x = np.asarray(x, dtype=float)
    cp = gmap.control_points
    hT = gmap.parent_diameter
    lo, hi = cp.min(axis=0) - 0.25 * hT, cp.max(axis=0) + 0.25 * hT
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError("point outside the cell's bounding box")
    xh = np.array([1 / 3, 1 / 3])
    for it in range(max_iter + 1):
        vals, grads = p2_shape(xh[None])
        r = vals[0] @ cp - x
        if np.linalg.norm(r) <= 1e-12 * hT:
            return (xh, it) if return_iterations else xh
        if it == max_iter:
            break
        DF = np.einsum("ib,ia->ab", grads[0], cp)
        xh = xh - np.linalg.solve(DF, r)
    raise InversionError(f"Newton inversion did not converge in {max_iter} iterations")


# --- edge curves ----------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeCurve:
    """Curve e_R = G(G_h^{-1}(e)) from the lower- to the higher-index vertex."""

    start: np.ndarray
    end: np.ndarray
    chart: DiskChart | None = None  # set for boundary arcs

    @property
    def is_arc(self) -> bool:
        return self.chart is not None

    def point(self, s):
        s = np.asarray(s, dtype=float)
        if self.is_arc:
            return self.chart.arc(self.start, self.end, s)
        return self.start + s[..., None] * (self.end - self.start)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.is_arc:
            return self.chart.arc_derivative(self.start, self.end, s)
        return np.broadcast_to(self.end - self.start, s.shape + (2,)).copy()

    def tangent(self, s):
        d = self.derivative(s)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def integrate_tangential(self, field, n_points: int = 8) -> float:
        """Integral of field . t along the curve (``field`` maps (n,2)->(n,2))."""

        s, w = gauss_interval(n_points)
        return float(w @ np.einsum("qa,qa->q", field(self.point(s)), self.derivative(s)))


def edge_true_curve(mesh: AffineMesh, chart: DiskChart, edge: int) -> EdgeCurve:
    """The true curve of a mesh edge.

    Interior edges map to themselves because G is affine along every edge
    that has an interior endpoint; boundary edges map to the circular arc
    between their endpoints.
    """
    if not 0 <= edge < mesh.n_edges:
        raise DomainError(f"edge index {edge} out of range")
    i, j = mesh.edges[edge]
    a, b = mesh.vertices[i], mesh.vertices[j]
    if mesh.edge_boundary[edge] and chart is not None:
        return EdgeCurve(a.copy(), b.copy(), chart)
    return EdgeCurve(a.copy(), b.copy())


def edge_quadrature(mesh: AffineMesh, chart: DiskChart | None, n_points: int = 8):
    """Gauss points on the true curve of every edge, oriented from the lower
    to the higher vertex index.

    Returns points (E, n, 2), curve derivatives d x / d s (E, n, 2) and the
    weights (n,) on s in [0, 1], so that the line integral of g . t equals
    sum_q w_q g(x_q) . dx_q.
    """

    s, w = gauss_interval(n_points)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    der = np.broadcast_to((b - a)[:, None, :], pts.shape).copy()
    if chart is not None:
        arc = np.nonzero(mesh.edge_boundary)[0]
        t1, delta = chart._angles(a[arc], b[arc])
        th = t1[:, None] + s[None, :] * delta[:, None]
        c = np.asarray(chart.center)
        pts[arc] = c + chart.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
        der[arc] = chart.radius * delta[:, None, None] * np.stack([-np.sin(th), np.cos(th)], axis=-1)
    return pts, der, w
