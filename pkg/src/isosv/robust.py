"""Covariant space W(T), C1 macro space Sigma(T) and the commuting projections.

W(T) consists of the fields w = R_T w_hat with R_T = DF_T^{-T} and w_hat a
continuous piecewise-quadratic vector field on the reference CT split.
Its 20 DOFs, in local order, are

    0..5    w(alpha_i)_c at the three vertices (2*i + c)
    6..8    w(m_k) . n_k at the edge midpoints (outward unit normal)
    9..11   integral of w . t over edge k (counterclockwise)
    12..19  integral over T of rot(w) q for q in a basis of the mean-free
            pressures (pulled back to the reference cell)

Sigma(T) is the composed reference C1 cubic CT space with DOFs value and
gradient at each vertex (3*i, 3*i+1, 3*i+2) and the normal derivative at
each edge midpoint (9 + k).  Gradients of Sigma(T) lie in W(T), and the
projections satisfy Pi_W grad p = grad Pi_Sigma p.

Global numbering: W^h has 2 DOFs per vertex, 2 per edge (normal and
tangential, oriented by the global edge direction) and 8 per cell;
Sigma^h has 3 per vertex and 1 per edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCellError
from .geometry import P2_NODES, AffineMesh, CellMaps, DiskChart, GeoMap, edge_quadrature, geometry_at
from .quadrature import quadrature_rule
from .reference import (
    EDGE_NORMALS,
    EDGE_TANGENTS,
    edge_lagrange_integrals,
    eval_ct_cubic_basis,
    eval_pressure_basis,
    eval_velocity_scalar_basis,
    mean_zero_pressure_basis,
    reference_divergence_matrix,
)


@dataclass(frozen=True)
class RotationConstant:
    """S = [[0, -1], [1, 0]]; rot(S v) = div v."""

    matrix: np.ndarray = field(default_factory=lambda: np.array([[0.0, -1.0], [1.0, 0.0]]))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("ab,...b->...a", self.matrix, v)

    def apply_gradient(self, g: np.ndarray) -> np.ndarray:
        """Gradient of S v from the gradient of v (..., 2, 2)."""
        return np.einsum("ab,...bc->...ac", self.matrix, g)


ROTATION = RotationConstant()
W_COND_LIMIT = 1e8
MIDPOINTS = P2_NODES[3:]


def rot(field_grad: np.ndarray) -> np.ndarray:
    """rot v = d v_2 / d x_1 - d v_1 / d x_2 from a gradient array (..., 2, 2)."""
    return field_grad[..., 1, 0] - field_grad[..., 0, 1]


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _reference_rot_rows() -> np.ndarray:
    """(8, 20): integral of rot_hat(L_j e_c) times the mean-free basis q_m."""
    D = reference_divergence_matrix().reshape(9, 10, 2)  # int q_k dL_j/dx_d
    Z = mean_zero_pressure_basis()
    rows = np.empty((8, 10, 2))
    rows[:, :, 0] = -(Z.T @ D[:, :, 1])
    rows[:, :, 1] = Z.T @ D[:, :, 0]
    return rows.reshape(8, 20)


def _mapped_normals(control: np.ndarray, hessian=None):
    """Outward unit normals (n, 3, 2) at the mapped edge midpoints and R_T
    at the six geometry nodes (n, 6, 2, 2)."""
    g = geometry_at(control, P2_NODES, hessian)
    R = g.R
    n = _unit(np.einsum("nkab,kb->nka", R[:, 3:], EDGE_NORMALS))
    return n, R


# --- W(T) ------------------------------------------------------------------------


def w_dof_matrix(control: np.ndarray, hessian=None) -> np.ndarray:
    """DOF functionals applied to the raw fields R_T L_j e_c: shape (n, 20, 20)."""
    n_cells = control.shape[0]
    normals, R = _mapped_normals(control, hessian)
    D = np.zeros((n_cells, 20, 20))
    for i in range(3):
        D[:, 2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = R[:, i]
    for k in range(3):
        j = 3 + k
        D[:, 6 + k, 2 * j : 2 * j + 2] = np.einsum("na,nac->nc", normals[:, k], R[:, 3 + k])
    # tangential moments are invariant under the covariant map, so they are
    # exact reference-edge integrals
    E = edge_lagrange_integrals()
    for k in range(3):
        D[:, 9 + k] = (E[k][:, None] * EDGE_TANGENTS[k][None, :]).reshape(20)
    D[:, 12:] = _reference_rot_rows()
    return D


def _invert_checked(D: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(D)
    if not np.all(np.isfinite(cond)) or cond.max() > W_COND_LIMIT:
        bad = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise DegenerateCellError(f"{what} DOF matrix of cell {bad} has condition {cond[bad]:.3e}")
    return np.linalg.inv(D)


@dataclass(frozen=True)
class WLocalBasis:
    """Dual basis of W(T): field i is R_T sum_j L_j coefficients[2j+c, i] e_c."""

    gmap: GeoMap
    coefficients: np.ndarray  # (20, 20)
    dof_matrix: np.ndarray  # (20, 20) DOFs of the raw fields

    def evaluate(self, p, sub=None):
        """Values (Q, 20, 2) and rot (Q, 20) at reference points."""
        L, dL = eval_velocity_scalar_basis(p, sub)
        g = geometry_at(self.gmap.control_points[None], np.atleast_2d(p))
        what = self.coefficients.reshape(10, 2, 20)
        w_hat = np.einsum("qj,jci->qic", L, what)
        values = np.einsum("qab,qib->qia", g.R[0], w_hat)
        rot_hat = np.einsum("qj,ji->qi", dL[:, :, 0], what[:, 1]) - np.einsum("qj,ji->qi", dL[:, :, 1], what[:, 0])
        return values, rot_hat / g.det[0][:, None]


def local_w_basis(gmap: GeoMap) -> WLocalBasis:
    D = w_dof_matrix(gmap.control_points[None])
    C = _invert_checked(D, "W(T)")[0]
    return WLocalBasis(gmap, C, D[0])


def rot_eval(basis: WLocalBasis, p, sub=None) -> np.ndarray:
    """rot of the W(T) dual basis fields via rot w = rot_hat(w_hat) / det."""
    return basis.evaluate(p, sub)[1]


# --- Sigma(T) -------------------------------------------------------------------


def sigma_dof_matrix(control: np.ndarray, hessian=None) -> np.ndarray:
    """DOF functionals applied to the composed reference CT basis: (n, 12, 12)."""
    n_cells = control.shape[0]
    normals, R = _mapped_normals(control, hessian)
    D = np.zeros((n_cells, 12, 12))
    for i in range(3):
        D[:, 3 * i, 3 * i] = 1.0
        D[:, 3 * i + 1 : 3 * i + 3, 3 * i + 1 : 3 * i + 3] = R[:, i]
    for k in range(3):
        _, g = eval_ct_cubic_basis(MIDPOINTS[k][None], np.array([k]))
        D[:, 9 + k] = np.einsum("na,nab,rb->nr", normals[:, k], R[:, 3 + k], g[0])
    return D


@dataclass(frozen=True)
class SigmaLocal:
    gmap: GeoMap
    coefficients: np.ndarray  # (12, 12): dual function i = sum_r C[r, i] sigma_hat_r
    dof_matrix: np.ndarray

    def evaluate(self, p, sub=None):
        """Values (Q, 12) and physical gradients (Q, 12, 2)."""
        v, g = eval_ct_cubic_basis(p, sub)
        geo = geometry_at(self.gmap.control_points[None], np.atleast_2d(p))
        vals = v @ self.coefficients
        grads = np.einsum("qab,qrb,ri->qia", geo.R[0], g, self.coefficients)
        return vals, grads


def local_sigma_basis(gmap: GeoMap) -> SigmaLocal:
    D = sigma_dof_matrix(gmap.control_points[None])
    C = _invert_checked(D, "Sigma(T)")[0]
    return SigmaLocal(gmap, C, D[0])


# --- global numbering -----------------------------------------------------------


def w_local_to_global(mesh: AffineMesh):
    """Global W^h index and sign of every local DOF: two (N, 20) arrays."""
    nv, ne, n = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    idx = np.empty((n, 20), dtype=np.int64)
    sign = np.ones((n, 20))
    idx[:, :6] = (2 * mesh.cells[:, :, None] + np.arange(2)).reshape(n, 6)
    idx[:, 6:9] = 2 * nv + 2 * mesh.cell_edges
    idx[:, 9:12] = 2 * nv + 2 * mesh.cell_edges + 1
    sign[:, 6:9] = mesh.cell_edge_sign
    sign[:, 9:12] = mesh.cell_edge_sign
    idx[:, 12:] = 2 * nv + 2 * ne + 8 * np.arange(n)[:, None] + np.arange(8)
    return idx, sign


def sigma_local_to_global(mesh: AffineMesh):
    nv, n = mesh.n_vertices, mesh.n_cells
    idx = np.empty((n, 12), dtype=np.int64)
    sign = np.ones((n, 12))
    idx[:, :9] = (3 * mesh.cells[:, :, None] + np.arange(3)).reshape(n, 9)
    idx[:, 9:] = 3 * nv + mesh.cell_edges
    sign[:, 9:] = mesh.cell_edge_sign
    return idx, sign


def _edge_frames(mesh: AffineMesh, chart: DiskChart | None):
    """True-curve midpoints and global unit normals of all edges."""
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    mid = 0.5 * (a + b)
    if chart is not None:
        bd = mesh.edge_boundary
        mid[bd] = chart.arc_midpoint(a[bd], b[bd])
    d = _unit(b - a)
    return mid, np.column_stack([d[:, 1], -d[:, 0]])


# --- spaces and fields -----------------------------------------------------------


CHUNK = 8192


def _chunks(n: int):
    for start in range(0, n, CHUNK):
        yield np.arange(start, min(start + CHUNK, n))


class WSpace:
    """Global W^h on a mesh: per-cell dual bases and the local-to-global map."""

    def __init__(self, mesh: AffineMesh, maps: CellMaps, chart: DiskChart | None):
        self.mesh, self.maps, self.chart = mesh, maps, chart
        self.index, self.sign = w_local_to_global(mesh)
        self.dual = np.empty((mesh.n_cells, 20, 20))
        for cells in _chunks(mesh.n_cells):
            D = w_dof_matrix(maps.control[cells], maps.hessian[cells])
            self.dual[cells] = _invert_checked(D, "W(T)")

    @property
    def dimension(self) -> int:
        return 2 * self.mesh.n_vertices + 2 * self.mesh.n_edges + 8 * self.mesh.n_cells


class SigmaSpace:
    """Global Sigma^h on a mesh."""

    def __init__(self, mesh: AffineMesh, maps: CellMaps, chart: DiskChart | None):
        self.mesh, self.maps, self.chart = mesh, maps, chart
        self.index, self.sign = sigma_local_to_global(mesh)
        self.dual = np.empty((mesh.n_cells, 12, 12))
        for cells in _chunks(mesh.n_cells):
            D = sigma_dof_matrix(maps.control[cells], maps.hessian[cells])
            self.dual[cells] = _invert_checked(D, "Sigma(T)")

    @property
    def dimension(self) -> int:
        return 3 * self.mesh.n_vertices + self.mesh.n_edges


class WField:
    """A member of W^h stored by global coefficients and per-cell reference
    nodal values w_hat (N, 10, 2); usable as a load source."""

    def __init__(self, space: WSpace, coefficients: np.ndarray):
        self.space = space
        self.mesh, self.maps = space.mesh, space.maps
        self.coefficients = np.asarray(coefficients, dtype=float)
        local = self.coefficients[space.index] * space.sign
        self.nodal = np.einsum("nri,ni->nr", space.dual, local).reshape(-1, 10, 2)

    def reference_values(self, pts, sub=None, cells=slice(None)):
        L, dL = eval_velocity_scalar_basis(pts, sub)
        nodal = self.nodal[cells]
        w_hat = np.einsum("qj,njc->nqc", L, nodal)
        rot_hat = np.einsum("qj,nj->nq", dL[:, :, 0], nodal[:, :, 1]) - np.einsum("qj,nj->nq", dL[:, :, 1], nodal[:, :, 0])
        return w_hat, rot_hat

    def evaluate(self, cells, pts, sub, geom) -> np.ndarray:
        w_hat, _ = self.reference_values(pts, sub, cells)
        return np.einsum("nqab,nqb->nqa", geom.R, w_hat)

    def values_and_rot(self, pts, sub=None, cells=None):
        cells = np.arange(self.mesh.n_cells) if cells is None else np.asarray(cells)
        geom = geometry_at(self.maps.control[cells], np.atleast_2d(pts), self.maps.hessian[cells])
        w_hat, rot_hat = self.reference_values(pts, sub, cells)
        return np.einsum("nqab,nqb->nqa", geom.R, w_hat), rot_hat / geom.det, geom


class SigmaField:
    def __init__(self, space: SigmaSpace, coefficients: np.ndarray):
        self.space = space
        self.mesh, self.maps = space.mesh, space.maps
        self.coefficients = np.asarray(coefficients, dtype=float)
        local = self.coefficients[space.index] * space.sign
        self.raw = np.einsum("nri,ni->nr", space.dual, local)

    def values_and_gradients(self, pts, sub=None, cells=None):
        cells = np.arange(self.mesh.n_cells) if cells is None else np.asarray(cells)
        v, g = eval_ct_cubic_basis(pts, sub)
        geom = geometry_at(self.maps.control[cells], np.atleast_2d(pts), self.maps.hessian[cells])
        raw = self.raw[cells]
        vals = np.einsum("qr,nr->nq", v, raw)
        grads = np.einsum("nqab,qrb,nr->nqa", geom.R, g, raw)
        return vals, grads


# --- projections -------------------------------------------------------------------


def pi_w(f, rot_f, mesh: AffineMesh, maps: CellMaps, chart: DiskChart | None, quad_degree: int = 8,
         edge_points: int = 8, space: WSpace | None = None) -> WField:
    """Commuting projection onto W^h.

    Vertex values and midpoint normal components come from f at the physical
    nodes; tangential moments integrate f . t along the true edge curves
    (straight interior edges, circular boundary arcs); interior moments
    integrate rot f against the mean-free pressures over the mapped cell.
    ``rot_f`` may be None for gradient fields, whose rot vanishes.
    """
    space = space or WSpace(mesh, maps, chart)
    nv, ne, n = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    coef = np.empty(space.dimension)
    coef[: 2 * nv] = np.asarray(f(mesh.vertices), dtype=float).reshape(-1)
    mid, normal = _edge_frames(mesh, chart)
    pts, der, w = edge_quadrature(mesh, chart, edge_points)
    fe = np.asarray(f(pts), dtype=float)
    coef[2 * nv : 2 * nv + 2 * ne : 2] = np.einsum("ea,ea->e", f(mid), normal)
    coef[2 * nv + 1 : 2 * nv + 2 * ne : 2] = np.einsum("q,eqa,eqa->e", w, fe, der)
    if rot_f is None:
        coef[2 * nv + 2 * ne :] = 0.0
    else:
        rule = quadrature_rule(quad_degree)
        qz = eval_pressure_basis(rule.all_points, rule.sub) @ mean_zero_pressure_basis()
        moments = np.empty((n, 8))
        for cells in _chunks(n):
            geom = geometry_at(maps.control[cells], rule.all_points, maps.hessian[cells])
            r = np.asarray(rot_f(geom.x), dtype=float)
            moments[cells] = np.einsum("q,nq,nq,qm->nm", rule.all_weights, geom.det, r, qz)
        coef[2 * nv + 2 * ne :] = moments.reshape(-1)
    return WField(space, coef)


def pi_sigma(p, grad_p, mesh: AffineMesh, maps: CellMaps, chart: DiskChart | None,
             space: SigmaSpace | None = None) -> SigmaField:
    """Projection onto Sigma^h from values and gradients at vertices and the
    normal derivative at true edge midpoints."""
    space = space or SigmaSpace(mesh, maps, chart)
    nv = mesh.n_vertices
    coef = np.empty(space.dimension)
    vals = np.asarray(p(mesh.vertices), dtype=float)
    grads = np.asarray(grad_p(mesh.vertices), dtype=float)
    coef[: 3 * nv] = np.column_stack([vals, grads]).reshape(-1)
    mid, normal = _edge_frames(mesh, chart)
    coef[3 * nv :] = np.einsum("ea,ea->e", grad_p(mid), normal)
    return SigmaField(space, coef)


def commuting_mismatch(p, grad_p, mesh, maps, chart, quad_degree: int = 6,
                       w_space: WSpace | None = None, sigma_space: SigmaSpace | None = None) -> float:
    """max over cells and quadrature points of |Pi_W grad p - grad Pi_Sigma p|."""
    rule = quadrature_rule(quad_degree)
    w = pi_w(grad_p, None, mesh, maps, chart, space=w_space)
    s = pi_sigma(p, grad_p, mesh, maps, chart, space=sigma_space)
    worst = 0.0
    for cells in _chunks(mesh.n_cells):
        wv, _, _ = w.values_and_rot(rule.all_points, rule.sub, cells)
        _, sg = s.values_and_gradients(rule.all_points, rule.sub, cells)
        worst = max(worst, float(np.abs(wv - sg).max()))
    return worst
