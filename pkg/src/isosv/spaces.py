"""Local and global velocity/pressure spaces for the three discretization variants.

ISO_PIOLA
    velocity v = A_T v_hat with A_T = DF_T / det DF_T on the quadratic cell
    maps, pressure by composition.
AFFINE
    the same construction on the straight cells of the polygonal domain.
ISO_COMPOSITION
    velocity and pressure both by composition on the quadratic cell maps.

Local velocity DOFs are ordered 2*j + c (node j of the reference macro,
component c).  The basis is nodal: basis function (j, c) takes the value e_c
at the physical node F_T(a_j) and vanishes at all other nodes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, GeometryError
from .geometry import AffineMesh, CellMaps, DiskChart, GeoMap, build_cell_maps, geometry_at
from .quadrature import gauss_interval, quadrature_rule
from .reference import (
    EDGE_VERTICES,
    VERTICES,
    barycentric,
    build_reference_macro,
    eval_pressure_basis,
    eval_velocity_scalar_basis,
)

NODES = build_reference_macro().nodes


class VariantTag(enum.Enum):
    ISO_PIOLA = "iso"
    AFFINE = "affine"
    ISO_COMPOSITION = "composition"

    @classmethod
    def parse(cls, value) -> "VariantTag":
        if isinstance(value, cls):
            return value
        for v in cls:
            if value in (v.value, v.name):
                return v
        raise ConfigurationError(f"unknown variant {value!r}")

    @property
    def piola(self) -> bool:
        return self is not VariantTag.ISO_COMPOSITION


def cell_maps_for(mesh: AffineMesh, chart: DiskChart | None, variant: VariantTag) -> CellMaps:
    """Quadratic maps for the isoparametric variants, straight maps for AFFINE."""
    variant = VariantTag.parse(variant)
    return build_cell_maps(mesh, None if variant is VariantTag.AFFINE else chart)


# --- DOF map -----------------------------------------------------------------------


@dataclass(frozen=True)
class DofMap:
    cell_nodes: np.ndarray  # (N, 10) global velocity node per local node
    boundary_mask: np.ndarray  # (n_velocity,) True for DOFs fixed to zero
    n_vertices: int
    n_edges: int
    n_cells: int

    @property
    def n_nodes(self) -> int:
        return self.n_vertices + self.n_edges + 4 * self.n_cells

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_pressure(self) -> int:
        return 9 * self.n_cells

    @property
    def cell_velocity_dofs(self) -> np.ndarray:
        """(N, 20) global velocity DOFs in local order 2*j + c."""
        return (2 * self.cell_nodes[:, :, None] + np.arange(2)).reshape(self.n_cells, 20)

    @property
    def cell_pressure_dofs(self) -> np.ndarray:
        return 9 * np.arange(self.n_cells)[:, None] + np.arange(9)

    @property
    def free_velocity(self) -> np.ndarray:
        return np.nonzero(~self.boundary_mask)[0]


def build_dof_map(mesh: AffineMesh) -> DofMap:
    nv, ne, n = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    nodes = np.empty((n, 10), dtype=np.int64)
    nodes[:, :3] = mesh.cells
    nodes[:, 3:6] = nv + mesh.cell_edges
    nodes[:, 6:] = nv + ne + 4 * np.arange(n)[:, None] + np.arange(4)
    bnode = np.zeros(nv + ne + 4 * n, dtype=bool)
    bnode[:nv] = mesh.boundary_vertex
    bnode[nv : nv + ne] = mesh.edge_boundary
    mask = np.repeat(bnode, 2)
    return DofMap(nodes, mask, nv, ne, n)


# --- local bases ---------------------------------------------------------------------


@dataclass(frozen=True)
class LocalVelocityBasis:
    x: np.ndarray  # (..., Q, 2) physical points
    values: np.ndarray  # (..., Q, 20, 2)
    gradients: np.ndarray  # (..., Q, 20, 2, 2), [.., a, b] = d v_a / d x_b
    divergence: np.ndarray  # (..., Q, 20)
    det: np.ndarray  # (..., Q)


def _check_reference_points(p):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if np.any(barycentric(p) < -1e-10):
        raise DomainError("reference point outside the reference triangle")
    return p


def velocity_basis_batch(control: np.ndarray, p, variant: VariantTag, sub=None, hessian=None) -> LocalVelocityBasis:
    """Nodal velocity basis of many cells (control points (n, 6, 2)) at the
    same reference points."""
    variant = VariantTag.parse(variant)
    p = _check_reference_points(p)
    L, dL = eval_velocity_scalar_basis(p, sub)
    g = geometry_at(control, p, hessian)
    if np.any(g.det <= 0):
        raise GeometryError("non-positive Jacobian determinant at evaluation point")
    n, q = g.det.shape
    Jinv = g.Jinv
    if variant.piola:
        gn = geometry_at(control, NODES, g.hessian)
        if np.any(gn.det <= 0):
            raise GeometryError("singular Piola matrix at a node")
        m = gn.adj  # (n, 10, 2, 2): column c is A(a_j)^{-1} e_c
        Am = np.einsum("nqab,njbc->nqjca", g.A, m)
        dAm = np.einsum("nqdab,njbc->nqjcad", g.dA, m)
        values = L[None, :, :, None, None] * Am
        refgrad = dL[None, :, :, None, None, :] * Am[..., None] + L[None, :, :, None, None, None] * dAm
        grads = np.einsum("nqjcad,nqde->nqjcae", refgrad, Jinv)
        div = np.einsum("qjb,njbc->nqjc", dL, m) / g.det[:, :, None, None]
    else:
        eye = np.eye(2)
        values = np.broadcast_to(L[None, :, :, None, None] * eye, (n, q, 10, 2, 2))
        phys = np.einsum("qjd,nqde->nqje", dL, Jinv)  # physical gradient of L_j o F^{-1}
        grads = eye[None, None, None, :, :, None] * phys[:, :, :, None, None, :]
        div = phys
    return LocalVelocityBasis(
        x=g.x,
        values=np.ascontiguousarray(values).reshape(n, q, 20, 2),
        gradients=grads.reshape(n, q, 20, 2, 2),
        divergence=div.reshape(n, q, 20),
        det=g.det,
    )


def straight_jacobians(control: np.ndarray):
    """Constant DF, det and DF^{-1} of straight cells from their vertices."""
    v = control[:, :3]
    DF = np.stack([v[:, 0] - v[:, 2], v[:, 1] - v[:, 2]], axis=-1)
    det = DF[:, 0, 0] * DF[:, 1, 1] - DF[:, 0, 1] * DF[:, 1, 0]
    if np.any(det <= 0):
        raise GeometryError("non-positive Jacobian determinant")
    Jinv = np.stack([np.stack([DF[:, 1, 1], -DF[:, 0, 1]], -1), np.stack([-DF[:, 1, 0], DF[:, 0, 0]], -1)], -2)
    return DF, det, Jinv / det[:, None, None]


def local_velocity_basis(gmap: GeoMap, p, variant: VariantTag, sub=None) -> LocalVelocityBasis:
    """Nodal velocity basis of one cell at reference points ``p`` (n, 2)."""
    b = velocity_basis_batch(gmap.control_points[None], p, variant, sub)
    return LocalVelocityBasis(b.x[0], b.values[0], b.gradients[0], b.divergence[0], b.det[0])


def local_pressure_basis(gmap: GeoMap, p, variant: VariantTag = VariantTag.ISO_PIOLA, sub=None) -> np.ndarray:
    """Pressure basis values (n, 9); every variant maps pressure by composition."""
    return eval_pressure_basis(_check_reference_points(p), sub)


# --- global operations -----------------------------------------------------------------


@dataclass(frozen=True)
class PressureConstraint:
    """Linear functional on pressure DOF vectors fixing the pressure constant."""

    coefficients: np.ndarray

    def __call__(self, p: np.ndarray) -> float:
        return float(self.coefficients @ p)


def pressure_constraint_vector(mesh: AffineMesh, maps: CellMaps, variant: VariantTag = VariantTag.ISO_PIOLA) -> PressureConstraint:
    """Weights of the zero-mean pressure condition.

    For the Piola variants the condition is sum_T 2|T~| int_T q / det(DF_T o F_T^{-1}),
    which pulls back to 2|T~| int_That q_hat; each reference pressure basis
    function integrates to 1/18.  For ISO_COMPOSITION the plain mean int_T q is
    used, i.e. int_That q_hat det DF_T.
    """
    variant = VariantTag.parse(variant)
    if variant.piola:
        w = np.repeat(2.0 * mesh.areas / 18.0, 9)
        return PressureConstraint(w)

    rule = quadrature_rule(2)
    q = eval_pressure_basis(rule.all_points, rule.sub)
    det = geometry_at(maps.control, rule.all_points, maps.hessian).det
    w = np.einsum("q,qj,nq->nj", rule.all_weights, q, det)
    return PressureConstraint(w.ravel())


def node_coordinates(dofmap: DofMap, maps: CellMaps) -> np.ndarray:
    """Physical position F_T(a_j) of every global velocity node."""
    x = geometry_at(maps.control, NODES, maps.hessian).x
    out = np.empty((dofmap.n_nodes, 2))
    out[dofmap.cell_nodes.ravel()] = x.reshape(-1, 2)
    return out


def interpolate_velocity_nodal(u_exact, dofmap: DofMap, maps: CellMaps) -> np.ndarray:
    """DOF vector of nodal values of ``u_exact`` (boundary DOFs kept)."""
    x = node_coordinates(dofmap, maps)
    return np.asarray(u_exact(x), dtype=float).reshape(-1)


def psi_lift(tilde_v: np.ndarray) -> np.ndarray:
    """Lift from the affine space: nodal values are copied unchanged, because
    nodes of the curved mesh correspond one-to-one to those of the straight one."""
    return np.array(tilde_v, dtype=float, copy=True)


@dataclass(frozen=True)
class DiscreteVelocity:
    x: np.ndarray  # (n, Q, 2)
    values: np.ndarray  # (n, Q, 2)
    gradients: np.ndarray  # (n, Q, 2, 2)
    divergence: np.ndarray  # (n, Q)
    det: np.ndarray  # (n, Q)


def evaluate_velocity(u: np.ndarray, dofmap: DofMap, maps: CellMaps, variant: VariantTag, p, sub=None, cells=None) -> DiscreteVelocity:
    """Discrete velocity at reference points of the given cells.

    On straight cells the Piola and composition bases coincide, so the field
    is evaluated as a composed Lagrange interpolant there.
    """
    variant = VariantTag.parse(variant)
    p = _check_reference_points(p)
    cells = np.arange(dofmap.n_cells) if cells is None else np.asarray(cells)
    coef = u[dofmap.cell_velocity_dofs[cells]].reshape(-1, 10, 2)
    g = geometry_at(maps.control[cells], p, maps.hessian[cells])
    L, dL = eval_velocity_scalar_basis(p, sub)
    vals = np.einsum("qj,njc->nqc", L, coef)
    refgrad = np.einsum("qjd,njc->nqcd", dL, coef)
    grads = np.einsum("nqcd,nqde->nqce", refgrad, g.Jinv)
    curved = maps.curved[cells]
    if curved.any():
        b = velocity_basis_batch(maps.control[cells[curved]], p, variant, sub, maps.hessian[cells[curved]])
        cc = coef[curved].reshape(-1, 20)
        vals[curved] = np.einsum("nqia,ni->nqa", b.values, cc)
        grads[curved] = np.einsum("nqiab,ni->nqab", b.gradients, cc)
    div = np.trace(grads, axis1=-2, axis2=-1).copy()
    if curved.any() and variant.piola:
        div[curved] = np.einsum("nqi,ni->nq", b.divergence, cc)
    return DiscreteVelocity(g.x, vals, grads, div, g.det)


def evaluate_pressure(p_dofs: np.ndarray, dofmap: DofMap, p, sub=None, cells=None) -> np.ndarray:
    cells = np.arange(dofmap.n_cells) if cells is None else np.asarray(cells)
    q = eval_pressure_basis(_check_reference_points(p), sub)
    return np.einsum("qj,nj->nq", q, p_dofs[dofmap.cell_pressure_dofs[cells]])


# --- edge traces ------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeTraces:
    """Velocity traces on both sides of interior edges at Gauss points.

    Points run from the lower to the higher global vertex index; ``normals``
    point out of the first cell.
    """

    edges: np.ndarray  # (E,)
    weights: np.ndarray  # (n,) on [0, 1]
    x_first: np.ndarray  # (E, n, 2)
    x_second: np.ndarray
    v_first: np.ndarray  # (E, n, 2)
    v_second: np.ndarray
    normals: np.ndarray  # (E, 2)
    lengths: np.ndarray  # (E,)

    def jump_integrals(self) -> np.ndarray:
        """Integral over each edge of v_first - v_second, shape (E, 2)."""
        return np.einsum("q,eqa->ea", self.weights, self.v_first - self.v_second) * self.lengths[:, None]


def interior_edge_traces(u: np.ndarray, mesh: AffineMesh, dofmap: DofMap, maps: CellMaps, variant: VariantTag,
                         edges=None, n_points: int = 8) -> EdgeTraces:
    interior = np.nonzero((mesh.edge_cells >= 0).all(axis=1))[0]
    edges = interior if edges is None else np.intersect1d(interior, edges)
    s, w = gauss_interval(n_points)
    side = []
    for slot in (0, 1):
        cells = mesh.edge_cells[edges, slot]
        k = np.argmax(mesh.cell_edges[cells] == edges[:, None], axis=1)
        sign = mesh.cell_edge_sign[cells, k]
        xs = np.empty((len(edges), n_points, 2))
        vs = np.empty((len(edges), n_points, 2))
        for kk in range(3):
            a, b = VERTICES[EDGE_VERTICES[kk, 0]], VERTICES[EDGE_VERTICES[kk, 1]]
            for sg in (1, -1):
                sel = np.nonzero((k == kk) & (sign == sg))[0]
                if not len(sel):
                    continue
                t = s if sg == 1 else 1.0 - s
                p = a + t[:, None] * (b - a)
                ev = evaluate_velocity(u, dofmap, maps, variant, p, np.full(n_points, kk), cells[sel])
                xs[sel], vs[sel] = ev.x, ev.values
        side.append((xs, vs))
    d = mesh.vertices[mesh.edges[edges, 1]] - mesh.vertices[mesh.edges[edges, 0]]
    length = np.linalg.norm(d, axis=1)
    # the first cell traverses the edge lower -> higher, so its outward normal is d rotated by -90 degrees
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    return EdgeTraces(edges, w, side[0][0], side[1][0], side[0][1], side[1][1], normals, length)
