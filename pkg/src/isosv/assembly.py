"""Assembly of the mixed Stokes system over mapped macro elements.

Local matrices are formed for chunks of cells and scattered as coordinate
triplets in cell order; duplicates are summed in that order, so the
assembled matrices are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .geometry import AffineMesh, CellMaps, GeometryAtPoints, geometry_at
from .quadrature import quadrature_rule
from .reference import (
    eval_pressure_basis,
    eval_velocity_scalar_basis,
    reference_divergence_matrix,
    reference_stiffness_tensor,
)
from .spaces import (
    NODES,
    DofMap,
    VariantTag,
    node_coordinates,
    pressure_constraint_vector,
    straight_jacobians,
    velocity_basis_batch,
)

CHUNK = 1024
MIN_ASSEMBLY_DEGREE = 4


@dataclass
class SaddleSystem:
    """Full-size blocks; rows and columns of boundary DOFs are removed when
    the system is restricted for solving."""

    A: sp.csr_matrix  # (n_velocity, n_velocity)
    B: sp.csr_matrix  # (n_pressure, n_velocity)
    c: np.ndarray  # (n_pressure,)
    dofmap: DofMap
    nu: float
    variant: VariantTag
    velocity_xy: np.ndarray  # (n_velocity, 2) node position of every DOF
    cell_xy: np.ndarray  # (n_cells, 2) cell centroids
    pressure_scale: np.ndarray  # (n_cells,) 2|T~|, scales the pressure mass matrix
    rhs: np.ndarray | None = None

    @property
    def free(self) -> np.ndarray:
        return self.dofmap.free_velocity

    def with_rhs(self, rhs: np.ndarray) -> "SaddleSystem":
        return replace(self, rhs=rhs)


def _chunks(n: int, size: int = CHUNK):
    for start in range(0, n, size):
        yield np.arange(start, min(start + size, n))


def _check_degree(degree: int):
    if degree < MIN_ASSEMBLY_DEGREE:
        raise ConfigurationError(f"assembly needs quadrature degree >= {MIN_ASSEMBLY_DEGREE}")
    return quadrature_rule(degree)


def _scatter(rows_local, cols_local, vals, shape):
    r = np.broadcast_to(rows_local[:, :, None], vals.shape).ravel()
    c = np.broadcast_to(cols_local[:, None, :], vals.shape).ravel()
    return sp.coo_matrix((vals.ravel(), (r, c)), shape=shape).tocsr()


def _straight_local(control: np.ndarray, nu: float):
    """Exact local matrices of straight cells from reference integrals.

    On a straight cell the Piola basis equals the composed Lagrange basis,
    so A and B need only the constant Jacobian.
    """
    DF, det, Jinv = straight_jacobians(control)
    G = Jinv @ np.swapaxes(Jinv, 1, 2)
    scal = nu * det[:, None, None] * np.einsum("nde,ijde->nij", G, reference_stiffness_tensor())
    n = len(det)
    A = np.einsum("nij,cd->nicjd", scal, np.eye(2)).reshape(n, 20, 20)
    D = reference_divergence_matrix().reshape(9, 10, 2)
    B = det[:, None, None, None] * np.einsum("kjd,ndc->nkjc", D, Jinv)
    return A, B.reshape(n, 9, 20)


def _curved_local(control, hessian, nu, variant, rule):
    pts, wts, sub = rule.all_points, rule.all_weights, rule.sub
    b = velocity_basis_batch(control, pts, variant, sub, hessian)
    wd = wts * b.det
    n, q = wd.shape
    g = b.gradients.reshape(n, q, 20, 4) * np.sqrt(wd)[:, :, None, None]
    g = np.swapaxes(g, 1, 2).reshape(n, 20, 4 * q)
    A = nu * (g @ np.swapaxes(g, 1, 2))
    B = np.einsum("nq,nqj,qk->nkj", wd, b.divergence, eval_pressure_basis(pts, sub))
    return A, B


def _local_matrices(maps: CellMaps, cells, nu, variant, rule):
    straight = ~maps.curved[cells]
    A = np.empty((len(cells), 20, 20))
    B = np.empty((len(cells), 9, 20))
    s, c = cells[straight], cells[~straight]
    if len(s):
        A[straight], B[straight] = _straight_local(maps.control[s], nu)
    if len(c):
        A[~straight], B[~straight] = _curved_local(maps.control[c], maps.hessian[c], nu, variant, rule)
    return A, B


def assemble_stokes(
    mesh: AffineMesh,
    maps: CellMaps,
    dofs: DofMap,
    nu: float,
    variant: VariantTag,
    quad_degree: int = 6,
) -> SaddleSystem:
    """Viscous block A, divergence block B and the pressure constraint.

    Straight cells use exact reference integrals; curved cells use the
    quadrature rule of the given degree.
    """
    if not nu > 0:
        raise ConfigurationError("viscosity must be positive")
    variant = VariantTag.parse(variant)
    rule = _check_degree(quad_degree)
    vdofs = dofs.cell_velocity_dofs
    pdofs = dofs.cell_pressure_dofs
    A = sp.csr_matrix((dofs.n_velocity, dofs.n_velocity))
    B = sp.csr_matrix((dofs.n_pressure, dofs.n_velocity))
    for cells in _chunks(dofs.n_cells, 8 * CHUNK):
        a, b = _local_matrices(maps, cells, float(nu), variant, rule)
        A = A + _scatter(vdofs[cells], vdofs[cells], a, A.shape)
        B = B + _scatter(pdofs[cells], vdofs[cells], b, B.shape)
    c = pressure_constraint_vector(mesh, maps, variant).coefficients
    return SaddleSystem(
        A.tocsr(),
        B.tocsr(),
        c,
        dofs,
        float(nu),
        variant,
        velocity_xy=np.repeat(node_coordinates(dofs, maps), 2, axis=0),
        cell_xy=mesh.vertices[mesh.cells].mean(axis=1),
        pressure_scale=2.0 * mesh.areas,
    )


# --- sources ------------------------------------------------------------------------


class PhysicalSource:
    """A vector field evaluated directly at mapped quadrature points."""

    def __init__(self, f):
        self.f = f

    def evaluate(self, cells, pts, sub, geom: GeometryAtPoints) -> np.ndarray:
        return np.asarray(self.f(geom.x), dtype=float)


class NodalInterpolatedSource:
    """Isoparametric quadratic interpolant of f on the CT split:
    f_h(F_T(x_hat)) = sum_j f(F_T(a_j)) L_j(x_hat)."""

    def __init__(self, f, maps: CellMaps):
        xn = geometry_at(maps.control, NODES, maps.hessian).x  # (N, 10, 2)
        self.nodal = np.asarray(f(xn), dtype=float)

    def evaluate(self, cells, pts, sub, geom) -> np.ndarray:
        L, _ = eval_velocity_scalar_basis(pts, sub)
        return np.einsum("qj,nja->nqa", L, self.nodal[cells])


def as_source(f):
    return f if hasattr(f, "evaluate") else PhysicalSource(f)


def assemble_load(
    mesh: AffineMesh,
    maps: CellMaps,
    dofs: DofMap,
    f_h,
    variant: VariantTag,
    quad_degree: int = 8,
) -> np.ndarray:
    """rhs_i = sum_T sum_q w_q det_q f_h(x_q) . phi_i(x_q); boundary rows zeroed."""
    variant = VariantTag.parse(variant)
    source = as_source(f_h)
    rule = _check_degree(quad_degree)
    pts, wts, sub = rule.all_points, rule.all_weights, rule.sub
    L, _ = eval_velocity_scalar_basis(pts, sub)
    local = np.empty((dofs.n_cells, 20))
    for cells in _chunks(dofs.n_cells, 8 * CHUNK):
        geom = geometry_at(maps.control[cells], pts, maps.hessian[cells])
        fv = source.evaluate(cells, pts, sub, geom)
        straight = ~maps.curved[cells]
        if straight.any():
            wf = (wts * geom.det[straight])[:, :, None] * fv[straight]
            local[cells[straight]] = np.einsum("nqc,qj->njc", wf, L).reshape(-1, 20)
        if (~straight).any():
            c = cells[~straight]
            b = velocity_basis_batch(maps.control[c], pts, variant, sub, maps.hessian[c])
            local[c] = np.einsum("nq,nqa,nqia->ni", wts * b.det, fv[~straight], b.values)
    rhs = np.zeros(dofs.n_velocity)
    np.add.at(rhs, dofs.cell_velocity_dofs.ravel(), local.ravel())
    rhs[dofs.boundary_mask] = 0.0
    return rhs
