"""Reference macro triangle with its Clough-Tocher split and reference bases.

The reference triangle has vertices v0=(1,0), v1=(0,1), v2=(0,0); its
barycentric coordinates are (x1, x2, 1-x1-x2).  Macro edge k is the edge
opposite vertex k and sub-triangle K_k = (v_{k+1}, v_{k+2}, b) is the one that
contains macro edge k (indices mod 3).

Node ordering (used by every DOF map downstream)::

    0..2  outer vertices v0, v1, v2
    3..5  outer edge midpoints m0, m1, m2 (midpoint of macro edge k)
    6     barycenter b
    7..9  interior edge midpoints mid(v_i, b), i = 0, 1, 2

Points on an internal CT edge belong to the lowest-index sub-triangle that
contains them, so one-sided quantities (gradients of the piecewise quadratic
basis, the discontinuous pressure basis) are taken from that sub-triangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .quadrature import QuadratureRule, gauss_interval, quadrature_rule

__all__ = [
    "ReferenceMacro",
    "build_reference_macro",
    "locate",
    "eval_velocity_scalar_basis",
    "eval_pressure_basis",
    "eval_ct_cubic_basis",
    "quadrature_rule",
    "QuadratureRule",
]

VERTICES = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
BARYCENTER = np.array([1.0, 1.0]) / 3.0
GRAD_LAMBDA = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])

# outward unit normals of the macro edges
EDGE_NORMALS = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0] / np.sqrt(2.0)])
# counterclockwise unit tangents: normal rotated by +90 degrees
EDGE_TANGENTS = np.column_stack([-EDGE_NORMALS[:, 1], EDGE_NORMALS[:, 0]])
# macro edge k runs from vertex k+1 to vertex k+2 (counterclockwise)
EDGE_VERTICES = np.array([[1, 2], [2, 0], [0, 1]])

INSIDE_TOL = 1e-10
_TIE_TOL = 1e-13


def _sub_local_nodes(k: int) -> list[int]:
    p, q = (k + 1) % 3, (k + 2) % 3
    # P2 order on (P, Q, b): vertices, then mid(Q,b), mid(b,P), mid(P,Q)
    return [p, q, 6, 7 + q, 7 + p, 3 + k]


SUB_NODES = np.array([_sub_local_nodes(k) for k in range(3)])


@dataclass(frozen=True)
class ReferenceMacro:
    vertices: np.ndarray
    barycenter: np.ndarray
    subtriangles: np.ndarray  # (3, 3, 2)
    nodes: np.ndarray  # (10, 2)
    node_tags: tuple[str, ...]
    node_edge: tuple[int | None, ...]

    @property
    def outer_midpoints(self) -> np.ndarray:
        return self.nodes[3:6]


@lru_cache(maxsize=None)
def build_reference_macro() -> ReferenceMacro:
    b = BARYCENTER
    subs = np.array(
        [[VERTICES[(k + 1) % 3], VERTICES[(k + 2) % 3], b] for k in range(3)]
    )
    mids = np.array([0.5 * (VERTICES[i] + VERTICES[j]) for i, j in EDGE_VERTICES])
    inner = np.array([0.5 * (VERTICES[i] + b) for i in range(3)])
    nodes = np.vstack([VERTICES, mids, b[None, :], inner])
    tags = ("outer-vertex",) * 3 + ("outer-edge-midpoint",) * 3 + (
        "barycenter",
    ) + ("interior-edge-midpoint",) * 3
    edge = (None, None, None, 0, 1, 2, None, None, None, None)
    for arr in (subs, nodes):
        arr.setflags(write=False)
    return ReferenceMacro(VERTICES.copy(), b.copy(), subs, nodes, tags, edge)


def barycentric(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 0], p[..., 1], 1.0 - p[..., 0] - p[..., 1]], axis=-1)


def locate(p: np.ndarray) -> np.ndarray:
    """Index of the sub-triangle owning each point (lowest index on ties).

    The point lies in K_k exactly when the k-th barycentric coordinate is the
    smallest of the three.
    """
    lam = barycentric(p)
    if np.any(lam < -INSIDE_TOL):
        raise DomainError("reference point outside the reference triangle")
    lmin = lam.min(axis=-1, keepdims=True)
    return np.argmax(lam <= lmin + _TIE_TOL, axis=-1)


def _sub_coords(p: np.ndarray, sub: np.ndarray | None):
    """Barycentric coordinates (P, Q, b) in the owning sub-triangle and their gradients."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if sub is None:
        sub = locate(p)
    else:
        sub = np.broadcast_to(np.asarray(sub), p.shape[:-1])
        if np.any(barycentric(p) < -INSIDE_TOL):
            raise DomainError("reference point outside the reference triangle")
    lam = barycentric(p)
    k = sub
    kp, kq = (k + 1) % 3, (k + 2) % 3
    lk = np.take_along_axis(lam, k[..., None], -1)[..., 0]
    lp = np.take_along_axis(lam, kp[..., None], -1)[..., 0]
    lq = np.take_along_axis(lam, kq[..., None], -1)[..., 0]
    mu = np.stack([lp - lk, lq - lk, 3.0 * lk], axis=-1)
    gmu = np.stack(
        [GRAD_LAMBDA[kp] - GRAD_LAMBDA[k], GRAD_LAMBDA[kq] - GRAD_LAMBDA[k], 3.0 * GRAD_LAMBDA[k]],
        axis=-2,
    )
    return sub, mu, gmu


def eval_velocity_scalar_basis(p, sub=None) -> tuple[np.ndarray, np.ndarray]:
    """Continuous piecewise-quadratic Lagrange basis for the 10 macro nodes.

    Returns values of shape (n, 10) and reference gradients (n, 10, 2).
    """
    sub, mu, gmu = _sub_coords(p, sub)
    m0, m1, m2 = mu[..., 0], mu[..., 1], mu[..., 2]
    g0, g1, g2 = gmu[..., 0, :], gmu[..., 1, :], gmu[..., 2, :]
    loc_v = np.stack(
        [m0 * (2 * m0 - 1), m1 * (2 * m1 - 1), m2 * (2 * m2 - 1), 4 * m1 * m2, 4 * m2 * m0, 4 * m0 * m1],
        axis=-1,
    )
    loc_g = np.stack(
        [
            (4 * m0 - 1)[..., None] * g0,
            (4 * m1 - 1)[..., None] * g1,
            (4 * m2 - 1)[..., None] * g2,
            4 * (m1[..., None] * g2 + m2[..., None] * g1),
            4 * (m2[..., None] * g0 + m0[..., None] * g2),
            4 * (m0[..., None] * g1 + m1[..., None] * g0),
        ],
        axis=-2,
    )
    n = mu.shape[0]
    vals = np.zeros((n, 10))
    grads = np.zeros((n, 10, 2))
    idx = SUB_NODES[sub]  # (n, 6)
    rows = np.arange(n)[:, None]
    vals[rows, idx] = loc_v
    grads[rows, idx] = loc_g
    return vals, grads


def eval_pressure_basis(p, sub=None) -> np.ndarray:
    """Discontinuous piecewise-linear basis; function 3k+i is the i-th
    barycentric coordinate (P, Q, b order) of sub-triangle k, zero elsewhere."""
    sub, mu, _ = _sub_coords(p, sub)
    n = mu.shape[0]
    vals = np.zeros((n, 9))
    cols = 3 * sub[:, None] + np.arange(3)[None, :]
    vals[np.arange(n)[:, None], cols] = mu
    return vals


def eval_pressure_basis_gradients(p, sub=None) -> np.ndarray:
    sub, _, gmu = _sub_coords(p, sub)
    n = gmu.shape[0]
    grads = np.zeros((n, 9, 2))
    cols = 3 * sub[:, None] + np.arange(3)[None, :]
    grads[np.arange(n)[:, None], cols] = gmu
    return grads


# --- C1 cubic Clough-Tocher space -------------------------------------------

_MONO = np.array([(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)])


def _monomials(p: np.ndarray):
    x, y = p[..., 0:1], p[..., 1:2]
    a, b = _MONO[:, 0], _MONO[:, 1]
    val = x**a * y**b
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = np.where(a > 0, a * x ** np.maximum(a - 1, 0) * y**b, 0.0)
        dy = np.where(b > 0, b * x**a * y ** np.maximum(b - 1, 0), 0.0)
    return val, np.stack([dx, dy], axis=-1)


def _ct_rows(p: np.ndarray, k: int):
    """Rows mapping the 30 piecewise coefficients to value/gradient at p in K_k."""
    val, grad = _monomials(np.atleast_2d(p))
    rv = np.zeros((val.shape[0], 30))
    rg = np.zeros((val.shape[0], 2, 30))
    rv[:, 10 * k : 10 * k + 10] = val
    rg[:, :, 10 * k : 10 * k + 10] = np.swapaxes(grad, 1, 2)
    return rv, rg


def ct_smoothness_matrix() -> np.ndarray:
    """Value and gradient jumps across the three internal CT edges, sampled
    at four points per edge.  Its null space is the C1 piecewise-cubic space."""
    rows = []
    for j in range(3):
        # edge v_j -- b is shared by K_{j+1} and K_{j+2}
        ka, kb = (j + 1) % 3, (j + 2) % 3
        for t in (0.1, 0.35, 0.6, 0.85):
            pt = (1 - t) * VERTICES[j] + t * BARYCENTER
            va, ga = _ct_rows(pt, ka)
            vb, gb = _ct_rows(pt, kb)
            rows.append(va[0] - vb[0])
            rows.append(ga[0, 0] - gb[0, 0])
            rows.append(ga[0, 1] - gb[0, 1])
    return np.array(rows)


def ct_dof_functionals() -> np.ndarray:
    """The 12 DOFs (value, d/dx1, d/dx2 at each vertex; outward normal
    derivative at each edge midpoint) as rows acting on 30 coefficients."""
    rows = []
    for i in range(3):
        k = min((i + 1) % 3, (i + 2) % 3)  # lowest sub-triangle containing v_i
        v, g = _ct_rows(VERTICES[i], k)
        rows.extend([v[0], g[0, 0], g[0, 1]])
    ref = build_reference_macro()
    for k in range(3):
        _, g = _ct_rows(ref.outer_midpoints[k], k)
        rows.append(EDGE_NORMALS[k] @ g[0])
    return np.array(rows)


@lru_cache(maxsize=None)
def ct_cubic_coefficients() -> np.ndarray:
    """Monomial coefficients, shape (12, 3, 10), of the dual C1 cubic basis."""
    s = ct_smoothness_matrix()
    _, sv, vt = np.linalg.svd(s)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    null = vt[rank:].T  # (30, 12)
    if null.shape[1] != 12:
        raise RuntimeError(f"C1 cubic space has dimension {null.shape[1]}, expected 12")
    dmat = ct_dof_functionals() @ null
    coef = null @ np.linalg.inv(dmat)  # columns are dual basis functions
    out = coef.T.reshape(12, 3, 10)
    out.setflags(write=False)
    return out


def eval_ct_cubic_basis(p, sub=None) -> tuple[np.ndarray, np.ndarray]:
    """C1 cubic basis dual to the 12 reference DOFs; values (n, 12), gradients (n, 12, 2)."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if sub is None:
        sub = locate(p)
    elif np.any(barycentric(p) < -INSIDE_TOL):
        raise DomainError("reference point outside the reference triangle")
    sub = np.broadcast_to(np.asarray(sub), p.shape[:-1])
    coef = ct_cubic_coefficients()[:, sub, :]  # (12, n, 10)
    val, grad = _monomials(p)
    vals = np.einsum("bnm,nm->nb", coef, val)
    grads = np.einsum("bnm,nmd->nbd", coef, grad)
    return vals, grads


# --- derived reference matrices ----------------------------------------------


@lru_cache(maxsize=None)
def pressure_mass_matrix() -> np.ndarray:
    rule = quadrature_rule(2)
    q = eval_pressure_basis(rule.all_points, rule.sub)
    m = np.einsum("q,qi,qj->ij", rule.all_weights, q, q)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def mean_zero_pressure_basis() -> np.ndarray:
    """Coefficients (9, 8) of an L2(T^)-orthonormal basis of the mean-zero
    piecewise-linear pressures."""
    m = pressure_mass_matrix()
    ones = np.ones(9)
    # orthogonal complement of the constant in the M-inner product
    c = m @ ones
    _, _, vt = np.linalg.svd(c[None, :])
    z = vt[1:].T
    g = z.T @ m @ z
    w, v = np.linalg.eigh(g)
    basis = z @ v / np.sqrt(w)
    basis.setflags(write=False)
    return basis


@lru_cache(maxsize=None)
def reference_divergence_matrix() -> np.ndarray:
    """D[k, 2j+c] = integral over T^ of q_k * d(L_j)/dx_c (pressure basis k,
    velocity scalar basis j, component c)."""
    rule = quadrature_rule(2)
    pts, sub, w = rule.all_points, rule.sub, rule.all_weights
    q = eval_pressure_basis(pts, sub)
    _, g = eval_velocity_scalar_basis(pts, sub)
    d = np.einsum("p,pk,pjc->kjc", w, q, g).reshape(9, 20)
    d.setflags(write=False)
    return d


@lru_cache(maxsize=None)
def reference_stiffness_tensor() -> np.ndarray:
    """S[i, j, d, e] = integral over T^ of dL_i/dx_d * dL_j/dx_e."""
    rule = quadrature_rule(2)
    _, g = eval_velocity_scalar_basis(rule.all_points, rule.sub)
    s = np.einsum("p,pid,pje->ijde", rule.all_weights, g, g)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=None)
def edge_lagrange_integrals() -> np.ndarray:
    """E[k, j] = integral over macro edge k (arc length) of L_j."""
    x, w = gauss_interval(4)
    out = np.zeros((3, 10))
    for k, (a, b) in enumerate(EDGE_VERTICES):
        pts = VERTICES[a][None, :] * (1 - x[:, None]) + VERTICES[b][None, :] * x[:, None]
        length = np.linalg.norm(VERTICES[b] - VERTICES[a])
        vals, _ = eval_velocity_scalar_basis(pts, np.full(len(x), k))
        out[k] = length * (w @ vals)
    out.setflags(write=False)
    return out
