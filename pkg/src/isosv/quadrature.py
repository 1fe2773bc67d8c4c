"""Quadrature on the Clough-Tocher split of the reference triangle and on intervals.

Triangle rules are conical products (Gauss-Jacobi in the collapsed direction,
Gauss-Legendre in the other), mapped onto each of the three sub-triangles.
They have strictly positive weights and interior points for every degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import ConfigurationError

MAX_DEGREE = 12


@lru_cache(maxsize=None)
def _unit_triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Conical product rule on the triangle (0,0),(1,0),(0,1); weights sum to 1/2."""
    n = degree // 2 + 1
    # (1-u) weight absorbs the Duffy Jacobian
    a, wa = roots_jacobi(n, 1.0, 0.0)
    b, wb = roots_jacobi(n, 0.0, 0.0)
    u = (a + 1.0) / 2.0
    wu = wa / 4.0
    v = (b + 1.0) / 2.0
    wv = wb / 2.0
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([uu.ravel(), (vv * (1.0 - uu)).ravel()])
    wts = np.outer(wu, wv).ravel()
    return pts, wts


@dataclass(frozen=True)
class QuadratureRule:
    """A rule on the reference macro triangle, stored per sub-triangle.

    ``points`` has shape (3, nq, 2) and ``weights`` (3, nq); the weights of
    each sub-triangle sum to its area (1/6).
    """

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def n_per_sub(self) -> int:
        return self.points.shape[1]

    @property
    def all_points(self) -> np.ndarray:
        return self.points.reshape(-1, 2)

    @property
    def all_weights(self) -> np.ndarray:
        return self.weights.reshape(-1)

    @property
    def sub(self) -> np.ndarray:
        """Owning sub-triangle of every flattened point."""
        return np.repeat(np.arange(3), self.n_per_sub)


@lru_cache(maxsize=None)
def quadrature_rule(exactness_degree: int) -> QuadratureRule:
    """Rule exact for polynomials of the given degree on each CT sub-triangle."""
    if not isinstance(exactness_degree, (int, np.integer)) or not (
        1 <= exactness_degree <= MAX_DEGREE
    ):
        raise ConfigurationError(
            f"quadrature degree must be an integer in [1, {MAX_DEGREE}], got {exactness_degree!r}"
        )
    # imported lazily to avoid a cycle (reference uses this module)
    from .reference import build_reference_macro

    ref = build_reference_macro()
    pts, wts = _unit_triangle_rule(int(exactness_degree))
    points = np.empty((3, len(wts), 2))
    weights = np.empty((3, len(wts)))
    for k, verts in enumerate(ref.subtriangles):
        p0, p1, p2 = verts
        jac = np.column_stack([p1 - p0, p2 - p0])
        points[k] = p0 + pts @ jac.T
        weights[k] = wts * abs(np.linalg.det(jac))
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, int(exactness_degree))


@lru_cache(maxsize=None)
def gauss_interval(n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n_points)
    return (x + 1.0) / 2.0, w / 2.0
