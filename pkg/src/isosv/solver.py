"""Direct solution of the constrained saddle-point system.

The system solved is

    [ A   B^T  0 ] [u]   [f]
    [ B   0    c ] [p] = [0]
    [ 0   c^T  0 ] [m]   [0]

restricted to the free velocity DOFs.  Since the weak form reads
nu (grad u, grad v) - (div v, p) = (f, v), the pressure block solves for -p.

Two factorization routes are available.

``full``
    SuperLU with partial pivoting on the matrix above.
``condensed``
    The pressure block is shifted by -eps*M_p (pressure mass matrix), which
    makes the matrix quasi-definite.  Per cell, the 8 interior velocity DOFs
    and the 8 mean-free pressure modes are eliminated; the remaining
    interface system (edge/vertex velocities, one constant pressure per cell,
    the multiplier) is ordered by geometric nested dissection and factored
    without pivoting.  Iterative refinement against the unshifted matrix
    removes the shift; the contraction per step is about eps*nu/gamma^2.

Both routes are certified by the relative residual of the unshifted system.
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SaddleSystem
from .errors import ConfigurationError, SolverError
from .reference import mean_zero_pressure_basis, pressure_mass_matrix

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
SHIFT = 1e-6
LOCAL_COND_LIMIT = 1e14
MAX_REFINE = 12
ND_LEAF = 64


@dataclass
class Solution:
    u: np.ndarray  # full-size velocity DOF vector (boundary DOFs zero)
    p: np.ndarray
    multiplier: float
    residual_norm: float
    method: str = "full"
    refinement_steps: int = 0


def _full_matrix(system: SaddleSystem):
    free = system.free
    A = system.A[free][:, free]
    B = system.B[:, free]
    c = sp.csr_matrix(system.c[:, None])
    return sp.bmat([[A, B.T, None], [B, None, c], [None, c.T, None]], format="csr"), free


def nested_dissection(graph: sp.csr_matrix, coords: np.ndarray, last=(), leaf: int = ND_LEAF) -> np.ndarray:
    """Fill-reducing ordering by recursive median bisection of coordinates.

    Each split puts the nodes of the lower half that touch the upper half
    into a separator ordered after both halves.  ``last`` nodes (e.g. a
    dense multiplier row) are appended at the very end.
    """
    graph = graph.tocsr()
    mask = np.ones(graph.shape[0], dtype=bool)
    mask[list(last)] = False
    parts: list[np.ndarray] = []

    def split(idx):
        if len(idx) <= leaf:
            parts.append(idx)
            return
        c = coords[idx]
        ax = int(np.argmax(np.ptp(c, axis=0)))
        lower = c[:, ax] < np.median(c[:, ax])
        if lower.all() or not lower.any():
            parts.append(idx)
            return
        lo, hi = idx[lower], idx[~lower]
        touching = np.diff(graph[lo][:, hi].indptr) > 0
        split(lo[~touching])
        split(hi)
        parts.append(lo[touching])

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10000))
    try:
        split(np.nonzero(mask)[0])
    finally:
        sys.setrecursionlimit(limit)
    return np.concatenate(parts + [np.asarray(list(last), dtype=np.int64)])


class _Condensed:
    """Shifted system with interior unknowns eliminated cell by cell."""

    def __init__(self, system: SaddleSystem, K: sp.csr_matrix, free: np.ndarray, shift: float):
        dm = system.dofmap
        n, nf = dm.n_cells, len(free)
        pos = np.full(dm.n_velocity, -1)
        pos[free] = np.arange(nf)
        interior_vel = pos[2 * (dm.n_vertices + dm.n_edges) + np.arange(8 * n)].reshape(n, 8)
        if np.any(interior_vel < 0):
            raise SolverError("interior velocity DOF marked as boundary")
        weights = system.pressure_scale
        Mp = sp.kron(sp.diags(weights), pressure_mass_matrix())
        shifted = (K - sp.block_diag([sp.csr_matrix((nf, nf)), shift * Mp, sp.identity(1) * shift])).tocsr()
        # pressure change of basis per cell: mean-free modes Z, then the constant
        T = np.hstack([mean_zero_pressure_basis(), np.ones((9, 1))])
        self.Tg = sp.block_diag([sp.identity(nf), sp.kron(sp.identity(n), T), sp.identity(1)], format="csr")
        Kt = (self.Tg.T @ shifted @ self.Tg).tocsr()
        del shifted
        pres = nf + 9 * np.arange(n)[:, None] + np.arange(9)
        y = np.hstack([interior_vel, pres[:, :8]]).ravel()
        ymask = np.zeros(K.shape[0], dtype=bool)
        ymask[y] = True
        z = np.nonzero(~ymask)[0]
        Ky = Kt[y]
        Kyy = Ky[:, y].tocoo()
        if np.any(Kyy.row // 16 != Kyy.col // 16):
            raise SolverError("interior block is not cell-local")
        blocks = np.zeros((n, 16, 16))
        np.add.at(blocks, (Kyy.row // 16, Kyy.row % 16, Kyy.col % 16), Kyy.data)
        del Kyy
        cond = np.linalg.cond(blocks)
        if not np.all(np.isfinite(cond)) or cond.max() > LOCAL_COND_LIMIT:
            raise SolverError("singular local interior block")
        inv = np.linalg.inv(blocks)
        del blocks
        Kyy_inv = sp.bsr_matrix((inv, np.arange(n), np.arange(n + 1)), shape=(16 * n, 16 * n)).tocsr()
        del inv
        Kyz = Ky[:, z].tocsr()
        del Ky
        Kz = Kt[z]
        del Kt
        Kzy = Kz[:, y].tocsr()
        S = (Kz[:, z] - Kzy @ (Kyy_inv @ Kyz)).tocsr()
        del Kz
        # coordinates of the interface unknowns for the ordering
        zvel = z[z < nf]
        coords = np.vstack([system.velocity_xy[free[zvel]], system.cell_xy, [[0.0, 0.0]]])
        perm = nested_dissection(abs(S) + abs(S.T), coords, last=[len(z) - 1])
        S = S[perm][:, perm].tocsc()
        try:
            self.lu = spla.splu(S, permc_spec="NATURAL", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SolverError(f"interface factorization failed: {exc}") from exc
        self.size = S.shape[0]
        del S
        self.perm = perm
        self.y, self.z = y, z
        self.Kyy_inv, self.Kyz, self.Kzy = Kyy_inv, Kyz, Kzy

    def solve(self, g: np.ndarray) -> np.ndarray:
        gt = self.Tg.T @ g
        gy, gz = gt[self.y], gt[self.z]
        rz = gz - self.Kzy @ (self.Kyy_inv @ gy)
        zz = np.empty_like(rz)
        zz[self.perm] = self.lu.solve(rz[self.perm])
        yy = self.Kyy_inv @ (gy - self.Kyz @ zz)
        xt = np.empty_like(gt)
        xt[self.y], xt[self.z] = yy, zz
        return self.Tg @ xt


class Factorization:
    """A factored saddle-point system that can be solved for many loads."""

    def __init__(self, system: SaddleSystem, method: str = "auto", shift: float = SHIFT):
        if method not in ("auto", "full", "condensed"):
            raise ConfigurationError(f"unknown solver method {method!r}")
        self.system = system
        self.K, self.free = _full_matrix(system)
        self._solve = None
        if method in ("auto", "condensed"):
            try:
                self._solve = _Condensed(system, self.K, self.free, shift / system.nu).solve
                self.method = "condensed"
            except SolverError as exc:
                if method == "condensed":
                    raise
                log.info("condensation unavailable (%s); factoring the full system", exc)
        if self._solve is None:
            try:
                lu = spla.splu(self.K.tocsc(), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SolverError(f"singular saddle-point matrix: {exc}") from exc
            self._solve = lu.solve
            self.method = "full"

    def _rhs(self, rhs):
        dm = self.system.dofmap
        f = np.zeros(dm.n_velocity) if rhs is None else np.asarray(rhs, dtype=float)
        if f.shape != (dm.n_velocity,):
            raise ConfigurationError("load vector has the wrong size")
        return np.concatenate([f[self.free], np.zeros(dm.n_pressure + 1)])

    def solve(self, rhs=None) -> Solution:
        g = self._rhs(self.system.rhs if rhs is None else rhs)
        gnorm = np.linalg.norm(g)
        x = np.zeros_like(g)
        r = g.copy()
        rnorm = gnorm
        steps = 0
        # refine until the residual reaches roundoff level or stops shrinking
        while steps < MAX_REFINE and rnorm > 1e-15 * gnorm:
            dx = self._solve(r)
            if not np.all(np.isfinite(dx)):
                raise SolverError("non-finite solution")
            x_new = x + dx
            r_new = g - self.K @ x_new
            new_norm = np.linalg.norm(r_new)
            steps += 1
            if new_norm > 0.5 * rnorm and steps > 1:
                if new_norm < rnorm:
                    x, r, rnorm = x_new, r_new, new_norm
                break
            x, r, rnorm = x_new, r_new, new_norm
        res = float(np.linalg.norm(r) / gnorm) if gnorm > 0 else float(np.linalg.norm(r))
        if res > RESIDUAL_TOL:
            raise SolverError(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
        dm = self.system.dofmap
        nf = len(self.free)
        u = np.zeros(dm.n_velocity)
        u[self.free] = x[:nf]
        return Solution(u, -x[nf : nf + dm.n_pressure], float(x[-1]), res, self.method, steps)


def solve_saddle(system: SaddleSystem, rhs=None, method: str = "auto") -> Solution:
    """Solve for (u, p, multiplier) with a relative residual certificate."""
    return Factorization(system, method).solve(rhs)
