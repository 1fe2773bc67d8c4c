"""Manufactured-solution studies, error norms, EOCs and the inf-sup estimate."""

from __future__ import annotations

import csv
import enum
import gc
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .assembly import NodalInterpolatedSource, assemble_load, assemble_stokes
from .errors import ConfigurationError, IsoSVError
from .geometry import AffineMesh, CellMaps, DiskChart, generate_disk_mesh, geometry_at
from .quadrature import quadrature_rule
from .reference import eval_pressure_basis
from .robust import WSpace, pi_w
from .solver import Factorization
from .spaces import DofMap, VariantTag, build_dof_map, cell_maps_for, evaluate_pressure, evaluate_velocity

log = logging.getLogger(__name__)

DEFAULT_NU = 0.1
DEFAULT_LEVELS = (40, 80, 160, 320, 640)
INF_SUP_MAX_VELOCITY = 4000
ERROR_CHUNK = 4096
CSV_COLUMNS = (
    "level", "h", "n_vel", "n_pres", "err_u_l2", "err_u_h1", "err_p_l2", "div_l2",
    "eoc_u_l2", "eoc_u_h1", "eoc_p_l2", "residual",
)


# --- manufactured solution ---------------------------------------------------------


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form Stokes solution on the unit disk with u = 0 on the circle."""

    nu: float = DEFAULT_NU

    def u(self, x):
        X, Y = x[..., 0], x[..., 1]
        r = X**2 + Y**2 - 1
        return np.stack([r * (8 * X**2 * Y + X**2 + 5 * Y**2 - 1), -4 * X * r * (3 * X**2 + Y**2 + Y - 1)], axis=-1)

    def grad_u(self, x):
        """g[..., i, j] = d u_i / d x_j."""
        X, Y = x[..., 0], x[..., 1]
        g = np.empty(np.shape(x) + (2,))
        g[..., 0, 0] = 4 * X * (8 * X**2 * Y + X**2 + 4 * Y**3 + 3 * Y**2 - 4 * Y - 1)
        g[..., 0, 1] = 8 * X**4 + 24 * X**2 * Y**2 + 12 * X**2 * Y - 8 * X**2 + 20 * Y**3 - 12 * Y
        g[..., 1, 0] = -60 * X**4 - 48 * X**2 * Y**2 - 12 * X**2 * Y + 48 * X**2 - 4 * Y**4 - 4 * Y**3 + 8 * Y**2 + 4 * Y - 4
        g[..., 1, 1] = -32 * X**3 * Y - 4 * X**3 - 16 * X * Y**3 - 12 * X * Y**2 + 16 * X * Y + 4 * X
        return g

    def p(self, x):
        return 10.0 * (x[..., 0] ** 2 + x[..., 1] ** 2 - 0.5)

    def minus_laplace_u(self, x):
        X, Y = x[..., 0], x[..., 1]
        return np.stack([
            -144 * X**2 * Y - 24 * X**2 - 16 * Y**3 - 72 * Y**2 + 16 * Y + 16,
            272 * X**3 + 144 * X * Y**2 + 48 * X * Y - 112 * X,
        ], axis=-1)

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return self.nu * self.minus_laplace_u(x) + 20.0 * x

    def rot_f(self, x):
        X, Y = x[..., 0], x[..., 1]
        return 64.0 * self.nu * (15 * X**2 + 3 * Y**2 + 3 * Y - 2)


def exact_solution(x, nu: float = DEFAULT_NU):
    """(u, p, f, grad_u) of the manufactured solution at physical points x (..., 2)."""
    m = ManufacturedSolution(nu)
    x = np.asarray(x, dtype=float)
    return m.u(x), m.p(x), m.f(x), m.grad_u(x)


def phi(x):
    """Scalar potential of the gradient perturbation."""
    return x[..., 0] ** 3 * x[..., 1]


def grad_phi(x):
    x = np.asarray(x, dtype=float)
    return np.stack([3 * x[..., 0] ** 2 * x[..., 1], x[..., 0] ** 3], axis=-1)


# --- errors -----------------------------------------------------------------------------


@dataclass
class ErrorRecord:
    level: int
    h: float
    n_vel: int = 0
    n_pres: int = 0
    err_u_l2: float = math.nan
    err_u_h1: float = math.nan
    err_p_l2: float = math.nan
    div_l2: float = math.nan
    grad_uh_l2: float = math.nan
    residual: float = math.nan
    eoc: dict = field(default_factory=dict)
    perturbation_change: float | None = None
    seconds: float = 0.0
    failed: str | None = None

    def csv_row(self) -> list[str]:
        def fmt(v):
            return "nan" if v is None or not np.isfinite(v) else f"{v:.17g}"

        vals = [self.err_u_l2, self.err_u_h1, self.err_p_l2, self.div_l2]
        eocs = [self.eoc.get(k) for k in ("err_u_l2", "err_u_h1", "err_p_l2")]
        return [str(self.level), fmt(self.h), str(self.n_vel), str(self.n_pres)] + [fmt(v) for v in vals + eocs] + [
            "failed" if self.failed else fmt(self.residual)
        ]


def compute_errors(u_dofs, p_dofs, mesh: AffineMesh, maps: CellMaps, dofs: DofMap, variant, exact: ManufacturedSolution,
                   quad_degree: int = 8, level: int = 0) -> ErrorRecord:
    """L2 and broken H1 velocity errors, L2 pressure error and the divergence
    norm over the computational domain, integrated cell chunk by cell chunk."""
    if quad_degree < 8:
        raise ConfigurationError("error quadrature needs degree >= 8")
    variant = VariantTag.parse(variant)
    rule = quadrature_rule(quad_degree)
    pts, w, sub = rule.all_points, rule.all_weights, rule.sub
    sums = np.zeros(5)
    for start in range(0, dofs.n_cells, ERROR_CHUNK):
        cells = np.arange(start, min(start + ERROR_CHUNK, dofs.n_cells))
        v = evaluate_velocity(u_dofs, dofs, maps, variant, pts, sub, cells=cells)
        ph = evaluate_pressure(p_dofs, dofs, pts, sub, cells=cells)
        wd = w * v.det
        x = v.x
        sums += [
            (wd * ((v.values - exact.u(x)) ** 2).sum(-1)).sum(),
            (wd * ((v.gradients - exact.grad_u(x)) ** 2).sum((-1, -2))).sum(),
            (wd * (ph - exact.p(x)) ** 2).sum(),
            (wd * v.divergence**2).sum(),
            (wd * (v.gradients**2).sum((-1, -2))).sum(),
        ]
    e = np.sqrt(sums)
    return ErrorRecord(level, mesh.h, dofs.n_velocity, dofs.n_pressure, *e)


def eoc(errors, hs) -> list[float | None]:
    """log(e_{k-1}/e_k) / log(h_{k-1}/h_k); None for the first level."""
    out: list[float | None] = [None]
    for k in range(1, len(errors)):
        e0, e1, h0, h1 = errors[k - 1], errors[k], hs[k - 1], hs[k]
        ok = all(np.isfinite(v) and v > 0 for v in (e0, e1)) and h0 != h1
        out.append(math.log(e0 / e1) / math.log(h0 / h1) if ok else None)
    return out


def fill_eocs(records: list[ErrorRecord]) -> None:
    hs = [r.h for r in records]
    for key in ("err_u_l2", "err_u_h1", "err_p_l2", "div_l2"):
        for r, v in zip(records, eoc([getattr(r, key) for r in records], hs)):
            if v is not None:
                r.eoc[key] = v


# --- studies -------------------------------------------------------------------------


class SourceMode(enum.Enum):
    NODAL_INTERP = "interp"
    PRESSURE_ROBUST = "robust"

    @classmethod
    def parse(cls, value) -> "SourceMode":
        if isinstance(value, cls):
            return value
        for v in cls:
            if value in (v.value, v.name):
                return v
        raise ConfigurationError(f"unknown source mode {value!r}")


@dataclass
class StudyConfig:
    variant: VariantTag = VariantTag.ISO_PIOLA
    source_mode: SourceMode = SourceMode.NODAL_INTERP
    nu: float = DEFAULT_NU
    mesh_levels: tuple = DEFAULT_LEVELS
    quadrature_degree: int = 8
    perturbation_gradient: float = 0.0

    def __post_init__(self):
        self.variant = VariantTag.parse(self.variant)
        self.source_mode = SourceMode.parse(self.source_mode)
        levels = tuple(int(n) for n in self.mesh_levels)
        if not levels:
            raise ConfigurationError("at least one mesh level is required")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigurationError("mesh levels must be strictly increasing")
        self.mesh_levels = levels
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ConfigurationError("viscosity must be positive")
        if self.quadrature_degree < 8:
            raise ConfigurationError("quadrature degree must be at least 8")
        if not np.isfinite(self.perturbation_gradient):
            raise ConfigurationError("perturbation amplitude must be finite")


def _load(mode: SourceMode, f, rot_f, mesh, maps, dofs, w_space, variant, quad):
    if mode is SourceMode.PRESSURE_ROBUST:
        source = pi_w(f, rot_f, mesh, maps, w_space.chart, space=w_space)
    else:
        source = NodalInterpolatedSource(f, maps)
    return assemble_load(mesh, maps, dofs, source, variant, quad)


def solve_level(n_boundary: int, variant, nu: float = DEFAULT_NU, modes=(SourceMode.NODAL_INTERP,),
                perturbation: float = 0.0, quad_degree: int = 8, chart: DiskChart | None = None) -> dict:
    """Solve one mesh level for several source modes with one factorization.

    Returns {mode: ErrorRecord}.  With a nonzero perturbation amplitude the
    problem is solved again with f + lambda grad(phi) and the relative change
    |grad(u_pert - u)| / |grad u| is stored on the record.
    """
    t0 = time.perf_counter()
    variant = VariantTag.parse(variant)
    chart = chart or DiskChart()
    exact = ManufacturedSolution(nu)
    mesh = generate_disk_mesh(n_boundary, chart)
    maps = cell_maps_for(mesh, chart, variant)
    dofs = build_dof_map(mesh)
    system = assemble_stokes(mesh, maps, dofs, nu, variant)
    fact = Factorization(system)
    modes = [SourceMode.parse(m) for m in modes]
    w_space = None
    if SourceMode.PRESSURE_ROBUST in modes:
        w_space = WSpace(mesh, maps, None if variant is VariantTag.AFFINE else chart)
    out = {}
    for mode in modes:
        rhs = _load(mode, exact.f, exact.rot_f, mesh, maps, dofs, w_space, variant, quad_degree)
        sol = fact.solve(rhs)
        rec = compute_errors(sol.u, sol.p, mesh, maps, dofs, variant, exact, quad_degree, level=n_boundary)
        rec.residual = sol.residual_norm
        if perturbation:
            drhs = _load(mode, lambda x: perturbation * grad_phi(x), None, mesh, maps, dofs, w_space, variant, quad_degree)
            pert = fact.solve(rhs + drhs)
            du = pert.u - sol.u
            # |grad v|^2 = v^T A v / nu
            rec.perturbation_change = float(np.sqrt(max(du @ (system.A @ du), 0.0) / max(sol.u @ (system.A @ sol.u), 1e-300)))
        rec.seconds = time.perf_counter() - t0
        out[mode] = rec
    del fact, system
    gc.collect()
    return out


def run_convergence_study(config: StudyConfig, progress=None) -> list[ErrorRecord]:
    """Solve every level of the configuration; failed levels are kept as
    rows marked failed and the study continues."""
    records = []
    for n_b in config.mesh_levels:
        try:
            rec = solve_level(n_b, config.variant, config.nu, (config.source_mode,),
                              config.perturbation_gradient, config.quadrature_degree)[config.source_mode]
        except ConfigurationError:
            raise
        except (IsoSVError, np.linalg.LinAlgError, MemoryError) as exc:
            log.error("level %d failed: %s", n_b, exc)
            rec = ErrorRecord(n_b, math.nan, failed=str(exc) or type(exc).__name__)
        records.append(rec)
        if progress:
            progress(rec)
    fill_eocs(records)
    return records


# --- reports ---------------------------------------------------------------------------


def write_csv(records: list[ErrorRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for r in records:
            wr.writerow(r.csv_row())


def markdown_table(records: list[ErrorRecord]) -> str:
    lines = ["| " + " | ".join(CSV_COLUMNS) + " |", "|" + "---|" * len(CSV_COLUMNS)]
    for r in records:
        lines.append("| " + " | ".join(r.csv_row()) + " |")
    return "\n".join(lines) + "\n"


def write_perturbation_csv(records: list[ErrorRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["level", "h", "rel_velocity_change"])
        for r in records:
            v = r.perturbation_change
            wr.writerow([r.level, f"{r.h:.17g}", "nan" if v is None else f"{v:.17g}"])


def write_report(records: list[ErrorRecord], out_dir, stem: str = "study") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.csv", out / f"{stem}.md"]
    write_csv(records, paths[0])
    paths[1].write_text(markdown_table(records))
    if any(r.perturbation_change is not None for r in records):
        paths.append(out / f"{stem}_perturbation.csv")
        write_perturbation_csv(records, paths[-1])
    return paths


# --- inf-sup ---------------------------------------------------------------------------


def pressure_mass_matrix(maps: CellMaps, dofs: DofMap, quad_degree: int = 6) -> np.ndarray:
    """Dense L2 Gram matrix of the pressure space on the mapped cells."""
    rule = quadrature_rule(quad_degree)
    q = eval_pressure_basis(rule.all_points, rule.sub)
    det = geometry_at(maps.control, rule.all_points, maps.hessian).det
    local = np.einsum("q,nq,qk,ql->nkl", rule.all_weights, det, q, q)
    M = np.zeros((dofs.n_pressure, dofs.n_pressure))
    for k in range(9):
        for m in range(9):
            M[dofs.cell_pressure_dofs[:, k], dofs.cell_pressure_dofs[:, m]] += local[:, k, m]
    return M


def estimate_inf_sup(mesh: AffineMesh, maps: CellMaps, dofs: DofMap, variant=VariantTag.ISO_PIOLA) -> float:
    """Discrete inf-sup constant by a dense generalized eigenproblem.

    gamma^2 is the smallest eigenvalue of Z^T B A^{-1} B^T Z y = mu Z^T M Z y
    where A is the H1-seminorm Gram matrix on free velocities, M the pressure
    L2 Gram matrix and Z an orthonormal basis of {q : c^T q = 0}.
    """
    if dofs.n_velocity > INF_SUP_MAX_VELOCITY:
        raise ConfigurationError(f"inf-sup estimate limited to {INF_SUP_MAX_VELOCITY} velocity DOFs")
    system = assemble_stokes(mesh, maps, dofs, 1.0, variant)
    free = system.free
    A = system.A[free][:, free].toarray()
    B = system.B[:, free].toarray()
    c = system.c / np.linalg.norm(system.c)
    Z = sla.null_space(c[None, :])
    BZ = B.T @ Z
    S = BZ.T @ sla.cho_solve(sla.cho_factor(A), BZ)
    Mz = Z.T @ pressure_mass_matrix(maps, dofs) @ Z
    mu = sla.eigh(S, Mz, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(np.sqrt(max(mu, 0.0)))


def inf_sup_for_level(n_boundary: int, variant=VariantTag.ISO_PIOLA, chart: DiskChart | None = None) -> tuple[float, float]:
    """(h, gamma_h) on the disk mesh with the given boundary resolution."""
    chart = chart or DiskChart()
    mesh = generate_disk_mesh(n_boundary, chart)
    maps = cell_maps_for(mesh, chart, variant)
    return mesh.h, estimate_inf_sup(mesh, maps, build_dof_map(mesh), variant)
