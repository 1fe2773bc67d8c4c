"""Command line interface: convergence studies, inf-sup estimates, meshes.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import (
    DEFAULT_LEVELS,
    DEFAULT_NU,
    ErrorRecord,
    StudyConfig,
    fill_eocs,
    inf_sup_for_level,
    markdown_table,
    run_convergence_study,
    write_report,
)
from .errors import ConfigurationError, DomainError, IsoSVError
from .geometry import DiskChart, generate_disk_mesh, write_mesh

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _levels(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isosv", description="Divergence-free isoparametric Stokes solver on the unit disk")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="manufactured-solution convergence study")
    st.add_argument("--variant", choices=["iso", "affine", "composition"], default="iso")
    st.add_argument("--source", choices=["interp", "robust"], default="interp")
    st.add_argument("--nu", type=float, default=DEFAULT_NU)
    st.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS, help="comma separated boundary resolutions")
    st.add_argument("--quad", type=int, default=8, help="quadrature degree for loads and errors")
    st.add_argument("--perturb", type=float, default=0.0, help="amplitude of the gradient perturbation of f")
    st.add_argument("--out", default="results")
    st.add_argument("--jobs", type=int, default=1, help="solve levels concurrently in this many processes")

    inf = sub.add_parser("infsup", help="dense inf-sup estimate on coarse meshes")
    inf.add_argument("--levels", type=_levels, default=(16, 24, 32))
    inf.add_argument("--variant", choices=["iso", "affine", "composition"], default="iso")

    me = sub.add_parser("mesh", help="write a disk mesh")
    me.add_argument("--n-boundary", type=int, required=True)
    me.add_argument("--out", required=True)
    return ap


def _one_level(args):
    config, n_b = args
    single = StudyConfig(config.variant, config.source_mode, config.nu, (n_b,), config.quadrature_degree,
                         config.perturbation_gradient)
    return run_convergence_study(single)[0]


def _study(ns) -> int:
    config = StudyConfig(ns.variant, ns.source, ns.nu, ns.levels, ns.quad, ns.perturb)

    def show(r: ErrorRecord):
        if r.failed:
            print(f"level {r.level}: failed ({r.failed})", flush=True)
        else:
            print(f"level {r.level}: h={r.h:.4g} L2={r.err_u_l2:.4e} H1={r.err_u_h1:.4e} "
                  f"p={r.err_p_l2:.4e} div={r.div_l2:.2e} ({r.seconds:.1f}s)", flush=True)

    if ns.jobs > 1:
        with ProcessPoolExecutor(ns.jobs) as pool:
            records = list(pool.map(_one_level, [(config, n) for n in config.mesh_levels]))
        for r in records:
            show(r)
        fill_eocs(records)
    else:
        records = run_convergence_study(config, progress=show)
    stem = f"{config.variant.value}_{config.source_mode.value}"
    for p in write_report(records, ns.out, stem):
        print(f"wrote {p}")
    print(markdown_table(records), end="")
    return EXIT_NUMERICAL if any(r.failed for r in records) else EXIT_OK


def _infsup(ns) -> int:
    print("n_boundary,h,gamma")
    for n_b in ns.levels:
        h, g = inf_sup_for_level(n_b, ns.variant)
        print(f"{n_b},{h:.6g},{g:.6g}", flush=True)
    return EXIT_OK


def _mesh(ns) -> int:
    mesh = generate_disk_mesh(ns.n_boundary, DiskChart())
    write_mesh(mesh, ns.out)
    print(f"{mesh.n_vertices} vertices, {mesh.n_cells} cells, h={mesh.h:.6g} -> {ns.out}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"study": _study, "infsup": _infsup, "mesh": _mesh}[ns.command](ns)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IsoSVError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
