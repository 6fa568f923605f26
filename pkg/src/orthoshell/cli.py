"""Command line entry point: ``orthoshell {bench,run,mesh} ...``.

Exit status is 0 on success, 1 when the solver fails to converge and 2 for
invalid input (bad arguments, configuration or mesh files).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .errors import ConfigError, ConvergenceError, ShellError

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INPUT = 2


def _resolution(text):
    try:
        m, n = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MxN, got {text!r}") from None
    if m < 2 or n < 2:
        raise argparse.ArgumentTypeError(f"resolution {text!r} too small")
    return m, n


def _parser():
    p = argparse.ArgumentParser(prog="orthoshell", description="Orthotropic subdivision thin-shell solver")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run a reference study")
    bsub = bench.add_subparsers(dest="study", required=True)

    h = bsub.add_parser("hemisphere", help="pinched hemisphere")
    h.add_argument("--lambda", dest="lam", type=float, default=1.0, help="degree of orthotropy E_m/E_c")
    h.add_argument("--resolution", type=_resolution, default=(16, 64), help="meridian x circumference cells")
    h.add_argument("--out", type=Path, required=True, help="CSV file for the load-displacement records")
    h.add_argument("--steps", type=int, default=20)
    h.add_argument("--max-load", type=float, default=100.0)
    h.add_argument("--load-convention", choices=("quarter", "full"), default="quarter")
    h.add_argument("--constitutive", choices=("coefficient", "voigt", "isotropic"), default=None)
    h.add_argument("--vtk", action="store_true", help="also write the final state as VTK")

    w = bsub.add_parser("wrinkle", help="sheared sheet wrinkling")
    w.add_argument("--material", choices=("iso", "ortho"), default="iso")
    w.add_argument("--resolution", type=_resolution, default=(56, 28), help="long x short axis cells")
    w.add_argument("--out-prefix", type=Path, required=True)
    w.add_argument("--increment", type=float, default=0.1, help="shear continuation increment (mm)")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--constitutive", choices=("coefficient", "voigt", "isotropic"), default=None)
    w.add_argument("--vtk", action="store_true")

    r = sub.add_parser("run", help="run a configuration file")
    r.add_argument("config", type=Path)
    r.add_argument("--csv", type=Path, default=None, help="override the configured CSV path")
    r.add_argument("--vtk", action="store_true", help="write a VTK snapshot of the final state")
    r.add_argument("--vtk-prefix", default=None)

    m = sub.add_parser("mesh", help="mesh utilities")
    msub = m.add_subparsers(dest="action", required=True)
    st = msub.add_parser("stats", help="print mesh statistics")
    st.add_argument("path", type=Path)
    st.add_argument("--format", choices=("off", "obj"), default=None)
    st.add_argument("--refine", type=int, default=0)
    return p


def _bench_hemisphere(args):
    from .bench import HemisphereCase, export_fields, run_hemisphere
    from .material import DEFAULT_CONSTITUTIVE

    case = HemisphereCase(
        lam=args.lam,
        resolution=args.resolution,
        max_load=args.max_load,
        load_convention=args.load_convention,
        steps=args.steps,
        constitutive=args.constitutive or DEFAULT_CONSTITUTIVE,
    )
    res = run_hemisphere(case, csv_path=args.out)
    a, b = res.final()
    print(f"lambda={case.lam} load={case.max_load} u_A={a:.4f} u_B={b:.4f} -> {args.out}")
    if args.vtk:
        path = export_fields(res.model, res.states[-1].u, args.out.with_suffix(".vtk"))
        print(f"vtk -> {path}")


def _bench_wrinkle(args):
    from .bench import WrinkleCase, export_fields, run_wrinkle
    from .material import DEFAULT_CONSTITUTIVE
    from .output import write_csv

    case = WrinkleCase(
        material=args.material,
        resolution=args.resolution,
        shear_increment=args.increment,
        seed=args.seed,
        constitutive=args.constitutive or DEFAULT_CONSTITUTIVE,
    )
    res = run_wrinkle(case)
    prefix = args.out_prefix
    prefix.parent.mkdir(parents=True, exist_ok=True)
    steps_csv = write_csv(f"{prefix}_steps.csv", res.records, ["shear", "max_uz"])
    metrics_csv = Path(f"{prefix}_metrics.csv")
    with metrics_csv.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["material", "resolution", "critical_shear", "wrinkles", "amplitude"])
        m = res.metrics
        wr.writerow([case.material, "x".join(map(str, case.resolution)), m.critical_shear, m.wrinkles, repr(m.amplitude)])
    uc = res.metrics.critical_shear
    uc_text = uc if isinstance(uc, str) else f"{uc:.3f}"
    res_text = "x".join(map(str, case.resolution))
    m = res.metrics
    print(f"{case.material} {res_text}: u_c={uc_text} wrinkles={m.wrinkles} amplitude={m.amplitude:.3f}")
    print(f"records -> {steps_csv}, metrics -> {metrics_csv}")
    if args.vtk:
        print(f"vtk -> {export_fields(res.model, res.final.u, f'{prefix}_final.vtk')}")


def _run(args):
    from .config import parse_config, run_config

    cfg = parse_config(args.config)
    res = run_config(cfg, csv_path=args.csv, vtk_prefix=args.vtk_prefix, vtk=True if args.vtk else None)
    last = res.states[-1]
    print(f"{len(res.states) - 1} steps converged; final energy {last.energy:.6g}")


def _mesh_stats(args):
    from .mesh import load_mesh, subdivide_quadrisect

    mesh = load_mesh(args.path, args.format)
    for _ in range(args.refine):
        mesh = subdivide_quadrisect(mesh)
    print(mesh.summary())


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            (_bench_hemisphere if args.study == "hemisphere" else _bench_wrinkle)(args)
        elif args.command == "run":
            _run(args)
        else:
            _mesh_stats(args)
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ShellError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
