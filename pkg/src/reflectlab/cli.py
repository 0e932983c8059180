"""Command line entry point: ``reflectlab run|verify-isometries|probe-catenoid|export``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .errors import CatalogError, ConfigError, ReflectLabError
from .grid import read_grid
from .isometries import catalog_reflections, reflection_for, verify_isometry
from .metrics import CATALOG, make_manifold
from .pipeline import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VERIFY,
    chart_from_recipe,
    dump_report,
    export_mesh,
    parallel_map,
    run_pipeline,
)
from .probes import DEFAULT_TAUS, catenoid_blowup_probe


def _fail(message, field=None):
    where = f" [{field}]" if field else ""
    print(f"error{where}: {message}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_run(args):
    config = load_config(args.config)
    code, report = run_pipeline(config)
    failed = [k for k, ok in sorted(report.get("checks", {}).items()) if not ok]
    print(f"status: {report['status']} (exit {code})")
    for name in failed:
        print(f"  failed check: {name}")
    return code


def cmd_verify_isometries(args):
    try:
        chart = make_manifold(args.manifold)
    except CatalogError as exc:
        return _fail(str(exc), "manifold")
    specs = catalog_reflections(chart)

    def check(spec):
        label = f"{spec.kind}@{','.join(f'{x:g}' for x in spec.point)}"
        iso = reflection_for(chart, spec)
        return label, verify_isometry(chart, iso, args.samples, args.tol, args.seed)

    results = parallel_map(check, specs)
    ok = True
    out = {}
    for label, rep in results:
        ok &= rep.passed
        out[label] = rep.to_dict()
        flag = "PASS" if rep.passed else "FAIL"
        print(f"{flag} {chart.name} {label}: pullback {rep.pullback_defect:.2e} involution {rep.involution_defect:.2e}")
    if args.json:
        sys.stdout.write(dump_report(out))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_probe_catenoid(args):
    if args.grid < 8:
        return _fail("--grid must be at least 8", "grid")
    report, _ = catenoid_blowup_probe(args.grid, DEFAULT_TAUS, seed=args.seed)
    sys.stdout.write(dump_report(report.to_dict()))
    return EXIT_OK if report.diverged else EXIT_VERIFY


def cmd_export(args):
    w = read_grid(args.input)
    try:
        with open(args.chart, encoding="utf-8") as fh:
            recipe = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read chart {args.chart}: {exc.strerror}", field="chart") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed chart file: {exc}", field="chart") from None
    chart = chart_from_recipe(recipe)
    verts, faces = export_mesh(w, chart, args.out)
    print(f"wrote {len(verts)} vertices and {len(faces)} triangles to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="reflectlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configured pipeline")
    p.add_argument("config", help="path to a TOML config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-isometries", help="check the catalog reflections of a manifold")
    p.add_argument("manifold", choices=CATALOG)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="also print the reports as JSON")
    p.set_defaults(func=cmd_verify_isometries)

    p = sub.add_parser("probe-catenoid", help="Holder probe on the catenoid end graph")
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_probe_catenoid)

    p = sub.add_parser("export", help="write a grid file as an OBJ mesh through a chart")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--chart", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, getattr(exc, "field", None))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ReflectLabError as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
