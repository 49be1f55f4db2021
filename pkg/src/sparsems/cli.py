"""Command line workbench: offline / online / table / dump-fields."""

from __future__ import annotations

import argparse
import sys

from .config import default_config, load_config
from .runner import emit_table, load_report, run_offline, run_online


def _add_common(sub):
    sub.add_argument("--config", help="config file (defaults to the "
                     "experiment's canonical setup)")
    sub.add_argument("--experiment", default="A1",
                     help="experiment id when no config file is given")
    sub.add_argument("--seed", type=int, help="override the master seed")
    sub.add_argument("--out", default="runs/out", help="output directory")
    sub.add_argument("--override", action="append", default=[],
                     metavar="KEY=VALUE", help="config override (repeatable)")


def _load(args):
    cfg = load_config(args.config) if args.config \
        else default_config(args.experiment)
    if args.override:
        cfg = cfg.with_overrides(args.override)
    if args.seed is not None:
        cfg = cfg.with_overrides([f"seed={args.seed}"])
    return cfg


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sparsems",
        description="sparse multiscale FEM workbench: randomized snapshots, "
                    "l1 basis selection, interior-penalty DG coupling")
    subs = parser.add_subparsers(dest="command", required=True)

    p_off = subs.add_parser("offline", help="build and persist snapshot bundles")
    _add_common(p_off)

    p_on = subs.add_parser("online", help="run the online sweep from bundles")
    _add_common(p_on)
    p_on.add_argument("--bundles", help="bundle directory "
                      "(default: <out>/bundles)")
    p_on.add_argument("--no-figures", action="store_true",
                      help="skip figure rendering")

    p_tab = subs.add_parser("table", help="print the CSV table of a run")
    p_tab.add_argument("--report", required=True,
                       help="report.txt written by the online stage")

    p_dump = subs.add_parser("dump-fields",
                             help="write the configured coefficient fields")
    _add_common(p_dump)

    args = parser.parse_args(argv)

    if args.command == "offline":
        cfg = _load(args)
        bundle_dir = run_offline(cfg, args.out)
        print(f"wrote bundles to {bundle_dir}")
        return 0

    if args.command == "online":
        cfg = _load(args)
        report = run_online(cfg, args.out, bundle_dir=args.bundles,
                            figures=not args.no_figures)
        sys.stdout.write(emit_table(report))
        print(f"outputs in {args.out}")
        return 0

    if args.command == "table":
        report = load_report(args.report)
        sys.stdout.write(emit_table(report))
        return 0

    if args.command == "dump-fields":
        cfg = _load(args)
        _dump_fields(cfg, args.out)
        print(f"field dumps in {args.out}")
        return 0

    return 1


def _dump_fields(cfg, out_dir):
    import os

    from .fields import write_matrix_text
    from .figures import render_field_figure
    from .runner import diffusion_field, make_mesh, refraction_raster

    os.makedirs(out_dir, exist_ok=True)
    mesh = make_mesh(cfg)
    if cfg.is_helmholtz:
        grids = {"refraction": refraction_raster(cfg, mesh).values}
    else:
        field = diffusion_field(cfg, mesh)
        grids = {"kappa_online": field.sample(mesh, cfg.online_mu).values}
        if field.variant == "affine":
            grids["kappa1"] = field.rasters[0].values
            grids["kappa2"] = field.rasters[1].values
        elif field.variant == "shifted":
            grids["kappa1"] = field.rasters[0].values
    for name, grid in grids.items():
        write_matrix_text(os.path.join(out_dir, name + ".txt"), grid)
        render_field_figure(grid, os.path.join(out_dir, name + ".png"), name)


if __name__ == "__main__":
    raise SystemExit(main())
