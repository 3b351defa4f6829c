"""Command line entry point: analyze, bench-length, synth, inspect."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import synth
from .medial import read_paths, write_paths
from .pipeline import AnalysisConfig, analyze, emit_distributions, partition_pores, result_to_json, write_table
from .throats import select_throat
from .voxgrid import InputError, SegmentedImage, load_image, save_image

EXIT_OK, EXIT_INPUT, EXIT_NO_THROAT = 0, 1, 2


def _config(args) -> AnalysisConfig:
    kw = dict(
        polar_max=args.polar_max,
        polar_step=args.polar_step,
        azimuth_steps=args.azimuth_steps,
        azimuth_step=args.azimuth_step,
        theta_count=args.theta_count,
        k_stride=args.k_stride,
        cascade=args.cascade,
        algorithm_mask=frozenset(int(a) for a in args.algorithms.split(",")),
    )
    if args.workers is not None:
        kw["worker_count"] = args.workers
    return AnalysisConfig(**kw)


def _add_search_opts(p):
    p.add_argument("--polar-max", type=int, default=45, help="largest plane tilt from the tangent (degrees)")
    p.add_argument("--polar-step", type=int, default=1, help="tilt increment (degrees)")
    p.add_argument("--azimuth-steps", type=int, default=45)
    p.add_argument("--azimuth-step", type=float, default=None, help="azimuth increment in degrees; overrides --azimuth-steps")
    p.add_argument("--theta-count", type=int, default=360, help="in-plane rays per plane")
    p.add_argument("--k-stride", type=int, default=1, help="analyse every n-th path voxel")
    p.add_argument("--algorithms", default="1,2,3,4,5")
    p.add_argument("--cascade", choices=("first", "all"), default="first")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: THROATFIND_WORKERS or 1)")


def cmd_analyze(args) -> int:
    img = load_image(args.image)
    paths = read_paths(args.ma)
    result = analyze(img, paths, _config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    network = partition_pores(img, result.throats) if result.throats else None
    (out / "throats.json").write_text(result_to_json(result, network))
    if network is not None:
        tables = emit_distributions(network, args.bins)
    else:
        tables = {k: None for k in ("areas", "volumes", "coordination")}
    for key, table in tables.items():
        if table is None:
            (out / f"{key}.csv").write_text("bin_center,density\n")
        else:
            write_table(table, out / f"{key}.csv")
    if args.report and network is not None:
        from .report import plot_distributions

        plot_distributions(tables, out)
    print(f"throats={len(result.throats)} unresolved={len(result.unresolved)} detection_ratio={result.detection_ratio:.4f}")
    return EXIT_OK if result.throats else EXIT_NO_THROAT


def cmd_bench(args) -> int:
    cases = None
    if args.kind == "circle" and args.radii:
        cases = [float(r) for r in args.radii.split(",")]
    rows = synth.bench_length_errors(args.kind, cases, args.scale)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["case", "true_length", "pointset_length", "midpoint_length", "pointset_error", "midpoint_error"])
        for c in rows:
            w.writerow([c.case, repr(c.true_length), repr(c.pointset_length), repr(c.midpoint_length), repr(c.pointset_error), repr(c.midpoint_error)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.report:
        from .report import plot_length_errors

        plot_length_errors(rows, args.kind, args.report)
    return EXIT_OK


def _synth_volume(args):
    k = args.kind
    if k == "tube":
        return synth.gen_tube(args.radius, tuple(args.direction), args.half_path)
    if k == "hourglass":
        return synth.gen_hourglass(args.r_max, args.r_min)
    if k == "annulus":
        return synth.gen_annulus(args.radius, args.pillar, args.offset)
    if k == "crossed-cylinders":
        return synth.gen_crossed_cylinders(args.r1, args.r2, args.angle, args.offset)
    if k == "sphere-pack":
        return synth.gen_sphere_pack(args.n_side, args.layers, args.radius, args.spacing)
    raise AssertionError(k)


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.kind in ("line", "circle"):
        mask = synth.gen_digitized_line(args.angle, args.scale).mask() if args.kind == "line" else synth.gen_digitized_circle(args.radius).mask
        save_image(SegmentedImage.from_void_mask(~mask[:, :, None]), out)
        print(f"wrote {out}")
        return EXIT_OK
    vol = _synth_volume(args)
    save_image(vol.image, out)
    ma = out.with_suffix(".ma")
    write_paths(vol.paths, ma)
    print(f"wrote {out} and {ma} ({len(vol.paths)} paths)")
    return EXIT_OK


def cmd_inspect(args) -> int:
    img = load_image(args.image)
    paths = {p.id: p for p in read_paths(args.ma)}
    if args.path_id not in paths:
        raise InputError(f"{args.ma}: no path with id {args.path_id}")
    path = paths[args.path_id]
    path.check_void(img)
    rec = select_throat(img, path, _config(args))
    if rec is None:
        print(f"path {args.path_id}: no throat found")
        return EXIT_NO_THROAT
    w = csv.writer(sys.stdout)
    w.writerow(["# path", rec.path_id, "k", rec.k, "area", repr(rec.area), "length", repr(rec.length), "type", rec.throat_type])
    w.writerow(["kind", "x", "y", "z", "tag"])
    for v in rec.perimeter.loop26:
        w.writerow(["perimeter26", *v, ""])
    if rec.perimeter.points3d is not None:
        tags = rec.perimeter.method == "pointset"
        for i, p in enumerate(np.asarray(rec.perimeter.points3d)):
            w.writerow(["point", *(repr(float(c)) for c in p), "" if not tags else "pointset"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="throatfind", description="Find throats in segmented 3D images.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="throats, pores and distributions for an image and its medial axis")
    p.add_argument("--image", required=True)
    p.add_argument("--ma", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", default="fd", help="numpy binning rule or bin count")
    p.add_argument("--report", action="store_true", help="also write PNG figures")
    _add_search_opts(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench-length", help="perimeter-length error tables for digitised lines or circles")
    p.add_argument("--kind", choices=("line", "circle"), required=True)
    p.add_argument("--scale", type=float, default=5000)
    p.add_argument("--radii", default=None, help="comma separated radii for --kind circle")
    p.add_argument("--out", default=None, help="CSV file (default: stdout)")
    p.add_argument("--report", default=None, help="PNG file for the error curves")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a fixture image and its medial-axis paths")
    p.add_argument("kind", choices=("tube", "hourglass", "annulus", "crossed-cylinders", "sphere-pack", "line", "circle"))
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--direction", type=float, nargs=3, default=(0.0, 0.0, 1.0))
    p.add_argument("--half-path", type=float, default=10.0)
    p.add_argument("--r-max", type=float, default=12.0)
    p.add_argument("--r-min", type=float, default=6.0)
    p.add_argument("--pillar", type=int, default=3)
    p.add_argument("--offset", type=float, default=None)
    p.add_argument("--r1", type=float, default=10.0)
    p.add_argument("--r2", type=float, default=10.0)
    p.add_argument("--angle", type=float, default=90.0)
    p.add_argument("--n-side", type=int, default=3)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--spacing", type=float, default=None)
    p.add_argument("--scale", type=float, default=5000)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="dump one path's throat perimeter and point set")
    p.add_argument("--image", required=True)
    p.add_argument("--ma", required=True)
    p.add_argument("--path-id", type=int, required=True)
    _add_search_opts(p)
    p.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "kind", None) in ("annulus", "crossed-cylinders") and args.offset is None:
        args.offset = 6 if args.kind == "annulus" else 0.0
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


run_cli = main

if __name__ == "__main__":
    sys.exit(main())
