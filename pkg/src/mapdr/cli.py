"""Command-line surface.

Subcommands:
  simulate    generate synthetic trips on a map
  track       run the filter over one trip and print end estimates
  eval        batch-evaluate trips, write error records and edf curves
  sweep-init  repeat eval over several initialization radii
  make-map    write one of the stock synthetic maps

Exit codes: 0 ok, 1 runtime failure, 2 usage error (missing file, bad
config key, malformed input).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import evaluate, mapgen, pfilter, simtrip
from .geo import GeoPoint
from .params import ConfigError, FilterParams, load_config
from .roadgraph import OsmParseError, parse_osm


class UsageError(Exception):
    pass


def _load_graph(path: str):
    if not Path(path).exists():
        raise UsageError(f"map file not found: {path}")
    try:
        return parse_osm(path)
    except OsmParseError as exc:
        raise UsageError(f"cannot parse map {path}: {exc}") from exc


def _load_params(path: str | None) -> FilterParams:
    if path is None:
        return FilterParams()
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    try:
        return load_config(path)
    except ConfigError as exc:
        raise UsageError(f"bad config {path}: {exc}") from exc


def _read_speed_records(path: str) -> tuple[list[tuple[float, float]], GeoPoint | None]:
    """Read a trip CSV; returns (records, first truth position if present)."""
    if not Path(path).exists():
        raise UsageError(f"trip file not found: {path}")
    lines = Path(path).read_text().strip().splitlines()
    if len(lines) < 3:
        raise UsageError(f"trip file {path} has too few samples")
    header = lines[0].split(",")
    records = []
    first_pos = None
    for row in lines[1:]:
        parts = row.split(",")
        records.append((float(parts[0]), float(parts[1])))
        if first_pos is None and len(header) >= 4:
            first_pos = GeoPoint(float(parts[2]), float(parts[3]))
    return records, first_pos


def cmd_simulate(args) -> int:
    graph = _load_graph(args.map)
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.trips > 0:
        trips = simtrip.sample_trips(
            graph, args.trips, rng,
            min_km=args.min_km, max_km=args.max_km,
            scale_mean=args.scale_mean, scale_std=args.scale_std,
            quant_step=args.quant_kmh / 3.6,
        )
        for trip in trips:
            simtrip.write_trip(out, trip)
    return 0


def cmd_track(args) -> int:
    graph = _load_graph(args.map)
    params = _load_params(args.config)
    if args.seed is not None:
        import dataclasses

        params = dataclasses.replace(params, rng_seed=args.seed)
    records, first_pos = _read_speed_records(args.trip)
    if args.init_lat is not None and args.init_lon is not None:
        center = GeoPoint(args.init_lat, args.init_lon)
    elif first_pos is not None:
        center = first_pos
    else:
        raise UsageError("trip file has no positions; pass --init-lat/--init-lon")
    try:
        run = pfilter.run_filter(graph, records, params, center, args.init_radius)
    except pfilter.InitializationError as exc:
        raise UsageError(str(exc)) from exc
    if args.diag:
        with open(args.diag, "w") as fh:
            fh.write("k,population,ess,lost_mass\n")
            for d in run.diagnostics:
                fh.write(f"{d.k},{d.population},{d.ess:.6f},{d.lost_mass:.6f}\n")
    if run.diverged:
        print("diverged,,")
        return 0
    for est in ("MAP", "MMSE"):
        pos = pfilter.estimate(run, est)
        print(f"{est},{pos.lat:.7f},{pos.lon:.7f}")
    return 0


def _load_trips(graph, trips_dir: str):
    if not Path(trips_dir).is_dir():
        raise UsageError(f"trips directory not found: {trips_dir}")
    ids = simtrip.list_trip_ids(trips_dir)
    if not ids:
        raise UsageError(f"no trips found in {trips_dir}")
    return [simtrip.read_trip(trips_dir, tid, graph) for tid in ids]


def cmd_eval(args) -> int:
    graph = _load_graph(args.map)
    params = _load_params(args.config)
    trips = _load_trips(graph, args.trips)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = evaluate.evaluate_trips(
        graph, trips, params, runs=args.runs,
        init_radius=args.init_radius, base_seed=args.seed,
    )
    evaluate.write_records_csv(out / "records.csv", records)
    for est in evaluate.ESTIMATORS:
        errs = [r.error_m for r in records if r.estimator == est]
        rels = [r.rel_error for r in records if r.estimator == est]
        evaluate.write_edf_csv(out / f"edf_{est.lower()}.csv", errs)
        evaluate.write_edf_csv(out / f"edf_{est.lower()}_rel.csv", rels)
    return 0


def cmd_sweep_init(args) -> int:
    graph = _load_graph(args.map)
    params = _load_params(args.config)
    trips = _load_trips(graph, args.trips)
    try:
        radii = [float(r) for r in args.radii.split(",") if r]
    except ValueError as exc:
        raise UsageError(f"bad --radii list: {args.radii}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, by_radius = evaluate.sweep_init_radius(
        graph, trips, params, radii, runs=args.runs, base_seed=args.seed
    )
    evaluate.write_sweep_csv(out / "sweep.csv", rows)
    for radius, recs in by_radius.items():
        evaluate.write_records_csv(out / f"records_r{radius:.0f}.csv", recs)
    return 0


def cmd_make_map(args) -> int:
    if args.kind == "A":
        text = mapgen.build_map_a()
    elif args.kind == "B":
        text = mapgen.build_map_b()
    else:
        raise UsageError(f"unknown map kind: {args.kind}")
    Path(args.out).write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapdr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic trips")
    p.add_argument("--map", required=True)
    p.add_argument("--trips", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--min-km", type=float, default=3.0)
    p.add_argument("--max-km", type=float, default=10.0)
    p.add_argument("--scale-mean", type=float, default=simtrip.SCALE_MEAN)
    p.add_argument("--scale-std", type=float, default=simtrip.SCALE_STD)
    p.add_argument("--quant-kmh", type=float, default=1.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run the filter over one trip")
    p.add_argument("--map", required=True)
    p.add_argument("--trip", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--init-lat", type=float, default=None)
    p.add_argument("--init-lon", type=float, default=None)
    p.add_argument("--init-radius", type=float, default=50.0)
    p.add_argument("--diag", default=None, help="write per-step diagnostics CSV here")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="batch evaluation")
    p.add_argument("--map", required=True)
    p.add_argument("--trips", required=True, help="directory of simulated trips")
    p.add_argument("--config", default=None)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-radius", type=float, default=50.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-init", help="sweep the initialization radius")
    p.add_argument("--map", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--radii", required=True, help="comma-separated meters, ascending")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_init)

    p = sub.add_parser("make-map", help="write a stock synthetic map")
    p.add_argument("--kind", choices=["A", "B"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_map)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
