"""Batch evaluation: end-position errors, empirical distribution functions,
and the initial-uncertainty sweep.

A trial runs the filter over one trip's measured speeds from a circular
prior around the true start, then scores the MAP, MMSE and best-particle
(BP) end positions against the true end. A diverged run counts as an error
equal to the driving length. Trials are seeded per (trip, run) so sweeps
reproduce base results for shared seeds exactly.
"""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pfilter
from .geo import geodesic_distance
from .params import FilterParams
from .roadgraph import RoadGraph
from .simtrip import SimTrip

ESTIMATORS = ("MAP", "MMSE", "BP")


@dataclass(frozen=True)
class EvalRecord:
    trip_id: str
    run_id: int
    estimator: str
    error_m: float
    rel_error: float
    diverged: bool


class EdfCurve:
    """Empirical distribution function of a sample; F(x) = #{v <= x}/n."""

    def __init__(self, values):
        vals = np.sort(np.asarray(values, dtype=np.float64))
        if len(vals) == 0:
            raise ValueError("edf needs at least one value")
        self.values = vals

    def __call__(self, x: float) -> float:
        return float(np.searchsorted(self.values, x, side="right")) / len(self.values)

    def quantile(self, q: float) -> float:
        """Smallest sample value v with F(v) >= q, for q in (0, 1]."""
        if not (0.0 < q <= 1.0):
            raise ValueError("q must be in (0, 1]")
        n = len(self.values)
        idx = int(np.ceil(q * n)) - 1
        return float(self.values[idx])


def edf(values) -> EdfCurve:
    return EdfCurve(values)


def trial_seed(base_seed: int, trip_id: str, run_id: int) -> int:
    """Stable per-trial seed; depends only on (base seed, trip id, run id)."""
    h = zlib.crc32(trip_id.encode())
    return int(
        np.random.SeedSequence(entropy=base_seed, spawn_key=(h, run_id)).generate_state(1)[0]
    )


def run_trial(
    graph: RoadGraph,
    trip: SimTrip,
    params: FilterParams,
    seed: int,
    init_radius: float = 50.0,
    run_id: int = 0,
) -> list[EvalRecord]:
    """One filter run over a trip; returns the MAP/MMSE/BP error records."""
    trial_params = dataclasses.replace(params, rng_seed=seed)
    run = pfilter.run_filter(
        graph, trip.measured_records(), trial_params, trip.start_position, init_radius
    )
    truth = trip.end_position
    length = trip.length_L
    records = []
    for est in ESTIMATORS:
        if run.diverged:
            err = length
        else:
            if est == "BP":
                pos = pfilter.best_particle(run, truth)
            else:
                pos = pfilter.estimate(run, est)
            err = geodesic_distance(pos, truth)
        rel = err / length if length > 0 else 0.0
        records.append(EvalRecord(trip.trip_id, run_id, est, err, rel, run.diverged))
    return records


def evaluate_trips(
    graph: RoadGraph,
    trips: list[SimTrip],
    params: FilterParams,
    runs: int = 10,
    init_radius: float = 50.0,
    base_seed: int = 0,
) -> list[EvalRecord]:
    """All trips x run indices, deterministically seeded, records pooled."""
    records: list[EvalRecord] = []
    for trip in trips:
        for run_id in range(runs):
            seed = trial_seed(base_seed, trip.trip_id, run_id)
            records.extend(run_trial(graph, trip, params, seed, init_radius, run_id))
    return records


def sweep_init_radius(
    graph: RoadGraph,
    trips: list[SimTrip],
    params: FilterParams,
    radii: list[float],
    runs: int = 10,
    base_seed: int = 0,
) -> tuple[list[tuple[float, float, float]], dict[float, list[EvalRecord]]]:
    """BP-error quantiles per initialization radius, all else constant.

    Returns (rows, records_by_radius) with rows (radius, q10, q25).
    """
    if any(r <= 0 for r in radii) or list(radii) != sorted(radii):
        raise ValueError("radii must be positive and ascending")
    rows = []
    by_radius: dict[float, list[EvalRecord]] = {}
    for radius in radii:
        recs = evaluate_trips(graph, trips, params, runs, radius, base_seed)
        by_radius[radius] = recs
        bp = [r.error_m for r in recs if r.estimator == "BP"]
        curve = edf(bp)
        rows.append((radius, curve.quantile(0.1), curve.quantile(0.25)))
    return rows, by_radius


# -- CSV output ----------------------------------------------------------


def write_records_csv(path: str | Path, records: list[EvalRecord]):
    with open(path, "w") as fh:
        fh.write("trip_id,run_id,estimator,error_m,rel_error,diverged\n")
        for r in records:
            fh.write(
                f"{r.trip_id},{r.run_id},{r.estimator},"
                f"{r.error_m:.6f},{r.rel_error:.6f},{int(r.diverged)}\n"
            )


def read_records_csv(path: str | Path) -> list[EvalRecord]:
    rows = Path(path).read_text().strip().splitlines()[1:]
    out = []
    for row in rows:
        trip_id, run_id, est, err, rel, div = row.split(",")
        out.append(EvalRecord(trip_id, int(run_id), est, float(err), float(rel), div == "1"))
    return out


def write_edf_csv(path: str | Path, values):
    curve = edf(values)
    xs = np.unique(curve.values)
    with open(path, "w") as fh:
        fh.write("x,F\n")
        for x in xs:
            fh.write(f"{x:.6f},{curve(float(x)):.6f}\n")


def write_sweep_csv(path: str | Path, rows: list[tuple[float, float, float]]):
    with open(path, "w") as fh:
        fh.write("radius_m,q10_m,q25_m\n")
        for radius, q10, q25 in rows:
            fh.write(f"{radius:.6f},{q10:.6f},{q25:.6f}\n")
