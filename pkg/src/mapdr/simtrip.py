"""Synthetic ground-truth trips: route planning, a driver model, corruption.

A trip is a shortest-time route plus a speed profile generated by a driver
who tracks a target speed derived from upcoming speed limits and curve
caps, brakes along a comfortable deceleration envelope, and stops a few
meters short of the final node. Measured speeds are the true ones after a
per-trip scale factor and wheel-speed quantization, mimicking odometric
speed sources.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import GeoPoint, wrap_angle
from .roadgraph import RoadGraph

# Physical bounds for the driver model, m/s^2. The envelope deceleration is
# gentle; the hard bounds only catch pathological cases.
ENVELOPE_BRAKE = 1.4
HARD_BRAKE = 3.5
HARD_ACCEL = 2.0

# The vehicle stops this far short of the final node (drivers park short of
# the corner); the true end pose then sits strictly inside the last link,
# with room for moderate along-path offsets.
END_MARGIN_M = 50.0

DEFAULT_QUANT_STEP = 1.0 / 3.6  # 1 km/h

SCALE_MEAN = 1.012
SCALE_STD = 0.024


class RouteError(Exception):
    pass


@dataclass(frozen=True)
class DriverProfile:
    gain: float = 0.05  # 1/s, speed-approach gain
    accel_noise_std: float = 0.5  # m/s^2
    comfort_lateral: float = 4.0  # m/s^2, curve-slowing bound
    reaction_lookahead_s: float = 12.0

    def __post_init__(self):
        for name in ("gain", "accel_noise_std", "comfort_lateral", "reaction_lookahead_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SimTrip:
    trip_id: str
    node_path: list[int]  # node ids
    link_path: list[int]  # directed link indices
    timestamps: np.ndarray
    true_speeds: np.ndarray
    measured_speeds: np.ndarray
    true_lats: np.ndarray
    true_lons: np.ndarray
    length_L: float
    scale: float

    @property
    def end_position(self) -> GeoPoint:
        return GeoPoint(float(self.true_lats[-1]), float(self.true_lons[-1]))

    @property
    def start_position(self) -> GeoPoint:
        return GeoPoint(float(self.true_lats[0]), float(self.true_lons[0]))

    @property
    def final_link(self) -> int:
        return self.link_path[-1]

    def measured_records(self) -> list[tuple[float, float]]:
        return list(zip(self.timestamps.tolist(), self.measured_speeds.tolist()))


def plan_route(graph: RoadGraph, start_id: int, end_id: int) -> list[int]:
    """Shortest-time node path (edge cost length/limit). Node ids in, ids out."""
    s = graph.node_by_id(start_id)
    t = graph.node_by_id(end_id)
    if s == t:
        return [start_id]
    dist = {s: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, s)]
    seen: set[int] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in seen:
            continue
        if u == t:
            break
        seen.add(u)
        for li in graph.outgoing(u):
            v = int(graph.link_to[li])
            nd = d + graph.link_length[li] / graph.link_limit[li]
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if t not in dist:
        raise RouteError(f"no route from node {start_id} to node {end_id}")
    path = [t]
    while path[-1] != s:
        path.append(prev[path[-1]])
    path.reverse()
    return [graph.node(i).id for i in path]


def _links_of_path(graph: RoadGraph, node_path: list[int]) -> list[int]:
    links = []
    for a, b in zip(node_path[:-1], node_path[1:]):
        ai = graph.node_by_id(a)
        bi = graph.node_by_id(b)
        for li in graph.outgoing(ai):
            if graph.link_to[li] == bi:
                links.append(int(li))
                break
        else:
            raise RouteError(f"no directed link from node {a} to node {b}")
    return links


def _curve_caps(graph: RoadGraph, links: list[int], comfort: float) -> list[tuple[float, float]]:
    """(distance, speed cap) features at interior nodes, from local curvature.

    Curvature at a node is the bearing change in radians over the mean of
    the two incident link lengths.
    """
    caps = []
    d = 0.0
    for j in range(len(links) - 1):
        d += graph.link_length[links[j]]
        turn = abs(wrap_angle(graph.link_bearing[links[j + 1]] - graph.link_bearing[links[j]]))
        kappa = math.radians(turn) / (
            0.5 * (graph.link_length[links[j]] + graph.link_length[links[j + 1]])
        )
        if kappa > 1e-9:
            caps.append((d, math.sqrt(comfort / kappa)))
    return caps


def synthesize_speeds(
    graph: RoadGraph,
    node_path: list[int],
    driver: DriverProfile,
    dt: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Generate (speeds, along-path distances) for a route, starting and
    ending at rest. Distances follow the convention that sample k+1 sits
    s_k*dt past sample k."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(node_path) < 2:
        return np.zeros(0), np.zeros(0)
    links = _links_of_path(graph, node_path)
    lengths = [float(graph.link_length[li]) for li in links]
    limits = [float(graph.link_limit[li]) for li in links]
    ends = np.cumsum(lengths)
    total = float(ends[-1])
    stop_at = total - END_MARGIN_M
    if stop_at <= 0:
        raise RouteError("route too short to drive")

    # Point features the driver slows down for: curve caps at interior
    # nodes, limit drops at link boundaries, and the final stop.
    features = list(_curve_caps(graph, links, driver.comfort_lateral))
    for j in range(len(links) - 1):
        if limits[j + 1] < limits[j]:
            features.append((float(ends[j]), limits[j + 1]))
    features.append((stop_at, 0.0))
    features.sort()

    def envelope(d: float, horizon: float) -> float:
        j = int(np.searchsorted(ends, d, side="right"))
        j = min(j, len(links) - 1)
        v = limits[j]
        for fd, fv in features:
            if fd < d:
                continue
            if fd > d + horizon:
                break
            v = min(v, math.sqrt(fv * fv + 2.0 * ENVELOPE_BRAKE * (fd - d)))
        return v

    speeds = [0.0]
    dists = [0.0]
    s = 0.0
    d = 0.0
    max_steps = int((total / 2.0 + 600.0) / dt) + 2000
    for _ in range(max_steps):
        if d >= stop_at - 2.0 and s <= 0.3:
            break
        horizon = s * driver.reaction_lookahead_s + s * s / (2.0 * ENVELOPE_BRAKE) + 30.0
        v_t = envelope(d, horizon)
        a = driver.gain * (v_t - s) + rng.normal(0.0, driver.accel_noise_std)
        a = min(max(a, -HARD_BRAKE), HARD_ACCEL)
        d_new = d + s * dt
        s_new = s + a * dt
        cap = envelope(d_new, horizon)
        if s_new > cap:
            s_new = cap
        # never step past the stop point in the next interval
        terminal = max(0.0, stop_at - d_new) / dt
        if s_new > terminal:
            s_new = terminal
        if s_new < s - HARD_BRAKE * dt:
            s_new = s - HARD_BRAKE * dt
        if s_new < 0.0:
            s_new = 0.0
        s = s_new
        d = d_new
        speeds.append(s)
        dists.append(d)
    else:
        raise RouteError("driver model failed to finish the route")
    speeds[-1] = 0.0
    return np.array(speeds), np.array(dists)


def corrupt(true_speeds: np.ndarray, scale: float, quant_step: float) -> np.ndarray:
    """Scale then quantize speeds, as a wheel-speed source would report them."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    scaled = scale * np.asarray(true_speeds, dtype=np.float64)
    if quant_step <= 0:
        return scaled
    return np.round(scaled / quant_step) * quant_step


def draw_scale(rng: np.random.Generator, mean: float = SCALE_MEAN, std: float = SCALE_STD) -> float:
    """Per-trip speed scale factor, normal truncated to [0.9, 1.1]."""
    if std == 0:
        return mean
    while True:
        s = float(rng.normal(mean, std))
        if 0.9 <= s <= 1.1:
            return s


def positions_along(
    graph: RoadGraph, links: list[int], dists: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate lat/lon at the given along-path distances."""
    lengths = np.array([graph.link_length[li] for li in links])
    ends = np.cumsum(lengths)
    starts = ends - lengths
    lats = np.empty(len(dists))
    lons = np.empty(len(dists))
    for k, d in enumerate(dists):
        j = min(int(np.searchsorted(ends, d, side="right")), len(links) - 1)
        ratio = min(1.0, max(0.0, (d - starts[j]) / lengths[j]))
        li = links[j]
        a = int(graph.link_from[li])
        b = int(graph.link_to[li])
        x = graph.node_x[a] + ratio * (graph.node_x[b] - graph.node_x[a])
        y = graph.node_y[a] + ratio * (graph.node_y[b] - graph.node_y[a])
        lats[k], lons[k] = graph.projection.to_latlon(x, y)
    return lats, lons


def make_trip(
    graph: RoadGraph,
    start_id: int,
    end_id: int,
    trip_id: str,
    rng: np.random.Generator,
    driver: DriverProfile | None = None,
    dt: float = 1.0,
    scale_mean: float = SCALE_MEAN,
    scale_std: float = SCALE_STD,
    quant_step: float = DEFAULT_QUANT_STEP,
) -> SimTrip:
    driver = driver or DriverProfile()
    node_path = plan_route(graph, start_id, end_id)
    links = _links_of_path(graph, node_path)
    speeds, dists = synthesize_speeds(graph, node_path, driver, dt, rng)
    lats, lons = positions_along(graph, links, dists)
    scale = draw_scale(rng, scale_mean, scale_std)
    measured = corrupt(speeds, scale, quant_step)
    length = float(np.sum([graph.link_length[li] for li in links]))
    return SimTrip(
        trip_id=trip_id,
        node_path=node_path,
        link_path=links,
        timestamps=np.arange(len(speeds)) * dt,
        true_speeds=speeds,
        measured_speeds=measured,
        true_lats=lats,
        true_lons=lons,
        length_L=length,
        scale=scale,
    )


def sample_trips(
    graph: RoadGraph,
    count: int,
    rng: np.random.Generator,
    min_km: float = 3.0,
    max_km: float = 10.0,
    min_end_link_m: float = 60.0,
    end_limit_max_mps: float | None = None,
    **kwargs,
) -> list[SimTrip]:
    """Draw random start/end node pairs until routes land in the length band.

    `min_end_link_m` keeps the trip end away from a junction (the stop then
    happens deep inside one link); `end_limit_max_mps` restricts trip ends
    to low-limit streets (trips usually end at destinations on residential
    roads, not mid-arterial).
    """
    trips = []
    used_pairs: set[tuple[int, int]] = set()
    tries = 0
    while len(trips) < count:
        tries += 1
        if tries > 4000 * max(1, count):
            raise RouteError("could not sample enough trips in the length band")
        a = int(rng.integers(graph.num_nodes))
        b = int(rng.integers(graph.num_nodes))
        if a == b or (a, b) in used_pairs:
            continue
        try:
            node_path = plan_route(graph, graph.node(a).id, graph.node(b).id)
            links = _links_of_path(graph, node_path)
        except RouteError:
            continue
        length = float(np.sum([graph.link_length[li] for li in links]))
        if not (min_km * 1000.0 <= length <= max_km * 1000.0):
            continue
        if graph.link_length[links[-1]] < min_end_link_m:
            continue
        if (
            end_limit_max_mps is not None
            and graph.link_limit[links[-1]] > end_limit_max_mps
        ):
            continue
        used_pairs.add((a, b))
        trip_id = f"trip_{len(trips):03d}"
        trips.append(make_trip(graph, node_path[0], node_path[-1], trip_id, rng, **kwargs))
    return trips


# -- trip files ----------------------------------------------------------


def write_trip(out_dir: str | Path, trip: SimTrip):
    """Write <id>.csv (truth), <id>.measured.csv and the <id>.meta.txt sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{trip.trip_id}.csv", "w") as fh:
        fh.write("t_s,speed_mps,true_lat,true_lon\n")
        for t, s, lat, lon in zip(
            trip.timestamps, trip.true_speeds, trip.true_lats, trip.true_lons
        ):
            fh.write(f"{t:.3f},{s:.6f},{lat:.7f},{lon:.7f}\n")
    with open(out / f"{trip.trip_id}.measured.csv", "w") as fh:
        fh.write("t_s,speed_mps\n")
        for t, s in zip(trip.timestamps, trip.measured_speeds):
            fh.write(f"{t:.3f},{s:.6f}\n")
    with open(out / f"{trip.trip_id}.meta.txt", "w") as fh:
        fh.write(f"length_m = {trip.length_L:.6f}\n")
        fh.write(f"scale = {trip.scale:.6f}\n")
        fh.write("nodes = " + ",".join(str(n) for n in trip.node_path) + "\n")


def read_trip(trip_dir: str | Path, trip_id: str, graph: RoadGraph) -> SimTrip:
    base = Path(trip_dir)
    truth_path = base / f"{trip_id}.csv"
    rows = truth_path.read_text().strip().splitlines()[1:]
    t, s, lat, lon = [], [], [], []
    for row in rows:
        parts = row.split(",")
        t.append(float(parts[0]))
        s.append(float(parts[1]))
        lat.append(float(parts[2]))
        lon.append(float(parts[3]))
    meas_rows = (base / f"{trip_id}.measured.csv").read_text().strip().splitlines()[1:]
    measured = np.array([float(r.split(",")[1]) for r in meas_rows])
    meta = {}
    for line in (base / f"{trip_id}.meta.txt").read_text().splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            meta[key.strip()] = val.strip()
    node_path = [int(x) for x in meta["nodes"].split(",")]
    links = _links_of_path(graph, node_path)
    return SimTrip(
        trip_id=trip_id,
        node_path=node_path,
        link_path=links,
        timestamps=np.array(t),
        true_speeds=np.array(s),
        measured_speeds=measured,
        true_lats=np.array(lat),
        true_lons=np.array(lon),
        length_L=float(meta["length_m"]),
        scale=float(meta.get("scale", "1.0")),
    )


def list_trip_ids(trip_dir: str | Path) -> list[str]:
    base = Path(trip_dir)
    ids = sorted(
        p.stem for p in base.glob("trip_*.csv") if not p.name.endswith(".measured.csv")
    )
    return ids
