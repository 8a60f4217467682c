"""Particle filter over a road graph, driven by speed measurements only.

Each step distributes the traveled distance dt*s along the network (splitting
particles at junctions), refreshes every particle's yaw and target-speed
filters from its new link, weights particles by the lateral-force and
target-speed likelihoods, hands the weight of killed branches back to their
junction siblings, culls, occasionally resamples with a random displacement
along the link, and merges near-duplicates. Randomness enters only through
resampling, from a single seeded stream, so runs are reproducible.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import stepcore
from .geo import GeoPoint, wrap_angle
from .kalman import INIT_OMEGA_STD, PROJECTION_MARGIN
from .motion import PathState
from .params import FilterParams
from .roadgraph import RoadGraph


class DivergedError(Exception):
    """Raised when an estimate is requested from an empty population."""


class InitializationError(Exception):
    pass


@dataclass
class Particle:
    """Read-only view of one particle (copies, not references)."""

    state: PathState
    weight: float
    theta: float
    omega: float
    sbar: float
    group: int
    odometer: float


@dataclass
class StepDiagnostics:
    k: int
    population: int
    ess: float
    lost_mass: float


class FilterRun:
    """Mutable filter state: the particle population plus shared covariances."""

    def __init__(self, graph: RoadGraph, params: FilterParams):
        self.graph = graph
        self.params = params
        self.k = 0
        self.group_counter = 0
        self.diverged = False
        self.diagnostics: list[StepDiagnostics] = []
        self.rng = np.random.default_rng(params.rng_seed)
        self._hist: deque[tuple[float, float]] = deque(maxlen=params.tsp.lag_k + 1)
        # Shared covariances (identical for every particle; means are per-particle).
        self.yaw_p00 = params.noise.sigma_theta ** 2
        self.yaw_p01 = 0.0
        self.yaw_p11 = INIT_OMEGA_STD ** 2
        self.speed_var = params.noise.sigma_s2 ** 2
        self.link = np.empty(0, dtype=np.int32)
        self.ratio = np.empty(0, dtype=np.float64)
        self.theta = np.empty(0, dtype=np.float64)
        self.omega = np.empty(0, dtype=np.float64)
        self.sbar = np.empty(0, dtype=np.float64)
        self.weight = np.empty(0, dtype=np.float64)
        self.group = np.empty(0, dtype=np.int64)
        self.odo = np.empty(0, dtype=np.float64)

    @property
    def population(self) -> int:
        return len(self.link)

    def particles(self) -> list[Particle]:
        return [
            Particle(
                state=PathState(int(self.link[i]), float(self.ratio[i])),
                weight=float(self.weight[i]),
                theta=float(self.theta[i]),
                omega=float(self.omega[i]),
                sbar=float(self.sbar[i]),
                group=int(self.group[i]),
                odometer=float(self.odo[i]),
            )
            for i in range(self.population)
        ]

    def positions_xy(self) -> tuple[np.ndarray, np.ndarray]:
        g = self.graph
        a = g.link_from[self.link]
        b = g.link_to[self.link]
        x = g.node_x[a] + self.ratio * (g.node_x[b] - g.node_x[a])
        y = g.node_y[a] + self.ratio * (g.node_y[b] - g.node_y[a])
        return x, y


def init_filter(graph: RoadGraph, center: GeoPoint, radius: float, params: FilterParams) -> FilterRun:
    """Spread equally weighted particles over every link portion in the circle.

    One particle per merge_dist meters of in-circle link (at least one per
    directed link), in both directions unless the way is oneway.
    """
    portions = graph.links_within(center, radius)
    if not portions:
        raise InitializationError(
            f"no links within {radius:.0f} m of ({center.lat:.6f}, {center.lon:.6f})"
        )
    spacing = params.merge_dist
    links: list[int] = []
    ratios: list[float] = []
    for link_idx, (t0, t1) in portions:
        portion_len = (t1 - t0) * graph.link_length[link_idx]
        count = 1 if spacing <= 0 else max(1, int(portion_len // spacing))
        for j in range(count):
            links.append(link_idx)
            ratios.append(t0 + (t1 - t0) * (j + 0.5) / count)
    run = FilterRun(graph, params)
    n = len(links)
    run.link = np.array(links, dtype=np.int32)
    run.ratio = np.array(ratios, dtype=np.float64)
    run.theta = np.array([wrap_angle(graph.link_bearing[l]) for l in links], dtype=np.float64)
    run.omega = np.zeros(n, dtype=np.float64)
    run.sbar = graph.link_limit[run.link].astype(np.float64)
    run.weight = np.full(n, 1.0 / n, dtype=np.float64)
    run.group = np.full(n, -1, dtype=np.int64)
    run.odo = np.zeros(n, dtype=np.float64)
    return run


def init_filter_at(graph: RoadGraph, states: list[PathState], params: FilterParams) -> FilterRun:
    """Start from explicit poses with equal weights (test and oracle entry)."""
    if not states:
        raise InitializationError("need at least one state")
    run = FilterRun(graph, params)
    n = len(states)
    run.link = np.array([s.link for s in states], dtype=np.int32)
    run.ratio = np.array([s.ratio for s in states], dtype=np.float64)
    run.theta = np.array(
        [wrap_angle(graph.link_bearing[s.link]) for s in states], dtype=np.float64
    )
    run.omega = np.zeros(n, dtype=np.float64)
    run.sbar = graph.link_limit[run.link].astype(np.float64)
    run.weight = np.full(n, 1.0 / n, dtype=np.float64)
    run.group = np.full(n, -1, dtype=np.int64)
    run.odo = np.zeros(n, dtype=np.float64)
    return run


def _shared_gains(run: FilterRun, dt: float) -> tuple[float, float, float]:
    """Advance the shared covariances one step and return the Kalman gains."""
    noise = run.params.noise
    p00 = run.yaw_p00 + dt * (2.0 * run.yaw_p01 + dt * run.yaw_p11)
    p01 = run.yaw_p01 + dt * run.yaw_p11
    p11 = run.yaw_p11 + dt * noise.sigma_omega ** 2
    s = p00 + noise.sigma_theta ** 2
    yk0 = p00 / s
    yk1 = p01 / s
    run.yaw_p00 = (1.0 - yk0) * p00
    run.yaw_p01 = (1.0 - yk0) * p01
    run.yaw_p11 = p11 - yk1 * p01
    v = run.speed_var + dt * noise.sigma_s1 ** 2
    sgain = v / (v + noise.sigma_s2 ** 2)
    run.speed_var = (1.0 - sgain) * v
    return yk0, yk1, sgain


def _y2_input(run: FilterRun, dt: float, s_k: float, s_next: float) -> tuple[bool, float]:
    """Lagged target-speed measurement; available once K past samples exist."""
    tsp = run.params.tsp
    if tsp.lag_k == 0:
        return True, (s_next - s_k) / dt + tsp.gain_c * s_k
    run._hist.append((s_k, dt))
    if len(run._hist) < tsp.lag_k + 1:
        return False, 0.0
    s0, dt0 = run._hist[0]
    s1 = run._hist[1][0]
    return True, (s1 - s0) / dt0 + tsp.gain_c * s0


def step(run: FilterRun, dt: float, s_k: float, s_next: float) -> FilterRun:
    """One full filter step consuming the speed pair (s_k, s_next)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if s_k < 0 or s_next < 0:
        raise ValueError("speeds must be nonnegative")
    if run.diverged:
        return run
    run.k += 1
    p = run.params
    g = run.graph

    yk0, yk1, sgain = _shared_gains(run, dt)
    have_y2, y2_val = _y2_input(run, dt, s_k, s_next)
    a_k = (s_next - s_k) / dt
    dist = dt * s_k

    n = run.population
    cap = max(64, 4 * n)
    while True:
        o_link = np.empty(cap, dtype=np.int32)
        o_ratio = np.empty(cap, dtype=np.float64)
        o_theta = np.empty(cap, dtype=np.float64)
        o_omega = np.empty(cap, dtype=np.float64)
        o_sbar = np.empty(cap, dtype=np.float64)
        o_w = np.empty(cap, dtype=np.float64)
        o_wpre = np.empty(cap, dtype=np.float64)
        o_group = np.empty(cap, dtype=np.int64)
        o_parent = np.empty(cap, dtype=np.int32)
        o_odo = np.empty(cap, dtype=np.float64)
        lost_group = np.empty(cap, dtype=np.int64)
        lost_w = np.empty(cap, dtype=np.float64)
        n_out, n_lost, n_groups = stepcore.step_particles(
            g.link_length, g.link_bearing, g.link_limit, g.link_to, g.link_reverse,
            g.adj_start, g.adj_link,
            run.link, run.ratio, run.theta, run.omega, run.sbar, run.weight,
            run.group, run.odo,
            dist, dt, a_k, s_k, int(have_y2), y2_val,
            yk0, yk1, sgain,
            p.lateral.g1, p.lateral.g2, p.tsp.gain_c, p.tsp.sigma, PROJECTION_MARGIN,
            run.group_counter,
            o_link, o_ratio, o_theta, o_omega, o_sbar, o_w, o_wpre, o_group,
            o_parent, o_odo, lost_group, lost_w,
        )
        if n_out >= 0:
            break
        cap *= 2
    run.group_counter += n_groups

    run.link = o_link[:n_out]
    run.ratio = o_ratio[:n_out]
    run.theta = o_theta[:n_out]
    run.omega = o_omega[:n_out]
    run.sbar = o_sbar[:n_out]
    run.weight = o_w[:n_out].copy()
    run.group = o_group[:n_out]
    run.odo = o_odo[:n_out]
    wpre = o_wpre[:n_out]
    lost_mass = float(np.sum(lost_w[:n_lost])) if n_lost else 0.0

    # Phase 4: hand the pre-zeroing weight of killed branches (likelihood
    # zeros and dead ends alike) to their live junction siblings.
    zero_mask = run.weight == 0.0
    donations: dict[int, float] = {}
    for idx in np.nonzero(zero_mask)[0]:
        grp = int(run.group[idx])
        if grp >= 0:
            donations[grp] = donations.get(grp, 0.0) + float(wpre[idx])
    for j in range(n_lost):
        grp = int(lost_group[j])
        if grp >= 0:
            donations[grp] = donations.get(grp, 0.0) + float(lost_w[j])
    if donations:
        live_by_group: dict[int, list[int]] = {}
        for idx in np.nonzero(~zero_mask)[0]:
            grp = int(run.group[idx])
            if grp in donations:
                live_by_group.setdefault(grp, []).append(int(idx))
        for grp, amount in donations.items():
            members = live_by_group.get(grp)
            if members:
                share = amount / len(members)
                for idx in members:
                    run.weight[idx] += share
    # Restore mass lost without live siblings via the final renormalization.

    # Phase 5: drop zero-weight particles immediately; at check instants also
    # cull insufficient weights when the population exceeds the threshold.
    _keep(run, run.weight > 0.0)
    if run.diverged:
        run.diagnostics.append(StepDiagnostics(run.k, 0, 0.0, lost_mass))
        return run
    run.weight /= run.weight.sum()
    if (
        p.check_interval > 0
        and run.k % p.check_interval == 0
        and run.population > p.particle_threshold
    ):
        floor = p.weight_floor / run.population
        _keep(run, run.weight >= floor)
        run.weight /= run.weight.sum()

    # Phase 6: systematic resampling with displacement along the link.
    if (
        p.resample_period > 0
        and run.k % p.resample_period == 0
        and run.population < p.particle_threshold
    ):
        _resample(run)

    # Phase 7: merge near-duplicates on the same link.
    if p.merge_dist > 0:
        merge_particles(run)

    run.weight /= run.weight.sum()
    ess = 1.0 / float(np.sum(run.weight ** 2))
    run.diagnostics.append(StepDiagnostics(run.k, run.population, ess, lost_mass))
    return run


def _keep(run: FilterRun, mask: np.ndarray):
    if not mask.all():
        run.link = run.link[mask]
        run.ratio = run.ratio[mask]
        run.theta = run.theta[mask]
        run.omega = run.omega[mask]
        run.sbar = run.sbar[mask]
        run.weight = run.weight[mask]
        run.group = run.group[mask]
        run.odo = run.odo[mask]
    if run.population == 0:
        run.diverged = True


def systematic_offspring_counts(weights: np.ndarray, target: int, u: float) -> np.ndarray:
    """Offspring count per particle under systematic resampling.

    One uniform draw u in [0,1) places `target` equidistant points over the
    cumulative weights; counts are how many points fall in each interval.
    """
    if target < 1:
        raise ValueError("target must be >= 1")
    positions = (u + np.arange(target)) / target
    cumulative = np.cumsum(weights)
    cumulative[-1] = max(cumulative[-1], 1.0)  # guard the last interval
    idx = np.searchsorted(cumulative, positions, side="right")
    return np.bincount(np.minimum(idx, len(weights) - 1), minlength=len(weights))


def _displace(graph: RoadGraph, link: int, ratio: float, d: float, rng) -> tuple[int, float]:
    """Move a pose d meters (signed) along the network, sampling one branch
    uniformly at each junction. Clamps at dead ends."""
    if d >= 0:
        left = d
        while True:
            length = graph.link_length[link]
            rem = (1.0 - ratio) * length
            if left < rem:
                return link, ratio + left / length
            left -= rem
            cont = graph.continuations(link)
            if len(cont) == 0:
                return link, 1.0
            link = int(cont[rng.integers(len(cont))])
            ratio = 0.0
    else:
        left = -d
        while True:
            length = graph.link_length[link]
            rem = ratio * length
            if left < rem:
                return link, ratio - left / length
            left -= rem
            node = int(graph.link_from[link])
            rev = graph.link_reverse[link]
            cands = graph.incoming(node)
            cands = cands[cands != rev]
            if len(cands) == 0:
                return link, 0.0
            link = int(cands[rng.integers(len(cands))])
            ratio = 1.0


def _resample(run: FilterRun):
    """Refill the population to the threshold; every offspring is displaced
    by an independent uniform draw and all weights reset equal."""
    p = run.params
    target = p.particle_threshold
    counts = systematic_offspring_counts(run.weight, target, float(run.rng.random()))
    parents = np.repeat(np.arange(run.population), counts)
    link = run.link[parents].copy()
    ratio = run.ratio[parents].copy()
    halfwidth = p.displacement_halfwidth
    for j in range(len(parents)):
        d = float(run.rng.uniform(-halfwidth, halfwidth))
        link[j], ratio[j] = _displace(run.graph, int(link[j]), float(ratio[j]), d, run.rng)
    run.link = link
    run.ratio = ratio
    run.theta = run.theta[parents].copy()
    run.omega = run.omega[parents].copy()
    run.sbar = run.sbar[parents].copy()
    run.group = run.group[parents].copy()
    run.odo = run.odo[parents].copy()
    run.weight = np.full(len(parents), 1.0 / target, dtype=np.float64)


def redistribute_siblings(
    weights: np.ndarray, pre_weights: np.ndarray, groups: np.ndarray, zeroed: np.ndarray
) -> np.ndarray:
    """Split each zeroed particle's prior weight equally over live same-group
    siblings. Standalone array form of the in-step phase 4 (for tests and
    reuse); particles with group < 0 have no siblings and their mass is
    simply dropped."""
    out = weights.copy()
    donations: dict[int, float] = {}
    for idx in np.nonzero(zeroed)[0]:
        grp = int(groups[idx])
        if grp >= 0:
            donations[grp] = donations.get(grp, 0.0) + float(pre_weights[idx])
        out[idx] = 0.0
    for grp, amount in donations.items():
        members = [
            int(i) for i in np.nonzero((groups == grp) & ~zeroed)[0] if weights[i] > 0
        ]
        if members:
            share = amount / len(members)
            for i in members:
                out[i] += share
    return out


def merge_particles(run: FilterRun):
    """Collapse particles on the same link that sit within merge_dist of each
    other and agree in their filter means; the merged particle carries the
    weight sum and weight-averaged position and means."""
    n = run.population
    if n <= 1:
        return
    p = run.params
    order = np.lexsort((run.ratio, run.link))
    keep_idx: list[int] = []
    w_out: list[float] = []
    r_out: list[float] = []
    th_out: list[float] = []
    om_out: list[float] = []
    sb_out: list[float] = []

    def flush(cluster: list[int], w: float, r: float, th: float, om: float, sb: float):
        keep_idx.append(cluster[int(np.argmax([run.weight[c] for c in cluster]))])
        w_out.append(w)
        r_out.append(r)
        th_out.append(th)
        om_out.append(om)
        sb_out.append(sb)

    i0 = int(order[0])
    cluster = [i0]
    cw = float(run.weight[i0])
    cr = float(run.ratio[i0])
    cth = float(run.theta[i0])
    com = float(run.omega[i0])
    csb = float(run.sbar[i0])
    for oi in order[1:]:
        i = int(oi)
        same_link = run.link[i] == run.link[cluster[0]]
        length = run.graph.link_length[run.link[i]]
        close = (
            same_link
            and (run.ratio[i] - cr) * length < p.merge_dist
            and abs(wrap_angle(run.theta[i] - cth)) <= p.merge_tol_theta
            and abs(run.omega[i] - com) <= p.merge_tol_omega
            and abs(run.sbar[i] - csb) <= p.merge_tol_sbar
        )
        if close:
            wi = float(run.weight[i])
            tot = cw + wi
            f = wi / tot
            cr += f * (float(run.ratio[i]) - cr)
            cth = wrap_angle(cth + f * wrap_angle(float(run.theta[i]) - cth))
            com += f * (float(run.omega[i]) - com)
            csb += f * (float(run.sbar[i]) - csb)
            cw = tot
            cluster.append(i)
        else:
            flush(cluster, cw, cr, cth, com, csb)
            cluster = [i]
            cw = float(run.weight[i])
            cr = float(run.ratio[i])
            cth = float(run.theta[i])
            com = float(run.omega[i])
            csb = float(run.sbar[i])
    flush(cluster, cw, cr, cth, com, csb)

    if len(keep_idx) == n:
        return
    sel = np.array(keep_idx, dtype=np.intp)
    run.link = run.link[sel]
    run.group = run.group[sel]
    run.odo = run.odo[sel]
    run.ratio = np.array(r_out, dtype=np.float64)
    run.theta = np.array(th_out, dtype=np.float64)
    run.omega = np.array(om_out, dtype=np.float64)
    run.sbar = np.array(sb_out, dtype=np.float64)
    run.weight = np.array(w_out, dtype=np.float64)


def estimate(run: FilterRun, kind: str) -> GeoPoint:
    """MAP (max-weight particle) or MMSE (weighted planar mean) end position."""
    if run.diverged or run.population == 0:
        raise DivergedError("no particles left")
    x, y = run.positions_xy()
    if kind == "MAP":
        i = int(np.argmax(run.weight))
        lat, lon = run.graph.projection.to_latlon(float(x[i]), float(y[i]))
    elif kind == "MMSE":
        mx = float(np.dot(run.weight, x))
        my = float(np.dot(run.weight, y))
        lat, lon = run.graph.projection.to_latlon(mx, my)
    else:
        raise ValueError(f"unknown estimator kind: {kind}")
    return GeoPoint(lat, lon)


def best_particle(run: FilterRun, truth: GeoPoint) -> GeoPoint:
    """Position of the particle closest to the true position (oracle metric)."""
    if run.diverged or run.population == 0:
        raise DivergedError("no particles left")
    x, y = run.positions_xy()
    tx, ty = run.graph.projection.to_xy(truth.lat, truth.lon)
    i = int(np.argmin((x - tx) ** 2 + (y - ty) ** 2))
    lat, lon = run.graph.projection.to_latlon(float(x[i]), float(y[i]))
    return GeoPoint(lat, lon)


def map_link(run: FilterRun) -> int:
    """Directed link index of the max-weight particle."""
    if run.diverged or run.population == 0:
        raise DivergedError("no particles left")
    return int(run.link[int(np.argmax(run.weight))])


def run_filter(
    graph: RoadGraph,
    records: list[tuple[float, float]],
    params: FilterParams,
    center: GeoPoint,
    radius: float,
) -> FilterRun:
    """Run the filter over (timestamp, speed) records from a circular prior."""
    if len(records) < 2:
        raise ValueError("need at least two speed records")
    run = init_filter(graph, center, radius, params)
    for (t0, s0), (t1, s1) in zip(records[:-1], records[1:]):
        dt = t1 - t0
        step(run, dt, s0, s1)
        if run.diverged:
            break
    return run
