"""Directed road network built from an OSM XML extract.

A graph is a set of nodes (lat/lon) and directed links; a two-way street
contributes one link per direction. Construction happens once, after which
the graph is immutable and safe for unrestricted concurrent reads. Geometry
is precomputed into flat numpy arrays so the particle-stepping kernels can
run without touching Python objects.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geo import GeoPoint, LocalProjection, geodesic_distance, initial_bearing, wrap_bearing

KMH_TO_MPS = 1.0 / 3.6
MPH_TO_MPS = 1.609344 / 3.6

# Ways whose highway value is in this set never carry cars.
EXCLUDED_HIGHWAYS = {"footway", "path", "cycleway", "steps", "pedestrian"}

# Default speed limits (km/h) when a way has no usable maxspeed tag.
DEFAULT_LIMITS_KMH = {
    "motorway": 120.0,
    "motorway_link": 120.0,
    "trunk": 90.0,
    "trunk_link": 90.0,
    "primary": 90.0,
    "primary_link": 90.0,
    "secondary": 70.0,
    "secondary_link": 70.0,
    "tertiary": 50.0,
    "tertiary_link": 50.0,
    "residential": 30.0,
    "unclassified": 30.0,
    "living_street": 20.0,
}
FALLBACK_LIMIT_KMH = 50.0

GRID_CELL_M = 250.0

# Links longer than this get great-circle bearings instead of planar ones.
PLANAR_BEARING_MAX_M = 5000.0


class OsmParseError(Exception):
    pass


@dataclass(frozen=True)
class RoadNode:
    id: int
    point: GeoPoint


@dataclass(frozen=True)
class RoadLink:
    """One directed link. `index` is the position in the graph's link arrays."""

    index: int
    from_node: int
    to_node: int
    length_m: float
    bearing_deg: float
    speed_limit_mps: float
    reverse_index: int  # -1 when travel against this link is not allowed
    way_id: int

    @property
    def reverse_allowed(self) -> bool:
        return self.reverse_index >= 0


def parse_maxspeed(value: str | None) -> float | None:
    """Parse an OSM maxspeed tag to m/s. Returns None when unusable."""
    if value is None:
        return None
    text = value.strip().lower()
    if text.endswith("mph"):
        text = text[:-3].strip()
        try:
            return float(text) * MPH_TO_MPS
        except ValueError:
            return None
    if text.endswith("km/h"):
        text = text[:-4].strip()
    try:
        speed = float(text) * KMH_TO_MPS
    except ValueError:
        return None
    return speed if speed > 0 else None


class RoadGraph:
    """Immutable directed road network with spatial lookup.

    Build via `parse_osm` or `RoadGraph.build`. Node ids are the original
    (opaque) identifiers; links are addressed by dense integer index.
    """

    def __init__(self, nodes: Sequence[RoadNode], link_rows: Sequence[tuple]):
        # link_rows: (from_id, to_id, limit_mps, way_id) directed, in insertion order
        self._nodes = list(nodes)
        self._id_to_idx = {n.id: i for i, n in enumerate(self._nodes)}
        if len(self._id_to_idx) != len(self._nodes):
            raise ValueError("duplicate node ids")

        n_nodes = len(self._nodes)
        self.node_lat = np.array([n.point.lat for n in self._nodes], dtype=np.float64)
        self.node_lon = np.array([n.point.lon for n in self._nodes], dtype=np.float64)
        if n_nodes:
            lat0 = 0.5 * (self.node_lat.min() + self.node_lat.max())
            lon0 = 0.5 * (self.node_lon.min() + self.node_lon.max())
        else:
            lat0 = lon0 = 0.0
        self.projection = LocalProjection(lat0, lon0)
        xy = [self.projection.to_xy(n.point.lat, n.point.lon) for n in self._nodes]
        self.node_x = np.array([p[0] for p in xy], dtype=np.float64)
        self.node_y = np.array([p[1] for p in xy], dtype=np.float64)

        n_links = len(link_rows)
        self.link_from = np.zeros(n_links, dtype=np.int32)
        self.link_to = np.zeros(n_links, dtype=np.int32)
        self.link_length = np.zeros(n_links, dtype=np.float64)
        self.link_bearing = np.zeros(n_links, dtype=np.float64)
        self.link_limit = np.zeros(n_links, dtype=np.float64)
        self.link_reverse = np.full(n_links, -1, dtype=np.int32)
        self.link_way = np.zeros(n_links, dtype=np.int64)

        pair_index: dict[tuple[int, int], int] = {}
        for i, (from_id, to_id, limit, way_id) in enumerate(link_rows):
            try:
                a = self._id_to_idx[from_id]
                b = self._id_to_idx[to_id]
            except KeyError as exc:
                raise OsmParseError(f"link references missing node id {exc.args[0]}") from None
            if a == b:
                raise ValueError(f"self-loop link at node {from_id}")
            self.link_from[i] = a
            self.link_to[i] = b
            self.link_limit[i] = limit
            self.link_way[i] = way_id
            pa = self._nodes[a].point
            pb = self._nodes[b].point
            length = geodesic_distance(pa, pb)
            if length <= 0.0:
                raise ValueError(f"zero-length link between nodes {from_id} and {to_id}")
            self.link_length[i] = length
            pair_index[(a, b)] = i

        # Bearings: planar at city scale, great-circle for long links; a
        # reverse link gets the exact 180-degree opposite of its forward twin
        # so the pair invariant holds regardless of length.
        done = np.zeros(n_links, dtype=bool)
        for i in range(n_links):
            if done[i]:
                continue
            a, b = int(self.link_from[i]), int(self.link_to[i])
            if self.link_length[i] <= PLANAR_BEARING_MAX_M:
                brg = self.projection.planar_bearing(
                    self.node_x[a], self.node_y[a], self.node_x[b], self.node_y[b]
                )
            else:
                brg = initial_bearing(self._nodes[a].point, self._nodes[b].point)
            self.link_bearing[i] = brg
            done[i] = True
            j = pair_index.get((b, a))
            if j is not None and not done[j]:
                self.link_bearing[j] = wrap_bearing(brg + 180.0)
                done[j] = True
        for (a, b), i in pair_index.items():
            j = pair_index.get((b, a), -1)
            self.link_reverse[i] = j

        # Outgoing adjacency in CSR form, ordered by link index.
        counts = np.zeros(n_nodes + 1, dtype=np.int32)
        for i in range(n_links):
            counts[self.link_from[i] + 1] += 1
        self.adj_start = np.cumsum(counts, dtype=np.int32)
        self.adj_link = np.zeros(n_links, dtype=np.int32)
        fill = self.adj_start[:-1].copy()
        for i in range(n_links):
            a = self.link_from[i]
            self.adj_link[fill[a]] = i
            fill[a] += 1

        # Incoming adjacency (used by backward displacement during resampling).
        counts = np.zeros(n_nodes + 1, dtype=np.int32)
        for i in range(n_links):
            counts[self.link_to[i] + 1] += 1
        self.in_start = np.cumsum(counts, dtype=np.int32)
        self.in_link = np.zeros(n_links, dtype=np.int32)
        fill = self.in_start[:-1].copy()
        for i in range(n_links):
            b = self.link_to[i]
            self.in_link[fill[b]] = i
            fill[b] += 1

        self._build_grid()
        for arr in (
            self.node_lat, self.node_lon, self.node_x, self.node_y,
            self.link_from, self.link_to, self.link_length, self.link_bearing,
            self.link_limit, self.link_reverse, self.link_way,
            self.adj_start, self.adj_link, self.in_start, self.in_link,
        ):
            arr.setflags(write=False)

    # -- basic accessors -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self._nodes)

    @property
    def num_links(self) -> int:
        return len(self.link_from)

    def node(self, idx: int) -> RoadNode:
        return self._nodes[idx]

    def node_by_id(self, node_id: int) -> int:
        return self._id_to_idx[node_id]

    def link(self, idx: int) -> RoadLink:
        return RoadLink(
            index=idx,
            from_node=int(self.link_from[idx]),
            to_node=int(self.link_to[idx]),
            length_m=float(self.link_length[idx]),
            bearing_deg=float(self.link_bearing[idx]),
            speed_limit_mps=float(self.link_limit[idx]),
            reverse_index=int(self.link_reverse[idx]),
            way_id=int(self.link_way[idx]),
        )

    def links(self) -> Iterable[RoadLink]:
        return (self.link(i) for i in range(self.num_links))

    def outgoing(self, node_idx: int) -> np.ndarray:
        return self.adj_link[self.adj_start[node_idx]:self.adj_start[node_idx + 1]]

    def incoming(self, node_idx: int) -> np.ndarray:
        return self.in_link[self.in_start[node_idx]:self.in_start[node_idx + 1]]

    def continuations(self, link_idx: int) -> np.ndarray:
        """Outgoing links at the end of `link_idx`, excluding its reverse."""
        out = self.outgoing(int(self.link_to[link_idx]))
        rev = self.link_reverse[link_idx]
        return out[out != rev]

    # -- construction ----------------------------------------------------

    @classmethod
    def build(
        cls,
        nodes: Sequence[tuple[int, float, float]],
        edges: Sequence[tuple[int, int, float, bool]],
        way_ids: Sequence[int] | None = None,
    ) -> "RoadGraph":
        """Assemble a graph from (id, lat, lon) nodes and edge tuples.

        Each edge is (from_id, to_id, limit_mps, two_way); a two-way edge
        produces the reverse link immediately after the forward one.
        """
        road_nodes = [RoadNode(i, GeoPoint(lat, lon)) for i, lat, lon in nodes]
        rows = []
        for k, (a, b, limit, two_way) in enumerate(edges):
            wid = way_ids[k] if way_ids is not None else k
            rows.append((a, b, limit, wid))
            if two_way:
                rows.append((b, a, limit, wid))
        return cls(road_nodes, rows)

    # -- spatial queries -------------------------------------------------

    def _build_grid(self):
        n = self.num_links
        if n == 0 or self.num_nodes == 0:
            self._grid = {}
            self._gx0 = self._gy0 = 0.0
            return
        self._gx0 = float(self.node_x.min())
        self._gy0 = float(self.node_y.min())
        grid: dict[tuple[int, int], list[int]] = {}
        for i in range(n):
            ax, ay = self.node_x[self.link_from[i]], self.node_y[self.link_from[i]]
            bx, by = self.node_x[self.link_to[i]], self.node_y[self.link_to[i]]
            cx0 = int((min(ax, bx) - self._gx0) // GRID_CELL_M)
            cx1 = int((max(ax, bx) - self._gx0) // GRID_CELL_M)
            cy0 = int((min(ay, by) - self._gy0) // GRID_CELL_M)
            cy1 = int((max(ay, by) - self._gy0) // GRID_CELL_M)
            for cx in range(cx0, cx1 + 1):
                for cy in range(cy0, cy1 + 1):
                    grid.setdefault((cx, cy), []).append(i)
        self._grid = grid

    def links_within(self, center: GeoPoint, radius: float) -> list[tuple[int, tuple[float, float]]]:
        """Directed links intersecting the circle, with the in-circle ratio range.

        Returns (link_index, (t0, t1)) pairs where [t0, t1] is the along-link
        ratio interval inside the circle. Ordered by link index.
        """
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        if self.num_links == 0:
            return []
        cx, cy = self.projection.to_xy(center.lat, center.lon)
        pad = radius + 1.0
        cx0 = int((cx - pad - self._gx0) // GRID_CELL_M)
        cx1 = int((cx + pad - self._gx0) // GRID_CELL_M)
        cy0 = int((cy - pad - self._gy0) // GRID_CELL_M)
        cy1 = int((cy + pad - self._gy0) // GRID_CELL_M)
        cand: set[int] = set()
        for gx in range(cx0, cx1 + 1):
            for gy in range(cy0, cy1 + 1):
                cand.update(self._grid.get((gx, gy), ()))
        out = []
        for i in sorted(cand):
            rng = self._segment_circle(i, cx, cy, radius)
            if rng is not None:
                out.append((i, rng))
        return out

    def _segment_circle(self, link_idx: int, cx: float, cy: float, r: float):
        ax = self.node_x[self.link_from[link_idx]] - cx
        ay = self.node_y[self.link_from[link_idx]] - cy
        bx = self.node_x[self.link_to[link_idx]] - cx
        by = self.node_y[self.link_to[link_idx]] - cy
        dx, dy = bx - ax, by - ay
        aa = dx * dx + dy * dy
        bb = 2.0 * (ax * dx + ay * dy)
        cc = ax * ax + ay * ay - r * r
        if aa == 0.0:
            return None
        disc = bb * bb - 4.0 * aa * cc
        if disc < 0.0:
            return None
        sq = math.sqrt(disc)
        t0 = (-bb - sq) / (2.0 * aa)
        t1 = (-bb + sq) / (2.0 * aa)
        t0, t1 = max(0.0, t0), min(1.0, t1)
        if t0 > t1:
            return None
        return (t0, t1)


def _parse_osm_xml(source) -> tuple[list[RoadNode], list[tuple]]:
    nodes: list[RoadNode] = []
    node_ids: set[int] = set()
    rows: list[tuple] = []
    try:
        for _, elem in ET.iterparse(source, events=("end",)):
            if elem.tag == "node":
                nid = int(elem.get("id"))
                point = GeoPoint(float(elem.get("lat")), float(elem.get("lon")))
                nodes.append(RoadNode(nid, point))
                node_ids.add(nid)
                elem.clear()
            elif elem.tag == "way":
                tags = {t.get("k"): t.get("v") for t in elem.findall("tag")}
                highway = tags.get("highway")
                if highway is None or highway in EXCLUDED_HIGHWAYS:
                    elem.clear()
                    continue
                refs = [int(nd.get("ref")) for nd in elem.findall("nd")]
                for ref in refs:
                    if ref not in node_ids:
                        raise OsmParseError(
                            f"way {elem.get('id')} references missing node {ref}"
                        )
                limit = parse_maxspeed(tags.get("maxspeed"))
                if limit is None:
                    limit = DEFAULT_LIMITS_KMH.get(highway, FALLBACK_LIMIT_KMH) * KMH_TO_MPS
                oneway = tags.get("oneway", "no")
                way_id = int(elem.get("id"))
                for a, b in zip(refs[:-1], refs[1:]):
                    if a == b:
                        continue  # degenerate segment; self-loops are rejected
                    if oneway in ("yes", "true", "1"):
                        rows.append((a, b, limit, way_id))
                    elif oneway == "-1":
                        rows.append((b, a, limit, way_id))
                    else:
                        rows.append((a, b, limit, way_id))
                        rows.append((b, a, limit, way_id))
                elem.clear()
    except ET.ParseError as exc:
        line, col = exc.position
        raise OsmParseError(f"malformed XML at line {line}, column {col}: {exc}") from exc
    return nodes, rows


def parse_osm(source) -> RoadGraph:
    """Parse an OSM XML document (path or file-like) into a RoadGraph.

    Only `node` and `way` elements are read; relations are ignored. Ways
    without a vehicle-capable highway tag are skipped. A way tagged
    oneway=yes yields forward links only, oneway=-1 reversed ones.
    """
    nodes, rows = _parse_osm_xml(source)
    used = set()
    for a, b, _, _ in rows:
        used.add(a)
        used.add(b)
    kept = [n for n in nodes if n.id in used]
    return RoadGraph(kept, rows)
