"""Deterministic synthetic road maps, written as OSM XML.

Two stock layouts. Map A is a jittered lattice with two arterial corridors
per axis, mixed speed limits (30/50/90 km/h) and bent local streets: routes
are distinguishable by their limit and curvature signatures, which is the
favorable regime for speed-only tracking. Map B is a perfect uniform grid
with one shared limit and straight links: junctions carry no information at
all, so probability mass keeps spreading.
"""

from __future__ import annotations

import io
import math

import numpy as np

from .geo import EARTH_RADIUS_M

ORIGIN_LAT = 45.0
ORIGIN_LON = 7.0


def _to_latlon(x: float, y: float) -> tuple[float, float]:
    lat = ORIGIN_LAT + math.degrees(y / EARTH_RADIUS_M)
    lon = ORIGIN_LON + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(ORIGIN_LAT))))
    return lat, lon


def write_osm_xml(nodes: dict[int, tuple[float, float]], ways: list[tuple[int, list[int], dict]]) -> str:
    """Render nodes {id: (lat, lon)} and ways (id, node ids, tags) as OSM XML."""
    buf = io.StringIO()
    buf.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    buf.write('<osm version="0.6" generator="mapdr">\n')
    for nid in sorted(nodes):
        lat, lon = nodes[nid]
        buf.write(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}"/>\n')
    for wid, refs, tags in ways:
        buf.write(f'  <way id="{wid}">\n')
        for ref in refs:
            buf.write(f'    <nd ref="{ref}"/>\n')
        for k, v in tags.items():
            buf.write(f'    <tag k="{k}" v="{v}"/>\n')
        buf.write("  </way>\n")
    buf.write("</osm>\n")
    return buf.getvalue()


def build_map_a(seed: int = 20240, size: int = 6, spacing: float = 700.0) -> str:
    """Jittered lattice with arterial corridors and mixed-limit locals.

    Every street is a three-segment polyline: short segments flank the
    junctions (the way digitized OSM corners look, giving junction turns a
    genuine curvature feature that slows drivers down) around one long
    middle segment that holds most of the street. Default size gives about
    360 directed links.
    """
    rng = np.random.default_rng(seed)
    end_len = 45.0
    # Fast corridors with pairwise-distinct limits carry most driving: at
    # those cruise speeds a branch that turns off implies an implausible
    # lateral force and dies, so probability mass stays concentrated, and
    # the filter cannot observe absolute direction so corridors sharing a
    # limit would be interchangeable. Local streets get mixed lower tiers,
    # greedily keeping the streets at each junction distinct.
    arterial_rows = {1: 90, 4: 70}
    arterial_cols = {1: 80, 4: 100}
    local_limits = (30, 50, 60)
    node_limits: dict[tuple[int, int], list[int]] = {}

    nodes: dict[int, tuple[float, float]] = {}
    coords: dict[tuple[int, int], tuple[float, float]] = {}
    nid = 1
    grid_id: dict[tuple[int, int], int] = {}
    for j in range(size):
        for i in range(size):
            x = i * spacing + float(rng.uniform(-150.0, 150.0))
            y = j * spacing + float(rng.uniform(-150.0, 150.0))
            coords[(i, j)] = (x, y)
            nodes[nid] = _to_latlon(x, y)
            grid_id[(i, j)] = nid
            nid += 1

    ways: list[tuple[int, list[int], dict]] = []
    wid = 1000

    def add_point(x: float, y: float) -> int:
        nonlocal nid
        nodes[nid] = _to_latlon(x, y)
        nid += 1
        return nid - 1

    def add_edge(a: tuple[int, int], b: tuple[int, int], horizontal: bool):
        nonlocal wid
        on_row = horizontal and a[1] in arterial_rows
        on_col = (not horizontal) and a[0] in arterial_cols
        if on_row or on_col:
            limit = arterial_rows[a[1]] if on_row else arterial_cols[a[0]]
        else:
            taken_a = node_limits.setdefault(a, [])
            taken_b = node_limits.setdefault(b, [])
            scores = [taken_a.count(lim) + taken_b.count(lim) for lim in local_limits]
            best = min(scores)
            options = [lim for lim, sc in zip(local_limits, scores) if sc == best]
            limit = int(options[rng.integers(len(options))])
            taken_a.append(limit)
            taken_b.append(limit)
        ax, ay = coords[a]
        bx, by = coords[b]
        dx, dy = bx - ax, by - ay
        norm = math.hypot(dx, dy)
        ux, uy = dx / norm, dy / norm
        px, py = -uy, ux
        off_a = float(rng.uniform(-18.0, 18.0))
        off_b = float(rng.uniform(-18.0, 18.0))
        n_a1 = add_point(ax + ux * end_len + px * off_a, ay + uy * end_len + py * off_a)
        n_b1 = add_point(bx - ux * end_len + px * off_b, by - uy * end_len + py * off_b)
        ways.append((wid, [grid_id[a], n_a1, n_b1, grid_id[b]], {
            "highway": "primary" if limit >= 70 else "residential",
            "maxspeed": str(limit),
        }))
        wid += 1

    for j in range(size):
        for i in range(size - 1):
            add_edge((i, j), (i + 1, j), horizontal=True)
    for i in range(size):
        for j in range(size - 1):
            add_edge((i, j), (i, j + 1), horizontal=False)

    return write_osm_xml(nodes, ways)


def build_map_b(size: int = 43, block_m: float = 150.0, limit_kmh: int = 30) -> str:
    """Uniform grid, identical limits, straight links: maximally ambiguous."""
    nodes: dict[int, tuple[float, float]] = {}
    grid_id: dict[tuple[int, int], int] = {}
    nid = 1
    for j in range(size):
        for i in range(size):
            nodes[nid] = _to_latlon(i * block_m, j * block_m)
            grid_id[(i, j)] = nid
            nid += 1
    ways = []
    wid = 1
    tags = {"highway": "residential", "maxspeed": str(limit_kmh)}
    for j in range(size):
        for i in range(size - 1):
            ways.append((wid, [grid_id[(i, j)], grid_id[(i + 1, j)]], dict(tags)))
            wid += 1
    for i in range(size):
        for j in range(size - 1):
            ways.append((wid, [grid_id[(i, j)], grid_id[(i, j + 1)]], dict(tags)))
            wid += 1
    return write_osm_xml(nodes, ways)
