"""On-graph pose propagation.

A pose is a directed link plus an along-link ratio. Advancing distributes a
traveled distance along the network; when the distance carries the pose
through a junction, the probability mass splits equally over the outgoing
links there, excluding the reverse of the link just traversed (u-turns are
ruled out). Mass that runs into a dead end is reported rather than silently
dropped; the filter layer decides what to do with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geo import GeoPoint
from .roadgraph import RoadGraph


@dataclass(frozen=True)
class PathState:
    """Directed link index plus along-link ratio in [0, 1]."""

    link: int
    ratio: float

    def __post_init__(self):
        if not (0.0 <= self.ratio <= 1.0):
            raise ValueError(f"ratio out of range: {self.ratio}")


@dataclass
class BranchOutcome:
    """One continuation produced by `advance`.

    `lineage` lists the (junction node, split group) events crossed during
    this advance, oldest first; `prob_factor` is the product of the equal
    split shares along the way. `traveled` is the along-link distance from
    the input state, which equals the requested distance for live outcomes.
    """

    state: PathState
    prob_factor: float
    lineage: list[tuple[int, int]] = field(default_factory=list)
    traveled: float = 0.0


@dataclass
class AdvanceResult:
    outcomes: list[BranchOutcome]
    lost_mass: float
    # Branches that ran into a dead end, with the state at the terminal node.
    lost_branches: list[BranchOutcome] = field(default_factory=list)

    def __iter__(self):
        # Allows `outcomes, lost = advance(...)`.
        return iter((self.outcomes, self.lost_mass))


def advance(state: PathState, distance: float, graph: RoadGraph) -> AdvanceResult:
    """Move a pose `distance` meters along the graph, splitting at junctions.

    Arrival exactly at a node counts as crossing it. Returns every reachable
    continuation with its probability share; shares plus lost mass sum to 1.
    """
    if not (distance >= 0.0):
        raise ValueError(f"distance must be nonnegative, got {distance}")
    if state.link < 0 or state.link >= graph.num_links:
        raise ValueError(f"link index {state.link} not in graph")

    result = AdvanceResult([], 0.0)
    if distance == 0.0:
        result.outcomes.append(BranchOutcome(state, 1.0))
        return result

    group_counter = [0]

    def walk(link: int, ratio: float, left: float, prob: float,
             lineage: list[tuple[int, int]], consumed: float):
        length = graph.link_length[link]
        remaining = (1.0 - ratio) * length
        if left < remaining:
            out_ratio = min(1.0, ratio + left / length)
            result.outcomes.append(
                BranchOutcome(
                    PathState(link, out_ratio), prob, lineage,
                    consumed + (out_ratio - ratio) * length,
                )
            )
            return
        left -= remaining
        consumed += remaining
        node = int(graph.link_to[link])
        cont = graph.continuations(link)
        if len(cont) == 0:
            result.lost_mass += prob
            result.lost_branches.append(
                BranchOutcome(PathState(link, 1.0), prob, lineage, consumed)
            )
            return
        group = group_counter[0]
        group_counter[0] += 1
        share = prob / len(cont)
        for nxt in cont:
            branch_lineage = lineage + [(node, group)]
            if left == 0.0:
                result.outcomes.append(
                    BranchOutcome(PathState(int(nxt), 0.0), share, branch_lineage, consumed)
                )
            else:
                walk(int(nxt), 0.0, left, share, branch_lineage, consumed)
        return

    walk(state.link, state.ratio, distance, 1.0, [], 0.0)
    return result


def position_of(state: PathState, graph: RoadGraph) -> GeoPoint:
    """Interpolated position of a pose, in the graph's local projection."""
    a = int(graph.link_from[state.link])
    b = int(graph.link_to[state.link])
    t = state.ratio
    x = graph.node_x[a] + t * (graph.node_x[b] - graph.node_x[a])
    y = graph.node_y[a] + t * (graph.node_y[b] - graph.node_y[a])
    lat, lon = graph.projection.to_latlon(x, y)
    return GeoPoint(lat, lon)
