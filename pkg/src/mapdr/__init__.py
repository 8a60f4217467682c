"""Map-aided dead reckoning: tracking a vehicle on a road network from
speed measurements alone, with a splitting particle filter."""

__version__ = "0.1.0"

from .geo import GeoPoint, geodesic_distance, initial_bearing, wrap_angle
from .motion import PathState, advance, position_of
from .params import FilterParams, load_config
from .roadgraph import RoadGraph, parse_osm
from .stepcore import BACKEND

__all__ = [
    "GeoPoint",
    "geodesic_distance",
    "initial_bearing",
    "wrap_angle",
    "PathState",
    "advance",
    "position_of",
    "FilterParams",
    "load_config",
    "RoadGraph",
    "parse_osm",
    "BACKEND",
    "__version__",
]
