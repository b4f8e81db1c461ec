"""Dimension distortion numerics for Sobolev maps on metric measure spaces."""

__version__ = "0.1.0"

from .bounds import BoundParams, alpha_max, distortion_bounds, foliation_bound, universal_bound
from .errors import ConfigError, EmptyInputError, ParameterRangeError, SobodimError, SpaceMismatchError
from .measures import DiscreteMeasure, box_dimension, frostman_measure, t_energy
from .metric import Euclidean, Net, Point, PointSet, distance, greedy_cover_count, maximal_separated_net
from .sobolev import RandomSobolevMap, build_construction, level_lp_norms

__all__ = [
    "BoundParams",
    "ConfigError",
    "DiscreteMeasure",
    "EmptyInputError",
    "Euclidean",
    "Net",
    "ParameterRangeError",
    "Point",
    "PointSet",
    "RandomSobolevMap",
    "SobodimError",
    "SpaceMismatchError",
    "alpha_max",
    "box_dimension",
    "build_construction",
    "distance",
    "distortion_bounds",
    "foliation_bound",
    "frostman_measure",
    "greedy_cover_count",
    "level_lp_norms",
    "maximal_separated_net",
    "t_energy",
    "universal_bound",
]
