"""Reference fractal samples with their natural measures."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .measures import DiscreteMeasure
from .metric import Euclidean, PointSet


def cantor_points(depth: int, ratio: float = 1.0 / 3.0, copies: int = 2) -> np.ndarray:
    """Left endpoints of the depth-``depth`` intervals of a uniform Cantor set.

    ``copies`` subintervals of length ``ratio`` are kept at each step, equally
    spaced with the outer ones touching the ends of the parent interval.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if copies < 2 or not 0 < ratio * copies <= 1:
        raise ValueError("need copies >= 2 and copies * ratio <= 1")
    step = (1.0 - ratio) / (copies - 1)
    pts = np.zeros(1)
    scale = 1.0
    for _ in range(depth):
        pts = (pts[:, None] + scale * step * np.arange(copies)[None, :]).ravel()
        scale *= ratio
    return pts


def cantor_set(depth: int) -> DiscreteMeasure:
    """Middle-thirds Cantor set at ``depth`` with weights ``2^-depth``."""
    x = cantor_points(depth)
    return DiscreteMeasure(PointSet(Euclidean(1), x[:, None]), np.full(len(x), 2.0 ** -depth))


def cantor_dust(depth: int, ratio: float = 0.25) -> DiscreteMeasure:
    """Planar four-corner Cantor dust, the square of a two-piece Cantor set.

    With ``ratio = 1/4`` the dust has dimension ``log 4 / log 4 = 1``.
    Atoms are the lower-left corners of the depth-``depth`` squares.
    """
    x = cantor_points(depth, ratio)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return DiscreteMeasure(PointSet(Euclidean(2), pts), np.full(len(pts), 4.0 ** -depth))


def cantor_dust_dimension(ratio: float = 0.25) -> float:
    return math.log(4.0) / math.log(1.0 / ratio)


def uniform_square(count: int, rng: np.random.Generator, dim: int = 2) -> PointSet:
    return PointSet(Euclidean(dim), rng.random((count, dim)))


def grid_points(count_per_axis: int, dim: int = 1) -> PointSet:
    axis = np.linspace(0.0, 1.0, count_per_axis)
    pts = np.array(list(itertools.product(axis, repeat=dim)))
    return PointSet(Euclidean(dim), pts)
