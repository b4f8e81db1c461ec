"""Fat Sierpiński carpets with their natural (equal-split) measure.

At level k every retained cell is divided into ``a_k x a_k`` subcells and the
central one is removed.  Cells are half-open ``[i/a, (i+1)/a)`` per axis, with
the closing edge ``1`` of the unit square assigned to the last cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .measures import DiscreteMeasure
from .metric import Euclidean, PointSet


@dataclass(frozen=True)
class CarpetPlane(Euclidean):
    """The unit square with Euclidean distance, tagged as carpet points."""

    n: int = 2

    @property
    def tag(self):
        return "carpet"

    def __str__(self):
        return self.tag


CARPET = CarpetPlane()


@dataclass(frozen=True)
class CarpetSpec:
    sequence: Union[str, tuple] = "2n+1"
    max_depth: int = 4

    def __post_init__(self):
        if isinstance(self.sequence, list):
            object.__setattr__(self, "sequence", tuple(int(a) for a in self.sequence))
        if isinstance(self.sequence, str) and self.sequence.replace(" ", "") != "2n+1":
            raise ValueError(f"unknown carpet generator {self.sequence!r}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if isinstance(self.sequence, tuple):
            if len(self.sequence) < self.max_depth:
                raise ValueError("explicit sequence shorter than max_depth")
            for a in self.sequence:
                if a < 3 or a % 2 == 0:
                    raise ValueError("carpet factors must be odd integers >= 3")

    def factor(self, k: int) -> int:
        """``a_k`` for level ``k >= 1``."""
        if k < 1:
            raise ValueError("levels start at 1")
        if isinstance(self.sequence, tuple):
            return int(self.sequence[k - 1])
        return 2 * k + 1

    def factors(self, depth: int) -> list:
        return [self.factor(k) for k in range(1, depth + 1)]

    def partial_sums(self, depth: int) -> np.ndarray:
        """Partial sums of ``a_k^-2`` for auditing summability."""
        return np.cumsum([a ** -2.0 for a in self.factors(depth)])

    def cell_count(self, depth: int) -> int:
        return math.prod(a * a - 1 for a in self.factors(depth))

    def side(self, depth: int) -> float:
        return 1.0 / math.prod(self.factors(depth))

    def to_json(self) -> str:
        seq = self.sequence if isinstance(self.sequence, str) else list(self.sequence)
        return json.dumps({"sequence": seq, "max_depth": self.max_depth})

    @classmethod
    def from_json(cls, text: Union[str, dict]) -> "CarpetSpec":
        data = json.loads(text) if isinstance(text, str) else dict(text)
        seq = data.get("sequence", "2n+1")
        if isinstance(seq, list):
            seq = tuple(seq)
        return cls(seq, int(data.get("max_depth", 4)))


def carpet_address(spec: CarpetSpec, p, depth: int) -> np.ndarray:
    """Per-level cell indices ``(i, j)`` of points ``p`` (shape ``(..., depth, 2)``)."""
    if depth > spec.max_depth:
        raise ValueError("depth exceeds spec.max_depth")
    u = np.array(p, dtype=float, copy=True)
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("point outside the unit square")
    digits = []
    for a in spec.factors(depth):
        v = u * a
        idx = np.minimum(np.floor(v), a - 1)
        digits.append(idx.astype(np.int64))
        u = v - idx
    return np.stack(digits, axis=-2)


def carpet_contains(spec: CarpetSpec, p, depth: int):
    """True where no level up to ``depth`` selects a removed central cell."""
    addr = carpet_address(spec, p, depth)
    centers = np.array([(a - 1) // 2 for a in spec.factors(depth)])
    central = np.all(addr == centers[:, None], axis=-1)
    out = ~np.any(central, axis=-1)
    return bool(out) if np.ndim(out) == 0 else out


def _retained_digits(a: int) -> np.ndarray:
    c = (a - 1) // 2
    ij = np.array([(i, j) for i in range(a) for j in range(a) if not (i == c and j == c)])
    return ij


def carpet_cells(spec: CarpetSpec, depth: int):
    """All retained depth-``depth`` cells: ``(lower_left, digits, side)``."""
    if depth > spec.max_depth:
        raise ValueError("depth exceeds spec.max_depth")
    corners = np.zeros((1, 2))
    digits = np.zeros((1, 0, 2), dtype=np.int64)
    side = 1.0
    for a in spec.factors(depth):
        kids = _retained_digits(a)
        side /= a
        corners = (corners[:, None, :] + side * kids[None, :, :]).reshape(-1, 2)
        digits = np.concatenate(
            [np.repeat(digits, len(kids), axis=0), np.tile(kids, (len(digits), 1))[:, None, :]],
            axis=1,
        )
    return corners, digits, side


def _rng(seed: int, shard: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(shard)])))


def carpet_sample(
    spec: CarpetSpec, depth: int, count: int = 0, rng_seed: int = 0, shard: int = 0
):
    """Cell-center sample of the natural measure at ``depth``.

    ``count <= 0`` or ``count >= cell_count`` enumerates every retained cell
    with mass ``prod_k (a_k^2 - 1)^-1``.  Otherwise ``count`` cells are drawn
    by equal-probability descent and weighted ``1/count``.
    """
    if depth > spec.max_depth:
        raise ValueError("depth exceeds spec.max_depth")
    total = spec.cell_count(depth)
    if count <= 0 or count >= total:
        corners, digits, side = carpet_cells(spec, depth)
        weights = np.full(len(corners), 1.0 / total)
    else:
        rng = _rng(rng_seed, shard)
        corners = np.zeros((count, 2))
        digits = np.zeros((count, depth, 2), dtype=np.int64)
        side = 1.0
        for k, a in enumerate(spec.factors(depth)):
            kids = _retained_digits(a)
            pick = kids[rng.integers(0, len(kids), size=count)]
            side /= a
            corners += side * pick
            digits[:, k, :] = pick
        weights = np.full(count, 1.0 / count)
    centers = corners + side / 2.0
    pts = PointSet(CARPET, centers, digits)
    return pts, DiscreteMeasure(pts, weights)


def carpet_uniform_points(spec: CarpetSpec, depth: int, count: int, rng: np.random.Generator):
    """Uniform points of ``[0,1]^2`` kept when they lie in the depth-``depth`` carpet."""
    pts = rng.random((count, 2))
    return pts[carpet_contains(spec, pts, depth)]
