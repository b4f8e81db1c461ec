"""Grushin plane, represented only through its two-sided distance bracket.

No geodesic solver is provided: the comparison quantity

    core = max(|u1 - u2|, min(sqrt|v1 - v2|, |v1 - v2| / max(|u1|, |u2|)))

(with the quotient read as +inf when u1 = u2 = 0) brackets the CC distance
between ``core / C1`` and ``C1 * core``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import Point, Space

DEFAULT_C1 = 3.0


def grushin_core(w1, w2):
    a = np.asarray(w1.coords if isinstance(w1, Point) else w1, dtype=float)
    b = np.asarray(w2.coords if isinstance(w2, Point) else w2, dtype=float)
    du = np.abs(a[..., 0] - b[..., 0])
    dv = np.abs(a[..., 1] - b[..., 1])
    umax = np.maximum(np.abs(a[..., 0]), np.abs(b[..., 0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(umax > 0, dv / np.where(umax > 0, umax, 1.0), np.inf)
    return np.maximum(du, np.minimum(np.sqrt(dv), quot))


@dataclass(frozen=True)
class Grushin(Space):
    """Grushin coordinates ``(u, v)``; ``dist`` returns the bracket core.

    The core is comparable to the CC distance but is only a quasi-metric, so
    triangle-inequality based reasoning must carry the bracket constant.
    """

    @property
    def dim(self):
        return 2

    @property
    def tag(self):
        return "grushin"

    def dist(self, a, b):
        return grushin_core(a, b)

    def search_widths(self, coords, radius):
        coords = np.asarray(coords, dtype=float)
        R = float(np.abs(coords[:, 0]).max()) if len(coords) else 0.0
        r = float(radius)
        return np.array([r, max(r * r, r * R)])

    def __str__(self):
        return self.tag


@dataclass(frozen=True)
class GrushinBracket:
    lower: float
    upper: float
    core: float
    C1: float


def grushin_bracket(w1, w2, C1: float = DEFAULT_C1) -> GrushinBracket:
    if C1 < 1:
        raise ValueError("bracket constant C1 must be >= 1")
    core = float(grushin_core(w1, w2))
    return GrushinBracket(lower=core / C1, upper=C1 * core, core=core, C1=float(C1))
