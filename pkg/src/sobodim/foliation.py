"""Foliation charts, leaf samples and covering-count regularity tables.

Heisenberg charts live in the first Heisenberg group with the horizontal
line ``V = {(x, 0, 0)}``.  Writing ``p = (x, y, t)``:

* left splitting ``p = (0, y, t - 2xy) * (x, 0, 0)``;
* right splitting ``p = (x, 0, 0) * (0, y, t + 2xy)``.

Right cosets ``V * (0, y, tau) = {(x, y, tau - 2xy)}`` are parameterized by
Grushin coordinates ``(u, v) = (y, tau)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .carpet import CARPET, CarpetSpec, carpet_contains
from .errors import EmptyInputError, SpaceMismatchError
from .grushin import DEFAULT_C1, Grushin, GrushinBracket, grushin_bracket, grushin_core
from .heisenberg import HEISENBERG_1, Heisenberg, heis_mul, koranyi_norm, unit_ball_volume
from .metric import (
    Euclidean,
    Point,
    PointSet,
    as_pointset,
    greedy_cover_count,
    maximal_separated_net,
)

KINDS = ("euclidean_projection", "carpet_vertical", "heis_left", "heis_right")


# --------------------------------------------------------------------------
# splittings


def _heis_array(p):
    if isinstance(p, Point):
        if p.space != HEISENBERG_1:
            raise SpaceMismatchError(HEISENBERG_1, p.space)
        return np.array(p.coords, dtype=float), True
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 3:
        raise SpaceMismatchError(HEISENBERG_1, f"{a.shape[-1]}-coordinate input")
    return a, False


def _out(a, as_point):
    return Point(HEISENBERG_1, tuple(float(v) for v in a)) if as_point else a


def project_left(p):
    """``(vperp_part, v_part)`` with ``p = vperp_part * v_part``."""
    a, pt = _heis_array(p)
    x, y, t = a[..., 0], a[..., 1], a[..., 2]
    z = np.zeros_like(x)
    vperp = np.stack([z, y, t - 2.0 * x * y], axis=-1)
    v = np.stack([x, z, z], axis=-1)
    return _out(vperp, pt), _out(v, pt)


def project_right(p):
    """``(v_part, vperp_right_part)`` with ``p = v_part * vperp_right_part``."""
    a, pt = _heis_array(p)
    x, y, t = a[..., 0], a[..., 1], a[..., 2]
    z = np.zeros_like(x)
    v = np.stack([x, z, z], axis=-1)
    vperp = np.stack([z, y, t + 2.0 * x * y], axis=-1)
    return _out(v, pt), _out(vperp, pt)


# --------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class FoliationChart:
    """A projection ``ambient -> parameter space`` whose fibers are the leaves.

    ``heis_left`` projects onto ``V`` (``target="V"``, leaves ``Vperp * a``)
    or onto ``Vperp`` with its Euclidean metric (``target="Vperp"``, leaves
    ``a * V``).  ``heis_right`` projects onto right cosets in Grushin
    coordinates.  ``euclidean_projection`` keeps the coordinates in ``axes``.
    """

    kind: str
    target: str = "V"
    axes: tuple = (0,)
    ambient_dim: int = 2
    carpet: Optional[CarpetSpec] = None
    carpet_depth: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown chart kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "heis_left" and self.target not in ("V", "Vperp"):
            raise ValueError("heis_left target must be 'V' or 'Vperp'")
        if self.kind == "carpet_vertical" and self.carpet is None:
            object.__setattr__(self, "carpet", CarpetSpec())

    @property
    def name(self) -> str:
        if self.kind == "heis_left" and self.target == "Vperp":
            return "heis_left_vperp"
        return self.kind

    @property
    def ambient(self):
        if self.kind == "euclidean_projection":
            return Euclidean(self.ambient_dim)
        if self.kind == "carpet_vertical":
            return CARPET
        return HEISENBERG_1

    @property
    def parameter_space(self):
        if self.kind == "euclidean_projection":
            return Euclidean(len(self.axes))
        if self.kind == "carpet_vertical":
            return Euclidean(1)
        if self.kind == "heis_right":
            return Grushin()
        return Euclidean(1) if self.target == "V" else Euclidean(2)

    def project(self, coords) -> np.ndarray:
        """Parameter coordinates of ambient points, shape ``(m, k)``."""
        c = np.atleast_2d(np.asarray(coords, dtype=float))
        if c.shape[1] != self.ambient.dim:
            raise SpaceMismatchError(self.ambient, f"{c.shape[1]}-coordinate input")
        if self.kind == "euclidean_projection":
            return c[:, list(self.axes)]
        if self.kind == "carpet_vertical":
            return c[:, :1]
        if self.kind == "heis_right":
            return project_right(c)[1][:, 1:]
        if self.target == "V":
            return c[:, :1]
        return project_left(c)[0][:, 1:]

    def parameter_dist(self, a, b):
        return self.parameter_space.dist(a, b)

    def parameter_of(self, a) -> np.ndarray:
        """Validate a parameter point given as a chart point or ambient representative."""
        arr = np.asarray(a.coords if isinstance(a, Point) else a, dtype=float).reshape(-1)
        k = self.parameter_space.dim
        if arr.shape[0] == k:
            return arr
        if self.kind in ("heis_left", "heis_right") and arr.shape[0] == 3:
            if self.kind == "heis_left" and self.target == "V":
                if arr[1] != 0 or arr[2] != 0:
                    raise ValueError(f"{arr.tolist()} is not in V")
                return arr[:1]
            if arr[0] != 0:
                raise ValueError(f"{arr.tolist()} is not in Vperp")
            return arr[1:]
        raise ValueError(f"parameter point {arr.tolist()} not in {self.parameter_space}")


def leaf_sample(chart: FoliationChart, a, param_grid) -> PointSet:
    """Points of the leaf over ``a``, one per entry of ``param_grid``.

    ``heis_right``: grid of ``x``, points ``(x, y, tau - 2xy)``.
    ``heis_left`` onto ``V``: grid of ``(y, s)`` pairs, points ``(0, y, s) * a``.
    ``heis_left`` onto ``Vperp``: grid of ``x``, points ``a * (x, 0, 0)``.
    ``carpet_vertical``: grid of heights, kept where the carpet contains them.
    ``euclidean_projection``: grid of the remaining coordinates.
    """
    par = chart.parameter_of(a)
    grid = np.asarray(param_grid, dtype=float)
    if chart.kind == "heis_right":
        x = grid.reshape(-1)
        y, tau = par
        pts = np.column_stack([x, np.full_like(x, y), tau - 2.0 * x * y])
    elif chart.kind == "heis_left" and chart.target == "V":
        g = grid.reshape(-1, 2)
        w = np.column_stack([np.zeros(len(g)), g])
        pts = heis_mul(w, np.array([par[0], 0.0, 0.0]))
    elif chart.kind == "heis_left":
        x = grid.reshape(-1)
        base = np.array([0.0, par[0], par[1]])
        pts = heis_mul(base, np.column_stack([x, np.zeros_like(x), np.zeros_like(x)]))
    elif chart.kind == "carpet_vertical":
        if not 0.0 <= par[0] <= 1.0:
            raise ValueError("carpet parameter must lie in [0, 1]")
        y = grid.reshape(-1)
        pts = np.column_stack([np.full_like(y, par[0]), y])
        pts = pts[carpet_contains(chart.carpet, pts, chart.carpet_depth)]
    else:
        rest = [j for j in range(chart.ambient_dim) if j not in chart.axes]
        g = grid.reshape(len(grid), -1) if grid.ndim > 1 else grid[:, None]
        pts = np.zeros((len(g), chart.ambient_dim))
        pts[:, list(chart.axes)] = par
        pts[:, rest] = g
    return PointSet(chart.ambient, pts)


# --------------------------------------------------------------------------
# compact regions sampled on demand


class Region:
    """A compact set ``K`` sampled near the preimages of parameter balls."""

    id: str = "region"

    def contains(self, coords) -> np.ndarray:
        raise NotImplementedError

    def parameter_centers(self, chart: FoliationChart) -> np.ndarray:
        raise NotImplementedError

    def preimage(self, chart: FoliationChart, a, r, rng) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class SampleRegion(Region):
    """A fixed finite sample standing for ``K``."""

    points: PointSet
    param_spacing: float = 0.125
    id: str = "sample"

    def contains(self, coords):
        raise NotImplementedError("a finite sample has no membership test")

    def parameter_centers(self, chart):
        proj = PointSet(chart.parameter_space, chart.project(self.points.coords))
        return maximal_separated_net(proj, self.param_spacing).centers.coords

    def preimage(self, chart, a, r, rng):
        proj = chart.project(self.points.coords)
        return self.points.coords[chart.parameter_dist(proj, a) < r]


@dataclass(frozen=True)
class CarpetRegion(Region):
    """The carpet itself, sampled uniformly in vertical strips."""

    spec: CarpetSpec = field(default_factory=CarpetSpec)
    depth: int = 4
    points_per_ball: float = 8.0
    param_spacing: float = 0.125

    @property
    def id(self):
        return f"carpet({self.spec.sequence},depth={self.depth})"

    def contains(self, coords):
        c = np.atleast_2d(coords)
        inside = np.all((c >= 0) & (c <= 1), axis=1)
        out = np.zeros(len(c), dtype=bool)
        out[inside] = carpet_contains(self.spec, c[inside], self.depth)
        return out

    def parameter_centers(self, chart):
        if chart.kind != "carpet_vertical":
            raise ValueError("CarpetRegion supports the carpet_vertical chart")
        k = int(round(1.0 / self.param_spacing))
        return ((np.arange(k) + 0.5) / k)[:, None]

    def preimage(self, chart, a, r, rng):
        lo, hi = max(0.0, a[0] - r), min(1.0, a[0] + r)
        count = int(math.ceil(self.points_per_ball * (hi - lo) / (math.pi * r * r)))
        pts = np.column_stack([lo + (hi - lo) * rng.random(count), rng.random(count)])
        pts = pts[np.abs(pts[:, 0] - a[0]) < r]
        return pts[self.contains(pts)]


@dataclass(frozen=True)
class KoranyiBallRegion(Region):
    """The closed Korányi ball ``{||p|| <= radius}`` in the first Heisenberg group.

    Preimages are sampled uniformly (Lebesgue) with about
    ``points_per_ball`` points per Korányi ball of the query radius, so the
    sampling density is invariant under dilations.
    """

    radius: float = 1.0
    points_per_ball: float = 4.0
    param_spacing: float = 0.25  # relative to the radius

    @property
    def id(self):
        return f"koranyi_ball(radius={self.radius!r})"

    def contains(self, coords):
        return koranyi_norm(np.atleast_2d(coords)) <= self.radius

    def parameter_centers(self, chart):
        R = self.radius
        h = self.param_spacing * R
        if chart.kind == "heis_left" and chart.target == "V":
            k = int(math.floor(R / h))
            return (np.arange(-k, k + 1) * h)[:, None]
        if chart.kind == "heis_left":
            ky, kt = int(math.floor(R / h)), int(math.floor(R * R / h))
            return np.array([(i * h, j * h) for i in range(-ky, ky + 1) for j in range(-kt, kt + 1)])
        if chart.kind == "heis_right":
            # Grushin grid: u = y in [-R, R], v = tau in [-3R^2, 3R^2] covers pi(K)
            ku = int(math.floor(R / h))
            kv = int(math.floor(3 * R / h))
            us = np.arange(-ku, ku + 1) * h
            vs = np.arange(-kv, kv + 1) * h * R
            pts = np.array([(u, v) for u in us for v in vs])
            return pts[self._param_hit(chart, pts)]
        raise ValueError(f"KoranyiBallRegion does not support {chart.kind}")

    def _param_hit(self, chart, params):
        """Parameters whose leaf meets the ball (checked on a fine leaf grid)."""
        xs = np.linspace(-self.radius, self.radius, 401)
        keep = []
        for u, v in params:
            leaf = np.column_stack([xs, np.full_like(xs, u), v - 2.0 * xs * u])
            keep.append(bool(np.any(self.contains(leaf))))
        return np.array(keep, dtype=bool)

    def _budget(self, volume, r):
        return int(math.ceil(self.points_per_ball * volume / (unit_ball_volume() * r ** 4)))

    def preimage(self, chart, a, r, rng):
        R = self.radius
        if chart.kind == "heis_left" and chart.target == "V":
            lo, hi = max(-R, a[0] - r), min(R, a[0] + r)
            if hi <= lo:
                return np.empty((0, 3))
            n = self._budget((hi - lo) * 2 * R * 2 * R * R, r)
            p = np.column_stack([
                rng.uniform(lo, hi, n), rng.uniform(-R, R, n), rng.uniform(-R * R, R * R, n)
            ])
            p = p[np.abs(p[:, 0] - a[0]) < r]
        elif chart.kind == "heis_right":
            u0, v0 = a
            h = max(r * r, r * (abs(u0) + r))
            n = self._budget(2 * R * 2 * r * 2 * h, r)
            x = rng.uniform(-R, R, n)
            u = rng.uniform(u0 - r, u0 + r, n)
            v = rng.uniform(v0 - h, v0 + h, n)
            near = grushin_core(np.column_stack([u, v]), np.asarray(a)) < r
            x, u, v = x[near], u[near], v[near]
            p = np.column_stack([x, u, v - 2.0 * x * u])
        elif chart.kind == "heis_left":
            y0, s0 = a
            n = self._budget(2 * R * 2 * r * 2 * r, r)
            x = rng.uniform(-R, R, n)
            y = rng.uniform(y0 - r, y0 + r, n)
            s = rng.uniform(s0 - r, s0 + r, n)
            near = (y - y0) ** 2 + (s - s0) ** 2 < r * r
            x, y, s = x[near], y[near], s[near]
            p = np.column_stack([x, y, s + 2.0 * x * y])
        else:
            raise ValueError(f"KoranyiBallRegion does not support {chart.kind}")
        return p[self.contains(p)]


# --------------------------------------------------------------------------
# regularity tables


@dataclass(frozen=True)
class RegularityTable:
    chart: str
    s: float
    K_id: str
    r: tuple
    N: tuple
    normalized: tuple  # N(r) r^s
    centers_used: int = 0
    points_used: tuple = ()
    notes: tuple = ()

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.r, self.r[1:])):
            raise ValueError("r must be strictly decreasing")

    @property
    def window(self) -> float:
        vals = [v for v in self.normalized if v > 0]
        return max(vals) / min(vals) if vals else math.inf

    def rows(self):
        return [
            (r, n, v, self.chart, self.s, self.K_id)
            for r, n, v in zip(self.r, self.N, self.normalized)
        ]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "N", "N_r_pow_s", "chart", "s", "K_id"])
            for r, n, v, c, s, k in self.rows():
                w.writerow([repr(float(r)), int(n), repr(float(v)), c, repr(float(s)), k])


def _rng(seed, *keys):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def ds_regularity_table(
    chart: FoliationChart,
    K,
    s: float,
    r_grid: Sequence[float],
    seed: int = 0,
    centers: Optional[np.ndarray] = None,
) -> RegularityTable:
    """Worst-case cover counts of ``K`` intersected with preimages of parameter balls.

    ``K`` is a :class:`Region` or a point sample.  For every radius ``r`` and
    every parameter center ``a`` the points of ``K`` projecting into
    ``B(a, r)`` are covered greedily by ``r``-balls of the ambient metric;
    ``N(r)`` is the largest count over the centers.
    """
    region = K if isinstance(K, Region) else SampleRegion(as_pointset(K))
    radii = np.sort(np.asarray(r_grid, dtype=float))[::-1]
    if len(radii) == 0 or np.any(radii <= 0):
        raise ValueError("r_grid must hold positive radii")
    if centers is None:
        centers = region.parameter_centers(chart)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] == 0:
        raise EmptyInputError("no parameter centers")
    N, used, notes = [], [], []
    for k, r in enumerate(radii):
        worst, pts_max = 0, 0
        for c, a in enumerate(centers):
            pts = region.preimage(chart, a, r, _rng(seed, k, c))
            if len(pts) == 0:
                notes.append(f"r={r!r}: empty preimage at {a.tolist()}")
                continue
            count = greedy_cover_count(PointSet(chart.ambient, pts), r).count
            if count > worst:
                worst, pts_max = count, len(pts)
        if worst == 0:
            raise EmptyInputError(f"every preimage empty at r={r!r}")
        N.append(worst)
        used.append(pts_max)
    normalized = tuple(float(n * r ** s) for n, r in zip(N, radii))
    return RegularityTable(
        chart.name, float(s), region.id, tuple(radii.tolist()), tuple(N), normalized,
        len(centers), tuple(used), tuple(notes),
    )


# --------------------------------------------------------------------------
# right-coset quotient distance


@dataclass(frozen=True)
class QuotientDistance:
    value: float
    argmin: float
    bracket: GrushinBracket
    coarse: bool = False

    @property
    def ratio(self) -> float:
        """Quotient distance over the Grushin core (``nan`` when both vanish)."""
        if self.bracket.core == 0:
            return math.nan if self.value == 0 else math.inf
        return self.value / self.bracket.core


def _coset_param(a):
    arr = np.asarray(a.coords if isinstance(a, Point) else a, dtype=float).reshape(-1)
    if arr.shape[0] == 2:
        return float(arr[0]), float(arr[1])
    if arr.shape[0] == 3:
        if arr[0] != 0:
            raise ValueError("coset parameters have the form (0, y, tau)")
        return float(arr[1]), float(arr[2])
    raise ValueError("coset parameters have the form (0, y, tau) or (y, tau)")


def coset_quotient_distance(a1, a2, anchor: float = 0.0, C1: float = DEFAULT_C1,
                            tol: float = 1e-12) -> QuotientDistance:
    """``inf_x ||((x, 0, 0) * q)^-1 * (0, y2, tau2)||`` over the coset of ``a1``.

    ``q = (anchor, 0, 0) * (0, y1, tau1)`` is the representative the search
    starts from; the value does not depend on it.  The fourth power of the
    norm is convex in the search variable, so a bounded scalar search on
    ``|s + anchor| <= f(-anchor)^(1/4)`` finds the minimum; a dense grid is
    the fallback.
    """
    y1, tau1 = _coset_param(a1)
    y2, tau2 = _coset_param(a2)
    dy, dtau, ysum = y2 - y1, tau2 - tau1, y1 + y2

    def f(s):
        x = anchor + s
        return (x * x + dy * dy) ** 2 + (dtau + 2.0 * x * ysum) ** 2

    bracket = grushin_bracket((y1, tau1), (y2, tau2), C1)
    f0 = f(-anchor)
    if f0 == 0:
        return QuotientDistance(0.0, 0.0, bracket)
    half = f0 ** 0.25
    lo, hi = -anchor - half, -anchor + half
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                          options={"xatol": tol * (1.0 + half + abs(anchor))})
    coarse = not res.success
    if coarse:
        grid = np.linspace(lo, hi, 100001)
        vals = f(grid)
        k = int(np.argmin(vals))
        s_best, f_best = float(grid[k]), float(vals[k])
    else:
        s_best, f_best = float(res.x), float(res.fun)
    f_best = min(f_best, f0)
    return QuotientDistance(f_best ** 0.25, anchor + s_best, bracket, coarse)
