"""Discrete measures, Frostman weights, Riesz energies and dimension proxies."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInputError, SpaceMismatchError
from .metric import (
    Euclidean,
    PointSet,
    as_pointset,
    greedy_cover_count,
    maximal_separated_net,
    nested_nets,
    pairs_within,
    sample_extent,
    space_from_tag,
)

log = logging.getLogger(__name__)

_PAIR_BUDGET = 1 << 23
# default number of audited ball centers in frostman_measure
AUDIT_CENTERS = 1024


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    atoms: PointSet
    weights: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if w.shape[0] != len(self.atoms):
            raise ValueError("one weight per atom required")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "total_mass", math.fsum(w))

    @property
    def space(self):
        return self.atoms.space

    def __len__(self):
        return len(self.weights)

    def ball_mass(self, center, r):
        """``nu(B(center, r))`` for one center (open ball)."""
        d = self.space.dist(self.atoms.coords, np.asarray(center, dtype=float))
        return math.fsum(self.weights[d < r])

    def ball_masses(self, centers, radii):
        """Masses of open balls ``B(centers[k], radii[k])``."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
        out = np.zeros(len(centers))
        X, w = self.atoms.coords, self.weights
        if len(centers) == 0 or len(X) == 0:
            return out
        if len(X) * len(centers) > _PAIR_BUDGET:
            widths = self.space.search_widths(np.vstack([X, centers]), float(radii.max()))
            sparse = False
            if widths is not None and np.all(np.asarray(widths) > 0):
                tree = cKDTree(X / np.asarray(widths, dtype=float))
                hits = tree.query_ball_point(
                    centers / np.asarray(widths, dtype=float), 1.0 + 1e-9, p=np.inf,
                    return_length=True,
                )
                sparse = hits.sum() < 0.1 * len(X) * len(centers)
            if not sparse:
                # large balls: dense blocks, no pair lists
                step = max(1, _PAIR_BUDGET // len(X))
                for start in range(0, len(centers), step):
                    blk = centers[start:start + step]
                    d = self.space.cross_dist(blk, X)
                    out[start:start + len(blk)] = (d < radii[start:start + len(blk), None]) @ w
                return out
        i, j, _ = pairs_within(self.space, X, centers, radii)
        np.add.at(out, j, w[i])
        return out

    def pushforward(self, f, space=None) -> "DiscreteMeasure":
        """Image measure: atoms mapped by ``f`` (array -> array), weights kept."""
        image = np.asarray(f(self.atoms.coords), dtype=float)
        if image.ndim == 1:
            image = image[:, None]
        target = space or Euclidean(image.shape[1])
        return DiscreteMeasure(PointSet(target, image), self.weights)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms, self.weights * factor)


def counting_measure(points, total: float = 1.0) -> DiscreteMeasure:
    pts = as_pointset(points)
    if len(pts) == 0:
        raise EmptyInputError()
    return DiscreteMeasure(pts, np.full(len(pts), total / len(pts)))


def write_measure_csv(path, measure: DiscreteMeasure) -> None:
    pts = measure.atoms
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["space"] + [f"coord{j}" for j in range(pts.space.dim)] + ["weight"])
        for row, wt in zip(pts.coords, measure.weights):
            w.writerow([pts.space.tag] + [repr(float(v)) for v in row] + [repr(float(wt))])


def read_measure_csv(path) -> DiscreteMeasure:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise EmptyInputError(str(path))
    header, body = rows[0], rows[1:]
    ncoord = sum(1 for h in header if h.startswith("coord"))
    space = space_from_tag(body[0][0])
    for r in body:
        if space_from_tag(r[0]) != space:
            raise SpaceMismatchError(space, r[0])
    coords = np.array([[float(v) for v in r[1:1 + ncoord]] for r in body])
    weights = np.array([float(r[1 + ncoord]) for r in body])
    return DiscreteMeasure(PointSet(space, coords), weights)


# --------------------------------------------------------------------------
# Frostman measures


@dataclass(frozen=True, eq=False)
class FrostmanResult:
    measure: DiscreteMeasure
    constant: float
    s: float
    scales: np.ndarray
    audit_radii: np.ndarray
    degenerate: bool
    nets: list

    @property
    def flags(self):
        return ["degenerate: content ≈ 0"] if self.degenerate else []


def frostman_audit(measure: DiscreteMeasure, s: float, radii, centers=None):
    """Smallest ``C`` with ``nu(B(x, r)) <= C r^s`` over the audited balls.

    Balls are centered at ``centers`` (default: the atoms) for every radius.
    Returns ``(C, ratios)`` with ``ratios[k, j]`` for center ``k``, radius ``j``.
    """
    radii = np.asarray(radii, dtype=float)
    if centers is None:
        centers = measure.atoms.coords
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    ratios = np.empty((len(centers), len(radii)))
    for j, r in enumerate(radii):
        ratios[:, j] = measure.ball_masses(centers, np.full(len(centers), r)) / r ** s
    return float(ratios.max()) if ratios.size else 0.0, ratios


def frostman_measure(
    sample,
    s: float,
    scales: Optional[Sequence[float]] = None,
    nets: Optional[list] = None,
    audit_radii: Optional[Sequence[float]] = None,
    audit_centers=None,
    total: float = 1.0,
) -> FrostmanResult:
    """Top-down mass distribution on a nested net hierarchy.

    Each cell's mass is split among its children in proportion to the number
    of sample points below them, then capped at ``(2 scale)**s`` (cell
    diameter to the power ``s``).  The finest cells spread their mass evenly
    over their sample points.
    """
    if s < 0:
        raise ValueError("Frostman exponent s must be nonnegative")
    pts = as_pointset(sample)
    m = len(pts)
    if m == 0:
        raise EmptyInputError()
    resolution, diam = sample_extent(pts)
    if nets is None:
        if scales is None:
            if diam > 0:
                # stop at the sample resolution: finer cells hold single points
                k = max(1, int(math.floor(math.log2(diam / resolution))))
                scales = diam * 2.0 ** -np.arange(k + 1)
            else:
                scales = 2.0 ** -np.arange(21)
        nets = nested_nets(pts, scales)
    scales = np.array([n.epsilon for n in nets])

    # cell tree: level-k cell of a level-(k+1) center is the owner of that point
    parents = []
    for coarse, fine in zip(nets, nets[1:]):
        parents.append(coarse.owner[fine.center_index])
    leaf_count = np.bincount(nets[-1].owner, minlength=len(nets[-1]))
    counts = [leaf_count.astype(float)]
    for par, coarse in zip(reversed(parents), reversed(nets[:-1])):
        counts.append(np.bincount(par, weights=counts[-1], minlength=len(coarse)))
    counts.reverse()

    mass = np.minimum(
        total * counts[0] / counts[0].sum(), (2.0 * scales[0]) ** s
    )
    for k, par in enumerate(parents):
        share = counts[k + 1] / counts[k][par]
        mass = np.minimum(mass[par] * share, (2.0 * scales[k + 1]) ** s)
    weights = mass[nets[-1].owner] / leaf_count[nets[-1].owner]
    measure = DiscreteMeasure(pts, weights)

    if audit_radii is None:
        lo = max(resolution, scales[-1]) * 2.0
        hi = max(diam, lo * 100.0)
        audit_radii = np.geomspace(lo, hi, 9)
    audit_radii = np.asarray(audit_radii, dtype=float)
    if audit_centers is None and m > AUDIT_CENTERS:
        audit_centers = pts.coords[np.linspace(0, m - 1, AUDIT_CENTERS).astype(np.intp)]
    C, _ = frostman_audit(measure, s, audit_radii, audit_centers)
    # a finite sample with no spread carries no s-dimensional content
    degenerate = s > 0 and (m == 1 or diam == 0)
    return FrostmanResult(measure, C, float(s), scales, audit_radii, degenerate, nets)


# --------------------------------------------------------------------------
# Riesz energies


def t_energy(nu: DiscreteMeasure, t: float, block: int = 2048) -> float:
    """Discrete t-energy ``sum_{i != j} w_i w_j d(x_i, x_j)^(-t)``.

    Returns ``inf`` (with a logged warning) when distinct atoms coincide and
    ``t > 0``.  Row blocks are reduced with ``math.fsum`` so the result does
    not depend on the blocking.
    """
    if t < 0:
        raise ValueError("energy exponent t must be nonnegative")
    m = len(nu)
    if m < 2:
        raise ValueError("t-energy needs at least two atoms")
    X = nu.atoms.coords
    w = nu.weights
    partial = []
    for start in range(0, m, block):
        stop = min(m, start + block)
        d = nu.space.cross_dist(X[start:stop], X)
        rows = np.arange(start, stop)
        d[rows - start, rows] = np.nan
        if t > 0 and np.any(d == 0):
            log.warning("t_energy: coincident distinct atoms, energy is infinite")
            return math.inf
        with np.errstate(divide="ignore"):
            kern = d ** (-t) if t > 0 else np.ones_like(d)
        kern[rows - start, rows] = 0.0
        partial.extend((w[start:stop] * (kern @ w)).tolist())
    return math.fsum(partial)


# --------------------------------------------------------------------------
# box-counting dimension


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    scale_window: tuple
    slope_residual: float
    point_count: int
    radii: tuple = ()
    counts: tuple = ()
    intercept: float = 0.0
    label: str = "box proxy"
    flags: tuple = ()
    method: str = "cover"

    def as_dict(self):
        return {
            "value": self.value,
            "scale_window": list(self.scale_window),
            "slope_residual": self.slope_residual,
            "point_count": self.point_count,
            "radii": list(self.radii),
            "counts": list(self.counts),
            "label": self.label,
            "flags": list(self.flags),
            "method": self.method,
        }


def default_r_grid(points, num: int = 12, lo_factor: float = 4.0, hi_factor: float = 0.25):
    resolution, diam = sample_extent(points)
    if diam == 0:
        return np.array([1.0, 0.5])
    lo = max(resolution * lo_factor, diam * 1e-6)
    hi = diam * hi_factor
    if hi <= lo:
        hi = lo * 4.0
    return np.geomspace(hi, lo, num)


def grid_box_count(coords: np.ndarray, r: float) -> int:
    """Occupied cells of the side-``r`` grid anchored at the sample's lower corner."""
    cells = np.floor((coords - coords.min(axis=0)) / r).astype(np.int64)
    return len(np.unique(cells, axis=0))


def box_dimension(points, r_grid=None, method: str = "auto") -> DimensionEstimate:
    """Least-squares slope of ``log N(r)`` against ``log(1/r)``.

    ``method="grid"`` counts occupied grid boxes of side ``r`` (Euclidean
    samples only); ``"cover"`` uses the greedy cover count by ``r``-balls of
    the sample's metric.  ``"auto"`` picks the grid for Euclidean samples.
    An all-equal count sequence yields value 0 with an infinite residual and a
    ``degenerate`` flag.
    """
    pts = as_pointset(points)
    if len(pts) == 0:
        raise EmptyInputError()
    if method == "auto":
        method = "grid" if isinstance(pts.space, Euclidean) else "cover"
    if method not in ("grid", "cover"):
        raise ValueError(f"unknown box-counting method {method!r}")
    if method == "grid" and not isinstance(pts.space, Euclidean):
        raise ValueError("grid box counting needs a Euclidean sample")
    if r_grid is None:
        r_grid = default_r_grid(pts)
    radii = np.sort(np.asarray(r_grid, dtype=float))[::-1]
    if len(radii) < 2:
        raise ValueError("box_dimension needs at least two scales")
    if np.any(radii <= 0):
        raise ValueError("box sizes must be positive")
    if method == "grid":
        counts = np.array([grid_box_count(pts.coords, r) for r in radii])
    else:
        counts = np.array([greedy_cover_count(pts, r).count for r in radii])
    window = (float(radii.min()), float(radii.max()))
    if np.all(counts == counts[0]):
        return DimensionEstimate(
            0.0, window, math.inf, len(pts), tuple(radii.tolist()),
            tuple(int(c) for c in counts), float(np.log(counts[0])),
            flags=("degenerate regression",), method=method,
        )
    x = np.log(1.0 / radii)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    flags = ()
    if np.any(counts < 2):
        flags = ("scale with fewer than two balls",)
    return DimensionEstimate(
        max(0.0, float(slope)), window, resid, len(pts), tuple(radii.tolist()),
        tuple(int(c) for c in counts), float(intercept), flags=flags, method=method,
    )


# --------------------------------------------------------------------------
# even coverability


@dataclass(frozen=True)
class EvenCoverReport:
    eps: float
    sigma: float
    t_dim: float
    ball_count: int
    sup_radius: float
    sum_r_t: float
    max_overlap: int

    def as_dict(self):
        return dict(self.__dict__)


def even_coverability_audit(points, t_dim: float, sigma: float, eps: float) -> EvenCoverReport:
    """Audit the maximal-net cover ``{B(x_k, eps)}`` against conditions (i)-(iii).

    Overlap (iii) is the largest number of enlarged balls ``B(x_k, sigma eps)``
    containing any sample point or center.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    pts = as_pointset(points)
    net = maximal_separated_net(pts, eps)
    centers = net.centers.coords
    i, _, _ = pairs_within(pts.space, pts.coords, centers, sigma * eps)
    overlap = np.bincount(i, minlength=len(pts)) if len(i) else np.zeros(len(pts), int)
    k = len(net)
    return EvenCoverReport(
        eps=float(eps),
        sigma=float(sigma),
        t_dim=float(t_dim),
        ball_count=k,
        sup_radius=float(eps),
        sum_r_t=math.fsum([eps ** t_dim] * k),
        max_overlap=int(overlap.max()),
    )
