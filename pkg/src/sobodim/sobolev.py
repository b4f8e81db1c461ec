"""Random dimension-raising Sobolev maps built from nested nets and bumps.

For scales ``r_n = 2^-n`` (n = 1..n_max) the map is

    f(x) = sum_n (1+n)^-2 sum_{B in level n} nu(F B)^(1/alpha) psi_B(x) xi_B

where the balls ``B = B(c, r_n)`` are centered at a maximal ``r_n``-separated
net of the support, ``F`` is the ball enlargement factor (100 by default),
``psi_B = clip(2 - d(x, c)/r_n, 0, 1)`` and ``xi_B`` is uniform in the closed
unit ball of R^N.  ``lip_upper`` gives the matching pointwise upper gradient.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .errors import EmptyInputError, ParameterRangeError, SpaceMismatchError
from .heisenberg import Heisenberg, dilate
from .measures import DiscreteMeasure
from .metric import (
    Euclidean,
    Point,
    PointSet,
    as_pointset,
    nested_nets,
    pairs_within,
    space_from_tag,
)

DEFAULT_BALL_FACTOR = 100.0
# rescaled samples get this diameter
_TARGET_DIAMETER = 0.99


def damping(n):
    return (1.0 + n) ** -2.0


def level_exponent(p, Q, s, alpha):
    """Per-level growth exponent ``(p - Q) - s (p/alpha - 1)`` of ``||Lip f_n||_p^p``."""
    return (p - Q) - s * (p / alpha - 1.0)


def uniform_ball(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """``count`` points uniform in the closed unit ball of R^dim."""
    g = rng.standard_normal((count, dim))
    norm = np.sqrt((g * g).sum(axis=1, keepdims=True))
    norm[norm == 0] = 1.0
    u = rng.random((count, 1)) ** (1.0 / dim)
    v = g / norm * u
    # rounding can push the norm a hair above 1
    return v / np.maximum(1.0, np.sqrt((v * v).sum(axis=1, keepdims=True)))


def _level_rng(seed: int, n: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(n)])))


def diameter_upper(points: PointSet) -> float:
    """Exact diameter for Euclidean samples, ``2 max d(x_0, .)`` otherwise."""
    c = points.coords
    if len(c) < 2:
        return 0.0
    if isinstance(points.space, Euclidean):
        if len(c) > c.shape[1] + 1:
            try:
                c = c[ConvexHull(c).vertices]
            except (QhullError, ValueError):
                pass
        if len(c) > 20000:
            lo, hi = c.min(axis=0), c.max(axis=0)
            return float(np.sqrt(((hi - lo) ** 2).sum()))
        return float(pdist(c).max())
    return 2.0 * float(points.space.dist(c, c[0]).max())


def rescale_coords(space, coords, factor: float):
    if factor == 1.0:
        return np.asarray(coords, dtype=float)
    if isinstance(space, Heisenberg):
        return dilate(factor, np.asarray(coords, dtype=float))
    if isinstance(space, Euclidean):
        return np.asarray(coords, dtype=float) * factor
    raise ValueError(f"no rescaling available for {space}")


@dataclass(frozen=True, eq=False)
class Level:
    n: int
    radius: float
    centers: np.ndarray  # (k, dim), in the construction frame
    center_index: np.ndarray  # rows of the support sample
    weights: np.ndarray  # nu(F B)^(1/alpha)
    xi: np.ndarray  # (k, N)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class RandomSobolevMap:
    space: object
    levels: tuple
    alpha: float
    N: int
    n_max: int
    seed: int
    ball_factor: float
    measure: DiscreteMeasure  # in the construction frame
    scale: float = 1.0  # input points are rescaled by this factor first
    flags: tuple = ()

    # ------------------------------------------------------------------ eval

    def _frame(self, x) -> np.ndarray:
        if isinstance(x, Point):
            if x.space != self.space:
                raise SpaceMismatchError(self.space, x.space)
            x = np.array(x.coords)[None, :]
        elif isinstance(x, PointSet):
            if x.space != self.space:
                raise SpaceMismatchError(self.space, x.space)
            x = x.coords
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.space.dim:
            raise SpaceMismatchError(self.space, f"{x.shape[1]}-coordinate input")
        return rescale_coords(self.space, x, self.scale)

    def _active(self, level: Level, x):
        return pairs_within(self.space, x, level.centers, 2.0 * level.radius)

    def evaluate(self, x, levels: Optional[Sequence[int]] = None) -> np.ndarray:
        """``f(x)`` for each row of ``x``; shape ``(m, N)`` (``(N,)`` for a Point)."""
        single = isinstance(x, Point)
        xf = self._frame(x)
        out = np.zeros((len(xf), self.N))
        for lev in self.levels:
            if levels is not None and lev.n not in levels:
                continue
            i, j, d = self._active(lev, xf)
            psi = np.clip(2.0 - d / lev.radius, 0.0, 1.0)
            coef = damping(lev.n) * lev.weights[j] * psi
            np.add.at(out, i, coef[:, None] * lev.xi[j])
        return out[0] if single else out

    def __call__(self, x):
        return self.evaluate(x)

    def level_lip(self, x, n: int) -> np.ndarray:
        """Undamped upper gradient of the level-``n`` term at each row of ``x``."""
        lev = self.level(n)
        xf = self._frame(x)
        out = np.zeros(len(xf))
        i, j, _ = self._active(lev, xf)
        np.add.at(out, i, lev.weights[j] / lev.radius)
        return out

    def lip_upper(self, x) -> np.ndarray:
        """``sum_n (1+n)^-2 sum_{d(x, c_B) < 2 r_n} w_B / r_n`` per row of ``x``."""
        single = isinstance(x, Point)
        xf = self._frame(x)
        out = np.zeros(len(xf))
        for lev in self.levels:
            i, j, _ = self._active(lev, xf)
            np.add.at(out, i, damping(lev.n) * lev.weights[j] / lev.radius)
        out *= self.scale
        return float(out[0]) if single else out

    def segment_bound(self, a, b) -> float:
        """Exact integral of ``lip_upper`` along the Euclidean segment ``[a, b]``."""
        if not isinstance(self.space, Euclidean):
            raise ValueError("segment integrals need a Euclidean ambient space")
        a = self._frame(np.asarray(a, dtype=float))[0]
        b = self._frame(np.asarray(b, dtype=float))[0]
        direction = b - a
        length = float(np.sqrt(direction @ direction))
        if length == 0.0:
            return 0.0
        u = direction / length
        terms = []
        for lev in self.levels:
            R = 2.0 * lev.radius
            rel = lev.centers - a
            proj = rel @ u
            perp2 = np.maximum((rel * rel).sum(axis=1) - proj * proj, 0.0)
            half = np.sqrt(np.maximum(R * R - perp2, 0.0))
            chord = np.clip(np.minimum(proj + half, length) - np.maximum(proj - half, 0.0), 0.0, None)
            hit = chord > 0
            terms.append(damping(lev.n) * math.fsum(lev.weights[hit] * chord[hit]) / lev.radius)
        # frame lengths already absorb the rescaling
        return math.fsum(terms)

    # ---------------------------------------------------------------- access

    def level(self, n: int) -> Level:
        for lev in self.levels:
            if lev.n == n:
                return lev
        raise KeyError(n)

    def max_weights(self) -> np.ndarray:
        return np.array([lev.weights.max() if len(lev) else 0.0 for lev in self.levels])

    def sup_bound(self) -> float:
        """Bound on ``|f|``: per level, the heaviest cluster of overlapping supports.

        Supports active at one point have centers within ``4 r`` of each
        other, so ``|f_n| <= max_c sum_{d(c, c') < 4 r} w_{c'}``.
        """
        terms = []
        for lev in self.levels:
            if len(lev) == 0:
                continue
            i, j, _ = pairs_within(self.space, lev.centers, lev.centers, 4.0 * lev.radius)
            cluster = np.zeros(len(lev))
            np.add.at(cluster, i, lev.weights[j])
            terms.append(damping(lev.n) * float(cluster.max()))
        return math.fsum(terms)

    def tail_bound(self) -> float:
        """Bound on the omitted levels ``n > n_max``.

        Each weight is at most ``total_mass^(1/alpha)``; the number of
        supports active at one point is taken from the finest built level
        (largest count of centers within ``4 r`` of a center), a doubling
        proxy for the unbuilt ones.
        """
        cap = self.measure.total_mass ** (1.0 / self.alpha)
        lev = self.levels[-1]
        mult = 1
        if len(lev):
            i, _, _ = pairs_within(self.space, lev.centers, lev.centers, 4.0 * lev.radius)
            mult = int(np.bincount(i, minlength=len(lev)).max())
        # sum_{n > n_max} (1+n)^-2 <= 1 / (n_max + 1)
        return mult * cap / (self.n_max + 1.0)

    def recomputed_weights(self, n: int) -> np.ndarray:
        lev = self.level(n)
        mass = self.measure.ball_masses(lev.centers, self.ball_factor * lev.radius)
        return mass ** (1.0 / self.alpha)


def build_construction(
    E_sample,
    nu: DiscreteMeasure,
    alpha: float,
    N: int,
    n_max: int,
    seed: int,
    ball_factor: float = DEFAULT_BALL_FACTOR,
    allow_null_measure: bool = False,
) -> RandomSobolevMap:
    """Build the random map on the support sample ``E_sample`` weighted by ``nu``.

    Samples of diameter ``>= 1`` are first rescaled (Euclidean scaling or
    Heisenberg dilation) to diameter 0.99; the factor is stored on the map and
    applied to every evaluation input.
    """
    pts = as_pointset(E_sample)
    if len(pts) == 0:
        raise EmptyInputError("support sample")
    if not alpha > 0:
        raise ParameterRangeError(f"alpha must be positive, got {alpha}")
    if not N > alpha:
        raise ParameterRangeError(f"need N > alpha, got N={N}, alpha={alpha}")
    if int(n_max) < 1:
        raise ValueError("n_max must be >= 1")
    if nu.space != pts.space:
        raise SpaceMismatchError(pts.space, nu.space)
    flags = []
    if nu.total_mass == 0:
        if not allow_null_measure:
            raise ParameterRangeError("measure has zero total mass")
        flags.append("degenerate measure")

    diam = diameter_upper(pts)
    scale = 1.0
    if diam >= 1.0:
        scale = _TARGET_DIAMETER / diam
        flags.append(f"rescaled by {scale!r}")
    coords = rescale_coords(pts.space, pts.coords, scale)
    frame = PointSet(pts.space, coords)
    nu_frame = DiscreteMeasure(
        PointSet(nu.space, rescale_coords(nu.space, nu.atoms.coords, scale)), nu.weights
    )

    radii = [2.0 ** -n for n in range(1, int(n_max) + 1)]
    nets = nested_nets(frame, radii)
    levels = []
    for n, (r, net) in enumerate(zip(radii, nets), start=1):
        centers = coords[net.center_index]
        if ball_factor * r > diam * scale:
            # the enlarged ball swallows the whole support
            mass = np.full(len(centers), nu_frame.total_mass)
        else:
            mass = nu_frame.ball_masses(centers, ball_factor * r)
        weights = mass ** (1.0 / alpha)
        xi = uniform_ball(_level_rng(seed, n), len(centers), int(N))
        levels.append(Level(n, r, centers, net.center_index.copy(), weights, xi))
    return RandomSobolevMap(
        space=pts.space,
        levels=tuple(levels),
        alpha=float(alpha),
        N=int(N),
        n_max=int(n_max),
        seed=int(seed),
        ball_factor=float(ball_factor),
        measure=nu_frame,
        scale=scale,
        flags=tuple(flags),
    )


# --------------------------------------------------------------------------
# L^p norms of the upper gradient


@dataclass(frozen=True)
class LevelNorms:
    p: float
    levels: tuple
    norms: tuple  # ||Lip f_n||_p, undamped
    quadrature_points: tuple
    total_upper: float  # Minkowski: sum_n (1+n)^-2 ||Lip f_n||_p
    exponent: Optional[float] = None

    def ratio_window(self, lo: Optional[int] = None, hi: Optional[int] = None) -> float:
        vals = [v for n, v in zip(self.levels, self.norms)
                if (lo is None or n >= lo) and (hi is None or n <= hi)]
        vals = [v for v in vals if v > 0]
        return max(vals) / min(vals) if vals else 1.0

    def log2_slope(self, lo: Optional[int] = None, hi: Optional[int] = None) -> float:
        """Least-squares slope of ``log2 ||Lip f_n||_p^p`` against ``n``."""
        pairs = [(n, v) for n, v in zip(self.levels, self.norms)
                 if v > 0 and (lo is None or n >= lo) and (hi is None or n <= hi)]
        n = np.array([a for a, _ in pairs], dtype=float)
        y = self.p * np.log2([b for _, b in pairs])
        return float(np.polyfit(n, y, 1)[0])

    def rows(self):
        return [(n, v, q) for n, v, q in zip(self.levels, self.norms, self.quadrature_points)]


def _support_lattice(centers: np.ndarray, reach: float, h: float) -> np.ndarray:
    """Lattice nodes of spacing ``h`` within L-infinity distance ``reach`` of the centers."""
    k = int(math.ceil(reach / h))
    offs = np.arange(-k, k + 1)
    grid = np.stack(np.meshgrid(*([offs] * centers.shape[1]), indexing="ij"), -1).reshape(-1, centers.shape[1])
    base = np.round(centers / h).astype(np.int64)
    nodes = (base[:, None, :] + grid[None, :, :]).reshape(-1, centers.shape[1])
    return np.unique(nodes, axis=0).astype(float) * h


def level_lp_norms(
    fmap: RandomSobolevMap,
    p: float,
    reference: Optional[DiscreteMeasure] = None,
    lattice_density: int = 4,
    Q: Optional[float] = None,
    s: Optional[float] = None,
) -> LevelNorms:
    """Per-level ``||Lip f_n||_p`` and the Minkowski bound on the damped total.

    Without ``reference`` the Lebesgue measure of a Euclidean ambient space is
    integrated on a lattice of spacing ``r_n / lattice_density`` covering the
    level-``n`` supports.  With ``reference`` the quadrature is
    ``sum_i w_i g_n(x_i)^p``.
    """
    if not p >= 1:
        raise ParameterRangeError("p must be >= 1")
    if reference is not None and len(reference) == 0:
        raise EmptyInputError("reference sample")
    norms, counts = [], []
    for lev in fmap.levels:
        if len(lev) == 0 or not np.any(lev.weights > 0):
            norms.append(0.0)
            counts.append(0)
            continue
        if reference is None:
            if not isinstance(fmap.space, Euclidean):
                raise ValueError("lattice quadrature needs a Euclidean ambient space")
            h = lev.radius / lattice_density
            nodes = _support_lattice(lev.centers, 2.0 * lev.radius, h)
            cell = h ** fmap.space.dim
            g = np.zeros(len(nodes))
            i, j, _ = pairs_within(fmap.space, nodes, lev.centers, 2.0 * lev.radius)
            np.add.at(g, i, lev.weights[j] / lev.radius)
            # back to input units: the map is f(scale * x)
            g *= fmap.scale
            cell /= fmap.scale ** fmap.space.dim
            integral = math.fsum((g[g > 0] ** p) * cell)
            counts.append(len(nodes))
        else:
            g = fmap.level_lip(reference.atoms.coords, lev.n) * fmap.scale
            integral = math.fsum(reference.weights * g ** p)
            counts.append(len(reference))
        norms.append(integral ** (1.0 / p))
    total = math.fsum(damping(lev.n) * v for lev, v in zip(fmap.levels, norms))
    exponent = None
    if Q is not None and s is not None:
        exponent = level_exponent(p, Q, s, fmap.alpha)
    return LevelNorms(
        float(p), tuple(lev.n for lev in fmap.levels), tuple(norms), tuple(counts), total, exponent
    )


# --------------------------------------------------------------------------
# Morrey-type diagnostic


@dataclass(frozen=True)
class MorreyReport:
    sup_ratio: float
    ratios: tuple
    samples_per_ball: int
    flags: tuple = ()


def _ball_sample(center, radius, count, rng):
    dim = len(center)
    return center + radius * uniform_ball(rng, count, dim)


def morrey_diagnostic(
    f: Callable,
    balls: Sequence,
    p: float,
    g: Optional[Callable] = None,
    samples_per_ball: int = 512,
    seed: int = 0,
) -> MorreyReport:
    """``sup_B diam f(B) / (diam B * (avg_B g^p)^(1/p))`` over Euclidean balls.

    ``f`` maps ``(m, d)`` arrays to ``(m, N)``; a :class:`RandomSobolevMap`
    may be passed, in which case ``g`` defaults to its ``lip_upper``.
    ``balls`` holds ``(center, radius)`` pairs.  Each ball is sampled with
    ``samples_per_ball`` uniform points plus its center.
    """
    if isinstance(f, RandomSobolevMap) and g is None:
        g = f.lip_upper
    if g is None:
        raise ValueError("an upper gradient g is required")
    rng = _level_rng(seed, 0)
    ratios = []
    vacuous = True
    for center, radius in balls:
        center = np.asarray(center, dtype=float)
        if not radius > 0 or samples_per_ball < 1:
            raise EmptyInputError("ball sample")
        x = np.vstack([center, _ball_sample(center, radius, samples_per_ball, rng)])
        img = np.asarray(f(x), dtype=float)
        if img.ndim == 1:
            img = img[:, None]
        spread = float(pdist(img).max()) if len(img) > 1 else 0.0
        avg = float(np.mean(np.asarray(g(x), dtype=float) ** p)) ** (1.0 / p)
        if spread == 0.0:
            ratios.append(0.0)
            continue
        vacuous = False
        ratios.append(math.inf if avg == 0 else spread / (2.0 * radius * avg))
    flags = ("vacuous",) if vacuous else ()
    return MorreyReport(max(ratios) if ratios else 0.0, tuple(ratios), samples_per_ball, flags)


# --------------------------------------------------------------------------
# serialization


def to_bundle(fmap: RandomSobolevMap) -> dict:
    return {
        "space": fmap.space.tag,
        "alpha": fmap.alpha,
        "N": fmap.N,
        "n_max": fmap.n_max,
        "seed": fmap.seed,
        "ball_factor": fmap.ball_factor,
        "scale": fmap.scale,
        "flags": list(fmap.flags),
        "measure": {
            "atoms": fmap.measure.atoms.coords.tolist(),
            "weights": fmap.measure.weights.tolist(),
        },
        "levels": [
            {
                "n": lev.n,
                "radius": lev.radius,
                "center_index": lev.center_index.tolist(),
                "centers": lev.centers.tolist(),
                "weights": lev.weights.tolist(),
                "xi": lev.xi.tolist(),
            }
            for lev in fmap.levels
        ],
    }


def from_bundle(data: dict) -> RandomSobolevMap:
    space = space_from_tag(data["space"])
    dim = space.dim
    levels = tuple(
        Level(
            int(L["n"]),
            float(L["radius"]),
            np.asarray(L["centers"], dtype=float).reshape(-1, dim),
            np.asarray(L["center_index"], dtype=np.intp),
            np.asarray(L["weights"], dtype=float),
            np.asarray(L["xi"], dtype=float).reshape(-1, int(data["N"])),
        )
        for L in data["levels"]
    )
    measure = DiscreteMeasure(
        PointSet(space, np.asarray(data["measure"]["atoms"], dtype=float).reshape(-1, dim)),
        np.asarray(data["measure"]["weights"], dtype=float),
    )
    return RandomSobolevMap(
        space=space,
        levels=levels,
        alpha=float(data["alpha"]),
        N=int(data["N"]),
        n_max=int(data["n_max"]),
        seed=int(data["seed"]),
        ball_factor=float(data["ball_factor"]),
        measure=measure,
        scale=float(data["scale"]),
        flags=tuple(data.get("flags", ())),
    )


def save_bundle(fmap: RandomSobolevMap, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_bundle(fmap), fh)


def load_bundle(path) -> RandomSobolevMap:
    with open(path) as fh:
        return from_bundle(json.load(fh))


def write_evaluations_csv(path, fmap: RandomSobolevMap, points) -> None:
    pts = as_pointset(points, fmap.space)
    vals = fmap.evaluate(pts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"coord{j}" for j in range(pts.space.dim)] + [f"f{k}" for k in range(fmap.N)])
        for row, v in zip(pts.coords, vals):
            w.writerow([repr(float(a)) for a in row] + [repr(float(b)) for b in v])
