"""Space-agnostic metric primitives: points, distances, nets and covers.

Every sample-based routine works on a :class:`PointSet` (an ``(m, d)`` array
tagged with its :class:`Space`).  Neighbour searches use a KD-tree over
per-axis rescaled coordinates as a *superset* filter; membership is always
decided by the space's own metric, so results never depend on the tree.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import EmptyInputError, SpaceMismatchError

# slack on the L-infinity prefilter radius; exact filtering follows
_PREFILTER_SLACK = 1e-9


class Space:
    """A metric on coordinate vectors of fixed length ``dim``."""

    tag: str = "abstract"
    dim: int = 0

    def dist(self, a, b):
        """Distances between broadcastable coordinate arrays ``(..., dim)``."""
        raise NotImplementedError

    def cross_dist(self, a, b):
        """Distance matrix between the rows of ``a`` and ``b``."""
        return self.dist(np.asarray(a)[:, None, :], np.asarray(b)[None, :, :])

    def search_widths(self, coords, radius):
        """Per-axis widths ``w`` with ``d(p, q) < radius => |p_j - q_j| < w_j``.

        ``coords`` bounds the region both points are drawn from.  Returning
        ``None`` selects brute force.
        """
        return None

    def pair_candidates(self, coords, radius):
        """Index pairs ``i < j`` containing every pair with ``d < radius``.

        The default uses an L-infinity KD-tree over ``search_widths``.
        Returns ``None`` when no prefilter is available.
        """
        widths = self.search_widths(coords, radius)
        if widths is None or not np.all(np.asarray(widths) > 0):
            return None
        tree = cKDTree(coords / np.asarray(widths, dtype=float))
        pairs = tree.query_pairs(1.0 + _PREFILTER_SLACK, p=np.inf, output_type="ndarray")
        return pairs[:, 0], pairs[:, 1]

    def check_coords(self, coords):
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1] != self.dim:
            raise ValueError(f"{self} expects {self.dim} coordinates, got {coords.shape[-1]}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        return coords

    def __str__(self):
        return self.tag


@dataclass(frozen=True)
class Euclidean(Space):
    n: int = 2

    @property
    def dim(self):
        return self.n

    @property
    def tag(self):
        return f"euclidean({self.n})"

    def dist(self, a, b):
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def cross_dist(self, a, b):
        return np.sqrt(cdist(np.asarray(a, dtype=float), np.asarray(b, dtype=float), "sqeuclidean"))

    def search_widths(self, coords, radius):
        return np.full(self.n, float(radius))

    def __str__(self):
        return self.tag


_TAG_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*(\d+)\s*\))?\s*$")


def space_from_tag(tag: str) -> Space:
    """Parse the ``space`` column of the point CSV layout."""
    m = _TAG_RE.match(tag)
    if not m:
        raise ValueError(f"unrecognised space tag {tag!r}")
    name, arg = m.group(1), m.group(2)
    if name == "euclidean":
        return Euclidean(int(arg or 2))
    if name == "heisenberg":
        from .heisenberg import Heisenberg

        return Heisenberg(int(arg or 1))
    if name == "grushin":
        from .grushin import Grushin

        return Grushin()
    if name == "carpet":
        from .carpet import CarpetPlane

        return CarpetPlane()
    raise ValueError(f"unrecognised space tag {tag!r}")


@dataclass(frozen=True, eq=False)
class Point:
    """A single tagged point.  Carpet points may carry a digit address."""

    space: Space
    coords: tuple
    address: Optional[tuple] = None

    def __post_init__(self):
        c = self.space.check_coords(np.asarray(self.coords, dtype=float).reshape(-1))
        object.__setattr__(self, "coords", tuple(float(v) for v in c))

    @property
    def array(self):
        return np.array(self.coords)

    def __eq__(self, other):
        return (
            isinstance(other, Point)
            and self.space == other.space
            and self.coords == other.coords
        )

    def __hash__(self):
        return hash((self.space, self.coords))


class PointSet:
    """An ordered finite sample in one space.  Immutable after construction."""

    __slots__ = ("space", "coords", "addresses")

    def __init__(self, space: Space, coords, addresses=None):
        coords = np.array(coords, dtype=float, copy=True)
        if coords.ndim == 1:
            coords = coords.reshape(-1, space.dim) if space.dim > 1 else coords[:, None]
        coords = space.check_coords(coords)
        coords.setflags(write=False)
        if addresses is not None:
            addresses = np.array(addresses, copy=True)
            addresses.setflags(write=False)
        self.space = space
        self.coords = coords
        self.addresses = addresses

    @classmethod
    def from_points(cls, points: Iterable[Point]) -> "PointSet":
        points = list(points)
        if not points:
            raise EmptyInputError()
        space = points[0].space
        for p in points:
            if p.space != space:
                raise SpaceMismatchError(space, p.space)
        return cls(space, np.array([p.coords for p in points]))

    def __len__(self):
        return self.coords.shape[0]

    def point(self, i) -> Point:
        addr = None
        if self.addresses is not None:
            addr = tuple(map(tuple, np.asarray(self.addresses[i]).reshape(-1, 2)))
        return Point(self.space, tuple(self.coords[i]), addr)

    def subset(self, index) -> "PointSet":
        addr = None if self.addresses is None else self.addresses[index]
        return PointSet(self.space, self.coords[index], addr)

    def __iter__(self):
        for i in range(len(self)):
            yield self.point(i)

    def __repr__(self):
        return f"PointSet({self.space}, m={len(self)})"


def as_pointset(points, space: Optional[Space] = None) -> PointSet:
    if isinstance(points, PointSet):
        if space is not None and points.space != space:
            raise SpaceMismatchError(space, points.space)
        return points
    if isinstance(points, Point):
        return PointSet(points.space, np.array([points.coords]))
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], Point):
        return PointSet.from_points(points)
    if space is None:
        raise TypeError("a Space is required to interpret raw coordinates")
    return PointSet(space, points)


def distance(p: Point, q: Point) -> float:
    if p.space != q.space:
        raise SpaceMismatchError(p.space, q.space)
    return float(p.space.dist(np.array(p.coords), np.array(q.coords)))


# --------------------------------------------------------------------------
# neighbour search


class _RadiusSearch:
    """Exact ``d < radius`` queries against a fixed sample."""

    def __init__(self, space: Space, coords: np.ndarray, radius: float, bound_coords=None):
        self.space = space
        self.coords = coords
        self.radius = float(radius)
        ref = coords if bound_coords is None else bound_coords
        widths = None if len(coords) < 64 else space.search_widths(ref, self.radius)
        if widths is not None and np.all(np.asarray(widths) > 0) and np.all(np.isfinite(widths)):
            self.widths = np.asarray(widths, dtype=float)
            self.tree = cKDTree(coords / self.widths)
        else:
            self.widths = None
            self.tree = None

    def query(self, x):
        """Indices and distances of sample points with ``d(x, .) < radius``."""
        if self.tree is None:
            cand = np.arange(len(self.coords))
        else:
            cand = np.asarray(
                self.tree.query_ball_point(x / self.widths, 1.0 + _PREFILTER_SLACK, p=np.inf),
                dtype=np.intp,
            )
            if cand.size == 0:
                return cand, np.empty(0)
        d = self.space.dist(self.coords[cand], x)
        keep = d < self.radius
        return cand[keep], d[keep]


def pairs_within(space: Space, a: np.ndarray, b: np.ndarray, radius, chunk=4096):
    """All pairs ``(i, j)`` with ``d(a_i, b_j) < radius_j``.

    ``radius`` may be a scalar or one value per row of ``b``.  Returns index
    arrays and the distances, sorted by ``(i, j)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rad = np.broadcast_to(np.asarray(radius, dtype=float), (len(b),))
    if len(a) == 0 or len(b) == 0:
        e = np.empty(0, dtype=np.intp)
        return e, e.copy(), np.empty(0)
    rmax = float(rad.max())
    total = len(a) * len(b)
    widths = None
    if total > 1 << 16:
        widths = space.search_widths(np.vstack([a, b]), rmax)
        if widths is not None and not (np.all(np.asarray(widths) > 0) and np.all(np.isfinite(widths))):
            widths = None
    ii, jj = [], []
    brute = widths is None
    if not brute:
        widths = np.asarray(widths, dtype=float)
        # tree over the larger side, lists only for the smaller one
        a_small = len(a) < len(b)
        big, small = (b, a) if a_small else (a, b)
        tree = cKDTree(big / widths)
        q = small / widths
        lens = tree.query_ball_point(q, 1.0 + _PREFILTER_SLACK, p=np.inf, return_length=True)
        if lens.sum() > total // 4:
            brute = True
        else:
            for start in range(0, len(q), chunk):
                blk = q[start:start + chunk]
                hits = tree.query_ball_point(blk, 1.0 + _PREFILTER_SLACK, p=np.inf)
                n_hit = lens[start:start + len(blk)]
                if n_hit.sum() == 0:
                    continue
                qi = np.repeat(np.arange(start, start + len(blk)), n_hit)
                ti = np.concatenate([np.asarray(h, dtype=np.intp) for h in hits if len(h)])
                ii.append(qi if a_small else ti)
                jj.append(ti if a_small else qi)
    if brute:
        ii, jj = [], []
        step = max(1, (1 << 22) // max(1, len(b)))
        for start in range(0, len(a), step):
            blk = a[start:start + step]
            d = space.cross_dist(blk, b)
            i, j = np.nonzero(d < rad[None, :])
            ii.append(i + start)
            jj.append(j)
    if not ii:
        e = np.empty(0, dtype=np.intp)
        return e, e.copy(), np.empty(0)
    i = np.concatenate(ii)
    j = np.concatenate(jj)
    d = space.dist(a[i], b[j])
    keep = d < rad[j]
    i, j, d = i[keep], j[keep], d[keep]
    order = np.lexsort((j, i))
    return i[order], j[order], d[order]


# --------------------------------------------------------------------------
# nets and covers


@dataclass(frozen=True, eq=False)
class Net:
    """A maximal ``epsilon``-separated subset of a sample.

    ``center_index`` indexes into ``sample``; ``owner[i]`` is the ordinal of
    the first center (in scan order) within ``epsilon`` of sample point ``i``
    and ``owner_dist[i]`` the distance to it.
    """

    epsilon: float
    sample: PointSet
    center_index: np.ndarray
    owner: np.ndarray
    owner_dist: np.ndarray
    parent: Optional["Net"] = None
    covering_radius: float = field(init=False)

    def __post_init__(self):
        for arr in (self.center_index, self.owner, self.owner_dist):
            arr.setflags(write=False)
        # maximality: every sample point lies within epsilon of a center
        object.__setattr__(self, "covering_radius", float(self.epsilon))

    @property
    def centers(self) -> PointSet:
        return self.sample.subset(self.center_index)

    def __len__(self):
        return len(self.center_index)

    @property
    def realized_radius(self) -> float:
        return float(self.owner_dist.max()) if len(self.owner_dist) else 0.0


def _neighbour_graph(space: Space, coords: np.ndarray, radius: float):
    """CSR adjacency of exact ``d < radius`` pairs (self loops included), or ``None``."""
    cand = space.pair_candidates(coords, radius)
    if cand is None:
        return None
    i, j = cand
    d = space.dist(coords[i], coords[j])
    keep = d < radius
    i, j, d = i[keep], j[keep], d[keep]
    own = np.arange(len(coords))
    src = np.concatenate([i, j, own])
    dst = np.concatenate([j, i, own])
    dd = np.concatenate([d, d, np.zeros(len(coords))])
    order = np.lexsort((dst, src))
    src, dst, dd = src[order], dst[order], dd[order]
    indptr = np.zeros(len(coords) + 1, dtype=np.intp)
    np.cumsum(np.bincount(src, minlength=len(coords)), out=indptr[1:])
    return indptr, dst, dd


def _mean_degree(search: "_RadiusSearch", m: int, probes: int = 64) -> float:
    idx = np.linspace(0, m - 1, min(m, probes)).astype(np.intp)
    return float(np.mean([len(search.query(search.coords[i])[0]) for i in idx]))


# dense neighbourhoods switch to one query per center
_GRAPH_MAX_DEGREE = 10
_GRAPH_MAX_EDGES = 30_000_000


def maximal_separated_net(points, eps: float, seed_net: Optional[Net] = None) -> Net:
    """Greedy maximal ``eps``-separated net, scanning ``points`` in order.

    A point becomes a center iff no earlier center lies at distance ``< eps``.
    Centers of ``seed_net`` (built on the same sample at a scale ``>= eps``)
    are claimed first, so they form a prefix of the result.
    """
    pts = as_pointset(points)
    m = len(pts)
    if m == 0:
        raise EmptyInputError()
    if not eps > 0:
        raise ValueError("eps must be positive")
    if seed_net is not None:
        if len(seed_net.sample) != m or seed_net.sample.space != pts.space:
            raise ValueError("seed_net must be built on the same sample")
        if seed_net.epsilon < eps:
            raise ValueError("seed_net must be at a coarser scale")

    coords = pts.coords
    search = _RadiusSearch(pts.space, coords, eps)
    graph = None
    if m >= 256:
        deg = _mean_degree(search, m)
        if deg <= _GRAPH_MAX_DEGREE and deg * m <= _GRAPH_MAX_EDGES:
            graph = _neighbour_graph(pts.space, coords, eps)

    alive = np.ones(m, dtype=bool)
    owner = np.full(m, -1, dtype=np.intp)
    owner_dist = np.full(m, np.inf)
    centers = []

    if graph is not None:
        indptr, nbr, nd = graph

        bounds = indptr.tolist()

        def neighbours(i):
            lo, hi = bounds[i], bounds[i + 1]
            return nbr[lo:hi], nd[lo:hi]
    else:

        def neighbours(i):
            return search.query(coords[i])

    def claim(i):
        idx, d = neighbours(i)
        fresh = owner[idx] < 0
        if not fresh.all():
            idx, d = idx[fresh], d[fresh]
        owner[idx] = len(centers)
        owner_dist[idx] = d
        alive[idx] = False
        alive[i] = False
        centers.append(i)

    if seed_net is not None:
        for i in seed_net.center_index:
            claim(int(i))
    for i in np.flatnonzero(alive):
        if alive[i]:
            claim(int(i))

    return Net(
        epsilon=float(eps),
        sample=pts,
        center_index=np.asarray(centers, dtype=np.intp),
        owner=owner,
        owner_dist=owner_dist,
        parent=seed_net,
    )


def nested_nets(points, scales) -> list:
    """Nets at decreasing ``scales``, each extending the previous one."""
    scales = [float(s) for s in scales]
    if any(b > a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be non-increasing")
    nets = []
    prev = None
    for eps in scales:
        prev = maximal_separated_net(points, eps, seed_net=prev)
        nets.append(prev)
    return nets


@dataclass(frozen=True, eq=False)
class Cover:
    radius: float
    centers: PointSet
    net: Net

    @property
    def count(self) -> int:
        return len(self.centers)


def greedy_cover_count(points, r: float) -> Cover:
    """Cover of the sample by open ``r``-balls centered at an ``r``-net."""
    if not r > 0:
        raise ValueError("cover radius must be positive")
    net = maximal_separated_net(points, r)
    return Cover(float(r), net.centers, net)


def ball_members(points, center: Point, r: float):
    """Sample points in the open ball ``B(center, r)``; returns ``(subset, index)``."""
    pts = as_pointset(points)
    if center.space != pts.space:
        raise SpaceMismatchError(pts.space, center.space)
    d = pts.space.dist(pts.coords, np.array(center.coords))
    idx = np.flatnonzero(d < r)
    return pts.subset(idx), idx


def sample_extent(points, probes: int = 512, seed: int = 0):
    """Cheap ``(resolution, diameter)`` summary of a sample.

    Resolution is the median nearest-neighbour distance over a probe subset;
    diameter is the largest probe-to-sample distance (within a factor two of
    the true diameter).
    """
    pts = as_pointset(points)
    m = len(pts)
    if m < 2:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    probe = np.sort(rng.choice(m, size=min(probes, m), replace=False))
    nn = np.empty(len(probe))
    far = 0.0
    for k, i in enumerate(probe):
        d = pts.space.dist(pts.coords, pts.coords[i])
        d[i] = np.inf
        nn[k] = d.min()
        d[i] = 0.0
        far = max(far, float(d.max()))
    return float(np.median(nn)), far


# --------------------------------------------------------------------------
# CSV point layout: space,coord0,...,coordk


def write_points_csv(path, points) -> None:
    pts = as_pointset(points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["space"] + [f"coord{j}" for j in range(pts.space.dim)])
        for row in pts.coords:
            w.writerow([pts.space.tag] + [repr(float(v)) for v in row])


def read_points_csv(path) -> PointSet:
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
    return PointSet(space, coords)
