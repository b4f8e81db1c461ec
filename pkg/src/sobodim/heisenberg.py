"""Heisenberg groups with the Korányi metric and intrinsic dilations.

Points of the n-th Heisenberg group are arrays ``(x_1, ..., x_2n, t)``.
All functions broadcast over leading axes and also accept :class:`Point`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import Point, Space, SpaceMismatchError


@dataclass(frozen=True)
class Heisenberg(Space):
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Heisenberg group index n must be >= 1")

    @property
    def dim(self):
        return 2 * self.n + 1

    @property
    def homogeneous_dim(self):
        return 2 * self.n + 2

    @property
    def tag(self):
        return f"heisenberg({self.n})"

    def dist(self, a, b):
        return koranyi_dist(a, b)

    def search_widths(self, coords, radius):
        # |dx| <= d and |dt - 2 w(x, x')| <= d^2 with |w(x, x')| <= |x| |x' - x|
        coords = np.asarray(coords, dtype=float)
        R = float(np.sqrt((coords[:, :-1] ** 2).sum(axis=1)).max()) if len(coords) else 0.0
        r = float(radius)
        return np.concatenate([np.full(2 * self.n, r), [r * r + 2.0 * R * r]])

    def pair_candidates(self, coords, radius):
        # Tile the horizontal coordinates with cells of side r.  Relative to a
        # tile center c the twisted height t - 2 w(c, x) moves by less than
        # r^2 (1 + sqrt(2n)) between r-close points, far tighter than the
        # global bound when the sample is wide compared with r.  Candidates are
        # then pairs in neighbouring (tile, height-bin) cells.
        coords = np.asarray(coords, dtype=float)
        r = float(radius)
        if len(coords) < 2 or not r > 0:
            return None
        x, t = coords[:, :-1], coords[:, -1]
        k = x.shape[1]
        tile = np.floor(x / r).astype(np.int64)
        width = r * r * (1.0 + np.sqrt(k)) + 1e-12 * (1.0 + np.abs(t).max())

        def keyed(shift):
            center = (tile + shift + 0.5) * r
            tau = t - 2.0 * symplectic(center, x)
            return np.column_stack([tile + shift, np.floor(tau / width).astype(np.int64)])

        home = keyed(np.zeros(k, dtype=np.int64))
        ii, jj = [], []
        for off in np.ndindex(*(3,) * k):
            o = np.asarray(off, dtype=np.int64) - 1
            data = keyed(-o)
            for dh in (-1, 0, 1):
                shifted = data.copy()
                shifted[:, -1] -= dh
                i, j = _equal_key_pairs(home, shifted)
                keep = i < j
                ii.append(i[keep])
                jj.append(j[keep])
        return np.concatenate(ii), np.concatenate(jj)

    def __str__(self):
        return self.tag


HEISENBERG_1 = Heisenberg(1)


def _equal_key_pairs(a, b):
    """All ``(i, j)`` with ``a[i] == b[j]`` (rows of integer keys)."""
    both = np.vstack([a, b])
    both = both - both.min(axis=0)
    ext = both.max(axis=0) + 1
    if np.prod(ext.astype(float)) < 2.0 ** 62:
        flat = np.zeros(len(both), dtype=np.int64)
        for col, e in zip(both.T, ext):
            flat = flat * e + col
    else:
        flat = np.unique(both, axis=0, return_inverse=True)[1].ravel()
    ka, kb = flat[: len(a)], flat[len(a):]
    order = np.argsort(kb, kind="stable")
    sorted_kb = kb[order]
    lo = np.searchsorted(sorted_kb, ka, side="left")
    hi = np.searchsorted(sorted_kb, ka, side="right")
    lens = hi - lo
    i = np.repeat(np.arange(len(a)), lens)
    start = np.repeat(lo - np.cumsum(lens) + lens, lens)
    j = order[np.arange(lens.sum()) + start]
    return i, j


def _unwrap(p):
    if isinstance(p, Point):
        if not isinstance(p.space, Heisenberg):
            raise SpaceMismatchError("heisenberg", p.space)
        return np.array(p.coords), p.space
    return np.asarray(p, dtype=float), None


def _wrap(arr, space):
    return Point(space, tuple(arr)) if space is not None else arr


def _check_pair(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise SpaceMismatchError(f"heisenberg dim {a.shape[-1]}", f"heisenberg dim {b.shape[-1]}")
    if a.shape[-1] % 2 != 1 or a.shape[-1] < 3:
        raise ValueError("Heisenberg points have 2n+1 coordinates")


def symplectic(x, xp):
    """``sum_i x_{n+i} x'_i - x_i x'_{n+i}`` over the last axis."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    n = x.shape[-1] // 2
    return np.sum(x[..., n:] * xp[..., :n] - x[..., :n] * xp[..., n:], axis=-1)


def heis_mul(p, q):
    """Group law ``(x, t) * (x', t') = (x + x', t + t' + 2 w(x, x'))``."""
    a, sa = _unwrap(p)
    b, sb = _unwrap(q)
    _check_pair(a, b)
    if sa is not None and sb is not None and sa != sb:
        raise SpaceMismatchError(sa, sb)
    x, t = a[..., :-1], a[..., -1]
    xp, tp = b[..., :-1], b[..., -1]
    out = np.concatenate(
        [x + xp, (t + tp + 2.0 * symplectic(x, xp))[..., None]], axis=-1
    )
    return _wrap(out, sa or sb)


def heis_inv(p):
    a, sa = _unwrap(p)
    return _wrap(-a, sa)


def identity(n: int = 1):
    return np.zeros(2 * n + 1)


def koranyi_norm(p):
    """``(|x|^4 + t^2)^(1/4)``."""
    a, _ = _unwrap(p)
    x2 = np.sum(a[..., :-1] ** 2, axis=-1)
    return (x2 * x2 + a[..., -1] ** 2) ** 0.25


def koranyi_dist(p, q):
    """Left-invariant Korányi distance ``|p^{-1} * q|``."""
    a, sa = _unwrap(p)
    b, sb = _unwrap(q)
    _check_pair(a, b)
    x, t = a[..., :-1], a[..., -1]
    xp, tp = b[..., :-1], b[..., -1]
    dx = xp - x
    dt = tp - t - 2.0 * symplectic(x, xp)
    x2 = np.sum(dx * dx, axis=-1)
    d = (x2 * x2 + dt * dt) ** 0.25
    return float(d) if (sa is not None or sb is not None) and np.ndim(d) == 0 else d


def dilate(r, p):
    """Intrinsic dilation ``(x, t) -> (r x, r^2 t)``; ``r`` may hold one factor per point."""
    r = np.asarray(r, dtype=float)
    if not np.all(r > 0):
        raise ValueError("dilation factor must be positive")
    a, sa = _unwrap(p)
    out = np.concatenate([r[..., None] * a[..., :-1], (r * r * a[..., -1])[..., None]], axis=-1)
    return _wrap(out, sa)


def unit_ball_volume(n: int = 1) -> float:
    """Lebesgue volume of the Korányi unit ball in the first Heisenberg group."""
    if n != 1:
        raise NotImplementedError("closed form only for n = 1")
    # 2*pi * int_0^1 2 rho sqrt(1 - rho^4) d rho = pi^2 / 2
    return np.pi ** 2 / 2.0
