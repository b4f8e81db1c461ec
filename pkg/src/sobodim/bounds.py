"""Closed-form dimension distortion bounds and their admissible ranges."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import ParameterRangeError

KINDS = ("universal", "foliation", "carpet", "heis_left", "heis_vertical", "heis_grushin")


@dataclass(frozen=True)
class BoundParams:
    Q: float
    s: float
    p: float
    alpha: Optional[float] = None
    s_hat: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.s <= self.Q:
            raise ParameterRangeError(f"need 0 <= s <= Q, got s={self.s}, Q={self.Q}")
        if not self.p > self.Q:
            raise ParameterRangeError(f"need p > Q, got p={self.p}, Q={self.Q}")
        if self.s_hat is not None and not 0 <= self.s_hat <= self.s:
            raise ParameterRangeError("need 0 <= s_hat <= s")


@dataclass(frozen=True)
class BoundResult:
    kind: str
    value: Optional[float]
    alpha_interval: tuple  # (lo, hi) meaning lo < alpha <= hi
    alpha_max: float

    def as_dict(self):
        return {
            "kind": self.kind,
            "value": self.value,
            "alpha_interval": list(self.alpha_interval),
            "alpha_max": self.alpha_max,
        }


def alpha_max(p, Q, s):
    """Sharp target dimension ``p s / (p - Q + s)``."""
    return p * s / (p - Q + s)


def universal_bound(p, Q, dim_e):
    """Upper bound for the image dimension of a set of dimension ``dim_e``."""
    return p * dim_e / (p - Q + dim_e)


def foliation_bound(Q, s, p, alpha):
    return (Q - s) - p * (1.0 - s / alpha)


def _fmt(x):
    try:
        f = Fraction(x).limit_denominator(1000)
        if abs(float(f) - x) < 1e-12 and f.denominator != 1:
            return f"{f} (={x:.6g})"
    except (TypeError, ValueError, OverflowError):
        pass
    return f"{x:.12g}"


def _check_alpha(kind, alpha, lo, hi):
    if alpha is None:
        raise ParameterRangeError(f"{kind}: alpha is required", (lo, hi, True, False))
    if not (lo < alpha <= hi * (1 + 1e-15)):
        raise ParameterRangeError(
            f"{kind}: alpha={alpha!r} outside the admissible interval ({_fmt(lo)}, {_fmt(hi)}]",
            (lo, hi, True, False),
        )


def _model(kind, bp):
    """``(Q, s, p)`` for the model foliations; validates the exponent ``p``."""
    if kind == "carpet":
        Q, s, pmin = 2.0, 1.0, 2.0
    elif kind == "heis_left":
        Q, s, pmin = 4.0, 3.0, 4.0
    elif kind in ("heis_vertical", "heis_grushin"):
        Q, s, pmin = 4.0, 2.0, 4.0
    else:
        return bp.Q, bp.s
    if not bp.p > pmin:
        raise ParameterRangeError(f"{kind}: need p > {pmin:g}, got p={bp.p}")
    return Q, s


def admissible_alpha(bp: BoundParams, which: str):
    Q, s = _model(which, bp)
    if which == "universal":
        return (0.0, alpha_max(bp.p, Q, s))
    return (s, alpha_max(bp.p, Q, s))


def distortion_bounds(bp: BoundParams, which: str, metric: str = "euclidean") -> BoundResult:
    """Evaluate one of the closed-form bounds.

    ``universal``: ``p s / (p - Q + s)`` with ``s`` read as ``dim E``.
    ``foliation``: ``(Q - s) - p (1 - s / alpha)`` for ``alpha`` in
    ``(s, p s / (p - Q + s)]``.  The model cases fix ``(Q, s)``:
    ``carpet`` (2, 1), ``heis_left`` (4, 3), ``heis_grushin`` (4, 2) and
    ``heis_vertical`` (4, 2), whose parameter set carries the Euclidean metric
    (dimension 2) or, with ``metric="koranyi"``, the Korányi one (dimension 3).
    """
    if which not in KINDS:
        raise ValueError(f"unknown bound kind {which!r}; expected one of {KINDS}")
    Q, s = _model(which, bp)
    amax = alpha_max(bp.p, Q, s)
    if which == "universal":
        return BoundResult(which, amax, (0.0, amax), amax)
    if not 0 < s < Q:
        raise ParameterRangeError(f"{which}: need 0 < s < Q, got s={s}, Q={Q}")
    _check_alpha(which, bp.alpha, s, amax)
    a = bp.alpha
    if which == "carpet":
        value = 1.0 - bp.p * (1.0 - 1.0 / a)
    elif which == "heis_left":
        value = 1.0 - bp.p * (1.0 - 3.0 / a)
    elif which == "heis_grushin":
        value = 2.0 - bp.p * (1.0 - 2.0 / a)
    elif which == "heis_vertical":
        base = 3.0 if metric == "koranyi" else 2.0
        value = base - bp.p * (1.0 - 2.0 / a)
    else:
        value = foliation_bound(Q, s, bp.p, a)
    return BoundResult(which, value, (s, amax), amax)


def remark_gap(bp: BoundParams) -> float:
    """Foliation bound at ``alpha = p s_hat / (p - Q + s_hat)`` when leaves are thinner.

    Equals ``(p - Q)(s / s_hat - 1)``; positive whenever ``s_hat < s``.
    """
    if bp.s_hat is None or bp.s_hat <= 0:
        raise ParameterRangeError("remark_gap needs 0 < s_hat")
    a = alpha_max(bp.p, bp.Q, bp.s_hat)
    return foliation_bound(bp.Q, bp.s, bp.p, a)
