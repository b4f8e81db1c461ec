import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sobodim.bounds import (
    BoundParams,
    admissible_alpha,
    alpha_max,
    distortion_bounds,
    foliation_bound,
    remark_gap,
    universal_bound,
)
from sobodim.constants import BOUND_TOL
from sobodim.errors import ParameterRangeError


def test_alpha_max_example():
    assert alpha_max(4, 2, 1) == pytest.approx(4 / 3, abs=BOUND_TOL)
    assert distortion_bounds(BoundParams(2, 1, 4), "universal").value == pytest.approx(4 / 3, abs=BOUND_TOL)


@given(st.floats(0.5, 10), st.floats(0.01, 50))
def test_alpha_max_at_s_equal_Q(Q, extra):
    assert abs(alpha_max(Q + extra, Q, Q) - Q) <= BOUND_TOL * Q


def test_carpet_interval():
    for p in (2.5, 3.0, 4.0, 10.0):
        lo, hi = admissible_alpha(BoundParams(2, 1, p), "carpet")
        assert lo == 1.0
        assert abs(hi - p / (p - 1)) <= BOUND_TOL


def test_foliation_example():
    value = distortion_bounds(BoundParams(4, 3, 5, alpha=3.5), "foliation").value
    assert value == pytest.approx(2 / 7, abs=BOUND_TOL)
    assert distortion_bounds(BoundParams(4, 3, 5, alpha=3.5), "heis_left").value == pytest.approx(2 / 7, abs=BOUND_TOL)


def test_grushin_example():
    value = distortion_bounds(BoundParams(4, 2, 5, alpha=2.5), "heis_grushin").value
    assert value == pytest.approx(1.0, abs=BOUND_TOL)


def test_out_of_range_alpha_names_interval():
    with pytest.raises(ParameterRangeError) as exc:
        distortion_bounds(BoundParams(2, 1, 4, alpha=1.5), "carpet")
    assert "(1, 4/3" in str(exc.value)
    with pytest.raises(ParameterRangeError):
        distortion_bounds(BoundParams(2, 1, 4, alpha=1.0), "carpet")


def test_bound_params_validation():
    with pytest.raises(ParameterRangeError):
        BoundParams(2, 3, 4)
    with pytest.raises(ParameterRangeError):
        BoundParams(2, 1, 2)


@given(st.floats(4.01, 40), st.floats(0, 1))
def test_model_bounds_match_generic(p, frac):
    for kind, (Q, s) in (("heis_left", (4, 3)), ("heis_grushin", (4, 2)), ("carpet", (2, 1))):
        amax = alpha_max(p, Q, s)
        a = s + frac * (amax - s)
        assume(a > s)
        got = distortion_bounds(BoundParams(Q, s, p, alpha=a), kind).value
        assert abs(got - foliation_bound(Q, s, p, a)) <= BOUND_TOL * max(1.0, p)


@given(st.floats(2.01, 30), st.floats(0.05, 1.95))
def test_endpoint_bound(p, s):
    Q = 2.0
    a = alpha_max(p, Q, s)
    # at the right endpoint the bound vanishes
    assert abs(distortion_bounds(BoundParams(Q, s, p, alpha=a), "foliation").value) <= 1e-9 * p


@given(st.floats(2.01, 30), st.floats(0.0, 2.0))
def test_universal_bound_at_least_dimension(p, dim):
    assert universal_bound(p, 2.0, dim) >= dim - BOUND_TOL


def test_heis_vertical_metric_choice():
    bp = BoundParams(4, 2, 5, alpha=2.5)
    assert distortion_bounds(bp, "heis_vertical").value == pytest.approx(1.0, abs=BOUND_TOL)
    assert distortion_bounds(bp, "heis_vertical", metric="koranyi").value == pytest.approx(2.0, abs=BOUND_TOL)


@given(st.floats(4.5, 20), st.floats(0.2, 1.9))
def test_remark_gap_positive(p, s_hat):
    bp = BoundParams(4, 2, p, s_hat=s_hat)
    gap = remark_gap(bp)
    assert gap > 0
    assert math.isclose(gap, (p - 4) * (2 / s_hat - 1), rel_tol=1e-9)


def test_unknown_kind():
    with pytest.raises(ValueError):
        distortion_bounds(BoundParams(2, 1, 4), "nope")
