import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sobodim.carpet import CarpetSpec, carpet_address, carpet_contains, carpet_sample
from sobodim.constants import AHLFORS_C_MAX, ALGEBRA_TOL
from sobodim.grushin import grushin_bracket, grushin_core
from sobodim.heisenberg import (
    HEISENBERG_1,
    Heisenberg,
    dilate,
    heis_inv,
    heis_mul,
    identity,
    koranyi_dist,
    koranyi_norm,
)
from sobodim.metric import Point

coord = st.floats(-5, 5, allow_nan=False)
h1 = st.tuples(coord, coord, coord).map(np.array)
h2 = st.tuples(*[coord] * 5).map(np.array)


def test_group_law_example():
    assert heis_mul(np.array([1.0, 0, 0]), np.array([0, 1.0, 0])).tolist() == [1.0, 1.0, -2.0]


def test_group_law_on_points_keeps_space():
    p = heis_mul(Point(HEISENBERG_1, (1, 0, 0)), Point(HEISENBERG_1, (0, 1, 0)))
    assert isinstance(p, Point) and p.coords == (1.0, 1.0, -2.0)


def test_group_law_dimension_mismatch():
    with pytest.raises(Exception):
        heis_mul(np.zeros(3), np.zeros(5))


@given(h1)
def test_identity_and_inverse(p):
    e = identity(1)
    assert np.array_equal(heis_mul(e, p), p)
    assert np.array_equal(heis_mul(p, e), p)
    assert np.allclose(heis_mul(p, heis_inv(p)), e, atol=ALGEBRA_TOL)


@given(h2, h2, h2)
def test_associativity_h2(p, q, r):
    lhs = heis_mul(heis_mul(p, q), r)
    rhs = heis_mul(p, heis_mul(q, r))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_koranyi_examples():
    e = identity(1)
    assert koranyi_dist(e, np.array([-2.5, 0, 0])) == 2.5
    assert koranyi_dist(e, np.array([0, 0, -9.0])) == 3.0
    assert Heisenberg(2).homogeneous_dim == 6


@given(h1, h1, h1)
def test_left_invariance(g, p, q):
    d = koranyi_dist(p, q)
    dg = koranyi_dist(heis_mul(g, p), heis_mul(g, q))
    assert abs(dg - d) <= 1e-12 * max(1.0, d) * 50


@given(h1, h1, st.floats(0.1, 10))
def test_dilation_homogeneity(p, q, r):
    assert np.allclose(dilate(r, heis_mul(p, q)), heis_mul(dilate(r, p), dilate(r, q)), rtol=1e-12, atol=1e-9)
    if koranyi_norm(p) > 1e-6:
        assert abs(koranyi_norm(dilate(r, p)) / koranyi_norm(p) - r) <= 1e-12 * r * 10
    d = koranyi_dist(p, q)
    assert abs(koranyi_dist(dilate(r, p), dilate(r, q)) - r * d) <= 1e-12 * max(1.0, r * d) * 50


def test_dilation_examples():
    assert dilate(2.0, np.array([1.0, 1, 1])).tolist() == [2.0, 2.0, 4.0]
    p = np.array([0.3, -0.7, 2.0])
    assert np.array_equal(dilate(1.0, p), p)
    with pytest.raises(ValueError):
        dilate(0.0, p)


def test_grushin_examples():
    assert grushin_bracket((0, 0), (0, 1)).core == 1.0
    assert grushin_bracket((1, 0), (3, 0)).core == 2.0
    assert grushin_bracket((2, 0), (2, 1)).core == 0.5
    b = grushin_bracket((0.3, 0.3), (0.3, 0.3))
    assert b.lower == b.upper == b.core == 0.0


@given(st.tuples(coord, coord), st.tuples(coord, coord), st.floats(1, 20))
def test_grushin_bracket_consistency(w1, w2, C1):
    b = grushin_bracket(w1, w2, C1)
    assert b.lower <= b.upper
    if b.core > 0:
        assert math.isclose(b.upper / b.lower, C1 * C1, rel_tol=1e-12)
    assert grushin_core(w1, w2) == grushin_core(w2, w1)


def test_carpet_examples():
    spec = CarpetSpec("2n+1", 4)
    assert not carpet_contains(spec, (0.5, 0.5), 1)
    for depth in range(1, 5):
        assert carpet_contains(spec, (0.0, 0.0), depth)
    assert not carpet_contains(spec, (0.4, 0.4), 1)
    assert carpet_address(spec, (0.4, 0.4), 1).tolist() == [[1, 1]]


def test_carpet_boundary_goes_to_last_cell():
    spec = CarpetSpec("2n+1", 2)
    assert carpet_address(spec, (1.0, 1.0), 1).tolist() == [[2, 2]]
    assert carpet_contains(spec, (1.0, 1.0), 2)


def test_carpet_rejects_points_outside():
    with pytest.raises(ValueError):
        carpet_contains(CarpetSpec(), (1.5, 0.2), 1)


def test_carpet_depth_one_exhaustive():
    pts, nu = carpet_sample(CarpetSpec("2n+1", 1), 1)
    assert len(pts) == 8
    assert np.all(nu.weights == 1 / 8)


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_carpet_mass_conservation(depth):
    spec = CarpetSpec("2n+1", 3)
    pts, nu = carpet_sample(spec, depth)
    assert abs(nu.total_mass - 1.0) <= 1e-12
    assert len(pts) == spec.cell_count(depth) == math.prod(a * a - 1 for a in spec.factors(depth))
    # no address selects a removed central cell
    for k, a in enumerate(spec.factors(depth)):
        centre = (pts.addresses[:, k, 0] == a // 2) & (pts.addresses[:, k, 1] == a // 2)
        assert not centre.any()


def test_carpet_partial_sums_converge():
    spec = CarpetSpec("2n+1", 60)
    sums = spec.partial_sums(60)
    assert np.all(np.diff(sums) > 0)
    # sum over n >= 1 of (2n+1)^-2 = pi^2/8 - 1
    assert sums[-1] < math.pi ** 2 / 8 - 1


def test_carpet_spec_json_roundtrip():
    for spec in (CarpetSpec("2n+1", 3), CarpetSpec([3, 5, 9], 3)):
        assert CarpetSpec.from_json(spec.to_json()) == spec
    assert json.loads(CarpetSpec([3, 5], 2).to_json()) == {"sequence": [3, 5], "max_depth": 2}


def test_carpet_rejects_even_factor():
    with pytest.raises(ValueError):
        CarpetSpec([3, 4], 2)


def test_carpet_sample_deterministic():
    spec = CarpetSpec("2n+1", 3)
    a, _ = carpet_sample(spec, 3, 500, rng_seed=9)
    b, _ = carpet_sample(spec, 3, 500, rng_seed=9)
    assert np.array_equal(a.coords, b.coords)


def test_carpet_ahlfors_ratios():
    spec = CarpetSpec("2n+1", 3)
    pts, nu = carpet_sample(spec, 3, 100000, rng_seed=1)
    centers = pts.coords[:: len(pts) // 100]
    ratios = np.column_stack(
        [nu.ball_masses(centers, r) / r ** 2 for r in np.geomspace(0.005, 0.5, 5)]
    )
    C = max(ratios.max(), 1 / ratios.min())
    assert C <= AHLFORS_C_MAX
