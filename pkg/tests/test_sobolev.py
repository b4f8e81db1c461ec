import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sobodim.bounds import alpha_max
from sobodim.constants import BOUND_TOL, UPPER_GRADIENT_SLACK
from sobodim.errors import EmptyInputError, ParameterRangeError, SpaceMismatchError
from sobodim.heisenberg import HEISENBERG_1
from sobodim.measures import DiscreteMeasure, counting_measure
from sobodim.metric import Euclidean, Point, PointSet
from sobodim.samples import cantor_dust
from sobodim.sobolev import (
    build_construction,
    damping,
    level_exponent,
    level_lp_norms,
    load_bundle,
    morrey_diagnostic,
    save_bundle,
    uniform_ball,
    write_evaluations_csv,
)

PLANE = Euclidean(2)


@pytest.fixture(scope="module")
def dust_map():
    nu = cantor_dust(5)
    return build_construction(nu.atoms, nu, 4 / 3, 2, 5, seed=7)


def single_point_map():
    pts = PointSet(PLANE, [[0.3, 0.4]])
    return build_construction(pts, counting_measure(pts), 1.0, 2, 1, seed=3)


def test_damping_and_exponent():
    assert damping(1) == 0.25
    assert abs(level_exponent(4, 2, 1, 4 / 3)) <= BOUND_TOL
    assert level_exponent(8, 2, 1, 4 / 3) > 0 > level_exponent(3, 2, 1, 4 / 3)


@given(st.integers(0, 2 ** 32), st.integers(1, 6))
def test_uniform_ball_inside(seed, dim):
    x = uniform_ball(np.random.default_rng(seed), 200, dim)
    assert np.all(np.linalg.norm(x, axis=1) <= 1.0)


def test_uniform_ball_radial_law():
    x = uniform_ball(np.random.default_rng(0), 20000, 2)
    r = np.linalg.norm(x, axis=1)
    # P(|x| < 1/2) = 1/4 in the plane
    assert abs(np.mean(r < 0.5) - 0.25) < 0.02


def test_single_ball_map():
    fmap = single_point_map()
    (lev,) = fmap.levels
    assert len(lev) == 1 and lev.weights[0] == 1.0
    c = Point(PLANE, (0.3, 0.4))
    assert np.array_equal(fmap.evaluate(c), 0.25 * lev.xi[0])
    assert fmap.lip_upper(c) == 0.25 * 1.0 / lev.radius
    assert np.array_equal(fmap.evaluate(Point(PLANE, (5.0, 5.0))), np.zeros(2))
    assert fmap.lip_upper(Point(PLANE, (5.0, 5.0))) == 0.0


def test_level_center_value():
    pts = PointSet(PLANE, [[0.0, 0.0], [0.9, 0.0]])
    fmap = build_construction(pts, counting_measure(pts), 1.0, 2, 2, seed=1)
    lev = fmap.level(2)
    for k, c in enumerate(lev.centers):
        got = fmap.evaluate(c[None], levels=[2])[0]
        assert np.array_equal(got, damping(2) * lev.weights[k] * lev.xi[k])


def test_construction_errors():
    pts = PointSet(PLANE, [[0.1, 0.1], [0.2, 0.2]])
    nu = counting_measure(pts)
    with pytest.raises(ParameterRangeError):
        build_construction(pts, nu, 2.0, 2, 3, 0)
    with pytest.raises(EmptyInputError):
        build_construction(PointSet(PLANE, np.zeros((0, 2))), nu, 1.0, 2, 3, 0)
    with pytest.raises(ParameterRangeError):
        build_construction(pts, nu.scaled(0.0), 1.0, 2, 3, 0)
    with pytest.raises(SpaceMismatchError):
        fmap = build_construction(pts, nu, 1.0, 2, 3, 0)
        fmap.evaluate(Point(HEISENBERG_1, (0, 0, 0)))


def test_null_measure_gives_constant_map():
    pts = PointSet(PLANE, [[0.1, 0.1], [0.2, 0.2]])
    fmap = build_construction(pts, counting_measure(pts).scaled(0.0), 1.0, 2, 3, 0,
                              allow_null_measure=True)
    assert "degenerate measure" in fmap.flags
    assert not fmap.evaluate(pts).any()
    norms = level_lp_norms(fmap, 4.0)
    assert all(v == 0 for v in norms.norms)


def test_rescaling_recorded():
    pts = PointSet(PLANE, [[0.0, 0.0], [3.0, 4.0]])
    fmap = build_construction(pts, counting_measure(pts), 1.0, 2, 3, 0)
    assert fmap.scale == pytest.approx(0.99 / 5.0)
    assert any(f.startswith("rescaled by") for f in fmap.flags)


def test_determinism(dust_map):
    nu = cantor_dust(5)
    again = build_construction(nu.atoms, nu, 4 / 3, 2, 5, seed=7)
    for a, b in zip(dust_map.levels, again.levels):
        assert np.array_equal(a.xi, b.xi) and np.array_equal(a.weights, b.weights)
    assert np.array_equal(dust_map.evaluate(nu.atoms), again.evaluate(nu.atoms))


def test_structure_invariants(dust_map):
    prev = None
    for lev in dust_map.levels:
        assert np.all(np.linalg.norm(lev.xi, axis=1) <= 1.0)
        assert np.allclose(dust_map.recomputed_weights(lev.n), lev.weights, rtol=1e-12, atol=0)
        if prev is not None:
            assert lev.center_index[: len(prev)].tolist() == prev.center_index.tolist()
        prev = lev


def test_sup_bound(dust_map, rng):
    x = rng.random((4000, 2))
    assert np.linalg.norm(dust_map.evaluate(x), axis=1).max() <= dust_map.sup_bound()


def test_tail_bound_covers_next_level():
    nu = cantor_dust(5)
    for n_max in (3, 4):
        short = build_construction(nu.atoms, nu, 4 / 3, 2, n_max, seed=2)
        longer = build_construction(nu.atoms, nu, 4 / 3, 2, n_max + 1, seed=2)
        change = np.linalg.norm(longer.evaluate(nu.atoms) - short.evaluate(nu.atoms), axis=1).max()
        assert change <= short.tail_bound()


def test_upper_gradient_on_segments(dust_map, rng):
    for _ in range(300):
        a, b = rng.random(2) * 1.2 - 0.1, rng.random(2) * 1.2 - 0.1
        if rng.random() < 0.5:
            b = a + rng.normal(scale=0.02, size=2)
        diff = np.linalg.norm(dust_map.evaluate(a[None])[0] - dust_map.evaluate(b[None])[0])
        assert diff <= dust_map.segment_bound(a, b) + UPPER_GRADIENT_SLACK


def test_lip_upper_matches_level_sum(dust_map, rng):
    x = rng.random((50, 2))
    total = sum(damping(n) * dust_map.level_lip(x, n) for n in range(1, 6))
    assert np.allclose(dust_map.lip_upper(x), total * dust_map.scale, rtol=1e-12)


def test_level_norms_with_reference(dust_map):
    ref = counting_measure(PointSet(PLANE, np.random.default_rng(0).random((2000, 2))))
    L = level_lp_norms(dust_map, 4.0, reference=ref)
    assert len(L.norms) == 5 and all(v > 0 for v in L.norms)
    assert L.total_upper == pytest.approx(math.fsum(damping(n) * v for n, v in zip(L.levels, L.norms)))
    with pytest.raises(EmptyInputError):
        level_lp_norms(dust_map, 4.0, reference=DiscreteMeasure(PointSet(PLANE, np.zeros((0, 2))), []))


def test_morrey_constant_map_is_vacuous():
    rep = morrey_diagnostic(lambda x: np.zeros((len(x), 2)), [((0, 0), 0.5)], 4.0, g=lambda x: np.ones(len(x)))
    assert rep.sup_ratio == 0.0 and "vacuous" in rep.flags


def test_morrey_identity():
    balls = [((0.2, 0.3), 0.1), ((0.5, 0.5), 0.3)]
    rep = morrey_diagnostic(lambda x: x, balls, 4.0, g=lambda x: np.ones(len(x)), samples_per_ball=2000)
    assert all(0.95 <= r <= 1.0 for r in rep.ratios)


def test_morrey_stable_under_doubling(dust_map, rng):
    balls = [(rng.random(2), 0.02 + 0.2 * rng.random()) for _ in range(100)]
    a = morrey_diagnostic(dust_map, balls, 4.0, samples_per_ball=256)
    b = morrey_diagnostic(dust_map, balls, 4.0, samples_per_ball=512)
    assert np.isfinite(a.sup_ratio) and np.isfinite(b.sup_ratio)
    assert 0.5 <= b.sup_ratio / a.sup_ratio <= 2.0


def test_bundle_roundtrip(dust_map, tmp_path, rng):
    save_bundle(dust_map, tmp_path / "map.json")
    back = load_bundle(tmp_path / "map.json")
    x = rng.random((100, 2))
    assert np.array_equal(back.evaluate(x), dust_map.evaluate(x))
    assert json.loads((tmp_path / "map.json").read_text())["seed"] == 7


def test_evaluations_csv(dust_map, tmp_path):
    pts = PointSet(PLANE, [[0.1, 0.2], [0.5, 0.5]])
    write_evaluations_csv(tmp_path / "ev.csv", dust_map, pts)
    lines = (tmp_path / "ev.csv").read_text().splitlines()
    assert lines[0] == "coord0,coord1,f0,f1"
    assert len(lines) == 3


def test_heisenberg_ambient_construction(rng):
    pts = PointSet(HEISENBERG_1, rng.normal(scale=0.2, size=(300, 3)))
    Q, s, p = 4.0, 2.0, 5.0
    fmap = build_construction(pts, counting_measure(pts), alpha_max(p, Q, s), 4, 4, seed=0)
    assert fmap.evaluate(pts).shape == (300, 4)
    assert np.linalg.norm(fmap.evaluate(pts), axis=1).max() <= fmap.sup_bound()
