import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sobodim.constants import (
    BOUND_TOL,
    CANTOR_DIM,
    EVEN_COVER_OVERLAP_MAX,
    EVEN_COVER_SUM_MAX,
    FROSTMAN_C_MAX,
)
from sobodim.measures import (
    DiscreteMeasure,
    box_dimension,
    counting_measure,
    even_coverability_audit,
    frostman_audit,
    frostman_measure,
    read_measure_csv,
    t_energy,
    write_measure_csv,
)
from sobodim.metric import Euclidean, PointSet
from sobodim.samples import cantor_set, grid_points

LINE = Euclidean(1)
PLANE = Euclidean(2)


def line(xs):
    return PointSet(LINE, np.asarray(xs, dtype=float)[:, None])


def test_measure_rejects_negative_weights():
    with pytest.raises(ValueError):
        DiscreteMeasure(line([0, 1]), [0.5, -0.5])


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 10)))
def test_total_mass_and_pushforward(w):
    nu = DiscreteMeasure(line(np.arange(len(w))), w)
    assert math.isclose(nu.total_mass, math.fsum(w), rel_tol=1e-12, abs_tol=1e-300)
    image = nu.pushforward(lambda x: np.column_stack([np.sin(x[:, 0]), x[:, 0] ** 2]))
    assert image.total_mass == nu.total_mass


def test_ball_masses_dense_and_sparse_paths_agree(rng):
    pts = PointSet(PLANE, rng.random((5000, 2)))
    nu = counting_measure(pts)
    centers = rng.random((3000, 2))
    for r in (0.01, 0.6):
        fast = nu.ball_masses(centers, r)
        slow = np.array([nu.ball_mass(c, r) for c in centers[:200]])
        assert np.allclose(fast[:200], slow, rtol=1e-12, atol=1e-15)


def test_measure_csv_roundtrip(tmp_path, rng):
    nu = DiscreteMeasure(PointSet(PLANE, rng.random((10, 2))), rng.random(10))
    write_measure_csv(tmp_path / "m.csv", nu)
    back = read_measure_csv(tmp_path / "m.csv")
    assert np.array_equal(back.weights, nu.weights)
    assert np.array_equal(back.atoms.coords, nu.atoms.coords)


def test_frostman_grid():
    g = grid_points(101)
    fr = frostman_measure(g, 1.0)
    assert fr.constant <= FROSTMAN_C_MAX
    assert np.all(np.abs(fr.measure.weights * 101 - 1) < 0.15)


def test_frostman_cantor_natural_weights():
    nu = cantor_set(8)
    fr = frostman_measure(nu.atoms, CANTOR_DIM)
    assert fr.constant <= FROSTMAN_C_MAX
    assert np.allclose(fr.measure.weights, nu.weights, rtol=1e-12)
    assert fr.audit_radii[-1] / fr.audit_radii[0] >= 100


def test_frostman_single_atom_is_degenerate():
    fr = frostman_measure(PointSet(PLANE, [[0.2, 0.3]]), 0.5)
    assert fr.measure.total_mass == pytest.approx((2 * fr.scales[-1]) ** 0.5, rel=1e-12)
    assert fr.measure.total_mass < 1e-2
    assert fr.flags == ["degenerate: content ≈ 0"]


def test_frostman_rejects_negative_s():
    with pytest.raises(ValueError):
        frostman_measure(grid_points(5), -1.0)


def test_frostman_audit_is_sound(rng):
    pts = PointSet(PLANE, rng.random((400, 2)))
    fr = frostman_measure(pts, 1.5)
    radii = fr.audit_radii
    C, ratios = frostman_audit(fr.measure, 1.5, radii)
    for k in range(0, 400, 37):
        for r in radii:
            assert fr.measure.ball_mass(pts.coords[k], r) <= C * r ** 1.5 * (1 + 1e-12)


def test_t_energy_examples():
    nu = DiscreteMeasure(line([0, 1]), [0.5, 0.5])
    assert t_energy(nu, 1.0) == 0.5
    w = np.array([0.1, 0.2, 0.3, 0.4])
    nu = DiscreteMeasure(line([0, 0.3, 0.5, 0.9]), w)
    assert t_energy(nu, 0.0) == pytest.approx(nu.total_mass ** 2 - np.sum(w ** 2), rel=1e-14)


def test_t_energy_coincident_atoms_infinite():
    nu = DiscreteMeasure(line([0.2, 0.2, 0.5]), [1, 1, 1])
    assert t_energy(nu, 0.5) == math.inf


@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(0, 1), unique=True),
       st.floats(0, 2), st.floats(0, 2))
def test_t_energy_monotone_in_t(x, t1, t2):
    nu = counting_measure(line(x))
    lo, hi = sorted((t1, t2))
    assert t_energy(nu, lo) <= t_energy(nu, hi) * (1 + 1e-12)


def test_t_energy_refinement_sweep():
    # continuum value of the 1/2-energy of Lebesgue on [0, 1] is 8/3
    half, three_halves = [], []
    for n in (100, 1000, 10000):
        nu = counting_measure(line((np.arange(n) + 0.5) / n))
        half.append(t_energy(nu, 0.5))
        three_halves.append(t_energy(nu, 1.5))
    assert half[0] < half[1] < half[2] < 8 / 3
    assert 8 / 3 - half[2] < 0.05
    # the divergent energy grows like sqrt(n)
    assert three_halves[2] / three_halves[1] > 2.5


def test_box_dimension_single_point():
    est = box_dimension(PointSet(PLANE, [[0.5, 0.5]]), [0.5, 0.1])
    assert est.value == 0.0
    assert est.slope_residual == math.inf


def test_box_dimension_needs_two_scales():
    with pytest.raises(ValueError):
        box_dimension(grid_points(10), [0.1])


@given(st.floats(0.01, 100))
def test_box_dimension_scale_invariant(lam):
    pts = cantor_set(6).atoms
    grid = np.geomspace(0.2, 0.002, 6)
    a = box_dimension(pts, grid)
    b = box_dimension(PointSet(LINE, pts.coords * lam), grid * lam)
    assert abs(a.value - b.value) <= 1e-9


def test_box_dimension_window_labelled():
    est = box_dimension(cantor_set(6).atoms)
    assert est.scale_window[0] < est.scale_window[1]
    assert est.label == "box proxy"


def test_even_cover_single_point():
    rep = even_coverability_audit(PointSet(PLANE, [[0, 0]]), 1.0, 2.0, 0.1)
    assert rep.ball_count == 1 and rep.max_overlap == 1


def test_even_cover_uniform_interval(rng):
    pts = line(rng.random(1000))
    rep = even_coverability_audit(pts, 1.0, 2.0, 0.1)
    assert rep.sum_r_t <= EVEN_COVER_SUM_MAX
    assert rep.max_overlap <= EVEN_COVER_OVERLAP_MAX
    assert rep.sup_radius == 0.1


def test_even_cover_cantor_sweep_uniform():
    pts = cantor_set(8).atoms
    reps = [even_coverability_audit(pts, CANTOR_DIM, 3.0, 3.0 ** -k) for k in range(1, 8)]
    sums = [r.sum_r_t for r in reps]
    assert max(sums) / min(sums) <= 2.0
    assert max(r.max_overlap for r in reps) <= 4
    assert max(r.sup_radius for r in reps) <= 1 / 3


def test_even_cover_rejects_bad_parameters():
    with pytest.raises(ValueError):
        even_coverability_audit(grid_points(3), 1, 0.5, 0.1)
    with pytest.raises(ValueError):
        even_coverability_audit(grid_points(3), 1, 2, 0.0)
