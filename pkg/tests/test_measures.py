import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spherical_ldp.measures import (QuantileMeasure, cell_averages, counting_measure, dilate,
                                    pairing_integral, quantile_from_samples, read_measure_csv,
                                    schur_horn_report, semicircle_cdf, semicircle_density,
                                    semicircle_quantile, truncate, wasserstein, weak_distance,
                                    write_measure_csv)

grids = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40).map(
    lambda v: QuantileMeasure(np.sort(np.asarray(v))))


def test_rejects_bad_grids():
    with pytest.raises(ValueError, match="nondecreasing"):
        QuantileMeasure(np.array([1.0, 0.0]))
    with pytest.raises(ValueError, match="non-finite"):
        QuantileMeasure(np.array([0.0, np.inf]))
    with pytest.raises(ValueError):
        QuantileMeasure(np.array([]))
    with pytest.raises(ValueError, match="support bound"):
        QuantileMeasure(np.array([0.0, 3.0]), support_bound=2.0)


def test_constructors_moments():
    u = QuantileMeasure.uniform(0, 1, 1000)
    assert u.mean() == pytest.approx(0.5)
    assert u.moment(2) == pytest.approx(1 / 3, abs=1e-6)
    sc = QuantileMeasure.semicircle(2.0, m=2000)
    assert sc.moment(2) == pytest.approx(2.0, rel=1e-3)
    assert sc.moment(4) == pytest.approx(2 * 4.0, rel=3e-3)
    d = QuantileMeasure.dirac(1.5)
    assert d.is_dirac() and d.atoms == [(1.5, 1.0)]
    at = QuantileMeasure.from_atoms([-1, 1], [0.25, 0.75], m=8)
    assert at.atoms == [(-1.0, 0.25), (1.0, 0.75)]
    assert QuantileMeasure.arcsine(2.0, 4000).moment(2) == pytest.approx(2.0, rel=1e-3)


def test_semicircle_functions_consistent():
    u = np.linspace(0.01, 0.99, 50)
    x = semicircle_quantile(u, 0.5)
    assert np.allclose(semicircle_cdf(x, 0.5), u, atol=1e-10)
    xs = np.linspace(-2, 2, 4001)
    assert np.trapezoid(semicircle_density(xs), xs) == pytest.approx(1, abs=1e-4)


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=30), st.integers(1, 12))
def test_cell_averages_preserve_mean_and_order(v, n):
    v = np.sort(np.asarray(v))
    c = cell_averages(v, n)
    assert c.size == n
    assert np.all(np.diff(c) >= -1e-12)
    assert c.mean() == pytest.approx(v.mean(), abs=1e-12)


def test_cell_averages_refinement_is_exact():
    v = np.array([0.0, 1.0, 2.0])
    assert np.allclose(cell_averages(v, 6), [0, 0, 1, 1, 2, 2])
    assert np.allclose(cell_averages(v, 1), [1.0])


@settings(max_examples=60)
@given(grids, grids, grids)
def test_wasserstein_metric(mu, nu, rho):
    assert wasserstein(mu, mu) == 0
    assert wasserstein(mu, nu) == pytest.approx(wasserstein(nu, mu))
    assert wasserstein(mu, rho) <= wasserstein(mu, nu) + wasserstein(nu, rho) + 1e-12


@settings(max_examples=40)
@given(grids, st.floats(-2, 2))
def test_wasserstein_translation(mu, c):
    shifted = QuantileMeasure(mu.t_values + c)
    assert wasserstein(mu, shifted) == pytest.approx(abs(c), abs=1e-9)


@settings(max_examples=40)
@given(grids, grids)
def test_pairing_rearrangement(mu, nu):
    # sorted pairing dominates the anti-sorted one
    assert pairing_integral(mu, nu) >= -pairing_integral(mu, dilate(nu, -1)) - 1e-9


def test_dilate_and_truncate():
    mu = QuantileMeasure.uniform(0, 1, 10)
    assert np.allclose(dilate(mu, -2).t_values, np.sort(-2 * mu.t_values))
    assert truncate(QuantileMeasure.dirac(5.0, 4), 1.0).is_dirac()
    assert truncate(QuantileMeasure.dirac(5.0, 4), 1.0).mean() == 0
    tr = truncate(QuantileMeasure(np.array([-10.0, 2.0])), 0.2)
    assert np.array_equal(tr.t_values, [0.0, 2.0])
    mu2 = QuantileMeasure.uniform(-1, 1, 8)
    assert np.array_equal(truncate(mu2, 0.5).t_values, mu2.t_values)


def test_weak_distance_small_for_close_measures():
    a = QuantileMeasure.uniform(0, 1, 200)
    b = QuantileMeasure(a.t_values + 0.001)
    far = QuantileMeasure.dirac(3.0)
    assert weak_distance(a, a) == 0
    assert weak_distance(a, b) < 0.01 < weak_distance(a, far) <= 1


def test_schur_horn_report_majorization():
    B = QuantileMeasure(np.array([-1.0, 1.0]))
    assert schur_horn_report(QuantileMeasure.dirac(0.0, 2), B).admissible
    assert not schur_horn_report(QuantileMeasure(np.array([-2.0, 2.0])), B).admissible
    shifted = schur_horn_report(QuantileMeasure.dirac(0.5, 2), B)
    assert shifted.mean_gap == pytest.approx(0.5)


def test_counting_measure():
    mu = counting_measure((2, 1), 3)
    assert np.allclose(mu.t_values, [0, 2 / 3, 4 / 3])
    with pytest.raises(ValueError):
        counting_measure((1, 1, 1, 1), 3)


def test_quantile_from_samples():
    rng = np.random.default_rng(0)
    mu = quantile_from_samples(rng.uniform(size=20000), 64)
    assert wasserstein(mu, QuantileMeasure.uniform(0, 1, 64)) < 0.01
    with pytest.raises(ValueError, match="empty"):
        quantile_from_samples([])
    with pytest.raises(ValueError, match="non-finite"):
        quantile_from_samples([0.0, math.nan])


def test_csv_roundtrip(tmp_path):
    mu = QuantileMeasure.semicircle(m=32)
    p = write_measure_csv(mu, tmp_path / "m.csv")
    assert np.array_equal(read_measure_csv(p).t_values, mu.t_values)
    bad = tmp_path / "bad.csv"
    bad.write_text("quantile,value\n0.25,1\n0.75,0\n")
    with pytest.raises(ValueError, match="not monotone"):
        read_measure_csv(bad)
