import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spherical_ldp.freeprob import (cauchy_transform, density_from_transform, free_convolution_proxy,
                                    free_cumulants_from_moments, log_energy, moments_from_free_cumulants,
                                    r_transform_series, semicircle_subordination)
from spherical_ldp.measures import QuantileMeasure, dilate, semicircle_density, wasserstein


@settings(max_examples=50)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=8))
def test_cumulant_moment_roundtrip(kappa):
    kappa = np.asarray(kappa)
    back = free_cumulants_from_moments(moments_from_free_cumulants(kappa))
    assert np.allclose(back, kappa, atol=1e-8 * (1 + np.abs(kappa).max()) ** len(kappa))


def test_catalan_moments():
    m = moments_from_free_cumulants([0, 1, 0, 0, 0, 0, 0, 0])
    assert np.allclose(m, [0, 1, 0, 2, 0, 5, 0, 14])


def test_semicircle_cumulants():
    k = r_transform_series(QuantileMeasure.semicircle(m=256), order=4).free_cumulants
    assert np.allclose(k, [0, 1, 0, 0], atol=1e-3)
    k = r_transform_series(QuantileMeasure.semicircle(m=1024), order=8).free_cumulants
    assert np.allclose(k, [0, 1, 0, 0, 0, 0, 0, 0], atol=5e-4)


def test_dirac_cumulants_and_integral():
    s = r_transform_series(QuantileMeasure.dirac(1.5), order=6)
    assert np.allclose(s.free_cumulants, [1.5, 0, 0, 0, 0, 0], atol=1e-12)
    val, ok = s.integral(0.4)
    assert ok and val == pytest.approx(0.6)
    with pytest.raises(ValueError):
        r_transform_series(QuantileMeasure.dirac(0.0), order=0)


def test_cauchy_transform():
    mu = QuantileMeasure(np.array([-1.0, 1.0]))
    z = 0.3 + 0.7j
    assert cauchy_transform(mu, z) == pytest.approx(0.5 / (z + 1) + 0.5 / (z - 1))
    with pytest.raises(ValueError, match="off the real axis"):
        cauchy_transform(mu, 1.0)


def test_subordination_gives_semicircle():
    z = np.array([0.3 + 0.01j, -1.2 + 0.5j, 2.5 + 1e-3j])
    w, G = semicircle_subordination(QuantileMeasure.dirac(0.0), 1.0, z)
    exact = (z - np.sqrt(z - 2) * np.sqrt(z + 2)) / 2
    assert np.allclose(G, exact, atol=1e-10)
    assert np.allclose(w, z - G, atol=1e-10)
    x = np.linspace(-1.9, 1.9, 77)
    curve = density_from_transform(lambda q: semicircle_subordination(QuantileMeasure.dirac(0.0), 1.0, q)[1],
                                   x, eta=1e-3)
    assert np.max(np.abs(curve.density - semicircle_density(x))) < 0.01


def test_subordination_symmetric_pair():
    lam = QuantileMeasure(np.array([-1.0, 1.0]))
    x = np.linspace(-4, 4, 801)
    curve = density_from_transform(lambda q: semicircle_subordination(lam, 1.0, q)[1], x, eta=1e-3)
    assert curve.total_mass == pytest.approx(1.0, abs=0.01)
    assert np.allclose(curve.density, curve.density[::-1], atol=1e-6)


def test_subordination_zero_variance_and_errors():
    lam = QuantileMeasure.uniform(0, 1, 16)
    z = np.array([0.5 + 1j])
    w, G = semicircle_subordination(lam, 0.0, z)
    assert np.allclose(w, z) and np.allclose(G, cauchy_transform(lam, z))
    with pytest.raises(ValueError):
        semicircle_subordination(lam, 1.0, np.array([0.5 - 1j]))
    with pytest.raises(ValueError):
        semicircle_subordination(lam, -1.0, z)


def test_log_energy_reference_values():
    assert log_energy(QuantileMeasure.uniform(0, 1, 512)) == pytest.approx(-1.5, abs=2e-3)
    assert log_energy(QuantileMeasure.semicircle(1.0, m=512)) == pytest.approx(-0.25, abs=2e-3)
    assert log_energy(QuantileMeasure.dirac(1.0)) == float("-inf")


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10))
def test_log_energy_dilation(L):
    mu = QuantileMeasure.semicircle(m=128)
    assert log_energy(dilate(mu, L)) == pytest.approx(log_energy(mu) + np.log(L), abs=1e-10)


def test_free_convolution_proxy():
    sc = QuantileMeasure.semicircle(0.5, m=256)
    res = free_convolution_proxy(sc, sc, N=128, n_samples=4, seed=1)
    # σ_{1/2} ⊞ σ_{1/2} = σ_1
    assert wasserstein(res.measure, QuantileMeasure.semicircle(1.0, m=256)) < 0.05
    assert res.stderr > 0 and res.per_sample_means.size == 4
    const = free_convolution_proxy(sc, QuantileMeasure.dirac(2.0), N=64)
    assert const.stderr == 0 and const.measure.mean() == pytest.approx(2.0)
