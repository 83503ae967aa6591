import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spherical_ldp.errors import DegenerateSpectrumError
from spherical_ldp.hciz import (finite_rate, hciz_exact, hciz_mc, hciz_perm_sum, limit_I_estimate,
                                log_norm_constant, rank_one_asymptotic_check, snap_ties)
from spherical_ldp.measures import QuantileMeasure

spectra = st.integers(2, 5).flatmap(
    lambda n: st.tuples(st.lists(st.floats(-2, 2), min_size=n, max_size=n, unique=True),
                        st.lists(st.floats(-2, 2), min_size=n, max_size=n, unique=True)))


def _spread(v, gap=1e-3):
    v = np.sort(np.asarray(v))
    return np.all(np.diff(v) > gap)


def test_n1_is_exponential():
    assert float(hciz_exact([2.0], [3.0]).log_value) == 6.0
    r = hciz_exact([0.7], [-1.3])
    assert float(mpmath.exp(r.log_value)) == pytest.approx(math.exp(-0.91), rel=1e-15)


@settings(max_examples=25, deadline=None)
@given(spectra)
def test_exact_matches_permutation_sum(ab):
    a, b = ab
    if not (_spread(a) and _spread(b)):
        return
    ex = hciz_exact(a, b, bits=256)
    pm = hciz_perm_sum(a, b, bits=256)
    with mpmath.workprec(256):
        assert abs(ex.log_value - pm.log_value) < mpmath.mpf(10) ** -20


@settings(max_examples=25, deadline=None)
@given(spectra)
def test_symmetries(ab):
    a, b = ab
    if not (_spread(a) and _spread(b)):
        return
    a, b = np.asarray(a), np.asarray(b)
    base = float(hciz_exact(a, b).log_value)
    # swapping the roles of A and B, and reordering, leave the integral unchanged
    assert float(hciz_exact(b, a).log_value) == pytest.approx(base, abs=1e-12)
    assert float(hciz_exact(a[::-1], b).log_value) == pytest.approx(base, abs=1e-12)
    # A → A + cI multiplies by exp(N c Tr B)
    c = 0.37
    N = a.size
    assert float(hciz_exact(a + c, b).log_value) == pytest.approx(base + N * c * b.sum(), abs=1e-10)
    # conjugating scale: I(sA, B/s) = I(A, B)
    assert float(hciz_exact(2 * a, b / 2).log_value) == pytest.approx(base, abs=1e-10)


def test_constant_spectrum_rate():
    a = np.array([0.1, 0.5, 0.9, 1.4])
    assert finite_rate(a, np.full(4, 2.0)) == pytest.approx(2.0 * a.mean() / 2)
    r = hciz_mc(a, np.full(4, 2.0), n_samples=10)
    assert r.stderr == 0.0 and r.rate == pytest.approx(a.mean())


@pytest.mark.parametrize("N", [2, 3, 4])
def test_monte_carlo_agrees(N):
    rng = np.random.default_rng(N)
    a, b = rng.uniform(-1, 1, N), rng.uniform(-1, 1, N)
    ex = float(hciz_exact(a, b).log_value)
    mc = hciz_mc(a, b, n_samples=40_000, seed=3)
    assert abs(float(mc.log_value) - ex) <= 4 * mc.stderr


def test_monte_carlo_orthogonal_constant():
    r = hciz_mc([1.0, 2.0, 3.0], [0.5, 0.5, 0.5], beta=1)
    assert float(r.log_value) == pytest.approx(0.5 * 3 * 0.5 * 6)


def test_monte_carlo_thread_independent():
    a, b = np.array([0.0, 0.4, 1.0]), np.array([-1.0, 0.2, 0.5])
    r1 = hciz_mc(a, b, n_samples=5000, seed=11, threads=1)
    r4 = hciz_mc(a, b, n_samples=5000, seed=11, threads=4)
    assert r1.log_value == r4.log_value and r1.stderr == r4.stderr


def test_degenerate_and_beta():
    with pytest.raises(DegenerateSpectrumError):
        hciz_exact([1.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError, match="beta=2"):
        hciz_exact([0.0, 1.0], [0.0, 1.0], beta=1)


def test_confluent_limit_matches_jitter():
    a = np.array([-1.0, -1.0, 1.0, 1.0])
    b = np.array([-0.5, 0.1, 0.3, 0.8])
    conf = float(hciz_exact(a, b, confluent=True).log_value)
    jit = float(hciz_exact(a + np.array([0, 1e-6, 0, 1e-6]), b, bits=256).log_value)
    assert conf == pytest.approx(jit, abs=1e-5)


def test_snap_ties():
    x = snap_ties(np.array([1.0, 1.0 + 1e-15, 2.0]))
    assert x[0] == x[1] and x[2] == 2.0


def test_log_norm_constant():
    assert log_norm_constant(1) == 0.0
    assert log_norm_constant(3) == pytest.approx(math.log(2) - 3 * math.log(3))


def test_limit_estimate_constant_and_bounds():
    mu = QuantileMeasure.uniform(0, 1)
    est = limit_I_estimate(mu, QuantileMeasure.dirac(2.0))
    assert est.value == pytest.approx(0.5) and est.residual == 0
    sc = limit_I_estimate(QuantileMeasure.semicircle(1.0), QuantileMeasure.semicircle(1.0))
    # 0 ≤ I ≤ ½∫T_ν T_μ
    assert 0 < sc.value < 0.5
    with pytest.raises(ValueError):
        limit_I_estimate(mu, mu, N_schedule=(8,))


def test_limit_estimate_scale_invariance():
    e1 = limit_I_estimate(QuantileMeasure.semicircle(1.0), QuantileMeasure.semicircle(1.0))
    e2 = limit_I_estimate(QuantileMeasure.semicircle(0.5), QuantileMeasure.semicircle(2.0))
    assert e1.value == pytest.approx(e2.value, abs=1e-12)


def test_rank_one_first_order_term():
    # the finite rate over τ approaches θ²/4 as τ → 0 for the semicircle
    rep = rank_one_asymptotic_check(QuantileMeasure.semicircle(), theta=0.3, tau=0.025, N=40)
    assert rep.series_converged
    assert rep.finite_rate / rep.tau == pytest.approx(0.3 ** 2 / 4, rel=0.05)
    assert rep.target == pytest.approx(0.025 * 0.3 ** 2 / 2, rel=1e-3)
    assert rep.half_target == pytest.approx(rep.target / 2)
