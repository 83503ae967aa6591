import math

import numpy as np
import pytest

from spherical_ldp.errors import DensityBoundError
from spherical_ldp.measures import QuantileMeasure
from spherical_ldp.rates import (H_D, H_K, IEvaluator, J_constant_sequence, OptimizerConfig,
                                 check_density_bound, derivative_check, exp_kernel_mean, finite_J_terms,
                                 kostka_upper_bound_check, lr_upper_bound_check, rate_sup)
from spherical_ldp.tilted import ChainConfig


def test_J_constant_sequence_approaches_three_quarters():
    vals = [J_constant_sequence(N) for N in (10, 100, 1000)]
    assert vals[0] < vals[1] < vals[2] < 0.75
    assert vals[2] == pytest.approx(0.75, abs=5e-3)


@pytest.mark.parametrize("lam", [(2, 1, 0), (3, 1, 1), (0, 0, 0), (4, 2)])
def test_finite_J_identity(lam):
    t = finite_J_terms([0.7, -0.3, 0.25], lam)
    assert t["log_schur"] == pytest.approx(t["log_identity_rhs"], abs=1e-10)


def test_exp_kernel_mean_of_dirac():
    # the kernel on the diagonal is x itself
    assert exp_kernel_mean(QuantileMeasure.dirac(0.8)) == pytest.approx(0.8)


def test_H_D_vanishes_at_zero_tilt():
    I = IEvaluator((4, 8))
    mu = QuantileMeasure.uniform(-1, 1, 16)
    assert H_D(mu, QuantileMeasure.dirac(0.0, 16), I, mu) == pytest.approx(0.0, abs=1e-12)


def test_density_bound():
    check_density_bound(QuantileMeasure.uniform(0, 1, 32))
    with pytest.raises(DensityBoundError):
        check_density_bound(QuantileMeasure.uniform(0, 0.5, 32))
    with pytest.raises(DensityBoundError):
        H_K(QuantileMeasure.uniform(-1, 0, 8), QuantileMeasure.dirac(0.0, 8), IEvaluator((4, 8)),
            QuantileMeasure.uniform(0, 1, 8))


def test_rate_sup_mean_violation_is_infinite():
    cfg = OptimizerConfig(m_nu=8, N_schedule=(4, 8))
    B = QuantileMeasure.uniform(-1, 1, 8)
    mu = QuantileMeasure.uniform(-0.5, 1.5, 8)
    res = rate_sup("D", mu, {"B": B}, cfg)
    assert res.value == math.inf and res.certificate is not None
    assert res.diagnostics["expected_slope"] == pytest.approx(0.25)
    assert res.certificate.slope == pytest.approx(0.25, rel=0.1)


def test_rate_sup_zero_at_concentration_point():
    # the diagonal of U B U* concentrates at the mean of B, so the rate vanishes there
    cfg = OptimizerConfig(m_nu=8, N_schedule=(4, 8), max_iter=10, dilations=(1.0,))
    B = QuantileMeasure.uniform(-1, 1, 8)
    at_mean = rate_sup("D", QuantileMeasure.dirac(0.0, 8), {"B": B}, cfg)
    assert at_mean.value == pytest.approx(0.0, abs=1e-6)
    spread = rate_sup("D", B, {"B": B}, cfg)
    assert 0.1 < spread.value < math.inf


def test_combinatorial_upper_bounds():
    r = kostka_upper_bound_check((3, 1), (2, 1, 1), [1, 2, 3])
    assert r["holds"] and r["kostka"] == 2 and r["log_kostka"] <= r["log_bound"]
    r = lr_upper_bound_check((2, 1), (2, 1), (3, 2, 1), ["1/2", 1, 2])
    assert r["holds"] and r["lr"] == 2


def test_derivative_check_constant_B():
    rep = derivative_check([0.0, 0.5, 1.0], [0.7, 0.7, 0.7], lambda a: a ** 2,
                           chain=ChainConfig(n_samples=50, seed=0))
    # d/dε of (c/2) mean(a + ε f(a)) = (c/2) mean(f(a))
    assert rep.agree and rep.mc_stderr == 0
    assert rep.finite_difference == pytest.approx(0.35 * np.mean([0.0, 0.25, 1.0]), abs=1e-8)
