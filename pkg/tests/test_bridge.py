import math

import numpy as np
import pytest

from spherical_ldp.bridge import (BridgeField, action, action_difference_check, default_battery,
                                  estimate_field, euler_residual, f_bound_check, semicircle_action,
                                  semicircle_bridge_field, semicircle_path)
from spherical_ldp.hciz import limit_I_estimate
from spherical_ldp.measures import QuantileMeasure
from spherical_ldp.rmt import bridge_simulate


def test_semicircle_path_endpoints():
    for v0, v1 in [(0, 0), (1, 1), (0.5, 2), (2, 0.3)]:
        v, dv = semicircle_path(v0, v1)
        assert v(0) == pytest.approx(v0) and v(1) == pytest.approx(v1)
        # v'² = 1 + C v along the path
        ts = np.linspace(0, 1, 7)
        C = 2 * (dv(1.0) - dv(0.0))
        assert np.allclose(dv(ts) ** 2, 1 + C * v(ts))


def test_semicircle_field_residual_refines_to_zero():
    res = []
    for n_t in (41, 81, 161):
        fld = semicircle_bridge_field(np.linspace(0, 1, n_t), np.linspace(-1.2, 1.2, 4 * n_t + 1))
        res.append(euler_residual(fld).total)
    assert res[0] > 1.5 * res[1] > 2.25 * res[2]
    assert res[2] < 1e-3


def test_semicircle_field_mass_and_f_bound():
    t = np.linspace(0, 1, 41)
    fld = semicircle_bridge_field(t, np.linspace(-1.1, 1.1, 2001))
    assert np.allclose(fld.slice_mass()[1:-1], 1.0, atol=2e-3)
    rep = f_bound_check(fld, K=1.0)
    # |u + iπρ| sqrt(t(1-t)) = 1 on the support of the δ_0 → δ_0 flow
    assert rep.constant == pytest.approx(1.0, abs=1e-2)
    assert rep.relative_constant == pytest.approx(rep.constant)


def test_static_uniform_action():
    t = np.linspace(0, 1, 11)
    x = np.linspace(0, 1, 101)
    fld = BridgeField(t, x, np.ones((t.size, x.size)), np.zeros((t.size, x.size)))
    a = action(fld)
    assert a.value == pytest.approx(math.pi ** 2 / 3)
    assert a.kinetic == 0
    empty = BridgeField(t, x, np.zeros((t.size, x.size)), np.full((t.size, x.size), np.nan))
    assert action(empty).value == 0


def test_grid_action_matches_closed_form():
    fld = semicircle_bridge_field(np.linspace(0, 1, 401), np.linspace(-2.5, 2.5, 4001), 1.0, 1.0)
    assert action(fld).value == pytest.approx(semicircle_action(1.0, 1.0), rel=5e-3)
    assert semicircle_action(1.0, 1.0) == pytest.approx(0.2451, abs=1e-4)


def test_action_scaling():
    # (v0, v1) → (c²v0, v1/c²) leaves I and Σ(μ_A) + Σ(μ_B) fixed, so the shift in
    # inf S must equal the shift in m₂(μ_A) + m₂(μ_B) for the quarter form to be invariant
    for v0, v1 in [(0.5, 2.0), (0.25, 4.0), (2.0, 0.5)]:
        dS = semicircle_action(v0, v1) - semicircle_action(1.0, 1.0)
        assert dS == pytest.approx((v0 + v1) - 2.0, abs=1e-6)


def test_action_difference_quarter_form():
    sc = QuantileMeasure.semicircle
    base = (sc(1.0), sc(1.0))
    other = (sc(1.0), sc(2.0))
    est = [limit_I_estimate(*p) for p in (other, base)]
    S = (semicircle_action(1.0, 2.0), semicircle_action(1.0, 1.0))
    rep = action_difference_check((other, base), S, est)
    assert rep.agree
    assert abs(rep.I_difference - rep.predicted_printed) > 0.05
    with pytest.raises(ValueError, match="log-energies"):
        action_difference_check(((QuantileMeasure.dirac(0.0), sc()), base), S, est)


def test_estimate_field_on_free_bridge():
    t = np.linspace(0, 1, 9)
    batch = bridge_simulate(np.zeros(64), np.zeros(64), t_grid=t, n_samples=20, seed=1)
    x = np.linspace(-1.5, 1.5, 121)
    fld = estimate_field(batch, x)
    assert fld.bandwidth == pytest.approx(0.5 * 64 ** (-1 / 3))
    mass = fld.slice_mass()
    assert np.allclose(mass[2:-2], 1.0, atol=0.02)
    bulk = np.abs(x) < 0.5
    # expanding before the midpoint, contracting after
    assert np.nanmean(fld.u[2, bulk] * x[bulk]) > 0
    assert np.nanmean(fld.u[6, bulk] * x[bulk]) < 0
    with pytest.raises(ValueError, match="three time slices"):
        estimate_field(bridge_simulate(np.zeros(4), np.zeros(4), t_grid=[0, 1], n_samples=2), x)


def test_default_battery_inside_bulk():
    for tf in default_battery():
        r = 2 * math.sqrt(tf.t0 * (1 - tf.t0))
        assert abs(tf.x0) + tf.rx <= r + 1e-12
