import numpy as np
import pytest

from spherical_ldp.haar import gue, haar_sample
from spherical_ldp.rmt import (bridge_simulate, diag_conjugation_experiment, horn_sum_experiment,
                               jacobi_eigvalsh, read_batch_csv)
from spherical_ldp.tilted import ChainConfig


def test_haar_sample_unitary():
    for beta in (1, 2):
        U = haar_sample(6, beta, seed=0)
        assert np.allclose(U.conj().T @ U, np.eye(6), atol=1e-12)
    assert np.isrealobj(haar_sample(4, 1, seed=0))


def test_diag_conjugation_invariants():
    b = np.linspace(-1, 1, 8)
    batch, prof = diag_conjugation_experiment(b, n_samples=300, seed=4)
    assert batch.records.shape == (300, 8)
    assert batch.diagnostics["max_trace_error"] < 1e-12
    assert batch.diagnostics["max_majorization_excess"] <= 1e-10
    assert prof.mean() == pytest.approx(0.0, abs=1e-12)


def test_horn_sum_invariants():
    a = np.array([0.0, 0.5, 1.0, 3.0])
    b = np.array([-1.0, 0.0, 0.0, 2.0])
    batch = horn_sum_experiment(a, b, n_samples=50, seed=1)
    assert np.allclose(batch.records.sum(axis=1), a.sum() + b.sum())
    assert batch.diagnostics["max_kyfan_excess"] <= 1e-8
    assert np.all(batch.records[:, -1] <= a.max() + b.max() + 1e-12)
    assert np.all(batch.records[:, 0] >= a.min() + b.min() - 1e-12)
    with pytest.raises(ValueError):
        horn_sum_experiment(a, b[:3])


def test_experiments_thread_independent():
    b = np.linspace(0, 1, 5)
    r1, _ = diag_conjugation_experiment(b, n_samples=3000, seed=3, threads=1)
    r4, _ = diag_conjugation_experiment(b, n_samples=3000, seed=3, threads=4)
    assert np.array_equal(r1.records, r4.records)


def test_batch_csv_roundtrip(tmp_path):
    batch, _ = diag_conjugation_experiment(np.arange(4.0), n_samples=5, seed=0)
    back = read_batch_csv(batch.write_csv(tmp_path / "d.csv"), kind="diag_conjugation")
    assert np.array_equal(back.records, batch.records)
    br = bridge_simulate(np.zeros(3), np.zeros(3), t_grid=[0, 0.5, 1], n_samples=2, seed=0)
    back = read_batch_csv(br.write_csv(tmp_path / "b.csv"))
    assert np.array_equal(back.records, br.records) and np.array_equal(back.t_grid, br.t_grid)


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(0)
    for beta in (1, 2):
        H = gue(rng, 7, beta)
        assert np.allclose(jacobi_eigvalsh(H), np.linalg.eigvalsh(H), atol=1e-10)


def test_bridge_endpoints_exact():
    a = np.array([-1.0, 0.0, 1.0])
    b = np.array([0.0, 0.5, 2.0])
    br = bridge_simulate(a, b, t_grid=np.linspace(0, 1, 5), n_samples=3, seed=2,
                         config=ChainConfig(burn_in=2000))
    assert np.array_equal(br.records[:, 0], np.tile(a, (3, 1)))
    assert np.array_equal(br.records[:, -1], np.tile(b, (3, 1)))
    assert np.all(np.diff(br.records, axis=-1) >= 0)
    with pytest.raises(ValueError):
        bridge_simulate(a, b, t_grid=[0, 1.5])
