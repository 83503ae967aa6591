"""Randomized matrix experiments: diagonals of UBU*, spectra of A + UBU*, matrix bridges.

Each experiment checks the exact matrix theorem it relies on, sample by
sample, and raises InvariantViolation if one fails; a violation means a bug,
not bad luck.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvariantViolation
from .haar import chunk_rng, gue, haar_batch, map_chunks
from .measures import QuantileMeasure, cell_averages
from .tilted import ChainConfig, tilted_sampler

BRIDGE_STREAM = 3


@dataclass
class SpectralExperimentBatch:
    kind: str
    N: int
    beta: int
    seed: int
    records: np.ndarray              # (n_samples, N) or (n_samples, n_times, N), sorted along the last axis
    t_grid: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.records.shape[0]

    def mean_profile(self, m: int | None = None, time_index: int | None = None) -> QuantileMeasure:
        r = self.records if time_index is None else self.records[:, time_index, :]
        mean = r.mean(axis=0)
        return QuantileMeasure(cell_averages(mean, m) if m else mean)

    def sample_measure(self, k: int, time_index: int | None = None) -> QuantileMeasure:
        r = self.records[k] if time_index is None else self.records[k, time_index]
        return QuantileMeasure(r)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            if self.records.ndim == 2:
                w.writerow(["sample", "index", "value"])
                for s, row in enumerate(self.records):
                    for i, v in enumerate(row):
                        w.writerow([s, i, repr(float(v))])
            else:
                w.writerow(["sample", "t", "index", "value"])
                for s, block in enumerate(self.records):
                    for ti, row in zip(self.t_grid, block):
                        for i, v in enumerate(row):
                            w.writerow([s, repr(float(ti)), i, repr(float(v))])
        return path


def read_batch_csv(path: str | Path, kind: str = "bridge", N: int | None = None, beta: int = 2,
                   seed: int = 0) -> SpectralExperimentBatch:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError("empty batch file")
    if "t" in rows[0]:
        samples = sorted({int(r["sample"]) for r in rows})
        times = sorted({float(r["t"]) for r in rows})
        n = max(int(r["index"]) for r in rows) + 1
        rec = np.zeros((len(samples), len(times), n))
        tpos = {t: i for i, t in enumerate(times)}
        for r in rows:
            rec[int(r["sample"]), tpos[float(r["t"])], int(r["index"])] = float(r["value"])
        return SpectralExperimentBatch(kind, N or n, beta, seed, rec, np.asarray(times))
    samples = sorted({int(r["sample"]) for r in rows})
    n = max(int(r["index"]) for r in rows) + 1
    rec = np.zeros((len(samples), n))
    for r in rows:
        rec[int(r["sample"]), int(r["index"])] = float(r["value"])
    return SpectralExperimentBatch(kind if kind != "bridge" else "diag_conjugation", N or n, beta, seed, rec)


def _chunk_for(N: int) -> int:
    return max(1, 8192 // max(1, N * N // 16))


def _norm(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def diag_conjugation_experiment(B, beta: int = 2, n_samples: int = 1000, seed: int = 0,
                                m: int | None = None, threads: int = 1) -> tuple[SpectralExperimentBatch, QuantileMeasure]:
    """Sorted diag(U B U*) per Haar sample, with trace and Schur–Horn checks on every sample."""
    b = np.asarray(B, dtype=float).ravel()
    N = b.size
    bnorm = max(_norm(b), 1e-300)
    b_desc = np.sort(b)[::-1]
    b_part = np.cumsum(b_desc)

    def work(c, count):
        U = haar_batch(chunk_rng(seed, c), count, N, beta)
        return (np.abs(U) ** 2) @ b

    d = np.concatenate(map_chunks(work, n_samples, _chunk_for(N), threads))
    trace_err = np.abs(d.sum(axis=1) - b.sum())
    if np.any(trace_err > 1e-8 * N * bnorm):
        raise InvariantViolation(f"trace identity failed: {trace_err.max():.3e}")
    d_part = np.cumsum(-np.sort(-d, axis=1), axis=1)
    excess = d_part - b_part[None, :]
    worst = float(excess[:, :-1].max()) if N > 1 else 0.0
    if worst > 1e-10 * max(1.0, N * bnorm):
        raise InvariantViolation(f"Schur–Horn majorization failed by {worst:.3e}")
    recs = np.sort(d, axis=1)
    batch = SpectralExperimentBatch("diag_conjugation", N, beta, seed, recs,
                                    diagnostics={"max_trace_error": float(trace_err.max()),
                                                 "max_majorization_excess": worst})
    return batch, batch.mean_profile(m)


def horn_sum_experiment(A, B, beta: int = 2, n_samples: int = 100, seed: int = 0,
                        threads: int = 1) -> SpectralExperimentBatch:
    """Sorted spectra of A + U B U*, with trace and Ky Fan checks on every sample."""
    a = np.asarray(A, dtype=float).ravel()
    b = np.asarray(B, dtype=float).ravel()
    N = a.size
    if b.size != N:
        raise ValueError("A and B must have equal size")
    scale = max(1.0, _norm(a) + _norm(b))
    bound = np.cumsum(np.sort(a)[::-1]) + np.cumsum(np.sort(b)[::-1])

    def work(c, count):
        U = haar_batch(chunk_rng(seed, c), count, N, beta)
        M = np.einsum("kij,j,klj->kil", U, b, U.conj()) + np.diag(a)[None]
        return np.linalg.eigvalsh(M)

    spec = np.concatenate(map_chunks(work, n_samples, _chunk_for(N), threads))
    trace_err = np.abs(spec.sum(axis=1) - a.sum() - b.sum())
    if np.any(trace_err > 1e-8 * N * scale):
        raise InvariantViolation(f"trace identity failed: {trace_err.max():.3e}")
    part = np.cumsum(spec[:, ::-1], axis=1)
    excess = float((part - bound[None, :]).max())
    if excess > 1e-8 * scale:
        raise InvariantViolation(f"Ky Fan inequality failed by {excess:.3e}")
    return SpectralExperimentBatch("horn_sum", N, beta, seed, spec,
                                   diagnostics={"max_trace_error": float(trace_err.max()),
                                                "max_kyfan_excess": excess})


def bridge_simulate(A, B, beta: int = 2, t_grid=None, n_samples: int = 20,
                    config: ChainConfig | None = None, seed: int = 0,
                    threads: int = 1) -> SpectralExperimentBatch:
    """Spectra of X(t) = (1-t)A + t U B U* + sqrt(t(1-t)) G along t_grid.

    U follows the Haar law tilted by exp((βN/2) Tr(A U B U*)); G is an
    independent Wigner matrix (one per sample, shared across times).
    """
    a = np.asarray(A, dtype=float).ravel()
    b = np.asarray(B, dtype=float).ravel()
    N = a.size
    t = np.asarray(t_grid if t_grid is not None else np.linspace(0, 1, 11), dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("times must lie in [0, 1]")
    cfg = config or ChainConfig()
    cfg = ChainConfig(**{**cfg.__dict__, "n_samples": n_samples, "seed": seed, "keep_matrices": True})
    run = tilted_sampler(a, b, beta, cfg, threads)
    mats = run.matrices
    Adiag = np.diag(a)
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)

    def work(c, count):
        rng = chunk_rng(seed, c, BRIDGE_STREAM)
        out = np.empty((count, t.size, N))
        for j in range(count):
            M = mats[c * 1 + j]
            G = gue(rng, N, beta)
            for k, tk in enumerate(t):
                if tk == 0:
                    out[j, k] = a_sorted
                elif tk == 1:
                    out[j, k] = b_sorted
                else:
                    X = (1 - tk) * Adiag + tk * M + math.sqrt(tk * (1 - tk)) * G
                    out[j, k] = np.linalg.eigvalsh(X)
        return out

    recs = np.concatenate(map_chunks(work, n_samples, 1, threads))
    return SpectralExperimentBatch("bridge", N, beta, seed, recs, t,
                                   diagnostics={"acceptance": run.acceptance, "iat": run.iat,
                                                "exact_haar": run.exact_haar})


def jacobi_eigvalsh(H: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by the cyclic Jacobi method.

    A complex Hermitian X + iY is handled through its real symmetric
    embedding [[X, -Y], [Y, X]], whose spectrum is that of H with every
    eigenvalue doubled.
    """
    H = np.asarray(H)
    complex_input = np.iscomplexobj(H) and np.any(np.imag(H) != 0)
    if complex_input:
        X, Y = np.real(H), np.imag(H)
        A = np.block([[X, -Y], [Y, X]]).astype(float)
    else:
        A = np.real(H).astype(float).copy()
    n = A.shape[0]
    fro = float(np.linalg.norm(A))
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float(np.sum(A * A) - np.sum(np.diag(A) ** 2))))
        if off <= tol * max(fro, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2 * apq)
                tt = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1 + tau * tau))
                c = 1 / math.sqrt(1 + tt * tt)
                s = tt * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * cp - s * cq, s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :], A[q, :] = c * rp - s * rq, s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
    ev = np.sort(np.diag(A))
    return ev[::2] if complex_input else ev
