"""Haar-distributed unitary / orthogonal matrices and deterministic random streams."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

CHUNK = 2048


def chunk_rng(seed: int, chunk: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one fixed-size chunk of work; depends only on (seed, stream, chunk)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), int(stream), int(chunk)]))


def haar_batch(rng: np.random.Generator, count: int, N: int, beta: int = 2) -> np.ndarray:
    """Stack of `count` Haar matrices: QR of Gaussian matrices with the phases of diag(R) removed."""
    if beta == 2:
        Z = (rng.standard_normal((count, N, N)) + 1j * rng.standard_normal((count, N, N))) / np.sqrt(2)
    elif beta == 1:
        Z = rng.standard_normal((count, N, N))
    else:
        raise ValueError("beta must be 1 or 2")
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=1, axis2=2)
    ph = d / np.abs(d)
    return Q * ph[:, None, :]


def haar_sample(N: int, beta: int = 2, seed: int | np.random.Generator | None = None) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return haar_batch(rng, 1, N, beta)[0]


def gue(rng: np.random.Generator, N: int, beta: int = 2) -> np.ndarray:
    """Wigner matrix normalized so its spectrum tends to the semicircle of variance 1."""
    if beta == 2:
        X = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    else:
        X = rng.standard_normal((N, N))
    return (X + X.conj().T) / np.sqrt(2 * N)


def map_chunks(fn: Callable[[int, int], np.ndarray], n_items: int, chunk: int = CHUNK,
               threads: int = 1) -> list:
    """Apply fn(chunk_index, count) over fixed chunks; output order never depends on `threads`."""
    jobs = [(c, min(chunk, n_items - c * chunk)) for c in range((n_items + chunk - 1) // chunk)]
    if threads <= 1 or len(jobs) == 1:
        return [fn(c, k) for c, k in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))
