"""Metropolis sampling of Haar matrices tilted by the spherical-integral integrand.

Target law on the unitary (β = 2) or orthogonal (β = 1) group:

    dP(U) ∝ exp((βN/2) Tr(Y U B U*)) dU,

i.e. diag(U B U*) is pushed towards the ordering of Y.  The chain keeps
M = U B U* and proposes U ↦ G U with G a Givens rotation in a random
coordinate plane (p, q); the log-weight change only involves M_pp, M_qq and
M_pq, and an accepted move rewrites two rows and two columns of M.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import ChainStuckError, InvariantViolation
from .haar import chunk_rng, haar_batch, map_chunks

TILT_STREAM = 7


@dataclass
class ChainConfig:
    n_samples: int = 2000
    burn_in: int = 100_000
    step_scale: float = 0.5
    thin: int | None = None
    tune: bool = True
    recompute_every: int = 10_000
    n_chains: int = 1
    seed: int = 0
    keep_matrices: bool = False


@dataclass
class TiltedChainState:
    U: np.ndarray
    M: np.ndarray
    log_weight: float
    step_scale: float
    accepted: int = 0
    proposed: int = 0

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 1.0


@dataclass
class TiltedRun:
    diagonals: np.ndarray            # (n_samples, N) diag(U B U*) in the original index order
    trace_series: np.ndarray         # Tr(Y U B U*) at each retained sample
    acceptance: float
    step_scale: float
    iat: float
    thin: int
    max_weight_drift: float
    exact_haar: bool = False
    matrices: list = field(default_factory=list)

    def mean_diagonal(self) -> np.ndarray:
        return self.diagonals.mean(axis=0)

    def stderr_diagonal(self, n_batches: int = 20) -> np.ndarray:
        return batch_stderr(self.diagonals, n_batches)


def batch_stderr(x: np.ndarray, n_batches: int = 20) -> np.ndarray:
    """Batch-means standard error of the column means of a (time, dim) series."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    nb = max(2, min(n_batches, n // 2))
    size = n // nb
    if size == 0:
        return np.full(x.shape[1], np.inf)
    means = x[: nb * size].reshape(nb, size, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(nb)


def integrated_autocorrelation_time(x: np.ndarray, c: float = 5.0) -> float:
    """Sokal's self-consistent window estimate, τ = 1 + 2 Σ_{t≤W} ρ(t) with W ≥ c τ."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.size
    if n < 4 or np.allclose(x, 0):
        return 1.0
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 1.0
    for w in range(1, n):
        tau = 1.0 + 2.0 * float(np.sum(acf[1:w + 1]))
        if w >= c * tau:
            break
    return max(tau, 1.0)


def _givens_block(theta: float, phi: float, beta: int) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    if beta == 1:
        return np.array([[c, -s], [s, c]])
    e = complex(math.cos(phi), math.sin(phi))
    return np.array([[c, -s * e], [s * e.conjugate(), c]])


class TiltedChain:
    """A single Metropolis chain; strictly sequential."""

    def __init__(self, y, b, beta: int, rng: np.random.Generator, step_scale: float = 0.5,
                 U0: np.ndarray | None = None):
        self.y = np.asarray(y, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.N = self.y.size
        if self.b.size != self.N:
            raise ValueError("Y and B must have equal size")
        if step_scale <= 0:
            raise ValueError("step_scale must be positive")
        self.beta = beta
        self.rng = rng
        self.coef = beta * self.N / 2
        U = haar_batch(rng, 1, self.N, beta)[0] if U0 is None else np.array(U0)
        M = (U * self.b) @ U.conj().T
        self.state = TiltedChainState(U, M, self._log_weight(M), float(step_scale))

    def _log_weight(self, M) -> float:
        return self.coef * float(np.dot(self.y, np.real(np.diagonal(M))))

    def recompute(self) -> float:
        """Refresh M and the log-weight from U; returns the drift of the incremental weight."""
        st = self.state
        M = (st.U * self.b) @ st.U.conj().T
        lw = self._log_weight(M)
        drift = abs(lw - st.log_weight)
        st.M, st.log_weight = M, lw
        return drift

    def run(self, n_steps: int, record_every: int = 0, record=None) -> tuple[int, int]:
        st = self.state
        N, beta, rng = self.N, self.beta, self.rng
        y, coef = self.y, self.coef
        U, M = st.U, st.M
        acc = 0
        block = 4096
        done = 0
        while done < n_steps:
            k = min(block, n_steps - done)
            p = rng.integers(0, N, k)
            q = (p + rng.integers(1, N, k)) % N if N > 1 else p
            theta = rng.standard_normal(k) * st.step_scale
            phi = rng.uniform(0, 2 * np.pi, k) if beta == 2 else np.zeros(k)
            logu = np.log(rng.random(k))
            for i in range(k):
                pi, qi = int(p[i]), int(q[i])
                if pi == qi:
                    continue
                g = _givens_block(float(theta[i]), float(phi[i]), beta)
                mpp, mqq, mpq = M[pi, pi].real, M[qi, qi].real, M[pi, qi]
                # new (p,p) entry of g M_sub g*
                g00, g01 = g[0, 0], g[0, 1]
                new_pp = (abs(g00) ** 2 * mpp + abs(g01) ** 2 * mqq
                          + 2 * (g00 * mpq * np.conj(g01)).real)
                dlw = coef * (y[pi] - y[qi]) * (float(np.real(new_pp)) - mpp)
                if dlw >= 0 or logu[i] < dlw:
                    idx = [pi, qi]
                    U[idx, :] = g @ U[idx, :]
                    M[idx, :] = g @ M[idx, :]
                    M[:, idx] = M[:, idx] @ g.conj().T
                    st.log_weight += dlw
                    acc += 1
                step = done + i + 1
                if record_every and step % record_every == 0:
                    record(self)
            done += k
        st.accepted += acc
        st.proposed += n_steps
        return acc, n_steps

    def tune(self, n_steps: int, window: int = 1000, lo: float = 0.3, hi: float = 0.5) -> None:
        """Adapt step_scale during burn-in toward acceptance in [lo, hi]."""
        st = self.state
        for _ in range(max(1, n_steps // window)):
            a, n = self.run(window)
            rate = a / n
            if rate < lo:
                st.step_scale *= math.exp(rate - 0.4) * 0.8 if rate < 0.1 else math.exp(rate - 0.4)
            elif rate > hi:
                st.step_scale = min(math.pi, st.step_scale * math.exp(rate - 0.4))
        st.accepted = st.proposed = 0


def _is_zero_tilt(y, b) -> bool:
    return bool(np.all(y == y[0]) or np.all(b == b[0]))


def _run_one_chain(y, b, beta, cfg: ChainConfig, chain_index: int, n_samples: int) -> TiltedRun:
    rng = chunk_rng(cfg.seed, chain_index, TILT_STREAM)
    N = y.size
    if _is_zero_tilt(y, b):
        U = haar_batch(rng, n_samples, N, beta)
        M = np.einsum("kij,j,klj->kil", U, b, U.conj())
        diags = np.real(np.einsum("kii->ki", M))
        mats = list(M) if cfg.keep_matrices else []
        return TiltedRun(diags, diags @ y, 1.0, cfg.step_scale, 1.0, 1, 0.0, True, mats)
    chain = TiltedChain(y, b, beta, rng, cfg.step_scale)
    if cfg.tune:
        chain.tune(cfg.burn_in)
    else:
        chain.run(cfg.burn_in)
    chain.state.accepted = chain.state.proposed = 0
    # pilot run for the autocorrelation time of Tr(Y U B U*)
    pilot: list[float] = []
    chain.run(20_000, 1, lambda c: pilot.append(c.state.log_weight))
    if chain.state.acceptance < 0.05:
        raise ChainStuckError("chain stuck; reduce tilt or N")
    iat = integrated_autocorrelation_time(np.asarray(pilot))
    thin = cfg.thin or max(1, int(math.ceil(iat)))
    diags = np.empty((n_samples, N))
    traces = np.empty(n_samples)
    mats = []
    drift = 0.0
    since = 0
    for k in range(n_samples):
        chain.run(thin)
        since += thin
        if since >= cfg.recompute_every:
            drift = max(drift, chain.recompute())
            since = 0
        M = chain.state.M
        diags[k] = np.real(np.diagonal(M))
        traces[k] = float(diags[k] @ y)
        if cfg.keep_matrices:
            mats.append(M.copy())
    drift = max(drift, chain.recompute())
    if drift > 1e-6 * max(1.0, abs(chain.state.log_weight)):
        raise InvariantViolation(f"incremental log-weight drifted by {drift:.3e}")
    unitary_err = float(np.max(np.abs(chain.state.U.conj().T @ chain.state.U - np.eye(N))))
    if unitary_err > 1e-10:
        raise InvariantViolation(f"chain left the group: |U*U - I| = {unitary_err:.3e}")
    return TiltedRun(diags, traces, chain.state.acceptance, chain.state.step_scale, iat, thin,
                     drift, False, mats)


def tilted_sampler(Y, B, beta: int = 2, config: ChainConfig | None = None, threads: int = 1) -> TiltedRun:
    """Samples of diag(U B U*) under the tilted law, pooled over independent chains."""
    cfg = config or ChainConfig()
    y = np.asarray(Y, dtype=float).ravel()
    b = np.asarray(B, dtype=float).ravel()
    if cfg.step_scale <= 0:
        raise ValueError("step_scale must be positive")
    n_chains = max(1, cfg.n_chains)
    per = [cfg.n_samples // n_chains + (1 if i < cfg.n_samples % n_chains else 0) for i in range(n_chains)]
    runs = map_chunks(lambda c, _count: _run_one_chain(y, b, beta, cfg, c, per[c]), n_chains, 1, threads)
    if len(runs) == 1:
        return runs[0]
    return TiltedRun(np.concatenate([r.diagonals for r in runs]),
                     np.concatenate([r.trace_series for r in runs]),
                     float(np.mean([r.acceptance for r in runs])),
                     float(np.mean([r.step_scale for r in runs])),
                     float(np.max([r.iat for r in runs])),
                     int(max(r.thin for r in runs)),
                     float(max(r.max_weight_drift for r in runs)),
                     all(r.exact_haar for r in runs),
                     [m for r in runs for m in r.matrices])


@dataclass
class TiltedProfile:
    measure: object
    raw: np.ndarray
    stderr: np.ndarray
    monotone_violation: bool
    run: TiltedRun


def tilted_diagonal_profile(Y, B, beta: int = 2, config: ChainConfig | None = None,
                            m: int | None = None, threads: int = 1) -> TiltedProfile:
    """E[diag(U B U*)] arranged along increasing Y, averaged within blocks of equal Y.

    This is the finite-N conditional expectation of b given y read along the
    quantiles of Y.  An isotonic projection makes the profile nondecreasing;
    `monotone_violation` records whether the raw profile broke monotonicity
    by more than three standard errors.
    """

    from .measures import QuantileMeasure, cell_averages

    y = np.asarray(Y, dtype=float).ravel()
    run = tilted_sampler(y, B, beta, config, threads)
    mean = run.mean_diagonal()
    se = run.stderr_diagonal()
    order = np.argsort(y, kind="stable")
    ys, prof, ses = y[order], mean[order], se[order]
    # average within blocks of equal y
    out = prof.copy()
    out_se = ses.copy()
    start = 0
    for k in range(1, ys.size + 1):
        if k == ys.size or ys[k] != ys[start]:
            out[start:k] = prof[start:k].mean()
            out_se[start:k] = math.sqrt(float(np.sum(ses[start:k] ** 2))) / (k - start)
            start = k
    drops = out[:-1] - out[1:]
    violation = bool(np.any(drops > 3 * np.hypot(out_se[:-1], out_se[1:]) + 1e-12))
    iso = isotonic_regression(out).x if np.any(np.diff(out) < 0) else out
    values = cell_averages(iso, m) if m else iso
    return TiltedProfile(QuantileMeasure(np.maximum.accumulate(values)), out, out_se, violation, run)
