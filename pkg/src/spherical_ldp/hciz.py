"""Spherical (HCIZ) integrals: exact determinantal evaluation, brute-force oracle, Monte Carlo, limits.

Convention: for diagonal A = diag(a), B = diag(b) of size N,

    I_N(a, b) = ∫ exp((βN/2) Tr(A U B U*)) dU,      rate = log I_N / (βN²).

For β = 2 the integral is given exactly by

    I_N = ∏_{p<N} p! · det[exp(N a_i b_j)] / (N^{N(N-1)/2} Δ(a) Δ(b)),

with Δ(x) = ∏_{i<j}(x_i - x_j) taken over decreasingly sorted entries.  The
power of N in the denominator is the normalization that makes the N = 1 and
B = cI cases come out right; it is pinned by the calibration tests.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field

import flint
import mpmath
import numpy as np

from .errors import DegenerateSpectrumError, PrecisionError
from .haar import CHUNK, chunk_rng, haar_batch, map_chunks
from .measures import QuantileMeasure

MAX_BITS = 1 << 16
TIE_REL = 1e-12

# python-flint keeps its working precision in a process-global context
_FLINT_LOCK = threading.RLock()


@dataclass
class HcizResult:
    log_value: mpmath.mpf
    rate: float
    N: int
    beta: int
    precision_bits: int
    method: str
    stderr: float | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"method": self.method, "N": self.N, "beta": self.beta,
                "log_value": float(self.log_value), "rate": self.rate,
                "stderr": self.stderr, "seed": self.seed,
                "precision_bits": self.precision_bits}


@dataclass
class LimitEstimate:
    value: float
    model: tuple[float, float]
    residual: float
    N_schedule: tuple[int, ...]
    rates: tuple[float, ...]
    correction: float = 0.0
    method: str = "exact_det"
    stderrs: tuple[float, ...] = field(default_factory=tuple)

    @property
    def slack(self) -> float:
        """Fit residual plus the size of the 1/N correction at the largest N."""
        return self.residual + self.correction


def log_norm_constant(N: int) -> float:
    return sum(math.lgamma(p + 1) for p in range(1, N)) - N * (N - 1) / 2 * math.log(N)


def _prepare(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise ValueError("a and b must be nonempty and of equal length")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite spectrum")
    return np.sort(a)[::-1].copy(), np.sort(b)[::-1].copy()


def snap_ties(x: np.ndarray, rel: float = TIE_REL) -> np.ndarray:
    """Merge consecutive sorted entries closer than rel·scale into exact ties."""
    x = np.array(x, dtype=float)
    scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0
    for i in range(1, x.size):
        if abs(x[i] - x[i - 1]) <= rel * scale:
            x[i] = x[i - 1]
    return x


def _has_ties(x: np.ndarray) -> bool:
    return bool(np.any(np.diff(x) == 0))


def _to_mpf(v: flint.arb) -> mpmath.mpf:
    man, exp = v.mid().man_exp()
    man = int(man)
    with mpmath.workprec(max(53, man.bit_length() + 1)):
        return mpmath.mpf((man, int(exp)))


def _clusters(x: np.ndarray) -> list[tuple[float, int]]:
    out: list[tuple[float, int]] = []
    for v in x:
        if out and out[-1][0] == v:
            out[-1] = (v, out[-1][1] + 1)
        else:
            out.append((float(v), 1))
    return out


def _log_vandermonde(clusters, arb) -> flint.arb:
    total = arb(0)
    for k in range(len(clusters)):
        for l in range(k + 1, len(clusters)):
            total += (arb(clusters[k][0]) - arb(clusters[l][0])).log() * (clusters[k][1] * clusters[l][1])
    return total


def _log_hciz_arb(a: np.ndarray, b: np.ndarray, prec: int) -> flint.arb | None:
    """log I_N at working precision prec; None when the determinant sign is not certified."""
    arb = flint.arb
    N = a.size
    with _FLINT_LOCK, flint.ctx.workprec(prec):
        ca, cb = _clusters(a), _clusters(b)
        nN = arb(N)
        if len(ca) == N and len(cb) == N:
            A = [arb(x) for x in a]
            B = [arb(x) for x in b]
            M = flint.arb_mat(N, N, [(nN * A[i] * B[j]).exp() for i in range(N) for j in range(N)])
        else:
            M = _confluent_matrix(ca, cb, N)
        det = M.det()
        if len(ca) < N or len(cb) < N:
            det = abs(det)
        if not det > 0:
            return None
        const = arb(0)
        for p in range(2, N):
            const += arb.fac_ui(p).log()
        const -= arb(N * (N - 1) // 2) * nN.log()
        return det.log() - _log_vandermonde(ca, arb) - _log_vandermonde(cb, arb) + const


def _confluent_matrix(ca, cb, N) -> flint.arb_mat:
    """Divided-difference limit of det[exp(N x_i y_j)] at clustered x and y.

    Row (x, r), column (y, s) holds ∂_x^r ∂_y^s exp(Nxy) / (r! s!)
      = N^s e^{Nxy} Σ_q x^{s-q} (Ny)^{r-q} / (q! (r-q)! (s-q)!).
    """
    arb = flint.arb
    nN = arb(N)
    inv_fac = [arb(1) / arb.fac_ui(k) for k in range(N + 1)]
    rows = [(arb(x), r) for x, mult in ca for r in range(mult)]
    cols = [(arb(y), s) for y, mult in cb for s in range(mult)]
    entries = []
    cache: dict = {}
    for x, r in rows:
        for y, s in cols:
            key = (x.mid().man_exp(), y.mid().man_exp())
            if key not in cache:
                cache[key] = (nN * x * y).exp()
            e = cache[key]
            acc = arb(0)
            for q in range(min(r, s) + 1):
                acc += (x ** (s - q)) * ((nN * y) ** (r - q)) * inv_fac[q] * inv_fac[r - q] * inv_fac[s - q]
            entries.append(nN ** s * e * acc)
    return flint.arb_mat(N, N, entries)


def hciz_exact(a, b, beta: int = 2, bits: int = 128, confluent: bool = False) -> HcizResult:
    """Exact β = 2 spherical integral through the determinantal formula in interval arithmetic.

    Precision starts at `bits` and doubles until the interval enclosing
    log I_N is narrower than 2^{-bits/2} relative.  Tied entries raise
    DegenerateSpectrumError unless `confluent` is set, in which case the
    divided-difference limit of the determinant is used.
    """
    if beta != 2:
        raise ValueError("the determinantal formula exists only for beta=2")
    a, b = _prepare(a, b)
    N = a.size
    if confluent:
        a, b = snap_ties(a), snap_ties(b)
    elif _has_ties(a) or _has_ties(b):
        raise DegenerateSpectrumError("degenerate spectrum")
    target = 2.0 ** (-bits / 2)
    prec = max(int(bits), 64)
    while prec <= MAX_BITS:
        v = _log_hciz_arb(a, b, prec)
        if v is not None:
            mid = abs(float(v.mid()))
            if float(v.rad()) <= target * max(1.0, mid):
                lv = _to_mpf(v)
                return HcizResult(lv, float(lv) / (beta * N * N), N, beta, prec, "exact_det")
        prec *= 2
    raise PrecisionError("raise precision")


def hciz_perm_sum(a, b, bits: int = 128) -> HcizResult:
    """Brute-force oracle: the determinant expanded as a signed sum over permutations (N ≤ 6)."""
    a, b = _prepare(a, b)
    N = a.size
    if N > 6:
        raise ValueError("permutation sum limited to N <= 6")
    if _has_ties(a) or _has_ties(b):
        raise DegenerateSpectrumError("degenerate spectrum")
    perms = list(itertools.permutations(range(N)))
    signs = [_perm_sign(p) for p in perms]

    def evaluate(prec):
        with mpmath.workprec(prec):
            A = [mpmath.mpf(x) for x in a]
            B = [mpmath.mpf(x) for x in b]
            det = mpmath.mpf(0)
            for p, sg in zip(perms, signs):
                det += sg * mpmath.exp(N * mpmath.fsum(A[i] * B[p[i]] for i in range(N)))
            lv = mpmath.log(det)
            for i in range(N):
                for j in range(i + 1, N):
                    lv -= mpmath.log(A[i] - A[j]) + mpmath.log(B[i] - B[j])
            lv += mpmath.fsum(mpmath.log(mpmath.factorial(p)) for p in range(1, N))
            lv -= mpmath.mpf(N * (N - 1)) / 2 * mpmath.log(N)
            return lv

    prec = max(int(bits), 64)
    prev = evaluate(prec)
    while prec <= MAX_BITS:
        prec *= 2
        cur = evaluate(prec)
        if abs(cur - prev) <= 2.0 ** (-bits / 2) * max(1, abs(cur)):
            with mpmath.workprec(prec):
                return HcizResult(+cur, float(cur) / (2 * N * N), N, 2, prec, "perm_sum")
        prev = cur
    raise PrecisionError("raise precision")


def _perm_sign(p) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if not seen[i]:
            j, length = i, 0
            while not seen[j]:
                seen[j] = True
                j = p[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
    return sign


def mc_exponents(a, b, beta: int, n_samples: int, seed: int, threads: int = 1,
                 chunk: int = CHUNK) -> np.ndarray:
    """(βN/2) Tr(A U B U*) for n_samples Haar matrices, in a thread-count-independent order."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    N = a.size

    def work(c, count):
        U = haar_batch(chunk_rng(seed, c), count, N, beta)
        P = np.abs(U) ** 2
        return (beta * N / 2) * np.einsum("i,kij,j->k", a, P, b)

    return np.concatenate(map_chunks(work, n_samples, chunk, threads))


def log_mean_exp(x: np.ndarray) -> tuple[float, float]:
    """(log mean e^x, delta-method standard error of that log)."""
    mx = float(np.max(x))
    w = np.exp(x - mx)
    m = float(np.mean(w))
    se = float(np.std(w, ddof=1) / (math.sqrt(x.size) * m)) if x.size > 1 else float("inf")
    return mx + math.log(m), se


def hciz_mc(a, b, beta: int = 2, n_samples: int = 100_000, seed: int = 0, threads: int = 1) -> HcizResult:
    if n_samples < 2:
        raise ValueError("need at least two samples")
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    N = a.size
    if b.size != N:
        raise ValueError("a and b must have equal length")
    for x, y in ((a, b), (b, a)):
        if np.all(x == x[0]):
            lv = beta * N / 2 * x[0] * float(np.sum(y))
            return HcizResult(mpmath.mpf(lv), lv / (beta * N * N), N, beta, 53, "monte_carlo", 0.0, seed)
    lv, se = log_mean_exp(mc_exponents(a, b, beta, n_samples, seed, threads))
    return HcizResult(mpmath.mpf(lv), lv / (beta * N * N), N, beta, 53, "monte_carlo", se, seed)


def finite_rate(a, b, bits: int = 64) -> float:
    """Exact β = 2 finite-N rate with ties handled by the confluent path."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    N = a.size
    for x, y in ((a, b), (b, a)):
        if np.all(x == x[0]):
            return float(x[0]) * float(np.mean(y)) / 2
    return hciz_exact(a, b, bits=bits, confluent=True).rate


def limit_I_estimate(mu_A: QuantileMeasure, mu_B: QuantileMeasure, N_schedule=(8, 16, 32),
                     method: str = "exact", bits: int = 64, n_samples: int = 20_000,
                     seed: int = 0, beta: int = 2, threads: int = 1) -> LimitEstimate:
    """Extrapolate rate_N(N-quantiles of μ_A, N-quantiles of μ_B) to N → ∞ with the model a + b/N."""
    sched = tuple(int(n) for n in N_schedule)
    if len(sched) < 2:
        raise ValueError("N schedule needs at least two sizes")
    rates, ses = [], []
    for N in sched:
        a = mu_A.n_quantiles(N)
        b = mu_B.n_quantiles(N)
        if method == "exact":
            rates.append(finite_rate(a, b, bits))
            ses.append(0.0)
        elif method == "mc":
            r = hciz_mc(a, b, beta, n_samples, seed + N, threads)
            rates.append(r.rate)
            ses.append(r.stderr / (beta * N * N))
        else:
            raise ValueError(f"unknown method {method!r}")
    x = 1.0 / np.asarray(sched, dtype=float)
    y = np.asarray(rates)
    if np.ptp(y) == 0:
        coef = np.array([0.0, y[0]])
    else:
        coef = np.polyfit(x, y, 1)
    fit = np.polyval(coef, x)
    residual = float(np.sqrt(np.mean((fit - y) ** 2)))
    return LimitEstimate(value=float(coef[1]), model=(float(coef[1]), float(coef[0])),
                         residual=residual, N_schedule=sched, rates=tuple(float(r) for r in rates),
                         correction=float(abs(coef[0]) / max(sched)),
                         method="exact_det" if method == "exact" else "monte_carlo",
                         stderrs=tuple(ses))


@dataclass
class RankOneReport:
    finite_rate: float
    target: float
    half_target: float
    gap: float
    relative_gap: float
    series_converged: bool
    N: int
    tau: float
    theta: float


def rank_one_asymptotic_check(mu: QuantileMeasure, theta: float, tau: float, N: int,
                              order: int = 12, bits: int = 64) -> RankOneReport:
    """Finite-N rate of ν_τ = (1-τ)δ_0 + τδ_θ against μ versus τ ∫_0^θ R_μ(t) dt.

    `half_target` is τ/2 ∫_0^θ R_μ, the first-order term implied by the
    spherical-integral normalization used here (see the README); both are reported.
    """
    from .freeprob import r_transform_series

    k = tau * N
    if abs(k - round(k)) > 1e-9:
        raise ValueError("tau * N must be an integer")
    k = int(round(k))
    a = np.zeros(N)
    a[:k] = theta
    b = mu.n_quantiles(N)
    rate = finite_rate(a, b, bits)
    series = r_transform_series(mu, order)
    target, converged = series.integral(theta)
    target *= tau
    gap = rate - target
    return RankOneReport(rate, target, target / 2, gap, abs(gap) / max(abs(target), 1e-300),
                         converged, N, tau, theta)
