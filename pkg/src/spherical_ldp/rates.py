"""Tilt functionals H^D, H^{A+B}, H^K, H^{LR}, the Schur asymptotic J, and their suprema.

Every functional is evaluated through a limit estimator of the spherical
integral I(ν, μ) (N-schedule extrapolation of exact finite-N rates); the
rates I^D, I^{A+B}, I^K, I^{LR} are suprema over the tilt measure ν,
parametrized as a nondecreasing quantile vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.optimize import isotonic_regression

from .errors import DensityBoundError
from .freeprob import log_energy
from .hciz import finite_rate, hciz_exact, limit_I_estimate
from .measures import (DEFAULT_GRID, QuantileMeasure, cell_averages, pairing_integral,
                       schur_horn_report)
from .partitions import (Partition, _interlacing_rows, kostka, lr_coefficient, monomial_eval,
                         schur_bialternant)
from .tilted import ChainConfig, batch_stderr, tilted_sampler

J_CONSTANT = 0.75


class IEvaluator:
    """Memoized limit estimator ν, μ ↦ I(ν, μ)."""

    def __init__(self, N_schedule=(8, 16, 32), bits: int = 64, method: str = "exact"):
        self.N_schedule = tuple(N_schedule)
        self.bits = bits
        self.method = method
        self._cache: dict = {}
        self.max_residual = 0.0
        self.calls = 0

    def estimate(self, nu: QuantileMeasure, mu: QuantileMeasure):
        key = (nu.t_values.tobytes(), mu.t_values.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            hit = limit_I_estimate(nu, mu, self.N_schedule, self.method, self.bits)
            self._cache[key] = hit
            self.max_residual = max(self.max_residual, hit.residual)
            self.calls += 1
        return hit

    def __call__(self, nu: QuantileMeasure, mu: QuantileMeasure) -> float:
        return self.estimate(nu, mu).value


def exp_kernel_mean(mu: QuantileMeasure) -> float:
    """∬ log((e^x - e^y)/(x - y)) dμ dμ, the diagonal taken as its limit x."""
    t = mu.t_values
    x = np.maximum(t[:, None], t[None, :])
    d = np.abs(t[:, None] - t[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        k = x + np.log(-np.expm1(-d) / d)
    k = np.where(d > 0, k, x)
    return float(k.mean())


@dataclass
class JValue:
    value: float
    two_I: float
    log_energy_lambda: float
    double_log_kernel: float
    constant: float

    @property
    def parts(self) -> dict:
        return {"two_I": self.two_I, "log_energy_lambda": self.log_energy_lambda,
                "double_log_kernel": self.double_log_kernel, "constant": self.constant}


def J_functional(mu_Y: QuantileMeasure, m_lambda: QuantileMeasure, I_evaluator: Callable,
                 constant: float = J_CONSTANT) -> JValue:
    """2I(μ_Y, m_λ) + ½Σ(m_λ) - ½∬log((e^x-e^y)/(x-y)) dμ_Y dμ_Y + constant."""
    two_I = 2 * I_evaluator(mu_Y, m_lambda)
    le = 0.5 * log_energy(m_lambda)
    ker = -0.5 * exp_kernel_mean(mu_Y)
    return JValue(two_I + le + ker + constant, two_I, le, ker, constant)


def finite_J_terms(y: Sequence[float], lam, bits: int = 64) -> dict:
    """Both sides of the finite-N identity S_λ(e^y) = Z(y, d) Δ(y) ∏_{i<j}(λ_i-λ_j-i+j) / (∏_{p<N} p! Δ(e^y)).

    Here d_j = (λ_j + N - j)/N and Z is the spherical integral with
    exponent N Tr(diag(y) U diag(d) U*).  Returns natural logs.
    """
    lam = lam if isinstance(lam, Partition) else Partition(lam)
    ys = [Fraction(v) for v in y]
    N = len(ys)
    lp = lam.padded(N)
    d = np.array([(lp[j] + N - 1 - j) / N for j in range(N)])
    yf = np.array([float(v) for v in ys])
    Z = hciz_exact(yf, d, bits=bits, confluent=True)
    log_z = float(Z.log_value)
    order = np.argsort(-yf)
    ysd = yf[order]
    log_vy = sum(math.log(ysd[i] - ysd[j]) for i in range(N) for j in range(i + 1, N))
    log_vey = sum(math.log(math.exp(ysd[i]) - math.exp(ysd[j])) for i in range(N) for j in range(i + 1, N))
    log_prod = sum(math.log(lp[i] - lp[j] - i + j) for i in range(N) for j in range(i + 1, N))
    log_fac = sum(math.lgamma(p + 1) for p in range(1, N))
    rhs = log_z + log_vy + log_prod - log_fac - log_vey
    # S_λ(e^y) with the monomial weights in high precision
    with mpmath.workprec(200):
        pts = [mpmath.exp(mpmath.mpf(float(v))) for v in ys]
        lhs = float(mpmath.log(_schur_gt_mp(lp, pts)))
    return {"log_schur": lhs, "log_identity_rhs": rhs, "log_Z": log_z}


def _schur_gt_mp(lp, pts):
    @lru_cache(maxsize=None)
    def f(row):
        k = len(row)
        s = sum(row)
        if k == 1:
            return pts[0] ** s
        total = 0
        for t in range(sum(row[1:]), sum(row[:-1]) + 1):
            sub = sum(f(r) for r in _interlacing_rows(row, t))
            total += pts[k - 1] ** (s - t) * sub
        return total

    return f(tuple(lp))


def J_constant_sequence(N: int) -> float:
    """(1/N²)(N(N-1)/2 log N - log ∏_{p<N} p!), whose limit is the constant 3/4."""
    return (N * (N - 1) / 2 * math.log(N) - sum(math.lgamma(p + 1) for p in range(1, N))) / N ** 2


# tilt functionals ---------------------------------------------------------------


def H_D(mu: QuantileMeasure, nu: QuantileMeasure, I_evaluator: Callable, mu_B: QuantileMeasure) -> float:
    return 0.5 * pairing_integral(nu, mu) - I_evaluator(nu, mu_B)


def H_AB(mu: QuantileMeasure, nu: QuantileMeasure, I_evaluator: Callable,
         mu_A: QuantileMeasure, mu_B: QuantileMeasure) -> float:
    return I_evaluator(nu, mu) - I_evaluator(nu, mu_A) - I_evaluator(nu, mu_B)


def check_density_bound(mu: QuantileMeasure, tol: float = 1e-9) -> None:
    """Support in [0, ∞) and density ≤ 1, i.e. quantile increments ≥ 1/m."""
    t = mu.t_values
    if t[0] < -tol or np.any(np.diff(t) < (1.0 - 1e-6) / mu.m - tol):
        raise DensityBoundError("density bound exceeded")


def H_K(mu: QuantileMeasure, nu: QuantileMeasure, I_evaluator: Callable, m_lambda: QuantileMeasure,
        check: bool = True) -> float:
    if check:
        check_density_bound(mu)
    x = QuantileMeasure.uniform(0.0, 1.0, mu.m)
    lin = pairing_integral(nu, mu) - pairing_integral(nu, x)
    return lin - J_functional(nu, m_lambda, I_evaluator).value


def H_LR(mu: QuantileMeasure, nu: QuantileMeasure, I_evaluator: Callable,
         m_lambda: QuantileMeasure, m_eta: QuantileMeasure) -> float:
    return (J_functional(nu, mu, I_evaluator).value - J_functional(nu, m_lambda, I_evaluator).value
            - J_functional(nu, m_eta, I_evaluator).value)


# supremum -------------------------------------------------------------------------


@dataclass
class OptimizerConfig:
    m_nu: int = 32
    N_schedule: tuple = (8, 16, 32)
    max_iter: int = 30
    fd_step: float = 1e-3
    tol: float = 1e-7
    nu_bound: float = 64.0
    dilations: tuple = (1.0, 4.0)
    slope_L: tuple = (8.0, 32.0, 128.0)
    bits: int = 64
    admissibility_tol: float = 1e-8


@dataclass
class Certificate:
    direction: QuantileMeasure
    slope: float
    L: tuple
    values: tuple
    kind: str


@dataclass
class RateEvaluation:
    value: float
    nu_star: QuantileMeasure
    certificate: Certificate | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class _Problem:
    H: Callable[[QuantileMeasure], float]
    translation_invariant: bool
    mean_gap: float
    profile_check: object | None
    direction_for: Callable[[float], np.ndarray]
    start_shapes: list


def _project(x: np.ndarray, center: bool, bound: float) -> np.ndarray:
    y = isotonic_regression(x).x if np.any(np.diff(x) < 0) else x.copy()
    if center:
        y = y - y.mean()
    return np.clip(y, -bound, bound)


def _snap(x: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(x))))
    out = x.copy()
    for i in range(1, out.size):
        if out[i] - out[i - 1] <= 1e-12 * scale:
            out[i] = out[i - 1]
    return out


def _ascend(H, x0, center, cfg: OptimizerConfig):
    x = _project(x0, center, cfg.nu_bound)
    f = H(x)
    step = 1.0
    it = 0
    last_gain = 0.0
    for it in range(1, cfg.max_iter + 1):
        g = np.empty_like(x)
        h = cfg.fd_step
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            g[i] = (H(x + e) - H(x - e)) / (2 * h)
        if center:
            g -= g.mean()
        gn = float(g @ g)
        if gn < 1e-20:
            break
        improved = False
        s = step * 2
        while s > 1e-8:
            xn = _project(x + s * g, center, cfg.nu_bound)
            fn = H(xn)
            if fn >= f + 1e-4 * float(g @ (xn - x)) and fn > f:
                improved = True
                break
            s *= 0.5
        if not improved:
            break
        last_gain = fn - f
        x, f, step = xn, fn, s
        if last_gain < cfg.tol:
            break
    return x, f, it, last_gain


def _measure_from_vector(v: np.ndarray) -> QuantileMeasure:
    return QuantileMeasure(_snap(np.maximum.accumulate(v)))


def _certificate(problem: _Problem, y: float | None, cfg: OptimizerConfig, kind: str, slack: float):
    direction = problem.direction_for(y)
    Ls = cfg.slope_L
    vals = tuple(problem.H(L * direction) for L in Ls)
    slope = float(np.polyfit(np.asarray(Ls), np.asarray(vals), 1)[0])
    return Certificate(QuantileMeasure(direction), slope, Ls, vals, kind), slope > max(10 * slack, 1e-12)


def _build_problem(functional: str, mu: QuantileMeasure, refs: dict, I: IEvaluator, m_nu: int) -> _Problem:
    def grid_of(v):
        # a vector is read as the atoms of a discrete measure, so order is irrelevant
        return QuantileMeasure(_snap(np.sort(np.asarray(v, dtype=float))))

    x_unif = QuantileMeasure.uniform(0.0, 1.0, mu.m)
    if functional == "D":
        B = refs["B"]

        def H(v):
            return H_D(mu, grid_of(v), I, B)
        gap = mu.mean() - B.mean()
        report = schur_horn_report(mu, B)
        shape = cell_averages(mu.t_values, m_nu) - cell_averages(B.t_values, m_nu)
    elif functional == "AB":
        A, B = refs["A"], refs["B"]

        def H(v):
            return H_AB(mu, grid_of(v), I, A, B)
        gap = mu.mean() - A.mean() - B.mean()
        report = schur_horn_report(mu, [A, B])
        shape = cell_averages(mu.t_values, m_nu) - cell_averages(A.t_values, m_nu) - cell_averages(B.t_values, m_nu)
    elif functional == "K":
        lam = refs["lambda"]
        check_density_bound(mu)

        def H(v):
            return H_K(mu, grid_of(v), I, lam, check=False)
        gap = mu.mean() - lam.mean()
        report = schur_horn_report(mu, lam)
        shape = cell_averages(mu.t_values, m_nu) - cell_averages(lam.t_values, m_nu)
    elif functional == "LR":
        lam, eta = refs["lambda"], refs["eta"]

        def H(v):
            return H_LR(mu, grid_of(v), I, lam, eta)
        gap = mu.mean() - lam.mean() - eta.mean() + 0.5
        report = None
        shape = (cell_averages(mu.t_values, m_nu) - cell_averages(lam.t_values, m_nu)
                 - cell_averages(eta.t_values, m_nu) + cell_averages(x_unif.t_values, m_nu))
    else:
        raise ValueError(f"unknown functional {functional!r}")

    def direction_for(y):
        if y is None:
            return np.full(m_nu, 1.0 if gap > 0 else -1.0)
        k = int(round(y * m_nu))
        d = np.zeros(m_nu)
        d[k:] = 1.0 / (1.0 - y)
        return d

    return _Problem(H, abs(gap) <= 1e-12, gap, report, direction_for, [shape])


def rate_sup(functional: str, mu: QuantileMeasure, refs: dict, config: OptimizerConfig | None = None,
             I_evaluator: IEvaluator | None = None) -> RateEvaluation:
    """sup_ν H(ν) for functional in {D, AB, K, LR}, or a +∞ certificate.

    refs: {"B": μ_B} for D; {"A": μ_A, "B": μ_B} for AB; {"lambda": m_λ}
    for K; {"lambda": m_λ, "eta": m_η} for LR.
    """
    cfg = config or OptimizerConfig()
    I = I_evaluator or IEvaluator(cfg.N_schedule, cfg.bits)
    prob = _build_problem(functional, mu, refs, I, cfg.m_nu)
    slack_probe = I.estimate(QuantileMeasure(np.linspace(-1, 1, cfg.m_nu)), next(iter(refs.values()))).slack

    # unboundedness: the mean constraint first, then the worst partial-quantile violation
    if abs(prob.mean_gap) > cfg.admissibility_tol:
        cert, ok = _certificate(prob, None, cfg, "mean", slack_probe)
        if ok:
            return RateEvaluation(math.inf, cert.direction, cert,
                                  {"mean_gap": prob.mean_gap, "expected_slope": _expected_slope(functional, prob.mean_gap)})
    rep = prob.profile_check
    if rep is not None and rep.worst_violation > cfg.admissibility_tol:
        y = min(max(round(rep.worst_y * cfg.m_nu) / cfg.m_nu, 1.0 / cfg.m_nu), 1 - 1.0 / cfg.m_nu)
        cert, ok = _certificate(prob, y, cfg, "partial_sum", slack_probe)
        if ok:
            return RateEvaluation(math.inf, cert.direction, cert,
                                  {"worst_y": y, "worst_violation": rep.worst_violation})

    center = prob.translation_invariant
    m = cfg.m_nu
    starts = {"delta0": np.zeros(m), "uniform": (np.arange(m) + 0.5) / m - 0.5}
    for s in cfg.dilations:
        starts[f"dilation{s:g}"] = isotonic_regression(s * prob.start_shapes[0]).x
    best = None
    per_start = {}
    for name, x0 in starts.items():
        x, f, iters, gain = _ascend(prob.H, x0, center, cfg)
        per_start[name] = {"value": f, "iterations": iters, "final_improvement": gain}
        if best is None or f > best[1]:
            best = (x, f, name)
    x, f, name = best
    diag = {"best_start": name, "starts": per_start, "I_residual": I.max_residual,
            "I_evaluations": I.calls, "translation_invariant": center}
    return RateEvaluation(float(f), _measure_from_vector(x), None, diag)


def _expected_slope(functional: str, gap: float) -> float:
    return abs(gap) / 2 if functional in ("D", "AB") else abs(gap)


# finite-N checks ------------------------------------------------------------------


def kostka_upper_bound_check(lam, eta, points: Sequence) -> dict:
    """log K_{λη} ≤ log S_λ(x) - log m_η(x) at positive rational x (exact arithmetic)."""
    x = [Fraction(p) for p in points]
    K = kostka(lam, eta)
    S = schur_bialternant(lam, x)
    mval = Fraction(monomial_eval(eta, x))
    lhs = math.log(K) if K > 0 else -math.inf
    rhs = math.log(S) - math.log(mval)
    return {"kostka": K, "log_kostka": lhs, "log_bound": rhs, "holds": K * mval <= S}


def lr_upper_bound_check(lam, eta, kappa, points: Sequence) -> dict:
    """c^κ_{λη} S_κ(x) ≤ S_λ(x) S_η(x) at positive rational x (exact arithmetic)."""
    x = [Fraction(p) for p in points]
    c = lr_coefficient(lam, eta, kappa)
    Sk = schur_bialternant(kappa, x)
    Sl = schur_bialternant(lam, x)
    Se = schur_bialternant(eta, x)
    return {"lr": c, "log_lr": math.log(c) if c else -math.inf,
            "log_bound": math.log(Sl) + math.log(Se) - math.log(Sk), "holds": c * Sk <= Sl * Se}


# derivative of the spherical integral ------------------------------------------------


@dataclass
class DerivativeReport:
    finite_difference: float
    tilted_expectation: float
    mc_stderr: float
    curvature_term: float
    tolerance: float
    agree: bool
    eps: float
    acceptance: float


def derivative_check(A, B, f: Callable[[np.ndarray], np.ndarray], eps: float = 1e-3,
                     chain=None, bits: int = 64, threads: int = 1) -> DerivativeReport:
    """d/dε rate_N(A + εf(A), B) at ε = 0 against (1/(2N)) E_tilted[Tr(f(A) U B U*)]."""
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    N = a.size
    c = np.asarray(f(a), dtype=float)
    r = {k: finite_rate(a + k * eps * c, b, bits) for k in (-2, -1, 1, 2)}
    fd = (r[1] - r[-1]) / (2 * eps)
    third = abs(r[2] - 2 * r[1] + 2 * r[-1] - r[-2]) / (2 * eps ** 3)
    curvature = eps ** 2 * third / 6
    run = tilted_sampler(a, b, 2, chain or ChainConfig(), threads)
    series = run.diagonals @ c / (2 * N)
    est = float(series.mean())
    se = 0.0 if run.exact_haar and np.allclose(b, b[0]) else float(batch_stderr(series)[0])
    tol = 3 * (se + curvature) + 1e-12
    return DerivativeReport(fd, est, se, curvature, tol, abs(fd - est) <= tol, eps, run.acceptance)
