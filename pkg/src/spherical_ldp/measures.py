"""Probability measures on the line stored as quantile grids.

A measure ``mu`` is represented by its quantile function ``T_mu`` sampled at
the cell midpoints ``(k - 1/2)/m``, ``k = 1..m``.  Every integral over the
unit interval is the uniform Riemann sum on that grid, so a grid of size
``m`` is exactly the discrete measure ``(1/m) sum_k delta(T_k)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_GRID = 256
EXACT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class QuantileMeasure:
    """Nondecreasing quantile grid ``t_values[k] = T((k + 1/2)/m)``."""

    t_values: np.ndarray
    support_bound: float | None = field(default=None, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t_values, dtype=float).copy()
        if t.ndim != 1 or t.size == 0:
            raise ValueError("quantile grid must be a nonempty 1-d array")
        if not np.all(np.isfinite(t)):
            raise ValueError("non-finite quantile value")
        if np.any(np.diff(t) < 0):
            raise ValueError("quantile grid must be nondecreasing")
        if self.support_bound is not None and np.max(np.abs(t)) > self.support_bound * (1 + 1e-12):
            raise ValueError("quantile values exceed the declared support bound")
        t.setflags(write=False)
        object.__setattr__(self, "t_values", t)

    @property
    def m(self) -> int:
        return self.t_values.size

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) / self.m

    @property
    def atoms(self) -> list[tuple[float, float]]:
        """(location, mass) for every constant run of two or more cells."""
        t = self.t_values
        out = []
        start = 0
        for k in range(1, self.m + 1):
            if k == self.m or t[k] != t[start]:
                if k - start >= 2:
                    out.append((float(t[start]), (k - start) / self.m))
                start = k
        return out

    def mean(self) -> float:
        return float(np.mean(self.t_values))

    def moment(self, k: int) -> float:
        return float(np.mean(self.t_values ** k))

    def is_dirac(self) -> bool:
        return bool(self.t_values[0] == self.t_values[-1])

    def resample(self, n: int) -> "QuantileMeasure":
        """Exact cell averages of the piecewise-constant quantile function on a grid of size n."""
        return QuantileMeasure(cell_averages(self.t_values, n))

    def n_quantiles(self, n: int) -> np.ndarray:
        return cell_averages(self.t_values, n)

    def __repr__(self):
        return f"QuantileMeasure(m={self.m}, range=[{self.t_values[0]:.4g}, {self.t_values[-1]:.4g}])"

    # constructors -----------------------------------------------------------

    @classmethod
    def dirac(cls, c: float, m: int = DEFAULT_GRID) -> "QuantileMeasure":
        return cls(np.full(m, float(c)))

    @classmethod
    def uniform(cls, lo: float, hi: float, m: int = DEFAULT_GRID) -> "QuantileMeasure":
        return cls(lo + (hi - lo) * (np.arange(m) + 0.5) / m)

    @classmethod
    def from_quantile_function(cls, T: Callable[[np.ndarray], np.ndarray], m: int = DEFAULT_GRID) -> "QuantileMeasure":
        return cls(np.asarray(T((np.arange(m) + 0.5) / m), dtype=float))

    @classmethod
    def from_atoms(cls, locations: Sequence[float], masses: Sequence[float], m: int = DEFAULT_GRID) -> "QuantileMeasure":
        """Discrete measure; the CDF jump points are rounded to the grid."""
        loc = np.asarray(locations, dtype=float)
        w = np.asarray(masses, dtype=float)
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("masses must be nonnegative and sum to one")
        order = np.argsort(loc)
        loc, w = loc[order], w[order]
        cdf = np.cumsum(w)
        x = (np.arange(m) + 0.5) / m
        idx = np.searchsorted(cdf, x, side="right")
        return cls(loc[np.minimum(idx, loc.size - 1)])

    @classmethod
    def semicircle(cls, variance: float = 1.0, center: float = 0.0, m: int = DEFAULT_GRID) -> "QuantileMeasure":
        if variance == 0:
            return cls.dirac(center, m)
        return cls(center + semicircle_quantile((np.arange(m) + 0.5) / m, variance))

    @classmethod
    def arcsine(cls, radius: float = 2.0, m: int = DEFAULT_GRID) -> "QuantileMeasure":
        """Arcsine law on [-radius, radius]; this is the free convolution of two symmetric Bernoulli laws for radius 2."""
        u = (np.arange(m) + 0.5) / m
        return cls(radius * np.sin(np.pi * (u - 0.5)))


def cell_averages(values: np.ndarray, n: int) -> np.ndarray:
    """Average of the step function with levels ``values`` over each of n equal cells of [0, 1]."""
    values = np.asarray(values, dtype=float)
    m = values.size
    if n == m:
        return values.copy()
    if n % m == 0:
        return np.repeat(values, n // m)
    if m % n == 0:
        return values.reshape(n, m // n).mean(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(values)]) / m
    knots = np.linspace(0.0, 1.0, m + 1)
    c = np.interp(np.linspace(0.0, 1.0, n + 1), knots, cum)
    out = np.diff(c) * n
    return np.maximum.accumulate(out)


def semicircle_quantile(u: np.ndarray, variance: float = 1.0) -> np.ndarray:
    """Inverse CDF of the centered semicircle law; Newton on 2θ + sin 2θ = 2π(u - 1/2)."""
    u = np.asarray(u, dtype=float)
    target = 2 * np.pi * (u - 0.5)
    theta = np.clip(target / 4, -np.pi / 2, np.pi / 2)
    # f(θ) = 2θ + sin 2θ is monotone on [-π/2, π/2] with f' = 4cos²θ
    lo = np.full_like(theta, -np.pi / 2)
    hi = np.full_like(theta, np.pi / 2)
    for _ in range(200):
        f = 2 * theta + np.sin(2 * theta) - target
        lo = np.where(f < 0, theta, lo)
        hi = np.where(f > 0, theta, hi)
        d = 4 * np.cos(theta) ** 2
        step = np.where(d > 1e-300, f / np.maximum(d, 1e-300), np.inf)
        new = theta - step
        bad = ~((new > lo) & (new < hi))
        new = np.where(bad, 0.5 * (lo + hi), new)
        if np.max(np.abs(new - theta)) < 1e-15:
            theta = new
            break
        theta = new
    return 2 * np.sqrt(variance) * np.sin(theta)


def semicircle_cdf(x: np.ndarray, variance: float = 1.0) -> np.ndarray:
    r = 2 * np.sqrt(variance)
    s = np.clip(np.asarray(x, dtype=float) / r, -1.0, 1.0)
    theta = np.arcsin(s)
    return 0.5 + (2 * theta + np.sin(2 * theta)) / (2 * np.pi)


def semicircle_density(x: np.ndarray, variance: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.maximum(4 * variance - x ** 2, 0.0)) / (2 * np.pi * variance)


# operations -------------------------------------------------------------------


def quantile_from_samples(samples: Iterable[float], m: int = DEFAULT_GRID) -> QuantileMeasure:
    s = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("empty sample set")
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite sample")
    s = np.sort(s)
    x = (np.arange(m) + 0.5) / m
    idx = np.minimum(np.floor(s.size * x).astype(int), s.size - 1)
    return QuantileMeasure(s[idx])


def _common(mu: QuantileMeasure, nu: QuantileMeasure) -> tuple[np.ndarray, np.ndarray]:
    if mu.m == nu.m:
        return mu.t_values, nu.t_values
    size = math.lcm(mu.m, nu.m)
    return np.repeat(mu.t_values, size // mu.m), np.repeat(nu.t_values, size // nu.m)


def wasserstein(mu: QuantileMeasure, nu: QuantileMeasure) -> float:
    a, b = _common(mu, nu)
    return float(np.mean(np.abs(a - b)))


def pairing_integral(mu: QuantileMeasure, nu: QuantileMeasure) -> float:
    """∫₀¹ T_μ T_ν dx."""
    a, b = _common(mu, nu)
    return float(np.mean(a * b))


def _dictionary(lo: float, hi: float, spacing: float = 0.125,
                widths: Sequence[float] = (0.125, 0.25, 0.5, 1.0)):
    centers = np.arange(math.floor(lo / spacing) * spacing - 2.0, hi + 2.0 + spacing / 2, spacing)
    return centers, np.asarray(widths)


def weak_distance(mu: QuantileMeasure, nu: QuantileMeasure, spacing: float = 0.125) -> float:
    """Bounded-Lipschitz distance restricted to a finite dictionary.

    The dictionary holds hats ``min(1, w) * max(0, 1 - |x - c|/w)`` and clipped
    ramps ``clip((x - c)/w, -1, 1)`` for centers ``c`` on a grid of the given
    spacing covering both supports plus a margin of 2, and half-widths
    ``w`` in {1/8, 1/4, 1/2, 1}.  All members are 1-Lipschitz and bounded by 1,
    so the result is a lower bound of the supremum over that class; it is
    exact for measures whose atoms sit on the center grid.
    """
    lo = min(mu.t_values[0], nu.t_values[0])
    hi = max(mu.t_values[-1], nu.t_values[-1])
    centers, widths = _dictionary(lo, hi, spacing)
    best = 0.0
    for w in widths:
        h = min(1.0, w)
        dmu = (mu.t_values[None, :] - centers[:, None]) / w
        dnu = (nu.t_values[None, :] - centers[:, None]) / w
        hat = h * (np.maximum(0.0, 1 - np.abs(dmu)).mean(axis=1) - np.maximum(0.0, 1 - np.abs(dnu)).mean(axis=1))
        ramp = np.clip(dmu, -1, 1).mean(axis=1) - np.clip(dnu, -1, 1).mean(axis=1)
        best = max(best, float(np.max(np.abs(hat))), float(np.max(np.abs(ramp))))
    return min(best, 1.0)


def dilate(mu: QuantileMeasure, L: float) -> QuantileMeasure:
    t = mu.t_values * L
    return QuantileMeasure(t if L >= 0 else t[::-1])


def truncate(mu: QuantileMeasure, eps: float) -> QuantileMeasure:
    """Move the mass outside [-1/eps, 1/eps] to the origin."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = np.where(np.abs(mu.t_values) > 1.0 / eps, 0.0, mu.t_values)
    return QuantileMeasure(np.sort(t))


@dataclass
class AdmissibilityReport:
    mean_gap: float
    y: np.ndarray
    profile: np.ndarray
    worst_violation: float
    worst_y: float
    admissible: bool
    tol: float


def schur_horn_report(mu: QuantileMeasure, references: QuantileMeasure | Sequence[QuantileMeasure],
                      grid: np.ndarray | None = None, tol: float = EXACT_TOL) -> AdmissibilityReport:
    """Tail-integral profile y ↦ ∫_y^1 (T_μ - Σ_r T_r) dx.

    With one reference this is the limiting Schur–Horn (majorization) test;
    with two references it is the limiting Ky Fan test for a sum.
    """
    refs = [references] if isinstance(references, QuantileMeasure) else list(references)
    size = mu.m
    for r in refs:
        size = math.lcm(size, r.m)
    diff = np.repeat(mu.t_values, size // mu.m)
    for r in refs:
        diff = diff - np.repeat(r.t_values, size // r.m)
    tail = np.concatenate([np.cumsum(diff[::-1])[::-1], [0.0]]) / size
    knots = np.linspace(0.0, 1.0, size + 1)
    y = knots if grid is None else np.asarray(grid, dtype=float)
    prof = np.interp(y, knots, tail)
    mean_gap = float(tail[0])
    inner = tail[1:-1]
    if inner.size:
        k = int(np.argmax(inner))
        worst, worst_y = float(inner[k]), float(knots[k + 1])
    else:
        worst, worst_y = 0.0, 0.5
    admissible = abs(mean_gap) <= tol and float(np.max(prof)) <= tol and worst <= tol
    return AdmissibilityReport(mean_gap, y, prof, worst, worst_y, admissible, tol)


def empirical_tol(n_samples: int) -> float:
    return 3.0 / math.sqrt(n_samples)


def counting_measure(lam, N: int) -> QuantileMeasure:
    """(1/N) Σ_i δ((λ_i + N - i)/N) as an N-point grid."""
    parts = list(getattr(lam, "parts", lam))
    if len(parts) > N:
        raise ValueError(f"partition has {len(parts)} parts, more than N={N}")
    parts = parts + [0] * (N - len(parts))
    vals = np.array([(parts[i] + N - (i + 1)) / N for i in range(N)], dtype=float)
    return QuantileMeasure(np.sort(vals))


# file format --------------------------------------------------------------------


def write_measure_csv(mu: QuantileMeasure, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantile", "value"])
        for x, t in zip(mu.midpoints, mu.t_values):
            w.writerow([repr(float(x)), repr(float(t))])
    return path


def read_measure_csv(path: str | Path) -> QuantileMeasure:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["quantile", "value"]:
            raise ValueError("measure CSV needs the header 'quantile,value'")
        rows = [(float(r["quantile"]), float(r["value"])) for r in reader]
    if not rows:
        raise ValueError("empty measure file")
    rows.sort(key=lambda r: r[0])
    vals = np.array([v for _, v in rows])
    if np.any(np.diff(vals) < 0):
        raise ValueError("measure file is not monotone")
    return QuantileMeasure(vals)
