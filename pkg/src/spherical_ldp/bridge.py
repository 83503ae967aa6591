"""Density / velocity fields of the matrix bridge and their Euler-equation diagnostics.

A field is a pair (ρ_t(x), u_t(x)) on a space-time grid.  Fields come either
from simulation (kernel density estimates of bridge spectra, with the
velocity recovered from the continuity equation ρu = -∂_t F) or from the
closed-form semicircle scaling flow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import ndtr

from .freeprob import log_energy
from .measures import QuantileMeasure, semicircle_density

DENSITY_FLOOR = 1e-6


@dataclass
class BridgeField:
    t_grid: np.ndarray
    x_grid: np.ndarray
    rho: np.ndarray          # (n_t, n_x)
    u: np.ndarray            # (n_t, n_x), NaN where masked
    raw_mass: np.ndarray | None = None
    bandwidth: float | None = None
    N: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def f_abs(self) -> np.ndarray:
        return np.hypot(np.nan_to_num(self.u), np.pi * self.rho)

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.u) & (self.rho > DENSITY_FLOOR)

    def slice_mass(self) -> np.ndarray:
        return trapezoid(self.rho, self.x_grid, axis=1)


# construction ----------------------------------------------------------------------


def semicircle_path(v0: float, v1: float):
    """Variance path v(t) = v0 + p t + C t²/4 of the semicircle scaling flow joining sc(v0) to sc(v1).

    The flow ρ_t = sc(v(t)), u = x v'/(2v) solves the Euler system with
    pressure π²ρ³/3 exactly when v'² = 1 + C v.
    """
    p = -2 * v0 + math.sqrt(1 + 4 * v0 * v1)
    C = 4 * (v1 - v0 - p)
    return (lambda t: v0 + p * t + C * t * t / 4), (lambda t: p + C * t / 2)


def semicircle_bridge_field(t_grid, x_grid, v0: float = 0.0, v1: float = 0.0) -> BridgeField:
    """Closed-form field of the semicircle flow; v0 = v1 = 0 is the δ_0 → δ_0 bridge with v = t(1-t)."""
    t = np.asarray(t_grid, dtype=float)
    x = np.asarray(x_grid, dtype=float)
    v, dv = semicircle_path(v0, v1)
    rho = np.zeros((t.size, x.size))
    u = np.full((t.size, x.size), np.nan)
    for i, ti in enumerate(t):
        vi = v(ti)
        if vi <= 0:
            continue
        rho[i] = semicircle_density(x, vi)
        inside = rho[i] > 0
        u[i, inside] = x[inside] * dv(ti) / (2 * vi)
    return BridgeField(t, x, rho, u, meta={"source": "semicircle", "v0": v0, "v1": v1})


def estimate_field(batch, x_grid, c: float = 0.5, floor: float = DENSITY_FLOOR) -> BridgeField:
    """Kernel estimate of (ρ_t, u_t) from a bridge batch.

    ρ̂_t is a Gaussian kernel density with bandwidth h = c·N^{-1/3}, pooled
    over samples; u is read from the integrated continuity equation
    ρ̂ û = -∂_t F̂ with F̂ the kernel-smoothed CDF and time-centered
    differences (one-sided at the ends of the grid).  û is masked below the
    density floor.
    """
    rec = batch.records
    if rec.ndim != 3 or rec.shape[1] < 3:
        raise ValueError("need at least three time slices")
    t = np.asarray(batch.t_grid, dtype=float)
    x = np.asarray(x_grid, dtype=float)
    N = rec.shape[2]
    h = c * N ** (-1.0 / 3.0)
    n_t = t.size
    rho = np.empty((n_t, x.size))
    F = np.empty((n_t, x.size))
    raw_mass = np.empty(n_t)
    for k in range(n_t):
        pts = rec[:, k, :].ravel()
        raw_mass[k] = pts.size / (rec.shape[0] * N)
        z = (x[:, None] - pts[None, :]) / h
        rho[k] = np.exp(-0.5 * z * z).sum(axis=1) / (pts.size * h * math.sqrt(2 * math.pi))
        F[k] = ndtr(z).mean(axis=1)
    dF = np.gradient(F, t, axis=0, edge_order=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = -dF / rho
    u[rho <= floor] = np.nan
    return BridgeField(t, x, rho, u, raw_mass, h, N, {"source": "kde", "c": c})


# weak Euler residuals ---------------------------------------------------------------


def _bump(s: np.ndarray):
    """Standard C^∞ bump on (-1, 1) and its derivative."""
    out = np.zeros_like(s)
    d = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    e = np.exp(-1.0 / (1 - si * si))
    out[inside] = e
    d[inside] = e * (-2 * si / (1 - si * si) ** 2)
    return out, d


@dataclass
class TestFunction:
    t0: float
    x0: float
    rt: float
    rx: float

    def evaluate(self, t: np.ndarray, x: np.ndarray):
        bt, dbt = _bump((t - self.t0) / self.rt)
        bx, dbx = _bump((x - self.x0) / self.rx)
        phi = np.outer(bt, bx)
        phi_t = np.outer(dbt / self.rt, bx)
        phi_x = np.outer(bt, dbx / self.rx)
        return phi, phi_t, phi_x


def default_battery(t_centers=(0.3, 0.4, 0.5, 0.6, 0.7), rel_x=(-0.5, -0.25, 0.0, 0.25, 0.5),
                    rt: float = 0.08, scale=None) -> list[TestFunction]:
    """Tensor bumps placed inside the bulk of the δ_0 → δ_0 bridge (|x| < 2 sqrt(t(1-t)))."""
    out = []
    for t0 in t_centers:
        r = 2 * math.sqrt(t0 * (1 - t0)) if scale is None else scale(t0)
        for a in rel_x:
            out.append(TestFunction(t0, a * r, rt, 0.3 * r))
    return out


@dataclass
class EulerResidualReport:
    continuity: np.ndarray
    momentum: np.ndarray
    used: int
    skipped: int

    @property
    def continuity_norm(self) -> float:
        return float(np.sqrt(np.mean(self.continuity ** 2))) if self.used else float("nan")

    @property
    def momentum_norm(self) -> float:
        return float(np.sqrt(np.mean(self.momentum ** 2))) if self.used else float("nan")

    @property
    def total(self) -> float:
        return math.hypot(self.continuity_norm, self.momentum_norm)


def euler_residual(fld: BridgeField, battery: list[TestFunction] | None = None,
                   floor: float = DENSITY_FLOOR) -> EulerResidualReport:
    """Weak residuals ∬ ρφ_t + ρuφ_x and ∬ ρuφ_t + (ρu² - π²ρ³/3)φ_x, each divided by ‖∇φ‖_L2.

    Test functions whose support leaves {ρ > 10·floor} on the grid are skipped.
    """
    battery = battery if battery is not None else default_battery()
    t, x = fld.t_grid, fld.x_grid
    rho = fld.rho
    u = np.nan_to_num(fld.u)
    mom = rho * u
    flux = rho * u * u - np.pi ** 2 * rho ** 3 / 3
    r1, r2 = [], []
    skipped = 0
    for tf in battery:
        phi, phi_t, phi_x = tf.evaluate(t, x)
        support = phi > 0
        if not np.any(support) or np.any(rho[support] <= 10 * floor):
            skipped += 1
            continue
        norm = math.sqrt(trapezoid(trapezoid(phi_t ** 2 + phi_x ** 2, x, axis=1), t))
        c = trapezoid(trapezoid(rho * phi_t + mom * phi_x, x, axis=1), t)
        m = trapezoid(trapezoid(mom * phi_t + flux * phi_x, x, axis=1), t)
        r1.append(c / norm)
        r2.append(m / norm)
    return EulerResidualReport(np.asarray(r1), np.asarray(r2), len(r1), skipped)


# bounds and action ------------------------------------------------------------------


@dataclass
class FBoundReport:
    constant: float
    relative_constant: float | None
    K: float
    per_time: np.ndarray


def f_bound_check(fld: BridgeField, K: float, rho_min: float = DENSITY_FLOOR,
                  rel_min: float = 0.1) -> FBoundReport:
    """max |u + iπρ| sqrt(t(1-t)) over interior times, on the bulk of each slice.

    A point counts when ρ exceeds both rho_min and rel_min times the slice's
    peak density; kernel tails beyond the true support carry velocities
    -∂_tF̂/ρ̂ that are ratios of two small smoothed quantities and are left
    out.  Returns the measured constant C (absolute) and C/K when K > 0.
    """
    t = fld.t_grid
    w = np.sqrt(np.clip(t * (1 - t), 0, None))
    peak = fld.rho.max(axis=1, keepdims=True)
    keep = (fld.rho > rho_min) & (fld.rho > rel_min * peak) & np.isfinite(fld.u)
    vals = np.where(keep, fld.f_abs, 0.0) * w[:, None]
    interior = (t > 0) & (t < 1)
    per = vals.max(axis=1)
    C = float(per[interior].max()) if np.any(interior) else 0.0
    if not np.isfinite(C):
        raise ArithmeticError("unbounded |f| on the grid")
    return FBoundReport(C, C / K if K > 0 else None, K, per)


@dataclass
class ActionValue:
    value: float
    per_slice: np.ndarray
    kinetic: float
    pressure: float


def action(fld: BridgeField) -> ActionValue:
    """S(u, ρ) = ∫∫ (π²ρ³/3 + u²ρ) dx dt by the trapezoid rule; masked velocities count as 0."""
    u = np.nan_to_num(fld.u)
    pres = np.pi ** 2 * fld.rho ** 3 / 3
    kin = u * u * fld.rho
    per = trapezoid(pres + kin, fld.x_grid, axis=1)
    value = float(trapezoid(per, fld.t_grid))
    return ActionValue(value, per, float(trapezoid(trapezoid(kin, fld.x_grid, axis=1), fld.t_grid)),
                       float(trapezoid(trapezoid(pres, fld.x_grid, axis=1), fld.t_grid)))


def semicircle_action(v0: float, v1: float, n: int = 4001) -> float:
    """Closed-form integrand of S along the semicircle flow: ∫ (1 + v'²)/(4v) dt."""
    v, dv = semicircle_path(v0, v1)
    t = np.linspace(0, 1, n)
    return float(trapezoid((1 + dv(t) ** 2) / (4 * v(t)), t))


@dataclass
class ActionDifferenceReport:
    I_difference: float
    I_slack: float
    predicted: float
    predicted_printed: float
    agree: bool
    parts: dict


def action_difference_check(pairs, S_values, I_estimates, coefficients=(0.25, 0.25, 0.25),
                            printed=(0.5, 0.5, 0.25), tol: float | None = None) -> ActionDifferenceReport:
    """Compare I(μ_A, μ_B) - I(μ_A', μ_B') with the action representation.

    The representation I = -a·inf S - b·(Σ(μ_A) + Σ(μ_B)) + c·(m₂(μ_A) + m₂(μ_B)) - const
    is evaluated in the difference so the constant cancels.  `coefficients`
    holds (a, b, c) for the normalization of I used throughout the package;
    `printed` is the alternative combination, reported for comparison.
    pairs = ((μ_A, μ_B), (μ_A', μ_B')); S_values = (inf S, inf S');
    I_estimates = (LimitEstimate, LimitEstimate).
    """
    (A, B), (A2, B2) = pairs
    sig = [log_energy(m) for m in (A, B, A2, B2)]
    if not all(np.isfinite(sig)):
        raise ValueError("all four log-energies must be finite (no atoms)")
    m2 = [m.moment(2) for m in (A, B, A2, B2)]
    dS = S_values[0] - S_values[1]
    dSig = (sig[0] + sig[1]) - (sig[2] + sig[3])
    dM = (m2[0] + m2[1]) - (m2[2] + m2[3])

    def combo(a, b, c):
        return -a * dS - b * dSig + c * dM

    dI = I_estimates[0].value - I_estimates[1].value
    slack = I_estimates[0].slack + I_estimates[1].slack
    pred = combo(*coefficients)
    tol = tol if tol is not None else 3 * slack + 2e-3
    return ActionDifferenceReport(dI, slack, pred, combo(*printed), abs(dI - pred) <= tol,
                                  {"dS": dS, "dSigma": dSig, "dM2": dM})
