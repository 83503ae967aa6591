"""Command-line entry point: `spherical-ldp <command> [<action>] [flags]`.

Every run writes its CSV outputs and a JSON report into --out-dir and
prints the report.  Exit codes: 0 success, 1 usage error, 2 a violated
invariant (or, for `verify`, a failed criterion).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvariantViolation

OUT_DIR_ENV = "SPHERICAL_LDP_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# parsing helpers ------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(Fraction(v.strip())) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"not a comma-separated list of integers: {text!r}") from exc


NAMED_GRID = 512


def _named(text: str):
    """semicircle[:variance], uniform[:lo:hi], arcsine[:radius] or dirac:c; None for anything else."""
    from .measures import QuantileMeasure

    name, *args = text.split(":")
    builders = {"semicircle": (lambda v=1.0: QuantileMeasure.semicircle(v, m=NAMED_GRID), 1),
                "uniform": (lambda lo=0.0, hi=1.0: QuantileMeasure.uniform(lo, hi, NAMED_GRID), 2),
                "arcsine": (lambda r=2.0: QuantileMeasure.arcsine(r, NAMED_GRID), 1),
                "dirac": (lambda c: QuantileMeasure.dirac(c, NAMED_GRID), 1)}
    if name not in builders:
        return None
    fn, max_args = builders[name]
    if len(args) > max_args:
        raise UsageError(f"too many parameters for {name}: {text!r}")
    try:
        return fn(*(float(v) for v in args))
    except TypeError as exc:
        raise UsageError(f"missing parameter for {name}: {text!r}") from exc


def _measure(text: str | None):
    """A measure from a CSV path, a named family, or a comma list of atoms (equal weights)."""
    from .measures import QuantileMeasure, read_measure_csv

    if text is None:
        raise UsageError("missing measure argument")
    if os.path.exists(text):
        return read_measure_csv(text)
    named = _named(text)
    if named is not None:
        return named
    return QuantileMeasure(np.sort(np.asarray(_floats(text))))


def _spectrum(text: str | None, n: int | None) -> np.ndarray:
    """A length-n spectrum: a comma list used verbatim when its length is n (or n is unset), else N-quantiles."""
    from .measures import read_measure_csv

    if text is None:
        raise UsageError("missing spectrum argument")
    if os.path.exists(text):
        mu = read_measure_csv(text)
        return mu.n_quantiles(n) if n else mu.t_values.copy()
    named = _named(text)
    if named is not None:
        if n is None:
            raise UsageError(f"{text!r} needs --n")
        return named.n_quantiles(n)
    vals = np.asarray(_floats(text))
    if n is None or vals.size == n:
        return vals
    from .measures import QuantileMeasure
    return QuantileMeasure(np.sort(vals)).n_quantiles(n)


def _grid(text: str) -> np.ndarray:
    lo, hi, n = text.split(",")
    return np.linspace(float(lo), float(hi), int(n))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    def __init__(self, args):
        self.args = args
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: list[tuple[str, Path]] = []
        self.tag = "-".join(x for x in (args.command, getattr(args, "action", None)) if x)

    def path(self, name: str) -> Path:
        return self.out_dir / f"{self.tag}-{name}"

    def add(self, name: str, path: Path) -> None:
        self.outputs.append((name, Path(path)))


def _write_rows(path: Path, header, rows) -> Path:
    import csv

    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


# commands ---------------------------------------------------------------------------


def cmd_hciz(run: Run) -> dict:
    from .hciz import hciz_exact, hciz_mc, limit_I_estimate

    a = run.args
    if a.action == "limit":
        est = limit_I_estimate(_measure(a.a), _measure(a.b), tuple(_ints(a.n_schedule)),
                               "exact" if a.method == "exact" else "mc", a.bits, a.samples, a.seed,
                               a.beta, a.threads)
        return {"method": est.method, "value": est.value, "residual": est.residual,
                "correction": est.correction, "slack": est.slack, "N_schedule": list(est.N_schedule),
                "rates": list(est.rates), "beta": a.beta, "seed": a.seed}
    x = _spectrum(a.a, a.n)
    y = _spectrum(a.b, a.n)
    if x.size != y.size:
        raise UsageError("--a and --b must have the same length (or pass --n)")
    if a.action == "exact":
        res = hciz_exact(x, y, a.beta, a.bits, confluent=a.confluent)
    else:
        res = hciz_mc(x, y, a.beta, a.samples, a.seed, a.threads)
    return res.to_dict()


def cmd_kostka(run: Run) -> dict:
    from .partitions import Partition, dominance, kostka

    lam = Partition.parse(run.args.lam)
    eta = _ints(run.args.eta)
    if any(v < 0 for v in eta):
        raise UsageError("--eta entries must be nonnegative")
    k = kostka(lam, eta)
    return {"kostka": k, "dominance": dominance(lam, Partition(tuple(sorted(eta, reverse=True))))}


def cmd_lr(run: Run) -> dict:
    from .partitions import Partition, lr_coefficient

    a = run.args
    return {"lr": lr_coefficient(Partition.parse(a.lam), Partition.parse(a.eta), Partition.parse(a.kappa))}


def cmd_schur(run: Run) -> dict:
    from .partitions import Partition, schur_bialternant, schur_combinatorial
    from .rates import finite_J_terms

    a = run.args
    lam = Partition.parse(a.lam)
    pts = [Fraction(v.strip()) for v in a.points.split(",") if v.strip()]
    combo = schur_combinatorial(lam, pts)
    out = {"schur": str(combo), "schur_float": float(combo)}
    if len(set(pts)) == len(pts):
        out["bialternant_agrees"] = schur_bialternant(lam, pts) == combo
    if a.identity:
        terms = finite_J_terms(pts, lam)
        out.update(terms)
        out["identity_rel_error"] = abs(math.expm1(terms["log_identity_rhs"] - terms["log_schur"]))
    return out


def cmd_experiment(run: Run) -> dict:
    from .measures import write_measure_csv
    from .rmt import bridge_simulate, diag_conjugation_experiment, horn_sum_experiment
    from .tilted import ChainConfig, tilted_diagonal_profile

    a = run.args
    if a.action == "diag":
        batch, prof = diag_conjugation_experiment(_spectrum(a.spectrum_b, a.n), a.beta, a.samples, a.seed,
                                                  a.m, a.threads)
        run.add("profile", write_measure_csv(prof, run.path("profile.csv")))
        metrics = {"mean_profile_mean": prof.mean(), **batch.diagnostics}
    elif a.action == "horn":
        batch = horn_sum_experiment(_spectrum(a.spectrum_a, a.n), _spectrum(a.spectrum_b, a.n), a.beta,
                                    a.samples, a.seed, a.threads)
        metrics = dict(batch.diagnostics)
    elif a.action == "bridge":
        t = _floats(a.t_grid) if a.t_grid else np.linspace(0, 1, a.n_times)
        cfg = ChainConfig(burn_in=a.burn_in)
        batch = bridge_simulate(_spectrum(a.spectrum_a, a.n), _spectrum(a.spectrum_b, a.n), a.beta, t,
                                a.samples, cfg, a.seed, a.threads)
        metrics = dict(batch.diagnostics)
    else:
        cfg = ChainConfig(n_samples=a.samples, burn_in=a.burn_in, seed=a.seed)
        prof = tilted_diagonal_profile(_spectrum(a.spectrum_y, a.n), _spectrum(a.spectrum_b, a.n), a.beta,
                                       cfg, a.m, a.threads)
        run.add("profile", write_measure_csv(prof.measure, run.path("profile.csv")))
        return {"monotone_violation": prof.monotone_violation, "acceptance": prof.run.acceptance,
                "iat": prof.run.iat, "max_stderr": float(np.max(prof.stderr))}
    run.add("batch", batch.write_csv(run.path("batch.csv")))
    metrics.update({"n_samples": batch.n_samples, "N": batch.N})
    return metrics


def cmd_freeprob(run: Run) -> dict:
    from .freeprob import (cauchy_transform, density_from_transform, free_convolution_proxy, log_energy,
                           r_transform_series, semicircle_subordination)
    from .measures import write_measure_csv

    a = run.args
    mu = _measure(a.mu)
    if a.action == "cauchy":
        zs = [complex(v.strip().replace(" ", "")) for v in a.z.split(",")]
        g = cauchy_transform(mu, np.array(zs))
        return {"z": [str(z) for z in zs], "G_real": g.real, "G_imag": g.imag}
    if a.action == "subordinate":
        grid = _grid(a.grid)

        def G(z):
            return semicircle_subordination(mu, a.s, z)[1]

        curve = density_from_transform(G, grid, a.eta)
        run.add("density", _write_rows(run.path("density.csv"), ["x", "density"], zip(grid, curve.density)))
        return {"total_mass": curve.total_mass, "renormalized": curve.renormalized, "atomic": curve.atomic}
    if a.action == "rtransform":
        series = r_transform_series(mu, a.order)
        return {"free_cumulants": series.free_cumulants, "moments": series.source_moments}
    if a.action == "convolve":
        res = free_convolution_proxy(mu, _measure(a.mu_b), a.n or 256, a.samples, a.seed, a.beta, a.threads)
        run.add("measure", write_measure_csv(res.measure, run.path("measure.csv")))
        return {"stderr": res.stderr, "mean": res.measure.mean()}
    return {"log_energy": log_energy(mu, discrete=a.discrete)}


def cmd_rate(run: Run) -> dict:
    from .measures import write_measure_csv
    from .rates import IEvaluator, OptimizerConfig, rate_sup

    a = run.args
    mu = _measure(a.mu)
    kind = {"d": "D", "ab": "AB", "k": "K", "lr": "LR"}[a.action]
    refs = {"D": lambda: {"B": _measure(a.ref_a)},
            "AB": lambda: {"A": _measure(a.ref_a), "B": _measure(a.ref_b)},
            "K": lambda: {"lambda": _measure(a.ref_a)},
            "LR": lambda: {"lambda": _measure(a.ref_a), "eta": _measure(a.ref_b)}}[kind]()
    sched = tuple(_ints(a.n_schedule))
    cfg = OptimizerConfig(m_nu=a.nu_grid, N_schedule=sched, max_iter=a.max_iter)
    res = rate_sup(kind, mu, refs, cfg, IEvaluator(sched))
    run.add("nu_star", write_measure_csv(res.nu_star, run.path("nu_star.csv")))
    out = {"value": res.value, "diagnostics": {k: v for k, v in res.diagnostics.items() if k != "starts"}}
    if res.certificate is not None:
        c = res.certificate
        out["certificate"] = {"kind": c.kind, "slope": c.slope, "L": list(c.L), "values": list(c.values)}
    return out


def cmd_bridge(run: Run) -> dict:
    from .bridge import (action, estimate_field, euler_residual, f_bound_check, semicircle_bridge_field,
                         semicircle_path)
    from .rmt import read_batch_csv

    a = run.args
    x = _grid(a.x_grid) if a.x_grid else None
    if a.closed_form:
        v0, v1 = _floats(a.closed_form)
        t = np.linspace(0, 1, a.n_times)
        if x is None:
            r = 2 * math.sqrt(max(float(np.max(semicircle_path(v0, v1)[0](t))), 0.0))
            x = np.linspace(-1.05 * r - 0.05, 1.05 * r + 0.05, 521)
        fld = semicircle_bridge_field(t, x, v0, v1)
    elif a.batch:
        x = x if x is not None else _grid("-1.3,1.3,261")
        fld = estimate_field(read_batch_csv(a.batch), x, a.bandwidth_c)
    else:
        raise UsageError("bridge needs --batch or --closed-form")
    if a.action == "field":
        rows = ((t, xx, fld.rho[i, j], fld.u[i, j]) for i, t in enumerate(fld.t_grid)
                for j, xx in enumerate(fld.x_grid))
        run.add("field", _write_rows(run.path("field.csv"), ["t", "x", "rho", "u"], rows))
        return {"max_mass_deviation": float(np.max(np.abs(fld.slice_mass() - 1))),
                "f_bound_C": f_bound_check(fld, a.k).constant}
    if a.action == "residual":
        r = euler_residual(fld)
        return {"continuity": r.continuity_norm, "momentum": r.momentum_norm, "total": r.total,
                "test_functions": r.used, "skipped": r.skipped}
    v = action(fld)
    return {"action": v.value, "kinetic": v.kinetic, "pressure": v.pressure}


def cmd_verify(run: Run) -> dict:
    from .verify import run_suite

    a = run.args
    only = _ints(a.criteria) if a.criteria else None
    results = run_suite(a.suite, a.seed, a.threads, only)
    for r in results:
        print(r.line(), file=sys.stderr)
    run.failed = [r.number for r in results if not r.passed]
    return {f"c{r.number}": {"passed": r.passed, **r.metrics} for r in results}


COMMANDS = {"hciz": cmd_hciz, "kostka": cmd_kostka, "lr": cmd_lr, "schur": cmd_schur,
            "experiment": cmd_experiment, "freeprob": cmd_freeprob, "rate": cmd_rate,
            "bridge": cmd_bridge, "verify": cmd_verify}


# parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out-dir", default=os.environ.get(OUT_DIR_ENV, "spherical-ldp-out"))
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="file of key=value lines, applied beneath explicit flags")

    p = _Parser(prog="spherical-ldp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    h = sub.add_parser("hciz", parents=[common])
    h.add_argument("action", choices=["exact", "mc", "limit"])
    h.add_argument("--a", required=True)
    h.add_argument("--b", required=True)
    h.add_argument("--n", type=int)
    h.add_argument("--beta", type=int, default=2, choices=[1, 2])
    h.add_argument("--samples", type=int, default=100_000)
    h.add_argument("--bits", type=int, default=128)
    h.add_argument("--n-schedule", default="8,16,32")
    h.add_argument("--method", choices=["exact", "mc"], default="exact")
    h.add_argument("--confluent", action="store_true")

    k = sub.add_parser("kostka", parents=[common])
    k.add_argument("--lambda", dest="lam", required=True)
    k.add_argument("--eta", required=True)

    lr = sub.add_parser("lr", parents=[common])
    lr.add_argument("--lambda", dest="lam", required=True)
    lr.add_argument("--eta", required=True)
    lr.add_argument("--kappa", required=True)

    s = sub.add_parser("schur", parents=[common])
    s.add_argument("--lambda", dest="lam", required=True)
    s.add_argument("--points", required=True)
    s.add_argument("--identity", action="store_true", help="also check the spherical-integral identity at y=points")

    e = sub.add_parser("experiment", parents=[common])
    e.add_argument("action", choices=["diag", "horn", "bridge", "tilted-profile"])
    e.add_argument("--spectrum-a")
    e.add_argument("--spectrum-b")
    e.add_argument("--spectrum-y")
    e.add_argument("--n", type=int)
    e.add_argument("--beta", type=int, default=2, choices=[1, 2])
    e.add_argument("--samples", type=int, default=100)
    e.add_argument("--t-grid", help="comma list of times; overrides --n-times")
    e.add_argument("--n-times", type=int, default=11, help="uniform time grid on [0, 1]")
    e.add_argument("--m", type=int)
    e.add_argument("--burn-in", type=int, default=100_000)

    f = sub.add_parser("freeprob", parents=[common])
    f.add_argument("action", choices=["cauchy", "subordinate", "rtransform", "convolve", "energy"])
    f.add_argument("--mu", required=True)
    f.add_argument("--mu-b")
    f.add_argument("--z", default="0+1j")
    f.add_argument("--s", type=float, default=1.0)
    f.add_argument("--grid", default="-3,3,601")
    f.add_argument("--eta", type=float, default=1e-3)
    f.add_argument("--order", type=int, default=8)
    f.add_argument("--n", type=int)
    f.add_argument("--samples", type=int, default=8)
    f.add_argument("--beta", type=int, default=2, choices=[1, 2])
    f.add_argument("--discrete", action="store_true")

    r = sub.add_parser("rate", parents=[common])
    r.add_argument("action", choices=["d", "ab", "k", "lr"])
    r.add_argument("--mu", required=True)
    r.add_argument("--ref-a", required=True)
    r.add_argument("--ref-b")
    r.add_argument("--nu-grid", type=int, default=32)
    r.add_argument("--n-schedule", default="8,16,32")
    r.add_argument("--max-iter", type=int, default=30)

    b = sub.add_parser("bridge", parents=[common])
    b.add_argument("action", choices=["field", "residual", "action"])
    b.add_argument("--batch")
    b.add_argument("--closed-form", help="v0,v1 of the semicircle flow instead of a batch")
    b.add_argument("--n-times", type=int, default=81)
    b.add_argument("--x-grid", help="lo,hi,count (default -1.3,1.3,261, or the flow's support for --closed-form)")
    b.add_argument("--bandwidth-c", type=float, default=0.5)
    b.add_argument("--k", type=float, default=1.0)

    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--suite", choices=["quick", "full"], default="quick")
    v.add_argument("--criteria", help="comma list of criterion numbers (default: all)")
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        lines = Path(known.config).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    values = {}
    for ln in lines:
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise UsageError(f"config line without '=': {ln!r}")
        key, val = (x.strip() for x in ln.split("=", 1))
        values[key.replace("-", "_")] = val
    command = next((x for x in argv if not x.startswith("-")), None)
    sub = parser._subparsers._group_actions[0].choices.get(command) if command else None
    if sub is None:
        raise UsageError("--config needs a command")
    dests = {act.dest: act for act in sub._actions}
    for key, val in values.items():
        if key not in dests:
            raise UsageError(f"unknown config key: {key}")
        act = dests[key]
        if isinstance(act, argparse._StoreTrueAction):
            val = val.lower() in ("1", "true", "yes")
        elif act.type is not None:
            val = act.type(val)
        act.default = val
        act.required = False


def run(argv: list[str] | None = None) -> tuple[int, dict | None]:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1, None
    ctx = Run(args)
    t0 = time.perf_counter()
    try:
        metrics = COMMANDS[args.command](ctx)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1, None
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 2, None
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, None
    params = {k: v for k, v in vars(args).items() if k not in ("out_dir", "config")}
    report = {
        "command": ctx.tag,
        "parameters": _clean(params),
        "seed": args.seed,
        "artifact_version": __version__,
        "outputs": [{"name": n, "path": str(p), "checksum": _sha256(p)} for n, p in ctx.outputs],
        "metrics": _clean(metrics),
        "wall_time_s": time.perf_counter() - t0,
    }
    path = ctx.path("report.json")
    path.write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, indent=2, sort_keys=True))
    failed = getattr(ctx, "failed", [])
    return (2 if failed else 0), report


def main(argv: list[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
