"""Command line front end.

    csie2d converge  --geometry ellipse --scheme fi --n 96 --N 40,80,160
    csie2d spectrum  --geometry circle:r=0.6 --n 128 --dt 0.05
    csie2d condition --geometry circle:r=0.6 --n 128 --dt 1e-3:1e-1:9
    csie2d sdc       --geometry circle:r=0.5 --n 200 --scheme sdc:k=5,sweeps=4 --N 40,80,160

Every command writes a CSV file (header row, %.16e numbers) and a JSON
manifest next to it with the resolved configuration, version and wall times.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 a --check threshold failed.
"""
import argparse
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import condition_sweep, loglog_slope, spectrum_compare
from .geom import CurveSpec, discretize
from .solver import GmresError, TimeScheme, march
from .testbed import ErrorMetric, ExactSolutionCfg, error_report, provider

THREADS_ENV = "CSIE2D_THREADS"
MAX_TIME_NODES = 2000
MAX_NODES = 1024

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

COLUMNS = {
    "converge": ["N", "dt", "iters_avg", "error", "ratio"],
    "spectrum": ["index", "numeric_mag", "asymptotic_mag"],
    "condition": ["dt", "kappa"],
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    geometry: str
    scheme: str
    n: int
    N: list
    T: float
    dt: list
    out: str
    seed: int = 0
    samples: int = 20
    phase: float = 0.0
    data: str = "exact"
    check: bool = False
    force: bool = False
    deflate: bool = False
    unstable_ok: bool = False
    gmres_tol: float = 1e-12

    @property
    def curve(self):
        return CurveSpec.parse(self.geometry)

    def time_scheme(self, N):
        return TimeScheme.parse(self.scheme, N=N, T=self.T, gmres_tol=self.gmres_tol,
                                deflate=self.deflate, unstable_ok=self.unstable_ok)


def _int_list(text):
    """'40,80,160' or a doubling ladder '40:640'."""
    if ":" in text:
        lo, hi = (int(v) for v in text.split(":"))
        out = [lo]
        while out[-1] * 2 <= hi:
            out.append(out[-1] * 2)
        return out
    return [int(v) for v in text.split(",") if v]


def _float_list(text):
    """'0.05', '1e-3,1e-2' or a log-spaced ladder 'lo:hi:count'."""
    if ":" in text:
        lo, hi, cnt = text.split(":")
        return list(np.geomspace(float(lo), float(hi), int(cnt)))
    return [float(v) for v in text.split(",") if v]


DEFAULTS = {
    "converge": dict(geometry="ellipse", scheme="fi", n=96, N="40,80,160", T=1.0),
    "spectrum": dict(geometry="circle:r=0.6", scheme="fi", n=128, N="1", T=1.0, dt="0.05"),
    "condition": dict(geometry="circle:r=0.6", scheme="fi", n=128, N="1", T=1.0, dt="1e-3:1e-1:9"),
    "sdc": dict(geometry="circle:r=0.5", scheme="sdc:k=5,sweeps=4", n=200, N="40:640", T=2.0),
}


def build_parser():
    p = argparse.ArgumentParser(prog="csie2d", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, d in DEFAULTS.items():
        s = sub.add_parser(name)
        s.add_argument("--geometry", default=d["geometry"],
                       help="circle | ellipse | hexagram | kind:key=val,... (default %(default)s)")
        s.add_argument("--scheme", default=d["scheme"], help="fi | pc:k=2 | sdc:k=5,sweeps=4")
        s.add_argument("--n", type=int, default=d["n"], help="boundary nodes")
        s.add_argument("--N", default=d["N"],
                       help="step counts, '40,80' or doubling '40:640' (sdc: total steps Nk)")
        s.add_argument("--T", type=float, default=d["T"], help="final time")
        s.add_argument("--dt", default=d.get("dt", ""), help="time steps for spectrum/condition")
        s.add_argument("--out", default=f"{name}.csv", help="CSV path; manifest goes to .json")
        s.add_argument("--seed", type=int, default=0, help="sample point seed")
        s.add_argument("--samples", type=int, default=20, help="error sample points")
        s.add_argument("--phase", type=float, default=0.0, help="angular offset of the sources")
        s.add_argument("--data", choices=("exact", "zero"), default="exact")
        s.add_argument("--gmres-tol", type=float, default=1e-12)
        s.add_argument("--check", action="store_true", help="exit 4 if acceptance thresholds fail")
        s.add_argument("--force", action="store_true", help="lift the desk-scale size guards")
        s.add_argument("--deflate", action="store_true", help="deflate the rank-one null space")
        s.add_argument("--unstable-ok", action="store_true", help="allow PC(4)")
    return p


def resolve(args):
    """Turn parsed arguments into a validated RunConfig; raises ConfigError."""
    try:
        cfg = RunConfig(args.command, args.geometry, args.scheme, args.n, _int_list(args.N),
                        args.T, _float_list(args.dt), args.out, args.seed, args.samples,
                        args.phase, args.data, args.check, args.force, args.deflate,
                        args.unstable_ok, args.gmres_tol)
        curve = cfg.curve
        if cfg.n < 16 or cfg.n % 2:
            raise ConfigError("--n must be even and at least 16")
        if cfg.n > MAX_NODES and not cfg.force:
            raise ConfigError(f"--n above {MAX_NODES} needs --force")
        if cfg.samples < 1:
            raise ConfigError("--samples must be positive")
        if cfg.command in ("spectrum", "condition"):
            if curve.kind != "circle":
                raise ConfigError(f"{cfg.command} needs a circle geometry")
            if not cfg.dt or min(cfg.dt) <= 0:
                raise ConfigError("--dt needs positive values")
            if cfg.n > 512:
                raise ConfigError("dense analysis is limited to --n <= 512")
            if cfg.command == "spectrum" and len(cfg.dt) != 1:
                raise ConfigError("spectrum takes a single --dt")
            return cfg
        if not cfg.N or min(cfg.N) < 1:
            raise ConfigError("--N needs positive step counts")
        scheme = cfg.time_scheme(1)
        if cfg.command == "sdc":
            if scheme.kind != "SDC":
                raise ConfigError("sdc needs an sdc:k=..,sweeps=.. scheme")
            bad = [v for v in cfg.N if v % scheme.k]
            if bad:
                raise ConfigError(f"total steps {bad} not divisible by k = {scheme.k}")
        # time nodes: sdc ladders count total steps Nk already
        per_step = scheme.k if scheme.kind == "SDC" and cfg.command != "sdc" else 1
        nodes = max(cfg.N) * per_step
        if nodes > MAX_TIME_NODES and not cfg.force:
            raise ConfigError(f"{nodes} time nodes exceed {MAX_TIME_NODES}; use --force")
        return cfg
    except ConfigError:
        raise
    except ValueError as exc:
        if "stages" in str(exc):
            raise ConfigError(f"{exc}; the closed-form stage integrals stop at degree 4") from None
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output

def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.16e" % v


def write_csv(path, columns, rows, trailer=()):
    lines = [",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    lines += [f"# {t}" for t in trailer]
    Path(path).write_text("\n".join(lines) + "\n")


def _version():
    try:
        here = Path(__file__).resolve().parent
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(cfg, columns, wall, summary):
    path = Path(cfg.out).with_suffix(".json")
    man = {"command": cfg.command, "config": asdict(cfg), "columns": columns,
           "version": _version(), "wall_seconds": wall, "summary": summary}
    path.write_text(json.dumps(man, indent=2, sort_keys=True, default=float) + "\n")
    return path


def _ratio(prev, cur):
    if prev is None:
        return ""
    if not (cur > 0) or math.isnan(prev):
        return float("nan")
    return prev / cur


def _exact_cfg(cfg):
    if cfg.data == "zero":
        return ExactSolutionCfg(phase=cfg.phase, pulses=False, linear=False,
                                exp_x1=False, exp_x2=False)
    return ExactSolutionCfg(phase=cfg.phase)


# ---------------------------------------------------------------------------
# commands

def cmd_converge(cfg):
    exact = _exact_cfg(cfg)
    metric = ErrorMetric(count=cfg.samples, seed=cfg.seed)
    grid = discretize(cfg.curve, cfg.n)
    rows, wall, iters, warnings = [], {}, [], 0
    prev = None
    for N in cfg.N:
        scheme = cfg.time_scheme(N)
        t0 = time.perf_counter()
        state = march(grid, scheme, provider(exact))
        err = error_report(state, cfg.T, metric, exact).error
        wall[str(N)] = time.perf_counter() - t0
        its = state.report.mean_iterations()
        iters.append(its)
        warnings += len(state.report.warnings)
        rows.append([N, scheme.dt, its, err, _ratio(prev, err)])
        prev = err
    summary = {"rhs_warnings": warnings}
    ok = True
    if cfg.check and len(rows) > 1:
        ok, summary["check"] = _check_converge(cfg, rows, iters)
    return COLUMNS["converge"], rows, [], wall, summary, ok


def _check_converge(cfg, rows, iters):
    scheme = cfg.time_scheme(1)
    ratios = [r[4] for r in rows[1:]]
    if scheme.kind == "FI":
        band, used = (3.0, 6.0), ratios
        its_ok = True
    else:
        # the first refinement still carries the start-up transient
        order = scheme.k if scheme.kind == "PC" else 2
        band, used = (2.0 ** order, 2.0 ** (order + 1)), ratios[1:] or ratios
        its_ok = max(iters) <= 20 and max(iters) <= 2 * max(min(iters), 1e-300)
    ratio_ok = all(band[0] <= r <= band[1] for r in used)
    return ratio_ok and its_ok, {"ratio_band": band, "ratios_checked": used,
                                 "iterations_ok": its_ok}


def cmd_spectrum(cfg):
    r, dt = cfg.curve.params[0], cfg.dt[0]
    t0 = time.perf_counter()
    sc = spectrum_compare(r, cfg.n, dt)
    wall = {"spectrum": time.perf_counter() - t0}
    dev = float(np.max(np.abs(sc.numeric - sc.exact)))
    summary = {"dt": dt, "excluded_eigenvalue": sc.excluded,
               "nyquist_eigenvalues": [float(v) for v in sc.nyquist],
               "max_deviation_from_exact": dev}
    rows = [[i, sc.numeric[i], sc.asymptotic[i]] for i in range(len(sc.numeric))]
    ok = dev <= 1e-6 and sc.excluded <= 1e-12
    return COLUMNS["spectrum"], rows, [], wall, summary, ok


def cmd_condition(cfg):
    r = cfg.curve.params[0]
    t0 = time.perf_counter()
    kappa = condition_sweep(r, cfg.n, cfg.dt)
    wall = {"sweep": time.perf_counter() - t0}
    rows = [[dt, k] for dt, k in zip(cfg.dt, kappa)]
    trailer, summary, ok = [], {}, True
    if len(cfg.dt) > 1:
        slope = loglog_slope(cfg.dt, kappa)
        trailer = [f"slope={slope:.16e}"]
        summary["slope"] = slope
        ok = 0.8 <= slope <= 1.2
    ok &= bool(np.all(np.isfinite(kappa)) and np.all(kappa > 0))
    return COLUMNS["condition"], rows, trailer, wall, summary, ok


def cmd_sdc(cfg):
    base = cfg.time_scheme(1)
    J = base.sweeps
    columns = ["Nk", "dt_over_k", "iters"] + [f"E_SDC{j}" for j in range(J + 1)]
    exact = _exact_cfg(cfg)
    metric = ErrorMetric(count=cfg.samples, seed=cfg.seed)
    grid = discretize(cfg.curve, cfg.n)
    rows, wall = [], {}
    for Nk in cfg.N:
        N = Nk // base.k
        errs, its = [], []
        t0 = time.perf_counter()
        for j in range(J + 1):
            scheme = TimeScheme("SDC", N, cfg.T, base.k, j, cfg.gmres_tol,
                                deflate=cfg.deflate)
            state = march(grid, scheme, provider(exact))
            errs.append(error_report(state, cfg.T, metric, exact).error)
            its.extend(state.report.iterations)
        wall[str(Nk)] = time.perf_counter() - t0
        rows.append([Nk, cfg.T / Nk, float(np.mean(its))] + errs)
    summary, ok = {}, True
    if cfg.check:
        E = rows[-1][3:]
        ok = all(r[2] <= 5 for r in rows)
        if J >= 1:
            ok &= E[1] <= E[0] / 100
            # sweeps beyond the first may not raise the error by more than 2x
            ok &= all(r[3 + j + 1] <= 2 * r[3 + j] for r in rows for j in range(1, J))
        summary["check"] = bool(ok)
    return columns, rows, [], wall, summary, ok


COMMANDS = {"converge": cmd_converge, "spectrum": cmd_spectrum,
            "condition": cmd_condition, "sdc": cmd_sdc}


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(int(n))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        _limit_threads()
        columns, rows, trailer, wall, summary, ok = COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"csie2d: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GmresError as exc:
        print(f"csie2d: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_csv(cfg.out, columns, rows, trailer)
    write_manifest(cfg, columns, wall, summary)
    if cfg.check and not ok:
        print(f"csie2d: check failed: {json.dumps(summary, default=float)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
