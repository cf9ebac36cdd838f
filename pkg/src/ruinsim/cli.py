"""Command-line entry point: ``ruinsim {model,simulate,ruin,tail,check}``.

Exit codes: 0 success, 1 usage or configuration error, 2 hypothesis
warnings, 3 hypothesis failures, 4 numerical-quality failure (saturation or
censoring above threshold).  A numerical-quality failure takes precedence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as rio
from .config import ConfigError, ExperimentConfig
from .cycles import MAX_FLAG_RATE, simulate_cycles
from .model import (
    Status,
    cumulant_curve,
    domain_bounds,
    find_beta,
    right_derivative_at_zero,
    validate_theorem_conditions,
)
from .ruin import (
    NumericalQualityError,
    default_u_grid,
    direct_ruin_estimate,
    kesten_diagnostics,
    parse_u_grid,
    ruin_table,
    sample_perpetuities,
    simulate_direct,
)
from .tail import InsufficientDataError, analyze_tail

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_WARN = 2
EXIT_FAIL = 3
EXIT_NUMERIC = 4
MAX_UNEXPLAINED = 0.01


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _status_code(report) -> int:
    return {Status.PASS: EXIT_OK, Status.WARN: EXIT_WARN, Status.FAIL: EXIT_FAIL}[report.worst]


class Run:
    """Shared state of one CLI invocation."""

    def __init__(self, args):
        self.args = args
        self.t0 = time.perf_counter()
        self.out = Path(args.out)
        self.files: list[str] = []
        self.tallies: dict = {}
        self.numeric_fail = False
        self.cfg = None
        if getattr(args, "config", None):
            u = args.u if getattr(args, "u", None) else None
            self.cfg = ExperimentConfig.load(args.config).with_overrides(
                seed=args.seed, workers=args.workers, n_paths=args.paths, u_grid=u
            )

    def model_and_report(self):
        model = self.cfg.model()
        beta = find_beta(model)
        report = validate_theorem_conditions(model, self.cfg.claim, self.cfg.interarrival, beta)
        return model, beta, report

    def write(self, name, writer, *a):
        self.out.mkdir(parents=True, exist_ok=True)
        path = writer(self.out / name, *a)
        self.files.append(path.name)
        return path

    def manifest(self, command, report=None):
        run = self.cfg.run
        m = {
            "artifact": "ruinsim",
            "version": __version__,
            "command": command,
            "config_hash": self.cfg.config_hash,
            "seed": run["seed"],
            "workers": run["workers"],
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
            "tallies": self.tallies,
            "outputs": sorted(self.files),
            "hypotheses": report.worst.value if report is not None else None,
            "config": self.cfg.data,
        }
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return m


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _u_grid(cfg, samples):
    spec = cfg.run.get("u_grid")
    if spec is None:
        return default_u_grid(samples)
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    return parse_u_grid(str(spec))


def _q_grid(beta, dom, count=41):
    b = beta.beta if beta.found else 2.0
    lo = max(-0.5 * b, dom.q_lower * 0.999 if math.isfinite(dom.q_lower) else -math.inf)
    hi = min(1.5 * b, dom.q_upper * 0.999 if math.isfinite(dom.q_upper) else math.inf)
    return np.linspace(lo, hi, count)


def _need_beta(beta):
    if not beta.found:
        print(f"beta not found ({beta.status.value}): {beta.reason}", file=sys.stderr)
        return False
    return True


# ---------------------------------------------------------------------------
# commands


def cmd_model(run: Run) -> int:
    model, beta, report = run.model_and_report()
    dom = domain_bounds(model)
    print(f"a_V = {model.a_V!r}")
    print(f"drift between jumps = {model.drift!r}")
    print(f"domain = ({dom.q_lower!r}, {dom.q_upper!r})")
    print(f"D+H(0) = {right_derivative_at_zero(model)!r}")
    print(f"beta_status = {beta.status.value}")
    if beta.found:
        print(f"beta = {beta.beta:.10f}")
    elif beta.reason:
        print(f"reason = {beta.reason}")
    for w in beta.warnings:
        print(f"warning = {w}")
    print("# q H(q)")
    qs = _q_grid(beta, dom)
    for q, h in zip(qs, cumulant_curve(model, qs)):
        print(f"{float(q)!r} {float(h)!r}")
    print("# conditions")
    for c in report.checks:
        print(f"{c.status.value:4s} {c.name}: {c.detail}")
    return _status_code(report)


def cmd_check(run: Run) -> int:
    model, beta, report = run.model_and_report()
    print(json.dumps(report.as_dict(), indent=2, default=_jsonable))
    return _status_code(report)


def cmd_simulate(run: Run) -> int:
    cfg = run.cfg
    model, beta, report = run.model_and_report()
    if not _need_beta(beta):
        run.manifest("simulate", report)
        return EXIT_FAIL
    spec = cfg.cycle_spec(model)
    r = cfg.run
    if "cycles" in r["outputs"] and r["n_cycles"] > 0:
        cyc = simulate_cycles(spec, r["n_cycles"], r["seed"], workers=r["workers"])
        run.write("cycles.csv", rio.write_cycles, cyc)
        run.tallies["cycle_saturations"] = int(cyc.saturated.sum())
        run.numeric_fail |= cyc.flag_rate > MAX_FLAG_RATE
    if "perpetuity" in r["outputs"]:
        perp = sample_perpetuities(spec, r["n_paths"], r["seed"], r["delta_A"], r["n_max"], workers=r["workers"])
        run.write("perpetuity.csv", rio.write_perpetuities, perp)
        run.tallies["perpetuity_flagged"] = int(perp.flagged.sum())
        run.tallies["perpetuity_saturations"] = perp.saturation_count
        run.numeric_fail |= perp.flag_rate > MAX_FLAG_RATE
    m = run.manifest("simulate", report)
    print(f"wrote {', '.join(m['outputs'])} to {run.out}")
    return EXIT_NUMERIC if run.numeric_fail else _status_code(report)


def cmd_ruin(run: Run) -> int:
    cfg = run.cfg
    model, beta, report = run.model_and_report()
    if not _need_beta(beta):
        run.manifest("ruin", report)
        return EXIT_FAIL
    spec = cfg.cycle_spec(model)
    r = cfg.run
    perp = sample_perpetuities(spec, r["n_paths"], r["seed"], r["delta_A"], r["n_max"], workers=r["workers"])
    run.tallies["perpetuity_flagged"] = int(perp.flagged.sum())
    try:
        u = _u_grid(cfg, perp)
        table = ruin_table(perp, u)
    except NumericalQualityError as e:
        print(f"numerical-quality failure: {e}", file=sys.stderr)
        run.manifest("ruin", report)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"cannot build the u grid: {e}", file=sys.stderr)
        run.manifest("ruin", report)
        return EXIT_NUMERIC
    if r["direct_paths"] > 0:
        drun = simulate_direct(spec, r["direct_paths"], r["seed"], r["delta_A"], r["n_max"], workers=r["workers"])
        worst = 0.0
        for est in table:
            d = direct_ruin_estimate(drun, est.u, reference=perp)
            est.direct, est.direct_stderr = d.frequency, d.stderr
            if math.isfinite(d.residual_mass):
                worst = max(worst, d.residual_mass)
        run.tallies["direct_censored_floor"] = int(np.sum(drun.stop == 0))
        run.tallies["direct_censored_horizon"] = int(np.sum(drun.stop == 1))
        run.tallies["direct_saturated"] = int(np.sum(drun.stop == 2))
        run.tallies["direct_max_residual_mass"] = worst
        run.numeric_fail |= worst > MAX_UNEXPLAINED
    run.write("ruin.csv", rio.write_ruin_table, table)
    if r["n_cycles"] > 0:
        cyc = simulate_cycles(spec, r["n_cycles"], r["seed"], workers=r["workers"])
        run.tallies["cycle_saturations"] = int(cyc.saturated.sum())
        if cyc.flag_rate > MAX_FLAG_RATE:
            run.numeric_fail = True
        else:
            diag = kesten_diagnostics(cyc, beta.beta)
            run.write("kesten.csv", rio.write_kesten, diag)
            print(f"E M^beta = {diag.e_m_beta.value!r} +- {diag.e_m_beta.stderr!r}")
    print("u lower upper direct")
    for e in table:
        print(f"{e.u!r} {e.lower!r} {e.upper!r} {e.direct!r}")
    run.manifest("ruin", report)
    return EXIT_NUMERIC if run.numeric_fail else _status_code(report)


def cmd_tail(run: Run) -> int:
    args = run.args
    beta = args.beta
    report = None
    nonarith = False
    k = None
    if args.samples:
        batch = rio.read_perpetuities(args.samples)
        seed = 0
    elif run.cfg is not None:
        cfg = run.cfg
        model, b, report = run.model_and_report()
        if not _need_beta(b):
            return EXIT_FAIL
        beta = beta if beta is not None else b.beta
        r = cfg.run
        batch = sample_perpetuities(cfg.cycle_spec(model), r["n_paths"], r["seed"], r["delta_A"], r["n_max"],
                                    workers=r["workers"])
        nonarith = cfg.analysis["nonarithmetic_assertion"]
        k = cfg.analysis["k"]
        seed = r["seed"]
    else:
        print("tail needs --config or a perpetuity CSV", file=sys.stderr)
        return EXIT_USAGE
    y = batch.y_inf[~np.isnan(batch.y_inf)]
    try:
        est = analyze_tail(y, beta=beta, k=k, nonarithmetic=nonarith, seed=seed)
    except InsufficientDataError as e:
        print(f"insufficient samples: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    run.write("tail.csv", rio.write_tail_report, est.rows())
    for row in est.rows():
        print(" ".join(rio.fmt(v) for v in row))
    if beta is not None:
        for name, d in est.discrepancy(beta).items():
            print(f"discrepancy {name}: {d:+.3f} CI half-widths from beta = {beta!r}")
    for w in est.warnings:
        print(f"warning: {w}")
    if run.cfg is not None:
        run.manifest("tail", report)
    return EXIT_OK if report is None else _status_code(report)


COMMANDS = {"model": cmd_model, "simulate": cmd_simulate, "ruin": cmd_ruin, "tail": cmd_tail, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ruinsim", description="Ruin probabilities with investment in a geometric Levy asset.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "tail", metavar="PATH")
        s.add_argument("--seed", type=int)
        s.add_argument("--workers", type=int)
        s.add_argument("--out", default=".", metavar="DIR")
        s.add_argument("--paths", type=int, metavar="N")
        s.add_argument("--u", metavar="SPEC", help='u grid, "geom:lo:hi:count" or "u1,u2,..."')
        if name == "tail":
            s.add_argument("samples", nargs="?", help="perpetuity CSV written by simulate")
            s.add_argument("--beta", type=float, help="reference exponent for the discrepancy line")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.u:
            parse_u_grid(args.u)
        run = Run(args)
        return COMMANDS[args.command](run)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
