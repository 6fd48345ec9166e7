"""Command line entry point: ``impsis run | validate | analyze``.

Exit status of ``run``: 0 clean, 1 when a monitor entry pairs a satisfied
hypothesis with a contradicted conclusion or an oracle residual exceeds its
tolerance, 2 for invalid input, 3 when integration aborts (partial artifacts
are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (classify_infection_free, equilibria, infer_capacity_period, limiting_params,
                       verify_periodic_capacity)
from .errors import (AnalysisError, DomainError, ImpsisError, IntegrationError, ModelConsistencyError,
                     ScenarioError)
from .integrator import integrate
from .monitors import CHECKS, run_monitors
from .oracles import oracle_residuals
from .paramfns import Sum, bounds_over
from .scenario import load_run

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID, EXIT_INTEGRATION = 0, 1, 2, 3
N_PROBES = 10


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def digest(cfg):
    sc = cfg.scenario
    fns = dict(sc.params.functions())
    fns["p"] = Sum((sc.params.K, sc.params.p0))
    bounds = {}
    for name, f in fns.items():
        b = bounds_over(f, 0.0, sc.horizon)
        bounds[name] = [b.lower, b.upper]
    events = sc.schedule.events
    return {
        "name": cfg.name,
        "horizon": sc.horizon,
        "initial": {"S": sc.initial.S, "I": sc.initial.I},
        "bounds": bounds,
        "delta_m": min(bounds["delta1"][0], bounds["delta2"][0]),
        "schedule": {
            "T": sc.schedule.min_gap,
            "n_events": len(events),
            "zero_effect_events": [k for k, e in enumerate(events) if e.p == 0 and e.q == 0],
        },
    }


def analyze(cfg):
    sc = cfg.scenario
    th = cfg.thresholds
    t_tail = sc.horizon * (1.0 - th.tail_fraction)
    lim = limiting_params(sc.params, (t_tail, sc.horizon), th.limit_tol)
    out = {"tail_window": [t_tail, sc.horizon], "limit_values": lim.values,
           "no_limit": list(lim.no_limit), "tail_oscillation": lim.oscillation}
    if lim.limits is not None:
        try:
            out["equilibria"] = [e.to_dict() for e in equilibria(lim.limits, th.class_tol)]
        except (AnalysisError, DomainError) as exc:
            out["equilibria_error"] = str(exc)
    else:
        out["equilibria_error"] = "coefficients without a limit: " + ", ".join(lim.no_limit)
    inf = classify_infection_free(sc.params, sc.horizon, th)
    out["infection_free"] = {"label": inf.label, "tail_slope": inf.slope, "tail_spread": inf.tail_range}
    Tp = cfg.capacity_period or infer_capacity_period(sc.params)
    if Tp is not None and Tp <= sc.horizon:
        per = verify_periodic_capacity(sc.params, Tp, N_PROBES, sc.horizon, th.quad_tol)
        out["periodicity"] = {"period": Tp, "periodic": per.periodic, "max_residual": per.max_residual}
    else:
        out["periodicity"] = {"period": Tp, "periodic": None,
                              "note": "no capacity period given or inferable within the horizon"}
    return out


def oracle_section(traj, cfg):
    th = cfg.thresholds
    T = traj.horizon
    times = np.linspace(T / N_PROBES, T, N_PROBES)
    try:
        res = oracle_residuals(traj, cfg.scenario.params, times)
    except ImpsisError as exc:
        return {"error": str(exc), "failures": ["oracle_evaluation"]}
    # N closed form propagates its quadrature error through exp of the growth integral
    tol_N = th.residual_N * max(1.0, res.max_amplification)
    failures = []
    checks = (("residual_I", res.residual_I, th.residual_I), ("residual_N", res.residual_N, tol_N),
              ("residual_psi", res.residual_psi, th.residual_psi))
    for name, val, tol in checks:
        if not (val <= tol):
            failures.append(name)
    return {"probe_times": list(res.times), "residual_I": res.residual_I, "residual_N": res.residual_N,
            "residual_psi": res.residual_psi, "max_amplification": res.max_amplification,
            "tolerance_I": th.residual_I, "tolerance_N": tol_N, "tolerance_psi": th.residual_psi,
            "failures": failures}


def summary_text(report):
    lines = [f"scenario {report['scenario']['name']}"]
    integ = report.get("integration", {})
    if integ:
        lines.append(f"integration: complete={integ['complete']} accepted={integ['accepted']} "
                     f"rejected={integ['rejected']}")
    if "error" in integ:
        lines.append(f"integration error: {integ['error']}")
    an = report.get("analysis", {})
    for eq in an.get("equilibria", []):
        p = eq["point"]
        lines.append(f"equilibrium {eq['kind']} ({p[0]:.6g}, {p[1]:.6g}): {eq['classification']}")
    if "equilibria_error" in an:
        lines.append(f"equilibria: {an['equilibria_error']}")
    if "infection_free" in an:
        lines.append(f"infection-free flow: {an['infection_free']['label']}")
    per = an.get("periodicity")
    if per and per.get("periodic") is not None:
        lines.append(f"periodic capacity (period {per['period']:g}): {per['periodic']}")
    for e in report.get("monitors", {}).get("entries", []):
        flag = "  VIOLATED" if e["check_id"] in report["monitors"]["violations"] else ""
        lines.append(f"check {e['check_id']}: hypothesis={e['hypothesis_satisfied']} "
                     f"conclusion={e['conclusion_observed']}{flag}")
    orc = report.get("oracles")
    if orc and "residual_I" in orc:
        lines.append(f"oracle residuals: I={orc['residual_I']:.3g} N={orc['residual_N']:.3g} "
                     f"psi={orc['residual_psi']:.3g}")
    lines.append(f"exit status {report['status']['exit_code']}")
    return "\n".join(lines) + "\n"


def plot_trajectory(traj, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "impsis"
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(traj.t, traj.S, label="S")
    ax.plot(traj.t, traj.I, label="I")
    ax.plot(traj.t, traj.N, label="N", linestyle="--")
    for rec in traj.impulse_records:
        ax.axvline(rec.t, color="grey", linewidth=0.6, linestyle=":")
    ax.set_xlabel("t")
    ax.set_ylabel("population")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_report(out_dir, report):
    (out_dir / "report.json").write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    (out_dir / "summary.txt").write_text(summary_text(report))


def run_one(cfg, out_dir, checks=None, plot=False):
    """Integrate, analyse and monitor one scenario; write artifacts; return the report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sc = cfg.scenario
    report = {"version": __version__, "scenario": digest(cfg), "document": cfg.to_dict()}
    files = ["report.json", "summary.txt", "trajectory.csv"]
    try:
        traj = integrate(sc)
        exit_code = EXIT_OK
    except IntegrationError as exc:
        traj = exc.trajectory
        exit_code = EXIT_INTEGRATION
        report["integration"] = {"error": str(exc), "t_last": exc.t_last}
    except ModelConsistencyError as exc:
        traj = None
        exit_code = EXIT_INTEGRATION
        report["integration"] = {"error": str(exc), "t_last": None}
    if traj is None:
        report.setdefault("integration", {}).update(complete=False, accepted=0, rejected=0)
        report["status"] = {"exit_code": exit_code, "violations": [], "oracle_failures": []}
        report["files"] = files[:2]
        _write_report(out_dir, report)
        return report
    traj.to_csv(out_dir / "trajectory.csv")
    st = traj.stats
    report.setdefault("integration", {}).update({
        "complete": traj.complete, "accepted": st.accepted, "rejected": st.rejected,
        "min_step": st.min_step, "max_step": st.max_step, "nfev": st.nfev,
        "error_estimate": st.error_estimate, "n_samples": len(traj.t),
        "diagnostics": traj.diagnostics[:20], "n_diagnostics": len(traj.diagnostics),
    })
    report["analysis"] = analyze(cfg)
    violations, oracle_failures = [], []
    if exit_code == EXIT_OK:
        selected = checks if checks is not None else cfg.checks
        mon = run_monitors(traj, sc, cfg.thresholds, selected, cfg.w_rule)
        report["monitors"] = mon.to_dict()
        violations = [e.check_id for e in mon.violations()]
        report["oracles"] = oracle_section(traj, cfg)
        oracle_failures = report["oracles"]["failures"]
        if violations or oracle_failures:
            exit_code = EXIT_VIOLATION
    if plot or cfg.plot:
        plot_trajectory(traj, out_dir / "trajectory.svg")
        files.append("trajectory.svg")
    report["files"] = files
    report["status"] = {"exit_code": exit_code, "violations": violations, "oracle_failures": oracle_failures}
    _write_report(out_dir, report)
    return report


def _run_path(args):
    path, out_dir, checks, plot = args
    cfg = load_run(path)
    return run_one(cfg, out_dir, checks, plot)["status"]["exit_code"]


def _parse_checks(text):
    if text is None:
        return None
    ids = [c.strip() for c in text.split(",") if c.strip()]
    bad = [c for c in ids if c not in CHECKS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown checks {bad}; known: {', '.join(CHECKS)}")
    return tuple(ids)


def _validate_all(paths):
    cfgs, code = [], EXIT_OK
    for p in paths:
        try:
            cfgs.append(load_run(p))
        except ScenarioError as exc:
            code = EXIT_INVALID
            print(f"{p}: invalid", file=sys.stderr)
            for v in exc.violations:
                print(f"  - {v}", file=sys.stderr)
        except OSError as exc:
            code = EXIT_INVALID
            print(f"{p}: {exc}", file=sys.stderr)
    return cfgs, code


def cmd_validate(args):
    cfgs, code = _validate_all(args.scenarios)
    for cfg in cfgs:
        print(f"{cfg.name}: ok")
    return code


def cmd_analyze(args):
    cfgs, code = _validate_all(args.scenarios)
    for cfg in cfgs:
        out = {"scenario": digest(cfg), "analysis": analyze(cfg)}
        print(json.dumps(_clean(out), indent=2, sort_keys=True))
    return code


def cmd_run(args):
    cfgs, code = _validate_all(args.scenarios)
    if code != EXIT_OK:
        return code
    out = Path(args.out)
    if len(cfgs) == 1:
        dirs = [out]
    else:
        names = [c.name for c in cfgs]
        dirs = [out / (n if names.count(n) == 1 else f"{n}_{k}") for k, n in enumerate(names)]
    jobs = [(p, d, args.checks, args.plot) for p, d in zip(args.scenarios, dirs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_path, jobs))
    else:
        codes = [_run_path(j) for j in jobs]
    for d, c in zip(dirs, codes):
        print(f"{d}: exit {c}")
    return max(codes)


def build_parser():
    ap = argparse.ArgumentParser(prog="impsis", description="Impulsive time-varying SIS simulator")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate, analyse and monitor scenarios")
    run.add_argument("scenarios", nargs="+", metavar="scenario")
    run.add_argument("--out", default="out", help="output directory (one subdirectory per scenario in a batch)")
    run.add_argument("--checks", type=_parse_checks, default=None, help="comma-separated check ids")
    run.add_argument("--plot", action="store_true", help="write an SVG plot of S, I, N")
    run.add_argument("--jobs", type=int, default=1, help="parallel processes for a batch")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check scenario files without running them")
    val.add_argument("scenarios", nargs="+", metavar="scenario")
    val.set_defaults(func=cmd_validate)

    ana = sub.add_parser("analyze", help="limiting-system analysis only, no integration")
    ana.add_argument("scenarios", nargs="+", metavar="scenario")
    ana.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
