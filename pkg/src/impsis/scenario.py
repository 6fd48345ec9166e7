"""JSON scenario documents: parsing, validation and serialisation.

Document layout::

    {
      "params": {"r": <timefn>, "d": ..., "gamma": ..., "beta": ...,
                 "delta1": ..., "delta2": ..., "K": ..., "p0": ...,
                 "eps0": 1e-3, "K0": null},
      "initial": {"S": 50, "I": 10},
      "impulses": {"T": 1.0, "events": [{"t": 2, "p": 0.2, "q": 0.5}]},
      "horizon": 50,
      "tolerances": {"rel": 1e-9, "abs": 1e-10},
      "allow_negative_gamma": false,
      "checks": ["positivity", ...],
      "thresholds": {"tail_fraction": 0.25, ...},
      "analysis": {"capacity_period": null, "w_rule": "from_min"},
      "output": {"grid": [0, 1, 2], "grid_step": null, "plot": false}
    }

A time function is a number (constant) or a tagged object, see
:func:`impsis.paramfns.timefn_from_dict`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import ScenarioError
from .integrator import ImpulseSchedule, Scenario, Tolerances
from .model import COEFFICIENTS, ModelParams, State
from .monitors import CHECKS, W_RULES
from .paramfns import Constant, timefn_from_dict
from .thresholds import Thresholds

TOP_KEYS = {"params", "initial", "impulses", "horizon", "tolerances", "allow_negative_gamma",
            "checks", "thresholds", "analysis", "output", "name"}


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    checks: Optional[Tuple[str, ...]] = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    capacity_period: Optional[float] = None
    w_rule: str = "from_min"
    plot: bool = False
    name: str = "scenario"

    def to_dict(self):
        sc = self.scenario
        out = {
            "name": self.name,
            "params": sc.params.to_dict(),
            "initial": {"S": sc.initial.S, "I": sc.initial.I},
            "impulses": sc.schedule.to_dict(),
            "horizon": sc.horizon,
            "tolerances": {"rel": sc.tolerances.rel, "abs": sc.tolerances.abs},
            "allow_negative_gamma": sc.allow_negative_gamma,
            "thresholds": self.thresholds.to_dict(),
            "analysis": {"capacity_period": self.capacity_period, "w_rule": self.w_rule},
            "output": {"grid": list(sc.output_grid), "plot": self.plot},
        }
        if self.checks is not None:
            out["checks"] = list(self.checks)
        return out


def _number(obj, key, problems, where):
    if key not in obj:
        problems.append(f"{where}: missing '{key}'")
        return math.nan
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{where}: '{key}' must be a number, got {v!r}")
        return math.nan
    return float(v)


def _params(obj, problems):
    if not isinstance(obj, dict):
        problems.append("params: must be an object")
        return None
    unknown = set(obj) - set(COEFFICIENTS) - {"eps0", "K0"}
    if unknown:
        problems.append(f"params: unknown keys {sorted(unknown)}")
    fns = {}
    for name in COEFFICIENTS:
        if name not in obj:
            if name == "p0":
                fns[name] = Constant(0.0)
                continue
            problems.append(f"params: missing coefficient '{name}'")
            continue
        try:
            fns[name] = timefn_from_dict(obj[name])
        except (ValueError, TypeError, KeyError) as exc:
            problems.append(f"params.{name}: {exc}")
    if len(fns) < len(COEFFICIENTS):
        return None
    eps0 = obj.get("eps0", 1e-3)
    K0 = obj.get("K0")
    return ModelParams(**fns, eps0=float(eps0), K0=None if K0 is None else float(K0))


def _schedule(obj, problems):
    if obj is None:
        return ImpulseSchedule()
    if not isinstance(obj, dict):
        problems.append("impulses: must be an object with 'T' and 'events'")
        return ImpulseSchedule()
    T = float(obj.get("T", 1.0))
    events = []
    for k, e in enumerate(obj.get("events", [])):
        where = f"impulses.events[{k}]"
        if not isinstance(e, dict):
            problems.append(f"{where}: must be an object with t, p, q")
            continue
        events.append((_number(e, "t", problems, where), _number(e, "p", problems, where),
                       _number(e, "q", problems, where)))
    return ImpulseSchedule(tuple(events), T)


def _grid(out, horizon, problems):
    grid = list(out.get("grid", []))
    step = out.get("grid_step")
    if step is not None:
        if not float(step) > 0:
            problems.append(f"output.grid_step must be positive, got {step}")
        elif math.isfinite(horizon):
            n = int(math.floor(horizon / float(step) + 1e-9))
            grid.extend((np.arange(n + 1) * float(step)).tolist())
    return tuple(sorted({float(t) for t in grid}))


def parse_run(doc):
    """Validated :class:`RunConfig` from a parsed document; raises ScenarioError listing every problem."""
    problems = []
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario document must be a JSON object"])
    unknown = set(doc) - TOP_KEYS
    if unknown:
        problems.append(f"unknown top-level keys {sorted(unknown)}")
    params = _params(doc.get("params"), problems)
    init = doc.get("initial")
    if isinstance(init, dict):
        initial = State(_number(init, "S", problems, "initial"), _number(init, "I", problems, "initial"))
    else:
        problems.append("initial: must be an object with S and I")
        initial = State(math.nan, math.nan)
    horizon = _number(doc, "horizon", problems, "scenario")
    schedule = _schedule(doc.get("impulses"), problems)
    tol = doc.get("tolerances", {})
    tolerances = Tolerances(float(tol.get("rel", 1e-9)), float(tol.get("abs", 1e-10)))
    out = doc.get("output", {})
    grid = _grid(out, horizon, problems)
    allow = bool(doc.get("allow_negative_gamma", False))

    checks = doc.get("checks")
    if checks is not None:
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            problems.append(f"checks: unknown check ids {bad}")
        checks = tuple(checks)
    try:
        thresholds = Thresholds.from_dict(doc.get("thresholds", {}))
    except (ValueError, TypeError) as exc:
        problems.append(f"thresholds: {exc}")
        thresholds = Thresholds()
    analysis = doc.get("analysis", {})
    w_rule = analysis.get("w_rule", "from_min")
    if w_rule not in W_RULES:
        problems.append(f"analysis.w_rule must be one of {sorted(W_RULES)}, got {w_rule!r}")
    cap = analysis.get("capacity_period")

    if params is not None and not problems:
        scenario = Scenario(params, initial, horizon, schedule, tolerances, grid, allow)
        problems.extend(scenario.validate())
    if problems:
        raise ScenarioError(problems)
    return RunConfig(scenario, checks, thresholds, None if cap is None else float(cap), w_rule,
                     bool(out.get("plot", False)), str(doc.get("name", "scenario")))


def load_run(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: not valid JSON ({exc})"]) from exc
    cfg = parse_run(doc)
    if "name" not in doc:
        cfg = RunConfig(cfg.scenario, cfg.checks, cfg.thresholds, cfg.capacity_period, cfg.w_rule,
                        cfg.plot, path.stem)
    return cfg


def load_scenario(path):
    return load_run(path).scenario


def scenario_to_dict(scenario):
    return RunConfig(scenario).to_dict()


def dump_run(cfg, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
