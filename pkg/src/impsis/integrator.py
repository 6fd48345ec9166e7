"""Adaptive Dormand-Prince 5(4) integration with scheduled impulsive culling.

The step loop works on plain Python floats for the two state components;
at this dimension that is several times faster than small numpy arrays.
Impulse instants, coefficient breakpoints and the horizon are mandatory
mesh points. Each mesh interval integrates a ``restrict``-ed copy of the
coefficients so stages evaluated at the right end of a step never see a
jump that belongs to the next interval.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import DomainError, IntegrationError, ModelConsistencyError
from .model import ModelParams, State

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# dense output, Hairer's contd5
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
MAX_STEPS = 2_000_000
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ImpulseEvent:
    t: float
    p: float
    q: float


@dataclass(frozen=True)
class ImpulseSchedule:
    events: Tuple[ImpulseEvent, ...] = ()
    min_gap: float = 1.0

    def __post_init__(self):
        evs = tuple(e if isinstance(e, ImpulseEvent) else ImpulseEvent(*map(float, e)) for e in self.events)
        object.__setattr__(self, "events", evs)
        object.__setattr__(self, "min_gap", float(self.min_gap))

    def times(self):
        return tuple(e.t for e in self.events)

    def to_dict(self):
        return {"T": self.min_gap, "events": [{"t": e.t, "p": e.p, "q": e.q} for e in self.events]}


def validate_impulse_schedule(schedule):
    """Every violation of ordering, minimum gap and fraction range. Empty means valid."""
    problems = []
    if not schedule.min_gap > 0:
        problems.append(f"impulse minimum gap T must be positive, got {schedule.min_gap}")
    for k, ev in enumerate(schedule.events):
        if ev.t < 0 or not math.isfinite(ev.t):
            problems.append(f"impulse {k}: time {ev.t} must be finite and nonnegative")
        if not 0.0 <= ev.p <= 1.0:
            problems.append(f"impulse {k}: susceptible fraction p={ev.p} outside [0, 1]")
        if not 0.0 <= ev.q <= 1.0:
            problems.append(f"impulse {k}: infected fraction q={ev.q} outside [0, 1]")
        if k > 0:
            gap = ev.t - schedule.events[k - 1].t
            if gap < schedule.min_gap:
                problems.append(
                    f"impulse {k}: gap {gap:g} to the previous impulse is below the minimum T={schedule.min_gap:g}")
    return problems


def apply_impulse(state, p_k, q_k):
    S, I = state
    return State((1.0 - p_k) * S, (1.0 - q_k) * I)


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-9
    abs: float = 1e-10


@dataclass(frozen=True)
class Scenario:
    params: ModelParams
    initial: State
    horizon: float
    schedule: ImpulseSchedule = field(default_factory=ImpulseSchedule)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_grid: Tuple[float, ...] = ()
    allow_negative_gamma: bool = False

    def __post_init__(self):
        object.__setattr__(self, "initial", State(float(self.initial[0]), float(self.initial[1])))
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "output_grid", tuple(float(t) for t in self.output_grid))

    @property
    def neg_tol(self):
        return 1e-9 * (1.0 + self.initial.N)

    def validate(self):
        problems = []
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            problems.append(f"horizon must be finite and positive, got {self.horizon}")
            return problems
        S0, I0 = self.initial
        if not (S0 >= 0 and math.isfinite(S0)):
            problems.append(f"initial susceptible count must be finite and nonnegative, got {S0}")
        if not (I0 >= 0 and math.isfinite(I0)):
            problems.append(f"initial infected count must be finite and nonnegative, got {I0}")
        problems.extend(self.params.validate(self.horizon, self.allow_negative_gamma))
        problems.extend(validate_impulse_schedule(self.schedule))
        for k, ev in enumerate(self.schedule.events):
            if ev.t > self.horizon:
                problems.append(f"impulse {k}: time {ev.t:g} lies beyond the horizon {self.horizon:g}")
        if not (self.tolerances.rel > 0 and self.tolerances.abs > 0):
            problems.append("integration tolerances must be positive")
        if any(t < 0 or t > self.horizon for t in self.output_grid):
            problems.append("output grid times must lie in [0, horizon]")
        return problems


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    min_step: float = math.inf
    max_step: float = 0.0
    nfev: int = 0
    error_estimate: float = 0.0  # sum of accepted local error norms (max-abs)


class ImpulseRecord(NamedTuple):
    t: float
    before: State
    after: State
    p: float
    q: float


class Segment:
    """Smooth piece of the solution between two impulses with dense output."""

    def __init__(self, t, y, rcont):
        self.t = np.asarray(t, dtype=float)
        self.y = np.asarray(y, dtype=float).reshape(-1, 2)
        self.rcont = np.asarray(rcont, dtype=float).reshape(-1, 5, 2)

    @property
    def t0(self):
        return float(self.t[0])

    @property
    def t1(self):
        return float(self.t[-1])

    def dense(self, t):
        """State at ``t`` (scalar or array) inside ``[t0, t1]``; shape ``(..., 2)``."""
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        if len(self.t) == 1:
            out = np.broadcast_to(self.y[0], (len(flat), 2)).copy()
            return out.reshape(t.shape + (2,))
        idx = np.clip(np.searchsorted(self.t, flat, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        th = ((flat - self.t[idx]) / h)[:, None]
        th1 = 1.0 - th
        rc = self.rcont[idx]
        out = rc[:, 0] + th * (rc[:, 1] + th1 * (rc[:, 2] + th * (rc[:, 3] + th1 * rc[:, 4])))
        at_end = flat == self.t[-1]
        out[at_end] = self.y[-1]
        return out.reshape(t.shape + (2,))


@dataclass
class Trajectory:
    segments: List[Segment]
    impulse_records: List[ImpulseRecord]
    stats: StepStats
    initial: State
    horizon: float
    t: np.ndarray = None
    S: np.ndarray = None
    I: np.ndarray = None
    event: np.ndarray = None
    diagnostics: List[dict] = field(default_factory=list)
    complete: bool = True

    @property
    def N(self):
        return self.S + self.I

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.S.tolist(), self.I.tolist(), self.N.tolist()))

    @property
    def final_state(self):
        return State(float(self.S[-1]), float(self.I[-1]))

    def segment_index(self, t):
        """Index of the segment owning ``t``; impulse instants belong to the later segment."""
        starts = [s.t0 for s in self.segments]
        k = int(np.searchsorted(starts, t, side="right")) - 1
        return max(0, min(k, len(self.segments) - 1))

    def dense(self, t):
        """Dense state at array ``t``, shape ``(..., 2)``; right-continuous at impulses."""
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        starts = np.array([s.t0 for s in self.segments])
        owner = np.clip(np.searchsorted(starts, flat, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty((len(flat), 2))
        for k in np.unique(owner):
            m = owner == k
            seg = self.segments[k]
            out[m] = seg.dense(np.clip(flat[m], seg.t0, seg.t1))
        return out.reshape(t.shape + (2,))

    def step_nodes(self):
        return np.unique(np.concatenate([s.t for s in self.segments]))

    def state_at(self, t):
        """Right-continuous state: at an impulse instant, the post-impulse value."""
        if t < 0 or t > self.horizon:
            raise DomainError(f"time {t} outside the trajectory span [0, {self.horizon}]")
        for rec in self.impulse_records:
            if rec.t == t:
                return rec.after
        seg = self.segments[self.segment_index(t)]
        t = min(max(t, seg.t0), seg.t1)
        y = seg.dense(t)
        return State(float(y[0]), float(y[1]))

    def to_csv(self, path_or_buffer=None):
        """Write ``t,S,I,N,event`` rows. Returns the text when no target is given."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "S", "I", "N", "event"])
        for t, S, I, N, ev in zip(self.t, self.S, self.I, self.N, self.event):
            w.writerow(["%.17g" % t, "%.17g" % S, "%.17g" % I, "%.17g" % N, ev])
        text = buf.getvalue()
        if path_or_buffer is None:
            return text
        if hasattr(path_or_buffer, "write"):
            path_or_buffer.write(text)
        else:
            with open(path_or_buffer, "w", newline="") as fh:
                fh.write(text)
        return text


def _rhs_factory(params, stats):
    r, d, g, b, d1, d2, K, p0 = (params.r._value, params.d._value, params.gamma._value, params.beta._value,
                                  params.delta1._value, params.delta2._value, params.K._value, params.p0._value)

    def f(t, S, I):
        stats.nfev += 1
        p = K(t) + p0(t)
        if not p > 0:
            raise ModelConsistencyError(f"carrying capacity {p!r} is not positive at t={t!r}")
        beta = b(t)
        gam = g(t)
        dS = r(t) * (1.0 - (d1(t) * S + d2(t) * I) / p) * S + (gam - beta * S) * I
        dI = (beta * S - d(t) - gam) * I
        return dS, dI

    return f


def _initial_step(f, t, S, I, fS, fI, rtol, atol, hmax, direction_span):
    sk0 = atol + rtol * abs(S)
    sk1 = atol + rtol * abs(I)
    d0 = math.sqrt(((S / sk0) ** 2 + (I / sk1) ** 2) / 2)
    d1 = math.sqrt(((fS / sk0) ** 2 + (fI / sk1) ** 2) / 2)
    h0 = 0.01 * d0 / d1 if (d0 > 1e-5 and d1 > 1e-5) else 1e-6
    h0 = min(h0, hmax, direction_span)
    f1S, f1I = f(t + h0, S + h0 * fS, I + h0 * fI)
    d2 = math.sqrt((((f1S - fS) / sk0) ** 2 + ((f1I - fI) / sk1) ** 2) / 2) / h0
    m = max(d1, d2)
    h1 = (0.01 / m) ** 0.2 if m > 1e-15 else max(1e-6, h0 * 1e-3)
    return min(100 * h0, h1, hmax)


def _integrate_interval(params, a, b, S, I, rtol, atol, hmax, h, stats, out_t, out_y, out_rc, neg_tol, diagnostics):
    """Advance from ``a`` to ``b`` exactly; appends accepted nodes. Returns (S, I, h_next)."""
    f = _rhs_factory(params, stats)
    t = a
    k1S, k1I = f(t, S, I)
    if h is None:
        h = _initial_step(f, t, S, I, k1S, k1I, rtol, atol, hmax, b - a)
    reject_prev = False
    steps = 0
    while t < b:
        steps += 1
        if steps > MAX_STEPS:
            raise IntegrationError(f"step budget exhausted at t={t!r}", t_last=t)
        last = False
        if t + h >= b or t + 1.01 * h >= b:
            h = b - t
            last = True
        if h <= 16 * _EPS * max(abs(t), 1.0):
            raise IntegrationError(f"step size underflow at t={t!r}", t_last=t)
        k2S, k2I = f(t + C2 * h, S + h * A21 * k1S, I + h * A21 * k1I)
        k3S, k3I = f(t + C3 * h, S + h * (A31 * k1S + A32 * k2S), I + h * (A31 * k1I + A32 * k2I))
        k4S, k4I = f(t + C4 * h, S + h * (A41 * k1S + A42 * k2S + A43 * k3S),
                     I + h * (A41 * k1I + A42 * k2I + A43 * k3I))
        k5S, k5I = f(t + C5 * h, S + h * (A51 * k1S + A52 * k2S + A53 * k3S + A54 * k4S),
                     I + h * (A51 * k1I + A52 * k2I + A53 * k3I + A54 * k4I))
        tn = b if last else t + h
        k6S, k6I = f(tn, S + h * (A61 * k1S + A62 * k2S + A63 * k3S + A64 * k4S + A65 * k5S),
                     I + h * (A61 * k1I + A62 * k2I + A63 * k3I + A64 * k4I + A65 * k5I))
        yS = S + h * (A71 * k1S + A73 * k3S + A74 * k4S + A75 * k5S + A76 * k6S)
        yI = I + h * (A71 * k1I + A73 * k3I + A74 * k4I + A75 * k5I + A76 * k6I)
        k7S, k7I = f(tn, yS, yI)
        eS = h * (E1 * k1S + E3 * k3S + E4 * k4S + E5 * k5S + E6 * k6S + E7 * k7S)
        eI = h * (E1 * k1I + E3 * k3I + E4 * k4I + E5 * k5I + E6 * k6I + E7 * k7I)
        sk0 = atol + rtol * max(abs(S), abs(yS))
        sk1 = atol + rtol * max(abs(I), abs(yI))
        err = math.sqrt(((eS / sk0) ** 2 + (eI / sk1) ** 2) / 2)
        if not math.isfinite(err):
            raise IntegrationError(f"non-finite state near t={t!r}", t_last=t)
        fac = SAFETY * err ** -0.2 if err > 0 else FAC_MAX
        fac = min(FAC_MAX, max(FAC_MIN, fac))
        if err <= 1.0:
            dS, dI = yS - S, yI - I
            bS, bI = h * k1S - dS, h * k1I - dI
            out_rc.append((
                (S, I), (dS, dI), (bS, bI),
                (dS - h * k7S - bS, dI - h * k7I - bI),
                (h * (D1 * k1S + D3 * k3S + D4 * k4S + D5 * k5S + D6 * k6S + D7 * k7S),
                 h * (D1 * k1I + D3 * k3I + D4 * k4I + D5 * k5I + D6 * k6I + D7 * k7I)),
            ))
            stats.accepted += 1
            stats.min_step = min(stats.min_step, h)
            stats.max_step = max(stats.max_step, h)
            stats.error_estimate += max(abs(eS), abs(eI))
            t, S, I = tn, yS, yI
            out_t.append(t)
            out_y.append((S, I))
            if (S < -neg_tol or I < -neg_tol) and len(diagnostics) < 100:
                diagnostics.append({"kind": "negative_state", "t": t, "S": S, "I": I, "neg_tol": neg_tol})
            k1S, k1I = k7S, k7I
            if reject_prev:
                fac = min(fac, 1.0)
            reject_prev = False
            h_next = min(h * fac, hmax)
            if not last:
                h = h_next
            else:
                return S, I, h_next
        else:
            stats.rejected += 1
            reject_prev = True
            h = h * min(1.0, fac)
    return S, I, h


def _mesh(scenario):
    T = scenario.horizon
    imp = {e.t for e in scenario.schedule.events if 0 < e.t <= T}
    bps = {b for b in scenario.params.breakpoints() if 0 < b < T}
    return sorted(imp | bps | {T}), imp


def integrate(scenario):
    """Solve the impulsive model over ``[0, horizon]``.

    Raises ``IntegrationError`` (with the partial trajectory attached) on step
    underflow and ``ModelConsistencyError`` if the capacity stops being positive.
    """
    params = scenario.params
    rtol, atol = scenario.tolerances.rel, scenario.tolerances.abs
    T = scenario.horizon
    hmax = T / 10.0
    neg_tol = scenario.neg_tol
    stats = StepStats()
    diagnostics = []
    events = {e.t: e for e in scenario.schedule.events if e.t <= T}
    mesh, imp_times = _mesh(scenario)

    S, I = scenario.initial
    records = []
    segments = []
    if 0.0 in events:
        ev = events[0.0]
        before = State(S, I)
        S, I = apply_impulse(before, ev.p, ev.q)
        records.append(ImpulseRecord(0.0, before, State(S, I), ev.p, ev.q))

    seg_t, seg_y, seg_rc = [0.0], [(S, I)], []
    a = 0.0
    h = None
    try:
        for b in mesh:
            S, I, h = _integrate_interval(params.restrict(a, b), a, b, S, I, rtol, atol, hmax, h, stats,
                                          seg_t, seg_y, seg_rc, neg_tol, diagnostics)
            if b in imp_times:
                segments.append(Segment(seg_t, seg_y, seg_rc))
                ev = events[b]
                before = State(S, I)
                S, I = apply_impulse(before, ev.p, ev.q)
                records.append(ImpulseRecord(b, before, State(S, I), ev.p, ev.q))
                seg_t, seg_y, seg_rc = [b], [(S, I)], []
                h = None
            a = b
    except IntegrationError as exc:
        if len(seg_t) > 1:
            segments.append(Segment(seg_t, seg_y, seg_rc))
        traj = _assemble(segments, records, stats, scenario, diagnostics, complete=False)
        exc.trajectory = traj
        raise
    if len(seg_t) > 1:
        segments.append(Segment(seg_t, seg_y, seg_rc))
    return _assemble(segments, records, stats, scenario, diagnostics)


def _assemble(segments, records, stats, scenario, diagnostics, complete=True):
    grid = np.asarray(scenario.output_grid, dtype=float)
    rec_at = {r.t: r for r in records}
    ts, Ss, Is, evs = [], [], [], []

    def emit(t, y, ev):
        ts.append(t)
        Ss.append(y[0])
        Is.append(y[1])
        evs.append(ev)

    if 0.0 in rec_at:
        r0 = rec_at[0.0]
        emit(0.0, r0.before, "pre")
    for k, seg in enumerate(segments):
        inner = grid[(grid > seg.t0) & (grid < seg.t1)]
        inner = np.setdiff1d(inner, seg.t)
        if len(inner):
            extra_y = seg.dense(inner)
            t_all = np.concatenate([seg.t, inner])
            y_all = np.concatenate([seg.y, extra_y])
            order = np.argsort(t_all, kind="stable")
            t_all, y_all = t_all[order], y_all[order]
        else:
            t_all, y_all = seg.t, seg.y
        n = len(t_all)
        for i in range(n):
            t = float(t_all[i])
            ev = "none"
            if i == 0 and t in rec_at:
                ev = "post"
            elif i == n - 1 and t in rec_at:
                ev = "pre"
            emit(t, y_all[i], ev)
    # impulse exactly at the horizon: no segment follows, emit its post row here
    if complete and segments and evs[-1] == "pre":
        emit(segments[-1].t1, rec_at[segments[-1].t1].after, "post")
    traj = Trajectory(segments, records, stats, scenario.initial, scenario.horizon,
                      np.array(ts, dtype=float), np.array(Ss, dtype=float), np.array(Is, dtype=float),
                      np.array(evs, dtype=object), diagnostics, complete)
    return traj
