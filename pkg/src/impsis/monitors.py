"""Runtime checks of positivity, boundedness and oscillation results.

Every check returns a :class:`ConditionEntry` holding two tri-state
verdicts: whether the result's hypotheses hold for this scenario and
trajectory, and whether its conclusion is observed. Asymptotic conditions
(liminf, limsup, limits at infinity) are replaced by the same quantity over
the final ``tail_fraction`` of the horizon, so every verdict is
finite-horizon evidence rather than proof.

A (yes, no) entry means a stated result was contradicted by the run: either
the result is wrong as stated or the integrator/monitor is defective.

Standing assumptions of the total-population results (nonnegative state and
recovery, a positive lower bound on ``delta1``, nonnegative growth and death
rates) are folded into those checks' hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional

import numpy as np

from .oracles import negative_recovery_balance, sign_partition
from .paramfns import Sum, bounds_over, integrate_timefn
from .quadrature import integrate_panels
from .thresholds import Thresholds


class Verdict(str, Enum):
    YES = "yes"
    NO = "no"
    UNDETERMINED = "undetermined"


YES, NO, UND = Verdict.YES, Verdict.NO, Verdict.UNDETERMINED


def _v(flag):
    return YES if flag else NO


def _finite_or_str(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    x = float(x)
    return x if math.isfinite(x) else repr(x)


@dataclass
class ConditionEntry:
    check_id: str
    hypothesis: Verdict
    conclusion: Verdict
    evidence: Dict[str, float] = field(default_factory=dict)
    notes: str = ""

    @property
    def violated(self):
        return self.hypothesis is YES and self.conclusion is NO

    def to_dict(self):
        return {
            "check_id": self.check_id,
            "hypothesis_satisfied": self.hypothesis.value,
            "conclusion_observed": self.conclusion.value,
            "numeric_evidence": {k: _finite_or_str(v) for k, v in sorted(self.evidence.items())},
            "notes": self.notes,
        }


@dataclass
class ConditionReport:
    entries: List[ConditionEntry]

    def violations(self):
        return [e for e in self.entries if e.violated]

    def by_id(self):
        return {e.check_id: e for e in self.entries}

    def to_dict(self):
        return {"entries": [e.to_dict() for e in self.entries],
                "violations": [e.check_id for e in self.violations()]}


class _Context:
    """Cached quantities shared by the checks of one run."""

    def __init__(self, traj, params, schedule, thresholds, w_rule):
        self.traj = traj
        self.params = params
        self.schedule = schedule
        self.th = thresholds
        self.w_rule = w_rule
        self.T = traj.horizon
        self.t_tail = self.T * (1.0 - thresholds.tail_fraction)
        self.t = traj.t
        self.S = traj.S
        self.I = traj.I
        self.N = traj.S + traj.I
        self.tail = self.t >= self.t_tail
        self.head = ~self.tail
        self.S0, self.I0 = traj.initial
        self.N0 = self.S0 + self.I0
        self.neg_tol = 1e-9 * (1.0 + self.N0)
        self.v = params.values(self.t)
        self.p_fn = Sum((params.K, params.p0))
        self.events = [e for e in schedule.events if e.t <= self.T]
        # right-continuous state where the tail window opens
        self.tail_start = traj.dense(self.t_tail)
        fine = np.linspace(self.t_tail, self.T, 2001)
        self.tail_S_max = float(max(traj.dense(fine)[:, 0].max(), self.S[self.tail].max()))

    def bounds(self, name, tail=False):
        f = self.p_fn if name == "p" else getattr(self.params, name)
        return bounds_over(f, self.t_tail if tail else 0.0, self.T)

    def lower(self, name, tail=False):
        return self.bounds(name, tail).lower

    def upper(self, name, tail=False):
        return self.bounds(name, tail).upper

    @property
    def delta_m(self):
        return min(self.lower("delta1"), self.lower("delta2"))

    def positivity_hypothesis(self):
        return self.S0 >= 0 and self.I0 >= 0 and self.lower("gamma") >= 0

    def standing(self):
        """Nonnegative state and recovery, delta1 bounded away from 0, r and d nonnegative."""
        return (self.positivity_hypothesis() and self.lower("delta1") > 0
                and self.lower("r") >= 0 and self.lower("d") >= 0)

    def along(self, fn, t0, t1, tol=None):
        """Integral over ``[t0, t1]`` of ``fn(v, S, I)`` along the dense trajectory."""
        if t1 <= t0:
            return 0.0
        nodes = self.traj.step_nodes()
        bps = [b for b in self.params.breakpoints() if t0 < b < t1]
        edges = np.union1d(nodes[(nodes > t0) & (nodes < t1)], [t0, t1, *bps])

        def f(x):
            y = self.traj.dense(x)
            return fn(self.params.values(x), y[..., 0], y[..., 1])

        vals, _ = integrate_panels(f, edges, tol=tol or self.th.quad_tol, rtol=1e-12, max_panels=2_000_000)
        return math.fsum(vals)

    def bounded(self):
        """Tri-state boundedness of N: blow-up is 'no', a tame tail is 'yes'."""
        N = self.N
        head_max = float(N[self.head].max()) if self.head.any() else self.N0
        tail_max = float(N[self.tail].max())
        ref = max(self.N0, head_max)
        ev = {"head_max_N": head_max, "tail_max_N": tail_max, "N0": self.N0}
        if not np.all(np.isfinite(N)):
            return NO, ev
        if ref == 0.0:
            return _v(tail_max == 0.0), ev
        if tail_max > self.th.blowup * ref:
            return NO, ev
        if tail_max <= self.th.growth_tol * ref:
            return YES, ev
        return UND, ev

    def log_slope(self, y):
        m = self.tail & (y > 0)
        if m.sum() < 3:
            return math.nan
        return float(np.polyfit(self.t[m], np.log(y[m]), 1)[0])


# checks

def check_positivity(ctx):
    hyp = ctx.positivity_hypothesis()
    min_S, min_I = float(ctx.S.min()), float(ctx.I.min())
    ok = min_S >= -ctx.neg_tol and min_I >= -ctx.neg_tol
    notes = []
    exact_I = exact_N = True
    if ctx.I0 == 0.0:
        exact_I = bool(np.all(ctx.I == 0.0))
        notes.append("zero initial infection must persist exactly")
    if ctx.N0 == 0.0:
        exact_N = bool(np.all(ctx.S == 0.0) and np.all(ctx.I == 0.0))
        notes.append("zero initial population must persist exactly")
    concl = ok and exact_I and exact_N
    if not hyp and ctx.lower("gamma") < 0:
        notes.append("recovery rate turns negative; see negative_recovery_positivity")
    ev = {"min_S": min_S, "min_I": min_I, "neg_tol": ctx.neg_tol, "gamma_lower": ctx.lower("gamma"),
          "exact_zero_I": exact_I, "exact_zero_N": exact_N}
    return ConditionEntry("positivity", _v(hyp), _v(concl), ev, "; ".join(notes))


def check_negative_recovery_positivity(ctx):
    if not ctx.I0 > 0:
        return ConditionEntry("negative_recovery_positivity", UND, UND, {"I0": ctx.I0},
                              "requires a positive initial infected count; skipped")
    bal = negative_recovery_balance(ctx.traj, ctx.params)
    slack = bal.allowance - bal.sup_negative
    concl = ctx.S.min() >= -ctx.neg_tol and ctx.I.min() >= -ctx.neg_tol
    ev = {"max_sup_negative_gamma": float(bal.sup_negative.max()),
          "min_allowance": float(bal.allowance.min()),
          "min_slack": float(slack.min()),
          "min_S": float(ctx.S.min())}
    return ConditionEntry("negative_recovery_positivity", _v(bal.satisfied), _v(concl), ev,
                          "negative-set integral and bound evaluated at every step node")


def check_no_zero_susceptible(ctx):
    if ctx.N0 == 0.0:
        return ConditionEntry("no_zero_susceptible", UND, UND, {"N0": 0.0}, "trivial solution exempt")
    first = ctx.events[0].t if ctx.events else ctx.T
    if first == 0.0:
        first = ctx.events[1].t if len(ctx.events) > 1 else ctx.T
    part = sign_partition(ctx.params.gamma, 0.0, first)
    pos = math.fsum(b - a for a, b in part.pos_intervals)
    hyp = pos > 0 and ctx.traj.segments[0].y[0][1] > 0
    concl = float(ctx.S.max()) > 0
    note = "positive-recovery measure taken before the first later impulse"
    if pos == 0 and ctx.S0 == 0:
        note = "recovery rate vanishes and S starts at zero: zero-susceptible regime"
    return ConditionEntry("no_zero_susceptible", _v(hyp), _v(concl),
                          {"positive_gamma_measure": pos, "max_S": float(ctx.S.max())}, note)


def _infection_free(ctx):
    return ctx.I0 == 0.0


def check_infection_free_bounded_l1(ctx):
    g = ctx.v.r * (1.0 - ctx.v.delta1 * ctx.N / ctx.v.p)
    tail_mean_abs = float(np.mean(np.abs(g[ctx.tail])))
    hyp = _infection_free(ctx) and tail_mean_abs <= ctx.th.slope_tol
    concl, ev = ctx.bounded()
    with np.errstate(divide="ignore"):
        ratio = np.where(ctx.N > 0, ctx.v.p / ctx.N, np.inf)
    printed = float(ctx.v.delta1[ctx.tail].min()) >= float(ratio[ctx.tail].min())
    ev.update({"tail_mean_abs_rate": tail_mean_abs, "printed_sufficient_condition": printed})
    return ConditionEntry("infection_free_bounded_l1", _v(hyp), concl, ev,
                          "integrability approximated by a vanishing tail mean; printed sufficient "
                          "condition reported without asserting the implication")


def check_infection_free_exponential_decay(ctx):
    eps = 1e-3
    excess = ctx.v.delta1 * ctx.N / ctx.v.p - 1.0
    margin = min(ctx.lower("r", tail=True), float(excess[ctx.tail].min()))
    hyp = _infection_free(ctx) and margin >= eps
    slope = ctx.log_slope(ctx.N)
    if ctx.N0 == 0.0 or (math.isnan(slope) and float(ctx.N[ctx.tail].max()) == 0.0):
        concl = YES
    elif math.isnan(slope):
        concl = UND
    elif slope < 0:
        concl = YES
    elif slope > ctx.th.slope_tol:
        concl = NO
    else:
        concl = UND
    extinct = float(ctx.N[-1]) <= ctx.th.ext_tol
    return ConditionEntry("infection_free_exponential_decay", _v(hyp), concl,
                          {"margin": margin, "tail_log_slope": slope, "extinct": extinct},
                          "conclusion is a decreasing tail at exponential rate; the population "
                          "settles near p/delta1 rather than vanishing")


def check_zero_susceptible_persistence(ctx):
    g = ctx.bounds("gamma")
    hyp = ctx.S0 == 0.0 and g.lower == 0.0 and g.upper == 0.0
    concl = bool(np.all(ctx.S == 0.0))
    ev = {"max_abs_S": float(np.abs(ctx.S).max()),
          "max_abs_N_minus_I": float(np.abs(ctx.N - ctx.I).max()),
          "removal_integral": integrate_timefn(Sum((ctx.params.d, ctx.params.gamma)), 0.0, ctx.T)}
    return ConditionEntry("zero_susceptible_persistence", _v(hyp), _v(concl), ev, "")


def _positive_rates(ctx):
    return (ctx.positivity_hypothesis() and ctx.lower("delta1") > 0
            and ctx.lower("d") > 0 and ctx.lower("r") > 0)


def check_bounded_positive_rates(ctx):
    concl, ev = ctx.bounded()
    if ctx.events:
        return ConditionEntry("bounded_positive_rates", UND, concl, ev,
                              "impulsive run; see impulsive_bounded_positive_rates")
    ev.update({"delta1_lower": ctx.lower("delta1"), "d_lower": ctx.lower("d"), "r_lower": ctx.lower("r")})
    return ConditionEntry("bounded_positive_rates", _v(_positive_rates(ctx)), concl, ev, "")


def check_bounded_dominant_mortality(ctx):
    concl, ev = ctx.bounded()
    rb = ctx.bounds("r", tail=True)
    d_tail = ctx.lower("d", tail=True)
    r_vanishes = rb.width <= ctx.th.limit_tol and max(abs(rb.lower), abs(rb.upper)) <= ctx.th.limit_tol
    ev.update({"d_tail_lower": d_tail, "r_tail_lower": rb.lower, "r_tail_upper": rb.upper})
    if ctx.standing() and d_tail > 0 and r_vanishes:
        return ConditionEntry("bounded_dominant_mortality", YES, concl, ev, "vanishing growth-rate variant")
    if not ctx.standing() or d_tail <= 0:
        return ConditionEntry("bounded_dominant_mortality", NO, concl, ev, "")
    return ConditionEntry("bounded_dominant_mortality", UND, concl, ev,
                          "'sufficiently large' death-to-growth ratio is not quantified")


def _rate_a(v, S, I):
    return v.r * (1.0 - (v.delta1 * S + v.delta2 * I) / v.p)


def check_decaying_growth_extinction(ctx):
    a = _rate_a(ctx.v, ctx.S, ctx.I)
    da = ctx.v.d + a
    # trend of the running growth integral over the tail
    grid = np.linspace(ctx.t_tail, ctx.T, 41)
    A = np.concatenate([[0.0], np.cumsum([ctx.along(_rate_a, u, w) for u, w in zip(grid[:-1], grid[1:])])])
    slope = float(np.polyfit(grid, A, 1)[0])
    spread = float(np.ptp(A - np.polyval(np.polyfit(grid, A, 1), grid)))
    diverges = slope < -ctx.th.slope_tol and abs(slope) * (ctx.T - ctx.t_tail) > spread
    hyp = diverges and float(da[ctx.tail].min()) >= -ctx.th.class_tol and ctx.positivity_hypothesis()
    # comparison: N' <= a N whenever a + d >= 0 and I >= 0; impulses only lower N
    N_start, N_end = float(ctx.tail_start.sum()), float(ctx.N[-1])
    bound = N_start * math.exp(float(A[-1]))
    concl = N_end <= bound * (1 + 1e-6) + ctx.neg_tol
    ev = {"tail_growth_slope": slope, "tail_min_d_plus_a": float(da[ctx.tail].min()),
          "N_tail_start": N_start, "N_end": N_end, "comparison_bound": bound,
          "extinct": N_end <= ctx.th.ext_tol}
    return ConditionEntry("decaying_growth_extinction", _v(hyp), _v(concl), ev,
                          "conclusion is the exponential comparison bound over the tail; "
                          "extinction reported as evidence")


def _eps_infected(ctx):
    S_sup = ctx.tail_S_max * (1 + 1e-9)
    return ctx.lower("d", tail=True) + ctx.lower("gamma", tail=True) - ctx.upper("beta", tail=True) * S_sup


def _infected_decay_conclusion(ctx, eps):
    """Exponential comparison over the tail; ``neg_tol`` absorbs absolute integration error."""
    I_s, I_e = float(ctx.tail_start[1]), float(ctx.I[-1])
    L = ctx.T - ctx.t_tail
    rate = (math.log(I_e) - math.log(I_s)) / L if I_s > 0 and I_e > 0 and L > 0 else math.nan
    bound = I_s * math.exp(-eps * L)
    return _v(I_e <= bound * (1 + 1e-6) + ctx.neg_tol), rate


def check_infected_exponential_stability(ctx):
    eps = _eps_infected(ctx)
    hyp = eps > ctx.th.slope_tol and ctx.positivity_hypothesis()
    concl, rate = _infected_decay_conclusion(ctx, max(eps, 0.0))
    if not hyp and concl is NO:
        concl = UND
    return ConditionEntry("infected_exponential_stability", _v(hyp), concl,
                          {"eps_I": eps, "tail_log_rate_I": rate},
                          "decay rate compared against the guaranteed exponent over the tail")


def check_total_bounded_small_cross_incidence(ctx):
    eps = _eps_infected(ctx)
    v = ctx.v
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(v.r * ctx.S > 0, v.p * v.d / (v.r * ctx.S), np.inf)
    small = bool(np.all(v.delta2[ctx.tail] < np.minimum(1.0, cap[ctx.tail])))
    hyp = eps > ctx.th.slope_tol and ctx.standing() and small
    concl, ev = ctx.bounded()
    ev.update({"eps_I": eps, "cross_incidence_small": small})
    return ConditionEntry("total_bounded_small_cross_incidence", _v(hyp), concl, ev, "")


def _ratio_gap(ctx):
    """d/r - S/I on tail samples with r > 0 and I > 0, else None."""
    v = ctx.v
    m = ctx.tail
    if not (np.all(v.r[m] > 0) and np.all(ctx.I[m] > 0)):
        return None
    return v.d[m] / v.r[m] - ctx.S[m] / ctx.I[m]


def check_ratio_bounded_total(ctx):
    concl, ev = ctx.bounded()
    gap = _ratio_gap(ctx)
    if gap is None:
        return ConditionEntry("ratio_bounded_total", UND, concl, ev,
                              "ratio undefined: growth rate or infected count not positive on the tail")
    limsup = float(gap.max())
    tol = ctx.th.slope_tol
    le0, ge0 = limsup <= tol, limsup >= -tol
    ratio_ok = float((ctx.v.d[ctx.tail] / ctx.v.r[ctx.tail]).min()) >= 0
    ev.update({"limsup_gap": limsup, "variant_le_zero": le0, "variant_ge_zero": ge0})
    hyp = YES if (le0 and ge0 and ratio_ok and ctx.standing()) else UND
    return ConditionEntry("ratio_bounded_total", hyp, concl, ev,
                          "statement and proof disagree on the sign; both variants evaluated")


def check_indicator_growth_bounded(ctx):
    dm = ctx.delta_m
    L = ctx.T - ctx.t_tail
    r_tail = ctx.along(lambda v, S, I: v.r, ctx.t_tail, ctx.T)

    def growth_active(v, S, I):
        if dm <= 0:
            return v.r
        return np.where(S + I < v.p / dm, v.r, 0.0)

    rg_tail = ctx.along(growth_active, ctx.t_tail, ctx.T, tol=1e-8)
    hyp = ctx.standing() and (r_tail <= ctx.th.slope_tol * L or rg_tail <= ctx.th.slope_tol * L)
    concl, ev = ctx.bounded()
    v = ctx.v
    dN = v.r * (1.0 - (v.delta1 * ctx.S + v.delta2 * ctx.I) / v.p) * ctx.S - v.d * ctx.I
    dI_int = ctx.along(lambda v, S, I: v.d * I, 0.0, ctx.T)
    ev.update({"tail_growth_integral": r_tail, "tail_active_growth_integral": rg_tail,
               "death_weighted_infected_integral": dI_int,
               "max_abs_dN": float(np.abs(dN).max())})
    return ConditionEntry("indicator_growth_bounded", _v(hyp), concl, ev,
                          "finite integrals approximated by negligible tail contributions")


def check_ratio_zero_equilibrium_stability(ctx):
    v = ctx.v
    pos = bool(np.all(v.r > 0) and np.all(ctx.I > 0))
    if not pos:
        return ConditionEntry("ratio_zero_equilibrium_stability", NO, UND, {},
                              "ratio undefined somewhere on the horizon")
    dominant = bool(np.all(v.d * ctx.I > v.r * ctx.S))
    weak = bool(np.all((v.d >= 0) & (v.d * ctx.I < v.r * ctx.S)))
    if dominant:
        jumps = np.diff(ctx.N)
        slack = ctx.th.inv_tol * (1.0 + ctx.N[:-1])
        concl = _v(bool(np.all(jumps <= slack)))
        return ConditionEntry("ratio_zero_equilibrium_stability", YES, concl,
                              {"max_increase": float(jumps.max()) if jumps.size else 0.0},
                              "death-dominant branch: total population must not increase")
    if weak:
        return ConditionEntry("ratio_zero_equilibrium_stability", YES, UND, {},
                              "growth-dominant branch: local instability not observable on one trajectory")
    return ConditionEntry("ratio_zero_equilibrium_stability", NO, UND, {}, "")


def check_ratio_ultimate_boundedness(ctx):
    concl, ev = ctx.bounded()
    gap = _ratio_gap(ctx)
    if gap is None:
        return ConditionEntry("ratio_ultimate_boundedness", UND, concl, ev,
                              "ratio undefined: growth rate or infected count not positive on the tail")
    ratio_ok = float((ctx.v.d[ctx.tail] / ctx.v.r[ctx.tail]).min()) >= 0
    limsup = float(gap.max())
    hyp = ratio_ok and limsup <= ctx.th.slope_tol and ctx.standing()
    ev.update({"limsup_gap": limsup})
    return ConditionEntry("ratio_ultimate_boundedness", _v(hyp), concl, ev, "")


def check_infected_growth_unbounded(ctx):
    if ctx.events:
        return ConditionEntry("infected_growth_unbounded", UND, UND, {}, "stated for the impulse-free model")
    inc = ctx.v.beta * ctx.S - ctx.v.d - ctx.v.gamma
    low = float(inc[ctx.tail].min())
    hyp = ctx.I0 > 0 and low > ctx.th.slope_tol and ctx.positivity_hypothesis()
    I_max = float(ctx.I.max())
    slope = ctx.log_slope(ctx.I)
    if ctx.I0 > 0 and I_max > ctx.th.blowup * ctx.I0:
        concl = YES
    elif not math.isnan(slope) and slope < -ctx.th.slope_tol:
        concl = NO
    else:
        concl = UND
    return ConditionEntry("infected_growth_unbounded", _v(hyp), concl,
                          {"tail_min_net_infection_rate": low, "max_I": I_max, "tail_log_slope_I": slope},
                          "unbounded means exceeding the blow-up factor times the initial infected count")


def _sign_changes(x, floor):
    s = np.sign(np.where(np.abs(x) > floor, x, 0.0))
    s = s[s != 0]
    return int(np.count_nonzero(np.diff(s)))


def check_infection_free_oscillation(ctx):
    if ctx.events:
        return ConditionEntry("infection_free_oscillation", UND, UND, {}, "stated for the impulse-free model")
    th = ctx.th
    if not bool(np.all(ctx.I == 0.0)):
        return ConditionEntry("infection_free_oscillation", NO, UND, {}, "infected population not identically zero")
    m = ctx.tail
    tt = ctx.t[m]
    dev = ctx.v.delta1[m] * ctx.N[m] / ctx.v.p[m] - 1.0
    dt = np.diff(tt)
    big = (np.abs(dev[:-1]) > th.osc_tol).astype(float)
    frac = float(np.sum(big * dt) / np.sum(dt)) if dt.sum() > 0 else 0.0
    q = max(len(dev) // 4, 1)
    amp_first = float(np.abs(dev[:q]).max()) if len(dev) else 0.0
    amp_last = float(np.abs(dev[-q:]).max()) if len(dev) else 0.0
    alternations = _sign_changes(dev, th.osc_tol)
    hyp = (ctx.lower("r", tail=True) > 0 and ctx.N0 > 0 and frac >= 0.5
           and amp_last >= 0.5 * amp_first and alternations >= 2)
    bounded, ev = ctx.bounded()
    Nt = ctx.N[m]
    span = float(Nt.max() - Nt.min())
    mean = float(Nt.mean())
    not_convergent = span > th.osc_tol * mean
    dN = ctx.v.r[m] * (1.0 - ctx.v.delta1[m] * Nt / ctx.v.p[m]) * Nt
    flips = _sign_changes(dN, 0.0)
    oscillatory = bounded is YES and not_convergent and flips >= 2
    if bounded is UND and not_convergent and flips >= 2:
        concl = UND
    else:
        concl = _v(oscillatory)
    ev.update({"deviation_fraction": frac, "deviation_alternations": alternations,
               "tail_amplitude": span, "tail_mean": mean, "derivative_sign_changes": flips})
    return ConditionEntry("infection_free_oscillation", _v(hyp), concl, ev,
                          "hypothesis requires a persistent, sign-alternating deviation of delta1 N/p from 1")


def check_invariant_set_capacity(ctx):
    if ctx.events:
        return ConditionEntry("invariant_set_capacity", UND, UND, {}, "stated for the impulse-free model")
    dm = ctx.delta_m
    if dm <= 0:
        return ConditionEntry("invariant_set_capacity", UND, UND, {"delta_m": dm}, "bound infinite")
    pb = ctx.bounds("p")
    bound = pb.lower / dm
    hyp = (ctx.S0 >= 0 and ctx.I0 >= 0 and ctx.N0 <= bound
           and ctx.lower("r") >= 0 and ctx.lower("d") >= 0 and ctx.lower("gamma") >= 0)
    n_max = float(ctx.N.max())
    concl = n_max <= bound + ctx.th.inv_tol
    corrected = max(ctx.N0, pb.upper / dm)
    ev = {"bound": bound, "max_N": n_max, "delta_m": dm,
          "bound_with_max_capacity": corrected,
          "within_bound_with_max_capacity": n_max <= corrected + ctx.th.inv_tol}
    return ConditionEntry("invariant_set_capacity", _v(hyp), _v(concl), ev,
                          "set defined with the minimum capacity over the horizon")


def check_invariant_set_initial_level(ctx):
    if ctx.events:
        return ConditionEntry("invariant_set_initial_level", UND, UND, {}, "stated for the impulse-free model")
    v = ctx.v
    N = ctx.N
    with np.errstate(divide="ignore", invalid="ignore"):
        d1_cap = np.where(N > 0, v.p / N, np.inf)
        d2_cap = np.where((v.r > 0) & (N > 0), v.p * (1.0 - v.d) / (v.r * N), np.inf)
    hyp = bool(np.all((v.d >= 0) & (v.d <= 1) & (v.delta1 >= 0) & (v.delta1 <= d1_cap)
                      & (v.delta2 >= 0) & (v.delta2 <= d2_cap)))
    hyp = hyp and ctx.positivity_hypothesis()
    n_max = float(N.max())
    concl = n_max <= ctx.N0 + ctx.th.inv_tol
    reversed_ok = bool(np.all(v.delta1 >= d1_cap))
    ev = {"max_N": n_max, "N0": ctx.N0, "delta1_at_least_capacity_ratio": reversed_ok}
    return ConditionEntry("invariant_set_initial_level", _v(hyp), _v(concl), ev,
                          "parameter inequalities checked at every sample")


def check_impulsive_bounded_positive_rates(ctx):
    concl, ev = ctx.bounded()
    if not ctx.events:
        return ConditionEntry("impulsive_bounded_positive_rates", UND, concl, ev, "no impulses scheduled")
    return ConditionEntry("impulsive_bounded_positive_rates", _v(_positive_rates(ctx)), concl, ev, "")


def check_impulsive_bounded_incidence(ctx):
    concl, ev = ctx.bounded()
    hyp = (ctx.delta_m > 0 and ctx.positivity_hypothesis()
           and ctx.lower("r") >= 0 and ctx.lower("d") >= 0)
    ev["delta_m"] = ctx.delta_m
    return ConditionEntry("impulsive_bounded_incidence", _v(hyp), concl, ev, "")


W_RULES = {
    "from_p": lambda e: e.p,
    "from_q": lambda e: e.q,
    "from_min": lambda e: min(e.p, e.q),
}


@dataclass(frozen=True)
class CullingBalance:
    times: tuple
    values: tuple
    extinguished_from: Optional[int]


def culling_balance(params, events, horizon, w_rule="from_min"):
    """Running ``int_0^{t_k} r - sum_{i<=k} |ln(1 - w_i)|`` at each impulse.

    With no impulses the single value at the horizon is returned. Once some
    ``w_i == 1`` the population component is extinguished and the balance
    is reported as ``-inf`` from that index on.
    """
    w_of = W_RULES[w_rule]
    if not events:
        return CullingBalance((horizon,), (integrate_timefn(params.r, 0.0, horizon),), None)
    times, vals = [], []
    growth = 0.0
    prev = 0.0
    logs = []
    dead = None
    for k, e in enumerate(events):
        growth += integrate_timefn(params.r, prev, e.t)
        prev = e.t
        w = w_of(e)
        if w >= 1.0 and dead is None:
            dead = k
        if dead is None:
            logs.append(abs(math.log1p(-w)))
        times.append(e.t)
        vals.append(-math.inf if dead is not None else growth - math.fsum(logs))
    return CullingBalance(tuple(times), tuple(vals), dead)


def check_impulsive_culling_balance(ctx):
    bal = culling_balance(ctx.params, ctx.events, ctx.T, ctx.w_rule)
    tail_vals = [c for t, c in zip(bal.times, bal.values) if t >= ctx.t_tail] or [bal.values[-1]]
    worst = max(tail_vals)
    hyp = (worst <= 1e-10 and ctx.positivity_hypothesis()
           and ctx.lower("r") >= 0 and ctx.lower("d") >= 0)
    concl, ev = ctx.bounded()
    ev.update({"max_tail_balance": worst, "n_impulses": len(ctx.events)})
    note = f"w rule {ctx.w_rule}"
    if bal.extinguished_from is not None:
        note += f"; full culling at impulse {bal.extinguished_from}, criterion trivially satisfied"
    return ConditionEntry("impulsive_culling_balance", _v(hyp), concl, ev, note)


CHECKS: Dict[str, Callable] = {
    "positivity": check_positivity,
    "negative_recovery_positivity": check_negative_recovery_positivity,
    "no_zero_susceptible": check_no_zero_susceptible,
    "infection_free_bounded_l1": check_infection_free_bounded_l1,
    "infection_free_exponential_decay": check_infection_free_exponential_decay,
    "zero_susceptible_persistence": check_zero_susceptible_persistence,
    "bounded_positive_rates": check_bounded_positive_rates,
    "bounded_dominant_mortality": check_bounded_dominant_mortality,
    "decaying_growth_extinction": check_decaying_growth_extinction,
    "infected_exponential_stability": check_infected_exponential_stability,
    "total_bounded_small_cross_incidence": check_total_bounded_small_cross_incidence,
    "ratio_bounded_total": check_ratio_bounded_total,
    "indicator_growth_bounded": check_indicator_growth_bounded,
    "ratio_zero_equilibrium_stability": check_ratio_zero_equilibrium_stability,
    "ratio_ultimate_boundedness": check_ratio_ultimate_boundedness,
    "infected_growth_unbounded": check_infected_growth_unbounded,
    "infection_free_oscillation": check_infection_free_oscillation,
    "invariant_set_capacity": check_invariant_set_capacity,
    "invariant_set_initial_level": check_invariant_set_initial_level,
    "impulsive_bounded_positive_rates": check_impulsive_bounded_positive_rates,
    "impulsive_bounded_incidence": check_impulsive_bounded_incidence,
    "impulsive_culling_balance": check_impulsive_culling_balance,
}


def run_monitors(traj, scenario, thresholds=Thresholds(), checks=None, w_rule="from_min"):
    """Evaluate the selected checks (all by default) in registry order."""
    if w_rule not in W_RULES:
        raise ValueError(f"unknown w rule {w_rule!r}; choose from {sorted(W_RULES)}")
    selected = list(CHECKS) if checks is None else list(checks)
    unknown = [c for c in selected if c not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {unknown}")
    ctx = _Context(traj, scenario.params, scenario.schedule, thresholds, w_rule)
    return ConditionReport([CHECKS[c](ctx) for c in CHECKS if c in selected])
