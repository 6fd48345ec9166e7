"""Acceptance criteria, one test per criterion, each logging a PASS/FAIL line.

Criteria 7 and 10 assert statements that do not hold for time-varying
capacity or for the initial-level set; they are strict xfails so a silent
change in behaviour shows up as an unexpected pass.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from corpus import random_params, random_scenario, random_timefn
from impsis import Constant, ImpulseSchedule, IntegrationError, ModelParams, Scenario, Sinusoid, State, integrate
from impsis.analysis import DEGENERATE, INCONCLUSIVE, LAS, STABLE, UNSTABLE, LimitingParams, equilibria
from impsis.analysis import verify_periodic_capacity
from impsis.integrator import validate_impulse_schedule
from impsis.model import constant_params
from impsis.monitors import NO, YES, culling_balance, run_monitors
from impsis.oracles import oracle_residuals
from impsis.paramfns import Sum, bounds_over

SEED = 20261018


def violations(report):
    return [e.check_id for e in report.entries if e.hypothesis is YES and e.conclusion is NO]


@pytest.fixture(scope="module")
def positivity_corpus():
    """200 random scenarios integrated once; shared by criteria 1 and 10."""
    rng = np.random.default_rng(SEED)
    scenarios = [random_scenario(rng) for _ in range(200)]
    start = time.perf_counter()
    runs = [(sc, integrate(sc)) for sc in scenarios]
    return runs, time.perf_counter() - start


def omega_scenario(rng):
    """Impulse-free, both incidence weights bounded below, N0 inside the capacity set."""
    H = float(rng.uniform(5, 50))
    p = random_params(rng, H)
    p = ModelParams(p.r, p.d, p.gamma, p.beta, p.delta1, random_timefn(rng, 0.2, 2.0, H), p.K, p.p0)
    dm = min(bounds_over(p.delta1, 0, H).lower, bounds_over(p.delta2, 0, H).lower)
    bound = bounds_over(Sum((p.K, p.p0)), 0, H).lower / dm
    N0, f = float(rng.uniform(0, bound)), float(rng.uniform(0, 1))
    return Scenario(p, State(N0 * f, N0 * (1 - f)), H), bound


@pytest.fixture(scope="module")
def omega_corpus():
    rng = np.random.default_rng(SEED + 7)
    out = []
    for _ in range(100):
        sc, bound = omega_scenario(rng)
        out.append((sc, bound, integrate(sc)))
    return out


# 1

def test_positivity_suite(positivity_corpus, verdict_log):
    runs, elapsed = positivity_corpus
    worst = 0.0
    for sc, tr in runs:
        floor = -1e-9 * (1 + sc.initial.N)
        worst = min(worst, float(min(tr.S.min(), tr.I.min())) / (1 + sc.initial.N))
        assert tr.S.min() >= floor and tr.I.min() >= floor
    n_imp = sum(bool(sc.schedule.events) for sc, _ in runs)
    ok = elapsed < 120
    verdict_log(1, ok, f"200 scenarios ({n_imp} impulsive), min S,I/(1+N0) = {worst:.3g}, {elapsed:.1f} s")
    assert ok


# 2

def test_exact_zero_clauses(verdict_log):
    rng = np.random.default_rng(SEED + 2)
    bad = 0
    for k in range(20):
        if k < 10:
            init = State(float(rng.uniform(1, 150)), 0.0)
        else:
            init = State(0.0, 0.0)
        sc = random_scenario(rng, initial=init)
        tr = integrate(sc)
        bad += int(np.any(tr.I != 0.0))
        if k >= 10:
            bad += int(np.any(tr.S != 0.0))
    verdict_log(2, bad == 0, f"20 scenarios, {bad} with a nonzero sample")
    assert bad == 0


# 3

def test_closed_form_oracles(verdict_log):
    rng = np.random.default_rng(SEED + 3)
    worst = np.zeros(3)
    for _ in range(30):
        sc = random_scenario(rng, horizon=float(rng.uniform(2, 10)), impulses=False, r_range=(0.0, 1.0))
        tr = integrate(sc)
        times = np.linspace(sc.horizon / 10, sc.horizon, 10)
        res = oracle_residuals(tr, sc.params, times)
        worst = np.maximum(worst, [res.residual_I, res.residual_N, res.residual_psi])
    ok = worst[0] <= 1e-6 and worst[1] <= 1e-5 and worst[2] <= 1e-5
    verdict_log(3, ok, f"30 scenarios x 10 probes, max residual I {worst[0]:.2g}, N {worst[1]:.2g}, "
                       f"Psi {worst[2]:.2g}")
    assert ok


# 4, plus the eigenvalue half of 5

def admissible_limits(rng, n):
    out = []
    while len(out) < n:
        L = LimitingParams(float(rng.uniform(-1.5, 2)), float(rng.uniform(0.05, 1)), float(rng.uniform(0, 1)),
                           float(rng.uniform(0.001, 0.2)), float(rng.uniform(0.2, 2)), float(rng.uniform(0, 2)),
                           float(rng.uniform(20, 500)))
        S2 = (L.d_star + L.gamma_star) / L.beta_star
        denom = L.d_star * L.p_star + L.r_star * L.delta2_star * S2
        if denom > 0 and L.r_star * (L.p_star - L.delta1_star * S2) > 0:
            out.append(L)
    return out


def fd_jacobian(L, x, h=1e-6):
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h * max(1.0, abs(x[j]))
        J[:, j] = (L.field(*(x + e)) - L.field(*(x - e))) / (2 * e[j])
    return J


def root_found(L):
    """Endemic point from the infected nullcline and a bracketed scalar solve on the other."""
    S2 = (L.d_star + L.gamma_star) / L.beta_star
    I2 = brentq(lambda I: L.field(S2, I)[0], 0.0, 1e9, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return S2, I2


def test_equilibrium_and_jacobian(verdict_log):
    rng = np.random.default_rng(SEED + 4)
    worst_res = worst_cf = worst_jac = 0.0
    for L in admissible_limits(rng, 100):
        for e in equilibria(L):
            x = np.array(e.point)
            J, F = e.jacobian, fd_jacobian(L, x)
            floor = 1e-3 * np.abs(J).max()
            worst_jac = max(worst_jac, float(np.max(np.abs(J - F) / np.maximum(np.abs(J), floor))))
            if e.kind == "endemic":
                assert e.admissible
                worst_res = max(worst_res, e.residual)
                S2, I2 = root_found(L)
                worst_cf = max(worst_cf, abs(e.notes["closed_form_I"] - I2) / I2, abs(e.point[1] - I2) / I2)
    wit = equilibria(LimitingParams(1.0, 0.5, 0.5, 0.1, 1.0, 1.0, 100.0))[1]
    wit_ok = wit.point[0] == pytest.approx(10.0, rel=1e-12) and wit.point[1] == pytest.approx(15.0, rel=1e-12)
    ok = worst_res <= 1e-12 and worst_cf <= 1e-9 and worst_jac <= 1e-6 and wit_ok
    verdict_log(4, ok, f"100 endemic cases, residual {worst_res:.2g}, closed form vs root {worst_cf:.2g}, "
                       f"Jacobian vs FD {worst_jac:.2g}, witness {wit.point}")
    assert ok


# 5

ZERO_CASES = {
    LAS: [dict(r=-0.5), dict(r=-1.0), dict(r=-0.2, d=0.3)],
    STABLE: [dict(r=0.0), dict(r=0.0, d=0.2), dict(r=0.0, g=1.0)],
    UNSTABLE: [dict(r=0.2), dict(r=0.5), dict(r=1.0)],
}
ENDEMIC_CASES = {
    LAS: [dict(), dict(b=0.08), dict(b=0.12, d2=0.5)],
    UNSTABLE: [dict(r=-1.0, b=0.005, d2=0.0), dict(r=-1.0, b=0.004, d2=0.0), dict(r=-0.5, b=0.005, d2=0.0)],
}


def distances(kw, kind):
    c = dict(r=1.0, d=0.5, g=0.5, b=0.1, d1=1.0, d2=1.0, p=100.0)
    c.update(kw)
    L = LimitingParams(*c.values())
    eq = equilibria(L)[0 if kind == "zero" else 1]
    x = np.array(eq.point)
    x0 = np.array([1.0, 1.0]) if kind == "zero" else 1.01 * x
    sc = Scenario(constant_params(*c.values()), State(*x0), 100.0)
    try:
        tr = integrate(sc)
    except IntegrationError:
        # blow-up is departure
        return eq.classification, math.inf, math.inf
    d = np.hypot(tr.S - x[0], tr.I - x[1])
    d0 = float(np.hypot(*(x0 - x)))
    return eq.classification, float(d.max()) / d0, float(d[-1]) / d0


def behaves(label, d_max, d_end):
    if label == LAS:
        return d_end <= 1e-3
    if label == STABLE:
        return d_max <= 2.0 and d_end >= 0.1
    return d_max >= 5.0


def test_classification_matches_dynamics(verdict_log):
    bad = []
    for kind, table in (("zero", ZERO_CASES), ("endemic", ENDEMIC_CASES)):
        for label, cases in table.items():
            for kw in cases:
                got, d_max, d_end = distances(kw, kind)
                if got != label or not behaves(label, d_max, d_end):
                    bad.append((kind, kw, got, d_max, d_end))
    rng = np.random.default_rng(SEED + 4)
    inconsistent = 0
    for L in admissible_limits(rng, 100):
        for e in equilibria(L):
            top = max(np.linalg.eigvals(e.jacobian).real)
            inconsistent += int(
                (e.classification == LAS and not top < 0)
                or (e.classification == UNSTABLE and not top > 0)
                or (e.classification in (STABLE, DEGENERATE) and abs(top) > 1e-9)
                or e.classification == INCONCLUSIVE)
    ok = not bad and inconsistent == 0
    verdict_log(5, ok, f"15 canonical scenarios, {len(bad)} mismatched; eigenvalue sign inconsistencies "
                       f"{inconsistent} of the 100 random cases")
    assert ok, bad


# 6

def test_impulse_mechanics(verdict_log):
    rng = np.random.default_rng(SEED + 6)
    grew = n_events = 0
    for _ in range(50):
        sc = random_scenario(rng, impulses=True)
        tr = integrate(sc)
        for rec in tr.impulse_records:
            n_events += 1
            grew += int(rec.after.N > rec.before.N)
    p = constant_params(1.0, 0.5, 0.5, 0.1, 1.0, 1.0, 100.0)
    tr = integrate(Scenario(p, State(50, 10), 10.0, ImpulseSchedule(((3.0, 1.0, 1.0),))))
    after = tr.t > 3.0
    rec = tr.impulse_records[0]
    extinct = bool(rec.after == (0.0, 0.0) and np.all(tr.S[after] == 0.0) and np.all(tr.I[after] == 0.0))
    rejected = bool(validate_impulse_schedule(ImpulseSchedule(((1.0, 0.2, 0.2), (1.5, 0.2, 0.2)), 1.0)))
    ok = grew == 0 and extinct and rejected
    verdict_log(6, ok, f"{n_events} impulses, {grew} with N+ > N; full cull exact zero {extinct}; "
                       f"gap below T rejected {rejected}")
    assert ok


# 7

@pytest.mark.xfail(strict=True, reason="containment fails when the capacity varies over the horizon")
def test_capacity_set_containment(omega_corpus, verdict_log):
    escaped, worst = 0, 0.0
    for sc, bound, tr in omega_corpus:
        excess = float(tr.N.max()) - bound
        worst = max(worst, excess)
        escaped += int(excess > 1e-9)
    ok = escaped == 0
    verdict_log(7, ok, f"100 scenarios, {escaped} leave the set, worst excess {worst:.3g}")
    assert ok


def test_capacity_set_escapes_come_from_varying_capacity(omega_corpus):
    for sc, bound, tr in omega_corpus:
        p = Sum((sc.params.K, sc.params.p0))
        if float(tr.N.max()) - bound > 1e-9:
            assert bounds_over(p, 0, sc.horizon).width > 0


# 8

def test_periodic_capacity(verdict_log):
    Tp, worst = 5.0, 0.0
    for a in (0.1, 0.3):
        p = ModelParams(Constant(1.0), Constant(0.5), Constant(0.5), Constant(0.1), Sinusoid(1.0, a, Tp, 0.0),
                        Constant(1.0), Constant(100.0))
        H = 40 * Tp
        tr = integrate(Scenario(p, State(100.0, 0.0), H))
        assert np.all(tr.I == 0.0)
        for t in np.linspace(30 * Tp, 39 * Tp, 10):
            N0, N1 = tr.state_at(float(t)).N, tr.state_at(float(t + Tp)).N
            worst = max(worst, abs(N1 - N0) / N0)
        assert verify_periodic_capacity(p, Tp, 10, H).periodic
    off = ModelParams(Constant(1.0), Constant(0.5), Constant(0.5), Constant(0.1), Constant(1.1), Constant(1.0),
                      Constant(100.0))
    res = verify_periodic_capacity(off, Tp, 10, 40 * Tp)
    off_ok = not res.periodic and res.max_residual == pytest.approx(-0.1 * Tp, rel=1e-9)
    ok = worst <= 1e-6 and off_ok
    verdict_log(8, ok, f"max |N(t+Tp) - N(t)|/N(t) = {worst:.2g}; delta1 = 1.1 residual {res.max_residual:.6g}")
    assert ok


# 9

def test_impulsive_culling_balance(verdict_log):
    p = constant_params(1.0, 0.5, 0.5, 0.1, 1.0, 1.0, 100.0)
    w = 1 - math.exp(-1)
    events = ImpulseSchedule(tuple((float(k), w, w) for k in range(1, 21))).events
    bal = culling_balance(p, events, 20.0)
    worst = float(np.max(np.abs(bal.values)))
    free = culling_balance(p, (), 20.0)
    sc = Scenario(p, State(1.0, 0.0), 20.0)
    tr = integrate(sc)
    entry = run_monitors(tr, sc, checks=["impulsive_culling_balance"]).entries[0]
    grows = bool(np.all(np.diff(tr.N) >= -1e-12) and 0.99 * 100 <= tr.N[-1] <= 100 + 1e-9)
    ok = worst <= 1e-10 and free.values[0] > 0 and entry.hypothesis is NO and grows
    verdict_log(9, ok, f"balanced max |C_k| = {worst:.2g} over 20 impulses; no-impulse C = {free.values[0]:g}, "
                       f"N(0)=1 -> {tr.N[-1]:.6g} without exceeding p/delta1")
    assert ok


# 10

@pytest.fixture(scope="module")
def corpus_reports(positivity_corpus, omega_corpus):
    reports = [run_monitors(tr, sc) for sc, tr in positivity_corpus[0]]
    reports += [run_monitors(tr, sc) for sc, _, tr in omega_corpus]
    return reports


@pytest.mark.xfail(strict=True, reason="the two invariant-set statements have counterexamples in the corpus")
def test_no_hypothesis_yes_conclusion_no(corpus_reports, verdict_log):
    offending = [v for rep in corpus_reports for v in violations(rep)]
    ok = not offending
    verdict_log(10, ok, f"{len(corpus_reports)} reports, {len(offending)} yes/no entries "
                        f"({', '.join(sorted(set(offending))) or 'none'})")
    assert ok


def test_only_invariant_set_checks_are_violated(corpus_reports):
    offending = {v for rep in corpus_reports for v in violations(rep)}
    assert offending <= {"invariant_set_capacity", "invariant_set_initial_level"}
