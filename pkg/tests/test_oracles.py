import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import random_scenario
from impsis.errors import DomainError
from impsis.integrator import ImpulseSchedule, Scenario, integrate
from impsis.model import ModelParams, State, constant_params
from impsis.oracles import (closed_form_I, closed_form_N, evaluate_oracles, negative_recovery_balance,
                            oracle_residuals, reconstruct_fundamental_matrix, sign_partition)
from impsis.paramfns import Constant, PiecewiseConstant, PiecewiseLinear, Sinusoid, Sum, integrate_timefn


def general():
    return ModelParams(Sinusoid(0.8, 0.3, 4, 0), Constant(0.3), Sinusoid(0.4, 0.2, 3, 1), Constant(0.01),
                       Constant(1.0), Constant(0.6), Constant(100), Sinusoid(0, 10, 5, 0))


def test_zero_infection_stays_zero():
    tr = integrate(Scenario(general(), State(40, 0), 10.0))
    assert np.all(closed_form_I(tr, general(), np.linspace(0, 10, 11)) == 0.0)


def test_pure_removal_is_exponential():
    p = ModelParams(Constant(1), Constant(0.25), Constant(0.75), Constant(0.0), Constant(1), Constant(1),
                    Constant(100))
    tr = integrate(Scenario(p, State(10, 3), 5.0))
    ts = np.array([0.5, 1, 2, 5])
    assert closed_form_I(tr, p, ts) == pytest.approx(3 * np.exp(-ts), rel=1e-12)


def test_general_scenario_matches_the_integrator():
    p = general()
    tr = integrate(Scenario(p, State(40, 10), 10.0))
    ts = np.linspace(1, 10, 10)
    I = np.array([tr.state_at(t).I for t in ts])
    N = np.array([tr.state_at(t).N for t in ts])
    assert np.all(np.abs(closed_form_I(tr, p, ts) - I) <= 1e-6 * I)
    assert np.all(np.abs(closed_form_N(tr, p, ts) - N) <= 1e-5 * N)


def test_infection_free_total_is_the_growth_exponential():
    p = general()
    tr = integrate(Scenario(p, State(40, 0), 6.0))
    a = lambda t: p.r._value(t) * (1 - p.delta1._value(t) * tr.dense(t)[..., 0] / (p.K._value(t) + p.p0._value(t)))
    from impsis.quadrature import adaptive_quad
    expected = 40 * math.exp(adaptive_quad(a, 0, 6.0, points=tr.step_nodes(), tol=1e-12).value)
    assert closed_form_N(tr, p, 6.0) == pytest.approx(expected, rel=1e-9)


def test_no_removal_reduces_the_kernel():
    p = ModelParams(Constant(0.5), Constant(0.0), Constant(0.0), Constant(0.0), Constant(1), Constant(0.5),
                    Constant(100))
    tr = integrate(Scenario(p, State(20, 10), 5.0))
    assert closed_form_N(tr, p, 5.0) == pytest.approx(tr.state_at(5.0).N, rel=1e-9)


def test_fundamental_matrix_starts_at_identity():
    p = general()
    tr = integrate(Scenario(p, State(40, 10), 5.0))
    P = reconstruct_fundamental_matrix(tr, p, 0.0)
    assert (P.psi11, P.psi12, P.psi21, P.psi22) == (1.0, 0.0, 0.0, 1.0)


def test_fundamental_matrix_reconstructs_the_state():
    p = general()
    tr = integrate(Scenario(p, State(40, 10), 8.0))
    for t in (1.0, 4.0, 8.0):
        P = reconstruct_fundamental_matrix(tr, p, t).matrix()
        x = P @ np.array([40.0, 10.0])
        y = np.array(tr.state_at(t))
        assert np.linalg.norm(x - y) <= 1e-5 * np.linalg.norm(y)


def test_second_diagonal_entry_is_the_infected_ratio():
    p = general()
    tr = integrate(Scenario(p, State(40, 10), 8.0))
    ts = np.linspace(0.5, 8, 6)
    vals = evaluate_oracles(tr, p, ts)
    assert np.array_equal(vals.psi[:, 1, 1] * 10.0, vals.I) or np.allclose(vals.psi[:, 1, 1] * 10, vals.I,
                                                                             rtol=1e-15, atol=0)


def test_infection_free_first_entry_is_the_growth_exponential():
    p = general()
    tr = integrate(Scenario(p, State(40, 0), 6.0))
    P = reconstruct_fundamental_matrix(tr, p, 6.0)
    assert P.psi11 * 40 == pytest.approx(closed_form_N(tr, p, 6.0), rel=1e-12)
    assert P.psi11 * 40 == pytest.approx(tr.state_at(6.0).S, rel=1e-8)


def test_oracles_chain_across_impulses():
    p = general()
    sched = ImpulseSchedule(((0.0, 0.1, 0.2), (3.0, 0.3, 0.5), (6.0, 0.2, 0.2)))
    tr = integrate(Scenario(p, State(40, 10), 6.0, sched))
    res = oracle_residuals(tr, p, np.linspace(0.6, 6.0, 10))
    assert res.residual_I <= 1e-6 and res.residual_N <= 1e-5 and res.residual_psi <= 1e-5


def test_oracle_time_outside_span():
    p = general()
    tr = integrate(Scenario(p, State(40, 10), 2.0))
    with pytest.raises(DomainError):
        closed_form_I(tr, p, 3.0)


def test_sign_partition_of_a_sinusoid():
    part = sign_partition(Sinusoid(0, 1, 4, 0), 0, 20)
    assert part.measure() == pytest.approx(20.0, abs=1e-12)
    assert len(part.neg_intervals) == 5
    assert part.neg_intervals[0] == pytest.approx((2.0, 4.0), abs=1e-12)


def test_sign_partition_zero_pieces():
    part = sign_partition(PiecewiseConstant((2.0, 5.0), (1.0, 0.0, -1.0)), 0, 8)
    assert part.pos_intervals == ((0.0, 2.0),)
    assert part.zero_intervals == ((2.0, 5.0),)
    assert part.neg_intervals == ((5.0, 8.0),)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1, 1), st.floats(0, 2), st.floats(0.3, 5), st.floats(0, 6.3), st.floats(0.1, 30))
def test_sign_partition_covers_without_overlap(mean, amp, period, phase, t):
    f = Sum((Sinusoid(mean, amp, period, phase), PiecewiseConstant((t / 3,), (0.0, 0.2))))
    part = sign_partition(f, 0, t)
    ivs = sorted(part.pos_intervals + part.neg_intervals + part.zero_intervals)
    assert ivs[0][0] == 0 and ivs[-1][1] == t
    for (a, b), (c, d) in zip(ivs, ivs[1:]):
        assert b == c
    assert abs(part.measure() - t) <= 1e-12 * max(1, t)


def test_nonnegative_recovery_satisfies_the_balance_trivially():
    p = general()
    tr = integrate(Scenario(p, State(40, 10), 5.0))
    bal = negative_recovery_balance(tr, p)
    assert bal.satisfied and np.all(bal.sup_negative == 0)


def test_strongly_negative_recovery_breaks_positivity():
    p = ModelParams(Constant(1), Constant(0.1), Constant(-5.0), Constant(0.01), Constant(1), Constant(1),
                    Constant(100))
    sc = Scenario(p, State(0.1, 10), 0.5, allow_negative_gamma=True)
    tr = integrate(sc)
    bal = negative_recovery_balance(tr, p)
    assert not bal.satisfied
    assert tr.S.min() < -sc.neg_tol


def test_mild_negative_pulse_keeps_positivity():
    gamma = PiecewiseConstant((1.0, 1.2), (0.3, -0.05, 0.3))
    p = ModelParams(Constant(1), Constant(0.1), gamma, Constant(0.01), Constant(1), Constant(1), Constant(100))
    sc = Scenario(p, State(30, 5), 4.0, allow_negative_gamma=True)
    tr = integrate(sc)
    assert negative_recovery_balance(tr, p).satisfied
    assert tr.S.min() >= 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_impulse_free_oracles(seed):
    rng = np.random.default_rng(seed)
    sc = random_scenario(rng, horizon=float(rng.uniform(2, 10)), impulses=False, r_range=(0.0, 1.0))
    tr = integrate(sc)
    res = oracle_residuals(tr, sc.params, np.linspace(sc.horizon / 10, sc.horizon, 10))
    assert res.residual_I <= 1e-6 and res.residual_N <= 1e-5 and res.residual_psi <= 1e-5
