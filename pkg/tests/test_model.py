import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impsis.errors import DomainError, ModelConsistencyError
from impsis.integrator import Scenario
from impsis.model import (ModelParams, State, carrying_capacity, constant_params, incidence, total_rate_expanded,
                          vector_field)
from impsis.paramfns import Constant, Sinusoid, bounds_over


def params_with(**kw):
    base = dict(r=Constant(1), d=Constant(0.5), gamma=Constant(0.5), beta=Constant(0.1),
                delta1=Constant(1), delta2=Constant(1), K=Constant(100), p0=Constant(0))
    base.update(kw)
    return ModelParams(**base)


def test_constant_capacity():
    assert carrying_capacity(params_with(), 3.0) == 100.0


def test_capacity_with_oscillating_term_at_peak():
    p = params_with(p0=Sinusoid(0, 10, 1, 0))
    assert carrying_capacity(p, 0.25) == pytest.approx(110.0)


def test_capacity_term_above_floor_is_rejected_at_load():
    p = params_with(K=Constant(100), p0=Sinusoid(0, 200, 1, 0))
    problems = Scenario(p, State(1, 1), 10.0).validate()
    assert any("p0" in m for m in problems)


def test_nonpositive_capacity_breaks_model():
    p = params_with(K=Constant(-1.0))
    with pytest.raises(ModelConsistencyError):
        vector_field(p, 0.0, State(1, 1))


def test_negative_time_is_a_domain_error():
    with pytest.raises(DomainError):
        vector_field(params_with(), -1.0, State(1, 1))


def test_incidence_examples():
    p = params_with()
    assert incidence(p, State(30, 20), 0.0) == 50
    assert incidence(p, State(0, 0), 0.0) == 0
    q = params_with(delta1=Constant(0.5), delta2=Constant(2.0))
    G = incidence(q, State(10, 5), 0.0)
    assert G == 15
    assert 0.5 * 15 <= G <= 2.0 * 15


def test_infection_free_field_matches_logistic_derivative():
    p = params_with(delta2=Constant(0.0), beta=Constant(0.0))
    dS, dI = vector_field(p, 0.0, State(50, 0))
    assert (dS, dI) == (25.0, 0.0)
    # central difference of the constant-coefficient logistic solution through N(0)=50
    r, K, N0, h = 1.0, 100.0, 50.0, 1e-5
    N = lambda t: K / (1 + (K / N0 - 1) * np.exp(-r * t))
    assert dS == pytest.approx((N(h) - N(-h)) / (2 * h), rel=1e-8)


def test_origin_is_a_rest_point():
    assert vector_field(params_with(), 0.0, State(0, 0)) == (0.0, 0.0)


def test_endemic_witness_is_a_rest_point():
    p = constant_params(1, 0.5, 0.5, 0.1, 1, 1, 100)
    dS, dI = vector_field(p, 0.0, State(10, 15))
    assert abs(dS) <= 1e-12 and abs(dI) <= 1e-12


def test_validation_lists_every_problem():
    p = params_with(d=Constant(-1), beta=Constant(-0.1), gamma=Constant(-0.2))
    problems = p.validate(10.0)
    assert sum("must be nonnegative" in m for m in problems) == 2
    assert any("gamma" in m for m in problems)
    assert not any("gamma" in m for m in p.validate(10.0, allow_negative_gamma=True))


def test_params_round_trip_through_dict():
    from impsis.paramfns import timefn_from_dict
    p = params_with(p0=Sinusoid(0, 5, 2, 0))
    d = p.to_dict()
    again = ModelParams(**{k: timefn_from_dict(d[k]) for k in p.functions()}, eps0=d["eps0"])
    assert again == p


coef = st.floats(0, 3, allow_nan=False)
state = st.floats(0, 500, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(r=st.floats(-2, 2), d=coef, g=coef, b=st.floats(0, 0.1), d1=coef, d2=coef, p=st.floats(1, 500),
       S=state, I=state)
def test_exact_zero_infected_rate(r, d, g, b, d1, d2, p, S, I):
    params = constant_params(r, d, g, b, d1, d2, p)
    assert vector_field(params, 0.0, State(S, 0.0))[1] == 0.0


@settings(max_examples=300, deadline=None)
@given(r=st.floats(-2, 2), d=coef, g=coef, b=st.floats(0, 0.1), d1=coef, d2=coef, p=st.floats(1, 500),
       S=state, I=state, t=st.floats(0, 50))
def test_expanded_total_rate_matches(r, d, g, b, d1, d2, p, S, I, t):
    params = params_with(r=Sinusoid(r, 0.3, 7, 0), d=Constant(d), gamma=Constant(g), beta=Constant(b),
                         delta1=Constant(d1), delta2=Sinusoid(d2 + 0.5, 0.5, 3, 1), K=Constant(p))
    dS, dI = vector_field(params, t, State(S, I))
    direct = dS + dI
    expanded = total_rate_expanded(params, t, State(S, I))
    scale = abs(r + 0.3) * (S + I) * (1 + (d1 + d2 + 1) * (S + I) / p) + (abs(r) + 1 + d) * I + 1e-300
    assert abs(direct - expanded) <= 1e-12 * max(abs(direct), scale)


@settings(max_examples=300, deadline=None)
@given(r=st.floats(0, 2), d=coef, g=coef, b=st.floats(0, 0.1), d1=st.floats(0.1, 3), d2=st.floats(0.1, 3),
       p=st.floats(1, 500), S=state, I=state, t=st.floats(0, 20))
def test_total_rate_envelope(r, d, g, b, d1, d2, p, S, I, t):
    params = params_with(r=Constant(r), d=Constant(d), gamma=Constant(g), beta=Constant(b),
                         delta1=Sinusoid(d1, 0.05, 2, 0), delta2=Constant(d2), K=Constant(p))
    dm = min(bounds_over(params.delta1, 0, 20).lower, d2)
    dM = max(bounds_over(params.delta1, 0, 20).upper, d2)
    dS, dI = vector_field(params, t, State(S, I))
    N = S + I
    lo = r * (1 - dM * N / p) * S - d * I
    hi = r * (1 - dm * N / p) * S - d * I
    slack = 1e-9 * (1 + abs(lo) + abs(hi) + r * dM * N * S / p)
    assert lo - slack <= dS + dI <= hi + slack
