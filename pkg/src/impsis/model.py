"""SIS vector field with nonlinear incidence and time-varying capacity.

    S' = r (1 - G/p) S + (gamma - beta S) I
    I' = (beta S - d - gamma) I
    G  = delta1 S + delta2 I,    p = K + p0
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import ModelConsistencyError
from .paramfns import Constant, TimeFunction, bounds_over

COEFFICIENTS = ("r", "d", "gamma", "beta", "delta1", "delta2", "K", "p0")
NONNEGATIVE = ("d", "beta", "delta1", "delta2")


class State(NamedTuple):
    S: float
    I: float

    @property
    def N(self):
        return self.S + self.I


class ParamValues(NamedTuple):
    r: object
    d: object
    gamma: object
    beta: object
    delta1: object
    delta2: object
    p: object


@dataclass(frozen=True)
class ModelParams:
    r: TimeFunction
    d: TimeFunction
    gamma: TimeFunction
    beta: TimeFunction
    delta1: TimeFunction
    delta2: TimeFunction
    K: TimeFunction
    p0: TimeFunction = field(default_factory=lambda: Constant(0.0))
    eps0: float = 1e-3
    K0: Optional[float] = None

    def functions(self):
        return {name: getattr(self, name) for name in COEFFICIENTS}

    def values(self, t):
        """All coefficients at ``t`` (scalar or array), capacity folded into ``p``."""
        return ParamValues(
            self.r._value(t), self.d._value(t), self.gamma._value(t), self.beta._value(t),
            self.delta1._value(t), self.delta2._value(t), self.K._value(t) + self.p0._value(t),
        )

    def breakpoints(self):
        return tuple(sorted({b for f in self.functions().values() for b in f.breakpoints()}))

    def restrict(self, a, b):
        kw = {name: f.restrict(a, b) for name, f in self.functions().items()}
        return replace(self, **kw)

    def validate(self, horizon, allow_negative_gamma=False):
        """Load-time invariants over ``[0, horizon]``. Returns a list of messages."""
        problems = []
        if not self.eps0 > 0:
            problems.append(f"capacity floor eps0 must be positive, got {self.eps0}")
        bounds = {}
        for name, f in self.functions().items():
            b = bounds_over(f, 0.0, horizon)
            bounds[name] = b
            if not b.finite:
                problems.append(f"coefficient {name} is unbounded on [0, {horizon}]")
        for name in NONNEGATIVE:
            if bounds[name].lower < 0:
                problems.append(f"coefficient {name} must be nonnegative (lower bound {bounds[name].lower:g})")
        if not allow_negative_gamma and bounds["gamma"].lower < 0:
            problems.append(
                f"recovery rate gamma takes negative values (lower bound {bounds['gamma'].lower:g}); "
                "enable allow_negative_gamma to study that regime")
        k_low = bounds["K"].lower
        if self.K0 is None:
            k0 = k_low - self.eps0
            if k0 < 0:
                problems.append(
                    f"capacity term K must stay above eps0={self.eps0:g} (lower bound {k_low:g})")
        else:
            k0 = self.K0
            if k0 < 0:
                problems.append(f"K0 must be nonnegative, got {k0:g}")
            if k_low < k0 + self.eps0:
                problems.append(
                    f"capacity term K lower bound {k_low:g} is below K0 + eps0 = {k0 + self.eps0:g}")
        if bounds["p0"].upper > max(k0, 0.0):
            problems.append(
                f"capacity oscillation p0 upper bound {bounds['p0'].upper:g} exceeds K0 = {max(k0, 0.0):g}")
        p_low = bounds["K"].lower + bounds["p0"].lower
        if p_low < self.eps0:
            problems.append(f"carrying capacity K + p0 may fall to {p_low:g}, below eps0={self.eps0:g}")
        return problems

    def to_dict(self):
        out = {name: f.to_dict() for name, f in self.functions().items()}
        out["eps0"] = self.eps0
        if self.K0 is not None:
            out["K0"] = self.K0
        return out


def constant_params(r, d, gamma, beta, delta1, delta2, p, eps0=1e-3):
    """Convenience constructor for a time-invariant model with capacity ``p``."""
    return ModelParams(Constant(r), Constant(d), Constant(gamma), Constant(beta),
                       Constant(delta1), Constant(delta2), Constant(p), Constant(0.0), eps0=eps0)


def rates(v, S, I):
    """Right-hand side from already-evaluated coefficients ``v``.

    ``I`` multiplies the whole infected rate, so ``I == 0`` gives exactly 0.
    """
    G = v.delta1 * S + v.delta2 * I
    dS = v.r * (1.0 - G / v.p) * S + (v.gamma - v.beta * S) * I
    dI = (v.beta * S - v.d - v.gamma) * I
    return dS, dI


def _check_capacity(p, t):
    if np.any(np.asarray(p) <= 0):
        raise ModelConsistencyError(f"carrying capacity is not positive at t={t!r}")


def carrying_capacity(params, t):
    p = params.K(t) + params.p0(t)
    _check_capacity(p, t)
    return p


def incidence(params, state, t):
    S, I = state
    return params.delta1(t) * S + params.delta2(t) * I


def vector_field(params, t, state):
    S, I = state
    if np.any(np.asarray(t) < 0):
        params.r(t)  # raises the domain error
    v = params.values(t)
    _check_capacity(v.p, t)
    return rates(v, S, I)


def total_rate_expanded(params, t, state):
    """d(S+I)/dt through the fully expanded polynomial form in (N, I)."""
    S, I = state
    N = S + I
    v = params.values(t)
    return (v.r * N * (1 - v.delta1 * N / v.p)
            + (2 * v.delta1 - v.delta2) * v.r * N * I / v.p
            - (v.r + v.d) * I
            - v.r * (v.delta1 - v.delta2) * I ** 2 / v.p)
