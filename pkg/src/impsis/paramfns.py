"""Piecewise-continuous time-varying coefficients.

Every coefficient of the model (growth, death, recovery, infection and
incidence rates, capacity terms) is a :class:`TimeFunction`. The concrete
kinds are small frozen dataclasses that can be evaluated on scalars or
arrays, integrated exactly across their own jump points, and enclosed by
analytic bounds on any interval.

Piecewise kinds are right-continuous: at a breakpoint the value of the
interval starting there is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError
from .quadrature import adaptive_quad

TWO_PI = 2.0 * math.pi
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FunctionBounds:
    lower: float
    upper: float
    interval: Tuple[float, float]

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def finite(self):
        return math.isfinite(self.lower) and math.isfinite(self.upper)


class TimeFunction:
    """Base class; subclasses implement ``_value``, ``_bounds`` and friends."""

    kind = "abstract"

    def __call__(self, t):
        if np.any(np.asarray(t) < 0):
            raise DomainError(f"time must be nonnegative, got {t!r}")
        return self._value(t)

    def _value(self, t):
        raise NotImplementedError

    def _bounds(self, t0, t1):
        raise NotImplementedError

    def breakpoints(self):
        """Sorted abscissae where the function or its derivative may jump."""
        return ()

    def jumps(self):
        """Breakpoints where the value itself is discontinuous."""
        return ()

    def restrict(self, a, b):
        """A smooth function equal to ``self`` on ``(a, b)`` and at ``b`` from the left.

        ``(a, b)`` must not contain a jump. Used by the integrator so that
        the last Runge-Kutta stages of a step ending on a jump see the
        left limit rather than the next piece.
        """
        return self

    def periods(self):
        return ()

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(TimeFunction):
    value: float
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def _value(self, t):
        if np.ndim(t):
            return np.full(np.shape(t), self.value)
        return self.value

    def _bounds(self, t0, t1):
        return self.value, self.value

    def to_dict(self):
        return {"type": self.kind, "value": self.value}


@dataclass(frozen=True)
class Sinusoid(TimeFunction):
    """``mean + amplitude * sin(2*pi*t/period + phase)``."""

    mean: float
    amplitude: float
    period: float
    phase: float = 0.0
    kind = "sinusoid"

    def __post_init__(self):
        for name in ("mean", "amplitude", "period", "phase"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.period > 0:
            raise ValueError(f"sinusoid period must be positive, got {self.period}")

    def _value(self, t):
        if np.ndim(t):
            return self.mean + self.amplitude * np.sin(TWO_PI * np.asarray(t) / self.period + self.phase)
        return self.mean + self.amplitude * math.sin(TWO_PI * t / self.period + self.phase)

    def _bounds(self, t0, t1):
        amp = abs(self.amplitude)
        if t1 - t0 >= self.period:
            return self.mean - amp, self.mean + amp
        v0 = self._value(t0)
        v1 = self._value(t1)
        lo, hi = min(v0, v1), max(v0, v1)
        # interior extrema: argument = pi/2 + k*pi, sin = (-1)^k there
        arg0 = TWO_PI * t0 / self.period + self.phase
        arg1 = TWO_PI * t1 / self.period + self.phase
        k_lo = math.ceil((arg0 - math.pi / 2) / math.pi)
        k_hi = math.floor((arg1 - math.pi / 2) / math.pi)
        for k in range(k_lo, k_hi + 1):
            extreme = self.mean + self.amplitude * (1.0 if k % 2 == 0 else -1.0)
            lo = min(lo, extreme)
            hi = max(hi, extreme)
        return lo, hi

    def periods(self):
        return (self.period,)

    def to_dict(self):
        return {"type": self.kind, "mean": self.mean, "amplitude": self.amplitude,
                "period": self.period, "phase": self.phase}


@dataclass(frozen=True)
class PiecewiseConstant(TimeFunction):
    breakpoints_: Tuple[float, ...]
    values: Tuple[float, ...]
    kind = "piecewise_constant"

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints_)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(bps) + 1:
            raise ValueError("piecewise constant needs exactly one more value than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints_", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_bp", np.array(bps))
        object.__setattr__(self, "_vals", np.array(vals))

    def _value(self, t):
        idx = np.searchsorted(self._bp, t, side="right")
        if np.ndim(t):
            return self._vals[idx]
        return self.values[int(idx)]

    def _bounds(self, t0, t1):
        # piece i covers [b_{i-1}, b_i); it is hit iff b_{i-1} <= t1 and b_i > t0
        i0 = int(np.searchsorted(self._bp, t0, side="right"))
        i1 = int(np.searchsorted(self._bp, t1, side="right"))
        hit = self.values[i0:i1 + 1]
        return min(hit), max(hit)

    def breakpoints(self):
        return self.breakpoints_

    def jumps(self):
        return tuple(b for b, v0, v1 in zip(self.breakpoints_, self.values, self.values[1:]) if v0 != v1)

    def restrict(self, a, b):
        return Constant(self._value(0.5 * (a + b)))

    def to_dict(self):
        return {"type": self.kind, "breakpoints": list(self.breakpoints_), "values": list(self.values)}


@dataclass(frozen=True)
class PiecewiseLinear(TimeFunction):
    """Linear interpolation through knots, holding the end values outside."""

    knots: Tuple[Tuple[float, float], ...]
    kind = "piecewise_linear"

    def __post_init__(self):
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        if not knots:
            raise ValueError("piecewise linear needs at least one knot")
        if any(k2[0] <= k1[0] for k1, k2 in zip(knots, knots[1:])):
            raise ValueError("knot abscissae must be strictly increasing")
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            slopes = np.diff([k[1] for k in knots]) / np.diff([k[0] for k in knots])
        if not np.all(np.isfinite(slopes)) or not all(map(math.isfinite, sum(knots, ()))):
            raise ValueError("knots must be finite with finite slopes between them")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "_xs", np.array([k[0] for k in knots]))
        object.__setattr__(self, "_ys", np.array([k[1] for k in knots]))

    def _value(self, t):
        out = np.interp(t, self._xs, self._ys)
        return out if np.ndim(t) else float(out)

    def _bounds(self, t0, t1):
        vals = [self._value(t0), self._value(t1)]
        vals.extend(v for x, v in self.knots if t0 < x < t1)
        lo, hi = min(vals), max(vals)
        pad = 4 * _EPS * max(abs(lo), abs(hi))
        return lo - pad, hi + pad

    def breakpoints(self):
        return tuple(x for x, _ in self.knots)

    def to_dict(self):
        return {"type": self.kind, "knots": [list(k) for k in self.knots]}


@dataclass(frozen=True)
class Sum(TimeFunction):
    terms: Tuple[TimeFunction, ...]
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("sum needs at least one term")

    def _value(self, t):
        total = self.terms[0]._value(t)
        for term in self.terms[1:]:
            total = total + term._value(t)
        return total

    def _bounds(self, t0, t1):
        lo = hi = 0.0
        for term in self.terms:
            a, b = term._bounds(t0, t1)
            lo += a
            hi += b
        return lo, hi

    def breakpoints(self):
        return tuple(sorted({b for term in self.terms for b in term.breakpoints()}))

    def jumps(self):
        return tuple(sorted({b for term in self.terms for b in term.jumps()}))

    def restrict(self, a, b):
        return Sum(tuple(term.restrict(a, b) for term in self.terms))

    def periods(self):
        return tuple(p for term in self.terms for p in term.periods())

    def to_dict(self):
        return {"type": self.kind, "terms": [term.to_dict() for term in self.terms]}


@dataclass(frozen=True)
class Scaled(TimeFunction):
    factor: float
    inner: TimeFunction
    kind = "scaled"

    def __post_init__(self):
        object.__setattr__(self, "factor", float(self.factor))

    def _value(self, t):
        return self.factor * self.inner._value(t)

    def _bounds(self, t0, t1):
        a, b = self.inner._bounds(t0, t1)
        a, b = self.factor * a, self.factor * b
        return min(a, b), max(a, b)

    def breakpoints(self):
        return self.inner.breakpoints()

    def jumps(self):
        return self.inner.jumps()

    def restrict(self, a, b):
        return Scaled(self.factor, self.inner.restrict(a, b))

    def periods(self):
        return self.inner.periods()

    def to_dict(self):
        return {"type": self.kind, "factor": self.factor, "inner": self.inner.to_dict()}


def timefn_from_dict(obj):
    """Build a time function from its JSON form. A bare number is a constant."""
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return Constant(obj)
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError(f"time function must be a number or an object with 'type', got {obj!r}")
    kind = obj["type"]
    if kind == "constant":
        return Constant(obj["value"])
    if kind == "sinusoid":
        return Sinusoid(obj["mean"], obj["amplitude"], obj["period"], obj.get("phase", 0.0))
    if kind == "piecewise_constant":
        return PiecewiseConstant(tuple(obj["breakpoints"]), tuple(obj["values"]))
    if kind == "piecewise_linear":
        return PiecewiseLinear(tuple(tuple(k) for k in obj["knots"]))
    if kind == "sum":
        return Sum(tuple(timefn_from_dict(t) for t in obj["terms"]))
    if kind == "scaled":
        return Scaled(obj["factor"], timefn_from_dict(obj["inner"]))
    raise ValueError(f"unknown time function type {kind!r}")


def eval_timefn(f, t):
    return f(t)


def integrate_timefn(f, t0, t1, tol=1e-10):
    """Integral of ``f`` over ``[t0, t1]``; breakpoints are panel edges."""
    if t0 < 0 or t1 < t0:
        raise DomainError(f"need 0 <= t0 <= t1, got [{t0}, {t1}]")
    return adaptive_quad(f._value, t0, t1, points=f.breakpoints(), tol=tol).value


def bounds_over(f, t0, t1):
    if t1 < t0:
        raise DomainError(f"need t0 <= t1, got [{t0}, {t1}]")
    lo, hi = f._bounds(float(t0), float(t1))
    return FunctionBounds(float(lo), float(hi), (float(t0), float(t1)))


def mesh_points(functions, t0, t1):
    """Union of the breakpoints of ``functions`` strictly inside ``(t0, t1)``."""
    pts = {b for f in functions for b in f.breakpoints() if t0 < b < t1}
    return sorted(pts)
