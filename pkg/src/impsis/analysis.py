"""Constant-coefficient limit of the model: equilibria, linearisation, stability.

Also hosts two finite-horizon diagnostics of the infection-free flow
N' = r (1 - delta1 N / p) N, which depend only on the coefficients: the
periodicity test for the integral of r (1 - delta1) over one capacity
period, and the trend of its running integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import AnalysisError, DomainError
from .paramfns import Sum, bounds_over, integrate_timefn
from .quadrature import adaptive_quad, cumulative_quad
from .thresholds import Thresholds

LIMIT_NAMES = ("r", "d", "gamma", "beta", "delta1", "delta2", "p")

LAS = "locally_asymptotically_stable"
STABLE = "locally_stable_not_asymptotic"
UNSTABLE = "unstable"
DEGENERATE = "critical_degenerate"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LimitingParams:
    r_star: float
    d_star: float
    gamma_star: float
    beta_star: float
    delta1_star: float
    delta2_star: float
    p_star: float

    def __post_init__(self):
        if not self.p_star > 0:
            raise DomainError(f"limiting capacity must be positive, got {self.p_star}")
        if self.beta_star < 0:
            raise DomainError(f"limiting infection rate must be nonnegative, got {self.beta_star}")

    def field(self, S, I):
        """Limiting vector field at ``(S, I)``."""
        G = self.delta1_star * S + self.delta2_star * I
        dS = self.r_star * (1.0 - G / self.p_star) * S + (self.gamma_star - self.beta_star * S) * I
        dI = (self.beta_star * S - self.d_star - self.gamma_star) * I
        return np.array([dS, dI])

    def as_dict(self):
        return {name: getattr(self, name + "_star") for name in LIMIT_NAMES}


@dataclass(frozen=True)
class LimitResult:
    values: Dict[str, float]
    no_limit: Tuple[str, ...]
    oscillation: Dict[str, float]
    limits: Optional[LimitingParams]


@dataclass
class Equilibrium:
    kind: str
    point: Tuple[float, float]
    jacobian: np.ndarray
    classification: str
    eigenvalues: Tuple[complex, complex]
    admissible: bool = True
    residual: float = 0.0
    notes: Dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "point": [float(self.point[0]), float(self.point[1])],
            "jacobian": self.jacobian.tolist(),
            "classification": self.classification,
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "admissible": self.admissible,
            "residual": float(self.residual),
            "notes": {k: float(v) for k, v in self.notes.items()},
        }


def limiting_params(params, tail_window, limit_tol=1e-6):
    """Tail means of coefficients whose oscillation over ``tail_window`` is at most ``limit_tol``."""
    t0, t1 = tail_window
    if not t1 > t0 >= 0:
        raise DomainError(f"tail window must satisfy t1 > t0 >= 0, got {tail_window}")
    fns = {"r": params.r, "d": params.d, "gamma": params.gamma, "beta": params.beta,
           "delta1": params.delta1, "delta2": params.delta2, "p": Sum((params.K, params.p0))}
    values, osc, missing = {}, {}, []
    for name in LIMIT_NAMES:
        f = fns[name]
        b = bounds_over(f, t0, t1)
        osc[name] = b.width
        if b.width <= limit_tol:
            values[name] = integrate_timefn(f, t0, t1) / (t1 - t0)
        else:
            missing.append(name)
    lim = None
    if not missing:
        lim = LimitingParams(*(values[n] for n in LIMIT_NAMES))
    return LimitResult(values, tuple(missing), osc, lim)


def jacobian(lim, point):
    S, I = point
    r, d, g, b, d1, d2, p = (lim.r_star, lim.d_star, lim.gamma_star, lim.beta_star,
                             lim.delta1_star, lim.delta2_star, lim.p_star)
    return np.array([
        [r * (1.0 - (2.0 * d1 * S + d2 * I) / p) - b * I, g - (b + r * d2 / p) * S],
        [b * I, b * S - d - g],
    ])


def _eigs(J):
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = complex(tr * tr - 4.0 * det)
    root = disc ** 0.5
    return ((tr + root) / 2.0, (tr - root) / 2.0)


def classify_equilibrium(point, J, class_tol=1e-9):
    """Stability label from the linearisation ``J`` at ``point``.

    The origin is judged through its diagonal entries (growth rate and
    minus the infected removal rate); any other point through trace and
    determinant. Equalities hold within ``class_tol``.
    """
    J = np.asarray(J, dtype=float)
    tol = class_tol
    if point[0] == 0 and point[1] == 0:
        r, removal, g = J[0, 0], -J[1, 1], J[0, 1]
        if abs(r) <= tol and abs(removal) <= tol and abs(g) <= tol:
            return DEGENERATE
        if r < -tol and removal > tol:
            return LAS
        if abs(r) <= tol and removal > tol:
            return STABLE
        if r > tol:
            return UNSTABLE
        if max(e.real for e in _eigs(J)) > tol:
            return UNSTABLE
        return INCONCLUSIVE
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if tr < -tol and det > tol:
        return LAS
    if tr > tol or det < -tol:
        return UNSTABLE
    if tr <= tol and abs(det) <= tol:
        return STABLE
    return INCONCLUSIVE


def _make(kind, point, lim, class_tol, admissible=True, residual=0.0, notes=None):
    J = jacobian(lim, point)
    return Equilibrium(kind, (float(point[0]), float(point[1])), J, classify_equilibrium(point, J, class_tol),
                       _eigs(J), admissible, residual, notes or {})


def _newton(lim, x, tol=1e-12, max_iter=50):
    """Polish a root of the limiting field; returns (point, residual)."""
    x = np.array(x, dtype=float)
    res = float(np.max(np.abs(lim.field(*x))))
    for _ in range(max_iter):
        if res <= tol:
            break
        J = jacobian(lim, x)
        step = np.linalg.lstsq(J, -lim.field(*x), rcond=None)[0]
        x_new = x + step
        res_new = float(np.max(np.abs(lim.field(*x_new))))
        if not res_new < res:
            break
        x, res = x_new, res_new
    return x, res


def printed_endemic_variants(lim, S2, I2):
    """The two alternative closed forms for the endemic infected level that
    circulate for this model; reported next to the derived value for comparison."""
    r, d, g, b, d1, d2, p = (lim.r_star, lim.d_star, lim.gamma_star, lim.beta_star,
                             lim.delta1_star, lim.delta2_star, lim.p_star)
    G = d1 * S2 + d2 * I2
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.float64(g * (p - G) * (d + g)) / np.float64(d * b * p)
        bb = np.float64(g * (b * p - d1 * (g + d)) * (d + g)) / np.float64(b * (d * b * p + r * d2))
    return {"alt_form_a": float(a), "alt_form_b": float(bb)}


def equilibria(lim, class_tol=1e-9, newton_tol=1e-12):
    """Zero equilibrium, plus the endemic one when the infection rate is positive."""
    out = [_make("zero", (0.0, 0.0), lim, class_tol)]
    if lim.beta_star <= 0:
        return out
    r, d, g, b, d1, d2, p = (lim.r_star, lim.d_star, lim.gamma_star, lim.beta_star,
                             lim.delta1_star, lim.delta2_star, lim.p_star)
    S2 = (d + g) / b
    denom = d * p + r * d2 * S2
    if denom == 0:
        raise AnalysisError("endemic infected level is undefined: d*p + r*delta2*S vanishes", value=(S2, math.nan))
    I2 = r * S2 * (p - d1 * S2) / denom
    raw = (S2, I2)
    admissible = S2 > 0 and I2 > 0
    point, res = _newton(lim, raw, tol=newton_tol)
    scale = 1.0 + float(np.max(np.abs(point)))
    if res > max(newton_tol, 1e-10 * scale):
        raise AnalysisError(f"endemic equilibrium did not polish (residual {res:.3g})", value=raw)
    notes = {"closed_form_S": S2, "closed_form_I": I2}
    notes.update(printed_endemic_variants(lim, S2, I2))
    out.append(_make("endemic", point, lim, class_tol, admissible, res, notes))
    return out


@dataclass(frozen=True)
class PeriodicityResult:
    periodic: bool
    max_residual: float
    residuals: Tuple[float, ...]
    probes: Tuple[float, ...]


def _log_growth(params):
    r, d1 = params.r._value, params.delta1._value
    return lambda t: r(t) * (1.0 - d1(t))


def _log_growth_points(params):
    return sorted(set(params.r.breakpoints()) | set(params.delta1.breakpoints()))


def verify_periodic_capacity(params, Tp, n_probes, horizon, tol=1e-10):
    """Integral of ``r (1 - delta1)`` over a window of length ``Tp`` at probe starts.

    Periodic iff every residual is at most ``10 * tol`` in magnitude.
    """
    if not Tp > 0:
        raise DomainError(f"period must be positive, got {Tp}")
    if Tp > horizon:
        raise DomainError(f"period {Tp} exceeds the horizon {horizon}")
    f = _log_growth(params)
    pts = _log_growth_points(params)
    probes = np.linspace(0.0, horizon - Tp, max(int(n_probes), 1))
    res = [adaptive_quad(f, t, t + Tp, points=pts, tol=tol).value for t in probes]
    worst = max(res, key=abs)
    return PeriodicityResult(all(abs(v) <= 10 * tol for v in res), float(worst),
                             tuple(float(v) for v in res), tuple(float(t) for t in probes))


def infer_capacity_period(params):
    """Largest sinusoid period among ``r`` and ``delta1`` if every other one divides it."""
    periods = [p for f in (params.r, params.delta1) for p in f.periods()]
    if not periods:
        return None
    Tp = max(periods)
    for p in periods:
        ratio = Tp / p
        if abs(ratio - round(ratio)) > 1e-9:
            return None
    return Tp


@dataclass(frozen=True)
class InfectionFreeResult:
    label: str
    slope: float
    tail_range: float
    grid: Tuple[float, ...]
    integral: Tuple[float, ...]


def classify_infection_free(params, horizon, thresholds=Thresholds(), n_grid=2001):
    """Trend of the running integral of ``r (1 - delta1)`` over ``[0, horizon]``.

    Finite-horizon evidence only: a clear negative tail trend reads as
    asymptotically stable, a positive one as unstable, a bounded curve
    whose tail does not climb above its earlier values as stable.
    """
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    grid = np.union1d(np.linspace(0.0, horizon, n_grid),
                      [b for b in _log_growth_points(params) if 0 < b < horizon])
    phi = cumulative_quad(_log_growth(params), grid, tol=thresholds.quad_tol)
    t_tail = horizon * (1.0 - thresholds.tail_fraction)
    tail = grid >= t_tail
    tt, pt = grid[tail], phi[tail]
    slope, icpt = np.polyfit(tt, pt, 1)
    resid = pt - (slope * tt + icpt)
    spread = float(resid.max() - resid.min())
    length = float(tt[-1] - tt[0])
    if abs(slope) > thresholds.slope_tol and abs(slope) * length > spread:
        label = "asymptotically_stable" if slope < 0 else "unstable"
    else:
        head_max = float(phi[~tail].max()) if (~tail).any() else 0.0
        if pt.max() <= max(head_max, 0.0) + spread + thresholds.slope_tol * length:
            label = "stable"
        else:
            label = "inconclusive"
    return InfectionFreeResult(label, float(slope), spread, tuple(grid.tolist()), tuple(phi.tolist()))
