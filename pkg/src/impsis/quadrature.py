"""Adaptive Gauss-Kronrod quadrature over panel meshes.

Integrands are vectorised: they receive an ndarray of abscissae and must
return an ndarray of the same shape. Caller-supplied breakpoints always
become panel edges, so jump discontinuities of piecewise functions are
never straddled by a rule.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError

# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
_gauss_full = np.zeros(8)
_gauss_full[1::2] = _WG
GAUSS_WEIGHTS = np.concatenate([_gauss_full[:-1], _gauss_full[::-1]])

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    panels: int


def _gk15(f, left, right):
    """Apply the rule on every panel at once. Returns (kronrod, error)."""
    centre = 0.5 * (left + right)
    half = 0.5 * (right - left)
    x = centre[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    kron = fx @ KRONROD_WEIGHTS
    gauss = fx @ GAUSS_WEIGHTS
    mean = 0.5 * kron
    resasc = np.abs(fx - mean[:, None]) @ KRONROD_WEIGHTS
    resabs = np.abs(fx) @ KRONROD_WEIGHTS
    err = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > np.finfo(float).tiny / (50 * _EPS), np.maximum(err, floor), err)
    return kron * half, err * np.abs(half), floor * np.abs(half)


def integrate_panels(f, edges, tol=1e-10, rtol=0.0, max_panels=200_000):
    """Integrate ``f`` over each interval ``[edges[i], edges[i+1]]``.

    Panels are bisected until each one's error estimate is below its share
    (proportional to width) of ``max(tol, rtol * |total|)``.

    Returns ``(values, errors)``, one entry per input interval.
    """
    edges = np.asarray(edges, dtype=float)
    n_int = len(edges) - 1
    if n_int <= 0:
        return np.zeros(0), np.zeros(0)
    if np.any(np.diff(edges) < 0):
        raise ValueError("edges must be non-decreasing")
    span = edges[-1] - edges[0]
    values = np.zeros(n_int)
    errors = np.zeros(n_int)
    if span == 0:
        return values, errors

    left = edges[:-1].copy()
    right = edges[1:].copy()
    owner = np.arange(n_int)
    keep = right > left
    left, right, owner = left[keep], right[keep], owner[keep]
    total_panels = len(left)

    while len(left):
        val, err, roundoff = _gk15(f, left, right)
        if not (np.all(np.isfinite(val)) and np.all(np.isfinite(err))):
            raise QuadratureError("integrand is not finite on the interval",
                                  estimate=math.nan, error=math.inf)
        estimate = math.fsum(values) + math.fsum(val)
        budget = max(tol, rtol * abs(estimate))
        allowed = budget * (right - left) / span
        width_floor = 64 * _EPS * np.maximum(np.abs(left), np.abs(right))
        # a panel whose estimate sits at the rounding floor cannot improve by bisection
        done = (err <= allowed) | (err <= roundoff) | ((right - left) <= width_floor)
        np.add.at(values, owner[done], val[done])
        np.add.at(errors, owner[done], err[done])
        split = ~done
        if not split.any():
            break
        total_panels += int(split.sum())
        if total_panels > max_panels:
            np.add.at(values, owner[split], val[split])
            np.add.at(errors, owner[split], err[split])
            raise QuadratureError(
                f"quadrature did not converge within {max_panels} panels",
                estimate=float(values.sum()),
                error=float(errors.sum()),
            )
        lo, hi, ow = left[split], right[split], owner[split]
        mid = 0.5 * (lo + hi)
        left = np.concatenate([lo, mid])
        right = np.concatenate([mid, hi])
        owner = np.concatenate([ow, ow])
    return values, errors


def adaptive_quad(f, a, b, points=(), tol=1e-10, rtol=0.0, max_panels=200_000):
    """Integral of ``f`` over ``[a, b]`` with ``points`` as forced panel edges."""
    a = float(a)
    b = float(b)
    if b < a:
        raise ValueError("require a <= b")
    inner = sorted({float(p) for p in points if a < p < b})
    edges = np.array([a, *inner, b])
    values, errors = integrate_panels(f, edges, tol=tol, rtol=rtol, max_panels=max_panels)
    return QuadResult(math.fsum(values), math.fsum(errors), len(edges) - 1)


def cumulative_quad(f, nodes, tol=1e-10, rtol=0.0, max_panels=200_000):
    """Running integral of ``f`` from ``nodes[0]`` evaluated at every node."""
    values, _ = integrate_panels(f, nodes, tol=tol, rtol=rtol, max_panels=max_panels)
    out = np.zeros(len(nodes))
    out[1:] = np.cumsum(values)
    return out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def gauss_legendre(f, a, b):
    """Fixed 12-point Gauss-Legendre rule, vectorised over arrays ``a``, ``b``.

    Meant for sub-intervals on which ``f`` is known to be smooth, such as
    the inside of one accepted integrator step.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[..., None] + half[..., None] * _GL_X
    return (np.asarray(f(x)) @ _GL_W) * half
