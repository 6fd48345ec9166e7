"""Closed-form solution oracles evaluated along a computed trajectory.

Each smooth segment of the trajectory (between two impulses) is cut into
short intervals at the integrator's step nodes, the requested times and the
coefficient breakpoints. On every interval the integrands are sampled at
Chebyshev-Lobatto points of the dense output and turned into Chebyshev
antiderivatives, which gives running integrals at any inner point without
nested adaptive quadrature.

Linear scalar equations y' = c(t) y + s(t) are advanced interval by
interval with the exact local kernel exp(int c), so no global exponential
(which would overflow) is ever formed.

Conventions, for one segment started at time t0 with I(t0) = I0:

    B(t) = int (beta S - d - gamma)          I(t) = I0 exp(B)
    A(t) = int r (1 - G/p)                   N' = a N - (a + d) I
    C(t) = int (a - beta I0 exp(B))          S(t) = exp(C) S0 + Psi12 I0
    Psi12(t) = int exp(C(t) - C(s)) gamma(s) exp(B(s)) ds
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import brentq

from .errors import DomainError
from .paramfns import bounds_over

_M = 24  # Lobatto points per interval
_U = np.cos(np.pi * np.arange(_M)[::-1] / (_M - 1))  # ascending on [-1, 1]
_VINV = np.linalg.inv(cheb.chebvander(_U, _M - 1))


def _cheb_eval(coef, u):
    """Clenshaw evaluation; ``coef`` (..., K), ``u`` broadcastable to coef[..., 0]."""
    b1 = np.zeros(np.broadcast(coef[..., 0], u).shape)
    b2 = np.zeros_like(b1)
    for k in range(coef.shape[-1] - 1, 0, -1):
        b1, b2 = coef[..., k] + 2.0 * u * b1 - b2, b1
    return coef[..., 0] + u * b1 - b2


class _Grid:
    """Interval mesh of one segment with Chebyshev sampling on each interval."""

    def __init__(self, seg, params, extra_times, min_period):
        edges = np.union1d(seg.t, [x for x in extra_times if seg.t0 < x < seg.t1])
        if min_period is not None:
            h_lim = min_period / 8.0
            pieces = [edges[:1]]
            for a, b in zip(edges[:-1], edges[1:]):
                n = max(1, int(math.ceil((b - a) / h_lim)))
                pieces.append(np.linspace(a, b, n + 1)[1:] if n > 1 else np.array([b]))
            edges = np.concatenate(pieces)
        self.edges = edges
        self.left = edges[:-1]
        self.half = 0.5 * np.diff(edges)
        self.mid = 0.5 * (edges[:-1] + edges[1:])
        x = self.mid[:, None] + self.half[:, None] * _U[None, :]
        x[:, 0] = self.left
        x[:, -1] = edges[1:]
        # coefficients are sampled just inside each interval so a jump on an edge
        # is read from the piece that owns the interval
        xin = x.copy()
        span = np.maximum(np.abs(x), 1.0)
        xin[:, 0] = np.minimum(x[:, 0] + 8 * np.finfo(float).eps * span[:, 0], self.mid)
        xin[:, -1] = np.maximum(x[:, -1] - 8 * np.finfo(float).eps * span[:, -1], self.mid)
        self.x = x
        y = seg.dense(x)
        self.S = y[..., 0]
        self.I = y[..., 1]
        self.v = params.values(xin)

    def antiderivative(self, vals):
        """Chebyshev coefficients of the running integral from each interval's left edge."""
        coef = vals @ _VINV.T
        integ = cheb.chebint(coef, lbnd=-1, axis=1) * self.half[:, None]
        return integ

    def at_nodes(self, integ):
        """Running integral at every sample node and the full-interval increments."""
        V = cheb.chebvander(_U, integ.shape[1] - 1)
        return integ @ V.T

    def locate(self, t):
        t = np.asarray(t, dtype=float)
        j = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.edges) - 2)
        return j


@dataclass(frozen=True)
class _SegmentOracle:
    edges: np.ndarray
    I_cf: np.ndarray     # at edges
    N_cf: np.ndarray
    psi11: np.ndarray
    psi12: np.ndarray
    psi22: np.ndarray
    amplification: np.ndarray  # magnitude of the largest term in the N formula over |N|


def _propagate(grid, rate_nodes, source_nodes):
    """Solve y' = rate y + source, y(left edge of segment) = 0, at every edge."""
    R = grid.at_nodes(grid.antiderivative(rate_nodes))
    dR = R[:, -1]
    kernel = np.exp(dR[:, None] - R) * source_nodes
    K = grid.at_nodes(grid.antiderivative(kernel))[:, -1]
    grow = np.exp(dR)
    y = np.empty(len(grid.edges))
    y[0] = 0.0
    acc = 0.0
    for j in range(len(K)):
        acc = grow[j] * acc + K[j]
        y[j + 1] = acc
    return y, R


def _segment(seg, params, S0, I0, extra, min_period):
    g = _Grid(seg, params, extra, min_period)
    v = g.v
    G = v.delta1 * g.S + v.delta2 * g.I
    a = v.r * (1.0 - G / v.p)
    inc = v.beta * g.S - v.d - v.gamma
    B_loc = g.at_nodes(g.antiderivative(inc))
    A_loc = g.at_nodes(g.antiderivative(a))
    B_edge = np.concatenate([[0.0], np.cumsum(B_loc[:, -1])])
    A_edge = np.concatenate([[0.0], np.cumsum(A_loc[:, -1])])
    B_nodes = B_edge[:-1, None] + B_loc
    I_nodes = I0 * np.exp(B_nodes)
    psi22 = np.exp(B_edge)
    I_cf = I0 * psi22
    # total population: N' = a N - (a + d) I
    Y, _ = _propagate(g, a, (a + v.d) * I_nodes)
    free = (S0 + I0) * np.exp(A_edge)
    N_cf = free - Y
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.where(N_cf != 0, np.maximum(np.abs(free), np.abs(Y)) / np.abs(N_cf), 1.0)
    # susceptible propagator
    crate = a - v.beta * I_nodes
    C_loc = g.at_nodes(g.antiderivative(crate))
    C_edge = np.concatenate([[0.0], np.cumsum(C_loc[:, -1])])
    psi12, _ = _propagate(g, crate, v.gamma * np.exp(B_nodes))
    psi11 = np.exp(C_edge)
    return g, _SegmentOracle(g.edges, I_cf, N_cf, psi11, psi12, psi22, amp)


def _min_period(params):
    periods = [p for f in params.functions().values() for p in f.periods()]
    return min(periods) if periods else None


@dataclass(frozen=True)
class OracleValues:
    t: np.ndarray
    I: np.ndarray
    N: np.ndarray
    psi: np.ndarray          # (n, 2, 2), maps the initial (pre-impulse) state to x(t)
    amplification: np.ndarray


def evaluate_oracles(traj, params, times):
    """Closed-form I, N and the fundamental matrix at ``times``.

    Across impulses the closed forms are chained through the impulse map
    applied to their own values, so they never read the integrator's state
    except at t = 0. At an impulse instant the post-impulse value is returned.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(times > traj.horizon):
        raise DomainError(f"oracle times must lie in [0, {traj.horizon}]")
    min_period = _min_period(params)
    out_I = np.full(len(times), np.nan)
    out_N = np.full(len(times), np.nan)
    out_psi = np.full((len(times), 2, 2), np.nan)
    out_amp = np.full(len(times), np.nan)
    recs = {r.t: r for r in traj.impulse_records}

    S0, I0 = traj.initial
    # composed map from the true initial state to the current segment start
    M = np.eye(2)
    if 0.0 in recs:
        r0 = recs[0.0]
        S0, I0 = (1 - r0.p) * S0, (1 - r0.q) * I0
        M = np.diag([1 - r0.p, 1 - r0.q])
    seg_owner = np.array([traj.segment_index(t) for t in times], dtype=int)
    for k, seg in enumerate(traj.segments):
        mine = seg_owner == k
        grid, so = _segment(seg, params, S0, I0, times[mine], min_period)
        idx = np.searchsorted(so.edges, times[mine])
        idx = np.clip(idx, 0, len(so.edges) - 1)
        out_I[mine] = so.I_cf[idx]
        out_N[mine] = so.N_cf[idx]
        out_amp[mine] = so.amplification[idx]
        for pos, j in zip(np.nonzero(mine)[0], idx):
            P = np.array([[so.psi11[j], so.psi12[j]], [0.0, so.psi22[j]]])
            out_psi[pos] = P @ M
        Iend, Nend = so.I_cf[-1], so.N_cf[-1]
        Pend = np.array([[so.psi11[-1], so.psi12[-1]], [0.0, so.psi22[-1]]])
        rec = recs.get(seg.t1)
        if rec is not None:
            Send = Nend - Iend
            S0, I0 = (1 - rec.p) * Send, (1 - rec.q) * Iend
            D = np.diag([1 - rec.p, 1 - rec.q])
            M = D @ Pend @ M
            at_imp = times == seg.t1
            if at_imp.any() and k == len(traj.segments) - 1:
                out_I[at_imp] = I0
                out_N[at_imp] = S0 + I0
                out_psi[at_imp] = M
                out_amp[at_imp] = so.amplification[-1]
    return OracleValues(times, out_I, out_N, out_psi, out_amp)


def closed_form_I(traj, params, t):
    vals = evaluate_oracles(traj, params, t).I
    return float(vals[0]) if np.ndim(t) == 0 else vals


def closed_form_N(traj, params, t):
    vals = evaluate_oracles(traj, params, t).N
    return float(vals[0]) if np.ndim(t) == 0 else vals


@dataclass(frozen=True)
class FundamentalMatrix:
    psi11: float
    psi12: float
    psi22: float
    t: float

    @property
    def psi21(self):
        return 0.0

    def matrix(self):
        return np.array([[self.psi11, self.psi12], [0.0, self.psi22]])


def reconstruct_fundamental_matrix(traj, params, t):
    P = evaluate_oracles(traj, params, [t]).psi[0]
    return FundamentalMatrix(float(P[0, 0]), float(P[0, 1]), float(P[1, 1]), float(t))


@dataclass(frozen=True)
class OracleResiduals:
    times: Tuple[float, ...]
    residual_I: float
    residual_N: float
    residual_psi: float
    max_amplification: float


def oracle_residuals(traj, params, times, floor=None):
    """Largest relative mismatch between oracles and the trajectory at ``times``."""
    vals = evaluate_oracles(traj, params, times)
    floor = 1e-9 * (1.0 + traj.initial.N) if floor is None else floor
    states = np.array([traj.state_at(float(t)) for t in vals.t])
    S, I = states[:, 0], states[:, 1]
    N = S + I
    rI = np.abs(vals.I - I) / np.maximum(np.abs(I), floor)
    rN = np.abs(vals.N - N) / np.maximum(np.abs(N), floor)
    x0 = np.array(traj.initial)
    rec = vals.psi @ x0
    err = np.hypot(rec[:, 0] - S, rec[:, 1] - I)
    rP = err / np.maximum(np.hypot(S, I), floor)
    return OracleResiduals(tuple(vals.t.tolist()), float(np.max(rI)), float(np.max(rN)), float(np.max(rP)),
                           float(np.nanmax(vals.amplification)))


# sign structure of the recovery rate

@dataclass(frozen=True)
class SignPartition:
    pos_intervals: Tuple[Tuple[float, float], ...]
    neg_intervals: Tuple[Tuple[float, float], ...]
    zero_intervals: Tuple[Tuple[float, float], ...]

    def measure(self):
        return math.fsum(b - a for group in (self.pos_intervals, self.neg_intervals, self.zero_intervals)
                         for a, b in group)

    def boundaries(self):
        return sorted({x for group in (self.pos_intervals, self.neg_intervals, self.zero_intervals)
                       for iv in group for x in iv})


def sign_partition(f, t0, t1, samples=64):
    """Split ``[t0, t1]`` into maximal intervals where ``f`` is positive, negative or zero."""
    if t1 < t0:
        raise DomainError(f"need t0 <= t1, got [{t0}, {t1}]")
    cuts = [t0, *[b for b in f.breakpoints() if t0 < b < t1], t1]
    labelled = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        g = f.restrict(a, b)._value
        lo, hi = f.restrict(a, b)._bounds(a, b)
        if lo > 0:
            labelled.append((a, b, 1))
            continue
        if hi < 0:
            labelled.append((a, b, -1))
            continue
        if lo == 0 and hi == 0:
            labelled.append((a, b, 0))
            continue
        xs = np.linspace(a, b, samples + 1)
        ys = np.asarray(g(xs), dtype=float)
        roots = []
        for x0, x1, y0, y1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
            if y0 == 0 and x0 > a:
                roots.append(x0)
            elif y0 * y1 < 0:
                roots.append(brentq(g, x0, x1, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        pts = [a, *sorted(set(roots)), b]
        for u, w in zip(pts[:-1], pts[1:]):
            if w <= u:
                continue
            m = g(0.5 * (u + w))
            labelled.append((u, w, int(np.sign(m))))
    merged = []
    for a, b, s in labelled:
        if merged and merged[-1][2] == s and merged[-1][1] == a:
            merged[-1] = (merged[-1][0], b, s)
        else:
            merged.append((a, b, s))
    pick = lambda s: tuple((a, b) for a, b, z in merged if z == s)
    return SignPartition(pick(1), pick(-1), pick(0))


@dataclass(frozen=True)
class NegativeRecoveryBalance:
    times: np.ndarray
    sup_negative: np.ndarray   # running sup of |gamma| over the negative set
    allowance: np.ndarray      # right-hand side; inf when the negative set is empty
    satisfied: bool


def negative_recovery_balance(traj, params):
    """Sufficient condition for S >= 0 when the recovery rate may turn negative.

    With the kernel k(t, s) = exp(C(t) - C(s)) exp(B(s)), positivity of S(t)
    follows from

        sup_{s<t, gamma<0} |gamma(s)| * int_{gamma<0} k
            <= exp(C(t)) S0/I0 + int_{gamma>0} k gamma.

    Evaluated at every step node of every segment, restarting at impulses
    from the trajectory's post-impulse state.
    """
    out_t, out_lhs, out_rhs = [], [], []
    min_period = _min_period(params)
    for seg in traj.segments:
        S0, I0 = seg.y[0]
        part = sign_partition(params.gamma, seg.t0, seg.t1)
        g = _Grid(seg, params, part.boundaries(), min_period)
        v = g.v
        G = v.delta1 * g.S + v.delta2 * g.I
        a = v.r * (1.0 - G / v.p)
        inc = v.beta * g.S - v.d - v.gamma
        B_loc = g.at_nodes(g.antiderivative(inc))
        B_edge = np.concatenate([[0.0], np.cumsum(B_loc[:, -1])])
        eB = np.exp(B_edge[:-1, None] + B_loc)
        crate = a - v.beta * I0 * eB
        C_loc = g.at_nodes(g.antiderivative(crate))
        C_edge = np.concatenate([[0.0], np.cumsum(C_loc[:, -1])])
        sgn = np.sign(v.gamma[:, _M // 2])[:, None]  # constant on each interval
        P, _ = _propagate(g, crate, np.where(sgn > 0, v.gamma, 0.0) * eB)
        Q, _ = _propagate(g, crate, np.where(sgn < 0, 1.0, 0.0) * eB)
        # running sup of |gamma| on the negative set, from analytic bounds per interval
        neg = np.zeros(len(g.edges))
        worst = 0.0
        for j, (lo_e, hi_e) in enumerate(zip(g.edges[:-1], g.edges[1:])):
            if sgn[j, 0] < 0:
                lo, _ = params.gamma.restrict(lo_e, hi_e)._bounds(lo_e, hi_e)
                worst = max(worst, -lo)
            neg[j + 1] = worst
        if I0 > 0:
            num = np.exp(C_edge) * S0 / I0 + P
            with np.errstate(divide="ignore"):
                rhs = np.where(Q > 0, num / np.where(Q > 0, Q, 1.0), np.inf)
        else:
            rhs = np.full(len(g.edges), np.inf)
        out_t.append(g.edges)
        out_lhs.append(neg)
        out_rhs.append(rhs)
    t = np.concatenate(out_t)
    lhs = np.concatenate(out_lhs)
    rhs = np.concatenate(out_rhs)
    return NegativeRecoveryBalance(t, lhs, rhs, bool(np.all(lhs <= rhs)))
