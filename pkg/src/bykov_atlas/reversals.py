"""Reversal points of the image curve, their progression, tangency candidates and spirals."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FormulaMismatch, NoReversals, Underflow
from .maps import (
    TWO_PI,
    CurveTrace,
    DiskCurve,
    WallPoint,
    _orbit,
    eta,
    eta_log,
    geometry_functions,
    dxds_fd,
    iterated_segment_trace,
    jacobian,
    oracle_reversal_phases,
    principal,
    reversal_functional,
    shear_factor,
    stable_spiral,
    unstable_spiral,
)
from .model import ModelParams

log = logging.getLogger(__name__)

__all__ = [
    "ReversalEvent",
    "TangencyCandidate",
    "find_reversal_phases",
    "reversal_sequence",
    "merged_reversals",
    "progression_check",
    "ProgressionFit",
    "equidistribution",
    "Equidistribution",
    "star_discrepancy",
    "circular_distance",
    "tangency_search",
    "spiral_intersections",
    "SpiralIntersection",
    "cascade_scan",
    "formula_discrepancy_report",
]

UNDERFLOW_S = 1e-300


@dataclass(frozen=True)
class ReversalEvent:
    n: int
    s_n: float
    phi_n: float
    x_lift: float
    kind: str  # "maximum" | "minimum" of x2 as a function of s
    log_s: float
    y: float = float("nan")
    family: int = 0

    @property
    def x_mod2pi(self) -> float:
        return float(np.mod(self.x_lift, TWO_PI))

    def row(self) -> dict:
        return {"n": self.n, "s_n": self.s_n, "phi_n": self.phi_n, "x_lift": self.x_lift,
                "x_mod2pi": self.x_mod2pi, "kind": self.kind}

    CSV_COLUMNS = ("n", "s_n", "phi_n", "x_lift", "x_mod2pi", "kind")


@dataclass(frozen=True)
class TangencyCandidate:
    order: int
    event: ReversalEvent
    stable_line_x: float
    circular_distance: float
    contact_point: WallPoint
    arclen: float = float("nan")
    parent_arclen: float = float("nan")

    def row(self) -> dict:
        return {"order": self.order, "n": self.event.n, "distance": self.circular_distance,
                "x": self.contact_point.x, "y": self.contact_point.y, "arclen": self.arclen}

    CSV_COLUMNS = ("order", "n", "distance", "x", "y", "arclen")


def circular_distance(a, b):
    """Distance between two angles on the circle, in [0, pi]."""
    return np.abs(principal(np.asarray(a) - np.asarray(b))) if np.ndim(a) or np.ndim(b) else abs(principal(a - b))


# ---------------------------------------------------------------------------
# reversal phases

def _kind(phi0: float, params: ModelParams, h: float = 1e-6) -> str:
    # dx2/ds = -D/s and phi decreases with s, so D increasing in phi means a minimum of x2(s)
    dplus = reversal_functional(phi0 + h, params)
    dminus = reversal_functional(phi0 - h, params)
    return "minimum" if dplus > dminus else "maximum"


def find_reversal_phases(params: ModelParams, grid: int = 10_000, xtol: float = 1e-12) -> list[float]:
    """Roots in [0, pi) of the derived reversal functional.

    Sign changes are bracketed on ``grid`` cells and bisected to ``xtol``. Each root
    is then confirmed by a sign change of the finite-differenced composed map across
    it; a root the composition does not confirm raises FormulaMismatch.
    """
    phis = np.arange(grid + 1) * (math.pi / grid)
    d = reversal_functional(phis, params)
    roots: list[float] = []
    scale = abs(params.g1) + abs(params.g2)
    if np.max(np.abs(d)) <= 1e-14 * scale:
        return roots  # x2 is constant along the segment: no isolated reversal
    for i in range(grid):
        lo, hi = float(phis[i]), float(phis[i + 1])
        dlo, dhi = float(d[i]), float(d[i + 1])
        if dlo == 0.0:
            roots.append(lo)
            continue
        if dlo * dhi >= 0.0:
            continue
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            dm = float(reversal_functional(mid, params))
            if dm == 0.0:
                lo = hi = mid
                break
            if (dm < 0) == (dlo < 0):
                lo, dlo = mid, dm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    roots = [r for r in roots if r < math.pi]
    for r in roots:
        _confirm_with_composition(r, params)
    return roots


def _confirm_with_composition(phi0: float, params: ModelParams, delta: float = 1e-4, step: float = 1e-7) -> None:
    # x2 as a function of u = ln s at phases phi0 -/+ delta, pushed one half-turn deep per
    # unit of ln(2 a^2) so the points sit in the section
    m = max(0, math.ceil(params.g1 * math.log(2.0 * params.a ** 2) / math.pi))
    signs = []
    for phi in (phi0 - delta, phi0 + delta):
        u = -(phi + m * math.pi) / params.g1
        xp, _ = eta_log(0.0, u + step, params)
        xm, _ = eta_log(0.0, u - step, params)
        signs.append(np.sign(xp - xm))
    if signs[0] == signs[1]:
        raise FormulaMismatch(phi0, 0.0)


# ---------------------------------------------------------------------------
# reversal sequences

def reversal_sequence(
    phi0: float,
    n_max: int,
    params: ModelParams,
    *,
    x0: float = 0.0,
    log_space: bool = False,
    family: int = 0,
) -> list[ReversalEvent]:
    """Reversal events n = 0..n_max-1 of the phase family phi0 + n*pi.

    s_n = s0 exp(-n pi/g1) with s0 = exp((x0 - phi0)/g1). The x coordinate is taken
    from composing the maps at s_n, never from the progression formula. Members whose
    image leaves Out(sigma2) (only possible for the first few n) are skipped. In the
    default mode s_n below 1e-300 raises Underflow carrying the events so far;
    ``log_space=True`` composes on ln s instead and never underflows.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    g1 = params.g1
    log_s0 = (x0 - phi0) / g1
    kind = _kind(phi0, params)
    events: list[ReversalEvent] = []
    for n in range(n_max):
        log_s = log_s0 - n * math.pi / g1
        phi_n = phi0 + n * math.pi
        if log_space:
            x2, log_y2 = eta_log(x0, log_s, params)
            if log_y2 > 0.0 or log_s > 0.0:
                continue
            s_n = math.exp(log_s)
            events.append(ReversalEvent(n, s_n, phi_n, float(x2), kind, log_s, math.exp(log_y2), family))
            continue
        s_n = math.exp(log_s0) * math.exp(-n * math.pi / g1)
        if s_n < UNDERFLOW_S:
            raise Underflow(n, events)
        if s_n > 1.0:
            continue
        try:
            q = eta(WallPoint(x0, s_n), params)
        except Exception:  # DomainEscape: skip members outside the section
            continue
        events.append(ReversalEvent(n, s_n, phi_n, q.x, kind, log_s, q.y, family))
    return events


def merged_reversals(params: ModelParams, n_max: int, *, x0: float = 0.0, log_space: bool = True) -> list[ReversalEvent]:
    """All phase families interleaved by decreasing s."""
    out: list[ReversalEvent] = []
    for fam, phi0 in enumerate(find_reversal_phases(params)):
        out.extend(reversal_sequence(phi0, n_max, params, x0=x0, log_space=log_space, family=fam))
    out.sort(key=lambda e: -e.log_s)
    return out


@dataclass(frozen=True)
class ProgressionFit:
    slope_fit: float
    intercept: float
    max_abs_residual: float
    expected_slope: float = float("nan")

    @property
    def slope_error(self) -> float:
        return abs(self.slope_fit - self.expected_slope)


def progression_check(events: Sequence[ReversalEvent], gamma: float | None = None) -> ProgressionFit:
    """Least-squares line through (n, x_lift); compare its slope with pi(1 - gamma)."""
    if len(events) < 3:
        raise ValueError("need at least 3 events")
    n = np.array([e.n for e in events], dtype=float)
    x = np.array([e.x_lift for e in events], dtype=float)
    A = np.column_stack([n, np.ones_like(n)])
    (slope, intercept), *_ = np.linalg.lstsq(A, x, rcond=None)
    resid = x - (slope * n + intercept)
    expected = math.pi * (1.0 - gamma) if gamma is not None else float("nan")
    return ProgressionFit(float(slope), float(intercept), float(np.max(np.abs(resid))), expected)


# ---------------------------------------------------------------------------
# equidistribution

def star_discrepancy(u: Iterable[float]) -> float:
    """Exact star discrepancy of points in [0, 1): 1/(2N) + max |u_(i) - (2i-1)/(2N)|."""
    u = np.sort(np.asarray(list(u), dtype=float))
    N = u.size
    if N == 0:
        raise ValueError("no points")
    i = np.arange(1, N + 1)
    return float(1.0 / (2 * N) + np.max(np.abs(u - (2 * i - 1) / (2.0 * N))))


@dataclass(frozen=True)
class Equidistribution:
    star_discrepancy_estimate: float
    histogram: tuple[int, ...]
    n: int


def equidistribution(events: Sequence[ReversalEvent] | Sequence[float], bins: int = 32) -> Equidistribution:
    """Star discrepancy and histogram of the reversal angles reduced mod 2pi."""
    xs = np.array([e.x_lift if isinstance(e, ReversalEvent) else float(e) for e in events])
    if xs.size < 10:
        raise ValueError("need at least 10 events")
    u = np.mod(xs, TWO_PI) / TWO_PI
    u[u >= 1.0] = 0.0
    hist, _ = np.histogram(u, bins=bins, range=(0.0, 1.0))
    return Equidistribution(star_discrepancy(u), tuple(int(h) for h in hist), int(xs.size))


# ---------------------------------------------------------------------------
# tangency candidates

def tangency_search(
    stable_line_x: float,
    phi0: float | Sequence[float] | None,
    n_max: int,
    tol_angle: float,
    params: ModelParams,
    *,
    x0: float = 0.0,
) -> list[TangencyCandidate]:
    """Order-1 reversal points within ``tol_angle`` (mod 2pi) of the vertical stable line.

    The reported distance is the angular offset a perturbation would have to supply
    to turn the near-tangency into a tangency. ``phi0=None`` uses every reversal phase.
    """
    if phi0 is None:
        phases = find_reversal_phases(params)
    elif np.ndim(phi0) == 0:
        phases = [float(phi0)]
    else:
        phases = [float(p) for p in phi0]
    if not phases:
        raise NoReversals()
    out = []
    for fam, ph in enumerate(phases):
        for ev in reversal_sequence(ph, n_max, params, x0=x0, log_space=True, family=fam):
            d = float(circular_distance(ev.x_lift, stable_line_x))
            if d <= tol_angle:
                out.append(TangencyCandidate(1, ev, stable_line_x, d, WallPoint(ev.x_lift, ev.y)))
    out.sort(key=lambda c: (c.circular_distance, c.event.family, c.event.n))
    return out


# ---------------------------------------------------------------------------
# spiral intersections in In(sigma2)

@dataclass(frozen=True)
class SpiralIntersection:
    point: "DiskPointLike"
    angle_between: float
    s_stable: float
    s_unstable: float
    tangential: bool
    overlap: bool = False

    def row(self) -> dict:
        return {"r": self.point.r, "phi": self.point.phi, "angle_between": self.angle_between,
                "s_stable": self.s_stable, "s_unstable": self.s_unstable,
                "tangential": self.tangential, "overlap": self.overlap}


from .maps import DiskPoint as DiskPointLike  # noqa: E402


def _curve_grid(smin: float, smax: float, turns_rate: float, dtheta: float, min_samples: int) -> np.ndarray:
    n = max(min_samples, int(math.ceil(abs(turns_rate) * math.log(smax / smin) / dtheta)) + 1)
    return np.exp(np.linspace(math.log(smax), math.log(smin), n))


def _stable_xy(x_s, log_s, params):
    r = np.exp(0.5 * log_s)
    th = x_s + 0.5 * params.g2 * log_s
    return np.column_stack([r * np.cos(th), r * np.sin(th)]) if np.ndim(log_s) else np.array([r * math.cos(th), r * math.sin(th)])


def _unstable_xy(x0, log_s, params):
    # psi12 in Cartesian form: (a r cos phi, r sin phi / a)
    phi = x0 - params.g1 * log_s
    r = np.exp(0.5 * log_s)
    a = params.a
    if np.ndim(log_s):
        return np.column_stack([a * r * np.cos(phi), r * np.sin(phi) / a])
    return np.array([a * r * math.cos(phi), r * math.sin(phi) / a])


def _segment_hits(P: np.ndarray, Q: np.ndarray, chunk: int = 256, par_tol: float = 1e-9):
    """Candidate crossings between polylines P and Q (bounding-box pruned).

    Returns (transversal, collinear) where transversal holds (i, j, t, u) with
    P[i] + t dP = Q[j] + u dQ, and collinear holds index pairs of overlapping,
    parallel segments.
    """
    p0, p1 = P[:-1], P[1:]
    q0, q1 = Q[:-1], Q[1:]
    dq = q1 - q0
    qmin = np.minimum(q0, q1)
    qmax = np.maximum(q0, q1)
    trans, coll = [], []
    for start in range(0, len(p0), chunk):
        a0 = p0[start:start + chunk]
        a1 = p1[start:start + chunk]
        amin = np.minimum(a0, a1)
        amax = np.maximum(a0, a1)
        box = (
            (amin[:, None, 0] <= qmax[None, :, 0]) & (amax[:, None, 0] >= qmin[None, :, 0])
            & (amin[:, None, 1] <= qmax[None, :, 1]) & (amax[:, None, 1] >= qmin[None, :, 1])
        )
        ii, jj = np.nonzero(box)
        if ii.size == 0:
            continue
        da = (a1 - a0)[ii]
        db = dq[jj]
        w = q0[jj] - a0[ii]
        den = da[:, 0] * db[:, 1] - da[:, 1] * db[:, 0]
        la = np.hypot(da[:, 0], da[:, 1])
        lb = np.hypot(db[:, 0], db[:, 1])
        parallel = np.abs(den) <= par_tol * la * lb
        # collinear: q0 on the line through the P segment
        off = np.abs(w[:, 0] * da[:, 1] - w[:, 1] * da[:, 0]) / np.maximum(la, 1e-300)
        collinear = parallel & (off <= par_tol * np.maximum(la, lb))
        for k in np.nonzero(collinear)[0]:
            coll.append((start + int(ii[k]), int(jj[k])))
        ok = ~parallel
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[:, 0] * db[:, 1] - w[:, 1] * db[:, 0]) / den
            u = (w[:, 0] * da[:, 1] - w[:, 1] * da[:, 0]) / den
        hit = ok & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
        for k in np.nonzero(hit)[0]:
            trans.append((start + int(ii[k]), int(jj[k]), float(t[k]), float(u[k])))
    return trans, coll


def _tangent(fn, ls, h=1e-6):
    return (fn(ls + h) - fn(ls - h)) / (2 * h)


def _angle_between(t1, t2) -> float:
    c = abs(float(np.dot(t1, t2))) / (np.linalg.norm(t1) * np.linalg.norm(t2))
    return float(math.acos(min(1.0, c)))


def spiral_intersections(
    stable_segment: tuple[float, float, float],
    unstable_segment: tuple[float, float, float],
    params: ModelParams,
    *,
    dtheta: float = 0.01,
    min_samples: int = 2000,
    tol: float = 1e-10,
    tangent_angle: float = 1e-3,
) -> list[SpiralIntersection]:
    """Intersections in In(sigma2) of the two spirals built from vertical segments.

    ``stable_segment = (x_s, s_min, s_max)`` is a vertical piece of W^s(sigma1) in
    Out(sigma2), pulled back by phi2; ``unstable_segment = (x0, s_min, s_max)`` is a
    vertical piece of W^u(sigma2) in In(sigma1), pushed through phi1 and psi12.
    Crossings are bracketed between the sampled polylines and polished by Newton
    iteration on (ln s_stable, ln s_unstable) to ``tol``. Collinear overlaps (the
    curves coincide on an arc) are reported once per run with angle 0.
    """
    x_s, s1min, s1max = stable_segment
    x0, s2min, s2max = unstable_segment
    g1, g2 = params.g1, params.g2
    # S2 winds at g1 per unit of ln s and is stretched by up to a; S1 winds at |g2|/2
    grid1 = _curve_grid(s1min, s1max, 0.5 * g2, dtheta, min_samples)
    grid2 = _curve_grid(s2min, s2max, g1 * max(1.0, params.a ** 2), dtheta, min_samples)
    ls1, ls2 = np.log(grid1), np.log(grid2)
    P = _stable_xy(x_s, ls1, params)
    Q = _unstable_xy(x0, ls2, params)
    trans, coll = _segment_hits(P, Q)

    f1 = lambda v: _stable_xy(x_s, v, params)  # noqa: E731
    f2 = lambda v: _unstable_xy(x0, v, params)  # noqa: E731
    lo1, hi1 = math.log(s1min), math.log(s1max)
    lo2, hi2 = math.log(s2min), math.log(s2max)

    found: list[SpiralIntersection] = []
    for i, j, t, u in trans:
        a = ls1[i] + t * (ls1[i + 1] - ls1[i])
        b = ls2[j] + u * (ls2[j + 1] - ls2[j])
        for _ in range(50):
            F = f1(a) - f2(b)
            if np.max(np.abs(F)) <= tol:
                break
            J = np.column_stack([_tangent(f1, a), -_tangent(f2, b)])
            try:
                da, db = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                break
            a, b = a + da, b + db
        F = f1(a) - f2(b)
        if not (np.max(np.abs(F)) <= tol and lo1 - 1e-9 <= a <= hi1 + 1e-9 and lo2 - 1e-9 <= b <= hi2 + 1e-9):
            continue
        xy = f1(a)
        ang = _angle_between(_tangent(f1, a), _tangent(f2, b))
        pt = DiskPointLike(float(math.hypot(*xy)), float(x_s + 0.5 * g2 * a))
        if any(abs(math.exp(a) - h.s_stable) <= 1e-9 * h.s_stable and abs(math.exp(b) - h.s_unstable) <= 1e-9 * h.s_unstable
               for h in found):
            continue
        found.append(SpiralIntersection(pt, ang, float(math.exp(a)), float(math.exp(b)), ang < tangent_angle))

    # one record per run of consecutive collinear segment pairs
    coll.sort()
    prev = None
    for i, j in coll:
        if prev is not None and abs(i - prev[0]) <= 1 and abs(j - prev[1]) <= 1:
            prev = (i, j)
            continue
        prev = (i, j)
        xy = P[i]
        ang = _angle_between(P[i + 1] - P[i], Q[j + 1] - Q[j])
        pt = DiskPointLike(float(math.hypot(*xy)), float(x_s + 0.5 * g2 * ls1[i]))
        found.append(SpiralIntersection(pt, ang, float(grid1[i]), float(grid2[j]), True, overlap=True))
    found.sort(key=lambda h: (-h.s_stable, -h.s_unstable))
    return found


# ---------------------------------------------------------------------------
# cascade of higher-order tangencies

def _refine_reversal(x0, s_hi, s_lo, k, params, rel=1e-13):
    """Bisect (in ln s) for the zero of the chain-rule dx/ds of passage k."""
    def slope(s):
        orb = _orbit(x0, s, k, params)
        return orb[k - 1][1][0] if len(orb) >= k else float("nan")

    a, b = math.log(s_lo), math.log(s_hi)
    fa = slope(s_lo)
    for _ in range(200):
        if b - a <= rel:
            break
        m = 0.5 * (a + b)
        fm = slope(math.exp(m))
        if not math.isfinite(fm):
            return None
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return math.exp(0.5 * (a + b))


def _arclen(x0, s_star, s_top, k, params, s_samples) -> tuple[float, float]:
    """Chart arc length of passages 1..k (and 1..k-1) of the sub-segment [s_star, s_top]."""
    ss = sorted({s_star, s_top} | {s for s in s_samples if s_star <= s <= s_top}, reverse=True)
    pts = [_orbit(x0, s, k, params) for s in ss]
    pts = [o for o in pts if len(o) >= k]
    total = [0.0] * k
    for o1, o2 in zip(pts[:-1], pts[1:]):
        for j in range(k):
            p, q = o1[j][0], o2[j][0]
            total[j] += math.hypot(p.x - q.x, p.y - q.y)
    return float(sum(total)), float(sum(total[:-1]))


def cascade_scan(
    k_max: int,
    stable_line_x: float,
    tol_angle: float,
    params: ModelParams,
    *,
    x0: float = 0.0,
    s_grid: Sequence[float] | None = None,
) -> dict[int, list[TangencyCandidate]]:
    """Near-tangency candidates of orders 1..k_max on the iterated image of the segment.

    On every surviving piece of the order-k trace, reversals are bracketed by a sign
    change of the finite-differenced x lift and polished by bisection on the chain-rule
    derivative. Each candidate carries the chart arc length of its k passages along
    the sub-segment from the top of its piece (``arclen``) and of the first k-1
    passages (``parent_arclen``), the stand-in for a connection's length near the cycle.
    """
    if not 1 <= k_max <= 3:
        raise ValueError("k_max must be in 1..3")
    if s_grid is None:
        s_grid = np.exp(np.linspace(0.0, -6.0 * math.pi, 4000))
    traces = iterated_segment_trace(x0, s_grid, k_max, params)
    out: dict[int, list[TangencyCandidate]] = {}
    for k, trace in enumerate(traces, start=1):
        cands = []
        n_idx = 0
        for piece in trace.pieces():
            s = piece.s
            x = piece.x
            if s.size < 3:
                continue
            # s descends along the piece
            dx = np.diff(x) / np.diff(s)
            for i in range(dx.size - 1):
                if dx[i] == 0.0 or dx[i] * dx[i + 1] >= 0.0:
                    continue
                root = _refine_reversal(x0, float(s[i]), float(s[i + 2]), k, params)
                if root is None:
                    continue
                orb = _orbit(x0, root, k, params)
                q = orb[k - 1][0]
                d = float(circular_distance(q.x, stable_line_x))
                if d <= tol_angle:
                    kind = "maximum" if dx[i] < 0 else "minimum"
                    ev = ReversalEvent(n_idx, root, float("nan"), q.x, kind, math.log(root), q.y)
                    al, parent = _arclen(x0, root, float(s[0]), k, params, s)
                    cands.append(TangencyCandidate(k, ev, stable_line_x, d, q, al, parent))
                n_idx += 1
        cands.sort(key=lambda c: -c.event.s_n)
        out[k] = cands
    return out


# ---------------------------------------------------------------------------
# printed formulas against the composition

def _verdict(printed: np.ndarray, reference: np.ndarray, rtol: float) -> tuple[str, float]:
    scale = np.maximum(np.abs(reference), 1e-300)
    dev = float(np.max(np.abs(printed - reference) / scale))
    if dev <= rtol:
        return "matches", dev
    ratio = printed / np.where(reference == 0, np.nan, reference)
    ratio = ratio[np.isfinite(ratio)]
    if ratio.size and np.max(np.abs(ratio - np.median(ratio))) <= rtol * max(1.0, abs(np.median(ratio))):
        c = float(np.median(ratio))
        return ("sign-off" if abs(c + 1.0) <= rtol else "constant-factor-off"), dev
    return "mismatch", dev


def _phase_roots(fn, grid: int = 10_000) -> list[float]:
    phis = np.arange(grid + 1) * (math.pi / grid)
    v = fn(phis)
    roots = []
    for i in range(grid):
        if v[i] == 0.0 or v[i] * v[i + 1] < 0.0:
            lo, hi = phis[i], phis[i + 1]
            flo = v[i]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = fn(mid)
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(float(0.5 * (lo + hi)))
    return roots


def _same_roots(a: list[float], b: list[float], tol: float) -> bool:
    return len(a) == len(b) and all(abs(x - y) <= tol for x, y in zip(sorted(a), sorted(b)))


def formula_discrepancy_report(
    params: ModelParams,
    sample_grid: Sequence[float] | None = None,
    *,
    n_trace_points: int = 100,
    seed: int = 0,
    rtol: float = 1e-5,
) -> dict:
    """Compare the printed dx2/ds, A(phi) and trace expressions with the composition.

    (i) dx2/ds along the vertical segment: printed (factor 2 g1 g2), derived, and
        central differences of the composed map at the heights in ``sample_grid``;
    (ii) phases where A_printed equals -/+ alpha1 E2/alpha2 and where A_derived equals
         +alpha1 E2/alpha2, against the finite-difference reversal oracle;
    (iii) the printed trace expression of the return map (with either A) against the
          chain-rule trace at random points.
    """
    s = params.saddle
    K = params.shear
    if sample_grid is None:
        sample_grid = np.exp(np.linspace(-1.0, -12.0, 200))
    s_arr = np.asarray(list(sample_grid), dtype=float)
    phis = -params.g1 * np.log(s_arr)
    C = shear_factor(phis, params.a)
    sc = np.sin(phis) * np.cos(phis)
    printed = -(1.0 / s_arr) * (0.5 * params.g2 + (1.0 / C) * (2 * params.g1 * params.g2 * K * sc + params.g1))
    derived = -reversal_functional(phis, params) / s_arr
    fd = []
    keep = []
    for i, sv in enumerate(s_arr):
        try:
            fd.append(dxds_fd(0.0, float(sv), params))
            keep.append(i)
        except Exception:
            continue
    keep = np.array(keep, dtype=int)
    fd = np.array(fd)
    # reversal neighbourhoods make relative comparisons meaningless; skip them
    scale = np.max(np.abs(fd)) if fd.size else 1.0
    away = np.abs(fd) * s_arr[keep] > 1e-3 * (np.max(np.abs(fd * s_arr[keep])) if fd.size else 1.0)
    v_der, dev_der = _verdict(derived[keep][away], fd[away], rtol) if np.any(away) else ("mismatch", float("nan"))
    v_pr, dev_pr = _verdict(printed[keep][away], fd[away], rtol) if np.any(away) else ("mismatch", float("nan"))
    del scale

    rhs = s.alpha1 * s.E2 / s.alpha2
    a = params.a

    def a_printed(ph):
        return s.E1 * a * a * np.cos(ph) ** 2 + s.E1 / (a * a) * np.sin(ph) ** 2 + s.alpha1 * K * np.sin(ph) * np.cos(ph)

    def a_derived(ph):
        return 0.5 * s.E1 * shear_factor(ph, a) + s.alpha1 * K * np.sin(ph) * np.cos(ph)

    oracle = oracle_reversal_phases(params)
    roots_minus = _phase_roots(lambda ph: a_printed(ph) + rhs)
    roots_plus = _phase_roots(lambda ph: a_printed(ph) - rhs)
    roots_derived = _phase_roots(lambda ph: a_derived(ph) - rhs)
    rtol_phase = 2.0 * math.pi / 10_000

    def root_verdict(roots):
        if _same_roots(roots, oracle, rtol_phase):
            return "matches"
        return "mismatch"

    v_minus = root_verdict(roots_minus)
    v_plus = root_verdict(roots_plus)
    if v_minus != "matches" and v_plus == "matches":
        v_minus = "sign-off"

    # (iii) trace of the return map
    rng = np.random.default_rng(seed)
    tr_chain, tr_printed, tr_printed_derived = [], [], []
    while len(tr_chain) < n_trace_points:
        x = float(rng.uniform(-math.pi, math.pi))
        y = float(math.exp(rng.uniform(math.log(1e-6), 0.0)))
        try:
            J = jacobian("return_map", WallPoint(x, y), params)
        except Exception:
            continue
        ph = x - params.g1 * math.log(y)
        Cp = float(shear_factor(ph, a))
        base = 2 * y * K * math.sin(ph) * math.cos(ph)
        coef = (1.0 / y) * s.alpha2 / (s.E1 * s.E2 * Cp)
        tr_chain.append(J.trace)
        tr_printed.append(base + coef * (float(a_printed(ph)) - rhs))
        tr_printed_derived.append(base + coef * (float(a_derived(ph)) - rhs))
    tr_chain = np.array(tr_chain)
    v_tr, dev_tr = _verdict(np.array(tr_printed), tr_chain, rtol)
    v_trd, dev_trd = _verdict(np.array(tr_printed_derived), tr_chain, rtol)

    return {
        "params": {"alpha1": s.alpha1, "C1": s.C1, "E1": s.E1, "alpha2": s.alpha2, "E2": s.E2,
                   "C2": s.C2, "a": params.a, "rotation": params.glob.rotation},
        "dxds": {
            "samples": int(keep.size),
            "compared_away_from_reversals": int(np.sum(away)),
            "derived_vs_fd": {"verdict": v_der, "max_rel_dev": dev_der},
            "printed_vs_fd": {"verdict": v_pr, "max_rel_dev": dev_pr},
        },
        "reversal_condition": {
            "rhs": rhs,
            "oracle_phases": oracle,
            "A_printed_eq_minus_rhs": {"roots": roots_minus, "verdict": v_minus},
            "A_printed_eq_plus_rhs": {"roots": roots_plus, "verdict": v_plus},
            "A_derived_eq_plus_rhs": {"roots": roots_derived, "verdict": root_verdict(roots_derived)},
            "A_printed_range": [float(np.min(a_printed(np.linspace(0, math.pi, 10_001)))),
                                float(np.max(a_printed(np.linspace(0, math.pi, 10_001))))],
        },
        "trace": {
            "points": int(tr_chain.size),
            "printed_with_A_printed": {"verdict": v_tr, "max_rel_dev": dev_tr},
            "printed_with_A_derived": {"verdict": v_trd, "max_rel_dev": dev_trd},
        },
    }
