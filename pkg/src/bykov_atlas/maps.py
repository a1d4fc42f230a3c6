"""Cross-section maps near the cycle and their compositions.

Wall sections carry ``(x, y)`` with ``x`` an angle kept as an unbounded lift and
``y`` the height; disk sections carry polar ``(r, phi)`` with ``phi`` lifted too.
Angles are only reduced mod 2*pi for display and for the return to In(sigma1),
which acts on the principal-value chart around the transverse connection.

Most scalar helpers are written with numpy ufuncs so that they accept arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainEscape, Extinct, FormulaMismatch, NearSingular
from .model import ModelParams

__all__ = [
    "WallPoint",
    "DiskPoint",
    "Jacobian2",
    "TraceSample",
    "CurveTrace",
    "DiskCurve",
    "GeometryValues",
    "shear_factor",
    "shear_factor_prime",
    "shear_lift",
    "principal",
    "reversal_functional",
    "phi1",
    "phi2",
    "phi2_inverse",
    "psi12",
    "psi21",
    "eta",
    "eta_closed_form",
    "eta_log",
    "return_map",
    "jacobian",
    "fd_jacobian",
    "geometry_functions",
    "segment_trace",
    "dxds_fd",
    "iterated_segment_trace",
    "phi1_image",
    "stable_spiral",
    "unstable_spiral",
    "spiral_diagnostics",
    "SpiralDiagnostics",
    "oracle_reversal_phases",
]

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class WallPoint:
    x: float
    y: float


@dataclass(frozen=True)
class DiskPoint:
    r: float
    phi: float


@dataclass(frozen=True)
class Jacobian2:
    """2x2 matrix of partials; row = output coordinate, column = input coordinate."""

    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @classmethod
    def from_array(cls, m) -> "Jacobian2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def __matmul__(self, other: "Jacobian2") -> "Jacobian2":
        return Jacobian2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )


# ---------------------------------------------------------------------------
# shear geometry

def shear_factor(phi, a):
    """C(phi) = a^2 cos^2 phi + sin^2 phi / a^2, the squared radial stretch of the shear."""
    c = np.cos(phi)
    s = np.sin(phi)
    return a * a * c * c + s * s / (a * a)


def shear_factor_prime(phi, a):
    return -2.0 * (a * a - 1.0 / (a * a)) * np.sin(phi) * np.cos(phi)


def shear_lift(phi, a):
    """Lift of the shear's action on angles.

    With k = floor((phi + pi/2)/pi) and t = phi - k*pi in [-pi/2, pi/2) the value is
    k*pi + atan2(sin(t)/a, a*cos(t)); it satisfies lift(phi + pi) = lift(phi) + pi
    and maps each quadrant to itself.
    """
    k = np.floor((phi + HALF_PI) / math.pi)
    t = phi - k * math.pi
    return k * math.pi + np.arctan2(np.sin(t) / a, a * np.cos(t))


def principal(x):
    """Reduce an angle lift to (-pi, pi]."""
    r = np.mod(x, TWO_PI)
    r = np.where(r > math.pi, r - TWO_PI, r)
    return float(r) if np.ndim(r) == 0 else r


def reversal_functional(phi, p: ModelParams):
    """D(phi) with dx2/ds = -D(phi)/s along a vertical segment; zeros are reversals."""
    a = p.a
    C = shear_factor(phi, a)
    return 0.5 * p.g2 + (p.g1 / C) * (p.g2 * p.shear * np.sin(phi) * np.cos(phi) + 1.0)


@dataclass(frozen=True)
class GeometryValues:
    C: float
    Phi_lift: float
    A_printed: float
    A_derived: float


def geometry_functions(phi: float, p: ModelParams) -> GeometryValues:
    """C, the shear lift, and both forms of the reversal functional A.

    ``A_printed`` is E1 a^2 cos^2 + (E1/a^2) sin^2 + alpha1 (a^2 - 1/a^2) sin cos;
    ``A_derived`` is (E1/2) C + alpha1 (a^2 - 1/a^2) sin cos, which is what the
    composition actually produces: dx2/ds = 0 exactly where A_derived = alpha1 E2/alpha2.
    """
    s = p.saddle
    a = p.a
    C = float(shear_factor(phi, a))
    sc = math.sin(phi) * math.cos(phi)
    a_printed = s.E1 * a * a * math.cos(phi) ** 2 + s.E1 / (a * a) * math.sin(phi) ** 2 + s.alpha1 * p.shear * sc
    a_derived = 0.5 * s.E1 * C + s.alpha1 * p.shear * sc
    return GeometryValues(C=C, Phi_lift=float(shear_lift(phi, a)), A_printed=a_printed, A_derived=a_derived)


# ---------------------------------------------------------------------------
# the maps

def phi1(p: WallPoint, params: ModelParams) -> DiskPoint:
    """Local map In(sigma1) -> Out(sigma1): (x, y) -> (sqrt(y), x - g1 ln y)."""
    if not (0.0 < p.y <= 1.0):
        raise DomainEscape("phi1", f"y={p.y!r} outside (0, 1]")
    return DiskPoint(math.sqrt(p.y), p.x - params.g1 * math.log(p.y))


def phi2(p: DiskPoint, params: ModelParams) -> WallPoint:
    """Local map In(sigma2) -> Out(sigma2): (r, phi) -> (phi - g2 ln r, r^2)."""
    if not (0.0 < p.r <= 1.0):
        raise DomainEscape("phi2", f"r={p.r!r} outside (0, 1]")
    return WallPoint(p.phi - params.g2 * math.log(p.r), p.r * p.r)


def phi2_inverse(p: WallPoint, params: ModelParams) -> DiskPoint:
    if not (0.0 < p.y <= 1.0):
        raise DomainEscape("phi2_inverse", f"y={p.y!r} outside (0, 1]")
    r = math.sqrt(p.y)
    return DiskPoint(r, p.x + params.g2 * math.log(r))


def psi12(p: DiskPoint, params: ModelParams) -> DiskPoint:
    """Linear shear diag(a, 1/a) in Cartesian disk coordinates, angle kept on its lift."""
    if not p.r > 0.0:
        raise DomainEscape("psi12", f"r={p.r!r} must be > 0")
    a = params.a
    u = a * p.r * math.cos(p.phi)
    v = p.r * math.sin(p.phi) / a
    return DiskPoint(math.hypot(u, v), float(shear_lift(p.phi, a)))


def _rotation_cs(theta: float) -> tuple[float, float]:
    c, s = math.cos(theta), math.sin(theta)
    # snap so that quarter turns are exact
    for ref in (-1.0, 0.0, 1.0):
        if abs(c - ref) < 1e-15:
            c = ref
        if abs(s - ref) < 1e-15:
            s = ref
    return c, s


def psi21(p: WallPoint, params: ModelParams) -> WallPoint:
    """Rotation by the configured angle about the transverse connection (0, 0).

    The angular coordinate is first reduced to its principal value; for a quarter
    turn this is (x, y) -> (-y, principal(x)).
    """
    c, s = _rotation_cs(params.glob.rotation)
    x = principal(p.x)
    return WallPoint(c * x - s * p.y, s * x + c * p.y)


def eta(p: WallPoint, params: ModelParams) -> WallPoint:
    """phi2 o psi12 o phi1 : In(sigma1) -> Out(sigma2)."""
    return phi2(psi12(phi1(p, params), params), params)


def return_map(p: WallPoint, params: ModelParams) -> WallPoint:
    return psi21(eta(p, params), params)


def eta_closed_form(x0, s, params: ModelParams):
    """(x2, y2) for the point (x0, s) from the closed-form image of a vertical segment.

    x2 = -g2/2 ln(s C(phi)) + Phi(phi), y2 = s C(phi), phi = x0 - g1 ln s.
    Works on arrays and does no domain checking.
    """
    phi = x0 - params.g1 * np.log(s)
    C = shear_factor(phi, params.a)
    return -0.5 * params.g2 * np.log(s * C) + shear_lift(phi, params.a), s * C


def eta_log(x, logy, params: ModelParams):
    """eta carried out on log heights: (x, ln y) -> (x2, ln y2).

    Never underflows, so it reaches arbitrarily deep reversal points. No domain
    checks; callers decide what ``ln y2 > 0`` means for them.
    """
    phi = x - params.g1 * logy
    log_r2 = 0.5 * logy + 0.5 * np.log(shear_factor(phi, params.a))
    return shear_lift(phi, params.a) - params.g2 * log_r2, 2.0 * log_r2


# ---------------------------------------------------------------------------
# Jacobians

def _jac_phi1(p: WallPoint, params: ModelParams) -> Jacobian2:
    return Jacobian2(0.0, 0.5 / math.sqrt(p.y), 1.0, -params.g1 / p.y)


def _jac_psi12(p: DiskPoint, params: ModelParams) -> Jacobian2:
    a = params.a
    C = float(shear_factor(p.phi, a))
    dC = float(shear_factor_prime(p.phi, a))
    sq = math.sqrt(C)
    return Jacobian2(sq, p.r * dC / (2.0 * sq), 0.0, 1.0 / C)


def _jac_phi2(p: DiskPoint, params: ModelParams) -> Jacobian2:
    return Jacobian2(-params.g2 / p.r, 1.0, 2.0 * p.r, 0.0)


def _jac_psi21(params: ModelParams) -> Jacobian2:
    c, s = _rotation_cs(params.glob.rotation)
    return Jacobian2(c, -s, s, c)


def jacobian(map_id: str, p, params: ModelParams, *, eps: float = 1e-9, chart: str = "native") -> Jacobian2:
    """Analytic chain-rule Jacobian of one of the section maps at ``p``.

    ``chart="cartesian"`` is only meaningful for psi12, where it returns diag(a, 1/a).
    Points within ``eps`` of the singular boundary (y = 0 or r = 0) raise NearSingular.
    """
    if map_id == "psi12" and chart == "cartesian":
        return Jacobian2(params.a, 0.0, 0.0, 1.0 / params.a)
    if map_id == "psi21":
        return _jac_psi21(params)

    if map_id in ("phi1", "eta", "return_map"):
        if not (0.0 < p.y <= 1.0):
            raise DomainEscape("phi1", f"y={p.y!r} outside (0, 1]")
        if p.y < eps:
            raise NearSingular(map_id, f"(y={p.y!r})")
    elif map_id in ("phi2", "psi12"):
        if p.r <= 0.0:
            raise DomainEscape(map_id, f"r={p.r!r}")
        if p.r < eps:
            raise NearSingular(map_id, f"(r={p.r!r})")

    if map_id == "phi1":
        return _jac_phi1(p, params)
    if map_id == "psi12":
        return _jac_psi12(p, params)
    if map_id == "phi2":
        if p.r > 1.0:
            raise DomainEscape("phi2", f"r={p.r!r} outside (0, 1]")
        return _jac_phi2(p, params)
    if map_id in ("eta", "return_map"):
        q1 = phi1(p, params)
        q2 = psi12(q1, params)
        phi2(q2, params)  # domain check
        j = _jac_phi2(q2, params) @ _jac_psi12(q1, params) @ _jac_phi1(p, params)
        if map_id == "return_map":
            j = _jac_psi21(params) @ j
        return j
    raise ValueError(f"unknown map {map_id!r}")


_MAPS = {"phi1": phi1, "phi2": phi2, "psi12": psi12, "psi21": psi21, "eta": eta, "return_map": return_map}


def _coords(q) -> tuple[float, float]:
    return (q.x, q.y) if isinstance(q, WallPoint) else (q.r, q.phi)


def fd_jacobian(map_id: str, p, params: ModelParams, rel_step: float = 1e-6) -> Jacobian2:
    """Central-difference Jacobian; the height/radius step is relative to its value.

    Angular outputs of psi21/return_map are unwrapped against the centre value.
    """
    f = _MAPS[map_id]
    wall = isinstance(p, WallPoint)
    u, v = _coords(p)
    # (angle, height) for wall points, (radius, angle) for disk points
    if wall:
        steps = (rel_step, rel_step * abs(v))
    else:
        steps = (rel_step * abs(u), rel_step)
    make = WallPoint if wall else DiskPoint
    centre = _coords(f(p, params))
    cols = []
    for i, h in enumerate(steps):
        du = (h, 0.0) if i == 0 else (0.0, h)
        plus = _coords(f(make(u + du[0], v + du[1]), params))
        minus = _coords(f(make(u - du[0], v - du[1]), params))
        col = []
        for j in range(2):
            dp, dm = plus[j] - centre[j], minus[j] - centre[j]
            if map_id in ("psi21", "return_map"):
                # rotated angle may jump by 2pi across the principal branch cut
                dp = dp - TWO_PI * round(dp / TWO_PI) if abs(dp) > math.pi else dp
                dm = dm - TWO_PI * round(dm / TWO_PI) if abs(dm) > math.pi else dm
            col.append((dp - dm) / (2.0 * h))
        cols.append(col)
    return Jacobian2(cols[0][0], cols[1][0], cols[0][1], cols[1][1])


# ---------------------------------------------------------------------------
# curve traces

@dataclass(frozen=True)
class TraceSample:
    s: float
    point: WallPoint
    dxds: float
    valid: bool


@dataclass
class CurveTrace:
    samples: list[TraceSample] = field(default_factory=list)
    iterate: int = 1

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def s(self) -> np.ndarray:
        return np.array([t.s for t in self.samples])

    @property
    def x(self) -> np.ndarray:
        return np.array([t.point.x for t in self.samples])

    @property
    def y(self) -> np.ndarray:
        return np.array([t.point.y for t in self.samples])

    @property
    def dxds(self) -> np.ndarray:
        return np.array([t.dxds for t in self.samples])

    @property
    def valid(self) -> np.ndarray:
        return np.array([t.valid for t in self.samples], dtype=bool)

    def pieces(self) -> list["CurveTrace"]:
        """Maximal runs of consecutive valid samples."""
        out: list[CurveTrace] = []
        run: list[TraceSample] = []
        for t in self.samples:
            if t.valid:
                run.append(t)
            elif run:
                out.append(CurveTrace(run, self.iterate))
                run = []
        if run:
            out.append(CurveTrace(run, self.iterate))
        return out

    def rows(self) -> list[dict]:
        return [
            {"s": t.s, "x_lift": t.point.x, "y": t.point.y, "dxds": t.dxds, "valid": t.valid}
            for t in self.samples
        ]

    CSV_COLUMNS = ("s", "x_lift", "y", "dxds", "valid")


def _check_grid(s_grid) -> np.ndarray:
    s = np.asarray(list(s_grid), dtype=float)
    if s.size == 0:
        raise ValueError("s_grid is empty")
    if np.any(~(s > 0)) or np.any(s > 1):
        raise ValueError("s_grid values must lie in (0, 1]")
    d = np.diff(s)
    if s.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("s_grid must be strictly monotone")
    return s


def dxds_fd(x0: float, s: float, params: ModelParams, rel_step: float = 1e-7) -> float:
    """Central difference of the composed map's x2 along the vertical segment."""
    h = rel_step * s
    xp = eta(WallPoint(x0, s + h), params).x
    xm = eta(WallPoint(x0, s - h), params).x
    return (xp - xm) / (2.0 * h)


def segment_trace(x0: float, s_grid: Iterable[float], params: ModelParams, *, tol: float = 1e-10) -> CurveTrace:
    """Image of the vertical segment (x0, s) under eta, checked against its closed form.

    Every sample is evaluated twice: by the closed form and by composing the three
    maps. Disagreement beyond ``tol`` in either lift coordinate raises FormulaMismatch.
    Samples whose composition leaves a section are kept with ``valid=False``.
    """
    s_arr = _check_grid(s_grid)
    xs, ys = eta_closed_form(x0, s_arr, params)
    phis = x0 - params.g1 * np.log(s_arr)
    dxds = -reversal_functional(phis, params) / s_arr
    out = []
    for s, xc, yc, d in zip(s_arr, xs, ys, dxds):
        s = float(s)
        try:
            q = eta(WallPoint(x0, s), params)
        except DomainEscape:
            out.append(TraceSample(s, WallPoint(float(xc), float(yc)), float(d), False))
            continue
        delta = max(abs(q.x - xc), abs(q.y - yc))
        if not delta <= tol:
            raise FormulaMismatch(s, delta)
        out.append(TraceSample(s, q, float(d), True))
    return CurveTrace(out, iterate=1)


def _orbit(x0: float, s: float, k: int, params: ModelParams):
    """Follow (x0, s) through up to k passages; returns [(point, tangent), ...] per survived iterate."""
    p = WallPoint(x0, s)
    v = (0.0, 1.0)
    rot = _jac_psi21(params)
    out = []
    for j in range(1, k + 1):
        if j > 1:
            p = psi21(p, params)
            v = (rot.a11 * v[0] + rot.a12 * v[1], rot.a21 * v[0] + rot.a22 * v[1])
            if not (0.0 < p.y <= 1.0):
                break
        try:
            q = eta(p, params)
        except DomainEscape:
            break
        J = jacobian("eta", p, params, eps=0.0)
        v = (J.a11 * v[0] + J.a12 * v[1], J.a21 * v[0] + J.a22 * v[1])
        out.append((q, v))
        p = q
    return out


def _survives(x0, s, j, params) -> bool:
    return len(_orbit(x0, s, j, params)) >= j


def _bisect_boundary(x0, s_ok, s_bad, j, params, rel_res=1e-12) -> float:
    """Boundary of survival to iterate j between a surviving and an escaping s (log bisection)."""
    lo, hi = math.log(s_ok), math.log(s_bad)
    while abs(hi - lo) > rel_res:
        mid = 0.5 * (lo + hi)
        if _survives(x0, math.exp(mid), j, params):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def iterated_segment_trace(
    x0: float,
    s_grid: Iterable[float],
    k: int,
    params: ModelParams,
    *,
    min_piece_samples: int = 64,
    max_gap: float = 0.05,
    max_samples: int = 20_000,
) -> list[CurveTrace]:
    """Images of the vertical segment after 1..k passages, in Out(sigma2) coordinates.

    Between passages the curve is rotated back to In(sigma1); samples that leave a
    section are dropped, the edges of the surviving sub-intervals are located by
    bisection to relative 1e-12 in s, and each surviving piece is re-sampled
    (log-spaced, then by midpoint insertion where consecutive images are more than
    ``max_gap`` apart). Trace j holds the samples that survived j-1 passages, with
    ``valid`` marking survival of passage j. ``dxds`` is propagated by the chain rule.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    grid = sorted(set(float(s) for s in _check_grid(s_grid)), reverse=True)
    traces: list[CurveTrace] = []
    for j in range(1, k + 1):
        orbits = {s: _orbit(x0, s, j, params) for s in grid}
        ok = [len(orbits[s]) >= j for s in grid]
        if j > 1 and any(ok):
            extra = []
            for i in range(len(grid) - 1):
                if ok[i] != ok[i + 1]:
                    good, bad = (grid[i], grid[i + 1]) if ok[i] else (grid[i + 1], grid[i])
                    extra.append(_bisect_boundary(x0, good, bad, j, params))
            grid = _resample(x0, sorted(set(grid) | set(extra), reverse=True), j, params,
                             min_piece_samples, max_gap, max_samples)
            orbits = {s: _orbit(x0, s, j, params) for s in grid}
            ok = [len(orbits[s]) >= j for s in grid]
        if not any(ok):
            raise Extinct(j)
        samples = []
        for s, good in zip(grid, ok):
            orb = orbits[s]
            if good:
                q, v = orb[j - 1]
                samples.append(TraceSample(s, q, float(v[0]), True))
            elif j == 1:
                xc, yc = eta_closed_form(x0, s, params)
                phi = x0 - params.g1 * math.log(s)
                samples.append(TraceSample(s, WallPoint(float(xc), float(yc)),
                                           float(-reversal_functional(phi, params) / s), False))
        if j == 1:
            # keep the caller's grid order for the first passage
            order = list(_check_grid(s_grid))
            by_s = {t.s: t for t in samples}
            samples = [by_s[float(s)] for s in order]
        traces.append(CurveTrace(samples, iterate=j))
        grid = [s for s, good in zip(grid, ok) if good]
    return traces


def _resample(x0, grid, j, params, min_piece, max_gap, max_samples):
    """Densify surviving pieces of a descending s-grid for passage j."""
    alive_set = {s for s in grid if _survives(x0, s, j, params)}
    pieces, run = [], []
    for s in grid:
        if s in alive_set:
            run.append(s)
        elif run:
            pieces.append(run)
            run = []
    if run:
        pieces.append(run)
    out = set(grid)
    for piece in pieces:
        hi, lo = piece[0], piece[-1]
        if len(piece) < min_piece and hi > lo:
            out.update(float(v) for v in np.exp(np.linspace(math.log(hi), math.log(lo), min_piece)))
    grid = sorted(out, reverse=True)
    # midpoint refinement where the image of passage j jumps
    for _ in range(12):
        if len(grid) >= max_samples:
            break
        pts = {}
        for s in grid:
            orb = _orbit(x0, s, j, params)
            if len(orb) >= j:
                pts[s] = orb[j - 1][0]
        new = []
        for s_a, s_b in zip(grid[:-1], grid[1:]):
            if s_a in pts and s_b in pts:
                pa, pb = pts[s_a], pts[s_b]
                if math.hypot(pa.x - pb.x, pa.y - pb.y) > max_gap:
                    new.append(math.sqrt(s_a * s_b))
        if not new:
            break
        grid = sorted(set(grid) | set(new[: max_samples - len(grid)]), reverse=True)
    return grid


# ---------------------------------------------------------------------------
# spirals on disk sections

@dataclass
class DiskCurve:
    s: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    valid: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {"s": float(a), "r": float(b), "phi_lift": float(c), "valid": bool(d)}
            for a, b, c, d in zip(self.s, self.r, self.phi, self.valid)
        ]

    def cartesian(self) -> np.ndarray:
        return np.column_stack([self.r * np.cos(self.phi), self.r * np.sin(self.phi)])

    CSV_COLUMNS = ("s", "r", "phi_lift", "valid")


def phi1_image(x0: float, s_grid, params: ModelParams) -> DiskCurve:
    """Spiral in Out(sigma1): phi1 applied to the vertical segment (x0, s)."""
    s = _check_grid(s_grid)
    return DiskCurve(s, np.sqrt(s), x0 - params.g1 * np.log(s), np.ones(s.size, dtype=bool))


def unstable_spiral(x0: float, s_grid, params: ModelParams) -> DiskCurve:
    """psi12 o phi1 of the vertical segment (x0, s): a spiral in In(sigma2)."""
    s = _check_grid(s_grid)
    phi = x0 - params.g1 * np.log(s)
    r = np.sqrt(s * shear_factor(phi, params.a))
    return DiskCurve(s, r, shear_lift(phi, params.a), r <= 1.0)


def stable_spiral(x_s: float, s_grid, params: ModelParams) -> DiskCurve:
    """phi2^{-1} of the vertical segment (x_s, s) in Out(sigma2): a spiral in In(sigma2)."""
    s = _check_grid(s_grid)
    r = np.sqrt(s)
    return DiskCurve(s, r, x_s + params.g2 * np.log(r), np.ones(s.size, dtype=bool))


@dataclass(frozen=True)
class SpiralDiagnostics:
    winding: float
    monotone_fraction: float
    radius_limit: float


def spiral_diagnostics(curve: DiskCurve | CurveTrace) -> SpiralDiagnostics:
    """Winding about the centre, radial monotonicity and limiting radius of a curve.

    Samples are ordered towards the accumulation end (decreasing s). For wall traces
    the angle lift plays the role of the polar angle and the height that of the radius.
    """
    if isinstance(curve, CurveTrace):
        if len(curve) == 0:
            raise ValueError("empty trace")
        s, ang, rad = curve.s, curve.x, curve.y
    else:
        if len(curve.s) == 0:
            raise ValueError("empty curve")
        s, ang, rad = np.asarray(curve.s), np.asarray(curve.phi), np.asarray(curve.r)
    order = np.argsort(-s, kind="stable")
    ang, rad = ang[order], rad[order]
    winding = float((ang[-1] - ang[0]) / TWO_PI)
    dr = np.diff(rad)
    if dr.size == 0:
        mono = 1.0
    else:
        mono = float(max(np.sum(dr <= 0), np.sum(dr >= 0)) / dr.size)
    return SpiralDiagnostics(winding=winding, monotone_fraction=mono, radius_limit=float(rad[-1]))


# ---------------------------------------------------------------------------
# brute-force reversal oracle

def oracle_reversal_phases(params: ModelParams, grid: int = 10_000, x0: float = 0.0, step: float = 1e-6) -> list[float]:
    """Phases in [0, pi) where the finite-differenced x2 lift changes monotonicity.

    x2 is evaluated through the composed map (in log heights) on the vertical segment
    at phases phi + m*pi, with m chosen so the points sit inside the section; the
    derivative is taken with respect to ln s by central differences. Independent
    of the analytic reversal functional.
    """
    a = params.a
    # shift by whole half-turns until s * a^2 <= 1/2
    m = max(0, math.ceil(params.g1 * math.log(2.0 * a * a) / math.pi))
    phis = np.arange(grid + 1) * (math.pi / grid)  # closes the period at pi
    u = (x0 - phis - m * math.pi) / params.g1
    xp, _ = eta_log(x0, u + step, params)
    xm, _ = eta_log(x0, u - step, params)
    d = (xp - xm) / (2.0 * step)
    # rounding floor of the difference quotient; below it x2 is flat along the segment
    noise = 64.0 * np.finfo(float).eps * (1.0 + np.max(np.abs(xp))) / step
    if np.max(np.abs(d)) <= noise:
        return []
    roots = []
    for i in range(grid):
        if d[i] == 0.0:
            roots.append(float(phis[i]))
        elif d[i] * d[i + 1] < 0.0:
            roots.append(float(0.5 * (phis[i] + phis[i + 1])))
    return roots
