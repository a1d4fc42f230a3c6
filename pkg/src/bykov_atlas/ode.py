"""Integration of 3-D fields, equilibrium spectra and escape-time scans."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NoConvergence
from .model import SaddleParams
from .parallel import parallel_map

__all__ = [
    "FieldSpec",
    "Trajectory",
    "TimeDelaySample",
    "TimeDelayProfile",
    "EquilibriumReport",
    "SaddleEstimate",
    "integrate",
    "divergence_max",
    "michelson",
    "linear_saddle_field",
    "equilibria_with_spectrum",
    "time_delay",
    "time_delay_scan",
    "C_K",
]

# c at which the Michelson system has the Bykov-type configuration
C_K = 15.0 * math.sqrt(22.0 / 19.0 ** 3)


@dataclass(frozen=True)
class FieldSpec:
    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    parameters: Mapping[str, float] = field(default_factory=dict)
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    divergence_free: bool = False

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float))


def michelson(c: float) -> FieldSpec:
    """x' = y, y' = z, z' = c^2 - y - x^2/2."""
    if not c > 0:
        raise ValueError("c must be > 0")
    c2 = c * c

    def f(s):
        return np.array([s[1], s[2], c2 - s[1] - 0.5 * s[0] * s[0]])

    def jac(s):
        return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-s[0], -1.0, 0.0]])

    return FieldSpec("michelson", f, {"c": float(c)}, jac, divergence_free=True)


def linear_saddle_field(saddle: SaddleParams, which: str) -> FieldSpec:
    """Linear part at sigma1 or sigma2 in Cartesian (u, v, z) = (rho cos, rho sin, z).

    sigma1: rho' = -C1 rho, theta' = alpha1, z' = E1 z.
    sigma2: rho' = E2 rho, theta' = -alpha2, z' = -C2 z.
    """
    if which == "sigma1":
        M = np.array([[-saddle.C1, -saddle.alpha1, 0.0], [saddle.alpha1, -saddle.C1, 0.0], [0.0, 0.0, saddle.E1]])
    elif which == "sigma2":
        M = np.array([[saddle.E2, saddle.alpha2, 0.0], [-saddle.alpha2, saddle.E2, 0.0], [0.0, 0.0, -saddle.C2]])
    else:
        raise ValueError("which must be 'sigma1' or 'sigma2'")
    params = {k: getattr(saddle, k) for k in ("alpha1", "C1", "E1", "alpha2", "E2", "C2")}
    return FieldSpec(f"linear_{which}", lambda s: M @ s, params, lambda s: M, divergence_free=True)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp_step(f, x, h, k1=None):
    """One Dormand-Prince step; returns (x_new, error_vector, f(x_new))."""
    k = [f(x) if k1 is None else k1]
    for i in range(1, 7):
        xi = x + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(f(xi))
    K = np.array(k)
    x_new = x + h * (_B5 @ K)
    return x_new, h * (_E @ K), k[-1]


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    termination: str  # reached_t_end | escaped_radius | step_underflow

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate(
    fld: FieldSpec | Callable,
    x0: Sequence[float],
    t_end: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    max_radius: float = math.inf,
    *,
    h0: float | None = None,
    max_steps: int = 1_000_000,
) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) with PI step control from t = 0 to t_end.

    Negative ``t_end`` runs backward. States are recorded at accepted steps. The run
    stops at t_end, as soon as |x| >= max_radius, or when the step shrinks below
    1e-14 |t|.
    """
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be > 0")
    f = fld if not isinstance(fld, FieldSpec) else fld.evaluate
    x = np.asarray(x0, dtype=float).copy()
    times, states = [0.0], [x.copy()]
    if np.linalg.norm(x) >= max_radius:
        return Trajectory(np.array(times), np.array(states), "escaped_radius")
    if t_end == 0.0:
        return Trajectory(np.array(times), np.array(states), "reached_t_end")
    direction = 1.0 if t_end > 0 else -1.0
    span = abs(t_end)
    t = 0.0
    k1 = f(x)
    if h0 is None:
        scale = abs_tol + rel_tol * np.abs(x)
        d0 = np.sqrt(np.mean((x / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
    h = abs(h0)
    err_prev = 1.0
    termination = "reached_t_end"
    for _ in range(max_steps):
        if abs(t) >= span:
            break
        h = min(h, span - abs(t))
        if h < 1e-14 * abs(t) or h < 1e-300:
            termination = "step_underflow"
            break
        x_new, err, k_last = _dp_step(f, x, direction * h, k1)
        scale = abs_tol + rel_tol * np.maximum(np.abs(x), np.abs(x_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not np.all(np.isfinite(x_new)):
            err_norm = math.inf
        if err_norm <= 1.0:
            t = direction * (abs(t) + h) if abs(t) + h < span else direction * span
            x = x_new
            k1 = k_last
            times.append(t)
            states.append(x.copy())
            factor = 0.9 * max(err_norm, 1e-10) ** (-0.7 / 5) * err_prev ** (0.4 / 5)
            h *= min(5.0, max(0.2, factor))
            err_prev = max(err_norm, 1e-4)
            if np.linalg.norm(x) >= max_radius:
                termination = "escaped_radius"
                break
        else:
            factor = 0.9 * err_norm ** (-1 / 5) if math.isfinite(err_norm) else 0.1
            h *= max(0.1, factor)
    else:
        termination = "step_underflow"
    return Trajectory(np.array(times), np.array(states), termination)


def divergence_max(
    fld: FieldSpec | Callable,
    sample_box: tuple[Sequence[float], Sequence[float]],
    n_samples: int,
    *,
    seed: int = 0,
) -> float:
    """Max |div F| by central differences (step 1e-6 * max(1, |x_i|)) at random points."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    f = fld if not isinstance(fld, FieldSpec) else fld.evaluate
    lo, hi = (np.asarray(v, dtype=float) for v in sample_box)
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((n_samples, 3))
    best = 0.0
    for p in pts:
        div = 0.0
        for i in range(3):
            h = 1e-6 * max(1.0, abs(p[i]))
            e = np.zeros(3)
            e[i] = h
            div += (f(p + e)[i] - f(p - e)[i]) / (2.0 * h)
        best = max(best, abs(div))
    return best


# ---------------------------------------------------------------------------
# equilibria

@dataclass(frozen=True)
class SaddleEstimate:
    kind: str  # sigma1-like (1-D unstable) | sigma2-like (1-D stable) | not-saddle-focus
    alpha: float = float("nan")
    C: float = float("nan")
    E: float = float("nan")
    resonance_residual: float = float("nan")  # E1 - 2 C1 or C2 - 2 E2
    resonance_ok: bool = False


@dataclass(frozen=True)
class EquilibriumReport:
    location: np.ndarray
    eigenvalues: tuple[complex, complex, complex]
    morse_index: int
    saddle_params_estimate: SaddleEstimate
    seed: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "location": [float(v) for v in self.location],
            "eigenvalues": [[float(l.real), float(l.imag)] for l in self.eigenvalues],
            "morse_index": self.morse_index,
        }


def _fd_jac(f, x, rel=1e-7):
    J = np.zeros((3, 3))
    for i in range(3):
        h = rel * max(1.0, abs(x[i]))
        e = np.zeros(3)
        e[i] = h
        J[:, i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return J


def _cubic_roots(tr: float, m2: float, det: float) -> np.ndarray:
    """Roots of l^3 - tr l^2 + m2 l - det via the companion matrix, Newton-polished."""
    coeffs = np.array([1.0, -tr, m2, -det])
    roots = np.roots(coeffs).astype(complex)
    for i in range(3):
        z = roots[i]
        for _ in range(5):
            p = ((z - tr) * z + m2) * z - det
            dp = (3 * z - 2 * tr) * z + m2
            if dp == 0:
                break
            z = z - p / dp
        roots[i] = z
    # snap tiny imaginary parts of real roots
    for i in range(3):
        if abs(roots[i].imag) <= 1e-14 * max(1.0, abs(roots[i])):
            roots[i] = complex(roots[i].real, 0.0)
    return np.array(sorted(roots, key=lambda z: (z.real, z.imag)))


def spectrum(J: np.ndarray, divergence_free: bool = False) -> np.ndarray:
    """Eigenvalues of a 3x3 matrix from its characteristic cubic.

    With ``divergence_free`` the trace is set to exactly zero before solving.
    """
    tr = 0.0 if divergence_free else float(np.trace(J))
    m2 = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0] + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
               + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
    return _cubic_roots(tr, m2, float(np.linalg.det(J)))


def _saddle_estimate(ev: np.ndarray) -> SaddleEstimate:
    real = [z for z in ev if z.imag == 0.0]
    cplx = [z for z in ev if z.imag != 0.0]
    if len(real) != 1 or len(cplx) != 2:
        return SaddleEstimate("not-saddle-focus")
    lr = real[0].real
    re, im = cplx[0].real, abs(cplx[0].imag)
    if lr > 0 > re:
        res = lr - 2.0 * (-re)
        return SaddleEstimate("sigma1-like", float(im), float(-re), float(lr), float(res), bool(abs(res) <= 1e-9 * max(1.0, abs(lr))))
    if lr < 0 < re:
        res = -lr - 2.0 * re
        return SaddleEstimate("sigma2-like", float(im), float(-lr), float(re), float(res), bool(abs(res) <= 1e-9 * max(1.0, abs(lr))))
    return SaddleEstimate("not-saddle-focus")


def equilibria_with_spectrum(
    fld: FieldSpec,
    seeds: Sequence[Sequence[float]],
    tol: float = 1e-12,
    *,
    max_iter: int = 100,
) -> tuple[list[EquilibriumReport], list[NoConvergence]]:
    """Damped Newton on F = 0 from each seed; spectrum from the characteristic cubic.

    The field's analytic Jacobian is used when it has one, otherwise central
    differences with step 1e-7 * scale. Converged points within 1e-8 of an earlier
    one are merged. Non-converging seeds are returned as NoConvergence records.
    """
    jac = fld.jacobian if fld.jacobian is not None else (lambda x: _fd_jac(fld.evaluate, x))
    found: list[EquilibriumReport] = []
    failures: list[NoConvergence] = []
    for seed in seeds:
        x = np.asarray(seed, dtype=float).copy()
        ok = False
        for _ in range(max_iter):
            F = fld.evaluate(x)
            nF = float(np.linalg.norm(F))
            if nF <= tol:
                ok = True
                break
            try:
                dx = np.linalg.solve(jac(x), -F)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            while lam > 1e-8 and np.linalg.norm(fld.evaluate(x + lam * dx)) >= nF:
                lam *= 0.5
            if lam <= 1e-8:
                # no descent: accept if already at rounding level
                ok = nF <= 1e3 * tol
                break
            x = x + lam * dx
        if not ok or not np.all(np.isfinite(x)):
            failures.append(NoConvergence(tuple(float(v) for v in seed)))
            continue
        if any(np.linalg.norm(x - r.location) <= 1e-8 for r in found):
            continue
        ev = spectrum(jac(x), fld.divergence_free)
        found.append(EquilibriumReport(
            location=x,
            eigenvalues=tuple(complex(z) for z in ev),
            morse_index=int(sum(z.real > 0 for z in ev)),
            saddle_params_estimate=_saddle_estimate(ev),
            seed=tuple(float(v) for v in seed),
        ))
    return found, failures


# ---------------------------------------------------------------------------
# escape times

@dataclass(frozen=True)
class TimeDelaySample:
    x0: tuple[float, float, float]
    T_plus: float  # nan when bounded_plus
    T_minus: float
    r0: float
    r: float
    bounded_plus: bool  # no escape before t_max
    bounded_minus: bool
    termination_plus: str = "escaped_radius"
    termination_minus: str = "escaped_radius"

    def row(self, index: int) -> dict:
        return {"index": index, "x0x": self.x0[0], "x0y": self.x0[1], "x0z": self.x0[2],
                "Tplus": self.T_plus, "Tminus": self.T_minus,
                "bounded_plus": self.bounded_plus, "bounded_minus": self.bounded_minus}

    CSV_COLUMNS = ("index", "x0x", "x0y", "x0z", "Tplus", "Tminus", "bounded_plus", "bounded_minus")


def _escape_time(f, x0, r, t_max, direction, rel_tol, abs_tol, time_tol):
    traj = integrate(f, x0, direction * t_max, rel_tol, abs_tol, max_radius=r)
    if traj.termination != "escaped_radius":
        return math.nan, True, traj.termination
    if len(traj.times) < 2:
        return 0.0, False, traj.termination
    t0, xa = traj.times[-2], traj.states[-2]
    h = traj.times[-1] - t0
    lo, hi = 0.0, 1.0
    # bisection on a single RK step from the last interior state
    while abs(hi - lo) * abs(h) > time_tol:
        mid = 0.5 * (lo + hi)
        xm, _, _ = _dp_step(f, xa, mid * h)
        if np.linalg.norm(xm) >= r:
            hi = mid
        else:
            lo = mid
    return float(abs(t0 + hi * h)), False, traj.termination


def time_delay(
    fld: FieldSpec | Callable,
    x0: Sequence[float],
    r: float,
    t_max: float,
    *,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    time_tol: float = 1e-10,
) -> TimeDelaySample:
    """Forward and backward times to reach |x| = r, or a bounded flag when t_max passes first."""
    if t_max <= 0:
        raise ValueError("t_max must be > 0")
    if r <= 0:
        raise ValueError("r must be > 0")
    f = fld if not isinstance(fld, FieldSpec) else fld.evaluate
    x = np.asarray(x0, dtype=float)
    r0 = float(np.linalg.norm(x))
    xt = (float(x[0]), float(x[1]), float(x[2]))
    if r0 >= r:
        return TimeDelaySample(xt, 0.0, 0.0, r0, r, False, False)
    tp, bp, termp = _escape_time(f, x, r, t_max, 1.0, rel_tol, abs_tol, time_tol)
    tm, bm, termm = _escape_time(f, x, r, t_max, -1.0, rel_tol, abs_tol, time_tol)
    return TimeDelaySample(xt, tp, tm, r0, r, bp, bm, termp, termm)


@dataclass
class TimeDelayProfile:
    samples: list[TimeDelaySample]
    values: np.ndarray  # T_plus + T_minus with bounded directions counted as t_max
    spikes: list[int]
    t_max: float


def time_delay_scan(
    fld: FieldSpec | Callable,
    line: tuple[Sequence[float], Sequence[float], int],
    r: float,
    t_max: float,
    *,
    spike_factor: float = 2.0,
    jobs: int | None = 1,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
) -> TimeDelayProfile:
    """Escape times at N equally spaced points of [p0, p1] and the spikes of T+ + T-.

    A spike is an interior sample whose value is at least ``spike_factor`` times
    each neighbour's.
    """
    p0, p1, N = line
    if N < 2:
        raise ValueError("N must be >= 2")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    pts = [p0 + (p1 - p0) * (i / (N - 1)) for i in range(N)]
    samples = parallel_map(lambda p: time_delay(fld, p, r, t_max, rel_tol=rel_tol, abs_tol=abs_tol), pts, jobs)
    vals = np.array([
        (t_max if s.bounded_plus else s.T_plus) + (t_max if s.bounded_minus else s.T_minus) for s in samples
    ])
    spikes = [i for i in range(1, N - 1)
              if vals[i] >= spike_factor * vals[i - 1] and vals[i] >= spike_factor * vals[i + 1]]
    return TimeDelayProfile(samples, vals, spikes, t_max)
