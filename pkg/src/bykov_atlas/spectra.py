"""Fixed points of the return map, their classification, elliptic strips and a horseshoe check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BykovError, DomainEscape, NoReversals
from .maps import Jacobian2, WallPoint, fd_jacobian, jacobian, principal, return_map
from .model import ModelParams
from .parallel import parallel_map

__all__ = [
    "Classification",
    "FixedPointReport",
    "FixedPointSearch",
    "StripSpec",
    "HorseshoeResult",
    "classify",
    "classify_jacobian",
    "find_fixed_points",
    "elliptic_strip",
    "horseshoe_crossing",
    "lift_distance",
]

CLASS_TOL = 1e-6


@dataclass(frozen=True)
class Classification:
    det: float
    trace: float
    eigenvalues: tuple[complex, complex]
    cls: str  # elliptic | hyperbolic | parabolic-within-tol


def _class_of(trace: float, class_tol: float) -> str:
    t = abs(trace)
    if t < 2.0 - class_tol:
        return "elliptic"
    if t > 2.0 + class_tol:
        return "hyperbolic"
    return "parabolic-within-tol"


def classify_jacobian(J: Jacobian2 | np.ndarray, class_tol: float = CLASS_TOL) -> Classification:
    """Eigenvalues and class of a 2x2 Jacobian from its trace and determinant."""
    if not isinstance(J, Jacobian2):
        J = Jacobian2.from_array(np.asarray(J, dtype=float))
    tr, det = J.trace, J.det
    disc = complex(tr * tr - 4.0 * det)
    root = disc ** 0.5
    l1, l2 = 0.5 * (tr + root), 0.5 * (tr - root)
    if disc.real < 0:
        # conjugate pair with exactly mirrored imaginary parts
        l1 = complex(0.5 * tr, 0.5 * math.sqrt(-disc.real))
        l2 = l1.conjugate()
    return Classification(det, tr, (l1, l2), _class_of(tr, class_tol))


def classify(point: WallPoint, params: ModelParams, class_tol: float = CLASS_TOL) -> Classification:
    """Classify a point by the chain-rule Jacobian of the return map."""
    return classify_jacobian(jacobian("return_map", point, params, eps=0.0), class_tol)


def lift_distance(p: WallPoint, q: WallPoint) -> float:
    """Product metric: angular difference mod 2pi, height difference absolute."""
    return math.hypot(principal(q.x - p.x), q.y - p.y)


@dataclass(frozen=True)
class FixedPointReport:
    point: WallPoint
    residual: float
    det: float
    trace: float
    eigenvalues: tuple[complex, complex]
    cls: str
    basin_seed: WallPoint

    def row(self) -> dict:
        return {"x": self.point.x, "y": self.point.y, "residual": self.residual,
                "det": self.det, "trace": self.trace, "class": self.cls}

    CSV_COLUMNS = ("x", "y", "residual", "det", "trace", "class")


@dataclass
class FixedPointSearch:
    reports: list[FixedPointReport] = field(default_factory=list)
    seeds: int = 0
    dropped: int = 0  # escaped the domain or failed to converge


def _residual(p: WallPoint, params: ModelParams) -> np.ndarray:
    q = return_map(p, params)
    return np.array([principal(q.x - p.x), q.y - p.y])


def _newton(seed: WallPoint, params: ModelParams, tol: float, max_iter: int = 60):
    p = seed
    for _ in range(max_iter):
        try:
            F = _residual(p, params)
        except DomainEscape:
            return None
        if math.hypot(*F) <= tol:
            return p
        try:
            J = fd_jacobian("return_map", p, params).as_array() - np.eye(2)
            dx = np.linalg.solve(J, -F)
        except (BykovError, np.linalg.LinAlgError):
            return None
        # damp steps that would leave the wall
        lam = 1.0
        while p.y + lam * dx[1] <= 0.0 and lam > 1e-6:
            lam *= 0.5
        p = WallPoint(float(principal(p.x + lam * dx[0])), float(p.y + lam * dx[1]))
    return None


def find_fixed_points(
    search_box: tuple[tuple[float, float], tuple[float, float]],
    grid_density: int,
    tol: float,
    params: ModelParams,
    *,
    class_tol: float = CLASS_TOL,
    jobs: int | None = 1,
) -> FixedPointSearch:
    """Newton on R(p) - p from a grid of seeds over ``search_box = ((x0, x1), (y0, y1))``.

    Seeds are spaced uniformly in x and logarithmically in y (the map's natural
    scale). Converged points closer than 10*tol are merged, keeping the first in
    seed order. Seeds that escape or stall are dropped and counted.
    """
    (x0, x1), (y0, y1) = search_box
    if not (0.0 < y0 <= y1):
        raise ValueError("search box heights must be positive")
    xs = np.linspace(x0, x1, grid_density)
    ys = np.exp(np.linspace(math.log(y0), math.log(y1), grid_density))
    seeds = [WallPoint(float(x), float(y)) for y in ys for x in xs]

    results = parallel_map(lambda s: _newton(s, params, tol), seeds, jobs)
    out = FixedPointSearch(seeds=len(seeds))
    for seed, p in zip(seeds, results):
        if p is None:
            out.dropped += 1
            continue
        if any(lift_distance(p, r.point) <= 10.0 * tol for r in out.reports):
            continue
        try:
            c = classify(p, params, class_tol)
        except BykovError:
            out.dropped += 1
            continue
        res = math.hypot(*_residual(p, params))
        out.reports.append(FixedPointReport(p, res, c.det, c.trace, c.eigenvalues, c.cls, seed))
    return out


def elliptic_strip(
    phi0: float | None,
    y_max: float,
    params: ModelParams,
    *,
    y_min: float = 1e-8,
    n: int = 1000,
) -> list[tuple[float, float]]:
    """Maximal y-intervals along the fiber of phase phi0 where |Tr DR| < 2.

    The fiber is {x = phi0 + g1 ln y}: every point on it has phase phi0 after phi1.
    Heights are scanned logarithmically over [y_min, y_max]; points that leave the
    domain count as outside. Intervals are reported by their sampled end heights.
    """
    if phi0 is None:
        raise NoReversals()
    if y_max < y_min:
        return []
    ys = np.exp(np.linspace(math.log(y_min), math.log(y_max), n))
    inside = np.zeros(n, dtype=bool)
    for i, y in enumerate(ys):
        p = WallPoint(float(principal(phi0 + params.g1 * math.log(y))), float(y))
        try:
            inside[i] = abs(jacobian("return_map", p, params, eps=0.0).trace) < 2.0
        except BykovError:
            inside[i] = False
    intervals = []
    i = 0
    while i < n:
        if inside[i]:
            j = i
            while j + 1 < n and inside[j + 1]:
                j += 1
            intervals.append((float(ys[i]), float(ys[j])))
            i = j + 1
        else:
            i += 1
    return intervals


@dataclass(frozen=True)
class StripSpec:
    k: int
    x_range: tuple[float, float]
    y_range: tuple[float, float]  # (y_{k+1}, y_k]

    @classmethod
    def make(cls, k: int, x_range: tuple[float, float], params: ModelParams, y_ref: float = 1.0) -> "StripSpec":
        """Strip S_k with y_k = y_ref exp(-2 pi k / g1)."""
        if k < 0:
            raise ValueError("k must be >= 0")
        if not 0.0 < y_ref <= 1.0:
            raise ValueError("y_ref must be in (0, 1]")
        top = y_ref * math.exp(-TWO_PI * k / params.g1)
        bottom = y_ref * math.exp(-TWO_PI * (k + 1) / params.g1)
        return cls(k, (float(x_range[0]), float(x_range[1])), (bottom, top))


TWO_PI = 2.0 * math.pi


@dataclass
class HorseshoeResult:
    crossing: bool
    reason: str
    expansion_estimate: float
    evidence: list[dict]
    label: str = "heuristic crossing check, not a proof"

    CSV_COLUMNS = ("arc", "s", "x_in", "y_in", "x_out", "y_out", "escaped")


def _arc_points(strip: StripSpec, arc: str, s: np.ndarray):
    (xa, xb), (ya, yb) = strip.x_range, strip.y_range
    logy = math.log(ya) + s * (math.log(yb) - math.log(ya))
    if arc == "bottom":
        return xa + s * (xb - xa), np.full_like(s, ya)
    if arc == "top":
        return xa + s * (xb - xa), np.full_like(s, yb)
    if arc == "left":
        return np.full_like(s, xa), np.exp(logy)
    return np.full_like(s, xb), np.exp(logy)


def horseshoe_crossing(
    strip: StripSpec,
    params: ModelParams,
    *,
    samples: int = 1000,
    iterates: int = 1,
    jobs: int | None = 1,
) -> HorseshoeResult:
    """Heuristic check that R^m stretches the strip across itself.

    The four boundary arcs (horizontal arcs uniform in x, vertical arcs uniform in
    ln y) are pushed through R^m. The verdict is positive when the images of the
    bottom and top arcs leave the strip's height range on opposite sides and the
    images together cover the strip's x-range. This is a sampling heuristic in the
    Conley-Moser spirit, not a computer-assisted proof. The expansion estimate is
    the median ratio of singular values of DR over a 20x20 interior grid.
    """
    s = np.linspace(0.0, 1.0, samples)
    arcs = ("bottom", "top", "left", "right")

    def push(arc):
        xs, ys = _arc_points(strip, arc, s)
        rows = []
        for si, x, y in zip(s, xs, ys):
            p = WallPoint(float(x), float(y))
            escaped = False
            try:
                for _ in range(iterates):
                    p = return_map(p, params)  # raises once a point leaves In(sigma1)
            except DomainEscape:
                escaped = True
            rows.append({"arc": arc, "s": float(si), "x_in": float(x), "y_in": float(y),
                         "x_out": float("nan") if escaped else p.x,
                         "y_out": float("nan") if escaped else p.y, "escaped": escaped})
        return rows

    evidence = [r for rows in parallel_map(push, arcs, jobs) for r in rows]
    escaped = sum(r["escaped"] for r in evidence)

    (xa, xb), (ya, yb) = strip.x_range, strip.y_range
    gx = np.linspace(xa, xb, 22)[1:-1]
    gy = np.exp(np.linspace(math.log(ya), math.log(yb), 22)[1:-1])
    ratios = []
    for y in gy:
        for x in gx:
            try:
                sv = np.linalg.svd(jacobian("return_map", WallPoint(float(x), float(y)), params, eps=0.0).as_array(),
                                   compute_uv=False)
            except BykovError:
                continue
            ratios.append(sv[0] / sv[1])
    expansion = float(np.median(ratios)) if ratios else float("nan")

    if escaped > 0.1 * len(evidence):
        return HorseshoeResult(False, "escape", expansion, evidence)

    def side(arc):
        ys = np.array([r["y_out"] for r in evidence if r["arc"] == arc and not r["escaped"]])
        return bool(np.any(ys > yb)), bool(np.any(ys < ya))

    top_above, top_below = side("top")
    bot_above, bot_below = side("bottom")
    opposite = (top_above and bot_below) or (top_below and bot_above)
    xo = np.array([r["x_out"] for r in evidence if not r["escaped"]])
    covers = xo.size > 0 and float(np.min(xo)) <= xa and float(np.max(xo)) >= xb
    if opposite and covers:
        return HorseshoeResult(True, "crossing", expansion, evidence)
    reason = "no-opposite-exit" if not opposite else "x-range-not-covered"
    return HorseshoeResult(False, reason, expansion, evidence)
