"""Eigenvalue parameters of the two saddle-foci and the parameter regions built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import NonPositiveParameter, ResonanceViolated, ValidationError

__all__ = [
    "SaddleParams",
    "GlobalParams",
    "ModelParams",
    "RegionB",
    "RationalityReport",
    "RegionReport",
    "validate_params",
    "params_from_config",
    "params_to_config",
    "in_region_B",
    "gamma_rationality",
    "continued_fraction",
    "region_consistency_report",
    "draw_params",
    "REFERENCE_PARAMS",
]

# relative tolerance for resonances estimated from a numerically computed spectrum
FLOW_RESONANCE_TOL = 1e-12


@dataclass(frozen=True)
class SaddleParams:
    alpha1: float
    C1: float
    E1: float
    alpha2: float
    E2: float
    C2: float


@dataclass(frozen=True)
class GlobalParams:
    a: float = 1.0
    rotation: float = math.pi / 2


@dataclass(frozen=True)
class ModelParams:
    saddle: SaddleParams
    glob: GlobalParams
    g1: float
    g2: float
    gamma: float

    @property
    def a(self) -> float:
        return self.glob.a

    @property
    def shear(self) -> float:
        """a^2 - 1/a^2, the factor that multiplies every shear-induced term."""
        a2 = self.glob.a * self.glob.a
        return a2 - 1.0 / a2

    def with_changes(self, **kw) -> "ModelParams":
        """Re-validate with some raw fields replaced (E1/C2 follow C1/E2 unless given)."""
        raw = params_to_config(self)
        if "C1" in kw and "E1" not in kw:
            raw["E1"] = 2.0 * kw["C1"]
        if "E2" in kw and "C2" not in kw:
            raw["C2"] = 2.0 * kw["E2"]
        raw.update(kw)
        return params_from_config(raw)


def validate_params(
    alpha1: float,
    C1: float,
    E1: float,
    alpha2: float,
    E2: float,
    C2: float,
    a: float = 1.0,
    rotation: float = math.pi / 2,
    *,
    rtol: float = 0.0,
) -> ModelParams:
    """Check positivity and the zero-divergence resonances, then derive g1, g2, gamma.

    ``rtol`` is the relative tolerance on E1 = 2 C1 and C2 = 2 E2. Literal inputs
    use the exact default; pass ``FLOW_RESONANCE_TOL`` for spectra read off a flow.
    """
    values = dict(alpha1=alpha1, C1=C1, E1=E1, alpha2=alpha2, E2=E2, C2=C2)
    for name, v in values.items():
        if not math.isfinite(v) or v <= 0:
            raise NonPositiveParameter(name, v)
    if not math.isfinite(a) or a < 1:
        raise ValidationError(f"shear a must be >= 1 (got {a!r})")
    if not math.isfinite(rotation):
        raise ValidationError(f"rotation must be finite (got {rotation!r})")

    res1 = E1 - 2.0 * C1
    if abs(res1) > rtol * abs(E1):
        raise ResonanceViolated("E1=2C1", res1)
    res2 = C2 - 2.0 * E2
    if abs(res2) > rtol * abs(C2):
        raise ResonanceViolated("C2=2E2", res2)

    saddle = SaddleParams(float(alpha1), float(C1), float(E1), float(alpha2), float(E2), float(C2))
    return ModelParams(
        saddle=saddle,
        glob=GlobalParams(float(a), float(rotation)),
        g1=alpha1 / E1,
        g2=-alpha2 / E2,
        gamma=(alpha2 * C1) / (alpha1 * E2),
    )


def params_from_config(block: Mapping[str, float], *, rtol: float = 0.0) -> ModelParams:
    """Build params from a JSON-style block; E1 and C2 default to 2*C1 and 2*E2."""
    try:
        alpha1 = float(block["alpha1"])
        C1 = float(block["C1"])
        alpha2 = float(block["alpha2"])
        E2 = float(block["E2"])
    except KeyError as exc:
        raise ValidationError(f"missing parameter {exc.args[0]!r}") from None
    E1 = float(block.get("E1", 2.0 * C1))
    C2 = float(block.get("C2", 2.0 * E2))
    return validate_params(
        alpha1, C1, E1, alpha2, E2, C2,
        a=float(block.get("a", 1.0)),
        rotation=float(block.get("rotation", math.pi / 2)),
        rtol=rtol,
    )


def params_to_config(p: ModelParams) -> dict[str, float]:
    s = p.saddle
    return {
        "alpha1": s.alpha1, "C1": s.C1, "E1": s.E1,
        "alpha2": s.alpha2, "E2": s.E2, "C2": s.C2,
        "a": p.glob.a, "rotation": p.glob.rotation,
    }


# alpha1 = alpha2 = 1, a = E1 = 2, C1 = E2 = 1 (the parameters of the y2/x2 plots)
REFERENCE_PARAMS = validate_params(1.0, 1.0, 2.0, 1.0, 1.0, 2.0, a=2.0)


# ---------------------------------------------------------------------------
# region B

@dataclass(frozen=True)
class RegionB:
    inside: bool
    lower: float
    middle: float
    upper: float


def in_region_B(p: ModelParams) -> RegionB:
    """Evaluate the two bounds and the middle quantity of region B."""
    s = p.saddle
    root = math.sqrt(s.alpha1 ** 2 + 4.0 * s.C1 ** 2)
    k = p.shear
    lower = k * 2.0 * s.alpha1 / (s.C1 - root)
    upper = k * 2.0 * s.alpha1 / (s.C1 + root)
    middle = s.E2 / s.alpha2 - p.a ** 2 * s.C1 / s.alpha1
    # k == 0 at a == 1 gives -0.0 and 0.0; the open interval is empty either way
    return RegionB(inside=bool(lower < middle < upper), lower=lower, middle=middle, upper=upper)


# ---------------------------------------------------------------------------
# gamma rationality (bounded proxy for membership in D)

def continued_fraction(x: float | Fraction, max_terms: int = 64) -> list[int]:
    """Partial quotients of ``x``; floats are expanded exactly as binary rationals."""
    fx = Fraction(x)
    terms: list[int] = []
    while len(terms) < max_terms:
        q = math.floor(fx)
        terms.append(q)
        rem = fx - q
        if rem == 0:
            break
        fx = 1 / rem
    return terms


def _convergents(terms: list[int]):
    p_prev, p = 1, terms[0]
    q_prev, q = 0, 1
    yield p, q
    for t in terms[1:]:
        p_prev, p = p, t * p + p_prev
        q_prev, q = q, t * q + q_prev
        yield p, q


@dataclass(frozen=True)
class RationalityReport:
    verdict: str  # "rational" or "no-rational-below-bound"
    p: int
    q: int
    error: float
    max_denominator: int
    tol: float
    method: str = "bounded test"

    @property
    def is_rational(self) -> bool:
        return self.verdict == "rational"


def gamma_rationality(p: ModelParams | float, max_denominator: int = 10**6, tol: float = 1e-12) -> RationalityReport:
    """Search the convergents of gamma with q <= max_denominator for one within ``tol``.

    A float cannot certify irrationality, so the negative verdict only says that no
    convergent up to the bound is close enough; the best convergent is reported.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    gamma = p.gamma if isinstance(p, ModelParams) else float(p)
    best = None
    for num, den in _convergents(continued_fraction(gamma)):
        if den > max_denominator:
            break
        err = abs(gamma - num / den)
        if err <= tol:
            return RationalityReport("rational", num, den, err, max_denominator, tol)
        best = (num, den, err)
    assert best is not None  # the first convergent always has q = 1
    return RationalityReport("no-rational-below-bound", *best, max_denominator, tol)


# ---------------------------------------------------------------------------
# region B against the brute-force reversal oracle

@dataclass
class RegionReport:
    seed: int
    rows: list[dict] = field(default_factory=list)

    @property
    def agreement_rate(self) -> float:
        if not self.rows:
            return float("nan")
        agree = sum(1 for r in self.rows if r["inB"] == r["oracle_reversal"])
        return agree / len(self.rows)

    CSV_COLUMNS = ("draw", "alpha1", "C1", "alpha2", "E2", "a", "inB", "oracle_reversal")


def draw_params(rng: np.random.Generator) -> ModelParams:
    """One random parameter set: log-uniform rates in [0.1, 10], a uniform in [1, 4].

    The draw order (alpha1, C1, alpha2, E2, a) is part of the reproducibility contract.
    """
    alpha1, C1, alpha2, E2 = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=4))
    a = rng.uniform(1.0, 4.0)
    return validate_params(alpha1, C1, 2.0 * C1, alpha2, E2, 2.0 * E2, a=a)


def region_consistency_report(sample_count: int, seed: int, jobs: int = 1, grid: int = 10_000) -> RegionReport:
    """Pair region-B membership with the finite-difference reversal oracle per random draw.

    Draws come from ``numpy.random.default_rng(seed)`` (PCG64). No agreement level is
    implied; the report only measures how often the two notions coincide.
    """
    from .maps import oracle_reversal_phases
    from .parallel import parallel_map

    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    draws = [draw_params(rng) for _ in range(sample_count)]

    def one(item):
        i, prm = item
        phases = oracle_reversal_phases(prm, grid=grid)
        s = prm.saddle
        return {
            "draw": i,
            "alpha1": s.alpha1,
            "C1": s.C1,
            "alpha2": s.alpha2,
            "E2": s.E2,
            "a": prm.a,
            "inB": in_region_B(prm).inside,
            "oracle_reversal": len(phases) > 0,
        }

    rows = parallel_map(one, list(enumerate(draws)), jobs=jobs)
    return RegionReport(seed=seed, rows=rows)
