"""Exception types raised by the toolkit."""

from __future__ import annotations


class BykovError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class ValidationError(BykovError):
    pass


class NonPositiveParameter(ValidationError):
    def __init__(self, name: str, value: float):
        self.name = name
        self.value = value
        super().__init__(f"parameter {name} must be > 0 (got {value!r})")


class ResonanceViolated(ValidationError):
    def __init__(self, relation: str, residual: float):
        self.relation = relation
        self.residual = residual
        super().__init__(f"resonance {relation} violated (residual {residual!r})")


class DomainEscape(BykovError):
    """A point left the section on which a map is defined.

    ``stage`` names the map that failed (``phi1``, ``psi12``, ``phi2``, ...).
    """

    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        msg = f"domain escape at {stage}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NearSingular(BykovError):
    def __init__(self, map_id: str, detail: str = ""):
        self.map_id = map_id
        super().__init__(f"{map_id}: point within epsilon of a domain boundary {detail}".rstrip())


class FormulaMismatch(BykovError):
    def __init__(self, s: float, delta: float):
        self.s = s
        self.delta = delta
        super().__init__(f"closed form and composition disagree at s={s!r} (delta {delta!r})")


class Extinct(BykovError):
    def __init__(self, iterate: int):
        self.iterate = iterate
        super().__init__(f"no samples survive past iterate {iterate}")


class Underflow(BykovError):
    """Raised when a reversal parameter drops below the float range.

    The events computed before the underflow are kept on ``events``.
    """

    def __init__(self, n: int, events: list):
        self.n = n
        self.events = events
        super().__init__(f"s_n underflows at n={n}; {len(events)} events kept")


class NoReversals(BykovError):
    def __init__(self):
        super().__init__("no reversal phases available")


class EmptyDataset(BykovError):
    def __init__(self):
        super().__init__("dataset is empty")


class NoConvergence(BykovError):
    def __init__(self, seed):
        self.seed = seed
        super().__init__(f"no convergence from seed {seed!r}")
