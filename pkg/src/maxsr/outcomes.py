"""Common result container for every hypothesis test in the package."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["TestOutcome"]


@dataclass(frozen=True)
class TestOutcome:
    """Outcome of a one-sided test of the selected asset's signal-to-noise
    ratio.

    ``reject`` always equals ``p_value <= alpha`` for p-value based methods;
    ``lower_bound`` is populated only when the test has been inverted into a
    one-sided confidence bound.
    """

    method: str
    statistic: float
    p_value: float
    reject: bool
    alpha: float
    null_value: float
    lower_bound: float | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha {self.alpha} outside (0, 1)")
