"""Time-based termination and penalty curricula."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TERMINATION = dict(initial=1.5, lo=0.3, hi=2.0, rate=2.5e-5, direction="decay")
PENALTY = dict(initial=0.1, lo=0.0, hi=1.0, rate=1e-4, direction="growth")


@dataclass(frozen=True)
class CurriculumSchedule:
    value: float
    initial: float
    lo: float
    hi: float
    rate: float
    direction: str = "decay"
    steps: int = 0

    def __post_init__(self):
        if self.direction not in ("decay", "growth"):
            raise ValueError(f"direction must be decay or growth, got {self.direction!r}")
        if not self.lo <= self.hi:
            raise ValueError("lo must not exceed hi")
        if not (self.lo <= self.value <= self.hi and self.lo <= self.initial <= self.hi):
            raise ValueError("value and initial must lie within [lo, hi]")
        if self.rate < 0:
            raise ValueError("rate must be non-negative")

    @property
    def factor(self) -> float:
        return 1.0 - self.rate if self.direction == "decay" else 1.0 + self.rate


def make_schedule(initial, lo, hi, rate, direction="decay") -> CurriculumSchedule:
    return CurriculumSchedule(value=initial, initial=initial, lo=lo, hi=hi, rate=rate, direction=direction)


def termination_curriculum(**overrides) -> CurriculumSchedule:
    return make_schedule(**{**TERMINATION, **overrides})


def penalty_curriculum(**overrides) -> CurriculumSchedule:
    return make_schedule(**{**PENALTY, **overrides})


def step_schedule(s: CurriculumSchedule) -> CurriculumSchedule:
    v = min(max(s.value * s.factor, s.lo), s.hi)
    return replace(s, value=v, steps=s.steps + 1)


def value_after(s: CurriculumSchedule, k: int) -> float:
    """Closed form of ``k`` updates from the schedule's initial value."""
    if k < 0:
        raise ValueError("k must be >= 0")
    try:
        v = s.initial * s.factor ** k
    except OverflowError:  # growth far past the upper bound
        v = math.inf
    return float(np.clip(v, s.lo, s.hi))


def scaled_penalty(alpha_schedule: CurriculumSchedule, raw_penalty: float) -> float:
    return alpha_schedule.value * raw_penalty


def table(k_max: int, every: int = 1, termination: CurriculumSchedule = None,
          penalty: CurriculumSchedule = None):
    """Yield ``(k, theta_k, alpha_k)`` rows by iterating both schedules."""
    th = termination or termination_curriculum()
    al = penalty or penalty_curriculum()
    for k in range(k_max + 1):
        if k % every == 0 or k == k_max:
            yield k, th.value, al.value
        th, al = step_schedule(th), step_schedule(al)
