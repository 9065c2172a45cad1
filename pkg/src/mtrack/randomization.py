"""Domain randomisation ranges and a seeded sampler."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class DomainRandomizationRanges:
    friction: tuple = (0.2, 1.2)
    pd_gain_scale: tuple = (0.9, 1.1)
    link_mass_scale: tuple = (0.9, 1.1)
    base_com_offset: tuple = (-0.05, 0.05)  # m
    control_delay_ms: tuple = (0.0, 40.0)
    push_interval_s: tuple = (5.0, 10.0)
    push_velocity: float = 0.1  # m/s

    def __post_init__(self):
        for name, rng in asdict(self).items():
            if isinstance(rng, (tuple, list)):
                lo, hi = rng
                if not lo <= hi:
                    raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")

    @classmethod
    def nominal(cls) -> "DomainRandomizationRanges":
        """Degenerate ranges at the unperturbed values."""
        return cls(friction=(1.0, 1.0), pd_gain_scale=(1.0, 1.0), link_mass_scale=(1.0, 1.0),
                   base_com_offset=(0.0, 0.0), control_delay_ms=(0.0, 0.0), push_interval_s=(5.0, 5.0))

    @classmethod
    def from_dict(cls, d: dict) -> "DomainRandomizationRanges":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class DomainParams:
    friction: float
    kp_scale: np.ndarray
    kd_scale: np.ndarray
    link_mass_scale: np.ndarray
    base_com_offset: np.ndarray
    control_delay_ms: float
    push_interval_s: float
    push_velocity: float

    def to_vector(self) -> np.ndarray:
        """Critic-observation order: CoM offset, link masses, kp, kd, friction, delay."""
        return np.concatenate([self.base_com_offset, self.link_mass_scale, self.kp_scale, self.kd_scale,
                               [self.friction], [self.control_delay_ms]])

    def delay_steps(self, dt: float) -> int:
        return int(round(self.control_delay_ms / 1000.0 / dt))


def _u(rng: np.random.Generator, bounds, size=None):
    lo, hi = bounds
    if lo == hi:
        return lo if size is None else np.full(size, float(lo))
    # closed range: uniform draws are in [lo, hi); clip guards rounding at hi
    return np.clip(rng.uniform(lo, hi, size=size), lo, hi)


def sample_domain_params(ranges: DomainRandomizationRanges, seed, n_joints: int = 23,
                         n_links: int = 22) -> DomainParams:
    rng = np.random.default_rng(seed)
    return DomainParams(
        friction=float(_u(rng, ranges.friction)),
        kp_scale=np.asarray(_u(rng, ranges.pd_gain_scale, n_joints), dtype=float),
        kd_scale=np.asarray(_u(rng, ranges.pd_gain_scale, n_joints), dtype=float),
        link_mass_scale=np.asarray(_u(rng, ranges.link_mass_scale, n_links), dtype=float),
        base_com_offset=np.asarray(_u(rng, ranges.base_com_offset, 3), dtype=float),
        control_delay_ms=float(_u(rng, ranges.control_delay_ms)),
        push_interval_s=float(_u(rng, ranges.push_interval_s)),
        push_velocity=float(ranges.push_velocity),
    )


def nominal_params(n_joints: int, n_links: int = None) -> DomainParams:
    return sample_domain_params(DomainRandomizationRanges.nominal(), 0, n_joints, n_links or n_joints)
