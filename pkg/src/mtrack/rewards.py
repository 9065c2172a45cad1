"""Tracking rewards, regularisation penalties and soft joint limits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from importlib import resources
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DomainError, ShapeMismatch
from .motion import SkeletonSpec

TERMS = ("jpos", "jvel", "pos", "rot", "vel", "ang", "pos_vr", "pos_feet", "max_jpos")

# task reward name -> tracking factor it is scaled by
TASK_TERMS = {
    "joint_position": "jpos",
    "joint_velocity": "jvel",
    "body_position": "pos",
    "body_rotation": "rot",
    "body_velocity": "vel",
    "body_angular_velocity": "ang",
    "body_position_vr": "pos_vr",
    "body_position_feet": "pos_feet",
    "max_joint_position": "max_jpos",
}
REG_TERMS = ("joint_pos_limits", "joint_vel_limits", "torque_limits", "slippage", "feet_contact_forces",
             "feet_air_time", "stumble", "torque", "action_rate", "collision", "termination")

SOFT_LIMIT_ALPHA = 0.95
FOOT_CONTACT_FORCE = 1.0  # N, slippage only counts a loaded foot
FOOT_FORCE_CAP = 400.0  # N
AIR_TIME_LIMIT = 0.3  # s
STUMBLE_RATIO = 5.0


def _data(name: str) -> dict:
    return json.loads(resources.files("mtrack.data").joinpath(name).read_text())


def exp_reward(error, sigma):
    """exp(-error / sigma) for error >= 0 and sigma > 0."""
    error = np.asarray(error, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if (error < 0).any() or not np.isfinite(error).all():
        raise DomainError("tracking error must be finite and non-negative")
    if not (sigma > 0).all():
        raise DomainError("tracking factor must be positive")
    out = np.exp(-error / sigma)
    return float(out) if out.ndim == 0 else out


def soft_limits(hard_min, hard_max, alpha: float = SOFT_LIMIT_ALPHA):
    """Shrink ``[hard_min, hard_max]`` about its midpoint by ``alpha``.

    Infinite bounds stay infinite.
    """
    lo = np.asarray(hard_min, dtype=float)
    hi = np.asarray(hard_max, dtype=float)
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    if not (lo < hi).all():
        raise DomainError("hard_min must be below hard_max")
    finite = np.isfinite(lo) & np.isfinite(hi)
    with np.errstate(invalid="ignore"):
        m = (lo + hi) / 2
        d = hi - lo
        smin = np.where(finite, m - 0.5 * d * alpha, lo)
        smax = np.where(finite, m + 0.5 * d * alpha, hi)
    if smin.ndim == 0:
        return float(smin), float(smax)
    return smin, smax


@dataclass(frozen=True)
class TrackingFactors:
    jpos: float
    jvel: float
    pos: float
    rot: float
    vel: float
    ang: float
    pos_vr: float
    pos_feet: float
    max_jpos: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"tracking factor {f.name} must be positive, got {v}")

    def as_dict(self) -> dict:
        return {t: getattr(self, t) for t in TERMS}

    def replace(self, **kw) -> "TrackingFactors":
        d = self.as_dict()
        d.update({k: float(v) for k, v in kw.items()})
        return TrackingFactors(**d)

    @classmethod
    def from_dict(cls, d: dict) -> "TrackingFactors":
        missing = set(TERMS) - set(d)
        if missing:
            raise ShapeMismatch(f"missing tracking factors: {sorted(missing)}")
        return cls(**{t: float(d[t]) for t in TERMS})

    @classmethod
    def preset(cls, name: str) -> "TrackingFactors":
        table = tracking_factor_presets()
        if name not in table:
            raise KeyError(f"unknown preset {name!r}; choose from {sorted(table)}")
        return cls.from_dict(table[name])


def tracking_factor_presets() -> dict:
    return {k: v for k, v in _data("tracking_factors.json").items() if not k.startswith("_")}


@dataclass(frozen=True)
class RewardWeights:
    task: dict
    regularization: dict

    def __post_init__(self):
        if set(self.task) != set(TASK_TERMS) | {"contact_mask"}:
            raise ShapeMismatch("task weights must cover every task term")
        if set(self.regularization) != set(REG_TERMS):
            raise ShapeMismatch("regularisation weights must cover every penalty term")
        if any(w < 0 for w in self.task.values()):
            raise DomainError("task weights must be non-negative")
        if any(w > 0 for w in self.regularization.values()):
            raise DomainError("penalty weights must be non-positive")

    @classmethod
    def default(cls) -> "RewardWeights":
        d = _data("reward_weights.json")
        return cls(task=dict(d["task"]), regularization=dict(d["regularization"]))

    @classmethod
    def from_dict(cls, d: dict) -> "RewardWeights":
        return cls(task={k: float(v) for k, v in d["task"].items()},
                   regularization={k: float(v) for k, v in d["regularization"].items()})


def _arr(shape=(0,)):
    return field(default_factory=lambda: np.zeros(shape))


@dataclass
class StepSnapshot:
    """Everything one control step exposes to the reward terms.

    Body arrays are (B, 3); rotations are axis-angle.  ``vr_indices`` and
    ``feet_indices`` select the head/hand and foot bodies.  Foot arrays
    (forces, velocities, air time) are per foot, left then right.
    """

    q: np.ndarray = _arr()
    dq: np.ndarray = _arr()
    ref_q: np.ndarray = _arr()
    ref_dq: np.ndarray = _arr()
    body_pos: np.ndarray = _arr((0, 3))
    ref_body_pos: np.ndarray = _arr((0, 3))
    body_rot: np.ndarray = _arr((0, 3))
    ref_body_rot: np.ndarray = _arr((0, 3))
    body_vel: np.ndarray = _arr((0, 3))
    ref_body_vel: np.ndarray = _arr((0, 3))
    body_ang_vel: np.ndarray = _arr((0, 3))
    ref_body_ang_vel: np.ndarray = _arr((0, 3))
    vr_indices: tuple = ()
    feet_indices: tuple = ()
    contact: np.ndarray = _arr()
    ref_contact: np.ndarray = _arr()
    tau: np.ndarray = _arr()
    feet_force: np.ndarray = _arr((0, 3))
    feet_vel: np.ndarray = _arr((0, 3))
    feet_air_time: np.ndarray = _arr()
    action: np.ndarray = _arr()
    prev_action: np.ndarray = _arr()
    collision: bool = False
    termination: bool = False
    phase: float = 0.0

    def check(self) -> "StepSnapshot":
        pairs = [("q", "ref_q"), ("dq", "ref_dq"), ("body_pos", "ref_body_pos"),
                 ("body_rot", "ref_body_rot"), ("body_vel", "ref_body_vel"),
                 ("body_ang_vel", "ref_body_ang_vel"), ("contact", "ref_contact"),
                 ("action", "prev_action")]
        for a, b in pairs:
            if np.shape(getattr(self, a)) != np.shape(getattr(self, b)):
                raise ShapeMismatch(f"{a} {np.shape(getattr(self, a))} vs {b} {np.shape(getattr(self, b))}")
        nb = np.shape(self.body_pos)[0]
        for idx in (self.vr_indices, self.feet_indices):
            if any(not 0 <= i < nb for i in idx):
                raise ShapeMismatch("body index out of range")
        nf = np.shape(self.feet_force)[0]
        if np.shape(self.feet_vel)[0] != nf or np.shape(self.feet_air_time)[0] != nf:
            raise ShapeMismatch("per-foot arrays disagree in length")
        return self


@dataclass
class RewardVector:
    values: dict  # unweighted per-term reward (task) or raw penalty value (regularisation)
    weighted: dict
    errors: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.weighted.values()))


def rotation_error(rot, ref_rot) -> np.ndarray:
    """Per-body geodesic angle between two sets of axis-angle rotations."""
    rot = np.asarray(rot, dtype=float).reshape(-1, 3)
    ref_rot = np.asarray(ref_rot, dtype=float).reshape(-1, 3)
    if rot.shape[0] == 0:
        return np.zeros(0)
    rel = Rotation.from_rotvec(ref_rot).inv() * Rotation.from_rotvec(rot)
    return rel.magnitude()


def tracking_errors(s: StepSnapshot) -> dict:
    """Error fed to each exponential term, keyed by tracking-factor name."""
    s.check()
    sq = lambda a, b: float(np.sum((np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) ** 2))
    vr = list(s.vr_indices)
    ft = list(s.feet_indices)
    dq = np.abs(np.asarray(s.q, dtype=float) - np.asarray(s.ref_q, dtype=float))
    return {
        "jpos": sq(s.q, s.ref_q),
        "jvel": sq(s.dq, s.ref_dq),
        "pos": sq(s.body_pos, s.ref_body_pos),
        "rot": float(np.sum(rotation_error(s.body_rot, s.ref_body_rot) ** 2)),
        "vel": sq(s.body_vel, s.ref_body_vel),
        "ang": sq(s.body_ang_vel, s.ref_body_ang_vel),
        "pos_vr": sq(np.asarray(s.body_pos)[vr], np.asarray(s.ref_body_pos)[vr]),
        "pos_feet": sq(np.asarray(s.body_pos)[ft], np.asarray(s.ref_body_pos)[ft]),
        "max_jpos": float(dq.max()) if dq.size else 0.0,
    }


def task_rewards(s: StepSnapshot, f: TrackingFactors, weights: Optional[RewardWeights] = None) -> RewardVector:
    weights = weights or RewardWeights.default()
    err = tracking_errors(s)
    sig = f.as_dict()
    values = {name: exp_reward(err[t], sig[t]) for name, t in TASK_TERMS.items()}
    c = np.asarray(s.contact, dtype=float)
    c_ref = np.asarray(s.ref_contact, dtype=float)
    values["contact_mask"] = 1.0 - float(np.sum(np.abs(c - c_ref))) / 2.0
    weighted = {k: weights.task[k] * v for k, v in values.items()}
    return RewardVector(values=values, weighted=weighted, errors=err)


def _outside(x, lo, hi) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(((x < lo) | (x > hi)).any())


def regularization_rewards(s: StepSnapshot, skeleton: SkeletonSpec, weights: Optional[RewardWeights] = None,
                           soft_alpha: float = SOFT_LIMIT_ALPHA) -> RewardVector:
    """Raw penalty values and their (non-positive) weighted contributions."""
    weights = weights or RewardWeights.default()
    s.check()
    values = dict.fromkeys(REG_TERMS, 0.0)
    if np.size(s.q):
        if np.shape(s.q) != (len(skeleton.joints),):
            raise ShapeMismatch("q does not match skeleton joints")
        qlo, qhi = soft_limits(*skeleton.joint_limits(), soft_alpha)
        values["joint_pos_limits"] = _outside(s.q, qlo, qhi)
        vl = skeleton.velocity_limits()
        vlo, vhi = soft_limits(-vl, vl, soft_alpha)
        values["joint_vel_limits"] = _outside(s.dq, vlo, vhi)
        tl = skeleton.torque_limits()
        tlo, thi = soft_limits(-tl, tl, soft_alpha)
        values["torque_limits"] = _outside(s.tau, tlo, thi)
    F = np.asarray(s.feet_force, dtype=float).reshape(-1, 3)
    v = np.asarray(s.feet_vel, dtype=float).reshape(-1, 3)
    fnorm = np.linalg.norm(F, axis=1)
    loaded = fnorm >= FOOT_CONTACT_FORCE
    values["slippage"] = float(np.sum(np.sum(v[:, :2] ** 2, axis=1) * loaded))
    values["feet_contact_forces"] = float(np.sum(np.maximum(fnorm - FOOT_FORCE_CAP, 0.0)))
    values["feet_air_time"] = float(np.sum(np.asarray(s.feet_air_time, dtype=float) > AIR_TIME_LIMIT))
    values["stumble"] = float(np.sum(np.linalg.norm(F[:, :2], axis=1) > STUMBLE_RATIO * F[:, 2]))
    values["torque"] = float(np.sum(np.asarray(s.tau, dtype=float) ** 2))
    values["action_rate"] = float(np.sum((np.asarray(s.action, dtype=float)
                                          - np.asarray(s.prev_action, dtype=float)) ** 2))
    values["collision"] = float(bool(s.collision))
    values["termination"] = float(bool(s.termination))
    weighted = {k: weights.regularization[k] * val for k, val in values.items()}
    return RewardVector(values=values, weighted=weighted)


def total_reward(task: RewardVector, reg: RewardVector, penalty_scale: float = 1.0) -> float:
    """Task sum plus regularisation sum scaled by the penalty curriculum."""
    return task.total + penalty_scale * reg.total
