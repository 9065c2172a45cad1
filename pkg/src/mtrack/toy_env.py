"""Deterministic joint-space tracking environment.

Every joint is an independent PD-driven double integrator::

    tau  = clip(kp (a - q) - kd dq, -tau_lim, tau_lim)
    dq' = dq + dt * tau / m
    q'  = q + dt * dq'

integrated at the reference frame rate.  ``ideal=True`` replaces the
plant by ``q' = a`` (infinitely stiff actuators).  The policy is a table
of target joint positions indexed by reference step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .curriculum import CurriculumSchedule, termination_curriculum
from .errors import DimensionMismatch
from .motion import Joint, MotionSequence, Segment, SkeletonSpec
from .randomization import DomainParams, DomainRandomizationRanges, nominal_params, sample_domain_params
from .rewards import (REG_TERMS, TASK_TERMS, RewardWeights, StepSnapshot, TrackingFactors,
                      regularization_rewards, soft_limits, task_rewards)

# (kp, kd) per joint group
PD_GAINS = {
    "shoulder": (100.0, 2.0),
    "shoulder_yaw": (50.0, 2.0),
    "elbow": (50.0, 2.0),
    "waist": (400.0, 5.0),
    "hip": (100.0, 2.0),
    "knee": (150.0, 4.0),
    "ankle": (40.0, 2.0),
}
GAMMA = 0.99
TERM_NAMES = tuple(TASK_TERMS) + ("contact_mask",) + REG_TERMS


@dataclass
class ToyEnvConfig:
    reference: MotionSequence
    joint_groups: tuple = ("hip", "knee")
    inertia: Optional[Sequence[float]] = None  # kg m^2 per joint, default 1
    torque_limits: Optional[Sequence[float]] = None  # N m, default 100
    q_limits: tuple = (-2.5, 2.5)
    velocity_limit: float = 30.0
    termination: CurriculumSchedule = field(default_factory=termination_curriculum)
    dr_ranges: DomainRandomizationRanges = field(default_factory=DomainRandomizationRanges.nominal)
    gamma: float = GAMMA
    ideal: bool = False

    def __post_init__(self):
        if self.reference.joint_positions is None:
            raise ValueError("toy environment needs a robot-space reference with joint_positions")
        if len(self.reference) < 2:
            raise ValueError("reference needs at least two frames")
        n = self.dof
        if len(self.joint_groups) != n:
            self.joint_groups = tuple(self.joint_groups[i % len(self.joint_groups)] for i in range(n))
        for g in self.joint_groups:
            if g not in PD_GAINS:
                raise ValueError(f"unknown joint group {g!r}")

    @property
    def dof(self) -> int:
        return self.reference.joint_positions.shape[1]

    @property
    def dt(self) -> float:
        return self.reference.dt

    @property
    def kp(self) -> np.ndarray:
        return np.array([PD_GAINS[g][0] for g in self.joint_groups])

    @property
    def kd(self) -> np.ndarray:
        return np.array([PD_GAINS[g][1] for g in self.joint_groups])

    @property
    def mass(self) -> np.ndarray:
        return np.ones(self.dof) if self.inertia is None else np.asarray(self.inertia, dtype=float)

    @property
    def tau_limit(self) -> np.ndarray:
        return np.full(self.dof, 100.0) if self.torque_limits is None else np.asarray(self.torque_limits, float)


def reference_velocity(q: np.ndarray, dt: float) -> np.ndarray:
    """Backward differences; the first frame reuses the second frame's value."""
    dq = np.empty_like(q)
    dq[1:] = (q[1:] - q[:-1]) / dt
    dq[0] = dq[1]
    return dq


class ToyEnv:
    def __init__(self, config: ToyEnvConfig, params: Optional[DomainParams] = None):
        self.config = config
        self.params = params or nominal_params(config.dof)
        self.ref_q = np.asarray(config.reference.joint_positions, dtype=float)
        self.ref_dq = reference_velocity(self.ref_q, config.dt)
        self.skeleton = SkeletonSpec(
            segments=(Segment("base", 1.0),),
            joints=tuple(Joint(f"j{i}", config.q_limits[0], config.q_limits[1], config.velocity_limit,
                               float(config.tau_limit[i])) for i in range(config.dof)),
        )

    @property
    def n_steps(self) -> int:
        """Reference frames minus one: the number of transitions in a full episode."""
        return self.ref_q.shape[0] - 1

    @property
    def dof(self) -> int:
        return self.config.dof

    def gains(self, params: Optional[DomainParams] = None):
        p = params or self.params
        n = self.dof
        kp = self.config.kp * np.resize(p.kp_scale, n)
        kd = self.config.kd * np.resize(p.kd_scale, n)
        m = self.config.mass * np.resize(p.link_mass_scale, n)
        return kp, kd, m, p.delay_steps(self.config.dt)

    def with_params(self, params: DomainParams) -> "ToyEnv":
        return ToyEnv(self.config, params)


def sample_env_params(env: ToyEnv, seed) -> DomainParams:
    return sample_domain_params(env.config.dr_ranges, seed, n_joints=env.dof, n_links=env.dof)


@dataclass
class EnvState:
    q: np.ndarray
    dq: np.ndarray
    step: int
    phase: float
    prev_action: np.ndarray
    pending: tuple = ()  # delayed actions, oldest first


def phase_to_step(env: ToyEnv, phase: float) -> int:
    return int(round(float(phase) * env.n_steps))


def rsi_reset(env: ToyEnv, seed=None, phase: Optional[float] = None) -> EnvState:
    """Start on the reference at a random phase (or at ``phase`` if given)."""
    if phase is None:
        phase = float(np.random.default_rng(seed).uniform(0.0, 1.0))
    k = phase_to_step(env, phase)
    q = env.ref_q[k].copy()
    _, _, _, delay = env.gains()
    return EnvState(q=q, dq=env.ref_dq[k].copy(), step=k, phase=float(phase), prev_action=q.copy(),
                    pending=tuple(q.copy() for _ in range(delay)))


def pd_torque(kp, kd, tau_lim, target, q, dq):
    return np.clip(kp * (target - q) - kd * dq, -tau_lim, tau_lim)


def env_step(env: ToyEnv, state: EnvState, action, params: Optional[DomainParams] = None):
    action = np.asarray(action, dtype=float)
    if action.shape != (env.dof,):
        raise DimensionMismatch(f"action must have {env.dof} entries, got {action.shape}")
    kp, kd, m, _ = env.gains(params)
    dt = env.config.dt
    if state.pending:
        applied, pending = state.pending[0], state.pending[1:] + (action.copy(),)
    else:
        applied, pending = action, ()
    if env.config.ideal:
        tau = np.zeros(env.dof)
        q = applied.copy()
        dq = (q - state.q) / dt
    else:
        tau = pd_torque(kp, kd, env.config.tau_limit, applied, state.q, state.dq)
        dq = state.dq + dt * tau / m
        q = state.q + dt * dq
    k = min(state.step + 1, env.n_steps)
    nxt = EnvState(q=q, dq=dq, step=k, phase=k / env.n_steps, prev_action=action.copy(), pending=pending)
    snap = StepSnapshot(q=q, dq=dq, ref_q=env.ref_q[k], ref_dq=env.ref_dq[k], tau=tau, action=action.copy(),
                        prev_action=state.prev_action.copy(), phase=nxt.phase)
    return nxt, snap


@dataclass
class PhaseTablePolicy:
    """Target joint positions per reference step, shape (n_steps, dof)."""

    table: np.ndarray

    def __call__(self, step: int) -> np.ndarray:
        return self.table[step]

    @classmethod
    def replay(cls, env: ToyEnv) -> "PhaseTablePolicy":
        """Command the next reference frame at every step."""
        return cls(env.ref_q[1:].copy())

    @classmethod
    def constant(cls, env: ToyEnv, pose) -> "PhaseTablePolicy":
        return cls(np.tile(np.asarray(pose, dtype=float), (env.n_steps, 1)))


@dataclass
class TrajectoryRecord:
    snapshots: list
    term_names: tuple
    rewards: np.ndarray  # (L, n_terms) weighted per-term rewards, penalties already scaled
    returns: np.ndarray  # (n_terms,) discounted per-term returns
    gamma: float
    length: int
    full_length: int
    start_step: int
    start_phase: float
    termination_cause: str = "none"
    errors: dict = field(default_factory=dict)  # term -> (L,) tracking errors

    @property
    def total_return(self) -> float:
        return float(self.returns.sum())

    def recompute_returns(self) -> np.ndarray:
        disc = self.gamma ** np.arange(self.rewards.shape[0])
        return disc @ self.rewards

    def joint_error(self) -> np.ndarray:
        """(L,) mean absolute joint position error per step."""
        return np.array([np.mean(np.abs(s.q - s.ref_q)) for s in self.snapshots])


def rollout(policy, env: ToyEnv, factors: TrackingFactors, weights: Optional[RewardWeights] = None,
            state: Optional[EnvState] = None, penalty_scale: float = 1.0, theta: Optional[float] = None,
            params: Optional[DomainParams] = None) -> TrajectoryRecord:
    """Run one episode from ``state`` (default: phase 0) to the end of the reference.

    The episode stops early once the largest joint deviation exceeds
    ``theta`` (default: the configured termination curriculum's value).
    """
    weights = weights or RewardWeights.default()
    state = state or rsi_reset(env, phase=0.0)
    theta = env.config.termination.value if theta is None else theta
    gamma = env.config.gamma
    start, start_phase = state.step, state.phase
    snaps, rows = [], []
    errors = {t: [] for t in TASK_TERMS.values()}
    cause = "none"
    while state.step < env.n_steps:
        state, snap = env_step(env, state, policy(state.step), params)
        if np.max(np.abs(snap.q - snap.ref_q)) > theta:
            snap.termination = True
            cause = "deviation"
        task = task_rewards(snap, factors, weights)
        reg = regularization_rewards(snap, env.skeleton, weights)
        row = [task.weighted[n] for n in TASK_TERMS] + [task.weighted["contact_mask"]]
        row += [penalty_scale * reg.weighted[n] for n in REG_TERMS]
        rows.append(row)
        snaps.append(snap)
        for t, e in task.errors.items():
            errors[t].append(e)
        if snap.termination:
            break
    rewards = np.array(rows).reshape(-1, len(TERM_NAMES))
    disc = gamma ** np.arange(rewards.shape[0])
    return TrajectoryRecord(
        snapshots=snaps, term_names=TERM_NAMES, rewards=rewards, returns=disc @ rewards, gamma=gamma,
        length=len(snaps), full_length=env.n_steps - start, start_step=start, start_phase=start_phase,
        termination_cause=cause, errors={t: np.array(v) for t, v in errors.items()},
    )


def batched_returns(env: ToyEnv, tables: np.ndarray, start: int, factors: TrackingFactors,
                    weights: Optional[RewardWeights] = None, penalty_scale: float = 1.0,
                    theta: Optional[float] = None, params: Optional[DomainParams] = None) -> np.ndarray:
    """Total discounted return of many action tables at once, shape (B,).

    Mirrors :func:`rollout` for the joint-space plant: body, contact and
    foot terms are constant here (no bodies or feet), so they contribute
    their weights each step.
    """
    weights = weights or RewardWeights.default()
    theta = env.config.termination.value if theta is None else theta
    tables = np.asarray(tables, dtype=float)
    B = tables.shape[0]
    kp, kd, m, delay = env.gains(params)
    tau_lim = env.config.tau_limit
    dt, gamma = env.config.dt, env.config.gamma
    sig = factors.as_dict()
    wt, wr = weights.task, weights.regularization
    constant_task = sum(wt[n] for n, t in TASK_TERMS.items() if t not in ("jpos", "jvel", "max_jpos"))
    constant_task += wt["contact_mask"]
    qlo, qhi = soft_limits(*env.skeleton.joint_limits())
    vl = env.skeleton.velocity_limits()
    vlo, vhi = soft_limits(-vl, vl)
    tl = env.skeleton.torque_limits()
    tlo, thi = soft_limits(-tl, tl)

    q = np.tile(env.ref_q[start], (B, 1))
    dq = np.tile(env.ref_dq[start], (B, 1))
    prev = q.copy()
    pending = [q.copy() for _ in range(delay)]
    alive = np.ones(B, dtype=bool)
    total = np.zeros(B)
    disc = 1.0
    for k in range(start, env.n_steps):
        a = tables[:, k]
        if pending:
            applied = pending.pop(0)
            pending.append(a.copy())
        else:
            applied = a
        if env.config.ideal:
            tau = np.zeros_like(q)
            dq_new = (applied - q) / dt
            q_new = applied.copy()
        else:
            tau = np.clip(kp * (applied - q) - kd * dq, -tau_lim, tau_lim)
            dq_new = dq + dt * tau / m
            q_new = q + dt * dq_new
        rq, rdq = env.ref_q[k + 1], env.ref_dq[k + 1]
        dev = np.abs(q_new - rq)
        e_jpos = np.sum((q_new - rq) ** 2, axis=1)
        e_jvel = np.sum((dq_new - rdq) ** 2, axis=1)
        e_max = dev.max(axis=1)
        term = e_max > theta
        r = (wt["joint_position"] * np.exp(-e_jpos / sig["jpos"])
             + wt["joint_velocity"] * np.exp(-e_jvel / sig["jvel"])
             + wt["max_joint_position"] * np.exp(-e_max / sig["max_jpos"])
             + constant_task)
        pen = (wr["joint_pos_limits"] * ((q_new < qlo) | (q_new > qhi)).any(axis=1)
               + wr["joint_vel_limits"] * ((dq_new < vlo) | (dq_new > vhi)).any(axis=1)
               + wr["torque_limits"] * ((tau < tlo) | (tau > thi)).any(axis=1)
               + wr["torque"] * np.sum(tau ** 2, axis=1)
               + wr["action_rate"] * np.sum((a - prev) ** 2, axis=1)
               + wr["termination"] * term)
        total += np.where(alive, disc * (r + penalty_scale * pen), 0.0)
        alive &= ~term
        disc *= gamma
        q, dq, prev = q_new, dq_new, a.copy()
    return total


def episode_length_ratio(records: Sequence[TrajectoryRecord], ref_len: int) -> float:
    if not ref_len > 0:
        raise ValueError("ref_len must be positive")
    return float(np.mean([r.length for r in records]) / ref_len)
