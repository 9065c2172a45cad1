"""Closed-loop trainer for the toy environment.

Each iteration improves the per-step action table with a few L-BFGS-B
steps on the total discounted return (phase 0 plus a few RSI starts),
using batched central differences for the gradient.  The improved table
is rolled out once to feed the error EMA, then sigma is tightened and
both curricula advance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .adaptive import TrackingFactorState, update_error_ema, update_sigma
from .curriculum import CurriculumSchedule, penalty_curriculum, step_schedule, termination_curriculum
from .rewards import RewardWeights, TrackingFactors
from .toy_env import (PhaseTablePolicy, ToyEnv, batched_returns, episode_length_ratio, phase_to_step,
                      rollout, rsi_reset, sample_env_params)

ADAPT_TERMS = ("jpos", "jvel", "max_jpos")


@dataclass
class OptimizerConfig:
    iters: int = 40
    inner_iters: int = 5  # L-BFGS-B iterations per outer iteration
    fd_step: float = 1e-5
    n_rsi: int = 2
    seed: int = 7
    adapt: bool = True
    cadence: str = "iteration"  # or "step": sigma update after every EMA update
    seed_xhat: bool = True  # start x_hat at the first rollout's mean errors
    randomize: bool = False

    def __post_init__(self):
        if self.cadence not in ("iteration", "step"):
            raise ValueError("cadence must be 'iteration' or 'step'")
        if self.iters < 0 or self.n_rsi < 0 or self.inner_iters < 1:
            raise ValueError("iters and n_rsi must be non-negative, inner_iters positive")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


@dataclass
class Curricula:
    termination: CurriculumSchedule = field(default_factory=termination_curriculum)
    penalty: CurriculumSchedule = field(default_factory=penalty_curriculum)

    def step(self) -> "Curricula":
        return Curricula(step_schedule(self.termination), step_schedule(self.penalty))


@dataclass
class TrainTrace:
    terms: tuple
    rows: list = field(default_factory=list)

    @property
    def columns(self) -> list:
        return (["iter"] + [f"sigma_{t}" for t in self.terms] + [f"xhat_{t}" for t in self.terms]
                + ["mean_err", "elr", "return", "theta", "alpha"])

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def sigma(self) -> np.ndarray:
        return np.array([[r[f"sigma_{t}"] for t in self.terms] for r in self.rows]).reshape(-1, len(self.terms))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _objective(env, tables, starts, factors, weights, cur: Curricula, params):
    J = np.zeros(tables.shape[0])
    for k in starts:
        J += batched_returns(env, tables, k, factors, weights, cur.penalty.value, cur.termination.value, params)
    return J / len(starts)


def fd_gradient(env, table, starts, factors, weights, cur, params, h):
    """Objective value and central-difference gradient, all perturbations in one batch."""
    n = table.size
    flat = table.reshape(-1)
    pert = np.repeat(flat[None, :], 2 * n + 1, axis=0)
    idx = np.arange(n)
    pert[idx, idx] += h
    pert[n + idx, idx] -= h
    J = _objective(env, pert.reshape(2 * n + 1, *table.shape), starts, factors, weights, cur, params)
    return J[-1], ((J[:n] - J[n:2 * n]) / (2 * h)).reshape(table.shape)


def improve_table(env, table, starts, factors, weights, cur, params, config: OptimizerConfig):
    """A few quasi-Newton ascent steps on the action table, actions kept within joint limits."""
    lo, hi = env.config.q_limits

    def neg(x):
        J, g = fd_gradient(env, x.reshape(table.shape), starts, factors, weights, cur, params, config.fd_step)
        return -J, -g.reshape(-1)

    res = minimize(neg, np.clip(table, lo, hi).reshape(-1), jac=True, method="L-BFGS-B",
                   bounds=[(lo, hi)] * table.size, options={"maxiter": config.inner_iters})
    return res.x.reshape(table.shape)


def train_adaptive(env: ToyEnv, config: OptimizerConfig, sigma_state: TrackingFactorState,
                   curricula: Optional[Curricula] = None, base_factors: Optional[TrackingFactors] = None,
                   weights: Optional[RewardWeights] = None, policy: Optional[PhaseTablePolicy] = None):
    """Optimise a phase-table policy while adapting sigma.

    ``sigma_state`` is mutated in place (single writer).  With
    ``config.adapt`` False it is left untouched and the run uses fixed
    factors.  Returns ``(policy, trace)``.
    """
    weights = weights or RewardWeights.default()
    base_factors = base_factors or TrackingFactors.preset("ours_init")
    cur = curricula or Curricula(termination=env.config.termination)
    policy = policy or PhaseTablePolicy.replay(env)
    table = policy.table.copy()
    rng = np.random.default_rng(config.seed)
    trace = TrainTrace(terms=sigma_state.terms)
    if config.adapt and config.seed_xhat:
        rec = rollout(PhaseTablePolicy(table), env, sigma_state.apply_to(base_factors), weights,
                      rsi_reset(env, phase=0.0), cur.penalty.value, cur.termination.value)
        sigma_state.x_hat = np.array([rec.errors[t].mean() for t in sigma_state.terms])

    for it in range(config.iters + 1):
        factors = sigma_state.apply_to(base_factors)
        rec = rollout(PhaseTablePolicy(table), env, factors, weights, rsi_reset(env, phase=0.0),
                      cur.penalty.value, cur.termination.value)
        trace.rows.append({
            "iter": it,
            **{f"sigma_{t}": float(s) for t, s in zip(sigma_state.terms, sigma_state.sigma)},
            **{f"xhat_{t}": float(x) for t, x in zip(sigma_state.terms, sigma_state.x_hat)},
            "mean_err": float(rec.joint_error().mean()),
            "elr": episode_length_ratio([rec], env.n_steps),
            "return": rec.total_return,
            "theta": cur.termination.value,
            "alpha": cur.penalty.value,
        })
        if it == config.iters:
            break

        # policy improvement under the current factors
        phases = rng.uniform(0.0, 1.0, size=config.n_rsi)
        starts = [0] + [min(phase_to_step(env, p), env.n_steps - 1) for p in phases]
        params = sample_env_params(env, rng.integers(2 ** 63)) if config.randomize else env.params
        table = improve_table(env, table, starts, factors, weights, cur, params, config)

        # error feedback from the improved policy
        if config.adapt:
            rec = rollout(PhaseTablePolicy(table), env, factors, weights, rsi_reset(env, phase=0.0),
                          cur.penalty.value, cur.termination.value)
            for k in range(rec.length):
                update_error_ema(sigma_state, {t: rec.errors[t][k] for t in sigma_state.terms})
                if config.cadence == "step":
                    update_sigma(sigma_state)
            if config.cadence == "iteration":
                update_sigma(sigma_state)
        cur = cur.step()

    return PhaseTablePolicy(table), trace
