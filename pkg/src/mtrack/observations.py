"""Actor and critic observation vectors.

Layout (each history block is ordered oldest step first)::

    actor  = [q x5 | dq x5 | root_ang_vel x5 | projected_gravity x5 | phase x5 | last_action x5]
    critic = actor + [root_lin_vel x5 | ref_body_pos | body_pos_diff | dr_params]

For the 23-DoF, 27-body humanoid this gives 380 and 630 entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import HistoryUnderflow, ShapeMismatch

HISTORY = 5
DOF = 23
N_BODIES = 27
# base CoM offset, link masses, kp, kd, friction, control delay
DR_SIZES = (3, 22, 23, 23, 1, 1)


@dataclass
class ProprioStep:
    q: np.ndarray
    dq: np.ndarray
    root_ang_vel: np.ndarray
    projected_gravity: np.ndarray
    last_action: np.ndarray

    @classmethod
    def zeros(cls, dof: int = DOF) -> "ProprioStep":
        return cls(np.zeros(dof), np.zeros(dof), np.zeros(3), np.zeros(3), np.zeros(dof))


def actor_slots(dof: int = DOF, history: int = HISTORY) -> dict:
    """Name -> slice of each block in the actor vector."""
    sizes = [("q", dof), ("dq", dof), ("root_ang_vel", 3), ("projected_gravity", 3), ("phase", 1),
             ("last_action", dof)]
    out, start = {}, 0
    for name, n in sizes:
        out[name] = slice(start, start + n * history)
        start += n * history
    return out


def actor_dim(dof: int = DOF, history: int = HISTORY) -> int:
    return (2 * dof + 3 + 3 + 1 + dof) * history


def critic_dim(dof: int = DOF, n_bodies: int = N_BODIES, dr_size: int = sum(DR_SIZES),
               history: int = HISTORY) -> int:
    return actor_dim(dof, history) + 3 * history + 2 * 3 * n_bodies + dr_size


def slot(dof: int, block: str, step: int, history: int = HISTORY) -> slice:
    """Slice for ``block`` at history ``step`` (0 = oldest, history-1 = newest)."""
    s = actor_slots(dof, history)[block]
    width = (s.stop - s.start) // history
    return slice(s.start + step * width, s.start + (step + 1) * width)


def _take(history: Sequence[ProprioStep], n: int) -> list:
    if len(history) < n:
        raise HistoryUnderflow(f"need {n} history steps, got {len(history)}")
    return list(history)[-n:]


def build_actor_obs(history: Sequence[ProprioStep], phase, dof: int = DOF,
                    n_history: int = HISTORY) -> np.ndarray:
    steps = _take(history, n_history)
    ph = np.broadcast_to(np.asarray(phase, dtype=float), (n_history,))

    def block(attr, n):
        parts = []
        for st in steps:
            v = np.asarray(getattr(st, attr), dtype=float).reshape(-1)
            if v.shape != (n,):
                raise ShapeMismatch(f"{attr} must have {n} entries, got {v.shape[0]}")
            parts.append(v)
        return np.concatenate(parts)

    return np.concatenate([
        block("q", dof), block("dq", dof), block("root_ang_vel", 3), block("projected_gravity", 3),
        ph.copy(), block("last_action", dof),
    ])


def build_critic_obs(history: Sequence[ProprioStep], phase, root_lin_vel, ref_body_positions,
                     body_pos_diff, dr_params, dof: int = DOF, n_bodies: int = N_BODIES,
                     dr_size: int = sum(DR_SIZES), n_history: int = HISTORY) -> np.ndarray:
    actor = build_actor_obs(history, phase, dof, n_history)
    if dr_params is None:
        raise ShapeMismatch("critic observation needs the randomised parameters")
    parts = [
        ("root_lin_vel", root_lin_vel, 3 * n_history),
        ("ref_body_positions", ref_body_positions, 3 * n_bodies),
        ("body_pos_diff", body_pos_diff, 3 * n_bodies),
        ("dr_params", dr_params, dr_size),
    ]
    out = [actor]
    for name, arr, n in parts:
        v = np.asarray(arr, dtype=float).reshape(-1)
        if v.shape != (n,):
            raise ShapeMismatch(f"{name} must have {n} entries, got {v.shape[0]}")
        out.append(v)
    return np.concatenate(out)
