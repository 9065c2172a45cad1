"""Tracking metrics between a rollout and its reference.

Every metric is the per-body (or per-joint) L2 norm of the difference,
averaged over bodies and frames together.  Velocity and acceleration
metrics use first and second frame differences, so they average over
frames ``t >= 1`` and ``t >= 2``.  Units are per frame, never per second.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ShapeMismatch, TooShort
from .motion import MotionSequence, SkeletonSpec

MM = 1000.0
MILLI_RAD = 1000.0
AVERAGING = "per-body L2 norm, then mean over bodies and frames"

UNIT_KEYS = {
    "e_g_mpbpe": "e_g_mpbpe_mm",
    "e_mpbpe": "e_mpbpe_mm",
    "e_mpjpe": "e_mpjpe_milli_rad",
    "e_mpjve": "e_mpjve_milli_rad_per_frame",
    "e_mpbve": "e_mpbve_mm_per_frame",
    "e_mpbae": "e_mpbae_mm_per_frame2",
    "elr": "elr",
    "e_contact_mask": "e_contact_mask",
}


@dataclass(frozen=True)
class MetricsReport:
    e_g_mpbpe: float
    e_mpbpe: float
    e_mpjpe: float
    e_mpjve: float
    e_mpbve: float
    e_mpbae: float
    elr: float = 1.0
    e_contact_mask: Optional[float] = None  # None when either side lacks contact labels

    def to_dict(self) -> dict:
        """Keys carry their units; averaging order is recorded as metadata."""
        out = {UNIT_KEYS[k]: v for k, v in asdict(self).items()}
        out["_averaging"] = AVERAGING
        return out


def _mean_norm(d: np.ndarray) -> float:
    n = np.linalg.norm(d, axis=-1)
    # a motion without joints (or bodies) has nothing to mistrack
    return float(np.mean(n)) if n.size else 0.0


def _joint_arrays(rollout: MotionSequence, reference: MotionSequence):
    # scalar joint coordinates when both carry them, else per-joint rotation vectors
    if rollout.joint_positions is not None and reference.joint_positions is not None:
        return rollout.joint_positions[..., None], reference.joint_positions[..., None]
    return rollout.joint_rotations, reference.joint_rotations


def compute_metrics(rollout: MotionSequence, reference: MotionSequence, root: Optional[int] = None,
                    skeleton: Optional[SkeletonSpec] = None, elr: float = 1.0) -> MetricsReport:
    """Compare two equally long motions.

    ``root`` indexes the body used for root-relative positions; it defaults
    to the skeleton's root segment, or body 0 without a skeleton.
    """
    T = len(reference)
    if len(rollout) != T:
        raise ShapeMismatch(f"rollout has {len(rollout)} frames, reference {T}")
    if T < 3:
        raise TooShort("need at least 3 frames for the acceleration metric")
    P, R = rollout.body_points, reference.body_points
    if P.shape != R.shape:
        raise ShapeMismatch(f"body points {P.shape} vs {R.shape}")
    q, qr = _joint_arrays(rollout, reference)
    if q.shape != qr.shape:
        raise ShapeMismatch(f"joints {q.shape} vs {qr.shape}")
    if root is None:
        root = skeleton.segment_index(skeleton.root) if skeleton is not None else 0
    if not 0 <= root < P.shape[1]:
        raise ShapeMismatch(f"root index {root} out of range")

    rel = (P - P[:, root:root + 1]) - (R - R[:, root:root + 1])
    dq = np.diff(q, axis=0) - np.diff(qr, axis=0)
    dP = np.diff(P, axis=0) - np.diff(R, axis=0)
    ddP = np.diff(P, n=2, axis=0) - np.diff(R, n=2, axis=0)

    contact = None
    if rollout.contact is not None and reference.contact is not None:
        contact = float(np.mean(np.abs(rollout.contact.astype(float) - reference.contact.astype(float)).sum(axis=1)))

    return MetricsReport(
        e_g_mpbpe=MM * _mean_norm(P - R),
        e_mpbpe=MM * _mean_norm(rel),
        e_mpjpe=MILLI_RAD * _mean_norm(q - qr),
        e_mpjve=MILLI_RAD * _mean_norm(dq),
        e_mpbve=MM * _mean_norm(dP),
        e_mpbae=MM * _mean_norm(ddP),
        elr=float(elr),
        e_contact_mask=contact,
    )
