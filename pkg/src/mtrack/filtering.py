"""Physics-based motion filtering.

Per frame the ground projections of the centre of mass and the centre of
pressure are compared; a frame is stable when they lie closer than
``eps_stab``.  A sequence is accepted when its first and last frames are
stable and no run of unstable frames is too long.

Both centres are proxies computed from the skeleton's body points:

* CoM: mass-weighted mean of the segment points.
* CoP: centroid of the points lower than ``contact_height``, each weighted
  by its depth below that height.  Frames without such points have no
  support and are never stable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .motion import MotionFrame, MotionSequence, SkeletonSpec

DEFAULT_EPS_STAB = 0.1
DEFAULT_EPS_N = 100
DEFAULT_CONTACT_HEIGHT = 0.05

NO_SUPPORT = None
REJECT_REASONS = ("none", "boundary_unstable", "gap_exceeded", "no_support")


def _points(frame) -> np.ndarray:
    return np.asarray(frame.body_points if isinstance(frame, MotionFrame) else frame, dtype=float)


def com_projection(frame, skeleton: SkeletonSpec) -> np.ndarray:
    pts = _points(frame)
    m = skeleton.masses
    if pts.shape[0] != m.shape[0]:
        raise ValueError(f"frame has {pts.shape[0]} points, skeleton {m.shape[0]} segments")
    return (m @ pts[:, :2]) / m.sum()


def cop_projection(frame, skeleton: SkeletonSpec, contact_height: float = DEFAULT_CONTACT_HEIGHT):
    """Ground-plane CoP proxy, or ``NO_SUPPORT`` (None) when nothing touches down."""
    if not contact_height > 0:
        raise ValueError("contact_height must be positive")
    pts = _points(frame)
    support = pts[:, 2] < contact_height
    if not support.any():
        return NO_SUPPORT
    w = contact_height - pts[support, 2]
    return (w @ pts[support, :2]) / w.sum()


def frame_stable(frame, skeleton: SkeletonSpec, eps_stab: float = DEFAULT_EPS_STAB,
                 contact_height: float = DEFAULT_CONTACT_HEIGHT) -> tuple[bool, float]:
    cop = cop_projection(frame, skeleton, contact_height)
    if cop is NO_SUPPORT:
        return False, math.inf
    d = float(np.linalg.norm(com_projection(frame, skeleton) - cop))
    return d < eps_stab, d


@dataclass
class StabilityReport:
    per_frame_distance: list
    stable_frames: list  # 1-based
    accepted: bool
    reject_reason: str = "none"
    max_gap: int = 0
    eps_stab: float = DEFAULT_EPS_STAB
    eps_n: int = DEFAULT_EPS_N
    contact_height: float = DEFAULT_CONTACT_HEIGHT
    unsupported_frames: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity; airborne frames are listed separately
        d["per_frame_distance"] = [None if math.isinf(v) else v for v in self.per_frame_distance]
        return d


def max_gap(stable_frames) -> int:
    b = list(stable_frames)
    if len(b) <= 1:
        return 0
    return int(max(b2 - b1 for b1, b2 in zip(b, b[1:])))


def accept_motion(seq: MotionSequence, skeleton: SkeletonSpec, eps_stab: float = DEFAULT_EPS_STAB,
                  eps_n: int = DEFAULT_EPS_N,
                  contact_height: float = DEFAULT_CONTACT_HEIGHT) -> StabilityReport:
    seq.bind(skeleton)
    N = len(seq)
    dists, stable, airborne = [], [], []
    for t in range(N):
        ok, d = frame_stable(seq.body_points[t], skeleton, eps_stab, contact_height)
        dists.append(d)
        if ok:
            stable.append(t + 1)
        if math.isinf(d):
            airborne.append(t + 1)
    gap = max_gap(stable)
    if not stable and len(airborne) == N:
        reason = "no_support"
    elif 1 not in stable or N not in stable:
        reason = "boundary_unstable"
    elif not gap < eps_n:
        reason = "gap_exceeded"
    else:
        reason = "none"
    return StabilityReport(per_frame_distance=dists, stable_frames=stable, accepted=reason == "none",
                           reject_reason=reason, max_gap=gap, eps_stab=eps_stab, eps_n=eps_n,
                           contact_height=contact_height, unsupported_frames=airborne)
