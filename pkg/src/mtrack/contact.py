"""Foot contact masks, floating correction and translation smoothing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LengthMismatch, MissingFootSegment
from .motion import MotionSequence, SkeletonSpec

DEFAULT_EPS_VEL = 0.002  # squared displacement per frame, m^2
DEFAULT_EPS_HEIGHT = 0.2
DEFAULT_EMA_ALPHA = 0.8


@dataclass(frozen=True, eq=False)
class ContactAnnotation:
    left: np.ndarray
    right: np.ndarray
    eps_vel: float = DEFAULT_EPS_VEL
    eps_height: float = DEFAULT_EPS_HEIGHT

    def __post_init__(self):
        left = np.asarray(self.left, dtype=bool).copy()
        right = np.asarray(self.right, dtype=bool).copy()
        if left.shape != right.shape or left.ndim != 1:
            raise LengthMismatch("left and right masks must be 1-D and equally long")
        left.flags.writeable = False
        right.flags.writeable = False
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __len__(self) -> int:
        return self.left.shape[0]

    def as_array(self) -> np.ndarray:
        """(T, 2) int8 array, left then right."""
        return np.stack([self.left, self.right], axis=1).astype(np.int8)

    @classmethod
    def from_array(cls, arr, **kw) -> "ContactAnnotation":
        arr = np.asarray(arr)
        return cls(left=arr[:, 0], right=arr[:, 1], **kw)

    def any_contact(self) -> np.ndarray:
        return self.left | self.right


def _foot_track(seq: MotionSequence, skeleton: SkeletonSpec, side: str) -> np.ndarray:
    seg = skeleton.foot_segments.get(side)
    if seg is None or seg not in skeleton.segment_names:
        raise MissingFootSegment(f"skeleton does not designate a {side} foot segment")
    return seq.body_points[:, skeleton.segment_index(seg)]


def _mask(p: np.ndarray, eps_vel: float, eps_height: float) -> np.ndarray:
    step = np.sum((p[1:] - p[:-1]) ** 2, axis=1)
    m = (step < eps_vel) & (p[:-1, 2] < eps_height)
    # no successor for the final frame: reuse the penultimate decision
    return np.append(m, m[-1])


def estimate_contact(seq: MotionSequence, skeleton: SkeletonSpec, eps_vel: float = DEFAULT_EPS_VEL,
                     eps_height: float = DEFAULT_EPS_HEIGHT) -> ContactAnnotation:
    """Zero-velocity contact test on the foot points.

    A foot is in contact at frame t when its squared displacement to frame
    t+1 is below ``eps_vel`` and its height is below ``eps_height``.
    """
    if len(seq) < 2:
        raise ValueError("contact estimation needs at least two frames")
    seq.bind(skeleton)
    left = _mask(_foot_track(seq, skeleton, "left"), eps_vel, eps_height)
    right = _mask(_foot_track(seq, skeleton, "right"), eps_vel, eps_height)
    return ContactAnnotation(left=left, right=right, eps_vel=eps_vel, eps_height=eps_height)


def lowest_point(seq: MotionSequence, sole_offsets: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-frame minimum height over the body points.

    ``sole_offsets`` (S,) extends each point downward by that many metres,
    letting a foot point stand in for the sole below it.
    """
    z = seq.body_points[:, :, 2]
    if sole_offsets is not None:
        z = z - np.asarray(sole_offsets, dtype=float)[None, :]
    return z.min(axis=1)


def correct_floating(seq: MotionSequence, contact: ContactAnnotation,
                     sole_offsets: Optional[np.ndarray] = None) -> MotionSequence:
    """Shift contact frames down so their lowest point touches z = 0."""
    if len(contact) != len(seq):
        raise LengthMismatch(f"contact has {len(contact)} frames, motion has {len(seq)}")
    dh = np.where(contact.any_contact(), lowest_point(seq, sole_offsets), 0.0)
    psi = seq.psi.copy()
    pts = seq.body_points.copy()
    psi[:, 2] -= dh
    pts[:, :, 2] -= dh[:, None]
    return seq.replace(psi=psi, body_points=pts, contact=contact.as_array())


def ema(x: np.ndarray, alpha: float) -> np.ndarray:
    """Causal EMA along axis 0: y0 = x0, y_t = alpha x_t + (1 - alpha) y_{t-1}."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    y = np.empty_like(x)
    y[0] = x[0]
    for t in range(1, x.shape[0]):
        y[t] = alpha * x[t] + (1.0 - alpha) * y[t - 1]
    return y


def ema_smooth(seq: MotionSequence, alpha: float = DEFAULT_EMA_ALPHA) -> MotionSequence:
    """Smooth root translation and body points; rotations are left alone."""
    if alpha == 1.0:
        return seq
    return seq.replace(psi=ema(seq.psi, alpha), body_points=ema(seq.body_points, alpha))


def contact_error(pred: ContactAnnotation, truth: ContactAnnotation) -> float:
    """Mean over frames of the L1 mask difference summed over both feet."""
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} vs {len(truth)} frames")
    if len(pred) == 0:
        return 0.0
    diff = (pred.left != truth.left).astype(float) + (pred.right != truth.right).astype(float)
    return float(diff.mean())


def contact_accuracy(pred: ContactAnnotation, truth: ContactAnnotation) -> float:
    """Fraction of per-foot, per-frame labels that agree."""
    return 1.0 - contact_error(pred, truth) / 2.0
