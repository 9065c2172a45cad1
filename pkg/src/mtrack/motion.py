"""Skeleton and motion containers, canonical motion JSON, boundary ramps.

A :class:`MotionSequence` stores its frames as stacked arrays (time first);
:meth:`MotionSequence.frame` gives the per-frame view.  All arrays are made
read-only at construction so sequences can be shared between workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .errors import InconsistentFrame, IoFailure, MalformedFile, NonFinite

SOURCES = ("video", "dataset", "synthetic", "retargeted")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Segment:
    name: str
    mass: float
    parent: Optional[str] = None
    local_offset: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Joint:
    name: str
    limit_min: float
    limit_max: float
    velocity_limit: float = math.inf
    torque_limit: float = math.inf


@dataclass(frozen=True)
class SkeletonSpec:
    segments: tuple
    joints: tuple = ()
    foot_segments: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "joints", tuple(self.joints))
        names = [s.name for s in self.segments]
        if not names:
            raise ValueError("skeleton has no segments")
        if len(set(names)) != len(names):
            raise ValueError("duplicate segment names")
        for s in self.segments:
            if not s.mass > 0:
                raise ValueError(f"segment {s.name!r} has non-positive mass")
        roots = [s.name for s in self.segments if s.parent is None]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root segment, found {roots}")
        parent_of = {s.name: s.parent for s in self.segments}
        for s in self.segments:
            seen = set()
            node = s.name
            while node is not None:
                if node in seen:
                    raise ValueError(f"cycle through segment {node!r}")
                seen.add(node)
                if node not in parent_of:
                    raise ValueError(f"unknown parent segment {node!r}")
                node = parent_of[node]
        for j in self.joints:
            if not j.limit_min < j.limit_max:
                raise ValueError(f"joint {j.name!r}: limit_min must be < limit_max")
        for side, seg in self.foot_segments.items():
            if seg not in parent_of:
                raise ValueError(f"foot segment {side}={seg!r} is not a segment")

    @property
    def segment_names(self) -> list[str]:
        return [s.name for s in self.segments]

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.segments], dtype=float)

    @property
    def root(self) -> str:
        return next(s.name for s in self.segments if s.parent is None)

    def segment_index(self, name: str) -> int:
        return self.segment_names.index(name)

    def joint_limits(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([j.limit_min for j in self.joints], dtype=float),
                np.array([j.limit_max for j in self.joints], dtype=float))

    def velocity_limits(self) -> np.ndarray:
        return np.array([j.velocity_limit for j in self.joints], dtype=float)

    def torque_limits(self) -> np.ndarray:
        return np.array([j.torque_limit for j in self.joints], dtype=float)

    def to_dict(self) -> dict:
        return {
            "segments": [{"name": s.name, "mass": s.mass, "parent": s.parent,
                          "local_offset": list(s.local_offset)} for s in self.segments],
            "joints": [{"name": j.name, "limit_min": j.limit_min, "limit_max": j.limit_max,
                        "velocity_limit": j.velocity_limit, "torque_limit": j.torque_limit}
                       for j in self.joints],
            "foot_segments": dict(self.foot_segments),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonSpec":
        try:
            segments = [Segment(name=s["name"], mass=float(s["mass"]), parent=s.get("parent"),
                                local_offset=tuple(float(v) for v in s.get("local_offset", (0, 0, 0))))
                        for s in d["segments"]]
            joints = [Joint(name=j["name"], limit_min=float(j["limit_min"]),
                            limit_max=float(j["limit_max"]),
                            velocity_limit=float(j.get("velocity_limit", math.inf)),
                            torque_limit=float(j.get("torque_limit", math.inf)))
                      for j in d.get("joints", [])]
            feet = dict(d.get("foot_segments", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"bad skeleton description: {exc}") from exc
        return cls(segments=tuple(segments), joints=tuple(joints), foot_segments=feet)


def load_skeleton(path) -> SkeletonSpec:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    try:
        return SkeletonSpec.from_dict(d)
    except ValueError as exc:
        if isinstance(exc, MalformedFile):
            raise
        raise MalformedFile(f"{path}: {exc}") from exc


def save_skeleton(skel: SkeletonSpec, path) -> None:
    Path(path).write_text(json.dumps(skel.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class MotionFrame:
    psi: np.ndarray
    joint_rotations: np.ndarray
    body_points: np.ndarray
    joint_positions: Optional[np.ndarray] = None
    contact: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "psi", _frozen(self.psi).reshape(3))
        object.__setattr__(self, "joint_rotations", _frozen(self.joint_rotations).reshape(-1, 3))
        object.__setattr__(self, "body_points", _frozen(self.body_points).reshape(-1, 3))
        if self.joint_positions is not None:
            object.__setattr__(self, "joint_positions", _frozen(self.joint_positions).reshape(-1))


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """Uniformly sampled motion.

    Shapes: ``psi`` (T, 3), ``joint_rotations`` (T, J, 3) axis-angle,
    ``body_points`` (T, S, 3) world positions, ``joint_positions`` (T, Q)
    or None, ``contact`` (T, 2) of 0/1 (left, right) or None.
    """

    fps: float
    psi: np.ndarray
    joint_rotations: np.ndarray
    body_points: np.ndarray
    name: str = ""
    source: str = "synthetic"
    joint_names: tuple = ()
    segment_names: tuple = ()
    joint_positions: Optional[np.ndarray] = None
    contact: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (isinstance(self.fps, (int, float)) and math.isfinite(self.fps) and self.fps > 0):
            raise ValueError(f"fps must be positive, got {self.fps!r}")
        object.__setattr__(self, "fps", float(self.fps))
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        psi = _frozen(self.psi)
        if psi.ndim != 2 or psi.shape[1] != 3 or psi.shape[0] == 0:
            raise InconsistentFrame(f"psi must be (T, 3) with T >= 1, got {psi.shape}")
        T = psi.shape[0]
        rot = _frozen(self.joint_rotations)
        if rot.size == 0:
            rot = _frozen(np.zeros((T, len(self.joint_names), 3)))
        if rot.ndim != 3 or rot.shape[0] != T or rot.shape[2] != 3:
            raise InconsistentFrame(f"joint_rotations must be (T, J, 3), got {rot.shape}")
        pts = _frozen(self.body_points)
        if pts.size == 0:
            pts = _frozen(np.zeros((T, len(self.segment_names), 3)))
        if pts.ndim != 3 or pts.shape[0] != T or pts.shape[2] != 3:
            raise InconsistentFrame(f"body_points must be (T, S, 3), got {pts.shape}")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "joint_rotations", rot)
        object.__setattr__(self, "body_points", pts)
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "segment_names", tuple(self.segment_names))
        if self.joint_names and len(self.joint_names) != rot.shape[1]:
            raise InconsistentFrame("joint_names length does not match joint_rotations")
        if self.segment_names and len(self.segment_names) != pts.shape[1]:
            raise InconsistentFrame("segment_names length does not match body_points")
        arrays = [psi, rot, pts]
        if self.joint_positions is not None:
            jp = _frozen(self.joint_positions)
            if jp.ndim != 2 or jp.shape[0] != T:
                raise InconsistentFrame(f"joint_positions must be (T, Q), got {jp.shape}")
            object.__setattr__(self, "joint_positions", jp)
            arrays.append(jp)
        if self.contact is not None:
            c = _frozen(self.contact, dtype=np.int8)
            if c.shape != (T, 2) or not np.isin(c, (0, 1)).all():
                raise InconsistentFrame("contact must be (T, 2) of 0/1")
            object.__setattr__(self, "contact", c)
        for a in arrays:
            if not np.isfinite(a).all():
                raise NonFinite("motion contains NaN or Inf coordinates")

    def __len__(self) -> int:
        return self.psi.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.fps

    def frame(self, t: int) -> MotionFrame:
        return MotionFrame(
            psi=self.psi[t], joint_rotations=self.joint_rotations[t], body_points=self.body_points[t],
            joint_positions=None if self.joint_positions is None else self.joint_positions[t],
            contact=None if self.contact is None else tuple(int(v) for v in self.contact[t]),
        )

    @property
    def frames(self) -> list[MotionFrame]:
        return [self.frame(t) for t in range(len(self))]

    def point(self, name: str) -> np.ndarray:
        """(T, 3) trajectory of the named body point."""
        try:
            return self.body_points[:, self.segment_names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def replace(self, **changes) -> "MotionSequence":
        kw = dict(fps=self.fps, psi=self.psi, joint_rotations=self.joint_rotations,
                  body_points=self.body_points, name=self.name, source=self.source,
                  joint_names=self.joint_names, segment_names=self.segment_names,
                  joint_positions=self.joint_positions, contact=self.contact)
        kw.update(changes)
        return MotionSequence(**kw)

    def bind(self, skeleton: SkeletonSpec) -> "MotionSequence":
        """Check body points against ``skeleton``; returns self."""
        n = len(skeleton.segments)
        if self.body_points.shape[1] != n:
            raise InconsistentFrame(
                f"motion has {self.body_points.shape[1]} body points, skeleton has {n} segments")
        if self.segment_names and list(self.segment_names) != skeleton.segment_names:
            raise InconsistentFrame("motion segment names differ from skeleton")
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, MotionSequence):
            return NotImplemented
        if (self.fps, self.name, self.source, self.joint_names, self.segment_names) != (
                other.fps, other.name, other.source, other.joint_names, other.segment_names):
            return False
        for a, b in ((self.psi, other.psi), (self.joint_rotations, other.joint_rotations),
                     (self.body_points, other.body_points),
                     (self.joint_positions, other.joint_positions), (self.contact, other.contact)):
            if (a is None) != (b is None):
                return False
            if a is not None and (a.shape != b.shape or not np.array_equal(a, b)):
                return False
        return True

    __hash__ = None


# --- canonical JSON -------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise NonFinite("cannot serialise non-finite number")
    return format(x, ".17g")


def _emit(obj) -> str:
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + _emit(obj[k]) for k in sorted(obj)) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    return _num(obj)


def canonical_dumps(obj: Any) -> str:
    """Sorted keys, no whitespace, floats at 17 significant digits."""
    return _emit(obj)


def motion_to_dict(seq: MotionSequence) -> dict:
    frames = []
    for t in range(len(seq)):
        f: dict = {
            "psi": [float(v) for v in seq.psi[t]],
            "joint_rotations": [float(v) for v in seq.joint_rotations[t].ravel()],
            "body_points": [float(v) for v in seq.body_points[t].ravel()],
        }
        if seq.joint_positions is not None:
            f["joint_positions"] = [float(v) for v in seq.joint_positions[t]]
        if seq.contact is not None:
            f["contact"] = {"left": int(seq.contact[t, 0]), "right": int(seq.contact[t, 1])}
        frames.append(f)
    return {
        "fps": float(seq.fps),
        "name": seq.name,
        "source": seq.source,
        "joint_names": list(seq.joint_names),
        "segment_names": list(seq.segment_names),
        "frames": frames,
    }


def motion_dumps(seq: MotionSequence) -> str:
    d = motion_to_dict(seq)
    parts = []
    for k in sorted(d):
        if k == "frames":
            # one frame record per line
            body = ",\n".join(canonical_dumps(f) for f in d[k])
            parts.append('"frames":[\n' + body + "\n]")
        else:
            parts.append(json.dumps(k) + ":" + canonical_dumps(d[k]))
    return "{" + ",".join(parts) + "}\n"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise MalformedFile(msg)


def motion_from_dict(d: dict) -> MotionSequence:
    _require(isinstance(d, dict), "top level must be an object")
    for key in ("fps", "name", "source", "joint_names", "segment_names", "frames"):
        _require(key in d, f"missing field {key!r}")
    _require(isinstance(d["fps"], (int, float)) and not isinstance(d["fps"], bool), "fps must be a number")
    _require(isinstance(d["name"], str), "name must be a string")
    _require(d["source"] in SOURCES, f"source must be one of {SOURCES}")
    _require(isinstance(d["joint_names"], list) and all(isinstance(n, str) for n in d["joint_names"]),
             "joint_names must be an array of strings")
    _require(isinstance(d["segment_names"], list) and all(isinstance(n, str) for n in d["segment_names"]),
             "segment_names must be an array of strings")
    frames = d["frames"]
    _require(isinstance(frames, list) and len(frames) > 0, "frames must be a non-empty array")
    _require(d["fps"] > 0, "fps must be positive")
    J, S = len(d["joint_names"]), len(d["segment_names"])
    has_q = "joint_positions" in frames[0]
    has_c = "contact" in frames[0]
    psi, rot, pts, qs, cs = [], [], [], [], []
    for i, f in enumerate(frames):
        _require(isinstance(f, dict), f"frame {i} is not an object")
        for key in ("psi", "joint_rotations", "body_points"):
            _require(key in f, f"frame {i}: missing {key!r}")
            _require(isinstance(f[key], list), f"frame {i}: {key!r} must be an array")
            _require(all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in f[key]),
                     f"frame {i}: {key!r} must hold numbers")
        if len(f["psi"]) != 3:
            raise InconsistentFrame(f"frame {i}: psi needs 3 numbers")
        if len(f["joint_rotations"]) != 3 * J:
            raise InconsistentFrame(f"frame {i}: expected {3 * J} joint rotation numbers, "
                                    f"got {len(f['joint_rotations'])}")
        if len(f["body_points"]) != 3 * S:
            raise InconsistentFrame(f"frame {i}: expected {3 * S} body point numbers, "
                                    f"got {len(f['body_points'])}")
        if ("joint_positions" in f) != has_q or ("contact" in f) != has_c:
            raise InconsistentFrame(f"frame {i}: optional fields differ from frame 0")
        psi.append(f["psi"])
        rot.append(np.reshape(f["joint_rotations"], (J, 3)))
        pts.append(np.reshape(f["body_points"], (S, 3)))
        if has_q:
            _require(isinstance(f["joint_positions"], list), f"frame {i}: joint_positions must be an array")
            if qs and len(f["joint_positions"]) != len(qs[0]):
                raise InconsistentFrame(f"frame {i}: joint_positions length differs")
            qs.append(f["joint_positions"])
        if has_c:
            c = f["contact"]
            _require(isinstance(c, dict) and set(c) == {"left", "right"}, f"frame {i}: bad contact")
            _require(all(v in (0, 1) for v in c.values()), f"frame {i}: contact values must be 0 or 1")
            cs.append((int(c["left"]), int(c["right"])))
    try:
        return MotionSequence(
            fps=float(d["fps"]), psi=np.array(psi, dtype=float),
            joint_rotations=np.array(rot, dtype=float).reshape(len(frames), J, 3),
            body_points=np.array(pts, dtype=float).reshape(len(frames), S, 3),
            name=d["name"], source=d["source"], joint_names=tuple(d["joint_names"]),
            segment_names=tuple(d["segment_names"]),
            joint_positions=np.array(qs, dtype=float) if has_q else None,
            contact=np.array(cs, dtype=np.int8) if has_c else None,
        )
    except ValueError as exc:
        if isinstance(exc, (NonFinite, InconsistentFrame)):
            raise
        raise MalformedFile(str(exc)) from exc


def motion_loads(text: str) -> MotionSequence:
    try:
        d = json.loads(text, parse_int=float)
    except json.JSONDecodeError as exc:
        raise MalformedFile(str(exc)) from exc
    if isinstance(d, dict):
        for f in d.get("frames", []) if isinstance(d.get("frames"), list) else []:
            if isinstance(f, dict) and isinstance(f.get("contact"), dict):
                f["contact"] = {k: int(v) if isinstance(v, float) and v in (0.0, 1.0) else v
                                for k, v in f["contact"].items()}
    return motion_from_dict(d)


def load_motion(path) -> MotionSequence:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return motion_loads(text)


def save_motion(seq: MotionSequence, path) -> None:
    try:
        Path(path).write_text(motion_dumps(seq))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def interpolate_boundaries(seq: MotionSequence, default_pose: MotionFrame,
                           ramp_frames: int = 30) -> MotionSequence:
    """Pad ``seq`` with linear ramps from and back to ``default_pose``.

    The leading ramp starts exactly at the default pose and stops one step
    short of frame 0; the trailing ramp starts one step after the last
    frame and ends exactly at the default pose.
    """
    if ramp_frames < 0:
        raise ValueError("ramp_frames must be >= 0")
    if ramp_frames == 0:
        return seq
    R = int(ramp_frames)
    if default_pose.body_points.shape != seq.body_points.shape[1:]:
        raise InconsistentFrame("default pose body points do not match the motion")
    if default_pose.joint_rotations.shape != seq.joint_rotations.shape[1:]:
        raise InconsistentFrame("default pose joint rotations do not match the motion")
    if seq.joint_positions is not None and (
            default_pose.joint_positions is None
            or default_pose.joint_positions.shape != seq.joint_positions.shape[1:]):
        raise InconsistentFrame("default pose needs joint_positions matching the motion")

    w_in = (np.arange(R) / R)  # default -> first frame
    w_out = (np.arange(1, R + 1) / R)  # last frame -> default

    def ramp(default, first, last):
        default = np.asarray(default, dtype=float)
        shape = (R,) + (1,) * default.ndim
        head = default + w_in.reshape(shape) * (first - default)
        tail = last + w_out.reshape(shape) * (default - last)
        return head, tail

    def pad(arr, default):
        head, tail = ramp(default, arr[0], arr[-1])
        return np.concatenate([head, arr, tail], axis=0)

    changes = dict(
        psi=pad(seq.psi, default_pose.psi),
        joint_rotations=pad(seq.joint_rotations, default_pose.joint_rotations),
        body_points=pad(seq.body_points, default_pose.body_points),
    )
    if seq.joint_positions is not None:
        changes["joint_positions"] = pad(seq.joint_positions, default_pose.joint_positions)
    if seq.contact is not None:
        head_c = np.repeat(seq.contact[:1], R, axis=0)
        tail_c = np.repeat(seq.contact[-1:], R, axis=0)
        if default_pose.contact is not None:
            head_c[:] = default_pose.contact
            tail_c[:] = default_pose.contact
        changes["contact"] = np.concatenate([head_c, seq.contact, tail_c], axis=0)
    return seq.replace(**changes)


def stack_frames(frames: Sequence[MotionFrame], fps: float, **meta) -> MotionSequence:
    """Build a sequence from per-frame records."""
    qs = [f.joint_positions for f in frames]
    cs = [f.contact for f in frames]
    return MotionSequence(
        fps=fps,
        psi=np.stack([f.psi for f in frames]),
        joint_rotations=np.stack([f.joint_rotations for f in frames]),
        body_points=np.stack([f.body_points for f in frames]),
        joint_positions=None if any(q is None for q in qs) else np.stack(qs),
        contact=None if any(c is None for c in cs) else np.array(cs),
        **meta,
    )
