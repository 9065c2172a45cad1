"""Synthetic skeletons and motions with known ground truth."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .ik import KinematicChain, Link, RetargetMap
from .motion import Joint, MotionFrame, MotionSequence, Segment, SkeletonSpec, save_motion, save_skeleton

# (name, mass kg, parent, standing position relative to the root translation)
_HUMANOID = [
    ("pelvis", 10.0, None, (0.0, 0.0, 0.0)),
    ("torso", 20.0, "pelvis", (0.0, 0.0, 0.35)),
    ("head", 5.0, "torso", (0.0, 0.0, 0.7)),
    ("left_hand", 2.0, "torso", (0.0, 0.25, 0.1)),
    ("right_hand", 2.0, "torso", (0.0, -0.25, 0.1)),
    ("left_thigh", 7.0, "pelvis", (0.0, 0.1, -0.25)),
    ("left_shin", 4.0, "left_thigh", (0.0, 0.1, -0.6)),
    ("left_ankle", 1.0, "left_shin", (0.0, 0.1, -0.9)),
    ("right_thigh", 7.0, "pelvis", (0.0, -0.1, -0.25)),
    ("right_shin", 4.0, "right_thigh", (0.0, -0.1, -0.6)),
    ("right_ankle", 1.0, "right_shin", (0.0, -0.1, -0.9)),
]

PELVIS_HEIGHT = 0.9
UPPER_BODY = ("torso", "head", "left_hand", "right_hand")


def humanoid_skeleton() -> SkeletonSpec:
    """Eleven-segment stand-in for a human body with plausible masses."""
    segments = []
    pos = {n: np.array(p) for n, _, _, p in _HUMANOID}
    for name, mass, parent, p in _HUMANOID:
        off = pos[name] - (pos[parent] if parent else 0.0)
        segments.append(Segment(name=name, mass=mass, parent=parent, local_offset=tuple(float(v) for v in off)))
    joints = [
        Joint("left_hip", -2.5, 2.5, 20.0, 90.0),
        Joint("left_knee", -0.1, 2.6, 20.0, 150.0),
        Joint("right_hip", -2.5, 2.5, 20.0, 90.0),
        Joint("right_knee", -0.1, 2.6, 20.0, 150.0),
        Joint("waist", -2.6, 2.6, 30.0, 90.0),
    ]
    return SkeletonSpec(segments=tuple(segments), joints=tuple(joints),
                        foot_segments={"left": "left_ankle", "right": "right_ankle"})


def standing_points(skel: SkeletonSpec | None = None) -> np.ndarray:
    """(S, 3) body points of the neutral stance with the pelvis at the origin."""
    return np.array([p for _, _, _, p in _HUMANOID], dtype=float)


def _sequence(points: np.ndarray, psi: np.ndarray, fps: float, name: str, skel: SkeletonSpec,
              source: str = "synthetic") -> MotionSequence:
    T = points.shape[0]
    return MotionSequence(
        fps=fps, psi=psi, joint_rotations=np.zeros((T, len(skel.joints), 3)), body_points=points,
        name=name, source=source, joint_names=tuple(skel.joint_names),
        segment_names=tuple(skel.segment_names),
    )


def static_stand(n_frames: int = 120, fps: float = 30.0, foot_z: float = 0.0) -> MotionSequence:
    skel = humanoid_skeleton()
    base = standing_points()
    psi = np.tile([0.0, 0.0, PELVIS_HEIGHT + foot_z], (n_frames, 1))
    pts = base[None] + psi[:, None, :]
    return _sequence(pts, psi, fps, "static_stand", skel)


def toppling(n_frames: int = 120, fps: float = 30.0, max_lean: float = 0.6) -> MotionSequence:
    """Upper body leans forward progressively while the feet stay planted.

    The horizontal CoM offset grows with the lean until it leaves the
    stability threshold and never returns, so the last frame is unstable.
    """
    skel = humanoid_skeleton()
    base = standing_points()
    names = skel.segment_names
    upper = np.array([n in UPPER_BODY for n in names])
    lean = np.linspace(0.0, max_lean, n_frames)  # forward shift per metre of height
    pts = np.repeat(base[None], n_frames, axis=0)
    heights = base[:, 2] - base[:, 2].min()
    pts[:, upper, 0] += lean[:, None] * heights[upper][None, :]
    psi = np.tile([0.0, 0.0, PELVIS_HEIGHT], (n_frames, 1))
    pts = pts + psi[:, None, :]
    return _sequence(pts, psi, fps, "toppling", skel)


def gap_sequence(stable_ranges, n_frames: int, fps: float = 30.0, lean: float = 0.6) -> MotionSequence:
    """Frames inside ``stable_ranges`` (1-based inclusive pairs) stand; others lean."""
    skel = humanoid_skeleton()
    base = standing_points()
    stable = np.zeros(n_frames, dtype=bool)
    for a, b in stable_ranges:
        stable[a - 1:b] = True
    upper = np.array([n in UPPER_BODY for n in skel.segment_names])
    heights = base[:, 2] - base[:, 2].min()
    pts = np.repeat(base[None], n_frames, axis=0)
    shift = np.where(stable, 0.0, lean)
    pts[:, upper, 0] += shift[:, None] * heights[upper][None, :]
    psi = np.tile([0.0, 0.0, PELVIS_HEIGHT], (n_frames, 1))
    return _sequence(pts + psi[:, None, :], psi, fps, "gap", skel)


def gait(n_cycles: int = 3, still: int = 20, moving: int = 20, step: float = 0.05,
         still_z: float = 0.01, swing_z: float = 0.15, fps: float = 30.0):
    """Alternating-foot walk with known per-frame contact labels.

    Each foot is still on the ground for ``still`` frames, then swings for
    ``moving`` frames advancing ``step`` metres per frame at ``swing_z``;
    the right foot runs half a cycle behind the left.  A frame is labelled
    in contact when the foot is still and low on both that frame and the
    next, which is what zero-velocity contact means for a forward
    difference.  Returns ``(sequence, truth)`` with truth of shape (T, 2).
    """
    skel = humanoid_skeleton()
    period = still + moving
    T = n_cycles * period
    base = standing_points()

    def foot_track(offset):
        x = np.zeros(T)
        z = np.zeros(T)
        planted = np.zeros(T, dtype=bool)
        pos = 0.0
        for t in range(T):
            k = (t + offset) % period
            if k < still:
                planted[t] = True
                z[t] = still_z
            else:
                pos += step
                z[t] = swing_z
            x[t] = pos
        return x, z, planted

    lx, lz, lp = foot_track(0)
    rx, rz, rp = foot_track(period // 2)
    names = skel.segment_names
    pts = np.repeat(base[None], T, axis=0)
    psi = np.zeros((T, 3))
    psi[:, 0] = 0.5 * (lx + rx)
    psi[:, 2] = PELVIS_HEIGHT
    pts = pts + psi[:, None, :]
    li, ri = names.index("left_ankle"), names.index("right_ankle")
    pts[:, li, 0], pts[:, li, 2] = lx, lz
    pts[:, ri, 0], pts[:, ri, 2] = rx, rz

    def truth(x, z, planted):
        c = np.zeros(T, dtype=bool)
        c[:-1] = planted[:-1] & planted[1:] & (x[1:] == x[:-1]) & (z[1:] == z[:-1])
        c[-1] = c[-2]
        return c

    seq = _sequence(pts, psi, fps, "gait", skel)
    return seq, np.stack([truth(lx, lz, lp), truth(rx, rz, rp)], axis=1)


def sinusoid_reference(dof: int = 2, n_frames: int = 60, fps: float = 30.0,
                       amplitude=(0.6, 0.4), frequency=(0.5, 1.0), phase=(0.0, 0.7)) -> MotionSequence:
    """Robot-space reference: each joint follows ``A sin(2 pi f t + phi)``."""
    t = np.arange(n_frames) / fps
    amp = np.resize(np.asarray(amplitude, dtype=float), dof)
    freq = np.resize(np.asarray(frequency, dtype=float), dof)
    ph = np.resize(np.asarray(phase, dtype=float), dof)
    q = amp[None] * np.sin(2 * np.pi * freq[None] * t[:, None] + ph[None])
    return MotionSequence(
        fps=fps, psi=np.zeros((n_frames, 3)), joint_rotations=np.zeros((n_frames, 0, 3)),
        body_points=np.zeros((n_frames, 0, 3)), name=f"sinusoid_{dof}dof", source="synthetic",
        joint_names=tuple(f"j{i}" for i in range(dof)), joint_positions=q,
    )


def default_pose(skel: SkeletonSpec | None = None) -> MotionFrame:
    skel = skel or humanoid_skeleton()
    psi = np.array([0.0, 0.0, PELVIS_HEIGHT])
    return MotionFrame(psi=psi, joint_rotations=np.zeros((len(skel.joints), 3)),
                       body_points=standing_points() + psi, contact=(1, 1))


def random_sequence(rng: np.random.Generator, n_frames: int | None = None, n_joints: int | None = None,
                    n_segments: int | None = None, with_q: bool | None = None,
                    with_contact: bool | None = None) -> MotionSequence:
    """Arbitrary valid sequence for round-trip and property tests."""
    T = n_frames or int(rng.integers(1, 12))
    J = n_joints if n_joints is not None else int(rng.integers(0, 5))
    S = n_segments if n_segments is not None else int(rng.integers(1, 6))
    with_q = bool(rng.integers(0, 2)) if with_q is None else with_q
    with_contact = bool(rng.integers(0, 2)) if with_contact is None else with_contact
    scale = 10.0 ** rng.uniform(-3, 2)
    return MotionSequence(
        fps=float(rng.choice([24.0, 30.0, 50.0, 60.0, 29.97])),
        psi=rng.normal(size=(T, 3)) * scale,
        joint_rotations=rng.normal(size=(T, J, 3)),
        body_points=rng.normal(size=(T, S, 3)) * scale,
        name=str(rng.choice(["", "walk", "kick \"fast\"", "tai chi"])),
        source=str(rng.choice(["video", "dataset", "synthetic", "retargeted"])),
        joint_names=tuple(f"j{i}" for i in range(J)),
        segment_names=tuple(f"s{i}" for i in range(S)),
        joint_positions=rng.normal(size=(T, J + 1)) if with_q else None,
        contact=rng.integers(0, 2, size=(T, 2)) if with_contact else None,
    )


def sway(n_frames: int = 60, fps: float = 30.0, amplitude: float = 0.03, lean: float = 0.15,
         frequency: float = 0.5) -> MotionSequence:
    """Feet planted, pelvis swaying fore-aft and the upper body pitching with it."""
    skel = humanoid_skeleton()
    t = np.arange(n_frames) / fps
    s = np.sin(2 * np.pi * frequency * t)
    psi = np.zeros((n_frames, 3))
    psi[:, 0] = amplitude * s
    psi[:, 2] = PELVIS_HEIGHT
    base = standing_points()
    pts = np.repeat(base[None], n_frames, axis=0) + psi[:, None, :]
    ang = lean * s
    for name in UPPER_BODY:
        i = skel.segment_names.index(name)
        x, z = base[i, 0], base[i, 2]
        pts[:, i, 0] = psi[:, 0] + x * np.cos(ang) + z * np.sin(ang)
        pts[:, i, 2] = psi[:, 2] - x * np.sin(ang) + z * np.cos(ang)
    for side in ("left", "right"):
        for part in ("thigh", "shin", "ankle"):
            i = skel.segment_names.index(f"{side}_{part}")
            pts[:, i, :] = base[i] + np.array([0.0, 0.0, PELVIS_HEIGHT])
    return _sequence(pts, psi, fps, "sway", skel)


def demo_robot_chain():
    """Floating-base stand-in: prismatic x and z, then a waist pitch joint up to the torso."""
    return KinematicChain(links=(
        Link("base_x", None, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), "prismatic", -2.0, 2.0),
        Link("base_z", "base_x", (0.0, 0.0, 0.0), (0.0, 0.0, 1.0), "prismatic", 0.0, 2.0),
        Link("waist", "base_z", (0.0, 0.0, 0.35), (0.0, 1.0, 0.0), "revolute", -1.0, 1.0),
    ), end_effectors=("base_z", "waist"))


def demo_retarget_map():
    return RetargetMap(pairs=(("pelvis", "base_z", 1.0), ("torso", "waist", 1.0)))


def write_demo_inputs(directory, seed: int = 0, train_iters: int = 3) -> str:
    """Skeleton, chain, map, two motions and a pipeline config; returns the config path."""
    d = Path(directory)
    (d / "motions").mkdir(parents=True, exist_ok=True)
    save_skeleton(humanoid_skeleton(), d / "skeleton.json")
    (d / "chain.json").write_text(json.dumps(demo_robot_chain().to_dict(), indent=1, sort_keys=True) + "\n")
    (d / "map.json").write_text(json.dumps(demo_retarget_map().to_dict(), indent=1, sort_keys=True) + "\n")
    save_motion(sway(), d / "motions" / "sway.json")
    save_motion(toppling(), d / "motions" / "toppling.json")
    cfg = {
        "schema": 1, "output": "out", "skeleton": "skeleton.json", "chain": "chain.json", "map": "map.json",
        "motions_dir": "motions", "seed": seed, "preset": "ours_init", "train_iters": train_iters,
        "stages": {s: True for s in ("filter", "contact", "correct", "retarget", "train_toy", "evaluate")},
    }
    path = d / "pipeline.json"
    path.write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n")
    return str(path)
