"""Differential IK retargeting onto a kinematic tree.

Convention: a link's frame is its parent's frame, then the joint motion
(rotation about ``axis`` or translation along it), then ``fixed_offset``.
The link position reported by forward kinematics is the origin of that
frame, i.e. the far end of the link.  Joint ``i`` therefore acts at the
parent frame origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, LimitViolation, MalformedFile, UnresolvedName
from .motion import MotionSequence


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


@dataclass(frozen=True)
class Link:
    name: str
    parent: Optional[str]
    fixed_offset: tuple
    axis: tuple = (0.0, 0.0, 1.0)
    joint: str = "revolute"
    limit_min: float = -np.pi
    limit_max: float = np.pi


@dataclass(frozen=True)
class KinematicChain:
    links: tuple
    end_effectors: tuple = ()

    def __post_init__(self):
        links = tuple(self.links)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "end_effectors", tuple(self.end_effectors or (links[-1].name,)))
        seen: set = set()
        for ln in links:
            if ln.parent is not None and ln.parent not in seen:
                raise ValueError(f"link {ln.name!r}: parent {ln.parent!r} must precede it")
            if ln.name in seen:
                raise ValueError(f"duplicate link {ln.name!r}")
            if abs(np.linalg.norm(ln.axis) - 1.0) > 1e-9:
                raise ValueError(f"link {ln.name!r}: axis is not unit length")
            if ln.joint not in ("revolute", "prismatic"):
                raise ValueError(f"link {ln.name!r}: unknown joint type {ln.joint!r}")
            if not ln.limit_min < ln.limit_max:
                raise ValueError(f"link {ln.name!r}: limit_min must be < limit_max")
            seen.add(ln.name)
        for e in self.end_effectors:
            if e not in seen:
                raise UnresolvedName(f"end effector {e!r} is not a link")

    @property
    def n_joints(self) -> int:
        return len(self.links)

    @property
    def names(self) -> list[str]:
        return [ln.name for ln in self.links]

    @property
    def lower(self) -> np.ndarray:
        return np.array([ln.limit_min for ln in self.links])

    @property
    def upper(self) -> np.ndarray:
        return np.array([ln.limit_max for ln in self.links])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def ancestors(self, name: str) -> list[int]:
        """Indices of the joints that move ``name``, itself included."""
        index = {ln.name: i for i, ln in enumerate(self.links)}
        out = []
        node: Optional[str] = name
        while node is not None:
            i = index[node]
            out.append(i)
            node = self.links[i].parent
        return out

    def to_dict(self) -> dict:
        return {
            "links": [{"name": ln.name, "parent": ln.parent, "fixed_offset": list(ln.fixed_offset),
                       "axis": list(ln.axis), "joint": ln.joint, "limit_min": ln.limit_min,
                       "limit_max": ln.limit_max} for ln in self.links],
            "end_effectors": list(self.end_effectors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KinematicChain":
        try:
            links = [Link(name=ln["name"], parent=ln.get("parent"),
                          fixed_offset=tuple(float(v) for v in ln["fixed_offset"]),
                          axis=tuple(float(v) for v in ln.get("axis", (0, 0, 1))),
                          joint=ln.get("joint", "revolute"),
                          limit_min=float(ln.get("limit_min", -np.pi)),
                          limit_max=float(ln.get("limit_max", np.pi)))
                     for ln in d["links"]]
            return cls(links=tuple(links), end_effectors=tuple(d.get("end_effectors", ())))
        except (KeyError, TypeError) as exc:
            raise MalformedFile(f"bad chain description: {exc}") from exc


def planar_chain(lengths: Sequence[float], limits=(-np.pi, np.pi), effectors=None) -> KinematicChain:
    """Serial chain of z-axis revolute joints with links along local x."""
    links = []
    parent = None
    for i, L in enumerate(lengths):
        name = f"link{i + 1}"
        links.append(Link(name=name, parent=parent, fixed_offset=(float(L), 0.0, 0.0),
                          axis=(0.0, 0.0, 1.0), limit_min=limits[0], limit_max=limits[1]))
        parent = name
    return KinematicChain(links=tuple(links), end_effectors=tuple(effectors or (links[-1].name,)))


def _check_q(chain: KinematicChain, q, check_limits: bool = True) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != chain.n_joints:
        raise DimensionMismatch(f"expected {chain.n_joints} joint values, got {q.shape[0]}")
    if check_limits and ((q < chain.lower).any() or (q > chain.upper).any()):
        raise LimitViolation("joint configuration outside limits")
    return q


def _frames(chain: KinematicChain, q: np.ndarray):
    """World rotation/position of every link frame plus each joint's origin and world axis."""
    index = {}
    R_out, p_out, origin, waxis = [], [], [], []
    for i, ln in enumerate(chain.links):
        if ln.parent is None:
            Rp, pp = np.eye(3), np.zeros(3)
        else:
            j = index[ln.parent]
            Rp, pp = R_out[j], p_out[j]
        a = np.asarray(ln.axis, dtype=float)
        if ln.joint == "revolute":
            R = Rp @ rotation_matrix(a, q[i])
            p = pp + R @ np.asarray(ln.fixed_offset)
        else:
            R = Rp
            p = pp + Rp @ (a * q[i]) + R @ np.asarray(ln.fixed_offset)
        index[ln.name] = i
        R_out.append(R)
        p_out.append(p)
        origin.append(pp)
        waxis.append(Rp @ a)
    return R_out, np.array(p_out), np.array(origin), np.array(waxis)


def forward_kinematics(chain: KinematicChain, q, check_limits: bool = True) -> dict:
    """World position of every link, keyed by link name."""
    q = _check_q(chain, q, check_limits)
    _, p, _, _ = _frames(chain, q)
    return {ln.name: p[i] for i, ln in enumerate(chain.links)}


def effector_positions(chain: KinematicChain, q, check_limits: bool = True) -> np.ndarray:
    """(E, 3) positions of the chain's end effectors."""
    fk = forward_kinematics(chain, q, check_limits)
    return np.array([fk[e] for e in chain.end_effectors])


def jacobian(chain: KinematicChain, q, check_limits: bool = True) -> np.ndarray:
    """Geometric position Jacobian, shape (3 E, n_joints)."""
    q = _check_q(chain, q, check_limits)
    _, p, origin, waxis = _frames(chain, q)
    names = chain.names
    J = np.zeros((3 * len(chain.end_effectors), chain.n_joints))
    for k, e in enumerate(chain.end_effectors):
        pe = p[names.index(e)]
        for i in chain.ancestors(e):
            if chain.links[i].joint == "revolute":
                J[3 * k:3 * k + 3, i] = np.cross(waxis[i], pe - origin[i])
            else:
                J[3 * k:3 * k + 3, i] = waxis[i]
    return J


@dataclass
class IKParams:
    damping: float = 1e-2
    step_scale: float = 1.0
    max_iters: int = 200
    tol_m: float = 1e-6
    max_halvings: int = 8


@dataclass
class IKResult:
    q: np.ndarray
    residual: float
    iters: int
    history: list = field(default_factory=list)  # residual of each accepted iterate, start included
    iterates: list = field(default_factory=list)


def _residual(chain, q, targets, sqrt_w):
    e = (targets - effector_positions(chain, q, check_limits=False)) * sqrt_w[:, None]
    return e.reshape(-1), float(np.linalg.norm(e))


def ik_solve(chain: KinematicChain, targets, q_init, params: Optional[IKParams] = None,
             weights=None, keep_iterates: bool = False) -> IKResult:
    """Damped least squares with step halving and limit clamping.

    The residual is the Euclidean norm of the stacked, weight-scaled
    effector errors.  A step that would raise it is halved up to
    ``max_halvings`` times; if none helps the solver stops at the best
    iterate.
    """
    params = params or IKParams()
    if not params.damping > 0:
        raise ValueError("damping must be positive")
    targets = np.asarray(targets, dtype=float).reshape(len(chain.end_effectors), 3)
    if not np.isfinite(targets).all():
        raise ValueError("targets must be finite")
    w = np.ones(len(chain.end_effectors)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(chain.end_effectors),) or (w < 0).any() or not np.isfinite(w).all():
        raise ValueError("weights must be finite, non-negative, one per effector")
    sqrt_w = np.sqrt(w)
    q = chain.clamp(_check_q(chain, q_init, check_limits=False))
    e, r = _residual(chain, q, targets, sqrt_w)
    history = [r]
    iterates = [q.copy()] if keep_iterates else []
    lam2 = params.damping ** 2
    it = 0
    while r > params.tol_m and it < params.max_iters:
        J = jacobian(chain, q, check_limits=False) * np.repeat(sqrt_w, 3)[:, None]
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(J.shape[0]), e)
        scale = params.step_scale
        accepted = False
        for _ in range(params.max_halvings + 1):
            q_new = chain.clamp(q + scale * dq)
            e_new, r_new = _residual(chain, q_new, targets, sqrt_w)
            if r_new <= r:
                accepted = True
                break
            scale *= 0.5
        it += 1
        if not accepted:
            break
        q, e, r = q_new, e_new, r_new
        history.append(r)
        if keep_iterates:
            iterates.append(q.copy())
    return IKResult(q=q, residual=r, iters=it, history=history, iterates=iterates)


@dataclass(frozen=True)
class RetargetMap:
    pairs: tuple  # (source body point, end effector, weight)

    def __post_init__(self):
        pairs = tuple((str(s), str(e), float(w)) for s, e, w in self.pairs)
        if not pairs:
            raise ValueError("retarget map needs at least one pair")
        if not all(np.isfinite(w) and w >= 0 for _, _, w in pairs):
            raise ValueError("weights must be finite and non-negative")
        object.__setattr__(self, "pairs", pairs)

    def to_dict(self) -> dict:
        return {"pairs": [{"source": s, "effector": e, "weight": w} for s, e, w in self.pairs]}

    @classmethod
    def from_dict(cls, d: dict) -> "RetargetMap":
        try:
            return cls(pairs=tuple((p["source"], p["effector"], p.get("weight", 1.0)) for p in d["pairs"]))
        except (KeyError, TypeError) as exc:
            raise MalformedFile(f"bad retarget map: {exc}") from exc


def load_chain(path) -> KinematicChain:
    try:
        return KinematicChain.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc


def load_map(path) -> RetargetMap:
    try:
        return RetargetMap.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc


@dataclass
class RetargetResult:
    motion: MotionSequence
    residuals: np.ndarray
    iters: np.ndarray


def retarget_sequence(seq: MotionSequence, chain: KinematicChain, rmap: RetargetMap,
                      params: Optional[IKParams] = None, q_init=None) -> RetargetResult:
    """Per-frame IK, each frame warm-started from the previous solution."""
    params = params or IKParams()
    for s, e, _ in rmap.pairs:
        if s not in seq.segment_names:
            raise UnresolvedName(f"body point {s!r} not in motion")
        if e not in chain.names:
            raise UnresolvedName(f"end effector {e!r} not in chain")
    solver_chain = KinematicChain(links=chain.links, end_effectors=tuple(e for _, e, _ in rmap.pairs))
    src = [seq.segment_names.index(s) for s, _, _ in rmap.pairs]
    w = np.array([wt for _, _, wt in rmap.pairs])
    q = chain.clamp(np.zeros(chain.n_joints) if q_init is None else np.asarray(q_init, dtype=float))
    qs, res, its = [], [], []
    for t in range(len(seq)):
        sol = ik_solve(solver_chain, seq.body_points[t, src], q, params, weights=w)
        q = sol.q
        qs.append(q)
        res.append(sol.residual)
        its.append(sol.iters)
    out = joint_path_motion(chain, np.array(qs), seq)
    return RetargetResult(motion=out, residuals=np.array(res), iters=np.array(its))


def joint_path_motion(chain: KinematicChain, qs, like: MotionSequence) -> MotionSequence:
    """Robot-space motion for joint path ``qs``, timing and root taken from ``like``.

    Link positions become body points and ``axis * angle`` the rotations.
    """
    qs = np.asarray(qs, dtype=float)
    axes = np.array([ln.axis if ln.joint == "revolute" else (0.0, 0.0, 0.0) for ln in chain.links])
    pts = np.array([list(forward_kinematics(chain, qt, check_limits=False).values()) for qt in qs])
    return like.replace(joint_positions=qs, source="retargeted", joint_names=tuple(chain.names),
                        joint_rotations=qs[:, :, None] * axes[None], segment_names=tuple(chain.names),
                        body_points=pts)
