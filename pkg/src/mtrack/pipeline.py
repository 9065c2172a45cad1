"""Config-driven processing pipeline with a hashed manifest.

Stages run in order per motion: filter, contact, correct, retarget,
train_toy, evaluate.  Each stage reads the previous stage's motion and
writes its own artifact.  Motions are independent and may run in
parallel; the manifest lists them in config order either way.

Stage seeds derive from the single config seed:
``int.from_bytes(sha256(f"{seed}:{motion}:{stage}")[:8], "big")``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .adaptive import TrackingFactorState
from .contact import DEFAULT_EMA_ALPHA, ContactAnnotation, correct_floating, ema_smooth, estimate_contact
from .errors import MtrackError
from .filtering import accept_motion
from .ik import IKParams, joint_path_motion, load_chain, load_map, retarget_sequence
from .metrics import compute_metrics
from .motion import canonical_dumps, load_motion, load_skeleton, motion_dumps
from .rewards import TrackingFactors, tracking_factor_presets
from .toy_env import ToyEnv, ToyEnvConfig, rollout, rsi_reset
from .training import ADAPT_TERMS, OptimizerConfig, train_adaptive

log = logging.getLogger(__name__)

SCHEMA = 1
STAGES = ("filter", "contact", "correct", "retarget", "train_toy", "evaluate")
EXIT_OK, EXIT_STAGE_FAILED, EXIT_CONFIG, EXIT_REJECTED = 0, 1, 2, 3


class ConfigError(MtrackError):
    pass


@dataclass
class Thresholds:
    eps_stab: float = 0.1
    eps_n: int = 100
    contact_height: float = 0.05
    eps_vel: float = 0.002
    eps_height: float = 0.2
    ema_alpha: float = DEFAULT_EMA_ALPHA


@dataclass
class PipelineConfig:
    output: str
    motions: list = field(default_factory=list)
    skeleton: Optional[str] = None
    chain: Optional[str] = None
    map: Optional[str] = None
    motions_dir: Optional[str] = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    preset: str = "ours_init"
    seed: int = 0
    stages: dict = field(default_factory=lambda: dict.fromkeys(STAGES, True))
    train_iters: int = 5
    ik_tol: float = 1e-4
    ik_max_iters: int = 200

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "PipelineConfig":
        d = dict(d)
        if d.pop("schema", SCHEMA) != SCHEMA:
            raise ConfigError(f"unsupported config schema; expected {SCHEMA}")
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "output" not in d:
            raise ConfigError("config needs an output directory")
        rel = lambda p: None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))
        th = Thresholds(**d.pop("thresholds", {}))
        stages = {**dict.fromkeys(STAGES, False), **d.pop("stages", {})}
        if set(stages) - set(STAGES):
            raise ConfigError(f"unknown stages: {sorted(set(stages) - set(STAGES))}")
        cfg = cls(thresholds=th, stages=stages, **d)
        for k in ("output", "skeleton", "chain", "map", "motions_dir"):
            setattr(cfg, k, rel(getattr(cfg, k)))
        cfg.motions = [rel(m) for m in cfg.motions]
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            return cls.from_dict(json.loads(path.read_text()), path.parent)
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def motion_paths(self) -> list:
        paths = list(self.motions)
        if self.motions_dir:
            paths += sorted(str(p) for p in Path(self.motions_dir).glob("*.json"))
        return paths

    def validate(self) -> None:
        """Check everything that can be checked before any output is written."""
        th = self.thresholds
        if not all(v > 0 for v in asdict(th).values()):
            raise ConfigError("thresholds must be positive")
        if not 0 < th.ema_alpha <= 1:
            raise ConfigError("ema_alpha must lie in (0, 1]")
        if self.preset not in tracking_factor_presets():
            raise ConfigError(f"unknown preset {self.preset!r}")
        on = [s for s in STAGES if self.stages.get(s)]
        needs = {"skeleton": {"filter", "contact"}, "chain": {"retarget"}, "map": {"retarget"}}
        for key, users in needs.items():
            if users & set(on):
                p = getattr(self, key)
                if p is None or not Path(p).is_file():
                    raise ConfigError(f"{key} file missing: {p}")
        if self.motions_dir and not Path(self.motions_dir).is_dir():
            raise ConfigError(f"motions_dir missing: {self.motions_dir}")
        for m in self.motion_paths():
            if not Path(m).is_file():
                raise ConfigError(f"motion file missing: {m}")
        if {"train_toy", "evaluate"} & set(on) and "retarget" not in on:
            raise ConfigError("train_toy and evaluate need the retarget stage")
        if "evaluate" in on and "train_toy" not in on:
            raise ConfigError("evaluate compares a trained rollout and needs train_toy")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = SCHEMA
        return d


def stage_seed(seed: int, motion: str, stage: str) -> int:
    return int.from_bytes(hashlib.sha256(f"{seed}:{motion}:{stage}".encode()).digest()[:8], "big")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write(path: Path, text: str) -> str:
    path.write_text(text)
    return sha256_file(path)


def process_motion(cfg: PipelineConfig, path: str) -> dict:
    """Run every enabled stage on one motion; returns its manifest entry."""
    out_root = Path(cfg.output)
    seq = load_motion(path)
    name = seq.name or Path(path).stem
    mdir = out_root / name
    mdir.mkdir(parents=True, exist_ok=True)
    entry = {"name": name, "input": str(path), "input_sha256": sha256_file(path), "status": "processed",
             "reject_reason": None, "stages": []}
    th = cfg.thresholds
    skel = load_skeleton(cfg.skeleton) if cfg.skeleton else None
    current = (str(path), entry["input_sha256"])
    ref = policy = chain = None

    def record(stage, outputs, params, **extra):
        outs = {str(Path(p).relative_to(out_root)): h for p, h in outputs.items()}
        entry["stages"].append({"stage": stage, "inputs": {current[0]: current[1]}, "outputs": outs,
                                "params": params, "seed": stage_seed(cfg.seed, name, stage), **extra})

    for stage in STAGES:
        if not cfg.stages.get(stage):
            continue
        try:
            if stage == "filter":
                rep = accept_motion(seq, skel, th.eps_stab, th.eps_n, th.contact_height)
                p = mdir / "filter.json"
                h = _write(p, canonical_dumps(rep.to_dict()) + "\n")
                record(stage, {p: h}, {"eps_stab": th.eps_stab, "eps_n": th.eps_n,
                                       "contact_height": th.contact_height})
                if not rep.accepted:
                    entry["status"] = "rejected"
                    entry["reject_reason"] = rep.reject_reason
                    return entry
                continue
            if stage == "contact":
                ann = estimate_contact(seq, skel, th.eps_vel, th.eps_height)
                seq = seq.replace(contact=ann.as_array())
                p = mdir / "contact.json"
                params = {"eps_vel": th.eps_vel, "eps_height": th.eps_height}
            elif stage == "correct":
                if seq.contact is None:
                    raise ValueError("motion has no contact labels; enable the contact stage")
                seq = ema_smooth(correct_floating(seq, ContactAnnotation.from_array(seq.contact)), th.ema_alpha)
                p = mdir / "corrected.json"
                params = {"ema_alpha": th.ema_alpha}
            elif stage == "retarget":
                chain = load_chain(cfg.chain)
                res = retarget_sequence(seq, chain, load_map(cfg.map),
                                        IKParams(tol_m=cfg.ik_tol, max_iters=cfg.ik_max_iters))
                seq = ref = res.motion
                p = mdir / "retargeted.json"
                params = {"tol": cfg.ik_tol, "max_iters": cfg.ik_max_iters,
                          "max_residual": float(res.residuals.max())}
            elif stage == "train_toy":
                env = ToyEnv(ToyEnvConfig(ref))
                factors = TrackingFactors.preset(cfg.preset)
                state = TrackingFactorState.from_factors(factors, ADAPT_TERMS)
                oc = OptimizerConfig(iters=cfg.train_iters, seed=stage_seed(cfg.seed, name, stage) % 2 ** 32)
                policy, trace = train_adaptive(env, oc, state, base_factors=factors)
                p = mdir / "train_trace.csv"
                trace.write_csv(p)
                pp = mdir / "policy.json"
                hp = _write(pp, canonical_dumps({"table": policy.table.tolist()}) + "\n")
                record(stage, {p: sha256_file(p), pp: hp}, {"preset": cfg.preset, "iters": cfg.train_iters})
                current = (str(pp.relative_to(out_root)), hp)
                continue
            else:  # evaluate
                env = ToyEnv(ToyEnvConfig(ref))
                rec = rollout(policy, env, state.apply_to(TrackingFactors.preset(cfg.preset)),
                              state=rsi_reset(env, phase=0.0))
                qs = np.vstack([ref.joint_positions[:1], [s.q for s in rec.snapshots]])
                n = len(qs)
                short = ref.replace(psi=ref.psi[:n], joint_rotations=ref.joint_rotations[:n],
                                    body_points=ref.body_points[:n], joint_positions=ref.joint_positions[:n],
                                    contact=None if ref.contact is None else ref.contact[:n])
                ro = joint_path_motion(chain, qs, short)
                p = mdir / "rollout.json"
                hr = _write(p, motion_dumps(ro))
                report = compute_metrics(ro, short, root=0, elr=rec.length / env.n_steps)
                pm = mdir / "metrics.json"
                h = _write(pm, canonical_dumps(report.to_dict()) + "\n")
                record(stage, {p: hr, pm: h}, {"root": 0})
                continue
            h = _write(p, motion_dumps(seq))
            record(stage, {p: h}, params)
            current = (str(p.relative_to(out_root)), h)
        except (MtrackError, ValueError, OSError, KeyError) as exc:
            log.error("stage %s failed for %s: %s", stage, name, exc)
            entry.update(status="failed", failed_stage=stage, error=f"{type(exc).__name__}: {exc}")
            return entry
    return entry


def run_pipeline(cfg: PipelineConfig, jobs: int = 1) -> tuple[int, dict]:
    """Validate, run and write ``manifest.json``; returns ``(exit_code, manifest)``."""
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    paths = cfg.motion_paths()
    if not any(cfg.stages.get(s) for s in STAGES):
        paths = []
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futures = [ex.submit(process_motion, cfg, p) for p in paths]
            entries = [f.result() for f in futures]
    else:
        entries = [process_motion(cfg, p) for p in paths]
    if any(e["status"] == "failed" for e in entries):
        code = EXIT_STAGE_FAILED
    elif any(e["status"] == "rejected" for e in entries):
        code = EXIT_REJECTED
    else:
        code = EXIT_OK
    cfg_dict = cfg.to_dict()
    manifest = {"schema": SCHEMA, "config": cfg_dict, "motions": entries, "exit_code": code}
    (out / "manifest.json").write_text(canonical_dumps(manifest) + "\n")
    return code, manifest
