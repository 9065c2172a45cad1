"""Command-line entry point: ``mtrack <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import curriculum
from .adaptive import TrackingFactorState
from .bilevel import BiLevelInstance, closed_form_sigma, grid_extremum, optimal_sigma
from .contact import (DEFAULT_EMA_ALPHA, DEFAULT_EPS_HEIGHT, DEFAULT_EPS_VEL, ContactAnnotation,
                      correct_floating, ema_smooth, estimate_contact)
from .errors import MtrackError
from .filtering import DEFAULT_CONTACT_HEIGHT, DEFAULT_EPS_N, DEFAULT_EPS_STAB, accept_motion
from .ik import IKParams, load_chain, load_map, retarget_sequence
from .metrics import compute_metrics
from .motion import canonical_dumps, load_motion, load_skeleton, save_motion
from .pipeline import EXIT_CONFIG, EXIT_REJECTED, ConfigError, PipelineConfig, run_pipeline
from .rewards import TrackingFactors, tracking_factor_presets
from .synthetic import sinusoid_reference, write_demo_inputs
from .toy_env import ToyEnv, ToyEnvConfig
from .training import ADAPT_TERMS, OptimizerConfig, train_adaptive

log = logging.getLogger("mtrack")


def _write_json(path, obj) -> None:
    Path(path).write_text(canonical_dumps(obj) + "\n")


def cmd_filter(a) -> int:
    rep = accept_motion(load_motion(a.input), load_skeleton(a.skeleton), a.eps_stab, a.eps_n, a.contact_height)
    if a.report:
        _write_json(a.report, rep.to_dict())
    print(f"{'accepted' if rep.accepted else 'rejected'} reason={rep.reject_reason} max_gap={rep.max_gap}")
    return 0 if rep.accepted else EXIT_REJECTED


def cmd_contact(a) -> int:
    seq = load_motion(a.input)
    ann = estimate_contact(seq, load_skeleton(a.skeleton), a.eps_vel, a.eps_height)
    save_motion(seq.replace(contact=ann.as_array()), a.output)
    return 0


def cmd_correct(a) -> int:
    seq = load_motion(a.input)
    if seq.contact is None:
        raise MtrackError(f"{a.input} has no contact labels; run `mtrack contact` first")
    out = ema_smooth(correct_floating(seq, ContactAnnotation.from_array(seq.contact)), a.ema_alpha)
    save_motion(out, a.output)
    return 0


def cmd_retarget(a) -> int:
    res = retarget_sequence(load_motion(a.input), load_chain(a.chain), load_map(a.map),
                            IKParams(tol_m=a.tol, max_iters=a.max_iters))
    save_motion(res.motion, a.output)
    print(f"frames={len(res.motion)} max_residual={res.residuals.max():.3g} mean_iters={res.iters.mean():.1f}")
    return 0


def cmd_oracle(a) -> int:
    coeffs = [float(c) for c in a.coeffs.split(",") if c.strip()]
    bounds = None
    if a.sigma_lo is not None or a.sigma_hi is not None:
        top = 1.0 / max(coeffs)
        bounds = (a.sigma_lo if a.sigma_lo is not None else top * 1e-9, a.sigma_hi if a.sigma_hi is not None else top)
    inst = BiLevelInstance(np.array(coeffs), bounds)
    opt = optimal_sigma(inst)
    g, spacing = grid_extremum(inst)
    report = {
        "coeffs": coeffs, "sigma_bounds": list(inst.sigma_bounds), "sigma_star": opt.sigma,
        "x_star": opt.x.tolist(), "fixed_point_residual": opt.fixed_point_residual,
        "external_objective": opt.external, "hypergradient": opt.hypergradient, "interior": opt.interior,
        "closed_form_sigma": closed_form_sigma(coeffs), "grid_sigma": g, "grid_log_spacing": spacing,
        "grid_agrees": bool(abs(np.log(g) - np.log(opt.sigma)) <= spacing),
    }
    if a.report:
        _write_json(a.report, report)
    print(f"sigma*={opt.sigma:.12g} residual={opt.fixed_point_residual:.3g} grid_agrees={report['grid_agrees']}")
    return 0


def _train(ref, a, adapt: bool):
    env = ToyEnv(ToyEnvConfig(ref))
    factors = TrackingFactors.preset(a.preset)
    state = TrackingFactorState.from_factors(factors, ADAPT_TERMS)
    oc = OptimizerConfig(iters=a.iters, seed=a.seed, adapt=adapt, cadence=a.cadence, randomize=a.randomize)
    policy, trace = train_adaptive(env, oc, state, base_factors=factors)
    if a.trace:
        trace.write_csv(a.trace)
    last = trace.rows[-1]
    print(f"iters={a.iters} mean_err={last['mean_err']:.6g} elr={last['elr']:.3g} "
          + " ".join(f"sigma_{t}={last['sigma_' + t]:.4g}" for t in trace.terms))
    return policy, trace


def cmd_adapt_demo(a) -> int:
    _train(sinusoid_reference(), a, adapt=True)
    return 0


def cmd_train_toy(a) -> int:
    policy, _ = _train(load_motion(a.ref), a, adapt=not a.fixed)
    if a.policy:
        _write_json(a.policy, {"table": policy.table.tolist()})
    return 0


def cmd_schedule(a) -> int:
    out = open(a.output, "w", newline="") if a.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["k", "theta", "alpha"])
        for k, th, al in curriculum.table(a.k_max, a.every):
            w.writerow([k, repr(th), repr(al)])
    finally:
        if a.output:
            out.close()
    return 0


def cmd_evaluate(a) -> int:
    skel = load_skeleton(a.skeleton) if a.skeleton else None
    rep = compute_metrics(load_motion(a.rollout), load_motion(a.ref), root=a.root, skeleton=skel, elr=a.elr)
    d = rep.to_dict()
    if a.report:
        _write_json(a.report, d)
    print(json.dumps({k: v for k, v in d.items() if not k.startswith("_")}, sort_keys=True))
    return 0


def cmd_pipeline(a) -> int:
    code, manifest = run_pipeline(PipelineConfig.load(a.config), jobs=a.jobs)
    for e in manifest["motions"]:
        if e["status"] == "failed":
            print(f"stage {e['failed_stage']} failed for {e['name']}: {e['error']}", file=sys.stderr)
        elif e["status"] == "rejected":
            print(f"{e['name']}: rejected after filter ({e['reject_reason']})", file=sys.stderr)
        else:
            print(f"{e['name']}: {len(e['stages'])} stages done")
    return code


def cmd_demo(a) -> int:
    print(write_demo_inputs(a.dir, seed=a.seed))
    return 0


def _positive(kind):
    def parse(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtrack", description="Motion processing and adaptive tracking toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("filter", help="physics-based stability filter (exit 3 on reject)")
    s.add_argument("--input", required=True)
    s.add_argument("--skeleton", required=True)
    s.add_argument("--eps-stab", type=_positive(float), default=DEFAULT_EPS_STAB)
    s.add_argument("--eps-n", type=_positive(int), default=DEFAULT_EPS_N)
    s.add_argument("--contact-height", type=_positive(float), default=DEFAULT_CONTACT_HEIGHT)
    s.add_argument("--report")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("contact", help="zero-velocity foot contact labels")
    s.add_argument("--input", required=True)
    s.add_argument("--skeleton", required=True)
    s.add_argument("--eps-vel", type=_positive(float), default=DEFAULT_EPS_VEL)
    s.add_argument("--eps-height", type=_positive(float), default=DEFAULT_EPS_HEIGHT)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_contact)

    s = sub.add_parser("correct", help="floating correction and EMA smoothing")
    s.add_argument("--input", required=True)
    s.add_argument("--ema-alpha", type=_positive(float), default=DEFAULT_EMA_ALPHA)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("retarget", help="IK retargeting onto a kinematic chain")
    s.add_argument("--input", required=True)
    s.add_argument("--chain", required=True)
    s.add_argument("--map", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--tol", type=_positive(float), default=1e-4, help="residual tolerance in metres")
    s.add_argument("--max-iters", type=_positive(int), default=200)
    s.set_defaults(func=cmd_retarget)

    s = sub.add_parser("oracle", help="optimal tracking factor of a bi-level instance")
    s.add_argument("--coeffs", required=True, help="comma-separated positive coefficients")
    s.add_argument("--sigma-lo", type=_positive(float))
    s.add_argument("--sigma-hi", type=_positive(float))
    s.add_argument("--report")
    s.set_defaults(func=cmd_oracle)

    for name, fn, hlp in (("adapt-demo", cmd_adapt_demo, "adaptive sigma loop on a 2-DoF sinusoid"),
                          ("train-toy", cmd_train_toy, "train a phase-table policy on a reference")):
        s = sub.add_parser(name, help=hlp)
        if name == "train-toy":
            s.add_argument("--ref", required=True, help="robot-space motion with joint_positions")
            s.add_argument("--fixed", action="store_true", help="keep the preset factors fixed")
            s.add_argument("--policy", help="write the action table as JSON")
        s.add_argument("--preset", default="ours_init", choices=sorted(tracking_factor_presets()))
        s.add_argument("--iters", type=int, default=40)
        s.add_argument("--seed", type=int, default=7)
        s.add_argument("--cadence", choices=("iteration", "step"), default="iteration")
        s.add_argument("--randomize", action="store_true", help="sample domain parameters each iteration")
        s.add_argument("--trace", help="CSV of sigma, x_hat, error and ELR per iteration")
        s.set_defaults(func=fn)

    s = sub.add_parser("schedule", help="CSV of the termination and penalty curricula")
    s.add_argument("--k-max", type=int, default=100_000)
    s.add_argument("--every", type=_positive(int), default=10_000)
    s.add_argument("--output")
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("evaluate", help="tracking metrics of a rollout against a reference")
    s.add_argument("--rollout", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--skeleton", help="take the root body from this skeleton")
    s.add_argument("--root", type=int, help="root body index (default: skeleton root or 0)")
    s.add_argument("--elr", type=float, default=1.0)
    s.add_argument("--report")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("pipeline", help="run all configured stages and write a manifest")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=_positive(int), default=1)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("demo", help="write synthetic inputs and a pipeline config")
    s.add_argument("--dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MTRACK_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mtrack {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MtrackError, ValueError, OSError) as exc:
        print(f"mtrack {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
