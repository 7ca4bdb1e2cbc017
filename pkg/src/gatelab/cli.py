"""Command-line surface: batch experiment runs and trajectory/depth evaluation.

Every command resolves its configuration as defaults < config file < flags
(the GATELAB_OUT environment variable replaces the built-in output-directory
default when neither file nor flag sets one), runs the matching driver, and
emits deterministic artifacts: same config + seed, byte-identical outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .drivers import (
    drive_eval_depth,
    drive_eval_traj,
    drive_horizon,
    drive_probe_redundancy,
    drive_profile_beta,
    drive_sweep_alpha,
    drive_sweep_tau,
)
from .runconfig import RunConfig, parse_config_text
from .serialize import json_dumps


def _add_common(sp, tau=True):
    sp.add_argument("--config", help="flat key = value config file")
    sp.add_argument("--seed", type=int, help="master RNG seed")
    if tau:
        sp.add_argument("--tau", type=float, help="feature-delta gate threshold")
    sp.add_argument("--out", help="output directory (default gatelab-out or $GATELAB_OUT)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gatelab",
        description="Recurrent-state gating experiments and trajectory/depth evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile-beta", help="per-token gate statistics over seeded streams")
    _add_common(p)

    p = sub.add_parser("probe-redundancy", help="duplicate-injection probe across policies")
    _add_common(p)
    p.add_argument(
        "--policy",
        action="append",
        help="policy to probe (repeatable or comma-separated): cut3r, ttt3r, afg-img, "
        "afg-pose, fixed:<c>, fuse-max, fuse-prod, fuse-weighted",
    )

    p = sub.add_parser("horizon", help="analytic + impulse memory horizon")
    _add_common(p)
    p.add_argument("--beta-bar", type=float, dest="beta_bar", help="mean per-token gate")
    p.add_argument("--alpha-min", type=float, dest="alpha_min", help="minimum frame gate")

    p = sub.add_parser("sweep-tau", help="threshold sweep of the img-delta gate")
    _add_common(p)
    p.add_argument("--taus", help="comma-separated threshold grid")

    p = sub.add_parser("sweep-alpha", help="fixed frame-gate constants vs adaptive")
    _add_common(p)
    p.add_argument("--alphas", help="comma-separated constants in (0,1]")

    p = sub.add_parser("eval-traj", help="ATE / rotational RPE of a pose file vs ground truth")
    p.add_argument("est", help="estimated trajectory (TUM 8-field or KITTI 12-field)")
    p.add_argument("gt", help="ground-truth trajectory")
    _add_common(p, tau=False)
    p.add_argument("--delta", type=int, help="frame lag for rotational RPE (default 1)")

    p = sub.add_parser("eval-depth", help="depth metrics over paired files in two directories")
    p.add_argument("pred_dir", help="predicted depth frames (.dpth or .csv)")
    p.add_argument("gt_dir", help="ground-truth depth frames")
    _add_common(p, tau=False)
    p.add_argument(
        "--alignment", choices=["metric", "scale-shift"], help="depth alignment mode"
    )

    return parser


def _resolve_config(args) -> RunConfig:
    file_values = {}
    if args.config:
        file_values = parse_config_text(Path(args.config).read_text(), source=args.config)
    overrides = dict(file_values)
    for key in ("seed", "tau", "out", "delta", "alignment", "beta_bar", "alpha_min"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "policy", None):
        tokens = []
        for chunk in args.policy:
            tokens.extend(t.strip() for t in chunk.split(",") if t.strip())
        overrides["policies"] = tuple(tokens)
    if getattr(args, "taus", None):
        overrides["taus"] = tuple(float(t) for t in args.taus.split(","))
    if getattr(args, "alphas", None):
        overrides["alphas"] = tuple(float(a) for a in args.alphas.split(","))
    if "out" not in overrides:
        env_out = os.environ.get("GATELAB_OUT")
        if env_out:
            overrides["out"] = env_out
    from dataclasses import replace

    return replace(RunConfig(), **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stage = "config"
    try:
        cfg = _resolve_config(args)
        stage = args.command
        if args.command == "profile-beta":
            drive_profile_beta(cfg)
            _report_files(cfg)
        elif args.command == "probe-redundancy":
            drive_probe_redundancy(cfg)
            _report_files(cfg)
        elif args.command == "horizon":
            drive_horizon(cfg)
            _report_files(cfg)
        elif args.command == "sweep-tau":
            drive_sweep_tau(cfg)
            _report_files(cfg)
        elif args.command == "sweep-alpha":
            drive_sweep_alpha(cfg)
            _report_files(cfg)
        elif args.command == "eval-traj":
            summary = drive_eval_traj(args.est, args.gt, cfg, write=args.out is not None)
            sys.stdout.write(json_dumps(summary))
        elif args.command == "eval-depth":
            summary = drive_eval_depth(
                args.pred_dir, args.gt_dir, cfg, write=args.out is not None
            )
            sys.stdout.write(json_dumps(summary))
    except Exception as exc:  # argparse handles its own errors; this names the stage
        sys.stderr.write(f"gatelab {stage}: error: {exc}\n")
        return 1
    return 0


def _report_files(cfg: RunConfig) -> None:
    out = Path(cfg.out)
    names = sorted(p.name for p in out.iterdir() if p.is_file())
    sys.stdout.write(json_dumps({"out": str(out), "files": names}))


if __name__ == "__main__":
    sys.exit(main())
