"""Experiment drivers shared by the command-line tool and the HTTP service.

Each driver runs one experiment from a resolved RunConfig, optionally writes
its artifacts (deterministic CSV/JSON stamped with the resolved config), and
returns the summary as a plain dict so either surface can relay it.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .depth import depth_metrics, read_depth_bin, read_depth_csv
from .horizon import (
    beta_histogram,
    frame_variation_stats,
    horizon_analytic,
    horizon_empirical,
    pooled_beta_stats,
)
from .model import ReadoutHead, init_params
from .probes import (
    PROBE_FRAME_COLUMNS,
    SWEEP_ALPHA_COLUMNS,
    SWEEP_TAU_COLUMNS,
    gen_token_stream,
    probe_frame_rows,
    probe_summary_doc,
    run_redundancy_probe,
    sweep_fixed_alpha,
    sweep_tau,
)
from .runconfig import RunConfig
from .serialize import canonical, write_csv, write_json
from .trajectory import ate_rmse, parse_kitti, parse_tum, rpe_rotation
from .update_rules import (
    GATE_TRACE_COLUMNS,
    UpdatePolicy,
    gate_trace_doc,
    gate_trace_rows,
    run_sequence,
)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def drive_profile_beta(cfg: RunConfig, write: bool = True) -> dict:
    """Per-token gate profile of the reference (beta-only) rule.

    Runs n_streams independent streams (stream seed = seed + index) under the
    per-token rule, pools the gate values, and emits summary statistics, a
    60-bin histogram, and per-stream trace files.
    """
    mc = cfg.model_config()
    params = init_params(mc)
    head = ReadoutHead(mc)
    policy = UpdatePolicy(kind="ttt3r")
    traces = []
    for i in range(cfg.n_streams):
        stream = gen_token_stream(cfg.stream_spec(seed=cfg.seed + i), mc)
        _, trace = run_sequence(stream, policy, params, mc, head)
        traces.append(trace)
    stats = pooled_beta_stats(traces)
    variation = [frame_variation_stats(t) for t in traces]
    edges, counts = beta_histogram(traces)
    summary = {
        "beta_stats": canonical(stats),
        "variation_stats": canonical(variation),
        "n_streams": cfg.n_streams,
        "frames_per_stream": traces[0].n_frames,
    }
    if write:
        out = _outdir(cfg)
        resolved = cfg.resolved()
        write_json(out / "beta_stats.json", summary, config=resolved)
        write_csv(
            out / "beta_hist.csv",
            ["bin_left", "bin_right", "count"],
            ([edges[i], edges[i + 1], int(counts[i])] for i in range(len(counts))),
            config=resolved,
        )
        for i, trace in enumerate(traces):
            write_csv(
                out / f"trace_{i:03d}.csv",
                GATE_TRACE_COLUMNS,
                gate_trace_rows(trace),
                config=resolved,
            )
            write_json(out / f"trace_{i:03d}.json", gate_trace_doc(trace), config=resolved)
    return summary


def drive_probe_redundancy(cfg: RunConfig, write: bool = True) -> dict:
    """Duplicate-injection probe over the configured policies."""
    policies = [UpdatePolicy.from_string(p, tau=cfg.tau) for p in cfg.policies]
    reports = run_redundancy_probe(cfg.stream_spec(), policies, cfg.model_config(), tau=cfg.tau)
    summary = {"reports": [probe_summary_doc(r) for r in reports]}
    if write:
        out = _outdir(cfg)
        resolved = cfg.resolved()
        write_json(out / "probe_summary.json", summary, config=resolved)
        for report in reports:
            name = report.policy_label.replace(":", "_")
            write_csv(
                out / f"probe_{name}.csv",
                PROBE_FRAME_COLUMNS,
                probe_frame_rows(report),
                config=resolved,
            )
    return summary


def drive_horizon(cfg: RunConfig, write: bool = True) -> dict:
    """Analytic memory horizon for (beta_bar, alpha_min), plus the impulse check."""
    report = horizon_analytic(cfg.beta_bar, cfg.alpha_min)
    n = math.ceil(report.horizon_exact) + 16
    report.empirical_horizon = horizon_empirical([cfg.beta_bar] * n, [cfg.alpha_min] * n)
    summary = canonical(report)
    if write:
        write_json(_outdir(cfg) / "horizon.json", summary, config=cfg.resolved())
    return summary


def drive_sweep_tau(cfg: RunConfig, write: bool = True) -> dict:
    """Threshold sweep of the img-delta gate on the configured stream."""
    base = UpdatePolicy.from_string("afg-img", tau=cfg.tau)
    rows = sweep_tau(cfg.taus, cfg.stream_spec(), base, cfg.model_config())
    summary = {"rows": rows}
    if write:
        out = _outdir(cfg)
        resolved = cfg.resolved()
        write_json(out / "sweep_tau.json", summary, config=resolved)
        write_csv(
            out / "sweep_tau.csv",
            SWEEP_TAU_COLUMNS,
            ([row[c] for c in SWEEP_TAU_COLUMNS] for row in rows),
            config=resolved,
        )
    return summary


def drive_sweep_alpha(cfg: RunConfig, write: bool = True) -> dict:
    """Fixed frame-gate constants vs the adaptive gate on the configured stream."""
    rows = sweep_fixed_alpha(cfg.alphas, cfg.stream_spec(), cfg.model_config(), tau=cfg.tau)
    summary = {"rows": rows}
    if write:
        out = _outdir(cfg)
        resolved = cfg.resolved()
        write_json(out / "sweep_alpha.json", summary, config=resolved)
        write_csv(
            out / "sweep_alpha.csv",
            SWEEP_ALPHA_COLUMNS,
            ([row[c] for c in SWEEP_ALPHA_COLUMNS] for row in rows),
            config=resolved,
        )
    return summary


def load_trajectory(path):
    """Parse a pose file, auto-detecting the format from the field count."""
    path = Path(path)
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        n = len(line.split())
        if n == 8:
            return parse_tum(path)
        if n == 12:
            return parse_kitti(path)
        raise ValueError(
            f"{path}: unrecognized pose format ({n} fields; expected 8 or 12)"
        )
    raise ValueError(f"{path}: no pose lines found")


def traj_summary(est, gt, delta: int = 1) -> dict:
    """ATE and rotational RPE of `est` against `gt` (already-parsed trajectories)."""
    return {
        "ate_m": ate_rmse(est, gt),
        "rpe_rot_deg": rpe_rotation(est, gt, delta=delta),
        "delta": delta,
        "n_est": len(est),
        "n_gt": len(gt),
    }


def drive_eval_traj(est_path, gt_path, cfg: RunConfig, write: bool = False) -> dict:
    summary = traj_summary(load_trajectory(est_path), load_trajectory(gt_path), cfg.delta)
    if write:
        out = _outdir(cfg)
        resolved = cfg.resolved()
        write_json(out / "eval_traj.json", summary, config=resolved)
        write_csv(
            out / "eval_traj.csv",
            ["ate_m", "rpe_rot_deg", "delta", "n_est", "n_gt"],
            [[summary[k] for k in ("ate_m", "rpe_rot_deg", "delta", "n_est", "n_gt")]],
            config=resolved,
        )
    return summary


def _read_depth_any(path: Path):
    if path.suffix == ".csv":
        return read_depth_csv(path)
    return read_depth_bin(path)


def depth_summary(pairs, alignment: str) -> dict:
    """Per-frame and mean depth metrics over (name, predicted, ground-truth) triples."""
    frames = []
    for name, pred, gt in pairs:
        absrel, rmse, delta125 = depth_metrics(pred, gt, alignment=alignment)
        frames.append({"name": name, "absrel": absrel, "rmse": rmse, "delta125": delta125})
    if not frames:
        raise ValueError("no depth frames to evaluate")
    return {
        "alignment": alignment,
        "n_frames": len(frames),
        "absrel": float(np.mean([f["absrel"] for f in frames])),
        "rmse": float(np.mean([f["rmse"] for f in frames])),
        "delta125": float(np.mean([f["delta125"] for f in frames])),
        "frames": frames,
    }


def drive_eval_depth(pred_dir, gt_dir, cfg: RunConfig, write: bool = False) -> dict:
    """Per-frame depth metrics over files with matching names in two directories."""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    pred_files = {p.name: p for p in sorted(pred_dir.iterdir()) if p.is_file()}
    gt_files = {p.name: p for p in sorted(gt_dir.iterdir()) if p.is_file()}
    common = sorted(set(pred_files) & set(gt_files))
    if not common:
        raise ValueError(f"no matching depth files between {pred_dir} and {gt_dir}")
    summary = depth_summary(
        ((n, _read_depth_any(pred_files[n]), _read_depth_any(gt_files[n])) for n in common),
        cfg.alignment,
    )
    if write:
        out = _outdir(cfg)
        resolved = cfg.resolved()
        write_json(out / "eval_depth.json", summary, config=resolved)
        write_csv(
            out / "eval_depth.csv",
            ["name", "absrel", "rmse", "delta125"],
            ([f["name"], f["absrel"], f["rmse"], f["delta125"]] for f in summary["frames"]),
            config=resolved,
        )
    return summary
