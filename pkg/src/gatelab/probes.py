"""Controlled gating experiments on synthetic token streams.

The redundancy probe appends bit-exact duplicate frames to a novel prefix and
measures how each update policy behaves on them: a content-blind per-token
gate keeps writing (state drifts with zero new information), while a
feature-delta frame gate collapses to its lower bound sigmoid(-tau) and
suppresses the writes.  Drift is the displacement of a frozen linear readout
of the state relative to the last pre-injection frame, so on duplicates any
non-zero value is pure drift.

Sweeps rerun the probe across tau thresholds and across fixed frame-gate
constants, on the identical stream and parameters, emitting one row per
setting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .horizon import horizon_analytic
from .model import ModelConfig, ReadoutHead, SEED_STREAM, init_params
from .update_rules import GateTrace, UpdatePolicy, run_sequence


@dataclass(frozen=True)
class StreamSpec:
    """Random-walk token stream layout.

    segments: (length, novelty) pairs; frame t = frame t-1 + novelty * N(0,1)
    noise, novelty 0 meaning exact repetition.  duplicates: (position, count)
    pairs, each inserting `count` bit-exact copies of the frame at position-1
    at `position` (applied in order on the growing stream).
    """

    segments: Tuple[Tuple[int, float], ...]
    duplicates: Tuple[Tuple[int, int], ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ValueError("need at least one segment")
        for length, novelty in self.segments:
            if length < 1:
                raise ValueError(f"segment length must be >= 1, got {length}")
            if novelty < 0:
                raise ValueError(f"novelty must be >= 0, got {novelty}")
        total = sum(length for length, _ in self.segments)
        for position, count in self.duplicates:
            if count < 1:
                raise ValueError(f"duplicate count must be >= 1, got {count}")
            if not (1 <= position <= total):
                raise ValueError(
                    f"duplicate position {position} outside stream of length {total}"
                )
            total += count

    @property
    def n_frames(self) -> int:
        return sum(length for length, _ in self.segments) + sum(
            count for _, count in self.duplicates
        )


def duplicate_indices(spec: StreamSpec) -> np.ndarray:
    """Indices of the injected (inserted-copy) frames in the final stream."""
    flags = [False] * sum(length for length, _ in spec.segments)
    for position, count in spec.duplicates:
        flags[position:position] = [True] * count
    return np.flatnonzero(flags)


def gen_token_stream(spec: StreamSpec, config: ModelConfig):
    """Deterministic K x d token blocks: a seeded walk with per-segment novelty.

    Duplicate injections insert exact copies of the frame just before each
    position, so the injected frames carry zero feature delta.
    """
    rng = np.random.default_rng([spec.rng_seed, SEED_STREAM])
    shape = (config.n_frame_tokens, config.token_dim)
    frames = []
    current = rng.normal(0.0, 1.0, shape)
    for length, novelty in spec.segments:
        for _ in range(length):
            if frames:
                current = current + novelty * rng.normal(0.0, 1.0, shape)
            frames.append(current.copy())
    for position, count in spec.duplicates:
        frames[position:position] = [frames[position - 1].copy() for _ in range(count)]
    return frames


@dataclass
class ProbeReport:
    """Per-frame gating record plus duplicate-segment summary for one policy.

    delta_norm here is the norm of the increment the policy actually applied
    (the quantity a write-suppression probe cares about), drift the readout
    displacement from the last pre-injection frame, cum_ate_proxy its running
    sum over the injected segment.  suppression_ratio and drift_ratio compare
    the per-token-only reference rule against this policy on the identical
    stream (both 1.0 for that rule itself).
    """

    policy_label: str
    t_inject: int
    n_duplicates: int
    alpha: np.ndarray
    beta_mean: np.ndarray
    delta_norm: np.ndarray
    drift: np.ndarray
    cum_ate_proxy: np.ndarray
    alpha_min_on_duplicates: float
    beta_bar_on_duplicates: float
    alpha_min: float
    alpha_mean: float
    suppression_ratio: float
    drift_ratio: float
    drift_at_end: float
    closure_horizon: float


PROBE_FRAME_COLUMNS = ["frame", "alpha", "beta_mean", "delta_norm", "drift", "cum_ate_proxy"]

SUMMARY_FIELDS = [
    "policy_label",
    "t_inject",
    "n_duplicates",
    "alpha_min_on_duplicates",
    "beta_bar_on_duplicates",
    "alpha_min",
    "alpha_mean",
    "suppression_ratio",
    "drift_ratio",
    "drift_at_end",
    "closure_horizon",
]


def probe_frame_rows(report: ProbeReport):
    for t in range(len(report.alpha)):
        yield [
            t,
            report.alpha[t],
            report.beta_mean[t],
            report.delta_norm[t],
            report.drift[t],
            report.cum_ate_proxy[t],
        ]


def probe_summary_doc(report: ProbeReport) -> dict:
    return {name: getattr(report, name) for name in SUMMARY_FIELDS}


def _drift_curve(trace: GateTrace, t_inject: int) -> np.ndarray:
    reference = trace.readout[t_inject - 1]
    drift = np.zeros(trace.n_frames)
    tail = trace.readout[t_inject:] - reference
    drift[t_inject:] = np.linalg.norm(tail, axis=1)
    return drift


def _build_report(
    label: str,
    trace: GateTrace,
    ref_trace: GateTrace,
    dup_idx: np.ndarray,
    t_inject: int,
) -> ProbeReport:
    drift = _drift_curve(trace, t_inject)
    ref_drift = _drift_curve(ref_trace, t_inject)
    t_end = int(dup_idx[-1])
    eff_dup = trace.applied_norm[dup_idx].mean()
    ref_eff_dup = ref_trace.applied_norm[dup_idx].mean()
    alpha_min_dup = float(trace.alpha[dup_idx].min())
    beta_bar_dup = float(trace.beta_mean[dup_idx].mean())
    closure = horizon_analytic(beta_bar_dup, alpha_min_dup).horizon_approx
    return ProbeReport(
        policy_label=label,
        t_inject=t_inject,
        n_duplicates=len(dup_idx),
        alpha=trace.alpha.copy(),
        beta_mean=trace.beta_mean,
        delta_norm=trace.applied_norm.copy(),
        drift=drift,
        cum_ate_proxy=np.cumsum(drift),
        alpha_min_on_duplicates=alpha_min_dup,
        beta_bar_on_duplicates=beta_bar_dup,
        alpha_min=float(trace.alpha.min()),
        alpha_mean=float(trace.alpha.mean()),
        suppression_ratio=float(ref_eff_dup / eff_dup),
        drift_ratio=float(ref_drift[t_end] / drift[t_end]) if drift[t_end] > 0 else float("inf"),
        drift_at_end=float(drift[t_end]),
        closure_horizon=closure,
    )


def default_probe_policies(tau: float = 1.0):
    return [
        UpdatePolicy.from_string("ttt3r"),
        UpdatePolicy.from_string("afg-img", tau=tau),
        UpdatePolicy.from_string("afg-pose", tau=tau),
    ]


def default_probe_spec(seed: int = 0) -> StreamSpec:
    """500-frame novelty-0.5 prefix, then 100 appended exact duplicates."""
    return StreamSpec(segments=((500, 0.5),), duplicates=((500, 100),), rng_seed=seed)


def run_redundancy_probe(
    spec: StreamSpec,
    policies: Sequence[UpdatePolicy],
    config: ModelConfig,
    tau: Optional[float] = None,
):
    """Run every policy on the identical stream and report duplicate behavior.

    A per-token-only (beta, alpha=1) reference run on the same stream anchors
    the suppression and drift ratios.  When tau is given it replaces the
    feature-gate thresholds of every delta-driven policy.
    """
    if len(spec.duplicates) == 0:
        raise ValueError("redundancy probe needs at least one duplicate injection")
    if len(policies) == 0:
        raise ValueError("no policies given")
    if tau is not None:
        policies = [
            p.with_tau(tau) if p.kind == "afg" and p.gate_source != "fixed" else p
            for p in policies
        ]
    stream = gen_token_stream(spec, config)
    params = init_params(config)
    head = ReadoutHead(config)
    dup_idx = duplicate_indices(spec)
    t_inject = int(dup_idx[0])

    ref_policy = UpdatePolicy(kind="ttt3r")
    _, ref_trace = run_sequence(stream, ref_policy, params, config, head)

    reports = []
    for policy in policies:
        if policy.kind == "ttt3r":
            trace = ref_trace
        else:
            _, trace = run_sequence(stream, policy, params, config, head)
        reports.append(_build_report(policy.label, trace, ref_trace, dup_idx, t_inject))
    return reports


TAU_GRID = (0.5, 0.75, 1.0, 1.25, 1.5)

SWEEP_TAU_COLUMNS = [
    "tau",
    "alpha_min_on_duplicates",
    "beta_bar_on_duplicates",
    "alpha_min",
    "alpha_mean",
    "suppression_ratio",
    "drift_ratio",
    "drift_at_end",
    "closure_horizon",
]


def sweep_tau(
    taus: Sequence[float],
    spec: StreamSpec,
    policy_base: UpdatePolicy,
    config: ModelConfig,
):
    """One probe run per threshold on the identical stream; rows in input order."""
    rows = []
    for tau in taus:
        report = run_redundancy_probe(spec, [policy_base], config, tau=tau)[0]
        row = {"tau": float(tau)}
        row.update({k: getattr(report, k) for k in SWEEP_TAU_COLUMNS[1:]})
        rows.append(row)
    return rows


SWEEP_ALPHA_COLUMNS = [
    "policy",
    "alpha_min_on_duplicates",
    "beta_bar_on_duplicates",
    "suppression_ratio",
    "drift_ratio",
    "drift_at_end",
    "closure_horizon",
]


def default_sweep_alpha_spec(seed: int = 0) -> StreamSpec:
    """Duplicate-heavy stream (60% injected copies) for the fixed-gate probe."""
    return StreamSpec(segments=((80, 0.5),), duplicates=((80, 120),), rng_seed=seed)


def sweep_fixed_alpha(
    cs: Sequence[float],
    spec: StreamSpec,
    config: ModelConfig,
    tau: float = 1.0,
):
    """Fixed frame-gate constants vs the adaptive feature-delta gate.

    Emits one row per constant plus one for the adaptive (img-delta) gate,
    all on the identical stream.
    """
    policies = [UpdatePolicy.from_string(f"fixed:{c:g}") for c in cs]
    policies.append(UpdatePolicy.from_string("afg-img", tau=tau))
    reports = run_redundancy_probe(spec, policies, config)
    rows = []
    for report in reports:
        row = {"policy": report.policy_label}
        row.update({k: getattr(report, k) for k in SWEEP_ALPHA_COLUMNS[1:]})
        rows.append(row)
    return rows
