"""Per-frame state update rules and the sequence runner that records gate traces.

Three update rules share the residual from one decoder pass:

    ungated   S' = S + dS
    per-token S' = S + beta * dS          (beta broadcast over feature dim)
    factored  S' = S + alpha * beta * dS  (scalar frame gate on top)

The runner folds a token stream through decoder + gate + update and records,
per frame, the frame gate, the full per-token gate vector, the raw residual
norm, the norm of the increment actually applied, and a frozen linear
readout of the post-update state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gates import (
    GateConfig,
    afg_img,
    afg_pose,
    beta_gate,
    fixed_alpha,
    fuse_max,
    fuse_product,
    fuse_weighted,
)
from .model import (
    DecoderParams,
    ModelConfig,
    ReadoutHead,
    decoder_step,
    global_feature,
    init_state,
    pose_token,
)

KINDS = ("cut3r", "ttt3r", "afg")
GATE_SOURCES = ("img", "pose", "fixed", "fuse-max", "fuse-product", "fuse-weighted")


@dataclass(frozen=True)
class UpdatePolicy:
    """Which update rule runs, and where the frame gate comes from (afg only)."""

    kind: str
    gate_source: Optional[str] = None
    fixed_c: Optional[float] = None
    img_gate: GateConfig = GateConfig()
    pose_gate: GateConfig = GateConfig()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown update kind {self.kind!r}")
        if self.kind == "afg":
            if self.gate_source not in GATE_SOURCES:
                raise ValueError(f"unknown gate source {self.gate_source!r}")
            if self.gate_source == "fixed":
                if self.fixed_c is None:
                    raise ValueError("fixed gate source needs a constant")
                fixed_alpha(self.fixed_c)
        elif self.gate_source is not None:
            raise ValueError(f"{self.kind} takes no gate source")

    @property
    def label(self) -> str:
        if self.kind != "afg":
            return self.kind
        if self.gate_source == "fixed":
            return f"fixed:{self.fixed_c:g}"
        if self.gate_source in ("img", "pose"):
            return f"afg-{self.gate_source}"
        return self.gate_source

    def with_tau(self, tau: float) -> "UpdatePolicy":
        """Same policy with both feature-gate thresholds replaced."""
        return UpdatePolicy(
            kind=self.kind,
            gate_source=self.gate_source,
            fixed_c=self.fixed_c,
            img_gate=GateConfig(tau=tau),
            pose_gate=GateConfig(tau=tau),
        )

    @staticmethod
    def from_string(token: str, tau: float = 1.0) -> "UpdatePolicy":
        """Parse a policy name like 'ttt3r', 'afg-img', 'fixed:0.5', 'fuse-prod'."""
        gc = GateConfig(tau=tau)
        t = token.strip().lower()
        if t in ("cut3r", "ttt3r"):
            return UpdatePolicy(kind=t)
        if t == "afg-img":
            return UpdatePolicy(kind="afg", gate_source="img", img_gate=gc, pose_gate=gc)
        if t == "afg-pose":
            return UpdatePolicy(kind="afg", gate_source="pose", img_gate=gc, pose_gate=gc)
        if t.startswith("fixed:"):
            return UpdatePolicy(kind="afg", gate_source="fixed", fixed_c=float(t[6:]))
        if t == "fuse-max":
            return UpdatePolicy(kind="afg", gate_source="fuse-max", img_gate=gc, pose_gate=gc)
        if t in ("fuse-prod", "fuse-product"):
            return UpdatePolicy(
                kind="afg", gate_source="fuse-product", img_gate=gc, pose_gate=gc
            )
        if t == "fuse-weighted":
            return UpdatePolicy(
                kind="afg", gate_source="fuse-weighted", img_gate=gc, pose_gate=gc
            )
        raise ValueError(f"unknown policy {token!r}")


@dataclass
class GateTrace:
    """Per-frame gating record for one sequence run.

    beta holds the measured per-token gate for every frame regardless of
    whether the policy applied it; alpha is 1.0 for the ungated rules.
    delta_norm is the Frobenius norm of the raw decoder residual,
    applied_norm the norm of the increment the policy actually added.
    """

    alpha: np.ndarray
    beta: np.ndarray
    delta_norm: np.ndarray
    applied_norm: np.ndarray
    readout: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.alpha)

    @property
    def beta_mean(self) -> np.ndarray:
        return self.beta.mean(axis=1)

    @property
    def beta_min(self) -> np.ndarray:
        return self.beta.min(axis=1)

    @property
    def beta_max(self) -> np.ndarray:
        return self.beta.max(axis=1)


GATE_TRACE_COLUMNS = [
    "t",
    "alpha",
    "beta_mean",
    "beta_min",
    "beta_max",
    "delta_norm",
    "readout_x",
    "readout_y",
    "readout_z",
]


def gate_trace_rows(trace: GateTrace):
    """CSV rows matching GATE_TRACE_COLUMNS, frame index first."""
    bm, bmin, bmax = trace.beta_mean, trace.beta_min, trace.beta_max
    for t in range(trace.n_frames):
        yield [
            t,
            trace.alpha[t],
            bm[t],
            bmin[t],
            bmax[t],
            trace.delta_norm[t],
            trace.readout[t, 0],
            trace.readout[t, 1],
            trace.readout[t, 2],
        ]


def gate_trace_doc(trace: GateTrace) -> dict:
    """JSON document embedding the full per-token gate vectors."""
    return {
        "n_frames": trace.n_frames,
        "alpha": trace.alpha,
        "beta": trace.beta,
        "delta_norm": trace.delta_norm,
        "applied_norm": trace.applied_norm,
        "readout": trace.readout,
    }


def step_cut3r(state: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Unconditional write-back of the residual."""
    if state.shape != delta.shape:
        raise ValueError(f"shape mismatch: {state.shape} vs {delta.shape}")
    return state + delta


def step_ttt3r(state: np.ndarray, delta: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Per-token gated write-back: row n scaled by beta[n]."""
    if state.shape != delta.shape:
        raise ValueError(f"shape mismatch: {state.shape} vs {delta.shape}")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (state.shape[0],):
        raise ValueError(f"beta length {beta.shape} != ({state.shape[0]},)")
    return state + beta[:, None] * delta


def step_afg(
    state: np.ndarray, delta: np.ndarray, beta: np.ndarray, alpha: float
) -> np.ndarray:
    """Frame-gated write-back: alpha scales the per-token gated residual.

    alpha = 1.0 reproduces the per-token rule bit-exactly.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if state.shape != delta.shape:
        raise ValueError(f"shape mismatch: {state.shape} vs {delta.shape}")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (state.shape[0],):
        raise ValueError(f"beta length {beta.shape} != ({state.shape[0]},)")
    return state + alpha * (beta[:, None] * delta)


class _FrameGater:
    """Per-sequence frame-gate state: previous features for the delta gates.

    The first frame has no predecessor; both feature deltas are taken as zero
    there, so every delta-driven gate opens at its lower bound sigmoid(-tau).
    """

    def __init__(self, policy: UpdatePolicy):
        self.policy = policy
        self.g_prev = None
        self.p_prev = None

    def __call__(self, tokens: np.ndarray, pose: np.ndarray) -> float:
        pol = self.policy
        if pol.kind != "afg":
            return 1.0
        if pol.gate_source == "fixed":
            return fixed_alpha(pol.fixed_c)
        g = global_feature(tokens)
        p = pose
        g_prev = g if self.g_prev is None else self.g_prev
        p_prev = p if self.p_prev is None else self.p_prev
        a_img = afg_img(g, g_prev, pol.img_gate)
        a_pose = afg_pose(p, p_prev, pol.pose_gate)
        self.g_prev, self.p_prev = g, p
        if pol.gate_source == "img":
            return a_img
        if pol.gate_source == "pose":
            return a_pose
        if pol.gate_source == "fuse-max":
            return fuse_max(a_img, a_pose)
        if pol.gate_source == "fuse-product":
            return fuse_product(a_img, a_pose)
        w_img = float(np.linalg.norm(g - g_prev))
        w_pose = float(np.linalg.norm(p - p_prev))
        if w_img == 0.0 and w_pose == 0.0:
            # both signals silent (e.g. first frame): weights degenerate, fall
            # back to an even split -- the gates are equal there anyway
            w_img = w_pose = 1.0
        return fuse_weighted(a_img, a_pose, w_img, w_pose)


def run_sequence(
    stream: Sequence[np.ndarray],
    policy: UpdatePolicy,
    params: DecoderParams,
    config: ModelConfig,
    readout_head: Optional[ReadoutHead] = None,
):
    """Fold decoder + gate + update over a token stream.

    Returns (final_state, GateTrace).  The readout head defaults to the one
    derived from config.rng_seed, so runs under different policies on the
    same config share it.
    """
    if len(stream) == 0:
        raise ValueError("empty token stream")
    head = readout_head if readout_head is not None else ReadoutHead(config)
    state = init_state(config)
    gater = _FrameGater(policy)
    n = len(stream)
    alpha = np.empty(n)
    beta = np.empty((n, config.n_state_tokens))
    delta_norm = np.empty(n)
    applied_norm = np.empty(n)
    readout = np.empty((n, 3))
    for t, tokens in enumerate(stream):
        out = decoder_step(state, tokens, params, config)
        b = beta_gate(out.logits)
        a = gater(tokens, pose_token(out))
        if policy.kind == "cut3r":
            nxt = step_cut3r(state, out.delta_state)
        elif policy.kind == "ttt3r":
            nxt = step_ttt3r(state, out.delta_state, b)
        else:
            nxt = step_afg(state, out.delta_state, b, a)
        alpha[t] = a
        beta[t] = b
        delta_norm[t] = np.linalg.norm(out.delta_state)
        applied_norm[t] = np.linalg.norm(nxt - state)
        readout[t] = head(nxt)
        state = nxt
    trace = GateTrace(
        alpha=alpha,
        beta=beta,
        delta_norm=delta_norm,
        applied_norm=applied_norm,
        readout=readout,
    )
    return state, trace
