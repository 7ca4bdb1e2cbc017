"""Gate computations: per-token beta from attention logits, frame-level alpha
from feature deltas, the fixed-alpha probe, and gate fusion variants.

A gate vector is a plain float ndarray of per-state-token values in (0,1); a
frame gate is a plain float in (0,1].  The sigmoid is the exact logistic
1/(1+e^-z) (evaluated in the numerically stable branch form, no clamping);
callers keep its inputs bounded, so outputs stay strictly inside (0,1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GateConfig:
    """Threshold tau for feature-delta frame gates, in feature-norm units."""

    tau: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.tau):
            raise ValueError(f"tau must be finite, got {self.tau}")


def sigmoid(z):
    """Exact logistic, stable for large |z| (scalar or ndarray)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def beta_gate(logits: np.ndarray) -> np.ndarray:
    """Per-state-token gate: sigmoid of the logit mean over layers, heads, keys.

    logits must be the (L, H, N, K) pre-softmax score tensor; returns an
    N-vector with every entry strictly inside (0,1).
    """
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 4:
        raise ValueError(f"expected (L, H, N, K) logits, got shape {logits.shape}")
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite attention logits")
    return sigmoid(logits.mean(axis=(0, 1, 3)))


def _delta_gate(feat: np.ndarray, feat_prev: np.ndarray, cfg: GateConfig) -> float:
    feat = np.asarray(feat, dtype=float)
    feat_prev = np.asarray(feat_prev, dtype=float)
    if feat.shape != feat_prev.shape:
        raise ValueError(f"feature shapes differ: {feat.shape} vs {feat_prev.shape}")
    return float(sigmoid(np.linalg.norm(feat - feat_prev) - cfg.tau))


def afg_img(g: np.ndarray, g_prev: np.ndarray, cfg: GateConfig) -> float:
    """Frame gate from the change of the frame's global (mean-token) feature."""
    return _delta_gate(g, g_prev, cfg)


def afg_pose(p: np.ndarray, p_prev: np.ndarray, cfg: GateConfig) -> float:
    """Frame gate from the change of the pose-slot state row."""
    return _delta_gate(p, p_prev, cfg)


def fixed_alpha(c: float) -> float:
    """Constant frame gate; c must lie in (0, 1]."""
    if not (0.0 < c <= 1.0):
        raise ValueError(f"fixed alpha must be in (0, 1], got {c}")
    return float(c)


def _check_gate(a: float, name: str) -> float:
    if not (0.0 < a <= 1.0):
        raise ValueError(f"{name} must be in (0, 1], got {a}")
    return float(a)


def fuse_max(a_img: float, a_pose: float) -> float:
    """OR-style fusion: the larger of the two frame gates."""
    return max(_check_gate(a_img, "a_img"), _check_gate(a_pose, "a_pose"))


def fuse_product(a_img: float, a_pose: float) -> float:
    """AND-style fusion: product of the two frame gates."""
    return _check_gate(a_img, "a_img") * _check_gate(a_pose, "a_pose")


def fuse_weighted(a_img: float, a_pose: float, w_img: float, w_pose: float) -> float:
    """Convex combination with caller-supplied nonnegative weights.

    Weights are the respective feature-delta norms in the intended use; they
    may not both be zero.
    """
    _check_gate(a_img, "a_img")
    _check_gate(a_pose, "a_pose")
    if w_img < 0 or w_pose < 0 or (w_img == 0 and w_pose == 0):
        raise ValueError(f"weights must be >= 0 and not both zero, got ({w_img}, {w_pose})")
    return (w_img * a_img + w_pose * a_pose) / (w_img + w_pose)
