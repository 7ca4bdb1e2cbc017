"""Toy dual-stream cross-attention decoder with a fixed-size recurrent state.

A state matrix S (N x d) is refined over L layers, each layer letting the
state attend to the current frame's K token rows while a mirrored attention
block updates the token stream from the state.  The residual S_final - S_in
is the per-frame update candidate; the raw state-to-token attention scores
are kept for the per-token gate computed downstream.

Queries, keys and values are row-normalized per head before attention
(queries/keys to norm sqrt(d/H), values to unit norm).  This bounds every
attention logit by sqrt(d/H) and every per-layer state increment by the
number of heads, so arbitrarily long streams cannot blow the state up or
saturate downstream sigmoids.  Without it the state/token feedback loop
grows exponentially and the mean logit leaves float range within tens of
frames.

Seed layout: all randomness derives from ``rng_seed`` via composite
``default_rng([seed, tag])`` streams -- tag 0 state init, tag 1 decoder
params, tag 2 token streams, tag 3 readout head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# seed-stream tags (see module docstring)
SEED_STATE = 0
SEED_PARAMS = 1
SEED_STREAM = 2
SEED_READOUT = 3


@dataclass(frozen=True)
class ModelConfig:
    """Shape and seed of the toy decoder.

    d must be divisible by n_heads; all counts strictly positive.
    """

    n_state_tokens: int = 32
    token_dim: int = 64
    n_layers: int = 4
    n_heads: int = 4
    n_frame_tokens: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_state_tokens < 1:
            raise ValueError(f"n_state_tokens must be >= 1, got {self.n_state_tokens}")
        if self.token_dim < 1:
            raise ValueError(f"token_dim must be >= 1, got {self.token_dim}")
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.n_heads < 1:
            raise ValueError(f"n_heads must be >= 1, got {self.n_heads}")
        if self.n_frame_tokens < 1:
            raise ValueError(f"n_frame_tokens must be >= 1, got {self.n_frame_tokens}")
        if self.token_dim % self.n_heads != 0:
            raise ValueError(
                f"token_dim {self.token_dim} not divisible by n_heads {self.n_heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.token_dim // self.n_heads


@dataclass
class DecoderParams:
    """Per-layer projection weights, all (L, d, d), seeded Gaussian std 1/sqrt(d).

    ``*_state`` project the state rows, ``*_tokens`` the frame-token rows; the
    state stream queries token keys/values and the token stream queries state
    keys/values with independent weights.
    """

    w_q_state: np.ndarray
    w_k_tokens: np.ndarray
    w_v_tokens: np.ndarray
    w_q_tokens: np.ndarray
    w_k_state: np.ndarray
    w_v_state: np.ndarray


@dataclass
class DecoderOutput:
    """One decoder pass: residual, raw gate logits, refined state and tokens.

    logits has shape (L, H, N, K): the scaled pre-softmax scores of state
    queries against token keys, every layer and head.
    """

    delta_state: np.ndarray
    logits: np.ndarray
    final_state_preview: np.ndarray
    updated_tokens: np.ndarray


def init_state(config: ModelConfig) -> np.ndarray:
    """Seeded random N x d initial state (stands in for learned embeddings)."""
    rng = np.random.default_rng([config.rng_seed, SEED_STATE])
    return rng.normal(
        0.0, 1.0 / np.sqrt(config.token_dim), (config.n_state_tokens, config.token_dim)
    )


def init_params(config: ModelConfig) -> DecoderParams:
    """Draw all projection weights from the params seed stream, fixed order."""
    rng = np.random.default_rng([config.rng_seed, SEED_PARAMS])
    L, d = config.n_layers, config.token_dim
    std = 1.0 / np.sqrt(d)
    draw = lambda: rng.normal(0.0, std, (L, d, d))
    return DecoderParams(
        w_q_state=draw(),
        w_k_tokens=draw(),
        w_v_tokens=draw(),
        w_q_tokens=draw(),
        w_k_state=draw(),
        w_v_state=draw(),
    )


def _split_heads(m: np.ndarray, n_heads: int) -> np.ndarray:
    # (n, d) -> (H, n, d/H)
    n, d = m.shape
    return m.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(a: np.ndarray) -> np.ndarray:
    # (H, n, dh) -> (n, H*dh)
    h, n, dh = a.shape
    return a.transpose(1, 0, 2).reshape(n, h * dh)


def _row_normalize(m: np.ndarray, target: float) -> np.ndarray:
    """Scale each last-axis row to norm `target`; zero rows stay zero."""
    norms = np.linalg.norm(m, axis=-1, keepdims=True)
    return m * (target / np.maximum(norms, np.finfo(m.dtype).tiny))


def _softmax_lastaxis(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def decoder_step(
    state: np.ndarray, tokens: np.ndarray, params: DecoderParams, config: ModelConfig
) -> DecoderOutput:
    """Run the L-layer dual-stream pass and return residual + logits.

    Each layer computes both attention directions from the same pre-update
    (state, tokens) pair, then applies both increments: state rows add the
    token-value aggregation, token rows add the state-value aggregation.
    """
    N, d = config.n_state_tokens, config.token_dim
    K, H, L = config.n_frame_tokens, config.n_heads, config.n_layers
    if state.shape != (N, d):
        raise ValueError(f"state shape {state.shape} != ({N}, {d})")
    if tokens.shape != (K, d):
        raise ValueError(f"tokens shape {tokens.shape} != ({K}, {d})")
    if not (np.isfinite(state).all() and np.isfinite(tokens).all()):
        raise FloatingPointError("non-finite decoder inputs")

    dh = config.head_dim
    scale = np.sqrt(dh)
    s, x = state, tokens
    logits = np.empty((L, H, N, K))
    for layer in range(L):
        q_s = _row_normalize(_split_heads(s @ params.w_q_state[layer], H), scale)
        k_x = _row_normalize(_split_heads(x @ params.w_k_tokens[layer], H), scale)
        v_x = _row_normalize(_split_heads(x @ params.w_v_tokens[layer], H), 1.0)
        scores = q_s @ k_x.transpose(0, 2, 1) / scale  # (H, N, K), |.| <= sqrt(dh)
        logits[layer] = scores
        state_ctx = _merge_heads(_softmax_lastaxis(scores) @ v_x)

        q_x = _row_normalize(_split_heads(x @ params.w_q_tokens[layer], H), scale)
        k_s = _row_normalize(_split_heads(s @ params.w_k_state[layer], H), scale)
        v_s = _row_normalize(_split_heads(s @ params.w_v_state[layer], H), 1.0)
        token_scores = q_x @ k_s.transpose(0, 2, 1) / scale
        token_ctx = _merge_heads(_softmax_lastaxis(token_scores) @ v_s)

        s = s + state_ctx
        x = x + token_ctx

    delta = s - state
    if not np.isfinite(delta).all():
        raise FloatingPointError("non-finite decoder residual")
    return DecoderOutput(
        delta_state=delta, logits=logits, final_state_preview=s, updated_tokens=x
    )


class ReadoutHead:
    """Frozen seeded linear map from the flattened state to a 3-vector.

    Stands in for a pose head: any fixed linear functional of the state
    exposes state perturbation, so displacement of this readout measures
    drift independently of the gating policy under test.
    """

    def __init__(self, config: ModelConfig):
        rng = np.random.default_rng([config.rng_seed, SEED_READOUT])
        n = config.n_state_tokens * config.token_dim
        self.weights = rng.normal(0.0, 1.0 / np.sqrt(n), (n, 3))

    def __call__(self, state: np.ndarray) -> np.ndarray:
        return state.reshape(-1) @ self.weights


def global_feature(tokens: np.ndarray) -> np.ndarray:
    """Spatial mean of the frame's token rows (d-vector)."""
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise ValueError(f"need a non-empty K x d token block, got shape {tokens.shape}")
    return tokens.mean(axis=0)


def pose_token(output: DecoderOutput) -> np.ndarray:
    """First row of the final-layer state (the pose-carrying slot)."""
    return output.final_state_preview[0]
