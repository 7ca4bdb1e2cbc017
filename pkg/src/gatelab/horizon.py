"""Gate-distribution statistics and EMA memory-horizon arithmetic.

The gated update S_t = S_{t-1} + alpha_t * beta_t * dS_t, read per state row
as an exponential moving average, forgets a frame's contribution at rate
(1 - alpha*beta) per step.  The horizon is the lag at which that contribution
falls to 1/e: approximately 1/(alpha*beta), exactly -1/ln(1 - alpha*beta),
and empirically the first step at which an iterated unit impulse crosses 1/e.

Statistics conventions are fixed for exact testability: lower median on
even-sized multisets, population (not sample) standard deviation, p99 by
selection (smallest value covering 99% of the sorted mass).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .update_rules import GateTrace

INV_E = math.exp(-1.0)


@dataclass
class BetaStats:
    """Order statistics of the pooled per-token gate multiset."""

    median: float
    mean: float
    p99: float
    max: float
    min: float
    per_sequence_means: list

    def __post_init__(self):
        assert self.min <= self.median <= self.max
        assert self.p99 <= self.max


@dataclass
class VariationStats:
    """Within-frame vs cross-frame spread of the per-token gate."""

    pooled_std: float
    framemean_std: float


@dataclass
class HorizonReport:
    beta_bar: float
    alpha_min: float
    horizon_approx: float
    horizon_exact: float
    empirical_horizon: Optional[int] = None


def _lower_median(sorted_values: np.ndarray) -> float:
    return float(sorted_values[(len(sorted_values) - 1) // 2])


def _selection_p99(sorted_values: np.ndarray) -> float:
    idx = max(math.ceil(0.99 * len(sorted_values)) - 1, 0)
    return float(sorted_values[idx])


def pooled_beta_stats(traces: Sequence[GateTrace]) -> BetaStats:
    """Statistics over every (frame, token) gate value across all traces."""
    if len(traces) == 0:
        raise ValueError("no traces given")
    if any(t.n_frames < 1 for t in traces):
        raise ValueError("trace with no frames")
    pooled = np.sort(np.concatenate([t.beta.reshape(-1) for t in traces]))
    return BetaStats(
        median=_lower_median(pooled),
        mean=float(pooled.mean()),
        p99=_selection_p99(pooled),
        max=float(pooled[-1]),
        min=float(pooled[0]),
        per_sequence_means=[float(t.beta.mean()) for t in traces],
    )


def frame_variation_stats(trace: GateTrace) -> VariationStats:
    """Population stds of the pooled values and of the per-frame means."""
    if trace.n_frames < 2:
        raise ValueError("need at least 2 frames")
    return VariationStats(
        pooled_std=float(trace.beta.std()),
        framemean_std=float(trace.beta_mean.std()),
    )


def beta_histogram(traces: Sequence[GateTrace], n_bins: int = 60):
    """Histogram of pooled gate values on uniform [0,1] bins.

    Returns (edges, counts) with len(edges) == n_bins + 1.
    """
    pooled = np.concatenate([t.beta.reshape(-1) for t in traces])
    counts, edges = np.histogram(pooled, bins=n_bins, range=(0.0, 1.0))
    return edges, counts


def horizon_analytic(beta_bar: float, alpha_min: float) -> HorizonReport:
    """Closed-form horizons for an effective per-step gain alpha_min*beta_bar."""
    product = alpha_min * beta_bar
    if not (0.0 < product < 1.0):
        raise ValueError(f"alpha_min*beta_bar must be in (0, 1), got {product}")
    return HorizonReport(
        beta_bar=float(beta_bar),
        alpha_min=float(alpha_min),
        horizon_approx=1.0 / product,
        horizon_exact=-1.0 / math.log1p(-product),
    )


def horizon_empirical(beta_seq: Sequence[float], alpha_seq: Sequence[float]) -> int:
    """First step k at which an impulse iterated through the gate sequence
    decays to 1/e or below (x_{k+1} = (1 - alpha_k*beta_k) * x_k, x_0 = 1)."""
    if len(beta_seq) != len(alpha_seq):
        raise ValueError("gate sequences must have equal length")
    x = 1.0
    for k, (b, a) in enumerate(zip(beta_seq, alpha_seq), start=1):
        if not (0.0 < b <= 1.0 and 0.0 < a <= 1.0):
            raise ValueError(f"gates must lie in (0, 1], got beta={b}, alpha={a}")
        x *= 1.0 - a * b
        if x <= INV_E:
            return k
    raise ValueError(
        f"impulse never decayed to 1/e within {len(beta_seq)} steps (x={x:.6g})"
    )


def decay_magnitude(k: int, beta: float, alpha: float) -> float:
    """Remaining fraction (1 - alpha*beta)^k of a contribution after k steps."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return (1.0 - alpha * beta) ** k
