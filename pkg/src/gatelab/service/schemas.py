"""Request/response models for the HTTP service.

Requests carry optional experiment settings (unset fields fall back to the
same defaults the command-line tool uses) or inline data payloads for the
evaluation endpoints. Responses mirror the dict summaries the drivers return.
"""

from __future__ import annotations

from dataclasses import replace
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..depth import DepthFrame
from ..runconfig import RunConfig
from ..trajectory import Pose, Trajectory


class RunOptions(BaseModel):
    """Experiment settings; any unset field keeps its default."""

    n_state_tokens: Optional[int] = None
    token_dim: Optional[int] = None
    n_layers: Optional[int] = None
    n_heads: Optional[int] = None
    n_frame_tokens: Optional[int] = None
    seed: Optional[int] = None
    segments: Optional[List[Tuple[int, float]]] = None
    duplicates: Optional[List[Tuple[int, int]]] = None
    n_streams: Optional[int] = None
    tau: Optional[float] = None
    policies: Optional[List[str]] = None
    taus: Optional[List[float]] = None
    alphas: Optional[List[float]] = None
    beta_bar: Optional[float] = None
    alpha_min: Optional[float] = None
    delta: Optional[int] = None
    alignment: Optional[str] = None

    def to_config(self) -> RunConfig:
        values = self.model_dump(exclude_none=True)
        for key in ("segments", "duplicates", "policies", "taus", "alphas"):
            if key in values:
                values[key] = tuple(
                    tuple(v) if isinstance(v, (list, tuple)) else v for v in values[key]
                )
        return replace(RunConfig(), **values)


class PoseModel(BaseModel):
    """One timestamped pose; quaternion is (qx, qy, qz, qw)."""

    t: float
    tx: float
    ty: float
    tz: float
    qx: float
    qy: float
    qz: float
    qw: float


class TrajectoryModel(BaseModel):
    poses: List[PoseModel]

    def to_trajectory(self) -> Trajectory:
        return Trajectory(
            [
                Pose(p.t, np.array([p.qx, p.qy, p.qz, p.qw]), np.array([p.tx, p.ty, p.tz]))
                for p in self.poses
            ]
        )


class EvalTrajRequest(BaseModel):
    est: TrajectoryModel
    gt: TrajectoryModel
    options: RunOptions = Field(default_factory=RunOptions)


class DepthFrameModel(BaseModel):
    """Row-major depth values; null marks an invalid pixel."""

    name: str = ""
    values: List[List[Optional[float]]]

    def to_frame(self) -> DepthFrame:
        rows = [[np.nan if v is None else v for v in row] for row in self.values]
        return DepthFrame(np.array(rows, dtype=float))


class EvalDepthRequest(BaseModel):
    pred: List[DepthFrameModel]
    gt: List[DepthFrameModel]
    options: RunOptions = Field(default_factory=RunOptions)


class HealthResponse(BaseModel):
    status: str
    version: str


class HorizonResponse(BaseModel):
    beta_bar: float
    alpha_min: float
    horizon_approx: float
    horizon_exact: float
    empirical_horizon: int


class BetaStatsModel(BaseModel):
    median: float
    mean: float
    p99: float
    max: float
    min: float
    per_sequence_means: List[float]


class VariationModel(BaseModel):
    pooled_std: float
    framemean_std: float


class ProfileBetaResponse(BaseModel):
    beta_stats: BetaStatsModel
    variation_stats: List[VariationModel]
    n_streams: int
    frames_per_stream: int


class ProbeSummaryModel(BaseModel):
    policy_label: str
    t_inject: int
    n_duplicates: int
    alpha_min_on_duplicates: float
    beta_bar_on_duplicates: float
    alpha_min: float
    alpha_mean: float
    suppression_ratio: float
    drift_ratio: float
    drift_at_end: float
    closure_horizon: float


class ProbeResponse(BaseModel):
    reports: List[ProbeSummaryModel]


class SweepTauRow(BaseModel):
    tau: float
    alpha_min_on_duplicates: float
    beta_bar_on_duplicates: float
    alpha_min: float
    alpha_mean: float
    suppression_ratio: float
    drift_ratio: float
    drift_at_end: float
    closure_horizon: float


class SweepTauResponse(BaseModel):
    rows: List[SweepTauRow]


class SweepAlphaRow(BaseModel):
    policy: str
    alpha_min_on_duplicates: float
    beta_bar_on_duplicates: float
    suppression_ratio: float
    drift_ratio: float
    drift_at_end: float
    closure_horizon: float


class SweepAlphaResponse(BaseModel):
    rows: List[SweepAlphaRow]


class EvalTrajResponse(BaseModel):
    ate_m: float
    rpe_rot_deg: float
    delta: int
    n_est: int
    n_gt: int


class DepthFrameMetrics(BaseModel):
    name: str
    absrel: float
    rmse: float
    delta125: float


class EvalDepthResponse(BaseModel):
    alignment: str
    n_frames: int
    absrel: float
    rmse: float
    delta125: float
    frames: List[DepthFrameMetrics]
