"""HTTP service exposing the experiment drivers.

Every endpoint runs in-process and returns the same summary the
command-line tool prints; nothing is written to disk. Invalid settings or
payloads (bad policy names, out-of-range gates, degenerate geometry) come
back as 400s with the underlying message.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..drivers import (
    depth_summary,
    drive_horizon,
    drive_probe_redundancy,
    drive_profile_beta,
    drive_sweep_alpha,
    drive_sweep_tau,
    traj_summary,
)
from .schemas import (
    EvalDepthRequest,
    EvalDepthResponse,
    EvalTrajRequest,
    EvalTrajResponse,
    HealthResponse,
    HorizonResponse,
    ProbeResponse,
    ProfileBetaResponse,
    RunOptions,
    SweepAlphaResponse,
    SweepTauResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="gatelab", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/horizon", response_model=HorizonResponse)
    def horizon(options: RunOptions):
        return _run(drive_horizon, options)

    @app.post("/profile-beta", response_model=ProfileBetaResponse)
    def profile_beta(options: RunOptions):
        return _run(drive_profile_beta, options)

    @app.post("/probe-redundancy", response_model=ProbeResponse)
    def probe_redundancy(options: RunOptions):
        return _run(drive_probe_redundancy, options)

    @app.post("/sweep-tau", response_model=SweepTauResponse)
    def sweep_tau(options: RunOptions):
        return _run(drive_sweep_tau, options)

    @app.post("/sweep-alpha", response_model=SweepAlphaResponse)
    def sweep_alpha(options: RunOptions):
        return _run(drive_sweep_alpha, options)

    @app.post("/eval-traj", response_model=EvalTrajResponse)
    def eval_traj(request: EvalTrajRequest):
        cfg = _config_of(request.options)
        try:
            return traj_summary(
                request.est.to_trajectory(), request.gt.to_trajectory(), cfg.delta
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.post("/eval-depth", response_model=EvalDepthResponse)
    def eval_depth(request: EvalDepthRequest):
        cfg = _config_of(request.options)
        if len(request.pred) != len(request.gt):
            raise HTTPException(
                status_code=400,
                detail=f"got {len(request.pred)} predicted frames vs {len(request.gt)} ground truth",
            )
        pairs = [
            (p.name or g.name or str(i), p.to_frame(), g.to_frame())
            for i, (p, g) in enumerate(zip(request.pred, request.gt))
        ]
        try:
            return depth_summary(pairs, cfg.alignment)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    return app


def _config_of(options: RunOptions):
    try:
        return options.to_config()
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _run(driver, options: RunOptions):
    cfg = _config_of(options)
    try:
        return driver(cfg, write=False)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


app = create_app()
