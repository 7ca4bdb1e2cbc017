"""gatelab: recurrent-state gating laboratory and trajectory/depth eval toolkit."""

from .gates import beta_gate, fuse_max, fuse_product, fuse_weighted, sigmoid
from .horizon import decay_magnitude, horizon_analytic, horizon_empirical, pooled_beta_stats
from .model import ModelConfig, decoder_step, init_params, init_state
from .probes import StreamSpec, gen_token_stream, run_redundancy_probe, sweep_fixed_alpha, sweep_tau
from .runconfig import RunConfig, load_config
from .trajectory import Trajectory, ate_rmse, rpe_rotation, umeyama_sim3
from .update_rules import UpdatePolicy, run_sequence, step_afg, step_cut3r, step_ttt3r

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "RunConfig",
    "StreamSpec",
    "Trajectory",
    "UpdatePolicy",
    "ate_rmse",
    "beta_gate",
    "decay_magnitude",
    "decoder_step",
    "fuse_max",
    "fuse_product",
    "fuse_weighted",
    "gen_token_stream",
    "horizon_analytic",
    "horizon_empirical",
    "init_params",
    "init_state",
    "load_config",
    "pooled_beta_stats",
    "rpe_rotation",
    "run_redundancy_probe",
    "run_sequence",
    "sigmoid",
    "step_afg",
    "step_cut3r",
    "step_ttt3r",
    "sweep_fixed_alpha",
    "sweep_tau",
    "umeyama_sim3",
]
