"""Point-voxel diffusion for 3D point clouds.

Denoising diffusion over fixed-size point sets with a point-voxel
encoder-decoder as the noise predictor. Supports unconditional generation,
shape completion with fixed partial inputs, latent interpolation between
completions, and the usual set-level generative metrics.
"""

__version__ = "0.1.0"

from .checkpoint import Checkpoint, load_checkpoint, restore_model, save_checkpoint
from .completion import (
    CompletionTask,
    complete,
    complete_many,
    conditional_train_step,
    decode_latent,
    interpolate_complete,
    latent_encode,
)
from .data import (
    load_cloud,
    load_dir,
    load_pvpc,
    load_xyz,
    make_partial,
    normalize,
    partial_pair,
    save_cloud,
    save_pvpc,
    save_xyz,
    synth_primitives,
)
from .diffusion import (
    ancestral_loop,
    eps_loss,
    generate,
    generate_many,
    p_sample_step,
    posterior_params,
    predict_mu_from_eps,
    q_sample,
    q_step,
)
from .errors import (
    CheckpointError,
    CheckpointVersionError,
    DataError,
    NumericalError,
    PvdError,
    UsageError,
)
from .metrics import MetricReport, chamfer, coverage, emd, mmd, one_nn_accuracy, tmd
from .pvnet import (
    DenoiserWrap,
    PVDenoiser,
    arch_preset,
    ball_query,
    farthest_point_sample,
    init_denoiser,
    raw_time_embedding,
)
from .schedule import NoiseSchedule, linear_schedule, schedule_from_config, warmup_schedule
from .training import AdamState, TrainConfig, adam_update, train, train_step

__all__ = [
    "__version__",
    "AdamState", "Checkpoint", "CompletionTask", "CheckpointError",
    "CheckpointVersionError", "DataError", "DenoiserWrap", "MetricReport",
    "NoiseSchedule", "NumericalError", "PVDenoiser", "PvdError", "TrainConfig",
    "UsageError", "adam_update", "ancestral_loop", "arch_preset", "ball_query",
    "chamfer", "complete", "complete_many", "conditional_train_step",
    "coverage", "decode_latent", "emd", "eps_loss", "farthest_point_sample",
    "generate", "generate_many", "init_denoiser", "interpolate_complete",
    "latent_encode", "linear_schedule", "load_checkpoint", "load_cloud",
    "load_dir", "load_pvpc", "load_xyz", "make_partial", "mmd", "normalize",
    "one_nn_accuracy", "p_sample_step", "partial_pair", "posterior_params",
    "predict_mu_from_eps", "q_sample", "q_step", "raw_time_embedding",
    "restore_model", "save_checkpoint", "save_cloud", "save_pvpc", "save_xyz",
    "schedule_from_config", "synth_primitives", "tmd", "train", "train_step",
    "warmup_schedule",
]
