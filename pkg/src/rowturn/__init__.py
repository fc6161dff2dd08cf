"""Row-turning by conditional diffusion: a 2D under-canopy field simulator,
a privileged pure-pursuit demonstrator, a hand-rolled denoising diffusion
policy over action chunks, and the training/evaluation/teleop tooling
around them.
"""

from .config import RunConfig, load_config
from .demos import Demonstration, collect_dataset, plan_row_skip_path, replay_demo
from .diffusion import (
    Checkpoint,
    NoiseSchedule,
    build_schedule,
    elbo_diagnostic,
    forward_noise,
    load_checkpoint,
    reverse_sample,
    save_checkpoint,
    training_loss,
)
from .evaluation import (
    DiffusionPolicy,
    Outcome,
    PursuitChunkPolicy,
    build_scenarios,
    compute_metrics,
    judge_success,
    rollout,
    run_grid,
)
from .training import (
    ChunkedDataset,
    DiffusionConfig,
    TrainConfig,
    finite_diff_gradcheck,
    fit,
    normalize_dataset,
)
from .world import (
    FieldSpec,
    Pose,
    RayScanConfig,
    RobotSpec,
    RobotState,
    StalkMap,
    World,
    cast_rays,
    check_collision,
    generate_field,
    step_dynamics,
    wrap_angle,
)

__version__ = "0.1.0"
