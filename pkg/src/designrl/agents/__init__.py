"""Soft actor-critic agent family over history summaries.

config   - variant table and validation
buffer   - replay storage of raw scaled history prefixes
ensemble - parameter containers, init, resets, checkpoints
updates  - packed-batch gradient core (targets, critic/actor/alpha)
act      - UCB training selection and deployment policies
train    - the environment-step/update loop and training curve
"""

from .act import (
    SunriseEvalPolicy,
    deployment_policy,
    member_summaries,
    sunrise_eval_select,
    sunrise_ucb_action,
)
from .buffer import ReplayBuffer, Transition
from .config import (
    AgentConfig,
    VARIANTS,
    default_agent_config,
    droq_configure,
    is_sunrise,
    validate_config,
)
from .ensemble import (
    AgentEnsemble,
    Member,
    QCritic,
    ensemble_load,
    ensemble_save,
    full_reset,
    init_ensemble,
    sbr_maybe_reset,
    target_entropy_for,
)
from .train import (
    CurvePoint,
    TrainingDiverged,
    TrainResult,
    read_curve_csv,
    train,
    write_curve_csv,
)
from .updates import (
    critic_target,
    pack_batch,
    sunrise_update,
    sunrise_weight,
    update_step,
)

__all__ = [
    "AgentConfig", "AgentEnsemble", "CurvePoint", "Member", "QCritic",
    "ReplayBuffer", "SunriseEvalPolicy", "TrainResult", "Transition",
    "TrainingDiverged", "VARIANTS", "critic_target", "default_agent_config",
    "deployment_policy", "droq_configure", "ensemble_load", "ensemble_save",
    "full_reset", "init_ensemble", "is_sunrise", "member_summaries",
    "pack_batch", "read_curve_csv", "sbr_maybe_reset", "sunrise_eval_select",
    "sunrise_ucb_action", "sunrise_update", "sunrise_weight",
    "target_entropy_for", "train", "update_step", "validate_config",
    "write_curve_csv",
]
