"""Agent configuration and per-variant defaults.

One config type covers the whole family.  n_ensemble counts critics for
the shared-policy variants (sac/redq/droq/sbr) and full actor-critic
members for the sunrise variants (which carry one critic per member).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

VARIANTS = ("sac", "redq", "droq", "sbr", "sunrise", "sunrise_droq")
SHARED_POLICY_VARIANTS = ("sac", "redq", "droq", "sbr")
SUNRISE_VARIANTS = ("sunrise", "sunrise_droq")

# variants whose in-target minimum runs over the full critic set rather
# than a freshly drawn subset
FULL_MIN_VARIANTS = ("droq", "sunrise", "sunrise_droq")


@dataclass
class AgentConfig:
    variant: str = "redq"
    n_ensemble: int = 2
    m_in_target: int = 2       # critics entering the target min (subset variants)
    utd: int = 64              # gradient updates per environment step
    gamma: float = 0.9
    tau: float = 0.001
    policy_lr: float = 1e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    alpha_init: float = 1.0
    target_entropy: float | None = None   # default: -design_dim
    batch_size: int = 4096
    buffer_capacity: int = 10_000_000
    hidden: int = 128
    dropout_p: float = 0.0
    layernorm: bool = False
    reset_interval: int = 430_000         # gradient steps before a full reset (sbr)
    ucb_lambda: float = 1.0               # exploration bonus weight (sunrise)
    bellman_temp: float = 20.0            # ensemble-std weighting temperature


def validate_config(cfg: AgentConfig) -> None:
    if cfg.variant not in VARIANTS:
        raise ValueError(f"unknown variant {cfg.variant!r}")
    if cfg.n_ensemble < 1:
        raise ValueError("n_ensemble must be >= 1")
    if cfg.variant in SUNRISE_VARIANTS and cfg.n_ensemble < 2:
        raise ValueError("sunrise needs at least 2 members")
    if not 1 <= cfg.m_in_target <= cfg.n_ensemble:
        raise ValueError("m_in_target must lie in [1, n_ensemble]")
    if cfg.utd < 1:
        raise ValueError("utd must be >= 1")
    if not 0.0 < cfg.gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if not 0.0 < cfg.tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if not 0.0 <= cfg.dropout_p < 1.0:
        raise ValueError("dropout_p must lie in [0, 1)")
    if min(cfg.policy_lr, cfg.critic_lr, cfg.alpha_lr) <= 0.0:
        raise ValueError("learning rates must be positive")
    if cfg.batch_size < 1 or cfg.buffer_capacity < 1:
        raise ValueError("batch_size and buffer_capacity must be positive")
    if cfg.reset_interval < 1:
        raise ValueError("reset_interval must be >= 1")


def droq_configure(cfg: AgentConfig, dropout_p: float,
                   layernorm: bool = True) -> AgentConfig:
    """Turn a shared-policy config into its dropout-critic form.

    The in-target minimum switches to the full critic set; with
    dropout_p = 0 and matching layernorm this reduces exactly to the
    subset variant at m = n.
    """
    out = replace(cfg, variant="droq", dropout_p=dropout_p,
                  layernorm=layernorm, m_in_target=cfg.n_ensemble)
    validate_config(out)
    return out


def default_agent_config(variant: str, problem_kind: str = "location_finding") -> AgentConfig:
    """Published defaults per variant and problem family."""
    loc = problem_kind == "location_finding"
    cfg = AgentConfig(variant=variant)
    if variant == "sac":
        cfg = replace(cfg, utd=1)
    elif variant == "droq":
        cfg = replace(cfg, dropout_p=0.01 if loc else 0.1, layernorm=True)
    elif variant == "sbr":
        cfg = replace(cfg, reset_interval=430_000)
    elif variant == "sunrise":
        cfg = replace(cfg, bellman_temp=20.0 if loc else 10.0)
    elif variant == "sunrise_droq":
        cfg = replace(
            cfg,
            tau=0.01,
            dropout_p=0.01 if loc else 0.1,
            layernorm=True,
            bellman_temp=20.0 if loc else 10.0,
        )
    validate_config(cfg)
    return cfg


def uses_full_min(cfg: AgentConfig) -> bool:
    return cfg.variant in FULL_MIN_VARIANTS or cfg.m_in_target >= cfg.n_ensemble


def is_sunrise(cfg: AgentConfig) -> bool:
    return cfg.variant in SUNRISE_VARIANTS
