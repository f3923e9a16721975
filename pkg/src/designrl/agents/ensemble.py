"""Actor-critic ensemble containers, initialization, resets, checkpoints.

Shared-policy variants hold one member carrying n_ensemble critics;
sunrise variants hold n_ensemble members carrying one critic each.
Critics score (summary, raw action) pairs.  Checkpoints are single npz
files of named float64 tensors (optimizer state included) plus the agent
config as an embedded JSON string; they round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..numkit import AdamState, Mlp, adam_init, mlp_init
from ..policy import (
    PolicyNet,
    mlp_from_named,
    mlp_to_named,
    policy_from_named,
    policy_init,
    policy_to_named,
)
from ..prob import RngState, split
from .config import AgentConfig, is_sunrise, validate_config


@dataclass
class QCritic:
    net: Mlp
    target: Mlp
    adam: AdamState


@dataclass
class Member:
    policy: PolicyNet
    policy_adam: AdamState
    critics: list[QCritic]
    log_alpha: np.ndarray          # shape (1,) so the optimizer mutates in place
    alpha_adam: AdamState

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))


@dataclass
class AgentEnsemble:
    cfg: AgentConfig
    members: list[Member]
    design_dim: int
    obs_dim: int
    grad_steps: int = 0            # one per gradient update of the whole agent
    env_steps: int = 0
    reset_threshold: int = 0       # next grad_steps value triggering a reset
    resets_done: int = 0

    @property
    def n_members(self) -> int:
        return len(self.members)


def _make_critic(rng: RngState, cfg: AgentConfig, in_dim: int) -> Mlp:
    return mlp_init(
        rng,
        [in_dim, cfg.hidden, cfg.hidden, 1],
        dropout_p=cfg.dropout_p,
        layernorm=cfg.layernorm,
    )


def _init_member(rng: RngState, cfg: AgentConfig, design_dim: int,
                 obs_dim: int, n_critics: int) -> Member:
    streams = split(rng, 1 + n_critics)
    policy = policy_init(streams[0], design_dim, obs_dim, hidden=cfg.hidden)
    critic_in = policy.summary_dim + design_dim
    critics = []
    for j in range(n_critics):
        net = _make_critic(streams[1 + j], cfg, critic_in)
        critics.append(QCritic(
            net=net,
            target=net.clone(),
            adam=adam_init(net.parameters(), cfg.critic_lr),
        ))
    log_alpha = np.array([np.log(cfg.alpha_init)])
    return Member(
        policy=policy,
        policy_adam=adam_init(policy.parameters(), cfg.policy_lr),
        critics=critics,
        log_alpha=log_alpha,
        alpha_adam=adam_init([log_alpha], cfg.alpha_lr),
    )


def init_ensemble(cfg: AgentConfig, design_dim: int, obs_dim: int,
                  rng: RngState) -> AgentEnsemble:
    validate_config(cfg)
    if is_sunrise(cfg):
        n_members, n_critics = cfg.n_ensemble, 1
    else:
        n_members, n_critics = 1, cfg.n_ensemble
    members = [
        _init_member(r, cfg, design_dim, obs_dim, n_critics)
        for r in split(rng, n_members)
    ]
    return AgentEnsemble(
        cfg=cfg, members=members, design_dim=design_dim, obs_dim=obs_dim,
        reset_threshold=cfg.reset_interval,
    )


def full_reset(ensemble: AgentEnsemble, rng: RngState) -> None:
    """Reinitialize every parameter and optimizer state in place.

    Matches a fresh init from the same rng bit for bit; replay data and
    step counters survive.  The next reset moves out by double the
    current spacing.
    """
    fresh = init_ensemble(ensemble.cfg, ensemble.design_dim,
                          ensemble.obs_dim, rng)
    ensemble.members = fresh.members
    ensemble.reset_threshold += ensemble.reset_threshold
    ensemble.resets_done += 1


def sbr_maybe_reset(ensemble: AgentEnsemble, rng: RngState) -> bool:
    """Reset once the gradient-step counter reaches the current threshold."""
    if ensemble.grad_steps < ensemble.reset_threshold:
        return False
    full_reset(ensemble, split(rng, 1)[0])
    return True


def target_entropy_for(cfg: AgentConfig, design_dim: int) -> float:
    return float(-design_dim if cfg.target_entropy is None else cfg.target_entropy)


# ---------------------------------------------------------------------------
# checkpointing


def _adam_to_named(st: AdamState, prefix: str) -> dict[str, np.ndarray]:
    out = {f"{prefix}.step": np.array(st.step)}
    for i, (m, v) in enumerate(zip(st.m, st.v)):
        out[f"{prefix}.m{i}"] = m
        out[f"{prefix}.v{i}"] = v
    return out


def _adam_from_named(arrays: dict, prefix: str, params: list[np.ndarray],
                     lr: float) -> AdamState:
    st = adam_init(params, lr)
    st.step = int(arrays[f"{prefix}.step"])
    for i in range(len(params)):
        st.m[i][...] = arrays[f"{prefix}.m{i}"]
        st.v[i][...] = arrays[f"{prefix}.v{i}"]
    return st


def ensemble_to_named(ensemble: AgentEnsemble) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {
        "meta.config": np.frombuffer(
            json.dumps(asdict(ensemble.cfg)).encode(), dtype=np.uint8),
        "meta.design_dim": np.array(ensemble.design_dim),
        "meta.obs_dim": np.array(ensemble.obs_dim),
        "meta.grad_steps": np.array(ensemble.grad_steps),
        "meta.env_steps": np.array(ensemble.env_steps),
        "meta.reset_threshold": np.array(ensemble.reset_threshold),
        "meta.resets_done": np.array(ensemble.resets_done),
    }
    for i, mem in enumerate(ensemble.members):
        p = f"m{i}"
        out.update(policy_to_named(mem.policy, f"{p}.policy"))
        out.update(_adam_to_named(mem.policy_adam, f"{p}.policy_adam"))
        out[f"{p}.log_alpha"] = mem.log_alpha
        out.update(_adam_to_named(mem.alpha_adam, f"{p}.alpha_adam"))
        for j, crit in enumerate(mem.critics):
            out.update(mlp_to_named(crit.net, f"{p}.q{j}"))
            out.update(mlp_to_named(crit.target, f"{p}.qt{j}"))
            out.update(_adam_to_named(crit.adam, f"{p}.q{j}_adam"))
    return out


def ensemble_from_named(arrays: dict[str, np.ndarray]) -> AgentEnsemble:
    cfg = AgentConfig(**json.loads(bytes(arrays["meta.config"]).decode()))
    validate_config(cfg)
    members = []
    i = 0
    while f"m{i}.log_alpha" in arrays:
        p = f"m{i}"
        policy = policy_from_named(arrays, f"{p}.policy")
        critics = []
        j = 0
        while f"{p}.q{j}.l0.W" in arrays:
            net = mlp_from_named(arrays, f"{p}.q{j}", dropout_p=cfg.dropout_p)
            target = mlp_from_named(arrays, f"{p}.qt{j}", dropout_p=cfg.dropout_p)
            critics.append(QCritic(
                net=net, target=target,
                adam=_adam_from_named(arrays, f"{p}.q{j}_adam",
                                      net.parameters(), cfg.critic_lr),
            ))
            j += 1
        log_alpha = np.array(arrays[f"{p}.log_alpha"], dtype=np.float64)
        members.append(Member(
            policy=policy,
            policy_adam=_adam_from_named(arrays, f"{p}.policy_adam",
                                         policy.parameters(), cfg.policy_lr),
            critics=critics,
            log_alpha=log_alpha,
            alpha_adam=_adam_from_named(arrays, f"{p}.alpha_adam",
                                        [log_alpha], cfg.alpha_lr),
        ))
        i += 1
    return AgentEnsemble(
        cfg=cfg,
        members=members,
        design_dim=int(arrays["meta.design_dim"]),
        obs_dim=int(arrays["meta.obs_dim"]),
        grad_steps=int(arrays["meta.grad_steps"]),
        env_steps=int(arrays["meta.env_steps"]),
        reset_threshold=int(arrays["meta.reset_threshold"]),
        resets_done=int(arrays["meta.resets_done"]),
    )


def ensemble_save(path, ensemble: AgentEnsemble) -> None:
    np.savez(path, **ensemble_to_named(ensemble))


def ensemble_load(path) -> AgentEnsemble:
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    return ensemble_from_named(arrays)
