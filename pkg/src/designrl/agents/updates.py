"""Gradient update core for the agent family.

Sampled transitions carry raw scaled history prefixes; every update packs
the batch into one row matrix, runs the encoder once, and reduces per
segment, so summaries always reflect the current encoder.  Backward
passes are assembled by hand from the numkit primitives.

Randomness is split into fixed per-role streams (target noise, subset
draw, dropout masks, actor noise).  Roles a variant does not use draw
nothing, which is what makes the reduction identities exact: the subset
min at M = N skips the permutation draw, and dropout at p = 0 skips mask
draws.  Sunrise members consume restarted copies of the same streams, so
identical members receive identical randomness and stay identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..numkit import Mlp, adam_step, mlp_backward, mlp_forward, polyak_update
from ..policy import PolicyNet
from ..prob import (
    ATANH_CLAMP,
    LOG_STD_MAX,
    LOG_STD_MIN,
    RngState,
    log1m_tanh_sq,
    split,
)
from .buffer import ReplayBuffer, Transition
from .config import AgentConfig, FULL_MIN_VARIANTS, is_sunrise
from .ensemble import AgentEnsemble, Member, target_entropy_for

LOG_2PI = float(np.log(2.0 * np.pi))


def _restart(rng: RngState) -> RngState:
    """Fresh generator over the same (seed, stream) key."""
    return RngState(seed=rng.seed, stream=rng.stream)


# ---------------------------------------------------------------------------
# batch packing and encoding


@dataclass
class PackedBatch:
    """Batch prefixes concatenated row-wise for a single encoder pass.

    Segment i holds transition i's t_i prefix pairs followed by one row
    for its own (action, next outcome) pair, so the segment sum is the
    next-state summary and dropping the last row gives the current one.
    """

    rows: np.ndarray       # (R, design_dim + obs_dim)
    starts: np.ndarray     # (B,) first row of each segment
    ends: np.ndarray       # (B,) one past the last row
    counts: np.ndarray     # (B,) rows per segment, always >= 1
    actions: np.ndarray    # (B, design_dim)
    rewards: np.ndarray    # (B,)
    not_done: np.ndarray   # (B,) bootstrap keep-mask

    @property
    def size(self) -> int:
        return self.actions.shape[0]


def pack_batch(batch: list[Transition], design_dim: int, obs_dim: int) -> PackedBatch:
    if not batch:
        raise ValueError("empty batch")
    n = len(batch)
    counts = np.fromiter((tr.step + 1 for tr in batch), dtype=np.int64, count=n)
    ends = np.cumsum(counts)
    starts = ends - counts
    rows = np.zeros((int(ends[-1]), design_dim + obs_dim))
    actions = np.zeros((n, design_dim))
    rewards = np.zeros(n)
    not_done = np.zeros(n)
    for i, tr in enumerate(batch):
        e = int(ends[i])
        if tr.step:
            rows[int(starts[i]): e - 1] = tr.hist
        rows[e - 1, :design_dim] = tr.action
        rows[e - 1, design_dim:] = tr.next_obs
        actions[i] = tr.action
        rewards[i] = tr.reward
        not_done[i] = 0.0 if tr.done else 1.0
    return PackedBatch(rows=rows, starts=starts, ends=ends, counts=counts,
                       actions=actions, rewards=rewards, not_done=not_done)


def encode_batch(policy: PolicyNet, packed: PackedBatch):
    """Summaries before and after each transition's own pair.

    Returns (b_now, b_next, encoder cache).  b_now for an empty prefix is
    exactly zero; otherwise it is the segment sum minus the last row.
    """
    enc_out, cache = mlp_forward(policy.encoder, packed.rows)
    seg = np.add.reduceat(enc_out, packed.starts, axis=0)
    last = enc_out[packed.ends - 1]
    return seg - last, seg, cache


def encoder_grads(policy: PolicyNet, packed: PackedBatch, cache,
                  d_b_now: np.ndarray) -> list[np.ndarray]:
    """Encoder parameter grads given dLoss/d(b_now) per batch row.

    Each prefix row inherits its segment's summary gradient; the last row
    of a segment only fed b_next (no gradient path) so it gets zero.
    """
    drows = np.repeat(d_b_now, packed.counts, axis=0)
    drows[packed.ends - 1] = 0.0
    grads, _ = mlp_backward(policy.encoder, cache, drows)
    return grads


# ---------------------------------------------------------------------------
# squashed-Gaussian head with hand-assembled gradients


@dataclass
class HeadSample:
    action: np.ndarray     # (B, d) squashed, clipped into (-1, 1)
    log_prob: np.ndarray   # (B,)
    mu: np.ndarray
    log_std: np.ndarray
    std: np.ndarray
    eps: np.ndarray        # the reparameterization draw
    tanh_pre: np.ndarray   # tanh at the unclipped pre-squash point
    in_mask: np.ndarray    # 1.0 where the emission clip was inactive
    clamp_mask: np.ndarray # 1.0 where log_std was strictly inside its range
    cache: object          # emitter forward cache


def head_sample(policy: PolicyNet, summary: np.ndarray, eps: np.ndarray) -> HeadSample:
    out, cache = mlp_forward(policy.emitter, summary)
    d = policy.design_dim
    mu = out[:, :d]
    raw = out[:, d:]
    log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    clamp_mask = ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)).astype(np.float64)
    std = np.exp(log_std)
    pre = mu + std * eps
    t = np.tanh(pre)
    in_mask = (np.abs(t) < ATANH_CLAMP).astype(np.float64)
    a = np.clip(t, -ATANH_CLAMP, ATANH_CLAMP)
    # density of the actual draw; the action clip is an emission guard
    # only.  Evaluating the Gaussian at the clipped preimage instead
    # would hand the actor a quadratic-in-mu entropy bonus for
    # saturating the squash, which detonates the Bellman recursion.
    log_prob = (
        -log_std - 0.5 * eps * eps - 0.5 * LOG_2PI - log1m_tanh_sq(pre)
    ).sum(axis=1)
    return HeadSample(action=a, log_prob=log_prob, mu=mu, log_std=log_std,
                      std=std, eps=eps, tanh_pre=t, in_mask=in_mask,
                      clamp_mask=clamp_mask, cache=cache)


def head_backward(policy: PolicyNet, hs: HeadSample, d_action: np.ndarray,
                  d_log_prob: np.ndarray):
    """Backprop d(loss)/d(action) and d(loss)/d(log_prob) to the emitter.

    Pathwise derivatives with eps held fixed, writing t for tanh at the
    unclipped pre-squash point:
      da/dmu         = (1 - a^2)        (zero where the emission clip engaged)
      da/dlog_std    = (1 - a^2) * std * eps
      dlogp/dmu      = 2t
      dlogp/dlog_std = 2t*std*eps - 1
    and the log_std rows outside the clamp window pass no gradient.
    Returns (emitter grads, d(loss)/d(summary)).
    """
    dlp = np.asarray(d_log_prob, dtype=np.float64).reshape(-1, 1)
    da_dpre = (1.0 - hs.action * hs.action) * hs.in_mask
    two_t = 2.0 * hs.tanh_pre
    dmu = d_action * da_dpre + dlp * two_t
    dls = d_action * da_dpre * hs.std * hs.eps + dlp * (
        two_t * hs.std * hs.eps - 1.0)
    dls = dls * hs.clamp_mask
    dout = np.concatenate([dmu, dls], axis=1)
    grads, d_summary = mlp_backward(policy.emitter, hs.cache, dout)
    return grads, d_summary


# ---------------------------------------------------------------------------
# critic forwards and targets


def critic_forward(net: Mlp, x: np.ndarray, rng: RngState | None):
    """Train-mode forward (dropout layers, if any, redraw masks)."""
    out, cache = mlp_forward(net, x, mode="train", rng=rng)
    return out[:, 0], cache


def member_targets(member: Member, cfg: AgentConfig, packed: PackedBatch,
                   b_next: np.ndarray, eps_t: np.ndarray,
                   r_subset: RngState, r_drop: RngState):
    """Bellman targets y for one member's critic set.

    The in-target min runs over all critics for the full-min variants (or
    whenever M >= the member's critic count, in which case no subset is
    drawn) and over a freshly drawn M-subset otherwise.  Terminal rows
    keep only the reward.
    """
    hs = head_sample(member.policy, b_next, eps_t)
    qin = np.concatenate([b_next, hs.action], axis=1)
    n_c = len(member.critics)
    if cfg.variant in FULL_MIN_VARIANTS or cfg.m_in_target >= n_c:
        idx = range(n_c)
    else:
        idx = r_subset.permutation(n_c)[: cfg.m_in_target]
    qmin = np.minimum.reduce(
        [critic_forward(member.critics[i].target, qin, r_drop)[0] for i in idx]
    )
    y = packed.rewards + cfg.gamma * packed.not_done * (
        qmin - member.alpha * hs.log_prob)
    return y, hs


def critic_target(ensemble: AgentEnsemble, batch: list[Transition],
                  cfg: AgentConfig, rng: RngState) -> np.ndarray:
    """Standalone target computation on the lead member (one per row)."""
    packed = pack_batch(batch, ensemble.design_dim, ensemble.obs_dim)
    member = ensemble.members[0]
    r_eps, r_subset, r_drop = split(rng, 3)
    _, b_next, _ = encode_batch(member.policy, packed)
    eps_t = r_eps.standard_normal((packed.size, ensemble.design_dim))
    y, _ = member_targets(member, cfg, packed, b_next, eps_t, r_subset, r_drop)
    return y


def sunrise_weight(q_std, temp: float) -> np.ndarray:
    """Confidence weight sigma(-std * temp) + 0.5, in (0.5, 1]."""
    return expit(-np.asarray(q_std, dtype=np.float64) * temp) + 0.5


# ---------------------------------------------------------------------------
# per-member gradient phases (compute grads; application happens above)


def critic_phase(member: Member, packed: PackedBatch, b_now: np.ndarray,
                 y: np.ndarray, r_drop: RngState, weight: np.ndarray | None):
    """Squared-error regression grads for every critic against shared y.

    Returns (losses, per-critic grads, dLoss/d(b_now), q means).  `weight`
    multiplies per-row squared errors (the confidence-weighted backup).
    """
    n = packed.size
    summary_dim = b_now.shape[1]
    qin = np.concatenate([b_now, packed.actions], axis=1)
    w = 1.0 if weight is None else weight
    d_b = np.zeros_like(b_now)
    losses, grads_list, q_means = [], [], []
    for crit in member.critics:
        q, cache = critic_forward(crit.net, qin, r_drop)
        err = q - y
        losses.append(float(np.mean(w * err * err)))
        dq = (2.0 / n) * (w * err)
        grads, dqin = mlp_backward(crit.net, cache, dq[:, None])
        grads_list.append(grads)
        d_b += dqin[:, :summary_dim]
        q_means.append(float(q.mean()))
    return losses, grads_list, d_b, q_means


def actor_phase(member: Member, packed: PackedBatch, b_now: np.ndarray,
                eps_a: np.ndarray, r_drop: RngState):
    """Grads of -(mean_i Q_i(B, a) - alpha * log pi) at reparameterized a.

    Critic parameters are held fixed; their input grads feed the action
    and summary paths.  Returns (loss, emitter grads, dLoss/d(b_now), hs).
    """
    n = packed.size
    summary_dim = b_now.shape[1]
    hs = head_sample(member.policy, b_now, eps_a)
    qin = np.concatenate([b_now, hs.action], axis=1)
    n_c = len(member.critics)
    coeff = np.full((n, 1), -1.0 / (n * n_c))
    d_b = np.zeros_like(b_now)
    d_a = np.zeros_like(hs.action)
    q_sum = np.zeros(n)
    for crit in member.critics:
        qa, cache = critic_forward(crit.net, qin, r_drop)
        q_sum += qa
        _, dqin = mlp_backward(crit.net, cache, coeff)
        d_b += dqin[:, :summary_dim]
        d_a += dqin[:, summary_dim:]
    alpha = member.alpha
    d_logp = np.full(n, alpha / n)
    emit_grads, d_b_head = head_backward(member.policy, hs, d_a, d_logp)
    d_b += d_b_head
    loss = float(-(q_sum / n_c - alpha * hs.log_prob).mean())
    return loss, emit_grads, d_b, hs


def alpha_phase(member: Member, hs: HeadSample, target_ent: float) -> float:
    """Descend J(alpha) on log alpha; returns the entropy estimate."""
    ent = float(-hs.log_prob.mean())
    grad = np.array([member.alpha * (ent - target_ent)])
    adam_step([member.log_alpha], [grad], member.alpha_adam)
    return ent


def _apply_critic_updates(member: Member, grads_list, tau: float) -> None:
    for crit, grads in zip(member.critics, grads_list):
        adam_step(crit.net.parameters(), grads, crit.adam)
        polyak_update(crit.target.parameters(), crit.net.parameters(), tau)


def _member_update(member: Member, cfg: AgentConfig, packed: PackedBatch,
                   b_now, b_next, enc_cache, y, eps_a, r_qdrop, r_adrop,
                   target_ent: float, weight=None) -> dict:
    closses, cgrads, d_b_critic, q_means = critic_phase(
        member, packed, b_now, y, r_qdrop, weight)
    _apply_critic_updates(member, cgrads, cfg.tau)
    aloss, emit_grads, d_b_actor, hs = actor_phase(
        member, packed, b_now, eps_a, r_adrop)
    enc_grads = encoder_grads(member.policy, packed, enc_cache,
                              d_b_critic + d_b_actor)
    adam_step(member.policy.parameters(), enc_grads + emit_grads,
              member.policy_adam)
    ent = alpha_phase(member, hs, target_ent)
    return {
        "critic_loss": float(np.mean(closses)),
        "actor_loss": aloss,
        "alpha": member.alpha,
        "entropy": ent,
        "q_mean": float(np.mean(q_means)),
        "target_mean": float(y.mean()),
        "weight_mean": 1.0 if weight is None else float(np.mean(weight)),
    }


# ---------------------------------------------------------------------------
# one gradient iteration per family


def _iterate_shared(ensemble: AgentEnsemble, batch: list[Transition],
                    cfg: AgentConfig, rng: RngState, target_ent: float) -> dict:
    member = ensemble.members[0]
    packed = pack_batch(batch, ensemble.design_dim, ensemble.obs_dim)
    r_teps, r_subset, r_tdrop, r_aeps, r_qdrop, r_adrop, _ = split(rng, 7)
    b_now, b_next, enc_cache = encode_batch(member.policy, packed)
    eps_t = r_teps.standard_normal((packed.size, ensemble.design_dim))
    y, _ = member_targets(member, cfg, packed, b_next, eps_t, r_subset, r_tdrop)
    eps_a = r_aeps.standard_normal((packed.size, ensemble.design_dim))
    return _member_update(member, cfg, packed, b_now, b_next, enc_cache, y,
                          eps_a, r_qdrop, r_adrop, target_ent)


def _iterate_sunrise(ensemble: AgentEnsemble, batch: list[Transition],
                     cfg: AgentConfig, rng: RngState, target_ent: float) -> dict:
    """One weighted-backup iteration over every member.

    Members share the reparameterization noise and restart per-role mask
    streams, so member index permutations cannot break ties; each member
    keeps its own policy, critic, target and temperature.
    """
    members = ensemble.members
    n_mem = len(members)
    packed = pack_batch(batch, ensemble.design_dim, ensemble.obs_dim)
    r_teps, _, r_tdrop, r_aeps, r_qdrop, r_adrop, r_wdrop = split(rng, 7)
    encs = [encode_batch(m.policy, packed) for m in members]
    eps_t = r_teps.standard_normal((packed.size, ensemble.design_dim))
    hs_next = [head_sample(m.policy, encs[i][1], eps_t)
               for i, m in enumerate(members)]

    # confidence weights from the spread of all target critics at each
    # member's proposed next action
    weights = []
    for i in range(n_mem):
        rw = _restart(r_wdrop)
        qmat = np.empty((n_mem, packed.size))
        for j in range(n_mem):
            qin = np.concatenate([encs[j][1], hs_next[i].action], axis=1)
            qmat[j], _ = critic_forward(members[j].critics[0].target, qin, rw)
        weights.append(sunrise_weight(qmat.std(axis=0), cfg.bellman_temp))

    ys = []
    for i, m in enumerate(members):
        rt = _restart(r_tdrop)
        qin = np.concatenate([encs[i][1], hs_next[i].action], axis=1)
        q_own, _ = critic_forward(m.critics[0].target, qin, rt)
        ys.append(packed.rewards + cfg.gamma * packed.not_done * (
            q_own - m.alpha * hs_next[i].log_prob))

    eps_a = r_aeps.standard_normal((packed.size, ensemble.design_dim))
    diags = []
    for i, m in enumerate(members):
        b_now, b_next, enc_cache = encs[i]
        diags.append(_member_update(
            m, cfg, packed, b_now, b_next, enc_cache, ys[i], eps_a,
            _restart(r_qdrop), _restart(r_adrop), target_ent,
            weight=weights[i]))
    return {k: float(np.mean([d[k] for d in diags])) for k in diags[0]}


def _merge(diags: list[dict]) -> dict:
    out = {k: float(np.mean([d[k] for d in diags])) for k in diags[0]}
    out["inner_updates"] = len(diags)
    return out


def update_step(ensemble: AgentEnsemble, buffer: ReplayBuffer,
                cfg: AgentConfig, rng: RngState) -> dict:
    """G inner gradient iterations, each on a fresh uniform batch.

    Dispatches to the sunrise path for its variants.  Diagnostics are
    means over the inner iterations (alpha included).
    """
    if len(buffer) < cfg.batch_size:
        raise ValueError("buffer smaller than one batch")
    if is_sunrise(cfg):
        return sunrise_update(ensemble, buffer, cfg, rng)
    target_ent = target_entropy_for(cfg, ensemble.design_dim)
    diags = []
    for _ in range(cfg.utd):
        r_batch, r_iter = split(rng, 2)
        batch = buffer.sample(cfg.batch_size, r_batch)
        diags.append(_iterate_shared(ensemble, batch, cfg, r_iter, target_ent))
        ensemble.grad_steps += 1
    return _merge(diags)


def sunrise_update(ensemble: AgentEnsemble, buffer: ReplayBuffer,
                   cfg: AgentConfig, rng: RngState) -> dict:
    if len(buffer) < cfg.batch_size:
        raise ValueError("buffer smaller than one batch")
    target_ent = target_entropy_for(cfg, ensemble.design_dim)
    diags = []
    for _ in range(cfg.utd):
        r_batch, r_iter = split(rng, 2)
        batch = buffer.sample(cfg.batch_size, r_batch)
        diags.append(_iterate_sunrise(ensemble, batch, cfg, r_iter, target_ent))
        ensemble.grad_steps += 1
    return _merge(diags)
