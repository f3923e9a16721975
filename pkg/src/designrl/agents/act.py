"""Action selection over an ensemble: training-time UCB and deployment.

UCB scoring and deployment both run critics/policies in eval mode; any
dropout regularization is a training-update concern.
"""

from __future__ import annotations

import numpy as np

from ..bounds import NetPolicy
from ..numkit import mlp_forward
from ..policy import emit_distribution, summary_from_history
from ..prob import ATANH_CLAMP, RngState, TanhNormal, tanh_normal_sample
from .config import is_sunrise
from .ensemble import AgentEnsemble

EVAL_METHODS = ("A", "B", "C")


def member_summaries(ensemble: AgentEnsemble, hist_scaled: np.ndarray) -> np.ndarray:
    """(n_members, summary_dim): each member encodes the same history."""
    return np.stack([
        summary_from_history(m.policy, hist_scaled) for m in ensemble.members
    ])


def sunrise_ucb_action(ensemble: AgentEnsemble, summaries: np.ndarray,
                       lam: float, rng: RngState, return_details: bool = False):
    """Pick the member proposal maximizing mean + lam * std of critic scores.

    Each member samples one candidate from its own head; every candidate
    is scored by all members' critics at their own summaries.  Ties go to
    the lowest member index.
    """
    members = ensemble.members
    n = len(members)
    cands = np.zeros((n, ensemble.design_dim))
    for i, m in enumerate(members):
        dist = emit_distribution(m.policy, summaries[i])
        cands[i] = tanh_normal_sample(dist, rng).action
    q = np.zeros((n, n))   # critic j scoring candidate k
    for j, m in enumerate(members):
        inp = np.concatenate(
            [np.repeat(summaries[j][None, :], n, axis=0), cands], axis=1)
        out, _ = mlp_forward(m.critics[0].net, inp, mode="eval")
        q[j] = out[:, 0]
    scores = q.mean(axis=0) + lam * q.std(axis=0)
    k = int(np.argmax(scores))
    if return_details:
        return cands[k], cands, scores
    return cands[k]


def sunrise_eval_select(ensemble: AgentEnsemble, summaries: np.ndarray,
                        method: str, rng: RngState | None) -> np.ndarray:
    """Deployment action from the member heads.

    A: squash the average of the pre-squash means (deterministic).
    B: sample from one uniformly chosen member.
    C: sample a head built from averaged means and averaged variances.
    """
    members = ensemble.members
    dists = [emit_distribution(m.policy, summaries[i])
             for i, m in enumerate(members)]
    if method == "A":
        mu_bar = np.mean([d.mean for d in dists], axis=0)
        return np.clip(np.tanh(mu_bar), -ATANH_CLAMP, ATANH_CLAMP)
    if method == "B":
        if rng is None:
            raise ValueError("method B needs an rng")
        i = int(rng.integers(0, len(members)))
        return tanh_normal_sample(dists[i], rng).action
    if method == "C":
        if rng is None:
            raise ValueError("method C needs an rng")
        mu_bar = np.mean([d.mean for d in dists], axis=0)
        var_bar = np.mean([d.std ** 2 for d in dists], axis=0)
        merged = TanhNormal(mean=mu_bar, log_std=0.5 * np.log(var_bar))
        return tanh_normal_sample(merged, rng).action
    raise ValueError(f"unknown eval method {method!r}; expected one of {EVAL_METHODS}")


class SunriseEvalPolicy:
    """Rollout adapter deploying an ensemble via an eval method."""

    def __init__(self, ensemble: AgentEnsemble, method: str = "B"):
        if method not in EVAL_METHODS:
            raise ValueError(f"unknown eval method {method!r}")
        self.ensemble = ensemble
        self.method = method

    def act(self, problem, hist_scaled: np.ndarray, rng: RngState):
        summaries = member_summaries(self.ensemble, hist_scaled)
        return sunrise_eval_select(self.ensemble, summaries, self.method, rng)


def deployment_policy(ensemble: AgentEnsemble, sunrise_method: str = "B",
                      mode: str = "sample"):
    """The policy a trained ensemble presents to the rollout driver."""
    if is_sunrise(ensemble.cfg):
        return SunriseEvalPolicy(ensemble, sunrise_method)
    return NetPolicy(ensemble.members[0].policy, mode=mode)
