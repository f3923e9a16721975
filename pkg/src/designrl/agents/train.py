"""Training loop: one environment step per iteration, then a G-deep update.

All randomness derives from one seed through named streams, so runs are
reproducible bit for bit.  The loop keeps the scaled history of the live
episode incrementally; stored transitions freeze their own prefix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..bounds import estimate_bounds
from ..envs import DesignProblem, env_reset, env_step, scale_observation
from ..policy import emit_design, summary_from_history
from ..prob import make_rng, split
from .act import deployment_policy, member_summaries, sunrise_ucb_action
from .buffer import ReplayBuffer, Transition
from .config import AgentConfig, is_sunrise, validate_config
from .ensemble import AgentEnsemble, init_ensemble, sbr_maybe_reset

CURVE_COLUMNS = ("iteration", "spce_train_L", "critic_loss", "actor_loss", "alpha")


class TrainingDiverged(RuntimeError):
    """Raised when any update diagnostic goes non-finite."""

    def __init__(self, iteration: int, detail: str):
        super().__init__(f"non-finite training diagnostics at iteration "
                         f"{iteration}: {detail}")
        self.iteration = iteration


@dataclass
class CurvePoint:
    iteration: int
    spce_train_L: float
    critic_loss: float
    actor_loss: float
    alpha: float


@dataclass
class TrainResult:
    ensemble: AgentEnsemble
    curve: list[CurvePoint] = field(default_factory=list)
    buffer: ReplayBuffer | None = None


def _ensure_finite(diag: dict, iteration: int) -> None:
    bad = [k for k, v in diag.items() if not np.isfinite(v)]
    if bad:
        raise TrainingDiverged(iteration, ", ".join(
            f"{k}={diag[k]}" for k in bad))


def train(
    problem: DesignProblem,
    cfg: AgentConfig,
    seed: int,
    iterations: int,
    L_train: int,
    eval_every: int | None = None,
    eval_rollouts: int = 8,
    chunk_size: int = 100_000,
) -> TrainResult:
    """Train an ensemble on `problem` for `iterations` environment steps.

    Updates begin once the buffer holds one batch.  The curve records the
    training-L lower bound of the deployment policy every `eval_every`
    iterations (default: ~20 points) plus the final iteration, starting
    from the first evaluated iteration with an update behind it.
    """
    validate_config(cfg)
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if eval_every is None:
        eval_every = max(1, iterations // 20)
    master = make_rng(seed)
    r_init, r_env, r_act, r_upd, r_eval, r_reset = split(master, 6)
    # updates.update_step consumes the per-iteration stream internally
    from .updates import update_step

    ensemble = init_ensemble(cfg, problem.design_dim, problem.outcome_dim, r_init)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    curve: list[CurvePoint] = []
    state = env_reset(problem, L_train, r_env)
    pair_dim = problem.design_dim + problem.outcome_dim
    hist = np.zeros((0, pair_dim))
    last_diag: dict | None = None

    for it in range(1, iterations + 1):
        if is_sunrise(cfg):
            action = sunrise_ucb_action(
                ensemble, member_summaries(ensemble, hist), cfg.ucb_lambda, r_act)
        else:
            net = ensemble.members[0].policy
            action, _ = emit_design(
                net, summary_from_history(net, hist), mode="sample", rng=r_act)
        res = env_step(problem, state, action, r_env)
        y_scaled = scale_observation(problem, res.outcome)
        buffer.add(Transition(
            hist=hist, action=np.asarray(action, dtype=np.float64),
            reward=res.reward, next_obs=y_scaled, done=res.done))
        ensemble.env_steps += 1
        hist = np.vstack([hist, np.concatenate([np.asarray(action, float), y_scaled])])
        if res.done:
            state = env_reset(problem, L_train, r_env)
            hist = np.zeros((0, pair_dim))

        if len(buffer) >= cfg.batch_size:
            diag = update_step(ensemble, buffer, cfg, split(r_upd, 1)[0])
            _ensure_finite(diag, it)
            last_diag = diag
            if cfg.variant == "sbr":
                sbr_maybe_reset(ensemble, r_reset)

        if last_diag is not None and (it % eval_every == 0 or it == iterations):
            pol = deployment_policy(ensemble)
            ests, _ = estimate_bounds(
                pol, problem, eval_rollouts, L_train, split(r_eval, 1)[0],
                chunk_size=chunk_size)
            curve.append(CurvePoint(
                iteration=it,
                spce_train_L=ests["spce"].mean,
                critic_loss=last_diag["critic_loss"],
                actor_loss=last_diag["actor_loss"],
                alpha=last_diag["alpha"],
            ))
    return TrainResult(ensemble=ensemble, curve=curve, buffer=buffer)


def write_curve_csv(path, curve: list[CurvePoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for p in curve:
            w.writerow([p.iteration, repr(p.spce_train_L), repr(p.critic_loss),
                        repr(p.actor_loss), repr(p.alpha)])


def read_curve_csv(path) -> list[CurvePoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [CurvePoint(
        iteration=int(r["iteration"]),
        spce_train_L=float(r["spce_train_L"]),
        critic_loss=float(r["critic_loss"]),
        actor_loss=float(r["actor_loss"]),
        alpha=float(r["alpha"]),
    ) for r in rows]
