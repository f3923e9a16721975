"""Design problems and their episodic environment wrapper.

A problem bundles a prior, a simulator and a likelihood.  The environment
carries one true parameter draw theta_0 plus L contrastive prior draws and
maintains their joint log-likelihood under the history ("log weights");
each step's reward is the increment of the normalized true-parameter log
weight, so the undiscounted return telescopes to the contrastive
information bound of the episode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .numkit import logsumexp
from .prob import (
    RngState,
    sample_beta,
    sample_dirichlet,
    sample_lognormal,
)


class DesignProblem:
    """Shared problem interface; see LocationFindingProblem / CesProblem."""

    name: str
    design_dim: int
    outcome_dim: int
    theta_dim: int
    horizon: int
    design_lo: float
    design_hi: float
    obs_range: tuple[float, float]

    def prior_sample(self, rng: RngState, n: int) -> np.ndarray:
        raise NotImplementedError

    def simulate(self, theta: np.ndarray, xi: np.ndarray, rng: RngState) -> np.ndarray:
        raise NotImplementedError

    def log_lik_batch(self, y: np.ndarray, thetas: np.ndarray, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_lik(self, y: np.ndarray, theta: np.ndarray, xi: np.ndarray) -> float:
        return float(self.log_lik_batch(y, np.asarray(theta)[None, :], xi)[0])


class LocationFindingProblem(DesignProblem):
    """Locate K Gaussian-prior sources from noisy log total signal strength.

    A design is a probe point xi; the probe reads the log of the summed
    inverse-square intensities (each source contributing
    alpha / (m + |beta_k - xi|^2) on top of background b) plus Gaussian
    noise with scale sigma.
    """

    name = "location_finding"

    def __init__(
        self,
        K: int = 2,
        d: int = 2,
        alpha: float = 1.0,
        b: float = 0.1,
        m: float = 1e-4,
        sigma: float = 0.5,
        horizon: int = 30,
        design_lo: float = -4.0,
        design_hi: float = 4.0,
        obs_range: tuple[float, float] | None = None,
    ):
        if K < 1 or d < 1:
            raise ValueError("K and d must be positive")
        if sigma <= 0.0 or m <= 0.0 or b <= 0.0:
            raise ValueError("sigma, m and b must be positive")
        self.K, self.d = K, d
        self.alpha, self.b, self.m, self.sigma = alpha, b, m, sigma
        self.horizon = horizon
        self.design_lo, self.design_hi = design_lo, design_hi
        self.design_dim = d
        self.outcome_dim = 1
        self.theta_dim = K * d
        if obs_range is None:
            # plausible log-signal span: background floor to all sources on
            # top of the probe, padded by 5 noise scales
            lo = np.log(b) - 5.0 * sigma
            hi = np.log(b + K * alpha / m) + 5.0 * sigma
            obs_range = (float(lo), float(hi))
        self.obs_range = obs_range

    def prior_sample(self, rng: RngState, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.theta_dim))

    def total_intensity(self, theta: np.ndarray, xi: np.ndarray) -> float:
        beta = np.asarray(theta, dtype=np.float64).reshape(self.K, self.d)
        sq = ((beta - np.asarray(xi)) ** 2).sum(axis=1)
        return float(self.b + (self.alpha / (self.m + sq)).sum())

    def simulate(self, theta: np.ndarray, xi: np.ndarray, rng: RngState) -> np.ndarray:
        mu = np.log(self.total_intensity(theta, xi))
        return np.array([mu + self.sigma * rng.standard_normal()])

    def log_lik_batch(self, y, thetas, xi) -> np.ndarray:
        thetas = np.ascontiguousarray(thetas, dtype=np.float64)
        return kernels.loc_loglik_batch(
            float(np.asarray(y).reshape(-1)[0]),
            thetas.reshape(-1, self.K, self.d),
            np.ascontiguousarray(xi, dtype=np.float64),
            self.alpha, self.b, self.m, self.sigma,
        )


class CesProblem(DesignProblem):
    """Constant-elasticity preference comparison between two baskets.

    theta = (rho, alpha_1..3, u).  A design is a pair of 3-good baskets;
    the response is a sigmoid-squashed noisy utility difference, censored
    at eps / 1 - eps.
    """

    name = "ces"

    def __init__(
        self,
        nu: float = 0.005,
        epsilon: float = 2.0 ** -22,
        horizon: int = 10,
        design_lo: float = 0.0,
        design_hi: float = 100.0,
        obs_range: tuple[float, float] | None = None,
    ):
        if nu <= 0.0:
            raise ValueError("nu must be positive")
        if not 0.0 < epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")
        self.nu, self.epsilon = nu, epsilon
        self.horizon = horizon
        self.design_lo, self.design_hi = design_lo, design_hi
        self.design_dim = 6
        self.outcome_dim = 1
        self.theta_dim = 5
        self.obs_range = obs_range or (epsilon, 1.0 - epsilon)

    def prior_sample(self, rng: RngState, n: int) -> np.ndarray:
        rho = sample_beta(rng, 1.0, 1.0, n)
        alphas = sample_dirichlet(rng, [1.0, 1.0, 1.0], n)
        u = sample_lognormal(rng, 1.0, 3.0, n)
        return np.column_stack([rho, alphas, u])

    def simulate(self, theta: np.ndarray, xi: np.ndarray, rng: RngState) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        mu, s = kernels.ces_obs_params(
            theta[0:1], theta[None, 1:4], theta[4:5], np.asarray(xi, float), self.nu
        )
        eta = float(mu[0]) + float(s[0]) * rng.standard_normal()
        y = expit(eta)
        return np.array([float(np.clip(y, self.epsilon, 1.0 - self.epsilon))])

    def log_lik_batch(self, y, thetas, xi) -> np.ndarray:
        thetas = np.ascontiguousarray(thetas, dtype=np.float64)
        return kernels.ces_loglik_batch(
            float(np.asarray(y).reshape(-1)[0]),
            np.ascontiguousarray(thetas[:, 0]),
            np.ascontiguousarray(thetas[:, 1:4]),
            np.ascontiguousarray(thetas[:, 4]),
            np.ascontiguousarray(xi, dtype=np.float64),
            self.nu, self.epsilon,
        )


# ---------------------------------------------------------------------------
# design / observation scaling


def scale_design(problem: DesignProblem, raw: np.ndarray) -> np.ndarray:
    """Map a raw action in [-1, 1]^d affinely onto the design box."""
    raw = np.clip(np.asarray(raw, dtype=np.float64), -1.0, 1.0)
    lo, hi = problem.design_lo, problem.design_hi
    return lo + (raw + 1.0) * 0.5 * (hi - lo)


def unscale_design(problem: DesignProblem, xi: np.ndarray) -> np.ndarray:
    lo, hi = problem.design_lo, problem.design_hi
    return np.clip(2.0 * (np.asarray(xi, float) - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def scale_observation(problem: DesignProblem, y: np.ndarray) -> np.ndarray:
    """Map an outcome into [0, 1] via the problem's declared plausible range."""
    lo, hi = problem.obs_range
    return np.clip((np.asarray(y, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)


# ---------------------------------------------------------------------------
# episodic environment


@dataclass
class EpisodeState:
    thetas: np.ndarray                 # (L+1, theta_dim); row 0 is theta_0
    log_weights: np.ndarray            # accumulated log-likelihood per theta
    t: int = 0
    done: bool = False
    designs: list = field(default_factory=list)    # raw designs
    outcomes: list = field(default_factory=list)   # raw outcomes

    @property
    def n_contrastive(self) -> int:
        return self.thetas.shape[0] - 1


@dataclass
class StepResult:
    state: EpisodeState
    reward: float
    design: np.ndarray
    outcome: np.ndarray
    done: bool


def env_reset(problem: DesignProblem, n_contrastive: int, rng: RngState) -> EpisodeState:
    """Draw theta_0 plus n_contrastive prior samples; log weights start at 0."""
    if n_contrastive < 0:
        raise ValueError("n_contrastive must be >= 0")
    thetas = problem.prior_sample(rng, n_contrastive + 1)
    return EpisodeState(
        thetas=thetas,
        log_weights=np.zeros(n_contrastive + 1),
    )


def env_step(
    problem: DesignProblem,
    state: EpisodeState,
    raw_action: np.ndarray,
    rng: RngState,
) -> StepResult:
    """Simulate one outcome under theta_0 and update every log weight.

    reward = delta_0 - logsumexp(lw + delta) + logsumexp(lw), the increment
    of the true sample's log posterior weight; summed over an episode this
    telescopes to the contrastive lower bound of the realized history.
    """
    if state.done:
        raise RuntimeError("env_step called on a finished episode")
    xi = scale_design(problem, raw_action)
    y = problem.simulate(state.thetas[0], xi, rng)
    delta = problem.log_lik_batch(y, state.thetas, xi)
    new_lw = state.log_weights + delta
    reward = float(delta[0] - logsumexp(new_lw) + logsumexp(state.log_weights))
    state.log_weights = new_lw
    state.designs.append(xi)
    state.outcomes.append(y)
    state.t += 1
    state.done = state.t >= problem.horizon
    return StepResult(state=state, reward=reward, design=xi, outcome=y, done=state.done)


def episode_bound_value(state: EpisodeState) -> float:
    """Contrastive lower-bound value of the history accumulated so far."""
    L = state.n_contrastive
    return float(
        state.log_weights[0] - logsumexp(state.log_weights) + np.log(L + 1.0)
    )


def scaled_history(problem: DesignProblem, designs, outcomes) -> np.ndarray:
    """Stack (design, outcome) pairs scaled to the policy's input ranges."""
    t = len(designs)
    out = np.zeros((t, problem.design_dim + problem.outcome_dim))
    for i in range(t):
        out[i, : problem.design_dim] = unscale_design(problem, designs[i])
        out[i, problem.design_dim:] = scale_observation(problem, outcomes[i])
    return out


# ---------------------------------------------------------------------------
# configuration round-trip

CONFIG_KEYS = (
    "problem", "K", "d", "alpha", "b", "m", "sigma",
    "nu", "epsilon", "horizon", "design_lo", "design_hi", "L_train",
)


def problem_to_config(problem: DesignProblem, L_train: int) -> dict:
    """Flat JSON-ready dict with one key per field; unused fields are None."""
    cfg = dict.fromkeys(CONFIG_KEYS)
    cfg["problem"] = problem.name
    cfg["horizon"] = problem.horizon
    cfg["design_lo"] = problem.design_lo
    cfg["design_hi"] = problem.design_hi
    cfg["L_train"] = int(L_train)
    if isinstance(problem, LocationFindingProblem):
        cfg.update(K=problem.K, d=problem.d, alpha=problem.alpha,
                   b=problem.b, m=problem.m, sigma=problem.sigma)
    elif isinstance(problem, CesProblem):
        cfg.update(nu=problem.nu, epsilon=problem.epsilon)
    else:
        raise ValueError(f"unknown problem type {type(problem)}")
    return cfg


def problem_from_config(cfg: dict) -> tuple[DesignProblem, int]:
    missing = [k for k in CONFIG_KEYS if k not in cfg]
    if missing:
        raise ValueError(f"problem config missing keys: {missing}")
    kind = cfg["problem"]
    common = dict(
        horizon=int(cfg["horizon"]),
        design_lo=float(cfg["design_lo"]),
        design_hi=float(cfg["design_hi"]),
    )
    if kind == "location_finding":
        prob = LocationFindingProblem(
            K=int(cfg["K"]), d=int(cfg["d"]), alpha=float(cfg["alpha"]),
            b=float(cfg["b"]), m=float(cfg["m"]), sigma=float(cfg["sigma"]),
            **common,
        )
    elif kind == "ces":
        prob = CesProblem(nu=float(cfg["nu"]), epsilon=float(cfg["epsilon"]), **common)
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    return prob, int(cfg["L_train"])
