"""Seeded sampling utilities and the tanh-squashed Gaussian policy head.

Randomness flows through RngState, a thin wrapper over numpy's Philox
counter-based generator keyed by (seed, stream).  split() derives child
streams by hashing the parent stream id, so the parent's own sample
sequence is left untouched and children are statistically independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
ATANH_CLAMP = 1.0 - 1e-6

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass
class RngState:
    """Counter-based generator state: (seed, stream) -> Philox key."""

    seed: int
    stream: int = 0
    _spawned: int = field(default=0, repr=False)
    _gen: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        key = np.array([self.seed & _MASK64, self.stream & _MASK64],
                       dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    # numpy-Generator passthroughs used across the package
    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def beta(self, a, b, size=None):
        return self._gen.beta(a, b, size)

    def dirichlet(self, alpha, size=None):
        return self._gen.dirichlet(alpha, size)

    def lognormal(self, mean, sigma, size=None):
        return self._gen.lognormal(mean, sigma, size)


def make_rng(seed: int, stream: int = 0) -> RngState:
    return RngState(seed=seed, stream=stream)


def split(rng: RngState, k: int) -> list[RngState]:
    """Derive k fresh independent streams; the parent sequence is unaffected."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kids = []
    for i in range(k):
        rng._spawned += 1
        h = _splitmix64(_splitmix64(rng.stream) ^ ((rng._spawned * _GOLDEN) & _MASK64))
        kids.append(RngState(seed=rng.seed, stream=h))
    return kids


# ---------------------------------------------------------------------------
# distributions


def sample_std_normal(rng: RngState, size=None) -> np.ndarray:
    return rng.standard_normal(size)


def sample_beta(rng: RngState, a: float, b: float, size=None) -> np.ndarray:
    if a <= 0.0 or b <= 0.0:
        raise ValueError("beta parameters must be positive")
    return rng.beta(a, b, size)


def sample_dirichlet(rng: RngState, alphas, size=None) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(alphas <= 0.0):
        raise ValueError("dirichlet concentrations must be positive")
    return rng.dirichlet(alphas, size)


def sample_lognormal(rng: RngState, mean: float, sigma: float, size=None) -> np.ndarray:
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    return rng.lognormal(mean, sigma, size)


def normal_logpdf(x, mu, sigma) -> np.ndarray:
    """Elementwise log N(x | mu, sigma^2)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0.0):
        raise ValueError("sigma must be positive")
    z = (np.asarray(x, dtype=np.float64) - mu) / sigma
    return -0.5 * z * z - np.log(sigma) - 0.5 * np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# tanh-squashed Gaussian


@dataclass
class TanhNormal:
    """Diagonal Gaussian squashed through tanh; log_std clamped to [-20, 2]."""

    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_std = np.clip(
            np.asarray(self.log_std, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX
        )

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


@dataclass
class TanhSample:
    """A reparameterized draw: action = tanh(pre), pre = mean + std * eps."""

    action: np.ndarray
    log_prob: np.ndarray | float
    eps: np.ndarray
    pre: np.ndarray


def log1m_tanh_sq(pre) -> np.ndarray:
    """log(1 - tanh(pre)^2), elementwise, finite for any pre.

    Evaluated as 2*(log 2 - pre - softplus(-2 pre)); the naive route
    through tanh underflows to log(0) once |pre| exceeds ~19.
    """
    pre = np.asarray(pre, dtype=np.float64)
    return 2.0 * (np.log(2.0) - pre - np.logaddexp(0.0, -2.0 * pre))


def tanh_normal_sample(dist: TanhNormal, rng: RngState) -> TanhSample:
    """Pathwise sample; log_prob is the density at the actual draw.

    Actions are clipped to |a| <= 1 - 1e-6 so they stay strictly inside
    (-1, 1) in float64 and invert cleanly through atanh.  The clip is an
    emission guard only: log_prob uses the unclipped pre-squash point, so
    it agrees with tanh_normal_log_prob whenever the draw itself stays
    below the clip and remains the true density beyond it (where the
    inversion route is lossy by construction).
    """
    eps = rng.standard_normal(dist.mean.shape)
    pre = dist.mean + dist.std * eps
    action = np.clip(np.tanh(pre), -ATANH_CLAMP, ATANH_CLAMP)
    lp = (
        -0.5 * eps * eps - dist.log_std - 0.5 * np.log(2.0 * np.pi)
        - log1m_tanh_sq(pre)
    ).sum(axis=-1)
    return TanhSample(
        action=action,
        log_prob=float(lp) if lp.ndim == 0 else lp,
        eps=eps,
        pre=pre,
    )


def tanh_normal_mode(dist: TanhNormal) -> np.ndarray:
    """Deterministic action: tanh of the pre-squash mean."""
    return np.clip(np.tanh(dist.mean), -ATANH_CLAMP, ATANH_CLAMP)


def tanh_normal_log_prob(dist: TanhNormal, action) -> np.ndarray | float:
    """log-density of a squashed action, summed over the last axis.

    The action is clamped to |a| <= 1 - 1e-6 before inversion, so any
    value in [-1, 1] yields a finite result.  Includes the tanh
    change-of-variables correction -sum log(1 - a^2).
    """
    a = np.clip(np.asarray(action, dtype=np.float64), -ATANH_CLAMP, ATANH_CLAMP)
    pre = np.arctanh(a)
    lp = normal_logpdf(pre, dist.mean, dist.std) - np.log1p(-a * a)
    out = lp.sum(axis=-1)
    return float(out) if out.ndim == 0 else out
