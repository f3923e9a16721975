"""Pure-numpy reference implementations of the likelihood hot loops.

These are the fallback backend when the compiled extension is missing and
the ground truth the extension is tested against.  Both backends share one
contract: batched per-sample log-likelihood of a single observation under
many parameter draws at a fixed design.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr

LOG_2PI = float(np.log(2.0 * np.pi))

BACKEND_NAME = "python"


def loc_loglik_batch(
    y: float,
    thetas: np.ndarray,
    xi: np.ndarray,
    alpha: float,
    b: float,
    m: float,
    sigma: float,
) -> np.ndarray:
    """log N(y | log mu(theta, xi), sigma^2) for each theta row.

    thetas has shape (n, K, d) (source locations), xi shape (d,).  The
    total intensity is mu = b + sum_k alpha / (m + |beta_k - xi|^2).
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    diff = thetas - xi  # (n, K, d)
    sq = np.einsum("nkd,nkd->nk", diff, diff)
    total = b + (alpha / (m + sq)).sum(axis=1)
    z = (y - np.log(total)) / sigma
    return -0.5 * z * z - np.log(sigma) - 0.5 * LOG_2PI


def ces_utility(rho: np.ndarray, alphas: np.ndarray, basket: np.ndarray) -> np.ndarray:
    """Constant-elasticity utility (sum_j alpha_j x_j^rho)^(1/rho), batched.

    rho (n,), alphas (n, 3), basket (3,) or (n, 3).  An all-zero basket has
    utility 0 (the rho -> anything limit of the zero bundle).
    """
    rho = np.asarray(rho, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    basket = np.asarray(basket, dtype=np.float64)
    if basket.ndim == 1:
        basket = basket[None, :]
    inner = (alphas * basket ** rho[:, None]).sum(axis=1)
    out = np.zeros_like(rho)
    pos = inner > 0.0
    out[pos] = inner[pos] ** (1.0 / rho[pos])
    return out


def ces_obs_params(
    rho: np.ndarray,
    alphas: np.ndarray,
    u: np.ndarray,
    xi: np.ndarray,
    nu: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Latent-preference mean and scale for a paired-basket query.

    xi = (basket_a, basket_b) concatenated, shape (6,).  Returns
    (mu, s) with mu = u * (U(a) - U(b)) and s = nu * u * (1 + |a - b|).
    """
    xi = np.asarray(xi, dtype=np.float64)
    a, bb = xi[:3], xi[3:]
    ua = ces_utility(rho, alphas, a)
    ub = ces_utility(rho, alphas, bb)
    mu = u * (ua - ub)
    s = nu * u * (1.0 + np.linalg.norm(a - bb))
    return mu, s


def ces_loglik_batch(
    y: float,
    rho: np.ndarray,
    alphas: np.ndarray,
    u: np.ndarray,
    xi: np.ndarray,
    nu: float,
    eps: float,
) -> np.ndarray:
    """Censored sigmoid-Gaussian log-likelihood of one response, batched.

    Responses at the clip boundaries eps / 1-eps carry the probability mass
    of the censored tails (Gaussian cdf atoms); interior responses use the
    logit-normal density.
    """
    mu, s = ces_obs_params(rho, alphas, u, xi, nu)
    lo = np.log(eps) - np.log1p(-eps)          # logit(eps)
    hi = -lo                                    # logit(1 - eps)
    if y <= eps:
        return log_ndtr((lo - mu) / s)
    if y >= 1.0 - eps:
        return log_ndtr((mu - hi) / s)
    eta = np.log(y) - np.log1p(-y)
    z = (eta - mu) / s
    return (-0.5 * z * z - np.log(s) - 0.5 * LOG_2PI
            - np.log(y) - np.log1p(-y))
