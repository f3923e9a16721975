"""History-pooling design policy.

The policy never sees raw history: each (design, outcome) pair is encoded
by a small MLP and the encodings are summed into a fixed-width summary, so
the representation is invariant to the order of past experiments.  An
emitter MLP maps the summary to the pre-squash mean and log-std of a
tanh-Gaussian over the next design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import Mlp, Layer, mlp_forward, mlp_init
from .prob import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    RngState,
    TanhNormal,
    tanh_normal_log_prob,
    tanh_normal_mode,
    tanh_normal_sample,
)

SUMMARY_DIM = 64
HIDDEN_DIM = 128


@dataclass
class PolicyNet:
    encoder: Mlp
    emitter: Mlp
    design_dim: int
    obs_dim: int

    @property
    def summary_dim(self) -> int:
        return self.encoder.output_dim

    def parameters(self) -> list[np.ndarray]:
        return self.encoder.parameters() + self.emitter.parameters()

    def clone(self) -> "PolicyNet":
        return PolicyNet(
            encoder=self.encoder.clone(),
            emitter=self.emitter.clone(),
            design_dim=self.design_dim,
            obs_dim=self.obs_dim,
        )


def policy_init(
    rng: RngState,
    design_dim: int,
    obs_dim: int,
    hidden: int = HIDDEN_DIM,
    summary_dim: int = SUMMARY_DIM,
) -> PolicyNet:
    """Fresh policy; the emitter's mean/log-std heads share one trunk and
    split at the final affine layer (output width 2 * design_dim)."""
    encoder = mlp_init(rng, [design_dim + obs_dim, hidden, hidden, summary_dim])
    emitter = mlp_init(rng, [summary_dim, hidden, hidden, 2 * design_dim])
    return PolicyNet(encoder=encoder, emitter=emitter,
                     design_dim=design_dim, obs_dim=obs_dim)


def summary_zero(net: PolicyNet) -> np.ndarray:
    return np.zeros(net.summary_dim)


def summary_update(
    net: PolicyNet, summary: np.ndarray, xi_scaled: np.ndarray, y_scaled: np.ndarray
) -> np.ndarray:
    """Fold one scaled (design, outcome) pair into the running summary."""
    pair = np.concatenate([np.asarray(xi_scaled, float).ravel(),
                           np.asarray(y_scaled, float).ravel()])
    enc, _ = mlp_forward(net.encoder, pair)
    return summary + enc


def summary_from_history(net: PolicyNet, hist: np.ndarray) -> np.ndarray:
    """Summary of a scaled-history matrix (t, design_dim + obs_dim).

    An empty history (t = 0) gives the zero summary.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.size == 0:
        return summary_zero(net)
    enc, _ = mlp_forward(net.encoder, hist)
    return enc.sum(axis=0)


def emit_distribution(net: PolicyNet, summary: np.ndarray) -> TanhNormal:
    """Design distribution for the current summary (1-d or batched)."""
    out, _ = mlp_forward(net.emitter, summary)
    d = net.design_dim
    return TanhNormal(mean=out[..., :d], log_std=out[..., d:])


def emit_design(
    net: PolicyNet, summary: np.ndarray, mode: str = "sample", rng: RngState | None = None
) -> tuple[np.ndarray, np.ndarray | float]:
    """Draw (or take the mode of) the next raw design in (-1, 1)^d."""
    dist = emit_distribution(net, summary)
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode needs an rng")
        s = tanh_normal_sample(dist, rng)
        return s.action, s.log_prob
    if mode == "mean":
        action = tanh_normal_mode(dist)
        return action, tanh_normal_log_prob(dist, action)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# named-tensor checkpointing


def mlp_to_named(net: Mlp, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for i, lay in enumerate(net.layers):
        out[f"{prefix}.l{i}.W"] = lay.W
        out[f"{prefix}.l{i}.b"] = lay.b
        if lay.layernorm:
            out[f"{prefix}.l{i}.ln_gain"] = lay.ln_gain
            out[f"{prefix}.l{i}.ln_offset"] = lay.ln_offset
    return out


def mlp_from_named(
    arrays: dict[str, np.ndarray],
    prefix: str,
    output_activation: str = "none",
    dropout_p: float = 0.0,
) -> Mlp:
    layers = []
    i = 0
    while f"{prefix}.l{i}.W" in arrays:
        W = np.array(arrays[f"{prefix}.l{i}.W"], dtype=np.float64)
        b = np.array(arrays[f"{prefix}.l{i}.b"], dtype=np.float64)
        ln = f"{prefix}.l{i}.ln_gain" in arrays
        layers.append(Layer(
            W=W, b=b,
            activation="relu",
            dropout_p=dropout_p,
            layernorm=ln,
            ln_gain=np.array(arrays[f"{prefix}.l{i}.ln_gain"]) if ln else None,
            ln_offset=np.array(arrays[f"{prefix}.l{i}.ln_offset"]) if ln else None,
        ))
        i += 1
    if not layers:
        raise ValueError(f"no layers found under prefix {prefix!r}")
    last = layers[-1]
    last.activation = output_activation
    last.dropout_p = 0.0
    last.layernorm = False
    last.ln_gain = last.ln_offset = None
    return Mlp(layers)


def policy_to_named(net: PolicyNet, prefix: str = "policy") -> dict[str, np.ndarray]:
    out = {
        f"{prefix}.design_dim": np.array(net.design_dim),
        f"{prefix}.obs_dim": np.array(net.obs_dim),
    }
    out.update(mlp_to_named(net.encoder, f"{prefix}.encoder"))
    out.update(mlp_to_named(net.emitter, f"{prefix}.emitter"))
    return out


def policy_from_named(arrays: dict[str, np.ndarray], prefix: str = "policy") -> PolicyNet:
    return PolicyNet(
        encoder=mlp_from_named(arrays, f"{prefix}.encoder"),
        emitter=mlp_from_named(arrays, f"{prefix}.emitter"),
        design_dim=int(arrays[f"{prefix}.design_dim"]),
        obs_dim=int(arrays[f"{prefix}.obs_dim"]),
    )


def policy_save(path, net: PolicyNet) -> None:
    """Write the policy as named float64 tensors; round-trips bit-exactly."""
    np.savez(path, **policy_to_named(net))


def policy_load(path) -> PolicyNet:
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    return policy_from_named(arrays)
