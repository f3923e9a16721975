"""Small float64 neural-net toolkit with hand-written backward passes.

Everything here is plain numpy.  Layers follow a fixed internal order:
affine -> (dropout) -> (layer norm) -> activation.  Forward passes record
enough state (pre-activations, dropout masks, norm statistics) to make the
backward pass exact, and replaying a recorded mask set reproduces the
forward outputs bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN_EPS = 1e-5


# ---------------------------------------------------------------------------
# network containers


@dataclass
class Layer:
    """One affine layer plus its optional regularizers.

    W has shape (fan_in, fan_out) so a batch x of shape (n, fan_in)
    maps to x @ W + b.
    """

    W: np.ndarray
    b: np.ndarray
    activation: str = "none"  # "relu" | "none"
    dropout_p: float = 0.0
    layernorm: bool = False
    ln_gain: np.ndarray | None = None
    ln_offset: np.ndarray | None = None

    @property
    def fan_in(self) -> int:
        return self.W.shape[0]

    @property
    def fan_out(self) -> int:
        return self.W.shape[1]


@dataclass
class Mlp:
    layers: list[Layer] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list in a fixed order (W, b, [gain, offset]) per layer."""
        out: list[np.ndarray] = []
        for lay in self.layers:
            out.append(lay.W)
            out.append(lay.b)
            if lay.layernorm:
                out.append(lay.ln_gain)
                out.append(lay.ln_offset)
        return out

    def set_parameters(self, values: list[np.ndarray]) -> None:
        own = self.parameters()
        if len(own) != len(values):
            raise ValueError(f"expected {len(own)} arrays, got {len(values)}")
        for dst, src in zip(own, values):
            if dst.shape != src.shape:
                raise ValueError(f"shape mismatch {dst.shape} vs {src.shape}")
            dst[...] = src

    def clone(self) -> "Mlp":
        layers = []
        for lay in self.layers:
            layers.append(
                Layer(
                    W=lay.W.copy(),
                    b=lay.b.copy(),
                    activation=lay.activation,
                    dropout_p=lay.dropout_p,
                    layernorm=lay.layernorm,
                    ln_gain=None if lay.ln_gain is None else lay.ln_gain.copy(),
                    ln_offset=None if lay.ln_offset is None else lay.ln_offset.copy(),
                )
            )
        return Mlp(layers)


@dataclass
class ForwardCache:
    """Recorded forward state: inputs, pre-activations, masks, norm stats."""

    x: np.ndarray                     # 2-d input as seen by layer 0
    inputs: list[np.ndarray]          # input to each layer
    pre: list[np.ndarray]             # affine outputs
    masks: list[np.ndarray | None]    # scaled dropout masks (None when inactive)
    ln_stats: list[tuple | None]      # (inv_std, xhat) when layernorm is on
    post: list[np.ndarray]            # layer outputs (after activation)
    mode: str = "eval"


def mlp_init(
    rng,
    sizes: list[int],
    dropout_p: float = 0.0,
    layernorm: bool = False,
    output_activation: str = "none",
) -> Mlp:
    """Build an MLP with ReLU hidden layers.

    Weights are Kaiming-uniform, U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases
    start at zero.  dropout_p / layernorm apply to hidden layers only; the
    output layer is a bare affine map with `output_activation`.
    """
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    layers = []
    n_affine = len(sizes) - 1
    for i in range(n_affine):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        limit = np.sqrt(6.0 / fan_in)
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        last = i == n_affine - 1
        layers.append(
            Layer(
                W=W,
                b=b,
                activation=output_activation if last else "relu",
                dropout_p=0.0 if last else dropout_p,
                layernorm=False if last else layernorm,
                ln_gain=np.ones(fan_out) if (layernorm and not last) else None,
                ln_offset=np.zeros(fan_out) if (layernorm and not last) else None,
            )
        )
    return Mlp(layers)


# ---------------------------------------------------------------------------
# forward / backward


def _as_2d(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ValueError(f"expected 1-d or 2-d input, got shape {x.shape}")


def mlp_forward(
    net: Mlp,
    x: np.ndarray,
    mode: str = "eval",
    rng=None,
    masks: list[np.ndarray | None] | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network and record a cache for the backward pass.

    mode "train" draws fresh inverted-dropout masks from `rng`; mode "eval"
    applies no dropout.  Passing `masks` replays a previously recorded set,
    reproducing that forward pass exactly.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    h, was_1d = _as_2d(x)
    inputs, pres, used_masks, stats, posts = [], [], [], [], []
    for i, lay in enumerate(net.layers):
        inputs.append(h)
        pre = h @ lay.W + lay.b
        pres.append(pre)

        if masks is not None:
            mask = masks[i]
        elif mode == "train" and lay.dropout_p > 0.0:
            if rng is None:
                raise ValueError("train-mode dropout needs an rng")
            keep = 1.0 - lay.dropout_p
            mask = (rng.uniform(size=pre.shape) < keep) / keep
        else:
            mask = None
        used_masks.append(mask)
        h = pre if mask is None else pre * mask

        if lay.layernorm:
            mu = h.mean(axis=1, keepdims=True)
            var = h.var(axis=1, keepdims=True)
            inv_std = 1.0 / np.sqrt(var + LN_EPS)
            xhat = (h - mu) * inv_std
            stats.append((inv_std, xhat))
            h = xhat * lay.ln_gain + lay.ln_offset
        else:
            stats.append(None)

        if lay.activation == "relu":
            h = np.where(h > 0.0, h, 0.0)
        elif lay.activation != "none":
            raise ValueError(f"unknown activation {lay.activation!r}")
        posts.append(h)

    cache = ForwardCache(
        x=inputs[0], inputs=inputs, pre=pres, masks=used_masks,
        ln_stats=stats, post=posts, mode=mode,
    )
    out = posts[-1][0] if was_1d else posts[-1]
    return out, cache


def mlp_backward(
    net: Mlp, cache: ForwardCache, dy: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate dL/dy through a cached forward pass.

    Returns (grads, dx) where grads aligns element-wise with
    net.parameters().  ReLU uses subgradient 0 at 0.
    """
    dh, was_1d = _as_2d(dy)
    grads_rev: list[np.ndarray] = []
    for i in range(len(net.layers) - 1, -1, -1):
        lay = net.layers[i]
        if lay.activation == "relu":
            dh = dh * (cache.post[i] > 0.0)

        if lay.layernorm:
            inv_std, xhat = cache.ln_stats[i]
            dgain = (dh * xhat).sum(axis=0)
            doffset = dh.sum(axis=0)
            dxhat = dh * lay.ln_gain
            m1 = dxhat.mean(axis=1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
            dh = inv_std * (dxhat - m1 - xhat * m2)
        else:
            dgain = doffset = None

        mask = cache.masks[i]
        if mask is not None:
            dh = dh * mask

        dW = cache.inputs[i].T @ dh
        db = dh.sum(axis=0)
        dh = dh @ lay.W.T

        if lay.layernorm:
            grads_rev.extend([doffset, dgain])
        grads_rev.extend([db, dW])
    grads = grads_rev[::-1]
    dx = dh[0] if was_1d else dh
    return grads, dx


# ---------------------------------------------------------------------------
# optimizers and parameter ops


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(params: list[np.ndarray], lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    if lr <= 0.0:
        raise ValueError("lr must be positive")
    return AdamState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, in place.

    p -= lr * mhat / (sqrt(vhat) + eps) with mhat = m/(1-b1^t),
    vhat = v/(1-b2^t).  The step counter advances by exactly 1.
    """
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("params/grads/state length mismatch")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def polyak_update(target: list[np.ndarray], online: list[np.ndarray],
                  tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, element-wise in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for t, o in zip(target, online):
        t *= 1.0 - tau
        t += tau * o


# ---------------------------------------------------------------------------
# log-space reductions


def logsumexp(v: np.ndarray, axis=None) -> np.ndarray | float:
    """Stable log(sum(exp(v))) along `axis`.

    The max is subtracted before exponentiation; an all -inf slice reduces
    to -inf without warnings.  Empty reductions are a usage error.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("logsumexp over an empty array")
    hi = np.max(v, axis=axis, keepdims=True)
    hi = np.where(np.isfinite(hi), hi, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - hi), axis=axis, keepdims=True)) + hi
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
