import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from designrl import numkit
from designrl.numkit import (
    AdamState,
    Mlp,
    adam_init,
    adam_step,
    logsumexp,
    mlp_backward,
    mlp_forward,
    mlp_init,
    polyak_update,
)


def make_rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


# ---------------------------------------------------------------------------
# logsumexp


def brute_logsumexp(v):
    # 50-digit oracle, summed in extended precision
    import mpmath

    mpmath.mp.dps = 50
    return float(mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(x)) for x in v)))


def test_logsumexp_two_zeros_is_log2():
    assert logsumexp(np.array([0.0, 0.0])) == pytest.approx(np.log(2.0), abs=1e-15)


def test_logsumexp_matches_extended_precision_oracle():
    rng = make_rng(1)
    for scale in (1.0, 50.0, 700.0):
        v = rng.normal(size=37) * scale
        assert logsumexp(v) == pytest.approx(brute_logsumexp(v), rel=1e-13)


def test_logsumexp_large_offsets_do_not_overflow():
    v = np.array([1000.0, 1000.0 + np.log(2.0)])
    assert np.isfinite(logsumexp(v))
    assert logsumexp(v) == pytest.approx(1000.0 + np.log(3.0), abs=1e-12)


def test_logsumexp_all_neg_inf():
    assert logsumexp(np.full(4, -np.inf)) == -np.inf


def test_logsumexp_empty_is_error():
    with pytest.raises(ValueError):
        logsumexp(np.array([]))


def test_logsumexp_axis():
    rng = make_rng(2)
    v = rng.normal(size=(5, 7))
    out = logsumexp(v, axis=1)
    assert out.shape == (5,)
    for i in range(5):
        assert out[i] == pytest.approx(brute_logsumexp(v[i]), rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(
    hnp.arrays(
        np.float64,
        st.integers(1, 20),
        elements=st.floats(-100, 100, allow_nan=False),
    ),
    st.floats(-300, 300, allow_nan=False),
)
def test_logsumexp_shift_invariance(v, c):
    assert logsumexp(v + c) == pytest.approx(logsumexp(v) + c, rel=1e-10, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    hnp.arrays(
        np.float64,
        st.integers(1, 20),
        elements=st.floats(-100, 100, allow_nan=False),
    )
)
def test_logsumexp_bounds(v):
    out = logsumexp(v)
    assert out >= np.max(v) - 1e-12
    assert out <= np.max(v) + np.log(len(v)) + 1e-12


# ---------------------------------------------------------------------------
# init and forward


def test_init_shapes_and_zero_biases():
    net = mlp_init(make_rng(3), [4, 16, 16, 2])
    assert [lay.W.shape for lay in net.layers] == [(4, 16), (16, 16), (16, 2)]
    for lay in net.layers:
        assert np.all(lay.b == 0.0)
    assert net.layers[0].activation == "relu"
    assert net.layers[-1].activation == "none"


def test_init_kaiming_uniform_bound():
    net = mlp_init(make_rng(4), [100, 50])
    limit = np.sqrt(6.0 / 100)
    assert np.max(np.abs(net.layers[0].W)) <= limit
    # with 5000 draws the max should be close to the bound
    assert np.max(np.abs(net.layers[0].W)) > 0.9 * limit


def test_init_deterministic():
    a = mlp_init(make_rng(5), [3, 8, 1])
    b = mlp_init(make_rng(5), [3, 8, 1])
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)


def test_forward_hand_computed():
    # identity weights, relu hidden: x -> relu(x) -> sum via ones
    net = mlp_init(make_rng(6), [2, 2, 1])
    net.layers[0].W[...] = np.eye(2)
    net.layers[0].b[...] = 0.0
    net.layers[1].W[...] = 1.0
    net.layers[1].b[...] = 0.5
    y, _ = mlp_forward(net, np.array([3.0, -2.0]))
    assert y == pytest.approx([3.5])


def test_forward_batch_matches_rows():
    net = mlp_init(make_rng(7), [3, 8, 2])
    x = make_rng(8).normal(size=(5, 3))
    y_batch, _ = mlp_forward(net, x)
    for i in range(5):
        yi, _ = mlp_forward(net, x[i])
        # BLAS may order the row and batch matmuls differently
        assert np.allclose(y_batch[i], yi, rtol=1e-13, atol=1e-15)


def test_forward_bad_mode():
    net = mlp_init(make_rng(9), [2, 2])
    with pytest.raises(ValueError):
        mlp_forward(net, np.zeros(2), mode="predict")


# ---------------------------------------------------------------------------
# dropout and layer norm


def test_dropout_eval_is_identity():
    net = mlp_init(make_rng(10), [4, 32, 1], dropout_p=0.5)
    x = np.ones(4)
    y1, _ = mlp_forward(net, x, mode="eval")
    net2 = mlp_init(make_rng(10), [4, 32, 1], dropout_p=0.0)
    y2, _ = mlp_forward(net2, x, mode="eval")
    assert np.array_equal(y1, y2)


def test_dropout_inverted_scaling_preserves_mean():
    # E[mask * pre] == pre: check the empirical mean of masks is ~1
    net = Mlp([numkit.Layer(W=np.eye(50), b=np.zeros(50), dropout_p=0.3)])
    rng = make_rng(11)
    x = np.ones((4000, 50))
    y, cache = mlp_forward(net, x, mode="train", rng=rng)
    mask = cache.masks[0]
    assert set(np.unique(mask)).issubset({0.0, 1.0 / 0.7})
    assert mask.mean() == pytest.approx(1.0, abs=0.01)
    assert np.array_equal(y, mask)


def test_dropout_mask_replay_bit_identical():
    net = mlp_init(make_rng(12), [6, 16, 16, 3], dropout_p=0.25)
    x = make_rng(13).normal(size=(7, 6))
    y1, cache = mlp_forward(net, x, mode="train", rng=make_rng(14))
    y2, _ = mlp_forward(net, x, mode="train", masks=cache.masks)
    assert np.array_equal(y1, y2)


def test_dropout_train_without_rng_errors():
    net = mlp_init(make_rng(15), [2, 4, 1], dropout_p=0.5)
    with pytest.raises(ValueError):
        mlp_forward(net, np.zeros(2), mode="train")


def test_dropout_p_zero_train_needs_no_rng():
    net = mlp_init(make_rng(16), [2, 4, 1])
    y_train, _ = mlp_forward(net, np.ones(2), mode="train")
    y_eval, _ = mlp_forward(net, np.ones(2), mode="eval")
    assert np.array_equal(y_train, y_eval)


def test_layernorm_normalizes_rows():
    net = mlp_init(make_rng(17), [3, 64, 1], layernorm=True)
    net.layers[0].W[...] = make_rng(18).normal(size=(3, 64))
    x = make_rng(19).normal(size=(9, 3)) * 10.0
    _, cache = mlp_forward(net, x)
    _, xhat = cache.ln_stats[0]
    assert np.allclose(xhat.mean(axis=1), 0.0, atol=1e-12)
    assert np.allclose(xhat.var(axis=1), 1.0, atol=1e-3)


def test_layernorm_zero_variance_row_is_finite():
    net = mlp_init(make_rng(20), [2, 8, 1], layernorm=True)
    net.layers[0].W[...] = 0.0  # pre-activation identically constant
    y, cache = mlp_forward(net, np.ones(2))
    assert np.all(np.isfinite(y))
    _, xhat = cache.ln_stats[0]
    assert np.allclose(xhat, 0.0)


# ---------------------------------------------------------------------------
# backward vs central finite differences


def fd_grad(f, arr, h=1e-6):
    g = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        hi = f()
        flat[i] = keep - h
        lo = f()
        flat[i] = keep
        gf[i] = (hi - lo) / (2.0 * h)
    return g


def check_grads(net, x, masks=None, seed=99):
    dy_rng = make_rng(seed)
    y, cache = mlp_forward(net, x, mode="train" if masks else "eval", masks=masks)
    dy = dy_rng.normal(size=y.shape)

    def loss():
        out, _ = mlp_forward(net, x, mode="train" if masks else "eval", masks=masks)
        return float((out * dy).sum())

    grads, dx = mlp_backward(net, cache, dy)
    params = net.parameters()
    assert len(grads) == len(params)
    for p, g in zip(params, grads):
        ref = fd_grad(loss, p)
        assert np.allclose(g, ref, rtol=1e-5, atol=1e-8), (p.shape, g, ref)
    ref_dx = fd_grad(loss, x)
    assert np.allclose(dx, ref_dx, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backward_matches_fd_plain(seed):
    net = mlp_init(make_rng(seed), [3, 8, 8, 2])
    x = make_rng(seed + 100).normal(size=(4, 3))
    check_grads(net, x)


def test_backward_matches_fd_layernorm():
    net = mlp_init(make_rng(30), [3, 8, 8, 2], layernorm=True)
    x = make_rng(31).normal(size=(4, 3))
    check_grads(net, x)


def test_backward_matches_fd_dropout_fixed_masks():
    net = mlp_init(make_rng(32), [3, 8, 8, 2], dropout_p=0.4, layernorm=True)
    x = make_rng(33).normal(size=(4, 3))
    _, cache = mlp_forward(net, x, mode="train", rng=make_rng(34))
    check_grads(net, x, masks=cache.masks)


def test_relu_subgradient_zero_at_zero():
    net = mlp_init(make_rng(35), [1, 1, 1])
    net.layers[0].W[...] = 1.0
    net.layers[0].b[...] = 0.0
    net.layers[1].W[...] = 1.0
    y, cache = mlp_forward(net, np.zeros(1))
    grads, dx = mlp_backward(net, cache, np.ones(1))
    assert y == pytest.approx([0.0])
    assert dx == pytest.approx([0.0])  # relu'(0) = 0 blocks the path


# ---------------------------------------------------------------------------
# adam / polyak


def test_adam_first_step_closed_form():
    # step 1: mhat = g, vhat = g^2, so p -= lr * g / (|g| + eps)
    p = [np.array([1.0])]
    g = [np.array([2.0])]
    st_ = adam_init(p, lr=0.1)
    adam_step(p, g, st_)
    expect = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8)
    assert p[0][0] == pytest.approx(expect, abs=1e-15)
    assert st_.step == 1


def test_adam_two_steps_match_reference():
    rng = make_rng(40)
    p = [rng.normal(size=(3, 2)), rng.normal(size=3)]
    g1 = [rng.normal(size=(3, 2)), rng.normal(size=3)]
    g2 = [rng.normal(size=(3, 2)), rng.normal(size=3)]

    # transparent reference implementation
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    ref = [q.copy() for q in p]
    m = [np.zeros_like(q) for q in p]
    v = [np.zeros_like(q) for q in p]
    for t, gs in [(1, g1), (2, g2)]:
        for i, g in enumerate(gs):
            m[i] = b1 * m[i] + (1 - b1) * g
            v[i] = b2 * v[i] + (1 - b2) * g * g
            mhat = m[i] / (1 - b1 ** t)
            vhat = v[i] / (1 - b2 ** t)
            ref[i] = ref[i] - lr * mhat / (np.sqrt(vhat) + eps)

    st_ = adam_init(p, lr=lr)
    adam_step(p, g1, st_)
    adam_step(p, g2, st_)
    assert st_.step == 2
    for got, want in zip(p, ref):
        assert np.allclose(got, want, rtol=0, atol=1e-15)


def test_adam_rejects_mismatched_lists():
    p = [np.zeros(2)]
    st_ = adam_init(p, lr=0.1)
    with pytest.raises(ValueError):
        adam_step(p, [np.zeros(2), np.zeros(2)], st_)


def test_adam_rejects_bad_lr():
    with pytest.raises(ValueError):
        adam_init([np.zeros(1)], lr=0.0)


def test_polyak_endpoints_and_small_tau():
    t = [np.zeros(4)]
    o = [np.ones(4)]
    polyak_update(t, o, 0.001)
    assert np.allclose(t[0], 0.001)
    polyak_update(t, o, 1.0)
    assert np.array_equal(t[0], np.ones(4))
    polyak_update(t, o, 0.0)
    assert np.array_equal(t[0], np.ones(4))


def test_polyak_rejects_bad_tau():
    with pytest.raises(ValueError):
        polyak_update([np.zeros(1)], [np.zeros(1)], 1.5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-5, 5), st.floats(-5, 5))
def test_polyak_is_convex_combination(tau, a, b):
    t = [np.array([a])]
    polyak_update(t, [np.array([b])], tau)
    lo, hi = min(a, b), max(a, b)
    assert lo - 1e-12 <= t[0][0] <= hi + 1e-12


# ---------------------------------------------------------------------------
# determinism / cloning


def test_forward_backward_bit_identical_across_runs():
    def run():
        net = mlp_init(make_rng(50), [5, 16, 16, 2], dropout_p=0.2, layernorm=True)
        x = make_rng(51).normal(size=(6, 5))
        y, cache = mlp_forward(net, x, mode="train", rng=make_rng(52))
        grads, dx = mlp_backward(net, cache, np.ones_like(y))
        return y, grads, dx

    y1, g1, dx1 = run()
    y2, g2, dx2 = run()
    assert np.array_equal(y1, y2)
    assert np.array_equal(dx1, dx2)
    for a, b in zip(g1, g2):
        assert np.array_equal(a, b)


def test_clone_is_deep():
    net = mlp_init(make_rng(53), [2, 4, 1], layernorm=True)
    cp = net.clone()
    cp.layers[0].W += 1.0
    assert not np.array_equal(net.layers[0].W, cp.layers[0].W)
    y1, _ = mlp_forward(net, np.ones(2))
    net.set_parameters(cp.parameters())
    y2, _ = mlp_forward(net, np.ones(2))
    assert not np.array_equal(y1, y2)
