import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermocast.errors import CheckpointError, NonFiniteLoss, ShapeMismatch
from thermocast.nn_core import (
    AdamState,
    DenseParams,
    LSTMParams,
    ParameterVector,
    adam_step,
    compute_gradients,
    dense_forward,
    init_params,
    load_checkpoint,
    lstm_forward,
    network_arrays,
    network_from_arrays,
    numerical_gradient,
    relative_error,
    save_checkpoint,
)


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def mse_head(targets):
    def f(y):
        r = y - targets
        return float(np.mean(r * r)), 2 * r / r.size, {}
    return f


def random_net(seed, hidden=4, inputs=4):
    rng = np.random.default_rng(seed)
    H = hidden
    return (LSTMParams(rng.normal(0, 0.5, (4 * H, inputs)), rng.normal(0, 0.5, (4 * H, H)),
                       rng.normal(0, 0.5, 4 * H)),
            DenseParams(rng.normal(0, 0.5, H), float(rng.normal())))


# -- forward ------------------------------------------------------------------

def test_zero_params_give_zero_state():
    lstm, head = init_params(0, hidden_size=5, scheme="zeros", forget_bias=0.0)
    h, _ = lstm_forward(lstm, np.random.default_rng(1).normal(size=(7, 4)))
    assert np.array_equal(h, np.zeros(5))


def test_empty_sequence_returns_initial_state():
    lstm, _ = init_params(0, hidden_size=3)
    h, _ = lstm_forward(lstm, np.zeros((0, 4)))
    assert np.array_equal(h, np.zeros(3))


def test_hand_rollout_hidden_size_one():
    # per gate (w, u, b) with input size 1
    wi, ui, bi = 0.5, -0.3, 0.1
    wf, uf, bf = -0.2, 0.4, 1.0
    wo, uo, bo = 0.7, 0.2, -0.1
    wg, ug, bg = 1.1, -0.6, 0.05
    lstm = LSTMParams([[wi], [wf], [wo], [wg]], [[ui], [uf], [uo], [ug]], [bi, bf, bo, bg])
    xs = [0.8, -1.5]
    h = c = 0.0
    for x in xs:
        i = _sig(wi * x + ui * h + bi)
        f = _sig(wf * x + uf * h + bf)
        o = _sig(wo * x + uo * h + bo)
        g = math.tanh(wg * x + ug * h + bg)
        c = f * c + i * g
        h = o * math.tanh(c)
    out, _ = lstm_forward(lstm, np.array(xs).reshape(2, 1))
    assert out[0] == pytest.approx(h, abs=1e-14)


def test_batched_equals_single():
    lstm, _ = random_net(3)
    x = np.random.default_rng(4).normal(size=(5, 6, 4))
    hb, _ = lstm_forward(lstm, x)
    for k in range(5):
        hs, _ = lstm_forward(lstm, x[k])
        assert np.allclose(hb[k], hs, rtol=0, atol=1e-15)


def test_forward_shape_mismatch():
    lstm, head = init_params(0, hidden_size=3)
    with pytest.raises(ShapeMismatch):
        lstm_forward(lstm, np.zeros((6, 5)))
    with pytest.raises(ShapeMismatch):
        dense_forward(head, np.zeros(4))
    with pytest.raises(ShapeMismatch):
        LSTMParams(np.zeros((8, 4)), np.zeros((8, 3)), np.zeros(8))


@given(st.integers(0, 10_000))
def test_forward_bounded_and_deterministic(seed):
    lstm, _ = random_net(seed)
    x = np.random.default_rng(seed).normal(0, 5, size=(3, 6, 4))
    h1, _ = lstm_forward(lstm, x)
    h2, _ = lstm_forward(lstm, x)
    assert np.array_equal(h1, h2)
    assert np.all(np.abs(h1) < 1)


def test_dense_examples():
    assert dense_forward(DenseParams(np.zeros(4), 3.0), np.ones(4)) == 3.0
    assert dense_forward(DenseParams([1.0, 0, 0], 0.5), [5.0, 7.0, 9.0]) == 5.5
    rng = np.random.default_rng(0)
    w, h, b = rng.normal(size=16), rng.normal(size=16), 0.3
    assert dense_forward(DenseParams(w, b), h) == pytest.approx(sum(a * x for a, x in zip(w, h)) + b, abs=1e-12)


# -- gradients ----------------------------------------------------------------

def _flat_loss(arrays_template, x, targets):
    def f(theta):
        arrays = ParameterVector.from_arrays(arrays_template).with_values(theta).to_arrays()
        lstm, head = network_from_arrays(arrays)
        h, _ = lstm_forward(lstm, x)
        r = dense_forward(head, h) - targets
        return float(np.mean(r * r))
    return f


def _analytic(lstm, head, x, targets):
    _, gl, gh, _ = compute_gradients(lstm, head, x, mse_head(targets))
    return ParameterVector.from_arrays(network_arrays(gl, gh)).values


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check(seed):
    lstm, head = random_net(seed)
    rng = np.random.default_rng(100 + seed)
    x, targets = rng.normal(size=(3, 6, 4)), rng.normal(size=3)
    arrays = network_arrays(lstm, head)
    theta = ParameterVector.from_arrays(arrays).values
    num = numerical_gradient(_flat_loss(arrays, x, targets), theta, 1e-5)
    ana = _analytic(lstm, head, x, targets)
    mask = np.abs(num) > 1e-8
    assert np.all(relative_error(ana[mask], num[mask]) < 1e-4)


def test_gradient_zero_at_minimum():
    # a zero network with dense bias equal to the target mean is stationary in the bias
    lstm, head = init_params(0, hidden_size=2, scheme="zeros")
    head = DenseParams(head.w, 1.5)
    x = np.random.default_rng(0).normal(size=(4, 6, 4))
    _, _, gh, _ = compute_gradients(lstm, head, x, mse_head(np.array([1.0, 2.0, 1.0, 2.0])))
    assert abs(gh.b) < 1e-12


def test_gradient_invariant_to_duplicated_batch():
    lstm, head = random_net(7)
    rng = np.random.default_rng(8)
    x, t = rng.normal(size=(3, 6, 4)), rng.normal(size=3)
    g1 = _analytic(lstm, head, x, t)
    g2 = _analytic(lstm, head, np.concatenate([x, x]), np.concatenate([t, t]))
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-15)


def test_non_finite_loss():
    lstm, head = random_net(0)
    with pytest.raises(NonFiniteLoss):
        compute_gradients(lstm, head, np.zeros((1, 6, 4)), lambda y: (float("nan"), y, {}))


# -- parameter vectors --------------------------------------------------------

@given(st.integers(1, 8), st.integers(0, 1000))
def test_parameter_vector_roundtrip(hidden, seed):
    lstm, head = init_params(seed, hidden_size=hidden)
    arrays = network_arrays(lstm, head)
    pv = ParameterVector.from_arrays(arrays)
    back = pv.to_arrays()
    assert list(back) == list(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
    assert len(pv.names()) == len(pv) == 4 * hidden * (4 + hidden) + 4 * hidden + hidden + 1
    l2, h2 = network_from_arrays(back)
    assert np.array_equal(l2.W, lstm.W) and h2.b == head.b


def test_parameter_vector_ordering_is_documented():
    lstm, head = init_params(0, hidden_size=2)
    pv = ParameterVector.from_arrays(network_arrays(lstm, head))
    names = pv.names()
    assert names[0] == "lstm.W[0,0]" and names[-1] == "dense.b"
    assert pv.values[0] == lstm.W[0, 0] and pv.values[1] == lstm.W[0, 1]


# -- init ---------------------------------------------------------------------

def test_init_deterministic_and_bounded():
    a, b = init_params(5), init_params(5)
    assert np.array_equal(a[0].W, b[0].W) and np.array_equal(a[1].w, b[1].w)
    lstm, head = a
    assert np.all(np.abs(lstm.W) <= 1 / math.sqrt(4))
    assert np.all(np.abs(lstm.U) <= 1 / math.sqrt(16))
    assert np.all(np.abs(head.w) <= 1 / math.sqrt(16))
    f = lstm.gate("f")[2]
    assert np.all(f == 1.0) and np.all(lstm.gate("i")[2] == 0.0)


def test_init_mean_near_zero():
    draws = np.concatenate([init_params(s, hidden_size=16)[0].U.ravel() for s in range(10)])[:10_000]
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean()) < 3 * se


# -- Adam ---------------------------------------------------------------------

def test_adam_first_step_is_signed_lr():
    g = np.array([3.0, -0.5, 1e3])
    new, st_ = adam_step(np.zeros(3), g, AdamState.zeros(3))
    assert np.allclose(new, -1e-3 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    assert st_.step == 1


def test_adam_zero_gradient():
    x = np.array([1.0, 2.0])
    new, st_ = adam_step(x, np.zeros(2), AdamState.zeros(2))
    assert np.array_equal(new, x) and st_.step == 1


def test_adam_minimizes_quadratic():
    # steps are bounded by ~lr, so the start must lie within reach of 2000 steps
    target = 0.5
    x, state = np.array([0.0]), AdamState.zeros(1)
    for _ in range(2000):
        x, state = adam_step(x, 2 * (x - target), state)
    assert abs(x[0] - target) < 1e-3


def test_adam_length_mismatch():
    with pytest.raises(ShapeMismatch):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2))


def test_adam_does_not_mutate_inputs():
    x, g = np.ones(2), np.ones(2)
    state = AdamState.zeros(2)
    adam_step(x, g, state)
    assert np.array_equal(x, np.ones(2)) and np.array_equal(state.m, np.zeros(2))


# -- checkpoints --------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    lstm, head = init_params(3, hidden_size=4)
    pv = ParameterVector.from_arrays(network_arrays(lstm, head))
    path = save_checkpoint(tmp_path / "m.json", "rnn", pv, {"note": 1})
    family, back, meta = load_checkpoint(path)
    assert family == "rnn" and meta == {"note": 1}
    assert np.array_equal(back.values, pv.values) and back.layout == pv.layout


def test_checkpoint_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"magic": "other", "version": 1}')
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
    p.write_text("not json")
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.json")
