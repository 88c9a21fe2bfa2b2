import numpy as np
import pytest

from memqa import nn
from memqa.autodiff import Tensor, mul, sum_reduce
from memqa.errors import ConfigError, ShapeError
from memqa.kernels import available_backends
from memqa.optim import AdamState, adam_step
from memqa.params import ParamStore
from util import gradcheck, lstm_cell_oracle

F64 = np.float64


def _store(seed=0):
    return ParamStore(seed=seed, dtype=F64)


def test_bilstm_zero_weights_gives_zero_states():
    store = _store()
    nn.init_bilstm(store, "enc", 3, 4)
    for name, p in store.items():
        p.data[...] = 0.0
    seq = Tensor(np.ones((5, 3)), dtype=F64)
    states, final = nn.bilstm_encode(seq, store, "enc")
    assert np.allclose(states.data, 0.0)
    assert np.allclose(final.data, 0.0)


def test_bilstm_single_step_column_equals_final():
    store = _store(1)
    nn.init_bilstm(store, "enc", 3, 4)
    seq = Tensor(np.random.default_rng(0).normal(size=(1, 3)), dtype=F64)
    states, final = nn.bilstm_encode(seq, store, "enc")
    assert states.data.shape == (4, 1)
    assert np.allclose(states.data[:, 0], final.data)


def test_bilstm_matches_per_step_cell_oracle():
    store = _store(2)
    nn.init_bilstm(store, "enc", 3, 8)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 3))
    states, final = nn.bilstm_encode(Tensor(x, dtype=F64), store, "enc")
    fw = lstm_cell_oracle(x, store["enc.fw.wx"].data, store["enc.fw.wh"].data,
                          store["enc.fw.b"].data)
    bw = lstm_cell_oracle(x[::-1], store["enc.bw.wx"].data, store["enc.bw.wh"].data,
                          store["enc.bw.b"].data)[::-1]
    assert np.allclose(states.data, np.concatenate([fw, bw], axis=1).T, atol=1e-12)
    assert np.allclose(final.data, np.concatenate([fw[-1], bw[0]]), atol=1e-12)


def test_bilstm_odd_output_size_rejected():
    with pytest.raises(ConfigError):
        nn.init_bilstm(_store(), "enc", 3, 5)


def test_lstm_gradients_match_finite_differences():
    store = _store(3)
    nn.init_bilstm(store, "enc", 3, 4)
    x = Tensor(np.random.default_rng(1).normal(size=(4, 3)), requires_grad=True,
               dtype=F64)
    mix = Tensor(np.random.default_rng(2).normal(size=(4, 4)), dtype=F64)

    def build():
        states, final = nn.bilstm_encode(x, store, "enc")
        return sum_reduce(mul(states, mix)) + sum_reduce(final)

    tensors = [x] + [store[n] for n in store.names()]
    gradcheck(build, tensors, rtol=1e-4)


def test_backends_agree_end_to_end():
    backends = available_backends()
    if len(backends) < 2:
        pytest.skip("compiled backend unavailable")
    rng = np.random.default_rng(9)
    x = rng.normal(size=(6, 5, 3)).astype(np.float32)
    wx = rng.normal(size=(3, 16)).astype(np.float32)
    wh = rng.normal(size=(4, 16)).astype(np.float32)
    b = rng.normal(size=(16,)).astype(np.float32)
    g = rng.normal(size=(6, 5, 4)).astype(np.float32)
    results = []
    for mod in backends.values():
        h, gates, c = mod.lstm_forward(x, wx, wh, b, False)
        results.append((h, *mod.lstm_backward(x, wx, wh, b, h, gates, c, g, False)))
    for a, b_ in zip(*results):
        assert np.allclose(a, b_, atol=1e-4)


# -- GRU -----------------------------------------------------------------

def test_gru_saturated_update_gate_keeps_hidden():
    store = _store(4)
    nn.init_gru(store, "gru", 3)
    store["gru.b"].data[3:6] = 1e3  # update gate saturates at 1
    h = Tensor(np.array([0.3, -0.2, 0.9]), dtype=F64)
    x = Tensor(np.array([1.0, 1.0, -1.0]), dtype=F64)
    out = nn.gru_cell(h, x, store, "gru")
    assert np.allclose(out.data, h.data, atol=1e-6)


def test_gru_zero_weights_halves_hidden():
    store = _store(5)
    nn.init_gru(store, "gru", 3)
    for name in ("gru.wx", "gru.wh", "gru.b"):
        store[name].data[...] = 0.0
    h = Tensor(np.array([0.4, -1.0, 2.0]), dtype=F64)
    x = Tensor(np.zeros(3), dtype=F64)
    out = nn.gru_cell(h, x, store, "gru")
    # gates are 0.5, candidate tanh(0)=0: output = 0.5 * hidden
    assert np.allclose(out.data, 0.5 * h.data)


def test_gru_gradients_match_finite_differences():
    store = _store(6)
    nn.init_gru(store, "gru", 4)
    h = Tensor(np.random.default_rng(3).normal(size=4), requires_grad=True, dtype=F64)
    x = Tensor(np.random.default_rng(4).normal(size=4), requires_grad=True, dtype=F64)

    def build():
        return sum_reduce(nn.gru_cell(h, x, store, "gru"))

    gradcheck(build, [h, x] + [store[n] for n in store.names()], rtol=1e-4)


# -- batch norm -----------------------------------------------------------

def _bn_setup(d=3):
    store = _store(7)
    nn.init_batch_norm(store, "bn", d)
    return store, nn.BatchNormState(d, dtype=F64)


def test_batch_norm_constant_column_normalizes_to_zero():
    store, state = _bn_setup()
    x = Tensor(np.full((4, 3), 2.5), dtype=F64)
    out = nn.batch_norm_1d(x, store["bn.gamma"], store["bn.beta"], state, "train")
    assert np.allclose(out.data, 0.0, atol=1e-5)


def test_batch_norm_zero_scale_broadcasts_shift():
    store, state = _bn_setup()
    store["bn.gamma"].data[...] = 0.0
    store["bn.beta"].data[...] = [1.0, 2.0, 3.0]
    x = Tensor(np.random.default_rng(0).normal(size=(4, 3)), dtype=F64)
    out = nn.batch_norm_1d(x, store["bn.gamma"], store["bn.beta"], state, "train")
    assert np.allclose(out.data, [[1.0, 2.0, 3.0]] * 4)


def test_batch_norm_momentum_one_train_equals_eval():
    store, state = _bn_setup()
    state.momentum = 1.0
    x = Tensor(np.random.default_rng(1).normal(size=(5, 3)), dtype=F64)
    out_train = nn.batch_norm_1d(x, store["bn.gamma"], store["bn.beta"], state, "train")
    # by hand: running stats must now exactly equal the batch stats
    assert np.allclose(state.mean, x.data.mean(axis=0))
    assert np.allclose(state.var, x.data.var(axis=0))
    out_eval = nn.batch_norm_1d(x, store["bn.gamma"], store["bn.beta"], state, "eval")
    assert np.allclose(out_train.data, out_eval.data, atol=1e-10)


def test_batch_norm_train_requires_two_rows():
    store, state = _bn_setup()
    x = Tensor(np.ones((1, 3)), dtype=F64)
    with pytest.raises(ShapeError):
        nn.batch_norm_1d(x, store["bn.gamma"], store["bn.beta"], state, "train")


def test_batch_norm_gradients_match_finite_differences():
    store, state = _bn_setup()
    x = Tensor(np.random.default_rng(2).normal(size=(5, 3)), requires_grad=True,
               dtype=F64)
    mix = Tensor(np.random.default_rng(3).normal(size=(5, 3)), dtype=F64)

    def build():
        fresh = nn.BatchNormState(3, dtype=F64)
        out = nn.batch_norm_1d(x, store["bn.gamma"], store["bn.beta"], fresh, "train")
        return sum_reduce(mul(out, mix))

    gradcheck(build, [x, store["bn.gamma"], store["bn.beta"]], rtol=1e-4)


# -- dropout --------------------------------------------------------------

def test_dropout_rate_zero_is_identity():
    x = Tensor(np.ones((3, 3)), dtype=F64)
    rng = np.random.default_rng(0)
    for mode in ("train", "eval"):
        assert nn.dropout(x, 0.0, mode, rng) is x


def test_dropout_eval_mode_is_identity():
    x = Tensor(np.ones((3, 3)), dtype=F64)
    assert nn.dropout(x, 0.3, "eval", np.random.default_rng(0)) is x


def test_dropout_rate_one_rejected():
    with pytest.raises(ConfigError):
        nn.dropout(Tensor(np.ones(3)), 1.0, "train", np.random.default_rng(0))


def test_dropout_preserves_expectation():
    # Monte-Carlo oracle: the empirical expectation over 1e4 draws stays
    # within 2% of the input
    rng = np.random.default_rng(42)
    x = Tensor(np.full((10, 10), 3.0), dtype=F64)
    acc = np.zeros_like(x.data)
    n = 10_000
    for _ in range(n):
        acc += nn.dropout(x, 0.3, "train", rng).data
    assert abs((acc / n).mean() - 3.0) / 3.0 < 0.02
    # and every element's empirical mean is close at a 4-sigma tolerance
    sigma = 3.0 * np.sqrt(0.3 / 0.7) / np.sqrt(n)
    assert np.abs(acc / n - x.data).max() < 4 * sigma


# -- Adam -----------------------------------------------------------------

def test_adam_first_step_size():
    store = _store(8)
    p = store.create("w", (1,), np.array([1.0]))
    state = AdamState(store, lr=0.001)
    p.grad[...] = 1.0
    adam_step(store, state)
    assert state.t == 1
    assert np.allclose(p.data, 1.0 - 0.001, atol=1e-9)


def test_adam_zero_gradient_keeps_parameter():
    store = _store(9)
    p = store.create("w", (2,), np.array([1.0, -2.0]))
    state = AdamState(store, lr=0.001)
    adam_step(store, state)
    assert state.t == 1
    assert np.allclose(p.data, [1.0, -2.0])


def test_adam_missing_gradient_errors():
    store = _store(10)
    p = store.create("w", (2,), "zeros")
    state = AdamState(store)
    p.grad = None
    with pytest.raises(ConfigError):
        adam_step(store, state)


def test_adam_zeroes_gradients_after_step():
    store = _store(11)
    p = store.create("w", (2,), "ones")
    state = AdamState(store)
    p.grad[...] = 5.0
    adam_step(store, state)
    assert np.allclose(p.grad, 0.0)


def test_adam_runs_are_reproducible():
    def run():
        store = ParamStore(seed=3, dtype=np.float32)
        p = store.create("w", (4, 4), "uniform", 0.1)
        state = AdamState(store, lr=0.01)
        rng = np.random.default_rng(0)
        for _ in range(5):
            p.grad[...] = rng.normal(size=(4, 4)).astype(np.float32)
            adam_step(store, state)
        return p.data.copy()

    a, b = run(), run()
    assert (a == b).all()
