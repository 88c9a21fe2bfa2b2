"""Recurrent cells, normalization, dropout and small layer helpers.

Recurrent sequence passes run through the selected kernel backend as a
single fused tape node; everything else is composed from primitives.
"""

import numpy as np

from . import kernels
from .autodiff import (Tensor, add, concat, custom_op, embedding_lookup,
                       matmul, mul, reshape, sigmoid, tanh, transpose)
from .errors import ConfigError, ShapeError


def affine(x, w, b):
    """x (N, in) @ w (in, out) + b (out,)."""
    return add(matmul(x, w), b)


def row(x, i):
    """Extract row i of a 2-d tensor as a vector."""
    return reshape(embedding_lookup(x, np.array([i])), (x.shape[1],))


# -- LSTM --------------------------------------------------------------

def init_lstm_cell(store, prefix, d_in, hidden):
    """Create wx/wh/b for one LSTM direction under `prefix`."""
    bound = 1.0 / np.sqrt(hidden)
    store.create(f"{prefix}.wx", (d_in, 4 * hidden), "uniform", bound)
    store.create(f"{prefix}.wh", (hidden, 4 * hidden), "uniform", bound)
    store.create(f"{prefix}.b", (4 * hidden,), "zeros")


def init_bilstm(store, prefix, d_in, d_out):
    if d_out % 2 != 0:
        raise ConfigError(f"bilstm {prefix}: output size {d_out} must be even")
    init_lstm_cell(store, f"{prefix}.fw", d_in, d_out // 2)
    init_lstm_cell(store, f"{prefix}.bw", d_in, d_out // 2)


def lstm_layer(x, wx, wh, b, reverse=False):
    """Fused LSTM pass: x (T, B, Din) -> hidden states (T, B, H)."""
    if x.data.ndim != 3:
        raise ShapeError(f"lstm_layer: expected (T, B, Din), got {x.data.shape}")
    h_seq, gates, c_seq = kernels.lstm_forward(x.data, wx.data, wh.data, b.data, reverse)

    def _grads(g):
        return kernels.lstm_backward(x.data, wx.data, wh.data, b.data,
                                     h_seq, gates, c_seq, g, reverse)

    return custom_op(h_seq, "lstm", (x, wx, wh, b), _grads)


def bilstm_states(x, params, prefix):
    """Bidirectional pass over x (T, B, Din) -> (h_fw, h_bw), each (T, B, H)."""
    h_fw = lstm_layer(x, params[f"{prefix}.fw.wx"], params[f"{prefix}.fw.wh"],
                      params[f"{prefix}.fw.b"], reverse=False)
    h_bw = lstm_layer(x, params[f"{prefix}.bw.wx"], params[f"{prefix}.bw.wh"],
                      params[f"{prefix}.bw.b"], reverse=True)
    return h_fw, h_bw


def bilstm_encode(seq, params, prefix):
    """Encode one sequence (L, Din) -> (states d x L, final state d).

    Column j stacks the forward and backward hidden states at position
    j; the final state concatenates the last forward state with the
    backward state at position 0.
    """
    L, d_in = seq.data.shape
    x = reshape(seq, (L, 1, d_in))
    h_fw, h_bw = bilstm_states(x, params, prefix)
    H = h_fw.data.shape[2]
    fw = reshape(h_fw, (L, H))
    bw = reshape(h_bw, (L, H))
    states = transpose(concat([fw, bw], axis=1))  # (d, L)
    final = concat([row(fw, L - 1), row(bw, 0)], axis=0)  # (d,)
    return states, final


def bilstm_finals_batch(x, params, prefix):
    """Final states for a batch of equal-length sequences: (T, B, Din) -> (B, d)."""
    T, B, _ = x.data.shape
    h_fw, h_bw = bilstm_states(x, params, prefix)
    H = h_fw.data.shape[2]
    fw_flat = reshape(h_fw, (T, B * H))
    bw_flat = reshape(h_bw, (T, B * H))
    fw_last = reshape(row(fw_flat, T - 1), (B, H))
    bw_first = reshape(row(bw_flat, 0), (B, H))
    return concat([fw_last, bw_first], axis=1)


# -- GRU ---------------------------------------------------------------

def init_gru(store, prefix, d):
    bound = 1.0 / np.sqrt(d)
    store.create(f"{prefix}.wx", (d, 3 * d), "uniform", bound)
    store.create(f"{prefix}.wh", (d, 3 * d), "uniform", bound)
    store.create(f"{prefix}.b", (3 * d,), "zeros")


def gru_cell(hidden, inp, params, prefix):
    """One GRU update of a state vector (d,) given an input vector (d,).

    Gate layout along the packed axis: [reset, update, candidate]; the
    update gate keeps the old state (z=1 -> output == hidden).
    """
    d = hidden.data.shape[0]
    if inp.data.shape != (d,):
        raise ShapeError(f"gru_cell: input {inp.data.shape} vs hidden {hidden.data.shape}")
    h2 = reshape(hidden, (1, d))
    x2 = reshape(inp, (1, d))
    gx = reshape(affine(x2, params[f"{prefix}.wx"], params[f"{prefix}.b"]), (3, d))
    gh = reshape(matmul(h2, params[f"{prefix}.wh"]), (3, d))
    r = sigmoid(add(row(gx, 0), row(gh, 0)))
    z = sigmoid(add(row(gx, 1), row(gh, 1)))
    cand = tanh(add(row(gx, 2), mul(r, row(gh, 2))))
    return add(mul(z, hidden), mul(1.0 - z, cand))


# -- batch norm ---------------------------------------------------------

class BatchNormState:
    """Running statistics for one batch-norm layer (not trainable)."""

    def __init__(self, d, dtype=np.float32, momentum=0.1, eps=1e-5):
        self.mean = np.zeros(d, dtype=dtype)
        self.var = np.ones(d, dtype=dtype)
        self.momentum = float(momentum)
        self.eps = float(eps)


def init_batch_norm(store, prefix, d):
    store.create(f"{prefix}.gamma", (d,), "ones")
    store.create(f"{prefix}.beta", (d,), "zeros")


def batch_norm_1d(x, gamma, beta, state, mode):
    """Normalize x (B, d) per feature; train mode updates running stats."""
    if x.data.ndim != 2:
        raise ShapeError(f"batch_norm_1d: expected (B, d), got {x.data.shape}")
    B = x.data.shape[0]
    if mode == "train":
        if B < 2:
            raise ShapeError("batch_norm_1d: train mode needs a batch of at least 2")
        mean = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        m = state.momentum
        state.mean[...] = (1.0 - m) * state.mean + m * mean
        state.var[...] = (1.0 - m) * state.var + m * var
    elif mode == "eval":
        mean = state.mean.astype(x.data.dtype)
        var = state.var.astype(x.data.dtype)
    else:
        raise ConfigError(f"batch_norm_1d: unknown mode {mode!r}")

    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mean) * inv_std
    out = gamma.data * xhat + beta.data

    def _grads(g):
        dgamma = (g * xhat).sum(axis=0)
        dbeta = g.sum(axis=0)
        if mode == "train":
            dx = (gamma.data * inv_std / B) * (
                B * g - dbeta - xhat * dgamma)
        else:
            dx = g * gamma.data * inv_std
        return dx, dgamma, dbeta

    return custom_op(out, "batch_norm", (x, gamma, beta), _grads)


# -- dropout ------------------------------------------------------------

def dropout(x, rate, mode, rng):
    """Inverted dropout; identity at rate 0 or in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate {rate} outside [0, 1)")
    if mode != "train" or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate)
    scale = 1.0 / (1.0 - rate)
    mask = keep.astype(x.data.dtype) * scale
    out = x.data * mask

    def _grads(g):
        return (g * mask,)

    return custom_op(out, "dropout", (x,), _grads)
