"""Pure-numpy sequence kernels (fallback backend).

Same contract as the compiled backend in `_seqkern.pyx`: a full LSTM
pass over a batch of equal-length sequences, forward and backward.
Gate layout along the last axis is [input, forget, cell, output].
"""

import numpy as np

NAME = "python"


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x, wx, wh, b, reverse=False):
    """Run an LSTM over x.

    x:  (T, B, Din)   wx: (Din, 4H)   wh: (H, 4H)   b: (4H,)
    Returns (h_seq, gates, c): h_seq (T, B, H) hidden states stored at
    their original positions, gates (T, B, 4H) post-activation, c
    (T, B, H) cell states.  reverse=True scans t = T-1 .. 0.
    """
    T, B, _ = x.shape
    H = wh.shape[0]
    h_seq = np.zeros((T, B, H), dtype=x.dtype)
    c_seq = np.zeros((T, B, H), dtype=x.dtype)
    gates = np.zeros((T, B, 4 * H), dtype=x.dtype)

    pre_x = x.reshape(T * B, -1) @ wx
    pre_x = pre_x.reshape(T, B, 4 * H) + b

    h_prev = np.zeros((B, H), dtype=x.dtype)
    c_prev = np.zeros((B, H), dtype=x.dtype)
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        g = pre_x[t] + h_prev @ wh
        i = _sigmoid(g[:, 0 * H:1 * H])
        f = _sigmoid(g[:, 1 * H:2 * H])
        u = np.tanh(g[:, 2 * H:3 * H])
        o = _sigmoid(g[:, 3 * H:4 * H])
        c_prev = f * c_prev + i * u
        h_prev = o * np.tanh(c_prev)
        gates[t, :, 0 * H:1 * H] = i
        gates[t, :, 1 * H:2 * H] = f
        gates[t, :, 2 * H:3 * H] = u
        gates[t, :, 3 * H:4 * H] = o
        c_seq[t] = c_prev
        h_seq[t] = h_prev
    return h_seq, gates, c_seq


def lstm_backward(x, wx, wh, b, h_seq, gates, c_seq, d_hseq, reverse=False):
    """Backpropagate through lstm_forward.

    d_hseq (T, B, H) is the gradient w.r.t. h_seq.  Returns gradients
    (dx, dwx, dwh, db) matching the forward arguments.
    """
    T, B, _ = x.shape
    H = wh.shape[0]
    d_gates = np.zeros((T, B, 4 * H), dtype=x.dtype)

    dh_next = np.zeros((B, H), dtype=x.dtype)
    dc_next = np.zeros((B, H), dtype=x.dtype)
    # walk the steps in the opposite order of the forward scan
    steps = range(T) if reverse else range(T - 1, -1, -1)
    zeros = np.zeros((B, H), dtype=x.dtype)
    for t in steps:
        i = gates[t, :, 0 * H:1 * H]
        f = gates[t, :, 1 * H:2 * H]
        u = gates[t, :, 2 * H:3 * H]
        o = gates[t, :, 3 * H:4 * H]
        if reverse:
            c_prev = c_seq[t + 1] if t + 1 < T else zeros
        else:
            c_prev = c_seq[t - 1] if t > 0 else zeros
        tc = np.tanh(c_seq[t])
        dh = d_hseq[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        d_gates[t, :, 0 * H:1 * H] = dc * u * i * (1.0 - i)
        d_gates[t, :, 1 * H:2 * H] = dc * c_prev * f * (1.0 - f)
        d_gates[t, :, 2 * H:3 * H] = dc * i * (1.0 - u * u)
        d_gates[t, :, 3 * H:4 * H] = dh * tc * o * (1.0 - o)
        dh_next = d_gates[t] @ wh.T
        dc_next = dc * f

    # previous hidden state per position, for the weight gradients
    h_prev_seq = np.zeros_like(h_seq)
    if reverse:
        h_prev_seq[:-1] = h_seq[1:]
    else:
        h_prev_seq[1:] = h_seq[:-1]

    flat_dg = d_gates.reshape(T * B, 4 * H)
    dx = (flat_dg @ wx.T).reshape(x.shape)
    dwx = x.reshape(T * B, -1).T @ flat_dg
    dwh = h_prev_seq.reshape(T * B, H).T @ flat_dg
    db = d_gates.sum(axis=(0, 1))
    return dx, dwx, dwh, db
