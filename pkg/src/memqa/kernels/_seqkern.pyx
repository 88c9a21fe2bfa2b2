# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM sequence kernels.

Matmuls go through numpy (BLAS); the per-step gate math is fused into
single C loops, which is where the numpy fallback spends most of its
time on small hidden sizes.  Gate layout: [input, forget, cell, output].
"""

import numpy as np

cimport cython
from libc.math cimport exp as c_exp, tanh as c_tanh

NAME = "compiled"

ctypedef fused real:
    float
    double


cdef inline real _sig(real z) nogil:
    cdef real e
    if z >= 0:
        return <real>(1.0 / (1.0 + c_exp(-z)))
    e = <real>c_exp(z)
    return <real>(e / (1.0 + e))


@cython.boundscheck(False)
def _forward_steps(real[:, :, ::1] pre, real[:, :, ::1] gates,
                   real[:, :, ::1] c_seq, real[:, :, ::1] h_seq,
                   object wh, bint reverse):
    """Fused gate/state update; `pre` holds x@wx + b per step."""
    cdef Py_ssize_t T = pre.shape[0]
    cdef Py_ssize_t B = pre.shape[1]
    cdef Py_ssize_t H4 = pre.shape[2]
    cdef Py_ssize_t H = H4 // 4
    cdef Py_ssize_t t, n, j, step
    cdef real gi, gf, gu, go, cp
    cdef real[:, ::1] contrib

    h_prev = np.zeros((B, H), dtype=np.asarray(pre).dtype)
    for step in range(T):
        t = T - 1 - step if reverse else step
        contrib_np = np.dot(h_prev, wh)
        contrib = contrib_np
        with nogil:
            for n in range(B):
                for j in range(H):
                    gi = _sig(pre[t, n, j] + contrib[n, j])
                    gf = _sig(pre[t, n, H + j] + contrib[n, H + j])
                    gu = <real>c_tanh(pre[t, n, 2 * H + j] + contrib[n, 2 * H + j])
                    go = _sig(pre[t, n, 3 * H + j] + contrib[n, 3 * H + j])
                    if reverse:
                        cp = c_seq[t + 1, n, j] if t + 1 < T else <real>0.0
                    else:
                        cp = c_seq[t - 1, n, j] if t > 0 else <real>0.0
                    cp = gf * cp + gi * gu
                    gates[t, n, j] = gi
                    gates[t, n, H + j] = gf
                    gates[t, n, 2 * H + j] = gu
                    gates[t, n, 3 * H + j] = go
                    c_seq[t, n, j] = cp
                    h_seq[t, n, j] = go * <real>c_tanh(cp)
        h_prev = np.asarray(h_seq[t])


def lstm_forward(x, wx, wh, b, bint reverse=False):
    """Same contract as the numpy backend: returns (h_seq, gates, c_seq)."""
    x = np.ascontiguousarray(x)
    T, B, _ = x.shape
    H = wh.shape[0]
    dtype = x.dtype
    pre = (x.reshape(T * B, -1) @ wx).reshape(T, B, 4 * H) + b
    pre = np.ascontiguousarray(pre)
    gates = np.zeros((T, B, 4 * H), dtype=dtype)
    c_seq = np.zeros((T, B, H), dtype=dtype)
    h_seq = np.zeros((T, B, H), dtype=dtype)
    _forward_steps(pre, gates, c_seq, h_seq, np.ascontiguousarray(wh), reverse)
    return h_seq, gates, c_seq


@cython.boundscheck(False)
def _backward_steps(real[:, :, ::1] gates, real[:, :, ::1] c_seq,
                    real[:, :, ::1] d_hseq, real[:, :, ::1] d_gates,
                    object wh_t, bint reverse):
    cdef Py_ssize_t T = gates.shape[0]
    cdef Py_ssize_t B = gates.shape[1]
    cdef Py_ssize_t H = c_seq.shape[2]
    cdef Py_ssize_t t, n, j, step
    cdef real gi, gf, gu, go, cp, tc, dh, dc
    cdef real[:, ::1] dh_next_v
    cdef real[:, ::1] dc_next

    dtype = np.asarray(gates).dtype
    dh_next = np.zeros((B, H), dtype=dtype)
    dc_next_np = np.zeros((B, H), dtype=dtype)
    dc_next = dc_next_np
    for step in range(T):
        # opposite order of the forward scan
        t = step if reverse else T - 1 - step
        dh_next_v = dh_next
        with nogil:
            for n in range(B):
                for j in range(H):
                    gi = gates[t, n, j]
                    gf = gates[t, n, H + j]
                    gu = gates[t, n, 2 * H + j]
                    go = gates[t, n, 3 * H + j]
                    if reverse:
                        cp = c_seq[t + 1, n, j] if t + 1 < T else <real>0.0
                    else:
                        cp = c_seq[t - 1, n, j] if t > 0 else <real>0.0
                    tc = <real>c_tanh(c_seq[t, n, j])
                    dh = d_hseq[t, n, j] + dh_next_v[n, j]
                    dc = dc_next[n, j] + dh * go * (<real>1.0 - tc * tc)
                    d_gates[t, n, j] = dc * gu * gi * (<real>1.0 - gi)
                    d_gates[t, n, H + j] = dc * cp * gf * (<real>1.0 - gf)
                    d_gates[t, n, 2 * H + j] = dc * gi * (<real>1.0 - gu * gu)
                    d_gates[t, n, 3 * H + j] = dh * tc * go * (<real>1.0 - go)
                    dc_next[n, j] = dc * gf
        dh_next = np.asarray(d_gates[t]) @ wh_t


def lstm_backward(x, wx, wh, b, h_seq, gates, c_seq, d_hseq, bint reverse=False):
    """Same contract as the numpy backend: returns (dx, dwx, dwh, db)."""
    x = np.ascontiguousarray(x)
    T, B, _ = x.shape
    H = wh.shape[0]
    d_gates = np.zeros_like(np.ascontiguousarray(gates))
    _backward_steps(np.ascontiguousarray(gates), np.ascontiguousarray(c_seq),
                    np.ascontiguousarray(d_hseq), d_gates,
                    np.ascontiguousarray(wh.T), reverse)

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
