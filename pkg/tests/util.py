"""Shared test oracles: central finite differences and cell recurrences."""

import numpy as np


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_cell_oracle(x_seq, wx, wh, b):
    """Step-by-step single-cell recurrence (the fused kernel's oracle)."""
    H = wh.shape[0]
    h = np.zeros(H)
    c = np.zeros(H)
    out = []
    for x in x_seq:
        g = x @ wx + h @ wh + b
        i, f, u, o = (sigmoid(g[:H]), sigmoid(g[H:2 * H]),
                      np.tanh(g[2 * H:3 * H]), sigmoid(g[3 * H:]))
        c = f * c + i * u
        h = o * np.tanh(c)
        out.append(h.copy())
    return np.stack(out)


def bilstm_oracle(x_seq, params, prefix):
    """Per-step oracle for a bidirectional pass -> (states d x L, final)."""
    fw = lstm_cell_oracle(x_seq, params[f"{prefix}.fw.wx"].data,
                          params[f"{prefix}.fw.wh"].data,
                          params[f"{prefix}.fw.b"].data)
    bw = lstm_cell_oracle(x_seq[::-1], params[f"{prefix}.bw.wx"].data,
                          params[f"{prefix}.bw.wh"].data,
                          params[f"{prefix}.bw.b"].data)[::-1]
    states = np.concatenate([fw, bw], axis=1).T
    final = np.concatenate([fw[-1], bw[0]])
    return states, final


def softmax_np(x, axis=-1):
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def additive_attention_oracle(query, keys, w1, w2, mask=None):
    logits = np.array([(np.tanh(np.concatenate([query, k]) @ w1) @ w2).item()
                       for k in keys])
    if mask is not None:
        logits = np.where(mask, logits, -1e9)
    return softmax_np(logits)


def importance_oracle(h, keys, values):
    """Triple-loop recomputation of the aspect-importance stage."""
    d, length = h.shape
    n = keys.shape[0]
    scores3 = np.zeros((length, n, 3))
    for j in range(length):
        for i in range(n):
            for x in range(3):
                scores3[j, i, x] = keys[i, x] @ h[:, j]
    aspect_scores = scores3.max(axis=0)
    aspect_weights = softmax_np(aspect_scores, axis=1)
    focused = np.zeros((n, d))
    for i in range(n):
        for x in range(3):
            focused[i] += aspect_weights[i, x] * keys[i, x]
    return scores3, aspect_scores, aspect_weights, focused, values.sum(axis=1)


def enhance_oracle(h, word_weights, scores3, value_sums, focused, mask):
    """Line-by-line recomputation of the mutual-enhancing stage."""
    word_slot = scores3.max(axis=2)
    masked = np.where(mask[None, :], word_slot, -1e9)
    slot_weights = softmax_np(masked, axis=1)
    enhanced_states = h + (word_weights[:, None] * (slot_weights @ value_sums)).T
    enhanced_question = enhanced_states @ word_weights
    word_weights_per_slot = softmax_np(word_slot.T, axis=1)
    slot_attention = slot_weights.T @ word_weights
    enhanced_keys = focused + slot_attention[:, None] * \
        (word_weights_per_slot @ enhanced_states.T)
    return (word_slot, slot_weights, enhanced_states, enhanced_question,
            word_weights_per_slot, slot_attention, enhanced_keys)


def gru_oracle(hidden, inp, wx, wh, b):
    d = hidden.shape[0]
    gx = inp @ wx + b
    gh = hidden @ wh
    r = sigmoid(gx[:d] + gh[:d])
    z = sigmoid(gx[d:2 * d] + gh[d:2 * d])
    cand = np.tanh(gx[2 * d:] + r * gh[2 * d:])
    return z * hidden + (1 - z) * cand


def hinge_sum_oracle(query, rows, positive, negative):
    """Double-loop hinge sum over every (positive, negative) pair."""
    scores = rows @ query
    return sum(max(0.0, 1.0 + scores[n] - scores[p])
               for p in positive for n in negative)


def generalize_oracle(q, keys, values, mask, params):
    """Loop recomputation of the gated memory read + question update."""
    a = additive_attention_oracle(q, keys, params["reason.att_read.w1"].data,
                                  params["reason.att_read.w2"].data, mask)
    read = a @ values
    updated = gru_oracle(q, read, params["reason.gru.wx"].data,
                         params["reason.gru.wh"].data, params["reason.gru.b"].data)
    return a, read, updated


def numeric_grad(fn, tensor, h=1e-5):
    """Central-difference gradient of scalar fn() w.r.t. tensor.data."""
    g = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = fn()
        flat[i] = old - h
        down = fn()
        flat[i] = old
        gf[i] = (up - down) / (2.0 * h)
    return g


def gradcheck(build, tensors, rtol=1e-4, atol=1e-7, h=1e-5):
    """Assert tape gradients match finite differences.

    build() must create a fresh scalar graph from `tensors` (the tape is
    single-use).  All tensors should be float64 leaves.
    """
    for t in tensors:
        assert t.data.dtype == np.float64, "gradcheck needs float64 tensors"
        t.grad = np.zeros_like(t.data)
    build().backward()
    for t in tensors:
        analytic = t.grad.copy()
        numeric = numeric_grad(lambda: build().item(), t, h)
        err = np.abs(analytic - numeric)
        tol = rtol * np.maximum(np.abs(analytic), np.abs(numeric)) + atol
        worst = (err - tol).max()
        assert (err <= tol).all(), (
            f"gradient mismatch: worst excess {worst:.3g}, "
            f"max analytic {np.abs(analytic).max():.3g}")
