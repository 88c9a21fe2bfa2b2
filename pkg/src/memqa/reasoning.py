"""Two-layered bidirectional attention over the key-value memory.

The first layer scores question words against the KB (and KB aspects
against the question); the second layer injects each side's summary
into the other's representation; a final gated read updates the
question vector before scoring.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (Tensor, add, concat, masked_fill, matmul, max_reduce,
                       mean_reduce, mul, reshape, softmax, sum_reduce, tanh,
                       transpose)
from .encoders import ASPECTS
from .errors import ShapeError
from .nn import bilstm_encode, gru_cell

NEG_INF = -1e9


@dataclass
class AblationFlags:
    """Switches that disable individual reasoning stages."""
    no_bidirectional_attn: bool = False
    no_kb_aware_attn_use_self_attn: bool = False
    no_importance: bool = False
    no_enhancing: bool = False
    no_generalization: bool = False
    no_joint_type_matching: bool = False
    no_topic_delex: bool = False
    no_constraint_delex: bool = False

    NAMES = ("no_bidirectional_attn", "no_kb_aware_attn_use_self_attn",
             "no_importance", "no_enhancing", "no_generalization",
             "no_joint_type_matching", "no_topic_delex", "no_constraint_delex")

    def normalized(self):
        """Turning off the whole attention network implies its three parts."""
        if not self.no_bidirectional_attn:
            return self
        return AblationFlags(
            no_bidirectional_attn=True,
            no_kb_aware_attn_use_self_attn=True,
            no_importance=True,
            no_enhancing=True,
            no_generalization=self.no_generalization,
            no_joint_type_matching=self.no_joint_type_matching,
            no_topic_delex=self.no_topic_delex,
            no_constraint_delex=self.no_constraint_delex,
        )


@dataclass
class AttentionBundle:
    """Every intermediate the reasoning pass produces for one question."""
    self_att: Tensor = None            # (|Q|, |Q|)
    question_summary: Tensor = None    # (d,)
    aspect_summaries: dict = field(default_factory=dict)  # aspect -> (d,)
    kb_summary: Tensor = None          # (d, 3)
    word_aspect_scores: Tensor = None  # (|Q|, 3)
    word_max_scores: Tensor = None     # (|Q|,)
    word_weights: Tensor = None        # (|Q|,) distribution over words
    word_slot_scores3: Tensor = None   # (|Q|, N, 3)
    aspect_scores: Tensor = None       # (N, 3)
    aspect_weights: Tensor = None      # (N, 3) distribution per candidate
    focused_keys: Tensor = None        # (N, d)
    value_sums: Tensor = None          # (N, d)
    word_slot_scores: Tensor = None    # (|Q|, N)
    slot_weights_per_word: Tensor = None  # (|Q|, N) rows over slots
    enhanced_states: Tensor = None     # (d, |Q|)
    enhanced_question: Tensor = None   # (d,)
    enhanced_keys: Tensor = None       # (N, d)
    slot_attention: Tensor = None      # (N,)
    word_weights_per_slot: Tensor = None  # (N, |Q|) rows over words
    read_weights: Tensor = None        # (N,)
    read_vector: Tensor = None         # (d,)
    gru_state: Tensor = None           # (d,)
    final_question: Tensor = None      # (d,)


def additive_attention(query, keys, w1, w2, mask=None):
    """softmax over n of tanh([query; key_i] @ w1) @ w2, mask-aware.

    query (d,), keys (n, d), w1 (2d, d), w2 (d, 1) -> weights (n,).
    """
    n, d = keys.data.shape
    if query.data.shape != (d,):
        raise ShapeError(f"additive_attention: query {query.data.shape} vs keys {keys.data.shape}")
    tiled = add(reshape(query, (1, d)), Tensor(np.zeros((n, d), dtype=keys.data.dtype)))
    scores = matmul(tanh(matmul(concat([tiled, keys], axis=1), w1)), w2)  # (n, 1)
    logits = reshape(scores, (n,))
    if mask is not None:
        logits = masked_fill(logits, ~np.asarray(mask), NEG_INF)
    return softmax(logits, axis=-1)


def self_attend(states, params):
    """Summarize question states (d, |Q|) into one vector via self-attention."""
    att = softmax(matmul(transpose(states), states), axis=-1)  # (|Q|, |Q|)
    mixed = matmul(states, transpose(att))                     # (d, |Q|)
    seq = transpose(concat([mixed, states], axis=0))           # (|Q|, 2d)
    _, summary = bilstm_encode(seq, params, "reason.selfatt")
    return summary, att


def kb_summary(question_summary, memory, params):
    """Read one summary vector per aspect from the memory values."""
    if not memory.mask.any():
        raise ShapeError("kb_summary: memory is fully masked")
    summaries = {}
    columns = []
    d = question_summary.data.shape[0]
    for aspect in ASPECTS:
        weights = additive_attention(question_summary,
                                     memory.keys_by_aspect[aspect],
                                     params[f"reason.att_{aspect}.w1"],
                                     params[f"reason.att_{aspect}.w2"],
                                     mask=memory.mask)
        m_x = reshape(matmul(reshape(weights, (1, memory.size)),
                             memory.values_by_aspect[aspect]), (d,))
        summaries[aspect] = m_x
        columns.append(reshape(m_x, (d, 1)))
    return summaries, concat(columns, axis=1)  # dict, (d, 3)


def kb_aware_question_attention(states, kb_summary_mat):
    """Weight question words by their strongest connection to any aspect."""
    word_aspect = matmul(transpose(states), kb_summary_mat)  # (|Q|, 3)
    word_max, _ = max_reduce(word_aspect, axis=1)            # (|Q|,)
    return word_aspect, word_max, softmax(word_max, axis=-1)


def importance(states, memory):
    """Score (word, candidate, aspect) triples and weight aspects per candidate.

    Returns (scores3 (|Q|, N, 3), aspect_scores (N, 3),
    aspect_weights (N, 3), focused_keys (N, d), value_sums (N, d)).
    """
    n, _, d = memory.keys.data.shape
    length = states.data.shape[1]
    flat = reshape(memory.keys, (n * 3, d))
    scores3 = reshape(transpose(matmul(flat, states)), (length, n, 3))
    aspect_scores, _ = max_reduce(scores3, axis=0)            # (N, 3)
    aspect_weights = softmax(aspect_scores, axis=1)           # over aspects
    focused_keys = sum_reduce(mul(reshape(aspect_weights, (n, 3, 1)), memory.keys),
                              axis=1)                         # (N, d)
    value_sums = sum_reduce(memory.values, axis=1)            # (N, d)
    return scores3, aspect_scores, aspect_weights, focused_keys, value_sums


def enhance(states, word_weights, scores3, value_sums, focused_keys, mask):
    """Inject each side's attention-weighted summary into the other side.

    Returns (word_slot_scores, slot_weights_per_word, enhanced_states,
    enhanced_question, word_weights_per_slot, slot_attention, enhanced_keys).
    """
    length, n, _ = scores3.data.shape
    d = states.data.shape[0]
    word_slot, _ = max_reduce(scores3, axis=2)                        # (|Q|, N)
    slot_weights = softmax(masked_fill(word_slot, ~mask, NEG_INF), axis=1)
    mixed = matmul(slot_weights, value_sums)                          # (|Q|, d)
    enhanced_states = add(states, transpose(mul(reshape(word_weights, (length, 1)),
                                                mixed)))              # (d, |Q|)
    w_col = reshape(word_weights, (length, 1))
    enhanced_question = reshape(matmul(enhanced_states, w_col), (d,))
    word_weights_per_slot = softmax(transpose(word_slot), axis=1)     # (N, |Q|)
    slot_attention = reshape(matmul(transpose(slot_weights), w_col), (n,))
    enhanced_keys = add(focused_keys,
                        mul(reshape(slot_attention, (n, 1)),
                            matmul(word_weights_per_slot, transpose(enhanced_states))))
    return (word_slot, slot_weights, enhanced_states, enhanced_question,
            word_weights_per_slot, slot_attention, enhanced_keys)


def generalize_read(question_vec, enhanced_keys, value_sums, mask, params):
    """Attention-read over the memory and a gated update of the question."""
    d = question_vec.data.shape[0]
    weights = additive_attention(question_vec, enhanced_keys,
                                 params["reason.att_read.w1"],
                                 params["reason.att_read.w2"], mask=mask)
    read = reshape(matmul(reshape(weights, (1, len(mask))), value_sums), (d,))
    updated = gru_cell(question_vec, read, params, "reason.gru")
    return weights, read, updated


def reason(question_enc, memory, params, flags=AblationFlags()):
    """Run the attention stack for one question; the batch-norm step is
    applied afterwards (see model.finalize_batch)."""
    flags = flags.normalized()
    states = question_enc.states
    d, length = states.data.shape
    n = memory.size
    if not memory.mask.any():
        raise ShapeError("reason: memory is fully masked")
    b = AttentionBundle()

    b.question_summary, b.self_att = self_attend(states, params)

    if flags.no_bidirectional_attn:
        uniform = np.full(length, 1.0 / length, dtype=states.data.dtype)
        b.word_weights = Tensor(uniform)
    elif flags.no_kb_aware_attn_use_self_attn:
        # how much attention each word receives under plain self-attention
        b.word_weights = mean_reduce(b.self_att, axis=0)
    else:
        b.aspect_summaries, b.kb_summary = kb_summary(b.question_summary, memory, params)
        (b.word_aspect_scores, b.word_max_scores,
         b.word_weights) = kb_aware_question_attention(states, b.kb_summary)

    (b.word_slot_scores3, b.aspect_scores, b.aspect_weights,
     b.focused_keys, b.value_sums) = importance(states, memory)
    if flags.no_importance:
        uniform = np.full((n, 3, 1), 1.0 / 3.0, dtype=states.data.dtype)
        b.aspect_weights = Tensor(np.squeeze(uniform, -1))
        b.focused_keys = sum_reduce(mul(Tensor(uniform), memory.keys), axis=1)

    if flags.no_enhancing:
        b.enhanced_states = states
        b.enhanced_question = reshape(
            matmul(states, reshape(b.word_weights, (length, 1))), (d,))
        b.enhanced_keys = b.focused_keys
    else:
        (b.word_slot_scores, b.slot_weights_per_word, b.enhanced_states,
         b.enhanced_question, b.word_weights_per_slot, b.slot_attention,
         b.enhanced_keys) = enhance(states, b.word_weights, b.word_slot_scores3,
                                    b.value_sums, b.focused_keys, memory.mask)

    if flags.no_generalization:
        b.final_question = b.enhanced_question
    else:
        b.read_weights, b.read_vector, b.gru_state = generalize_read(
            b.enhanced_question, b.enhanced_keys, b.value_sums, memory.mask, params)
    return b
