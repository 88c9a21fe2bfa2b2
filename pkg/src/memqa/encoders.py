"""Question and answer-aspect encoders feeding the key-value memory."""

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, concat, embedding_lookup, matmul, reshape
from .errors import DataError, ShapeError
from .nn import affine, bilstm_encode, bilstm_finals_batch, dropout

ASPECTS = ("type", "path", "context")


@dataclass
class QuestionEncoding:
    states: Tensor       # (d, |Q|) hidden state per question token
    word_ids: np.ndarray
    length: int


@dataclass
class AspectEncodings:
    """Per-candidate aspect vectors, rows aligned with candidate ids."""
    candidate_ids: list
    type_enc: Tensor      # (|A|, d)  type-word encoder finals
    path_enc: Tensor      # (|A|, d)  path-word encoder finals
    path_rel_enc: Tensor  # (|A|, d)  projected mean relation embeddings
    context_enc: Tensor   # (|A|, d)  mean of context-node finals (0 if none)
    ent_type_emb: Tensor  # (|A|, d_t) entity-type embedding for type matching


@dataclass
class MemoryBlock:
    """Key/value memory over candidates: (N, 3, d) with a validity mask."""
    candidate_ids: list
    keys: Tensor    # (N, 3, d)
    values: Tensor  # (N, 3, d)
    keys_by_aspect: dict    # aspect -> (N, d)
    values_by_aspect: dict  # aspect -> (N, d)
    mask: np.ndarray        # (N,) bool, True = real candidate

    @property
    def size(self):
        return len(self.mask)


def encode_question(word_ids, params, mode, rng, drop_embed=0.0, drop_states=0.0):
    """Embed and run the question encoder: (|Q|,) ids -> states (d, |Q|)."""
    word_ids = np.asarray(word_ids)
    if word_ids.size == 0:
        raise DataError("cannot encode an empty question")
    emb = embedding_lookup(params["embed.word"], word_ids)  # (|Q|, d_v)
    emb = dropout(emb, drop_embed, mode, rng)
    states, _ = bilstm_encode(emb, params, "enc.question")
    states = dropout(states, drop_states, mode, rng)
    return QuestionEncoding(states=states, word_ids=word_ids, length=int(word_ids.size))


def _encode_token_sets(seqs, table, params, prefix, mode, rng, drop_rate):
    """Encoder finals for a ragged batch of token-id sequences -> (N, d).

    Sequences are grouped by length so each group runs as one fused
    pass, then rows are scattered back into input order.
    """
    groups = {}
    for i, s in enumerate(seqs):
        groups.setdefault(len(s), []).append(i)
    parts, order = [], []
    for length in sorted(groups):
        idxs = groups[length]
        mat = np.stack([np.asarray(seqs[i]) for i in idxs], axis=1)  # (L, B)
        emb = embedding_lookup(table, mat)  # (L, B, d_v)
        emb = dropout(emb, drop_rate, mode, rng)
        parts.append(bilstm_finals_batch(emb, params, prefix))
        order.extend(idxs)
    stacked = concat(parts, axis=0)
    perm = np.empty(len(seqs), dtype=np.int64)
    perm[np.asarray(order)] = np.arange(len(seqs))
    return embedding_lookup(stacked, perm)


def _segment_mean_matrix(counts, total, dtype):
    """Constant (len(counts), total) matrix averaging contiguous segments."""
    mat = np.zeros((len(counts), total), dtype=dtype)
    pos = 0
    for i, n in enumerate(counts):
        if n:
            mat[i, pos:pos + n] = 1.0 / n
        pos += n
    return Tensor(mat)


def encode_aspects(features, params, mode, rng, drop_embed=0.0, drop_answer=0.0):
    """Encode type, path and context for each candidate.

    `features` carries per-candidate token-id arrays (see
    pipeline.CandidateFeatures).  Candidates without any surviving
    context node get an all-zero context row.
    """
    n = len(features.ids)
    if n == 0:
        raise DataError("no candidates to encode")
    table = params["embed.word"]
    dtype = table.data.dtype

    type_enc = _encode_token_sets(features.type_token_ids, table, params,
                                  "enc.type", mode, rng, drop_embed)
    path_enc = _encode_token_sets(features.path_token_ids, table, params,
                                  "enc.path", mode, rng, drop_embed)
    type_enc = dropout(type_enc, drop_answer, mode, rng)
    path_enc = dropout(path_enc, drop_answer, mode, rng)

    # mean relation-id embedding per candidate, projected to d
    rel_counts = [len(r) for r in features.relation_ids]
    flat_rels = np.concatenate([np.asarray(r) for r in features.relation_ids])
    rel_emb = embedding_lookup(params["embed.relation"], flat_rels)  # (total, d_p)
    rel_mean = matmul(_segment_mean_matrix(rel_counts, len(flat_rels), dtype), rel_emb)
    path_rel_enc = affine(rel_mean, params["enc.path_proj.w"], params["enc.path_proj.b"])
    path_rel_enc = dropout(path_rel_enc, drop_answer, mode, rng)

    # context: encode every (candidate, node) pair, then per-candidate mean
    ctx_counts = [len(nodes) for nodes in features.context_token_ids]
    flat_nodes = [seq for nodes in features.context_token_ids for seq in nodes]
    d = type_enc.data.shape[1]
    if flat_nodes:
        node_enc = _encode_token_sets(flat_nodes, table, params,
                                      "enc.context", mode, rng, drop_embed)
        context_enc = matmul(_segment_mean_matrix(ctx_counts, len(flat_nodes), dtype),
                             node_enc)
        context_enc = dropout(context_enc, drop_answer, mode, rng)
    else:
        context_enc = Tensor(np.zeros((n, d), dtype=dtype))

    ent_type_emb = embedding_lookup(params["embed.ent_type"],
                                    np.asarray(features.ent_type_ids))
    return AspectEncodings(
        candidate_ids=list(features.ids),
        type_enc=type_enc,
        path_enc=path_enc,
        path_rel_enc=path_rel_enc,
        context_enc=context_enc,
        ent_type_emb=ent_type_emb,
    )


def build_memory(aspects, params, pad_to=None):
    """Project aspect encodings into the key/value memory (N, 3, d).

    pad_to extends the memory with masked all-zero rows up to the given
    slot count.
    """
    n = len(aspects.candidate_ids)
    path_in = concat([aspects.path_enc, aspects.path_rel_enc], axis=1)  # (|A|, 2d)
    per_aspect_in = {"type": aspects.type_enc, "path": path_in,
                     "context": aspects.context_enc}
    keys_by_aspect, values_by_aspect = {}, {}
    for aspect in ASPECTS:
        x = per_aspect_in[aspect]
        keys_by_aspect[aspect] = affine(x, params[f"mem.{aspect}_k.w"],
                                        params[f"mem.{aspect}_k.b"])
        values_by_aspect[aspect] = affine(x, params[f"mem.{aspect}_v.w"],
                                          params[f"mem.{aspect}_v.b"])

    d = keys_by_aspect["type"].data.shape[1]
    n_pad = 0
    if pad_to is not None:
        if pad_to < n:
            raise ShapeError(f"cannot pad {n} candidates down to {pad_to} slots")
        n_pad = pad_to - n
    if n_pad:
        zeros = Tensor(np.zeros((n_pad, d), dtype=keys_by_aspect["type"].data.dtype))
        for aspect in ASPECTS:
            keys_by_aspect[aspect] = concat([keys_by_aspect[aspect], zeros], axis=0)
            values_by_aspect[aspect] = concat([values_by_aspect[aspect], zeros], axis=0)

    total = n + n_pad
    keys = concat([reshape(keys_by_aspect[a], (total, 1, d)) for a in ASPECTS], axis=1)
    values = concat([reshape(values_by_aspect[a], (total, 1, d)) for a in ASPECTS], axis=1)
    mask = np.zeros(total, dtype=bool)
    mask[:n] = True
    return MemoryBlock(
        candidate_ids=list(aspects.candidate_ids),
        keys=keys,
        values=values,
        keys_by_aspect=keys_by_aspect,
        values_by_aspect=values_by_aspect,
        mask=mask,
    )


def load_word_vectors(path, vocab, dim, rng):
    """Read "token v1 .. vdim" lines into an embedding matrix.

    Tokens absent from the file keep random rows; the PAD row is zero.
    """
    table = rng.uniform(-0.08, 0.08, size=(len(vocab), dim)).astype(np.float32)
    table[0] = 0.0
    found = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if len(parts) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected token + {dim} floats")
            tok = parts[0]
            if tok in vocab:
                table[vocab.index[tok]] = np.array(parts[1:], dtype=np.float32)
                found += 1
    return table, found
