"""CNN-based topic entity prediction over string-match linker candidates."""

import json
import logging
from dataclasses import dataclass
from difflib import SequenceMatcher

import numpy as np

from .autodiff import Tensor, add, concat, embedding_lookup, matmul, max_reduce, reshape
from .config import TrainConfig
from .errors import DataError
from .model import sidecar_path
from .nn import BatchNormState, affine, batch_norm_1d, dropout, gru_cell, init_batch_norm, init_gru
from .optim import AdamState, adam_step
from .params import BN_PREFIX, ParamStore, load_checkpoint, save_checkpoint
from .pipeline import Vocabs
from .reasoning import additive_attention
from .text import PAD_ID, Vocabulary, type_token

log = logging.getLogger(__name__)

_EVAL_RNG = np.random.default_rng(0)


@dataclass
class TopicCandidate:
    entity_id: str
    name_tokens: list
    type_tokens: list
    relation_words: list  # one word sequence per 1-hop edge (bag, with repeats)
    relation_ids: list    # relation id per 1-hop edge


def longest_token_span(a, b):
    """Length of the longest contiguous token run shared by a and b."""
    return SequenceMatcher(None, list(a), list(b), autojunk=False)\
        .find_longest_match(0, len(a), 0, len(b)).size


def overlap_score(name_tokens, question_tokens):
    """(longest shared span, token Jaccard) between a name and a question."""
    span = longest_token_span(name_tokens, question_tokens)
    sa, sb = set(name_tokens), set(question_tokens)
    jaccard = len(sa & sb) / len(sa | sb) if sa | sb else 0.0
    return span, jaccard


def topic_candidate(kb, entity_id):
    ent = kb.entity(entity_id)
    edges = sorted(kb.edges(entity_id), key=lambda e: (e.relation, e.neighbor))
    return TopicCandidate(
        entity_id=entity_id,
        name_tokens=list(ent.name_tokens),
        type_tokens=list(ent.type_tokens),
        relation_words=[list(kb.relations[e.relation].words) for e in edges],
        relation_ids=[e.relation for e in edges],
    )


def link_candidates(kb, question_tokens, k):
    """Entities ranked by name overlap with the question, best first.

    Entities sharing no token with the question are dropped; an empty
    list means the linker failed (callers may fall back to gold
    mentions).
    """
    scored = []
    for eid in kb.entities:
        span, jaccard = overlap_score(kb.entities[eid].name_tokens, question_tokens)
        if span >= 1:
            scored.append((-span, -jaccard, eid))
    scored.sort()
    return [topic_candidate(kb, eid) for _, _, eid in scored[:k]]


class TopicModel:
    """Encodes questions and candidate aspects with CNNs and ranks by
    dot product after a gated memory read."""

    QUESTION_FILTERS = (2, 3)
    ASPECT_FILTERS = (3,)

    def __init__(self, config: TrainConfig, vocabs: Vocabs, dtype=np.float32):
        self.config = config
        self.vocabs = vocabs
        self.params = ParamStore(seed=config.seed + 1, dtype=dtype)
        self.bn = BatchNormState(config.d, dtype=dtype)
        self._init_params()

    def _init_params(self):
        cfg = self.config
        p = self.params
        bound = 1.0 / np.sqrt(cfg.d)
        p.create("embed.word", (len(self.vocabs.word), cfg.d_v), "uniform", 0.08)
        p.create("embed.relation", (len(self.vocabs.relation), cfg.d_p), "uniform", 0.08)
        for name, filters in (("question", self.QUESTION_FILTERS),
                              ("aspect", self.ASPECT_FILTERS)):
            for width in filters:
                p.create(f"cnn.{name}.f{width}.w", (width * cfg.d_v, cfg.d),
                         "uniform", 1.0 / np.sqrt(width * cfg.d_v))
                p.create(f"cnn.{name}.f{width}.b", (cfg.d,), "zeros")
            p.create(f"cnn.{name}.merge.w", (len(filters) * cfg.d, cfg.d),
                     "uniform", bound)
            p.create(f"cnn.{name}.merge.b", (cfg.d,), "zeros")
        p.create("proj.k.w", (3 * cfg.d + cfg.d_p, cfg.d), "uniform", bound)
        p.create("proj.k.b", (cfg.d,), "zeros")
        p.create("proj.v.w", (3 * cfg.d + cfg.d_p, cfg.d), "uniform", bound)
        p.create("proj.v.b", (cfg.d,), "zeros")
        p.create("att.read.w1", (2 * cfg.d, cfg.d), "uniform", bound)
        p.create("att.read.w2", (cfg.d, 1), "uniform", bound)
        init_gru(p, "gru", cfg.d)
        init_batch_norm(p, "bn", cfg.d)

    def cnn_encode(self, token_ids, which, mode="eval", rng=_EVAL_RNG,
                   drop_embed=0.0):
        """Convolution + max-pool + linear merge of a token sequence -> (d,).

        Inputs shorter than the widest filter are padded; an empty input
        encodes to the zero vector.
        """
        cfg = self.config
        ids = list(token_ids)
        filters = self.QUESTION_FILTERS if which == "question" else self.ASPECT_FILTERS
        if not ids:
            return Tensor(np.zeros(cfg.d, dtype=self.params.dtype))
        width_max = max(filters)
        if len(ids) < width_max:
            ids = ids + [PAD_ID] * (width_max - len(ids))
        emb = embedding_lookup(self.params["embed.word"], np.asarray(ids))
        emb = dropout(emb, drop_embed, mode, rng)
        pooled = []
        for width in filters:
            n_pos = len(ids) - width + 1
            windows = np.stack([np.arange(i, i + width) for i in range(n_pos)])
            gathered = embedding_lookup(reshape(emb, (len(ids), cfg.d_v)),
                                        windows)  # (P, width, d_v)
            flat = reshape(gathered, (n_pos, width * cfg.d_v))
            responses = affine(flat, self.params[f"cnn.{which}.f{width}.w"],
                               self.params[f"cnn.{which}.f{width}.b"])
            best, _ = max_reduce(responses, axis=0)  # (d,)
            pooled.append(best)
        merged = affine(reshape(concat(pooled, axis=0), (1, len(filters) * cfg.d)),
                        self.params[f"cnn.{which}.merge.w"],
                        self.params[f"cnn.{which}.merge.b"])
        return reshape(merged, (cfg.d,))

    def encode_candidates(self, candidates, mode="eval", rng=_EVAL_RNG):
        """Key/value vectors for each candidate -> (|C|, d) tensors."""
        cfg = self.config
        drop = cfg.dropout_answer if mode == "train" else 0.0
        key_rows, value_rows = [], []
        for cand in candidates:
            name = self.cnn_encode(self.vocabs.word.encode(cand.name_tokens),
                                   "aspect", mode, rng, drop)
            typ = self.cnn_encode(self.vocabs.word.encode(cand.type_tokens),
                                  "aspect", mode, rng, drop)
            if cand.relation_words:
                rel_encs = [self.cnn_encode(self.vocabs.word.encode(words),
                                            "aspect", mode, rng, drop)
                            for words in cand.relation_words]
                stacked = concat([reshape(r, (1, cfg.d)) for r in rel_encs], axis=0)
                rel_cnn = reshape(matmul(Tensor(np.full((1, len(rel_encs)),
                                                        1.0 / len(rel_encs),
                                                        dtype=self.params.dtype)),
                                         stacked), (cfg.d,))
                rel_ids = np.asarray(self.vocabs.relation.encode(cand.relation_ids))
                rel_emb = embedding_lookup(self.params["embed.relation"], rel_ids)
                rel_mean = reshape(matmul(Tensor(np.full((1, len(rel_ids)),
                                                         1.0 / len(rel_ids),
                                                         dtype=self.params.dtype)),
                                          rel_emb), (cfg.d_p,))
            else:
                rel_cnn = Tensor(np.zeros(cfg.d, dtype=self.params.dtype))
                rel_mean = Tensor(np.zeros(cfg.d_p, dtype=self.params.dtype))
            joined = reshape(concat([name, typ, rel_cnn, rel_mean], axis=0),
                             (1, 3 * cfg.d + cfg.d_p))
            key_rows.append(affine(joined, self.params["proj.k.w"],
                                   self.params["proj.k.b"]))
            value_rows.append(affine(joined, self.params["proj.v.w"],
                                     self.params["proj.v.b"]))
        return concat(key_rows, axis=0), concat(value_rows, axis=0)

    def forward(self, question_tokens, candidates, mode="eval", rng=_EVAL_RNG):
        """Question/candidate encodings up to the pre-norm state."""
        cfg = self.config
        drop = cfg.dropout_embed if mode == "train" else 0.0
        e = self.cnn_encode(self.vocabs.word.encode(question_tokens),
                            "question", mode, rng, drop)
        keys, values = self.encode_candidates(candidates, mode, rng)
        weights = additive_attention(e, keys, self.params["att.read.w1"],
                                     self.params["att.read.w2"])
        read = reshape(matmul(reshape(weights, (1, len(candidates))), values),
                       (cfg.d,))
        updated = gru_cell(e, read, self.params, "gru")
        return e, keys, values, updated

    def finalize(self, pairs, mode):
        """Residual + batch norm over (question, update) pairs -> (B, d)."""
        rows = [reshape(add(e, upd), (1, self.config.d)) for e, upd in pairs]
        stacked = concat(rows, axis=0) if len(rows) > 1 else rows[0]
        return batch_norm_1d(stacked, self.params["bn.gamma"],
                             self.params["bn.beta"], self.bn, mode)

    def score_topics(self, question_tokens, candidates):
        """Ranked (candidate, score) list, best first; ties break on id."""
        if not candidates:
            raise DataError("score_topics: empty candidate list")
        e, keys, _, updated = self.forward(question_tokens, candidates)
        final = self.finalize([(e, updated)], "eval")
        scores = (keys.data @ final.data[0]).astype(np.float64)
        order = sorted(range(len(candidates)),
                       key=lambda i: (-scores[i], candidates[i].entity_id))
        return [(candidates[i], float(scores[i])) for i in order]

    # -- persistence ---------------------------------------------------

    def save(self, path):
        arrays = {name: p.data for name, p in self.params.items()}
        arrays[BN_PREFIX + "bn.mean"] = self.bn.mean
        arrays[BN_PREFIX + "bn.var"] = self.bn.var
        header = {"d": self.config.d, "n_words": len(self.vocabs.word),
                  "n_ent_types": len(self.vocabs.ent_type),
                  "n_relations": len(self.vocabs.relation)}
        save_checkpoint(path, arrays, header)
        sidecar = {
            "kind": "topic",
            "config": self.config.to_dict(),
            "word_vocab": self.vocabs.word.tokens,
            "ent_type_vocab": self.vocabs.ent_type.tokens,
            "relation_vocab": self.vocabs.relation.tokens,
        }
        with open(sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh)

    @classmethod
    def load(cls, path, dtype=np.float32):
        with open(sidecar_path(path), encoding="utf-8") as fh:
            sidecar = json.load(fh)
        if sidecar.get("kind") != "topic":
            raise DataError(f"{path}: not a topic model checkpoint")
        config = TrainConfig.from_dict(sidecar["config"])
        vocabs = Vocabs(word=_vocab(sidecar["word_vocab"]),
                        ent_type=_vocab(sidecar["ent_type_vocab"]),
                        relation=_vocab(sidecar["relation_vocab"]))
        model = cls(config, vocabs, dtype=dtype)
        _, arrays = load_checkpoint(path)
        model.params.load_values({k: v for k, v in arrays.items()
                                  if not k.startswith("__")})
        model.bn.mean[...] = arrays[BN_PREFIX + "bn.mean"]
        model.bn.var[...] = arrays[BN_PREFIX + "bn.var"]
        return model


def _vocab(tokens):
    v = Vocabulary()
    for tok in tokens[2:]:
        v.add(tok)
    return v


def predict_topic(model, question_tokens, candidates):
    """Entity id of the best-scoring candidate."""
    ranked = model.score_topics(question_tokens, candidates)
    return ranked[0][0].entity_id


def training_candidates(kb, record, k):
    """Linker candidates for training, with the gold topic force-inserted."""
    gold = record.topic_mention.entity_id
    cands = link_candidates(kb, record.tokens, k)
    if all(c.entity_id != gold for c in cands):
        cands = cands[:k - 1] + [topic_candidate(kb, gold)]
    return cands


def topic_loss(model, record, candidates, mode, rng):
    """Two hinge terms (raw and updated question vs candidate keys)."""
    from .training import pairwise_loss_g
    gold = record.topic_mention.entity_id
    pos = np.array([i for i, c in enumerate(candidates) if c.entity_id == gold])
    neg = np.array([i for i, c in enumerate(candidates) if c.entity_id != gold])
    if pos.size == 0 or neg.size == 0:
        return None
    e, keys, _, updated = model.forward(record.tokens, candidates, mode, rng)
    return (e, updated, keys, pos, neg)


def recall_at_1(model, kb, records, link_k):
    hits, total = 0, 0
    for rec in records:
        if rec.topic_mention is None:
            continue
        total += 1
        cands = link_candidates(kb, rec.tokens, link_k)
        if not cands:
            continue
        if predict_topic(model, rec.tokens, cands) == rec.topic_mention.entity_id:
            hits += 1
    return hits / total if total else 0.0


def train_topic(train_records, dev_records, kb, vocabs, config,
                checkpoint_path=None):
    """Fit the topic predictor; returns (model, history).

    history rows: epoch, lr, train_loss, dev recall@1.  Uses the same
    Adam schedule as the main model.
    """
    from .training import PlateauSchedule, _batches, pairwise_loss_g

    usable = [r for r in train_records if r.topic_mention is not None]
    model = TopicModel(config, vocabs)
    adam = AdamState(model.params, lr=config.lr)
    schedule = PlateauSchedule(config.lr, config.lr_decay_factor,
                               config.patience_lr, config.patience_stop)
    rng_root = np.random.SeedSequence(config.seed + 1)
    shuffle_rng, dropout_rng = [np.random.default_rng(s) for s in rng_root.spawn(2)]
    cand_cache = {i: training_candidates(kb, rec, config.topic_candidates)
                  for i, rec in enumerate(usable)}
    history = []
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(usable))
        epoch_loss, n_seen = 0.0, 0
        for batch in _batches(len(usable), config.batch_size, order):
            staged = []
            for qpos in batch:
                rec = usable[qpos]
                cands = cand_cache[int(qpos)]
                out = topic_loss(model, rec, cands, "train", dropout_rng)
                if out is None:
                    log.warning("topic question has no negatives, skipping: %s",
                                rec.raw)
                    continue
                staged.append(out)
            if len(staged) < 2:
                if staged:
                    log.warning("dropping singleton topic batch")
                continue
            normed = model.finalize([(e, upd) for e, upd, _, _, _ in staged],
                                    "train")
            total = None
            for i, (e, _, keys, pos, neg) in enumerate(staged):
                final_row = reshape(embedding_lookup(normed, np.array([i])),
                                    (model.config.d,))
                loss = pairwise_loss_g(e, keys, pos, neg) + \
                    pairwise_loss_g(final_row, keys, pos, neg)
                epoch_loss += loss.item()
                n_seen += 1
                total = loss if total is None else total + loss
            batch_loss = total / len(staged)
            batch_loss.backward()
            adam.lr = schedule.lr
            adam_step(model.params, adam)

        dev_recall = recall_at_1(model, kb, dev_records, config.topic_candidates)
        history.append({"epoch": epoch, "lr": schedule.lr,
                        "train_loss": epoch_loss / max(n_seen, 1),
                        "dev_f1": dev_recall})
        action = schedule.update(dev_recall)
        log.info("topic epoch %d: loss %.4f dev recall@1 %.4f (%s)",
                 epoch, history[-1]["train_loss"], dev_recall, action)
        if action == "improved" and checkpoint_path:
            model.save(checkpoint_path)
        if action == "stop":
            break
    return model, history
