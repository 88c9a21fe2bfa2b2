"""Triplet-loss training with intermediate supervision and type matching."""

import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import (embedding_lookup, matmul, relu, reshape, sum_reduce)
from .config import TrainConfig  # noqa: F401  (re-exported next to fit)
from .errors import ConfigError, DataError
from .evaluate import evaluate_model
from .model import QAModel
from .optim import AdamState, adam_step
from .pipeline import build_instances
from .reasoning import AblationFlags

log = logging.getLogger(__name__)


@dataclass
class LossBreakdown:
    """The four ranking terms and their sum, as plain floats."""
    attended_words: float   # words-vs-raw-keys term
    enhanced: float         # enhanced question vs enhanced keys
    final: float            # normalized question vs enhanced keys
    type_match: float       # interrogative embedding vs entity types
    total: float


def hinge(pos_score, neg_score):
    """max(0, 1 + neg - pos)."""
    return max(0.0, 1.0 + neg_score - pos_score)


def pairwise_loss_g(query, rows, positive, negative):
    """Sum of hinge terms over all (positive, negative) row pairs.

    query (k,), rows (N, k); positive/negative are row index arrays.
    """
    positive = np.asarray(positive)
    negative = np.asarray(negative)
    if positive.size == 0 or negative.size == 0:
        raise DataError("pairwise loss needs non-empty positive and negative sets")
    n, k = rows.data.shape
    scores = matmul(rows, reshape(query, (k, 1)))  # (N, 1)
    pos = embedding_lookup(scores, positive)       # (P, 1)
    neg = embedding_lookup(scores, negative)       # (M, 1)
    margins = relu(1.0 + (reshape(neg, (1, negative.size)) - pos))  # (P, M)
    return sum_reduce(margins)


def total_loss(model, fp):
    """All ranking terms for one forward pass -> (scalar tensor, breakdown)."""
    bundle = fp.bundle
    length = fp.instance.word_ids.size
    attended = reshape(matmul(fp.question.states,
                              reshape(bundle.word_weights, (length, 1))),
                       (model.config.d,))
    raw_key_sums = sum_reduce(fp.memory.keys, axis=1)  # (N, d)
    terms = [
        pairwise_loss_g(attended, raw_key_sums, fp.positive, fp.negative),
        pairwise_loss_g(bundle.enhanced_question, bundle.enhanced_keys,
                        fp.positive, fp.negative),
        pairwise_loss_g(bundle.final_question, bundle.enhanced_keys,
                        fp.positive, fp.negative),
    ]
    if model.flags.no_joint_type_matching:
        g4 = None
    else:
        q_w = model.interrogative_embedding(fp.instance.interrogative_row)
        g4 = pairwise_loss_g(q_w, fp.aspects.ent_type_emb, fp.positive, fp.negative)
        terms.append(g4)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    breakdown = LossBreakdown(
        attended_words=terms[0].item(),
        enhanced=terms[1].item(),
        final=terms[2].item(),
        type_match=g4.item() if g4 is not None else 0.0,
        total=total.item(),
    )
    return total, breakdown


def sample_memory(positive, negative, n_max, rng):
    """Select candidate rows for the training memory.

    When n_max exceeds the positive count, all positives are kept and
    random negatives fill the memory; otherwise min(n_max/2, |negatives|)
    random negatives are taken and random positives fill the rest.
    """
    positive = list(positive)
    negative = list(negative)
    if n_max > len(positive):
        keep_pos = positive
        n_neg = min(len(negative), n_max - len(positive))
        idx = rng.choice(len(negative), size=n_neg, replace=False) if n_neg else []
        keep_neg = [negative[i] for i in sorted(idx)]
    else:
        n_neg = min(n_max // 2, len(negative))
        idx = rng.choice(len(negative), size=n_neg, replace=False) if n_neg else []
        keep_neg = [negative[i] for i in sorted(idx)]
        n_pos = n_max - n_neg
        idx = rng.choice(len(positive), size=n_pos, replace=False)
        keep_pos = [positive[i] for i in sorted(idx)]
    return keep_pos + keep_neg


class PlateauSchedule:
    """Divide the lr after `patience_lr` stagnant epochs; signal a stop
    after `patience_stop`.  Improvement means a strictly higher metric."""

    def __init__(self, lr, factor=10.0, patience_lr=3, patience_stop=10):
        self.lr = float(lr)
        self.factor = float(factor)
        self.patience_lr = int(patience_lr)
        self.patience_stop = int(patience_stop)
        self.best = -np.inf
        self.stale = 0

    def update(self, metric):
        if metric > self.best:
            self.best = metric
            self.stale = 0
            return "improved"
        self.stale += 1
        if self.stale >= self.patience_stop:
            return "stop"
        if self.stale % self.patience_lr == 0:
            self.lr /= self.factor
            return "reduced"
        return "none"


def _batches(n, batch_size, order):
    """Chunk `order` into batches; a trailing singleton is folded into the
    previous batch so batch normalization always sees >= 2 rows."""
    chunks = [list(order[i:i + batch_size]) for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2].extend(chunks.pop())
    return chunks


def fit(train_records, dev_records, kb, vocabs, stopwords, config,
        flags=AblationFlags(), checkpoint_path=None):
    """Train a model; returns (model, history).

    history rows: dicts with epoch, lr, train_loss, dev_f1.  The
    best-dev checkpoint is written to checkpoint_path when given.
    Training uses gold topic entities.
    """
    flags = flags.normalized()
    train_insts = [i for i in build_instances(train_records, kb, vocabs, stopwords,
                                              config.hops, flags, require_gold=True)
                   if i is not None]
    if len(train_insts) < 2:
        raise ConfigError(f"need at least 2 trainable questions, got {len(train_insts)}")
    dev_insts = build_instances(dev_records, kb, vocabs, stopwords,
                                config.hops, flags)
    if not dev_records:
        raise ConfigError("dev set is empty")

    model = QAModel(config, vocabs, flags)
    rng_root = np.random.SeedSequence(config.seed)
    shuffle_rng, dropout_rng, vec_rng = [np.random.default_rng(s)
                                         for s in rng_root.spawn(3)]
    if config.word_vectors:
        found = model.load_pretrained_words(config.word_vectors, vec_rng)
        log.info("loaded %d pre-trained word vectors", found)
    adam = AdamState(model.params, lr=config.lr)
    schedule = PlateauSchedule(config.lr, config.lr_decay_factor,
                               config.patience_lr, config.patience_stop)
    history = []

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_insts))
        epoch_loss, n_seen = 0.0, 0
        for batch in _batches(len(train_insts), config.batch_size, order):
            passes = []
            for qpos in batch:
                inst = train_insts[qpos]
                sample_rng = np.random.default_rng([config.seed, epoch, int(qpos)])
                slots = sample_memory(inst.positive, inst.negative,
                                      config.n_max, sample_rng)
                fp = model.forward_instance(inst, "train", dropout_rng, slots)
                if fp.positive.size == 0 or fp.negative.size == 0:
                    log.warning("question has no positive/negative pair after "
                                "sampling, skipping: %s", inst.record.raw)
                    continue
                passes.append(fp)
            if not passes:
                continue
            if len(passes) == 1 and not flags.no_generalization:
                log.warning("dropping singleton batch (batch norm needs >= 2)")
                continue
            model.finalize_batch(passes, "train")
            total = None
            for fp in passes:
                loss, breakdown = total_loss(model, fp)
                epoch_loss += breakdown.total
                n_seen += 1
                total = loss if total is None else total + loss
            batch_loss = total / len(passes)
            batch_loss.backward()
            adam.lr = schedule.lr
            adam_step(model.params, adam)

        report = evaluate_model(model, dev_insts,
                                [r.gold_answers for r in dev_records], config.theta)
        train_loss = epoch_loss / max(n_seen, 1)
        history.append({"epoch": epoch, "lr": schedule.lr,
                        "train_loss": train_loss, "dev_f1": report.macro_f1})
        action = schedule.update(report.macro_f1)
        log.info("epoch %d: loss %.4f dev F1 %.4f (%s)",
                 epoch, train_loss, report.macro_f1, action)
        if action == "improved" and checkpoint_path:
            model.save(checkpoint_path, adam)
        if action == "stop":
            break
    return model, history


def write_history(path, history):
    """Training history as CSV: epoch, lr, train_loss, dev_f1."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,lr,train_loss,dev_f1\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['lr']:.10g},"
                     f"{row['train_loss']:.8f},{row['dev_f1']:.8f}\n")
