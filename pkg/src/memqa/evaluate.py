"""Macro-F1 evaluation, prediction, ablation sweeps and heatmap export."""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .encoders import ASPECTS
from .errors import DataError
from .pipeline import build_instance, build_instances
from .reasoning import AblationFlags
from .scoring import infer_answers

log = logging.getLogger(__name__)

_EVAL_RNG = np.random.default_rng(0)  # never drawn from: eval has no dropout


@dataclass
class EvalReport:
    per_question: list  # F1 per question, aligned with the input order
    macro_f1: float
    n_questions: int
    n_skipped: int


def f1_set(pred, gold):
    """Set F1; empty prediction or empty intersection scores 0."""
    pred, gold = set(pred), set(gold)
    hit = len(pred & gold)
    if not pred or not gold or hit == 0:
        return 0.0
    precision = hit / len(pred)
    recall = hit / len(gold)
    return 2.0 * precision * recall / (precision + recall)


def macro_f1(predictions, golds):
    """Mean per-question F1 between aligned lists of answer sets."""
    if len(predictions) != len(golds):
        raise DataError(f"misaligned predictions ({len(predictions)}) "
                        f"vs gold ({len(golds)})")
    per_q = [f1_set(p, g) for p, g in zip(predictions, golds)]
    mean = float(np.mean(per_q)) if per_q else 0.0
    return EvalReport(per_question=per_q, macro_f1=mean,
                      n_questions=len(per_q), n_skipped=0)


def predict_instance(model, inst, theta):
    """Ordered answer ids and their scores for one prepared question."""
    fp = model.forward_instance(inst, "eval", _EVAL_RNG)
    model.finalize_batch([fp], "eval")
    scored, _ = model.score_pass(fp)
    answers = infer_answers(scored, theta)
    by_id = dict(zip(scored.candidate_ids, scored.scores))
    return answers, [float(by_id[a]) for a in answers]


def evaluate_model(model, instances, golds, theta):
    """Score prepared instances (None entries count as skipped, F1 0)."""
    predictions = []
    skipped = 0
    for inst in instances:
        if inst is None:
            predictions.append(set())
            skipped += 1
            continue
        answers, _ = predict_instance(model, inst, theta)
        predictions.append(set(answers))
    report = macro_f1(predictions, golds)
    report.n_skipped = skipped
    return report


def resolve_topics(records, kb, topic_model, stopwords, link_k=10):
    """Predicted topic entity per record; falls back to the gold mention
    when the linker finds nothing."""
    from .topic import link_candidates, predict_topic
    topics = []
    for rec in records:
        linked = link_candidates(kb, rec.tokens, link_k)
        if linked:
            topics.append(predict_topic(topic_model, rec.tokens, linked))
        elif rec.topic_mention is not None:
            topics.append(rec.topic_mention.entity_id)
        else:
            topics.append(None)
    return topics


def run_eval(model, kb, records, stopwords, theta=None, topic_source="gold",
             topic_model=None):
    """Full pipeline over a dataset -> (EvalReport, predictions).

    topic_source "gold" uses annotated mentions; "predictor" ranks
    linker candidates with a trained topic model.
    """
    if not records:
        raise DataError("empty evaluation dataset")
    theta = model.config.theta if theta is None else theta
    if topic_source == "gold":
        instances = build_instances(records, kb, model.vocabs, stopwords,
                                    model.config.hops, model.flags)
    elif topic_source == "predictor":
        if topic_model is None:
            raise DataError("topic_source='predictor' needs a topic model")
        topics = resolve_topics(records, kb, topic_model, stopwords)
        instances = []
        for rec, topic in zip(records, topics):
            if topic is None:
                instances.append(None)
                continue
            instances.append(build_instance(rec, kb, model.vocabs, stopwords,
                                            model.config.hops, topic, model.flags))
    else:
        raise DataError(f"unknown topic source {topic_source!r}")

    predictions = []
    skipped = 0
    for inst in instances:
        if inst is None:
            predictions.append({"answers": [], "scores": []})
            skipped += 1
            continue
        answers, scores = predict_instance(model, inst, theta)
        predictions.append({"answers": answers, "scores": scores})
    report = macro_f1([set(p["answers"]) for p in predictions],
                      [r.gold_answers for r in records])
    report.n_skipped = skipped
    return report, predictions


ABLATION_ROWS = ("all",) + AblationFlags.NAMES


def run_ablation(kb, train_records, dev_records, test_records, stopwords,
                 config, checkpoint_dir=None):
    """Train and evaluate the full model plus every single-flag variant.

    Returns rows [(variant name, test macro F1), ...] in a fixed order.
    """
    from .pipeline import build_vocabs
    from .training import fit
    rows = []
    for name in ABLATION_ROWS:
        flags = AblationFlags() if name == "all" else AblationFlags(**{name: True})
        flags = flags.normalized()
        vocabs = build_vocabs(train_records + dev_records, kb, stopwords,
                              config.hops, flags)
        model, _ = fit(train_records, dev_records, kb, vocabs, stopwords,
                       config, flags)
        report, _ = run_eval(model, kb, test_records, stopwords,
                             theta=config.theta, topic_source="gold")
        rows.append((name, report.macro_f1))
        log.info("ablation %s: test F1 %.4f", name, report.macro_f1)
        if checkpoint_dir:
            model.save(f"{checkpoint_dir}/{name}.ckpt")
    return rows


def dump_attention(model, kb, stopwords, question_tokens, topic_id, out_path):
    """Write the (word x candidate x aspect) attention scores as CSV.

    The question is taken as already-delexicalized tokens.  One row per
    (candidate, aspect) pair; value columns follow the question tokens.
    """
    from .pipeline import candidate_features
    feats = candidate_features(kb, topic_id, list(question_tokens),
                               model.vocabs, stopwords, model.config.hops)
    if not feats.ids:
        raise DataError(f"topic {topic_id!r} yields no candidates")
    from .text import NO_INTERROGATIVE_ROW, interrogative_index
    from .pipeline import QuestionInstance
    wh = interrogative_index(question_tokens)
    inst = QuestionInstance(
        record=None, topic_id=topic_id, delex_tokens=list(question_tokens),
        word_ids=np.asarray(model.vocabs.word.encode(question_tokens), dtype=np.int64),
        interrogative_row=NO_INTERROGATIVE_ROW if wh is None else wh,
        candidates=feats, positive=np.array([], dtype=np.int64),
        negative=np.arange(len(feats.ids)),
    )
    fp = model.forward_instance(inst, "eval", _EVAL_RNG)
    scores3 = fp.bundle.word_slot_scores3.data  # (|Q|, N, 3)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["candidate", "aspect", *question_tokens])
        for i, cid in enumerate(fp.slot_ids):
            for x, aspect in enumerate(ASPECTS):
                writer.writerow([cid, aspect,
                                 *[f"{v:.10f}" for v in scores3[:, i, x]]])
    return scores3
