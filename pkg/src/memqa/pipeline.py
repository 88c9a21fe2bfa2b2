"""Glue between raw question records, the KB and the encoders."""

import logging
from dataclasses import dataclass

import numpy as np

from . import kb as kbmod
from . import text as textmod
from .errors import DataError
from .reasoning import AblationFlags

log = logging.getLogger(__name__)


@dataclass
class Vocabs:
    word: textmod.Vocabulary
    ent_type: textmod.Vocabulary
    relation: textmod.Vocabulary


@dataclass
class CandidateFeatures:
    """Vocabulary-encoded aspect inputs, row-aligned across fields."""
    ids: list
    type_token_ids: list     # per candidate: (L,) int array of type words
    path_token_ids: list     # per candidate: (L,) int array of path words
    relation_ids: list       # per candidate: (k,) int array of relation rows
    context_token_ids: list  # per candidate: list of (L,) int arrays
    ent_type_ids: list       # per candidate: one row in the type vocabulary


@dataclass
class QuestionInstance:
    record: textmod.QuestionRecord
    topic_id: str
    delex_tokens: list
    word_ids: np.ndarray
    interrogative_row: int
    candidates: CandidateFeatures
    positive: np.ndarray  # candidate row indices whose entity is a gold answer
    negative: np.ndarray


def delexicalize_record(record, kb, flags=AblationFlags()):
    """Delexicalized question tokens for a record (honoring ablations)."""
    topic_type = ""
    if record.topic_mention is not None and not flags.no_topic_delex:
        topic_type = textmod.type_token(kb.entity(record.topic_mention.entity_id).type_tokens)
    return textmod.delexicalize(
        record.tokens, record.topic_mention, topic_type,
        record.constraint_mentions,
        replace_topic=not flags.no_topic_delex,
        replace_constraints=not flags.no_constraint_delex,
    )


def candidate_features(kb, topic_id, delex_tokens, vocabs, stopwords, hops):
    """Generate candidates around the topic and encode their aspects."""
    cand_ids = kbmod.khop_candidates(kb, topic_id, hops)
    feats = CandidateFeatures([], [], [], [], [], [])
    for cid in cand_ids:
        rel_ids, path_tokens, path_nodes = kbmod.extract_answer_path(
            kb, cid, topic_id, hops, return_nodes=True)
        context = kbmod.extract_context(kb, cid, delex_tokens, stopwords,
                                        exclude=path_nodes[1:2])
        ent = kb.entity(cid)
        feats.ids.append(cid)
        feats.type_token_ids.append(np.asarray(vocabs.word.encode(ent.type_tokens),
                                               dtype=np.int64))
        feats.path_token_ids.append(np.asarray(vocabs.word.encode(path_tokens),
                                               dtype=np.int64))
        feats.relation_ids.append(np.asarray(vocabs.relation.encode(rel_ids),
                                             dtype=np.int64))
        feats.context_token_ids.append(
            [np.asarray(vocabs.word.encode(toks), dtype=np.int64) for toks in context])
        feats.ent_type_ids.append(
            vocabs.ent_type.encode([textmod.type_token(ent.type_tokens)])[0])
    return feats


def build_instance(record, kb, vocabs, stopwords, hops, topic_id,
                   flags=AblationFlags()):
    """Build everything the model needs for one question, or None when the
    topic yields no candidates."""
    delex = delexicalize_record(record, kb, flags)
    if not delex:
        raise DataError(f"question {record.raw!r} has no tokens")
    feats = candidate_features(kb, topic_id, delex, vocabs, stopwords, hops)
    if not feats.ids:
        return None
    wh = record.interrogative
    gold = record.gold_answers
    labels = np.array([cid in gold for cid in feats.ids], dtype=bool)
    return QuestionInstance(
        record=record,
        topic_id=topic_id,
        delex_tokens=delex,
        word_ids=np.asarray(vocabs.word.encode(delex), dtype=np.int64),
        interrogative_row=textmod.NO_INTERROGATIVE_ROW if wh is None else wh,
        candidates=feats,
        positive=np.flatnonzero(labels),
        negative=np.flatnonzero(~labels),
    )


def build_vocabs(records, kb, stopwords, hops, flags=AblationFlags()):
    """Vocabularies over question tokens and the aspect text of their
    topic subgraphs (training + validation data only)."""
    word = textmod.Vocabulary()
    ent_type = textmod.Vocabulary()
    relation = textmod.Vocabulary()
    for placeholder in textmod.PLACEHOLDER_BY_KIND.values():
        word.add(placeholder)
    seen_topics = set()
    for rec in records:
        for tok in rec.tokens:
            word.add(tok)
        if rec.topic_mention is None:
            continue
        delex = delexicalize_record(rec, kb, flags)
        for tok in delex:
            word.add(tok)
        topic = rec.topic_mention.entity_id
        if topic in seen_topics:
            continue
        seen_topics.add(topic)
        for cid in kbmod.khop_candidates(kb, topic, hops):
            ent = kb.entity(cid)
            for tok in ent.type_tokens + ent.name_tokens:
                word.add(tok)
            ent_type.add(textmod.type_token(ent.type_tokens))
            rel_ids, path_tokens = kbmod.extract_answer_path(kb, cid, topic, hops)
            for tok in path_tokens:
                word.add(tok)
            for rid in rel_ids:
                relation.add(rid)
            # candidate context lives one hop further out than the subgraph
            for edge in kb.edges(cid):
                for tok in textmod.context_node_tokens(kb.entity(edge.neighbor)):
                    word.add(tok)
    return Vocabs(word=word, ent_type=ent_type, relation=relation)


def build_instances(records, kb, vocabs, stopwords, hops, flags=AblationFlags(),
                    require_gold=False):
    """Instances with gold topics; optionally drop questions whose
    candidates contain no gold answer (training contract)."""
    out = []
    for rec in records:
        if rec.topic_mention is None:
            log.warning("skipping question without topic mention: %s", rec.raw)
            out.append(None)
            continue
        inst = build_instance(rec, kb, vocabs, stopwords, hops,
                              rec.topic_mention.entity_id, flags)
        if inst is None:
            log.warning("no candidates for question: %s", rec.raw)
            out.append(None)
            continue
        if require_gold and len(inst.positive) == 0:
            log.warning("candidates contain no gold answer, skipping: %s", rec.raw)
            out.append(None)
            continue
        out.append(inst)
    return out
