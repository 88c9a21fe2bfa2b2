import numpy as np
import pytest

from memqa import pipeline
from memqa.config import TrainConfig
from memqa.model import QAModel
from memqa.reasoning import AblationFlags
from memqa.text import load_questions


@pytest.fixture(scope="module")
def toy_setup(toy_kb, toy_paths, stopwords):
    records = load_questions(toy_paths["train"])
    vocabs = pipeline.build_vocabs(records, toy_kb, stopwords, 2)
    return records, vocabs


def test_vocab_contains_placeholders_and_types(toy_setup):
    _, vocabs = toy_setup
    for tok in ("__number__", "__date__", "__ordinal__", "country", "person"):
        assert tok in vocabs.word
    assert "country" in vocabs.ent_type
    assert "serves_country" in vocabs.relation


def test_instance_positive_negative_partition(toy_kb, toy_setup, stopwords):
    records, vocabs = toy_setup
    insts = pipeline.build_instances(records, toy_kb, vocabs, stopwords, 2,
                                     require_gold=True)
    insts = [i for i in insts if i is not None]
    assert len(insts) == len(records)
    for inst in insts:
        ids = np.array(inst.candidates.ids)
        gold = inst.record.gold_answers
        assert all(ids[i] in gold for i in inst.positive)
        assert all(ids[i] not in gold for i in inst.negative)
        assert len(inst.positive) + len(inst.negative) == len(ids)
        assert len(inst.delex_tokens) == inst.word_ids.size


def test_delexicalize_record_flags(toy_kb, toy_setup):
    records, _ = toy_setup
    rec = next(r for r in records if r.constraint_mentions)
    full = pipeline.delexicalize_record(rec, toy_kb)
    no_topic = pipeline.delexicalize_record(rec, toy_kb,
                                            AblationFlags(no_topic_delex=True))
    no_cons = pipeline.delexicalize_record(rec, toy_kb,
                                           AblationFlags(no_constraint_delex=True))
    assert "__number__" in full and "country" in full
    assert "__number__" in no_topic and "country" not in no_topic
    assert "__number__" not in no_cons and "country" in no_cons


def test_official_context_carries_role_word(toy_kb, toy_setup, stopwords):
    records, vocabs = toy_setup
    rec = next(r for r in records if r.constraint_mentions)
    inst = pipeline.build_instance(rec, toy_kb, vocabs, stopwords, 2,
                                   rec.topic_mention.entity_id)
    # "... who was the <role> of <topic> ..." - role sits 2 before the topic
    role_word = rec.tokens[rec.topic_mention.start - 2]
    gold_rows = [inst.candidates.context_token_ids[i] for i in inst.positive]
    decoded = [vocabs.word.decode(seq) for ctx in gold_rows for seq in ctx]
    assert [role_word] in decoded


def test_attention_mass_respects_padding_mask(toy_kb, toy_setup, stopwords):
    # padded training memories keep attention off the padding slots
    records, vocabs = toy_setup
    cfg = TrainConfig(d=16, d_v=8, d_p=8, d_t=4, seed=0, n_max=96,
                      dropout_embed=0.0, dropout_question=0.0, dropout_answer=0.0)
    model = QAModel(cfg, vocabs)
    rng = np.random.default_rng(0)
    for rec in records[:10]:
        inst = pipeline.build_instance(rec, toy_kb, vocabs, stopwords, 2,
                                       rec.topic_mention.entity_id)
        slots = list(range(len(inst.candidates.ids)))
        fp = model.forward_instance(inst, "train", rng, slots)
        mask = fp.memory.mask
        assert fp.memory.size == 96
        assert fp.bundle.read_weights.data[~mask].max() < 1e-6
        assert fp.bundle.slot_weights_per_word.data[:, ~mask].max() < 1e-6
        assert np.isclose(fp.bundle.read_weights.data.sum(), 1.0, atol=1e-6)
