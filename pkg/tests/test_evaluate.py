import csv

import numpy as np
import pytest

from memqa.config import TrainConfig
from memqa.errors import DataError
from memqa.evaluate import dump_attention, f1_set, macro_f1
from memqa.model import QAModel
from memqa.pipeline import build_vocabs
from memqa.text import load_questions


def test_f1_exact_match():
    assert f1_set({"a", "b"}, {"a", "b"}) == 1.0


def test_f1_half_precision():
    assert np.isclose(f1_set({"a", "b"}, {"a"}), 2 / 3)


def test_f1_no_intersection():
    assert f1_set({"a"}, {"b"}) == 0.0
    assert f1_set(set(), {"b"}) == 0.0


def test_macro_f1_mean_and_bounds():
    report = macro_f1([{"a", "b"}, {"a"}, set()],
                      [{"a", "b"}, {"a", "b"}, {"z"}])
    assert np.isclose(report.macro_f1, (1.0 + 2 / 3 + 0.0) / 3)
    assert all(0.0 <= f <= 1.0 for f in report.per_question)
    assert report.n_questions == 3


def test_macro_f1_permutation_invariant():
    preds = [{"a"}, {"b"}, {"c", "d"}]
    golds = [{"a"}, {"x"}, {"c"}]
    base = macro_f1(preds, golds).macro_f1
    perm = macro_f1(preds[::-1], golds[::-1]).macro_f1
    assert np.isclose(base, perm)


def test_macro_f1_misaligned_errors():
    with pytest.raises(DataError):
        macro_f1([{"a"}], [{"a"}, {"b"}])


@pytest.fixture(scope="module")
def toy_model(toy_kb, toy_paths, stopwords):
    records = load_questions(toy_paths["train"]) + load_questions(toy_paths["dev"])
    cfg = TrainConfig(d=8, d_v=6, d_p=4, d_t=4, seed=3)
    vocabs = build_vocabs(records, toy_kb, stopwords, cfg.hops)
    return QAModel(cfg, vocabs)


def test_dump_attention_shape_and_fidelity(toy_model, toy_kb, stopwords, tmp_path):
    question = ["who", "was", "the", "chancellor", "of", "country",
                "in", "__number__"]
    topic = next(e for e in toy_kb.entities
                 if toy_kb.entities[e].type_tokens == ["country"])
    out = tmp_path / "heatmap.csv"
    scores3 = dump_attention(toy_model, toy_kb, stopwords, question, topic, out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    n_candidates = scores3.shape[1]
    assert header == ["candidate", "aspect", *question]
    assert len(header) - 2 == len(question) == scores3.shape[0]
    assert len(data) == n_candidates * 3
    # file values equal the in-memory attention tensor
    for r, row in enumerate(data):
        i, x = divmod(r, 3)
        got = np.array([float(v) for v in row[2:]])
        assert np.abs(got - scores3[:, i, x]).max() < 1e-6


def test_dump_attention_unknown_topic_errors(toy_model, toy_kb, stopwords, tmp_path):
    from memqa.errors import KBError
    with pytest.raises(KBError):
        dump_attention(toy_model, toy_kb, stopwords, ["who"], "not_an_entity",
                       tmp_path / "x.csv")
