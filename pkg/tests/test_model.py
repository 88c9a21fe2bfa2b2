import numpy as np
import pytest

from memqa.config import TrainConfig
from memqa.errors import ShapeError
from memqa.evaluate import predict_instance
from memqa.model import QAModel
from memqa.pipeline import build_instances, build_vocabs
from memqa.text import load_questions


@pytest.fixture(scope="module")
def setup(toy_kb, toy_paths, stopwords):
    records = load_questions(toy_paths["train"])[:8]
    vocabs = build_vocabs(records, toy_kb, stopwords, 2)
    cfg = TrainConfig(d=8, d_v=6, d_p=4, d_t=4, seed=9)
    model = QAModel(cfg, vocabs)
    insts = [i for i in build_instances(records, toy_kb, vocabs, stopwords, 2)
             if i is not None]
    return model, insts


def test_checkpoint_round_trip(setup, tmp_path):
    model, insts = setup
    # perturb running stats so the round trip covers them
    model.bn.mean[...] = 0.25
    model.bn.var[...] = 2.0
    path = tmp_path / "model.ckpt"
    model.save(path)
    clone = QAModel.load(path)
    for name, p in model.params.items():
        assert np.allclose(clone.params[name].data, p.data, atol=1e-7), name
    assert np.allclose(clone.bn.mean, model.bn.mean)
    assert np.allclose(clone.bn.var, model.bn.var)
    for inst in insts[:3]:
        a, _ = predict_instance(model, inst, 0.7)
        b, _ = predict_instance(clone, inst, 0.7)
        assert a == b


def test_eval_forward_is_deterministic(setup):
    model, insts = setup
    for inst in insts[:3]:
        a, sa = predict_instance(model, inst, 0.7)
        b, sb = predict_instance(model, inst, 0.7)
        assert a == b and sa == sb


def test_finalize_batch_train_requires_two(setup):
    model, insts = setup
    rng = np.random.default_rng(0)
    fp = model.forward_instance(insts[0], "train", rng,
                                list(range(len(insts[0].candidates.ids))))
    with pytest.raises(ShapeError):
        model.finalize_batch([fp], "train")


def test_checkpoint_header_fields(setup, tmp_path):
    from memqa.params import load_checkpoint
    model, _ = setup
    path = tmp_path / "model.ckpt"
    model.save(path)
    header, arrays = load_checkpoint(path)
    assert header["d"] == model.config.d
    assert header["n_words"] == len(model.vocabs.word)
    assert any(k.startswith("__bn__.") for k in arrays)
    assert all(v.dtype == np.float32 for v in arrays.values())
