"""The full question-answering model: parameters, forward pass, checkpoints."""

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, concat, embedding_lookup, reshape
from .config import TrainConfig
from .encoders import build_memory, encode_aspects, encode_question, load_word_vectors
from .errors import DataError
from .nn import BatchNormState, batch_norm_1d, init_batch_norm, init_bilstm, init_gru
from .params import (ADAM_PREFIX, BN_PREFIX, ParamStore, load_checkpoint,
                     save_checkpoint)
from .pipeline import CandidateFeatures, Vocabs
from .reasoning import AblationFlags, reason
from .scoring import score_all
from .text import INTERROGATIVES, Vocabulary


@dataclass
class ForwardPass:
    """Everything one question produces up to (and after) the final norm."""
    instance: object
    slot_ids: list          # entity ids occupying memory slots (pre-padding)
    question: object        # QuestionEncoding
    memory: object
    aspects: object
    bundle: object
    positive: np.ndarray    # slot indices of gold answers (within this memory)
    negative: np.ndarray


class QAModel:
    def __init__(self, config: TrainConfig, vocabs: Vocabs,
                 flags: AblationFlags = AblationFlags(), dtype=np.float32):
        self.config = config
        self.vocabs = vocabs
        self.flags = flags.normalized()
        self.params = ParamStore(seed=config.seed, dtype=dtype)
        self.bn = BatchNormState(config.d, dtype=dtype)
        self._init_params()

    def _init_params(self):
        cfg = self.config
        p = self.params
        p.create("embed.word", (len(self.vocabs.word), cfg.d_v), "uniform", 0.08)
        p.create("embed.relation", (len(self.vocabs.relation), cfg.d_p), "uniform", 0.08)
        p.create("embed.ent_type", (len(self.vocabs.ent_type), cfg.d_t), "uniform", 0.08)
        p.create("embed.interrogative", (len(INTERROGATIVES) + 1, cfg.d_t), "uniform", 0.08)
        init_bilstm(p, "enc.question", cfg.d_v, cfg.d)
        init_bilstm(p, "enc.type", cfg.d_v, cfg.d)
        init_bilstm(p, "enc.path", cfg.d_v, cfg.d)
        init_bilstm(p, "enc.context", cfg.d_v, cfg.d)
        init_bilstm(p, "reason.selfatt", 2 * cfg.d, cfg.d)
        bound = 1.0 / np.sqrt(cfg.d)
        p.create("enc.path_proj.w", (cfg.d_p, cfg.d), "uniform", bound)
        p.create("enc.path_proj.b", (cfg.d,), "zeros")
        for aspect in ("type", "path", "context"):
            d_in = 2 * cfg.d if aspect == "path" else cfg.d
            for side in ("k", "v"):
                p.create(f"mem.{aspect}_{side}.w", (d_in, cfg.d), "uniform", bound)
                p.create(f"mem.{aspect}_{side}.b", (cfg.d,), "zeros")
        for att in ("type", "path", "context", "read"):
            p.create(f"reason.att_{att}.w1", (2 * cfg.d, cfg.d), "uniform", bound)
            p.create(f"reason.att_{att}.w2", (cfg.d, 1), "uniform", bound)
        init_gru(p, "reason.gru", cfg.d)
        init_batch_norm(p, "reason.bn", cfg.d)

    def load_pretrained_words(self, path, rng):
        table, found = load_word_vectors(path, self.vocabs.word, self.config.d_v, rng)
        self.params["embed.word"].data[...] = table.astype(self.params.dtype)
        return found

    # -- forward ---------------------------------------------------------

    def forward_instance(self, inst, mode, rng, slots=None):
        """Encode, build memory and reason over one question.

        slots: optional candidate row indices selected for the memory
        (training-time sampling); padding to n_max happens here.  The
        final normalization runs separately over a batch, see
        finalize_batch.
        """
        cfg = self.config
        feats = inst.candidates
        if slots is None:
            sel = np.arange(len(feats.ids))
            pad_to = None
        else:
            sel = np.asarray(slots)
            pad_to = cfg.n_max
        chosen = CandidateFeatures(
            ids=[feats.ids[i] for i in sel],
            type_token_ids=[feats.type_token_ids[i] for i in sel],
            path_token_ids=[feats.path_token_ids[i] for i in sel],
            relation_ids=[feats.relation_ids[i] for i in sel],
            context_token_ids=[feats.context_token_ids[i] for i in sel],
            ent_type_ids=[feats.ent_type_ids[i] for i in sel],
        )
        gold = set() if inst.record is None else set(inst.record.gold_answers)
        positive = np.array([i for i, cid in enumerate(chosen.ids) if cid in gold],
                            dtype=np.int64)
        negative = np.array([i for i, cid in enumerate(chosen.ids) if cid not in gold],
                            dtype=np.int64)

        q_enc = encode_question(inst.word_ids, self.params, mode, rng,
                                cfg.dropout_embed, cfg.dropout_question)
        aspects = encode_aspects(chosen, self.params, mode, rng,
                                 cfg.dropout_embed, cfg.dropout_answer)
        memory = build_memory(aspects, self.params, pad_to=pad_to)
        bundle = reason(q_enc, memory, self.params, self.flags)
        return ForwardPass(instance=inst, slot_ids=chosen.ids, question=q_enc,
                           memory=memory, aspects=aspects, bundle=bundle,
                           positive=positive, negative=negative)

    def finalize_batch(self, passes, mode):
        """Residual + batch normalization over a batch of questions.

        Training mode requires at least two questions; eval mode uses the
        running statistics and accepts any batch size.
        """
        if self.flags.no_generalization:
            return
        d = self.config.d
        rows = [reshape(add(fp.bundle.enhanced_question, fp.bundle.gru_state), (1, d))
                for fp in passes]
        stacked = concat(rows, axis=0) if len(rows) > 1 else rows[0]
        normed = batch_norm_1d(stacked, self.params["reason.bn.gamma"],
                               self.params["reason.bn.beta"], self.bn, mode)
        for i, fp in enumerate(passes):
            fp.bundle.final_question = reshape(
                embedding_lookup(normed, np.array([i])), (d,))

    def score_pass(self, fp):
        """Final scores against the enhanced keys (post finalize_batch)."""
        if fp.bundle.final_question is None:
            raise DataError("finalize_batch must run before scoring")
        return score_all(fp.bundle.final_question, fp.bundle.enhanced_keys,
                         fp.memory.mask, fp.slot_ids + [None] * (fp.memory.size - len(fp.slot_ids)))

    def interrogative_embedding(self, row):
        return reshape(embedding_lookup(self.params["embed.interrogative"],
                                        np.array([row])), (self.config.d_t,))

    # -- persistence -----------------------------------------------------

    def export_arrays(self, adam=None):
        arrays = {name: p.data for name, p in self.params.items()}
        arrays[BN_PREFIX + "reason.bn.mean"] = self.bn.mean
        arrays[BN_PREFIX + "reason.bn.var"] = self.bn.var
        if adam is not None:
            arrays.update(adam.export_arrays(ADAM_PREFIX))
        return arrays

    def save(self, path, adam=None):
        header = {"d": self.config.d, "n_words": len(self.vocabs.word),
                  "n_ent_types": len(self.vocabs.ent_type),
                  "n_relations": len(self.vocabs.relation)}
        save_checkpoint(path, self.export_arrays(adam), header)
        sidecar = {
            "kind": "qa",
            "config": self.config.to_dict(),
            "flags": {name: getattr(self.flags, name) for name in AblationFlags.NAMES},
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
        if sidecar.get("kind") != "qa":
            raise DataError(f"{path}: not a QA model checkpoint")
        config = TrainConfig.from_dict(sidecar["config"])
        vocabs = Vocabs(word=_vocab_from_tokens(sidecar["word_vocab"]),
                        ent_type=_vocab_from_tokens(sidecar["ent_type_vocab"]),
                        relation=_vocab_from_tokens(sidecar["relation_vocab"]))
        flags = AblationFlags(**sidecar["flags"])
        model = cls(config, vocabs, flags, dtype=dtype)
        _, arrays = load_checkpoint(path)
        model.params.load_values({k: v for k, v in arrays.items()
                                  if not k.startswith("__")})
        model.bn.mean[...] = arrays[BN_PREFIX + "reason.bn.mean"]
        model.bn.var[...] = arrays[BN_PREFIX + "reason.bn.var"]
        return model


def sidecar_path(path):
    return str(path) + ".meta.json"


def _vocab_from_tokens(tokens):
    v = Vocabulary()
    for tok in tokens[2:]:  # skip the PAD/UNK rows already present
        v.add(tok)
    return v
