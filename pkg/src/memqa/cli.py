"""Command-line interface.

Commands: build-vocab, train, train-topic, eval, predict, dump-attention,
ablate, make-toy.  Exit code 0 on success; failures print one
machine-parsable line "ERROR {json}" to stderr and exit nonzero.
"""

import argparse
import json
import logging
import os
import sys

from .config import TrainConfig
from .errors import MemqaError
from .evaluate import dump_attention, run_ablation, run_eval
from .kb import load_kb
from .model import QAModel
from .pipeline import build_vocabs
from .reasoning import AblationFlags
from .text import load_questions, load_stopwords, tokenize
from .toydata import write_toy_dataset

log = logging.getLogger(__name__)


def _load_kb_dir(kb_dir):
    return load_kb(os.path.join(kb_dir, "entities.jsonl"),
                   os.path.join(kb_dir, "triples.tsv"),
                   os.path.join(kb_dir, "relations.jsonl"))


def _config_from_args(args):
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    if getattr(args, "set", None):
        cfg.apply_overrides(args.set)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "theta", None) is not None:
        cfg.theta = args.theta
    cfg.validate()
    return cfg


def _flags_from_args(args):
    values = {name: bool(getattr(args, f"ablate_{name}", False))
              for name in AblationFlags.NAMES}
    return AblationFlags(**values).normalized()


def _add_common(p, config=True, seed=True):
    p.add_argument("--kb-dir", required=True, help="directory with entities.jsonl, relations.jsonl, triples.tsv")
    p.add_argument("--stopwords", default=None, help="optional stopword file (one token per line)")
    if config:
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
    if seed:
        p.add_argument("--seed", type=int, default=None)


def _add_ablation_flags(p):
    for name in AblationFlags.NAMES:
        p.add_argument(f"--ablate-{name.replace('_', '-')}",
                       dest=f"ablate_{name}", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="memqa")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build vocabularies from a dataset")
    _add_common(p)
    p.add_argument("--data", required=True, nargs="+",
                   help="train (and validation) question files")
    p.add_argument("--out", required=True, help="output vocabulary JSON")
    _add_ablation_flags(p)

    p = sub.add_parser("train", help="train the answering model")
    _add_common(p)
    p.add_argument("--data", required=True, help="training questions (JSONL)")
    p.add_argument("--dev", required=True, help="validation questions (JSONL)")
    p.add_argument("--checkpoint", required=True, help="best-dev checkpoint path")
    p.add_argument("--history", default=None, help="training history CSV")
    _add_ablation_flags(p)

    p = sub.add_parser("train-topic", help="train the topic entity predictor")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--history", default=None)

    p = sub.add_parser("eval", help="macro-F1 evaluation of a checkpoint")
    _add_common(p, config=False, seed=False)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--topic-source", choices=["gold", "predictor"], default="gold")
    p.add_argument("--topic-checkpoint", default=None)

    p = sub.add_parser("predict", help="write predicted answer sets as JSONL")
    _add_common(p, config=False, seed=False)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--topic-source", choices=["gold", "predictor"], default="gold")
    p.add_argument("--topic-checkpoint", default=None)
    p.add_argument("--out", default="-", help="output path ('-' = stdout)")

    p = sub.add_parser("dump-attention", help="export the word/aspect attention CSV")
    _add_common(p, config=False, seed=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--question", required=True,
                   help="question text (already delexicalized)")
    p.add_argument("--topic", default=None, help="topic entity id (else linked)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablate", help="train+evaluate every single-flag variant")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", default=None, help="report CSV path")

    p = sub.add_parser("make-toy", help="generate the synthetic KB + questions")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=7)
    return parser


def cmd_build_vocab(args):
    kb = _load_kb_dir(args.kb_dir)
    stopwords = load_stopwords(args.stopwords)
    cfg = _config_from_args(args)
    records = []
    for path in args.data:
        records.extend(load_questions(path))
    vocabs = build_vocabs(records, kb, stopwords, cfg.hops, _flags_from_args(args))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"word": vocabs.word.tokens,
                   "ent_type": vocabs.ent_type.tokens,
                   "relation": vocabs.relation.tokens}, fh)
    print(f"vocab sizes: words={len(vocabs.word)} types={len(vocabs.ent_type)} "
          f"relations={len(vocabs.relation)}")
    return 0


def cmd_train(args):
    from .training import fit, write_history
    kb = _load_kb_dir(args.kb_dir)
    stopwords = load_stopwords(args.stopwords)
    cfg = _config_from_args(args)
    flags = _flags_from_args(args)
    train_records = load_questions(args.data)
    dev_records = load_questions(args.dev)
    vocabs = build_vocabs(train_records + dev_records, kb, stopwords, cfg.hops, flags)
    model, history = fit(train_records, dev_records, kb, vocabs, stopwords,
                         cfg, flags, checkpoint_path=args.checkpoint)
    if args.history:
        write_history(args.history, history)
    best = max(h["dev_f1"] for h in history)
    print(f"trained {len(history)} epochs; best dev F1 {best:.4f}; "
          f"checkpoint: {args.checkpoint}")
    return 0


def cmd_train_topic(args):
    from .topic import train_topic
    from .training import write_history
    kb = _load_kb_dir(args.kb_dir)
    stopwords = load_stopwords(args.stopwords)
    cfg = _config_from_args(args)
    train_records = load_questions(args.data)
    dev_records = load_questions(args.dev)
    vocabs = build_vocabs(train_records + dev_records, kb, stopwords, cfg.hops)
    model, history = train_topic(train_records, dev_records, kb, vocabs, cfg,
                                 checkpoint_path=args.checkpoint)
    if args.history:
        write_history(args.history, history)
    best = max(h["dev_f1"] for h in history)
    print(f"trained {len(history)} epochs; best dev recall@1 {best:.4f}; "
          f"checkpoint: {args.checkpoint}")
    return 0


def _load_topic_model(args):
    if args.topic_source != "predictor":
        return None
    if not args.topic_checkpoint:
        raise MemqaError("--topic-source predictor needs --topic-checkpoint")
    from .topic import TopicModel
    return TopicModel.load(args.topic_checkpoint)


def cmd_eval(args):
    kb = _load_kb_dir(args.kb_dir)
    stopwords = load_stopwords(args.stopwords)
    model = QAModel.load(args.checkpoint)
    records = load_questions(args.data)
    report, _ = run_eval(model, kb, records, stopwords, theta=args.theta,
                         topic_source=args.topic_source,
                         topic_model=_load_topic_model(args))
    print(f"questions: {report.n_questions} skipped: {report.n_skipped} "
          f"macro F1: {report.macro_f1:.4f}")
    return 0


def cmd_predict(args):
    kb = _load_kb_dir(args.kb_dir)
    stopwords = load_stopwords(args.stopwords)
    model = QAModel.load(args.checkpoint)
    records = load_questions(args.data)
    theta = args.theta if args.theta is not None else model.config.theta
    _, predictions = run_eval(model, kb, records, stopwords, theta=theta,
                              topic_source=args.topic_source,
                              topic_model=_load_topic_model(args))
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    try:
        for rec, pred in zip(records, predictions):
            out.write(json.dumps({"question": rec.raw,
                                  "answers": pred["answers"],
                                  "scores": pred["scores"]}) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_dump_attention(args):
    kb = _load_kb_dir(args.kb_dir)
    stopwords = load_stopwords(args.stopwords)
    model = QAModel.load(args.checkpoint)
    tokens = tokenize(args.question)
    topic = args.topic
    if topic is None:
        from .topic import link_candidates
        linked = link_candidates(kb, tokens, 1)
        if not linked:
            raise MemqaError("could not resolve a topic entity; pass --topic")
        topic = linked[0].entity_id
    dump_attention(model, kb, stopwords, tokens, topic, args.out)
    print(f"wrote attention heatmap to {args.out}")
    return 0


def cmd_ablate(args):
    kb = _load_kb_dir(args.kb_dir)
    stopwords = load_stopwords(args.stopwords)
    cfg = _config_from_args(args)
    rows = run_ablation(kb, load_questions(args.data), load_questions(args.dev),
                        load_questions(args.test), stopwords, cfg)
    lines = ["variant,macro_f1"] + [f"{name},{f1:.6f}" for name, f1 in rows]
    report = "\n".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report + "\n")
    print(report)
    return 0


def cmd_make_toy(args):
    paths = write_toy_dataset(args.out_dir, seed=args.seed)
    print(json.dumps(paths, indent=2))
    return 0


_COMMANDS = {
    "build-vocab": cmd_build_vocab,
    "train": cmd_train,
    "train-topic": cmd_train_topic,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "dump-attention": cmd_dump_attention,
    "ablate": cmd_ablate,
    "make-toy": cmd_make_toy,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except MemqaError as exc:
        print("ERROR " + json.dumps({"message": str(exc)}), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print("ERROR " + json.dumps({"message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
