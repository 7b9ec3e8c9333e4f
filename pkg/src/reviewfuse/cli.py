"""Command-line entry point: gen-data / train / eval / predict / gradcheck.

Config precedence is defaults < JSON config file < command-line flags.
Exit codes: 0 success, 1 usage error, 2 data/format error, 3 training or
evaluation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .bundle import load_bundle, save_bundle
from .data import PreparedDataset, align_images, read_manifest
from .errors import (
    AlignmentError,
    ContractError,
    FormatError,
    LabelError,
    ManifestError,
    ParameterError,
    ReviewFuseError,
    SplitError,
    TokenIndexError,
    TrainingDivergenceError,
)
from .gradsuite import run_gradcheck
from .metrics import emit_report, evaluate, format_confusion
from .model import ReviewClassifier
from .synthgen import GeneratorSpec, generate_synthetic
from .textproc import Vocabulary, tokenize
from .training import TrainConfig, fit, model_to_bundle
from .workflow import (
    DESK_CROP_SIDE,
    DESK_MAX_LEN,
    DESK_VOCAB_SIZE,
    compare_baselines,
    desk_model,
    load_corpus,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUN = 3

# training settings for `eval --compare`, matched to the default corpus
COMPARE_TRAIN = dict(lr=5e-4, weight_decay=0.01, batch_size=32,
                     max_epochs=10, patience=10)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _merge_config(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """defaults < JSON config file < explicit flags (rightmost wins)."""
    merged = dict(parser_defaults)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise FormatError(f"cannot read config {path}: {e}")
        if not isinstance(file_cfg, dict):
            raise UsageError(f"config {path} must be a JSON object")
        unknown = set(file_cfg) - set(parser_defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in parser_defaults:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    missing = [k for k, v in merged.items() if v is _REQUIRED]
    if missing:
        raise UsageError("missing required settings: "
                         + ", ".join(f"--{m.replace('_', '-')}" for m in missing))
    return merged


_REQUIRED = object()


def _ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


# ---------------------------------------------------------------------------
# subcommands


GEN_DEFAULTS = {
    "out": _REQUIRED, "n": 2000, "seed": 7,
    "ratios": (0.6, 0.2, 0.2), "text_flip_rate": 0.25,
    "p_match": 0.95, "image_side": 37,
}


def cmd_gen_data(args) -> int:
    cfg = _merge_config(args, GEN_DEFAULTS)
    spec = GeneratorSpec(n=cfg["n"], seed=cfg["seed"],
                         text_flip_rate=cfg["text_flip_rate"],
                         p_match=cfg["p_match"], image_side=cfg["image_side"])
    split = generate_synthetic(spec, cfg["out"], ratios=tuple(cfg["ratios"]))
    for name, part in (("train", split.train), ("val", split.val),
                       ("test", split.test)):
        counts = Counter(s.label for s in part)
        print(f"{name}: {len(part)} samples "
              f"(fake={counts[0]}, genuine={counts[1]})")
    print(f"wrote {cfg['out']}")
    return EXIT_OK


TRAIN_DEFAULTS = {
    "data": _REQUIRED, "out": _REQUIRED, "mode": "fused", "seed": 0,
    "lr": 1e-3, "weight_decay": 0.01, "batch_size": 32, "max_epochs": 50,
    "patience": 5, "max_len": DESK_MAX_LEN, "crop_side": DESK_CROP_SIDE,
    "vocab_size": DESK_VOCAB_SIZE, "report": None,
}


def cmd_train(args) -> int:
    cfg = _merge_config(args, TRAIN_DEFAULTS)
    corpus = load_corpus(cfg["data"], max_len=cfg["max_len"],
                         crop_side=cfg["crop_side"],
                         vocab_size=cfg["vocab_size"])
    model = desk_model(cfg["mode"], vocab_size=len(corpus.vocab),
                       max_len=cfg["max_len"], crop_side=cfg["crop_side"],
                       seed=cfg["seed"])
    tc = TrainConfig(lr=cfg["lr"], weight_decay=cfg["weight_decay"],
                     batch_size=cfg["batch_size"], max_epochs=cfg["max_epochs"],
                     patience=cfg["patience"], seed=cfg["seed"])
    report, _ = fit(model, corpus.train, corpus.val, tc, log=print)
    print(f"best epoch {report.best_epoch} "
          f"(val_acc={report.val_accuracies[report.best_epoch - 1]:.4f}), "
          f"stopped: {report.stop_reason}")
    extra = {
        "vocab_tokens": corpus.vocab.id_to_token[4:],
        "preprocess": {"max_len": cfg["max_len"],
                       "crop_side": cfg["crop_side"]},
        "train_config": {k: cfg[k] for k in ("lr", "weight_decay",
                                             "batch_size", "max_epochs",
                                             "patience", "seed")},
    }
    save_bundle(model_to_bundle(model, extra), cfg["out"])
    report_path = cfg["report"] or cfg["out"] + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {cfg['out']} and {report_path}")
    return EXIT_OK


EVAL_DEFAULTS = {
    "data": _REQUIRED, "model": None, "split": "test", "format": "plain",
    "out": None, "compare": False, "seed": 0,
}


def _load_model_and_vocab(path):
    bundle = load_bundle(path)
    try:
        model_cfg = bundle.config["model"]
        vocab = Vocabulary(bundle.config["vocab_tokens"])
        prep = bundle.config["preprocess"]
    except KeyError as e:
        raise FormatError(f"{path}: bundle config missing {e}")
    model = ReviewClassifier.from_config(model_cfg)
    model.load_state(bundle.tensors)
    return model, vocab, prep


def cmd_eval(args) -> int:
    cfg = _merge_config(args, EVAL_DEFAULTS)
    if cfg["compare"]:
        corpus = load_corpus(cfg["data"])
        tc = TrainConfig(seed=cfg["seed"], **COMPARE_TRAIN)
        reports, meta = compare_baselines(corpus, tc, log=print)
        print(emit_report(reports, fmt=cfg["format"], path=cfg["out"]), end="")
        ref = meta["benchmark_reference"]
        print("reference (full-scale benchmark): "
              + "  ".join(f"{k}={v['accuracy']:.3f}" for k, v in ref.items()))
        return EXIT_OK
    if not cfg["model"]:
        raise UsageError("eval requires --model (or --compare)")
    model, vocab, prep = _load_model_and_vocab(cfg["model"])
    if cfg["split"] not in ("train", "val", "test"):
        raise UsageError(f"unknown split {cfg['split']!r}")
    manifest = os.path.join(cfg["data"], f"{cfg['split']}.csv")
    if not os.path.isfile(manifest):
        raise ManifestError(f"missing split manifest {manifest}")
    samples = read_manifest(manifest)
    samples, _ = align_images(samples, os.path.join(cfg["data"], "images"))
    dataset = PreparedDataset.prepare(
        samples, vocab=vocab, max_len=prep["max_len"],
        crop_side=prep["crop_side"],
        need_text=model.text_cfg is not None,
        need_images=model.image_cfg is not None)
    report = evaluate(model, dataset, split_tag=cfg["split"])
    print(emit_report(report, fmt=cfg["format"], path=cfg["out"]), end="")
    print(format_confusion(report.cm), end="")
    return EXIT_OK


PREDICT_DEFAULTS = {"model": _REQUIRED, "text": None, "image": None}


def cmd_predict(args) -> int:
    cfg = _merge_config(args, PREDICT_DEFAULTS)
    model, vocab, prep = _load_model_and_vocab(cfg["model"])
    reviews = None
    images = None
    if model.text_cfg is not None:
        if cfg["text"] is None:
            raise UsageError(f"mode {model.mode} requires --text")
        reviews = [tokenize(vocab, cfg["text"], max_len=prep["max_len"])]
    if model.image_cfg is not None:
        if cfg["image"] is None:
            raise UsageError(f"mode {model.mode} requires --image")
        from .imageproc import preprocess
        img = preprocess(cfg["image"], crop_side=prep["crop_side"])
        images = Tensor(img.data[np.newaxis, ...])
    with ag.no_grad():
        logits = model.forward_batch(reviews, images, training=False)
    probs = ag.softmax(logits).data[0]
    label = 1 if logits.data[0, 1] > logits.data[0, 0] else 0
    print(f"label: {'genuine' if label == 1 else 'fake'}")
    print(f"p_fake: {probs[0]:.4f}")
    print(f"p_genuine: {probs[1]:.4f}")
    return EXIT_OK


GRADCHECK_DEFAULTS = {"seed": 0, "corrupt": False}


def cmd_gradcheck(args) -> int:
    cfg = _merge_config(args, GRADCHECK_DEFAULTS)
    results = run_gradcheck(seed=cfg["seed"], corrupt=cfg["corrupt"])
    failing = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:20s} max_rel_err={r.error:.3e} "
              f"(threshold {r.threshold:g})  {status}")
        if not r.passed:
            failing.append(r.name)
    if failing:
        print(f"gradcheck FAILED: {', '.join(failing)}")
        return EXIT_RUN
    print("gradcheck passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="reviewfuse",
                     description="Multimodal fake-review detection toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="JSON config file (flags override it)")
        return p

    g = add("gen-data", cmd_gen_data, "generate a synthetic corpus")
    g.add_argument("--out", help="output directory")
    g.add_argument("--n", type=int, help="number of samples")
    g.add_argument("--seed", type=int)
    g.add_argument("--ratios", type=_ratios, help="train,val,test e.g. 0.6,0.2,0.2")
    g.add_argument("--text-flip-rate", dest="text_flip_rate", type=float)
    g.add_argument("--p-match", dest="p_match", type=float)
    g.add_argument("--image-side", dest="image_side", type=int)

    t = add("train", cmd_train, "train a model on a generated corpus")
    t.add_argument("--data", help="corpus directory")
    t.add_argument("--out", help="output model bundle path")
    t.add_argument("--mode", choices=("text_only", "image_only", "fused"))
    t.add_argument("--seed", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--weight-decay", dest="weight_decay", type=float)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--max-epochs", dest="max_epochs", type=int)
    t.add_argument("--patience", type=int)
    t.add_argument("--max-len", dest="max_len", type=int)
    t.add_argument("--crop-side", dest="crop_side", type=int)
    t.add_argument("--vocab-size", dest="vocab_size", type=int)
    t.add_argument("--report", help="training report JSON path")

    e = add("eval", cmd_eval, "evaluate a model or compare baselines")
    e.add_argument("--data", help="corpus directory")
    e.add_argument("--model", help="model bundle path")
    e.add_argument("--split", choices=("train", "val", "test"))
    e.add_argument("--format", choices=("plain", "csv", "json"))
    e.add_argument("--out", help="write the report here as well")
    e.add_argument("--compare", action="store_const", const=True,
                   help="train and compare text_only/image_only/fused")
    e.add_argument("--seed", type=int)

    p = add("predict", cmd_predict, "classify a single review")
    p.add_argument("--model", help="model bundle path")
    p.add_argument("--text", help="review text")
    p.add_argument("--image", help="review image (PPM)")

    c = add("gradcheck", cmd_gradcheck, "run the finite-difference oracle suite")
    c.add_argument("--seed", type=int)
    c.add_argument("--corrupt", action="store_const", const=True,
                   help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            parser.print_help()
            return EXIT_USAGE
        return args.fn(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ManifestError, FormatError, AlignmentError, SplitError,
            TokenIndexError, LabelError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergenceError, ContractError, ReviewFuseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
