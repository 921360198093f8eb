"""Command-line interface.

Subcommands: gen-adjnoun, gen-numbers, train, eval, gradcheck, norms.
A key=value config file can supply any flag; explicit flags win.  Exit
codes: 0 success, 1 usage/configuration error, 2 numerical failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data, engine, metrics
from .backend import backend_name
from .errors import ConfigError, DataFormatError, NumericalError, ParseError

GRADCHECK_TOLERANCE = 1e-4

_INT_KEYS = {"dim", "classes", "epochs", "seed", "hidden", "trials", "bins",
             "vocab_size", "train_n", "val_n", "test_n", "lo", "hi",
             "disentangle_epochs", "disentangle_negatives"}
_FLOAT_KEYS = {"curvature", "lr", "alpha", "beta", "h", "validation_fraction"}


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 2; we reserve 2 for numerics."""

    def error(self, message):
        raise ConfigError(message)


def read_config_file(path):
    """key=value lines; '#' starts a comment; keys use flag names."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            else:
                values[key] = value
    return values


def _merge_args(args, keys):
    """Config-file values overridden by explicitly passed flags."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _add_model_flags(p):
    p.add_argument("--config", help="key=value file supplying any flag")
    p.add_argument("--model", choices=sorted(engine.MODELS))
    p.add_argument("--dim", type=int)
    p.add_argument("--curvature", type=float)
    p.add_argument("--classes", type=int, choices=(2, 3))
    p.add_argument("--features",
                   help="comma-separated blocks: u,v,mdiff,absmdiff,cos,dist,"
                        "absdiff,hadamard,dot,edist")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--disentangle-epochs", dest="disentangle_epochs", type=int)
    p.add_argument("--disentangle-negatives", dest="disentangle_negatives", type=int)


def _add_data_flags(p):
    p.add_argument("--train", help="training file")
    p.add_argument("--val", help="validation file")
    p.add_argument("--test", help="test file")
    p.add_argument("--format", choices=("tsv", "jsonl"),
                   help="file format (default: by extension)")
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float)


def _detect_format(args, paths):
    if getattr(args, "format", None):
        return args.format
    for path in paths:
        if path and path.endswith(".jsonl"):
            return "jsonl"
    return "tsv"


def _config_from(merged):
    keys = {f.name for f in engine.RunConfig.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    return engine.RunConfig.from_dict({k: v for k, v in merged.items() if k in keys})


def cmd_gen_adjnoun(args):
    split, raw = data.gen_adjnoun(
        vocab_size=args.vocab_size, train_n=args.train_n,
        val_n=args.val_n, test_n=args.test_n, seed=args.seed,
    )
    _write_generated(args.out, raw, split)
    return 0


def cmd_gen_numbers(args):
    split, raw = data.gen_numbers(
        lo=args.lo, hi=args.hi, train_n=args.train_n,
        val_n=args.val_n, test_n=args.test_n, seed=args.seed,
    )
    _write_generated(args.out, raw, split)
    return 0


def _write_generated(out_dir, raw, split):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"out": str(out), "vocab_size": len(split.vocab) - 1}
    for name, rows in raw.items():
        path = out / f"{name}.tsv"
        data.write_tsv(path, rows)
        positives = sum(1 for _, _, label in rows if label == "entailment")
        summary[name] = {"size": len(rows), "entailment_part": positives / len(rows)}
    print(json.dumps(summary, sort_keys=True))


def _load_split(args, config):
    if not getattr(args, "train", None) or not getattr(args, "test", None):
        raise ConfigError("--train and --test paths are required")
    fmt = _detect_format(args, [args.train, args.val, args.test])
    return data.load_dataset(
        train_path=args.train,
        test_path=args.test,
        validation_path=args.val,
        fmt=fmt,
        classes=config.classes,
        validation_fraction=getattr(args, "validation_fraction", None) or 0.0,
    )


def cmd_train(args):
    merged = _merge_args(args, [
        "model", "dim", "curvature", "classes", "features", "lr", "epochs",
        "alpha", "beta", "seed", "hidden", "disentangle_epochs",
        "disentangle_negatives", "train", "val", "test", "format",
        "validation_fraction", "out",
    ])
    for key in ("train", "val", "test", "format", "validation_fraction", "out"):
        if key in merged:
            setattr(args, key, merged.pop(key))
    config = _config_from(merged).validated()
    split = _load_split(args, config)
    if split.meta.get("validation_is_training"):
        print("warning: no validation file; model selection uses the training set",
              file=sys.stderr)

    out = Path(args.out or "checkpoint.json")
    log_path = out.with_suffix(out.suffix + ".log.jsonl")
    with open(log_path, "w", encoding="utf-8", newline="\n") as log_file:
        def sink(record):
            log_file.write(json.dumps(record, sort_keys=True) + "\n")

        result = engine.train(config, split, log_sink=sink)
    engine.save_checkpoint(out, result.state)

    best = next(r for r in result.log if r.get("epoch") == result.state.best_epoch)
    summary = {
        "backend": backend_name(),
        "checkpoint": str(out),
        "log": str(log_path),
        "best_epoch": result.state.best_epoch,
        "val_accuracy": best["val_accuracy"],
        "test_accuracy": best["test_accuracy"],
        "test_f1": best["test_f1"],
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_eval(args):
    state = engine.load_checkpoint(args.checkpoint)
    if args.dim is not None and args.dim != state.config.dim:
        raise ConfigError(
            f"--dim {args.dim} conflicts with checkpoint dim {state.config.dim}"
        )
    if not args.test:
        raise ConfigError("--test path is required")
    fmt = _detect_format(args, [args.test])
    if fmt == "tsv":
        rows, skipped = data.read_tsv(args.test), 0
    else:
        rows, skipped = data.read_jsonl(args.test)
    if not rows:
        raise DataFormatError("no usable records", 0)
    samples = data.samples_from_rows(rows, state.vocab, state.config.classes, fmt)
    report, _ = engine.evaluate_split(state, samples, threshold=state.threshold)
    payload = report.to_dict()
    payload["samples"] = len(samples)
    payload["skipped"] = skipped
    payload["checkpoint"] = args.checkpoint
    if state.threshold is not None:
        payload["threshold"] = state.threshold
    text = json.dumps(payload, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_gradcheck(args):
    merged = _merge_args(args, ["seed", "trials", "h"])
    trials = merged.get("trials", 100)
    seed = merged.get("seed", 0)
    h = merged.get("h", 1e-5)
    corrupt = os.environ.get("HYPENT_GRADCHECK_CORRUPT", "") == "1"
    report = engine.run_gradcheck(trials=trials, seed=seed, h=h, corrupt=corrupt)
    report["backend"] = backend_name()
    report["tolerance"] = GRADCHECK_TOLERANCE
    report["passed"] = report["max_relative_error"] < GRADCHECK_TOLERANCE
    print(json.dumps(report, sort_keys=True))
    return 0 if report["passed"] else 2


def cmd_norms(args):
    state = engine.load_checkpoint(args.checkpoint)
    hist = metrics.norm_histogram(state.embeddings, state.config.curvature, args.bins)
    if args.out:
        metrics.write_histogram_csv(args.out, hist)
    else:
        print("bin_edge,count")
        for edge, count in hist:
            print(f"{edge!r},{count}")
    norms = np.linalg.norm(state.embeddings, axis=1)
    print(json.dumps({"vocab_size": len(norms), "mean_norm": float(norms.mean()),
                      "max_norm": float(norms.max())}, sort_keys=True), file=sys.stderr)
    return 0


def build_parser():
    parser = _Parser(prog="hypent",
                     description="Ball-embedded sentences and entailment classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-adjnoun", help="generate the adjective-noun toy dataset")
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=1000)
    p.add_argument("--train-n", dest="train_n", type=int, default=2000)
    p.add_argument("--val-n", dest="val_n", type=int, default=20000)
    p.add_argument("--test-n", dest="test_n", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_adjnoun)

    p = sub.add_parser("gen-numbers", help="generate the 4-digit numbers toy dataset")
    p.add_argument("--lo", type=int, default=1000)
    p.add_argument("--hi", type=int, default=9999)
    p.add_argument("--train-n", dest="train_n", type=int, default=8000)
    p.add_argument("--val-n", dest="val_n", type=int, default=1000)
    p.add_argument("--test-n", dest="test_n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_numbers)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_model_flags(p)
    _add_data_flags(p)
    p.add_argument("--out", help="checkpoint path (default: checkpoint.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a data file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", help="data file to score")
    p.add_argument("--format", choices=("tsv", "jsonl"))
    p.add_argument("--dim", type=int, help="cross-check against the checkpoint")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="compare analytic gradients to finite differences")
    p.add_argument("--config", help="key=value file supplying any flag")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--h", type=float)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("norms", help="embedding norm histogram from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_norms)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, ParseError, DataFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
