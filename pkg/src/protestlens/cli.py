"""Command-line entry point: ``protestlens <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or integrity error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DecodeError, ProtestLensError

log = logging.getLogger("protestlens")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
SEED_ENV = "PROTESTLENS_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str, n: int | None = None, what: str = "value") -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    return vals


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _resolved_argv(parser: argparse.ArgumentParser, args) -> list[str]:
    argv = [args.command]
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help",):
            continue
        value = getattr(args, action.dest, None)
        if value is None or value is False:
            continue
        flag = action.option_strings[-1]
        argv.extend([flag] if value is True else [flag, str(value)])
    return argv


def _write_manifest(path: Path, parser, args, extra: dict | None = None) -> None:
    manifest = {
        "tool": "protestlens",
        "version": __version__,
        "command": args.command,
        "argv": _resolved_argv(parser, args),
        "config": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "parser")},
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _open_input(source: str):
    if source == "-":
        return sys.stdin
    try:
        return open(source, encoding="utf-8")
    except OSError as exc:
        raise DecodeError(f"cannot read input {source}: {exc.strerror}") from None


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DecodeError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from None


def _train_config(args):
    from .trainer import TrainConfig

    cw = _floats(args.class_weights, 2, "--class-weights") if args.class_weights else None
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, schedule=args.schedule,
                       warmup_frac=args.warmup_frac, weight_decay=args.weight_decay, seed=args.seed,
                       patience=args.patience, class_weights=cw, eval_every=args.eval_every,
                       max_steps=args.max_steps, threshold=args.threshold)


def _emit(rows, destination: str | None) -> None:
    fh = sys.stdout if destination in (None, "-") else open(destination, "w", encoding="utf-8")
    try:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=False) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_corpus(args, parser) -> int:
    from .corpus import build_corpus

    ratios = _floats(args.ratios, 3, "--ratios")
    manifest = build_corpus(args.events, args.articles, args.out_dir, args.negatives, args.seed,
                            ratios, args.fuzzy_threshold)
    counts = manifest["counts"]
    print(f"matches {counts['matches_total']} -> positives {counts['positives']}, negatives {counts['negatives']}")
    # the corpus manifest doubles as the run manifest
    run = json.loads((Path(args.out_dir) / "manifest.json").read_text(encoding="utf-8"))
    run["argv"] = _resolved_argv(parser, args)
    run["command"] = args.command
    (Path(args.out_dir) / "manifest.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n",
                                                      encoding="utf-8")
    return EXIT_OK


def cmd_build_vocab(args, parser) -> int:
    from .corpus import build_vocab, read_jsonl

    rows = read_jsonl(args.train)
    vocab = build_vocab((r["text"] for r in rows), args.size)
    vocab.save(args.out)
    print(f"vocabulary of {len(vocab)} tokens -> {args.out}")
    if args.manifest:
        _write_manifest(Path(args.manifest), parser, args)
    return EXIT_OK


def _text_setup(args):
    from .corpus import Vocabulary
    from .text import TextModelConfig

    vocab = Vocabulary.load(args.vocab)
    raw = _read_json(args.model_config) if args.model_config else {}
    raw.setdefault("vocab_size", len(vocab))
    config = TextModelConfig.from_dict(raw)
    if config.vocab_size != len(vocab):
        raise ConfigError(f"model config vocab_size {config.vocab_size} != vocabulary size {len(vocab)}")
    return vocab, config


def _finish_training(args, parser, model, history, test_data, val_data) -> None:
    from .trainer import evaluate, save_checkpoint

    out = Path(args.out_dir)
    final = evaluate(model, test_data, args.threshold) if test_data is not None else (
        evaluate(model, val_data, args.threshold) if val_data is not None else None)
    report = final.to_dict() if final is not None else {}
    report["split"] = "test" if test_data is not None else ("val" if val_data is not None else None)
    save_checkpoint(model, out / "model.plck", metrics=report)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(out / "manifest.json", parser, args, {"train_config": _train_config(args).to_dict()})
    if final is not None:
        print(f"{report['split']} accuracy {final.accuracy:.4f}  f1 {final.f1:.4f}")


def cmd_train_text(args, parser) -> int:
    from .corpus import read_jsonl
    from .text import TextClassifier
    from .trainer import TextDataset, train

    vocab, config = _text_setup(args)
    train_cfg = _train_config(args)
    load = lambda p: TextDataset(read_jsonl(p), vocab, config) if p else None  # noqa: E731
    tr, va, te = load(args.train), load(args.val), load(args.test)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = TextClassifier(config, seed=args.seed)
    model, history = train(model, tr, va, train_cfg, history_path=out / "history.csv")
    _finish_training(args, parser, model, history, te, va)
    return EXIT_OK


def cmd_train_image(args, parser) -> int:
    from .trainer import ImageDataset, train
    from .vision import VisionClassifier, VisionModelConfig
    from .vision.imageio import load_examples

    config = VisionModelConfig.from_dict(_read_json(args.model_config)) if args.model_config else VisionModelConfig()
    train_cfg = _train_config(args)

    def load(p):
        if not p:
            return None
        return ImageDataset(load_examples(p, config.image_size, config.attribute_heads), config.attribute_heads)

    tr, va, te = load(args.train), load(args.val), load(args.test)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = VisionClassifier(config, seed=args.seed)
    model, history = train(model, tr, va, train_cfg, history_path=out / "history.csv")
    _finish_training(args, parser, model, history, te, va)
    return EXIT_OK


def cmd_eval(args, parser) -> int:
    from .corpus import Vocabulary, read_jsonl
    from .trainer import ImageDataset, TextDataset, evaluate, load_checkpoint
    from .vision.imageio import load_examples

    model = load_checkpoint(args.checkpoint)
    if model.kind == "text":
        if not args.vocab:
            raise UsageError("eval of a text checkpoint requires --vocab")
        data = TextDataset(read_jsonl(args.data), Vocabulary.load(args.vocab), model.config)
    else:
        cfg = model.config
        data = ImageDataset(load_examples(args.data, cfg.image_size, cfg.attribute_heads), cfg.attribute_heads)
    if len(data) == 0:
        raise DecodeError(f"{args.data}: no examples")
    report = evaluate(model, data, args.threshold).to_dict()
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.manifest:
        _write_manifest(Path(args.manifest), parser, args)
    return EXIT_OK


def cmd_infer_text(args, parser) -> int:
    from .corpus import Vocabulary
    from .text import LABELS
    from .trainer import load_checkpoint

    model = load_checkpoint(args.checkpoint)
    if model.kind != "text":
        raise DecodeError(f"{args.checkpoint} holds a {model.kind} model, not a text model")
    vocab = Vocabulary.load(args.vocab)
    fh = _open_input(args.input)
    try:
        texts = [line.rstrip("\n").rstrip("\r") for line in fh]
    finally:
        if fh is not sys.stdin:
            fh.close()
    probs = model.predict_texts(texts, vocab, args.batch_size)
    rows = ({"id": i, "label": LABELS[1] if p > 0.5 else LABELS[0], "probability": float(p)}
            for i, p in enumerate(probs, start=1))
    _emit(rows, args.output)
    if args.manifest:
        _write_manifest(Path(args.manifest), parser, args)
    return EXIT_OK


def cmd_infer_image(args, parser) -> int:
    import numpy as np

    from .trainer import load_checkpoint
    from .vision import ImageBatch
    from .vision.imageio import load_image

    model = load_checkpoint(args.checkpoint)
    if model.kind != "vision":
        raise DecodeError(f"{args.checkpoint} holds a {model.kind} model, not a vision model")
    fh = _open_input(args.input)
    try:
        paths = [line.strip() for line in fh if line.strip()]
    finally:
        if fh is not sys.stdin:
            fh.close()
    rows = []
    for start in range(0, len(paths), args.batch_size):
        chunk = paths[start:start + args.batch_size]
        pixels = np.stack([load_image(p, model.config.image_size) for p in chunk])
        probs = model.predict_proba(ImageBatch(pixels))
        for path, pr in zip(chunk, probs):
            attrs = {name: float(v) for name, v in zip(model.head_names, pr)}
            rows.append({"id": path, "label": "protest" if attrs["protest"] > 0.5 else "non-protest",
                         "probabilities": attrs})
    _emit(rows, args.output)
    if args.manifest:
        _write_manifest(Path(args.manifest), parser, args)
    return EXIT_OK


def cmd_inspect_checkpoint(args, parser) -> int:
    from .trainer import checkpoint_listing

    sys.stdout.write(checkpoint_listing(args.checkpoint))
    if args.manifest:
        _write_manifest(Path(args.manifest), parser, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train", required=True, help="training split")
    p.add_argument("--val", help="validation split (enables early stopping and best-weight restore)")
    p.add_argument("--test", help="held-out split for the final report")
    p.add_argument("--model-config", help="JSON file with model architecture")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--schedule", choices=("linear", "constant"), default="linear")
    p.add_argument("--warmup-frac", type=float, default=0.05)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--eval-every", type=int, help="evaluate every N steps (default: once per epoch)")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--class-weights", help="negative,positive loss weights")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")


def build_parser() -> _Parser:
    parser = _Parser(prog="protestlens", description="Protest-news and protest-image classification toolkit.")
    parser.add_argument("--version", action="version", version=f"protestlens {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--replay", metavar="MANIFEST", help="re-run the command recorded in a run manifest")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("build-corpus", help="match events to articles, sample negatives, split")
    p.add_argument("--events", required=True, help="events.csv")
    p.add_argument("--articles", required=True, help="articles.jsonl")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--negatives", type=int, help="negatives to sample (default: 27000/11902 per positive)")
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,val,test")
    p.add_argument("--fuzzy-threshold", type=float, default=0.9)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("build-vocab", help="word-level vocabulary from a training split")
    p.add_argument("--train", required=True, help="corpus.train.jsonl")
    p.add_argument("--size", type=int, default=30000, help="tokens kept besides PAD/UNK/CLS")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train-text", help="train the long-document text classifier")
    _add_train_flags(p)
    p.add_argument("--vocab", required=True)
    p.set_defaults(func=cmd_train_text)

    p = sub.add_parser("train-image", help="train the windowed-attention image classifier")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_image)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="JSONL split (text) or label manifest CSV (image)")
    p.add_argument("--vocab")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    for name, func, what in (("infer-text", cmd_infer_text, "one text per line"),
                             ("infer-image", cmd_infer_image, "one image path per line")):
        p = sub.add_parser(name, help=f"classify inputs ({what}) and emit JSONL")
        p.add_argument("--checkpoint", required=True)
        if name == "infer-text":
            p.add_argument("--vocab", required=True)
        p.add_argument("--input", default="-", help=f"{what}; '-' for stdin")
        p.add_argument("--output", help="JSONL destination (default stdout)")
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--manifest")
        p.add_argument("--seed", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("inspect-checkpoint", help="print a checkpoint's tensor table")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_inspect_checkpoint)
    parser._subparsers_action = sub
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if args.replay:
            if args.command:
                raise UsageError("--replay cannot be combined with a subcommand")
            recorded = _read_json(args.replay).get("argv")
            if not isinstance(recorded, list) or not recorded:
                raise DecodeError(f"{args.replay}: manifest has no recorded argv")
            return dispatch([str(a) for a in recorded])
        if not args.command:
            raise UsageError("a subcommand is required (see --help)")
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        args.seed = _resolve_seed(args)
        sub = parser._subparsers_action.choices[args.command]
        return args.func(args, sub)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProtestLensError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
