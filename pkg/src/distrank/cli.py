"""Command-line entry point: generate, train, evaluate, predict.

Exit codes: 0 success, 1 usage error, 2 data error (missing or corrupt
inputs, unwritable outputs), 3 internal error.  Every subcommand validates
its inputs fully before touching the filesystem, and every result is a pure
function of the arguments plus input bytes, so reruns are byte-identical.

Optional ``--config`` files are JSON in the same schema family as the
manifest header: top-level keys "severity_table", "train", "model", and
"generate", each optional.  Explicit command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .distort import SeverityTable, apply, phantom_image, to_grayscale
from .evaluate import evaluate, predict
from .imgcore import (
    CorruptImageError,
    ImageFormatError,
    derive_seed,
    load_image,
    save_image,
)
from .labels import Manifest, ManifestError, build_manifest, decode_class, split_manifest
from .nn import CheckpointError, ModelConfig, load_checkpoint
from .train import TrainConfig, resume, train

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

REF_SUFFIXES = (".png", ".ppm")
CONFIG_KEYS = ("severity_table", "train", "model", "generate")


class UsageError(Exception):
    """Flag combination argparse cannot catch; maps to exit code 1."""


class DataError(Exception):
    """Bad or missing input data; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Flag value parsers (argparse raises usage errors for these)
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value}")
    return value


def _size(text: str) -> tuple:
    """Image size: either one side for a square or WIDTHxHEIGHT."""
    parts = text.lower().split("x")
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must be N or WxH, got {text!r}")
    if len(dims) == 1:
        dims = [dims[0], dims[0]]
    if len(dims) != 2 or min(dims) < 8:
        raise argparse.ArgumentTypeError(f"size must be N or WxH with sides >= 8, got {text!r}")
    return tuple(dims)


def _stages(text: str) -> tuple:
    """Stage layout like 2x16,2x32,2x64 -> ((2, 16), (2, 32), (2, 64))."""
    stages = []
    for part in text.split(","):
        pieces = part.lower().split("x")
        try:
            blocks, width = (int(p) for p in pieces)
        except ValueError:
            raise argparse.ArgumentTypeError(f"stages must look like 2x16,2x32, got {text!r}")
        stages.append((blocks, width))
    return tuple(stages)


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such config file: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"unreadable config file {p}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError(f"config file {p} must hold a JSON object")
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if unknown:
        raise DataError(f"unknown config keys {unknown}; expected a subset of {list(CONFIG_KEYS)}")
    for key in CONFIG_KEYS:
        if key in cfg and not isinstance(cfg[key], dict):
            raise DataError(f"config key {key!r} must hold an object")
    return cfg


def _severity_table(cfg: dict) -> SeverityTable:
    if "severity_table" not in cfg:
        return SeverityTable()
    try:
        return SeverityTable.from_dict(cfg["severity_table"])
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad severity_table in config: {exc}") from exc


def _pick(flag_value, section: dict, key: str, default):
    """Explicit flag > config file entry > built-in default."""
    if flag_value is not None:
        return flag_value
    if key in section:
        return section[key]
    return default


def _model_config(args, cfg: dict) -> ModelConfig:
    section = cfg.get("model", {})
    stages = _pick(args.stages, section, "stages", ModelConfig().stages)
    stages = tuple(tuple(s) for s in stages)
    input_size = _pick(args.input_size, section, "input_size", ModelConfig().input_size)
    try:
        return ModelConfig(stages=stages, input_size=int(input_size))
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad model configuration: {exc}") from exc


def _train_config(args, cfg: dict) -> TrainConfig:
    section = cfg.get("train", {})
    try:
        return TrainConfig(
            lr=float(_pick(args.lr, section, "lr", 1e-3)),
            batch_size=int(_pick(args.batch_size, section, "batch_size", 10)),
            epochs=int(_pick(args.epochs, section, "epochs", 30)),
            seed=int(_pick(args.seed, section, "seed", 0)),
            model=_model_config(args, cfg),
            checkpoint_every=int(_pick(args.checkpoint_every, section, "checkpoint_every", 10)),
        )
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad training configuration: {exc}") from exc


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def _reference_images(args, cfg_gen: dict, seed: int):
    """(ordered ref ids, id -> ImageF32, meta dict); everything stays in memory."""
    if args.phantom is not None:
        width, height = _pick(args.size, cfg_gen, "size", (64, 64))
        ids = [f"ph-{i:04d}" for i in range(args.phantom)]
        images = {
            rid: phantom_image(width, height, derive_seed(seed, "phantom", rid)) for rid in ids
        }
        meta = {"source": "phantom", "phantoms": args.phantom, "size": [width, height]}
        return ids, images, meta

    refs_dir = Path(args.refs)
    if not refs_dir.is_dir():
        raise DataError(f"no such references directory: {refs_dir}")
    files = sorted(p for p in refs_dir.iterdir() if p.suffix.lower() in REF_SUFFIXES)
    if not files:
        raise DataError(f"no .png or .ppm references found in {refs_dir}")
    stems = [p.stem for p in files]
    if len(set(stems)) != len(stems):
        raise DataError(f"reference file names in {refs_dir} collide after dropping suffixes")
    images = {p.stem: load_image(p) for p in files}
    return stems, images, {"source": "references", "refs_dir": str(args.refs)}


def cmd_generate(args) -> int:
    if args.refs is not None and args.size is not None:
        raise UsageError("--size applies only to --phantom references")
    cfg = _load_config(args.config)
    cfg_gen = cfg.get("generate", {})
    seed = int(_pick(args.seed, cfg_gen, "seed", 0))
    fraction = float(_pick(args.train_fraction, cfg_gen, "train_fraction", 0.8))
    table = _severity_table(cfg)

    ref_ids, ref_images, meta = _reference_images(args, cfg_gen, seed)
    count = int(_pick(args.count, cfg_gen, "count", len(ref_ids)))
    if count > len(ref_ids):
        raise DataError(
            f"requested {count} references per class but only {len(ref_ids)} available"
        )

    plate_path = None
    if args.smoke_plate is not None:
        plate_path = Path(args.smoke_plate)
        if not plate_path.is_file():
            raise DataError(f"no such smoke plate: {plate_path}")
        to_grayscale(load_image(plate_path))  # validate before any writes
        plate_path = str(plate_path)

    manifest = build_manifest(ref_ids, count, table, seed, plate_path=plate_path)
    manifest = split_manifest(manifest, fraction, derive_seed(seed, "split"))
    meta["train_fraction"] = fraction
    manifest = replace(manifest, meta=meta)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if meta["source"] == "phantom":
        (out / "refs").mkdir(exist_ok=True)
        for rid in ref_ids:
            save_image(ref_images[rid], out / "refs" / f"{rid}.png")
    for rec in manifest.records:
        target = out / rec.output_path
        target.parent.mkdir(parents=True, exist_ok=True)
        save_image(apply(rec.spec, ref_images[rec.reference_id]), target)
    manifest.save(out / "manifest.jsonl")

    n_train = len(manifest.for_split("train"))
    n_test = len(manifest.for_split("test"))
    print(f"wrote {len(manifest.records)} images ({n_train} train / {n_test} test) under {out}")
    print(f"manifest: {out / 'manifest.jsonl'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    if args.fresh_optimizer and args.resume is None:
        raise UsageError("--fresh-optimizer only makes sense with --resume")
    cfg = _load_config(args.config)
    tc = _train_config(args, cfg)
    manifest = Manifest.load(args.manifest)
    images = Path(args.images)
    if not images.is_dir():
        raise DataError(f"no such images directory: {images}")

    def show(entry):
        print(
            f"epoch {entry.epoch:>4}/{tc.epochs}  loss {entry.loss:.4f}  "
            f"acc {entry.train_acc:.4f}  ({entry.seconds:.1f}s)",
            flush=True,
        )

    out = Path(args.out)
    if args.resume is not None:
        _, entries = resume(
            args.resume, tc, manifest, images, out,
            fresh_optimizer=args.fresh_optimizer, on_epoch=show,
        )
        if not entries:
            print(f"checkpoint already covers {tc.epochs} epochs; nothing to do")
            return EXIT_OK
    else:
        train(tc, manifest, images, out, on_epoch=show)
    print(f"final checkpoint: {out / f'ckpt-{tc.epochs:04d}.ckpt'}")
    print(f"log: {out / 'train_log.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    manifest = Manifest.load(args.manifest)
    images = Path(args.images)
    if not images.is_dir():
        raise DataError(f"no such images directory: {images}")
    params, _, _ = load_checkpoint(args.checkpoint)

    report = evaluate(params, manifest, images)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out / "report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "confusion.csv").write_text(report.confusion_csv(), encoding="utf-8")
    sys.stdout.write(report.to_text())
    print(f"reports written under {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def cmd_predict(args) -> int:
    params, _, _ = load_checkpoint(args.checkpoint)
    image = load_image(args.image)
    class_id, probs = predict(params, image)
    dtype, level = decode_class(class_id)
    if args.json:
        print(
            json.dumps(
                {
                    "type": dtype.value,
                    "level": level,
                    "class_id": class_id,
                    "confidence": float(probs[class_id]),
                    "probabilities": [float(p) for p in probs],
                },
                sort_keys=True,
            )
        )
    else:
        print(f"{dtype.value} {level} {probs[class_id]:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="distrank",
        description="Synthesize distorted image corpora and rank distortion severity.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="render a distorted corpus plus its manifest")
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument("--phantom", type=_positive_int, metavar="N",
                        help="synthesize N procedural reference images")
    source.add_argument("--refs", metavar="DIR", help="directory of reference .png/.ppm images")
    gen.add_argument("--out", required=True, metavar="DIR", help="output corpus directory")
    gen.add_argument("--count", type=_positive_int, metavar="N",
                     help="references used per class (default: all)")
    gen.add_argument("--size", type=_size, metavar="N|WxH",
                     help="phantom reference size (default: 64)")
    gen.add_argument("--seed", type=_seed, metavar="S", help="global corpus seed (default: 0)")
    gen.add_argument("--train-fraction", type=_fraction, metavar="F",
                     help="per-class train share (default: 0.8)")
    gen.add_argument("--smoke-plate", metavar="PATH",
                     help="use this grayscale image as the smoke plate for every smoke record")
    gen.add_argument("--config", metavar="FILE", help="JSON overrides (severity_table, generate)")
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="train the classifier on a generated corpus")
    tr.add_argument("--manifest", required=True, metavar="FILE")
    tr.add_argument("--images", required=True, metavar="DIR", help="corpus root (holds images/)")
    tr.add_argument("--out", required=True, metavar="DIR", help="checkpoint + log directory")
    tr.add_argument("--epochs", type=_positive_int, metavar="N")
    tr.add_argument("--lr", type=_positive_float, metavar="F")
    tr.add_argument("--batch-size", type=_positive_int, metavar="N")
    tr.add_argument("--seed", type=_seed, metavar="S")
    tr.add_argument("--checkpoint-every", type=_positive_int, metavar="N")
    tr.add_argument("--stages", type=_stages, metavar="SPEC", help="e.g. 2x16,2x32,2x64")
    tr.add_argument("--input-size", type=_positive_int, metavar="N")
    tr.add_argument("--resume", metavar="CKPT", help="continue from this checkpoint")
    tr.add_argument("--fresh-optimizer", action="store_true",
                    help="with --resume: restart Adam when the checkpoint lacks optimizer state")
    tr.add_argument("--config", metavar="FILE", help="JSON overrides (train, model)")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="score a checkpoint on the test split")
    ev.add_argument("--manifest", required=True, metavar="FILE")
    ev.add_argument("--images", required=True, metavar="DIR")
    ev.add_argument("--checkpoint", required=True, metavar="CKPT")
    ev.add_argument("--out", required=True, metavar="DIR", help="report directory")
    ev.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("predict", help="classify one image")
    pr.add_argument("--checkpoint", required=True, metavar="CKPT")
    pr.add_argument("--image", required=True, metavar="PATH")
    pr.add_argument("--json", action="store_true", help="emit machine-readable output")
    pr.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"distrank {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, ManifestError, CheckpointError,
            ImageFormatError, CorruptImageError) as exc:
        print(f"distrank {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"distrank {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # anything else is a bug, not bad input
        print(f"distrank {args.subcommand}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
