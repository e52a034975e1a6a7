"""Dataset-backed training loop: mini-batches, epochs, checkpoints, CSV log.

Everything is keyed off the config seed: parameter init uses one stream, the
per-epoch shuffle another (derived from (seed, "shuffle", epoch)), so a run
is a pure function of (config, manifest, image bytes).  Because no RNG state
carries across epoch boundaries, a checkpoint that stores the Adam state and
epoch cursor resumes bitwise-identically to an uninterrupted run.

Images are decoded once, downscaled to the model input size by area
averaging, and kept in an in-memory cache; at desk scale the whole training
split fits comfortably.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imgcore import derive_seed, load_image, make_rng, resize_area
from .labels import Manifest
from .nn import (
    AdamState,
    CheckpointError,
    ModelConfig,
    ModelParams,
    adam_step,
    backprop,
    fingerprint,
    init_adam,
    init_params,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "TrainConfig",
    "TrainLogEntry",
    "TrainingError",
    "batch_iter",
    "train",
    "resume",
    "ImageStore",
]

# SeededRng stream ids (1..4 belong to the distortion generators)
SHUFFLE_STREAM = 5
INIT_STREAM = 6

LOG_NAME = "train_log.csv"
LOG_FIELDS = ("epoch", "loss", "train_acc", "seconds")


class TrainingError(RuntimeError):
    """Training diverged or was asked to do something inconsistent."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; defaults are the desk-scale recipe (paper scale: 300 epochs)."""

    lr: float = 1e-3
    batch_size: int = 10
    epochs: int = 30
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    checkpoint_every: int = 10

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1 or self.epochs < 1 or self.checkpoint_every < 1:
            raise ValueError("batch size, epochs, and checkpoint cadence must be >= 1")

    @property
    def input_size(self) -> int:
        return self.model.input_size


@dataclass(frozen=True)
class TrainLogEntry:
    epoch: int
    loss: float
    train_acc: float
    seconds: float

    def __post_init__(self):
        if not (math.isfinite(self.loss) and self.loss >= 0.0):
            raise ValueError(f"loss must be finite and non-negative, got {self.loss}")


class ImageStore:
    """Decode-once image access: path -> (3, s, s) float32, cached."""

    def __init__(self, image_root, input_size: int, cache: bool = True):
        self.root = Path(image_root)
        self.input_size = input_size
        self._cache = {} if cache else None

    def get(self, output_path: str) -> np.ndarray:
        if self._cache is not None and output_path in self._cache:
            return self._cache[output_path]
        img = load_image(self.root / output_path)
        img = resize_area(img, self.input_size, self.input_size)
        if self._cache is not None:
            self._cache[output_path] = img.data
        return img.data


def batch_iter(records, batch_size: int, epoch_seed: int, loader):
    """Yield (image batch, label batch) over a seeded shuffle of ``records``.

    Every record appears exactly once; the final short batch is emitted.
    ``loader`` maps a manifest record to a (3, s, s) float32 array.
    """
    records = list(records)
    if not records:
        raise ValueError("empty training split")
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    order = make_rng(epoch_seed, SHUFFLE_STREAM).permutation(len(records))
    for start in range(0, len(records), batch_size):
        chunk = [records[i] for i in order[start : start + batch_size]]
        images = np.stack([loader(rec) for rec in chunk])
        labels = np.array([rec.class_id for rec in chunk], dtype=np.int64)
        yield images, labels


def _write_log(out_dir: Path, entries, append: bool) -> None:
    path = out_dir / LOG_NAME
    mode = "a" if append and path.exists() else "w"
    with path.open(mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(LOG_FIELDS)
        for e in entries:
            writer.writerow([e.epoch, f"{e.loss:.6f}", f"{e.train_acc:.6f}", f"{e.seconds:.3f}"])


def _run_epochs(
    params: ModelParams,
    state: AdamState,
    start_epoch: int,
    config: TrainConfig,
    records,
    store: ImageStore,
    out_dir: Path,
    append_log: bool,
    on_epoch=None,
):
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    loader = lambda rec: store.get(rec.output_path)
    for epoch in range(start_epoch + 1, config.epochs + 1):
        t0 = time.perf_counter()
        loss_sum, batches, correct, seen = 0.0, 0, 0, 0
        epoch_seed = derive_seed(config.seed, "shuffle", epoch)
        for images, labels in batch_iter(records, config.batch_size, epoch_seed, loader):
            loss_out, grads = backprop(params, images, labels)
            if not math.isfinite(loss_out.loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            params, state = adam_step(params, grads, state)
            loss_sum += loss_out.loss
            batches += 1
            correct += int((loss_out.probs.argmax(axis=1) == labels).sum())
            seen += len(labels)
        entry = TrainLogEntry(
            epoch=epoch,
            loss=loss_sum / batches,
            train_acc=correct / seen,
            seconds=time.perf_counter() - t0,
        )
        entries.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
        if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
            save_checkpoint(out_dir / f"ckpt-{epoch:04d}.ckpt", params, adam=state, epoch=epoch)
    _write_log(out_dir, entries, append=append_log)
    return params, entries


def train(config: TrainConfig, manifest: Manifest, image_root, out_dir, on_epoch=None):
    """Train from scratch; returns (final params, log entries).

    Checkpoints land in ``out_dir`` as ckpt-NNNN.ckpt at the configured
    cadence (the final epoch is always written) along with train_log.csv.
    ``on_epoch``, when given, is called with each TrainLogEntry as it lands.
    """
    records = manifest.for_split("train")
    if not records:
        raise ValueError("manifest has no train split; split it before training")
    store = ImageStore(image_root, config.input_size)
    params = init_params(config.model, make_rng(config.seed, INIT_STREAM))
    state = init_adam(params, lr=config.lr)
    return _run_epochs(
        params, state, 0, config, records, store, Path(out_dir), append_log=False, on_epoch=on_epoch
    )


def resume(checkpoint_path, config: TrainConfig, manifest: Manifest, image_root, out_dir,
           fresh_optimizer: bool = False, on_epoch=None):
    """Continue a run from a checkpoint up to config.epochs.

    Restoring both the Adam state and the epoch cursor makes the continued
    trajectory bitwise-identical to an uninterrupted run.  A checkpoint
    without optimizer state is refused unless ``fresh_optimizer`` is set.
    """
    params, state, epoch = load_checkpoint(checkpoint_path)
    if params.fingerprint != fingerprint(config.model):
        raise CheckpointError(
            f"checkpoint architecture {params.fingerprint} does not match the configured model"
        )
    if state is None:
        if not fresh_optimizer:
            raise CheckpointError(
                "checkpoint has no optimizer state; pass fresh_optimizer to restart Adam"
            )
        state = init_adam(params, lr=config.lr)
    if epoch is None:
        raise CheckpointError("checkpoint has no epoch cursor; cannot resume")
    if epoch >= config.epochs:
        return params, []
    records = manifest.for_split("train")
    if not records:
        raise ValueError("manifest has no train split; split it before training")
    store = ImageStore(image_root, config.input_size)
    return _run_epochs(
        params, state, epoch, config, records, store, Path(out_dir), append_log=True,
        on_epoch=on_epoch,
    )
