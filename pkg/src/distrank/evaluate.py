"""Test-split evaluation: 20-class accuracy, rank correlation, diagnostics.

Two headline numbers: exact-class accuracy over the 20-way label powerset,
and the Spearman rank-order correlation between predicted and true severity
levels.  With only four discrete levels ties always occur, so SROCC uses
average ranks; a constant prediction vector has no defined rank correlation
and is surfaced as an explicit degenerate flag, never as a silent zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distort import DISTORTION_ORDER, DistortionType
from .imgcore import ImageF32, load_image, resize_area
from .labels import NUM_CLASSES, Manifest, decode_class
from .nn import ModelParams, forward

__all__ = [
    "RankPair",
    "EvalReport",
    "DegenerateRankingError",
    "predict",
    "accuracy",
    "confusion_matrix",
    "type_accuracy",
    "srocc",
    "evaluate",
    "psnr",
]


class DegenerateRankingError(ValueError):
    """Rank correlation is undefined: one side has zero variance."""


@dataclass(frozen=True)
class RankPair:
    """One (predicted level, true level) observation, both in 1..4."""

    predicted: int
    true: int

    def __post_init__(self):
        if self.predicted not in (1, 2, 3, 4) or self.true not in (1, 2, 3, 4):
            raise ValueError(f"levels must be in 1..4, got ({self.predicted}, {self.true})")


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def accuracy(predictions, truths) -> float:
    """Exact-match fraction."""
    predictions, truths = list(predictions), list(truths)
    if len(predictions) != len(truths):
        raise ValueError(f"length mismatch: {len(predictions)} vs {len(truths)}")
    if not predictions:
        raise ValueError("cannot compute accuracy of an empty set")
    return sum(p == t for p, t in zip(predictions, truths)) / len(predictions)


def confusion_matrix(predictions, truths) -> np.ndarray:
    """Counts indexed [true, predicted]; trace/total equals accuracy."""
    mat = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for p, t in zip(predictions, truths, strict=True):
        if not (0 <= p < NUM_CLASSES and 0 <= t < NUM_CLASSES):
            raise ValueError(f"label out of range: ({t}, {p})")
        mat[t, p] += 1
    return mat


def type_accuracy(predictions, truths) -> float:
    """Match fraction after collapsing each class to its distortion type."""
    predictions, truths = list(predictions), list(truths)
    if len(predictions) != len(truths):
        raise ValueError(f"length mismatch: {len(predictions)} vs {len(truths)}")
    if not predictions:
        raise ValueError("cannot compute accuracy of an empty set")
    hits = sum(decode_class(p)[0] is decode_class(t)[0] for p, t in zip(predictions, truths))
    return hits / len(predictions)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def srocc(pairs) -> float:
    """Spearman rank correlation of predicted vs true levels (average ranks).

    Raises :class:`DegenerateRankingError` when either side is constant.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError(f"need at least 2 pairs, got {len(pairs)}")
    x = np.array([p.predicted for p in pairs], dtype=np.float64)
    y = np.array([p.true for p in pairs], dtype=np.float64)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateRankingError("constant levels on one side; rank correlation undefined")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    return float((dx * dy).sum() / math.sqrt((dx * dx).sum() * (dy * dy).sum()))


def psnr(a: ImageF32, b: ImageF32) -> float:
    """10*log10(1/MSE) on unit-interval images, capped at 99 dB."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"size mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0.0:
        return 99.0
    return min(99.0, 10.0 * math.log10(1.0 / mse))


# ---------------------------------------------------------------------------
# Model-backed prediction and the full report
# ---------------------------------------------------------------------------


def predict(params: ModelParams, img: ImageF32):
    """(class_id, probability vector) for one image; ties go to the lower id."""
    size = params.config.input_size
    img = resize_area(img, size, size)
    logits = forward(params, img.data[None].astype(np.float32))[0]
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    return int(np.argmax(logits)), p


@dataclass(frozen=True)
class EvalReport:
    """All evaluation outputs for one (checkpoint, test split) pair."""

    overall_accuracy: float
    type_accuracy: float
    per_class_accuracy: tuple
    confusion: np.ndarray = field(repr=False)
    srocc_overall: float | None
    srocc_per_type: dict
    sample_count: int
    degenerate_srocc: bool

    def __post_init__(self):
        if self.confusion.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ValueError(f"confusion must be {NUM_CLASSES}x{NUM_CLASSES}")
        if int(self.confusion.sum()) != self.sample_count:
            raise ValueError("confusion total does not match the sample count")
        if not (0.0 <= self.overall_accuracy <= 1.0 and 0.0 <= self.type_accuracy <= 1.0):
            raise ValueError("accuracies must lie in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "overall_accuracy": self.overall_accuracy,
            "type_accuracy": self.type_accuracy,
            "per_class_accuracy": list(self.per_class_accuracy),
            "srocc_overall": self.srocc_overall,
            "srocc_per_type": {d.value: v for d, v in self.srocc_per_type.items()},
            "degenerate_srocc": self.degenerate_srocc,
            "confusion": self.confusion.tolist(),
        }

    def to_text(self) -> str:
        lines = [
            f"samples            {self.sample_count}",
            f"accuracy (20-way)  {self.overall_accuracy:.4f}",
            f"type accuracy      {self.type_accuracy:.4f}",
            f"srocc (pooled)     "
            + ("undefined (degenerate)" if self.srocc_overall is None else f"{self.srocc_overall:.4f}"),
            "",
            "per-type srocc:",
        ]
        for dtype in DISTORTION_ORDER:
            v = self.srocc_per_type.get(dtype)
            lines.append(f"  {dtype.value:22s} " + ("undefined" if v is None else f"{v:.4f}"))
        lines.append("")
        lines.append("per-class accuracy:")
        for class_id, acc in enumerate(self.per_class_accuracy):
            dtype, level = decode_class(class_id)
            shown = "  n/a " if acc is None else f"{acc:.3f}"
            lines.append(f"  [{class_id:2d}] {dtype.value:22s} L{level}  {shown}")
        return "\n".join(lines) + "\n"

    def confusion_csv(self) -> str:
        header = "true\\pred," + ",".join(str(i) for i in range(NUM_CLASSES))
        rows = [header]
        for t in range(NUM_CLASSES):
            rows.append(str(t) + "," + ",".join(str(int(v)) for v in self.confusion[t]))
        return "\n".join(rows) + "\n"


def evaluate(params, manifest: Manifest, image_root, predict_fn=None) -> EvalReport:
    """Run prediction over the test split and assemble the report.

    ``predict_fn`` (record, image) -> class_id replaces the model when given,
    which lets tests plug in oracles; otherwise :func:`predict` with
    ``params`` is used.  Reads images, never writes anything.
    """
    records = manifest.for_split("test")
    if not records:
        raise ValueError("manifest has no test split")
    root = Path(image_root)
    preds, truths = [], []
    for rec in records:
        img = load_image(root / rec.output_path)
        if predict_fn is not None:
            cls = int(predict_fn(rec, img))
        else:
            cls, _ = predict(params, img)
        preds.append(cls)
        truths.append(rec.class_id)

    conf = confusion_matrix(preds, truths)
    per_class = []
    for class_id in range(NUM_CLASSES):
        total = int(conf[class_id].sum())
        per_class.append(None if total == 0 else int(conf[class_id, class_id]) / total)

    pairs = [RankPair(decode_class(p)[1], decode_class(t)[1]) for p, t in zip(preds, truths)]
    degenerate = False
    try:
        pooled = srocc(pairs)
    except DegenerateRankingError:
        pooled = None
        degenerate = True
    per_type = {}
    for dtype in DISTORTION_ORDER:
        sub = [pair for pair, t in zip(pairs, truths) if decode_class(t)[0] is dtype]
        try:
            per_type[dtype] = srocc(sub) if len(sub) >= 2 else None
        except DegenerateRankingError:
            per_type[dtype] = None
            degenerate = True

    return EvalReport(
        overall_accuracy=accuracy(preds, truths),
        type_accuracy=type_accuracy(preds, truths),
        per_class_accuracy=tuple(per_class),
        confusion=conf,
        srocc_overall=pooled,
        srocc_per_type=per_type,
        sample_count=len(records),
        degenerate_srocc=degenerate,
    )
