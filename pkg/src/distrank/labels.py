"""Class codec, corpus manifests, and deterministic train/test splitting.

Each (distortion type, severity level) pair is one class in a 20-way
label-powerset scheme: class_id = type_index*4 + (level-1), with types
ordered defocus blur, motion blur, white noise, smoke, uneven illumination
and severity as the fast-varying index.  A manifest is the complete ledger
of a generated corpus; because every record embeds a fully resolved
:class:`~distrank.distort.DistortionSpec`, the corpus can be regenerated
bit-exactly from the manifest alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .distort import DISTORTION_ORDER, DistortionSpec, DistortionType, SeverityTable, resolve_spec
from .imgcore import derive_seed

__all__ = [
    "NUM_CLASSES",
    "MANIFEST_VERSION",
    "ManifestError",
    "ManifestRecord",
    "Manifest",
    "encode_class",
    "decode_class",
    "build_manifest",
    "split_manifest",
]

NUM_CLASSES = 20
MANIFEST_VERSION = 1

_TYPE_INDEX = {dtype: i for i, dtype in enumerate(DISTORTION_ORDER)}


class ManifestError(ValueError):
    """A manifest file or record that cannot be interpreted."""


def encode_class(dtype: DistortionType, level: int) -> int:
    """Map (type, level) to its class id; (defocus, 1) -> 0 ... (illum, 4) -> 19."""
    if level not in (1, 2, 3, 4):
        raise ValueError(f"severity level must be 1..4, got {level!r}")
    return _TYPE_INDEX[dtype] * 4 + (level - 1)


def decode_class(class_id: int) -> tuple:
    """Inverse of :func:`encode_class`."""
    if not 0 <= class_id < NUM_CLASSES:
        raise ValueError(f"class id must be in [0, {NUM_CLASSES}), got {class_id!r}")
    return DISTORTION_ORDER[class_id // 4], class_id % 4 + 1


@dataclass(frozen=True)
class ManifestRecord:
    """One generated image: its source reference, resolved spec, and split."""

    reference_id: str
    spec: DistortionSpec
    class_id: int
    output_path: str
    split: str | None = None

    def __post_init__(self):
        if self.class_id != encode_class(self.spec.dtype, self.spec.level):
            raise ValueError(
                f"class id {self.class_id} does not encode ({self.spec.dtype}, {self.spec.level})"
            )
        if self.split not in (None, "train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")

    def to_json_dict(self) -> dict:
        return {
            "reference_id": self.reference_id,
            "dtype": self.spec.dtype.value,
            "level": self.spec.level,
            "class_id": self.class_id,
            "seed": self.spec.seed,
            "params": dict(self.spec.params),
            "split": self.split,
            "output_path": self.output_path,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ManifestRecord":
        try:
            spec = DistortionSpec.from_json_dict(
                {"dtype": d["dtype"], "level": d["level"], "seed": d["seed"], "params": d["params"]}
            )
            return cls(
                reference_id=str(d["reference_id"]),
                spec=spec,
                class_id=int(d["class_id"]),
                output_path=str(d["output_path"]),
                split=d["split"],
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ManifestError(f"bad manifest record: {exc}") from exc


@dataclass(frozen=True)
class Manifest:
    """Header (seed + severity table) plus the full record list of a corpus."""

    global_seed: int
    table: SeverityTable
    records: tuple
    version: int = MANIFEST_VERSION
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        paths = [r.output_path for r in self.records]
        if len(set(paths)) != len(paths):
            raise ManifestError("duplicate output paths in manifest")

    def for_split(self, split: str) -> tuple:
        return tuple(r for r in self.records if r.split == split)

    def class_counts(self) -> list:
        counts = [0] * NUM_CLASSES
        for r in self.records:
            counts[r.class_id] += 1
        return counts

    def to_lines(self) -> list:
        header = {
            "version": self.version,
            "global_seed": self.global_seed,
            "severity_table": self.table.to_dict(),
        }
        if self.meta:
            header["meta"] = self.meta
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(json.dumps(r.to_json_dict(), sort_keys=True) for r in self.records)
        return lines

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")

    @classmethod
    def from_lines(cls, lines) -> "Manifest":
        rows = [ln for ln in lines if ln.strip()]
        if not rows:
            raise ManifestError("empty manifest")
        try:
            header = json.loads(rows[0])
        except json.JSONDecodeError as exc:
            raise ManifestError(f"bad manifest header: {exc}") from exc
        if not isinstance(header, dict) or "version" not in header:
            raise ManifestError("manifest header missing version")
        if header["version"] != MANIFEST_VERSION:
            raise ManifestError(f"unsupported manifest version {header['version']!r}")
        try:
            table = SeverityTable.from_dict(header["severity_table"])
            global_seed = int(header["global_seed"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ManifestError(f"bad manifest header: {exc}") from exc
        records = []
        for i, ln in enumerate(rows[1:], start=2):
            try:
                d = json.loads(ln)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"bad manifest record on line {i}: {exc}") from exc
            records.append(ManifestRecord.from_json_dict(d))
        return cls(
            global_seed=global_seed,
            table=table,
            records=tuple(records),
            meta=header.get("meta", {}),
        )

    @classmethod
    def load(cls, path) -> "Manifest":
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"no such manifest: {p}")
        return cls.from_lines(p.read_text(encoding="utf-8").splitlines())


def build_manifest(
    reference_ids,
    per_class_count: int,
    table: SeverityTable,
    global_seed: int,
    plate_path: str | None = None,
) -> Manifest:
    """Resolve one record per (class, reference) for the first N references.

    Every class draws the same leading slice of ``reference_ids``; the
    per-record seed is derived from (global_seed, reference_id, class_id),
    so records are independent of list order and of each other.
    """
    refs = [str(r) for r in reference_ids]
    if len(set(refs)) != len(refs):
        raise ValueError("reference ids must be unique")
    if not 0 < per_class_count <= len(refs):
        raise ValueError(
            f"per-class count must be in [1, {len(refs)}], got {per_class_count}"
        )
    chosen = refs[:per_class_count]
    records = []
    for class_id in range(NUM_CLASSES):
        dtype, level = decode_class(class_id)
        for ref_id in chosen:
            seed = derive_seed(global_seed, ref_id, class_id)
            spec = resolve_spec(
                dtype,
                level,
                table,
                seed,
                plate_path=plate_path if dtype is DistortionType.SMOKE else None,
            )
            records.append(
                ManifestRecord(
                    reference_id=ref_id,
                    spec=spec,
                    class_id=class_id,
                    output_path=f"images/c{class_id:02d}/{ref_id}.png",
                )
            )
    return Manifest(global_seed=global_seed, table=table, records=tuple(records))


def split_manifest(m: Manifest, train_fraction: float, seed: int) -> Manifest:
    """Assign train/test per class, keyed by reference id hashes.

    Each class contributes round(train_fraction * n) records to train (half
    rounds up).  Within a class every reference occurs at most once, so a
    reference can never land in both splits of the same class.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must lie in (0, 1), got {train_fraction}")
    assignment = {}
    by_class = {}
    for idx, rec in enumerate(m.records):
        by_class.setdefault(rec.class_id, []).append(idx)
    for class_id, indices in by_class.items():
        n_train = int(train_fraction * len(indices) + 0.5)
        ordered = sorted(
            indices,
            key=lambda i: (derive_seed(seed, class_id, m.records[i].reference_id), m.records[i].reference_id),
        )
        for pos, idx in enumerate(ordered):
            assignment[idx] = "train" if pos < n_train else "test"
    records = tuple(replace(rec, split=assignment[i]) for i, rec in enumerate(m.records))
    return replace(m, records=records)
