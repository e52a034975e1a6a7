"""Class codec, manifest, and split tests."""

import json

import numpy as np
import pytest

from distrank.distort import DistortionType, SeverityTable, apply, phantom_image
from distrank.imgcore import derive_seed
from distrank.labels import (
    NUM_CLASSES,
    Manifest,
    ManifestError,
    ManifestRecord,
    build_manifest,
    decode_class,
    encode_class,
    split_manifest,
)

TABLE = SeverityTable()


# ---------------------------------------------------------------------------
# Class codec
# ---------------------------------------------------------------------------


def test_codec_corner_values():
    assert encode_class(DistortionType.DEFOCUS_BLUR, 1) == 0
    assert encode_class(DistortionType.UNEVEN_ILLUMINATION, 4) == 19
    assert encode_class(DistortionType.WHITE_NOISE, 2) == 9
    assert decode_class(0) == (DistortionType.DEFOCUS_BLUR, 1)
    assert decode_class(19) == (DistortionType.UNEVEN_ILLUMINATION, 4)
    assert decode_class(9) == (DistortionType.WHITE_NOISE, 2)


def test_codec_bijection_exhaustive():
    seen = set()
    for dtype in DistortionType:
        for level in (1, 2, 3, 4):
            cid = encode_class(dtype, level)
            assert 0 <= cid < NUM_CLASSES
            assert decode_class(cid) == (dtype, level)
            seen.add(cid)
    assert seen == set(range(NUM_CLASSES))


def test_codec_rejects_out_of_range():
    with pytest.raises(ValueError):
        decode_class(20)
    with pytest.raises(ValueError):
        decode_class(-1)
    with pytest.raises(ValueError):
        encode_class(DistortionType.SMOKE, 5)


# ---------------------------------------------------------------------------
# Manifest construction
# ---------------------------------------------------------------------------


def _refs(n):
    return [f"ref-{i:04d}" for i in range(n)]


def test_build_manifest_counts():
    m = build_manifest(_refs(5), 5, TABLE, 42)
    assert len(m.records) == 100
    assert m.class_counts() == [5] * NUM_CLASSES


def test_build_manifest_deterministic():
    a = build_manifest(_refs(4), 3, TABLE, 7)
    b = build_manifest(_refs(4), 3, TABLE, 7)
    assert a == b
    assert a.to_lines() == b.to_lines()


def test_build_manifest_record_seeds():
    m = build_manifest(_refs(2), 2, TABLE, 99)
    for rec in m.records:
        assert rec.spec.seed == derive_seed(99, rec.reference_id, rec.class_id)


def test_build_manifest_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_manifest(_refs(3), 4, TABLE, 1)
    with pytest.raises(ValueError):
        build_manifest(["a", "a", "b"], 2, TABLE, 1)
    with pytest.raises(ValueError):
        build_manifest(_refs(3), 0, TABLE, 1)


def test_record_class_consistency_enforced():
    m = build_manifest(_refs(1), 1, TABLE, 5)
    rec = m.records[0]
    with pytest.raises(ValueError):
        ManifestRecord(
            reference_id=rec.reference_id,
            spec=rec.spec,
            class_id=rec.class_id + 1,
            output_path=rec.output_path,
        )


def test_manifest_rejects_duplicate_paths():
    m = build_manifest(_refs(1), 1, TABLE, 5)
    rec = m.records[0]
    with pytest.raises(ManifestError):
        Manifest(global_seed=5, table=TABLE, records=(rec, rec))


# ---------------------------------------------------------------------------
# Split
# ---------------------------------------------------------------------------


def test_split_fraction_even():
    m = split_manifest(build_manifest(_refs(5), 5, TABLE, 11), 0.8, 3)
    for class_id in range(NUM_CLASSES):
        recs = [r for r in m.records if r.class_id == class_id]
        n_train = sum(r.split == "train" for r in recs)
        assert n_train == 4
        assert len(recs) - n_train == 1


def test_split_proportion_within_one_record():
    m = split_manifest(build_manifest(_refs(10), 10, TABLE, 11), 0.7, 3)
    for class_id in range(NUM_CLASSES):
        recs = [r for r in m.records if r.class_id == class_id]
        n_train = sum(r.split == "train" for r in recs)
        assert abs(n_train - 0.7 * len(recs)) < 1.0


def test_split_deterministic_and_seed_sensitive():
    base = build_manifest(_refs(8), 8, TABLE, 11)
    a = split_manifest(base, 0.75, 13)
    b = split_manifest(base, 0.75, 13)
    c = split_manifest(base, 0.75, 14)
    assert a == b
    assert [r.split for r in a.records] != [r.split for r in c.records]


def test_split_no_reference_in_both_splits_within_class():
    m = split_manifest(build_manifest(_refs(6), 6, TABLE, 2), 0.5, 9)
    for class_id in range(NUM_CLASSES):
        train = {r.reference_id for r in m.records if r.class_id == class_id and r.split == "train"}
        test = {r.reference_id for r in m.records if r.class_id == class_id and r.split == "test"}
        assert not (train & test)


def test_split_rejects_bad_fraction():
    m = build_manifest(_refs(2), 2, TABLE, 1)
    for f in (0.0, 1.0, -0.1, 1.7):
        with pytest.raises(ValueError):
            split_manifest(m, f, 1)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_manifest_save_load_roundtrip(tmp_path):
    m = split_manifest(build_manifest(_refs(3), 3, TABLE, 21), 0.8, 4)
    path = tmp_path / "manifest.jsonl"
    m.save(path)
    loaded = Manifest.load(path)
    assert loaded == m


def test_manifest_record_field_names():
    m = build_manifest(_refs(1), 1, TABLE, 21)
    lines = m.to_lines()
    header = json.loads(lines[0])
    assert set(header) == {"version", "global_seed", "severity_table"}
    record = json.loads(lines[1])
    assert set(record) == {
        "reference_id",
        "dtype",
        "level",
        "class_id",
        "seed",
        "params",
        "split",
        "output_path",
    }


def test_manifest_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text("not json\n", encoding="utf-8")
    with pytest.raises(ManifestError):
        Manifest.load(p)
    p.write_text('{"version": 99, "global_seed": 1, "severity_table": {}}\n', encoding="utf-8")
    with pytest.raises(ManifestError):
        Manifest.load(p)
    good = build_manifest(_refs(1), 1, TABLE, 1).to_lines()
    p.write_text(good[0] + "\n" + '{"reference_id": "x"}' + "\n", encoding="utf-8")
    with pytest.raises(ManifestError):
        Manifest.load(p)


def test_manifest_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        Manifest.load(tmp_path / "nope.jsonl")


def test_loaded_specs_replay_bit_exactly(tmp_path):
    m = build_manifest(_refs(2), 2, TABLE, 31)
    path = tmp_path / "m.jsonl"
    m.save(path)
    loaded = Manifest.load(path)
    img = phantom_image(48, 48, 7)
    for orig, back in zip(m.records, loaded.records):
        assert np.array_equal(apply(orig.spec, img).data, apply(back.spec, img).data)
