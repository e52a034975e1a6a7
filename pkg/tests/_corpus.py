"""Tiny on-disk corpora shared by the train / evaluate / cli tests."""

from pathlib import Path

from distrank.distort import SeverityTable, apply, phantom_image
from distrank.imgcore import derive_seed, save_image
from distrank.labels import build_manifest, split_manifest


def make_corpus(root, n_refs=2, size=16, seed=5, train_fraction=0.5, table=None):
    """Generate a complete phantom corpus under ``root``; returns the manifest."""
    root = Path(root)
    table = table or SeverityTable()
    refs = [f"ph-{i:03d}" for i in range(n_refs)]
    manifest = build_manifest(refs, n_refs, table, seed)
    manifest = split_manifest(manifest, train_fraction, derive_seed(seed, "split"))
    for rec in manifest.records:
        ref = phantom_image(size, size, derive_seed(seed, "ref", rec.reference_id))
        out = apply(rec.spec, ref)
        path = root / rec.output_path
        path.parent.mkdir(parents=True, exist_ok=True)
        save_image(out, path)
    manifest.save(root / "manifest.jsonl")
    return manifest
