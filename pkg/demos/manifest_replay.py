"""
Manifest replay
===============

A manifest records every generated image as a fully resolved distortion
spec: type, level, seed, and all drawn parameters.  That makes the corpus a
pure function of the manifest plus the reference images; delete the PNGs
and they can be regenerated byte for byte.  This script builds a small
corpus, saves it, reloads the manifest from disk, re-renders every image,
and compares hashes.
"""

import hashlib
from pathlib import Path

from distrank import (
    Manifest,
    SeverityTable,
    apply,
    build_manifest,
    derive_seed,
    phantom_image,
    save_image,
    split_manifest,
)

out_dir = Path(__file__).parent / "out" / "replay"
out_dir.mkdir(parents=True, exist_ok=True)

# three references, one image per (class, reference): 60 records
refs = {f"ph-{i}": phantom_image(96, 96, derive_seed("replay", i)) for i in range(3)}
manifest = build_manifest(sorted(refs), 3, SeverityTable(), global_seed=2024)
manifest = split_manifest(manifest, 0.5, derive_seed(2024, "split"))

for rec in manifest.records:
    path = out_dir / rec.output_path
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(apply(rec.spec, refs[rec.reference_id]), path)
manifest.save(out_dir / "manifest.jsonl")
print(f"rendered {len(manifest.records)} images under {out_dir}")

# now forget everything and rebuild from the manifest file alone
reloaded = Manifest.load(out_dir / "manifest.jsonl")
scratch = out_dir / "_replay.png"
mismatches = 0
for rec in reloaded.records:
    save_image(apply(rec.spec, refs[rec.reference_id]), scratch)
    fresh = hashlib.sha256(scratch.read_bytes()).hexdigest()
    stored = hashlib.sha256((out_dir / rec.output_path).read_bytes()).hexdigest()
    if fresh != stored:
        mismatches += 1
scratch.unlink()

print(f"re-rendered {len(reloaded.records)} records from the reloaded manifest")
print(f"byte-exact matches: {len(reloaded.records) - mismatches}/{len(reloaded.records)}")
assert mismatches == 0, "replay must be bit-exact"

counts = reloaded.class_counts()
print(f"class counts: min {min(counts)}, max {max(counts)} (balanced by construction)")
print(f"train/test: {len(reloaded.for_split('train'))}/{len(reloaded.for_split('test'))}")
