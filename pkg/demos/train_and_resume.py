"""
Training and resuming
=====================

Train the classifier on a small phantom corpus, watch the loss fall, then
demonstrate the resume guarantee: a run interrupted at epoch 3 and resumed
to epoch 6 produces exactly the same checkpoint bytes as an uninterrupted
6-epoch run.  Nothing here depends on wall-clock state; the whole
trajectory is a function of (seed, manifest, image bytes).
"""

import shutil
from pathlib import Path

from distrank import (
    ModelConfig,
    SeverityTable,
    TrainConfig,
    apply,
    build_manifest,
    derive_seed,
    phantom_image,
    resume,
    save_image,
    split_manifest,
    train,
)

out_dir = Path(__file__).parent / "out" / "training"
if out_dir.exists():
    shutil.rmtree(out_dir)
out_dir.mkdir(parents=True)

# a small corpus: 4 references x 20 classes at 32x32
refs = {f"ph-{i}": phantom_image(32, 32, derive_seed("train-demo", i)) for i in range(4)}
manifest = build_manifest(sorted(refs), 4, SeverityTable(), global_seed=7)
manifest = split_manifest(manifest, 0.75, derive_seed(7, "split"))
for rec in manifest.records:
    path = out_dir / "corpus" / rec.output_path
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(apply(rec.spec, refs[rec.reference_id]), path)
print(f"corpus: {len(manifest.for_split('train'))} train / {len(manifest.for_split('test'))} test")

config = TrainConfig(
    lr=1e-3,
    batch_size=10,
    epochs=6,
    seed=40,
    model=ModelConfig(stages=((1, 8), (1, 16)), input_size=32),
    checkpoint_every=3,
)

print("\nuninterrupted run:")
_, entries = train(config, manifest, out_dir / "corpus", out_dir / "straight",
                   on_epoch=lambda e: print(f"  epoch {e.epoch}: loss {e.loss:.4f}"))

print("\ninterrupted run (stops after epoch 3):")
short = TrainConfig(lr=config.lr, batch_size=config.batch_size, epochs=3,
                    seed=config.seed, model=config.model, checkpoint_every=3)
train(short, manifest, out_dir / "corpus", out_dir / "resumed",
      on_epoch=lambda e: print(f"  epoch {e.epoch}: loss {e.loss:.4f}"))

print("resuming from the epoch-3 checkpoint:")
resume(out_dir / "resumed" / "ckpt-0003.ckpt", config, manifest,
       out_dir / "corpus", out_dir / "resumed",
       on_epoch=lambda e: print(f"  epoch {e.epoch}: loss {e.loss:.4f}"))

a = (out_dir / "straight" / "ckpt-0006.ckpt").read_bytes()
b = (out_dir / "resumed" / "ckpt-0006.ckpt").read_bytes()
print(f"\nfinal checkpoints identical: {a == b} ({len(a)} bytes)")
assert a == b
