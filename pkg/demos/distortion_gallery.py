"""
Distortion gallery
==================

Render one procedural phantom, run it through all five distortion types at
all four severity levels, and save the results as a browsable directory of
PNGs.  The printed table shows PSNR against the clean reference: it should
fall as the level rises, for every type.
"""

from pathlib import Path

from distrank import (
    DISTORTION_ORDER,
    SeverityTable,
    apply,
    derive_seed,
    phantom_image,
    psnr,
    resolve_spec,
    save_image,
)

out_dir = Path(__file__).parent / "out" / "gallery"
out_dir.mkdir(parents=True, exist_ok=True)

# a 256x144 phantom: two-tone ramp, mottle, a few glossy blobs
ref = phantom_image(256, 144, seed=derive_seed("gallery", 0))
save_image(ref, out_dir / "reference.png")

table = SeverityTable()  # the default severity ladder

print(f"{'type':22s} " + " ".join(f"  L{level} dB" for level in (1, 2, 3, 4)))
for dtype in DISTORTION_ORDER:
    row = []
    for level in (1, 2, 3, 4):
        spec = resolve_spec(dtype, level, table, derive_seed("gallery", dtype.value, level))
        img = apply(spec, ref)
        save_image(img, out_dir / f"{dtype.value}_L{level}.png")
        row.append(psnr(ref, img))
    print(f"{dtype.value:22s} " + " ".join(f"{v:7.2f}" for v in row))

print(f"\n21 images written to {out_dir}")
