"""The five distortion generators, each at four severity levels.

Every generator comes in two flavors: an interactive form that draws its
random parameters from a caller-supplied :class:`SeededRng` and returns them,
and a replay form (:func:`resolve_spec` + :func:`apply`) where all randomness
is resolved up front into a :class:`DistortionSpec` so that applying the spec
is a pure function.  A corpus described by specs can therefore be regenerated
bit-exactly.

Severity rank runs 1 (mildest) to 4 (worst); the scalar that controls each
distortion moves strictly monotonically across ranks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .imgcore import ImageF32, Kernel2D, SeededRng, convolve2d, derive_seed, load_image, make_rng

__all__ = [
    "DistortionType",
    "LEVELS",
    "SeverityTable",
    "DistortionSpec",
    "gaussian_kernel",
    "motion_kernel",
    "illumination_mask",
    "synth_smoke_plate",
    "screen_blend",
    "to_grayscale",
    "apply_defocus_blur",
    "apply_motion_blur",
    "apply_awgn",
    "apply_uneven_illumination",
    "apply_smoke",
    "resolve_spec",
    "apply",
    "phantom_image",
]


class DistortionType(Enum):
    """The five distortion categories, in the fixed class-codec order."""

    DEFOCUS_BLUR = "defocus_blur"
    MOTION_BLUR = "motion_blur"
    WHITE_NOISE = "white_noise"
    SMOKE = "smoke"
    UNEVEN_ILLUMINATION = "uneven_illumination"


DISTORTION_ORDER = tuple(DistortionType)
LEVELS = (1, 2, 3, 4)

# SeededRng stream ids, one per independent random purpose.
PARAM_STREAM = 1
NOISE_STREAM = 2
PLATE_STREAM = 3
PHANTOM_STREAM = 4


def _check_level(level: int) -> int:
    if level not in LEVELS:
        raise ValueError(f"severity level must be in {LEVELS}, got {level!r}")
    return int(level)


@dataclass(frozen=True)
class SeverityTable:
    """Per-type severity parameters, one value per rank 1..4.

    Blur sigma, motion length, noise variance, and smoke opacity increase
    with rank; the illumination bright-region radius and its brightness
    floor shrink with rank (smaller, harsher spotlight).
    """

    defocus_sigma: tuple = (1.0, 2.0, 4.0, 8.0)
    motion_length: tuple = (5.0, 10.0, 20.0, 40.0)
    noise_variance: tuple = (0.001, 0.004, 0.012, 0.030)
    smoke_opacity: tuple = (0.25, 0.45, 0.7, 0.9)
    illum_radius_frac: tuple = (0.45, 0.35, 0.25, 0.18)
    illum_floor: tuple = (0.7, 0.5, 0.35, 0.2)

    def __post_init__(self):
        rows = {
            "defocus_sigma": (self.defocus_sigma, +1),
            "motion_length": (self.motion_length, +1),
            "noise_variance": (self.noise_variance, +1),
            "smoke_opacity": (self.smoke_opacity, +1),
            "illum_radius_frac": (self.illum_radius_frac, -1),
            "illum_floor": (self.illum_floor, -1),
        }
        for name, (vals, direction) in rows.items():
            if len(vals) != len(LEVELS):
                raise ValueError(f"{name} needs {len(LEVELS)} entries, got {len(vals)}")
            diffs = np.diff(np.asarray(vals, dtype=float)) * direction
            if not np.all(diffs > 0):
                raise ValueError(f"{name} must be strictly monotone across levels: {vals}")
        if min(self.defocus_sigma) <= 0 or min(self.motion_length) < 1:
            raise ValueError("blur parameters out of range")
        if min(self.noise_variance) <= 0:
            raise ValueError("noise variance must be positive")
        if not (0 < min(self.smoke_opacity) <= max(self.smoke_opacity) <= 1):
            raise ValueError("smoke opacity must lie in (0, 1]")
        if not (0 < min(self.illum_floor) <= max(self.illum_floor) < 1):
            raise ValueError("illumination floor must lie in (0, 1)")
        if min(self.illum_radius_frac) <= 0:
            raise ValueError("illumination radius fraction must be positive")

    def to_dict(self) -> dict:
        return {
            "defocus_sigma": list(self.defocus_sigma),
            "motion_length": list(self.motion_length),
            "noise_variance": list(self.noise_variance),
            "smoke_opacity": list(self.smoke_opacity),
            "illum_radius_frac": list(self.illum_radius_frac),
            "illum_floor": list(self.illum_floor),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeverityTable":
        kwargs = {f: tuple(d[f]) for f in cls.__dataclass_fields__ if f in d}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown severity table fields: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class DistortionSpec:
    """A fully resolved distortion: applying it to an image is deterministic.

    ``params`` holds every per-image decision (blur sigma, motion angle,
    noise seed, mask placement, plate seed...), so nothing is drawn at
    application time that is not derived from the recorded values.
    """

    dtype: DistortionType
    level: int
    seed: int
    params: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "dtype": self.dtype.value,
            "level": self.level,
            "seed": self.seed,
            "params": dict(self.params),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DistortionSpec":
        return cls(
            dtype=DistortionType(d["dtype"]),
            level=_check_level(d["level"]),
            seed=int(d["seed"]),
            params=dict(d["params"]),
        )


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def gaussian_kernel(sigma: float) -> Kernel2D:
    """Isotropic Gaussian low-pass kernel, side 2*ceil(3*sigma)+1, sum 1."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    k /= k.sum()
    return Kernel2D(2 * radius + 1, k)


def motion_kernel(length: float, angle: float) -> Kernel2D:
    """Linear motion kernel: a line of unit-spaced taps through the center.

    The line runs at ``angle`` radians (0 = horizontal) and carries
    round(length) taps; each tap deposits its mass onto the four surrounding
    cells by bilinear fractions, which anti-aliases slanted lines.  Weights
    are normalized to sum 1.  length 1 degenerates to the identity kernel.
    """
    if length < 1:
        raise ValueError(f"motion length must be >= 1, got {length}")
    taps = int(round(length))
    if taps <= 1:
        return Kernel2D(1, np.array([[1.0]]))
    half = (taps - 1) / 2.0
    dx, dy = math.cos(angle), math.sin(angle)
    radius = max(1, int(math.ceil(round(half * max(abs(dx), abs(dy)), 9))))
    side = 2 * radius + 1
    k = np.zeros((side, side), dtype=np.float64)
    for t in range(taps):
        off = t - half
        x = off * dx + radius
        y = off * dy + radius
        x0, y0 = int(math.floor(x)), int(math.floor(y))
        fx, fy = x - x0, y - y0
        for iy, wy in ((y0, 1.0 - fy), (y0 + 1, fy)):
            for ix, wx in ((x0, 1.0 - fx), (x0 + 1, fx)):
                w = wx * wy
                if w > 0.0 and 0 <= iy < side and 0 <= ix < side:
                    k[iy, ix] += w
    k /= k.sum()
    return Kernel2D(side, k)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def apply_defocus_blur(img: ImageF32, level: int, table: SeverityTable) -> ImageF32:
    """Gaussian low-pass blur at the severity controlled by the table."""
    sigma = table.defocus_sigma[_check_level(level) - 1]
    return convolve2d(img, gaussian_kernel(sigma))


def apply_motion_blur(img: ImageF32, level: int, table: SeverityTable, rng: SeededRng):
    """Directional blur with a uniformly random angle; returns (image, params)."""
    length = float(table.motion_length[_check_level(level) - 1])
    angle = rng.uniform(0.0, math.pi)
    params = {"length": length, "angle": angle}
    return convolve2d(img, motion_kernel(length, angle)), params


def _add_gaussian_noise(img: ImageF32, variance: float, rng: SeededRng) -> ImageF32:
    noise = rng.normal((3, img.height, img.width)) * math.sqrt(variance)
    out = np.clip(img.data.astype(np.float64) + noise, 0.0, 1.0)
    return ImageF32(out.astype(np.float32))


def apply_awgn(img: ImageF32, level: int, table: SeverityTable, rng: SeededRng) -> ImageF32:
    """Additive white Gaussian noise, i.i.d. per component and channel."""
    variance = table.noise_variance[_check_level(level) - 1]
    return _add_gaussian_noise(img, variance, rng)


def illumination_mask(
    width: int,
    height: int,
    center: tuple,
    radius: float,
    floor: float,
    decay: float | None = None,
) -> np.ndarray:
    """Attenuation mask: 1 inside a bright disc, exponential falloff outside.

    mask(p) = 1                                        for d(p) <= radius
            = floor + (1-floor) * exp(-(d-radius)/decay)  otherwise

    with d the Euclidean distance to ``center`` and ``decay`` defaulting to
    radius/2.  Values therefore lie in [floor, 1] and never increase with
    distance from the center.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if not (0.0 < floor < 1.0):
        raise ValueError(f"floor must lie in (0, 1), got {floor}")
    if decay is None:
        decay = radius / 2.0
    cx, cy = center
    yy, xx = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")
    d = np.hypot(xx - cx, yy - cy)
    mask = floor + (1.0 - floor) * np.exp(-np.maximum(d - radius, 0.0) / decay)
    return np.minimum(mask, 1.0)


def apply_uneven_illumination(img: ImageF32, level: int, table: SeverityTable, rng: SeededRng):
    """Multiply by a bright-spot mask placed randomly in the central third."""
    level = _check_level(level)
    params = {
        "radius_frac": float(table.illum_radius_frac[level - 1]),
        "floor": float(table.illum_floor[level - 1]),
        "center_x_frac": rng.uniform(1.0 / 3.0, 2.0 / 3.0),
        "center_y_frac": rng.uniform(1.0 / 3.0, 2.0 / 3.0),
    }
    return _apply_illum_params(img, params), params


def _apply_illum_params(img: ImageF32, params: dict) -> ImageF32:
    radius = params["radius_frac"] * min(img.width, img.height)
    center = (params["center_x_frac"] * (img.width - 1), params["center_y_frac"] * (img.height - 1))
    mask = illumination_mask(img.width, img.height, center, radius, params["floor"])
    out = np.clip(img.data.astype(np.float64) * mask[None, :, :], 0.0, 1.0)
    return ImageF32(out.astype(np.float32))


def synth_smoke_plate(width: int, height: int, rng: SeededRng) -> ImageF32:
    """Procedural smoke plate: gray plume on a mostly black background.

    Five octaves of value noise (amplitude halved per octave) are shaped by
    a vertical ramp so the plume thickens toward the bottom edge, then a soft
    threshold zeroes the thin haze, leaving large true-black regions.
    """
    fractal = np.zeros((height, width), dtype=np.float64)
    total = 0.0
    for octave in range(5):
        amp = 0.5**octave
        fractal += amp * _value_noise(width, height, 4 * (2**octave), rng)
        total += amp
    fractal /= total
    ramp = np.linspace(0.0, 1.0, height, dtype=np.float64) ** 0.8
    density = fractal * (0.08 + 0.92 * ramp)[:, None]
    plume = np.clip((density - 0.22) / 0.78, 0.0, 1.0) ** 0.55
    plate = np.repeat(plume[None, :, :], 3, axis=0).astype(np.float32)
    return ImageF32(np.clip(plate, 0.0, 1.0))


def _value_noise(width: int, height: int, freq: int, rng: SeededRng) -> np.ndarray:
    """Single octave of lattice value noise with quintic-fade interpolation."""
    lattice = rng.random((freq + 1, freq + 1))
    u = np.linspace(0.0, freq, width, endpoint=False)
    v = np.linspace(0.0, freq, height, endpoint=False)
    ui, vi = np.floor(u).astype(int), np.floor(v).astype(int)
    uf, vf = _fade(u - ui), _fade(v - vi)
    v00 = lattice[np.ix_(vi, ui)]
    v01 = lattice[np.ix_(vi, ui + 1)]
    v10 = lattice[np.ix_(vi + 1, ui)]
    v11 = lattice[np.ix_(vi + 1, ui + 1)]
    top = v00 + uf[None, :] * (v01 - v00)
    bot = v10 + uf[None, :] * (v11 - v10)
    return top + vf[:, None] * (bot - top)


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def screen_blend(base: ImageF32, plate: ImageF32, opacity: float) -> ImageF32:
    """Screen compositing: out = 1 - (1-base)(1-opacity*plate).

    Computed as base + s*(1-base) so a black plate returns ``base`` exactly.
    The blend only brightens and is monotone in both inputs.
    """
    if (base.width, base.height) != (plate.width, plate.height):
        raise ValueError(
            f"plate size {plate.width}x{plate.height} does not match image {base.width}x{base.height}"
        )
    if not (0.0 <= opacity <= 1.0):
        raise ValueError(f"opacity must lie in [0, 1], got {opacity}")
    b = base.data.astype(np.float64)
    s = opacity * plate.data.astype(np.float64)
    out = np.clip(b + s * (1.0 - b), 0.0, 1.0)
    return ImageF32(out.astype(np.float32))


def to_grayscale(img: ImageF32) -> ImageF32:
    """Collapse to luminance (BT.601 weights), replicated across channels."""
    luma = 0.299 * img.data[0] + 0.587 * img.data[1] + 0.114 * img.data[2]
    return ImageF32(np.repeat(np.clip(luma, 0.0, 1.0)[None], 3, axis=0).astype(np.float32))


def apply_smoke(
    img: ImageF32,
    level: int,
    table: SeverityTable,
    rng: SeededRng,
    plate: ImageF32 | None = None,
):
    """Screen-blend a smoke plate at the table's opacity; returns (image, params)."""
    opacity = float(table.smoke_opacity[_check_level(level) - 1])
    if plate is None:
        plate_seed = rng.seed_bits()
        plate = synth_smoke_plate(img.width, img.height, make_rng(plate_seed, PLATE_STREAM))
        params = {"opacity": opacity, "plate_seed": plate_seed}
    else:
        params = {"opacity": opacity, "plate": "supplied"}
    return screen_blend(img, plate, opacity), params


# ---------------------------------------------------------------------------
# Resolve / replay
# ---------------------------------------------------------------------------


def resolve_spec(
    dtype: DistortionType,
    level: int,
    table: SeverityTable,
    seed: int,
    plate_path: str | None = None,
) -> DistortionSpec:
    """Draw all per-image random parameters now, producing a replayable spec."""
    level = _check_level(level)
    rng = make_rng(seed, PARAM_STREAM)
    if dtype is DistortionType.DEFOCUS_BLUR:
        params = {"sigma": float(table.defocus_sigma[level - 1])}
    elif dtype is DistortionType.MOTION_BLUR:
        params = {
            "length": float(table.motion_length[level - 1]),
            "angle": rng.uniform(0.0, math.pi),
        }
    elif dtype is DistortionType.WHITE_NOISE:
        params = {
            "variance": float(table.noise_variance[level - 1]),
            "noise_seed": rng.seed_bits(),
        }
    elif dtype is DistortionType.SMOKE:
        params = {"opacity": float(table.smoke_opacity[level - 1])}
        if plate_path is not None:
            params["plate_path"] = str(plate_path)
        else:
            params["plate_seed"] = rng.seed_bits()
    elif dtype is DistortionType.UNEVEN_ILLUMINATION:
        params = {
            "radius_frac": float(table.illum_radius_frac[level - 1]),
            "floor": float(table.illum_floor[level - 1]),
            "center_x_frac": rng.uniform(1.0 / 3.0, 2.0 / 3.0),
            "center_y_frac": rng.uniform(1.0 / 3.0, 2.0 / 3.0),
        }
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown distortion type {dtype}")
    return DistortionSpec(dtype=dtype, level=level, seed=int(seed), params=params)


def apply(spec: DistortionSpec, img: ImageF32) -> ImageF32:
    """Apply a fully resolved spec; identical (spec, image) give identical bytes."""
    p = spec.params
    if spec.dtype is DistortionType.DEFOCUS_BLUR:
        return convolve2d(img, gaussian_kernel(p["sigma"]))
    if spec.dtype is DistortionType.MOTION_BLUR:
        return convolve2d(img, motion_kernel(p["length"], p["angle"]))
    if spec.dtype is DistortionType.WHITE_NOISE:
        return _add_gaussian_noise(img, p["variance"], make_rng(p["noise_seed"], NOISE_STREAM))
    if spec.dtype is DistortionType.SMOKE:
        if "plate_path" in p:
            plate = to_grayscale(load_image(p["plate_path"]))
            if (plate.width, plate.height) != (img.width, img.height):
                from .imgcore import resize_area

                plate = resize_area(plate, img.width, img.height)
        else:
            plate = synth_smoke_plate(img.width, img.height, make_rng(p["plate_seed"], PLATE_STREAM))
        return screen_blend(img, plate, p["opacity"])
    if spec.dtype is DistortionType.UNEVEN_ILLUMINATION:
        return _apply_illum_params(img, p)
    raise ValueError(f"unknown distortion type {spec.dtype}")  # pragma: no cover


# ---------------------------------------------------------------------------
# Phantom reference content
# ---------------------------------------------------------------------------

_PALETTE = np.array(
    [
        [0.55, 0.16, 0.12],  # deep red tissue
        [0.46, 0.23, 0.15],  # brown parenchyma
        [0.82, 0.48, 0.46],  # pink membrane
        [0.88, 0.76, 0.42],  # fatty yellow
        [0.40, 0.09, 0.08],  # dark vessel red
        [0.66, 0.68, 0.72],  # instrument gray
    ]
)


def phantom_image(width: int, height: int, seed: int) -> ImageF32:
    """Procedural stand-in scene with enough structure to measure distortion.

    A tilted two-tone gradient background with low-frequency mottling, a
    handful of soft-edged elliptical blobs in tissue-like colors, and one
    bright specular highlight.
    """
    rng = make_rng(seed, PHANTOM_STREAM)
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, height, dtype=np.float64),
        np.linspace(0.0, 1.0, width, dtype=np.float64),
        indexing="ij",
    )

    phi = rng.uniform(0.0, math.pi)
    ramp = (math.cos(phi) * xx + math.sin(phi) * yy - min(0.0, math.cos(phi)) - min(0.0, math.sin(phi)))
    ramp /= max(abs(math.cos(phi)) + abs(math.sin(phi)), 1e-9)
    c1 = _jitter_color(_PALETTE[int(rng.random() * len(_PALETTE))], rng)
    c2 = _jitter_color(_PALETTE[int(rng.random() * len(_PALETTE))], rng)
    img = c1[:, None, None] * (1.0 - ramp) + c2[:, None, None] * ramp

    mottle = _value_noise(width, height, 5, rng) - 0.5
    img += 0.10 * mottle[None, :, :]

    n_blobs = 4 + int(rng.random() * 4)
    for _ in range(n_blobs):
        ex, ey = rng.uniform(0.08, 0.92), rng.uniform(0.08, 0.92)
        ax = rng.uniform(0.08, 0.30)
        ay = rng.uniform(0.08, 0.30)
        theta = rng.uniform(0.0, math.pi)
        color = _jitter_color(_PALETTE[int(rng.random() * len(_PALETTE))], rng)
        ct, st = math.cos(theta), math.sin(theta)
        u = (xx - ex) * ct + (yy - ey) * st
        v = -(xx - ex) * st + (yy - ey) * ct
        d2 = (u / ax) ** 2 + (v / ay) ** 2
        coverage = np.clip((1.2 - d2) / 0.4, 0.0, 1.0)
        alpha = 0.85 * coverage
        img = img * (1.0 - alpha[None]) + color[:, None, None] * alpha[None]

    sx, sy = rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)
    ssig = rng.uniform(0.03, 0.07)
    glow = np.exp(-(((xx - sx) ** 2 + (yy - sy) ** 2) / (2.0 * ssig * ssig)))
    img = img + 0.9 * glow[None] * (1.0 - img)

    return ImageF32(np.clip(img, 0.0, 1.0).astype(np.float32))


def _jitter_color(base: np.ndarray, rng: SeededRng) -> np.ndarray:
    return np.clip(base + (rng.random(3) - 0.5) * 0.12, 0.0, 1.0)
