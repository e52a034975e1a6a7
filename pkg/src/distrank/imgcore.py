"""Core image container, deterministic randomness, convolution, and file I/O.

Images are planar float32 RGB with every component in [0, 1]; conversion to
and from 8-bit happens only at the file boundary.  All randomness flows
through :class:`SeededRng`, a counter-based generator with explicit stream
derivation, so that any artifact built on top of it can be regenerated
bit-exactly from recorded seeds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ImageF32",
    "Kernel2D",
    "SeededRng",
    "ImageFormatError",
    "CorruptImageError",
    "derive_seed",
    "make_rng",
    "load_image",
    "save_image",
    "convolve2d",
    "resize_area",
]


class ImageFormatError(ValueError):
    """Raised when a file is readable but not an 8-bit RGB PNG or binary PPM."""


class CorruptImageError(ValueError):
    """Raised when a file claims a supported format but cannot be decoded."""


@dataclass(frozen=True)
class ImageF32:
    """Planar RGB image: ``data`` has shape (3, height, width), float32 in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3 or d.shape[0] != 3:
            raise ValueError(f"image data must have shape (3, H, W), got {getattr(d, 'shape', None)}")
        if d.shape[1] < 1 or d.shape[2] < 1:
            raise ValueError("image must be at least 1x1")
        if d.dtype != np.float32:
            raise ValueError(f"image data must be float32, got {d.dtype}")
        lo, hi = float(d.min()), float(d.max())
        if not np.isfinite(lo) or not np.isfinite(hi) or lo < 0.0 or hi > 1.0:
            raise ValueError(f"image components must lie in [0, 1], got range [{lo}, {hi}]")

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    @classmethod
    def from_array(cls, arr: np.ndarray, clip: bool = False) -> "ImageF32":
        """Build an image from any (3, H, W) float array, optionally clamping to [0, 1]."""
        a = np.asarray(arr, dtype=np.float64)
        if clip:
            a = np.clip(a, 0.0, 1.0)
        return cls(a.astype(np.float32))

    @classmethod
    def full(cls, width: int, height: int, value: float | tuple[float, float, float]) -> "ImageF32":
        """Constant image; ``value`` is a gray level or an (r, g, b) triple."""
        rgb = (value, value, value) if np.isscalar(value) else tuple(value)
        data = np.empty((3, height, width), dtype=np.float32)
        for c, v in enumerate(rgb):
            data[c] = v
        return cls(data)


@dataclass(frozen=True)
class Kernel2D:
    """Square convolution kernel with an odd, center-aligned side length."""

    size: int
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel side must be odd and >= 1, got {self.size}")
        if self.weights.shape != (self.size, self.size):
            raise ValueError(f"weights shape {self.weights.shape} does not match side {self.size}")

    @classmethod
    def from_weights(cls, weights: np.ndarray) -> "Kernel2D":
        w = np.asarray(weights, dtype=np.float64)
        return cls(w.shape[0], w)


def derive_seed(*parts) -> int:
    """Derive a 64-bit seed from arbitrary parts via SHA-256.

    Uses a cryptographic hash rather than Python's ``hash`` so that derived
    seeds are identical across processes, platforms, and interpreter versions.
    """
    h = hashlib.sha256()
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


class SeededRng:
    """Deterministic random source keyed by (seed, stream_id).

    Backed by the Philox counter-based generator with the 128-bit key set to
    the two 64-bit words (seed, stream_id), so distinct streams are
    independent by construction and the same key always replays the same
    sequence.  Normal deviates are produced by the Box-Muller transform over
    the uniform stream (rather than whatever sampler the numpy version of the
    day ships), which pins the exact output sequence:

        r = sqrt(-2 ln(1 - u1)),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2)

    Determinism holds per call sequence: the same calls in the same order
    reproduce the same values.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=[self.seed, self.stream_id]))

    def random(self, size=None) -> np.ndarray | float:
        """Uniform float64 in [0, 1)."""
        out = self._gen.random(size)
        return float(out) if size is None else out

    def uniform(self, low: float, high: float, size=None):
        u = self._gen.random(size)
        out = low + (high - low) * u
        return float(out) if size is None else out

    def normal(self, size=None):
        """Standard normal deviates via Box-Muller (see class docstring)."""
        if size is None:
            return float(self.normal(1)[0])
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        npairs = (n + 1) // 2
        u1 = self._gen.random(npairs)
        u2 = self._gen.random(npairs)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = (2.0 * np.pi) * u2
        z = np.empty(2 * npairs, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(shape)

    def seed_bits(self) -> int:
        """One fresh 53-bit integer from the uniform stream, for child seeds."""
        return int(self._gen.random() * (1 << 53))

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n) driven by the uniform stream."""
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = int(self._gen.random() * (i + 1))
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def make_rng(seed: int, stream_id: int = 0) -> SeededRng:
    """Create a deterministic generator for the given (seed, stream_id)."""
    return SeededRng(seed, stream_id)


# ---------------------------------------------------------------------------
# File I/O: 8-bit RGB PNG and binary PPM (P6), nothing else.
# ---------------------------------------------------------------------------

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def load_image(path) -> ImageF32:
    """Load an 8-bit RGB PNG or binary PPM into unit-interval planes.

    Components are mapped from {0..255} to [0, 1] by division by 255.
    Raises ``FileNotFoundError`` for a missing file, :class:`ImageFormatError`
    for an unsupported format or color layout, and :class:`CorruptImageError`
    for a file that declares a supported format but cannot be decoded.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such image file: {p}")
    head = p.open("rb").read(8)
    if head.startswith(_PNG_MAGIC):
        rgb = _decode_png(p)
    elif head.startswith(b"P6"):
        rgb = _decode_ppm(p)
    else:
        raise ImageFormatError(f"{p}: unsupported format (expected 8-bit RGB PNG or binary PPM)")
    data = (rgb.astype(np.float32) / 255.0).transpose(2, 0, 1)
    return ImageF32(np.ascontiguousarray(data))


def _decode_png(p: Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(p) as im:
            if im.format != "PNG":
                raise ImageFormatError(f"{p}: not a PNG file")
            if im.mode != "RGB":
                raise ImageFormatError(f"{p}: unsupported PNG color layout {im.mode!r} (need 8-bit RGB, no alpha)")
            im.load()
            return np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"{p}: undecodable PNG data") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptImageError(f"{p}: corrupt PNG data ({exc})") from exc


def _decode_ppm(p: Path) -> np.ndarray:
    raw = p.read_bytes()
    pos = 2  # past the "P6" magic
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":  # comment to end of line
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptImageError(f"{p}: truncated PPM header")
        token = raw[start:pos]
        if not token.isdigit():
            raise CorruptImageError(f"{p}: bad PPM header token {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"{p}: PPM maxval {maxval} unsupported (need 8-bit)")
    pos += 1  # single whitespace byte after maxval
    pixels = raw[pos : pos + width * height * 3]
    if len(pixels) != width * height * 3:
        raise CorruptImageError(f"{p}: PPM pixel data truncated")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)


def save_image(img: ImageF32, path) -> None:
    """Write an image as 8-bit RGB PNG (default) or binary PPM (``.ppm``).

    Components are quantized by round-half-up: byte = floor(c * 255 + 0.5),
    so a load/save round trip moves any component by at most 1/510.
    """
    p = Path(path)
    bytes_hwc = np.floor(np.clip(img.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8).transpose(1, 2, 0)
    if p.suffix.lower() in (".ppm", ".pnm"):
        header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
        p.write_bytes(header + np.ascontiguousarray(bytes_hwc).tobytes())
        return
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(bytes_hwc), "RGB").save(p, format="PNG")


# ---------------------------------------------------------------------------
# Spatial filtering and resampling.
# ---------------------------------------------------------------------------


def convolve2d(img: ImageF32, kernel: Kernel2D) -> ImageF32:
    """Per-channel 2-D correlation with replicate border padding.

    Output has the same dimensions as the input and is clamped to [0, 1].
    Internally picks one of three equivalent evaluation orders: a separable
    two-pass route when the kernel factors as an outer product, a sparse
    shift-accumulate route for mostly-zero kernels (motion lines), and a
    dense shift-accumulate fallback.  All arithmetic is float64.
    """
    k = np.asarray(kernel.weights, dtype=np.float64)
    r = kernel.size // 2
    h, w = img.height, img.width
    out = np.empty((3, h, w), dtype=np.float32)
    factors = _rank1_factors(k)
    for c in range(3):
        padded = np.pad(img.data[c].astype(np.float64), r, mode="edge")
        if factors is not None:
            col, row = factors
            tmp = np.zeros((h + 2 * r, w), dtype=np.float64)
            for j in range(kernel.size):
                if row[j] != 0.0:
                    tmp += row[j] * padded[:, j : j + w]
            acc = np.zeros((h, w), dtype=np.float64)
            for i in range(kernel.size):
                if col[i] != 0.0:
                    acc += col[i] * tmp[i : i + h, :]
        else:
            acc = np.zeros((h, w), dtype=np.float64)
            ii, jj = np.nonzero(k)
            for i, j in zip(ii.tolist(), jj.tolist()):
                acc += k[i, j] * padded[i : i + h, j : j + w]
        out[c] = np.clip(acc, 0.0, 1.0).astype(np.float32)
    return ImageF32(out)


def _rank1_factors(k: np.ndarray):
    """Return (column, row) vectors when ``k`` is an outer product, else None."""
    if k.shape[0] == 1:
        return np.array([1.0]), k[0].copy()
    try:
        u, s, vt = np.linalg.svd(k)
    except np.linalg.LinAlgError:
        return None
    if s[0] == 0.0:
        return None
    col = u[:, 0] * s[0]
    row = vt[0]
    if np.max(np.abs(np.outer(col, row) - k)) > 1e-12 * max(np.max(np.abs(k)), 1e-300):
        return None
    return col, row


def resize_area(img: ImageF32, width: int, height: int) -> ImageF32:
    """Resample by exact area averaging (box filter over source coverage)."""
    if width < 1 or height < 1:
        raise ValueError("target size must be at least 1x1")
    if width == img.width and height == img.height:
        return img
    wy = _overlap_weights(img.height, height)
    wx = _overlap_weights(img.width, width)
    out = np.empty((3, height, width), dtype=np.float32)
    for c in range(3):
        plane = img.data[c].astype(np.float64)
        out[c] = np.clip(wy @ plane @ wx.T, 0.0, 1.0).astype(np.float32)
    return ImageF32(out)


def _overlap_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) row-stochastic matrix of source-interval coverage."""
    scale = n_in / n_out
    weights = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        a, b = i * scale, (i + 1) * scale
        k0, k1 = int(np.floor(a)), min(int(np.ceil(b)), n_in)
        for k in range(k0, k1):
            weights[i, k] = max(0.0, min(b, k + 1) - max(a, k)) / scale
    return weights
