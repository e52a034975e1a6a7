"""distrank: synthetic distortion corpora plus a compact residual classifier.

The package generates labeled distorted-image datasets (five distortion
types, four severity levels each), trains a small residual convolutional
network on the resulting 20-class problem, and evaluates both classification
accuracy and severity-rank correlation.
"""

__version__ = "0.1.0"

from .distort import (
    DISTORTION_ORDER,
    DistortionSpec,
    DistortionType,
    SeverityTable,
    apply,
    phantom_image,
    resolve_spec,
    screen_blend,
    synth_smoke_plate,
)
from .evaluate import EvalReport, evaluate, predict, psnr, srocc
from .imgcore import ImageF32, Kernel2D, SeededRng, derive_seed, load_image, make_rng, save_image
from .labels import (
    NUM_CLASSES,
    Manifest,
    ManifestRecord,
    build_manifest,
    decode_class,
    encode_class,
    split_manifest,
)
from .nn import ModelConfig, ModelParams, init_params, load_checkpoint, save_checkpoint
from .train import TrainConfig, resume, train

__all__ = [
    "DISTORTION_ORDER",
    "DistortionSpec",
    "DistortionType",
    "EvalReport",
    "ImageF32",
    "Kernel2D",
    "Manifest",
    "ManifestRecord",
    "ModelConfig",
    "ModelParams",
    "NUM_CLASSES",
    "SeededRng",
    "SeverityTable",
    "TrainConfig",
    "apply",
    "build_manifest",
    "decode_class",
    "derive_seed",
    "encode_class",
    "evaluate",
    "init_params",
    "load_checkpoint",
    "load_image",
    "make_rng",
    "phantom_image",
    "predict",
    "psnr",
    "resolve_spec",
    "resume",
    "save_checkpoint",
    "save_image",
    "screen_blend",
    "split_manifest",
    "srocc",
    "synth_smoke_plate",
    "train",
    "__version__",
]
