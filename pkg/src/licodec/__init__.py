"""licodec: toy-scale learned-image-compression codec and RD evaluation kit."""

from .codec import DecodeResult, EncodeResult, decode_image, encode_image
from .errors import (
    ChecksumError,
    CodecError,
    ConfigError,
    LicodecError,
    MetricsError,
    ModelMismatchError,
)
from .metrics import RDCurve, RDPoint, bd_psnr, bd_rate, psnr_rgb
from .model import Model, load_model, model_from_dir, write_toy_model_dir

__version__ = "0.1.0"

__all__ = [
    "ChecksumError",
    "CodecError",
    "ConfigError",
    "DecodeResult",
    "EncodeResult",
    "LicodecError",
    "MetricsError",
    "Model",
    "ModelMismatchError",
    "RDCurve",
    "RDPoint",
    "__version__",
    "bd_psnr",
    "bd_rate",
    "decode_image",
    "encode_image",
    "load_model",
    "model_from_dir",
    "psnr_rgb",
    "write_toy_model_dir",
]
