"""Lossless 8-bit PNG image I/O (the only carriage format the CLI accepts)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError


def load_image(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as img:
        if img.format != "PNG":
            raise ConfigError(f"{path}: only PNG input is supported")
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ConfigError("expected an (H, W, 3) uint8 image")
    Image.fromarray(image, mode="RGB").save(Path(path), format="PNG")
