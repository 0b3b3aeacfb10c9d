"""16-bit grayscale PNG helpers shared by dataset export and patch exchange."""

from __future__ import annotations

import numpy as np
from PIL import Image

U16_MAX = 65535


def write_gray16(path, image01: np.ndarray):
    """Write a [0,1] float image as 16-bit grayscale PNG."""
    arr = np.asarray(image01, dtype=float)
    if arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
        raise ValueError("image values outside [0, 1]")
    data = np.rint(np.clip(arr, 0.0, 1.0) * U16_MAX).astype(np.uint16)
    Image.fromarray(data).save(path)


def write_label16(path, labels: np.ndarray):
    """Write an integer label image as 16-bit PNG."""
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > U16_MAX:
        raise ValueError("labels outside uint16 range")
    Image.fromarray(arr.astype(np.uint16)).save(path)


def read_gray(path) -> np.ndarray:
    """Read an 8/16-bit grayscale PNG as a raw integer array."""
    with Image.open(path) as img:
        if img.mode not in ("L", "I", "I;16", "I;16B"):
            raise ValueError(f"{path}: expected grayscale PNG, got mode {img.mode}")
        return np.asarray(img).astype(np.int64)


def read_gray01(path) -> np.ndarray:
    """Read a grayscale PNG normalized to [0,1] by its bit depth."""
    with Image.open(path) as img:
        mode = img.mode
        arr = np.asarray(img).astype(float)
    scale = 255.0 if mode == "L" else float(U16_MAX)
    out = arr / scale
    if out.min() < 0 or out.max() > 1:
        raise ValueError(f"{path}: pixel values outside [0, 1] after normalization")
    return out
