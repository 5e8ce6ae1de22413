"""Lossless PGM/PPM emission for samples in [-1, 1].

The linear map [-1, 1] -> [0, 255] keeps grayscale output writable
without any imaging dependency; reading it back reproduces the 8-bit
quantization exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

__all__ = ["to_byte_image", "write_pgm", "write_ppm", "tile_grid"]


def to_byte_image(values: np.ndarray) -> np.ndarray:
    """Map [-1, 1] samples linearly onto uint8 [0, 255]."""
    arr = np.asarray(values, dtype=np.float64)
    scaled = np.clip((arr + 1.0) / 2.0, 0.0, 1.0) * 255.0
    return np.rint(scaled).astype(np.uint8)


def write_pgm(path, image: np.ndarray):
    """Binary PGM (P5) from a 2-D [-1, 1] or uint8 image."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ContractError(f"PGM needs a 2-D image, got shape {arr.shape}")
    data = arr if arr.dtype == np.uint8 else to_byte_image(arr)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_ppm(path, image: np.ndarray):
    """Binary PPM (P6) from an (h, w, 3) [-1, 1] or uint8 image."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ContractError(f"PPM needs an (h, w, 3) image, got shape {arr.shape}")
    data = arr if arr.dtype == np.uint8 else to_byte_image(arr)
    h, w, _ = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def tile_grid(images: np.ndarray, n_rows: int, n_cols: int, gap: int = 1,
              fill: float = -1.0) -> np.ndarray:
    """Arrange (n, h, w) images into one (rows*h, cols*w) canvas."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3:
        raise ContractError(f"expected (n, h, w) images, got {images.shape}")
    n, h, w = images.shape
    if n_rows * n_cols < n:
        raise ContractError("grid too small for the image count")
    canvas = np.full((n_rows * (h + gap) - gap, n_cols * (w + gap) - gap), fill)
    for k in range(n):
        r, c = divmod(k, n_cols)
        canvas[r * (h + gap):r * (h + gap) + h, c * (w + gap):c * (w + gap) + w] = images[k]
    return canvas
