"""Data synthesis and ingestion.

Synthetic generators produce labeled multi-manifold point clouds with a
fixed seed; the IDX reader parses the standard big-endian image/label
file pair bit-exactly; transform families (shear, width scale,
brightness) implement the controlled feature changes the
disentanglement score needs. All emitted samples lie in [-1, 1].
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DataFormatError

__all__ = [
    "LabeledDataset",
    "TransformFamily",
    "make_transform_family",
    "gen_parallel_segments",
    "gen_disconnected_arcs",
    "load_idx",
    "write_idx",
    "apply_transform",
    "gen_synthetic_digits",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Equal-shape samples in [-1, 1] with optional manifold labels."""

    samples: np.ndarray                 # (n, ...) float64
    labels: np.ndarray | None = None    # (n,) integer indices

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.samples.shape[0],):
                raise ContractError("labels must have one entry per sample")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_shape(self) -> tuple:
        return self.samples.shape[1:]

    def flat(self) -> np.ndarray:
        """Samples as row vectors."""
        return self.samples.reshape(self.n, -1)

    def subset(self, mask) -> "LabeledDataset":
        labels = self.labels[mask] if self.labels is not None else None
        return LabeledDataset(self.samples[mask], labels)

    def to_ndjson(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            flat = self.flat()
            for k in range(self.n):
                record = {"values": flat[k].tolist()}
                record["label"] = int(self.labels[k]) if self.labels is not None else None
                fh.write(json.dumps(record) + "\n")


@dataclass
class TransformFamily:
    """A named transform with an ordered ladder of magnitudes.

    The ladder must be strictly increasing and include the identity
    magnitude (0 for shear and brightness, 1 for width scaling).
    """

    kind: str
    levels: np.ndarray

    KINDS = ("shear", "width-scale", "brightness")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ContractError(f"unknown transform kind {self.kind!r}")
        self.levels = np.asarray(self.levels, dtype=np.float64)
        if not np.all(np.diff(self.levels) > 0):
            raise ContractError("levels must be strictly increasing")
        identity = 1.0 if self.kind == "width-scale" else 0.0
        if not np.any(np.isclose(self.levels, identity)):
            raise ContractError(f"levels must include the identity magnitude {identity}")

    @property
    def identity_level(self) -> float:
        return 1.0 if self.kind == "width-scale" else 0.0


def make_transform_family(kind: str, n_levels: int = 11, limit: float | None = None) -> TransformFamily:
    """Symmetric ladder of ``n_levels`` magnitudes around the identity.

    Defaults: shear within +-25 degrees, width scale within a factor of
    1.3 either way, brightness shift within +-0.3. ``n_levels`` must be
    odd so the identity sits in the middle.
    """
    if n_levels < 3 or n_levels % 2 == 0:
        raise ContractError("n_levels must be an odd count of at least 3")
    if kind == "shear":
        limit = 25.0 if limit is None else float(limit)
        levels = np.linspace(-limit, limit, n_levels)
    elif kind == "width-scale":
        limit = 1.3 if limit is None else float(limit)
        levels = np.exp(np.linspace(-np.log(limit), np.log(limit), n_levels))
        levels[n_levels // 2] = 1.0
    elif kind == "brightness":
        limit = 0.3 if limit is None else float(limit)
        levels = np.linspace(-limit, limit, n_levels)
    else:
        raise ContractError(f"unknown transform kind {kind!r}")
    return TransformFamily(kind=kind, levels=levels)


def gen_parallel_segments(n_manifolds: int, n_per: int, ambient_dim: int,
                          separation: float, noise_sd: float, seed: int,
                          tangential_extent: float = 0.9) -> LabeledDataset:
    """Parallel line segments sharing one tangential direction.

    Segment ``i`` runs along the first axis and sits at ``i * separation``
    on the second axis, plus isotropic Gaussian noise. The deterministic
    (noiseless) extents are rescaled into the unit box only when they
    exceed it, so small configurations keep their offsets exactly; noise
    tails are clipped at the box.
    """
    if n_manifolds < 1:
        raise ContractError("need at least one segment")
    if separation <= 0:
        raise ContractError("separation must be positive")
    if ambient_dim < 2:
        raise ContractError("ambient dimension must be at least 2")
    rng = np.random.default_rng(seed)
    total = n_manifolds * n_per
    labels = np.repeat(np.arange(n_manifolds), n_per)
    points = np.zeros((total, ambient_dim))
    points[:, 0] = rng.uniform(-tangential_extent, tangential_extent, size=total)
    points[:, 1] = labels * separation
    scale = max(1.0, tangential_extent, (n_manifolds - 1) * separation)
    points /= scale
    if noise_sd > 0:
        points += rng.normal(0.0, noise_sd, size=points.shape)
    points = np.clip(points, -1.0, 1.0)
    return LabeledDataset(points, labels)


def gen_disconnected_arcs(n_manifolds: int, n_per: int, seed: int,
                          radius_start: float = 0.3, radius_step: float = 0.25,
                          arc_span_degrees: float = 270.0,
                          noise_sd: float = 0.0) -> LabeledDataset:
    """Concentric partial circles, one arc per manifold."""
    if n_manifolds < 1:
        raise ContractError("need at least one arc")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(n_manifolds), n_per)
    radii = radius_start + labels * radius_step
    span = np.deg2rad(arc_span_degrees)
    angles = rng.uniform(-span / 2.0, span / 2.0, size=labels.shape[0])
    points = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    scale = max(1.0, radius_start + (n_manifolds - 1) * radius_step)
    points /= scale
    if noise_sd > 0:
        points += rng.normal(0.0, noise_sd, size=points.shape)
    points = np.clip(points, -1.0, 1.0)
    return LabeledDataset(points, labels)


def _read_exact(fh, count: int, path, offset: int) -> bytes:
    chunk = fh.read(count)
    if len(chunk) != count:
        raise DataFormatError(
            f"{path}: truncated at byte {offset + len(chunk)}, "
            f"expected {count} more bytes, got {len(chunk)}",
            offset=offset + len(chunk),
            path=str(path),
        )
    return chunk


def load_idx(images_path, labels_path, limit: int | None = None,
             downsample: bool = False) -> LabeledDataset:
    """Read a big-endian IDX image/label pair.

    Pixels map linearly from [0, 255] to [-1, 1]. With ``downsample``
    the images are reduced by 2x2 mean pooling (extents must be even).
    """
    with open(images_path, "rb") as fh:
        header = _read_exact(fh, 16, images_path, 0)
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad image magic 0x{magic:08x} at byte 0, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}",
                offset=0,
                path=str(images_path),
            )
        raw = _read_exact(fh, count * rows * cols, images_path, 16)
    images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols)

    with open(labels_path, "rb") as fh:
        header = _read_exact(fh, 8, labels_path, 0)
        magic, label_count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"{labels_path}: bad label magic 0x{magic:08x} at byte 0, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}",
                offset=0,
                path=str(labels_path),
            )
        raw = _read_exact(fh, label_count, labels_path, 8)
    labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)

    if label_count != count:
        raise DataFormatError(
            f"image count {count} and label count {label_count} disagree",
            offset=4,
            path=str(labels_path),
        )
    if limit is not None:
        images = images[:limit]
        labels = labels[:limit]
    samples = images.astype(np.float64) / 255.0 * 2.0 - 1.0
    if downsample:
        n, r, c = samples.shape
        if r % 2 or c % 2:
            raise ContractError(f"downsampling needs even extents, got {r}x{c}")
        samples = samples.reshape(n, r // 2, 2, c // 2, 2).mean(axis=(2, 4))
    return LabeledDataset(samples, labels)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write a big-endian IDX image/label pair from uint8 images."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.ndim != 3:
        raise ContractError(f"expected (count, rows, cols) images, got {images.shape}")
    if images.dtype != np.uint8:
        raise ContractError("images must be uint8")
    if labels.shape != (images.shape[0],):
        raise ContractError("labels must have one entry per image")
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(labels.astype(np.uint8).tobytes())


def _bilinear_gather(image: np.ndarray, row_coords: np.ndarray,
                     col_coords: np.ndarray, fill: float = -1.0) -> np.ndarray:
    """Sample ``image`` at fractional coordinates; outside falls to ``fill``."""
    h, w = image.shape
    r0 = np.floor(row_coords).astype(np.int64)
    c0 = np.floor(col_coords).astype(np.int64)
    fr = row_coords - r0
    fc = col_coords - c0

    def at(rr, cc):
        inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        values = np.full(rr.shape, fill, dtype=np.float64)
        values[inside] = image[rr[inside], cc[inside]]
        return values

    top = at(r0, c0) * (1.0 - fc) + at(r0, c0 + 1) * fc
    bottom = at(r0 + 1, c0) * (1.0 - fc) + at(r0 + 1, c0 + 1) * fc
    return top * (1.0 - fr) + bottom * fr


def apply_transform(ds: LabeledDataset, family: TransformFamily, level: float) -> LabeledDataset:
    """Apply one magnitude of a transform family to an image dataset.

    Shear skews columns proportionally to the row offset from center;
    width scaling stretches about the vertical center line; brightness
    shifts every pixel with clamping. Labels are preserved.
    """
    if not family.levels.min() <= level <= family.levels.max():
        raise ContractError(
            f"level {level} outside the family range "
            f"[{family.levels.min()}, {family.levels.max()}]"
        )
    samples = ds.samples
    if family.kind == "brightness":
        shifted = np.clip(samples + level, -1.0, 1.0)
        return LabeledDataset(shifted, ds.labels)
    if samples.ndim != 3 or samples.shape[1] != samples.shape[2]:
        raise ContractError("shear and width scaling need square images")
    n, h, w = samples.shape
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64),
                             np.arange(w, dtype=np.float64), indexing="ij")
    center_r = (h - 1) / 2.0
    center_c = (w - 1) / 2.0
    if family.kind == "shear":
        src_cols = cols + np.tan(np.deg2rad(level)) * (rows - center_r)
        src_rows = rows
    else:  # width-scale
        src_cols = center_c + (cols - center_c) / level
        src_rows = rows
    out = np.empty_like(samples)
    for k in range(n):
        out[k] = _bilinear_gather(samples[k], src_rows, src_cols)
    return LabeledDataset(np.clip(out, -1.0, 1.0), ds.labels)


def gen_synthetic_digits(n_per_class: int, classes=(0, 1), size: int = 28,
                         seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Render a deterministic handwritten-style corpus of 0s and 1s.

    Zeros are elliptical rings, ones are slanted strokes; position,
    proportions, thickness and slant vary per draw. Returns uint8
    images (n, size, size) and integer labels, ready for
    :func:`write_idx`.
    """
    for c in classes:
        if c not in (0, 1):
            raise ContractError("only digit classes 0 and 1 are supported")
    rng = np.random.default_rng(seed)
    rows, cols = np.meshgrid(np.arange(size, dtype=np.float64),
                             np.arange(size, dtype=np.float64), indexing="ij")
    images, labels = [], []
    for digit in classes:
        for _ in range(n_per_class):
            cy = size / 2.0 + rng.uniform(-2.0, 2.0)
            cx = size / 2.0 + rng.uniform(-2.0, 2.0)
            slant = rng.uniform(-0.3, 0.3)
            thickness = rng.uniform(1.8, 2.8) * (size / 28.0)
            x_rel = (cols - cx) - slant * (rows - cy)
            y_rel = rows - cy
            if digit == 0:
                rx = rng.uniform(0.18, 0.26) * size
                ry = rng.uniform(0.28, 0.36) * size
                radial = np.sqrt((x_rel / rx) ** 2 + (y_rel / ry) ** 2)
                dist = np.abs(radial - 1.0) * min(rx, ry)
            else:
                half_len = rng.uniform(0.28, 0.36) * size
                along = np.clip(y_rel, -half_len, half_len)
                dist = np.sqrt(x_rel ** 2 + (y_rel - along) ** 2)
            intensity = np.clip(1.5 - dist / thickness, 0.0, 1.0)
            images.append((intensity * 255.0).astype(np.uint8))
            labels.append(digit)
    return np.stack(images), np.asarray(labels, dtype=np.int64)
