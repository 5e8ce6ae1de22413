"""End-to-end run orchestration: configs in, artifacts out.

The CLI delegates here; every number in a run's outputs comes from a
library call, never from command-line code. Artifacts are NDJSON metric
streams, binary checkpoints, SVG charts, and a run manifest recording
the config hash, the effective seed and the versions involved.
"""

from __future__ import annotations

import json
import os
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (
    LabeledDataset,
    gen_disconnected_arcs,
    gen_parallel_segments,
    gen_synthetic_digits,
    load_idx,
    write_idx,
)
from .errors import ConfigError, ContractError
from .model import build_discriminator, build_mlp_generator
from .persist import RunConfig, config_hash, save_checkpoint, snapshot_trainer
from .svgplot import line_chart
from .training import Trainer

__all__ = [
    "resolve_seed",
    "dataset_from_config",
    "models_from_config",
    "run_training",
    "write_ndjson",
    "read_ndjson",
    "write_run_manifest",
    "downsample_2x2",
]

SEED_ENV_VAR = "ENCGAN_SEED"


def resolve_seed(config_seed: int) -> int:
    """Config seed, unless the ENCGAN_SEED environment variable overrides it."""
    override = os.environ.get(SEED_ENV_VAR)
    if override is None:
        return int(config_seed)
    try:
        return int(override)
    except ValueError as exc:
        raise ConfigError([f"{SEED_ENV_VAR}: expected an integer, got {override!r}"]) from exc


def downsample_2x2(samples: np.ndarray) -> np.ndarray:
    """Mean-pool (n, h, w) images by 2x2 blocks."""
    n, r, c = samples.shape
    if r % 2 or c % 2:
        raise ContractError(f"downsampling needs even extents, got {r}x{c}")
    return samples.reshape(n, r // 2, 2, c // 2, 2).mean(axis=(2, 4))


def dataset_from_config(dataset_cfg: dict, seed: int) -> LabeledDataset:
    kind = dataset_cfg["kind"]
    if kind == "parallel_segments":
        return gen_parallel_segments(
            n_manifolds=dataset_cfg["n_manifolds"],
            n_per=dataset_cfg["n_per"],
            ambient_dim=dataset_cfg["ambient_dim"],
            separation=dataset_cfg["separation"],
            noise_sd=dataset_cfg["noise_sd"],
            seed=seed,
            tangential_extent=dataset_cfg.get("tangential_extent", 0.9),
        )
    if kind == "disconnected_arcs":
        return gen_disconnected_arcs(
            n_manifolds=dataset_cfg["n_manifolds"],
            n_per=dataset_cfg["n_per"],
            seed=seed,
            radius_start=dataset_cfg.get("radius_start", 0.3),
            radius_step=dataset_cfg.get("radius_step", 0.25),
            arc_span_degrees=dataset_cfg.get("arc_span_degrees", 270.0),
            noise_sd=dataset_cfg.get("noise_sd", 0.0),
        )
    if kind == "idx":
        ds = load_idx(
            dataset_cfg["images_path"],
            dataset_cfg["labels_path"],
            limit=dataset_cfg.get("limit"),
            downsample=dataset_cfg.get("downsample", False),
        )
        classes = dataset_cfg.get("classes")
        if classes is not None:
            mask = np.isin(ds.labels, np.asarray(classes, dtype=np.int64))
            ds = ds.subset(mask)
            remap = {int(c): k for k, c in enumerate(sorted(classes))}
            ds.labels = np.asarray([remap[int(v)] for v in ds.labels], dtype=np.int64)
        return ds
    if kind == "synthetic_digits":
        images, labels = gen_synthetic_digits(
            n_per_class=dataset_cfg["n_per_class"],
            classes=tuple(dataset_cfg.get("classes", (0, 1))),
            size=dataset_cfg.get("size", 28),
            seed=seed,
        )
        samples = images.astype(np.float64) / 255.0 * 2.0 - 1.0
        if dataset_cfg.get("downsample", False):
            samples = downsample_2x2(samples)
        return LabeledDataset(samples, labels)
    raise ConfigError([f"dataset.kind: unknown kind {kind!r}"])


def models_from_config(model_cfg: dict, d_x: int, seed: int):
    rng = np.random.default_rng(seed)
    gen = build_mlp_generator(
        d_z=model_cfg["d_z"],
        hidden_dims=model_cfg["hidden"],
        d_out=d_x,
        n_biases=model_cfg["n_biases"],
        rng=rng,
        weight_scale=model_cfg.get("weight_scale", 0.02),
    )
    disc = build_discriminator(d_x, model_cfg["disc_hidden"], rng)
    return gen, disc


def write_ndjson(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_ndjson(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_run_manifest(out_dir: Path, command: str, config_doc: dict | None,
                       seed: int, extra: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "config_sha256": config_hash(config_doc) if config_doc is not None else None,
        "seed": seed,
        "versions": {
            "encgan": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "run_manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run_training(config: RunConfig, out_dir) -> dict:
    """Train per config and write checkpoint, metrics, charts, manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = resolve_seed(config.seed)
    ds = dataset_from_config(config.dataset, seed)
    train_cfg = config.train_config(seed=seed)
    gen, disc = models_from_config(config.model, ds.flat().shape[1], seed)
    trainer = Trainer(gen, disc, ds.flat(), train_cfg)
    trainer.run()

    metrics_path = out_dir / "metrics.ndjson"
    write_ndjson(metrics_path, trainer.history)

    checkpoint_path = out_dir / "checkpoint.encg"
    state = snapshot_trainer(trainer, data_shape=ds.sample_shape, seed=seed)
    save_checkpoint(state, checkpoint_path)

    svg_path = out_dir / "alignment.svg"
    epochs = [r["epoch"] for r in trainer.history]
    n_layers = len(trainer.history[0]["alignment_trace"]) if trainer.history else 0
    series = [
        (f"layer {l}", epochs, [r["alignment_trace"][l] for r in trainer.history])
        for l in range(n_layers)
    ]
    if series:
        line_chart(series, svg_path, title="bias alignment trace per layer",
                   x_label="epoch", y_label="covariance trace")

    wgan_equivalent = (
        gen.n_biases == 1
        and train_cfg.reg_weight == 0.0
        and not train_cfg.reg_weight_schedule
    )
    manifest_path = write_run_manifest(
        out_dir, "train", config.doc, seed,
        extra={"wgan_equivalent": wgan_equivalent,
               "model_label": "wgan-equivalent" if wgan_equivalent else "multi-bias"},
    )
    return {
        "trainer": trainer,
        "dataset": ds,
        "checkpoint": checkpoint_path,
        "metrics": metrics_path,
        "manifest": manifest_path,
        "alignment_chart": svg_path if series else None,
    }
