"""Deterministic serialization of models, training state and run configs.

Checkpoint layout (normative, little-endian):

    bytes 0..3   magic "ENCG"
    bytes 4..7   format version, u32
    bytes 8..15  manifest length in bytes, u64
    manifest     UTF-8 JSON (layer topology, shapes, seed, RNG state,
                 optimizer counters, precision, regularizer schedule)
    payload      raw float64 arrays concatenated in manifest order

Two saves of the same state are byte-identical; loading validates the
magic, version and declared byte counts before any array is built.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractError,
    DataFormatError,
    ConfigError,
    UnsupportedVersionError,
)
from .layers import Activation, BatchNorm, MultiBiasLinear, SpectralNormLinear
from .model import DiscriminatorModel, GeneratorModel
from .training import Adam, TrainConfig, Trainer

__all__ = [
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
    "CheckpointState",
    "save_checkpoint",
    "load_checkpoint",
    "snapshot_trainer",
    "restore_trainer",
    "restore_generator",
    "RunConfig",
    "validate_run_config",
    "load_run_config",
    "config_hash",
]

CHECKPOINT_MAGIC = b"ENCG"
CHECKPOINT_VERSION = 1
_ITEM_BYTES = 8  # float64


@dataclass
class CheckpointState:
    """Manifest plus the named arrays, in payload order."""

    manifest: dict
    arrays: list  # [(name, np.ndarray), ...]


def _canonical_json(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(state: CheckpointState, path):
    """Write the binary checkpoint; fsync before returning."""
    manifest = dict(state.manifest)
    manifest["arrays"] = [
        {"name": name, "shape": list(arr.shape)} for name, arr in state.arrays
    ]
    manifest_bytes = _canonical_json(manifest)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(manifest_bytes)))
        fh.write(manifest_bytes)
        for _, arr in state.arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.flush()
        os.fsync(fh.fileno())


def load_checkpoint(path) -> CheckpointState:
    """Read and validate a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise DataFormatError(
            f"{path}: truncated header, got {len(blob)} bytes, need 16",
            offset=len(blob), path=str(path),
        )
    if blob[:4] != CHECKPOINT_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {blob[:4]!r} at byte 0, expected {CHECKPOINT_MAGIC!r}",
            offset=0, path=str(path),
        )
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported checkpoint version {version}, "
            f"this build reads version {CHECKPOINT_VERSION}",
            offset=4, path=str(path),
        )
    (manifest_len,) = struct.unpack_from("<Q", blob, 8)
    manifest_end = 16 + manifest_len
    if len(blob) < manifest_end:
        raise DataFormatError(
            f"{path}: truncated manifest, expected {manifest_len} bytes at offset 16",
            offset=len(blob), path=str(path),
        )
    try:
        manifest = json.loads(blob[16:manifest_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(
            f"{path}: manifest is not valid JSON: {exc}", offset=16, path=str(path)
        ) from exc
    declared = manifest.get("arrays")
    if not isinstance(declared, list):
        raise DataFormatError(
            f"{path}: manifest lacks an arrays table", offset=16, path=str(path)
        )
    expected_payload = sum(
        _ITEM_BYTES * int(np.prod(entry["shape"], dtype=np.int64))
        for entry in declared
    )
    actual_payload = len(blob) - manifest_end
    if actual_payload != expected_payload:
        raise DataFormatError(
            f"{path}: payload length mismatch, expected {expected_payload} bytes, "
            f"got {actual_payload}",
            offset=manifest_end, path=str(path),
        )
    arrays = []
    cursor = manifest_end
    for entry in declared:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=cursor)
        arrays.append((entry["name"], arr.reshape(shape).astype(np.float64)))
        cursor += count * _ITEM_BYTES
    return CheckpointState(manifest=manifest, arrays=arrays)


# -- model/trainer state ------------------------------------------------


def _collect_arrays(gen: GeneratorModel, disc: DiscriminatorModel | None,
                    opt_g: Adam | None, opt_d: Adam | None):
    arrays = []
    for name, p in gen.parameters():
        arrays.append((f"param.{name}", p.data))
    for name, b in gen.buffers():
        arrays.append((f"buffer.{name}", b))
    if disc is not None:
        for name, p in disc.parameters():
            arrays.append((f"param.{name}", p.data))
        for name, b in disc.buffers():
            arrays.append((f"buffer.{name}", b))
    if opt_g is not None:
        for k, (m, v) in enumerate(zip(opt_g.m, opt_g.v)):
            arrays.append((f"adam_g.m.{k}", m))
            arrays.append((f"adam_g.v.{k}", v))
    if opt_d is not None:
        for k, (m, v) in enumerate(zip(opt_d.m, opt_d.v)):
            arrays.append((f"adam_d.m.{k}", m))
            arrays.append((f"adam_d.v.{k}", v))
    return arrays


def snapshot_trainer(trainer: Trainer, data_shape=None, seed: int | None = None) -> CheckpointState:
    """Checkpoint of a live training run, sufficient to resume bit-exactly."""
    cfg = trainer.config
    manifest = {
        "precision": "float64",
        "seed": int(cfg.seed if seed is None else seed),
        "rng_state": trainer.rng.bit_generator.state,
        "generator": trainer.gen.spec(),
        "discriminator": trainer.disc.spec(),
        "data_shape": list(data_shape) if data_shape is not None else None,
        "train": {
            "epoch": trainer.epoch,
            "step": trainer.step,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "reg_weight": cfg.reg_weight,
            "reg_weight_schedule": cfg.reg_weight_schedule,
            "learning_rate": cfg.learning_rate,
            "betas": list(cfg.betas),
            "n_critic": cfg.n_critic,
            "metrics_every": cfg.metrics_every,
        },
        "optimizer": {"adam_g_t": trainer.opt_g.t, "adam_d_t": trainer.opt_d.t},
    }
    arrays = _collect_arrays(trainer.gen, trainer.disc, trainer.opt_g, trainer.opt_d)
    return CheckpointState(manifest=manifest, arrays=arrays)


def snapshot_generator(gen: GeneratorModel, data_shape=None, seed: int = 0) -> CheckpointState:
    """Checkpoint of a frozen generator only."""
    manifest = {
        "precision": "float64",
        "seed": int(seed),
        "rng_state": None,
        "generator": gen.spec(),
        "discriminator": None,
        "data_shape": list(data_shape) if data_shape is not None else None,
        "train": None,
        "optimizer": None,
    }
    return CheckpointState(manifest=manifest, arrays=_collect_arrays(gen, None, None, None))


def _layer_from_spec(entry: dict):
    kind = entry.get("type")
    if kind == "multi_bias_linear":
        return MultiBiasLinear(entry["d_in"], entry["d_out"], entry["n_biases"])
    if kind == "batch_norm":
        return BatchNorm(entry["dim"], eps=entry["eps"], momentum=entry["momentum"])
    if kind == "activation":
        return Activation(entry["kind"], slope=entry["slope"])
    if kind == "spectral_norm_linear":
        return SpectralNormLinear(
            entry["d_in"], entry["d_out"],
            n_power_iterations=entry["n_power_iterations"],
        )
    raise DataFormatError(f"unknown layer type in manifest: {kind!r}")


def _load_into(model, arrays: dict):
    for name, p in model.parameters():
        key = f"param.{name}"
        if key not in arrays:
            raise DataFormatError(f"checkpoint is missing array {key!r}")
        value = arrays[key]
        if value.shape != p.data.shape:
            raise DataFormatError(
                f"array {key!r} has shape {value.shape}, expected {p.data.shape}"
            )
        p.data = value.copy()
    prefix = "gen" if isinstance(model, GeneratorModel) else "disc"
    for idx, layer in enumerate(model.layers):
        for name, _ in layer.buffers():
            key = f"buffer.{prefix}.{idx}.{name}"
            if key not in arrays:
                raise DataFormatError(f"checkpoint is missing array {key!r}")
            layer.set_buffer(name, arrays[key])


def restore_generator(state: CheckpointState) -> GeneratorModel:
    gen = GeneratorModel([_layer_from_spec(e) for e in state.manifest["generator"]])
    _load_into(gen, dict(state.arrays))
    return gen


def restore_discriminator(state: CheckpointState) -> DiscriminatorModel:
    spec = state.manifest.get("discriminator")
    if spec is None:
        raise ContractError("checkpoint holds no discriminator")
    disc = DiscriminatorModel([_layer_from_spec(e) for e in spec])
    _load_into(disc, dict(state.arrays))
    return disc


def restore_trainer(state: CheckpointState, data: np.ndarray) -> Trainer:
    """Rebuild a trainer mid-run; one further step matches the original
    bit-exactly."""
    train_info = state.manifest.get("train")
    if train_info is None:
        raise ContractError("checkpoint holds no training state")
    gen = restore_generator(state)
    disc = restore_discriminator(state)
    cfg = TrainConfig(
        epochs=train_info["epochs"],
        batch_size=train_info["batch_size"],
        seed=state.manifest["seed"],
        reg_weight=train_info["reg_weight"],
        reg_weight_schedule=train_info["reg_weight_schedule"],
        learning_rate=train_info["learning_rate"],
        betas=tuple(train_info["betas"]),
        n_critic=train_info["n_critic"],
        metrics_every=train_info["metrics_every"],
    )
    trainer = Trainer(gen, disc, data, cfg)
    trainer.epoch = train_info["epoch"]
    trainer.step = train_info["step"]
    rng_state = state.manifest.get("rng_state")
    if rng_state is not None:
        trainer.rng.bit_generator.state = rng_state
    arrays = dict(state.arrays)
    optimizer_info = state.manifest.get("optimizer") or {}
    trainer.opt_g.t = int(optimizer_info.get("adam_g_t", 0))
    trainer.opt_d.t = int(optimizer_info.get("adam_d_t", 0))
    for label, opt in (("adam_g", trainer.opt_g), ("adam_d", trainer.opt_d)):
        for k in range(len(opt.params)):
            opt.m[k] = arrays[f"{label}.m.{k}"].copy()
            opt.v[k] = arrays[f"{label}.v.{k}"].copy()
    return trainer


# -- run configuration ---------------------------------------------------


_DATASET_FIELDS = {
    "parallel_segments": {
        "required": {"n_manifolds": int, "n_per": int, "ambient_dim": int,
                     "separation": (int, float), "noise_sd": (int, float)},
        "optional": {"tangential_extent": (int, float)},
    },
    "disconnected_arcs": {
        "required": {"n_manifolds": int, "n_per": int},
        "optional": {"radius_start": (int, float), "radius_step": (int, float),
                     "arc_span_degrees": (int, float), "noise_sd": (int, float)},
    },
    "idx": {
        "required": {"images_path": str, "labels_path": str},
        "optional": {"limit": int, "downsample": bool, "classes": list},
    },
    "synthetic_digits": {
        "required": {"n_per_class": int},
        "optional": {"classes": list, "downsample": bool, "size": int},
    },
}

_MODEL_FIELDS = {
    "required": {"d_z": int, "hidden": list, "n_biases": int, "disc_hidden": list},
    "optional": {"weight_scale": (int, float)},
}

_TRAIN_FIELDS = {
    "required": {"epochs": int, "batch_size": int},
    "optional": {"reg_weight": (int, float), "reg_weight_schedule": list,
                 "encode_reg_weight": (int, float), "learning_rate": (int, float),
                 "betas": list, "n_critic": int},
}

_METRICS_FIELDS = {"required": {}, "optional": {"every_epochs": int}}


def _type_ok(value, expected) -> bool:
    if isinstance(value, bool):
        return expected is bool or (isinstance(expected, tuple) and bool in expected)
    return isinstance(value, expected)


def _type_name(expected) -> str:
    if isinstance(expected, tuple):
        return " or ".join(t.__name__ for t in expected)
    return expected.__name__


def _check_section(doc: dict, fields: dict, prefix: str, problems: list):
    for key, expected in fields["required"].items():
        if key not in doc:
            problems.append(f"{prefix}.{key}: missing required key")
        elif not _type_ok(doc[key], expected):
            problems.append(
                f"{prefix}.{key}: expected {_type_name(expected)}, "
                f"got {type(doc[key]).__name__}"
            )
    known = set(fields["required"]) | set(fields["optional"])
    for key, value in doc.items():
        if key not in known:
            problems.append(f"{prefix}.{key}: unknown key")
        elif key in fields["optional"] and not _type_ok(value, fields["optional"][key]):
            problems.append(
                f"{prefix}.{key}: expected {_type_name(fields['optional'][key])}, "
                f"got {type(value).__name__}"
            )


def validate_run_config(doc) -> list[str]:
    """Return every problem found; an empty list means the config is valid."""
    problems: list[str] = []
    if not isinstance(doc, dict):
        return ["config: expected a JSON object"]
    top_known = {"seed", "dataset", "model", "train", "metrics"}
    for key in doc:
        if key not in top_known:
            problems.append(f"{key}: unknown key")
    if "seed" not in doc:
        problems.append("seed: missing required key")
    elif not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
        problems.append(f"seed: expected int, got {type(doc['seed']).__name__}")
    for section in ("dataset", "model", "train"):
        if section not in doc:
            problems.append(f"{section}: missing required key")
        elif not isinstance(doc[section], dict):
            problems.append(f"{section}: expected object, got {type(doc[section]).__name__}")
    if problems:
        pass  # still try to validate what exists
    dataset = doc.get("dataset")
    if isinstance(dataset, dict):
        kind = dataset.get("kind")
        if kind is None:
            problems.append("dataset.kind: missing required key")
        elif kind not in _DATASET_FIELDS:
            problems.append(
                f"dataset.kind: unknown kind {kind!r}, expected one of "
                f"{sorted(_DATASET_FIELDS)}"
            )
        else:
            body = {k: v for k, v in dataset.items() if k != "kind"}
            _check_section(body, _DATASET_FIELDS[kind], "dataset", problems)
    if isinstance(doc.get("model"), dict):
        _check_section(doc["model"], _MODEL_FIELDS, "model", problems)
    if isinstance(doc.get("train"), dict):
        _check_section(doc["train"], _TRAIN_FIELDS, "train", problems)
    if "metrics" in doc:
        if not isinstance(doc["metrics"], dict):
            problems.append(f"metrics: expected object, got {type(doc['metrics']).__name__}")
        else:
            _check_section(doc["metrics"], _METRICS_FIELDS, "metrics", problems)
    return problems


@dataclass
class RunConfig:
    """Validated run configuration document."""

    doc: dict

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    @property
    def dataset(self) -> dict:
        return self.doc["dataset"]

    @property
    def model(self) -> dict:
        return self.doc["model"]

    @property
    def train(self) -> dict:
        return self.doc["train"]

    @property
    def metrics(self) -> dict:
        return self.doc.get("metrics", {})

    def train_config(self, seed: int | None = None) -> TrainConfig:
        t = self.train
        return TrainConfig(
            epochs=t["epochs"],
            batch_size=t["batch_size"],
            seed=self.seed if seed is None else seed,
            reg_weight=float(t.get("reg_weight", 0.0)),
            reg_weight_schedule=t.get("reg_weight_schedule"),
            learning_rate=float(t.get("learning_rate", 2e-4)),
            betas=tuple(t.get("betas", (0.9, 0.999))),
            n_critic=int(t.get("n_critic", 5)),
            metrics_every=int(self.metrics.get("every_epochs", 1)),
        )


def load_run_config(source) -> RunConfig:
    """Parse and validate a config from a path or a dict.

    Raises :class:`ConfigError` listing every offending key.
    """
    if isinstance(source, dict):
        doc = source
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: invalid JSON ({exc})"]) from exc
    problems = validate_run_config(doc)
    if problems:
        raise ConfigError(problems)
    return RunConfig(doc)


def config_hash(doc: dict) -> str:
    return hashlib.sha256(_canonical_json(doc)).hexdigest()
