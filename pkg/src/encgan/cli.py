"""Command-line surface: train, generate, encode, transfer, score, verify.

Every command is a pure function of its config, seed and input files;
artifacts are NDJSON records, binary checkpoints, PGM/PPM images and
SVG charts. Exit codes: 0 success, 2 config error, 3 numeric abort,
4 optimization failure, 5 I/O failure. Math happens in the library; the
CLI only routes values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    ContractError,
    DataFormatError,
    OptimizationError,
    SingularMatrixError,
    TrainingAbortError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_OPTIMIZATION = 4
EXIT_IO = 5

_THREAD_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS")


def _set_threads(n: int):
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encgan",
        description="train, sample, encode and verify multi-bias generators",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="worker thread cap; 1 guarantees bit-determinism")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("generate", help="sample from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=8, help="sample count (grid columns with --per-bias)")
    p.add_argument("--per-bias", action="store_true",
                   help="emit a grid: one row per bias, latent codes shared column-wise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("encode", help="recover latent code and biases for samples")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="NDJSON sample file or PGM image")
    p.add_argument("--mu", type=float, default=0.1, help="alignment penalty weight")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("transfer", help="style transfer between two samples")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="source sample (NDJSON or PGM)")
    p.add_argument("--target", required=True, help="target sample (NDJSON or PGM)")
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_transfer)

    p = sub.add_parser("score", help="disentanglement score for one transform family")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="dataset config JSON path")
    p.add_argument("--transform", required=True,
                   choices=["shear", "width", "brightness"])
    p.add_argument("--levels", type=int, default=11)
    p.add_argument("--count", type=int, default=500, help="base samples to encode")
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("verify", help="run the numerical property suite")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional NDJSON report path")
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(max(1, args.threads))
    try:
        return args.handler(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingAbortError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        if exc.snapshot:
            print(f"diagnostic snapshot: {json.dumps(exc.snapshot, sort_keys=True)}",
                  file=sys.stderr)
        return EXIT_NUMERIC
    except SingularMatrixError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OptimizationError as exc:
        print(f"optimization failure: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    except (DataFormatError, OSError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


# -- input parsing -------------------------------------------------------


def _load_samples(path: str):
    """Samples from an NDJSON values file or a single PGM image."""
    import numpy as np

    if path.endswith(".pgm"):
        with open(path, "rb") as fh:
            if fh.readline().strip() != b"P5":
                raise DataFormatError(f"{path}: not a binary PGM file", offset=0, path=path)
            dims = fh.readline().split()
            w, h = int(dims[0]), int(dims[1])
            maxval = int(fh.readline())
            raw = fh.read(w * h)
        if len(raw) != w * h:
            raise DataFormatError(f"{path}: truncated pixel data", offset=None, path=path)
        img = np.frombuffer(raw, dtype=np.uint8).reshape(h, w).astype(np.float64)
        return (img / maxval * 2.0 - 1.0).reshape(1, -1)
    from .runs import read_ndjson

    rows = read_ndjson(path)
    if not rows:
        raise DataFormatError(f"{path}: no records", path=path)
    return np.asarray([r["values"] for r in rows], dtype=np.float64)


def _maybe_write_image(values, data_shape, path):
    from .images import write_pgm

    if data_shape is not None and len(data_shape) == 2:
        import numpy as np

        write_pgm(path, np.asarray(values).reshape(data_shape))
        return path
    return None


# -- handlers ------------------------------------------------------------


def cmd_train(args) -> int:
    from .persist import load_run_config
    from .runs import run_training

    config = load_run_config(args.config)
    run_training(config, args.out)
    print(f"training complete; artifacts in {args.out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    import numpy as np

    from .images import tile_grid, write_pgm
    from .model import BiasSelector, LatentPrior, sample
    from .persist import load_checkpoint, restore_generator
    from .runs import resolve_seed, write_ndjson, write_run_manifest

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = load_checkpoint(args.checkpoint)
    gen = restore_generator(state)
    data_shape = state.manifest.get("data_shape")
    seed = resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    records = []
    if args.per_bias:
        prior = LatentPrior(gen.d_z)
        z = prior.sample(rng, args.n)
        images = []
        for bias in range(gen.n_biases):
            values = gen.forward(z, bias, training=False).data
            for col in range(args.n):
                records.append({
                    "bias": bias,
                    "column": col,
                    "z": z[col].tolist(),
                    "values": values[col].tolist(),
                })
                images.append(values[col])
        if data_shape is not None and len(data_shape) == 2:
            grid = tile_grid(np.asarray(images).reshape(-1, *data_shape),
                             gen.n_biases, args.n)
            write_pgm(out_dir / "grid.pgm", grid)
    else:
        values, idx = sample(gen, LatentPrior(gen.d_z), BiasSelector(gen.n_biases),
                             args.n, rng)
        for k in range(args.n):
            records.append({
                "bias": int(idx[k]),
                "column": k,
                "values": values[k].tolist(),
            })
        if data_shape is not None and len(data_shape) == 2:
            grid = tile_grid(values.reshape(-1, *data_shape), 1, args.n)
            write_pgm(out_dir / "grid.pgm", grid)
    write_ndjson(out_dir / "samples.ndjson", records)
    write_run_manifest(out_dir, "generate", None, seed,
                       extra={"checkpoint": str(args.checkpoint), "n": args.n,
                              "per_bias": bool(args.per_bias)})
    return EXIT_OK


def _encode_records(results):
    return [
        {
            "index": k,
            "z": r.z.tolist(),
            "biases": [b.tolist() for b in r.biases],
            "reconstruction_error": r.reconstruction_error,
        }
        for k, r in enumerate(results)
    ]


def cmd_encode(args) -> int:
    from .encoding import EncodeConfig, encode
    from .persist import load_checkpoint, restore_generator
    from .runs import write_ndjson, write_run_manifest

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = load_checkpoint(args.checkpoint)
    gen = restore_generator(state)
    samples = _load_samples(args.input)
    results = encode(gen, samples, EncodeConfig(reg_weight=args.mu))
    write_ndjson(out_dir / "encode.ndjson", _encode_records(results))
    write_run_manifest(out_dir, "encode", None, 0,
                       extra={"checkpoint": str(args.checkpoint), "mu": args.mu,
                              "input": str(args.input)})
    return EXIT_OK


def cmd_transfer(args) -> int:
    from .encoding import EncodeConfig, style_transfer
    from .persist import load_checkpoint, restore_generator
    from .runs import write_ndjson, write_run_manifest

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = load_checkpoint(args.checkpoint)
    gen = restore_generator(state)
    source = _load_samples(args.input)[0]
    target = _load_samples(args.target)[0]
    output, enc_source, enc_target = style_transfer(
        gen, source, target, EncodeConfig(reg_weight=args.mu), return_details=True
    )
    records = _encode_records([enc_source, enc_target])
    records[0]["role"] = "source"
    records[1]["role"] = "target"
    records.append({"role": "transfer", "values": output.tolist()})
    write_ndjson(out_dir / "transfer.ndjson", records)
    _maybe_write_image(output, state.manifest.get("data_shape"),
                       out_dir / "transfer.pgm")
    write_run_manifest(out_dir, "transfer", None, 0,
                       extra={"checkpoint": str(args.checkpoint), "mu": args.mu})
    return EXIT_OK


def cmd_score(args) -> int:
    import numpy as np

    from .datasets import apply_transform, make_transform_family
    from .encoding import EncodeConfig, encode
    from .metrics import disentanglement_score
    from .persist import load_checkpoint, load_run_config, restore_generator
    from .runs import dataset_from_config, resolve_seed, write_ndjson, write_run_manifest
    from .svgplot import spectrum_chart

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = load_checkpoint(args.checkpoint)
    gen = restore_generator(state)
    with open(args.dataset, "r", encoding="utf-8") as fh:
        dataset_cfg = json.load(fh)
    seed = resolve_seed(args.seed)
    ds = dataset_from_config(dataset_cfg, seed)
    count = min(args.count, ds.n)
    base = ds.subset(np.arange(count))

    kind = {"shear": "shear", "width": "width-scale", "brightness": "brightness"}[args.transform]
    family = make_transform_family(kind, n_levels=args.levels)
    batches = []
    for level in family.levels:
        transformed = apply_transform(base, family, float(level))
        batches.append(transformed.flat())
    stacked = np.concatenate(batches, axis=0)           # level-major
    results = encode(gen, stacked, EncodeConfig(reg_weight=args.mu))
    codes = np.stack([r.z for r in results])
    n_levels = len(family.levels)
    groups = np.stack([codes[lvl * count:(lvl + 1) * count] for lvl in range(n_levels)],
                      axis=1)                           # (count, n_levels, d_z)
    report = disentanglement_score(groups)
    record = report.to_json()
    record.update({"transform": kind, "levels": family.levels.tolist(),
                   "base_count": count})
    write_ndjson(out_dir / "score.ndjson", [record])
    spectrum_chart(report.spectrum, out_dir / "spectrum.svg",
                   title=f"latent spectrum under {kind}")
    write_run_manifest(out_dir, "score", dataset_cfg, seed,
                       extra={"checkpoint": str(args.checkpoint),
                              "transform": kind, "count": count})
    if report.warning:
        print(f"warning: {report.warning}", file=sys.stderr)
    print(f"disentanglement score: {report.score:.4g}"
          + (" (saturated)" if report.saturated else ""))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_property_suite

    records = run_property_suite(trials=args.trials, seed=args.seed)
    failed = [r for r in records if not r["passed"]]
    lines = [json.dumps(r, sort_keys=True) for r in records]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
    for line in lines:
        print(line)
    return EXIT_OK if not failed else 1


if __name__ == "__main__":
    sys.exit(main())
