"""Multi-bias linear GAN with a recoverable encoder.

The generator decodes one shared latent space through layers that carry
several additive biases; a log-trace penalty keeps the biases'
tangential components aligned so a single encoder stays implicitly
defined and every generator layer can be inverted in closed form.

Submodules are imported lazily so the command-line entry point can pin
thread counts before numpy loads.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "Tensor": "autodiff",
    "backward": "autodiff",
    "matmul": "autodiff",
    "select_rows": "autodiff",
    "transpose": "autodiff",
    "sym_eigen": "linalg",
    "pseudo_inverse_apply": "linalg",
    "covariance_trace": "linalg",
    "gram_inverse": "linalg",
    "tangential_projector": "linalg",
    "MultiBiasLinear": "layers",
    "Activation": "layers",
    "BatchNorm": "layers",
    "SpectralNormLinear": "layers",
    "align_bias_tangential": "layers",
    "GeneratorModel": "model",
    "DiscriminatorModel": "model",
    "LatentPrior": "model",
    "BiasSelector": "model",
    "sample": "model",
    "recover_encoder": "model",
    "build_mlp_generator": "model",
    "build_discriminator": "model",
    "bias_regularizer": "objectives",
    "layer_tangential_spread": "objectives",
    "wgan_losses": "objectives",
    "bias_alignment_bound": "objectives",
    "AlignmentBound": "objectives",
    "Adam": "training",
    "TrainConfig": "training",
    "Trainer": "training",
    "train": "training",
    "EncodeConfig": "encoding",
    "EncodeResult": "encoding",
    "encode": "encoding",
    "style_transfer": "encoding",
    "LabeledDataset": "datasets",
    "TransformFamily": "datasets",
    "make_transform_family": "datasets",
    "gen_parallel_segments": "datasets",
    "gen_disconnected_arcs": "datasets",
    "gen_synthetic_digits": "datasets",
    "load_idx": "datasets",
    "write_idx": "datasets",
    "apply_transform": "datasets",
    "disentanglement_score": "metrics",
    "DisentanglementReport": "metrics",
    "alignment_report": "metrics",
    "AlignmentReport": "metrics",
    "manifold_coverage": "metrics",
    "CoverageReport": "metrics",
    "generator_jacobian": "metrics",
    "pushforward_density": "metrics",
    "integrate_pushforward_1d": "metrics",
    "CheckpointState": "persist",
    "save_checkpoint": "persist",
    "load_checkpoint": "persist",
    "snapshot_trainer": "persist",
    "snapshot_generator": "persist",
    "restore_trainer": "persist",
    "restore_generator": "persist",
    "RunConfig": "persist",
    "validate_run_config": "persist",
    "load_run_config": "persist",
    "config_hash": "persist",
    "EncoderPoweredGan": "estimator",
    "run_gradient_checks": "gradcheck",
    "EncganError": "errors",
    "ContractError": "errors",
    "DimensionMismatchError": "errors",
    "SingularMatrixError": "errors",
    "DataFormatError": "errors",
    "UnsupportedVersionError": "errors",
    "ConfigError": "errors",
    "TrainingAbortError": "errors",
    "OptimizationError": "errors",
}

__all__ = ["__version__", *sorted(_EXPORTS)]


def __getattr__(name):
    module_name = _EXPORTS.get(name)
    if module_name is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    import importlib

    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
