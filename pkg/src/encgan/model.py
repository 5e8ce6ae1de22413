"""Generator and discriminator assemblies, priors, and ancestral sampling.

A generator is an ordered layer stack that is invertible layer by layer;
the discriminator is a spectrally normalized critic. Builders produce
the default MLP shapes used throughout: expanding multi-bias linear
layers with batch norm and leaky-relu, closed by tanh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ContractError
from .layers import Activation, BatchNorm, MultiBiasLinear, SpectralNormLinear
from .linalg import covariance_trace

__all__ = [
    "LatentPrior",
    "BiasSelector",
    "GeneratorModel",
    "DiscriminatorModel",
    "LayerEncoder",
    "sample",
    "recover_encoder",
    "build_mlp_generator",
    "build_discriminator",
]


@dataclass
class LatentPrior:
    """Standard normal prior over the latent space."""

    d_z: int

    def __post_init__(self):
        if self.d_z < 1:
            raise ContractError("latent dimension must be at least 1")

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.d_z))

    def log_density(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return -0.5 * (z * z).sum(axis=-1) - 0.5 * self.d_z * np.log(2.0 * np.pi)


@dataclass
class BiasSelector:
    """Uniform choice among the decoding biases (probabilities fixed 1/A)."""

    n_biases: int

    def __post_init__(self):
        if self.n_biases < 1:
            raise ContractError("need at least one bias")

    @property
    def probabilities(self) -> np.ndarray:
        return np.full(self.n_biases, 1.0 / self.n_biases)

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.integers(0, self.n_biases, size=n)


class GeneratorModel:
    """Ordered, layerwise-invertible generator stack.

    All multi-bias layers must share one bias count. Training-grade
    stacks end with tanh (the builders enforce this); diagnostic toys
    may use any invertible stack, including an empty one.
    """

    def __init__(self, layers):
        self.layers = list(layers)
        counts = {l.n_biases for l in self.multi_bias_layers}
        if len(counts) > 1:
            raise ContractError(f"multi-bias layers disagree on bias count: {sorted(counts)}")

    @property
    def multi_bias_layers(self) -> list[MultiBiasLinear]:
        return [l for l in self.layers if isinstance(l, MultiBiasLinear)]

    @property
    def n_biases(self) -> int:
        mbl = self.multi_bias_layers
        return mbl[0].n_biases if mbl else 1

    @property
    def d_z(self) -> int | None:
        mbl = self.multi_bias_layers
        return mbl[0].d_in if mbl else None

    @property
    def d_out(self) -> int | None:
        for layer in reversed(self.layers):
            if isinstance(layer, MultiBiasLinear):
                return layer.d_out
        return None

    def forward(self, z, bias_index, training: bool = False) -> Tensor:
        h = z
        for layer in self.layers:
            if isinstance(layer, MultiBiasLinear):
                h = layer.forward(h, bias_index)
            elif isinstance(layer, BatchNorm):
                h = layer.forward(h, training=training)
            else:
                h = layer.forward(h)
        return h if isinstance(h, Tensor) else Tensor(np.asarray(h, dtype=np.float64))

    def forward_with_biases(self, z, bias_rows, training: bool = False) -> Tensor:
        """Forward pass with caller-supplied bias tensors, one per
        multi-bias layer, in stack order. Used by the encoder search."""
        bias_rows = list(bias_rows)
        if len(bias_rows) != len(self.multi_bias_layers):
            raise ContractError(
                f"expected {len(self.multi_bias_layers)} bias tensors, got {len(bias_rows)}"
            )
        h = z
        k = 0
        for layer in self.layers:
            if isinstance(layer, MultiBiasLinear):
                h = layer.forward_given_bias(h, bias_rows[k])
                k += 1
            elif isinstance(layer, BatchNorm):
                h = layer.forward(h, training=training)
            else:
                h = layer.forward(h)
        return h

    def invert(self, x) -> np.ndarray:
        """Closed-form layerwise inversion using the recovered encoders.

        Exact for outputs generated with tangentially aligned biases and
        frozen normalization statistics.
        """
        h = np.asarray(x, dtype=np.float64)
        for layer in reversed(self.layers):
            h = layer.invert(h)
        return h

    def validate_for_training(self):
        if not self.layers:
            raise ContractError("generator stack is empty")
        last = self.layers[-1]
        if not (isinstance(last, Activation) and last.kind == "tanh"):
            raise ContractError("training-grade generators must end with tanh")
        if self.d_out is None:
            raise ContractError("generator has no multi-bias layer")

    def parameters(self):
        for idx, layer in enumerate(self.layers):
            for name, p in layer.parameters():
                yield f"gen.{idx}.{name}", p

    def buffers(self):
        for idx, layer in enumerate(self.layers):
            for name, b in layer.buffers():
                yield f"gen.{idx}.{name}", b

    def spec(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]


class DiscriminatorModel:
    """Spectrally normalized critic producing one score per sample."""

    def __init__(self, layers):
        self.layers = list(layers)
        for layer in self.layers:
            if not isinstance(layer, (SpectralNormLinear, Activation)):
                raise ContractError(
                    "discriminator accepts spectral-norm linear layers and activations only"
                )

    def forward(self, x, training: bool = False) -> Tensor:
        h = x
        for layer in self.layers:
            if isinstance(layer, SpectralNormLinear):
                h = layer.forward(h, training=training)
            else:
                h = layer.forward(h)
        return h

    def power_update(self, iterations: int | None = None):
        for layer in self.layers:
            if isinstance(layer, SpectralNormLinear):
                layer.power_update(iterations)

    def parameters(self):
        for idx, layer in enumerate(self.layers):
            for name, p in layer.parameters():
                yield f"disc.{idx}.{name}", p

    def buffers(self):
        for idx, layer in enumerate(self.layers):
            for name, b in layer.buffers():
                yield f"disc.{idx}.{name}", b

    def spec(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]


def sample(gen: GeneratorModel, prior: LatentPrior, selector: BiasSelector,
           n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Ancestral sampling: latent draws from the prior, bias indices from
    the selector, decoded through the frozen generator.

    Deterministic given a seeded ``rng``; latents are drawn before
    indices.
    """
    z = prior.sample(rng, n)
    idx = selector.sample(rng, n)
    x = gen.forward(z, idx, training=False)
    return x.data.copy(), idx


@dataclass
class LayerEncoder:
    """Recovered encoder of one multi-bias layer plus its alignment residual."""

    weight: np.ndarray          # W with z = W.T @ y + offset
    offset: np.ndarray
    alignment_residual: float   # covariance trace of the projected biases

    def apply(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            return self.weight.T @ y + self.offset
        return y @ self.weight + self.offset


def recover_encoder(gen: GeneratorModel) -> list[LayerEncoder]:
    """Per-layer encoder recovery from the decoder parameterization.

    The residual reports how far the biases are from sharing their
    tangential components; the recovered encoder is exact only in the
    aligned limit.
    """
    out = []
    for layer in gen.multi_bias_layers:
        w, b = layer.encoder()
        residual = (
            covariance_trace(layer.tangential_components())
            if layer.n_biases >= 2
            else 0.0
        )
        out.append(LayerEncoder(weight=w, offset=b, alignment_residual=residual))
    return out


def build_mlp_generator(d_z: int, hidden_dims, d_out: int, n_biases: int,
                        rng=None, weight_scale: float = 0.02) -> GeneratorModel:
    """Expanding MLP generator: [multi-bias linear, batch norm,
    leaky-relu] per hidden layer, final multi-bias linear + tanh."""
    if rng is None:
        rng = np.random.default_rng(0)
    dims = [d_z, *hidden_dims, d_out]
    for a, b in zip(dims, dims[1:]):
        if a >= b:
            raise ContractError(f"generator dims must strictly expand, got {dims}")
    layers = []
    for a, b in zip(dims[:-2], dims[1:-1]):
        layers.append(MultiBiasLinear(a, b, n_biases, rng, weight_scale=weight_scale))
        layers.append(BatchNorm(b))
        layers.append(Activation("leaky_relu", 0.2))
    layers.append(MultiBiasLinear(dims[-2], dims[-1], n_biases, rng,
                                  weight_scale=weight_scale))
    layers.append(Activation("tanh"))
    return GeneratorModel(layers)


def build_discriminator(d_in: int, hidden_dims, rng=None) -> DiscriminatorModel:
    """Critic MLP: spectral-norm linear + leaky-relu blocks, scalar head."""
    if rng is None:
        rng = np.random.default_rng(0)
    layers = []
    prev = d_in
    for h in hidden_dims:
        layers.append(SpectralNormLinear(prev, h, rng))
        layers.append(Activation("leaky_relu", 0.2))
        prev = h
    layers.append(SpectralNormLinear(prev, 1, rng))
    return DiscriminatorModel(layers)
