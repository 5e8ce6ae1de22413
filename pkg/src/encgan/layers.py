"""Neural building blocks.

The generator side is built from :class:`MultiBiasLinear` layers (one
shared weight, several decoding biases) plus batch normalization and
invertible activations; every generator layer exposes a closed-form
``invert``. The discriminator side uses :class:`SpectralNormLinear`
layers whose effective weight is divided by a power-iteration estimate
of the largest singular value.
"""

from __future__ import annotations

import warnings

import numpy as np

from .autodiff import Tensor, matmul, select_rows, transpose
from .errors import ContractError, DimensionMismatchError
from .linalg import gram_inverse, pseudo_inverse_apply, tangential_projector

__all__ = [
    "MultiBiasLinear",
    "Activation",
    "BatchNorm",
    "SpectralNormLinear",
    "align_bias_tangential",
]

SIGMA_FLOOR = 1e-12
TANH_INVERT_MARGIN = 1e-7


def _as_input(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


class MultiBiasLinear:
    """Expanding linear layer with one weight and several decoding biases.

    Maps a low-dimensional input to ``weight @ x + bias[i]`` where ``i``
    selects one of ``n_biases`` additive offsets. The weight must stay
    full column rank so the layer can be inverted: inversion applies the
    pseudo-inverse of the weight to the input shifted by the mean bias,
    which recovers the original point exactly whenever the biases share
    their tangential components.
    """

    def __init__(self, d_in: int, d_out: int, n_biases: int, rng=None,
                 weight_scale: float = 0.02, bias_scale: float = 0.02):
        if d_in >= d_out:
            raise ContractError(
                f"multi-bias layer must expand: d_in={d_in} >= d_out={d_out}"
            )
        if n_biases < 1:
            raise ContractError(f"n_biases must be positive, got {n_biases}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.d_in = d_in
        self.d_out = d_out
        self.n_biases = n_biases
        self.weight = Tensor(rng.normal(0.0, weight_scale, (d_out, d_in)),
                             requires_grad=True)
        # deliberately non-identical draws: identical biases would make
        # every manifold coincide and the alignment penalty gradient vanish
        self.biases = [
            Tensor(rng.normal(0.0, bias_scale, d_out), requires_grad=True)
            for _ in range(n_biases)
        ]

    def forward(self, x, bias_index) -> Tensor:
        """``weight @ x + bias``; batched inputs take one index per row.

        Only the selected bias receives gradient.
        """
        x = _as_input(x)
        if x.ndim == 1:
            i = int(bias_index)
            self._check_index(i)
            return matmul(self.weight, x) + self.biases[i]
        if x.ndim == 2:
            if np.isscalar(bias_index) or np.asarray(bias_index).ndim == 0:
                i = int(bias_index)
                self._check_index(i)
                return matmul(x, transpose(self.weight)) + self.biases[i]
            return matmul(x, transpose(self.weight)) + select_rows(
                self.biases, bias_index
            )
        raise DimensionMismatchError(f"expected vector or row batch, got {x.shape}")

    def forward_given_bias(self, x, bias: Tensor) -> Tensor:
        """Affine map with caller-supplied bias rows instead of stored ones."""
        x = _as_input(x)
        if x.ndim == 1:
            return matmul(self.weight, x) + bias
        return matmul(x, transpose(self.weight)) + bias

    def invert(self, y) -> np.ndarray:
        """Recover the input from an output, eliminating the component
        normal to the weight's column space.

        Uses the mean bias: exact when the biases' tangential components
        agree, least-squares-consistent otherwise.
        """
        y_arr = np.asarray(y, dtype=np.float64)
        return pseudo_inverse_apply(self.weight.data, y_arr - self.mean_bias())

    def encoder(self) -> tuple[np.ndarray, np.ndarray]:
        """Recovered encoder ``(W, b)`` with ``z = W.T @ y + b``.

        ``W = U (U'U)^-1`` and ``b = -(U'U)^-1 U' a_mean``.
        """
        u = self.weight.data
        ginv = gram_inverse(u)
        w = u @ ginv
        b = -ginv @ (u.T @ self.mean_bias())
        return w, b

    def mean_bias(self) -> np.ndarray:
        return np.mean([b.data for b in self.biases], axis=0)

    def bias_matrix(self) -> np.ndarray:
        return np.stack([b.data for b in self.biases], axis=0)

    def tangential_components(self) -> np.ndarray:
        """Projected bias coordinates ``{U' a_i}`` as rows."""
        return self.bias_matrix() @ self.weight.data

    def parameters(self):
        yield "weight", self.weight
        for k, b in enumerate(self.biases):
            yield f"bias.{k}", b

    def buffers(self):
        return ()

    def spec(self) -> dict:
        return {
            "type": "multi_bias_linear",
            "d_in": self.d_in,
            "d_out": self.d_out,
            "n_biases": self.n_biases,
        }

    def _check_index(self, i: int):
        if not 0 <= i < self.n_biases:
            raise ContractError(
                f"bias index out of range: valid [0, {self.n_biases}), got {i}"
            )


class Activation:
    """Pointwise bijection on the reals: leaky-relu or tanh."""

    KINDS = ("leaky_relu", "tanh")

    def __init__(self, kind: str, slope: float = 0.2):
        if kind not in self.KINDS:
            raise ContractError(f"unknown activation kind {kind!r}")
        if kind == "leaky_relu" and not 0.0 < slope < 1.0:
            raise ContractError("leaky-relu slope must lie in (0, 1)")
        self.kind = kind
        self.slope = float(slope)

    def forward(self, x) -> Tensor:
        x = _as_input(x)
        if self.kind == "tanh":
            return x.tanh()
        return x.leaky_relu(self.slope)

    def invert(self, y) -> np.ndarray:
        """Exact functional inverse; tanh inputs are clamped just inside
        (-1, 1) first, which is lossy only at saturation."""
        y_arr = np.asarray(y, dtype=np.float64)
        if self.kind == "tanh":
            clamped = np.clip(y_arr, -1.0 + TANH_INVERT_MARGIN, 1.0 - TANH_INVERT_MARGIN)
            return np.arctanh(clamped)
        return np.where(y_arr >= 0.0, y_arr, y_arr / self.slope)

    def parameters(self):
        return ()

    def buffers(self):
        return ()

    def spec(self) -> dict:
        return {"type": "activation", "kind": self.kind, "slope": self.slope}


class BatchNorm:
    """Per-feature normalization with learnable scale and shift.

    Training mode standardizes with batch statistics and updates the
    running moments; inference mode (and inversion) always uses the
    frozen running statistics so single samples are well defined.
    """

    def __init__(self, dim: int, eps: float = 1e-5, momentum: float = 0.1):
        if not 0.0 < momentum < 1.0:
            raise ContractError("momentum must lie in (0, 1)")
        if eps <= 0.0:
            raise ContractError("eps must be positive")
        self.dim = dim
        self.eps = float(eps)
        self.momentum = float(momentum)
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def forward(self, x, training: bool = False) -> Tensor:
        x = _as_input(x)
        if training:
            if x.ndim != 2 or x.shape[0] < 2:
                raise ContractError("training-mode batch norm needs a batch of >= 2 rows")
            mu = x.mean(axis=0)
            centered = x - mu
            var = (centered * centered).mean(axis=0)
            normalized = centered * ((var + self.eps) ** -0.5)
            m = self.momentum
            self.running_mean = (1.0 - m) * self.running_mean + m * mu.data
            self.running_var = (1.0 - m) * self.running_var + m * var.data
        else:
            mean_c = Tensor(self.running_mean)
            scale_c = Tensor(1.0 / np.sqrt(self.running_var + self.eps))
            normalized = (x - mean_c) * scale_c
        return self.gamma * normalized + self.beta

    def invert(self, y) -> np.ndarray:
        """Closed-form inverse of the inference-mode forward."""
        if np.any(self.gamma.data == 0.0):
            raise ContractError("batch norm gamma has a zero element, not invertible")
        y_arr = np.asarray(y, dtype=np.float64)
        scale = np.sqrt(self.running_var + self.eps)
        return (y_arr - self.beta.data) / self.gamma.data * scale + self.running_mean

    def parameters(self):
        yield "gamma", self.gamma
        yield "beta", self.beta

    def buffers(self):
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var

    def set_buffer(self, name: str, value: np.ndarray):
        if name == "running_mean":
            self.running_mean = np.array(value, dtype=np.float64)
        elif name == "running_var":
            self.running_var = np.array(value, dtype=np.float64)
        else:
            raise ContractError(f"unknown batch-norm buffer {name!r}")

    def spec(self) -> dict:
        return {
            "type": "batch_norm",
            "dim": self.dim,
            "eps": self.eps,
            "momentum": self.momentum,
        }


class SpectralNormLinear:
    """Linear layer whose weight is divided by its estimated largest
    singular value, keeping the map approximately 1-Lipschitz.

    The estimate comes from power iteration on persistent state vectors;
    one update per training step is the default, a convergence check
    runs fifty. The additive bias is outside the normalization (shifts
    do not change the Lipschitz constant); without it the critic would
    be positively homogeneous with its score pinned to zero at the
    origin, which cripples training on data that crosses the origin.
    """

    VERIFY_ITERATIONS = 50

    def __init__(self, d_in: int, d_out: int, rng=None, n_power_iterations: int = 1):
        if n_power_iterations < 1:
            raise ContractError("n_power_iterations must be positive")
        if rng is None:
            rng = np.random.default_rng(0)
        self.d_in = d_in
        self.d_out = d_out
        self.n_power_iterations = int(n_power_iterations)
        self.weight_raw = Tensor(
            rng.normal(0.0, np.sqrt(2.0 / d_in), (d_out, d_in)), requires_grad=True
        )
        self.bias = Tensor(np.zeros(d_out), requires_grad=True)
        self.u_vec = _unit(rng.normal(size=d_out))
        self.v_vec = _unit(rng.normal(size=d_in))
        # one warm-up update keeps the first sigma estimate positive
        self.power_update(1)

    def power_update(self, iterations: int | None = None):
        """Advance the power-iteration state on the raw weight."""
        w = self.weight_raw.data
        for _ in range(iterations if iterations is not None else self.n_power_iterations):
            self.v_vec = _unit(w.T @ self.u_vec, fallback=self.v_vec)
            self.u_vec = _unit(w @ self.v_vec, fallback=self.u_vec)

    def sigma_estimate(self) -> float:
        return float(self.u_vec @ self.weight_raw.data @ self.v_vec)

    def effective_weight(self) -> Tensor:
        """``weight_raw / sigma`` as a graph node, so gradients see the
        normalization. A floor keeps the division defined for the zero
        matrix (with a warning)."""
        sigma = matmul(Tensor(self.u_vec), matmul(self.weight_raw, Tensor(self.v_vec)))
        if sigma.data < SIGMA_FLOOR:
            warnings.warn(
                "spectral norm estimate below floor; clamping to 1e-12",
                RuntimeWarning,
                stacklevel=2,
            )
            sigma = Tensor(np.asarray(SIGMA_FLOOR))
        return self.weight_raw * sigma ** -1.0

    def forward(self, x, training: bool = False) -> Tensor:
        if training:
            self.power_update()
        w = self.effective_weight()
        x = _as_input(x)
        if x.ndim == 1:
            return matmul(w, x) + self.bias
        return matmul(x, transpose(w)) + self.bias

    def parameters(self):
        yield "weight_raw", self.weight_raw
        yield "bias", self.bias

    def buffers(self):
        yield "u_vec", self.u_vec
        yield "v_vec", self.v_vec

    def set_buffer(self, name: str, value: np.ndarray):
        if name == "u_vec":
            self.u_vec = np.array(value, dtype=np.float64)
        elif name == "v_vec":
            self.v_vec = np.array(value, dtype=np.float64)
        else:
            raise ContractError(f"unknown spectral-norm buffer {name!r}")

    def spec(self) -> dict:
        return {
            "type": "spectral_norm_linear",
            "d_in": self.d_in,
            "d_out": self.d_out,
            "n_power_iterations": self.n_power_iterations,
        }


def _unit(vec: np.ndarray, fallback: np.ndarray | None = None) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm < 1e-32:
        if fallback is not None:
            return fallback
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return vec / norm


def align_bias_tangential(layer: MultiBiasLinear, target: np.ndarray | None = None):
    """Overwrite the biases so they share one tangential component.

    Each bias keeps its own normal part; the component inside the
    weight's column space is replaced by the projection of ``target``
    (default: the current mean bias). Afterwards inversion round-trips
    exactly for every bias index.
    """
    projector = tangential_projector(layer.weight.data)
    if target is None:
        target = layer.mean_bias()
    shared = projector @ np.asarray(target, dtype=np.float64)
    for bias in layer.biases:
        normal_part = bias.data - projector @ bias.data
        bias.data = shared + normal_part
    return layer
