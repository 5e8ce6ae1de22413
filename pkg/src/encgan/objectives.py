"""Training objectives and the bias-alignment bound.

The generator loss couples the usual critic term with a log-trace
penalty on the spread of the projected bias coordinates ``{U' a_i}``.
That trace upper-bounds (up to a spectral factor) the spread of the
biases' tangential components, which is the quantity that must vanish
for a single shared encoder to exist; :func:`bias_alignment_bound`
evaluates both sides of that inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, matmul, transpose
from .errors import ContractError, SingularMatrixError
from .layers import MultiBiasLinear
from .linalg import RANK_RTOL, covariance_trace, pseudo_inverse_apply, sym_eigen
from .model import DiscriminatorModel, GeneratorModel

__all__ = [
    "EPS_REG",
    "layer_tangential_spread",
    "bias_regularizer",
    "wgan_losses",
    "AlignmentBound",
    "bias_alignment_bound",
]

# floor inside every log: perfect alignment is the penalty's fixed point,
# where the raw log would be undefined
EPS_REG = 1e-12


def layer_tangential_spread(layer: MultiBiasLinear) -> Tensor:
    """Differentiable covariance trace of the projected biases
    ``{U' a_i}`` of one layer (n-1 denominator)."""
    if layer.n_biases < 2:
        raise ContractError("tangential spread needs at least two biases")
    ut = transpose(layer.weight)
    projected = [matmul(ut, b) for b in layer.biases]
    mean = projected[0]
    for t in projected[1:]:
        mean = mean + t
    mean = mean * (1.0 / layer.n_biases)
    total = None
    for t in projected:
        dev = t - mean
        term = (dev * dev).sum()
        total = term if total is None else total + term
    return total * (1.0 / (layer.n_biases - 1))


def bias_regularizer(gen: GeneratorModel, eps: float = EPS_REG) -> Tensor:
    """Sum over multi-bias layers of ``log(spread + eps)``.

    Differentiable with respect to every weight and bias; requires at
    least two biases.
    """
    layers = gen.multi_bias_layers
    if not layers:
        raise ContractError("generator has no multi-bias layer")
    if gen.n_biases < 2:
        raise ContractError("bias regularizer needs at least two biases")
    total = None
    for layer in layers:
        term = (layer_tangential_spread(layer) + eps).log()
        total = term if total is None else total + term
    return total


def wgan_losses(gen: GeneratorModel, disc: DiscriminatorModel,
                real_batch, fake_batch, reg_weight: float,
                training: bool = False) -> tuple[Tensor, Tensor]:
    """Critic-based losses over batch means.

    ``L_G = -mean(D(fake)) + reg_weight * regularizer`` and
    ``L_D = mean(D(fake)) - mean(D(real))``. With ``reg_weight == 0``
    this is exactly the Wasserstein pair.
    """
    real_t = real_batch if isinstance(real_batch, Tensor) else Tensor(np.asarray(real_batch, dtype=np.float64))
    fake_t = fake_batch if isinstance(fake_batch, Tensor) else Tensor(np.asarray(fake_batch, dtype=np.float64))
    if real_t.ndim != 2 or fake_t.ndim != 2:
        raise ContractError("batches must be row matrices")
    if real_t.shape[0] == 0 or fake_t.shape[0] == 0:
        raise ContractError("batches must be nonempty")
    if real_t.shape[1] != fake_t.shape[1]:
        raise ContractError(
            f"real and fake data dimensions disagree: {real_t.shape[1]} vs {fake_t.shape[1]}"
        )
    fake_score = disc.forward(fake_t, training=training).mean()
    real_score = disc.forward(real_t, training=training).mean()
    loss_d = fake_score - real_score
    loss_g = -fake_score
    if reg_weight != 0.0:
        loss_g = loss_g + float(reg_weight) * bias_regularizer(gen)
    return loss_g, loss_d


@dataclass
class AlignmentBound:
    """Both sides of the alignment inequality for one weight/bias family.

    ``lhs`` is the covariance trace of the projected bias coordinates,
    ``rhs`` scales the tangential-component spread by the harmonic mean
    of the weight-gram eigenvalues over the latent dimension. The
    inequality guarantees ``margin = lhs - rhs >= 0`` up to rounding.
    """

    lhs: float
    rhs: float
    margin: float
    eigenvalues: np.ndarray


def bias_alignment_bound(u, biases) -> AlignmentBound:
    """Evaluate ``trace(cov(U'a)) >= (H/d_z) * trace(cov(a_par))``.

    ``H`` is the harmonic mean of the eigenvalues of ``U'U`` and
    ``a_par`` the projections of the biases onto the column space of
    ``U``. Raises on rank-deficient ``U`` or fewer than two biases.
    """
    u = np.asarray(u, dtype=np.float64)
    stacked = np.stack([np.asarray(b, dtype=np.float64) for b in biases], axis=0)
    if stacked.shape[0] < 2:
        raise ContractError("alignment bound needs at least two biases")
    d_z = u.shape[1]
    w, _ = sym_eigen(u.T @ u)
    if w[0] <= 0.0 or w[-1] < RANK_RTOL * w[0]:
        raise SingularMatrixError(
            f"weight is rank deficient: smallest gram eigenvalue {w[-1]:.3e}",
            eigenvalue=float(w[-1]),
        )
    lhs = covariance_trace(stacked @ u)
    harmonic = d_z / float((1.0 / w).sum())
    tangential = pseudo_inverse_apply(u, stacked) @ u.T
    rhs = harmonic / d_z * covariance_trace(tangential)
    return AlignmentBound(lhs=lhs, rhs=rhs, margin=lhs - rhs, eigenvalues=w)
