"""Latent recovery by distance minimization, and style transfer.

Given a frozen generator, encoding searches jointly for a latent code
and per-layer bias vectors that reproduce an observation, with a
log-squared penalty keeping each candidate bias's projected coordinates
near the trained biases' shared value. Multiple restarts (the mean bias
plus each trained bias tuple) are optimized simultaneously as rows of
one batch; the best iterate per sample wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, backward, matmul
from .errors import ContractError, OptimizationError
from .model import GeneratorModel
from .objectives import EPS_REG
from .training import Adam

__all__ = ["EncodeConfig", "EncodeResult", "encode", "style_transfer"]


@dataclass
class EncodeConfig:
    """Settings of the encoding optimization."""

    reg_weight: float = 0.1          # penalty weight on bias misalignment
    learning_rate: float = 0.1
    lr_decay: float = 0.5            # geometric decay so iterates can settle
    lr_decay_every: int = 100
    betas: tuple[float, float] = (0.9, 0.999)
    max_steps: int = 2000
    latent_fraction: float = 0.6     # share of steps spent on the latent alone
    joint_lr_scale: float = 0.1      # joint phase starts this much colder
    patience: int = 50               # steps without relative improvement
    rel_tol: float = 1e-6
    burn_in: int = 250               # steps before the stall check engages
    max_restarts: int = 8
    eps_reg: float = EPS_REG
    divergence_factor: float = 10.0
    divergence_patience: int = 50


@dataclass
class EncodeResult:
    """Recovered latent code, per-layer biases and diagnostics.

    ``objective_trace`` holds the best objective seen up to each step,
    so it is non-increasing by construction even though the raw
    optimizer trace may oscillate.
    """

    z: np.ndarray
    biases: list[np.ndarray]
    reconstruction_error: float
    objective_trace: np.ndarray


def _starts(gen: GeneratorModel, max_restarts: int) -> list[list[np.ndarray]]:
    """Initial bias tuples: the mean bias first, then each trained tuple."""
    layers = gen.multi_bias_layers
    starts = [[layer.mean_bias() for layer in layers]]
    for i in range(gen.n_biases):
        starts.append([layer.biases[i].data.copy() for layer in layers])
    return starts[:max(1, max_restarts)]


def encode(gen: GeneratorModel, x, config: EncodeConfig | None = None):
    """Minimize reconstruction distance plus the alignment penalty.

    ``x`` may be a single sample or a batch of row samples; the return
    matches (one :class:`EncodeResult` or a list). Raises
    :class:`OptimizationError` when the objective stays an order of
    magnitude above its initial value.
    """
    if config is None:
        config = EncodeConfig()
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim == 1
    if single:
        x_arr = x_arr[None, :]
    if x_arr.ndim != 2:
        raise ContractError(f"expected sample vector or row batch, got {x_arr.shape}")
    if np.min(x_arr) < -1.0 or np.max(x_arr) > 1.0:
        raise ContractError("samples must lie in [-1, 1]")
    layers = gen.multi_bias_layers
    if not layers:
        raise ContractError("generator has no multi-bias layer to encode through")
    if x_arr.shape[1] != gen.d_out:
        raise ContractError(
            f"sample dimension {x_arr.shape[1]} does not match generator output {gen.d_out}"
        )

    n_img = x_arr.shape[0]
    starts = _starts(gen, config.max_restarts)
    n_starts = len(starts)
    rows = n_img * n_starts

    # row layout: all restarts of image 0, then image 1, ...
    target = Tensor(np.repeat(x_arr, n_starts, axis=0))
    z_param = Tensor(np.zeros((rows, gen.d_z)), requires_grad=True)
    bias_params = []
    for li, layer in enumerate(layers):
        init = np.stack([starts[s][li] for s in range(n_starts)], axis=0)
        bias_params.append(Tensor(np.tile(init, (n_img, 1)), requires_grad=True))

    # shared projected coordinates the penalty pulls toward
    anchors = [Tensor(layer.tangential_components().mean(axis=0)) for layer in layers]

    mu = float(config.reg_weight)
    # block-coordinate schedule: first the latent alone against frozen
    # bias starts, then a colder joint polish; the best iterate over both
    # phases is what gets returned
    latent_steps = int(config.max_steps * config.latent_fraction)
    phases = [
        (latent_steps, Adam([z_param], learning_rate=config.learning_rate,
                            betas=config.betas)),
        (config.max_steps - latent_steps,
         Adam([z_param, *bias_params],
              learning_rate=config.learning_rate * config.joint_lr_scale,
              betas=config.betas)),
    ]

    def objective_rows() -> tuple[Tensor, np.ndarray]:
        out = gen.forward_with_biases(z_param, bias_params, training=False)
        residual = target - out
        rec_rows = (residual * residual).sum(axis=1)
        obj_rows = rec_rows
        if mu != 0.0:
            for li, layer in enumerate(layers):
                proj = matmul(bias_params[li], layer.weight) - anchors[li]
                pen = ((proj * proj).sum(axis=1) + config.eps_reg).log()
                obj_rows = obj_rows + mu * pen
        return obj_rows, rec_rows.data

    obj_rows, rec_vals = objective_rows()
    best_obj = obj_rows.data.copy()
    best_rec = rec_vals.copy()
    best_z = z_param.data.copy()
    best_biases = [b.data.copy() for b in bias_params]
    initial_total = float(obj_rows.data.sum())
    best_total_trace = [float(best_obj.sum())]
    diverged_for = 0

    for phase_steps, optimizer in phases:
        for step in range(phase_steps):
            if step and config.lr_decay_every and step % config.lr_decay_every == 0:
                optimizer.learning_rate *= config.lr_decay
            total = obj_rows.sum()
            backward(total)
            optimizer.step()
            obj_rows, rec_vals = objective_rows()
            current = obj_rows.data
            improved = current < best_obj
            if improved.any():
                best_obj[improved] = current[improved]
                best_rec[improved] = rec_vals[improved]
                best_z[improved] = z_param.data[improved]
                for li in range(len(layers)):
                    best_biases[li][improved] = bias_params[li].data[improved]
            best_total = float(best_obj.sum())
            best_total_trace.append(best_total)

            current_total = float(current.sum())
            threshold = config.divergence_factor * max(abs(initial_total), 1e-9)
            diverged_for = diverged_for + 1 if current_total > threshold else 0
            if diverged_for >= config.divergence_patience:
                raise OptimizationError(
                    f"encoding diverged: objective {current_total:.3e} stayed above "
                    f"{config.divergence_factor:.0f}x the initial value",
                    trace=best_total_trace,
                )

            window = config.patience
            if len(best_total_trace) > max(window, config.burn_in):
                previous = best_total_trace[-window - 1]
                scale = max(abs(previous), 1e-12)
                if (previous - best_total) / scale < config.rel_tol:
                    break  # this phase has stalled; move on

    results = []
    trace = np.asarray(best_total_trace)
    for img in range(n_img):
        block = slice(img * n_starts, (img + 1) * n_starts)
        winner = img * n_starts + int(np.argmin(best_obj[block]))
        results.append(EncodeResult(
            z=best_z[winner].copy(),
            biases=[best_biases[li][winner].copy() for li in range(len(layers))],
            reconstruction_error=float(np.sqrt(best_rec[winner])),
            objective_trace=trace,
        ))
    return results[0] if single else results


def style_transfer(gen: GeneratorModel, x_source, x_target,
                   config: EncodeConfig | None = None, return_details: bool = False):
    """Regenerate with the target's latent code and the source's biases.

    The source's discrete identity (and any residual noise) lives in its
    recovered biases; the target contributes the smooth features through
    its latent code.
    """
    enc_source = encode(gen, x_source, config)
    enc_target = encode(gen, x_target, config)
    out = gen.forward_with_biases(
        enc_target.z[None, :],
        [Tensor(b[None, :]) for b in enc_source.biases],
        training=False,
    ).data[0].copy()
    if return_details:
        return out, enc_source, enc_target
    return out
