"""Alternating adversarial training with deterministic bookkeeping.

One generator cycle is ``n_critic`` critic updates followed by one
generator update. Everything random flows from a single seeded
generator, so two runs with the same configuration produce bit-identical
parameters and metric streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, backward
from .errors import ContractError, TrainingAbortError
from .model import BiasSelector, DiscriminatorModel, GeneratorModel, LatentPrior
from .objectives import EPS_REG, bias_alignment_bound, bias_regularizer, layer_tangential_spread

__all__ = ["Adam", "TrainConfig", "Trainer", "train"]


class Adam:
    """Adam over a fixed parameter list, float64 throughout.

    Parameters with no gradient after the backward pass are treated as
    having a zero gradient.
    """

    def __init__(self, params, learning_rate: float = 2e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for k, p in enumerate(self.params):
            g = p.grad_array()
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * (g * g)
            m_hat = self.m[k] / bias1
            v_hat = self.v[k] / bias2
            p.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    epochs: int
    batch_size: int = 64
    seed: int = 0
    reg_weight: float = 0.05
    reg_weight_schedule: list | None = None   # [[epoch, value], ...] piecewise constant
    learning_rate: float = 2e-4
    critic_learning_rate: float | None = None  # defaults to learning_rate
    betas: tuple[float, float] = (0.9, 0.999)
    n_critic: int = 5
    metrics_every: int = 1
    eps_reg: float = EPS_REG

    def reg_weight_at(self, epoch: int) -> float:
        if not self.reg_weight_schedule:
            return float(self.reg_weight)
        value = float(self.reg_weight_schedule[0][1])
        for start, v in self.reg_weight_schedule:
            if epoch >= start:
                value = float(v)
        return value


class Trainer:
    """Owns the models, optimizers and RNG of one training run."""

    def __init__(self, gen: GeneratorModel, disc: DiscriminatorModel,
                 data: np.ndarray, config: TrainConfig, rng=None):
        gen.validate_for_training()
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise ContractError("training data must be a row matrix")
        if data.shape[0] < config.batch_size:
            raise ContractError(
                f"dataset ({data.shape[0]} rows) smaller than one batch ({config.batch_size})"
            )
        if np.min(data) < -1.0 or np.max(data) > 1.0:
            raise ContractError("training data must be normalized into [-1, 1]")
        if config.n_critic < 1:
            raise ContractError("n_critic must be positive")
        uses_reg = config.reg_weight != 0.0 or config.reg_weight_schedule
        if uses_reg and gen.n_biases < 2:
            raise ContractError("bias regularization needs at least two biases")
        self.gen = gen
        self.disc = disc
        self.data = data
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.prior = LatentPrior(gen.d_z)
        self.selector = BiasSelector(gen.n_biases)
        self.opt_g = Adam([p for _, p in gen.parameters()],
                          learning_rate=config.learning_rate, betas=config.betas)
        critic_lr = (config.critic_learning_rate
                     if config.critic_learning_rate is not None
                     else config.learning_rate)
        self.opt_d = Adam([p for _, p in disc.parameters()],
                          learning_rate=critic_lr, betas=config.betas)
        self.epoch = 0
        self.step = 0
        self.history: list[dict] = []

    # -- single updates --------------------------------------------------

    def _draw_fakes(self, n: int) -> np.ndarray:
        z = self.prior.sample(self.rng, n)
        idx = self.selector.sample(self.rng, n)
        return self.gen.forward(z, idx, training=True).data

    def critic_step(self, real_batch: np.ndarray) -> float:
        n = real_batch.shape[0]
        fake = self._draw_fakes(n)
        # one forward over [fake; real] so both scores share one critic state
        scores = self.disc.forward(Tensor(np.concatenate([fake, real_batch])),
                                   training=True)
        split = scores * Tensor(np.concatenate([np.full((n, 1), 1.0 / n),
                                                np.full((n, 1), -1.0 / n)]))
        loss_d = split.sum()
        self._check_finite(loss_d, "critic loss", real_batch)
        backward(loss_d)
        self.opt_d.step()
        return loss_d.item()

    def generator_step(self, batch_size: int, reg_weight: float) -> tuple[float, float | None]:
        z = self.prior.sample(self.rng, batch_size)
        idx = self.selector.sample(self.rng, batch_size)
        fake = self.gen.forward(z, idx, training=True)
        loss_g = -self.disc.forward(fake, training=False).mean()
        reg_value = None
        if reg_weight != 0.0:
            reg = bias_regularizer(self.gen, eps=self.config.eps_reg)
            reg_value = reg.item()
            loss_g = loss_g + reg_weight * reg
        self._check_finite(loss_g, "generator loss", fake.data)
        backward(loss_g)
        self.opt_g.step()
        self.step += 1
        return loss_g.item(), reg_value

    def _check_finite(self, loss: Tensor, label: str, batch: np.ndarray):
        if np.isfinite(loss.data):
            return
        snapshot = {
            "epoch": self.epoch,
            "step": self.step,
            "loss": label,
            "batch_min": float(np.min(batch)),
            "batch_max": float(np.max(batch)),
            "batch_mean": float(np.mean(batch)),
        }
        raise TrainingAbortError(f"non-finite {label} at step {self.step}", snapshot)

    # -- epochs ----------------------------------------------------------

    def run_epoch(self) -> dict:
        """One pass over the data; returns the epoch's metric record."""
        cfg = self.config
        reg_weight = cfg.reg_weight_at(self.epoch)
        n = self.data.shape[0]
        perm = self.rng.permutation(n)
        n_batches = n // cfg.batch_size
        d_losses, g_losses = [], []
        since_gen = 0
        for b in range(n_batches):
            rows = perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            d_losses.append(self.critic_step(self.data[rows]))
            since_gen += 1
            if since_gen == cfg.n_critic:
                g_loss, _ = self.generator_step(cfg.batch_size, reg_weight)
                g_losses.append(g_loss)
                since_gen = 0
        self.epoch += 1
        record = self._metric_record(reg_weight, d_losses, g_losses)
        self.history.append(record)
        return record

    def run(self) -> list[dict]:
        for _ in range(self.config.epochs):
            self.run_epoch()
        return self.history

    def _metric_record(self, reg_weight: float, d_losses, g_losses) -> dict:
        traces = []
        reg_terms = []
        margins = []
        if self.gen.n_biases >= 2:
            for layer in self.gen.multi_bias_layers:
                spread = layer_tangential_spread(layer).item()
                traces.append(spread)
                reg_terms.append(float(np.log(spread + self.config.eps_reg)))
                bound = bias_alignment_bound(layer.weight.data, layer.bias_matrix())
                margins.append(bound.margin)
        return {
            "step": self.step,
            "epoch": self.epoch,
            "L_G": float(np.mean(g_losses)) if g_losses else None,
            "L_D": float(np.mean(d_losses)) if d_losses else None,
            "R_bias": reg_terms,
            "alignment_trace": traces,
            "prop1_margin": margins,
            "reg_weight": reg_weight,
        }


def train(gen: GeneratorModel, disc: DiscriminatorModel, data: np.ndarray,
          config: TrainConfig) -> Trainer:
    """Run a full training loop and return the trainer (models, history)."""
    trainer = Trainer(gen, disc, data, config)
    trainer.run()
    return trainer
