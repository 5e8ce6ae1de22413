"""Scikit-learn style facade over training, encoding and sampling.

``fit`` trains the adversarial pair on a sample matrix, ``transform``
maps samples to latent codes through the encoding search, and
``sample`` draws new data ancestrally. Parameters follow estimator
conventions (stored verbatim, fitted state in trailing-underscore
attributes), so the model composes with pipelines and ``clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .encoding import EncodeConfig, encode
from .model import BiasSelector, LatentPrior, build_discriminator, build_mlp_generator, sample
from .training import TrainConfig, Trainer
from .validation import as_sample_matrix, check_positive_int, check_unit_range

__all__ = ["EncoderPoweredGan"]


class EncoderPoweredGan(BaseEstimator, TransformerMixin):
    """Adversarially trained multi-bias generator with latent encoding.

    Parameters
    ----------
    d_z : latent dimension.
    hidden_dims : widths of the generator's hidden multi-bias layers;
        the full stack must strictly expand toward the data dimension.
    n_biases : number of decoding biases (candidate manifolds).
    reg_weight : weight of the bias-alignment penalty in the generator
        loss. Zero disables it (plain Wasserstein training).
    encode_reg_weight : weight of the alignment penalty in ``transform``.
    epochs, batch_size, learning_rate, n_critic : training loop knobs.
    disc_hidden : critic layer widths.
    random_state : seed; identical seeds give bit-identical fits.
    """

    def __init__(self, d_z=2, hidden_dims=(16,), n_biases=2, reg_weight=0.05,
                 encode_reg_weight=0.1, learning_rate=2e-4, n_critic=5,
                 epochs=10, batch_size=64, disc_hidden=(64, 64), random_state=0):
        self.d_z = d_z
        self.hidden_dims = hidden_dims
        self.n_biases = n_biases
        self.reg_weight = reg_weight
        self.encode_reg_weight = encode_reg_weight
        self.learning_rate = learning_rate
        self.n_critic = n_critic
        self.epochs = epochs
        self.batch_size = batch_size
        self.disc_hidden = disc_hidden
        self.random_state = random_state

    def fit(self, X, y=None):
        X = as_sample_matrix(X)
        check_unit_range(X)
        check_positive_int(self.epochs, "epochs")
        check_positive_int(self.batch_size, "batch_size")
        rng = np.random.default_rng(self.random_state)
        gen = build_mlp_generator(self.d_z, tuple(self.hidden_dims), X.shape[1],
                                  self.n_biases, rng)
        disc = build_discriminator(X.shape[1], tuple(self.disc_hidden), rng)
        config = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.random_state,
            reg_weight=self.reg_weight,
            learning_rate=self.learning_rate,
            n_critic=self.n_critic,
        )
        trainer = Trainer(gen, disc, X, config)
        trainer.run()
        self.generator_ = gen
        self.discriminator_ = disc
        self.history_ = trainer.history
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "generator_"):
            raise NotFittedError(
                "this EncoderPoweredGan instance is not fitted yet; call fit first"
            )

    def transform(self, X) -> np.ndarray:
        """Latent codes recovered by the encoding search, one row per sample."""
        self._check_fitted()
        X = as_sample_matrix(X)
        check_unit_range(X)
        results = encode(self.generator_, X,
                         EncodeConfig(reg_weight=self.encode_reg_weight))
        return np.stack([r.z for r in results])

    def sample(self, n: int, random_state=None):
        """Draw ``n`` samples ancestrally; returns (samples, bias indices)."""
        self._check_fitted()
        check_positive_int(n, "n")
        seed = self.random_state if random_state is None else random_state
        rng = np.random.default_rng(seed)
        prior = LatentPrior(self.generator_.d_z)
        selector = BiasSelector(self.generator_.n_biases)
        return sample(self.generator_, prior, selector, n, rng)
