"""Layer contracts: forward maps, closed-form inversion, spectral norm."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from encgan.autodiff import Tensor, backward
from encgan.errors import ContractError
from encgan.layers import (
    Activation,
    BatchNorm,
    MultiBiasLinear,
    SpectralNormLinear,
    align_bias_tangential,
)
from encgan.linalg import sym_eigen, tangential_projector
from encgan.model import GeneratorModel


def _aligned_layer(rng, d_in=3, d_out=8, n_biases=4, scale=0.5):
    layer = MultiBiasLinear(d_in, d_out, n_biases, rng, weight_scale=scale,
                            bias_scale=scale)
    return align_bias_tangential(layer)


class TestMultiBiasLinear:
    def test_identity_embedding_with_zero_bias(self):
        layer = MultiBiasLinear(2, 4, 1)
        layer.weight.data = np.vstack([np.eye(2), np.zeros((2, 2))])
        layer.biases[0].data = np.zeros(4)
        out = layer.forward(np.array([3.0, -1.0]), 0)
        np.testing.assert_array_equal(out.data, [3.0, -1.0, 0.0, 0.0])

    def test_forward_matches_matmul_add_oracle(self):
        rng = np.random.default_rng(0)
        layer = MultiBiasLinear(3, 7, 4, rng, weight_scale=0.5)
        z = rng.normal(size=3)
        for i in range(4):
            expected = layer.weight.data @ z + layer.biases[i].data
            assert np.abs(layer.forward(z, i).data - expected).max() < 1e-12

    def test_normal_only_bias_difference_keeps_tangential_output(self):
        rng = np.random.default_rng(1)
        layer = MultiBiasLinear(2, 6, 2, rng, weight_scale=0.7)
        projector = tangential_projector(layer.weight.data)
        normal_shift = (np.eye(6) - projector) @ rng.normal(size=6)
        layer.biases[1].data = layer.biases[0].data + normal_shift
        z = rng.normal(size=2)
        out0 = layer.forward(z, 0).data
        out1 = layer.forward(z, 1).data
        assert np.abs(projector @ out0 - projector @ out1).max() < 1e-12

    def test_index_out_of_range(self):
        layer = MultiBiasLinear(2, 3, 2)
        with pytest.raises(ContractError, match="out of range"):
            layer.forward(np.zeros(2), 2)

    def test_rejects_contracting_shape(self):
        with pytest.raises(ContractError, match="expand"):
            MultiBiasLinear(4, 3, 1)

    def test_bias_gradient_isolation(self):
        rng = np.random.default_rng(2)
        layer = MultiBiasLinear(3, 5, 4, rng)
        batch = rng.normal(size=(6, 3))
        indices = np.full(6, 2)
        out = layer.forward(batch, indices)
        backward((out * out).sum())
        assert layer.biases[2].grad is not None
        for j in (0, 1, 3):
            assert layer.biases[j].grad is None

    def test_invert_round_trip_aligned(self):
        rng = np.random.default_rng(3)
        layer = _aligned_layer(rng)
        z = rng.normal(size=(100, 3))
        idx = rng.integers(0, 4, 100)
        for i in range(4):
            rows = idx == i
            out = layer.forward(z[rows], i).data
            back = layer.invert(out)
            assert np.abs(back - z[rows]).max() < 1e-8

    def test_invert_eliminates_normal_displacement(self):
        rng = np.random.default_rng(4)
        layer = _aligned_layer(rng)
        z = rng.normal(size=3)
        y = layer.forward(z, 1).data
        projector = tangential_projector(layer.weight.data)
        normal_vec = (np.eye(8) - projector) @ rng.normal(size=8)
        np.testing.assert_allclose(layer.invert(y + normal_vec), layer.invert(y),
                                   atol=1e-10)

    def test_tangential_invariance_property(self):
        # biases equal tangentially within eps keep encodings within 10 eps
        rng = np.random.default_rng(5)
        layer = _aligned_layer(rng, d_in=2, d_out=6, n_biases=2, scale=1.0)
        eps = 1e-6
        layer.biases[1].data = layer.biases[1].data + eps * rng.normal(size=6)
        z = rng.normal(size=2)
        z0 = layer.invert(layer.forward(z, 0).data)
        z1 = layer.invert(layer.forward(z, 1).data)
        assert np.abs(z0 - z1).max() < 10 * eps

    def test_encoder_left_inverse(self):
        rng = np.random.default_rng(6)
        layer = MultiBiasLinear(3, 9, 2, rng, weight_scale=0.4)
        w, _ = layer.encoder()
        np.testing.assert_allclose(w.T @ layer.weight.data, np.eye(3), atol=1e-9)


class TestActivation:
    def test_leaky_relu_round_trip(self):
        # exact on the identity branch; one ulp of double rounding on the
        # slope branch (0.2 is not binary representable)
        act = Activation("leaky_relu", 0.2)
        for value in (-3.0, 0.0, 5.0):
            x = np.array([value])
            back = act.invert(act.forward(x).data)
            assert np.abs(back - x).max() <= 2 * np.finfo(np.float64).eps * abs(value)

    def test_tanh_round_trip(self):
        act = Activation("tanh")
        assert abs(act.invert(act.forward(np.array([0.7])).data)[0] - 0.7) < 1e-12

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=40, deadline=None)
    def test_random_round_trips(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-3, 3, size=20)
        for act in (Activation("leaky_relu", 0.2), Activation("tanh")):
            back = act.invert(act.forward(x).data)
            assert np.abs(back - x).max() < 1e-9

    def test_tanh_invert_clamps_saturated(self):
        act = Activation("tanh")
        out = act.invert(np.array([1.0, -1.0]))
        assert np.all(np.isfinite(out))

    def test_bad_slope_rejected(self):
        with pytest.raises(ContractError):
            Activation("leaky_relu", 1.5)


class TestBatchNorm:
    def test_identity_configuration(self):
        bn = BatchNorm(3, eps=1e-12)
        x = np.array([0.3, -0.5, 0.9])
        np.testing.assert_allclose(bn.forward(x).data, x, atol=1e-6)
        np.testing.assert_allclose(bn.invert(x), x, atol=1e-6)

    def test_hand_checked_inverse(self):
        bn = BatchNorm(1, eps=0.0 + 1e-12)
        bn.gamma.data = np.array([2.0])
        bn.beta.data = np.array([3.0])
        bn.running_mean = np.array([1.0])
        bn.running_var = np.array([4.0])
        x = np.array([5.0])
        y = bn.forward(x).data
        np.testing.assert_allclose(y, [2.0 * (5.0 - 1.0) / 2.0 + 3.0], atol=1e-9)
        np.testing.assert_allclose(bn.invert(y), x, atol=1e-9)

    def test_random_round_trip(self):
        rng = np.random.default_rng(7)
        bn = BatchNorm(6)
        bn.gamma.data = rng.uniform(0.5, 2.0, 6)
        bn.beta.data = rng.normal(size=6)
        bn.running_mean = rng.normal(size=6)
        bn.running_var = rng.uniform(0.5, 2.0, 6)
        x = rng.normal(size=(10, 6))
        y = bn.forward(x).data
        assert np.abs(bn.invert(y) - x).max() < 1e-9

    def test_zero_gamma_rejected_on_invert(self):
        bn = BatchNorm(2)
        bn.gamma.data = np.array([1.0, 0.0])
        with pytest.raises(ContractError, match="gamma"):
            bn.invert(np.zeros(2))

    def test_training_mode_updates_running_stats(self):
        rng = np.random.default_rng(8)
        bn = BatchNorm(3, momentum=0.5)
        x = rng.normal(loc=2.0, size=(50, 3))
        bn.forward(x, training=True)
        assert np.all(bn.running_mean > 0.5)

    def test_training_mode_needs_batch(self):
        bn = BatchNorm(3)
        with pytest.raises(ContractError):
            bn.forward(np.zeros(3), training=True)


class TestSpectralNorm:
    def test_diagonal_spectrum(self):
        layer = SpectralNormLinear(2, 2, np.random.default_rng(0))
        layer.weight_raw.data = np.diag([3.0, 1.0])
        layer.power_update(layer.VERIFY_ITERATIONS)
        assert abs(layer.sigma_estimate() - 3.0) < 0.03
        eff = layer.effective_weight().data
        np.testing.assert_allclose(eff, np.diag([1.0, 1.0 / 3.0]), atol=1e-2)

    def test_orthogonal_weight_unchanged(self):
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        layer = SpectralNormLinear(5, 5, rng)
        layer.weight_raw.data = q
        layer.power_update(layer.VERIFY_ITERATIONS)
        np.testing.assert_allclose(layer.effective_weight().data, q, atol=1e-6)

    def test_sigma_matches_eigen_oracle(self):
        rng = np.random.default_rng(2)
        layer = SpectralNormLinear(6, 8, rng)
        layer.power_update(50)
        w, _ = sym_eigen(layer.weight_raw.data.T @ layer.weight_raw.data)
        true_sigma = float(np.sqrt(w[0]))
        assert abs(layer.sigma_estimate() - true_sigma) / true_sigma < 0.01

    def test_lipschitz_proxy(self):
        rng = np.random.default_rng(3)
        layer = SpectralNormLinear(10, 7, rng)
        layer.power_update(layer.VERIFY_ITERATIONS)
        eff = layer.effective_weight().data
        x = rng.normal(size=(1000, 10))
        ratios = np.linalg.norm(x @ eff.T, axis=1) / np.linalg.norm(x, axis=1)
        assert ratios.max() <= 1.05

    def test_zero_matrix_floors_with_warning(self):
        layer = SpectralNormLinear(3, 3, np.random.default_rng(4))
        layer.weight_raw.data = np.zeros((3, 3))
        layer.power_update(5)
        with pytest.warns(RuntimeWarning, match="floor"):
            eff = layer.effective_weight()
        np.testing.assert_array_equal(eff.data, np.zeros((3, 3)))

    def test_gradient_flows_through_normalization(self):
        rng = np.random.default_rng(5)
        layer = SpectralNormLinear(4, 3, rng)
        layer.power_update(20)
        out = layer.forward(rng.normal(size=(6, 4)))
        backward((out * out).sum())
        assert layer.weight_raw.grad is not None
        assert np.abs(layer.weight_raw.grad).max() > 0


class TestCompositionInversion:
    def test_full_stack_round_trip(self):
        # [multi-bias, batch norm, leaky-relu] x 2 + tanh, aligned biases
        rng = np.random.default_rng(9)
        layers = []
        dims = [3, 6, 12]
        for d_in, d_out in zip(dims, dims[1:]):
            mbl = MultiBiasLinear(d_in, d_out, 3, rng, weight_scale=0.5,
                                  bias_scale=0.5)
            align_bias_tangential(mbl)
            bn = BatchNorm(d_out)
            bn.running_mean = rng.normal(scale=0.1, size=d_out)
            bn.running_var = rng.uniform(0.5, 1.5, size=d_out)
            layers.extend([mbl, bn, Activation("leaky_relu", 0.2)])
        layers.append(Activation("tanh"))
        gen = GeneratorModel(layers)
        z = rng.standard_normal((1000, 3))
        idx = rng.integers(0, 3, 1000)
        x = gen.forward(z, idx, training=False).data
        back = gen.invert(x)
        assert np.abs(back - z).max() < 1e-6
