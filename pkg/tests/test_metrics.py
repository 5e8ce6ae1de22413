"""Disentanglement score, alignment report, coverage, pushforward density."""

import math

import numpy as np
import pytest

from encgan.datasets import LabeledDataset
from encgan.errors import ContractError
from encgan.layers import Activation, MultiBiasLinear, align_bias_tangential
from encgan.metrics import (
    EPS_EIG,
    alignment_report,
    disentanglement_score,
    generator_jacobian,
    integrate_pushforward_1d,
    manifold_coverage,
    pushforward_density,
)
from encgan.model import GeneratorModel, build_mlp_generator
from encgan.objectives import layer_tangential_spread


class TestDisentanglementScore:
    def test_pure_one_axis_variation_saturates(self):
        rng = np.random.default_rng(0)
        d_z = 5
        groups = []
        for _ in range(20):
            magnitudes = rng.normal(size=11)
            codes = np.outer(magnitudes, np.eye(d_z)[0])
            groups.append(codes + rng.normal(size=d_z))  # group offset, removed by centering
        report = disentanglement_score(groups)
        assert report.saturated
        assert report.warning is not None
        assert report.score > 1.0 / math.sqrt(EPS_EIG)

    def test_isotropic_codes_score_near_one(self):
        rng = np.random.default_rng(1)
        groups = rng.normal(size=(500, 10, 8))  # 5000 codes, d_z = 8
        report = disentanglement_score(groups)
        assert 1.0 <= report.score <= 1.3
        assert not report.saturated

    def test_constructed_spectrum_ratio_100(self):
        rng = np.random.default_rng(2)
        e1, e2 = np.eye(8)[0], np.eye(8)[1]
        groups = []
        for _ in range(500):
            s = rng.normal(size=10)
            s2 = rng.normal(size=10)
            groups.append(np.outer(s, e1) + 0.1 * np.outer(s2, e2))
        report = disentanglement_score(groups)
        assert abs(report.score - 100.0) / 100.0 < 0.2
        direction = np.abs(report.principal_direction)
        assert direction[0] > 0.99

    def test_rotation_invariance(self):
        rng = np.random.default_rng(3)
        groups = rng.normal(size=(50, 11, 6)) * np.array([3, 2, 1, 1, 0.5, 0.1])
        base = disentanglement_score(groups)
        q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        rotated = groups @ q.T
        other = disentanglement_score(rotated)
        np.testing.assert_allclose(base.spectrum, other.spectrum, atol=1e-8)
        assert abs(base.score - other.score) < 1e-6 * base.score

    def test_spectrum_descending_nonnegative(self):
        rng = np.random.default_rng(4)
        report = disentanglement_score(rng.normal(size=(10, 7, 5)))
        assert np.all(np.diff(report.spectrum) <= 0)
        assert np.all(report.spectrum >= -1e-10)

    def test_requires_two_groups(self):
        with pytest.raises(ContractError):
            disentanglement_score(np.zeros((1, 5, 3)))


class TestAlignmentReport:
    def test_aligned_biases_have_tiny_traces(self):
        rng = np.random.default_rng(5)
        gen = build_mlp_generator(2, [5], 9, n_biases=3, rng=rng, weight_scale=0.5)
        for layer in gen.multi_bias_layers:
            align_bias_tangential(layer)
        report = alignment_report(gen)
        assert all(t < 1e-10 for t in report.traces())

    def test_hand_set_biases_trace(self):
        layer = MultiBiasLinear(1, 2, 2, np.random.default_rng(6))
        layer.weight.data = np.array([[1.0], [0.0]])
        layer.biases[0].data = np.array([0.0, 0.0])
        layer.biases[1].data = np.array([2.0, 5.0])
        report = alignment_report(GeneratorModel([layer]))
        # projected coordinates are 0 and 2; variance with n-1 denominator is 2
        assert report.traces()[0] == pytest.approx(2.0)

    def test_traces_equal_regularizer_inner_traces(self):
        rng = np.random.default_rng(7)
        gen = build_mlp_generator(3, [6], 10, n_biases=4, rng=rng, weight_scale=0.6)
        report = alignment_report(gen)
        for trace, layer in zip(report.traces(), gen.multi_bias_layers):
            assert abs(trace - layer_tangential_spread(layer).item()) < 1e-12


class TestManifoldCoverage:
    def _reference(self):
        samples = np.array([[0.0, 0.0], [0.1, 0.0], [1.0, 1.0], [0.9, 1.0]])
        return LabeledDataset(samples, np.array([0, 0, 1, 1]))

    def test_copying_generator_gives_diagonal_histogram(self):
        ref = self._reference()
        generated = np.array([[0.05, 0.0], [0.95, 1.0], [0.0, 0.05], [1.0, 0.95]])
        indices = np.array([0, 1, 0, 1])
        report = manifold_coverage(generated, indices, ref)
        np.testing.assert_array_equal(report.histogram, [[2, 0], [0, 2]])
        np.testing.assert_array_equal(report.purity, [1.0, 1.0])
        assert report.assigned[0] != report.assigned[1]

    def test_uniform_noise_near_uniform_histogram(self):
        rng = np.random.default_rng(8)
        ref = self._reference()
        generated = rng.uniform(-0.5, 1.5, size=(4000, 2))
        indices = rng.integers(0, 2, 4000)
        report = manifold_coverage(generated, indices, ref)
        shares = report.histogram / report.histogram.sum()
        assert np.abs(shares - 0.25).max() < 0.05
        assert report.coverage_fraction == 1.0

    def test_unlabeled_reference_rejected(self):
        ref = LabeledDataset(np.zeros((4, 2)))
        with pytest.raises(ContractError):
            manifold_coverage(np.zeros((2, 2)), np.zeros(2, dtype=int), ref)


class TestPushforwardDensity:
    def test_identity_map_density_is_standard_normal(self):
        # two-dimensional pass-through stack
        gen = GeneratorModel([])
        z = np.array([0.3, -0.7])
        expected = math.exp(-0.5 * float(z @ z)) / (2.0 * math.pi)
        assert pushforward_density(gen, z, 0) == pytest.approx(expected, rel=1e-12)

    def test_orthonormal_linear_map_preserves_density(self):
        rng = np.random.default_rng(9)
        q, _ = np.linalg.qr(rng.normal(size=(5, 2)))
        layer = MultiBiasLinear(2, 5, 1, rng)
        layer.weight.data = q
        gen = GeneratorModel([layer])
        z = rng.normal(size=2)
        expected = math.exp(-0.5 * float(z @ z)) / (2.0 * math.pi)
        assert pushforward_density(gen, z, 0) == pytest.approx(expected, rel=1e-9)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        gen = build_mlp_generator(3, [5], 8, n_biases=2, rng=rng, weight_scale=0.5)
        z = rng.normal(size=3)
        jac = generator_jacobian(gen, z, 1)
        h = 1e-5
        for k in range(3):
            zp, zm = z.copy(), z.copy()
            zp[k] += h
            zm[k] -= h
            fd = (gen.forward(zp, 1).data - gen.forward(zm, 1).data) / (2 * h)
            denom = np.maximum(np.abs(fd), 1e-6)
            assert np.max(np.abs(jac[:, k] - fd) / denom) < 1e-4

    def test_unit_mass_on_1d_toy(self):
        gen = GeneratorModel([Activation("tanh")])
        mass = integrate_pushforward_1d(gen, 0, z_lo=-5.0, z_hi=5.0, n_points=2001)
        assert abs(mass - 1.0) < 1e-3

    def test_singular_jacobian_returns_marker(self):
        layer = MultiBiasLinear(1, 2, 1, np.random.default_rng(11))
        layer.weight.data = np.zeros((2, 1))
        gen = GeneratorModel([layer])
        assert pushforward_density(gen, np.array([0.5]), 0) == math.inf
