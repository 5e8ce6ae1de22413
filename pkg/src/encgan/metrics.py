"""Quantitative evaluation of trained models.

The disentanglement score measures how one-dimensional the latent
response to a single controlled transformation is (ratio of the first
two PCA eigenvalues after per-group centering). The alignment report
exposes raw and projected bias values per layer. Coverage statistics
assign generated samples to reference manifolds by nearest labeled
centroid. The pushforward density evaluates the data-space density a
smooth injective generator induces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, backward, matmul
from .datasets import LabeledDataset
from .errors import ContractError
from .layers import MultiBiasLinear
from .linalg import covariance_trace, sym_eigen
from .model import GeneratorModel

__all__ = [
    "EPS_EIG",
    "DisentanglementReport",
    "disentanglement_score",
    "AlignmentReport",
    "LayerAlignment",
    "alignment_report",
    "CoverageReport",
    "manifold_coverage",
    "generator_jacobian",
    "pushforward_density",
    "integrate_pushforward_1d",
]

EPS_EIG = 1e-12


@dataclass
class DisentanglementReport:
    """PCA spectrum of pooled, group-centered latent codes.

    ``score`` is the ratio of the first eigenvalue to the second (with a
    small floor in the denominator). A saturated score means the second
    eigenvalue is numerically zero and the ratio is reported against the
    floor, flagged through ``warning``.
    """

    score: float
    principal_direction: np.ndarray
    spectrum: np.ndarray
    n_groups: int
    n_codes_per_group: int
    saturated: bool = False
    warning: str | None = None

    def to_json(self) -> dict:
        return {
            "score": self.score,
            "principal_direction": self.principal_direction.tolist(),
            "spectrum": self.spectrum.tolist(),
            "n_groups": self.n_groups,
            "n_codes_per_group": self.n_codes_per_group,
            "saturated": self.saturated,
            "warning": self.warning,
        }


def disentanglement_score(latent_groups, eps: float = EPS_EIG) -> DisentanglementReport:
    """Score latent variation induced by one known transformation.

    ``latent_groups`` is ``(G, T, d_z)`` shaped (or a list of ``(T, d_z)``
    arrays): G base samples, each encoded at T transform magnitudes.
    Each group is centered on its own mean, all codes are pooled, and
    the covariance spectrum is computed; a ratio near one means the
    variation fills many directions, a large ratio means it is nearly
    one-dimensional.
    """
    groups = np.stack([np.asarray(g, dtype=np.float64) for g in latent_groups], axis=0)
    if groups.ndim != 3:
        raise ContractError(f"expected (groups, codes, d_z) latents, got {groups.shape}")
    n_groups, n_codes, d_z = groups.shape
    if n_groups < 2:
        raise ContractError("need at least two groups")
    centered = groups - groups.mean(axis=1, keepdims=True)
    pooled = centered.reshape(n_groups * n_codes, d_z)
    cov = pooled.T @ pooled / (pooled.shape[0] - 1)
    spectrum, vectors = sym_eigen(cov)
    score = float(spectrum[0] / (spectrum[1] + eps)) if d_z >= 2 else math.inf
    nonzero = int(np.sum(spectrum > max(spectrum[0], 0.0) * 1e-12))
    saturated = nonzero < 2
    warning = None
    if saturated:
        warning = (
            f"degenerate spectrum: only {nonzero} nonzero eigenvalue(s); "
            "score saturates against the floor"
        )
    return DisentanglementReport(
        score=score,
        principal_direction=vectors[:, 0].copy(),
        spectrum=spectrum,
        n_groups=n_groups,
        n_codes_per_group=n_codes,
        saturated=saturated,
        warning=warning,
    )


@dataclass
class LayerAlignment:
    """Raw biases, their projected coordinates, and the spread of the latter."""

    biases: np.ndarray        # (A, d_out)
    tangential: np.ndarray    # (A, d_in) rows of U' a_i
    trace: float

    def to_json(self) -> dict:
        return {
            "biases": self.biases.tolist(),
            "tangential": self.tangential.tolist(),
            "trace": self.trace,
        }


@dataclass
class AlignmentReport:
    layers: list

    def traces(self) -> list[float]:
        return [entry.trace for entry in self.layers]

    def to_json(self) -> dict:
        return {"layers": [entry.to_json() for entry in self.layers]}


def alignment_report(gen: GeneratorModel) -> AlignmentReport:
    """Per-layer bias diagnostics for plotting and ablation comparison."""
    entries = []
    for layer in gen.multi_bias_layers:
        tangential = layer.tangential_components()
        trace = covariance_trace(tangential) if layer.n_biases >= 2 else 0.0
        entries.append(LayerAlignment(
            biases=layer.bias_matrix(),
            tangential=tangential,
            trace=trace,
        ))
    return AlignmentReport(entries)


@dataclass
class CoverageReport:
    """Histogram of generated samples over reference manifolds, per bias."""

    histogram: np.ndarray         # (n_biases, n_manifolds) counts
    purity: np.ndarray            # (n_biases,) dominant-manifold share
    assigned: np.ndarray          # (n_biases,) dominant manifold index
    coverage_fraction: float      # manifolds receiving at least the threshold share
    threshold: float

    def to_json(self) -> dict:
        return {
            "histogram": self.histogram.tolist(),
            "purity": self.purity.tolist(),
            "assigned": self.assigned.tolist(),
            "coverage_fraction": self.coverage_fraction,
            "threshold": self.threshold,
        }


def manifold_coverage(samples, bias_indices, reference: LabeledDataset,
                      threshold: float = 0.05) -> CoverageReport:
    """Assign generated samples to the nearest labeled centroid.

    ``coverage_fraction`` is the fraction of reference manifolds that
    receive at least ``threshold`` of all generated samples.
    """
    if reference.labels is None:
        raise ContractError("reference dataset must carry manifold labels")
    samples = np.asarray(samples, dtype=np.float64).reshape(len(samples), -1)
    bias_indices = np.asarray(bias_indices, dtype=np.int64)
    ref_flat = reference.flat()
    label_values = np.unique(reference.labels)
    centroids = np.stack([
        ref_flat[reference.labels == v].mean(axis=0) for v in label_values
    ])
    dists = ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(dists, axis=1)
    n_biases = int(bias_indices.max()) + 1 if bias_indices.size else 0
    histogram = np.zeros((n_biases, len(label_values)), dtype=np.int64)
    for b, m in zip(bias_indices, nearest):
        histogram[b, m] += 1
    row_totals = np.maximum(histogram.sum(axis=1), 1)
    purity = histogram.max(axis=1) / row_totals
    assigned = histogram.argmax(axis=1)
    shares = histogram.sum(axis=0) / max(histogram.sum(), 1)
    coverage = float(np.mean(shares >= threshold)) if histogram.size else 0.0
    return CoverageReport(
        histogram=histogram,
        purity=purity,
        assigned=assigned,
        coverage_fraction=coverage,
        threshold=threshold,
    )


def generator_jacobian(gen: GeneratorModel, z, bias_index: int) -> np.ndarray:
    """Jacobian of the generator output with respect to the latent input,
    one reverse pass per output component."""
    z_arr = np.asarray(z, dtype=np.float64).reshape(-1)
    z_t = Tensor(z_arr, requires_grad=True)
    out = gen.forward(z_t, bias_index, training=False)
    if out.ndim != 1:
        raise ContractError("jacobian expects a single-sample forward pass")
    d_x = out.shape[0]
    jac = np.zeros((d_x, z_arr.shape[0]))
    basis = np.eye(d_x)
    components = [matmul(Tensor(basis[k]), out) for k in range(d_x)]
    for k, comp in enumerate(components):
        backward(comp)
        jac[k] = z_t.grad_array()
    return jac


def pushforward_density(gen: GeneratorModel, z, bias_index: int) -> float:
    """Density the generator pushes forward to its output at ``z``:
    the latent normal density divided by ``sqrt(det(J'J))``.

    Returns ``inf`` as the density-undefined marker when ``J'J`` is
    singular.
    """
    z_arr = np.asarray(z, dtype=np.float64).reshape(-1)
    jac = generator_jacobian(gen, z_arr, bias_index)
    gram = jac.T @ jac
    eigenvalues, _ = sym_eigen(gram)
    det = float(np.prod(eigenvalues))
    if not np.isfinite(det) or det <= 0.0:
        return math.inf
    d_z = z_arr.shape[0]
    log_p = -0.5 * float(z_arr @ z_arr) - 0.5 * d_z * math.log(2.0 * math.pi)
    return math.exp(log_p) / math.sqrt(det)


def integrate_pushforward_1d(gen: GeneratorModel, bias_index: int = 0,
                             z_lo: float = -5.0, z_hi: float = 5.0,
                             n_points: int = 2001) -> float:
    """Total mass of the pushforward density of a 1-D generator,
    integrated over the image of [z_lo, z_hi] by trapezoidal quadrature."""
    grid = np.linspace(z_lo, z_hi, n_points)
    xs = np.empty(n_points)
    ps = np.empty(n_points)
    for k, zv in enumerate(grid):
        out = gen.forward(Tensor(np.array([zv])), bias_index, training=False)
        if out.data.shape != (1,):
            raise ContractError("integration needs a 1-D to 1-D generator")
        xs[k] = float(out.data[0])
        ps[k] = pushforward_density(gen, np.array([zv]), bias_index)
    order = np.argsort(xs)
    return float(np.trapezoid(ps[order], xs[order]))
