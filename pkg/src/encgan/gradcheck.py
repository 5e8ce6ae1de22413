"""Central finite-difference verification of every differentiable op.

Each registered case builds a random instance of one operation, reduces
its output to a scalar through a fixed random weighting, and compares
the reverse-mode gradients against central differences computed by
re-evaluating the forward pass. The harness is the independent oracle:
it never calls :func:`encgan.autodiff.backward` to produce its numbers.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, backward, matmul, select_rows, transpose

__all__ = ["OP_CASES", "check_case", "run_gradient_checks"]

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


def _weighted_scalar(out: Tensor, weights: np.ndarray) -> Tensor:
    if out.data.shape == ():
        return out
    return (out * Tensor(weights)).sum()


def _case(arrays, build):
    """Bundle input arrays with a graph builder taking matching tensors."""
    return [np.asarray(a, dtype=np.float64) for a in arrays], build


def _rand(rng, *shape):
    return rng.uniform(-2.0, 2.0, size=shape)


def _rand_safe(rng, *shape, margin=0.1):
    # stays away from the leaky-relu kink at zero
    signs = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
    return signs * rng.uniform(margin, 2.0, size=shape)


def _case_add(rng):
    a, b = _rand(rng, 4, 3), _rand(rng, 4, 3)
    w = _rand(rng, 4, 3)
    return _case([a, b], lambda t: _weighted_scalar(t[0] + t[1], w))


def _case_add_row_broadcast(rng):
    a, b = _rand(rng, 5, 3), _rand(rng, 3)
    w = _rand(rng, 5, 3)
    return _case([a, b], lambda t: _weighted_scalar(t[0] + t[1], w))


def _case_add_scalar_broadcast(rng):
    a, b = _rand(rng, 4, 2), _rand(rng)
    w = _rand(rng, 4, 2)
    return _case([a, b], lambda t: _weighted_scalar(t[0] + t[1], w))


def _case_sub(rng):
    a, b = _rand(rng, 3, 4), _rand(rng, 3, 4)
    w = _rand(rng, 3, 4)
    return _case([a, b], lambda t: _weighted_scalar(t[0] - t[1], w))


def _case_mul(rng):
    a, b = _rand(rng, 4, 3), _rand(rng, 4, 3)
    w = _rand(rng, 4, 3)
    return _case([a, b], lambda t: _weighted_scalar(t[0] * t[1], w))


def _case_mul_scalar_broadcast(rng):
    a, b = _rand(rng, 4, 3), _rand(rng)
    w = _rand(rng, 4, 3)
    return _case([a, b], lambda t: _weighted_scalar(t[0] * t[1], w))


def _case_neg(rng):
    a = _rand(rng, 6)
    w = _rand(rng, 6)
    return _case([a], lambda t: _weighted_scalar(-t[0], w))


def _case_pow_square(rng):
    a = _rand(rng, 5)
    w = _rand(rng, 5)
    return _case([a], lambda t: _weighted_scalar(t[0] ** 2.0, w))


def _case_pow_sqrt(rng):
    a = rng.uniform(0.2, 3.0, size=5)
    w = _rand(rng, 5)
    return _case([a], lambda t: _weighted_scalar(t[0] ** 0.5, w))


def _case_pow_reciprocal(rng):
    a = rng.uniform(0.3, 3.0, size=4) * np.where(rng.uniform(size=4) < 0.5, -1, 1)
    w = _rand(rng, 4)
    return _case([a], lambda t: _weighted_scalar(t[0] ** -1.0, w))


def _case_log(rng):
    a = rng.uniform(0.2, 4.0, size=6)
    w = _rand(rng, 6)
    return _case([a], lambda t: _weighted_scalar(t[0].log(), w))


def _case_tanh(rng):
    a = _rand(rng, 7)
    w = _rand(rng, 7)
    return _case([a], lambda t: _weighted_scalar(t[0].tanh(), w))


def _case_leaky_relu(rng):
    a = _rand_safe(rng, 6)
    w = _rand(rng, 6)
    return _case([a], lambda t: _weighted_scalar(t[0].leaky_relu(0.2), w))


def _case_matmul_22(rng):
    a, b = _rand(rng, 4, 3), _rand(rng, 3, 2)
    w = _rand(rng, 4, 2)
    return _case([a, b], lambda t: _weighted_scalar(matmul(t[0], t[1]), w))


def _case_matmul_21(rng):
    a, b = _rand(rng, 4, 3), _rand(rng, 3)
    w = _rand(rng, 4)
    return _case([a, b], lambda t: _weighted_scalar(matmul(t[0], t[1]), w))


def _case_matmul_12(rng):
    a, b = _rand(rng, 3), _rand(rng, 3, 5)
    w = _rand(rng, 5)
    return _case([a, b], lambda t: _weighted_scalar(matmul(t[0], t[1]), w))


def _case_matmul_11(rng):
    a, b = _rand(rng, 4), _rand(rng, 4)
    return _case([a, b], lambda t: matmul(t[0], t[1]))


def _case_transpose(rng):
    a = _rand(rng, 3, 5)
    w = _rand(rng, 5, 3)
    return _case([a], lambda t: _weighted_scalar(transpose(t[0]), w))


def _case_sum_all(rng):
    a = _rand(rng, 4, 3)
    return _case([a], lambda t: t[0].sum())


def _case_sum_axis0(rng):
    a = _rand(rng, 4, 3)
    w = _rand(rng, 3)
    return _case([a], lambda t: _weighted_scalar(t[0].sum(axis=0), w))


def _case_sum_axis1(rng):
    a = _rand(rng, 4, 3)
    w = _rand(rng, 4)
    return _case([a], lambda t: _weighted_scalar(t[0].sum(axis=1), w))


def _case_mean_all(rng):
    a = _rand(rng, 5, 2)
    return _case([a], lambda t: t[0].mean())


def _case_mean_axis0(rng):
    a = _rand(rng, 6, 3)
    w = _rand(rng, 3)
    return _case([a], lambda t: _weighted_scalar(t[0].mean(axis=0), w))


def _case_select_rows(rng):
    rows = [_rand(rng, 4) for _ in range(3)]
    idx = rng.integers(0, 3, size=6)
    w = _rand(rng, 6, 4)
    return _case(rows, lambda t: _weighted_scalar(select_rows(t, idx), w))


def _case_affine_bias_select(rng):
    # composite: x @ U.T + selected bias, the multi-bias layer core
    u = _rand(rng, 5, 3)
    x = _rand(rng, 4, 3)
    b0, b1 = _rand(rng, 5), _rand(rng, 5)
    idx = rng.integers(0, 2, size=4)
    w = _rand(rng, 4, 5)

    def build(t):
        u_t, x_t, b0_t, b1_t = t
        out = matmul(x_t, transpose(u_t)) + select_rows([b0_t, b1_t], idx)
        return _weighted_scalar(out, w)

    return _case([u, x, b0, b1], build)


def _case_batch_standardize(rng):
    # composite: per-column standardization, the batch-norm training path
    x = _rand(rng, 6, 3)
    gamma = rng.uniform(0.5, 1.5, size=3)
    beta = _rand(rng, 3)
    w = _rand(rng, 6, 3)

    def build(t):
        x_t, g_t, b_t = t
        mu = x_t.mean(axis=0)
        centered = x_t - mu
        var = (centered * centered).mean(axis=0)
        out = g_t * (centered * (var + 1e-5) ** -0.5) + b_t
        return _weighted_scalar(out, w)

    return _case([x, gamma, beta], build)


OP_CASES = {
    "add": _case_add,
    "add_row_broadcast": _case_add_row_broadcast,
    "add_scalar_broadcast": _case_add_scalar_broadcast,
    "sub": _case_sub,
    "mul": _case_mul,
    "mul_scalar_broadcast": _case_mul_scalar_broadcast,
    "neg": _case_neg,
    "pow_square": _case_pow_square,
    "pow_sqrt": _case_pow_sqrt,
    "pow_reciprocal": _case_pow_reciprocal,
    "log": _case_log,
    "tanh": _case_tanh,
    "leaky_relu": _case_leaky_relu,
    "matmul_22": _case_matmul_22,
    "matmul_21": _case_matmul_21,
    "matmul_12": _case_matmul_12,
    "matmul_11": _case_matmul_11,
    "transpose": _case_transpose,
    "sum_all": _case_sum_all,
    "sum_axis0": _case_sum_axis0,
    "sum_axis1": _case_sum_axis1,
    "mean_all": _case_mean_all,
    "mean_axis0": _case_mean_axis0,
    "select_rows": _case_select_rows,
    "affine_bias_select": _case_affine_bias_select,
    "batch_standardize": _case_batch_standardize,
}


def check_case(arrays, build, step: float = DEFAULT_STEP) -> float:
    """Return the worst relative error between reverse-mode and central
    finite-difference gradients for one instance."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build(tensors)
    backward(loss)
    analytic = [t.grad_array() for t in tensors]

    def evaluate():
        return build([Tensor(a) for a in arrays]).item()

    worst = 0.0
    for k, arr in enumerate(arrays):
        flat = arr.reshape(-1)
        numeric = np.zeros_like(flat)
        for j in range(flat.size):
            saved = flat[j]
            flat[j] = saved + step
            plus = evaluate()
            flat[j] = saved - step
            minus = evaluate()
            flat[j] = saved
            numeric[j] = (plus - minus) / (2.0 * step)
        ad = analytic[k].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(ad), np.abs(numeric)), 1e-8)
        worst = max(worst, float(np.max(np.abs(ad - numeric) / denom)))
    return worst


def run_gradient_checks(
    instances_per_op: int = 100,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
):
    """Run every registered case and report the worst error per op."""
    rng = np.random.default_rng(seed)
    report = []
    for name, builder in OP_CASES.items():
        worst = 0.0
        for _ in range(instances_per_op):
            arrays, build = builder(rng)
            worst = max(worst, check_case(arrays, build))
        report.append({"op": name, "max_relative_error": worst, "passed": worst < tolerance})
    return report
