"""Small dense linear-algebra kernels: symmetric eigendecomposition by
cyclic Jacobi sweeps, least-squares application of a pseudo-inverse
through the normal equations, and the trace of a sample covariance.

Everything runs in float64. The eigensolver is iterative and sized for
matrices up to a few hundred rows, which covers every consumer here.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionMismatchError, SingularMatrixError

__all__ = [
    "sym_eigen",
    "pseudo_inverse_apply",
    "gram_inverse",
    "tangential_projector",
    "covariance_trace",
    "RANK_RTOL",
]

# u is declared rank deficient when lambda_min(u'u) < RANK_RTOL * lambda_max(u'u)
RANK_RTOL = 1e-10

_SYMMETRY_ATOL = 1e-9
_MAX_SWEEPS = 100


def _as_matrix(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got shape {arr.shape}")
    return arr


def sym_eigen(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as the corresponding columns.
    Sweeps run until the off-diagonal Frobenius norm reaches machine
    scale relative to the matrix norm (quadratic convergence makes the
    extra sweeps cheap), capped at 100 sweeps. The tight target keeps
    small eigenvalues accurate enough for the downstream least-squares
    guarantees.
    """
    a = _as_matrix(matrix)
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatchError(f"matrix must be square, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("matrix entries must be finite")
    asym = np.max(np.abs(a - a.T)) if n else 0.0
    if asym > _SYMMETRY_ATOL:
        raise ContractError(
            f"matrix is not symmetric: max |m - m.T| = {asym:.3e} > {_SYMMETRY_ATOL:.0e}"
        )
    a = (a + a.T) / 2.0
    v = np.eye(n)

    def off_norm(m):
        return np.sqrt(max((m * m).sum() - (np.diag(m) ** 2).sum(), 0.0))

    initial = off_norm(a)
    if initial > 0.0:
        target = np.finfo(np.float64).eps * max(np.linalg.norm(a), initial)
        for _ in range(_MAX_SWEEPS):
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    diff = a[q, q] - a[p, p]
                    if abs(apq) * 1e150 <= abs(diff):
                        t = apq / diff  # small-angle limit, avoids overflow
                    else:
                        theta = diff / (2.0 * apq)
                        t = np.sign(theta) if theta != 0 else 1.0
                        t /= abs(theta) + np.sqrt(theta * theta + 1.0)
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    col_p, col_q = a[:, p].copy(), a[:, q].copy()
                    a[:, p] = c * col_p - s * col_q
                    a[:, q] = s * col_p + c * col_q
                    row_p, row_q = a[p, :].copy(), a[q, :].copy()
                    a[p, :] = c * row_p - s * row_q
                    a[q, :] = s * row_p + c * row_q
                    a[p, q] = a[q, p] = 0.0
                    vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                    v[:, p] = c * vec_p - s * vec_q
                    v[:, q] = s * vec_p + c * vec_q
            if off_norm(a) <= target:
                break
    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def _gram_eigens(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of u'u with the full-rank contract enforced."""
    w, vecs = sym_eigen(u.T @ u)
    if w[0] <= 0.0 or w[-1] < RANK_RTOL * w[0]:
        raise SingularMatrixError(
            f"matrix is rank deficient: smallest eigenvalue of u'u is {w[-1]:.3e} "
            f"(largest {w[0]:.3e})",
            eigenvalue=float(w[-1]),
        )
    return w, vecs


def pseudo_inverse_apply(u, y) -> np.ndarray:
    """Least-squares coefficients ``(u'u)^-1 u' y`` through the normal
    equations, solved with the symmetric eigendecomposition of u'u.

    ``u`` must be a tall full-column-rank matrix; ``y`` may be a single
    vector or a batch of row vectors. Applying ``u`` to the result
    reproduces the component of ``y`` tangential to the column space.
    """
    u = _as_matrix(u)
    d_x, d_z = u.shape
    if d_z >= d_x:
        raise ContractError(
            f"expected a tall matrix with fewer columns than rows, got {u.shape}"
        )
    w, vecs = _gram_eigens(u)
    gram = u.T @ u

    def solve(rhs):
        # eigen-based solve plus one refinement pass; the refinement
        # recovers the accuracy the squared condition number eats
        coeff = (rhs @ vecs / w) @ vecs.T
        residual = rhs - coeff @ gram
        return coeff + (residual @ vecs / w) @ vecs.T

    y_arr = np.asarray(y, dtype=np.float64)
    if y_arr.ndim == 1:
        if y_arr.shape[0] != d_x:
            raise DimensionMismatchError(
                f"vector length {y_arr.shape[0]} does not match matrix rows {d_x}"
            )
        return solve((u.T @ y_arr)[None, :])[0]
    if y_arr.ndim == 2:
        if y_arr.shape[1] != d_x:
            raise DimensionMismatchError(
                f"row length {y_arr.shape[1]} does not match matrix rows {d_x}"
            )
        return solve(y_arr @ u)
    raise DimensionMismatchError(f"expected vector or row batch, got shape {y_arr.shape}")


def gram_inverse(u) -> np.ndarray:
    """``(u'u)^-1`` computed from the eigendecomposition of u'u."""
    u = _as_matrix(u)
    w, vecs = _gram_eigens(u)
    return (vecs / w) @ vecs.T


def tangential_projector(u) -> np.ndarray:
    """Orthogonal projector ``u (u'u)^-1 u'`` onto the column space of u."""
    u = _as_matrix(u)
    return u @ gram_inverse(u) @ u.T


def covariance_trace(vectors) -> float:
    """Trace of the sample covariance of a family of vectors.

    Uses the n-1 denominator: ``(1/(A-1)) * sum_i ||v_i - mean||^2``.
    Always nonnegative; zero exactly when all vectors coincide.
    """
    stacked = np.stack([np.asarray(v, dtype=np.float64) for v in vectors], axis=0)
    if stacked.ndim != 2:
        raise DimensionMismatchError("covariance_trace expects a family of vectors")
    count = stacked.shape[0]
    if count < 2:
        raise ContractError(f"need at least two vectors, got {count}")
    centered = stacked - stacked.mean(axis=0)
    return float((centered * centered).sum() / (count - 1))
