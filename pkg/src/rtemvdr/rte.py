"""Regularized Tyler estimator (RTE) by fixed-point iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateSnapshot, InvalidRho, NonConvergence, SingularMatrix
from .scenario import SnapshotBatch

__all__ = ["RteEstimate", "solve_rte", "rte_residual", "rte_map", "check_rho"]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True)
class RteEstimate:
    matrix: np.ndarray
    rho: float
    iterations: int
    residual: float


def _as_samples(batch) -> np.ndarray:
    x = batch.samples if isinstance(batch, SnapshotBatch) else np.asarray(batch)
    if x.ndim != 2:
        raise ValueError("snapshots must be an (n, N) array")
    return x


def check_rho(rho: float, n: int, N: int) -> None:
    """Raise :class:`InvalidRho` unless ``max(0, 1 - n/N) < rho <= 1``."""
    lower = max(0.0, 1.0 - n / N)
    if not (lower < rho <= 1.0):
        raise InvalidRho(f"rho={rho} outside admissible interval ({lower:g}, 1] for n={n}, N={N}")


def _quadratic_forms(cho, x: np.ndarray) -> np.ndarray:
    # x_i^* C^{-1} x_i = ||L^{-1} x_i||^2 with C = L L^*
    y = sla.solve_triangular(cho, x.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", y.real, y.real) + np.einsum("ij,ij->j", y.imag, y.imag)


def _weighted_scatter(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # sum_i w_i x_i x_i^*
    return (x * weights[:, None]).T @ x.conj()


def rte_map(C: np.ndarray, x: np.ndarray, rho: float, cho=None) -> np.ndarray:
    """Right-hand side of the RTE fixed-point equation evaluated at ``C``."""
    n, N = x.shape
    if cho is None:
        cho = _cholesky(C)
    q = _quadratic_forms(cho, x)
    F = _weighted_scatter(x, (1.0 - rho) * N / n / q)
    F[np.diag_indices(N)] += rho
    return 0.5 * (F + F.conj().T)


def _cholesky(C: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("matrix is not numerically positive definite") from exc


def solve_rte(batch, rho: float, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> RteEstimate:
    """Solve the RTE equation by Picard iteration from the identity.

    Parameters
    ----------
    batch : SnapshotBatch or array of shape (n, N)
    rho : float
        Regularization, in ``(max(0, 1 - n/N), 1]``.
    tol : float
        Stop once ``||C - F(C)||_max / ||C||_max <= tol``.
    max_iter : int
        Maximum number of evaluations of ``F``.

    Returns
    -------
    RteEstimate
        The last iterate whose residual was measured, so the reported
        residual is the residual of the returned matrix.
    """
    x = _as_samples(batch)
    n, N = x.shape
    check_rho(rho, n, N)
    if np.any(np.all(x == 0, axis=1)):
        raise DegenerateSnapshot("snapshot with zero norm; quadratic form vanishes")
    if rho == 1.0:
        return RteEstimate(np.eye(N, dtype=complex), 1.0, 1, 0.0)

    C = np.eye(N, dtype=complex)
    residual = np.inf
    for it in range(1, max_iter + 1):
        F = rte_map(C, x, rho)
        residual = np.max(np.abs(C - F)) / np.max(np.abs(C))
        if residual <= tol:
            return RteEstimate(C, float(rho), it, float(residual))
        C = F
    raise NonConvergence(
        f"RTE did not reach tol={tol:g} in {max_iter} iterations (residual {residual:.3g})",
        iterations=max_iter, residual=float(residual))


def rte_residual(C: np.ndarray, batch, rho: float) -> float:
    """Relative max-norm fixed-point residual of ``C``, via an explicit fresh inverse."""
    x = _as_samples(batch)
    n, N = x.shape
    try:
        Cinv = np.linalg.inv(C)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("C is singular") from exc
    if np.linalg.cond(C) > 1e14:
        raise SingularMatrix("C is numerically singular")
    q = np.real(np.einsum("ia,ab,ib->i", x.conj(), Cinv, x))
    F = (1.0 - rho) * N / n * _weighted_scatter(x, 1.0 / q) + rho * np.eye(N)
    return float(np.max(np.abs(C - F)) / np.max(np.abs(C)))
