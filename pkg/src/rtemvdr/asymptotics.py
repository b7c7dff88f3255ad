"""Deterministic equivalents and CLT parameters for the RTE-based MVDR SNR.

Two regimes are covered:

* large-n (N fixed): limit ``Sigma0`` of the RTE, centre ``SNR0`` and the
  delta-method standard deviation ``sigma_n`` built from the gradient vector
  ``c`` and the real-composite covariance ``Xi`` of ``sqrt(n) vec(C - Sigma0)``.
* large-(N, n): ``gamma``, ``alpha`` and ``delta``, plus Monte Carlo centre
  and scale computed on the loaded sample covariance
  ``S~ = (1/n) sum z_i z_i^* + alpha I`` that shares the SNR fluctuations of
  the RTE.

``vec`` is column-major stacking throughout (``A.flatten(order="F")``), for
which ``x^* A y = x^* (y^T kron I) vec(A)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import integrate, optimize

from .errors import (DimensionMismatch, InvalidRegime, NegativeVariance, NoBracket,
                     NonConvergence, QuadratureFailure, RhoOne, SingularMatrix)
from .mvdr import output_snr
from .parallel import (DOMAIN_CALIBRATION, DOMAIN_EQUIVALENT, chunked, derive_seed,
                       ordered_map)
from .rte import check_rho, solve_rte
from .scenario import (Scenario, build_covariance, hermitian_sqrt, sample_snapshots,
                       standard_complex_gaussian)

__all__ = [
    "LargeNnParams", "LargeNParams",
    "vec", "unvec",
    "solve_gamma", "gamma_residual", "solve_delta", "delta_residual", "compute_alpha",
    "gaussian_equivalent_s_tilde", "s_tilde_from_gaussians", "gaussian_ratio_expectation", "solve_sigma0",
    "sigma0_expectation", "estimate_M1_M2", "assemble_xi", "compute_c_vector",
    "delta_method_sigma_n", "snr0", "large_nn_center_scale", "large_nn_params",
    "large_n_params",
]


def vec(A: np.ndarray) -> np.ndarray:
    return np.asarray(A).flatten(order="F")


def unvec(v: np.ndarray, N: int) -> np.ndarray:
    return np.asarray(v).reshape((N, N), order="F")


def _eigh(Sigma):
    lam, U = np.linalg.eigh(Sigma)
    if lam[0] <= 0:
        raise NoBracket("Sigma is not positive definite")
    return lam, U


# ---------------------------------------------------------------------------
# large-(N, n) regime
# ---------------------------------------------------------------------------

def gamma_residual(Sigma: np.ndarray, rho: float, gamma: float) -> float:
    """``(1/N) tr[Sigma (rho gamma I + (1-rho) Sigma)^{-1}] - 1``."""
    lam = np.linalg.eigvalsh(Sigma)
    return float(np.mean(lam / (rho * gamma + (1.0 - rho) * lam)) - 1.0)


def solve_gamma(Sigma: np.ndarray, rho: float, tol: float = 1e-12) -> float:
    """Unique root ``gamma > 0`` of ``(1/N) tr[Sigma (rho gamma I + (1-rho) Sigma)^{-1}] = 1``.

    The trace map is strictly decreasing in ``gamma``, so a bracketing root
    finder on ``[1e-12, 1e6 tr(Sigma)/N]`` finds it.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    lam = np.linalg.eigvalsh(Sigma)
    if lam[0] <= 0:
        raise NoBracket("Sigma is not positive definite")

    def f(g):
        return np.mean(lam / (rho * g + (1.0 - rho) * lam)) - 1.0

    lo, hi = 1e-12, 1e6 * np.mean(lam)
    if not (f(lo) > 0 > f(hi)):
        raise NoBracket("could not bracket gamma")
    gamma = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(gamma)) > tol:
        raise NonConvergence(f"gamma residual {f(gamma):.3g} above tol {tol:g}")
    return float(gamma)


def delta_residual(Sigma: np.ndarray, alpha: float, n: int, delta: float) -> float:
    lam = np.linalg.eigvalsh(Sigma)
    return float(np.sum(lam / (lam / (1.0 + delta) + alpha)) / n - delta)


def solve_delta(Sigma: np.ndarray, alpha: float, n: int, tol: float = 1e-12,
                max_iter: int = 100_000, damping: float = 0.5) -> float:
    """Positive solution of ``delta = (1/n) tr[Sigma (Sigma/(1+delta) + alpha I)^{-1}]``.

    Damped Picard iteration started at ``N/n``; stops when the fixed-point
    residual relative to ``delta`` drops below ``tol``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    lam = np.linalg.eigvalsh(Sigma)
    if lam[0] <= 0:
        raise ValueError("Sigma is not positive definite")

    def g(d):
        return np.sum(lam / (lam / (1.0 + d) + alpha)) / n

    delta = lam.size / n
    for _ in range(max_iter):
        r = g(delta) - delta
        if abs(r) <= tol * delta:
            return float(delta)
        delta += damping * r
    raise NonConvergence(f"delta iteration stalled at residual {r:.3g}")


def compute_alpha(rho: float, gamma: float, c_ratio: float) -> float:
    """Diagonal loading ``rho gamma (1 - (1-rho) c) / (1 - rho)`` of the equivalent model."""
    if rho == 1.0:
        raise RhoOne("alpha diverges at rho = 1")
    if not 0.0 < rho < 1.0:
        raise InvalidRegime(f"rho={rho} outside (0, 1)")
    factor = 1.0 - (1.0 - rho) * c_ratio
    if factor <= 0:
        raise InvalidRegime(f"1 - (1-rho) N/n = {factor:g} <= 0; rho below the admissible range")
    return rho * gamma * factor / (1.0 - rho)


def s_tilde_from_gaussians(w: np.ndarray, sqrt_sigma: np.ndarray, alpha: float) -> np.ndarray:
    """``(1/n) sum z_i z_i^* + alpha I`` with ``z_i = Sigma^{1/2} w_i`` for given rows ``w_i``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    n, N = w.shape
    z = w @ sqrt_sigma.T
    S = z.T @ z.conj() / n
    S[np.diag_indices(N)] += alpha
    return 0.5 * (S + S.conj().T)


def gaussian_equivalent_s_tilde(Sigma: np.ndarray, alpha: float, n: int, seed: int,
                                sqrt_sigma: np.ndarray | None = None) -> np.ndarray:
    """One draw of ``(1/n) sum z_i z_i^* + alpha I`` with ``z_i = Sigma^{1/2} w_i`` Gaussian."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if sqrt_sigma is None:
        sqrt_sigma = hermitian_sqrt(Sigma)
    w = standard_complex_gaussian(np.random.default_rng(int(seed)), n, Sigma.shape[0])
    return s_tilde_from_gaussians(w, sqrt_sigma, alpha)


@dataclass(frozen=True)
class LargeNnParams:
    gamma: float
    delta: float
    alpha: float
    c_ratio: float
    center: float
    scale: float


def _equivalent_snr_chunk(indices, Sigma, sqrt_sigma, s0, alpha, n, seed):
    return np.array([
        output_snr(gaussian_equivalent_s_tilde(Sigma, alpha, n,
                                               derive_seed(seed, t, DOMAIN_EQUIVALENT),
                                               sqrt_sigma), Sigma, s0)
        for t in indices
    ])


def equivalent_snr_samples(Sigma: np.ndarray, s0: np.ndarray, alpha: float, n: int,
                           n_trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Output SNR of the MVDR built on ``n_trials`` independent draws of ``S~``."""
    sqrt_sigma = hermitian_sqrt(Sigma)
    fn = partial(_equivalent_snr_chunk, Sigma=Sigma, sqrt_sigma=sqrt_sigma, s0=s0,
                 alpha=alpha, n=n, seed=seed)
    return np.concatenate(ordered_map(fn, chunked(range(n_trials), 250), workers))


def large_nn_center_scale(s: Scenario, rho: float, n: int, n_trials: int, seed: int,
                          workers: int = 1) -> tuple[float, float]:
    """Monte Carlo centre and scale of the large-(N, n) CLT.

    Returns ``(mean(SNR), sqrt(n) * std(SNR))`` over ``n_trials`` draws of the
    loaded sample covariance model, i.e. surrogates for the centring
    ``SNR-bar`` and the standard deviation of ``sqrt(n)(SNR - SNR-bar)``.
    """
    return _center_scale(large_nn_samples(s, rho, n, n_trials, seed, workers), n)


def _center_scale(snr, n):
    if snr.size < 2:
        raise ValueError("need at least two trials for a scale estimate")
    scale = np.sqrt(n) * np.std(snr, ddof=1)
    if not scale > 0:
        raise InvalidRegime("equivalent-model SNR has zero spread")
    return float(np.mean(snr)), float(scale)


def large_nn_samples(s: Scenario, rho: float, n: int, n_trials: int, seed: int,
                     workers: int = 1) -> np.ndarray:
    Sigma = build_covariance(s)
    N = s.n_sensors
    check_rho(rho, n, N)
    if rho >= 1.0:
        raise RhoOne("the large-(N, n) equivalent is undefined at rho = 1")
    gamma = solve_gamma(Sigma, rho)
    alpha = compute_alpha(rho, gamma, N / n)
    return equivalent_snr_samples(Sigma, s.steering, alpha, n, n_trials, seed, workers)


def large_nn_params(s: Scenario, rho: float, n: int, n_trials: int, seed: int,
                    workers: int = 1) -> LargeNnParams:
    Sigma = build_covariance(s)
    N = s.n_sensors
    check_rho(rho, n, N)
    gamma = solve_gamma(Sigma, rho)
    alpha = compute_alpha(rho, gamma, N / n)
    delta = solve_delta(Sigma, alpha, n)
    snr = equivalent_snr_samples(Sigma, s.steering, alpha, n, n_trials, seed, workers)
    center, scale = _center_scale(snr, n)
    return LargeNnParams(gamma, delta, alpha, N / n, center, scale)


# ---------------------------------------------------------------------------
# large-n regime
# ---------------------------------------------------------------------------

def gaussian_ratio_expectation(a: np.ndarray, epsrel: float = 1e-13) -> np.ndarray:
    """``E[|w_k|^2 / sum_j a_j |w_j|^2]`` for i.i.d. unit-variance circular Gaussians.

    Uses ``1/S = int_0^inf exp(-tS) dt``, which gives
    ``int_0^inf (1 + t a_k)^{-1} prod_j (1 + t a_j)^{-1} dt``, integrated
    adaptively after mapping ``t = u/(1-u)`` onto ``[0, 1)``.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("weights must be positive")
    scale = 1.0 / np.max(a)
    b = a * scale  # rescale t so that the largest weight is 1

    def integrand(u):
        if u >= 1.0:
            return np.zeros_like(b)
        t = u / (1.0 - u)
        base = 1.0 / (1.0 + t * b)
        return base * np.prod(base) / (1.0 - u) ** 2

    val, err, info = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-300, epsrel=epsrel,
                                        limit=2000, full_output=True)
    # quad_vec flags roundoff-limited runs as failures even when the error bound is tiny
    if not np.all(np.isfinite(val)) or err > 1e3 * epsrel * np.linalg.norm(val):
        raise QuadratureFailure(f"quadrature did not converge: {info.message}")
    return val * scale


@dataclass(frozen=True)
class _Sigma0Solution:
    matrix: np.ndarray
    eigvals: np.ndarray
    iterations: int
    residual: float


def _sigma0_eig(lam, rho, tol, max_iter):
    N = lam.size
    d = np.ones(N)
    for it in range(1, max_iter + 1):
        new = N * (1.0 - rho) * lam * gaussian_ratio_expectation(lam / d) + rho
        residual = np.max(np.abs(new - d)) / np.max(np.abs(d))
        d = new
        if residual <= tol:
            return d, it, residual
    raise NonConvergence(f"Sigma0 eigenvalue iteration stalled at residual {residual:.3g}",
                         iterations=max_iter, residual=residual)


def solve_sigma0(Sigma: np.ndarray, rho: float, tol: float = 1e-12,
                 max_iter: int = 2000, full_output: bool = False):
    """Large-n limit ``Sigma0`` of the RTE.

    ``Sigma0 = N(1-rho) E[x x^* / (x^* Sigma0^{-1} x)] + rho I`` shares its
    eigenvectors with ``Sigma``; with ``Sigma = U diag(lam) U^*`` the
    eigenvalues ``d`` of ``Sigma0`` solve

        d_k = N (1-rho) lam_k E[|w_k|^2 / sum_j (lam_j/d_j) |w_j|^2] + rho,

    iterated from ``d = 1`` with the expectation by quadrature.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    lam, U = _eigh(Sigma)
    if rho == 1.0:
        d, it, res = np.ones(lam.size), 0, 0.0
    else:
        d, it, res = _sigma0_eig(lam, rho, tol, max_iter)
    S0 = (U * d) @ U.conj().T
    S0 = 0.5 * (S0 + S0.conj().T)
    if full_output:
        return _Sigma0Solution(S0, d, it, res)
    return S0


def sigma0_expectation(Sigma: np.ndarray, sigma0: np.ndarray) -> np.ndarray:
    """``E[x x^* / (x^* Sigma0^{-1} x)]`` for ``x ~ CN(0, Sigma)``, by quadrature.

    Requires ``sigma0`` to commute with ``Sigma``.
    """
    lam, U = _eigh(Sigma)
    d = np.real(np.einsum("ik,ij,jk->k", U.conj(), sigma0, U))
    diag = lam * gaussian_ratio_expectation(lam / d)
    return (U * diag) @ U.conj().T


def _rte_deviation_chunk(indices, s, rho, n_cal, sigma0, sqrt_sigma, seed):
    rows = []
    for r in indices:
        batch = sample_snapshots(s, n_cal, derive_seed(seed, r, DOMAIN_CALIBRATION), sqrt_sigma)
        C = solve_rte(batch, rho).matrix
        rows.append(np.sqrt(n_cal) * vec(C - sigma0))
    return np.array(rows)


def estimate_M1_M2(s: Scenario, rho: float, n_cal: int = 2000, n_reps: int = 400,
                   seed: int = 0, sigma0: np.ndarray | None = None,
                   workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Empirical covariance and pseudo-covariance of ``sqrt(n) vec(C - Sigma0)``.

    Parameters
    ----------
    s : Scenario
    rho : float
    n_cal : int
        Snapshots per replication.
    n_reps : int
        Number of independent RTE replications.
    seed : int
    sigma0 : ndarray, optional
        Precomputed ``Sigma0``; solved for if omitted.

    Returns
    -------
    M1, M2 : ndarray of shape (N^2, N^2)
        ``mean(y y^*)`` (Hermitian) and ``mean(y y^T)`` (symmetric).
    """
    Sigma = build_covariance(s)
    N = s.n_sensors
    check_rho(rho, n_cal, N)
    if n_reps < 10 * N * N:
        raise ValueError(f"n_reps={n_reps} below 10 N^2 = {10 * N * N}")
    if sigma0 is None:
        sigma0 = solve_sigma0(Sigma, rho)
    if rho == 1.0:
        z = np.zeros((N * N, N * N), dtype=complex)
        return z, z.copy()
    fn = partial(_rte_deviation_chunk, s=s, rho=rho, n_cal=n_cal, sigma0=sigma0,
                 sqrt_sigma=hermitian_sqrt(Sigma), seed=seed)
    Y = np.concatenate(ordered_map(fn, chunked(range(n_reps), 50), workers))
    M1 = Y.T @ Y.conj() / n_reps
    M2 = Y.T @ Y / n_reps
    return 0.5 * (M1 + M1.conj().T), 0.5 * (M2 + M2.T)


def assemble_xi(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """Covariance of ``[Re(y); Im(y)]`` from covariance ``M1`` and pseudo-covariance ``M2`` of ``y``."""
    M1 = np.asarray(M1)
    M2 = np.asarray(M2)
    if M1.ndim != 2 or M1.shape[0] != M1.shape[1] or M1.shape != M2.shape:
        raise DimensionMismatch(f"M1 {M1.shape} and M2 {M2.shape} must be equal square shapes")
    top = np.hstack([M1.real + M2.real, -M1.imag + M2.imag])
    bottom = np.hstack([M1.imag + M2.imag, M1.real - M2.real])
    Xi = 0.5 * np.vstack([top, bottom])
    return 0.5 * (Xi + Xi.T)


def _inv(A):
    try:
        return np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("matrix is singular") from exc


def compute_c_vector(Sigma: np.ndarray, sigma0: np.ndarray, s0: np.ndarray) -> np.ndarray:
    """Gradient vector ``c`` of the SNR functional at ``Sigma0``.

    The row vector ``c^*`` is

        (a^2/b^2) [ s0^* B ((S0i s0)^T kron I) + s0^* S0i ((B s0)^T kron I) ]
        - 2 (a/b) s0^* S0i ((S0i s0)^T kron I)

    with ``S0i = Sigma0^{-1}``, ``B = S0i Sigma S0i``, ``a = s0^* S0i s0`` and
    ``b = s0^* B s0``. The returned column is its conjugate transpose, so that
    ``SNR(Sigma0 + E) - SNR(Sigma0) ~ Re(c^* vec(E)) = Re(c)^T Re(vec E) + Im(c)^T Im(vec E)``.
    """
    s0 = np.asarray(s0, dtype=complex)
    N = s0.size
    S0i = _inv(sigma0)
    B = S0i @ Sigma @ S0i
    a = np.vdot(s0, S0i @ s0).real
    b = np.vdot(s0, B @ s0).real
    I = np.eye(N)
    u = S0i @ s0
    v = B @ s0
    row = (a * a / (b * b)) * (
        s0.conj() @ B @ np.kron(u[None, :], I) + s0.conj() @ S0i @ np.kron(v[None, :], I)
    ) - 2.0 * (a / b) * (s0.conj() @ S0i @ np.kron(u[None, :], I))
    return row.conj()


def delta_method_sigma_n(c: np.ndarray, Xi: np.ndarray) -> float:
    """``sqrt(c~^T Xi c~)`` with ``c~ = [Re(c); Im(c)]``."""
    c = np.asarray(c)
    c_tilde = np.concatenate([c.real, c.imag])
    if Xi.shape != (c_tilde.size, c_tilde.size):
        raise DimensionMismatch(f"Xi {Xi.shape} incompatible with c of length {c.size}")
    var = float(c_tilde @ Xi @ c_tilde)
    if var < -1e-8:
        raise NegativeVariance(f"c~^T Xi c~ = {var:.3g} < 0")
    return float(np.sqrt(max(var, 0.0)))


def snr0(Sigma: np.ndarray, sigma0: np.ndarray, s0: np.ndarray) -> float:
    """Large-n limit ``(s0^* S0i s0)^2 / (s0^* B s0)`` of the SNR."""
    s0 = np.asarray(s0, dtype=complex)
    S0i = _inv(sigma0)
    B = S0i @ Sigma @ S0i
    a = np.vdot(s0, S0i @ s0).real
    return float(a * a / np.vdot(s0, B @ s0).real)


@dataclass(frozen=True)
class LargeNParams:
    sigma0: np.ndarray
    snr0: float
    B: np.ndarray
    c_vec: np.ndarray
    c_tilde: np.ndarray
    Xi: np.ndarray
    sigma_n: float


def large_n_params(s: Scenario, rho: float, n_cal: int = 2000, n_reps: int = 400,
                   seed: int = 0, workers: int = 1) -> LargeNParams:
    """Full large-n pipeline: ``Sigma0``, ``SNR0``, ``c``, ``Xi`` and ``sigma_n``."""
    Sigma = build_covariance(s)
    s0 = s.steering
    S0 = solve_sigma0(Sigma, rho)
    S0i = _inv(S0)
    M1, M2 = estimate_M1_M2(s, rho, n_cal, n_reps, seed, sigma0=S0, workers=workers)
    Xi = assemble_xi(M1, M2)
    c = compute_c_vector(Sigma, S0, s0)
    return LargeNParams(
        sigma0=S0,
        snr0=snr0(Sigma, S0, s0),
        B=S0i @ Sigma @ S0i,
        c_vec=c,
        c_tilde=np.concatenate([c.real, c.imag]),
        Xi=Xi,
        sigma_n=delta_method_sigma_n(c, Xi),
    )
