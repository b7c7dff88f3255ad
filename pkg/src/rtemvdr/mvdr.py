"""MVDR weights and output SNR for an arbitrary plug-in covariance."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SingularMatrix

__all__ = ["BeamformerOutput", "mvdr_weights", "output_snr", "oracle_snr", "beamform"]


@dataclass(frozen=True)
class BeamformerOutput:
    weights: np.ndarray
    snr: float


def _solve(C, b):
    # Hermitian PD systems go through Cholesky; anything else through LU
    try:
        return sla.cho_solve(sla.cho_factor(C, lower=True, check_finite=False), b,
                             check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("error", sla.LinAlgWarning)
            out = sla.solve(C, b, check_finite=False)
    except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
        raise SingularMatrix("matrix is singular") from exc
    if not np.all(np.isfinite(out)):
        raise SingularMatrix("matrix is singular")
    return out


def mvdr_weights(C: np.ndarray, s0: np.ndarray) -> np.ndarray:
    """Distortionless weights ``C^{-1} s0 / (s0^* C^{-1} s0)``."""
    s0 = np.asarray(s0, dtype=complex)
    if not np.any(s0):
        raise ValueError("steering vector must be nonzero")
    Cs = _solve(C, s0)
    return Cs / np.vdot(s0, Cs)


def output_snr(C: np.ndarray, Sigma: np.ndarray, s0: np.ndarray) -> float:
    """SNR at the output of the MVDR filter built from ``C`` when the noise has covariance ``Sigma``.

    ``(s0^* C^{-1} s0)^2 / (s0^* C^{-1} Sigma C^{-1} s0)``; invariant to the scale of ``C``.
    """
    s0 = np.asarray(s0, dtype=complex)
    Cs = _solve(C, s0)
    num = np.vdot(s0, Cs).real
    den = np.vdot(Cs, Sigma @ Cs).real
    return float(num * num / den)


def oracle_snr(Sigma: np.ndarray, s0: np.ndarray) -> float:
    """Optimal SNR ``s0^* Sigma^{-1} s0``, reached when the filter uses ``Sigma`` itself."""
    s0 = np.asarray(s0, dtype=complex)
    return float(np.vdot(s0, _solve(Sigma, s0)).real)


def beamform(C: np.ndarray, Sigma: np.ndarray, s0: np.ndarray) -> BeamformerOutput:
    return BeamformerOutput(mvdr_weights(C, s0), output_snr(C, Sigma, s0))
