"""MVDR beamforming with the regularized Tyler estimator, and CLT checks for its output SNR."""
from .asymptotics import (LargeNnParams, LargeNParams, large_n_params, large_nn_params,
                          solve_sigma0)
from .mvdr import mvdr_weights, oracle_snr, output_snr
from .rte import RteEstimate, solve_rte
from .scenario import Scenario, TextureLaw, build_covariance, reference_scenario, sample_snapshots

__version__ = "0.1.0"

__all__ = [
    "Scenario", "TextureLaw", "build_covariance", "reference_scenario", "sample_snapshots",
    "RteEstimate", "solve_rte",
    "mvdr_weights", "output_snr", "oracle_snr",
    "LargeNParams", "LargeNnParams", "large_n_params", "large_nn_params", "solve_sigma0",
]
