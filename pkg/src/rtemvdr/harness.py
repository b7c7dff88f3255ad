"""Monte Carlo experiments: standardized SNR samples, divergence sweeps, figures."""
from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache, partial
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import asymptotics
from .errors import DegenerateRho, RhoOne, RteMvdrError, TrialError
from .mvdr import output_snr
from .parallel import DOMAIN_TRIALS, chunked, derive_seed, ordered_map
from .rte import DEFAULT_MAX_ITER, DEFAULT_TOL, check_rho, solve_rte
from .scenario import Scenario, build_covariance, hermitian_sqrt, reference_scenario, sample_snapshots
from .stats import divergence_report

log = logging.getLogger(__name__)

REGIMES = ("large_n", "large_nn")
CSV_COLUMNS = ("regime", "N", "n", "rho", "seed", "n_trials",
               "ks", "hellinger", "tv", "sym_kl", "error")
SAMPLE_COLUMNS = ("regime", "N", "n", "rho", "seed", "index", "value")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=reference_scenario)
    rho_list: tuple[float, ...] = (0.5,)
    n_list: tuple[int, ...] = (20, 40, 60, 80, 100)
    n_trials: int = 5000
    seed: int = 0
    regime: str = "both"
    output_dir: str = "results"
    histogram_bins: int | None = None  # None -> Freedman-Diaconis
    n_cal: int = 2000
    n_reps: int = 400
    nn_trials: int | None = None  # equivalent-model draws; defaults to n_trials
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rho_list", tuple(float(r) for r in self.rho_list))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.regime not in REGIMES + ("both",):
            raise ValueError(f"regime must be one of large_n, large_nn, both; got {self.regime!r}")
        if self.n_trials < 100:
            raise ValueError("n_trials must be at least 100")
        N = self.scenario.n_sensors
        for rho in self.rho_list:
            for n in self.n_list:
                check_rho(rho, n, N)

    @property
    def regimes(self) -> tuple[str, ...]:
        return REGIMES if self.regime == "both" else (self.regime,)

    @property
    def equivalent_trials(self) -> int:
        return self.nn_trials or self.n_trials


@dataclass(frozen=True)
class SampleSet:
    """Standardized SNR deviations of one regime, with provenance.

    ``values = sqrt(n) (snr - center) / scale``; the raw ``snr`` draws are kept.
    """

    values: np.ndarray
    regime: str
    n: int
    N: int
    rho: float
    seed: int
    center: float
    scale: float
    snr: np.ndarray

    def __len__(self):
        return self.values.size


def _snr_chunk(indices, s, sigma, sqrt_sigma, rho, n, seed, tol, max_iter):
    s0 = s.steering
    out = np.empty(len(indices))
    for k, t in enumerate(indices):
        try:
            batch = sample_snapshots(s, n, derive_seed(seed, t, DOMAIN_TRIALS), sqrt_sigma)
            C = solve_rte(batch, rho, tol, max_iter).matrix
            out[k] = output_snr(C, sigma, s0)
        except RteMvdrError as exc:
            raise TrialError(t, exc) from exc
    return out


def raw_snr_samples(s: Scenario, rho: float, n: int, n_trials: int, seed: int,
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    workers: int = 1) -> np.ndarray:
    """Output SNR of the RTE-based MVDR over ``n_trials`` independent trials.

    Trial ``t`` draws its snapshots from substream ``(seed, t)``.
    """
    check_rho(rho, n, s.n_sensors)
    sigma = build_covariance(s)
    fn = partial(_snr_chunk, s=s, sigma=sigma, sqrt_sigma=hermitian_sqrt(sigma), rho=rho,
                 n=n, seed=seed, tol=tol, max_iter=max_iter)
    return np.concatenate(ordered_map(fn, chunked(range(n_trials), 100), workers))


def _paired_chunk(indices, s, sigma, sqrt_sigma, rho, n, alpha, seed, tol, max_iter):
    s0 = s.steering
    out = np.empty((len(indices), 2))
    for k, t in enumerate(indices):
        try:
            batch = sample_snapshots(s, n, derive_seed(seed, t, DOMAIN_TRIALS), sqrt_sigma)
            C = solve_rte(batch, rho, tol, max_iter).matrix
            S = asymptotics.s_tilde_from_gaussians(batch.gaussians, sqrt_sigma, alpha)
            out[k] = output_snr(C, sigma, s0), output_snr(S, sigma, s0)
        except RteMvdrError as exc:
            raise TrialError(t, exc) from exc
    return out


def paired_snr_samples(s: Scenario, rho: float, n: int, n_trials: int, seed: int,
                       tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                       workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """RTE-based and ``S~``-based output SNR computed on the same Gaussian draws.

    Trial ``t`` uses the snapshots of :func:`raw_snr_samples`; ``S~`` is built
    from the Gaussian part ``w_i`` of those snapshots. The first array equals
    ``raw_snr_samples(s, rho, n, n_trials, seed)``. Sharing the draws removes
    most of the sampling noise from a comparison of the two laws.
    """
    check_rho(rho, n, s.n_sensors)
    sigma = build_covariance(s)
    if rho >= 1.0:
        raise RhoOne("the Gaussian equivalent is undefined at rho = 1")
    alpha = asymptotics.compute_alpha(rho, asymptotics.solve_gamma(sigma, rho), s.n_sensors / n)
    fn = partial(_paired_chunk, s=s, sigma=sigma, sqrt_sigma=hermitian_sqrt(sigma), rho=rho,
                 n=n, alpha=alpha, seed=seed, tol=tol, max_iter=max_iter)
    pairs = np.concatenate(ordered_map(fn, chunked(range(n_trials), 100), workers))
    return pairs[:, 0], pairs[:, 1]


@lru_cache(maxsize=64)
def _large_n_cached(s, rho, n_cal, n_reps, seed, workers):
    return asymptotics.large_n_params(s, rho, n_cal, n_reps, seed, workers)


def large_n_center_scale(cfg: ExperimentConfig, rho: float) -> tuple[float, float]:
    """``(SNR0, sigma_n)`` from the delta-method pipeline."""
    if rho == 1.0:
        raise DegenerateRho("rho = 1: the RTE is the identity and sigma_n = 0")
    p = _large_n_cached(cfg.scenario, float(rho), cfg.n_cal, cfg.n_reps, cfg.seed, cfg.workers)
    if not p.sigma_n > 0:
        raise DegenerateRho(f"sigma_n = {p.sigma_n} at rho = {rho}")
    return p.snr0, p.sigma_n


def large_nn_center_scale(cfg: ExperimentConfig, rho: float, n: int) -> tuple[float, float]:
    return asymptotics.large_nn_center_scale(cfg.scenario, rho, n, cfg.equivalent_trials,
                                             cfg.seed, cfg.workers)


def _standardize(snr, regime, cfg, rho, n, center, scale) -> SampleSet:
    values = np.sqrt(n) * (snr - center) / scale
    return SampleSet(values, regime, n, cfg.scenario.n_sensors, float(rho), cfg.seed,
                     float(center), float(scale), snr)


def run_clt(cfg: ExperimentConfig, rho: float, n: int,
            regimes: Sequence[str] | None = None) -> dict[str, SampleSet]:
    """Standardize one set of raw SNR draws under each requested regime."""
    regimes = tuple(regimes or cfg.regimes)
    if "large_n" in regimes and rho == 1.0:
        raise DegenerateRho("rho = 1: the RTE is the identity and sigma_n = 0")
    snr = raw_snr_samples(cfg.scenario, rho, n, cfg.n_trials, cfg.seed, cfg.tol,
                          cfg.max_iter, cfg.workers)
    out = {}
    for regime in regimes:
        if regime == "large_n":
            center, scale = large_n_center_scale(cfg, rho)
        elif regime == "large_nn":
            center, scale = large_nn_center_scale(cfg, rho, n)
        else:
            raise ValueError(f"unknown regime {regime!r}")
        out[regime] = _standardize(snr, regime, cfg, rho, n, center, scale)
    return out


def run_clt_large_n(cfg: ExperimentConfig, rho: float, n: int) -> SampleSet:
    return run_clt(cfg, rho, n, ("large_n",))["large_n"]


def run_clt_large_nn(cfg: ExperimentConfig, rho: float, n: int) -> SampleSet:
    return run_clt(cfg, rho, n, ("large_nn",))["large_nn"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_rows(cfg: ExperimentConfig) -> list[dict]:
    """One row per ``(rho, n, regime)``; a failing cell gets an ``error`` entry instead of distances."""
    rows = []
    N = cfg.scenario.n_sensors
    for rho in cfg.rho_list:
        for n in cfg.n_list:
            base = {"N": N, "n": n, "rho": rho, "seed": cfg.seed, "n_trials": cfg.n_trials}
            try:
                sets = run_clt(cfg, rho, n)
                cell_error = None
            except (RteMvdrError, ValueError, ArithmeticError) as exc:
                log.warning("cell rho=%s n=%s failed: %s", rho, n, exc)
                sets, cell_error = {}, exc
            for regime in cfg.regimes:
                row = dict(regime=regime, **base)
                err = cell_error
                if regime in sets:
                    try:
                        rep = divergence_report(sets[regime].values, cfg.histogram_bins)
                        row.update(ks=rep.ks, hellinger=rep.hellinger, tv=rep.total_variation,
                                   sym_kl=rep.sym_kl)
                    except (RteMvdrError, ValueError) as exc:
                        err = exc
                if err is not None:
                    row.update(ks="", hellinger="", tv="", sym_kl="",
                               error=f"{type(err).__name__}: {err}".replace("\n", " "))
                else:
                    row["error"] = ""
                rows.append(row)
    return rows


def rows_to_csv(rows: Iterable[dict], columns: Sequence[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def divergence_sweep(cfg: ExperimentConfig, path: str | os.PathLike | None = None) -> str:
    """Run the sweep and return the CSV text, also writing it to ``path`` if given."""
    text = rows_to_csv(sweep_rows(cfg))
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def samples_to_csv(sets: Iterable[SampleSet]) -> str:
    rows = []
    for ss in sets:
        for i, v in enumerate(ss.values):
            rows.append(dict(regime=ss.regime, N=ss.N, n=ss.n, rho=ss.rho, seed=ss.seed,
                             index=i, value=float(v)))
    return rows_to_csv(rows, SAMPLE_COLUMNS)


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[dict]]:
    text = Path(path).read_text()
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    return list(reader.fieldnames or []), rows


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

METRICS = ("ks", "hellinger", "tv", "sym_kl")
METRIC_LABELS = {"ks": "KS", "hellinger": "Hellinger", "tv": "Total variation",
                 "sym_kl": "Symmetrized KL"}


def _figure_setup():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "rtemvdr"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def emit_figures(csv_path: str | os.PathLike, output_dir: str | os.PathLike) -> list[Path]:
    """Render SVG figures from a sweep CSV or a samples CSV.

    Sweep CSVs give one figure per ``rho``: every metric against ``n/N``, one
    series per (regime, metric). Samples CSVs give empirical CDF overlays
    against the standard normal, one figure per ``(rho, n)``.
    """
    columns, rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if set(CSV_COLUMNS) <= set(columns):
        return _render_sweep(rows, out)
    if set(SAMPLE_COLUMNS) <= set(columns):
        return _render_cdfs(rows, out)
    raise ValueError(f"{csv_path}: unrecognised columns {columns}")


def _render_sweep(rows, out: Path) -> list[Path]:
    plt = _figure_setup()
    paths = []
    for rho in sorted({float(r["rho"]) for r in rows}):
        sub = [r for r in rows if float(r["rho"]) == rho and not r["error"]]
        fig, axes = plt.subplots(2, 2, figsize=(9, 7))
        for ax, metric in zip(axes.ravel(), METRICS):
            for regime in REGIMES:
                pts = sorted((int(r["n"]) / int(r["N"]), float(r[metric]))
                             for r in sub if r["regime"] == regime)
                if not pts:
                    continue
                x, y = zip(*pts)
                line, = ax.plot(x, y, marker="o", label=regime.replace("_", "-"))
                line.set_gid(f"{regime}-{metric}")
            ax.set_xlabel("n / N")
            ax.set_title(METRIC_LABELS[metric])
            ax.legend()
        fig.suptitle(f"distance to N(0, 1), rho = {rho:g}")
        fig.tight_layout()
        path = out / f"distances_rho{rho:g}.svg"
        _save(fig, path)
        plt.close(fig)
        paths.append(path)
    return paths


def _render_cdfs(rows, out: Path) -> list[Path]:
    from .stats import standard_normal_cdf
    plt = _figure_setup()
    paths = []
    keys = sorted({(float(r["rho"]), int(r["n"])) for r in rows})
    for rho, n in keys:
        fig, ax = plt.subplots(figsize=(6, 4.5))
        sub = [r for r in rows if float(r["rho"]) == rho and int(r["n"]) == n]
        lo, hi = -4.0, 4.0
        for regime in REGIMES:
            v = np.sort([float(r["value"]) for r in sub if r["regime"] == regime])
            if v.size == 0:
                continue
            line, = ax.step(v, np.arange(1, v.size + 1) / v.size, where="post",
                            label=regime.replace("_", "-"))
            line.set_gid(f"{regime}-ecdf")
            lo, hi = min(lo, v[0]), max(hi, v[-1])
        grid = np.linspace(lo, hi, 400)
        ax.plot(grid, standard_normal_cdf(grid), "k--", label="N(0, 1)")
        ax.set_title(f"rho = {rho:g}, N = {sub[0]['N']}, n = {n}")
        ax.legend()
        fig.tight_layout()
        path = out / f"cdf_rho{rho:g}_n{n}.svg"
        _save(fig, path)
        plt.close(fig)
        paths.append(path)
    return paths


def config_with(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)
