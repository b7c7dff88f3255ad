"""Empirical distributions, KS distances and histogram f-divergences."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import EmptySamples, SupportMismatch

__all__ = [
    "Histogram", "EmpiricalDistribution", "DivergenceReport",
    "standard_normal_cdf", "standard_normal_pdf",
    "ecdf", "ks_statistic", "two_sample_ks", "f_divergence", "divergence_report",
    "F_KINDS",
]

F_KINDS = ("hellinger", "tv", "sym_kl")
_TINY = 1e-30


def standard_normal_cdf(x):
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / np.sqrt(2.0))


def standard_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    densities: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def total_mass(self) -> float:
        return float(np.sum(self.densities * self.widths))


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted samples with a histogram density view.

    ``bins`` is a bin count or ``"fd"`` for the Freedman-Diaconis rule.
    """

    samples: np.ndarray
    histogram: Histogram

    @classmethod
    def from_samples(cls, samples, bins: int | str | None = "fd") -> "EmpiricalDistribution":
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise EmptySamples("no samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        edges = np.histogram_bin_edges(x, bins="fd" if bins is None else bins)
        counts, edges = np.histogram(x, bins=edges)
        widths = np.diff(edges)
        if np.any(widths <= 0):  # all samples equal
            edges = np.array([x[0] - 0.5, x[0] + 0.5])
            counts, widths = np.array([x.size]), np.array([1.0])
        dens = counts / (x.size * widths)
        return cls(x, Histogram(edges, dens))

    @property
    def n(self) -> int:
        return self.samples.size

    def cdf(self, x):
        return ecdf(self.samples)(x)


def _as_empirical(data) -> EmpiricalDistribution:
    if isinstance(data, EmpiricalDistribution):
        return data
    return EmpiricalDistribution.from_samples(data)


def ecdf(samples) -> Callable:
    """Right-continuous empirical CDF ``x -> #{samples <= x} / n``."""
    xs = np.sort(np.asarray(samples, dtype=float).ravel())
    if xs.size == 0:
        raise EmptySamples("ECDF of an empty sample")
    n = xs.size

    def F(x):
        return np.searchsorted(xs, x, side="right") / n

    return F


def ks_statistic(emp, ref_cdf: Callable = standard_normal_cdf) -> float:
    """``sup_x |F_n(x) - F(x)|`` against a continuous reference CDF.

    Exact over the order statistics: ``max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)``.
    """
    if not isinstance(emp, EmpiricalDistribution):
        x = np.sort(np.asarray(emp, dtype=float).ravel())
    else:
        x = emp.samples
    n = x.size
    if n == 0:
        raise EmptySamples("KS statistic of an empty sample")
    F = np.asarray(ref_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F - (i - 1) / n)
    return float(min(1.0, max(d_plus, d_minus, 0.0)))


def two_sample_ks(a, b) -> float:
    """``sup_x |F_a(x) - F_b(x)|`` over the merged sample grid."""
    xa = a.samples if isinstance(a, EmpiricalDistribution) else np.sort(np.ravel(a))
    xb = b.samples if isinstance(b, EmpiricalDistribution) else np.sort(np.ravel(b))
    if xa.size == 0 or xb.size == 0:
        raise EmptySamples("two-sample KS needs two nonempty samples")
    grid = np.concatenate([xa, xb])
    Fa = np.searchsorted(xa, grid, side="right") / xa.size
    Fb = np.searchsorted(xb, grid, side="right") / xb.size
    return float(np.max(np.abs(Fa - Fb)))


def f_divergence(emp_pdf, ref_pdf: Callable = standard_normal_pdf, kind: str = "hellinger") -> float:
    """Histogram quadrature of ``int f(p/q) q dx`` over the histogram range.

    ``p`` is the histogram density, ``q`` the reference density at bin
    midpoints. ``f`` is ``(sqrt(t) - 1)^2`` for ``hellinger``, ``|t - 1|/2``
    for ``tv``; ``sym_kl`` is ``KL(P||Q) + KL(Q||P)`` with ``f(t) = t log t``,
    summed over bins where the empirical density is positive.

    Raises
    ------
    SupportMismatch
        If more than 5% of the empirical mass sits where ``q < 1e-30``.
    """
    if kind not in F_KINDS:
        raise ValueError(f"unknown divergence {kind!r}; expected one of {F_KINDS}")
    hist = emp_pdf.histogram if isinstance(emp_pdf, EmpiricalDistribution) else emp_pdf
    p = np.asarray(hist.densities, dtype=float)
    w = hist.widths
    q = np.asarray(ref_pdf(hist.midpoints), dtype=float)
    if p.size == 0:
        raise EmptySamples("empty histogram")
    off_support = q < _TINY
    total = np.sum(p * w)
    if np.sum(p[off_support] * w[off_support]) > 0.05 * total:
        raise SupportMismatch("more than 5% of the empirical mass lies outside the reference support")

    if kind == "hellinger":
        return float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2 * w))
    if kind == "tv":
        return float(0.5 * np.sum(np.abs(p - q) * w))
    both = (p > 0) & ~off_support
    pb, qb = p[both], q[both]
    return float(np.sum((pb - qb) * np.log(pb / qb) * w[both]))


@dataclass(frozen=True)
class DivergenceReport:
    ks: float
    hellinger: float
    total_variation: float
    sym_kl: float

    def as_dict(self) -> dict:
        return asdict(self)


def divergence_report(samples, bins: int | str | None = "fd",
                      ref_cdf: Callable = standard_normal_cdf,
                      ref_pdf: Callable = standard_normal_pdf) -> DivergenceReport:
    """All distances of a sample to a reference law (standard normal by default)."""
    emp = EmpiricalDistribution.from_samples(samples, bins)
    return DivergenceReport(
        ks=ks_statistic(emp, ref_cdf),
        hellinger=f_divergence(emp, ref_pdf, "hellinger"),
        total_variation=f_divergence(emp, ref_pdf, "tv"),
        sym_kl=f_divergence(emp, ref_pdf, "sym_kl"),
    )
