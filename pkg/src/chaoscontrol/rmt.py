"""Gaussian random-matrix ensembles and the reference quantities built on them.

Matrices are drawn from ``exp(-(N beta / 4) Tr H^2)`` so the level density is
a semicircle of radius two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import j1

from .rotor import write_columns

POISSON_FRACTION_01 = 1.0 - math.exp(-0.1)
BESSEL_FIRST_ZERO_COEFF = 1.9  # first zero of J1(2t/hbar) sits at t ~ 1.916 hbar


class InsufficientStatistics(ValueError):
    pass


@dataclass(frozen=True)
class GaussianEnsembleSample:
    matrices: list[np.ndarray]
    beta: int
    N: int

    def spectra(self) -> "SpectrumSet":
        return SpectrumSet([np.linalg.eigvalsh(h) for h in self.matrices])


@dataclass(frozen=True)
class SpectrumSet:
    spectra: list[np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "spectra", [np.sort(np.asarray(s, dtype=float)) for s in self.spectra])

    def pooled(self) -> np.ndarray:
        return np.concatenate(self.spectra) if self.spectra else np.zeros(0)


def sample_gaussian(N: int, beta: int, count: int, seed: int) -> GaussianEnsembleSample:
    """Draw ``count`` GOE (beta=1) or GUE (beta=2) matrices.

    GOE: off-diagonal variance 1/N, diagonal variance 2/N.  GUE: diagonal
    variance 1/N, real and imaginary off-diagonal parts each 1/(2N).
    """
    if beta not in (1, 2):
        raise ValueError(f"beta must be 1 or 2, got {beta}")
    if N < 2:
        raise ValueError("N must be >= 2")
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(count):
        if beta == 1:
            a = rng.standard_normal((N, N))
            h = (a + a.T) / math.sqrt(2.0 * N)
        else:
            a = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
            h = (a + a.conj().T) / (2.0 * math.sqrt(N))
        mats.append(h)
    return GaussianEnsembleSample(mats, beta, N)


def semicircle_density(E):
    E = np.asarray(E, dtype=float)
    out = np.sqrt(np.clip(4.0 - E**2, 0.0, None)) / (2.0 * math.pi)
    return out if out.ndim else float(out)


def semicircle_cdf(E):
    """Integrated semicircle density on [-2, E]."""
    E = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)
    out = 0.5 + E * np.sqrt(4.0 - E**2) / (4.0 * math.pi) + np.arcsin(E / 2.0) / math.pi
    return out if out.ndim else float(out)


def empirical_density_check(sample: GaussianEnsembleSample | SpectrumSet, bin_width: float = 0.1) -> float:
    """Sup distance between the pooled eigenvalue histogram and the semicircle.

    Each bin is compared with the semicircle averaged over the same bin.
    """
    spectra = sample.spectra() if isinstance(sample, GaussianEnsembleSample) else sample
    ev = spectra.pooled()
    if ev.size == 0:
        raise InsufficientStatistics("empty sample")
    lim = max(2.2, float(np.max(np.abs(ev))) + bin_width)
    nb = int(math.ceil(2 * lim / bin_width))
    edges = np.linspace(-lim, lim, nb + 1)
    hist, _ = np.histogram(ev, bins=edges)
    width = np.diff(edges)
    empirical = hist / (ev.size * width)
    expected = np.diff(semicircle_cdf(edges)) / width
    return float(np.max(np.abs(empirical - expected)))


def heisenberg_time(N: int, hbar: float) -> float:
    """2 pi hbar over the mean level spacing pi/N at the band centre."""
    return 2.0 * hbar * N


def bessel_autocorrelation(t, hbar: float):
    """hbar J1(2t/hbar)/t, equal to 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    safe = np.where(t == 0.0, 1.0, t)
    out = np.where(t == 0.0, 1.0, hbar * j1(2.0 * safe / hbar) / safe)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AutocorrelationSeries:
    t: np.ndarray
    empirical: np.ndarray  # complex ensemble average
    bessel: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.empirical - self.bessel)))

    def to_csv(self, path: str | Path) -> None:
        write_columns(path, ("t", "empirical", "bessel"), (self.t, self.empirical.real, self.bessel))


def ensemble_autocorrelation(sample: GaussianEnsembleSample | SpectrumSet, t_grid, hbar: float) -> AutocorrelationSeries:
    """Ensemble average of (1/N) sum_j exp(-i E_j t / hbar)."""
    spectra = sample.spectra() if isinstance(sample, GaussianEnsembleSample) else sample
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    acc = np.zeros(t.size, dtype=complex)
    for e in spectra.spectra:
        acc += np.mean(np.exp(-1j * np.outer(t, e) / hbar), axis=1)
    emp = acc / len(spectra.spectra)
    return AutocorrelationSeries(t, emp, np.asarray(bessel_autocorrelation(t, hbar)))


def scrambling_ratio(N: int) -> float:
    """Autocorrelation decay time over Heisenberg time for the Gaussian ensembles."""
    return BESSEL_FIRST_ZERO_COEFF / (2.0 * N)


def kicked_rotor_ratio(N: int, lyapunov: float) -> float:
    """Logtime over Heisenberg time for a chaotic map with exponent ``lyapunov``."""
    return math.log(N) / (lyapunov * N)


@dataclass(frozen=True)
class SpacingReport:
    n_spacings: int
    fraction_below: float
    threshold: float
    poisson_fraction: float
    exponent: float

    @property
    def repulsion(self) -> bool:
        return self.fraction_below < 0.5 * self.poisson_fraction


def unfolded_spacings(spectra: SpectrumSet, unfolding: str = "semicircle", bulk: float = 0.8) -> np.ndarray:
    """Nearest-neighbour spacings in units of the local mean spacing.

    ``semicircle`` maps each level through N times the integrated semicircle
    (for spectra normalized to radius two); ``mean`` only divides by the mean
    spacing.  Only the central ``bulk`` fraction of each spectrum is kept.
    """
    out = []
    for e in spectra.spectra:
        n = e.size
        if n < 2:
            continue
        x = n * semicircle_cdf(e) if unfolding == "semicircle" else e
        if unfolding not in ("semicircle", "mean"):
            raise ValueError(f"unknown unfolding {unfolding!r}")
        lo, hi = int(n * (1 - bulk) / 2), int(math.ceil(n * (1 + bulk) / 2))
        s = np.diff(x[lo:hi])
        out.append(s)
    if not out:
        return np.zeros(0)
    s = np.concatenate(out)
    return s / np.mean(s) if s.size else s


def spacing_repulsion_check(spectra: SpectrumSet, beta: int | None = None, threshold: float = 0.1,
                            unfolding: str = "semicircle", min_spacings: int = 1000) -> SpacingReport:
    """Fraction of unfolded spacings below ``threshold`` and the small-s exponent.

    The exponent comes from P(s < x) ~ x^(b+1): b = log2(P(s<2x)/P(s<x)) - 1,
    which is 0 for Poisson levels and ~beta under level repulsion.
    """
    s = unfolded_spacings(spectra, unfolding)
    if s.size < min_spacings:
        raise InsufficientStatistics(f"need at least {min_spacings} spacings, have {s.size}")
    f1 = float(np.mean(s < threshold))
    f2 = float(np.mean(s < 2 * threshold))
    exponent = math.log2(f2 / f1) - 1.0 if f1 > 0 else math.inf
    return SpacingReport(int(s.size), f1, threshold, 1.0 - math.exp(-threshold), exponent)
