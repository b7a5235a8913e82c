"""BER curves, the linear-regime fit B = C*N, and the law log10 C = a + b|beta|^2."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fock import DomainError
from .regen import (
    DEFAULT_DEFICIT_FRACTION,
    ChainConfig,
    ComponentMixture,
    auto_dim,
    iterate_chain,
)

# Reference values for comparison tables.
PUBLISHED_LAW = {"intercept": -0.44, "intercept_err": 0.02, "slope": -0.0356, "slope_err": 0.0001}
PUBLISHED_SPOT = {"beta": 20.0, "n": 100, "ber": 2e-13}
# Lossy line with ideal photon-number amplifiers at gain 2, quoted from the literature.
PHOTON_NUMBER_AMPLIFIER_BER = 3.4e-7

DEFAULT_WINDOW = (50, 200)


@dataclass(frozen=True, eq=False)
class BerSeries:
    beta_level: complex
    n: np.ndarray
    ber: np.ndarray
    deficit: np.ndarray
    dim: int
    eta: float = 0.5
    flagged: tuple[int, ...] = ()

    @property
    def truncation_flag(self) -> bool:
        return bool(self.flagged)

    def at(self, n: int) -> float:
        return float(self.ber[n - 1])

    def points(self):
        return list(zip(self.n.tolist(), self.ber.tolist(), self.deficit.tolist()))


@dataclass(frozen=True)
class LinearFit:
    coefficient: float
    window: tuple[int, int]
    max_relative_residual: float


@dataclass(frozen=True, eq=False)
class CoefficientLawFit:
    intercept: float
    slope: float
    beta_sq: np.ndarray
    residuals: np.ndarray

    def predict_log10(self, beta_sq):
        return self.intercept + self.slope * np.asarray(beta_sq)


@dataclass(frozen=True)
class DephasingStats:
    delta_sq: float
    predicted_mean_photons: float
    predicted_phase_variance: float


def ber_curve(beta: complex, n_max: int, dim: int | None = None, eta: float = 0.5,
              deficit_fraction: float = DEFAULT_DEFICIT_FRACTION) -> BerSeries:
    """B(N) for N = 1..n_max with every repeater at its optimal working point.

    Without an explicit ``dim`` the window is widened until the truncation
    error bar is guaranteed below ``deficit_fraction`` of every B(N).
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    if dim is None:
        dim = auto_dim(beta, n_max, deficit_fraction)
    res = iterate_chain(ChainConfig(beta, n_max, (eta,), dim, deficit_fraction))
    return BerSeries(complex(beta), np.arange(1, n_max + 1), res.ber_series,
                     res.deficit_series, dim, eta, res.flagged_steps)


def _window_ratios(series: BerSeries, window: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = window
    if not 1 <= lo <= hi <= series.n[-1]:
        raise ValueError(f"window {window} not inside 1..{series.n[-1]}")
    sel = (series.n >= lo) & (series.n <= hi)
    b, n = series.ber[sel], series.n[sel]
    if np.any(b <= 0):
        raise ValueError("BER vanishes inside the fit window")
    if np.any(np.diff(b) < 0):
        raise ValueError("BER is not monotone inside the fit window")
    return b, n


def fit_linear_regime(series: BerSeries, window: tuple[int, int] = DEFAULT_WINDOW) -> LinearFit:
    """Relative least squares of B = C*N through the origin.

    Minimizing sum (B/(C N) - 1)^2 over u = 1/C gives u = sum r / sum r^2
    with r = B/N.
    """
    b, n = _window_ratios(series, window)
    r = b / n
    c = math.fsum(r * r) / math.fsum(r)
    return LinearFit(c, tuple(window), float(np.max(np.abs(r / c - 1.0))))


def flatness(series: BerSeries, coefficient: float, window: tuple[int, int]) -> float:
    """max |B(N)/(C N) - 1| over the window."""
    b, n = _window_ratios(series, window)
    return float(np.max(np.abs(b / (coefficient * n) - 1.0)))


def fit_coefficient_law(pairs: Iterable[tuple[float, float]]) -> CoefficientLawFit:
    """Ordinary least squares of log10 C against |beta|^2."""
    pairs = list(pairs)
    x = np.array([p[0] for p in pairs], dtype=float)
    c = np.array([p[1] for p in pairs], dtype=float)
    if len(np.unique(x)) < 4:
        raise ValueError("need at least 4 distinct |beta|^2 values")
    if np.any(c <= 0):
        raise ValueError("coefficients must be positive")
    y = np.log10(c)
    design = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return CoefficientLawFit(float(a), float(b), x, y - (a + b * x))


def sweep(betas: Sequence[float], n_max: int, window: tuple[int, int] = DEFAULT_WINDOW,
          eta: float = 0.5, map_fn=map):
    """BER curves and linear fits for several input levels.

    ``map_fn`` lets callers run the independent chains concurrently.
    """
    curves = list(map_fn(lambda b: ber_curve(b, n_max, eta=eta), betas))
    fits = [fit_linear_regime(s, window) for s in curves]
    law = fit_coefficient_law((abs(s.beta_level) ** 2, f.coefficient) for s, f in zip(curves, fits))
    return curves, fits, law


def dephasing_stats(beta: complex, ll_mean: float) -> DephasingStats:
    """Gaussian-dephasing approximation of a regenerated coherent state.

    The phase spread is (chi/2)^2 |beta|^2 = pi^2 / (4 |beta|^2); the 1/ll_mean
    term is the intrinsic phase noise of a coherent state, taken from the
    formula rather than measured.
    """
    b2 = abs(complex(beta)) ** 2
    if b2 == 0:
        raise DomainError("dephasing is undefined for a zero input level")
    d2 = math.pi ** 2 / (4.0 * b2)
    return DephasingStats(d2, ll_mean * math.exp(-d2), 1.0 / ll_mean + d2)


def component_phase_variance(mix: ComponentMixture) -> float:
    """Weighted variance of the component phases about their circular mean."""
    keep = (np.abs(mix.amplitudes) > 0) & (mix.weights > 0)
    if not np.any(keep):
        raise ValueError("all component amplitudes vanish")
    w, amps = mix.weights[keep], mix.amplitudes[keep]
    ref = amps[np.argmax(w)]
    rel = np.angle(amps * np.conj(ref))
    center = np.angle(np.sum(w * np.exp(1j * rel)))
    dev = np.angle(np.exp(1j * (rel - center)))
    return float(np.sum(w * dev * dev) / np.sum(w))
