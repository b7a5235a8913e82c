"""Wigner functions of coherent-state mixtures on the complex-amplitude plane.

Convention ("coh-plane-2pi"): a coherent state |g> has
W(z) = (2/pi) exp(-2 |z - g|^2), which integrates to 1 over d^2z = dRe dIm.
Each quadrature therefore has standard deviation 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regen import ComponentMixture

CONVENTION = "coh-plane-2pi"
SIGMA = 0.5
DROP_RATIO = 1e-16


@dataclass(frozen=True, eq=False)
class PhaseSpaceGrid:
    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray  # values[i, j] at re_axis[j] + 1j * im_axis[i]

    @property
    def cell_area(self) -> float:
        return float((self.re_axis[1] - self.re_axis[0]) * (self.im_axis[1] - self.im_axis[0]))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def first_moment(self) -> complex:
        w = self.values * self.cell_area
        total = w.sum()
        return complex((w.sum(axis=0) @ self.re_axis) / total, (w.sum(axis=1) @ self.im_axis) / total)


def prune(mix: ComponentMixture, ratio: float = DROP_RATIO) -> ComponentMixture:
    if len(mix) == 0:
        raise ValueError("empty mixture")
    keep = mix.weights >= ratio * mix.weights.max()
    return ComponentMixture(mix.weights[keep], mix.amplitudes[keep], mix.deficit)


def default_extent(mix: ComponentMixture, n_sigma: float = 6.0) -> tuple[float, float, float, float]:
    """Bounding box of the component cloud padded by n_sigma quadrature widths."""
    amps = prune(mix).amplitudes
    pad = n_sigma * SIGMA
    return (amps.real.min() - pad, amps.real.max() + pad, amps.imag.min() - pad, amps.imag.max() + pad)


def wigner_at(mix: ComponentMixture, z) -> np.ndarray:
    mix = prune(mix)
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape)
    for w, g in zip(mix.weights, mix.amplitudes):
        d = z - g
        out += w * np.exp(-2.0 * (d.real ** 2 + d.imag ** 2))
    return out * (2.0 / np.pi)


def wigner_of_mixture(mix: ComponentMixture, extent=None, resolution: int = 200) -> PhaseSpaceGrid:
    """Sample W on a regular grid; ``extent = (re_lo, re_hi, im_lo, im_hi)``."""
    if resolution < 16:
        raise ValueError("grid resolution must be at least 16 per axis")
    if extent is None:
        extent = default_extent(mix)
    re_lo, re_hi, im_lo, im_hi = extent
    if not (re_hi > re_lo and im_hi > im_lo):
        raise ValueError(f"degenerate grid extent {extent}")
    re_axis = np.linspace(re_lo, re_hi, resolution)
    im_axis = np.linspace(im_lo, im_hi, resolution)
    values = wigner_at(mix, re_axis[None, :] + 1j * im_axis[:, None])
    return PhaseSpaceGrid(re_axis, im_axis, values)


def ridge(mix: ComponentMixture, phases, radii) -> np.ndarray:
    """Radius of maximal W along each ray at the given absolute phases."""
    phases = np.asarray(phases, dtype=float)
    radii = np.asarray(radii, dtype=float)
    z = radii[None, :] * np.exp(1j * phases[:, None])
    return radii[np.argmax(wigner_at(mix, z), axis=1)]
