"""Nonlinear-loop-mirror regenerator as a kernel on photon-number distributions.

A number state |n> on the control port imprints a cross-phase ``n*chi`` on one
arm of the interferometer, so the output port carries the coherent state
``alpha * exp(i n chi / 2) * sin(n chi / 2)``.  The output only depends on the
photon-number distribution of the input, which is what makes the chain a
classical Markov chain.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fock import (
    DomainError,
    PhotonNumberDistribution,
    TransitionKernel,
    apply_kernel,
    coherent_number_distribution,
    compose,
    poisson_kernel,
    poisson_tail,
    thinning_kernel,
)

log = logging.getLogger(__name__)

DEFAULT_DEFICIT_FRACTION = 1e-2


@dataclass(frozen=True)
class RegeneratorConfig:
    kerr_coupling: float
    ll_amplitude: complex

    def __post_init__(self):
        if not self.kerr_coupling > 0:
            raise DomainError("Kerr coupling must be positive")
        object.__setattr__(self, "ll_amplitude", complex(self.ll_amplitude))

    @property
    def ll_mean(self) -> float:
        return abs(self.ll_amplitude) ** 2


def regen_mean(n, chi: float, pump_mean: float):
    """Mean photon number of the output component for n control photons."""
    return pump_mean * np.sin(np.asarray(n) * chi / 2.0) ** 2


def build_regen_kernel(cfg: RegeneratorConfig, dim_in: int, dim_out: int) -> TransitionKernel:
    if dim_in < 1 or dim_out < 1:
        raise DomainError("kernel dimensions must be positive")
    if cfg.ll_mean >= dim_out:
        log.warning("local-laser mean %.1f not below output dim %d", cfg.ll_mean, dim_out)
    means = regen_mean(np.arange(dim_in), cfg.kerr_coupling, cfg.ll_mean)
    return poisson_kernel(means, dim_out)


def optimal_config(input_level_beta: complex, eta_next: float) -> RegeneratorConfig:
    """Switching point for input level beta, pre-compensating a following loss eta.

    chi = pi/|beta|^2 puts the mean control photon number on a pi phase shift;
    the local laser is -i*beta/sqrt(eta) so the level beta is restored after the
    loss and the regenerator's +i phase is cancelled.
    """
    beta = complex(input_level_beta)
    if beta == 0:
        raise DomainError("no switching value exists for a zero input level")
    if not 0.0 < eta_next <= 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1], got {eta_next}")
    return RegeneratorConfig(math.pi / abs(beta) ** 2, -1j * beta / math.sqrt(eta_next))


def composite_step_kernel(input_level_beta: complex, eta: float, dim: int) -> TransitionKernel:
    """Regenerator at its optimal working point followed by a loss segment.

    The regenerator output is held on a window sized for its own local-laser
    mean |beta|^2/eta before thinning brings it back to ``dim``.
    """
    cfg = optimal_config(input_level_beta, eta)
    if eta == 1.0:
        return build_regen_kernel(cfg, dim, dim)
    # The intermediate window may not leak more than the final one does.
    mid = max(dim, default_dim(cfg.ll_mean))
    budget = poisson_tail(dim, abs(complex(input_level_beta)) ** 2)
    while poisson_tail(mid, cfg.ll_mean) > budget:
        mid += 16
    regen = build_regen_kernel(cfg, dim, mid)
    return compose(thinning_kernel(eta, mid, dim), regen)


def default_dim(beta_sq: float) -> int:
    return math.ceil(beta_sq + 12.0 * math.sqrt(beta_sq)) + 64


def auto_dim(beta: complex, n_steps: int, fraction: float = DEFAULT_DEFICIT_FRACTION) -> int:
    """Smallest dim >= default_dim whose a-priori deficit bound stays below fraction * B(1).

    Every kernel column is Poisson with mean <= |beta|^2, so each step leaks at most
    the Poisson(|beta|^2) tail; B(k) >= B(1) because vacuum is absorbing, and B(1)
    computed on the default window is itself a lower bound on the exact value.
    """
    b2 = abs(complex(beta)) ** 2
    dim = default_dim(b2)
    if b2 == 0:
        return dim
    p1 = apply_kernel(composite_step_kernel(beta, 1.0, dim), coherent_number_distribution(b2, dim))
    target = fraction * p1[0] / (n_steps + 1)
    while poisson_tail(dim, b2) > target:
        dim += 16
    return dim


@dataclass(frozen=True)
class ChainConfig:
    input_amplitude: complex
    n_repeaters: int
    segment_transmissivities: Sequence[float] = (0.5,)
    dim: int | None = None
    deficit_fraction: float = DEFAULT_DEFICIT_FRACTION

    def __post_init__(self):
        object.__setattr__(self, "input_amplitude", complex(self.input_amplitude))
        etas = tuple(float(e) for e in np.atleast_1d(self.segment_transmissivities))
        object.__setattr__(self, "segment_transmissivities", etas)
        if self.n_repeaters < 1:
            raise DomainError("need at least one repeater")
        if len(etas) not in (1, self.n_repeaters):
            raise ValueError("give one transmissivity or one per repeater")
        if any(not 0.0 < e <= 1.0 for e in etas):
            raise DomainError("transmissivities must lie in (0, 1]")
        if self.dim is None:
            object.__setattr__(self, "dim", default_dim(self.beta_sq))
        if self.dim <= self.beta_sq + 8.0 * math.sqrt(self.beta_sq):
            raise DomainError(f"dim {self.dim} too small for |beta|^2 = {self.beta_sq:g}")

    @property
    def beta_sq(self) -> float:
        return abs(self.input_amplitude) ** 2

    def eta(self, k: int) -> float:
        """Transmissivity of the segment after repeater k (0-based)."""
        etas = self.segment_transmissivities
        return etas[0] if len(etas) == 1 else etas[k]

    @property
    def launch_amplitudes(self) -> tuple[complex, ...]:
        """Peak amplitude gamma_n = beta/sqrt(eta_n) launched into each segment."""
        return tuple(self.input_amplitude / math.sqrt(e) for e in self.segment_transmissivities)


@dataclass(frozen=True, eq=False)
class ChainResult:
    ber_series: np.ndarray
    deficit_series: np.ndarray
    final_distribution: PhotonNumberDistribution
    input_ber: float
    flagged_steps: tuple[int, ...] = field(default=())

    @property
    def truncation_flag(self) -> bool:
        return bool(self.flagged_steps)


def iterate_chain(chain: ChainConfig) -> ChainResult:
    """Propagate |beta> through N repeater+loss steps; BER(k) is the vacuum mass."""
    beta, dim = chain.input_amplitude, chain.dim
    p = coherent_number_distribution(chain.beta_sq, dim)
    input_ber = float(p[0])
    ber = np.empty(chain.n_repeaters)
    deficit = np.empty(chain.n_repeaters)
    if beta == 0:
        ber[:] = 1.0
        deficit[:] = 0.0
        return ChainResult(ber, deficit, p, input_ber)

    kernels: dict[float, TransitionKernel] = {}
    flagged = []
    for k in range(chain.n_repeaters):
        eta = chain.eta(k)
        if eta not in kernels:
            kernels[eta] = composite_step_kernel(beta, eta, dim)
        p = apply_kernel(kernels[eta], p)
        ber[k] = p[0]
        deficit[k] = p.deficit
        if p.deficit > chain.deficit_fraction * p[0]:
            flagged.append(k + 1)
    if flagged:
        log.warning("truncation deficit exceeds %g of BER at %d steps (first N=%d)",
                    chain.deficit_fraction, len(flagged), flagged[0])
    return ChainResult(ber, deficit, p, input_ber, tuple(flagged))


@dataclass(frozen=True, eq=False)
class ComponentMixture:
    weights: np.ndarray
    amplitudes: np.ndarray
    deficit: float = 0.0

    def __len__(self):
        return len(self.weights)

    def mean_amplitude(self) -> complex:
        return complex(np.sum(self.weights * self.amplitudes) / np.sum(self.weights))


def component_amplitude(n, cfg: RegeneratorConfig):
    half = np.asarray(n) * cfg.kerr_coupling / 2.0
    return cfg.ll_amplitude * np.exp(1j * half) * np.sin(half)


def output_components(p_in: PhotonNumberDistribution, cfg: RegeneratorConfig) -> ComponentMixture:
    """Coherent-state decomposition of the regenerator output (zero-weight terms dropped)."""
    n = np.nonzero(p_in.probs)[0]
    return ComponentMixture(p_in.probs[n].copy(), component_amplitude(n, cfg), p_in.deficit)


def chain_output_components(beta: complex, steps: int, eta: float = 1.0,
                            dim: int | None = None) -> ComponentMixture:
    """Coherent components leaving the ``steps``-th repeater-loss pair."""
    chain = ChainConfig(beta, max(steps, 1), (eta,), dim)
    p = coherent_number_distribution(chain.beta_sq, chain.dim)
    if steps > 1:
        K = composite_step_kernel(beta, eta, chain.dim)
        for _ in range(steps - 1):
            p = apply_kernel(K, p)
    cfg = optimal_config(beta, eta)
    # Loss on a coherent state only rescales the amplitude.
    scaled = RegeneratorConfig(cfg.kerr_coupling, cfg.ll_amplitude * math.sqrt(eta))
    return output_components(p, scaled)
