"""Quantum regenerator chains built from Kerr nonlinear-loop mirrors.

The regenerator output depends only on the input photon-number distribution,
so a line of N repeater/loss stages is simulated as a Markov chain on number
distributions.  The bit-error rate after N stages is the vacuum probability of
the one-bit state.
"""
from .fock import (
    DomainError,
    PhotonNumberDistribution,
    TransitionKernel,
    apply_kernel,
    coherent_number_distribution,
    compose,
    poisson_log_pmf,
    thinning_kernel,
)
from .regen import (
    ChainConfig,
    ChainResult,
    ComponentMixture,
    RegeneratorConfig,
    build_regen_kernel,
    composite_step_kernel,
    iterate_chain,
    optimal_config,
    output_components,
    regen_mean,
)
from .ber import (
    ber_curve,
    component_phase_variance,
    dephasing_stats,
    fit_coefficient_law,
    fit_linear_regime,
)
from .wigner import PhaseSpaceGrid, wigner_of_mixture

__version__ = "0.1.0"
