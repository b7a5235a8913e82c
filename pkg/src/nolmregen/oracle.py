"""Brute-force regenerator and loss channels on truncated Fock density matrices.

Only meant for small dimensions (D <= 64).  It deliberately shares no code
with the kernel path so it can certify it.
"""
from __future__ import annotations

import cmath
import math
import warnings

import numpy as np

from .fock import DomainError, PhotonNumberDistribution

MAX_DIM = 64


def _check_dim(dim: int) -> None:
    if dim < 1:
        raise DomainError("dim must be positive")
    if dim > MAX_DIM:
        raise ValueError(f"oracle is capped at dim {MAX_DIM}, got {dim}")


def coherent_state_vector(gamma: complex, dim: int) -> np.ndarray:
    _check_dim(dim)
    gamma = complex(gamma)
    r2 = abs(gamma) ** 2
    if r2 >= dim / 2:
        warnings.warn(f"|gamma|^2 = {r2:g} is large for dim {dim}; expect truncation loss")
    vec = np.zeros(dim, dtype=complex)
    if gamma == 0:
        vec[0] = 1.0
        return vec
    log_r, phase = math.log(abs(gamma)), cmath.phase(gamma)
    for k in range(dim):
        log_mag = -r2 / 2 + k * log_r - 0.5 * math.lgamma(k + 1)
        vec[k] = cmath.rect(math.exp(log_mag), k * phase)
    return vec


def projector(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def random_density_matrix(dim: int, seed: int) -> np.ndarray:
    """Normalized G G^dagger for a seeded complex Gaussian G."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def regen_map_density(rho: np.ndarray, chi: float, alpha: complex) -> np.ndarray:
    dim = rho.shape[0]
    _check_dim(dim)
    out = np.zeros((dim, dim), dtype=complex)
    for n in range(dim):
        pop = rho[n, n].real
        if pop == 0:
            continue
        c_n = alpha * cmath.exp(0.5j * n * chi) * math.sin(0.5 * n * chi)
        out += pop * projector(coherent_state_vector(c_n, dim))
    return out


def loss_kraus_operators(eta: float, dim: int) -> list[np.ndarray]:
    """A_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>, k = 0..dim-1."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {eta}")
    ops = []
    for k in range(dim):
        a = np.zeros((dim, dim))
        for n in range(k, dim):
            a[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
        ops.append(a)
    return ops


def loss_channel_density(rho: np.ndarray, eta: float) -> np.ndarray:
    _check_dim(rho.shape[0])
    return sum(a @ rho @ a.T for a in loss_kraus_operators(eta, rho.shape[0]))


def diagonal(rho: np.ndarray) -> PhotonNumberDistribution:
    d = np.diag(rho)
    if np.max(np.abs(d.imag)) > 1e-10:
        raise ValueError("density matrix has complex diagonal entries")
    probs = np.maximum(d.real, 0.0)
    return PhotonNumberDistribution(probs, max(0.0, 1.0 - math.fsum(probs)))


def fidelity_pure(rho: np.ndarray, vec: np.ndarray) -> float:
    """<psi|rho|psi> for a normalized pure state."""
    return float(np.real(vec.conj() @ rho @ vec))


def check_density(rho: np.ndarray, trace_tol: float = 1e-8, psd_tol: float = 1e-10) -> list[str]:
    """Return the violated DensityMatrix invariants (empty when valid)."""
    problems = []
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        problems.append("not Hermitian")
    tr = np.trace(rho).real
    if not 1.0 - trace_tol <= tr <= 1.0 + 1e-12:
        problems.append(f"trace {tr:.12g} outside [1-{trace_tol:g}, 1]")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -psd_tol:
        problems.append("not positive semidefinite")
    return problems
