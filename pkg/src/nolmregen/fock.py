"""Photon-number distributions and stochastic kernels over them.

Everything is computed in log domain and exponentiated once.  Entries that
would land below the smallest normal double are stored as exact zeros and
their (negligible) mass is charged to the truncation deficit, which is carried
along and never renormalized away.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np
from scipy.special import bdtrc, gammainc, gammaln, xlog1py, xlogy

# Old system TBB builds make numba complain once and fall back to OpenMP.
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

_TINY = np.finfo(np.float64).tiny
MASS_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PhotonNumberDistribution:
    """Truncated photon-number distribution plus the mass lost outside it."""

    probs: np.ndarray
    deficit: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        object.__setattr__(self, "deficit", float(self.deficit))
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d array")
        if np.any(self.probs < 0) or self.deficit < 0:
            raise ValueError("probabilities and deficit must be nonnegative")

    @property
    def dim(self) -> int:
        return self.probs.size

    @property
    def total(self) -> float:
        """Retained mass plus deficit; 1 up to rounding."""
        return math.fsum(self.probs) + self.deficit

    def mean(self) -> float:
        return math.fsum(np.arange(self.dim) * self.probs)

    def __getitem__(self, n):
        return self.probs[n]


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Column-stochastic matrix, ``entries[m, n] = P(out=m | in=n)``."""

    entries: np.ndarray
    column_deficits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))
        object.__setattr__(self, "column_deficits", _frozen(self.column_deficits))
        if self.entries.ndim != 2:
            raise ValueError("kernel entries must be a matrix")
        if self.column_deficits.shape != (self.entries.shape[1],):
            raise ValueError("need one deficit per kernel column")

    @cached_property
    def transposed(self) -> np.ndarray:
        return _frozen(self.entries.T)

    @property
    def dim_out(self) -> int:
        return self.entries.shape[0]

    @property
    def dim_in(self) -> int:
        return self.entries.shape[1]

    def column_mass_error(self) -> float:
        """max_n |sum_m K[m, n] + deficit[n] - 1|."""
        sums = np.array([math.fsum(c) for c in self.entries.T]) + self.column_deficits
        return float(np.max(np.abs(sums - 1.0)))

    @classmethod
    def identity(cls, dim: int) -> "TransitionKernel":
        return cls(np.eye(dim), np.zeros(dim))


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirling_remainder(n: np.ndarray) -> np.ndarray:
    """lnGamma(n+1) - [(n+1/2) ln n - n + ln sqrt(2 pi)] for n >= 1."""
    out = np.empty_like(n)
    small = n <= 15
    ns = n[small]
    out[small] = gammaln(ns + 1.0) - (ns + 0.5) * np.log(ns) + ns - _HALF_LOG_2PI
    nl = n[~small]
    nn = nl * nl
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    out[~small] = (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / nl
    return out


def _deviance(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """x ln(x/mu) + mu - x without cancellation when x is close to mu."""
    with np.errstate(over="ignore"):
        out = x * np.log(x / mu) + mu - x
    near = np.abs(x - mu) < 0.1 * (x + mu)
    if np.any(near):
        xn, mn = x[near], mu[near]
        v = (xn - mn) / (xn + mn)
        acc = (xn - mn) * v
        term = 2.0 * xn * v
        v2 = v * v
        for j in range(1, 24):
            term = term * v2
            acc = acc + term / (2 * j + 1)
        out[near] = acc
    return out


def poisson_log_pmf(m, mu):
    """Log of the Poisson mass ``mu**m exp(-mu) / m!``.

    Works elementwise on arrays.  ``mu == 0`` gives 0 at ``m == 0`` and
    ``-inf`` elsewhere.  The log-gamma term is split into its Stirling part,
    which cancels analytically against ``m ln mu - mu``, and a small remainder,
    so the result keeps full relative precision for m and mu in the thousands.
    """
    m_arr, mu_arr = np.broadcast_arrays(np.asarray(m, dtype=np.float64),
                                        np.asarray(mu, dtype=np.float64))
    if np.any(mu_arr < 0) or np.any(m_arr < 0):
        raise DomainError("poisson_log_pmf needs m >= 0 and mu >= 0")
    out = np.array(xlogy(m_arr, mu_arr) - mu_arr - gammaln(m_arr + 1.0))
    fine = (m_arr > 0) & (mu_arr > 0)
    if np.any(fine):
        mf, muf = m_arr[fine], mu_arr[fine]
        out[fine] = (-_stirling_remainder(mf) - _deviance(mf, muf)
                     - 0.5 * np.log(mf) - _HALF_LOG_2PI)
    return float(out) if out.ndim == 0 else out


def _exp_flush(logp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exponentiate, zeroing subnormals; returns (values, flushed mass per column)."""
    vals = np.exp(logp)
    under = vals < _TINY
    flushed = np.where(under, vals, 0.0)
    vals[under] = 0.0
    return vals, flushed.sum(axis=0)


def poisson_tail(dim: int, mu) -> np.ndarray:
    """P(M >= dim) for M ~ Poisson(mu), accurate far into the tail."""
    mu = np.asarray(mu, dtype=np.float64)
    return np.where(mu > 0, gammainc(dim, np.where(mu > 0, mu, 1.0)), 0.0)


def coherent_number_distribution(mean_photons: float, dim: int) -> PhotonNumberDistribution:
    """Poisson number statistics of a coherent state, truncated to ``dim``."""
    if dim < 1:
        raise DomainError("dim must be positive")
    if mean_photons < 0:
        raise DomainError("mean photon number must be nonnegative")
    probs, flushed = _exp_flush(poisson_log_pmf(np.arange(dim), mean_photons))
    return PhotonNumberDistribution(probs, float(poisson_tail(dim, mean_photons)) + float(flushed))


def poisson_kernel(means, dim_out: int) -> TransitionKernel:
    """Kernel whose column n is Poisson(means[n]) truncated to ``dim_out``."""
    means = np.asarray(means, dtype=np.float64)
    m = np.arange(dim_out, dtype=np.float64)[:, None]
    entries, flushed = _exp_flush(poisson_log_pmf(m, means[None, :]))
    return TransitionKernel(entries, poisson_tail(dim_out, means) + flushed)


def binomial_log_pmf(m, n, eta: float):
    """Log of C(n, m) eta**m (1-eta)**(n-m), elementwise; -inf outside 0 <= m <= n."""
    m, n = np.broadcast_arrays(np.asarray(m, dtype=np.float64), np.asarray(n, dtype=np.float64))
    out = np.full(m.shape, -np.inf)
    lo, hi = m == 0, (m == n) & (n > 0)
    out[lo] = xlog1py(n[lo], -eta)
    out[hi] = xlogy(n[hi], eta)
    mid = (m > 0) & (m < n)
    if np.any(mid) and 0.0 < eta < 1.0:
        x, nn = m[mid], n[mid]
        k = nn - x
        out[mid] = (
            _stirling_remainder(nn) - _stirling_remainder(x) - _stirling_remainder(k)
            - _deviance(x, nn * eta) - _deviance(k, nn * (1.0 - eta))
            - 0.5 * np.log(x * k / nn) - _HALF_LOG_2PI
        )
    return out


def thinning_kernel(eta: float, dim: int, dim_out: int | None = None) -> TransitionKernel:
    """Binomial thinning: each of n photons survives independently with prob. eta.

    With ``dim_out < dim`` the surviving counts at or above ``dim_out`` are
    charged to the column deficits.
    """
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {eta}")
    dim_out = dim if dim_out is None else dim_out
    if dim < 1 or dim_out < 1:
        raise DomainError("dims must be positive")
    n = np.arange(dim, dtype=np.float64)[None, :]
    m = np.arange(dim_out, dtype=np.float64)[:, None]
    logp = binomial_log_pmf(m, n, eta)
    entries, flushed = _exp_flush(logp)
    tail = np.zeros(dim)
    if dim_out < dim:
        cut = np.arange(dim_out, dim)
        tail[cut] = 1.0 if eta == 1.0 else bdtrc(dim_out - 1, cut, eta)
        # bdtrc is accurate in relative terms only while the tail is small.
        big = tail > 1e-3
        kept = np.array([math.fsum(col) for col in entries.T[big]])
        tail[big] = np.maximum(1.0 - kept, 0.0)
    return TransitionKernel(entries, tail + flushed)


_CHUNK = 64


@numba.njit(parallel=True, cache=True, nogil=True)
def _matvec_t(Kt, p):
    # Kt[n, m] = K[m, n].  Each out[m] is summed over ascending n with an exact
    # TwoSum error term; lanes m are independent, so the order never depends on
    # threading or vector width.
    cols, rows = Kt.shape
    out = np.empty(rows)
    nchunks = (rows + _CHUNK - 1) // _CHUNK
    for ch in numba.prange(nchunks):
        lo = ch * _CHUNK
        hi = min(rows, lo + _CHUNK)
        s = np.zeros(hi - lo)
        c = np.zeros(hi - lo)
        for n in range(cols):
            pn = p[n]
            for i in range(hi - lo):
                x = Kt[n, lo + i] * pn
                t = s[i] + x
                bp = t - s[i]
                c[i] += (s[i] - (t - bp)) + (x - bp)
                s[i] = t
        for i in range(hi - lo):
            out[lo + i] = s[i] + c[i]
    return out


@numba.njit(parallel=True, cache=True, nogil=True)
def _matmat(A, B):
    rows, inner = A.shape
    cols = B.shape[1]
    out = np.empty((rows, cols))
    for m in numba.prange(rows):
        s = np.zeros(cols)
        c = np.zeros(cols)
        for j in range(inner):
            a = A[m, j]
            if a == 0.0:
                continue
            for n in range(cols):
                x = a * B[j, n]
                t = s[n] + x
                bp = t - s[n]
                c[n] += (s[n] - (t - bp)) + (x - bp)
                s[n] = t
        for n in range(cols):
            out[m, n] = s[n] + c[n]
    return out


def compensated_matvec(K: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``K @ p`` summed in ascending column order with compensation."""
    return _matvec_t(np.ascontiguousarray(np.asarray(K, dtype=np.float64).T),
                     np.ascontiguousarray(p, dtype=np.float64))


def apply_kernel(K: TransitionKernel, p: PhotonNumberDistribution) -> PhotonNumberDistribution:
    """One chain step: ``out = K @ p`` with deficit bookkeeping."""
    if K.dim_in != p.dim:
        raise ValueError(f"kernel expects dim {K.dim_in}, distribution has {p.dim}")
    out = _matvec_t(K.transposed, p.probs)
    leaked = math.fsum(K.column_deficits * p.probs)
    return PhotonNumberDistribution(out, p.deficit + leaked)


def compose(outer: TransitionKernel, inner: TransitionKernel) -> TransitionKernel:
    """Kernel of ``inner`` followed by ``outer``."""
    if outer.dim_in != inner.dim_out:
        raise ValueError("kernel dimensions do not chain")
    entries = _matmat(outer.entries, inner.entries)
    deficits = inner.column_deficits + _matvec_t(inner.entries, outer.column_deficits)
    return TransitionKernel(entries, deficits)
