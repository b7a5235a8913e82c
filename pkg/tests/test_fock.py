import math

import mpmath as mp
import numba
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nolmregen.fock import (
    DomainError,
    PhotonNumberDistribution,
    TransitionKernel,
    apply_kernel,
    binomial_log_pmf,
    coherent_number_distribution,
    compensated_matvec,
    compose,
    poisson_kernel,
    poisson_log_pmf,
    thinning_kernel,
)

mp.mp.dps = 50


def mp_poisson(m, mu):
    return mp.exp(m * mp.log(mu) - mu - mp.loggamma(m + 1))


# -- poisson_log_pmf

def test_log_pmf_examples():
    assert poisson_log_pmf(0, 0) == 0.0
    assert poisson_log_pmf(0, 400) == -400.0
    assert poisson_log_pmf(2, 1) == pytest.approx(-1 - math.log(2), abs=1e-15)
    assert poisson_log_pmf(3, 0) == -np.inf


def test_log_pmf_domain():
    with pytest.raises(DomainError):
        poisson_log_pmf(1, -0.1)
    with pytest.raises(DomainError):
        poisson_log_pmf(-1, 2.0)


@pytest.mark.parametrize("mu", [1e-3, 0.7, 4.0, 15.5, 99.0, 400.0, 777.7, 1000.0])
def test_log_pmf_matches_ratio_recurrence(mu):
    m = np.arange(2001, dtype=float)
    logp = poisson_log_pmf(m, mu)
    ratio = np.exp(np.diff(logp))
    want = mu / m[1:]
    # only where P(m+1) is a representable double
    ok = logp[1:] > -700
    assert np.max(np.abs(ratio[ok] / want[ok] - 1)) <= 1e-12


@pytest.mark.parametrize("mu,m", [(0.3, 1), (4, 2), (4, 15), (4, 16), (100, 80), (400, 400),
                                  (400, 640), (1000, 1000), (1000, 1900)])
def test_log_pmf_against_mpmath(mu, m):
    want = mp.mpf(m) * mp.log(mu) - mu - mp.loggamma(m + 1)
    assert poisson_log_pmf(m, mu) == pytest.approx(float(want), abs=1e-12 * max(1.0, abs(float(want))))


# -- coherent_number_distribution

def test_coherent_vacuum():
    p = coherent_number_distribution(0.0, 5)
    assert p.probs.tolist() == [1, 0, 0, 0, 0]
    assert p.deficit == 0.0


def test_coherent_mean_one():
    p = coherent_number_distribution(1.0, 32)
    assert p[1] == pytest.approx(math.exp(-1), rel=1e-15)
    assert p.total == pytest.approx(1.0, abs=1e-15)


def test_coherent_tail_deficit_vs_brute_force():
    p = coherent_number_distribution(400.0, 640)
    brute_tail = mp.nsum(lambda k: mp_poisson(k, 400), [640, mp.inf])
    assert p.deficit <= 1e-12
    assert p.deficit == pytest.approx(float(brute_tail), rel=1e-8)


# -- thinning_kernel

def test_thinning_identity_and_total_loss():
    assert np.array_equal(thinning_kernel(1.0, 7).entries, np.eye(7))
    k0 = thinning_kernel(0.0, 7).entries
    assert np.array_equal(k0[0], np.ones(7))
    assert np.all(k0[1:] == 0)


def test_thinning_half_column_two():
    col = thinning_kernel(0.5, 5).entries[:, 2]
    assert np.allclose(col[:3], [0.25, 0.5, 0.25], atol=1e-16, rtol=0)
    assert np.all(col[3:] == 0)


def test_thinning_domain():
    with pytest.raises(DomainError):
        thinning_kernel(1.2, 4)
    with pytest.raises(DomainError):
        thinning_kernel(-0.1, 4)


@pytest.mark.parametrize("n,eta", [(1, 0.3), (17, 0.5), (60, 0.9), (400, 0.2), (1204, 0.5)])
def test_binomial_against_exact_comb(n, eta):
    e = mp.mpf(eta)
    for m in sorted({0, 1, n // 3, n // 2, n - 1, n}):
        want = mp.log(mp.binomial(n, m)) + m * mp.log(e) + (n - m) * mp.log(1 - e)
        got = binomial_log_pmf(m, n, eta)
        assert got == pytest.approx(float(want), abs=1e-12 * max(1.0, abs(float(want))))


@pytest.mark.parametrize("eta", [0.0, 0.2, 0.5, 0.93, 1.0])
def test_kernels_column_stochastic(eta):
    assert thinning_kernel(eta, 64).column_mass_error() <= 1e-12
    assert thinning_kernel(eta, 2000, 700).column_mass_error() <= 1e-12


@pytest.mark.parametrize("means", [[0, 1, 4, 30], np.linspace(0, 800, 50)])
def test_poisson_kernel_column_stochastic(means):
    assert poisson_kernel(means, 1000).column_mass_error() <= 1e-12
    # heavy truncation must land in the deficit, not vanish
    assert poisson_kernel(means, 20).column_mass_error() <= 1e-12


@settings(deadline=None, max_examples=30)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_thinning_semigroup(e1, e2):
    k12 = compose(thinning_kernel(e1, 64), thinning_kernel(e2, 64))
    assert np.max(np.abs(k12.entries - thinning_kernel(e1 * e2, 64).entries)) <= 1e-12


# -- apply_kernel

def test_identity_kernel_bit_for_bit():
    p = coherent_number_distribution(3.3, 40)
    out = apply_kernel(TransitionKernel.identity(40), p)
    assert np.array_equal(out.probs, p.probs)
    assert out.deficit == p.deficit


@pytest.mark.parametrize("nu,eta", [(0.5, 0.3), (4.0, 0.7), (37.0, 0.3), (100.0, 0.7)])
def test_thinning_of_poisson_by_brute_convolution(nu, eta):
    dim = 220
    got = apply_kernel(thinning_kernel(eta, dim), coherent_number_distribution(nu, dim)).probs
    e = mp.mpf(eta)
    for m in range(0, 60, 3):
        conv = mp.nsum(lambda n: mp.binomial(n, m) * e ** m * (1 - e) ** (n - m) * mp_poisson(n, nu), [m, mp.inf])
        assert abs(got[m] - float(conv)) <= 1e-12


def test_deficit_bookkeeping():
    K = TransitionKernel(np.diag([0.9, 0.8, 1.0]), np.array([0.1, 0.2, 0.0]))
    p = PhotonNumberDistribution([0.5, 0.25, 0.25])
    out = apply_kernel(K, p)
    assert out.deficit == pytest.approx(0.1 * 0.5 + 0.2 * 0.25, abs=1e-17)
    assert out.total == pytest.approx(1.0, abs=1e-15)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_kernel(thinning_kernel(0.5, 4), coherent_number_distribution(1.0, 5))


@settings(deadline=None, max_examples=40)
@given(st.floats(0, 60), st.floats(0.0, 1.0), st.integers(8, 120))
def test_mass_conservation(nu, eta, dim):
    p = coherent_number_distribution(nu, dim)
    K = compose(thinning_kernel(eta, dim), poisson_kernel(np.linspace(0, 50, dim), dim))
    out = apply_kernel(K, p)
    assert abs(out.total - p.total) <= 1e-14
    assert out.deficit >= p.deficit


def test_compensated_sum_beats_naive():
    # 1 + many tiny terms: plain left-to-right summation loses them all
    row = np.concatenate([[1.0], np.full(10_000, 1e-17)])
    got = compensated_matvec(row[None, :], np.ones_like(row))[0]
    assert got == 1.0 + 1e-13


def test_thread_count_does_not_change_bits():
    K = compose(thinning_kernel(0.4, 300), poisson_kernel(np.linspace(0, 200, 300), 300))
    p = coherent_number_distribution(150.0, 300)
    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        one = apply_kernel(K, p).probs.copy()
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
        many = apply_kernel(K, p).probs
    finally:
        numba.set_num_threads(before)
    assert np.array_equal(one, many)


def test_values_are_immutable():
    p = coherent_number_distribution(2.0, 10)
    with pytest.raises(ValueError):
        p.probs[0] = 0.5
