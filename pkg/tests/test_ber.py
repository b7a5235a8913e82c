import math

import numpy as np
import pytest

from nolmregen.ber import (
    BerSeries,
    ber_curve,
    component_phase_variance,
    dephasing_stats,
    fit_coefficient_law,
    fit_linear_regime,
    flatness,
)
from nolmregen.fock import DomainError
from nolmregen.regen import ComponentMixture, chain_output_components


def synthetic(ber, start=1):
    ber = np.asarray(ber, dtype=float)
    n = np.arange(start, start + ber.size)
    return BerSeries(20.0, n, ber, np.zeros_like(ber), 700)


@pytest.fixture(scope="module")
def curve20():
    return ber_curve(20.0, 200)


def test_linear_fit_exact_synthetic():
    s = synthetic(3e-15 * np.arange(1, 201))
    fit = fit_linear_regime(s, (50, 200))
    assert fit.coefficient == pytest.approx(3e-15, rel=1e-15)
    assert fit.max_relative_residual <= 1e-15


def test_linear_fit_single_point_window():
    s = synthetic(np.linspace(1e-14, 5e-13, 120))
    fit = fit_linear_regime(s, (77, 77))
    assert fit.coefficient == pytest.approx(s.at(77) / 77, rel=1e-15)


def test_linear_fit_relative_least_squares_optimum():
    # brute-force scan of the relative objective around the closed-form optimum
    s = synthetic(1e-15 * np.arange(1, 101) * (1 + 0.03 * np.sin(np.arange(1, 101))))
    s = synthetic(np.maximum.accumulate(s.ber))
    fit = fit_linear_regime(s, (10, 100))
    b, n = s.ber[9:], s.n[9:]

    def obj(c):
        return np.sum((b - c * n) ** 2 / (c * n) ** 2)

    for c in fit.coefficient * np.linspace(0.98, 1.02, 41):
        assert obj(fit.coefficient) <= obj(c) + 1e-15


def test_linear_fit_errors():
    with pytest.raises(ValueError):
        fit_linear_regime(synthetic([1e-15, 2e-15, 1.5e-15, 3e-15]), (1, 4))
    with pytest.raises(ValueError):
        fit_linear_regime(synthetic([0, 0, 1e-15, 2e-15]), (1, 4))
    with pytest.raises(ValueError):
        fit_linear_regime(synthetic([1e-15, 2e-15]), (1, 5))


def test_coefficient_law_round_trip():
    x = np.array([17, 18, 19, 20, 21, 22], dtype=float) ** 2
    law = fit_coefficient_law(zip(x, 10 ** (-0.44 - 0.0356 * x)))
    assert law.intercept == pytest.approx(-0.44, abs=1e-12)
    assert law.slope == pytest.approx(-0.0356, abs=1e-12)
    assert np.max(np.abs(law.residuals)) <= 1e-12


def test_coefficient_law_needs_four_points():
    with pytest.raises(ValueError):
        fit_coefficient_law([(1, 1e-3), (4, 1e-4), (9, 1e-5)])
    with pytest.raises(ValueError):
        fit_coefficient_law([(1, 1e-3), (1, 1e-4), (4, 1e-5), (9, 1e-6)])


def test_dephasing_stats_examples():
    st = dephasing_stats(20, 400)
    assert st.delta_sq == pytest.approx(math.pi ** 2 / 1600, rel=1e-15)
    assert st.delta_sq == pytest.approx(6.1685e-3, abs=1e-7)
    assert st.predicted_mean_photons == pytest.approx(397.54, abs=5e-3)
    assert st.predicted_phase_variance == pytest.approx(8.6685e-3, abs=1e-7)
    assert st.predicted_mean_photons <= 400
    with pytest.raises(DomainError):
        dephasing_stats(0, 400)


def test_phase_variance_definition():
    one = ComponentMixture(np.array([1.0]), np.array([3 + 4j]))
    assert component_phase_variance(one) == 0.0
    th = 0.01
    two = ComponentMixture(np.array([0.5, 0.5]), 5 * np.exp(1j * np.array([th, -th])))
    assert component_phase_variance(two) == pytest.approx(th ** 2, abs=1e-8)
    # wrap-around at +-pi must not blow the spread up
    wrap = ComponentMixture(np.array([0.5, 0.5]), np.exp(1j * np.array([math.pi - th, -math.pi + th])))
    assert component_phase_variance(wrap) == pytest.approx(th ** 2, abs=1e-8)
    with pytest.raises(ValueError):
        component_phase_variance(ComponentMixture(np.array([1.0]), np.array([0j])))


def test_phase_variance_one_step_beta20():
    var = component_phase_variance(chain_output_components(20.0, 1))
    assert abs(var / (math.pi ** 2 / 1600) - 1) <= 0.10


def test_ber_curve_spot_value(curve20):
    assert abs(math.log10(curve20.at(100)) - math.log10(2e-13)) <= 0.2
    assert not curve20.truncation_flag


def test_ber_curve_rejects_empty():
    with pytest.raises(DomainError):
        ber_curve(20.0, 0)


def test_ber_decreases_with_beta():
    b = [ber_curve(x, 100).at(100) for x in range(17, 23)]
    assert all(x > y for x, y in zip(b, b[1:]))


def test_fast_rise_then_linear(curve20):
    # the first steps climb by dozens of decades, the tail grows linearly
    assert curve20.at(20) / curve20.at(1) > 1e30
    assert curve20.at(200) / curve20.at(100) == pytest.approx(2.0, rel=0.1)


def test_linear_fit_against_published_law(curve20):
    fit = fit_linear_regime(curve20, (50, 200))
    assert abs(math.log10(fit.coefficient) - (-0.44 - 0.0356 * 400)) <= 0.15


def test_flatness_and_bounds(curve20):
    fit = fit_linear_regime(curve20, (100, 200))
    assert flatness(curve20, fit.coefficient, (100, 200)) <= 0.05
    assert np.all(np.diff(curve20.ber) >= 0)
    assert curve20.at(1) >= math.exp(-400)
    assert np.all(curve20.deficit <= 1e-2 * curve20.ber)
