import math

import numpy as np
import pytest

from vibracav.errors import AccuracyError, DomainError, RegimeError, UnphysicalStateError
from vibracav.observables import QuadratureStats
from vibracav.photonstats import (GaussianModeState, PhotonDistribution, _finalize, asymptotic_regimes,
                                  generating_function_eval, generating_series, moments_and_q,
                                  pdf_asymptotic, pdf_gaussian, pdf_legendre, pdf_vacuum_seeded)


@pytest.fixture
def squeezed_state():
    return GaussianModeState(mean_q=0.0, mean_p=0.0, U=0.3, V=2.0, Y=0.4)


@pytest.fixture
def displaced_state():
    return GaussianModeState(mean_q=0.7, mean_p=-0.4, U=0.3, V=2.0, Y=0.4)


def test_vacuum_distribution():
    dist = pdf_vacuum_seeded(0.5, 0.5, 10)
    np.testing.assert_allclose(dist.f, [1.0] + [0.0] * 10, atol=1e-15)
    assert dist.n_bar == 0.0
    assert dist.Q == 1.0


@pytest.mark.parametrize("v", [0.75, 3.0, 40.0])
def test_equal_variances_give_planck(v):
    dist = pdf_vacuum_seeded(v, v, 60)
    planck = PhotonDistribution.planck(v - 0.5, 60)
    np.testing.assert_allclose(dist.f, planck.f, rtol=0, atol=1e-12)
    assert dist.Q == pytest.approx(v - 0.5)


def test_pure_squeezed_vacuum_has_no_odd_photons():
    v = 2.5
    dist = pdf_vacuum_seeded(1.0 / (4.0 * v), v, 30)
    np.testing.assert_allclose(dist.f[1::2], 0.0, atol=1e-15)
    assert dist.f[0] == pytest.approx(1.0 / math.sqrt(0.5 * (1.0 + v + 1.0 / (4.0 * v))))


def test_routes_agree_for_zero_mean(squeezed_state):
    u, v = squeezed_state.invariants
    seeded = pdf_vacuum_seeded(u, v, 40).f
    np.testing.assert_allclose(pdf_legendre(u, v, 40).f, seeded, rtol=0, atol=1e-10)
    np.testing.assert_allclose(generating_series(squeezed_state, 40).f, seeded, rtol=0, atol=1e-10)
    np.testing.assert_allclose(pdf_gaussian(squeezed_state, 40).f, seeded, rtol=0, atol=1e-10)


def test_legendre_route_below_vacuum_variance():
    # 2u < 1 puts the Legendre argument on the imaginary axis
    u, v = 0.2, 3.0
    np.testing.assert_allclose(pdf_legendre(u, v, 50).f, pdf_vacuum_seeded(u, v, 50).f,
                               rtol=0, atol=1e-10)


def test_displaced_routes_agree(displaced_state):
    series = generating_series(displaced_state, 40)
    hermite = pdf_gaussian(displaced_state, 40)
    assert hermite.method == "hermite"
    np.testing.assert_allclose(hermite.f, series.f, rtol=0, atol=1e-10)


def test_coherent_state_is_poisson():
    state = GaussianModeState(mean_q=math.sqrt(2.0), mean_p=0.0, U=0.5, V=0.5, Y=0.0)
    poisson = [math.exp(-1.0) / math.factorial(n) for n in range(21)]
    np.testing.assert_allclose(generating_series(state, 20).f, poisson, rtol=1e-12, atol=1e-15)
    dist = pdf_gaussian(state, 20)
    np.testing.assert_allclose(dist.f, poisson, rtol=1e-12, atol=1e-15)
    assert dist.Q == pytest.approx(0.0, abs=1e-12)


def test_moments_match_distribution(displaced_state):
    dist = pdf_gaussian(displaced_state)
    n_bar, sigma_n = displaced_state.moments()
    mean, variance = dist.moments_from_f()
    assert dist.mass == pytest.approx(1.0, abs=1e-10)
    assert mean == pytest.approx(n_bar, abs=1e-8)
    assert variance == pytest.approx(sigma_n, abs=1e-8)


def test_zero_mean_moments_match_summary():
    u, v = 0.2, 3.0
    dist = pdf_vacuum_seeded(u, v)
    summary = moments_and_q(u, v)
    mean, variance = dist.moments_from_f()
    assert mean == pytest.approx(summary.n_bar, abs=1e-8)
    assert variance == pytest.approx(summary.sigma_n, abs=1e-8)
    assert variance / mean - 1.0 == pytest.approx(summary.Q, abs=1e-7)


def test_generating_function_normalization(displaced_state):
    assert generating_function_eval(displaced_state, 1.0) == pytest.approx(1.0, abs=1e-13)


def test_generating_function_matches_taylor_coefficients(displaced_state):
    dist = pdf_gaussian(displaced_state, 80)
    assert generating_function_eval(displaced_state, 0.0) == pytest.approx(dist.f[0], rel=1e-12)
    z = 0.5
    series = math.fsum(f * z ** n for n, f in enumerate(dist.f))
    assert generating_function_eval(displaced_state, z) == pytest.approx(series, rel=1e-10)
    with pytest.raises(DomainError):
        generating_function_eval(displaced_state, 1.5)


def test_state_from_quadrature_stats():
    stats = QuadratureStats(mode=1, U=0.3, V=2.0, Y=0.4)
    state = GaussianModeState.from_stats(stats)
    assert state.invariants == pytest.approx((stats.u, stats.v))
    assert not state.has_means


def test_unphysical_states_are_rejected():
    with pytest.raises(UnphysicalStateError):
        GaussianModeState(mean_q=0.0, mean_p=0.0, U=0.2, V=0.2, Y=0.0)
    with pytest.raises(UnphysicalStateError):
        pdf_vacuum_seeded(0.2, 0.2)
    with pytest.raises(DomainError):
        pdf_vacuum_seeded(0.6, 0.5)


def test_planck_distribution():
    planck = PhotonDistribution.planck(2.0, 200)
    assert planck.mass == pytest.approx(1.0, abs=1e-12)
    assert planck.moments_from_f()[0] == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(DomainError):
        PhotonDistribution.planck(-1.0, 10)


def test_negative_probabilities_are_reported():
    with pytest.raises(AccuracyError) as excinfo:
        _finalize(np.array([0.5, -1e-6]), "legendre", 0.5, 0.5, 0.0)
    assert excinfo.value.diagnostics["index"] == 1
    clipped = _finalize(np.array([1.0, -1e-14]), "legendre", 0.0, 0.0, 0.0)
    assert clipped.f[1] == 0.0


def test_unknown_method():
    with pytest.raises(DomainError):
        PhotonDistribution(f=[1.0], n_bar=0.0, sigma_n=0.0, Q=0.0, method="guess")


def test_laplace_heine_estimate():
    u, v, n = 0.21, 40.0, 30
    exact = pdf_vacuum_seeded(u, v, n).f[n]
    estimate, regime = pdf_asymptotic(u, v, n, regime="laplace_heine")
    assert regime == "laplace_heine"
    assert estimate == pytest.approx(exact, rel=0.1)


def test_large_v_estimate():
    u, v, n = 0.25, 200.0, 10
    exact = pdf_vacuum_seeded(u, v, n).f[n]
    estimate, regime = pdf_asymptotic(u, v, n, regime="large_v")
    assert regime == "large_v"
    assert estimate == pytest.approx(exact, rel=0.1)


def test_asymptotic_regime_selection():
    assert asymptotic_regimes(0.21, 40.0, 30) == ["laplace_heine", "large_v"]
    assert pdf_asymptotic(0.21, 40.0, 30)[1] == "laplace_heine"
    with pytest.raises(RegimeError):
        pdf_asymptotic(1.0, 1.2, 3)
    with pytest.raises(RegimeError):
        pdf_asymptotic(0.5, 5.0, 20, regime="large_v")
    with pytest.raises(DomainError):
        pdf_asymptotic(0.21, 40.0, 30, regime="saddle")
