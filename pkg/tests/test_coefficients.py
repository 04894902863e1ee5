import numpy as np
import pytest
from scipy import integrate

from tclprep.bath import Bath, CorrelationFunction, OhmicSpectralDensity
from tclprep.coefficients import (
    DiamondCoefficient, ExponentialSwitch, default_step, diamond_asymptotic, diamond_finite,
    diamond_prepared, diamond_switched,
)
from tclprep.operators import (
    SIGMA_X, SIGMA_Z, DomainError, HamiltonianSchedule, conjugate_propagate, propagator,
)
from tclprep.scenarios import EXCITED, prepare_by_freezing, tls_hamiltonian

LAM = 100.0
ETA = 0.05
H0 = tls_hamiltonian(1.0)


@pytest.fixture(scope="module")
def corr():
    return CorrelationFunction(Bath(OhmicSpectralDensity(LAM, ETA)))


def test_finite_vanishes_at_zero(corr):
    assert np.all(diamond_finite(SIGMA_X, H0, corr, np.array([0.0])) == 0)


def test_finite_zero_hamiltonian_closed_antiderivative(corr):
    t = np.geomspace(1e-4, 5, 30)
    A = diamond_finite(SIGMA_X, np.zeros((2, 2)), corr, t)
    scalar = ETA * LAM**2 * t / (1 + 1j * LAM * t)
    assert np.allclose(A, scalar[:, None, None] * SIGMA_X, rtol=1e-10, atol=0)
    # the antiderivative itself, checked by adaptive quadrature
    for ti in (0.003, 0.2):
        re = integrate.quad(lambda s: corr(s).real, 0, ti, epsabs=0, epsrel=1e-12, limit=200)[0]
        im = integrate.quad(lambda s: corr(s).imag, 0, ti, epsabs=0, epsrel=1e-12, limit=200)[0]
        ref = ETA * LAM**2 * ti / (1 + 1j * LAM * ti)
        assert abs(re + 1j * im - ref) < 1e-9 * abs(ref)


def test_finite_derivative_is_integrand(corr):
    t = 0.3 / LAM
    h = default_step(LAM, [H0]) / 10
    A = diamond_finite(SIGMA_X, H0, corr, t + h * np.array([-2, -1, 1, 2.0]))
    deriv = (A[0] - 8 * A[1] + 8 * A[2] - A[3]) / (12 * h)
    exact = corr(t) * conjugate_propagate(H0, t, SIGMA_X)
    assert np.max(np.abs(deriv - exact)) <= 1e-5 * np.max(np.abs(exact))


def test_step_halving_estimate_is_small(corr):
    coef = DiamondCoefficient("finite", SIGMA_X, HamiltonianSchedule.constant(H0), corr)
    assert np.max(coef.relative_error(np.linspace(0, 2, 50))) < 1e-8


def test_switched_limits(corr):
    t = np.linspace(0, 1, 21)
    fast = diamond_switched(SIGMA_X, H0, corr, ExponentialSwitch(1e-7), t[1:], step=1e-4)
    plain = diamond_finite(SIGMA_X, H0, corr, t[1:])
    assert np.max(np.abs(fast - plain)) < 1e-4 * np.max(np.abs(plain))
    assert np.all(diamond_switched(SIGMA_X, H0, corr, ExponentialSwitch(0.1), [0.0]) == 0)


def test_switched_fast_path_matches_generic_quadrature(corr):
    tau = 4 / LAM
    sw = ExponentialSwitch(tau)
    sched = HamiltonianSchedule.constant(H0)
    fast = DiamondCoefficient("switched", SIGMA_X, sched, corr, switch=sw)
    generic = DiamondCoefficient("switched", SIGMA_X, sched, corr,
                                 switch=lambda s: 1 - np.exp(-np.asarray(s) / tau))
    t = np.linspace(0, 0.3, 13)
    assert np.allclose(fast(t), generic(t), rtol=0, atol=1e-10 * np.max(np.abs(fast(t))))


def test_asymptotic_commuting_case(corr):
    A = diamond_asymptotic(SIGMA_Z, np.zeros((2, 2)), corr)
    assert np.allclose(A, corr.half_transform(0.0) * SIGMA_Z, rtol=1e-13)


def test_asymptotic_tls_entries_and_long_time_limit(corr):
    A = diamond_asymptotic(SIGMA_X, H0, corr)
    prop = propagator(H0)
    Ae = prop.to_eigenbasis(A)
    Le = prop.to_eigenbasis(SIGMA_X)
    # ground index 0, excited index 1, omega_ab = E_a - E_b
    assert np.isclose(Ae[0, 1], Le[0, 1] * corr.half_transform(-1.0), rtol=1e-13)
    assert np.isclose(Ae[1, 0], Le[1, 0] * corr.half_transform(1.0), rtol=1e-13)
    long = diamond_finite(SIGMA_X, H0, corr, np.array([200.0]))[0]
    assert np.max(np.abs(long - A)) < 1e-6 * np.max(np.abs(A))


def test_asymptotic_conjugation_structure(corr):
    rng = np.random.default_rng(4)
    X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    L = X + X.conj().T
    H = np.diag([0.0, 1.0, 2.5])
    A = diamond_asymptotic(L, H, corr)
    bohr = H.diagonal()[:, None] - H.diagonal()[None, :]
    hat = corr.half_transform(bohr.ravel()).reshape(3, 3)
    # (A^dag)_ab = conj(A_ba) = L_ab conj(hat(omega_ba)) for Hermitian L
    assert np.allclose(A.conj().T, L * np.conj(hat.T), rtol=1e-13)


def test_prepared_trivial_and_initial(corr):
    sched = HamiltonianSchedule.constant(H0)
    asym = diamond_asymptotic(SIGMA_X, H0, corr)
    t = np.linspace(0, 5, 100)
    A = diamond_prepared(SIGMA_X, sched, corr, t)
    assert np.max(np.abs(A - asym)) <= 1e-7 * np.max(np.abs(asym))
    other = HamiltonianSchedule.constant(H0, past=-SIGMA_Z)
    A0 = diamond_prepared(SIGMA_X, other, corr, np.array([0.0]))[0]
    assert np.allclose(A0, diamond_asymptotic(SIGMA_X, -SIGMA_Z, corr), rtol=1e-14, atol=0)


def test_prepared_early_time_cancellation(corr):
    bath = corr.bath
    scen = prepare_by_freezing(np.outer(EXCITED, EXCITED.conj()), bath, SIGMA_X, H0)
    coef = scen.coefficient()
    t = np.linspace(0, 5 / LAM, 101)
    past_asym = coef.asymptote()
    prepared_swing = np.max(np.abs(coef(t) - past_asym)) / np.max(np.abs(past_asym))
    assert prepared_swing <= 0.05
    future_asym = scen.asymptotic_coefficient()
    unprepared = diamond_finite(SIGMA_X, H0, corr, t)
    assert np.max(np.abs(unprepared - future_asym)) / np.max(np.abs(future_asym)) > 0.5


def test_domain_errors(corr):
    coef = DiamondCoefficient("finite", SIGMA_X, HamiltonianSchedule.constant(H0), corr)
    with pytest.raises(DomainError):
        coef(-1.0)
    bounded = HamiltonianSchedule(H0, ((0.0, 1.0, H0),))
    with pytest.raises(DomainError):
        DiamondCoefficient("finite", SIGMA_X, bounded, corr)(2.0)
    with pytest.raises(ValueError):
        DiamondCoefficient("bogus", SIGMA_X, bounded, corr)
    with pytest.raises(ValueError):
        DiamondCoefficient("switched", SIGMA_X, bounded, corr)
