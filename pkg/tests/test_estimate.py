import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptctl.estimate import (
    GradientEstimatorState,
    HighOrderTunerState,
    ObserverState,
    RlsEstimatorState,
    SaEstimatorState,
    gradient_rhs,
    hot_rhs,
    observer_rhs,
    perceptron_step,
    perceptron_train,
    rls_step,
    sa_step,
    tuner_filter,
)
from adaptctl.model import Polynomial

vecs = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(np.array)


def test_gradient_examples():
    assert gradient_rhs(GradientEstimatorState([0.0]), [1.0], 2.0)[0] == pytest.approx(2.0)
    np.testing.assert_allclose(gradient_rhs(GradientEstimatorState([2.0, 1.0]), [1.0, 3.0], 5.0), 0.0)
    with pytest.raises(ValueError):
        gradient_rhs(GradientEstimatorState([0.0], gamma=-1.0), [1.0], 2.0)


def test_sa_first_step():
    s = sa_step(SaEstimatorState([0.0], r=1.0), [1.0], 2.0, phi_next=[1.0])
    assert s.theta[0] == pytest.approx(2.0)
    assert s.r == pytest.approx(2.0)


def test_sa_cumulative_needs_next_regressor():
    with pytest.raises(ValueError):
        sa_step(SaEstimatorState([0.0]), [1.0], 2.0)


@settings(max_examples=50, deadline=None)
@given(vecs, vecs, st.sampled_from(["cumulative", "projection", "robbins_monro"]))
def test_sa_fixed_point(theta, phi, mode):
    s = sa_step(SaEstimatorState(theta, mode=mode), phi, float(theta @ phi), phi_next=phi)
    np.testing.assert_allclose(s.theta, theta)


@settings(max_examples=50, deadline=None)
@given(vecs, vecs, vecs, st.floats(0.1, 1.9))
def test_sa_projection_error_nonincreasing(theta, theta_star, phi, gamma):
    s = SaEstimatorState(theta, gamma=gamma, mode="projection")
    new = sa_step(s, phi, float(theta_star @ phi))
    assert np.linalg.norm(new.theta - theta_star) <= np.linalg.norm(theta - theta_star) + 1e-12


def test_rls_first_step():
    s = rls_step(RlsEstimatorState([0.0], [[1.0]]), [1.0], 2.0)
    assert s.theta[0] == pytest.approx(1.0)
    assert s.Gamma[0, 0] == pytest.approx(0.5)


def test_rls_rejects_indefinite_gain():
    with pytest.raises(ValueError):
        RlsEstimatorState([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])


@settings(max_examples=50, deadline=None)
@given(vecs, vecs)
def test_rls_gain_shrinks_and_fixed_point(theta, phi):
    s = RlsEstimatorState(theta, np.eye(3))
    new = rls_step(s, phi, float(theta @ phi))
    np.testing.assert_allclose(new.theta, theta)
    assert np.linalg.eigvalsh(new.Gamma).max() <= 1.0 + 1e-12
    np.testing.assert_allclose(new.Gamma, new.Gamma.T)


def test_rls_converges_with_rich_regressors(rng):
    theta_star = np.array([1.0, -2.0, 0.5])
    s = RlsEstimatorState(np.zeros(3), 1e10 * np.eye(3))
    for _ in range(30):
        phi = rng.normal(size=3)
        s = rls_step(s, phi, float(theta_star @ phi))
    assert np.linalg.norm(s.theta - theta_star) < 1e-8


def _observer(theta):
    return ObserverState(omega_hat=[0.3, -0.2], theta_hat=theta, Gamma=np.eye(2), Lambda=[[-2.0]], ell=[1.0])


def test_observer_exact_model_is_stationary():
    st0 = _observer([1.0, 1.0])
    y = float(st0.theta_hat @ st0.omega_hat)
    _, dtheta, y_hat = observer_rhs(st0, 0.7, y)
    assert y_hat == pytest.approx(y)
    np.testing.assert_allclose(dtheta, 0.0)


def test_observer_rejects_bad_gain():
    with pytest.raises(ValueError):
        ObserverState([0.0, 0.0], [0.0, 0.0], [[1.0]], [[-2.0]], [1.0])
    with pytest.raises(ValueError):
        ObserverState([0.0, 0.0, 0.0, 0.0], [0.0] * 4, [[1.0, 1.0], [0.0, 1.0]], [[0, 1], [-1, -2]], [0.0, 1.0])


def test_tuner_filter_dc_gain_and_structure():
    alpha = Polynomial([2.0, 3.0, 1.0])
    A, b, c = tuner_filter(alpha)
    assert float(c @ np.linalg.solve(-A, b)) == pytest.approx(1.0)
    assert float(c @ b) == 0.0


def test_hot_zero_error_holds_k_prime():
    st0 = HighOrderTunerState([1.5, -2.0], np.zeros(2), mu=1.0, alpha_poly=Polynomial([1.0, 1.0]))
    dkp, _, _ = hot_rhs(st0, 0.0, [0.4, 0.1])
    np.testing.assert_allclose(dkp, 0.0)


def test_hot_mu_zero_is_linear_filter():
    alpha = Polynomial([1.0, 1.0])
    st0 = HighOrderTunerState([2.0], [[0.5]], mu=3.0, alpha_poly=alpha)
    _, dx, k_jet = hot_rhs(st0, 0.0, [0.7], mu=0.0)
    A, b, c = tuner_filter(alpha)
    np.testing.assert_allclose(dx[0], A @ st0.x[0] + b * 2.0)
    assert k_jet[0][0] == pytest.approx(float(c @ st0.x[0]))


def test_hot_settles_at_k_prime():
    alpha = Polynomial([1.0, 1.0])
    x = np.zeros((1, 1))
    for _ in range(2000):
        st0 = HighOrderTunerState([2.0], x, mu=1.0, alpha_poly=alpha)
        _, dx, k_jet = hot_rhs(st0, 0.0, [0.0])
        x = x + 0.01 * dx
    assert k_jet[0][0] == pytest.approx(2.0, abs=1e-6)


def test_perceptron_examples():
    theta, theta0 = perceptron_step([0.0, 0.0], 0.0, ([1.0, 0.0], 1))
    np.testing.assert_allclose(theta, [-1.0, 0.0])
    assert theta0 == -1.0
    theta, theta0 = perceptron_step([1.0, 0.0], 0.0, ([1.0, 0.0], 1))
    np.testing.assert_allclose(theta, [1.0, 0.0])
    with pytest.raises(ValueError):
        perceptron_step([0.0], 0.0, ([1.0], 0))


def test_perceptron_separates_toy_set():
    samples = [([2.0, 1.0], 1), ([1.0, 2.0], 1), ([-1.0, -2.0], -1), ([-2.0, -0.5], -1)]
    theta, theta0, sweeps = perceptron_train(samples)
    assert sweeps < 100
    for phi, y in samples:
        assert y * (float(theta @ np.array(phi)) + theta0) > 0
