import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptctl.adapt_ct import (
    MinMaxControllerState,
    MracState,
    SaturationLimits,
    SpeedGradientLaw,
    augmented_error_rhs,
    binomial_control,
    check_convexity,
    e_eps,
    minmax_nlp_control,
    minmax_oracle,
    minmax_solve,
    mit_rule_rhs,
    mrac_output_spr_rhs,
    mrac_state_rhs,
    passification_controller_rhs,
    project_ball,
    rbf_features,
    require_spr,
    robust_mod,
    s_func,
    saturate,
    saturated_input_rhs,
    speed_gradient_rhs,
)
from adaptctl.model import NonlinearPlant, TransferFunction
from adaptctl.sim import rk4_step


def test_mit_rule():
    assert mit_rule_rhs(0.0, 0.0, 2.0, 1.0) == 0.0
    assert mit_rule_rhs(0.0, 1.0, 2.0, 1.0) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        mit_rule_rhs(0.0, 1.0, 2.0, -1.0)


def _mrac(theta=0.0, k=0.0):
    return MracState([theta], k, 1.0, 1.0, 1, [[1.0]])


def test_mrac_state_law():
    u, th_dot, k_dot = mrac_state_rhs(_mrac(), [2.0], [1.0], 3.0, [1.0])
    assert th_dot[0] == pytest.approx(-2.0)
    assert k_dot == pytest.approx(-3.0)
    assert u == 0.0


def test_mrac_state_zero_error_freezes():
    u, th_dot, k_dot = mrac_state_rhs(_mrac(0.5, 2.0), [2.0], [2.0], 3.0, [1.0])
    assert u == pytest.approx(0.5 * 2.0 + 2.0 * 3.0)
    assert th_dot[0] == 0.0 and k_dot == 0.0


def test_mrac_state_validation():
    with pytest.raises(ValueError):
        MracState([0.0], 0.0, 1.0, 1.0, 0, [[1.0]])
    with pytest.raises(ValueError):
        mrac_state_rhs(MracState([0.0], 0.0, 1.0, 1.0, 1, None), [1.0], [0.0], 1.0, [1.0])


def test_output_spr_law():
    _, th_dot, k_dot = mrac_output_spr_rhs([0.0, 0.0], 0.0, 2.0, [1.0, -1.0], 0.5, 1)
    np.testing.assert_allclose(th_dot, [-2.0, 2.0])
    assert k_dot == pytest.approx(-1.0)
    _, th_dot, k_dot = mrac_output_spr_rhs([0.3, 0.1], 1.0, 0.0, [1.0, -1.0], 0.5, 1)
    np.testing.assert_allclose(th_dot, 0.0)
    assert k_dot == 0.0


def test_require_spr_rejects_double_pole():
    with pytest.raises(ValueError):
        require_spr(TransferFunction([1.0], [1.0, 2.0, 1.0]))


def test_augmented_error_linear_ramp():
    # Wm = 1/(s+1), omega = 1, theta = t: e2 = 1 - exp(-t) - t exp(-t)
    h = 1e-3

    def rhs(t, z):
        return np.array([-z[0] + 1.0, -z[1] + t])

    z, t = np.zeros(2), 0.0
    for _ in range(2000):
        z = rk4_step(rhs, z, t, h)
        t += h
    _, _, e2 = augmented_error_rhs([t], [1.0], [z[0]], z[1], 0.0)
    assert e2 == pytest.approx(1 - np.exp(-t) - t * np.exp(-t), abs=1e-10)


def test_augmented_error_normalizer():
    eps1, th_dot, e2 = augmented_error_rhs([1.0], [1.0], [2.0], 2.0, 0.5)
    assert e2 == 0.0 and eps1 == 0.5
    assert th_dot[0] == pytest.approx(-0.2 * 0.5 * 2.0)
    with pytest.raises(ValueError):
        augmented_error_rhs([1.0], [1.0], [2.0], 2.0, 0.5, m=0.0)


def test_binomial_control_p0_is_certainty_equivalence():
    assert binomial_control([[1.0, 2.0]], [[3.0, -1.0]], 0.5) == pytest.approx(1.5)


def test_robust_mod_modes():
    np.testing.assert_allclose(robust_mod("deadzone", [1.0], [0.0], [0.05], e0=0.1), 0.0)
    np.testing.assert_allclose(robust_mod("sigma", [0.0], [2.0], sigma=0.1), [-0.2])
    np.testing.assert_allclose(robust_mod("e_mod", [0.0], [2.0], sigma=0.1, ePb=-3.0), [-0.6])
    with pytest.raises(ValueError):
        robust_mod("sigma", [0.0], [2.0], sigma=-1.0)
    with pytest.raises(ValueError):
        robust_mod("bogus", [0.0], [2.0])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.floats(0.5, 4),
)
def test_projection_is_tangent_on_sphere(direction, nominal, radius):
    d = np.array(direction)
    if np.linalg.norm(d) < 1e-3:
        return
    k = radius * d / np.linalg.norm(d)
    out = robust_mod("projection", nominal, k, radius=radius)
    radial = float(out @ k) / np.linalg.norm(k)
    assert radial <= 1e-12 * (1 + np.linalg.norm(nominal))
    if float(np.array(nominal) @ k) > 0:
        assert abs(radial) < 1e-12 * (1 + np.linalg.norm(nominal))


def test_project_ball():
    np.testing.assert_allclose(project_ball([3.0, 4.0], 1.0), [0.6, 0.8])
    np.testing.assert_allclose(project_ball([0.3, 0.4], 1.0), [0.3, 0.4])


def test_saturate_examples():
    np.testing.assert_allclose(saturate(1.0, 2.0), [1.0])
    np.testing.assert_allclose(saturate(3.0, 2.0), [2.0])
    np.testing.assert_allclose(saturate([3.0, 0.0], [2.0, 5.0]), [2.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-100, 100), min_size=2, max_size=2),
    st.lists(st.floats(0.1, 10), min_size=2, max_size=2),
)
def test_saturate_stays_in_box_and_keeps_direction(v, vmax):
    v, vmax = np.array(v), np.array(vmax)
    out = saturate(v, vmax)
    assert np.all(np.abs(out) <= vmax * (1 + 1e-12))
    assert np.linalg.norm(out) <= np.linalg.norm(v) + 1e-12
    assert abs(out[0] * v[1] - out[1] * v[0]) <= 1e-9 * (1 + np.linalg.norm(v) ** 2)


def test_saturated_input():
    lim = SaturationLimits([2.0], [5.0], 0.5)
    up_dot, du_m, du_r = saturated_input_rhs(lim, [3.0], [0.0])
    assert du_m[0] == pytest.approx(-1.0)
    np.testing.assert_allclose(up_dot, [4.0])
    assert du_r[0] == 0.0
    up_dot, du_m, _ = saturated_input_rhs(lim, [1.0], [1.0])
    assert du_m[0] == 0.0 and up_dot[0] == 0.0
    _, _, du_r = saturated_input_rhs(lim, [2.0], [-2.0])
    assert du_r[0] == pytest.approx(5.0 - 8.0)


def test_passification_law():
    u, th = passification_controller_rhs([0.0], [2.0], [1.0], 1.0)
    assert u == 0.0 and th[0] == pytest.approx(-4.0)
    u, th = passification_controller_rhs([1.0], [0.0], [1.0], 1.0)
    assert u == 0.0 and th[0] == 0.0


def _sg_law():
    return SpeedGradientLaw(lambda x, th, t: float((th[0] - 1.0) ** 2 * x[0] ** 2), 1.0,
                            generator=lambda th: 0.5 * float(th @ th))


def test_speed_gradient_example():
    out = speed_gradient_rhs(_sg_law(), [2.0], [0.0], 0.0)
    assert out[0] == pytest.approx(8.0, rel=1e-6)
    assert speed_gradient_rhs(_sg_law(), [2.0], [1.0], 0.0)[0] == pytest.approx(0.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_bregman_quadratic_generator_matches_plain(x, theta):
    law = _sg_law()
    a = speed_gradient_rhs(law, [x], [theta], 0.0)
    b = speed_gradient_rhs(law, [x], [theta], 0.0, bregman=True)
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-6)


def test_convexity_check():
    assert check_convexity(lambda th: float(np.exp(th[0])), [-1.0], [1.0])
    assert not check_convexity(lambda th: float(np.sin(3 * th[0])), [-2.0], [2.0])


def test_s_func():
    assert s_func(2.0) == 1.0 and s_func(-1.5) == -1.0
    assert s_func(0.5, 1) == pytest.approx(0.125)
    assert e_eps(0.05, 0.1) == 0.0
    assert e_eps(0.3, 0.1) == pytest.approx(0.2)


def test_rbf_features():
    np.testing.assert_allclose(rbf_features([0.0], [[1.0]], [1.0]), [0.60653066], rtol=1e-8)
    np.testing.assert_allclose(rbf_features([1.0], [[1.0]], [1.0]), [1.0])
    a, b = rbf_features([0.5], [[0.0], [1.0]], [0.7])
    assert a == pytest.approx(b)


@pytest.mark.parametrize("fname", ["exp", "log"])
@pytest.mark.parametrize("sign", [1.0, -1.0])
@pytest.mark.parametrize("theta_hat", [-0.3, 0.4, 1.2])
def test_minmax_matches_grid_oracle(fname, sign, theta_hat):
    x = 1.7
    lo, hi = -0.5, 1.5
    if fname == "exp":
        f, conv = (lambda th: float(np.exp(th[0] * x))), "convex"
    else:
        f, conv = (lambda th: float(np.log(1.0 + th[0] + 1.0))), "concave"
    a, om = minmax_solve(f, [theta_hat], [[lo, hi]], conv, sign)
    a_ref, om_ref = minmax_oracle(f, theta_hat, lo, hi, sign)
    assert a == pytest.approx(a_ref, abs=1e-6)
    if a_ref > 1e-9:
        assert om[0] == pytest.approx(om_ref, abs=1e-6)
    else:
        # non-unique minimizer: compare the value achieved by our omega
        grid = np.linspace(lo, hi, 1000)
        vals = sign * (np.array([f([g]) for g in grid]) - f([theta_hat]) + (theta_hat - grid) * om[0])
        assert vals.max() <= a_ref + 1e-6


def test_minmax_linear_reduces_to_gradient():
    c = np.array([2.0, -1.0])
    f = lambda th: float(c @ th)  # noqa: E731
    for sign in (1.0, -1.0):
        a, om = minmax_solve(f, [0.1, 0.2], [[-1, 1], [-2, 2]], "convex", sign)
        assert a == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(om, c, atol=1e-9)


def test_minmax_control_rejects_general():
    plant = NonlinearPlant(1, lambda *a: 0.0, [[0.0, 1.0]], convexity="general")
    st0 = MinMaxControllerState([0.5], [0.0], 0.1)
    with pytest.raises(NotImplementedError):
        minmax_nlp_control(st0, plant, lambda X, th: float(np.sin(th[0] * X[0])), [1.0], 0.5, 0.0)


def test_minmax_control_dead_zone_freezes_adaptation():
    plant = NonlinearPlant(1, lambda *a: 0.0, [[0.0, 1.0]])
    st0 = MinMaxControllerState([0.5], [0.2], 0.1)
    _, _, _, a_dot, th_dot = minmax_nlp_control(st0, plant, lambda X, th: float(np.exp(th[0] * X[0])), [1.0], 0.05, 0.0)
    np.testing.assert_allclose(a_dot, 0.0)
    np.testing.assert_allclose(th_dot, 0.0)
    with pytest.raises(ValueError):
        MinMaxControllerState([0.5], [0.2], 0.0)
