import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptctl.adapt_dt import (
    MinVarianceController,
    StrController,
    StrState,
    closed_loop_gain,
    controller_parameters,
    min_variance_control_known,
    setpoint_fn,
    str_step,
    str_update,
)
from adaptctl.errors import InfeasibleError
from adaptctl.model import ArmaxPlant
from adaptctl.sim import simulate_dt


def test_min_variance_first_order():
    plant = ArmaxPlant(a=(0.5,), b=(1.0,))
    assert min_variance_control_known(plant, [2.0], [], 0.0) == pytest.approx(-1.0)
    plant0 = ArmaxPlant(a=(0.0,), b=(3.0,))
    assert min_variance_control_known(plant0, [2.0], [], 0.0) == pytest.approx(0.0)


def test_min_variance_refuses_nonminimum_phase():
    # u_{k-1} - 2 u_{k-2}: input zero at 2 in the forward variable
    with pytest.raises(InfeasibleError):
        min_variance_control_known(ArmaxPlant(a=(0.5,), b=(1.0, -2.0)), [1.0], [0.0], 0.0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_min_variance_tracks_exactly(d):
    plant = ArmaxPlant(a=(1.2, -0.5), b=(1.0, 0.4), d=d)
    sp = setpoint_fn({"kind": "square", "period": 20, "amplitude": 1.0})
    traj = simulate_dt(plant, MinVarianceController(plant, sp), 200)
    err = traj["err"]
    assert np.max(np.abs(err[d + 3:])) < 1e-10


def test_str_update_examples():
    np.testing.assert_allclose(str_update([0.0], [1.0], 2.0), [1.0])
    with pytest.raises(ValueError):
        str_update([0.0], [1.0], 2.0, gamma=2.0)
    with pytest.raises(ValueError):
        StrState(np.zeros(2), n=1, m=0, gamma=3.0)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.floats(0.05, 1.95),
)
def test_str_update_error_nonincreasing(theta, theta_star, phi, gamma):
    theta, theta_star, phi = map(np.array, (theta, theta_star, phi))
    new = str_update(theta, phi, float(phi @ theta_star), gamma)
    assert np.linalg.norm(new - theta_star) <= np.linalg.norm(theta - theta_star) + 1e-12


def test_str_true_parameters_are_fixed_point():
    plant = ArmaxPlant(a=(0.8,), b=(1.0,))
    theta = controller_parameters(plant)
    np.testing.assert_allclose(theta, [0.8, 1.0])
    ctl = StrController(StrState(theta, n=1, m=0), setpoint_fn(1.0))
    traj = simulate_dt(plant, ctl, 50)
    np.testing.assert_allclose(traj["theta_c0"][-1], 0.8)
    assert np.max(np.abs(traj["err"][2:])) < 1e-12


def test_str_step_history_shapes():
    st0 = StrState(np.zeros(4), n=2, m=0, d=2)
    u, st1 = str_step(st0, 1.0, 0.5)
    assert st1.k == 1 and st1.y_hist[0] == 1.0 and st1.u_hist[0] == u


def test_closed_loop_gain_examples():
    g, _, cls, theta_b = closed_loop_gain(1.5, 1.0, 0.5, 1.0)
    assert g == pytest.approx(-1.0) and cls == "critical" and theta_b == pytest.approx(1.5)
    g, _, cls, _ = closed_loop_gain(0.5, 1.0, 0.5, 1.0)
    assert g == pytest.approx(0.0) and cls == "stable"
    assert closed_loop_gain(2.0, 1.0, 0.5, 1.0)[2] == "unstable"
    with pytest.raises(ValueError):
        closed_loop_gain(1.0, 1.0, 0.5, 0.0)


def test_setpoints():
    sq = setpoint_fn({"kind": "square", "period": 4, "amplitude": 2.0})
    assert [sq(k) for k in range(4)] == [2.0, 2.0, -2.0, -2.0]
    assert setpoint_fn(3)(10) == 3.0
    with pytest.raises(ValueError):
        setpoint_fn({"kind": "triangle"})
