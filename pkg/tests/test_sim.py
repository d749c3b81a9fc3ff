import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptctl.errors import DivergenceError
from adaptctl.sim import (
    ClosedLoop,
    DisturbanceSpec,
    Trajectory,
    burst_ratio,
    metrics,
    realize_all,
    rk4_step,
    simulate_ct,
)


def test_rk4_examples():
    assert rk4_step(lambda t, x: -x, np.array([1.0]), 0.0, 0.1)[0] == pytest.approx(0.90483750, abs=1e-8)
    assert rk4_step(lambda t, x: 0 * x, np.array([3.0]), 0.0, 0.1)[0] == 3.0
    with pytest.raises(ValueError):
        rk4_step(lambda t, x: -x, np.array([1.0]), 0.0, 0.0)


def _global_error(h):
    x = np.array([1.0])
    for i in range(int(round(1.0 / h))):
        x = rk4_step(lambda t, z: -z, x, i * h, h)
    return abs(x[0] - np.exp(-1.0))


def test_rk4_fourth_order():
    ratio = _global_error(0.1) / _global_error(0.05)
    assert 14.0 <= ratio <= 18.0


class _Decay(ClosedLoop):
    channels = ["x", "d"]
    disturbance_dim = 1

    def __init__(self, rate=-1.0):
        self.rate = rate

    def initial_state(self):
        return np.array([1.0])

    def rhs(self, t, z, d):
        return self.rate * z + d

    def observe(self, t, z, d):
        return [z[0], d[0]]


def test_simulate_ct_matches_exponential():
    traj = simulate_ct(_Decay(), 2.0, h=0.01)
    np.testing.assert_allclose(traj["x"], np.exp(-traj.time), atol=1e-9)
    assert len(traj) == 201


def test_simulate_ct_divergence_guard():
    with pytest.raises(DivergenceError) as info:
        simulate_ct(_Decay(rate=5.0), 10.0, h=0.01)
    assert info.value.trajectory is not None
    assert len(info.value.trajectory) < 1001


def test_noise_is_seeded_and_bounded():
    spec = DisturbanceSpec("bounded_noise", vmax=0.3, hold=0.5)
    a = simulate_ct(_Decay(), 5.0, h=0.01, disturbance=[spec], seed=3)
    b = simulate_ct(_Decay(), 5.0, h=0.01, disturbance=[spec], seed=3)
    c = simulate_ct(_Decay(), 5.0, h=0.01, disturbance=[spec], seed=4)
    assert a.to_csv() == b.to_csv()
    assert not np.array_equal(a["d"], c["d"])
    assert np.abs(a["d"]).max() <= 0.3
    # held for 0.5 time units = 50 steps
    assert len(np.unique(a["d"][:50])) == 1


def test_pulse_and_sum():
    d = realize_all([DisturbanceSpec("pulse", amplitude=2.0, t0=1.0, width=0.5),
                     DisturbanceSpec("sinusoid", amplitude=1.0, freq=1.0)], 1, 5.0, 0.01)
    assert d(1.2)[0] == pytest.approx(2.0 + np.sin(1.2))
    assert d(2.0)[0] == pytest.approx(np.sin(2.0))
    assert realize_all(None, 2, 1.0, 0.1)(0.3).tolist() == [0.0, 0.0]
    with pytest.raises(ValueError):
        DisturbanceSpec("impulse")


def test_trajectory_roundtrip(tmp_path):
    traj = simulate_ct(_Decay(), 1.0, h=0.1)
    back = Trajectory.from_csv(traj.to_csv())
    np.testing.assert_allclose(back["x"], traj["x"], rtol=1e-11)
    back = Trajectory.from_json(traj.to_json(tmp_path / "t.json"))
    np.testing.assert_array_equal(back["x"], traj["x"])
    with pytest.raises(KeyError):
        traj["nope"]


def test_trajectory_length_check():
    with pytest.raises(ValueError):
        Trajectory(np.arange(3.0), {"a": np.zeros(2)}, 1.0)


def test_burst_ratio_synthetic_spike():
    err = np.full(2000, 0.01)
    err[1000] = 0.1
    assert burst_ratio(err, 1000, 500) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        burst_ratio(err, 100, 500)


def _traj(**cols):
    n = len(next(iter(cols.values())))
    return Trajectory(np.arange(n) * 0.1, {k: np.asarray(v, float) for k, v in cols.items()}, 0.1)


def test_metrics_zero_error():
    tr = _traj(e=np.zeros(100), V=np.ones(100))
    out = metrics(tr, {
        "a": {"kind": "tracking_tail_max", "channel": "e", "t_start": 5.0},
        "b": {"kind": "sq_sum_tail", "channel": "e"},
        "c": {"kind": "lyapunov_violations", "channel": "V"},
        "d": {"kind": "max_rate", "channel": "e"},
    })
    assert out == {"a": 0.0, "b": 0.0, "c": 0, "d": 0.0}


def test_metrics_kinds():
    k = np.r_[np.linspace(0, 3, 50), np.full(50, 3.0)]
    tr = _traj(k0=k, k1=np.zeros(100), V=np.r_[np.ones(50), 2 * np.ones(50)])
    out = metrics(tr, {
        "drift": {"kind": "drift_indicator", "channels": ["k0", "k1"], "truth": [1.5, 0.0]},
        "perr": {"kind": "param_error", "channels": ["k0", "k1"], "truth": [3.0, 0.0]},
        "viol": {"kind": "lyapunov_violations", "channel": "V", "abs_tol": 0.5},
        "lag": {"kind": "lag_change", "channels": ["k0"], "lag": 5, "k_start": 60},
        "fin": {"kind": "final", "channel": "V"},
    })
    assert out["drift"] == pytest.approx(2.0)
    assert out["perr"] == 0.0
    assert out["viol"] == 1
    assert out["lag"] == 0.0
    assert out["fin"] == 2.0
    with pytest.raises(KeyError):
        metrics(tr, {"x": {"kind": "final", "channel": "missing"}})
    with pytest.raises(ValueError):
        metrics(tr, {"x": {"kind": "bogus", "channel": "V"}})


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=50))
def test_nonincreasing_sequences_have_no_violations(vals):
    V = np.sort(np.abs(vals))[::-1]
    out = metrics(_traj(V=V), {"v": {"kind": "lyapunov_violations", "channel": "V", "abs_tol": 0.0}})
    assert out["v"] == 0
