"""Discrete-time self-tuning regulation.

Plants follow :class:`adaptctl.model.ArmaxPlant`,
``A(z) y_k = z^d B(z) u_k + C(z) w_k`` with ``z`` the backward shift.
With ``C = A F + z^d G`` the output ``d`` steps ahead is
``C y_{k+d} = F B u_k + G y_k + C F w_{k+d}``, which gives the
minimum-variance and tracking laws below.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleError
from .model import ArmaxPlant, Polynomial, bezout_solve
from .sim import DisturbanceSpec, Trajectory, simulate_dt

CRITICAL_TOL = 1e-12


def _require_minimum_phase(plant: ArmaxPlant):
    if not plant.is_minimum_phase():
        raise InfeasibleError(f"B has zeros {plant.input_zeros()} outside the unit circle")


def min_variance_control_known(plant: ArmaxPlant, y_history, u_history, y_star_future) -> float:
    """Known-parameter minimum-variance / tracking input ``u_k``.

    ``y_history[i] = y_{k-i}`` and ``u_history[j] = u_{k-1-j}``.
    ``y_star_future`` is ``y*_{k+d}`` or a sequence ``[y*_{k+d}, y*_{k+d-1}, ...]``
    long enough for the noise polynomial C.  Solves
    ``F B u_k = C y*_{k+d} - G y_k`` for ``u_k``.
    """
    _require_minimum_phase(plant)
    F, G = bezout_solve(plant.A, plant.C, plant.d)
    FB = (F * plant.B).coeffs
    g = G.coeffs
    cc = plant.C.coeffs
    ys = np.atleast_1d(np.asarray(y_star_future, float))
    yh = np.asarray(y_history, float)
    uh = np.asarray(u_history, float)
    if ys.size < 1:
        raise ValueError("need y*_{k+d}")
    need_y, need_u = g.size, FB.size - 1
    if yh.size < need_y or uh.size < need_u:
        raise ValueError(f"histories too short: need {need_y} outputs and {need_u} inputs")
    target = sum(cc[i] * ys[i] for i in range(min(cc.size, ys.size)))
    acc = target - float(g @ yh[:need_y]) - float(FB[1:] @ uh[:need_u])
    return acc / FB[0]


def controller_parameters(plant: ArmaxPlant):
    """True predictor-form parameters ``[alpha_0.., beta_1.., 1/beta_0]`` (noise-free, C = 1)."""
    _require_minimum_phase(plant)
    F, G = bezout_solve(plant.A, Polynomial(1.0), plant.d)
    FB = (F * plant.B).coeffs
    b0 = FB[0]
    n = len(plant.a)
    alpha = np.zeros(max(n, 1))
    alpha[: G.coeffs.size] = G.coeffs / b0
    nb = len(plant.b) - 1 + plant.d - 1
    beta = np.zeros(nb)
    beta[: FB.size - 1] = FB[1:] / b0
    return np.concatenate([alpha, beta, [1.0 / b0]])


def str_update(theta, phi_c, u, gamma: float = 1.0, c: float = 1.0):
    """Normalized update ``theta + gamma phi (u - phi^T theta) / (c + phi^T phi)``."""
    if not 0.0 < gamma < 2.0:
        raise ValueError(f"gamma must lie in (0, 2), got {gamma}")
    if not c > 0:
        raise ValueError("normalizer c must be positive")
    theta = np.asarray(theta, float)
    phi = np.asarray(phi_c, float)
    return theta + gamma * phi * (float(u) - float(phi @ theta)) / (c + float(phi @ phi))


@dataclass(frozen=True)
class StrState:
    """Self-tuning regulator state.

    ``n`` output taps, ``m`` extra input taps (``len(b) - 1``) and delay
    ``d``; ``theta`` has ``n + m + d`` entries.  After a step at sample k,
    ``y_hist[i] = y_{k-i}`` and ``u_hist[j] = u_{k-j}``.  Optional
    ``beta0_sign``/``beta0_min`` clip the last entry (``1/beta0``) to the
    interval implied by the known sign and lower bound of ``beta0``.
    """

    theta: np.ndarray
    n: int
    m: int
    d: int = 1
    gamma: float = 1.0
    c: float = 1.0
    beta0_sign: int | None = None
    beta0_min: float | None = None
    y_hist: np.ndarray = field(default=None)
    u_hist: np.ndarray = field(default=None)
    k: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 2.0:
            raise ValueError(f"gamma must lie in (0, 2), got {self.gamma}")
        if not self.c > 0:
            raise ValueError("normalizer c must be positive")
        if self.n < 1 or self.m < 0 or self.d < 1:
            raise ValueError("need n >= 1, m >= 0, d >= 1")
        theta = np.asarray(self.theta, float).reshape(-1)
        if theta.size != self.dim:
            raise ValueError(f"theta must have {self.dim} entries")
        if self.beta0_min is not None and not self.beta0_min > 0:
            raise ValueError("beta0_min must be positive")
        object.__setattr__(self, "theta", theta)
        ny, nu = self.n + self.d, self.m + 2 * self.d
        yh = np.zeros(ny) if self.y_hist is None else np.asarray(self.y_hist, float)
        uh = np.zeros(nu) if self.u_hist is None else np.asarray(self.u_hist, float)
        object.__setattr__(self, "y_hist", yh)
        object.__setattr__(self, "u_hist", uh)

    @property
    def dim(self) -> int:
        return self.n + self.m + self.d

    def _project(self, theta):
        if self.beta0_sign is None:
            return theta
        inv = theta[-1] * self.beta0_sign
        hi = np.inf if self.beta0_min is None else 1.0 / self.beta0_min
        theta = theta.copy()
        theta[-1] = self.beta0_sign * min(max(inv, 0.0), hi)
        return theta


def _regressor(y_hist, u_hist, lag: int, n: int, nu: int, last: float):
    """``[-y_{k-lag}, .., -y_{k-lag-n+1}, -u_{k-lag-1}, .., -u_{k-lag-nu}, last]``.

    ``y_hist[i] = y_{k-i}`` and ``u_hist[j] = u_{k-1-j}``.
    """
    ys = -y_hist[lag: lag + n]
    us = -u_hist[lag: lag + nu]
    return np.concatenate([ys, us, [last]])


def str_step(state: StrState, y_k: float, y_star_ahead: float, u_applied=None):
    """One STR sample: update from ``phi_{c,k-d}`` then compute ``u_k``.

    ``y_star_ahead`` is ``y*_{k+d}``.  ``u_applied`` overrides the input
    recorded in the history (e.g. after actuator clipping).  Returns
    ``(u_k, new_state)``.
    """
    n, m, d = state.n, state.m, state.d
    nu = m + d - 1
    yh = np.concatenate([[float(y_k)], state.y_hist[:-1]])
    uh = state.u_hist  # uh[j] = u_{k-1-j}
    theta = state.theta
    if state.k >= d:
        # phi_{c,k-d} ends with y_k; its target input is u_{k-d} = uh[d-1]
        phi_c = _regressor(yh, uh, d, n, nu, float(y_k))
        theta = state._project(str_update(theta, phi_c, uh[d - 1], state.gamma, state.c))
    varphi = np.concatenate([-yh[:n], -uh[:nu], [float(y_star_ahead)]])
    u = float(varphi @ theta)
    u_rec = u if u_applied is None else float(u_applied)
    uh_new = np.concatenate([[u_rec], uh[:-1]])
    return u, replace(state, theta=theta, y_hist=yh, u_hist=uh_new, k=state.k + 1)


def closed_loop_gain(theta_c1: float, theta_c2: float, a: float, b: float):
    """First-order loop ``y_{k+1} = g y_k + h`` under ``u = -theta_c1 y + theta_c2 y*``.

    Returns ``(g, h, stability class, theta_b)`` where ``theta_b`` solves
    ``g(theta_b) = -1``.
    """
    if b == 0:
        raise ValueError("b must be nonzero")
    g = a - b * theta_c1
    h = b * theta_c2
    if abs(abs(g) - 1.0) <= CRITICAL_TOL:
        cls = "critical"
    elif abs(g) < 1.0:
        cls = "stable"
    else:
        cls = "unstable"
    return g, h, cls, (a + 1.0) / b


class StrController:
    """Adapter exposing an STR to :func:`adaptctl.sim.simulate_dt`."""

    def __init__(self, state: StrState, setpoint, first_order: tuple | None = None):
        self.state = state
        self.setpoint = setpoint  # k -> y*_k
        self.first_order = first_order  # (a, b) to log g(theta_c1)
        self.channels = ["y_star", "err"] + [f"theta_c{i}" for i in range(state.dim)]
        if first_order is not None:
            self.channels.append("g")

    def step(self, k, y):
        ys = self.setpoint(k)
        u, self.state = str_step(self.state, y, self.setpoint(k + self.state.d))
        extra = [ys, y - ys, *self.state.theta]
        if self.first_order is not None:
            a, b = self.first_order
            extra.append(a - b * self.state.theta[0])
        return u, extra


class MinVarianceController:
    """Known-parameter tracking controller for :func:`simulate_dt`."""

    def __init__(self, plant: ArmaxPlant, setpoint):
        _require_minimum_phase(plant)
        self.plant, self.setpoint = plant, setpoint
        F, G = bezout_solve(plant.A, plant.C, plant.d)
        self.ny = max(G.coeffs.size, 1)
        self.nu = max((F * plant.B).coeffs.size - 1, 0)
        self.y_hist = np.zeros(self.ny)
        self.u_hist = np.zeros(max(self.nu, 1))
        self.channels = ["y_star", "err"]

    def step(self, k, y):
        self.y_hist = np.concatenate([[y], self.y_hist[:-1]])
        nc = self.plant.C.degree + 1
        ys = [self.setpoint(k + self.plant.d - i) for i in range(nc)]
        u = min_variance_control_known(self.plant, self.y_hist, self.u_hist, ys)
        self.u_hist = np.concatenate([[u], self.u_hist[:-1]])
        return u, [self.setpoint(k), y - self.setpoint(k)]


def setpoint_fn(spec):
    """Sample-indexed setpoint ``k -> y*_k`` from a config block or number."""
    if isinstance(spec, (int, float)):
        v = float(spec)
        return lambda k: v
    kind = spec.get("kind", "constant")
    if kind == "constant":
        v = float(spec.get("value", 1.0))
        return lambda k: v
    if kind == "square":
        period, amp = int(spec["period"]), float(spec.get("amplitude", 1.0))
        off = float(spec.get("offset", 0.0))
        return lambda k: off + (amp if (k % period) < period // 2 else -amp)
    if kind == "sines":
        amps, freqs = np.asarray(spec["amplitudes"], float), np.asarray(spec["freqs"], float)
        return lambda k: float(amps @ np.sin(freqs * k))
    raise ValueError(f"unknown setpoint kind {kind!r}")


@dataclass(frozen=True)
class BurstScenario:
    """First-order plant ``y_{k+1} = a y_k + b u_k`` under the two-parameter STR.

    A pulse of ``pulse_amplitude`` enters the output equation at sample
    ``pulse_k`` for ``pulse_width`` samples; ``noise_vmax`` adds bounded
    uniform noise throughout.
    """

    a: float = 0.5
    b: float = 1.0
    y_star: float = 1.0
    pulse_k: int = 3000
    pulse_width: int = 1
    pulse_amplitude: float = 1.0
    noise_vmax: float = 0.0
    theta0: tuple = (0.0, 1.0)
    gamma: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.b == 0:
            raise ValueError("b must be nonzero")

    @property
    def plant(self) -> ArmaxPlant:
        return ArmaxPlant(a=(self.a,), b=(self.b,), d=1)

    def theta_b(self) -> float:
        return closed_loop_gain(0.0, 0.0, self.a, self.b)[3]

    def disturbances(self):
        specs = [DisturbanceSpec("pulse", amplitude=self.pulse_amplitude, t0=float(self.pulse_k),
                                 width=float(self.pulse_width))]
        if self.noise_vmax > 0:
            specs.append(DisturbanceSpec("bounded_noise", vmax=self.noise_vmax, hold=1.0))
        return specs

    def run(self, horizon: int, seed: int = 0) -> Trajectory:
        st = StrState(np.asarray(self.theta0, float), n=1, m=0, d=1, gamma=self.gamma, c=self.c)
        ctl = StrController(st, setpoint_fn(self.y_star), (self.a, self.b))
        return simulate_dt(self.plant, ctl, horizon, self.disturbances(), seed)
