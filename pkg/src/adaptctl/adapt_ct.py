"""Continuous-time adaptive control laws.

Each function evaluates one law at one instant and returns derivatives; the
closed loops in :mod:`adaptctl.loops` wire them to plants and integrate.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .analysis import LyapunovCertificate, spr_check
from .estimate import HighOrderTunerState, hot_rhs
from .model import NonlinearPlant, TransferFunction


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def _pd(G, name="Gamma"):
    G = np.asarray(G, dtype=float)
    if G.ndim == 0:
        if not G > 0:
            raise ValueError(f"{name} must be positive")
        return float(G)
    G = np.atleast_2d(G)
    if not np.allclose(G, G.T, atol=1e-12) or np.linalg.eigvalsh(0.5 * (G + G.T)).min() <= 0:
        raise ValueError(f"{name} must be symmetric positive definite")
    return G


def _gain(G, v):
    return G * v if np.isscalar(G) else G @ v


def mit_rule_rhs(theta, e: float, grad_e, k: float):
    """Gradient of the instantaneous squared error: ``-k e grad_e``."""
    if not k > 0:
        raise ValueError("MIT-rule gain must be positive")
    return -k * e * np.asarray(grad_e, dtype=float)


@dataclass(frozen=True)
class MracState:
    theta: np.ndarray
    k: float
    Gamma_theta: np.ndarray
    gamma_k: float
    sign_kstar: int
    P: np.ndarray | None

    def __post_init__(self):
        object.__setattr__(self, "theta", _vec(self.theta))
        object.__setattr__(self, "Gamma_theta", _pd(self.Gamma_theta, "Gamma_theta"))
        if not self.gamma_k > 0:
            raise ValueError("gamma_k must be positive")
        if self.sign_kstar not in (1, -1):
            raise ValueError("sign_kstar must be +1 or -1")
        if isinstance(self.P, LyapunovCertificate):
            object.__setattr__(self, "P", self.P.P)


def mrac_state_rhs(state: MracState, x, x_m, r: float, bm):
    """State-feedback MRAC: returns ``(u, theta_dot, k_dot)``."""
    if state.P is None:
        raise ValueError("MRAC law needs a Lyapunov certificate P")
    x = _vec(x)
    e = x - _vec(x_m)
    s = float(e @ state.P @ _vec(bm))
    u = float(state.theta @ x) + state.k * r
    theta_dot = -state.sign_kstar * _gain(state.Gamma_theta, s * x)
    k_dot = -state.sign_kstar * state.gamma_k * s * r
    return u, theta_dot, k_dot


def require_spr(Wm: TransferFunction):
    res = spr_check(Wm)
    if not res:
        raise ValueError(f"reference model is not SPR (margin {res.margin:.3g})")
    return res


def mrac_output_spr_rhs(theta_c, k: float, e_y: float, omega, r: float, sign_kstar: int):
    """Output-feedback law for an SPR reference model.

    Returns ``(u, theta_c_dot, k_dot)``.  SPR-ness of the reference model is
    enforced when the loop is constructed (see :func:`require_spr`).
    """
    omega = _vec(omega)
    u = float(_vec(theta_c) @ omega) + k * r
    return u, -sign_kstar * e_y * omega, -sign_kstar * e_y * r


def augmented_error_rhs(theta, omega, zeta, wm_theta_omega: float, e1: float, m: float | None = None):
    """Augmented-error law.

    ``zeta`` is ``Wm[omega]`` and ``wm_theta_omega`` is ``Wm[theta^T omega]``,
    both realized by filter states owned by the caller.  Returns
    ``(epsilon1, theta_dot, e2)``.  ``m`` defaults to ``1/(1 + zeta^T zeta)``.
    """
    theta, zeta = _vec(theta), _vec(zeta)
    if m is None:
        m = 1.0 / (1.0 + float(zeta @ zeta))
    if not m > 0:
        raise ValueError("normalizer m must be positive")
    e2 = float(theta @ zeta) - wm_theta_omega
    eps1 = e1 + e2
    return eps1, -m * eps1 * zeta, e2


def binomial_control(k_jet, d, r: float) -> float:
    """``u = sum_i C(p, i) k^(i)^T d_i + r`` for ``i = 0..p``."""
    k_jet = np.atleast_2d(k_jet)
    d = np.atleast_2d(d)
    p = k_jet.shape[0] - 1
    return float(sum(comb(p, i) * (k_jet[i] @ d[i]) for i in range(p + 1))) + r


def hot_output_controller_rhs(tuner: HighOrderTunerState, d, e1: float, r: float, omega_prime_jet=None, mu=None):
    """High-order-tuner output feedback.

    ``d`` holds the filtered regressors ``d_i = omega/(s+a)^i`` for
    ``i = 0..p`` (row 0 is omega itself, row p is omega').  Returns
    ``(u, dk_prime, dx)``.
    """
    d = np.atleast_2d(np.asarray(d, float))
    p = tuner.p
    if d.shape[0] != p + 1:
        raise ValueError(f"need p + 1 = {p + 1} filtered regressors, got {d.shape[0]}")
    dkp, dx, k_jet = hot_rhs(tuner, e1, d[p], omega_prime_jet, mu)
    return binomial_control(k_jet, d, r), dkp, dx


ROBUST_MODES = ("none", "sigma", "e_mod", "deadzone", "projection")


def robust_mod(mode: str, nominal, k, e=None, *, sigma=None, gamma=1.0, ePb=None, e0=None, radius=None):
    """Robustifying correction of an adaptive-law derivative.

    ``nominal`` is the unmodified derivative of parameter ``k``.
    sigma: ``nominal - gamma sigma k``; e_mod: ``nominal - sigma |e^T P b| k``;
    deadzone: zero when ``|e| < e0``; projection: the outward radial part is
    removed on the ball ``|k| <= radius``.
    """
    nominal, k = _vec(nominal), _vec(k)
    if mode == "none":
        return nominal
    if mode == "sigma":
        if sigma is None or sigma <= 0:
            raise ValueError("sigma must be positive")
        return nominal - _gain(gamma, sigma * k)
    if mode == "e_mod":
        if sigma is None or sigma <= 0:
            raise ValueError("sigma must be positive")
        if ePb is None:
            raise ValueError("e_mod needs e^T P b")
        return nominal - sigma * abs(ePb) * k
    if mode == "deadzone":
        if e0 is None or e0 <= 0:
            raise ValueError("dead-zone width must be positive")
        return np.zeros_like(nominal) if np.linalg.norm(_vec(e)) < e0 else nominal
    if mode == "projection":
        if radius is None or radius <= 0:
            raise ValueError("projection radius must be positive")
        nk = float(k @ k)
        if nk >= radius ** 2 * (1 - 1e-12):
            radial = float(k @ nominal)
            if radial > 0:
                return nominal - radial / nk * k
        return nominal
    raise ValueError(f"unknown robust modification {mode!r}")


def project_ball(k, radius):
    """Nearest point of the closed ball of given radius."""
    k = _vec(k)
    n = np.linalg.norm(k)
    return k * (radius / n) if n > radius else k


def saturate(v, v_max):
    """Elliptical saturation of a vector onto the box-inscribed ellipsoid."""
    v = _vec(v)
    v_max = _vec(v_max) * np.ones_like(v)
    if np.any(v_max <= 0):
        raise ValueError("saturation limits must be positive")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return v.copy()
    e_hat = v / norm
    g = float(np.sum((e_hat / v_max) ** 2)) ** -0.5
    return v.copy() if norm <= g else e_hat * g


@dataclass(frozen=True)
class SaturationLimits:
    u_max: np.ndarray
    u_r_max: np.ndarray
    tau: float

    def __post_init__(self):
        um, ur = _vec(self.u_max), _vec(self.u_r_max)
        if np.any(um <= 0) or np.any(ur <= 0):
            raise ValueError("saturation limits must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "u_max", um)
        object.__setattr__(self, "u_r_max", ur)


def saturated_input_rhs(limits: SaturationLimits, u, u_p):
    """Magnitude- and rate-limited actuator.

    Returns ``(u_p_dot, du_m, du_r)`` with ``du_m = E_s(u) - u`` and
    ``du_r = E_s(u_r) - u_r``.
    """
    u, u_p = _vec(u), _vec(u_p)
    su = saturate(u, limits.u_max)
    u_r = (su - u_p) / limits.tau
    su_r = saturate(u_r, limits.u_r_max)
    return su_r, su - u, su_r - u_r


def saturated_mrac_rhs(limits, u_cmd, u_p, e_a, k_s, e_u, P, Am, bm, gamma_s):
    """Actuator, augmentation and ``k_s`` derivatives for saturated MRAC.

    The deficiency driving ``e_a`` is the realized gap ``u_p - u``; once the
    actuator filter settles and only magnitude limits are active it equals
    ``E_s(u) - u``.  Returns ``(u_p_dot, delta_u, e_a_dot, k_s_dot)``.
    """
    up_dot, _, _ = saturated_input_rhs(limits, u_cmd, u_p)
    delta = float(_vec(u_p)[0] - _vec(u_cmd)[0])
    bm = _vec(bm)
    e_a_dot = np.asarray(Am) @ _vec(e_a) + bm * k_s * delta
    s = float(_vec(e_u) @ np.asarray(P) @ bm)
    return up_dot, delta, e_a_dot, -gamma_s * s * delta


def passification_controller_rhs(theta, y, g, Gamma):
    """Adaptive output feedback ``u = theta^T y``, ``theta_dot = -Gamma (g^T y) y``."""
    Gamma = _pd(Gamma)
    theta, y, g = _vec(theta), _vec(y), _vec(g)
    return float(theta @ y), -_gain(Gamma, float(g @ y) * y)


def _num_grad(fun, theta, h=1e-6):
    theta = _vec(theta)
    g = np.zeros_like(theta)
    for i in range(theta.size):
        d = np.zeros_like(theta)
        d[i] = h * max(1.0, abs(theta[i]))
        g[i] = (fun(theta + d) - fun(theta - d)) / (2 * d[i])
    return g


def _num_hess(fun, theta, h=1e-4):
    theta = _vec(theta)
    n = theta.size
    H = np.zeros((n, n))
    for i in range(n):
        d = np.zeros(n)
        d[i] = h
        H[:, i] = (_num_grad(fun, theta + d) - _num_grad(fun, theta - d)) / (2 * h)
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class SpeedGradientLaw:
    """Goal-rate ``w(x, theta, t)`` with gain ``Gamma``.

    ``grad_w`` and ``generator_hessian`` are optional analytic derivatives;
    central differences are used otherwise.
    """

    w: Callable
    Gamma: np.ndarray
    grad_w: Callable | None = None
    generator: Callable | None = None
    generator_hessian: Callable | None = None

    def __post_init__(self):
        object.__setattr__(self, "Gamma", _pd(self.Gamma))

    def gradient(self, x, theta, t):
        if self.grad_w is not None:
            return _vec(self.grad_w(x, theta, t))
        return _num_grad(lambda th: self.w(x, th, t), theta)


def check_convexity(fun, lo, hi, samples=200, seed=0, tol=1e-9) -> bool:
    """Random midpoint test of convexity of ``fun`` on the box ``[lo, hi]``."""
    rng = np.random.default_rng(seed)
    lo, hi = _vec(lo), _vec(hi)
    for _ in range(samples):
        a = lo + (hi - lo) * rng.random(lo.size)
        b = lo + (hi - lo) * rng.random(lo.size)
        if fun(0.5 * (a + b)) > 0.5 * (fun(a) + fun(b)) + tol * (1 + abs(fun(a)) + abs(fun(b))):
            return False
    return True


def speed_gradient_rhs(law: SpeedGradientLaw, x, theta, t: float, bregman: bool = False):
    """Speed-gradient law; the Bregman variant scales by the generator Hessian at theta."""
    g = law.gradient(x, theta, t)
    if not bregman:
        return -_gain(law.Gamma, g)
    if law.generator_hessian is not None:
        H = np.atleast_2d(law.generator_hessian(theta))
    elif law.generator is not None:
        H = _num_hess(law.generator, theta)
    else:
        raise ValueError("Bregman variant needs a generator")
    if np.linalg.eigvalsh(0.5 * (H + H.T)).min() <= 0:
        raise ValueError("generator is not strictly convex at theta")
    return -H @ g


def s_func(y: float, power: int = 0) -> float:
    """Smooth saturation: ``y^(2 power + 1)`` inside the unit interval, sign outside."""
    if abs(y) >= 1.0:
        return float(np.sign(y))
    return float(y ** (2 * power + 1))


def e_eps(e_c: float, eps: float, power: int = 0) -> float:
    return e_c - eps * s_func(e_c / eps, power)


def _box_vertices(box):
    return np.array(list(itertools.product(*[(lo, hi) for lo, hi in box])))


def minmax_solve(f_theta: Callable, theta_hat, box, convexity: str, sign: float, grad: Callable | None = None):
    """Closed-form min over omega of max over theta in the box of ``sign J``.

    ``J = f(theta) - f(theta_hat) + (theta_hat - theta)^T omega`` and
    ``sign`` carries ``sgn(e_c) beta``.  Returns ``(a, omega)`` with ``a`` the
    optimal value.  When ``sign * f`` is convex the inner max sits on box
    vertices and the outer min is a small LP (the secant slope in the
    scalar case); when it is concave the optimum is ``a = 0`` at the
    gradient of f at ``theta_hat``.
    """
    box = np.atleast_2d(np.asarray(box, float))
    th = _vec(theta_hat)
    if sign == 0:
        return 0.0, _grad(f_theta, th, grad)
    eff = convexity
    if sign < 0:
        eff = {"convex": "concave", "concave": "convex"}.get(convexity, convexity)
    if eff not in ("convex", "concave"):
        raise NotImplementedError("min-max solution needs f convex or concave in theta")
    f_hat = float(f_theta(th))
    if eff == "concave":
        return 0.0, _grad(f_theta, th, grad)
    V = _box_vertices(box)
    c = np.array([sign * (float(f_theta(v)) - f_hat) for v in V])
    G = sign * (th[None, :] - V)  # slope of each affine piece in omega
    p = th.size
    if p == 1:
        lo, hi = V[0, 0], V[-1, 0]
        if hi == lo:
            return max(0.0, float(c.max())), _grad(f_theta, th, grad)
        omega = (float(f_theta(V[-1])) - float(f_theta(V[0]))) / (hi - lo)
        return float(np.max(c + G[:, 0] * omega)), np.array([omega])
    res = linprog(
        np.r_[1.0, np.zeros(p)],
        A_ub=np.column_stack([-np.ones(len(V)), G]),
        b_ub=-c,
        bounds=[(None, None)] + [(-1e6, 1e6)] * p,
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"min-max LP failed: {res.message}")
    omega = res.x[1:]
    return float(np.max(c + G @ omega)), omega


def minmax_oracle(f_theta, theta_hat, lo, hi, sign, points=1000, omega_bounds=(-50, 50)):
    """Brute-force scalar min-max on a parameter grid (test oracle).

    ``theta_hat`` is added to the grid so the inner max never misses the
    point where the cost vanishes.
    """
    from scipy.optimize import minimize_scalar

    grid = np.union1d(np.linspace(lo, hi, points), [theta_hat])
    fg = np.array([f_theta(np.array([t])) for t in grid])
    fh = float(f_theta(np.array([theta_hat])))

    def inner(om):
        return float(np.max(sign * (fg - fh + (theta_hat - grid) * om)))

    res = minimize_scalar(inner, bounds=omega_bounds, method="bounded", options={"xatol": 1e-12})
    return res.fun, res.x


def _grad(f_theta, th, grad):
    if grad is not None:
        return _vec(grad(th))
    return _num_grad(lambda t: float(f_theta(t)), th, 1e-7)


@dataclass(frozen=True)
class MinMaxControllerState:
    theta_hat: np.ndarray
    alpha_hat: np.ndarray
    epsilon: float
    beta: float = 1.0
    Gamma_alpha: np.ndarray = 1.0
    Gamma_theta: np.ndarray = 1.0
    scale: float = 1.0
    s_power: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("dead-zone width epsilon must be positive")
        if not self.scale > 0:
            raise ValueError("a* scale must be positive")
        object.__setattr__(self, "theta_hat", _vec(self.theta_hat))
        object.__setattr__(self, "alpha_hat", _vec(self.alpha_hat))
        object.__setattr__(self, "Gamma_alpha", _pd(self.Gamma_alpha, "Gamma_alpha"))
        object.__setattr__(self, "Gamma_theta", _pd(self.Gamma_theta, "Gamma_theta"))


def minmax_nlp_control(state: MinMaxControllerState, plant: NonlinearPlant, f: Callable, X_p, e_c: float, r: float, grad=None):
    """Min-max adaptive control for a convex/concave parameterization.

    ``f(X, theta)`` is the nonlinearity.  Returns
    ``(u, a_star, omega_star, alpha_hat_dot, theta_hat_dot)``.
    """
    box = plant.theta_set
    if box.size == 0:
        raise ValueError("parameter set is empty")
    if plant.convexity == "general":
        raise NotImplementedError("general (non-convex, non-concave) parameterizations are unsupported")
    X = _vec(X_p)
    ftheta = lambda th: float(f(X, th))  # noqa: E731
    g = (lambda th: grad(X, th)) if grad is not None else None
    sign = float(np.sign(e_c)) * state.beta
    a, omega = minmax_solve(ftheta, state.theta_hat, box, plant.convexity, sign, g)
    a_star = state.scale * a
    s = s_func(e_c / state.epsilon, state.s_power)
    u = -ftheta(state.theta_hat) + float(state.alpha_hat @ X) + r - a_star * s
    ee = e_c - state.epsilon * s
    alpha_dot = -_gain(state.Gamma_alpha, ee * X)
    theta_dot = _gain(state.Gamma_theta, ee * omega)
    return u, a_star, omega, alpha_dot, theta_dot


def rbf_features(x, centers, widths):
    """Gaussian radial basis features ``exp(-|x - c_i|^2 / (2 sigma_i^2))``."""
    x = _vec(x)
    C = np.asarray(centers, float)
    if C.size == 0:
        raise ValueError("need at least one center")
    C = C.reshape(-1, x.size)
    w = _vec(widths) * np.ones(C.shape[0])
    if np.any(w <= 0):
        raise ValueError("widths must be positive")
    d2 = np.sum((C - x) ** 2, axis=1)
    return np.exp(-d2 / (2 * w ** 2))


def warn_nonconvex(law: SpeedGradientLaw, x, lo, hi, t=0.0):
    """Emit a warning (and return False) if ``w`` fails the midpoint test."""
    ok = check_convexity(lambda th: law.w(x, th, t), lo, hi)
    if not ok:
        warnings.warn("goal-rate function failed the convexity sampling check", RuntimeWarning)
    return ok
