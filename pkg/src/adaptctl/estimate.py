"""Recursive parameter estimators.

Continuous laws return derivatives and leave integration to ``sim``;
discrete laws return the next state.  All states are immutable values.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from math import comb

import numpy as np

from .errors import DegenerateGainError
from .model import Polynomial, is_hurwitz


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def _check_gain(gamma):
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        if not g > 0:
            raise ValueError("gain must be positive")
        return float(g)
    if g.shape[0] != g.shape[1] or not np.allclose(g, g.T, atol=1e-12):
        raise ValueError("gain matrix must be square and symmetric")
    if np.linalg.eigvalsh(g).min() <= 0:
        raise ValueError("gain matrix must be positive definite")
    return g


def _apply_gain(gamma, v):
    return gamma * v if np.isscalar(gamma) else gamma @ v


@dataclass(frozen=True)
class GradientEstimatorState:
    theta: np.ndarray
    gamma: float | np.ndarray = 1.0


def gradient_rhs(state: GradientEstimatorState, phi, y) -> np.ndarray:
    """Gradient flow on the squared loss: ``-gamma phi (theta^T phi - y)``."""
    gamma = _check_gain(state.gamma)
    phi = _vec(phi)
    err = float(_vec(state.theta) @ phi - y)
    return -_apply_gain(gamma, phi * err)


def squared_loss(theta, phi, y) -> float:
    return 0.5 * float(_vec(theta) @ _vec(phi) - y) ** 2


SA_MODES = ("cumulative", "projection", "robbins_monro")


@dataclass(frozen=True)
class SaEstimatorState:
    """Stochastic-approximation estimator.

    ``r`` holds the normalizer for the upcoming step.  In ``cumulative``
    mode it grows by ``phi^T phi`` each step; in ``projection`` mode it is
    recomputed as ``1 + phi^T phi``; ``robbins_monro`` uses ``r = k + 1``
    so the effective gain is ``gamma / (k + 1)``.
    """

    theta: np.ndarray
    r: float = 1.0
    gamma: float = 1.0
    mode: str = "cumulative"
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta", _vec(self.theta).copy())
        if self.r < 1:
            raise ValueError("normalizer r must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.mode not in SA_MODES:
            raise ValueError(f"unknown SA mode {self.mode!r}")


def sa_step(state: SaEstimatorState, phi_prev, y, phi_next=None) -> SaEstimatorState:
    """One stochastic-approximation update from ``(phi_{k-1}, y_k)``.

    Cumulative mode also needs ``phi_next`` (= phi_k) to advance r.
    """
    phi_prev = _vec(phi_prev)
    if state.mode == "projection":
        r = 1.0 + float(phi_prev @ phi_prev)
    elif state.mode == "robbins_monro":
        r = float(state.k + 1)
    else:
        r = state.r
    y_hat = float(phi_prev @ state.theta)
    theta = state.theta - (state.gamma / r) * phi_prev * (y_hat - y)
    r_next = state.r
    if state.mode == "cumulative":
        if phi_next is None:
            raise ValueError("cumulative SA needs phi_next to advance the normalizer")
        pn = _vec(phi_next)
        r_next = state.r + float(pn @ pn)
    return replace(state, theta=theta, r=r_next, k=state.k + 1)


@dataclass(frozen=True)
class RlsEstimatorState:
    theta: np.ndarray
    Gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _vec(self.theta).copy())
        G = np.atleast_2d(np.asarray(self.Gamma, dtype=float)).copy()
        if G.shape != (self.theta.size, self.theta.size):
            raise ValueError("Gamma must be square with the parameter dimension")
        if not np.allclose(G, G.T, atol=1e-12 * max(1.0, np.abs(G).max())):
            raise ValueError("Gamma must be symmetric")
        if np.linalg.eigvalsh(G).min() <= 0:
            raise ValueError("Gamma must be positive definite")
        object.__setattr__(self, "Gamma", G)


def rls_step(state: RlsEstimatorState, phi, y) -> RlsEstimatorState:
    """Classical recursive least squares with the normalized gain."""
    phi = _vec(phi)
    G = state.Gamma
    Gphi = G @ phi
    denom = 1.0 + float(phi @ Gphi)
    err = float(phi @ state.theta) - y
    theta = state.theta - Gphi * (err / denom)
    G_new = G - np.outer(Gphi, Gphi) / denom
    G_new = 0.5 * (G_new + G_new.T)
    lam = np.linalg.eigvalsh(G_new).min()
    if lam < 1e-14:
        raise DegenerateGainError(f"RLS gain lost definiteness (lambda_min = {lam:.3e})")
    # bypass __post_init__ checks: already symmetric and definite
    new = object.__new__(RlsEstimatorState)
    object.__setattr__(new, "theta", theta)
    object.__setattr__(new, "Gamma", G_new)
    return new


@dataclass(frozen=True)
class ObserverState:
    """Adaptive observer on the nonminimal representation of a SISO plant.

    ``omega_hat`` stacks the input and output filter states (2n),
    ``theta_hat`` the matching parameter estimates.
    """

    omega_hat: np.ndarray
    theta_hat: np.ndarray
    Gamma: np.ndarray
    Lambda: np.ndarray
    ell: np.ndarray

    def __post_init__(self):
        Lam = np.atleast_2d(np.asarray(self.Lambda, float))
        n = Lam.shape[0]
        ell = _vec(self.ell)
        om, th = _vec(self.omega_hat), _vec(self.theta_hat)
        if ell.size != n or om.size != 2 * n or th.size != 2 * n:
            raise ValueError("observer dimensions inconsistent with Lambda")
        if not is_hurwitz(Lam):
            raise ValueError("Lambda must be Hurwitz")
        G = _check_gain(np.atleast_2d(np.asarray(self.Gamma, float)) if np.ndim(self.Gamma) else self.Gamma)
        if np.ndim(G) and G.shape != (2 * n, 2 * n):
            raise ValueError("Gamma must be 2n x 2n")
        for name, val in (("Lambda", Lam), ("ell", ell), ("omega_hat", om), ("theta_hat", th), ("Gamma", G)):
            object.__setattr__(self, name, val)


def observer_rhs(state: ObserverState, u: float, y: float):
    """Derivatives ``(d omega_hat, d theta_hat)`` and the estimate ``y_hat``."""
    n = state.ell.size
    w1, w2 = state.omega_hat[:n], state.omega_hat[n:]
    d_w1 = state.Lambda @ w1 + state.ell * u
    d_w2 = state.Lambda @ w2 + state.ell * y
    y_hat = float(state.theta_hat @ state.omega_hat)
    d_theta = -_apply_gain(state.Gamma, (y_hat - y) * state.omega_hat)
    return np.concatenate([d_w1, d_w2]), d_theta, y_hat


def tuner_filter(alpha: Polynomial):
    """Realization ``(A, b, c)`` of ``alpha(0)/alpha(s)`` with ``c^T A^l b = 0`` for ``l < p-1``."""
    p = alpha.degree
    if p < 1:
        raise ValueError("alpha must have degree >= 1")
    if not np.all(alpha.roots().real < 0):
        raise ValueError("alpha must be a stable polynomial")
    a = alpha.coeffs / alpha.leading
    A = np.zeros((p, p))
    A[:-1, 1:] = np.eye(p - 1)
    A[-1, :] = -a[:-1]
    b = np.zeros(p)
    b[-1] = 1.0
    c = np.zeros(p)
    c[0] = a[0]
    return A, b, c


@dataclass(frozen=True)
class HighOrderTunerState:
    """First-level estimate ``k_prime`` and per-component filter states ``x`` (N x p)."""

    k_prime: np.ndarray
    x: np.ndarray
    mu: float
    alpha_poly: Polynomial

    def __post_init__(self):
        kp = _vec(self.k_prime)
        alpha = self.alpha_poly if isinstance(self.alpha_poly, Polynomial) else Polynomial(self.alpha_poly)
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        p = alpha.degree
        x = np.asarray(self.x, float).reshape(kp.size, p) if p else np.zeros((kp.size, 0))
        if p and not np.all(alpha.roots().real < 0):
            raise ValueError("alpha must be a stable polynomial")
        object.__setattr__(self, "k_prime", kp)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "alpha_poly", alpha)

    @property
    def p(self) -> int:
        return self.alpha_poly.degree

    def realization(self):
        return tuner_filter(self.alpha_poly)


def _f_jet(omega_jet, mu, order):
    """Derivatives 0..order of ``f = 1 + mu w^2`` from the jet of w (rows = order)."""
    out = np.zeros((order + 1, omega_jet.shape[1]))
    for m in range(order + 1):
        s = sum(comb(m, i) * omega_jet[i] * omega_jet[m - i] for i in range(m + 1))
        out[m] = mu * s
    out[0] += 1.0
    return out


def hot_rhs(state: HighOrderTunerState, e1: float, omega_prime, omega_prime_jet=None, mu=None):
    """High-order tuner derivatives.

    Returns ``(dk_prime, dx, k_jet)``: ``k_jet[j]`` is the j-th time
    derivative of ``k`` for ``j = 0..p``, obtained analytically from the
    filter states.  ``omega_prime_jet`` supplies derivatives of ``omega'``
    of order 1..p-1 (rows) when ``p >= 2``.  ``mu`` overrides ``state.mu``
    (``mu = 0`` freezes the tuner to the linear filter).
    """
    w = _vec(omega_prime)
    mu = state.mu if mu is None else float(mu)
    N, p = state.k_prime.size, state.p
    dkp = -float(e1) * w
    if p == 0:
        return dkp, np.zeros((N, 0)), state.k_prime[None, :].copy()
    A, b, c = state.realization()
    jet = np.zeros((max(p, 1), N))
    jet[0] = w
    if p >= 2:
        if omega_prime_jet is None:
            raise ValueError("p >= 2 needs derivatives of omega' up to order p-1")
        extra = np.atleast_2d(np.asarray(omega_prime_jet, float))
        jet[1:p] = extra[: p - 1]
    fj = _f_jet(jet, mu, p - 1)
    X = state.x.T  # p x N, column i is x_i
    xj = [X]
    g0 = A @ X + np.outer(b, state.k_prime)
    for j in range(p):
        acc = np.zeros_like(X)
        for i in range(j + 1):
            gi = g0 if i == 0 else A @ xj[i]
            acc += comb(j, i) * gi * fj[j - i]
        xj.append(acc)
    dx = xj[1].T
    k_jet = np.array([c @ xj[j] for j in range(p + 1)])
    return dkp, dx, k_jet


def perceptron_step(theta, theta0: float, sample, gamma: float = 1.0, convention: str = "printed"):
    """Half-space classification update.

    A sample counts as correctly classified when ``y (theta^T phi + theta0) > 0``
    and then leaves the state unchanged.  Otherwise ``convention="printed"``
    applies ``theta -= gamma y phi`` (the sign as usually written for this
    dual formulation) and ``"classical"`` applies the Rosenblatt sign
    ``theta += gamma y phi``.  Only the classical sign reaches a separating
    state on separable data under this classification test.
    """
    phi, y = sample
    if y not in (1, -1):
        raise ValueError("label must be +1 or -1")
    if convention not in ("printed", "classical"):
        raise ValueError(f"unknown convention {convention!r}")
    theta = _vec(theta)
    phi = _vec(phi)
    if y * (float(theta @ phi) + theta0) > 0:
        return theta.copy(), float(theta0)
    s = -1.0 if convention == "printed" else 1.0
    return theta + s * gamma * y * phi, float(theta0 + s * gamma * y)


def perceptron_train(samples, theta=None, theta0=0.0, gamma=1.0, max_sweeps=1000, convention="classical"):
    """Sweep the update over a finite sample set until all are classified.

    Returns ``(theta, theta0, sweeps)``; raises RuntimeError if the sweep
    budget runs out.
    """
    samples = list(samples)
    theta = np.zeros(_vec(samples[0][0]).size) if theta is None else _vec(theta)
    for sweep in range(1, max_sweeps + 1):
        changed = False
        for s in samples:
            new_theta, new_theta0 = perceptron_step(theta, theta0, s, gamma, convention)
            if new_theta0 != theta0 or not np.array_equal(new_theta, theta):
                changed = True
            theta, theta0 = new_theta, new_theta0
        if not changed:
            return theta, theta0, sweep
    raise RuntimeError("no separating state reached within the sweep budget")
