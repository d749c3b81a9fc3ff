"""Stability and excitation certificates.

Lyapunov and KYL solves, SPR and hyperminimum-phase tests, passification
feasibility, persistent-excitation levels and the averaging spectral test.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InfeasibleError
from .model import (
    HURWITZ_MARGIN,
    Polynomial,
    StateSpaceLTI,
    TransferFunction,
    is_hurwitz,
)

LYAP_TOL = 1e-10
KYL_TOL = 1e-8
SPR_GRID = np.concatenate([[0.0], np.logspace(-3, 3, 400)])
SPR_EPSILONS = (1e-2, 1e-4, 1e-6)


def _sym(M):
    return 0.5 * (M + M.T)


def _check_spd(M, name):
    M = np.atleast_2d(np.asarray(M, float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(M, M.T, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(_sym(M)).min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return _sym(M)


@dataclass(frozen=True)
class LyapunovCertificate:
    P: np.ndarray
    Q: np.ndarray
    residual: float

    def to_dict(self):
        return {"P": self.P.tolist(), "Q": self.Q.tolist(), "residual": self.residual}


def lyapunov_solve(Am, Q) -> LyapunovCertificate:
    """Solve ``Am^T P + P Am = -Q`` for symmetric positive definite P."""
    Am = np.atleast_2d(np.asarray(Am, float))
    Q = _check_spd(Q, "Q")
    if Q.shape != Am.shape:
        raise ValueError("Am and Q dimensions differ")
    if not is_hurwitz(Am):
        raise InfeasibleError("Am is not Hurwitz, no positive definite solution")
    P = _sym(sla.solve_continuous_lyapunov(Am.T, -Q))
    res = float(np.linalg.norm(Am.T @ P + P @ Am + Q, "fro"))
    if np.linalg.eigvalsh(P).min() <= 0:
        raise InfeasibleError("Lyapunov solution is not positive definite")
    return LyapunovCertificate(P, Q, res)


@dataclass(frozen=True)
class SprResult:
    is_spr: bool
    margin: float
    epsilon: float | None

    def __bool__(self):
        return self.is_spr


def _shifted(W: TransferFunction, eps: float) -> TransferFunction:
    """W(s - eps) as a rational function of s."""
    def sub(p: Polynomial):
        out = Polynomial(0.0)
        base = Polynomial([-eps, 1.0])
        power = Polynomial(1.0)
        for c in p.coeffs:
            out = out + power * c
            power = power * base
        return out

    return TransferFunction(sub(W.num), sub(W.den), "s")


def _re_numerator(W: TransferFunction) -> np.ndarray:
    """Ascending coefficients (in w) of Re[N(jw) D(-jw)]."""
    jn = W.num.coeffs * (1j ** np.arange(W.num.coeffs.size))
    jd = W.den.coeffs * ((-1j) ** np.arange(W.den.coeffs.size))
    return np.convolve(jn, jd).real


def _spr_at(W: TransferFunction, eps: float):
    Ws = _shifted(W, eps)
    if not np.all(Ws.poles().real < 0):
        return False, -np.inf
    re = Ws(1j * SPR_GRID).real
    margin = float(re.min())
    if margin <= 0:
        return False, margin
    rd = Ws.relative_degree
    if rd == 0:
        ok = Ws.num.leading / Ws.den.leading > 0
    else:
        c = _re_numerator(Ws)
        k = 2 * Ws.den.degree - 2
        ok = c.size > k and c[k] > 0
    return bool(ok), margin


def spr_check(W: TransferFunction) -> SprResult:
    """Strict positive realness with a searched stability margin epsilon."""
    if W.domain != "s":
        raise ValueError("spr_check applies to continuous-time transfer functions")
    if not W.is_proper():
        raise ValueError("W is improper")
    if W.relative_degree > 1:
        re = W(1j * SPR_GRID).real if np.all(W.poles().real < 0) else np.array([-np.inf])
        return SprResult(False, float(re.min()), None)
    margin = -np.inf
    for eps in SPR_EPSILONS:
        ok, m = _spr_at(W, eps)
        if ok:
            return SprResult(True, m, eps)
        margin = max(margin, m)
    return SprResult(False, margin, None)


def _sym_basis(n):
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
    return basis


def _kyl_lmi(A, B, C):
    """Find symmetric P > 0 with PB = C and A^T P + P A < 0, or raise.

    P is parameterized on the affine subspace where PB = C holds exactly;
    the remaining freedom is searched with a small semidefinite program.
    """
    import cvxpy as cp

    A = np.atleast_2d(np.asarray(A, float))
    n = A.shape[0]
    B = np.asarray(B, float).reshape(n)
    C = np.asarray(C, float).reshape(n)
    basis = _sym_basis(n)
    M = np.column_stack([E @ B for E in basis])
    z0, *_ = np.linalg.lstsq(M, C, rcond=None)
    if np.abs(M @ z0 - C).max() > KYL_TOL:
        raise InfeasibleError("no symmetric P satisfies PB = C")
    P0 = sum(zi * E for zi, E in zip(z0, basis))
    N = sla.null_space(M)
    dirs = [sum(N[k, j] * basis[k] for k in range(len(basis))) for j in range(N.shape[1])]

    def lyap(P):
        return -(A.T @ P + P @ A)

    if dirs:
        z = cp.Variable(len(dirs))
        t = cp.Variable()
        P = P0 + sum(z[j] * D for j, D in enumerate(dirs))
        Qe = lyap(P0) + sum(z[j] * lyap(D) for j, D in enumerate(dirs))
        prob = cp.Problem(
            cp.Maximize(t),
            [P - t * np.eye(n) >> 0, _cp_sym(Qe) - t * np.eye(n) >> 0, t <= 1, cp.norm(z, "inf") <= 1e6],
        )
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.SolverError:
            prob.solve(solver=cp.SCS)
        if z.value is None:
            raise InfeasibleError(f"KYL conditions infeasible ({prob.status})")
        Pv = _sym(P0 + sum(z.value[j] * D for j, D in enumerate(dirs)))
    else:
        Pv = _sym(P0)
    Qv = _sym(lyap(Pv))
    if np.linalg.eigvalsh(Pv).min() <= 1e-10 or np.linalg.eigvalsh(Qv).min() <= 1e-9:
        raise InfeasibleError("KYL conditions infeasible (no positive definite P, Q)")
    if np.abs(Pv @ B - C).max() > KYL_TOL:
        raise InfeasibleError("PB = C residual above tolerance")
    return Pv, Qv


def _cp_sym(X):
    return 0.5 * (X + X.T)


def kyl_solve(A, B, C) -> np.ndarray:
    """Matrix P > 0 with ``A^T P + P A = -Q`` (Q > 0) and ``PB = C``."""
    sys = StateSpaceLTI(A, np.asarray(B, float).reshape(-1, 1), np.asarray(C, float).reshape(1, -1))
    if not sys.is_minimal():
        raise ValueError("realization is not minimal")
    P, _ = _kyl_lmi(sys.A, sys.B, sys.C)
    return P


def hyperminimum_phase_check(W: TransferFunction) -> bool:
    """Relative degree one, zeros in the open left half plane, positive high-frequency gain."""
    if W.relative_degree != 1 or W.num.is_zero():
        return False
    if W.num.degree > 0 and not np.all(W.zeros().real < 0):
        return False
    return bool(W.high_frequency_gain > 0)


def passification_feasible(A, B, C, g):
    """Return ``(P, theta)`` with ``A_theta^T P + P A_theta < 0`` and ``PB = Cg``.

    ``A_theta = A + B theta^T C^T`` for output ``y = C^T x``.  The feedback is
    searched along ``theta = -kappa g`` (high-gain output feedback), which
    succeeds exactly when ``(Cg)^T (sI - A)^{-1} B`` is hyperminimum-phase.
    """
    A = np.atleast_2d(np.asarray(A, float))
    n = A.shape[0]
    B = np.asarray(B, float).reshape(n)
    C = np.asarray(C, float).reshape(n, -1)
    g = np.asarray(g, float).reshape(-1)
    if C.shape[1] != g.size:
        raise ValueError("C columns must match g length")
    Cg = C @ g
    Zg = StateSpaceLTI(A, B, Cg.reshape(1, -1)).transfer_function()
    if not hyperminimum_phase_check(Zg):
        raise InfeasibleError("Z_g is not hyperminimum-phase")
    for kappa in [0.0] + [2.0 ** i for i in range(21)]:
        theta = -kappa * g
        A_theta = A + np.outer(B, C @ theta)
        if not is_hurwitz(A_theta, HURWITZ_MARGIN):
            continue
        try:
            P, Qv = _kyl_lmi(A_theta, B, Cg)
        except InfeasibleError:
            continue
        if np.linalg.eigvalsh(_sym(A_theta.T @ P + P @ A_theta)).max() < -1e-9:
            return P, theta
    raise InfeasibleError("no passifying feedback found along theta = -kappa g")


@dataclass(frozen=True)
class PeReport:
    alpha: float
    T: float
    epsilon0: float | None = None
    delta0: float | None = None
    window_alphas: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"alpha": self.alpha, "T": self.T, "epsilon0": self.epsilon0, "delta0": self.delta0}


def _as_samples(samples):
    X = np.asarray(samples, float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("samples must be (N,) or (N, n)")
    return X


class _PiecewiseIntegral:
    """Exact running integral of the linear interpolant of sampled values."""

    def __init__(self, F, h):
        self.F, self.h = F, h
        inc = 0.5 * h * (F[1:] + F[:-1])
        self.cum = np.concatenate([np.zeros((1,) + F.shape[1:]), np.cumsum(inc, axis=0)])

    def __call__(self, t):
        h, F = self.h, self.F
        i = np.clip(np.floor(t / h + 1e-9).astype(int), 0, len(F) - 2)
        s = np.clip(t - i * h, 0.0, h)
        s_ = s.reshape(s.shape + (1,) * (F.ndim - 1))
        return self.cum[i] + s_ * F[i] + s_ ** 2 / (2 * h) * (F[i + 1] - F[i])


def _directions(n, rng_seed=0, count=2000):
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        a = np.linspace(0, np.pi, 720, endpoint=False)
        return np.column_stack([np.cos(a), np.sin(a)])
    W = np.random.default_rng(rng_seed).standard_normal((count, n))
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def pe_level(samples, T, dt=None, discrete=False, delta0=None, with_epsilon0=False) -> PeReport:
    """Excitation level of a sampled regressor.

    Continuous mode: ``alpha = min_t lambda_min(int_t^{t+T} phi phi^T)`` over
    window starts spaced ``T/10`` apart, integrating the linear interpolant
    of the samples (spacing ``dt``).  Discrete mode: ``T`` is an integer
    number of samples and every window start is scanned.

    With ``with_epsilon0`` the directional level of the robustness
    definition is also computed, using inner windows of length ``delta0``
    (default ``T``).
    """
    X = _as_samples(samples)
    N, n = X.shape
    outer = X[:, :, None] * X[:, None, :]
    if discrete:
        T = int(T)
        if T < 1:
            raise ValueError("window must be at least one sample")
        if N < 2 * T:
            raise ValueError(f"record of {N} samples shorter than 2T = {2 * T}")
        cum = np.concatenate([np.zeros((1, n, n)), np.cumsum(outer, axis=0)])
        grams = cum[T:] - cum[:-T]
        eps0 = None
        if with_epsilon0:
            d0 = T if delta0 is None else int(delta0)
            eps0 = _epsilon0_discrete(X, T, d0)
    else:
        if dt is None or dt <= 0:
            raise ValueError("continuous mode needs a positive sampling step dt")
        span = (N - 1) * dt
        if span < 2 * T * (1 - 1e-9):
            raise ValueError(f"record span {span:g} shorter than 2T = {2 * T:g}")
        integ = _PiecewiseIntegral(outer, dt)
        starts = np.arange(0.0, span - T + 1e-9 * T, T / 10.0)
        grams = integ(starts + T) - integ(starts)
        eps0 = None
        if with_epsilon0:
            d0 = T if delta0 is None else float(delta0)
            eps0 = _epsilon0_continuous(X, dt, T, d0, starts)
    lam = np.linalg.eigvalsh(_sym_batch(grams))[:, 0]
    alpha = max(float(lam.min()), 0.0)
    return PeReport(alpha, T, eps0, delta0 if delta0 is not None else (T if with_epsilon0 else None), lam)


def _sym_batch(G):
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def _epsilon0_from_vectors(V_by_window):
    """min over windows and unit w of max over inner windows of |v.w|."""
    n = V_by_window[0].shape[1]
    W = _directions(n)
    best = np.inf
    for V in V_by_window:
        if n == 1:
            level = np.abs(V[:, 0]).max()
        else:
            level = np.abs(V @ W.T).max(axis=0).min()
        best = min(best, float(level))
    return best


def _epsilon0_continuous(X, dt, T0, delta0, starts):
    if not 0 < delta0 <= T0:
        raise ValueError("delta0 must lie in (0, T0]")
    integ = _PiecewiseIntegral(X, dt)
    inner = np.arange(0.0, T0 - delta0 + 1e-12, dt) if delta0 < T0 else np.zeros(1)
    Vs = []
    for t in starts:
        t2 = t + inner
        Vs.append((integ(t2 + delta0) - integ(t2)) / T0)
    return _epsilon0_from_vectors(Vs)


def _epsilon0_discrete(X, T0, delta0):
    if not 0 < delta0 <= T0:
        raise ValueError("delta0 must lie in (0, T0]")
    cum = np.concatenate([np.zeros((1, X.shape[1])), np.cumsum(X, axis=0)])
    Vs = []
    for t in range(0, X.shape[0] - T0 + 1):
        t2 = np.arange(t, t + T0 - delta0 + 1)
        Vs.append((cum[t2 + delta0] - cum[t2]) / T0)
    return _epsilon0_from_vectors(Vs)


def robustness_margin(P, Q, vmax: float) -> float:
    """Required excitation level ``k0 * vmax`` with ``k0 = 2 lmax(P) / lmin(Q)``."""
    P = _check_spd(P, "P")
    Q = _check_spd(Q, "Q")
    if vmax < 0:
        raise ValueError("vmax must be nonnegative")
    k0 = 2.0 * np.linalg.eigvalsh(P).max() / np.linalg.eigvalsh(Q).min()
    return float(k0 * vmax)


def averaging_stability_check(Wm_bar: TransferFunction, spectrum) -> bool:
    """Spectral test for exponential stability of the averaged error system.

    ``spectrum`` is a list of ``(nu, Omega)`` lines of an almost-periodic
    regressor.  Returns True iff the symmetric matrix
    ``sum_k Re Wm_bar(i nu_k) Re[Omega_k conj(Omega_k)^T]`` is positive definite.
    """
    if not Wm_bar.is_stable():
        raise ValueError("Wm_bar must be stable")
    lines = [(float(nu), np.atleast_1d(np.asarray(om, complex))) for nu, om in spectrum]
    if not lines:
        raise ValueError("empty spectrum")
    n = lines[0][1].size
    gram = np.zeros((n, n))
    M = np.zeros((n, n))
    for nu, om in lines:
        R = np.real(np.outer(om, om.conj()))
        gram += R
        M += float(np.real(Wm_bar(1j * nu))) * R
    if np.linalg.eigvalsh(_sym(gram)).min() <= 1e-12 * max(1.0, np.abs(gram).max()):
        raise ValueError("spectrum does not excite every direction (singular Gram)")
    return bool(np.linalg.eigvals(M).real.min() > 0)
