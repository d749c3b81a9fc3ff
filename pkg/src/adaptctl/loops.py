"""Continuous-time closed loops: plant + reference model + adaptive law.

Every loop packs its states into one vector, exposes ``rhs``/``observe``
for :func:`adaptctl.sim.simulate_ct` and logs a Lyapunov value ``V`` when
one is available for the nominal (disturbance-free) case.
"""
from __future__ import annotations

from math import comb

import numpy as np

from . import adapt_ct as act
from .analysis import _kyl_lmi, lyapunov_solve, passification_feasible
from .estimate import _f_jet, tuner_filter
from .model import (
    Polynomial,
    TransferFunction,
    filter_numerators,
    matching_solve,
    nonminimal_realize,
)
from .sim import ClosedLoop


def make_reference(spec) -> callable:
    """Reference signal from a config block (or a bare number)."""
    if spec is None:
        return lambda t: 0.0
    if isinstance(spec, (int, float)):
        c = float(spec)
        return lambda t: c
    kind = spec.get("kind", "constant")
    if kind == "constant":
        c = float(spec.get("value", 1.0))
        return lambda t: c
    if kind == "sines":
        amps = np.asarray(spec["amplitudes"], float)
        freqs = np.asarray(spec["freqs"], float)
        off = float(spec.get("offset", 0.0))
        return lambda t: off + float(amps @ np.sin(freqs * t))
    if kind == "square":
        period, amp = float(spec["period"]), float(spec.get("amplitude", 1.0))
        off = float(spec.get("offset", 0.0))
        return lambda t: off + (amp if (t % period) < 0.5 * period else -amp)
    raise ValueError(f"unknown reference kind {kind!r}")


def _gain_inv(G):
    return 1.0 / G if np.isscalar(G) else np.linalg.inv(G)


def _quad(Ginv, v):
    return Ginv * float(v @ v) if np.isscalar(Ginv) else float(v @ Ginv @ v)


def _gain_arr(G):
    G = np.asarray(G, float)
    return float(G) if G.ndim == 0 else G


ROBUST_SIGMA = 0.05


class MracStateLoop(ClosedLoop):
    """State-feedback MRAC, optionally with a robust modification and a state disturbance.

    Plant ``x' = Ap x + bp u + v``, model ``xm' = Am xm + bm r``,
    ``u = theta^T x + k r``.  With ``adapt_k=False`` the feedforward gain is
    held at ``k0`` (which must then satisfy ``bp k0 = bm``).
    """

    def __init__(self, Ap, bp, Am, bm, Q, Gamma, gamma_k=1.0, reference=None, theta0=None, k0=0.0,
                 x0=None, xm0=None, adapt_k=True, robust=None):
        self.Ap, self.bp = np.atleast_2d(np.asarray(Ap, float)), np.asarray(bp, float).reshape(-1)
        self.Am, self.bm = np.atleast_2d(np.asarray(Am, float)), np.asarray(bm, float).reshape(-1)
        n = self.n = self.bp.size
        self.theta_star, self.k_star = matching_solve(self.Ap, self.bp, self.Am, self.bm)
        self.sign = 1 if self.k_star > 0 else -1
        self.cert = lyapunov_solve(self.Am, np.atleast_2d(np.asarray(Q, float)))
        self.P = self.cert.P
        self.Pbm = self.P @ self.bm
        self.Gamma = _gain_arr(Gamma)
        self.Ginv = _gain_inv(self.Gamma)
        self.gamma_k = float(gamma_k)
        self.adapt_k = adapt_k
        if not adapt_k and abs(float(k0) - self.k_star) > 1e-10:
            raise ValueError("fixed feedforward gain must equal k* (bp k0 = bm)")
        self.r = make_reference(reference)
        self.theta0 = np.zeros(n) if theta0 is None else np.asarray(theta0, float)
        self.k0 = float(k0)
        self.x0 = np.zeros(n) if x0 is None else np.asarray(x0, float)
        self.xm0 = np.zeros(n) if xm0 is None else np.asarray(xm0, float)
        self.robust = dict(robust or {"mode": "none"})
        if self.robust.get("mode", "none") not in act.ROBUST_MODES:
            raise ValueError(f"unknown robust mode {self.robust['mode']!r}")
        # defaults: sigma = 0.05, dead zone twice the disturbance bound estimate
        self.robust.setdefault("sigma", ROBUST_SIGMA)
        if "e0" not in self.robust and "bound" in self.robust:
            self.robust["e0"] = 2.0 * float(self.robust["bound"])
        self.disturbance_dim = n
        self.has_lyapunov = True
        self.channels = (
            [f"x{i}" for i in range(n)] + [f"xm{i}" for i in range(n)] + ["e_norm"]
            + [f"theta{i}" for i in range(n)] + ["k", "u", "r", "V", "param_err", "drift"]
        )

    def initial_state(self):
        return np.concatenate([self.x0, self.xm0, self.theta0, [self.k0]])

    def _split(self, z):
        n = self.n
        return z[:n], z[n:2 * n], z[2 * n:3 * n], z[3 * n]

    def rhs(self, t, z, d):
        x, xm, theta, k = self._split(z)
        r = self.r(t)
        e = x - xm
        s = float(e @ self.Pbm)
        u = float(theta @ x) + k * r
        g = s * x
        th_dot = -self.sign * (self.Gamma * g if np.isscalar(self.Gamma) else self.Gamma @ g)
        mode = self.robust.get("mode", "none")
        if mode != "none":
            th_dot = act.robust_mod(mode, th_dot, theta, e, sigma=self.robust.get("sigma"), gamma=self.Gamma,
                                    ePb=s, e0=self.robust.get("e0"), radius=self.robust.get("radius"))
        k_dot = -self.sign * self.gamma_k * s * r if self.adapt_k else 0.0
        return np.concatenate([self.Ap @ x + self.bp * u + d, self.Am @ xm + self.bm * r, th_dot, [k_dot]])

    def project(self, z):
        if self.robust.get("mode") == "projection":
            n = self.n
            z[2 * n:3 * n] = act.project_ball(z[2 * n:3 * n], self.robust["radius"])
        return z

    def lyapunov(self, z):
        x, xm, theta, k = self._split(z)
        e = x - xm
        tt = theta - self.theta_star
        V = float(e @ self.P @ e) + _quad(self.Ginv, tt) / abs(self.k_star)
        if self.adapt_k:
            V += (k - self.k_star) ** 2 / (self.gamma_k * abs(self.k_star))
        return V

    def observe(self, t, z, d):
        x, xm, theta, k = self._split(z)
        r = self.r(t)
        e = x - xm
        perr = float(np.linalg.norm(theta - self.theta_star))
        if self.adapt_k:
            perr += abs(k - self.k_star)
        drift = float(np.linalg.norm(theta) / np.linalg.norm(self.theta_star)) if np.any(self.theta_star) else 0.0
        return np.concatenate([x, xm, [np.linalg.norm(e)], theta,
                               [k, float(theta @ x) + k * r, r, self.lyapunov(z), perr, drift]])

    def fastest_rate(self):
        return float(np.abs(np.linalg.eigvals(self.Am)).max())


def companion(poly: Polynomial):
    """Controllable companion pair ``(Lambda, ell)`` with char polynomial ``poly`` (monic)."""
    a = poly.coeffs / poly.leading
    m = poly.degree
    L = np.zeros((m, m))
    if m:
        L[:-1, 1:] = np.eye(m - 1)
        L[-1, :] = -a[:-1]
    ell = np.zeros(m)
    if m:
        ell[-1] = 1.0
    return L, ell


def output_matching(Wp: TransferFunction, Wm: TransferFunction, lam0: Polynomial):
    """Matching parameters for ``u = theta1^T w1 + theta2^T w2 + theta0 y + k r``.

    The filter polynomial is ``lambda = lam0 * Zm`` (degree n-1).  Returns
    ``(theta_bar_star, lambda_poly)`` with ``theta_bar_star = [theta1, theta2,
    theta0, k*]``.
    """
    n = Wp.den.degree
    kp, km = Wp.high_frequency_gain, Wm.high_frequency_gain
    Zp, Rp = Wp.num.monic(), Wp.den.monic()
    Zm, Rm = Wm.num.monic(), Wm.den.monic()
    if Wp.relative_degree != Wm.relative_degree:
        raise ValueError("plant and model relative degrees differ")
    if Rm.degree > n:
        raise ValueError("model order exceeds plant order")
    lam = lam0.monic() * Zm
    if lam.degree != n - 1:
        raise ValueError(f"filter polynomial must have degree {n - 1}, got {lam.degree}")
    Lam, ell = companion(lam)
    alphas = filter_numerators(Lam, ell) if n > 1 else []
    rhs = (Zp * lam0.monic() * Rm - lam * Rp).coeffs
    cols = [(-(a * Rp)).coeffs for a in alphas] + [(-(a * Zp) * kp).coeffs for a in alphas]
    cols.append((-(Zp * lam) * kp).coeffs)
    L = 2 * n - 1
    M = np.zeros((L, len(cols)))
    for j, c in enumerate(cols):
        M[: min(L, c.size), j] = c[:L]
    b = np.zeros(L)
    b[: min(L, rhs.size)] = rhs[:L]
    if rhs.size > L and np.any(np.abs(rhs[L:]) > 1e-9):
        raise ValueError("matching identity has unmatched high-order terms")
    sol, *_ = np.linalg.lstsq(M, b, rcond=None)
    if np.abs(M @ sol - b).max() > 1e-8:
        raise ValueError("output matching equations are not solvable")
    return np.concatenate([sol, [km / kp]]), lam


class _OutputFeedbackPlant:
    """Plant plus input/output filters; ``omega_bar = [w1, w2, y, r]``."""

    def __init__(self, Wp: TransferFunction, lam: Polynomial):
        ss = Wp.to_state_space()
        self.Ap, self.bp, self.cp = np.asarray(ss.A), np.asarray(ss.B).reshape(-1), np.asarray(ss.C).reshape(-1)
        self.n = self.bp.size
        self.Lam, self.ell = companion(lam)
        nf = self.nf = self.Lam.shape[0]
        N = self.N = self.n + 2 * nf
        A = np.zeros((N, N))
        A[: self.n, : self.n] = self.Ap
        A[self.n: self.n + nf, self.n: self.n + nf] = self.Lam
        A[self.n + nf:, self.n + nf:] = self.Lam
        A[self.n + nf:, : self.n] = np.outer(self.ell, self.cp)
        self.A = A
        self.Bu = np.concatenate([self.bp, self.ell, np.zeros(nf)])
        Om = np.zeros((2 * nf + 1, N))
        Om[: 2 * nf, self.n:] = np.eye(2 * nf)
        Om[2 * nf, : self.n] = self.cp
        self.Omega = Om  # z -> omega (without r)
        self.Cy = np.concatenate([self.cp, np.zeros(2 * nf)])

    def omega_bar(self, z, r):
        return np.concatenate([self.Omega @ z, [r]])

    def closed(self, theta_bar):
        """Closed-loop matrix with frozen ``theta`` (feedback part)."""
        return self.A + np.outer(self.Bu, theta_bar[:-1] @ self.Omega)


class OutputSprLoop(ClosedLoop):
    """Output-feedback MRAC with an SPR reference model (relative degree one)."""

    def __init__(self, Wp, Wm, lam0=(1.0,), gamma=1.0, reference=None, theta0=None, x0=None):
        self.Wp, self.Wm = Wp, Wm
        act.require_spr(Wm)
        lam0 = lam0 if isinstance(lam0, Polynomial) else Polynomial(lam0)
        self.theta_star, lam = output_matching(Wp, Wm, lam0)
        self.k_star = self.theta_star[-1]
        self.sign = 1 if self.k_star > 0 else -1
        self.pl = _OutputFeedbackPlant(Wp, lam)
        self.gamma = float(gamma)
        self.r = make_reference(reference)
        self.m = self.theta_star.size
        self.theta0 = np.zeros(self.m) if theta0 is None else np.asarray(theta0, float)
        N = self.pl.N
        self.x0 = np.zeros(N) if x0 is None else np.concatenate([np.asarray(x0, float), np.zeros(N - len(x0))])
        self.Ac = self.pl.closed(self.theta_star)
        P, _ = _kyl_lmi(self.Ac, self.k_star * self.pl.Bu, self.pl.Cy)
        self.P = P
        self.has_lyapunov = True
        self.channels = ["y", "y_m", "e_y", "u", "r"] + [f"theta{i}" for i in range(self.m)] + ["V", "param_err"]

    def initial_state(self):
        return np.concatenate([self.x0, np.zeros(self.pl.N), self.theta0])

    def _split(self, z):
        N = self.pl.N
        return z[:N], z[N:2 * N], z[2 * N:]

    def rhs(self, t, z, d):
        zp, zm, th = self._split(z)
        r = self.r(t)
        wb = self.pl.omega_bar(zp, r)
        wbm = self.pl.omega_bar(zm, r)
        e_y = float(self.pl.Cy @ (zp - zm))
        u, th_dot_c, _ = act.mrac_output_spr_rhs(th[:-1], th[-1], e_y, wb[:-1], r, self.sign)
        u_m = float(self.theta_star @ wbm)
        dz = self.pl.A @ zp + self.pl.Bu * u
        dzm = self.pl.A @ zm + self.pl.Bu * u_m
        th_dot = -self.sign * self.gamma * e_y * wb
        return np.concatenate([dz, dzm, th_dot])

    def lyapunov(self, z):
        zp, zm, th = self._split(z)
        e = zp - zm
        tt = th - self.theta_star
        return float(e @ self.P @ e) + float(tt @ tt) / (self.gamma * abs(self.k_star))

    def observe(self, t, z, d):
        zp, zm, th = self._split(z)
        r = self.r(t)
        y, ym = float(self.pl.Cy @ zp), float(self.pl.Cy @ zm)
        u = float(th @ self.pl.omega_bar(zp, r))
        return np.concatenate([[y, ym, y - ym, u, r], th, [self.lyapunov(z), np.linalg.norm(th - self.theta_star)]])

    def fastest_rate(self):
        return float(np.abs(np.linalg.eigvals(self.Ac)).max())


class AugmentedErrorLoop(ClosedLoop):
    """Output-feedback MRAC with the augmented error for a non-SPR reference model.

    Requires equal high-frequency gains of plant and model (``k* = 1``).
    With ``adapt=False`` the parameters stay at ``theta0``.
    """

    def __init__(self, Wp, Wm, lam0=(1.0,), gamma=1.0, reference=None, theta0=None, adapt=True):
        lam0 = lam0 if isinstance(lam0, Polynomial) else Polynomial(lam0)
        self.theta_star, lam = output_matching(Wp, Wm, lam0)
        if abs(self.theta_star[-1] - 1.0) > 1e-12:
            raise ValueError("augmented-error loop needs equal plant and model high-frequency gains")
        self.pl = _OutputFeedbackPlant(Wp, lam)
        ssm = Wm.to_state_space()
        self.Aw, self.bw, self.cw = np.asarray(ssm.A), np.asarray(ssm.B).reshape(-1), np.asarray(ssm.C).reshape(-1)
        self.nw = self.bw.size
        self.gamma = float(gamma)
        self.adapt = adapt
        self.r = make_reference(reference)
        self.m = self.theta_star.size
        self.theta0 = np.zeros(self.m) if theta0 is None else np.asarray(theta0, float)
        self.has_lyapunov = adapt
        self.channels = (["y", "y_m", "e1", "e2", "eps1", "u", "r"] + [f"theta{i}" for i in range(self.m)]
                         + ["V", "param_err"])
        N, nw, m = self.pl.N, self.nw, self.m
        self._sl = np.cumsum([0, N, nw, m * nw, nw, m])

    def initial_state(self):
        z = np.zeros(self._sl[-1])
        z[self._sl[4]:] = self.theta0
        return z

    def _split(self, z):
        s = self._sl
        return (z[s[0]:s[1]], z[s[1]:s[2]], z[s[2]:s[3]].reshape(self.m, self.nw),
                z[s[3]:s[4]], z[s[4]:s[5]])

    def _signals(self, t, z):
        zp, xm, Z, xq, th = self._split(z)
        r = self.r(t)
        wb = self.pl.omega_bar(zp, r)
        zeta = Z @ self.cw
        e1 = float(self.pl.Cy @ zp) - float(self.cw @ xm)
        eps1, th_dot, e2 = act.augmented_error_rhs(th, wb, zeta, float(self.cw @ xq), e1)
        return zp, xm, Z, xq, th, r, wb, zeta, e1, e2, eps1, th_dot

    def rhs(self, t, z, d):
        zp, xm, Z, xq, th, r, wb, zeta, e1, e2, eps1, th_dot = self._signals(t, z)
        u = float(th @ wb)
        dz = self.pl.A @ zp + self.pl.Bu * u
        dxm = self.Aw @ xm + self.bw * r
        dZ = Z @ self.Aw.T + np.outer(wb, self.bw)
        dxq = self.Aw @ xq + self.bw * u
        dth = self.gamma * th_dot if self.adapt else np.zeros(self.m)
        return np.concatenate([dz, dxm, dZ.ravel(), dxq, dth])

    def observe(self, t, z, d):
        zp, xm, Z, xq, th, r, wb, zeta, e1, e2, eps1, _ = self._signals(t, z)
        tt = th - self.theta_star
        y = float(self.pl.Cy @ zp)
        return np.concatenate([[y, float(self.cw @ xm), e1, e2, eps1, float(th @ wb), r], th,
                               [float(tt @ tt) / self.gamma, np.linalg.norm(tt)]])

    def fastest_rate(self):
        return float(np.abs(np.linalg.eigvals(self.pl.closed(self.theta_star))).max())


class HotOutputLoop(ClosedLoop):
    """Output feedback through a high-order tuner for relative degree ``p + 1``.

    Plant ``y = Wp[u]`` with unit high-frequency gain.  The controller
    filters ``w1 = (1/lambda)[u]`` and uses ``omega = [w1, y]``,
    ``u = sum_i C(p,i) k^(i)^T d_i + r`` with ``d_i = omega/(s+a)^i``.
    The reference output is the closed loop under the nominal gains
    ``k_nom`` (so ``Wm = Wcl (s+a)^p``).
    """

    def __init__(self, Wp, lam, a, alpha, k_nom, mu=1.0, reference=None, k0=None, gamma=1.0):
        self.p = Wp.relative_degree - 1
        if self.p < 1:
            raise ValueError("high-order tuner loop needs relative degree >= 2")
        lam = lam if isinstance(lam, Polynomial) else Polynomial(lam)
        if lam.degree != self.p:
            raise ValueError("filter polynomial degree must equal relative degree - 1")
        alpha = alpha if isinstance(alpha, Polynomial) else Polynomial(alpha)
        if alpha.degree != self.p:
            raise ValueError("alpha must have degree p")
        ss = Wp.to_state_space()
        self.Ap, self.bp, self.cp = np.asarray(ss.A), np.asarray(ss.B).reshape(-1), np.asarray(ss.C).reshape(-1)
        self.n = self.bp.size
        self.Lam, self.ell = companion(lam)
        self.nf = self.Lam.shape[0]
        self.q = self.nf + 1  # regressor dimension
        self.a = float(a)
        self.Af, self.bf, self.cf = tuner_filter(alpha)
        self.alpha = alpha
        self.mu = float(mu)
        self.gamma = float(gamma)
        self.k_nom = np.asarray(k_nom, float)
        self.r = make_reference(reference)
        self.k0 = self.k_nom * 0 if k0 is None else np.asarray(k0, float)
        p, q, n, nf = self.p, self.q, self.n, self.nf
        # plant, w1, chain d_1..d_p (each q), tuner k' (q), x (q*p), reference plant, reference w1
        self._sl = np.cumsum([0, n, nf, p * q, q, q * p, n, nf])
        Acl = np.zeros((n + nf, n + nf))
        Acl[:n, :n] = self.Ap + np.outer(self.bp, self.k_nom[-1] * self.cp)
        Acl[:n, n:] = np.outer(self.bp, self.k_nom[:-1])
        Acl[n:, :n] = np.outer(self.ell, self.k_nom[-1] * self.cp)
        Acl[n:, n:] = self.Lam + np.outer(self.ell, self.k_nom[:-1])
        if not np.all(np.linalg.eigvals(Acl).real < 0):
            raise ValueError("nominal gains do not stabilize the plant")
        self.Acl = Acl
        self.Bcl = np.concatenate([self.bp, self.ell])
        self.wm = self._reference_model()
        self.channels = ["y", "y_m", "e1", "u", "r"] + [f"k{i}" for i in range(q)] + [f"kp{i}" for i in range(q)]

    def _reference_model(self):
        """``Wm = Wcl (s+a)^p`` for reporting SPR-ness."""
        from scipy import signal

        C = np.concatenate([self.cp, np.zeros(self.nf)])
        num, den = signal.ss2tf(self.Acl, self.Bcl.reshape(-1, 1), C.reshape(1, -1), np.zeros((1, 1)))
        num = num[0]
        num = num[np.argmax(np.abs(num) > 1e-9 * np.abs(num).max()):]
        wcl = TransferFunction(Polynomial(num[::-1]), Polynomial(den[::-1]))
        sa = Polynomial([self.a, 1.0])
        factor = Polynomial(1.0)
        for _ in range(self.p):
            factor = factor * sa
        return TransferFunction(wcl.num * factor, wcl.den)

    def initial_state(self):
        z = np.zeros(self._sl[-1])
        z[self._sl[3]:self._sl[4]] = self.k0
        # start the tuner filter at its DC value so k(0) = k'(0)
        x = np.tile(np.linalg.solve(-self.Af, self.bf), (self.q, 1)) * self.k0[:, None]
        z[self._sl[4]:self._sl[5]] = x.ravel()
        return z

    def _split(self, z):
        s = self._sl
        return (z[s[0]:s[1]], z[s[1]:s[2]], z[s[2]:s[3]].reshape(self.p, self.q), z[s[3]:s[4]],
                z[s[4]:s[5]].reshape(self.q, self.p), z[s[5]:s[6]], z[s[6]:s[7]])

    def _core(self, t, z):
        xp, w1, D, kp, X, xr, w1r = self._split(z)
        r = self.r(t)
        y = float(self.cp @ xp)
        omega = np.concatenate([w1, [y]])
        d = np.vstack([omega, D])
        ym = float(self.cp @ xr)
        e1 = y - ym
        # derivatives of omega' = d_p of order 1..p-1 from the filter chain
        jet = None
        if self.p >= 2:
            jet = np.array([sum(comb(j, i) * (-self.a) ** (j - i) * d[self.p - i] for i in range(j + 1))
                            for j in range(1, self.p)])
        st = _FastTuner(kp, X, self.mu, self.Af, self.bf, self.cf, self.p)
        dkp, dx, k_jet = _hot_fast(st, self.gamma * e1, d[self.p], jet)
        u = act.binomial_control(k_jet, d, r)
        return xp, w1, D, kp, X, xr, w1r, r, y, omega, d, ym, e1, u, dkp, dx, k_jet

    def rhs(self, t, z, d_ext):
        xp, w1, D, kp, X, xr, w1r, r, y, omega, d, ym, e1, u, dkp, dx, k_jet = self._core(t, z)
        dxp = self.Ap @ xp + self.bp * u
        dw1 = self.Lam @ w1 + self.ell * u
        dD = np.empty_like(D)
        prev = omega
        for i in range(self.p):
            dD[i] = -self.a * D[i] + prev
            prev = D[i]
        xcl = np.concatenate([xr, w1r])
        dcl = self.Acl @ xcl + self.Bcl * r
        return np.concatenate([dxp, dw1, dD.ravel(), dkp, dx.ravel(), dcl])

    def observe(self, t, z, d_ext):
        xp, w1, D, kp, X, xr, w1r, r, y, omega, d, ym, e1, u, dkp, dx, k_jet = self._core(t, z)
        return np.concatenate([[y, ym, e1, u, r], k_jet[0], kp])

    def fastest_rate(self):
        return float(np.abs(np.linalg.eigvals(self.Acl)).max())


class _FastTuner:
    """Unchecked tuner state for use inside integration loops."""

    __slots__ = ("k_prime", "x", "mu", "A", "b", "c", "p")

    def __init__(self, k_prime, x, mu, A, b, c, p):
        self.k_prime, self.x, self.mu, self.A, self.b, self.c, self.p = k_prime, x, mu, A, b, c, p


def _hot_fast(st, e1, w, jet):
    p, N = st.p, st.k_prime.size
    dkp = -e1 * w
    wj = np.zeros((p, N))
    wj[0] = w
    if p >= 2:
        wj[1:p] = jet[: p - 1]
    fj = _f_jet(wj, st.mu, p - 1)
    X = st.x.T
    xj = [X]
    g0 = st.A @ X + np.outer(st.b, st.k_prime)
    for j in range(p):
        acc = np.zeros_like(X)
        for i in range(j + 1):
            gi = g0 if i == 0 else st.A @ xj[i]
            acc = acc + comb(j, i) * gi * fj[j - i]
        xj.append(acc)
    k_jet = np.array([st.c @ xj[j] for j in range(p + 1)])
    return dkp, xj[1].T, k_jet


class ObserverLoop(ClosedLoop):
    """Adaptive observer identifying a stable SISO plant from input/output data."""

    def __init__(self, Wp, Lam, ell, Gamma=1.0, u=None, theta0=None):
        self.Wp = Wp
        ss = Wp.to_state_space()
        self.Ap, self.bp, self.cp = np.asarray(ss.A), np.asarray(ss.B).reshape(-1), np.asarray(ss.C).reshape(-1)
        self.Lam = np.atleast_2d(np.asarray(Lam, float))
        self.ell = np.asarray(ell, float).reshape(-1)
        t1, t2 = nonminimal_realize(Wp, self.Lam, self.ell)
        self.theta_true = np.concatenate([t1, t2])
        self.nt = self.theta_true.size
        self.Gamma = _gain_arr(Gamma)
        self.u = make_reference(u)
        self.theta0 = np.zeros(self.nt) if theta0 is None else np.asarray(theta0, float)
        self.n = self.bp.size
        self.channels = (["y", "y_hat", "u"] + [f"theta{i}" for i in range(self.nt)]
                         + [f"omega{i}" for i in range(self.nt)] + ["param_err", "V"])
        self.has_lyapunov = True

    def initial_state(self):
        return np.concatenate([np.zeros(self.n), np.zeros(self.nt), self.theta0])

    def rhs(self, t, z, d):
        n, m = self.n, self.nt
        xp, om, th = z[:n], z[n:n + m], z[n + m:]
        u = self.u(t)
        y = float(self.cp @ xp)
        h = m // 2
        dw1 = self.Lam @ om[:h] + self.ell * u
        dw2 = self.Lam @ om[h:] + self.ell * y
        err = float(th @ om) - y
        g = err * om
        dth = -(self.Gamma * g if np.isscalar(self.Gamma) else self.Gamma @ g)
        return np.concatenate([self.Ap @ xp + self.bp * u, dw1, dw2, dth])

    def observe(self, t, z, d):
        n, m = self.n, self.nt
        xp, om, th = z[:n], z[n:n + m], z[n + m:]
        tt = th - self.theta_true
        return np.concatenate([[float(self.cp @ xp), float(th @ om), self.u(t)], th, om,
                               [np.linalg.norm(tt), _quad(_gain_inv(self.Gamma), tt)]])


class PassificationLoop(ClosedLoop):
    """Adaptive output feedback ``u = theta^T y`` for a passifiable plant."""

    def __init__(self, A, B, C, g, Gamma=1.0, x0=None, theta0=None):
        self.A = np.atleast_2d(np.asarray(A, float))
        n = self.n = self.A.shape[0]
        self.B = np.asarray(B, float).reshape(n)
        self.C = np.asarray(C, float).reshape(n, -1)
        self.g = np.asarray(g, float).reshape(-1)
        self.P, self.theta_star = passification_feasible(self.A, self.B, self.C, self.g)
        self.Gamma = _gain_arr(Gamma)
        self.Ginv = _gain_inv(self.Gamma)
        self.l = self.g.size
        self.x0 = np.ones(n) if x0 is None else np.asarray(x0, float)
        self.theta0 = np.zeros(self.l) if theta0 is None else np.asarray(theta0, float)
        self.has_lyapunov = True
        self.channels = [f"x{i}" for i in range(n)] + [f"theta{i}" for i in range(self.l)] + ["u", "V", "x_norm"]

    def initial_state(self):
        return np.concatenate([self.x0, self.theta0])

    def rhs(self, t, z, d):
        x, th = z[: self.n], z[self.n:]
        y = self.C.T @ x
        u, dth = act.passification_controller_rhs(th, y, self.g, self.Gamma)
        return np.concatenate([self.A @ x + self.B * u, dth])

    def observe(self, t, z, d):
        x, th = z[: self.n], z[self.n:]
        tt = th - self.theta_star
        V = float(x @ self.P @ x) + _quad(self.Ginv, tt)
        return np.concatenate([x, th, [float(th @ (self.C.T @ x)), V, np.linalg.norm(x)]])


GENERATORS = {
    "quadratic": (lambda th: 0.5 * float(th @ th), lambda th: np.eye(th.size)),
    "quartic": (lambda th: float(np.sum(th ** 4) / 12 + 0.5 * th @ th), lambda th: np.diag(th ** 2 + 1.0)),
}


class SpeedGradientLoop(ClosedLoop):
    """Scalar plant ``x' = a x + u`` with ``u = -(theta + kappa) x``.

    Goal ``Q = x^2/2`` gives ``w = (a - theta - kappa) x^2``; the law is
    ``theta' = -Gamma grad_theta w = Gamma x^2``.  ``V`` uses
    ``theta* = a``.
    """

    def __init__(self, a, kappa, Gamma=1.0, x0=1.0, theta0=0.0, generator=None):
        self.a, self.kappa = float(a), float(kappa)
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        w = lambda x, th, t: float((self.a - th[0] - self.kappa) * x[0] ** 2)  # noqa: E731
        grad = lambda x, th, t: np.array([-x[0] ** 2])  # noqa: E731
        gen = GENERATORS[generator] if generator else (None, None)
        self.law = act.SpeedGradientLaw(w, Gamma, grad, gen[0], gen[1])
        self.bregman = generator is not None
        self.theta_star = self.a
        self.x0, self.theta0 = float(x0), float(theta0)
        self.has_lyapunov = not self.bregman
        self.channels = ["x", "theta", "u", "w", "V"]

    def initial_state(self):
        return np.array([self.x0, self.theta0])

    def rhs(self, t, z, d):
        x, th = z[:1], z[1:]
        u = -(th[0] + self.kappa) * x[0]
        dth = act.speed_gradient_rhs(self.law, x, th, t, self.bregman)
        return np.array([self.a * x[0] + u, dth[0]])

    def observe(self, t, z, d):
        x, th = z[0], z[1]
        G = self.law.Gamma if np.isscalar(self.law.Gamma) else float(np.asarray(self.law.Gamma).ravel()[0])
        V = 0.5 * x ** 2 + 0.5 * (th - self.theta_star) ** 2 / G
        return np.array([x, th, -(th + self.kappa) * x, (self.a - th - self.kappa) * x ** 2, V])


NONLINEARITIES = {
    # name: (f(x, theta), df/dtheta, convexity in theta)
    "exp": (lambda x, th: float(np.exp(th[0] * x[0])), lambda x, th: np.array([x[0] * np.exp(th[0] * x[0])]), "convex"),
    "log": (lambda x, th: float(np.log1p(th[0] * x[0] ** 2)),
            lambda x, th: np.array([x[0] ** 2 / (1.0 + th[0] * x[0] ** 2)]), "concave"),
    "linear": (lambda x, th: float(th[0] * x[0]), lambda x, th: np.array([x[0]]), "convex"),
}


class MinMaxLoop(ClosedLoop):
    """Scalar plant ``x' = a_p x + f(x, theta) + u`` with min-max adaptive control.

    Reference ``xm' = a_m xm + r``; ``e_c = x - xm``.
    """

    def __init__(self, a_p, theta_true, theta_set, nonlinearity, a_m, epsilon, Gamma_alpha=1.0,
                 Gamma_theta=1.0, reference=None, x0=0.0, theta0=None, alpha0=0.0, s_power=0):
        from .model import NonlinearPlant

        self.a_p, self.a_m = float(a_p), float(a_m)
        if self.a_m >= 0:
            raise ValueError("reference pole a_m must be negative")
        self.f, self.df, conv = NONLINEARITIES[nonlinearity]
        self.plant = NonlinearPlant(1, self.f, np.atleast_2d(theta_set), conv)
        self.box = self.plant.theta_set
        self.theta_true = np.atleast_1d(np.asarray(theta_true, float))
        self.alpha_star = self.a_m - self.a_p
        self.state0 = act.MinMaxControllerState(
            np.atleast_1d(np.mean(self.box, axis=1) if theta0 is None else theta0), [alpha0], epsilon,
            1.0, Gamma_alpha, Gamma_theta, 1.0, s_power)
        self.r = make_reference(reference)
        self.x0 = float(x0)
        self.has_lyapunov = True
        self.channels = ["x", "x_m", "e_c", "e_eps", "u", "r", "alpha_hat", "theta_hat", "a_star", "omega_star", "V"]

    def initial_state(self):
        return np.array([self.x0, 0.0, self.state0.alpha_hat[0], self.state0.theta_hat[0]])

    def _law(self, t, z):
        x, xm, ah, th = z
        r = self.r(t)
        ec = x - xm
        st = self.state0
        sign = float(np.sign(ec)) * st.beta
        X = np.array([x])
        a, om = act.minmax_solve(lambda q: self.f(X, q), np.array([th]), self.box, self.plant.convexity, sign,
                                 lambda q: self.df(X, q))
        s = act.s_func(ec / st.epsilon, st.s_power)
        u = -self.f(X, np.array([th])) + ah * x + r - a * s
        ee = ec - st.epsilon * s
        return x, xm, ah, th, r, ec, ee, u, a, om[0]

    def rhs(self, t, z, d):
        x, xm, ah, th, r, ec, ee, u, a, om = self._law(t, z)
        st = self.state0
        dx = self.a_p * x + self.f(np.array([x]), self.theta_true) + u
        return np.array([dx, self.a_m * xm + r, -st.Gamma_alpha * ee * x, st.Gamma_theta * ee * om])

    def project(self, z):
        z[3] = min(max(z[3], self.box[0, 0]), self.box[0, 1])
        return z

    def observe(self, t, z, d):
        x, xm, ah, th, r, ec, ee, u, a, om = self._law(t, z)
        st = self.state0
        V = 0.5 * ee ** 2 + 0.5 * (ah - self.alpha_star) ** 2 / st.Gamma_alpha \
            + 0.5 * (th - self.theta_true[0]) ** 2 / st.Gamma_theta
        return np.array([x, xm, ec, ee, u, r, ah, th, a, om, V])


class SaturatedMracLoop(ClosedLoop):
    """State-feedback MRAC behind a magnitude- and rate-limited actuator.

    The actuator state ``u_p`` follows the saturated first-order filter and
    the augmented error ``e_u = e + e_a`` drives adaptation of ``theta``,
    ``k`` and ``k_s``.
    """

    def __init__(self, Ap, bp, Am, bm, Q, limits, Gamma=1.0, gamma_k=1.0, gamma_s=1.0, reference=None,
                 x0=None, theta0=None, k0=0.0, ks0=0.0):
        self.Ap, self.bp = np.atleast_2d(np.asarray(Ap, float)), np.asarray(bp, float).reshape(-1)
        self.Am, self.bm = np.atleast_2d(np.asarray(Am, float)), np.asarray(bm, float).reshape(-1)
        n = self.n = self.bp.size
        self.theta_star, self.k_star = matching_solve(self.Ap, self.bp, self.Am, self.bm)
        self.ks_star = -1.0 / self.k_star
        self.sign = 1 if self.k_star > 0 else -1
        self.P = lyapunov_solve(self.Am, np.atleast_2d(np.asarray(Q, float))).P
        self.Pbm = self.P @ self.bm
        self.lim = limits if isinstance(limits, act.SaturationLimits) else act.SaturationLimits(**limits)
        self.Gamma = _gain_arr(Gamma)
        self.Ginv = _gain_inv(self.Gamma)
        self.gamma_k, self.gamma_s = float(gamma_k), float(gamma_s)
        self.r = make_reference(reference)
        self.x0 = np.zeros(n) if x0 is None else np.asarray(x0, float)
        self.theta0 = np.zeros(n) if theta0 is None else np.asarray(theta0, float)
        self.k0, self.ks0 = float(k0), float(ks0)
        self.has_lyapunov = True
        self.channels = ([f"x{i}" for i in range(n)] + [f"xm{i}" for i in range(n)]
                         + ["e_norm", "eu_norm", "u", "u_p", "u_p_dot", "delta_u", "r"]
                         + [f"theta{i}" for i in range(n)] + ["k", "k_s", "V", "x_norm"])
        self._sl = np.cumsum([0, n, n, n, 1, 1, n, 1])

    def initial_state(self):
        return np.concatenate([self.x0, np.zeros(self.n), self.theta0, [self.k0, 0.0], np.zeros(self.n),
                               [self.ks0]])

    def _split(self, z):
        s = self._sl
        return z[s[0]:s[1]], z[s[1]:s[2]], z[s[2]:s[3]], z[s[3]], z[s[4]], z[s[5]:s[6]], z[s[6]]

    def _law(self, t, z):
        x, xm, th, k, up, ea, ks = self._split(z)
        r = self.r(t)
        u = float(th @ x) + k * r
        e = x - xm
        eu = e + ea
        up_dot, delta, ea_dot, ks_dot = act.saturated_mrac_rhs(self.lim, u, up, ea, ks, eu, self.P, self.Am,
                                                               self.bm, self.gamma_s)
        s = float(eu @ self.Pbm)
        return x, xm, th, k, up, ea, ks, r, u, e, eu, float(up_dot[0]), delta, ea_dot, ks_dot, s

    def rhs(self, t, z, d):
        x, xm, th, k, up, ea, ks, r, u, e, eu, up_dot, delta, ea_dot, ks_dot, s = self._law(t, z)
        g = s * x
        dth = -self.sign * (self.Gamma * g if np.isscalar(self.Gamma) else self.Gamma @ g)
        dk = -self.sign * self.gamma_k * s * r
        return np.concatenate([self.Ap @ x + self.bp * up, self.Am @ xm + self.bm * r, dth, [dk, up_dot],
                               ea_dot, [ks_dot]])

    def project(self, z):
        i = self._sl[4]
        z[i] = act.saturate(z[i], self.lim.u_max)[0]
        return z

    def observe(self, t, z, d):
        x, xm, th, k, up, ea, ks, r, u, e, eu, up_dot, delta, ea_dot, ks_dot, s = self._law(t, z)
        tt = th - self.theta_star
        V = (float(eu @ self.P @ eu) + (_quad(self.Ginv, tt) + (k - self.k_star) ** 2 / self.gamma_k)
             / abs(self.k_star) + (ks - self.ks_star) ** 2 / self.gamma_s)
        return np.concatenate([x, xm, [np.linalg.norm(e), np.linalg.norm(eu), u, up, up_dot, delta, r], th,
                               [k, ks, V, np.linalg.norm(x)]])

    def fastest_rate(self):
        return float(max(np.abs(np.linalg.eigvals(self.Am)).max(), 1.0 / self.lim.tau))
