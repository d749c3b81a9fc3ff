"""Plant and reference-model types plus the operator-polynomial algebra they use.

Polynomials store coefficients in ascending powers (constant term first).  For
discrete-time models the indeterminate is the delay operator ``z`` with
``z y_k = y_{k-1}``, so ``A(z) = 1 - a_1 z - ... - a_n z^n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import signal

from .errors import InfeasibleError

HURWITZ_MARGIN = 1e-9
COPRIME_TOL = 1e-12
MATCH_TOL = 1e-10


class Polynomial:
    """Real polynomial with ascending coefficient storage.

    Trailing (highest-power) zeros are stripped so the leading stored
    coefficient is nonzero; the zero polynomial is stored as ``[0.0]``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[float] | float):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("polynomial needs a 1-D, nonempty coefficient array")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        c.setflags(write=False)
        self.coeffs = c

    @classmethod
    def from_roots(cls, roots, gain: float = 1.0) -> "Polynomial":
        """Monic polynomial in the indeterminate with the given roots, times gain."""
        c = npoly.polyfromroots(np.asarray(roots, dtype=complex))
        return cls(gain * np.real_if_close(c, tol=1e6).real)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def leading(self) -> float:
        return float(self.coeffs[-1])

    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    def __call__(self, x):
        return npoly.polyval(x, self.coeffs)

    def roots(self) -> np.ndarray:
        if self.degree == 0:
            return np.zeros(0, dtype=complex)
        return npoly.polyroots(self.coeffs).astype(complex)

    def _coerce(self, other) -> "Polynomial":
        return other if isinstance(other, Polynomial) else Polynomial(other)

    def __add__(self, other):
        return Polynomial(npoly.polyadd(self.coeffs, self._coerce(other).coeffs))

    __radd__ = __add__

    def __sub__(self, other):
        return Polynomial(npoly.polysub(self.coeffs, self._coerce(other).coeffs))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self.coeffs * float(other))
        return Polynomial(npoly.polymul(self.coeffs, self._coerce(other).coeffs))

    __rmul__ = __mul__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def allclose(self, other, atol: float = 1e-12) -> bool:
        a, b = self.coeffs, self._coerce(other).coeffs
        n = max(a.size, b.size)
        return np.allclose(np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size)), rtol=0, atol=atol)

    def shift(self, k: int) -> "Polynomial":
        """Multiply by the indeterminate to the power ``k`` (k >= 0)."""
        return Polynomial(np.concatenate([np.zeros(k), self.coeffs]))

    def derivative(self) -> "Polynomial":
        return Polynomial(npoly.polyder(self.coeffs)) if self.degree else Polynomial(0.0)

    def monic(self) -> "Polynomial":
        return Polynomial(self.coeffs / self.leading)

    def to_list(self) -> list[float]:
        return [float(c) for c in self.coeffs]

    def __repr__(self):
        return f"Polynomial({self.to_list()})"


def resultant(p: Polynomial, q: Polynomial) -> float:
    """Resultant of two polynomials via the Sylvester determinant."""
    m, n = p.degree, q.degree
    if m == 0 and n == 0:
        return 1.0
    if m == 0:
        return p.leading ** n
    if n == 0:
        return q.leading ** m
    pa, qa = p.coeffs[::-1], q.coeffs[::-1]
    S = np.zeros((m + n, m + n))
    for i in range(n):
        S[i, i : i + m + 1] = pa
    for i in range(m):
        S[n + i, i : i + n + 1] = qa
    return float(np.linalg.det(S))


def coprime(p: Polynomial, q: Polynomial, tol: float = COPRIME_TOL) -> bool:
    """Numerical coprimeness: both made monic, |resultant| above ``tol``."""
    return abs(resultant(p.monic(), q.monic())) > tol


@dataclass(frozen=True)
class TransferFunction:
    """Rational function ``num/den``; ``domain`` is ``"s"`` or ``"z"``."""

    num: Polynomial
    den: Polynomial
    domain: str = "s"

    def __post_init__(self):
        num = self.num if isinstance(self.num, Polynomial) else Polynomial(self.num)
        den = self.den if isinstance(self.den, Polynomial) else Polynomial(self.den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if den.is_zero():
            raise ValueError("transfer function denominator is zero")
        if self.domain not in ("s", "z"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @classmethod
    def from_zpk(cls, zeros, poles, gain: float, domain: str = "s") -> "TransferFunction":
        return cls(Polynomial.from_roots(zeros, gain), Polynomial.from_roots(poles), domain)

    @property
    def relative_degree(self) -> int:
        return self.den.degree - self.num.degree

    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    def is_strictly_proper(self) -> bool:
        return self.relative_degree >= 1 or self.num.is_zero()

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        return self.num.roots()

    @property
    def high_frequency_gain(self) -> float:
        return self.num.leading / self.den.leading

    def normalized(self) -> "TransferFunction":
        """Same function with a monic denominator."""
        lead = self.den.leading
        return TransferFunction(self.num * (1.0 / lead), self.den * (1.0 / lead), self.domain)

    def is_stable(self, margin: float = HURWITZ_MARGIN) -> bool:
        p = self.poles()
        if self.domain == "s":
            return bool(np.all(p.real < -margin))
        return bool(np.all(np.abs(p) < 1.0 - margin))

    def to_state_space(self) -> "StateSpaceLTI":
        """Controllable-canonical minimal-order realization (strictly proper, s-domain)."""
        if not self.is_strictly_proper():
            raise ValueError("realization requires a strictly proper transfer function")
        A, B, C, _ = signal.tf2ss(self.num.coeffs[::-1], self.den.coeffs[::-1])
        return StateSpaceLTI(A, B, C)

    def frequency_response(self, w) -> np.ndarray:
        return self(1j * np.asarray(w, dtype=float))


@dataclass(frozen=True)
class StateSpaceLTI:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(-1, 1) if B.ndim <= 1 else B
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise ValueError("A must be square with n >= 1")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        for name, val in (("A", A), ("B", B), ("C", C)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def evaluate(self, s: complex) -> np.ndarray:
        n = self.order
        return self.C @ np.linalg.solve(s * np.eye(n) - self.A, self.B)

    def transfer_function(self) -> TransferFunction:
        """SISO transfer function (first input, first output)."""
        num, den = signal.ss2tf(self.A, self.B[:, :1], self.C[:1, :], np.zeros((1, 1)))
        return TransferFunction(Polynomial(np.atleast_1d(num[0])[::-1]), Polynomial(den[::-1]))

    def controllable(self, tol: float = 1e-9) -> bool:
        return _rank(controllability_matrix(self.A, self.B), tol) == self.order

    def observable(self, tol: float = 1e-9) -> bool:
        return _rank(controllability_matrix(self.A.T, self.C.T), tol) == self.order

    def is_minimal(self, tol: float = 1e-9) -> bool:
        return self.controllable(tol) and self.observable(tol)


def controllability_matrix(A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    blocks, cur = [], B
    for _ in range(A.shape[0]):
        blocks.append(cur)
        cur = A @ cur
    return np.hstack(blocks)


def _rank(M, tol):
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def is_hurwitz(A, margin: float = HURWITZ_MARGIN) -> bool:
    """All eigenvalues strictly left of ``-margin``."""
    return bool(np.all(np.linalg.eigvals(np.atleast_2d(A)).real < -margin))


@dataclass(frozen=True)
class ReferenceModel:
    Am: np.ndarray
    bm: np.ndarray
    Wm: TransferFunction | None = None

    def __post_init__(self):
        Am = np.atleast_2d(np.asarray(self.Am, dtype=float))
        bm = np.asarray(self.bm, dtype=float).reshape(-1)
        if Am.shape != (bm.size, bm.size):
            raise ValueError("Am must be n x n with bm of length n")
        if not is_hurwitz(Am):
            raise ValueError("reference model Am is not Hurwitz")
        object.__setattr__(self, "Am", Am)
        object.__setattr__(self, "bm", bm)


@dataclass(frozen=True)
class ArmaxPlant:
    """Discrete ARMAX/NARMAX plant

        y_k = sum_i a_i y_{k-i} + sum_j b_j u_{k-d-j} + w_k + sum_i c_i w_{k-i}
              + sum_l coef_l * f_l(y_{k-1..k-n}, u_{k-d..k-d-m})

    ``a`` holds a_1..a_n, ``b`` holds b_0..b_m with ``b[0]`` the leading
    gain beta_0, ``c`` holds c_1..c_q.  ``d`` is the input delay in samples.
    """

    a: tuple[float, ...]
    b: tuple[float, ...]
    c: tuple[float, ...] = ()
    d: int = 1
    nonlinear: tuple[tuple[float, Callable], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if not self.b or self.b[0] == 0.0:
            raise ValueError("ARMAX plant needs a nonzero leading input gain b[0]")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("delay d must be an integer >= 1")

    @property
    def A(self) -> Polynomial:
        return Polynomial([1.0, *(-v for v in self.a)])

    @property
    def B(self) -> Polynomial:
        return Polynomial(self.b)

    @property
    def C(self) -> Polynomial:
        return Polynomial([1.0, *self.c])

    def input_zeros(self) -> np.ndarray:
        """Transfer-function zeros of B in the forward-shift variable q = 1/z."""
        return Polynomial(self.b[::-1]).roots()

    def is_minimum_phase(self) -> bool:
        return bool(np.all(np.abs(self.input_zeros()) < 1.0))

    def output(self, y_past, u_past, w_now=0.0, w_past=()) -> float:
        """Next output given histories (most recent first).

        ``y_past[i]`` is y_{k-1-i}; ``u_past[j]`` is u_{k-d-j}.
        """
        y = sum(ai * y_past[i] for i, ai in enumerate(self.a))
        y += sum(bj * u_past[j] for j, bj in enumerate(self.b))
        y += w_now + sum(ci * w_past[i] for i, ci in enumerate(self.c) if i < len(w_past))
        for coef, fn in self.nonlinear:
            y += coef * fn(tuple(y_past[: len(self.a)]), tuple(u_past[: len(self.b)]))
        return float(y)


@dataclass(frozen=True)
class NonlinearPlant:
    """x' = f(x, theta, u, t) with theta in a compact box ``theta_set``."""

    n: int
    f: Callable
    theta_set: np.ndarray
    convexity: str = "convex"

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.theta_set, dtype=float))
        if box.shape[1] != 2 or np.any(box[:, 0] > box[:, 1]):
            raise ValueError("theta_set must be rows of (lower, upper) with lower <= upper")
        if self.convexity not in ("convex", "concave", "general"):
            raise ValueError(f"unknown convexity tag {self.convexity!r}")
        object.__setattr__(self, "theta_set", box)


def bezout_solve(A: Polynomial, C: Polynomial, d: int, tol: float = 1e-12):
    """Solve ``C = A F + z^d G`` with deg F = d-1 and F(0) = C(0) = 1.

    F is the first ``d`` terms of the power series C/A; G is what remains
    divided by z^d.  G may have degree at most max(deg A - 1, deg C - d).
    """
    if d < 1 or int(d) != d:
        raise ValueError("delay d must be an integer >= 1")
    if abs(A.coeffs[0] - 1.0) > tol:
        raise ValueError("A must have constant term 1")
    if abs(C.coeffs[0] - 1.0) > tol:
        raise ValueError("C must have constant term 1")
    a = np.pad(A.coeffs, (0, max(0, d - A.coeffs.size)))
    c = np.pad(C.coeffs, (0, max(0, d - C.coeffs.size)))
    f = np.zeros(d)
    for k in range(d):
        f[k] = c[k] - sum(a[i] * f[k - i] for i in range(1, min(k, a.size - 1) + 1))
    F = Polynomial(f)
    rem = (C - A * F).coeffs
    if rem.size > d and np.any(np.abs(rem[:d]) > 1e-9):
        raise ArithmeticError("power-series division left low-order residue")
    G = Polynomial(rem[d:]) if rem.size > d else Polynomial(0.0)
    max_deg = max(A.degree - 1, 0)
    if G.degree > max_deg:
        raise ValueError(
            f"C has degree {C.degree}, too high for deg F = {d - 1}, deg G <= {max_deg}"
        )
    return F, G


def matching_solve(Ap, bp, Am, bm, tol: float = MATCH_TOL):
    """Least-squares solve of ``Ap + bp theta^T = Am``, ``bp k = bm``.

    Returns ``(theta, k)``; raises InfeasibleError when the residual exceeds
    ``tol`` or ``bp`` is zero.
    """
    Ap, Am = np.atleast_2d(np.asarray(Ap, float)), np.atleast_2d(np.asarray(Am, float))
    bp, bm = np.asarray(bp, float).reshape(-1), np.asarray(bm, float).reshape(-1)
    n = bp.size
    if Ap.shape != (n, n) or Am.shape != (n, n) or bm.size != n:
        raise ValueError("dimension mismatch in matching conditions")
    if not is_hurwitz(Am):
        raise ValueError("Am must be Hurwitz")
    nb = float(bp @ bp)
    if nb == 0.0:
        raise InfeasibleError("bp = 0: no matching controller exists")
    theta = (Am - Ap).T @ bp / nb
    k = float(bp @ bm / nb)
    res = max(
        np.abs(Ap + np.outer(bp, theta) - Am).max(),
        np.abs(bp * k - bm).max(),
    )
    if res > tol:
        raise InfeasibleError(f"matching conditions not solvable (residual {res:.3e})")
    return theta, k


def filter_numerators(Lam, ell) -> list[Polynomial]:
    """Entries of adj(sI - Lam) ell as polynomials (degree <= n-1).

    Uses the Faddeev-LeVerrier recursion for the adjugate.
    """
    Lam = np.atleast_2d(np.asarray(Lam, float))
    ell = np.asarray(ell, float).reshape(-1)
    n = Lam.shape[0]
    char = np.poly(Lam)  # descending: s^n + a1 s^{n-1} + ...
    Bk = np.eye(n)
    terms = [Bk @ ell]  # coefficient of s^{n-1}
    for k in range(1, n):
        Bk = Lam @ Bk + char[k] * np.eye(n)
        terms.append(Bk @ ell)  # coefficient of s^{n-1-k}
    coeffs = np.array(terms[::-1])  # row j: coefficient of s^j
    return [Polynomial(coeffs[:, i]) for i in range(n)]


def nonminimal_realize(Wp: TransferFunction, Lam, ell):
    """Parameters (theta1, theta2) of the 2n-state nonminimal plant form

        w1' = Lam w1 + ell u,  w2' = Lam w2 + ell y,  y = theta1.w1 + theta2.w2.

    With N(s) = adj(sI - Lam) ell and lam(s) = det(sI - Lam), matching
    Wp = Zp/Rp (Rp monic, degree n) requires theta1.N = Zp and
    theta2.N = lam - Rp.
    """
    Lam = np.atleast_2d(np.asarray(Lam, float))
    ell = np.asarray(ell, float).reshape(-1)
    n = Lam.shape[0]
    if not is_hurwitz(Lam):
        raise ValueError("Lambda must be Hurwitz")
    if _rank(controllability_matrix(Lam, ell), 1e-9) < n:
        raise ValueError("(Lambda, ell) is not controllable")
    W = Wp.normalized()
    if W.den.degree != n:
        raise ValueError(f"plant order {W.den.degree} does not match Lambda dimension {n}")
    if W.num.degree > n - 1:
        raise ValueError("plant must be strictly proper")
    if not coprime(W.num, W.den):
        raise ValueError("plant numerator and denominator share a common factor")
    N = filter_numerators(Lam, ell)
    M = np.zeros((n, n))
    for i, p in enumerate(N):
        M[: p.coeffs.size, i] = p.coeffs
    lam = Polynomial(np.poly(Lam)[::-1])
    rhs1 = np.pad(W.num.coeffs, (0, n - W.num.coeffs.size))
    rhs2 = (lam - W.den).coeffs
    rhs2 = np.pad(rhs2, (0, max(0, n - rhs2.size)))[:n]
    theta1 = np.linalg.solve(M, rhs1)
    theta2 = np.linalg.solve(M, rhs2)
    return theta1, theta2


def nonminimal_response(theta1, theta2, Lam, ell, s) -> complex:
    """Transfer function u -> y of the nonminimal representation at ``s``."""
    Lam = np.atleast_2d(np.asarray(Lam, float))
    ell = np.asarray(ell, float).reshape(-1)
    F = np.linalg.solve(s * np.eye(Lam.shape[0]) - Lam, ell)
    return complex(np.dot(theta1, F) / (1.0 - np.dot(theta2, F)))
