"""Single-input single-output LTI building blocks.

Polynomials are stored with ascending powers: ``coeffs[k]`` multiplies ``s**k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LEADING_TOL = 1e-12
DIVISIBILITY_TOL = 1e-9
COPRIME_TOL = 1e-8
HURWITZ_MARGIN = 1e-9


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while c and abs(c[-1]) <= LEADING_TOL:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> "Polynomial":
        """Monic polynomial with the given roots; they must be closed under conjugation."""
        c = np.array([1.0 + 0j])
        for r in roots:
            c = np.convolve(c, [-complex(r), 1.0])
        if np.max(np.abs(c.imag), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(c))):
            raise ValueError("roots are not closed under conjugation")
        return cls(tuple(c.real))

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> float:
        return self.coeffs[-1] if self.coeffs else 0.0

    def __call__(self, s):
        out = 0.0 * s
        for c in reversed(self.coeffs):
            out = out * s + c
        return out

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] += other.coeffs
        return Polynomial(tuple(a))

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return poly_mul(self, other)
        return Polynomial(tuple(float(other) * c for c in self.coeffs))

    __rmul__ = __mul__

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.coeffs), default=0.0)

    def is_divisible_by(self, den: "Polynomial") -> tuple[bool, "Polynomial"]:
        """Divisibility test under the float tolerance used by the design checks."""
        q, r = poly_divmod(self, den)
        tol = DIVISIBILITY_TOL * (1.0 + self.max_abs_coeff())
        return all(abs(c) < tol for c in r.coeffs), q

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            mono = "" if k == 0 else ("s" if k == 1 else f"s^{k}")
            terms.append(f"{c:.6g}{'*' + mono if mono else ''}")
        return " + ".join(terms).replace("+ -", "- ")


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    if a.is_zero or b.is_zero:
        return Polynomial()
    return Polynomial(tuple(np.convolve(a.coeffs, b.coeffs)))


def poly_divmod(num: Polynomial, den: Polynomial) -> tuple[Polynomial, Polynomial]:
    """Long division ``num = q*den + r`` with ``deg r < deg den``."""
    if den.is_zero:
        raise ValueError("division by zero polynomial")
    r = list(num.coeffs)
    dd = den.degree
    if len(r) - 1 < dd:
        return Polynomial(), num
    q = [0.0] * (len(r) - dd)
    lead = den.coeffs[-1]
    for k in range(len(r) - 1, dd - 1, -1):
        c = r[k] / lead
        q[k - dd] = c
        for j in range(dd + 1):
            r[k - dd + j] -= c * den.coeffs[j]
        r[k] = 0.0
    return Polynomial(tuple(q)), Polynomial(tuple(r[:dd]))


def companion(p: Polynomial) -> np.ndarray:
    """Top-row companion matrix of ``p`` normalized to be monic."""
    m = p.degree
    a = np.asarray(p.coeffs[:-1]) / p.leading
    M = np.zeros((m, m))
    M[0, :] = -a[::-1]
    M[1:, :-1] = np.eye(m - 1)
    return M


def poly_roots(p: Polynomial) -> np.ndarray:
    if p.degree < 1:
        raise ValueError("no roots defined")
    # LAPACK geev: balancing, Hessenberg reduction, shifted QR
    return np.linalg.eigvals(companion(p)).astype(complex)


@dataclass(frozen=True)
class TransferFunction:
    """Proper rational function ``num/den`` with ``den`` normalized monic."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if self.den.is_zero:
            raise ValueError("transfer function denominator is zero")
        if self.num.degree > self.den.degree:
            raise ValueError(
                f"improper transfer function: deg num {self.num.degree} > deg den {self.den.degree}"
            )
        lead = self.den.leading
        if lead != 1.0:
            object.__setattr__(self, "num", self.num * (1.0 / lead))
            object.__setattr__(self, "den", self.den * (1.0 / lead))

    @classmethod
    def from_coeffs(cls, num: Sequence[float], den: Sequence[float]) -> "TransferFunction":
        return cls(Polynomial(tuple(num)), Polynomial(tuple(den)))

    @property
    def strictly_proper(self) -> bool:
        return self.num.degree < self.den.degree

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def is_coprime(self, tol: float = COPRIME_TOL) -> bool:
        if self.num.degree < 1 or self.den.degree < 1:
            return True
        zn = poly_roots(self.num)
        zd = poly_roots(self.den)
        gap = np.min(np.abs(zn[:, None] - zd[None, :]))
        return bool(gap > tol * max(1.0, float(np.max(np.abs(zd)))))


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        m = A.shape[0]
        B = np.array(self.B, dtype=float).reshape(m, 1)
        C = np.array(self.C, dtype=float).reshape(1, m)
        if A.shape != (m, m):
            raise ValueError(f"A must be square, got {A.shape}")
        for name, arr in (("A", A), ("B", B), ("C", C)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "D", float(self.D))

    @property
    def m(self) -> int:
        return self.A.shape[0]


def tf_realize(tf: TransferFunction) -> StateSpace:
    """Controllable canonical form with the companion row on top and ``B = e1``.

    With this orientation ``h(s) = (3s + 6.75)/(s^2 + 3s + 9)`` gives
    ``C = [3, 6.75]``.
    """
    m = tf.den.degree
    if m < 1:
        raise ValueError("realization needs a denominator of degree >= 1")
    num = np.zeros(m + 1)
    num[: len(tf.num.coeffs)] = tf.num.coeffs
    D = num[m] if tf.num.degree == m else 0.0
    b = num[:m] - D * np.asarray(tf.den.coeffs[:m])
    a = np.asarray(tf.den.coeffs[:m])
    A = np.zeros((m, m))
    A[0, :] = -a[::-1]
    A[1:, :-1] = np.eye(m - 1)
    B = np.zeros(m)
    B[0] = 1.0
    return StateSpace(A, B, b[::-1], D)


def ss_eval(ss: StateSpace, s: complex) -> complex:
    M = s * np.eye(ss.m) - ss.A
    if np.min(np.abs(np.linalg.eigvals(ss.A) - s), initial=np.inf) < 1e-10:
        raise ValueError("evaluation at pole")
    x = np.linalg.solve(M, ss.B.astype(complex))
    return complex((ss.C @ x)[0, 0] + ss.D)


def observability_matrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.asarray(C, dtype=float).reshape(1, -1)
    rows = [C]
    for _ in range(A.shape[0] - 1):
        rows.append(rows[-1] @ A)
    return np.vstack(rows)


def _rank(M: np.ndarray, rtol: float = 1e-9) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def _poly_of_matrix(A: np.ndarray, poles: Sequence[complex]) -> np.ndarray:
    coeffs = Polynomial.from_roots(poles).coeffs
    out = np.zeros_like(A)
    for c in reversed(coeffs):
        out = out @ A + c * np.eye(A.shape[0])
    return out


def place_observer_gain(A, C, desired_poles: Sequence[complex]) -> np.ndarray:
    """Observer gain ``K`` with ``eig(A - K C) = desired_poles`` (Ackermann, dual form)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[0]
    poles = list(desired_poles)
    if len(poles) != m:
        raise ValueError(f"need {m} poles, got {len(poles)}")
    if any(complex(p).real >= 0 for p in poles):
        raise ValueError("desired poles must lie in the open left half-plane")
    O = observability_matrix(A, C)
    if _rank(O) < m:
        raise ValueError("pair not observable")
    em = np.zeros((m, 1))
    em[-1, 0] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        K = _poly_of_matrix(A, poles) @ np.linalg.solve(O, em)
    if not np.all(np.isfinite(K)):
        raise ValueError("pair not observable (gain overflows)")
    return K


def place_detectable_gain(A, C, desired_poles: Sequence[complex]) -> np.ndarray:
    """Gain for a detectable pair: place the observable modes, keep the rest.

    The unobservable subspace is split off with an orthonormal change of
    basis; only ``rank(O)`` poles are used (the leading ones of
    ``desired_poles``).  Unobservable modes must already be stable.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.asarray(C, dtype=float).reshape(1, -1)
    m = A.shape[0]
    O = observability_matrix(A, C)
    _, sv, Vt = np.linalg.svd(O)
    r = int(np.sum(sv > 1e-9 * sv[0])) if sv[0] > 0 else 0
    if r == m:
        return place_observer_gain(A, C, list(desired_poles)[:m])
    Vo, Vu = Vt[:r].T, Vt[r:].T
    Auu = Vu.T @ A @ Vu
    ok, worst = is_hurwitz(Auu)
    if not ok:
        raise ValueError(f"pair not detectable (unobservable mode with real part {worst:.3g})")
    if r == 0:
        return np.zeros((m, 1))
    poles = list(desired_poles)
    if len(poles) < r:
        raise ValueError(f"need at least {r} poles, got {len(poles)}")
    Ko = place_observer_gain(Vo.T @ A @ Vo, C @ Vo, poles[:r])
    return Vo @ Ko


def is_hurwitz(M) -> tuple[bool, float]:
    ev = np.linalg.eigvals(np.atleast_2d(np.asarray(M, dtype=float)))
    worst = float(np.max(ev.real))
    return worst < -HURWITZ_MARGIN, worst


def is_hurwitz_poly(p: Polynomial) -> tuple[bool, complex]:
    """Stability of a polynomial's roots; returns the root with largest real part."""
    r = poly_roots(p)
    worst = r[np.argmax(r.real)]
    return bool(worst.real < -HURWITZ_MARGIN), complex(worst)
