"""Agent-level ISAC/RAC estimator dynamics and the design-condition check."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lti import (
    HURWITZ_MARGIN,
    Polynomial,
    StateSpace,
    TransferFunction,
    is_hurwitz_poly,
    poly_roots,
    tf_realize,
)


class Kind(str, enum.Enum):
    ISAC = "isac"
    RAC = "rac"


@dataclass(frozen=True)
class EstimatorDesign:
    h_tf: TransferFunction
    g_tf: TransferFunction
    d: Polynomial
    kind: Kind
    h: StateSpace = field(init=False, compare=False, repr=False)
    g: StateSpace = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.ISAC and not self.h_tf.strictly_proper:
            raise ValueError("ISAC needs a strictly proper h(s)")
        if self.kind is Kind.RAC and not self.g_tf.strictly_proper:
            raise ValueError("RAC needs a strictly proper g(s)")
        object.__setattr__(self, "h", tf_realize(self.h_tf))
        object.__setattr__(self, "g", tf_realize(self.g_tf))

    @property
    def m1(self) -> int:
        return self.h.m

    @property
    def m2(self) -> int:
        return self.g.m


def default_design(kind: Kind | str, omega: float = 1.5) -> EstimatorDesign:
    """h(s) = (2ws + 3w^2)/(s^2 + 2ws + 4w^2), g(s) = 1.5s/(s^2 + w^2), d(s) = s^2 + w^2."""
    w = float(omega)
    h = TransferFunction.from_coeffs([3 * w * w, 2 * w], [4 * w * w, 2 * w, 1.0])
    g = TransferFunction.from_coeffs([0.0, 1.5], [w * w, 0.0, 1.0])
    return EstimatorDesign(h, g, Polynomial((w * w, 0.0, 1.0)), Kind(kind))


@dataclass
class AgentState:
    X1: np.ndarray
    X2: np.ndarray

    @classmethod
    def zeros(cls, design: EstimatorDesign) -> "AgentState":
        return cls(np.zeros(design.m1), np.zeros(design.m2))


def isac_derivative(design: EstimatorDesign, state: AgentState, phi_i: float,
                    nu_self: float, nu_neighbors: Sequence[float]):
    """Returns ``(dX1, dX2, nu_i, mu_i)``."""
    h, g = design.h, design.g
    coupling = sum(nu_self - v for v in nu_neighbors)
    return _isac(h, g, state, phi_i, coupling)


def _isac(h: StateSpace, g: StateSpace, state: AgentState, phi_i: float, coupling: float):
    nu_i = float(h.C[0] @ state.X1)
    mu_i = float(g.C[0] @ state.X2) + g.D * coupling - phi_i
    dX1 = h.A @ state.X1 - h.B[:, 0] * mu_i
    dX2 = g.A @ state.X2 + g.B[:, 0] * coupling
    return dX1, dX2, nu_i, mu_i


def rac_derivative(design: EstimatorDesign, state: AgentState, phi_i: float,
                   eta_self: float, eta_neighbors: Sequence[float]):
    """Returns ``(dX1, dX2, nu_i, eta_i)``."""
    coupling = sum(eta_self - v for v in eta_neighbors)
    return _rac(design.h, design.g, state, phi_i, coupling)


def _rac(h: StateSpace, g: StateSpace, state: AgentState, phi_i: float, coupling: float):
    u = phi_i - coupling
    nu_i = float(h.C[0] @ state.X1) + h.D * u
    dX1 = h.A @ state.X1 + h.B[:, 0] * u
    eta_i = float(g.C[0] @ state.X2)
    dX2 = g.A @ state.X2 + g.B[:, 0] * nu_i
    return dX1, dX2, nu_i, eta_i


@dataclass(frozen=True)
class ReferenceSignal:
    amplitude: float
    phase: float
    frequency: float
    waveform: str = "sin"

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("signal frequency must be positive")
        if self.waveform not in ("sin", "cos"):
            raise ValueError(f"unknown waveform {self.waveform!r}")

    def __call__(self, t):
        fn = np.sin if self.waveform == "sin" else np.cos
        return self.amplitude * fn(self.frequency * np.asarray(t, dtype=float) + self.phase)

    def denominator(self) -> Polynomial:
        return Polynomial((self.frequency ** 2, 0.0, 1.0))


def staggered_sinusoids(omega: float = 1.5, n: int = 9) -> tuple[ReferenceSignal, ...]:
    """Node i: i*sin(wt + i*pi/4) for i <= 5, i*cos(wt + i*pi/4) after."""
    return tuple(
        ReferenceSignal(float(i), i * np.pi / 4, omega, "sin" if i <= 5 else "cos")
        for i in range(1, n + 1)
    )


def average_signal(signals: Sequence[ReferenceSignal], t):
    if not signals:
        raise ValueError("average of an empty signal set")
    return sum(s(t) for s in signals) / len(signals)


@dataclass(frozen=True)
class Lemma1Report:
    cond_i: tuple[bool, ...]
    cond_ii: bool
    p: Polynomial | None
    h_stable: bool
    cond_iii: bool
    worst_roots: tuple[complex, ...]
    cond_iv: bool
    p_g: Polynomial | None
    connected: bool
    no_common_unstable_roots: bool

    @property
    def overall(self) -> bool:
        return all(self.cond_i) and self.cond_ii and self.cond_iii and self.cond_iv

    @property
    def premises_ok(self) -> bool:
        return self.connected and self.no_common_unstable_roots

    def lines(self) -> list[str]:
        def mark(ok):
            return "PASS" if ok else "FAIL"

        out = [
            f"premise connected graph (lambda_2 > 0): {mark(self.connected)}",
            f"premise no common unstable roots of g, h: {mark(self.no_common_unstable_roots)}",
            f"cond (i) input models annihilated by d(s): {mark(all(self.cond_i))}"
            + (f" per node {['ok' if c else 'bad' for c in self.cond_i]}" if self.cond_i else " (no signals declared)"),
            f"cond (ii) n_h - d_h = p d, h stable: {mark(self.cond_ii)} p(s) = {self.p}; h stable: {self.h_stable}",
            f"cond (iii) d_g d_h + lambda_i n_g n_h Hurwitz: {mark(self.cond_iii)}",
        ]
        for k, r in enumerate(self.worst_roots, start=2):
            out.append(f"    lambda_{k}: worst root {r.real:.6g}{r.imag:+.6g}j")
        out.append(f"cond (iv) d_g = p_g d: {mark(self.cond_iv)} p_g(s) = {self.p_g}")
        out.append(f"overall: {mark(self.overall and self.premises_ok)}")
        return out


def _unstable_roots(p: Polynomial) -> np.ndarray:
    if p.degree < 1:
        return np.array([], dtype=complex)
    r = poly_roots(p)
    return r[r.real >= -HURWITZ_MARGIN]


def _share_root(a: np.ndarray, p: Polynomial) -> bool:
    if a.size == 0 or p.degree < 1:
        return False
    b = poly_roots(p)
    return bool(np.min(np.abs(a[:, None] - b[None, :])) < 1e-6)


def verify_lemma1(h: TransferFunction, g: TransferFunction, d: Polynomial,
                  spectrum: Sequence[float],
                  signals: Sequence[ReferenceSignal] = ()) -> Lemma1Report:
    if d.degree < 1:
        raise ValueError("internal model d(s) must have degree >= 1")
    spectrum = np.sort(np.asarray(spectrum, dtype=float))
    nh, dh, ng, dg = h.num, h.den, g.num, g.den

    cond_i = tuple(d.is_divisible_by(s.denominator())[0] for s in signals)

    div_ii, p = (nh - dh).is_divisible_by(d)
    h_stable = is_hurwitz_poly(dh)[0] if dh.degree >= 1 else True
    cond_ii = div_ii and h_stable

    worst = []
    for lam in spectrum[1:]:
        char = dg * dh + (nh * ng) * float(lam)
        worst.append(is_hurwitz_poly(char)[1] if char.degree >= 1 else complex(-np.inf))
    cond_iii = all(w.real < -HURWITZ_MARGIN for w in worst)

    cond_iv, p_g = dg.is_divisible_by(d)

    # unstable pole/zero cancellation between g and h in the loop gain h*g
    common = _share_root(_unstable_roots(nh), dg) or _share_root(_unstable_roots(ng), dh) \
        or _share_root(_unstable_roots(dh), ng) or _share_root(_unstable_roots(dg), nh)

    connected = len(spectrum) == 1 or bool(spectrum[1] > 1e-9)
    return Lemma1Report(
        cond_i=cond_i,
        cond_ii=bool(cond_ii),
        p=p if div_ii else None,
        h_stable=bool(h_stable),
        cond_iii=bool(cond_iii),
        worst_roots=tuple(worst),
        cond_iv=bool(cond_iv),
        p_g=p_g if cond_iv else None,
        connected=connected,
        no_common_unstable_roots=not common,
    )
