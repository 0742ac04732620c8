"""Edge-fault detection with unknown input observers, and fault accommodation.

Agent i watches each incoming link from a neighbor l by observing the
neighbor's own subsystem state augmented with the link fault as one extra
state.  For ISAC the watched subsystem is h (inputs mu~, output nu~); for
RAC it is g (inputs nu~, output eta~).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .consensus import AgentState, EstimatorDesign, Kind, _isac, _rac
from .lti import (
    HURWITZ_MARGIN,
    Polynomial,
    is_hurwitz,
    observability_matrix,
    place_detectable_gain,
    poly_roots,
)

log = logging.getLogger(__name__)

CE_TOL = 1e-12


@dataclass(frozen=True)
class ExtendedSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray
    kind: Kind

    @property
    def n(self) -> int:
        return self.A.shape[0]


def _extend(A_sub, B_sub, C_sub, kind: Kind) -> ExtendedSystem:
    A_sub = np.atleast_2d(np.asarray(A_sub, dtype=float))
    m = A_sub.shape[0]
    B_sub = np.asarray(B_sub, dtype=float).reshape(m, 1)
    C_sub = np.asarray(C_sub, dtype=float).reshape(1, m)
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = A_sub
    A[:m, m:] = B_sub
    B = np.vstack([-B_sub, [[0.0]]])
    E = np.zeros((m + 1, 1))
    E[m, 0] = 1.0
    C = np.hstack([C_sub, [[1.0]]])
    return ExtendedSystem(A, B, C, E, kind)


def build_extended(design: EstimatorDesign) -> ExtendedSystem:
    if design.kind is Kind.ISAC:
        if design.h.D != 0.0:
            raise ValueError("ISAC fault detection needs a strictly proper h(s)")
        return _extend(design.h.A, design.h.B, design.h.C, Kind.ISAC)
    if design.g.D != 0.0:
        raise ValueError("RAC fault detection needs a strictly proper g(s)")
    return _extend(design.g.A, design.g.B, design.g.C, Kind.RAC)


@dataclass(frozen=True)
class UIOExistence:
    CE: float
    rank_ok: bool
    zeros: np.ndarray
    zeros_ok: bool

    @property
    def ok(self) -> bool:
        return self.rank_ok and self.zeros_ok


def pencil_determinant(ext: ExtendedSystem) -> Polynomial:
    """det [[sI - A, -E], [C, 0]] recovered by evaluation and interpolation."""
    n = ext.n
    deg = n + 1
    npts = deg + 1
    scale = 1.0 + np.linalg.norm(ext.A, 2)
    k = np.arange(npts)
    pts = scale * np.cos(np.pi * (k + 0.5) / npts)

    def det_at(s):
        P = np.zeros((n + 1, n + 1))
        P[:n, :n] = s * np.eye(n) - ext.A
        P[:n, n:] = -ext.E
        P[n:, :n] = ext.C
        return np.linalg.det(P)

    vals = np.array([det_at(s) for s in pts])
    # scaled Vandermonde keeps the solve well conditioned
    V = np.vander(pts / scale, npts, increasing=True)
    c = np.linalg.solve(V, vals) / scale ** np.arange(npts)
    big = np.max(np.abs(c), initial=0.0)
    c[np.abs(c) < 1e-9 * big] = 0.0
    return Polynomial(tuple(c))


def invariant_zeros(ext: ExtendedSystem) -> np.ndarray:
    p = pencil_determinant(ext)
    if p.degree < 1:
        return np.array([], dtype=complex)
    return poly_roots(p)


def uio_existence_check(ext: ExtendedSystem) -> UIOExistence:
    CE = float((ext.C @ ext.E)[0, 0])
    zeros = invariant_zeros(ext)
    zeros_ok = bool(np.all(zeros.real < -HURWITZ_MARGIN)) if zeros.size else True
    if pencil_determinant(ext).is_zero:
        zeros_ok = False  # singular pencil: every s is a zero
    return UIOExistence(CE, abs(CE) > CE_TOL, zeros, zeros_ok)


@dataclass(frozen=True)
class ObserverMatrices:
    F: np.ndarray
    T: np.ndarray
    H: np.ndarray
    K: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    TB: np.ndarray

    @property
    def n(self) -> int:
        return self.F.shape[0]


def default_observer_poles(count: int, omega: float = 1.5) -> list[float]:
    """-2, -2.5, -3, ... scaled by omega/1.5."""
    return [-(2.0 + 0.5 * k) * omega / 1.5 for k in range(count)]


def uio_design(ext: ExtendedSystem, observer_poles: Sequence[complex] | None = None,
               explicit_K1: Sequence[float] | None = None) -> ObserverMatrices:
    """Gains satisfying (HC - I)E = 0, T = I - HC, F = A - HCA - K1 C, K2 = F H.

    ``(A - HCA, C)`` is never fully observable here because ``C H = 1`` makes
    ``C (A - HCA) = 0``; the unobservable modes sit at the invariant zeros
    and only one mode is placed from ``observer_poles``.
    """
    if (observer_poles is None) == (explicit_K1 is None):
        raise ValueError("give exactly one of observer_poles or explicit_K1")
    check = uio_existence_check(ext)
    if not check.rank_ok:
        raise ValueError("rank(CE) != rank(E): no unknown input observer exists")
    if not check.zeros_ok:
        raise ValueError(f"invariant zeros not strictly stable: {check.zeros}")
    n = ext.n
    CE = ext.C @ ext.E
    H = ext.E @ np.linalg.solve(CE.T @ CE, CE.T)
    T = np.eye(n) - H @ ext.C
    A_bar = ext.A - H @ ext.C @ ext.A
    if explicit_K1 is not None:
        K1 = np.asarray(explicit_K1, dtype=float).reshape(n, 1)
        F = A_bar - K1 @ ext.C
        ok, worst = is_hurwitz(F)
        if not ok:
            raise ValueError(f"F is not Hurwitz with the given K1 (max real part {worst:.4g})")
    else:
        poles = list(observer_poles)
        rank = np.linalg.matrix_rank(observability_matrix(A_bar, ext.C))
        if len(poles) > rank:
            log.info("only %d of %d observer poles are assignable; the rest are the invariant zeros",
                     rank, len(poles))
        K1 = place_detectable_gain(A_bar, ext.C, poles)
        F = A_bar - K1 @ ext.C
        ok, worst = is_hurwitz(F)
        if not ok:
            raise ValueError(f"placed F is not Hurwitz (max real part {worst:.4g})")
    K2 = F @ H
    return ObserverMatrices(F=F, T=T, H=H, K=K1 + K2, K1=K1, K2=K2, TB=T @ ext.B)


def observer_derivative(obs: ObserverMatrices, z: np.ndarray, u_tilde: float, y_tilde: float):
    """One observer's ``(dz, xhat, fhat)``.

    ISAC: ``u_tilde`` is the received mu~, ``y_tilde`` the received nu~.
    RAC: ``u_tilde`` is the received nu~ (= -nu_l + f), ``y_tilde`` the received eta~.
    """
    dz = obs.F @ z + obs.TB[:, 0] * u_tilde + obs.K[:, 0] * y_tilde
    xhat = z + obs.H[:, 0] * y_tilde
    return dz, xhat, float(xhat[-1])


def accommodate_isac(design: EstimatorDesign, state: AgentState, phi_i: float, nu_self: float,
                     clean_neighbor_nus: Sequence[float],
                     faulty_pairs: Sequence[tuple[float, float]]):
    """ISAC step where each watched link contributes ``nu_i - nu~ + fhat``."""
    coupling = sum(nu_self - v for v in clean_neighbor_nus)
    coupling += sum(nu_self - nt + fh for nt, fh in faulty_pairs)
    return _isac(design.h, design.g, state, phi_i, coupling)


def accommodate_rac(design: EstimatorDesign, state: AgentState, phi_i: float, eta_self: float,
                    clean_neighbor_etas: Sequence[float],
                    faulty_pairs: Sequence[tuple[float, float]]):
    coupling = sum(eta_self - v for v in clean_neighbor_etas)
    coupling += sum(eta_self - et + fh for et, fh in faulty_pairs)
    return _rac(design.h, design.g, state, phi_i, coupling)


FAULT_WAVEFORMS = ("sin", "cos", "constant", "ramp", "zero")


@dataclass(frozen=True)
class FaultModel:
    """Additive fault on the link ``source -> target`` switched on after ``onset``.

    ``sin``/``cos`` are evaluated at absolute time; ``ramp`` grows from the onset.
    """

    source: int
    target: int
    onset: float
    waveform: str = "cos"
    amplitude: float = 1.0
    frequency: float = 0.0
    phase: float = 0.0
    symmetric: bool = False

    def __post_init__(self):
        if self.waveform not in FAULT_WAVEFORMS:
            raise ValueError(f"unknown fault waveform {self.waveform!r}")
        if self.source == self.target:
            raise ValueError("fault link endpoints must differ")

    def links(self) -> list[tuple[int, int]]:
        out = [(self.source, self.target)]
        if self.symmetric:
            out.append((self.target, self.source))
        return out

    def shape(self, t):
        """Waveform without the onset gate."""
        t = np.asarray(t, dtype=float)
        w = self.waveform
        if w == "sin":
            return self.amplitude * np.sin(self.frequency * t + self.phase)
        if w == "cos":
            return self.amplitude * np.cos(self.frequency * t + self.phase)
        if w == "constant":
            return self.amplitude + 0.0 * t
        if w == "ramp":
            return self.amplitude * (t - self.onset)
        return 0.0 * t

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > self.onset, self.shape(t), 0.0)


def corrupt(value: float, fault: FaultModel, t: float) -> float:
    return value + float(fault.value(t))


def half_frequency_fault(omega: float = 1.5, onset: float = 25.0) -> FaultModel:
    """cos(w t / 2) on both directions of link 1-2 after ``onset``."""
    return FaultModel(1, 2, onset, "cos", 1.0, omega / 2, 0.0, symmetric=True)
