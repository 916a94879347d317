"""Two-level propagator algebra and its spin-1 lift.

A pulse cycle (free evolution ``tau/2``, pulse, free evolution ``tau/2``)
is described by its transition-probability error ``epsilon`` and two
phases. Phase-shifted copies of the cycle compose into the propagator of
a dynamical-decoupling sequence, whose fidelity against the error-free
sequence is what the phase tables are designed to protect.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernel import SQRT2, ContractError

NORM_TOL = 1e-9


@dataclass(frozen=True)
class CayleyKlein:
    """SU(2) element ``[[a, b], [-b*, a*]]``."""

    a: complex
    b: complex

    def __post_init__(self):
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1.0) > NORM_TOL:
            raise ContractError("|a|^2 + |b|^2 must equal 1")

    def matrix(self) -> np.ndarray:
        a, b = self.a, self.b
        return np.array([[a, b], [-np.conj(b), np.conj(a)]], dtype=complex)

    @classmethod
    def from_matrix(cls, U) -> "CayleyKlein":
        U = np.asarray(U)
        return cls(complex(U[0, 0]), complex(U[0, 1]))


@dataclass(frozen=True)
class PulseErrorModel:
    """Transition-probability error ``epsilon`` and phases of one pulse cycle."""

    epsilon: float
    alpha_tilde: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ContractError(f"epsilon must lie in [0, 1], got {self.epsilon}")


def cayley_klein_rect(Delta: float, Omega: float, phi: float, t: float) -> CayleyKlein:
    """Cayley-Klein parameters of a constant pulse (angular ``Delta``, ``Omega``).

    The sign of ``b`` follows ``exp(-i H t)`` for
    ``H = (Delta sz + Omega (cos(phi) sx + sin(phi) sy)) / 2``.
    """
    wbar = np.hypot(Omega, Delta)
    if wbar == 0.0:
        return CayleyKlein(1.0 + 0j, 0j)
    s = np.sin(wbar * t / 2)
    a = np.cos(wbar * t / 2) - 1j * (Delta / wbar) * s
    b = -1j * (Omega / wbar) * np.exp(-1j * phi) * s
    return CayleyKlein(complex(a), complex(b))


def lift_matrix(a, b) -> np.ndarray:
    """Spin-1 representation of ``[[a, b], [-b*, a*]]`` (vectorised over ``a``, ``b``)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ac, bc = np.conj(a), np.conj(b)
    U = np.empty(np.broadcast(a, b).shape + (3, 3), dtype=complex)
    U[..., 0, 0] = a * a
    U[..., 0, 1] = SQRT2 * a * b
    U[..., 0, 2] = b * b
    U[..., 1, 0] = -SQRT2 * a * bc
    U[..., 1, 1] = np.abs(a) ** 2 - np.abs(b) ** 2
    U[..., 1, 2] = SQRT2 * ac * b
    U[..., 2, 0] = bc * bc
    U[..., 2, 1] = -SQRT2 * ac * bc
    U[..., 2, 2] = ac * ac
    return U


def lift_to_spin1(ck) -> np.ndarray:
    """Three-level propagator generated by the two-level one (Majorana map).

    Accepts a :class:`CayleyKlein` or a 2x2 SU(2) matrix.
    """
    if not isinstance(ck, CayleyKlein):
        U = np.asarray(ck, dtype=complex)
        if U.shape != (2, 2):
            raise ContractError(f"expected a 2x2 matrix, got {U.shape}")
        if np.linalg.norm(np.conj(U.T) @ U - np.eye(2)) > NORM_TOL:
            raise ContractError("two-level propagator is not unitary")
        det = np.linalg.det(U)
        # strip a U(1) factor so the matrix is in SU(2)
        U = U / np.sqrt(det)
        ck = CayleyKlein.from_matrix(U)
    return lift_matrix(ck.a, ck.b)


def pulse_cycle_propagator(m: PulseErrorModel, phi_k: float = 0.0) -> np.ndarray:
    """Propagator of one cycle whose pulse carries the extra phase ``phi_k``."""
    s = np.sqrt(m.epsilon)
    c = np.sqrt(1.0 - m.epsilon)
    ea = np.exp(1j * m.alpha_tilde)
    eb = np.exp(1j * (m.beta + phi_k))
    return np.array([[s * ea, c / eb], [-c * eb, s / ea]], dtype=complex)


def extract_error_model(cycle) -> PulseErrorModel:
    """Invert :func:`pulse_cycle_propagator` at ``phi_k = 0``.

    Phases are principal values in ``(-pi, pi]``; a phase that is undefined
    because its modulus vanishes is reported as 0.
    """
    U = np.asarray(cycle, dtype=complex)
    det = np.linalg.det(U)
    U = U / np.sqrt(det)
    eps = float(min(1.0, max(0.0, abs(U[0, 0]) ** 2)))
    alpha = float(np.angle(U[0, 0])) if abs(U[0, 0]) > 1e-15 else 0.0
    beta = float(-np.angle(U[0, 1])) if abs(U[0, 1]) > 1e-15 else 0.0
    if beta == -np.pi:
        beta = np.pi
    return PulseErrorModel(eps, alpha, beta)


def sequence_propagator(m: PulseErrorModel, phases: Sequence[float]) -> np.ndarray:
    """``U(phi_n) ... U(phi_1)``; the first listed phase acts first."""
    U = np.eye(2, dtype=complex)
    for phi in phases:
        U = pulse_cycle_propagator(m, phi) @ U
    return U


def ideal_sequence_propagator(m: PulseErrorModel, phases: Sequence[float]) -> np.ndarray:
    """The same sequence with perfect inversion (``epsilon = 0``)."""
    return sequence_propagator(PulseErrorModel(0.0, m.alpha_tilde, m.beta), phases)


def fidelity(U, U0) -> float:
    """``|Tr(U0^dagger U)| / d`` with ``d`` the dimension (global phase dropped)."""
    U = np.asarray(U)
    U0 = np.asarray(U0)
    return float(abs(np.trace(np.conj(U0.T) @ U)) / U.shape[0])


def fidelity_error(U, U0) -> float:
    """``1 - fidelity(U, U0)``, computed without cancellation.

    For unitary ``W = U0^dagger U`` rotated so its trace is real and
    non-negative, ``1 - |Tr W|/d = ||W - I||_F^2 / (2 d)``; the right-hand
    side keeps full relative precision for errors far below 1e-16.
    """
    W = np.conj(np.asarray(U0).T) @ np.asarray(U)
    tr = np.trace(W)
    if tr != 0:
        W = W * (abs(tr) / tr)
    d = W.shape[0]
    return float(np.linalg.norm(W - np.eye(d)) ** 2 / (2 * d))


_ERROR_KINDS = ("two_zero_phase", "four_zero_phase", "LDD4", "LDD4x2", "LDD8", "LDD16")


def analytic_fidelity_error(kind: str, epsilon: float, alpha_tilde: float, phi: float = 0.0) -> float:
    """Closed-form fidelity error of a phased pulse sequence.

    ``phi`` is the second-pulse phase of the two-pulse sequence and is
    ignored otherwise. ``LDD16`` returns the leading ``epsilon**4`` term only.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ContractError(f"epsilon must lie in [0, 1], got {epsilon}")
    e, a = epsilon, alpha_tilde
    s2 = np.sin(2 * a) ** 2
    if kind == "two_zero_phase":
        return float(2 * e * np.cos(a + phi / 2) ** 2)
    if kind == "four_zero_phase":
        x = 8 * e * np.cos(a) ** 2
        return float(x - x * x / 8)
    if kind == "LDD4":
        return float(2 * e ** 2 * s2)
    if kind == "LDD4x2":
        return float(8 * e ** 2 * s2 * (1 - e ** 2 * s2))
    if kind == "LDD8":
        return float(8 * e ** 3 * s2 * (1 - e * s2))
    if kind == "LDD16":
        return float(8 * e ** 4 * np.sin(4 * a) ** 2)
    raise ContractError(f"unknown error kind {kind!r}; valid kinds: {', '.join(_ERROR_KINDS)}")
