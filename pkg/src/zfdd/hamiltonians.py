"""Hamiltonians of the microwave-driven NV ground-state triplet.

All constructors take physical parameters in MHz and return matrices in
rad/µs in the ``{|+1>, |0>, |-1>}`` basis (the dressed constructor uses
``{|+>, |0>, |->}`` instead).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .kernel import DRESSED_BASIS, PAULI_X, PAULI_Y, PAULI_Z, SQRT2, TWO_PI, ContractError

D_ZFS_MHZ = 2870.0
A_PAR_MHZ = 2.166
GAMMA_NV_MHZ_PER_G = 2.8025


@dataclass(frozen=True)
class SystemParams:
    """Driven spin-1 system, all frequencies linear in MHz.

    ``omega0`` is the Zeeman shift of ``|+-1>`` (``gamma_nv * B``), so the
    two levels are split by ``2 * omega0``. The drive is detuned from the
    zero-field splitting by ``d_shift = D - omega_c``.
    """

    D: float = D_ZFS_MHZ
    omega0: float = 0.0
    Delta: float = 0.0
    Omega: float = 0.0
    omega_c: float = D_ZFS_MHZ
    phi: float = 0.0
    A_par: float = A_PAR_MHZ
    gamma_nv: float = GAMMA_NV_MHZ_PER_G

    def __post_init__(self):
        if self.Omega < 0:
            raise ContractError(f"Omega must be >= 0, got {self.Omega}")
        if self.D <= 0:
            raise ContractError(f"D must be > 0, got {self.D}")
        if self.A_par < 0:
            raise ContractError(f"A_par must be >= 0, got {self.A_par}")

    @property
    def d_shift(self) -> float:
        return self.D - self.omega_c

    @property
    def detuning(self) -> float:
        """Total splitting term on ``Sz``: ``Delta + omega0`` (MHz)."""
        return self.Delta + self.omega0

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StrainParams:
    """Effective strain couplings (MHz) and strain angle ``chi`` (rad)."""

    xi_perp: float = 0.0
    chi: float = 0.0
    d_par_Pi_z: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.xi_perp, self.chi, self.d_par_Pi_z])):
            raise ContractError("strain parameters must be finite")

    def to_dict(self) -> dict:
        return asdict(self)


def rotating_matrix(delta, rabi, phase, d_shift=0.0, xi=0.0, chi=0.0, d_par=0.0):
    """Vectorised zero-field rotating-frame Hamiltonian (angular inputs).

    Every argument broadcasts; the result has shape ``batch + (3, 3)``.
    ``delta`` sits on ``Sz``, ``d_shift + d_par`` on ``Sz**2``, ``xi`` is the
    transverse strain coupling between ``|+1>`` and ``|-1>``.
    """
    delta, rabi, phase, d_shift, xi, chi, d_par = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (delta, rabi, phase, d_shift, xi, chi, d_par)))
    H = np.zeros(delta.shape + (3, 3), dtype=complex)
    c = rabi / SQRT2 * np.exp(1j * phase)
    H[..., 0, 0] = d_shift + d_par + delta
    H[..., 2, 2] = d_shift + d_par - delta
    H[..., 1, 0] = c
    H[..., 1, 2] = c
    H[..., 0, 1] = np.conj(c)
    H[..., 2, 1] = np.conj(c)
    corner = xi * np.exp(-2j * chi)
    H[..., 0, 2] = corner
    H[..., 2, 0] = np.conj(corner)
    return H


def lab_frame(p: SystemParams, t: float) -> np.ndarray:
    """Lab-frame Hamiltonian ``D Sz^2 + (omega0+Delta) Sz + 2 Omega cos(omega_c t + phi) Sx``."""
    D = TWO_PI * p.D
    z = TWO_PI * p.detuning
    g = TWO_PI * p.Omega * SQRT2 * np.cos(TWO_PI * p.omega_c * t + p.phi)
    return np.array([[D + z, g, 0], [g, 0, g], [0, g, D - z]], dtype=complex)


def rotating_zero_field(p: SystemParams) -> np.ndarray:
    """Rotating-wave Hamiltonian in the frame of ``omega_c Sz^2``.

    The drive offset ``D - omega_c`` is kept as a diagonal ``Sz^2`` term.
    """
    return rotating_matrix(TWO_PI * p.detuning, TWO_PI * p.Omega, p.phi, TWO_PI * p.d_shift)


def dressed_raman(p: SystemParams) -> np.ndarray:
    """Rotating-frame Hamiltonian in the dressed basis ``{|+>, |0>, |->}``.

    ``(Delta |-> + exp(i phi) Omega |0>) <+| + h.c.``, plus ``d_shift`` on
    ``|+>`` and ``|->``.
    """
    delta = TWO_PI * p.detuning
    c = TWO_PI * p.Omega * np.exp(1j * p.phi)
    d = TWO_PI * p.d_shift
    return np.array([[d, np.conj(c), delta],
                     [c, 0, 0],
                     [delta, 0, d]], dtype=complex)


def to_dressed(H) -> np.ndarray:
    """Express a spin-1 operator in the dressed basis ``{|+>, |0>, |->}``."""
    V = DRESSED_BASIS
    return np.conj(V.T) @ np.asarray(H) @ V


def su2_symmetric(p: SystemParams) -> np.ndarray:
    """``Delta Sz + Omega (cos(phi) Sx + sin(phi) Sy)``.

    Agrees with :func:`rotating_zero_field` only when ``sin(phi) == 0``; the
    ``|0>``-``|-1>`` coupling carries the conjugate phase here.
    """
    delta = TWO_PI * p.detuning
    w = TWO_PI * p.Omega / SQRT2
    em = np.exp(-1j * p.phi)
    d = TWO_PI * p.d_shift
    return np.array([[delta + d, w * em, 0],
                     [w * np.conj(em), 0, w * em],
                     [0, w * np.conj(em), d - delta]], dtype=complex)


def two_level(p: SystemParams) -> np.ndarray:
    """Two-state proxy ``(Delta/2) sz + (Omega/2)(cos(phi) sx + sin(phi) sy)``."""
    delta = TWO_PI * p.detuning
    omega = TWO_PI * p.Omega
    return 0.5 * (delta * PAULI_Z + omega * (np.cos(p.phi) * PAULI_X + np.sin(p.phi) * PAULI_Y))


def strain_rotating(p: SystemParams, s: StrainParams) -> np.ndarray:
    """Rotating-frame Hamiltonian with transverse and longitudinal strain."""
    return rotating_matrix(TWO_PI * p.detuning, TWO_PI * p.Omega, p.phi, TWO_PI * p.d_shift,
                           TWO_PI * s.xi_perp, s.chi, TWO_PI * s.d_par_Pi_z)
