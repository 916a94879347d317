"""Batched propagation of pulse schedules under the rotating-frame Hamiltonian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hamiltonians import StrainParams, rotating_matrix
from ..kernel import KET_ZERO, TWO_PI, ContractError, expm_hermitian
from ..sequences import Free, Pulse, PulseSchedule

SZ_DIAG = np.array([1.0, 0.0, -1.0])


@dataclass(frozen=True)
class AcField:
    """Oscillating field seen as a detuning ``delta_amp cos(2 pi freq t + phase0)`` on ``Sz``.

    ``delta_amp`` (MHz) equals ``gamma_nv * B_ac``. ``phase0`` is a phase in
    rad, or ``"average"`` to average the signal over ``n_phase`` equally
    spaced phases.
    """

    delta_amp: float
    freq: float
    phase0: float | str = "average"
    n_phase: int = 16

    def __post_init__(self):
        if self.freq <= 0:
            raise ContractError("AC frequency must be positive")
        if self.delta_amp < 0:
            raise ContractError("AC amplitude must be non-negative")
        if isinstance(self.phase0, str) and self.phase0 != "average":
            raise ContractError("phase0 must be a number or 'average'")

    def phases(self) -> np.ndarray:
        if self.phase0 == "average":
            return TWO_PI * np.arange(self.n_phase) / self.n_phase
        return np.array([float(self.phase0)])

    def to_dict(self) -> dict:
        return {"delta_amp_mhz": self.delta_amp, "freq_mhz": self.freq,
                "phase0": self.phase0, "n_phase": self.n_phase}


def _segment_hamiltonian(seg, delta, alpha, d_shift, strain: StrainParams | None):
    if isinstance(seg, Pulse):
        rabi = TWO_PI * seg.rabi * (1.0 + alpha)
        phase = seg.phase
    elif isinstance(seg, Free):
        rabi, phase = 0.0, 0.0
    else:
        raise ContractError(f"unknown segment {seg!r}")
    if strain is None:
        return rotating_matrix(delta, rabi, phase, d_shift)
    return rotating_matrix(delta, rabi, phase, d_shift, TWO_PI * strain.xi_perp, strain.chi,
                           TWO_PI * strain.d_par_Pi_z)


def _segment_props(schedule, delta, alpha, d_shift, strain, ac, ac_phase, slices_per_period):
    """Yield batched propagators of consecutive time slices."""
    t = 0.0
    if ac is not None:
        max_slice = 1.0 / (slices_per_period * ac.freq)
        amp = TWO_PI * ac.delta_amp
    for seg in schedule:
        if seg.duration <= 0:
            continue
        H = _segment_hamiltonian(seg, delta, alpha, d_shift, strain)
        if ac is None or amp == 0:
            yield expm_hermitian(H, seg.duration)
        else:
            n = int(np.ceil(seg.duration / max_slice - 1e-9))
            h = seg.duration / n
            for j in range(n):
                tm = t + (j + 0.5) * h
                shift = amp * np.cos(TWO_PI * ac.freq * tm + ac_phase)
                Hj = H + np.asarray(shift)[..., None, None] * np.diag(SZ_DIAG)
                yield expm_hermitian(Hj, h)
        t += seg.duration


def _batch_params(delta, alpha, d_shift, ac_phase):
    """Angular, mutually broadcast batch parameters."""
    arrs = np.broadcast_arrays(TWO_PI * np.asarray(delta, float), np.asarray(alpha, float),
                               TWO_PI * np.asarray(d_shift, float), np.asarray(ac_phase, float))
    return arrs


def schedule_propagator(schedule: PulseSchedule, *, delta=0.0, alpha=0.0, d_shift=0.0,
                        strain: StrainParams | None = None, ac: AcField | None = None,
                        ac_phase=0.0, slices_per_period: int = 50) -> np.ndarray:
    """Propagator of a whole schedule, batched over broadcast parameters.

    ``delta`` and ``d_shift`` are MHz, ``alpha`` the relative Rabi error.
    With an AC field every segment is cut into slices no longer than
    ``1/(slices_per_period * freq)`` and the field is sampled at slice
    midpoints.
    """
    d, a, s, ph = _batch_params(delta, alpha, d_shift, ac_phase)
    U = np.broadcast_to(np.eye(3, dtype=complex), d.shape + (3, 3)).copy()
    for Uk in _segment_props(schedule, d, a, s, strain, ac, ph, slices_per_period):
        U = Uk @ U
    return U


def propagate_state(schedule: PulseSchedule, psi0, *, delta=0.0, alpha=0.0, d_shift=0.0,
                    strain: StrainParams | None = None, ac: AcField | None = None,
                    ac_phase=0.0, slices_per_period: int = 50) -> np.ndarray:
    """Final state(s) after ``schedule``; same batching rules as :func:`schedule_propagator`."""
    d, a, s, ph = _batch_params(delta, alpha, d_shift, ac_phase)
    psi = np.broadcast_to(np.asarray(psi0, dtype=complex), d.shape + (3,)).copy()
    for Uk in _segment_props(schedule, d, a, s, strain, ac, ph, slices_per_period):
        psi = np.einsum("...ij,...j->...i", Uk, psi)
    return psi


def zero_population(psi) -> np.ndarray:
    """Normalised photoluminescence model: population of ``|0>``."""
    return np.abs(np.asarray(psi)[..., 1]) ** 2


def readout(state) -> float:
    """PL signal of a single spin-1 state: ``|<0|psi>|^2`` in ``[0, 1]``."""
    psi = np.asarray(state, dtype=complex)
    return float(abs(np.vdot(KET_ZERO, psi)) ** 2)


def shot_noise(y, n_avg: float, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    """Resample normalised signals as Poisson photon counts, rescaled back to [0, 1] units."""
    lam = np.clip(np.asarray(y, float), 0.0, None) * n_avg * n_shots
    return rng.poisson(lam) / (n_avg * n_shots)


def propagate_state_stack(schedules, psi0, *, delta=0.0, alpha=0.0, d_shift=0.0,
                          strain: StrainParams | None = None) -> np.ndarray:
    """Final states of several schedules that differ only in segment durations.

    The result has shape ``(len(schedules),) + batch + (3,)``; one
    eigendecomposition per segment serves every schedule.
    """
    schedules = list(schedules)
    if not schedules:
        raise ContractError("no schedules given")
    ref = schedules[0].segments
    for s in schedules[1:]:
        if len(s.segments) != len(ref) or any(
                type(a) is not type(b) or (isinstance(a, Pulse) and (a.rabi, a.phase) != (b.rabi, b.phase))
                for a, b in zip(s.segments, ref)):
            raise ContractError("schedules must share their segment structure")
    d, a, s, _ = _batch_params(delta, alpha, d_shift, 0.0)
    n = len(schedules)
    psi = np.broadcast_to(np.asarray(psi0, dtype=complex), (n,) + d.shape + (3,)).copy()
    pad = (1,) * d.ndim
    for k, seg in enumerate(ref):
        t = np.array([sch.segments[k].duration for sch in schedules]).reshape((n,) + pad)
        if not np.any(t > 0):
            continue
        H = _segment_hamiltonian(seg, d, a, s, strain)
        psi = np.einsum("...ij,...j->...i", expm_hermitian(H, t), psi)
    return psi
