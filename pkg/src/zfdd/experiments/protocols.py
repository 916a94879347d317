"""Measurement protocols: Rabi, Ramsey, DD scans, robustness, thermometry, strain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from ..hamiltonians import A_PAR_MHZ, GAMMA_NV_MHZ_PER_G, StrainParams, SystemParams, rotating_matrix
from ..kernel import DRESSED_BASIS, KET_ZERO, TWO_PI, ContractError, PeakList, TimeSeries, \
    dominant_frequencies, expm_hermitian
from ..sequences import (PhaseSequence, Pulse, PulseTimings, build_schedule, composite_pi,
                         get_sequence, ldd_phases, pulse_timings)
from .engine import AcField, propagate_state, propagate_state_stack, zero_population
from .parallel import parallel_map

KET_PLUS = DRESSED_BASIS[:, 0]
NUCLEAR_SPINS = (-1, 0, 1)
ROBUSTNESS_TAUS = np.round(np.arange(0.125, 2.105 + 1e-9, 0.02), 10)
MAP_TAU = 1.0 / (2 * 0.3)
MAP_OMEGA = 20.0


@dataclass
class RobustnessGrid:
    """Values on an ``(alpha, delta)`` grid: ``values[i, j]`` at ``alpha_axis[i]``, ``delta_axis[j]``."""

    delta_axis: np.ndarray
    alpha_axis: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.delta_axis = np.asarray(self.delta_axis, float)
        self.alpha_axis = np.asarray(self.alpha_axis, float)
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.alpha_axis.size, self.delta_axis.size):
            raise ContractError("grid values do not match the axes")
        if np.any(self.values < -1e-9) or np.any(self.values > 1 + 1e-9):
            raise ContractError("grid values must lie in [0, 1]")

    @property
    def median(self) -> float:
        return float(np.median(self.values))


def _nuclear_deltas(Delta: float, A_par: float, nuclear_avg: bool):
    if not nuclear_avg:
        return np.array([Delta])
    return Delta + A_par * np.array(NUCLEAR_SPINS, float)


def _check_drive(Omega, deltas):
    worst = float(np.max(np.abs(deltas)))
    if not Omega > worst:
        raise ContractError(f"need Omega > |Delta| for every member (Omega={Omega}, |Delta|={worst})")


def rabi(p: SystemParams, t_max: float, dt: float) -> TimeSeries:
    """``|0>`` population under continuous drive, sampled on ``[0, t_max]`` (µs)."""
    if dt <= 0:
        raise ContractError("dt must be positive")
    if t_max <= 0:
        raise ContractError("t_max must be positive")
    t = np.arange(0.0, t_max + dt / 2, dt)
    H = rotating_matrix(TWO_PI * p.detuning, TWO_PI * p.Omega, p.phi, TWO_PI * p.d_shift)
    w, v = np.linalg.eigh(H)
    c = np.conj(v[1, :])
    amp = (v[1, :] * c)[None, :] * np.exp(-1j * np.outer(t, w))
    y = np.abs(amp.sum(axis=1)) ** 2
    return TimeSeries(t, y, {"kind": "rabi", "Omega_mhz": p.Omega, "Delta_mhz": p.detuning})


def ramsey(p: SystemParams, B: float, tau_range, nuclear_avg: bool = True, k: int = 3):
    """Double-quantum Ramsey ``T' - tau - T''`` at bias field ``B`` (G).

    Each ensemble member sees ``Delta + gamma_nv B + m_I A_par``; the pulse
    durations are set for the nuclear-free detuning ``Delta + gamma_nv B``.
    Returns the trace and its ``k`` strongest spectral lines.
    """
    tau = np.asarray(tau_range, float)
    if tau.ndim != 1 or tau.size < 2 or np.any(tau < 0):
        raise ContractError("tau_range must be a non-negative 1-D grid")
    centre = p.Delta + p.gamma_nv * B
    deltas = _nuclear_deltas(centre, p.A_par, nuclear_avg)
    _check_drive(p.Omega, deltas)
    tm = pulse_timings(p.Omega, centre)
    w, d_ang, s = TWO_PI * p.Omega, TWO_PI * deltas, TWO_PI * p.d_shift
    H = rotating_matrix(d_ang, w, p.phi, s)
    U1 = expm_hermitian(H, tm.T_prime)
    U2 = expm_hermitian(H, tm.T_doubleprime)
    psi = U1 @ KET_ZERO
    # free evolution is diagonal: phases exp(-i h_jj tau)
    diag = np.real(np.einsum("mii->mi", rotating_matrix(d_ang, 0.0, 0.0, s)))
    psi_t = psi[None] * np.exp(-1j * tau[:, None, None] * diag[None])
    out = np.einsum("mij,tmj->tmi", U2, psi_t)
    y = zero_population(out).mean(axis=1)
    ts = TimeSeries(tau, y, {"kind": "ramsey", "B_G": B, "nuclear_avg": nuclear_avg,
                             "T_prime_us": tm.T_prime, "T_doubleprime_us": tm.T_doubleprime})
    return ts, dominant_frequencies(ts, k=k)


def expected_ramsey_lines(B: float, A_par: float = A_PAR_MHZ, gamma_nv: float = GAMMA_NV_MHZ_PER_G):
    """Double-quantum line positions ``2 |gamma B + m_I A|`` (MHz), sorted and de-duplicated."""
    return sorted({round(abs(2 * (gamma_nv * B + m * A_par)), 12) for m in NUCLEAR_SPINS})


def hyperfine_from_lines(peaks: PeakList) -> float:
    """Hyperfine constant from the strongest non-zero zero-field line (``f = 2 A``)."""
    f = [q for q, _ in peaks if q > 4 * peaks.resolution]
    if not f:
        raise ContractError("no non-zero line found")
    return f[0] / 2


def _pair_shapes(pair):
    return [pair[0].segments(), pair[1].segments()]


def _resolve_dd(seq, repetitions):
    """Phase list and pulse shapes for an LDD/reference sequence or a GRAPE pulse pair."""
    if isinstance(seq, str):
        seq = get_sequence(seq)
    if isinstance(seq, PhaseSequence):
        return PhaseSequence(seq.name, seq.phases * repetitions), None
    if isinstance(seq, (tuple, list)) and len(seq) == 2:
        return PhaseSequence("OC", (0.0, 0.0) * repetitions), _pair_shapes(seq)
    raise ContractError(f"cannot interpret {seq!r} as a decoupling sequence")


def _dd_point(args):
    seq, shapes, tm, tau, Omega, deltas, alpha, d_shift, ac = args
    sched = build_schedule(seq, tm, tau, Omega, True, pulse_shapes=shapes)
    phases = ac.phases() if ac is not None else np.zeros(1)
    psi = propagate_state(sched, KET_ZERO, delta=deltas[:, None], alpha=alpha, d_shift=d_shift,
                          ac=ac, ac_phase=phases[None, :])
    return float(zero_population(psi).mean())


def dd_ac_scan(seq, p: SystemParams, ac: AcField | None, tau_range, *, repetitions: int = 1,
               nuclear_avg: bool = False, alpha: float = 0.0, threads: int | None = None) -> TimeSeries:
    """Readout after ``T' - DD(tau) - T''`` while sweeping the pulse spacing ``tau``.

    ``seq`` is a sequence name, a :class:`PhaseSequence` or a pair of
    :class:`~zfdd.grape.ControlPulse`; the block is applied ``repetitions``
    times. With ``ac.phase0 == "average"`` the signal is averaged over the
    field phase.
    """
    if repetitions < 1:
        raise ContractError("repetitions must be >= 1")
    tau = np.asarray(tau_range, float)
    if tau.ndim != 1 or tau.size == 0 or np.any(tau <= 0):
        raise ContractError("tau_range must be a positive 1-D grid")
    phased, shapes = _resolve_dd(seq, repetitions)
    deltas = _nuclear_deltas(p.detuning, p.A_par, nuclear_avg)
    _check_drive(p.Omega, deltas)
    tm = pulse_timings(p.Omega, p.detuning)
    jobs = [(phased, shapes, tm, float(t), p.Omega, deltas, alpha, p.d_shift, ac) for t in tau]
    y = np.array(parallel_map(_dd_point, jobs, threads=threads))
    meta = {"kind": "dd_ac_scan", "sequence": phased.name, "n_pulses": phased.n_pulses,
            "ac": None if ac is None else ac.to_dict()}
    return TimeSeries(tau, y, meta)


def dip_position(ts: TimeSeries) -> float:
    """Location of the deepest point of a scan, refined by a parabola through its neighbours."""
    i = int(np.argmin(ts.y))
    if 0 < i < ts.t.size - 1:
        y0, y1, y2 = ts.y[i - 1:i + 2]
        den = y0 - 2 * y1 + y2
        if den > 0:
            return float(ts.t[i] + 0.5 * (y0 - y2) / den * (ts.t[i + 1] - ts.t[i]))
    return float(ts.t[i])


def _stack_readout(seq, tm, taus, Omega, shapes, with_wrappers, psi0, project, **kw):
    scheds = [build_schedule(seq, tm, float(t), Omega, with_wrappers, pulse_shapes=shapes) for t in taus]
    psi = propagate_state_stack(scheds, psi0, **kw)
    return np.abs(np.einsum("i,...i->...", np.conj(project), psi)) ** 2


def robustness_trace(seq, p: SystemParams, tau_window=None, *, pulse_shapes=None,
                     repetitions: int = 1) -> TimeSeries:
    """Readout of ``T' - DD(tau) - T''`` versus ``tau`` without AC field.

    The default window is 0.125 µs to 2.105 µs in 20 ns steps. ``seq`` may
    also be a GRAPE pulse pair; the block is applied ``repetitions`` times.
    """
    if repetitions < 1:
        raise ContractError("repetitions must be >= 1")
    taus = ROBUSTNESS_TAUS if tau_window is None else np.asarray(tau_window, float)
    phased, shapes = _resolve_dd(seq, repetitions)
    shapes = pulse_shapes if pulse_shapes is not None else shapes
    _check_drive(p.Omega, [p.detuning])
    tm = pulse_timings(p.Omega, p.detuning)
    y = _stack_readout(phased, tm, taus, p.Omega, shapes, True, KET_ZERO, KET_ZERO,
                       delta=p.detuning, d_shift=p.d_shift)
    return TimeSeries(taus, np.clip(y, 0.0, 1.0), {"kind": "robustness", "sequence": phased.name})


def robustness_metric(seq, p: SystemParams, tau_window=None, *, pulse_shapes=None,
                      repetitions: int = 1) -> float:
    """Mean of :func:`robustness_trace`; 1 means perfect decoupling."""
    ts = robustness_trace(seq, p, tau_window, pulse_shapes=pulse_shapes, repetitions=repetitions)
    return float(np.mean(ts.y))


def robustness_map(seq, delta_axis, alpha_axis, initial_state=None, *, Omega: float = MAP_OMEGA,
                   tau: float = MAP_TAU, strain: StrainParams | None = None,
                   pulse_shapes=None) -> RobustnessGrid:
    """Fidelity ``|<psi0|psi_final>|^2`` after the bare DD train on a ``(alpha, Delta)`` grid.

    Pulses are rectangular with duration ``1/(2 Omega)`` (25 ns at 20 MHz)
    and the Rabi frequency is ``Omega (1 + alpha)``; the initial state
    defaults to the bright state ``|+>``.
    """
    psi0 = KET_PLUS if initial_state is None else np.asarray(initial_state, complex)
    phased, shapes = _resolve_dd(seq, 1)
    shapes = pulse_shapes if pulse_shapes is not None else shapes
    da = np.asarray(delta_axis, float)
    aa = np.asarray(alpha_axis, float)
    T = 1.0 / (2 * Omega)
    tm = PulseTimings(T, T, T, 0.0)
    sched = build_schedule(phased, tm, tau, Omega, False, pulse_shapes=shapes)
    psi = propagate_state(sched, psi0, delta=da[None, :], alpha=aa[:, None], strain=strain)
    vals = np.abs(np.einsum("i,...i->...", np.conj(psi0), psi)) ** 2
    return RobustnessGrid(da, aa, np.clip(vals, 0.0, 1.0))


def strain_robustness(seq, s: StrainParams, alpha_axis, delta_axis, **kw) -> RobustnessGrid:
    """:func:`robustness_map` under the strained Hamiltonian."""
    return robustness_map(seq, delta_axis, alpha_axis, strain=s, **kw)


D_RAMSEY_KINDS = ("standard", "composite", "LDD4b-phased", "OC pair")


def d_ramsey(delta_D: float, n_pulses: int = 8, pulse_kind: str = "standard", tau_range=None, *,
             Omega: float = 20.0, nuclear_avg: bool = True, A_par: float = A_PAR_MHZ,
             oc_pair=None) -> TimeSeries:
    """Thermometry sequence ``T'/2 - [tau/2 - pi - tau/2] x n - T'/2`` with the drive offset from D.

    ``delta_D`` (MHz) is the single-quantum offset ``D - omega_c``; the
    signal oscillates at ``n_pulses * delta_D`` versus ``tau``. Pulse kinds
    are rectangular (``standard``), the composite pi pulse, rectangular with
    LDD4b phases, or a GRAPE pair (``oc_pair``).
    """
    if pulse_kind not in D_RAMSEY_KINDS:
        raise ContractError(f"unknown pulse kind {pulse_kind!r}; valid: {', '.join(D_RAMSEY_KINDS)}")
    if n_pulses < 1:
        raise ContractError("n_pulses must be >= 1")
    taus = np.arange(0.1, 2.6, 0.01) if tau_range is None else np.asarray(tau_range, float)
    shapes = None
    phases = (0.0,) * n_pulses
    if pulse_kind == "composite":
        shapes = [composite_pi(Omega)]
    elif pulse_kind == "LDD4b-phased":
        if n_pulses % 4:
            raise ContractError("LDD4b phasing needs a multiple of 4 pulses")
        phases = ldd_phases("LDD4b").phases * (n_pulses // 4)
    elif pulse_kind == "OC pair":
        if oc_pair is None:
            raise ContractError("pulse kind 'OC pair' needs oc_pair")
        if n_pulses % 2:
            raise ContractError("a pulse pair needs an even pulse count")
        shapes = _pair_shapes(oc_pair)
    deltas = _nuclear_deltas(0.0, A_par, nuclear_avg)
    _check_drive(Omega, deltas)
    tm = pulse_timings(Omega, 0.0)
    seq = PhaseSequence(pulse_kind, phases)
    scheds = []
    for t in taus:
        sch = build_schedule(seq, tm, float(t), Omega, True, pulse_shapes=shapes,
                             wrapper_durations=(tm.T_prime / 2, tm.T_prime / 2))
        scheds.append(sch)
    psi = propagate_state_stack(scheds, KET_ZERO, delta=deltas, d_shift=delta_D)
    y = zero_population(psi).mean(axis=1)
    return TimeSeries(taus, y, {"kind": "d_ramsey", "delta_D_mhz": delta_D, "n_pulses": n_pulses,
                                "pulse_kind": pulse_kind})


def _damped_cosine(t, a, T, f, ph, c):
    return a * np.exp(-t / T) * np.cos(TWO_PI * f * t + ph) + c


def damped_cosine_fit(ts: TimeSeries):
    """Least-squares damped-cosine fit; returns ``(params, rms_residual)``.

    ``params`` is ``(amplitude, decay_us, freq_mhz, phase, offset)``. The
    start frequency is the dominant spectral line.
    """
    t, y = ts.t, ts.y
    peaks = dominant_frequencies(ts, k=1)
    f0 = peaks[0][0] if peaks else 1.0 / (t[-1] - t[0])
    c0 = float(np.mean(y))
    a0 = float(np.ptp(y) / 2) or 1e-3
    best = None
    for ph0 in np.linspace(0, TWO_PI, 8, endpoint=False):
        try:
            popt, _ = curve_fit(_damped_cosine, t, y, p0=(a0, 10 * (t[-1] - t[0]), f0, ph0, c0),
                                bounds=([0, 1e-3, 0, -np.inf, -np.inf], [np.inf, 1e6, np.inf, np.inf, np.inf]),
                                maxfev=20000)
        except RuntimeError:
            continue
        rms = float(np.sqrt(np.mean((y - _damped_cosine(t, *popt)) ** 2)))
        if best is None or rms < best[1]:
            best = (tuple(float(x) for x in popt), rms)
    if best is None:
        raise ContractError("damped-cosine fit failed")
    return best
