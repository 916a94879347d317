"""Decoupling phase tables, pulse durations and timed pulse schedules."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .hamiltonians import rotating_matrix
from .kernel import DRESSED_BASIS, KET_ZERO, TWO_PI, ContractError, expm_hermitian

PI = np.pi

_LDD_TABLE = {
    "LDD4a": (0, 0, 1, 1),
    "LDD4b": (0, 1, 1, 0),
    "LDD8a": (0, 0, 1, 1, 0, 1, 1, 0),
    "LDD8b": (0, 1, 1, 0, 0, 0, 1, 1),
    "LDD16a": (0, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1),
    "LDD16b": (0, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 1, 1, 1, 0, 0),
}
LDD_NAMES = tuple(_LDD_TABLE)

_XY8 = (0.0, PI / 2, 0.0, PI / 2, PI / 2, 0.0, PI / 2, 0.0)


@dataclass(frozen=True)
class PhaseSequence:
    name: str
    phases: tuple

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))

    def __len__(self):
        return len(self.phases)

    @property
    def n_pulses(self) -> int:
        return len(self.phases)

    def reversed(self) -> "PhaseSequence":
        return PhaseSequence(self.name + "_rev", self.phases[::-1])

    def to_dict(self) -> dict:
        return {"name": self.name, "phases_rad": list(self.phases), "n_pulses": self.n_pulses}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseSequence":
        seq = cls(d["name"], d["phases_rad"])
        if "n_pulses" in d and d["n_pulses"] != seq.n_pulses:
            raise ContractError("n_pulses does not match the phase list")
        return seq


def ldd_phases(name: str) -> PhaseSequence:
    """Phase table of an LDD sequence (all phases 0 or pi)."""
    try:
        bits = _LDD_TABLE[name]
    except KeyError:
        raise ContractError(
            f"unknown LDD sequence {name!r}; valid names: {', '.join(LDD_NAMES)}") from None
    return PhaseSequence(name, tuple(PI * b for b in bits))


def reference_phases(name: str, repeats: int = 1) -> PhaseSequence:
    """Conventional phase lists: ``XY8`` (optionally repeated) or ``ZERO(n)``."""
    if name == "XY8":
        return PhaseSequence("XY8" if repeats == 1 else f"XY8-{repeats}", _XY8 * repeats)
    if name.startswith("ZERO(") and name.endswith(")"):
        try:
            n = int(name[5:-1])
        except ValueError:
            raise ContractError(f"bad pulse count in {name!r}") from None
        if n < 1:
            raise ContractError("ZERO(n) needs n >= 1")
        return PhaseSequence(name, (0.0,) * n)
    raise ContractError(f"unknown reference sequence {name!r}; valid: XY8, ZERO(n)")


def get_sequence(name: str) -> PhaseSequence:
    """Resolve any known sequence name, LDD or reference."""
    if name in _LDD_TABLE:
        return ldd_phases(name)
    if name.startswith("XY8-"):
        return reference_phases("XY8", int(name[4:]))
    try:
        return reference_phases(name)
    except ContractError:
        raise ContractError(
            f"unknown sequence {name!r}; valid: {', '.join(LDD_NAMES)}, XY8, XY8-<k>, ZERO(n)"
        ) from None


@dataclass(frozen=True)
class PulseTimings:
    """Pulse durations in µs for given drive strength and detuning."""

    T_prime: float
    T_doubleprime: float
    T_pi: float
    phi_state_angle: float

    def __post_init__(self):
        if min(self.T_prime, self.T_doubleprime, self.T_pi) <= 0:
            raise ContractError("pulse durations must be positive")


def _zero_population(Omega: float, Delta: float, t):
    """``|<0|exp(-i H t)|0>|^2`` for the resonant drive, closed form (angular inputs)."""
    wbar2 = Omega ** 2 + Delta ** 2
    c0 = (Omega ** 2 * np.cos(np.sqrt(wbar2) * t) + Delta ** 2) / wbar2
    return c0 ** 2


def pulse_timings(Omega: float, Delta: float) -> PulseTimings:
    """Transfer, recovery and double-quantum pi-pulse durations.

    ``Omega`` and ``Delta`` are linear (MHz) with ``Omega > |Delta|``. The
    recovery time ``T_doubleprime`` is the shortest duration that maximises
    the return to ``|0>`` right after the transfer pulse.
    """
    if not Omega > abs(Delta):
        raise ContractError(f"need Omega > |Delta| (got Omega={Omega}, Delta={Delta})")
    w, d = TWO_PI * Omega, TWO_PI * abs(Delta)
    wbar = np.hypot(w, d)
    T_prime = np.arccos(-d ** 2 / w ** 2) / wbar
    T_pi = PI / wbar
    angle = float(np.arccos(np.clip(2 * d ** 2 / w ** 2 - 1, -1.0, 1.0)))

    def loss(t):
        return 1.0 - _zero_population(w, d, T_prime + t)

    # coarse scan on one full period, then bounded refinement around the best sample
    grid = np.linspace(0.0, 2 * PI / wbar, 4001)
    vals = loss(grid)
    best = int(np.flatnonzero(vals <= vals.min() + 1e-9)[0])
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    res = minimize_scalar(loss, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    T_dp = float(res.x) if res.fun <= vals[best] else float(grid[best])
    return PulseTimings(float(T_prime), T_dp, float(T_pi), angle)


def phi_state(angle: float) -> np.ndarray:
    """``(1 - e^{i a})/2 |+> - (1 + e^{i a})/2 |->`` in the ``{|+1>, |0>, |-1>}`` basis."""
    e = np.exp(1j * angle)
    plus, minus = DRESSED_BASIS[:, 0], DRESSED_BASIS[:, 2]
    return (1 - e) / 2 * plus - (1 + e) / 2 * minus


def pi_gate_action(Omega: float, Delta: float, phi: float = 0.0) -> dict:
    """Images of the dressed states under one resonant pulse of length ``pi/Omega_bar``.

    Returns a dict ``{'+', '-', '0'}`` of 3-vectors written in the dressed
    basis ``{|+>, |0>, |->}``.
    """
    w, d = TWO_PI * Omega, TWO_PI * Delta
    H = rotating_matrix(d, w, phi)
    U = expm_hermitian(H, PI / np.hypot(w, d))
    Ud = np.conj(DRESSED_BASIS.T) @ U @ DRESSED_BASIS
    return {"+": Ud[:, 0], "0": Ud[:, 1], "-": Ud[:, 2]}


def pi_gate_expected(Omega: float, Delta: float, phi: float = 0.0) -> dict:
    """Closed-form dressed-state map of a double-quantum pi pulse."""
    w, d = TWO_PI * Omega, TWO_PI * Delta
    wb2 = w * w + d * d
    c = (w * w - d * d) / wb2
    x = 2 * d * w / wb2
    return {
        "+": np.array([-1, 0, 0], dtype=complex),
        "-": np.array([0, -x * np.exp(1j * phi), c], dtype=complex),
        "0": np.array([0, -c, -x * np.exp(-1j * phi)], dtype=complex),
    }


@dataclass(frozen=True)
class Pulse:
    """Rectangular drive segment: duration (µs), Rabi frequency (MHz), phase (rad)."""

    duration: float
    rabi: float
    phase: float = 0.0

    def shifted(self, phi: float) -> "Pulse":
        return Pulse(self.duration, self.rabi, self.phase + phi)


@dataclass(frozen=True)
class Free:
    duration: float


@dataclass
class PulseSchedule:
    """Ordered drive and free-evolution segments of one experiment shot."""

    segments: list
    tau: float = 0.0
    n_pulses: int = 0
    pulse_centers: list = field(default_factory=list)

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)


def rect_pi(Omega: float, Delta: float = 0.0) -> list:
    """Single rectangular double-quantum pi pulse of length ``pi/Omega_bar``."""
    wbar = np.hypot(Omega, Delta)
    return [Pulse(1.0 / (2.0 * wbar), Omega, 0.0)]


def composite_pi(Omega: float) -> list:
    """Detuning-robust composite pi pulse of total area ``2 pi``.

    Two-level proxy rotations ``(3pi/2)_0 (pi/2)_pi``; the first-order
    detuning errors of the two parts cancel.
    """
    w = TWO_PI * Omega
    return [Pulse(1.5 * PI / w, Omega, 0.0), Pulse(0.5 * PI / w, Omega, PI)]


def build_schedule(seq: PhaseSequence, timings: PulseTimings, tau: float, Omega: float,
                   with_wrappers: bool = True, *, pulse_shapes: Sequence[Sequence[Pulse]] | None = None,
                   wrapper_durations: tuple[float, float] | None = None) -> PulseSchedule:
    """Expand a phase list into a timed schedule with CPMG spacing.

    Pulse ``k`` (1-based) is centred at ``(k - 1/2) tau`` inside the
    decoupling window of length ``n tau``. ``pulse_shapes`` is cycled over
    the pulses (default: one rectangular ``T_pi`` pulse); the sequence phase
    is added to every sub-pulse. Wrappers are the ``T'`` / ``T''`` pulses,
    or ``wrapper_durations`` when given.
    """
    if pulse_shapes is None:
        pulse_shapes = [[Pulse(timings.T_pi, Omega, 0.0)]]
    shapes = [list(s) for s in pulse_shapes]
    n = seq.n_pulses
    segs: list = []
    if with_wrappers:
        first, last = wrapper_durations or (timings.T_prime, timings.T_doubleprime)
        segs.append(Pulse(first, Omega, 0.0))
    t0 = sum(s.duration for s in segs)
    centers = []
    if n == 0:
        segs.append(Free(tau))
    else:
        durations = [sum(p.duration for p in shapes[k % len(shapes)]) for k in range(n)]
        if tau < max(durations) - 1e-12:
            raise ContractError(
                f"tau={tau} µs is shorter than the pulse duration {max(durations)} µs")
        prev_half = 0.0
        for k, phi in enumerate(seq.phases):
            d = durations[k]
            gap = (tau / 2 if k == 0 else tau) - prev_half - d / 2
            segs.append(Free(max(gap, 0.0)))
            segs.extend(p.shifted(phi) for p in shapes[k % len(shapes)])
            centers.append(t0 + (k + 0.5) * tau)
            prev_half = d / 2
        segs.append(Free(max(tau / 2 - prev_half, 0.0)))
    if with_wrappers:
        segs.append(Pulse(last, Omega, 0.0))
    return PulseSchedule(segs, tau, n, centers)


def zero_return(timings: PulseTimings, Omega: float, Delta: float) -> float:
    """``|<0| U(T'') U(T') |0>|^2`` with no free evolution in between."""
    H = rotating_matrix(TWO_PI * Delta, TWO_PI * Omega, 0.0)
    U = expm_hermitian(H, timings.T_doubleprime) @ expm_hermitian(H, timings.T_prime)
    return float(abs(KET_ZERO @ U @ KET_ZERO) ** 2)
