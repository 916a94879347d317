"""Gradient ascent design of cooperative pi-pulse pairs.

A pair of piecewise-constant pulses, separated by the decoupling spacing
``tau``, should act as the identity on the ``{|+1>, |-1>}`` qubit for every
point of an error ensemble (detuning, Rabi-frequency error, offset of the
drive from D). The drive phase is restricted to 0 or pi, which is encoded
as the sign of a real amplitude.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .kernel import TWO_PI, ContractError, spin1_operators
from .sequences import Pulse

SX, _SY, SZ, SZ2 = spin1_operators()
H_CONTROL = TWO_PI * SX
QUBIT_PROJECTOR = np.diag([1.0, 0.0, 1.0]).astype(complex)

DEFAULT_OMEGA_MAX = 20.0
# pulse-pair spacings (µs) averaged in the figure of merit
DEFAULT_PAIR_TAUS = (0.25, 0.6, 1.0, 1.0 / 0.6)


@dataclass
class ControlPulse:
    """Signed Rabi amplitudes (MHz) on a grid of ``dt`` ns bins."""

    amplitudes: np.ndarray
    dt: float = 1.0
    omega_max: float = DEFAULT_OMEGA_MAX

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.amplitudes.ndim != 1 or self.amplitudes.size == 0:
            raise ContractError("amplitudes must be a non-empty 1-D array")
        if self.dt <= 0:
            raise ContractError("bin width must be positive")
        if np.any(np.abs(self.amplitudes) > self.omega_max * (1 + 1e-12)):
            raise ContractError(f"amplitude exceeds the bound {self.omega_max} MHz")

    @property
    def n_bins(self) -> int:
        return self.amplitudes.size

    @property
    def duration(self) -> float:
        """Duration in µs."""
        return self.n_bins * self.dt * 1e-3

    def segments(self) -> list:
        """Rectangular segments for the schedule builder (negative amplitude = phase pi)."""
        dt_us = self.dt * 1e-3
        return [Pulse(dt_us, abs(a), np.pi if a < 0 else 0.0) for a in self.amplitudes]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_index", "time_ns", "amplitude_MHz"])
        for i, a in enumerate(self.amplitudes):
            w.writerow([i, repr(float(i * self.dt)), repr(float(a))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, omega_max: float = DEFAULT_OMEGA_MAX) -> "ControlPulse":
        rows = list(csv.DictReader(io.StringIO(text)))
        t = np.array([float(r["time_ns"]) for r in rows])
        amps = np.array([float(r["amplitude_MHz"]) for r in rows])
        dt = float(t[1] - t[0]) if t.size > 1 else 1.0
        return cls(amps, dt, omega_max)

    @classmethod
    def rectangular(cls, rabi: float, duration_us: float, dt: float = 1.0,
                    omega_max: float = DEFAULT_OMEGA_MAX) -> "ControlPulse":
        n = duration_us * 1e3 / dt
        if abs(n - round(n)) > 1e-6:
            raise ContractError(f"bin width {dt} ns does not divide duration {duration_us} µs")
        return cls(np.full(int(round(n)), float(rabi)), dt, omega_max)


def ideal_pi_pair(Omega: float = DEFAULT_OMEGA_MAX):
    """Two rectangular pi pulses of length ``1/(2 Omega)``, each stored as a single bin."""
    T_ns = 1e3 / (2 * Omega)
    return (ControlPulse([Omega], T_ns, Omega), ControlPulse([Omega], T_ns, Omega))


@dataclass(frozen=True)
class ErrorPoint:
    delta: float = 0.0
    alpha: float = 0.0
    d_shift: float = 0.0
    weight: float = 1.0


@dataclass
class ErrorEnsemble:
    points: list = field(default_factory=list)

    def __post_init__(self):
        w = np.array([p.weight for p in self.points], dtype=float)
        if w.size == 0:
            raise ContractError("ensemble is empty")
        if np.any(w < 0):
            raise ContractError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ContractError("weights must sum to 1")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def arrays(self):
        p = self.points
        return (np.array([e.delta for e in p]), np.array([e.alpha for e in p]),
                np.array([e.d_shift for e in p]), np.array([e.weight for e in p]))

    def to_dict(self) -> list:
        return [{"delta_mhz": e.delta, "alpha": e.alpha, "d_shift_mhz": e.d_shift,
                 "weight": e.weight} for e in self.points]

    @classmethod
    def grid(cls, deltas: Sequence[float], alphas: Sequence[float], d_shifts: Sequence[float]):
        pts = list(product(deltas, alphas, d_shifts))
        w = 1.0 / len(pts)
        return cls([ErrorPoint(d, a, s, w) for d, a, s in pts])


def default_ensemble(deltas=(-2.16, 0.0, 2.16), alphas=(-0.1, 0.0, 0.1),
                     d_shifts=(-0.1, 0.0, 0.1)) -> ErrorEnsemble:
    """Uniform grid over hyperfine detuning, Rabi error and drive offset from D."""
    return ErrorEnsemble.grid(deltas, alphas, d_shifts)


def _free_durations(pulses, tau):
    T1, T2 = pulses[0].duration, pulses[1].duration
    f1, f2, f3 = tau / 2 - T1 / 2, tau - T1 / 2 - T2 / 2, tau / 2 - T2 / 2
    if min(f1, f2, f3) < -1e-12:
        raise ContractError(f"spacing tau={tau} µs is shorter than the pulses")
    return max(f1, 0.0), max(f2, 0.0), max(f3, 0.0)


def _check_pair(pulses):
    if len(pulses) != 2:
        raise ContractError("a pulse pair needs exactly two ControlPulse objects")
    if pulses[0].dt != pulses[1].dt:
        raise ContractError("both pulses must share one bin width")


def _eig_batch(H):
    w, v = np.linalg.eigh(H)
    return w, v


def _expm_from_eig(w, v, t):
    ph = np.exp(-1j * w * t)
    return (v * ph[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


class _PairModel:
    """Propagators and exact amplitude gradients for one pair on a batch of error points."""

    def __init__(self, pulses, deltas, alphas, d_shifts, tau):
        _check_pair(pulses)
        self.n1 = pulses[0].n_bins
        self.dt = pulses[0].dt * 1e-3
        self.free = _free_durations(pulses, tau)
        d = TWO_PI * np.asarray(deltas)[:, None, None]
        s = TWO_PI * np.asarray(d_shifts)[:, None, None]
        self.drift = d * SZ + s * SZ2
        self.scale = 1.0 + np.asarray(alphas)

    def free_props(self):
        w, v = _eig_batch(self.drift)
        return [_expm_from_eig(w, v, f) for f in self.free]

    def bins(self, u):
        """Eigen-decompositions and propagators of every bin: shapes (B, N, 3[, 3])."""
        H = self.drift[:, None] + (self.scale[:, None] * u[None, :])[..., None, None] * H_CONTROL
        w, v = _eig_batch(H)
        return w, v, _expm_from_eig(w, v, self.dt)

    def ordered(self, u):
        """Propagator list in time order, and the indices that hold control bins."""
        F1, F2, F3 = self.free_props()
        w, v, Ub = self.bins(u)
        n1 = self.n1
        props = [F1] + [Ub[:, k] for k in range(n1)] + [F2] + \
                [Ub[:, k] for k in range(n1, u.size)] + [F3]
        ctrl = list(range(1, n1 + 1)) + list(range(n1 + 2, u.size + 2))
        return props, ctrl, (w, v)

    def propagator(self, u):
        props, _, _ = self.ordered(u)
        U = props[0]
        for P in props[1:]:
            U = P @ U
        return U

    def value_and_grad(self, u, projectors):
        """Propagators, ``Tr(P U)`` and its per-bin derivatives for every projector ``P``."""
        props, ctrl, (w, v) = self.ordered(u)
        m = len(props)
        B = props[0].shape[0]
        eye = np.broadcast_to(np.eye(3, dtype=complex), (B, 3, 3))
        before = [None] * m
        acc = eye
        for i in range(m):
            before[i] = acc
            acc = props[i] @ acc
        U = acc
        after = [None] * m
        acc = eye
        for i in range(m - 1, -1, -1):
            after[i] = acc
            acc = acc @ props[i]
        gs = [np.einsum("ij,bji->b", P, U) for P in projectors]
        # Frechet derivative of exp(-i H dt) along scale * H_CONTROL
        lam = w
        ph = np.exp(-1j * lam * self.dt)
        diff = lam[..., :, None] - lam[..., None, :]
        num = ph[..., :, None] - ph[..., None, :]
        close = np.abs(diff) < 1e-9
        safe = np.where(close, 1.0, diff)
        gamma = np.where(close, -1j * self.dt * ph[..., :, None] * np.ones_like(diff), num / safe)
        vh = np.conj(np.swapaxes(v, -1, -2))
        Ec = vh @ H_CONTROL @ v
        dU = v @ (gamma * Ec) @ vh
        dU = dU * self.scale[:, None, None, None]
        dgs = []
        for P in projectors:
            dg = np.empty((B, u.size), dtype=complex)
            for j, idx in enumerate(ctrl):
                M = before[idx] @ P @ after[idx]
                dg[:, j] = np.einsum("bji,bij->b", M, dU[:, j])
            dgs.append(dg)
        return U, gs, dgs


def _ensemble_arrays(ensemble: ErrorEnsemble, taus):
    d, a, s, w = ensemble.arrays()
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    return d, a, s, w, taus


def pair_propagator(pulses, tau: float, e: ErrorPoint) -> np.ndarray:
    """Spin-1 propagator of ``[tau/2 free, pulse1, tau free, pulse2, tau/2 free]``.

    ``tau`` is the centre-to-centre spacing (µs); the free gaps are shortened
    by half the adjacent pulse durations.
    """
    for p in pulses:
        n = p.duration * 1e3 / p.dt
        if abs(n - round(n)) > 1e-9:
            raise ContractError("bin width does not divide the pulse duration")
    model = _PairModel(pulses, [e.delta], [e.alpha], [e.d_shift], tau)
    u = np.concatenate([pulses[0].amplitudes, pulses[1].amplitudes])
    return model.propagator(u)[0]


ZERO_PROJECTOR = np.diag([0.0, 1.0, 0.0]).astype(complex)
TARGETS = ("qubit", "full", "block")


def _target_projectors(target: str):
    if target == "qubit":
        return [QUBIT_PROJECTOR]
    if target == "full":
        return [np.eye(3, dtype=complex)]
    if target == "block":
        return [QUBIT_PROJECTOR, ZERO_PROJECTOR]
    raise ContractError(f"unknown target {target!r}; valid: {', '.join(TARGETS)}")


def _phi_terms(target, gs, dgs=None):
    """Per-point figure of merit and, with ``dgs``, its gradient."""
    if target == "qubit":
        g = gs[0]
        phi = np.abs(g) ** 2 / 4
        grad = None if dgs is None else 2 * np.real(np.conj(g)[:, None] * dgs[0]) / 4
    elif target == "full":
        g = gs[0]
        phi = np.abs(g) ** 2 / 9
        grad = None if dgs is None else 2 * np.real(np.conj(g)[:, None] * dgs[0]) / 9
    else:
        mods = [np.abs(g) for g in gs]
        total = mods[0] + mods[1]
        phi = total ** 2 / 9
        grad = None
        if dgs is not None:
            dmod = 0.0
            for g, m, dg in zip(gs, mods, dgs):
                # derivative of |g| is undefined at g = 0; take zero there
                safe = np.where(m > 1e-300, m, 1.0)
                dmod = dmod + np.where((m > 1e-300)[:, None],
                                       np.real(np.conj(g)[:, None] * dg) / safe[:, None], 0.0)
            grad = 2 * total[:, None] * dmod / 9
    return phi, grad


def _objective(u, pulses, ensemble, taus, target, want_grad=True):
    d, a, s, w, taus = _ensemble_arrays(ensemble, taus)
    projs = _target_projectors(target)
    phi = 0.0
    grad = np.zeros(u.size)
    for tau in taus:
        model = _PairModel(pulses, d, a, s, tau)
        if want_grad:
            _, gs, dgs = model.value_and_grad(u, projs)
            ph, gr = _phi_terms(target, gs, dgs)
            grad += w @ gr
        else:
            U = model.propagator(u)
            ph, _ = _phi_terms(target, [np.einsum("ij,bji->b", P, U) for P in projs])
        phi += float(np.sum(w * ph))
    return phi / taus.size, grad / taus.size


def figure_of_merit(pulses, ensemble: ErrorEnsemble, *, taus=DEFAULT_PAIR_TAUS,
                    target: str = "qubit") -> float:
    """Weighted ensemble mean of the pair fidelity, averaged over the spacings ``taus``.

    ``target="qubit"``: ``|Tr(P U P)|^2 / 4`` with ``P`` the projector on
    ``|+-1>``, so leakage into ``|0>`` lowers the trace. ``"full"``: the
    strict spin-1 identity, ``|Tr U|^2 / 9``. ``"block"``:
    ``(|Tr(P U P)| + |<0|U|0>|)^2 / 9``, the identity up to a relative phase
    between ``|0>`` and the ``|+-1>`` block (the phase a drive offset from
    D imprints during free evolution).
    """
    _check_pair(pulses)
    u = np.concatenate([pulses[0].amplitudes, pulses[1].amplitudes])
    return _objective(u, pulses, ensemble, taus, target, want_grad=False)[0]


def gradient(pulses, ensemble: ErrorEnsemble, *, taus=DEFAULT_PAIR_TAUS,
             target: str = "qubit") -> np.ndarray:
    """Derivative of :func:`figure_of_merit` with respect to every bin amplitude (per MHz)."""
    _check_pair(pulses)
    u = np.concatenate([pulses[0].amplitudes, pulses[1].amplitudes])
    return _objective(u, pulses, ensemble, taus, target)[1]


def spin_flip_quality(pulse: ControlPulse, ensemble: ErrorEnsemble) -> float:
    """Ensemble mean of ``|<-1| U_pulse |+1>|^2`` for a single pulse."""
    d, a, s, w = ensemble.arrays()
    model = _PairModel([pulse, pulse], d, a, s, 2 * pulse.duration)
    _, _, Ub = model.bins(pulse.amplitudes)
    U = np.broadcast_to(np.eye(3, dtype=complex), (len(d), 3, 3))
    for k in range(pulse.n_bins):
        U = Ub[:, k] @ U
    return float(np.sum(w * np.abs(U[:, 2, 0]) ** 2))


@dataclass
class OptimizationResult:
    pulses: tuple
    history: list
    converged: bool
    message: str
    flip_quality: tuple = ()

    @property
    def phi(self) -> float:
        return self.history[-1]

    def to_json(self, ensemble: ErrorEnsemble, taus=DEFAULT_PAIR_TAUS) -> str:
        p1, p2 = self.pulses
        return json.dumps({
            "dt_ns": p1.dt, "Omega_max_mhz": p1.omega_max,
            "ensemble": ensemble.to_dict(), "pair_taus_us": list(taus),
            "final_phi": self.phi, "iterations": len(self.history) - 1,
            "flip_quality": list(self.flip_quality),
            "pulse1_mhz": p1.amplitudes.tolist(), "pulse2_mhz": p2.amplitudes.tolist(),
        }, indent=2)


def seed_pair(n_bins: int = 50, dt: float = 1.0, omega_max: float = DEFAULT_OMEGA_MAX,
              seed: int = 0, noise: float = 0.25):
    """Starting guess: pi pulses of opposite sign spread over ``n_bins``, with seeded ripple.

    Opposite signs put the seed in the basin where the pair's net area
    vanishes, which is what makes it insensitive to Rabi-amplitude errors.
    """
    rng = np.random.default_rng(seed)
    base = 1e3 / (2 * n_bins * dt)
    pulses = []
    for sign in (1.0, -1.0):
        u = sign * base + noise * omega_max * rng.uniform(-1, 1, n_bins)
        pulses.append(ControlPulse(np.clip(u, -omega_max, omega_max), dt, omega_max))
    return tuple(pulses)


def optimize_pair(seed_pulses, ensemble: ErrorEnsemble, max_iters: int = 500,
                  target_phi: float = 1.0 - 1e-6, *, taus=DEFAULT_PAIR_TAUS,
                  target: str = "qubit") -> OptimizationResult:
    """Projected quasi-Newton ascent (L-BFGS-B with box bounds) of the pair figure of merit.

    Every iterate stays inside ``[-omega_max, omega_max]``; the history of
    the figure of merit is non-decreasing because each accepted step passes
    a sufficient-increase line search.
    """
    _check_pair(seed_pulses)
    _target_projectors(target)
    p1, p2 = seed_pulses
    omax = p1.omega_max
    n1 = p1.n_bins
    u0 = np.clip(np.concatenate([p1.amplitudes, p2.amplitudes]), -omax, omax)
    template = (p1, p2)

    cache = {}

    def fun(u):
        key = u.tobytes()
        if key not in cache:
            phi, g = _objective(u, template, ensemble, taus, target)
            if not np.isfinite(phi):
                raise FloatingPointError("figure of merit is not finite")
            cache.clear()
            cache[key] = (phi, g)
        phi, g = cache[key]
        return 1.0 - phi, -g

    history = [1.0 - fun(u0)[0]]
    state = {"u": u0}

    class _Done(Exception):
        pass

    def callback(xk):
        phi = 1.0 - fun(xk)[0]
        history.append(phi)
        state["u"] = xk.copy()
        if phi >= target_phi:
            raise _Done

    converged, message = history[0] >= target_phi, "target reached"
    if not converged:
        try:
            res = minimize(fun, u0, jac=True, method="L-BFGS-B", bounds=[(-omax, omax)] * u0.size,
                           callback=callback,
                           options={"maxiter": max_iters, "ftol": 1e-15, "gtol": 1e-12})
            message = str(res.message)
            if res.fun <= 1.0 - history[-1] - 1e-15:
                history.append(1.0 - res.fun)
                state["u"] = res.x
            converged = history[-1] >= target_phi
        except _Done:
            converged = True
        except FloatingPointError as exc:
            message = f"aborted: {exc}"
    u = np.clip(state["u"], -omax, omax)
    q1 = ControlPulse(u[:n1], p1.dt, omax)
    q2 = ControlPulse(u[n1:], p2.dt, omax)
    flips = (spin_flip_quality(q1, ensemble), spin_flip_quality(q2, ensemble))
    return OptimizationResult((q1, q2), history, converged, message, flips)
