"""Dense linear algebra for spin-1 and two-level propagators.

Conventions used throughout the package:

* user-facing frequencies are linear (MHz), times are in µs;
* every Hamiltonian handed to this module is angular (rad/µs), so a
  frequency ``f`` in MHz enters as ``2*pi*f``;
* the spin-1 basis is ordered ``{|+1>, |0>, |-1>}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
SQRT2 = np.sqrt(2.0)

HERMITIAN_TOL = 1e-10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_PLUS1 = np.array([1, 0, 0], dtype=complex)
KET_ZERO = np.array([0, 1, 0], dtype=complex)
KET_MINUS1 = np.array([0, 0, 1], dtype=complex)
KET_BRIGHT = (KET_PLUS1 + KET_MINUS1) / SQRT2
KET_DARK = (KET_PLUS1 - KET_MINUS1) / SQRT2

# columns are |+>, |0>, |-> expressed in the {|+1>, |0>, |-1>} basis
DRESSED_BASIS = np.column_stack([KET_BRIGHT, KET_ZERO, KET_DARK])


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


def spin1_operators():
    """Return ``(Sx, Sy, Sz, Sz**2)`` for spin 1 in the ``{|+1>, |0>, |-1>}`` basis."""
    s = 1.0 / SQRT2
    sx = np.array([[0, s, 0], [s, 0, s], [0, s, 0]], dtype=complex)
    sy = np.array([[0, -1j * s, 0], [1j * s, 0, -1j * s], [0, 1j * s, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz, sz @ sz


def is_hermitian(H, tol: float = HERMITIAN_TOL) -> bool:
    H = np.asarray(H)
    return bool(np.all(np.abs(H - np.conj(np.swapaxes(H, -1, -2))) <= tol))


def expm_hermitian(H, t=1.0):
    """Batched ``exp(-i H t)`` for Hermitian ``H`` of shape ``(..., d, d)``.

    ``t`` broadcasts against the batch dimensions of ``H``. No input
    checking is done here; :func:`evolve_segment` is the checked entry point.
    """
    H = np.asarray(H, dtype=complex)
    w, v = np.linalg.eigh(H)
    t = np.asarray(t, dtype=float)[..., None]
    phases = np.exp(-1j * w * t)
    return (v * phases[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def evolve_segment(H, t: float) -> np.ndarray:
    """Exact propagator ``exp(-i H t)`` of a constant Hermitian generator.

    Parameters
    ----------
    H : array_like
        Square Hermitian matrix in rad/µs.
    t : float
        Duration in µs, ``t >= 0``.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {H.shape}")
    if not is_hermitian(H):
        raise ContractError("Hamiltonian is not Hermitian to 1e-10")
    if t < 0:
        raise ContractError(f"duration must be non-negative, got {t}")
    return expm_hermitian(H, t)


def evolve_schedule(segments: Iterable[tuple[np.ndarray, float]], dim: int | None = None):
    """Ordered product ``U_n ... U_1`` of constant segments ``(H, duration)``.

    The first segment acts first. An empty schedule gives the identity of
    dimension ``dim`` (default 3).
    """
    U = None
    for H, t in segments:
        Uk = evolve_segment(H, t)
        U = Uk if U is None else Uk @ U
    if U is None:
        return np.eye(3 if dim is None else dim, dtype=complex)
    return U


def unitarity_error(U) -> float:
    U = np.asarray(U)
    return float(np.linalg.norm(np.conj(U.T) @ U - np.eye(U.shape[0])))


@dataclass
class TimeSeries:
    """Sampled real signal ``y(t)``; ``t`` in µs, strictly increasing."""

    t: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.t.ndim != 1 or self.t.shape != self.y.shape:
            raise ContractError("t and y must be 1-D arrays of equal length")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ContractError("t must be strictly increasing")

    def __len__(self):
        return self.t.size

    @property
    def spacing(self) -> float:
        dt = np.diff(self.t)
        if dt.size == 0:
            raise ContractError("need at least two samples")
        if np.ptp(dt) > 1e-6 * abs(dt.mean()):
            raise ContractError("sampling grid is not uniform")
        return float(dt.mean())


class PeakList(list):
    """List of ``(frequency_MHz, amplitude)`` with the grid resolution attached."""

    def __init__(self, items=(), resolution: float = float("nan")):
        super().__init__(items)
        self.resolution = resolution

    @property
    def frequencies(self) -> list[float]:
        return [f for f, _ in self]


def amplitude_spectrum(ts: TimeSeries, *, remove_mean: bool = True, pad: int = 8,
                       window: str = "hann"):
    """One-sided amplitude spectrum of a uniformly sampled series.

    Amplitudes are scaled so that a pure ``A cos(2 pi f t)`` shows a peak of
    height ``A`` (up to window scalloping, which zero padding keeps small).
    """
    dt = ts.spacing
    y = ts.y - ts.y.mean() if remove_mean else ts.y.copy()
    n = y.size
    if window == "hann":
        w = np.hanning(n)
    elif window in ("rect", "none", None):
        w = np.ones(n)
    else:
        raise ContractError(f"unknown window {window!r}")
    nfft = int(pad) * n
    spec = np.abs(np.fft.rfft(y * w, n=nfft)) * 2.0 / w.sum()
    freqs = np.fft.rfftfreq(nfft, d=dt)
    return freqs, spec


def dominant_frequencies(ts: TimeSeries, k: int = 1, *, remove_mean: bool = True,
                         pad: int = 8, window: str = "hann", min_rel_height: float = 1e-3
                         ) -> PeakList:
    """The ``k`` strongest spectral peaks of ``ts``, by descending amplitude.

    Peaks are local maxima of the zero-padded, windowed amplitude spectrum,
    refined by parabolic interpolation on the three bins around each
    maximum. The nominal resolution ``1/(N dt)`` of the unpadded grid is
    available as ``result.resolution``.
    """
    if k < 1:
        raise ContractError("k must be >= 1")
    freqs, spec = amplitude_spectrum(ts, remove_mean=remove_mean, pad=pad, window=window)
    df = freqs[1] - freqs[0]
    resolution = 1.0 / (ts.t.size * ts.spacing)
    if spec.max() <= 0:
        return PeakList([], resolution)
    padded = np.concatenate([[-np.inf], spec, [-np.inf]])
    idx = np.flatnonzero((padded[1:-1] >= padded[:-2]) & (padded[1:-1] > padded[2:]))
    idx = idx[spec[idx] >= min_rel_height * spec.max()]
    peaks = []
    for i in idx:
        f, a = freqs[i], spec[i]
        if 0 < i < spec.size - 1:
            y0, y1, y2 = spec[i - 1], spec[i], spec[i + 1]
            denom = y0 - 2 * y1 + y2
            if denom != 0:
                shift = 0.5 * (y0 - y2) / denom
                f = freqs[i] + shift * df
                a = y1 - 0.25 * (y0 - y2) * shift
        peaks.append((float(f), float(a)))
    peaks.sort(key=lambda p: -p[1])
    return PeakList(peaks[:k], resolution)


def as_state(amplitudes: Sequence[complex]) -> np.ndarray:
    """Validate a spin-1 state vector (unit norm to 1e-12)."""
    psi = np.asarray(amplitudes, dtype=complex)
    if psi.shape != (3,):
        raise ContractError(f"spin-1 state needs 3 amplitudes, got shape {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-12:
        raise ContractError("state is not normalized")
    return psi
