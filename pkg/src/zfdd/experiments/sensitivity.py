"""Shot-noise limited magnetic sensitivity of Ramsey and DD measurements."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..kernel import ContractError

GAMMA_E_HZ_PER_T = 28.024e9
# hbar / (g_e mu_B) in T s
HBAR_OVER_G_MUB = 1.0 / (2 * np.pi * GAMMA_E_HZ_PER_T)


@dataclass(frozen=True)
class SensitivityParams:
    """Times in µs; ``T2`` is T2* for Ramsey and the DD coherence time otherwise."""

    contrast: float
    T2: float
    p: float
    t_I: float
    t_R: float
    n_avg: float
    delta_ms: int = 2
    tau: float | None = None

    def __post_init__(self):
        if not 0 < self.contrast < 1:
            raise ContractError("contrast must lie in (0, 1)")
        if self.n_avg <= 0:
            raise ContractError("n_avg must be positive")
        if self.p <= 0:
            raise ContractError("stretch exponent p must be positive")
        if self.T2 <= 0 or self.t_I < 0 or self.t_R < 0:
            raise ContractError("times must be non-negative and T2 positive")
        if self.delta_ms <= 0:
            raise ContractError("delta_ms must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ContractError("tau must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def eta_at(sp: SensitivityParams, tau: float) -> float:
    """Sensitivity (T/sqrt(Hz)) for sensing time ``tau`` (µs)."""
    if tau <= 0:
        raise ContractError("tau must be positive")
    # exp(+x) instead of 1/exp(-x): overflows to inf rather than dividing by zero
    inv_decay = np.exp(min((tau / sp.T2) ** sp.p, 700.0))
    overhead = np.sqrt((sp.t_I + sp.t_R + tau) * 1e-6) / (tau * 1e-6)
    return float(HBAR_OVER_G_MUB / sp.delta_ms / (np.sqrt(sp.n_avg) * sp.contrast) * inv_decay * overhead)


def ramsey_sensitivity(sp: SensitivityParams):
    """``(eta, tau_opt)``; ``tau`` is optimised by a bounded 1-D search when not given."""
    if sp.tau is not None:
        return eta_at(sp, sp.tau), float(sp.tau)
    res = minimize_scalar(lambda t: eta_at(sp, t), bounds=(1e-6 * sp.T2, 3 * sp.T2),
                          method="bounded", options={"xatol": 1e-9 * sp.T2})
    return float(res.fun), float(res.x)


def coherence_scaling(T2: float, k: int, s: float) -> float:
    """Coherence time ``T2 k**s`` of a ``k``-pulse DD sequence."""
    if k < 1:
        raise ContractError("k must be >= 1")
    return float(T2 * k ** s)


def dd_sensitivity(sp: SensitivityParams, k: int | None = None, s: float = 0.0, k_max: int = 1000):
    """Sensitivity of a ``k``-pulse AC measurement with pulse spacing ``sp.tau``.

    The phase accrues over ``k tau`` against the coherence time
    ``coherence_scaling(sp.T2, k, s)``; the ``pi/2`` factor converts a
    square-wave filter to the amplitude of a sinusoidal field. ``k`` is
    chosen to minimise ``eta`` when omitted. Returns ``(eta, k)``.
    """
    if sp.tau is None:
        raise ContractError("DD sensitivity needs the pulse spacing tau")

    def eta_k(kk):
        T2k = coherence_scaling(sp.T2, kk, s)
        sub = SensitivityParams(sp.contrast, T2k, sp.p, sp.t_I, sp.t_R, sp.n_avg, sp.delta_ms)
        return np.pi / 2 * eta_at(sub, kk * sp.tau)

    if k is not None:
        return eta_k(k), int(k)
    ks = np.arange(1, k_max + 1)
    vals = np.array([eta_k(int(kk)) for kk in ks])
    i = int(np.nanargmin(vals))
    return float(vals[i]), int(ks[i])


RAMSEY_DEFAULTS = SensitivityParams(contrast=0.355, T2=2.1, p=2.1, t_I=0.0226, t_R=1.3,
                                    n_avg=150e3 * 300e-9)
DD_DEFAULTS = SensitivityParams(contrast=0.17, T2=500.0, p=4.8, t_I=0.0226, t_R=1.3,
                                n_avg=150e3 * 300e-9, tau=1.0 / (2 * 9.8e-3))
