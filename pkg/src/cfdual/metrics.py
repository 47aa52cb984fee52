"""SINR / spectral efficiency evaluation and fronthaul overhead accounting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SeReport", "OverheadReport", "gain_matrix", "sinr_all", "sinr", "sum_se",
    "se_report", "average_load", "overhead", "overhead_from_load",
]


@dataclass(frozen=True)
class SeReport:
    sinr: np.ndarray
    se: np.ndarray
    sum_se: float
    ap_power: np.ndarray
    max_violation: float
    scheme: str = ""
    trial: int = 0


@dataclass(frozen=True)
class OverheadReport:
    tau_d: int
    k_bar: float
    bits_per_symbol: int
    quant_bits: int
    antennas: int
    distributed_bits: float
    centralized_bits: float

    @property
    def reduction(self) -> float:
        return 1.0 - self.distributed_bits / self.centralized_bits


def gain_matrix(H, solution) -> np.ndarray:
    """``G[k, j] = sum_l sqrt(rho_jl) h_kl^H u_jl``: effective gain of user
    j's precoder at user k."""
    W = solution.effective(H.shape[1])
    return np.einsum("kln,jln->kj", H.conj(), W)


def sinr_all(H, solution, noise: float = 1.0) -> np.ndarray:
    """SINR of every user, including interference left over by partial ZF."""
    G = np.abs(gain_matrix(H, solution)) ** 2
    signal = np.diag(G).copy()
    interference = G.sum(axis=1) - signal
    return signal / (interference + noise)


def sinr(H, solution, plan=None, k: int = 0) -> float:
    return float(sinr_all(H, solution)[k])


def sum_se(sinrs) -> float:
    """``sum_k log2(1 + SINR_k)`` in bit/s/Hz."""
    sinrs = np.asarray(sinrs, dtype=float)
    if np.any(sinrs < 0):
        raise ValueError("SINR must be non-negative")
    return float(np.sum(np.log2(1.0 + sinrs)))


def se_report(H, solution, rho_max: float, scheme: str = "", trial: int = 0) -> SeReport:
    s = sinr_all(H, solution)
    p = solution.ap_power(H.shape[1])
    viol = max(0.0, float(np.max(p / rho_max - 1.0)))
    return SeReport(sinr=s, se=np.log2(1.0 + s), sum_se=sum_se(s), ap_power=p,
                    max_violation=viol, scheme=scheme or solution.label, trial=trial)


def average_load(plan) -> float:
    """Mean number of users per active AP."""
    sizes = np.array([len(d) for d in plan.served])
    active = sizes > 0
    return float(sizes[active].sum() / active.sum())


def overhead_from_load(k_bar: float, antennas: int, tau_d: int = 190,
                       bits_per_symbol: int = 4, quant_bits: int = 8) -> OverheadReport:
    """Per-AP fronthaul payload: distributed ``tau_d * k_bar * B`` bits vs
    centralized ``2 * tau_d * N * A`` bits."""
    if tau_d <= 0:
        raise ValueError("tau_d must be positive")
    return OverheadReport(
        tau_d=tau_d, k_bar=k_bar, bits_per_symbol=bits_per_symbol, quant_bits=quant_bits,
        antennas=antennas,
        distributed_bits=tau_d * k_bar * bits_per_symbol,
        centralized_bits=2 * tau_d * antennas * quant_bits,
    )


def overhead(plan, antennas: int, tau_d: int = 190, bits_per_symbol: int = 4,
             quant_bits: int = 8) -> OverheadReport:
    return overhead_from_load(average_load(plan), antennas, tau_d, bits_per_symbol, quant_bits)
