"""Per-subchannel and per-UE rates, SINRs, QoS checks, weights, fairness.

Relayed traffic crosses two hops in two half-slot phases, hence the 1/2 in
front of every log.  The direct uplink also spans both phases, one with and
one without relay-induced interference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelGains
from .scenario import SnrThresholds


def rate_cellular(p: float, h: float, sigma2: float, ici: float) -> float:
    """Direct uplink rate: clean phase plus interfered phase, half slot each."""
    snr_clean = p * h / sigma2
    snr_dirty = p * h / (sigma2 + ici)
    return 0.5 * math.log2(1.0 + snr_clean) + 0.5 * math.log2(1.0 + snr_dirty)


def relay_sinrs(p_ue: float, p_uav: float, h_ue_uav: float, h_uav_bs: float,
                sigma2: float, ici: float) -> tuple[float, float]:
    """(hop-1 SINR at the UAV, end-to-end SINR at the BS).

    The end-to-end form folds the amplify-and-forward gain in; c = 1 + I/sigma2
    scales the terms hit by interference at the BS."""
    gamma_hop1 = p_ue * h_ue_uav / sigma2
    c = 1.0 + ici / sigma2
    num = p_uav * p_ue * h_uav_bs * h_ue_uav
    den = sigma2 * (p_uav * h_uav_bs + c * p_ue * h_ue_uav + c * sigma2)
    return gamma_hop1, num / den


def rate_relay(sinrs: tuple[float, float]) -> float:
    """End-to-end relayed rate; the second hop is always the bottleneck."""
    _, gamma_e2e = sinrs
    return 0.5 * math.log2(1.0 + gamma_e2e)


def amplification_power_gain(p_uav: float, p_ue: float, h_ue_uav: float, sigma2: float) -> float:
    """Squared AF gain: retransmit power over received signal-plus-noise power."""
    return p_uav / (p_ue * h_ue_uav + sigma2)


def subchannel_rate(beta: int, p_ue: float, p_uav: float, h_direct: float,
                    h_ue_uav: float, h_uav_bs: float, sigma2: float, ici: float) -> float:
    """Rate of one (UE, subchannel) under the UE's mode."""
    if beta:
        return rate_relay(relay_sinrs(p_ue, p_uav, h_ue_uav, h_uav_bs, sigma2, ici))
    return rate_cellular(p_ue, h_direct, sigma2, ici)


def qos_feasible_cellular(p: float, h: float, thr: SnrThresholds,
                          sigma2: float, ici: float) -> bool:
    return p * h / sigma2 >= thr.direct and p * h / (sigma2 + ici) >= thr.direct


def qos_feasible_relay(p_ue: float, p_uav: float, h_ue_uav: float, h_uav_bs: float,
                       thr: SnrThresholds, sigma2: float, ici: float) -> bool:
    return (p_ue * h_ue_uav / sigma2 >= thr.ue_uav
            and p_uav * h_uav_bs / (sigma2 + ici) >= thr.uav_bs)


def qos_feasible(mode: str, *, occupied: bool = True, p_ue: float = 0.0,
                 p_uav: float = 0.0, h_direct: float = 0.0, h_ue_uav: float = 0.0,
                 h_uav_bs: float = 0.0, thresholds: SnrThresholds,
                 sigma2: float, ici: float) -> bool:
    """Per-subchannel QoS test.  Unoccupied subchannels pass vacuously: the
    constraints only bind where the allocation and mode flags are on."""
    if not occupied:
        return True
    if mode == "cellular":
        return qos_feasible_cellular(p_ue, h_direct, thresholds, sigma2, ici)
    if mode == "relay":
        return qos_feasible_relay(p_ue, p_uav, h_ue_uav, h_uav_bs, thresholds, sigma2, ici)
    raise ValueError("mode must be 'cellular' or 'relay'")


def min_power_cellular(h: float, thr: SnrThresholds, sigma2: float, ici: float) -> float:
    """Smallest UE power meeting both phases' SNR floors on a direct link."""
    return thr.direct * (sigma2 + ici) / h


def min_powers_relay(h_ue_uav: float, h_uav_bs: float, thr: SnrThresholds,
                     sigma2: float, ici: float) -> tuple[float, float]:
    """Smallest (UE, UAV) powers meeting the two per-hop SNR floors."""
    return thr.ue_uav * sigma2 / h_ue_uav, thr.uav_bs * (sigma2 + ici) / h_uav_bs


@dataclass
class PowerAllocation:
    """Transmit powers: (N, K) UE matrix and (K,) UAV vector, watts."""

    p_ue: np.ndarray
    p_uav: np.ndarray

    def copy(self) -> "PowerAllocation":
        return PowerAllocation(self.p_ue.copy(), self.p_uav.copy())

    def violations(self, alloc: np.ndarray, p_ue_max: float, p_uav_max: float,
                   tol: float = 1e-9) -> list[str]:
        out = []
        if np.any(self.p_ue < 0) or np.any(self.p_uav < 0):
            out.append("negative transmit power")
        budget = (alloc * self.p_ue).sum(axis=1)
        for n, b in enumerate(budget):
            if b > p_ue_max * (1 + tol) + tol:
                out.append(f"ue {n} power budget exceeded: {b} > {p_ue_max}")
        if self.p_uav.sum() > p_uav_max * (1 + tol) + tol:
            out.append(f"uav power budget exceeded: {self.p_uav.sum()} > {p_uav_max}")
        return out


def ue_rate(n: int, beta: int, alloc_row: np.ndarray, powers: PowerAllocation,
            gains: ChannelGains, sigma2: float, ici: float) -> float:
    """Slot rate of UE n: mode-gated sum over its assigned subchannels."""
    total = 0.0
    for k in np.flatnonzero(alloc_row):
        total += subchannel_rate(beta, powers.p_ue[n, k], powers.p_uav[k],
                                 gains.h_ue_bs[n, k], gains.h_ue_uav[n, k],
                                 gains.h_uav_bs[k], sigma2, ici)
    return total


@dataclass
class RateReport:
    per_ue_rate: np.ndarray         # (N,)
    per_subchannel_rate: np.ndarray  # (N, K), zero where unassigned
    objective: float                # weights dot per_ue_rate


def rate_report(beta: np.ndarray, alloc: np.ndarray, powers: PowerAllocation,
                gains: ChannelGains, weights: np.ndarray, sigma2: float,
                ici: float) -> RateReport:
    n_ues, n_sub = alloc.shape
    per_sub = np.zeros((n_ues, n_sub))
    for n in range(n_ues):
        for k in np.flatnonzero(alloc[n]):
            per_sub[n, k] = subchannel_rate(int(beta[n]), powers.p_ue[n, k],
                                            powers.p_uav[k], gains.h_ue_bs[n, k],
                                            gains.h_ue_uav[n, k], gains.h_uav_bs[k],
                                            sigma2, ici)
    per_ue = per_sub.sum(axis=1)
    return RateReport(per_ue, per_sub, float(np.dot(weights, per_ue)))


def update_weights(prev_avg_rates) -> np.ndarray:
    """Proportional-fairness weights: inverse average rate, floored by the
    +0.1 regularizer so never-served UEs get weight 10, not infinity."""
    avg = np.asarray(prev_avg_rates, dtype=float)
    if np.any(avg < 0):
        raise ValueError("average rates must be nonnegative")
    return 1.0 / (avg + 0.1)


def jain_index(avg_rates) -> float:
    r = np.asarray(avg_rates, dtype=float)
    total = r.sum()
    sq = np.dot(r, r)
    if sq == 0.0:
        raise ValueError("jain_index undefined for all-zero rates")
    return float(total * total / (len(r) * sq))
