"""Per-slot transmit power optimization at fixed modes, allocation, and
UAV position.

Each UE's rate splits into a difference of two concave pieces in the
powers; linearizing the subtracted piece at the current iterate gives a
concave surrogate that is tight there and never overshoots, so the SCP
loop is monotone in the exact weighted sum rate.  All constraints are
linear at fixed gains: per-entity budget halfspaces and per-subchannel
QoS floors.  Infeasible starts are repaired by funding every occupied
subchannel at its floor and releasing the lowest-value subchannel of
whichever entity still cannot pay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelGains
from .convex_core import FeasibleSet, maximize_concave
from .link_rate import (PowerAllocation, min_power_cellular, min_powers_relay,
                        rate_report)
from .scenario import Scenario

LN2 = math.log(2.0)
_FLOOR_MARGIN = 1e-9    # relative headroom when funding a QoS floor
_CAP_TOL = 1e-9


@dataclass
class DcParts:
    """One UE's rate split R_n = K_n - M_n at fixed gains, with gradients
    over the UE's own subchannel powers and the UAV powers."""

    k_value: float
    m_value: float
    k_grad_ue: np.ndarray   # (K,)
    k_grad_uav: np.ndarray  # (K,)
    m_grad_ue: np.ndarray
    m_grad_uav: np.ndarray
    expansion_ue: np.ndarray
    expansion_uav: np.ndarray

    @property
    def rate(self) -> float:
        return self.k_value - self.m_value


def dc_split(n: int, beta: np.ndarray, alloc: np.ndarray, powers: PowerAllocation,
             gains: ChannelGains, sigma2: float, ici: float) -> DcParts:
    """Evaluate both concave pieces of UE n's rate and their gradients.

    Relayed subchannels contribute to both pieces; direct ones only to
    the first, which keeps the identity K - M = R exact."""
    k_sub = alloc.shape[1]
    parts = DcParts(0.0, 0.0, np.zeros(k_sub), np.zeros(k_sub), np.zeros(k_sub),
                    np.zeros(k_sub), powers.p_ue[n].copy(), powers.p_uav.copy())
    c = 1.0 + ici / sigma2
    for k in np.flatnonzero(alloc[n]):
        p = powers.p_ue[n, k]
        if beta[n]:
            h1, h2 = gains.h_ue_uav[n, k], gains.h_uav_bs[k]
            pu = powers.p_uav[k]
            a1 = p * h1 + sigma2
            a2 = pu * h2 + c * sigma2
            parts.k_value += 0.5 * math.log2(a1 * a2)
            parts.k_grad_ue[k] = 0.5 * h1 / (a1 * LN2)
            parts.k_grad_uav[k] = 0.5 * h2 / (a2 * LN2)
            x = c * p * h1 + pu * h2 + c * sigma2
            parts.m_value += 0.5 * math.log2(sigma2 * x)
            parts.m_grad_ue[k] = 0.5 * c * h1 / (x * LN2)
            parts.m_grad_uav[k] = 0.5 * h2 / (x * LN2)
        else:
            h = gains.h_ue_bs[n, k]
            s1 = sigma2 + p * h
            s2 = sigma2 + ici + p * h
            parts.k_value += 0.5 * (math.log2(s1 / sigma2) + math.log2(s2 / (sigma2 + ici)))
            parts.k_grad_ue[k] = 0.5 * h * (1.0 / s1 + 1.0 / s2) / LN2
    return parts


# ---------------------------------------------------------------------------
# Variable packing and the surrogate.

class PowerProblem:
    """Flattens the active powers of one slot into a single vector and
    exposes the exact objective, the tight concave surrogate, and the
    linear feasible set over it."""

    def __init__(self, beta: np.ndarray, alloc: np.ndarray, gains: ChannelGains,
                 weights: np.ndarray, scenario: Scenario):
        self.beta = np.asarray(beta, dtype=int)
        self.alloc = np.asarray(alloc, dtype=int)
        self.gains = gains
        self.weights = np.asarray(weights, dtype=float)
        self.sc = scenario
        self.sigma2 = scenario.noise_var
        self.ici = scenario.ici_power
        rows, cols = np.nonzero(self.alloc)
        self.ue_vars = [(int(n), int(k)) for n, k in zip(rows, cols)]
        self.uav_vars = [k for n, k in self.ue_vars if self.beta[n]]
        self.n_vars = len(self.ue_vars) + len(self.uav_vars)

    def pack(self, powers: PowerAllocation) -> np.ndarray:
        x = np.empty(self.n_vars)
        for i, (n, k) in enumerate(self.ue_vars):
            x[i] = powers.p_ue[n, k]
        for j, k in enumerate(self.uav_vars):
            x[len(self.ue_vars) + j] = powers.p_uav[k]
        return x

    def unpack(self, x: np.ndarray) -> PowerAllocation:
        n_ues, k_sub = self.alloc.shape
        p_ue = np.zeros((n_ues, k_sub))
        p_uav = np.zeros(k_sub)
        for i, (n, k) in enumerate(self.ue_vars):
            p_ue[n, k] = x[i]
        for j, k in enumerate(self.uav_vars):
            p_uav[k] = x[len(self.ue_vars) + j]
        return PowerAllocation(p_ue, p_uav)

    def qos_floors(self) -> np.ndarray:
        """Per-variable QoS lower bounds at the fixed gains."""
        thr = self.sc.snr_thresholds
        lo = np.zeros(self.n_vars)
        for i, (n, k) in enumerate(self.ue_vars):
            if self.beta[n]:
                lo[i] = min_powers_relay(self.gains.h_ue_uav[n, k],
                                         self.gains.h_uav_bs[k], thr,
                                         self.sigma2, self.ici)[0]
            else:
                lo[i] = min_power_cellular(self.gains.h_ue_bs[n, k], thr,
                                           self.sigma2, self.ici)
        for j, k in enumerate(self.uav_vars):
            n = next(n for n, kk in self.ue_vars if kk == k)
            lo[len(self.ue_vars) + j] = min_powers_relay(
                self.gains.h_ue_uav[n, k], self.gains.h_uav_bs[k], thr,
                self.sigma2, self.ici)[1]
        return lo

    def feasible_set(self) -> FeasibleSet:
        spaces = []
        for n in np.unique([n for n, _ in self.ue_vars]):
            a = np.zeros(self.n_vars)
            for i, (m, _) in enumerate(self.ue_vars):
                if m == n:
                    a[i] = 1.0
            spaces.append((a, self.sc.p_ue_max))
        if self.uav_vars:
            a = np.zeros(self.n_vars)
            a[len(self.ue_vars):] = 1.0
            spaces.append((a, self.sc.p_uav_max))
        return FeasibleSet(halfspaces=spaces, lower_bounds=self.qos_floors())

    def true_objective(self, x: np.ndarray) -> float:
        report = rate_report(self.beta, self.alloc, self.unpack(x), self.gains,
                             self.weights, self.sigma2, self.ici)
        return report.objective

    def _weighted_parts(self, powers: PowerAllocation):
        return [(n, dc_split(n, self.beta, self.alloc, powers, self.gains,
                             self.sigma2, self.ici))
                for n in range(self.alloc.shape[0]) if self.alloc[n].any()]

    def surrogate(self, x0: np.ndarray):
        """Concave minorant of the exact objective, tight at x0: the
        subtracted pieces are replaced by their tangents there."""
        exp_powers = self.unpack(x0)
        anchors = self._weighted_parts(exp_powers)

        def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
            powers = self.unpack(x)
            total = 0.0
            grad = np.zeros(self.n_vars)
            for n, anchor in anchors:
                parts = dc_split(n, self.beta, self.alloc, powers, self.gains,
                                 self.sigma2, self.ici)
                m_lin = anchor.m_value \
                    + float(anchor.m_grad_ue @ (powers.p_ue[n] - anchor.expansion_ue)) \
                    + float(anchor.m_grad_uav @ (powers.p_uav - anchor.expansion_uav))
                total += self.weights[n] * (parts.k_value - m_lin)
                for i, (m, k) in enumerate(self.ue_vars):
                    if m == n:
                        grad[i] += self.weights[n] * (parts.k_grad_ue[k] - anchor.m_grad_ue[k])
                for j, k in enumerate(self.uav_vars):
                    grad[len(self.ue_vars) + j] += self.weights[n] * (
                        parts.k_grad_uav[k] - anchor.m_grad_uav[k])
            return total, grad

        return objective


# ---------------------------------------------------------------------------
# Feasibility restoration.

def _floor_powers(beta, alloc, gains, thr, sigma2, ici) -> PowerAllocation:
    """Fund every occupied subchannel at its QoS floor plus a hair."""
    n_ues, k_sub = alloc.shape
    p_ue = np.zeros((n_ues, k_sub))
    p_uav = np.zeros(k_sub)
    for n in range(n_ues):
        for k in np.flatnonzero(alloc[n]):
            if beta[n]:
                lo_ue, lo_uav = min_powers_relay(gains.h_ue_uav[n, k],
                                                 gains.h_uav_bs[k], thr, sigma2, ici)
                p_ue[n, k] = lo_ue * (1.0 + _FLOOR_MARGIN)
                p_uav[k] = lo_uav * (1.0 + _FLOOR_MARGIN)
            else:
                p_ue[n, k] = min_power_cellular(gains.h_ue_bs[n, k], thr,
                                                sigma2, ici) * (1.0 + _FLOOR_MARGIN)
    return PowerAllocation(p_ue, p_uav)


def _assignment_value(n, k, beta, powers, gains, weights, sigma2, ici) -> float:
    from .link_rate import subchannel_rate
    return weights[n] * subchannel_rate(int(beta[n]), powers.p_ue[n, k],
                                        powers.p_uav[k], gains.h_ue_bs[n, k],
                                        gains.h_ue_uav[n, k], gains.h_uav_bs[k],
                                        sigma2, ici)


def restore_feasible(beta: np.ndarray, alloc: np.ndarray, gains: ChannelGains,
                     weights: np.ndarray, scenario: Scenario
                     ) -> tuple[np.ndarray, PowerAllocation, list[tuple[int, int]]]:
    """Floor-fund the allocation, releasing the least valuable subchannel
    of any entity whose floors alone overflow its budget.  Returns the
    surviving allocation, floor powers with the leftover budget spread by
    weighted marginal rate, and the dropped (ue, subchannel) pairs."""
    alloc = np.asarray(alloc, dtype=int).copy()
    s = scenario
    dropped: list[tuple[int, int]] = []

    while True:
        powers = _floor_powers(beta, alloc, gains, s.snr_thresholds,
                               s.noise_var, s.ici_power)
        ue_over = [n for n in range(alloc.shape[0])
                   if powers.p_ue[n].sum() > s.p_ue_max * (1.0 + _CAP_TOL)]
        if ue_over:
            n = ue_over[0]
            k = min(np.flatnonzero(alloc[n]),
                    key=lambda k: _assignment_value(n, k, beta, powers, gains,
                                                    weights, s.noise_var, s.ici_power))
            alloc[n, k] = 0
            dropped.append((int(n), int(k)))
            continue
        if powers.p_uav.sum() > s.p_uav_max * (1.0 + _CAP_TOL):
            relay = [(n, k) for n in np.flatnonzero(beta)
                     for k in np.flatnonzero(alloc[n])]
            n, k = min(relay, key=lambda nk: _assignment_value(
                *nk, beta, powers, gains, weights, s.noise_var, s.ici_power))
            alloc[n, k] = 0
            dropped.append((int(n), int(k)))
            continue
        break

    spread_leftover(beta, alloc, powers, gains, weights, s)
    return alloc, powers, dropped


def spread_leftover(beta, alloc, powers, gains, weights, s: Scenario) -> None:
    """Hand each entity's remaining budget to its subchannels in
    proportion to the weighted marginal rate at the floors."""
    sigma2, ici = s.noise_var, s.ici_power
    for n in range(alloc.shape[0]):
        ks = np.flatnonzero(alloc[n])
        if ks.size == 0:
            continue
        leftover = s.p_ue_max - powers.p_ue[n].sum()
        if leftover <= 0.0:
            continue
        parts = dc_split(n, beta, alloc, powers, gains, sigma2, ici)
        marginal = weights[n] * np.maximum(
            parts.k_grad_ue[ks] - parts.m_grad_ue[ks], 0.0)
        total = marginal.sum()
        share = marginal / total if total > 0 else np.full(ks.size, 1.0 / ks.size)
        powers.p_ue[n, ks] += leftover * share

    relay_ks = np.flatnonzero(powers.p_uav)
    if relay_ks.size == 0:
        return
    leftover = s.p_uav_max - powers.p_uav.sum()
    if leftover <= 0.0:
        return
    marginal = np.zeros(relay_ks.size)
    for n in np.flatnonzero(beta):
        parts = dc_split(n, beta, alloc, powers, gains, sigma2, ici)
        for i, k in enumerate(relay_ks):
            if alloc[n, k]:
                marginal[i] = weights[n] * max(
                    parts.k_grad_uav[k] - parts.m_grad_uav[k], 0.0)
    total = marginal.sum()
    share = marginal / total if total > 0 else np.full(relay_ks.size, 1.0 / relay_ks.size)
    powers.p_uav[relay_ks] += leftover * share


# ---------------------------------------------------------------------------
# The SCP driver.

@dataclass
class PowerResult:
    powers: PowerAllocation
    alloc: np.ndarray
    dropped: list[tuple[int, int]]
    objective: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)


_MAX_OUTER = 30
_INNER_ITERS = 500


def scp_power(beta: np.ndarray, alloc: np.ndarray, gains: ChannelGains,
              weights: np.ndarray, scenario: Scenario,
              init: PowerAllocation | None = None) -> PowerResult:
    """Maximize the weighted sum rate over transmit powers.

    `init` is used as the starting point when it already satisfies the
    caps and QoS floors; otherwise the restoration rule rebuilds one,
    possibly shedding assignments (reported in `dropped`)."""
    s = scenario
    alloc = np.asarray(alloc, dtype=int)
    dropped: list[tuple[int, int]] = []

    start = None
    if init is not None:
        prob = PowerProblem(beta, alloc, gains, weights, s)
        if prob.n_vars:
            # small projections repair stale warm starts without losing
            # them; structural infeasibility falls through to restoration
            fset = prob.feasible_set()
            x = fset.project(prob.pack(init))
            if fset.linear_violation(x) <= 1e-9:
                start = x
    if start is None:
        alloc, powers, dropped = restore_feasible(beta, alloc, gains, weights, s)
        prob = PowerProblem(beta, alloc, gains, weights, s)
        start = prob.pack(powers)

    if prob.n_vars == 0:
        return PowerResult(prob.unpack(np.zeros(0)), alloc, dropped, 0.0, 0, True)

    fset = prob.feasible_set()
    eps = s.tolerances.bcd / 10.0
    x = start
    obj = prob.true_objective(x)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, _MAX_OUTER + 1):
        res = maximize_concave(prob.surrogate(x), fset, x, max_iters=_INNER_ITERS)
        new_obj = prob.true_objective(res.x)
        if not res.feasible or new_obj < obj - 1e-9 * max(1.0, abs(obj)):
            converged = True
            break
        trace.append(new_obj)
        rel = (new_obj - obj) / max(abs(obj), 1e-12)
        x, obj = res.x, new_obj
        if rel < eps:
            converged = True
            break

    return PowerResult(prob.unpack(x), alloc, dropped, obj, it, converged, trace)
