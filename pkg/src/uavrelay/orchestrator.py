"""Slot-level driver tying the three stages together, plus episodes,
baselines, sweeps, and the derived metrics.

Per slot the driver cycles matching -> trajectory -> power and accepts a
stage's output only when the exact weighted sum rate does not fall, so
the per-slot objective trace is nondecreasing by construction.  Episodes
chain slots under proportional-fairness weights; each algorithm earns
its own weight history from its own achieved rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelGains, gain_matrices
from .link_rate import (PowerAllocation, jain_index, min_power_cellular,
                        min_powers_relay, rate_report, update_weights)
from .matching import (CELLULAR, RELAY, VACANT, Matching, MatchingContext,
                       McPair, init_matching, msma_detailed, pair_feasible,
                       subchannel_utility)
from .power_alloc import scp_power, spread_leftover
from .scenario import Scenario, UavState
from .trajectory import SlotInputs, StageLog, to_algorithm
from .uav_power import flying_power_upper, move_radius
from . import link_rate

_STAGE_TOL = 1e-9
_MAX_BCD = 100
_FLOOR_MARGIN = 1e-9


@dataclass
class SlotSolution:
    """One slot's full decision set plus the audit trail."""

    beta: np.ndarray
    alloc: np.ndarray
    powers: PowerAllocation
    position: np.ndarray        # UAV position at the end of the slot
    start_position: np.ndarray  # position inherited from the previous slot
    rates: np.ndarray
    weights: np.ndarray
    objective: float
    iterations: int
    stage_trace: list[tuple[str, float]] = field(default_factory=list)
    dropped: list[tuple[int, int]] = field(default_factory=list)
    stage_logs: list[StageLog] = field(default_factory=list)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.position - self.start_position))

    def scheduled_ues(self) -> list[int]:
        return [n for n in range(self.alloc.shape[0])
                if self.alloc[n].any() and self.rates[n] > 0.0]

    def relay_ues(self) -> list[int]:
        return [n for n in self.scheduled_ues() if self.beta[n]]


def validate_solution(sol: SlotSolution, sc: Scenario,
                      slot_index: int = 0) -> list[str]:
    """Audit every slot constraint; returns human-readable problems.

    Linear residuals (budgets, exclusivity, altitude, displacement,
    energy) are held to 1e-9 absolute; SNR floors to 1e-6 normalized,
    matching the trajectory stage's acceptance slack."""
    out: list[str] = []
    beta, alloc, powers = sol.beta, sol.alloc, sol.powers

    if alloc.sum(axis=0).max(initial=0) > 1:
        out.append("subchannel assigned to more than one UE")
    if np.any(powers.p_ue < -1e-12) or np.any(powers.p_uav < -1e-12):
        out.append("negative transmit power")
    if np.any((powers.p_ue > 1e-12) & (alloc == 0)):
        out.append("UE power on an unassigned subchannel")
    relay_cols = (alloc * beta[:, None]).any(axis=0)
    if np.any((powers.p_uav > 1e-12) & ~relay_cols):
        out.append("relay power on a non-relay subchannel")

    for n in range(alloc.shape[0]):
        if powers.p_ue[n].sum() > sc.p_ue_max + 1e-9:
            out.append(f"ue {n} exceeds its power budget")
    if powers.p_uav.sum() > sc.p_uav_max + 1e-9:
        out.append("relay exceeds its power budget")

    gains = gain_matrices(sc, sol.position, slot_index)
    thr = sc.snr_thresholds
    for n in range(alloc.shape[0]):
        for k in np.flatnonzero(alloc[n]):
            if beta[n]:
                g1, g2 = link_rate.relay_sinrs(
                    powers.p_ue[n, k], powers.p_uav[k], gains.h_ue_uav[n, k],
                    gains.h_uav_bs[k], sc.noise_var, sc.ici_power)
                hop1 = powers.p_ue[n, k] * gains.h_ue_uav[n, k] / sc.noise_var
                hop2 = powers.p_uav[k] * gains.h_uav_bs[k] / (sc.noise_var + sc.ici_power)
                if hop1 < thr.ue_uav * (1 - 1e-6):
                    out.append(f"ue {n} subchannel {k}: access-hop SNR below floor")
                if hop2 < thr.uav_bs * (1 - 1e-6):
                    out.append(f"ue {n} subchannel {k}: backhaul-hop SNR below floor")
                del g1, g2
            else:
                snr = powers.p_ue[n, k] * gains.h_ue_bs[n, k] / (sc.noise_var + sc.ici_power)
                if snr < thr.direct * (1 - 1e-6):
                    out.append(f"ue {n} subchannel {k}: direct SNR below floor")

    if sol.position[2] <= sc.bs_height:
        out.append("UAV not above the BS antenna height")
    dist = sol.speed
    if dist > sc.d_max + 1e-6:
        out.append("displacement exceeds the per-slot cap")
    energy = flying_power_upper(dist / sc.slot_len, sc.propulsion) * sc.slot_len
    if energy > sc.e_max + 1e-9:
        out.append("propulsion energy bound violated")

    report = rate_report(beta, alloc, powers, gains, sol.weights,
                         sc.noise_var, sc.ici_power)
    if abs(report.objective - sol.objective) > 1e-9 * max(1.0, abs(sol.objective)):
        out.append("stored objective does not match the recomputed one")
    if not np.allclose(report.per_ue_rate, sol.rates, rtol=1e-9, atol=1e-12):
        out.append("stored rates do not match the recomputed ones")
    return out


# ---------------------------------------------------------------------------
# Matching stage helpers.

def matching_from(beta: np.ndarray, alloc: np.ndarray) -> Matching:
    assign: list[McPair | None] = [VACANT] * alloc.shape[1]
    for n in range(alloc.shape[0]):
        for k in np.flatnonzero(alloc[n]):
            assign[k] = McPair(int(n), int(beta[n]))
    return Matching(assign)


def complete_powers(prev_beta, prev_alloc, prev_powers, beta, alloc, gains,
                    weights, sc: Scenario) -> tuple[np.ndarray, PowerAllocation]:
    """Carry incumbent powers onto retained assignments, fund new ones at
    their QoS floors from the leftover budgets, best weighted full-power
    rate first, then spread what remains by weighted marginal rate.
    Unfundable newcomers are shed from the allocation.

    The spread matters: candidates meet the stage comparison with these
    powers, and at bare floors a relayed link shows roughly half the rate
    it reaches once the two hop budgets are actually spent."""
    alloc = alloc.copy()
    n_ues, k_sub = alloc.shape
    p_ue = np.zeros((n_ues, k_sub))
    p_uav = np.zeros(k_sub)
    thr = sc.snr_thresholds
    fresh: list[tuple[int, int]] = []

    for n in range(n_ues):
        for k in np.flatnonzero(alloc[n]):
            if prev_alloc is not None and prev_alloc[n, k] \
                    and prev_beta[n] == beta[n]:
                p_ue[n, k] = prev_powers.p_ue[n, k]
                if beta[n]:
                    p_uav[k] = prev_powers.p_uav[k]
            else:
                fresh.append((n, int(k)))

    def reference_value(nk):
        n, k = nk
        return weights[n] * link_rate.subchannel_rate(
            int(beta[n]), sc.p_ue_max, sc.p_uav_max, gains.h_ue_bs[n, k],
            gains.h_ue_uav[n, k], gains.h_uav_bs[k], sc.noise_var, sc.ici_power)

    for n, k in sorted(fresh, key=reference_value, reverse=True):
        if beta[n]:
            lo_ue, lo_uav = min_powers_relay(gains.h_ue_uav[n, k],
                                             gains.h_uav_bs[k], thr,
                                             sc.noise_var, sc.ici_power)
            lo_ue *= 1.0 + _FLOOR_MARGIN
            lo_uav *= 1.0 + _FLOOR_MARGIN
            if p_ue[n].sum() + lo_ue <= sc.p_ue_max \
                    and p_uav.sum() + lo_uav <= sc.p_uav_max:
                p_ue[n, k] = lo_ue
                p_uav[k] = lo_uav
            else:
                alloc[n, k] = 0
        else:
            lo = min_power_cellular(gains.h_ue_bs[n, k], thr, sc.noise_var,
                                    sc.ici_power) * (1.0 + _FLOOR_MARGIN)
            if p_ue[n].sum() + lo <= sc.p_ue_max:
                p_ue[n, k] = lo
            else:
                alloc[n, k] = 0
    powers = PowerAllocation(p_ue, p_uav)
    spread_leftover(beta, alloc, powers, gains, weights, sc)
    return alloc, powers


def _coverage_modes(ctx: MatchingContext) -> dict[int, int]:
    """Relay only the UEs with no QoS-feasible direct subchannel at full
    budget; everyone else stays cellular."""
    modes: dict[int, int] = {}
    for n in range(ctx.n_ues):
        pair = McPair(n, CELLULAR)
        direct = any(pair_feasible(k, pair, ctx)
                     for k in range(ctx.n_subchannels))
        modes[n] = CELLULAR if direct else RELAY
    return modes


def _matching_stage(sc, gains, weights, beta, alloc, powers, incumbent_obj,
                    relay_allowed: bool):
    """Run the swap game from the incumbent and from fresh greedy starts,
    complete each candidate's powers, and keep the best completed exact
    objective (never below the incumbent).

    Three greedy starts cover the mode spectrum: scored modes (relay
    whenever its utility sum wins), coverage modes (relay only where no
    direct link passes QoS), and all-cellular.  Relaying pays half the
    spectral efficiency for reach, so which mix wins is geometry- and
    weight-dependent; the exact completed objective arbitrates."""
    ctx = MatchingContext(weights, gains, sc.noise_var, sc.ici_power,
                          sc.snr_thresholds, sc.p_ue_max, sc.p_uav_max)
    all_cellular = {n: CELLULAR for n in range(sc.n_ues)}
    starts = [init_matching(ctx, forced_modes=all_cellular)]
    if relay_allowed:
        starts.insert(0, init_matching(ctx))
        coverage = _coverage_modes(ctx)
        if coverage != all_cellular:
            starts.append(init_matching(ctx, forced_modes=coverage))
    if alloc is not None and alloc.any():
        starts.append(matching_from(beta, alloc))

    best = (incumbent_obj, beta, alloc, powers)
    for start in starts:
        psi = msma_detailed(start, ctx).matching
        cand_beta, cand_alloc = psi.to_beta_alloc(sc.n_ues)
        cand_alloc, cand_powers = complete_powers(
            beta, alloc, powers, cand_beta, cand_alloc, gains, weights, sc)
        obj = rate_report(cand_beta, cand_alloc, cand_powers, gains, weights,
                          sc.noise_var, sc.ici_power).objective
        if obj > best[0] + _STAGE_TOL * max(1.0, abs(best[0])):
            best = (obj, cand_beta, cand_alloc, cand_powers)
    return best


def _drift_toward_unserved(sc: Scenario, pos, anchor, per_ue_rate,
                           weights) -> np.ndarray:
    """Horizontal move from the slot anchor toward the weight-averaged
    position of the UEs earning nothing, spending the remaining move
    budget.  Without relayed assignments the slot objective ignores the
    position entirely, and a UAV parked out of QoS reach of the starved
    UEs would otherwise never form the pair that lets the trajectory
    stage engage; returns `pos` unchanged when everyone is served."""
    starved = np.flatnonzero(np.asarray(per_ue_rate) <= 0.0)
    if starved.size == 0:
        return np.asarray(pos, dtype=float)
    ues = np.asarray(sc.ue_positions, dtype=float)[starved, :2]
    target = np.average(ues, axis=0, weights=np.asarray(weights)[starved])
    anchor = np.asarray(anchor, dtype=float)
    r_eff = move_radius(sc.d_max, sc.e_max, sc.slot_len, sc.propulsion)
    r_h = math.sqrt(max(r_eff * r_eff - (float(pos[2]) - anchor[2]) ** 2, 0.0))
    step = target - anchor[:2]
    dist = float(np.linalg.norm(step))
    xy = target if dist <= r_h else anchor[:2] + step * (r_h / dist)
    return np.array([xy[0], xy[1], float(pos[2])])


# ---------------------------------------------------------------------------
# The per-slot block-coordinate loop.

def jmstp_slot(sc: Scenario, state: UavState, weights: np.ndarray,
               init: SlotSolution | None = None, slot_index: int = 0, *,
               relay_allowed: bool = True, optimize_trajectory: bool = True,
               fixed_matching: Matching | None = None) -> SlotSolution:
    """One slot of the joint algorithm: matching, trajectory, power, cycled
    until the exact objective gain drops below the convergence threshold.

    `fixed_matching` freezes the assignment stage (used by the random
    baseline); `relay_allowed`/`optimize_trajectory` shape the cellular
    baseline.  `init` warm-starts from the previous slot's solution."""
    weights = np.asarray(weights, dtype=float)
    pos = np.asarray(state.pos, dtype=float).copy()
    anchor = tuple(float(v) for v in state.prev_pos)
    n_ues, k_sub = sc.n_ues, sc.n_subchannels

    gains = gain_matrices(sc, pos, slot_index)
    if init is not None and init.alloc.any():
        beta = init.beta.copy()
        alloc, powers = complete_powers(init.beta, init.alloc, init.powers,
                                        init.beta, init.alloc, gains, weights, sc)
    else:
        beta = np.zeros(n_ues, dtype=int)
        alloc = np.zeros((n_ues, k_sub), dtype=int)
        powers = PowerAllocation(np.zeros((n_ues, k_sub)), np.zeros(k_sub))
    obj = rate_report(beta, alloc, powers, gains, weights,
                      sc.noise_var, sc.ici_power).objective

    trace: list[tuple[str, float]] = []
    dropped: list[tuple[int, int]] = []
    stage_logs: list[StageLog] = []
    eps = sc.tolerances.bcd
    iterations = 0

    for iterations in range(1, _MAX_BCD + 1):
        cycle_start = obj

        if fixed_matching is not None:
            if iterations == 1:
                cand_beta, cand_alloc = fixed_matching.to_beta_alloc(n_ues)
                alloc, powers = complete_powers(beta, None, powers, cand_beta,
                                                cand_alloc, gains, weights, sc)
                beta = cand_beta
                obj = rate_report(beta, alloc, powers, gains, weights,
                                  sc.noise_var, sc.ici_power).objective
                trace.append(("matching", obj))
        else:
            obj, beta, alloc, powers = _matching_stage(
                sc, gains, weights, beta, alloc, powers, obj, relay_allowed)
            trace.append(("matching", obj))

        if optimize_trajectory:
            inputs = SlotInputs(sc, beta, alloc, powers, weights, slot_index)
            if inputs.relay_pairs():
                result = to_algorithm(UavState(tuple(pos), anchor), inputs)
                if result.objective >= obj - _STAGE_TOL * max(1.0, abs(obj)):
                    pos = result.position
                    obj = max(obj, result.objective)
                    stage_logs.extend(result.logs)
            else:
                # the objective is flat in the position, so close in on
                # the UEs nothing currently reaches; later slots then see
                # relayable geometry instead of a parked UAV
                rates = rate_report(beta, alloc, powers, gains, weights,
                                    sc.noise_var, sc.ici_power).per_ue_rate
                pos = _drift_toward_unserved(sc, pos, anchor, rates, weights)
            gains = gain_matrices(sc, pos, slot_index)
            trace.append(("trajectory", obj))

        res = scp_power(beta, alloc, gains, weights, sc, init=powers)
        if res.objective >= obj - _STAGE_TOL * max(1.0, abs(obj)):
            powers, alloc = res.powers, res.alloc
            obj = max(obj, res.objective)
            dropped.extend(res.dropped)
        trace.append(("power", obj))

        if obj - cycle_start < eps:
            break

    report = rate_report(beta, alloc, powers, gains, weights,
                         sc.noise_var, sc.ici_power)
    return SlotSolution(beta, alloc, powers, pos,
                        np.asarray(anchor, dtype=float), report.per_ue_rate,
                        weights, report.objective, iterations, trace, dropped,
                        stage_logs)


# ---------------------------------------------------------------------------
# Episodes.

@dataclass
class EpisodeLog:
    scenario: Scenario
    algorithm: str
    slots: list[SlotSolution]
    rates: np.ndarray            # (T, N)
    weights_history: np.ndarray  # (T, N)
    avg_rates: np.ndarray        # (N,)
    sum_rate: float              # mean per-slot sum of UE rates
    jain: float
    avg_speed: float
    n_relay_ues: float           # per-slot means
    n_scheduled_ues: float


def _random_matching(sc: Scenario, gains: ChannelGains, weights: np.ndarray,
                     rng: np.random.Generator) -> Matching:
    """Uniform mode per UE among its QoS-feasible options, then each
    subchannel goes to a uniform pick of the UEs feasible on it."""
    ctx = MatchingContext(weights, gains, sc.noise_var, sc.ici_power,
                          sc.snr_thresholds, sc.p_ue_max, sc.p_uav_max)
    modes: dict[int, int] = {}
    for n in range(sc.n_ues):
        options = [m for m in (CELLULAR, RELAY)
                   if any(pair_feasible(k, McPair(n, m), ctx)
                          for k in range(sc.n_subchannels))]
        if options:
            modes[n] = int(rng.choice(options))
    assign: list[McPair | None] = [VACANT] * sc.n_subchannels
    for k in range(sc.n_subchannels):
        cands = [n for n, m in modes.items()
                 if pair_feasible(k, McPair(n, m), ctx)]
        if cands:
            n = int(rng.choice(cands))
            assign[k] = McPair(n, modes[n])
    return Matching(assign)


def run_episode(scenario: Scenario, algorithm: str = "jmstp") -> EpisodeLog:
    """Run all slots under proportional fairness for one algorithm
    (`jmstp`, `random`, or `cellular`)."""
    if algorithm not in ("jmstp", "random", "cellular"):
        raise ValueError(f"unknown algorithm: {algorithm}")
    sc = scenario.with_positions()
    n_slots, n_ues = sc.n_slots, sc.n_ues
    rates = np.zeros((n_slots, n_ues))
    weights_history = np.zeros((n_slots, n_ues))
    slots: list[SlotSolution] = []
    pos = np.asarray(sc.uav_start, dtype=float)
    prev: SlotSolution | None = None

    for t in range(n_slots):
        weights = update_weights(rates[:t].mean(axis=0) if t else np.zeros(n_ues))
        state = UavState(tuple(pos), tuple(pos))
        if algorithm == "jmstp":
            sol = jmstp_slot(sc, state, weights, prev, t)
        elif algorithm == "random":
            gains = gain_matrices(sc, pos, t)
            rng = np.random.default_rng((sc.rng_seed, 11, t))
            psi = _random_matching(sc, gains, weights, rng)
            sol = jmstp_slot(sc, state, weights, None, t, fixed_matching=psi)
        else:
            sol = jmstp_slot(sc, state, weights, prev, t, relay_allowed=False,
                             optimize_trajectory=False)
        slots.append(sol)
        rates[t] = sol.rates
        weights_history[t] = weights
        pos = sol.position
        prev = sol

    avg_rates = rates.mean(axis=0)
    return EpisodeLog(
        scenario=sc, algorithm=algorithm, slots=slots, rates=rates,
        weights_history=weights_history, avg_rates=avg_rates,
        sum_rate=float(rates.sum(axis=1).mean()),
        jain=jain_index(avg_rates) if avg_rates.any() else 1.0,
        avg_speed=float(np.mean([s.speed for s in slots])) / sc.slot_len,
        n_relay_ues=float(np.mean([len(s.relay_ues()) for s in slots])),
        n_scheduled_ues=float(np.mean([len(s.scheduled_ues()) for s in slots])))


def baseline_random(scenario: Scenario) -> EpisodeLog:
    return run_episode(scenario, "random")


def baseline_cellular(scenario: Scenario) -> EpisodeLog:
    return run_episode(scenario, "cellular")


# ---------------------------------------------------------------------------
# Sweeps and cluster metrics.

SWEEP_AXES = ("p_ue_max", "d_max", "p_uav_max", "e_max")
ALGORITHMS = ("jmstp", "random", "cellular")


def sweep(template: Scenario, axis: str, values, n_seeds: int = 10,
          algorithms=ALGORITHMS) -> list[dict]:
    """One row of seed-averaged metrics per (axis value, algorithm).

    The template must not have positions baked in; each seed draws its
    own topology and fading."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis: {axis}; use one of {SWEEP_AXES}")
    rows = []
    for value in values:
        for algorithm in algorithms:
            logs = []
            for seed in range(n_seeds):
                sc = replace(template, rng_seed=seed, **{axis: float(value)})
                logs.append(run_episode(sc.with_positions(seed), algorithm))
            rows.append({
                "axis": axis,
                "value": float(value),
                "algorithm": algorithm,
                "seeds": n_seeds,
                "sum_rate": float(np.mean([log.sum_rate for log in logs])),
                "jain": float(np.mean([log.jain for log in logs])),
                "n_relay_ues": float(np.mean([log.n_relay_ues for log in logs])),
                "n_scheduled_ues": float(np.mean([log.n_scheduled_ues for log in logs])),
                "avg_speed": float(np.mean([log.avg_speed for log in logs])),
            })
    return rows


def dwell_times(log: EpisodeLog, centroids) -> np.ndarray:
    """Seconds the UAV spends nearest each centroid (horizontal distance,
    ties to the first)."""
    centroids = np.asarray(centroids, dtype=float)
    out = np.zeros(len(centroids))
    for sol in log.slots:
        d = np.linalg.norm(centroids[:, :2] - sol.position[:2], axis=1)
        out[int(np.argmin(d))] += log.scenario.slot_len
    return out


def cluster_scenario(n_a: int, n_b: int, seed: int = 0, spread: float = 60.0,
                     **overrides) -> Scenario:
    """Two UE clusters around fixed opposite centroids, sized n_a and n_b,
    for the dwell-time experiments."""
    rng = np.random.default_rng((seed, 5))
    centers = np.array([[250.0, 0.0], [-250.0, 0.0]])
    pts = []
    for count, center in zip((n_a, n_b), centers):
        for _ in range(count):
            p = center + rng.uniform(-spread, spread, 2)
            pts.append((float(p[0]), float(p[1]), 0.0))
    base = dict(n_ues=n_a + n_b, ue_positions=tuple(pts), rng_seed=seed)
    base.update(overrides)
    return Scenario(**base).with_positions(seed)


def paired_bootstrap_lower(diffs, n_resamples: int = 10_000,
                           alpha: float = 0.05, seed: int = 0) -> float:
    """Lower edge of the (1 - alpha) bootstrap interval for the mean of
    paired per-seed differences.  A positive return means the first arm
    beats the second with that confidence."""
    diffs = np.asarray(diffs, dtype=float)
    rng = np.random.default_rng((seed, 17))
    idx = rng.integers(0, diffs.size, size=(n_resamples, diffs.size))
    means = diffs[idx].mean(axis=1)
    return float(np.quantile(means, alpha / 2.0))
