"""Mode selection and subchannel allocation as a many-to-one matching game.

Each subchannel holds at most one (UE, mode) pair; a virtual VACANT entry
lets assignments move around.  The game evaluates utilities under equal-split
provisional powers: every active pair divides the UE budget evenly over its
matched subchannels and the relay budget is divided evenly over relay-matched
subchannels.  Swaps preserve those counts, so the split is fixed for a whole
run, which is what makes the brute-force oracle and the algorithm agree on
what a profitable swap is.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import link_rate as lr
from .channel import ChannelGains
from .scenario import SnrThresholds

VACANT = None

CELLULAR, RELAY = 0, 1


@dataclass(frozen=True)
class McPair:
    ue: int
    mode: int  # 0 cellular, 1 relay


@dataclass
class Matching:
    """Subchannel -> McPair-or-VACANT assignment."""

    assign: list[McPair | None]

    def copy(self) -> "Matching":
        return Matching(list(self.assign))

    def swapped(self, k1: int, k2: int) -> "Matching":
        out = self.copy()
        out.assign[k1], out.assign[k2] = out.assign[k2], out.assign[k1]
        return out

    def counts(self) -> dict[McPair, int]:
        out: dict[McPair, int] = {}
        for pair in self.assign:
            if pair is not VACANT:
                out[pair] = out.get(pair, 0) + 1
        return out

    def relay_total(self) -> int:
        return sum(1 for p in self.assign if p is not VACANT and p.mode == RELAY)

    def subchannels_of(self, pair: McPair) -> list[int]:
        return [k for k, p in enumerate(self.assign) if p == pair]

    def mode_consistent(self) -> bool:
        modes: dict[int, int] = {}
        for pair in self.assign:
            if pair is VACANT:
                continue
            if modes.setdefault(pair.ue, pair.mode) != pair.mode:
                return False
        return True

    def to_beta_alloc(self, n_ues: int) -> tuple[np.ndarray, np.ndarray]:
        n_sub = len(self.assign)
        beta = np.zeros(n_ues, dtype=int)
        alloc = np.zeros((n_ues, n_sub), dtype=int)
        for k, pair in enumerate(self.assign):
            if pair is VACANT:
                continue
            alloc[pair.ue, k] = 1
            beta[pair.ue] = pair.mode
        return beta, alloc


@dataclass(frozen=True)
class MatchingContext:
    """Slot inputs the game scores against."""

    weights: np.ndarray
    gains: ChannelGains
    sigma2: float
    ici: float
    thresholds: SnrThresholds
    p_ue_max: float
    p_uav_max: float

    @property
    def n_ues(self) -> int:
        return self.gains.h_ue_bs.shape[0]

    @property
    def n_subchannels(self) -> int:
        return self.gains.h_ue_bs.shape[1]

    def all_pairs(self) -> list[McPair]:
        return [McPair(n, m) for n in range(self.n_ues) for m in (CELLULAR, RELAY)]


def subchannel_utility(k: int, pair: McPair, ctx: MatchingContext,
                       ue_power: float | None = None,
                       uav_power: float | None = None) -> float:
    """Weighted rate the pair would earn on subchannel k at the given powers
    (full budgets when unspecified)."""
    p = ctx.p_ue_max if ue_power is None else ue_power
    pv = ctx.p_uav_max if uav_power is None else uav_power
    rate = lr.subchannel_rate(pair.mode, p, pv, ctx.gains.h_ue_bs[pair.ue, k],
                              ctx.gains.h_ue_uav[pair.ue, k], ctx.gains.h_uav_bs[k],
                              ctx.sigma2, ctx.ici)
    return float(ctx.weights[pair.ue]) * rate


def pair_feasible(k: int, pair: McPair, ctx: MatchingContext,
                  ue_power: float | None = None,
                  uav_power: float | None = None) -> bool:
    p = ctx.p_ue_max if ue_power is None else ue_power
    pv = ctx.p_uav_max if uav_power is None else uav_power
    mode = "relay" if pair.mode == RELAY else "cellular"
    return lr.qos_feasible(mode, p_ue=p, p_uav=pv,
                           h_direct=ctx.gains.h_ue_bs[pair.ue, k],
                           h_ue_uav=ctx.gains.h_ue_uav[pair.ue, k],
                           h_uav_bs=ctx.gains.h_uav_bs[k],
                           thresholds=ctx.thresholds,
                           sigma2=ctx.sigma2, ici=ctx.ici)


def mc_pair_utility(pair: McPair, subchannels, ctx: MatchingContext,
                    ue_power: float | None = None,
                    uav_power: float | None = None) -> float:
    return sum(subchannel_utility(k, pair, ctx, ue_power, uav_power)
               for k in subchannels)


class GameView:
    """Utilities and QoS verdicts of one matching under its equal-split
    powers, cached.  Valid across swaps because swaps never change any
    pair's subchannel count or the relay total."""

    def __init__(self, matching: Matching, ctx: MatchingContext):
        self.ctx = ctx
        self.counts = matching.counts()
        relay_total = matching.relay_total()
        self.uav_power = ctx.p_uav_max / relay_total if relay_total else 0.0
        self._utility: dict[tuple[McPair, int], float] = {}
        self._feasible: dict[tuple[McPair, int], bool] = {}

    def ue_power(self, pair: McPair) -> float:
        return self.ctx.p_ue_max / self.counts[pair]

    def utility(self, pair: McPair | None, k: int) -> float:
        if pair is VACANT:
            return 0.0
        key = (pair, k)
        if key not in self._utility:
            self._utility[key] = subchannel_utility(
                k, pair, self.ctx, self.ue_power(pair), self.uav_power)
        return self._utility[key]

    def feasible(self, pair: McPair | None, k: int) -> bool:
        if pair is VACANT:
            return True
        key = (pair, k)
        if key not in self._feasible:
            self._feasible[key] = pair_feasible(
                k, pair, self.ctx, self.ue_power(pair), self.uav_power)
        return self._feasible[key]

    def system_utility(self, matching: Matching) -> float:
        return sum(self.utility(p, k) for k, p in enumerate(matching.assign))


def _consistent_after_swap(psi: Matching, k1: int, k2: int) -> bool:
    involved = {p.ue for p in (psi.assign[k1], psi.assign[k2]) if p is not VACANT}
    swapped = psi.swapped(k1, k2)
    for ue in involved:
        modes = {p.mode for p in swapped.assign if p is not VACANT and p.ue == ue}
        if len(modes) > 1:
            return False
    return True


def approve_swap(psi: Matching, k1: int, k2: int, view: GameView) -> bool:
    """Swap approval shared by the algorithm, the stability audit, and the
    brute-force oracle.

    Approved iff, exchanging the matches of k1 and k2: no involved player
    (either subchannel, either pair) loses utility, at least one real pair
    strictly gains, and the swapped matching stays feasible (QoS on the two
    re-assigned subchannels, mode consistency; the power split and the
    exclusivity structure are unchanged by construction)."""
    p1, p2 = psi.assign[k1], psi.assign[k2]
    if p1 == p2:
        return False
    u11, u12 = view.utility(p1, k1), view.utility(p1, k2)
    u22, u21 = view.utility(p2, k2), view.utility(p2, k1)
    if u21 < u11 or u12 < u22:  # subchannels k1, k2 must not lose
        return False
    if u12 < u11 or u21 < u22:  # pairs p1, p2 must not lose
        return False
    strict = (p1 is not VACANT and u12 > u11) or (p2 is not VACANT and u21 > u22)
    if not strict:
        return False
    if not (view.feasible(p1, k2) and view.feasible(p2, k1)):
        return False
    return _consistent_after_swap(psi, k1, k2)


def swap_blocking(psi: Matching, k1: int, k2: int,
                  ctx: MatchingContext) -> tuple[bool, Matching | None]:
    if k1 == k2:
        raise ValueError("need two distinct subchannels")
    view = GameView(psi, ctx)
    if approve_swap(psi, k1, k2, view):
        return True, psi.swapped(k1, k2)
    return False, None


@dataclass
class MsmaResult:
    matching: Matching
    n_swaps: int
    swap_gains: list[float]
    utility_trace: list[float]
    examined_per_round: list[int]


def msma_detailed(init: Matching, ctx: MatchingContext) -> MsmaResult:
    """Run rounds of profitable swaps to pairwise stability.

    Deterministic: subchannel pairs scanned in ascending order, the first
    approved swap executes immediately.  A per-round memo skips configurations
    already tried in the round, mirroring the 'not yet executed' bookkeeping
    of the swap search."""
    psi = init.copy()
    view = GameView(psi, ctx)
    trace = [view.system_utility(psi)]
    gains: list[float] = []
    examined_per_round: list[int] = []
    n_sub = len(psi.assign)
    changed = True
    while changed:
        changed = False
        seen: set[tuple] = set()
        examined = 0
        for k1 in range(n_sub):
            for k2 in range(k1 + 1, n_sub):
                key = (k1, k2, psi.assign[k1], psi.assign[k2])
                if key in seen:
                    continue
                seen.add(key)
                examined += 1
                if approve_swap(psi, k1, k2, view):
                    before = view.utility(psi.assign[k1], k1) + view.utility(psi.assign[k2], k2)
                    after = view.utility(psi.assign[k1], k2) + view.utility(psi.assign[k2], k1)
                    psi.assign[k1], psi.assign[k2] = psi.assign[k2], psi.assign[k1]
                    gains.append(after - before)
                    trace.append(trace[-1] + (after - before))
                    changed = True
        examined_per_round.append(examined)
    return MsmaResult(psi, len(gains), gains, trace, examined_per_round)


def msma(init: Matching, ctx: MatchingContext) -> tuple[np.ndarray, np.ndarray]:
    return msma_detailed(init, ctx).matching.to_beta_alloc(ctx.n_ues)


def is_pairwise_stable(psi: Matching, ctx: MatchingContext) -> bool:
    view = GameView(psi, ctx)
    n_sub = len(psi.assign)
    return not any(approve_swap(psi, k1, k2, view)
                   for k1 in range(n_sub) for k2 in range(k1 + 1, n_sub))


def matching_feasible(psi: Matching, ctx: MatchingContext) -> bool:
    """Mode consistency plus per-assignment QoS under the matching's own
    equal-split powers.  Power caps hold by construction of the split."""
    if not psi.mode_consistent():
        return False
    view = GameView(psi, ctx)
    return all(view.feasible(p, k) for k, p in enumerate(psi.assign))


def _scored_modes(ctx: MatchingContext) -> dict[int, int]:
    """Pick each UE's mode by total utility over its QoS-feasible
    subchannels at full-budget reference powers."""
    modes: dict[int, int] = {}
    for n in range(ctx.n_ues):
        score = {CELLULAR: 0.0, RELAY: 0.0}
        for mode in (CELLULAR, RELAY):
            pair = McPair(n, mode)
            for k in range(ctx.n_subchannels):
                if pair_feasible(k, pair, ctx):
                    score[mode] += subchannel_utility(k, pair, ctx)
        modes[n] = RELAY if score[RELAY] > score[CELLULAR] else CELLULAR
    return modes


def init_matching(ctx: MatchingContext,
                  forced_modes: dict[int, int] | None = None) -> Matching:
    """Greedy feasible start.

    Each UE's mode is fixed first by comparing its total relayed vs direct
    utility over the subchannels where each mode meets QoS at full-budget
    reference powers (callers can pin modes instead via `forced_modes`).
    Subchannels then go greedily to the highest-utility feasible pair of
    the chosen modes, each candidate scored at the equal split it would
    hold after taking the channel, which is what steers channels away
    from a single dominant UE once its per-channel budget thins out.  A
    repair pass drops lowest-utility assignments until every survivor
    meets QoS under the realized equal split; dropping only raises the
    survivors' powers, so it terminates."""
    if forced_modes is not None:
        modes = dict(forced_modes)
    else:
        modes = _scored_modes(ctx)

    psi = Matching([VACANT] * ctx.n_subchannels)
    counts: dict[McPair, int] = {}
    relay_total = 0
    for k in range(ctx.n_subchannels):
        best, best_u = VACANT, 0.0
        for n in range(ctx.n_ues):
            pair = McPair(n, modes[n])
            p_split = ctx.p_ue_max / (counts.get(pair, 0) + 1)
            r_total = relay_total + (1 if pair.mode == RELAY else 0)
            pv_split = ctx.p_uav_max / r_total if r_total else 0.0
            if not pair_feasible(k, pair, ctx, p_split, pv_split):
                continue
            u = subchannel_utility(k, pair, ctx, p_split, pv_split)
            if u > best_u:
                best, best_u = pair, u
        psi.assign[k] = best
        if best is not VACANT:
            counts[best] = counts.get(best, 0) + 1
            if best.mode == RELAY:
                relay_total += 1

    while True:
        view = GameView(psi, ctx)
        bad = [(view.utility(p, k), k) for k, p in enumerate(psi.assign)
               if p is not VACANT and not view.feasible(p, k)]
        if not bad:
            return psi
        _, k_drop = min(bad)
        psi.assign[k_drop] = VACANT


def brute_force_stable(ctx: MatchingContext, n_ues: int, n_subchannels: int) -> list[Matching]:
    """All pairwise-stable matchings by exhaustive enumeration.

    A candidate must be mode-consistent and QoS-feasible under its own
    equal-split powers; stability re-uses the same approval predicate the
    algorithm runs, evaluated with the candidate's powers."""
    options: list[McPair | None] = [VACANT] + [McPair(n, m) for n in range(n_ues)
                                               for m in (CELLULAR, RELAY)]
    if len(options) ** n_subchannels > 100_000:
        raise ValueError("instance too large for brute force")
    stable = []
    for combo in itertools.product(options, repeat=n_subchannels):
        psi = Matching(list(combo))
        if not psi.mode_consistent():
            continue
        if not matching_feasible(psi, ctx):
            continue
        if is_pairwise_stable(psi, ctx):
            stable.append(psi)
    return stable
