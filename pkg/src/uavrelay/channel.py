"""Channel power gains and inter-carrier interference.

Terrestrial links are Rayleigh with a distance power law.  Air links mix
line-of-sight and non-line-of-sight free-space losses, weighted by an
elevation-angle logistic.  The ICI machinery quantifies how much power a
Doppler-shifted relayed subcarrier leaks into its neighbours; the rest of
the package treats that leakage as the constant `Scenario.ici_power`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import SPEED_OF_LIGHT, A2GParams, Scenario


def free_space_pathloss(freq: float) -> float:
    """(4 pi f / c)^2, the 1 m free-space loss at carrier frequency f."""
    if freq <= 0:
        raise ValueError("frequency must be positive")
    return (4.0 * math.pi * freq / SPEED_OF_LIGHT) ** 2


def los_probability(elevation_deg: float, a: float, b: float) -> float:
    if not 0.0 < elevation_deg <= 90.0:
        raise ValueError("elevation must be in (0, 90] degrees")
    return 1.0 / (1.0 + a * math.exp(-b * (elevation_deg - a)))


def elevation_deg(dz: float, dist: float) -> float:
    """Elevation angle in degrees of a link with height difference dz over
    slant distance dist."""
    return math.degrees(math.asin(dz / dist))


def avg_pathloss(dist: float, elev_deg: float, freq: float, params: A2GParams) -> float:
    """LoS/NLoS mixture of the squared-distance free-space loss."""
    pr_los = los_probability(elev_deg, params.a, params.b)
    base = free_space_pathloss(freq) * dist * dist
    return pr_los * base * params.eta_los + (1.0 - pr_los) * base * params.eta_nlos


def a2g_gain(pos_a, pos_b, freq: float, params: A2GParams, fading: float = 1.0) -> float:
    """Average air link power gain between the two endpoints.

    One endpoint must be strictly higher (the aircraft); the link is
    reciprocal so argument order does not matter.
    """
    d = math.dist(pos_a, pos_b)
    if d == 0.0:
        raise ValueError("coincident endpoints")
    dz = abs(pos_a[2] - pos_b[2])
    if dz <= 0.0:
        raise ValueError("air link endpoints must differ in height")
    return fading / avg_pathloss(d, elevation_deg(dz, d), freq, params)


def rayleigh_gain(ue_pos, bs_pos, alpha: float, fading: float = 1.0) -> float:
    """Terrestrial power gain d^-alpha * |g|^2."""
    d = math.dist(ue_pos, bs_pos)
    if d == 0.0:
        raise ValueError("coincident endpoints")
    return d ** (-alpha) * fading


def fading_draws(model: str, shape, rng: np.random.Generator, k_db: float = 10.0) -> np.ndarray:
    """Unit-mean small-scale power fading |g|^2."""
    if model == "none":
        return np.ones(shape)
    if model == "rayleigh":
        return rng.exponential(1.0, shape)
    if model == "rician":
        k = 10.0 ** (k_db / 10.0)
        mean_amp = math.sqrt(k / (k + 1.0))
        scatter_std = math.sqrt(1.0 / (2.0 * (k + 1.0)))
        re = mean_amp + rng.normal(0.0, scatter_std, shape)
        im = rng.normal(0.0, scatter_std, shape)
        return re * re + im * im
    raise ValueError(f"unknown fading model {model!r}")


@dataclass
class ChannelGains:
    """Linear power gains for one slot: (N, K) UE-to-BS, (N, K) UE-to-UAV,
    (K,) UAV-to-BS."""

    h_ue_bs: np.ndarray
    h_ue_uav: np.ndarray
    h_uav_bs: np.ndarray

    def check(self) -> None:
        for name in ("h_ue_bs", "h_ue_uav", "h_uav_bs"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"{name} must be strictly positive and finite")


def gain_matrices(scenario: Scenario, uav_pos, slot_index: int = 0) -> ChannelGains:
    """All link gains for one UAV position.

    Fading is deterministic 1 unless the scenario opts into a model, in
    which case draws are seeded per (scenario seed, slot).
    """
    n, k = scenario.n_ues, scenario.n_subchannels
    if scenario.fading_model == "none":
        g_ue_bs = np.ones((n, k))
        g_ue_uav = np.ones((n, k))
        g_uav_bs = np.ones(k)
    else:
        rng = np.random.default_rng((scenario.rng_seed, 7, slot_index))
        # "mixed" is the full channel model: Rayleigh on the terrestrial
        # link, Rician on both air links
        ground = "rayleigh" if scenario.fading_model == "mixed" else scenario.fading_model
        air = "rician" if scenario.fading_model == "mixed" else scenario.fading_model
        g_ue_bs = fading_draws(ground, (n, k), rng, scenario.rician_k_factor)
        g_ue_uav = fading_draws(air, (n, k), rng, scenario.rician_k_factor)
        g_uav_bs = fading_draws(air, (k,), rng, scenario.rician_k_factor)

    bs_pos = (0.0, 0.0, scenario.bs_height)
    h_ue_bs = np.empty((n, k))
    h_ue_uav = np.empty((n, k))
    h_uav_bs = np.empty(k)
    for j in range(k):
        f = scenario.subchannel_freqs[j]
        h_uav_bs[j] = a2g_gain(uav_pos, bs_pos, f, scenario.a2g, g_uav_bs[j])
        for i in range(n):
            h_ue_bs[i, j] = rayleigh_gain(scenario.ue_positions[i], bs_pos,
                                          scenario.pathloss_exp, g_ue_bs[i, j])
            h_ue_uav[i, j] = a2g_gain(uav_pos, scenario.ue_positions[i], f,
                                      scenario.a2g, g_ue_uav[i, j])
    gains = ChannelGains(h_ue_bs, h_ue_uav, h_uav_bs)
    gains.check()
    return gains


# ---------------------------------------------------------------------------
# Inter-carrier interference from Doppler on relayed subcarriers.

def dirichlet_kernel(x, n: int):
    """sin(pi x) / (n sin(pi x / n)), the leakage coefficient between OFDM
    bins offset by x, for an n-point DFT.  Vectorized; the removable
    singularities at x = 0 mod n take their limit cos(pi x)/cos(pi x/n)."""
    arr = np.asarray(x, dtype=float)
    denom = n * np.sin(np.pi * arr / n)
    near = np.abs(denom) < 1e-12
    safe = np.where(near, 1.0, denom)
    out = np.where(near,
                   np.cos(np.pi * arr) / np.cos(np.pi * arr / n),
                   np.sin(np.pi * arr) / safe)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IciContext:
    """Inputs for one ICI evaluation at a single desired subcarrier.

    `occupied` lists the subcarriers carrying relayed (Doppler-shifted)
    signals; `powers` their received powers at the BS after relaying.
    `desired_power` is the received power of the wanted signal on
    `desired_index`: the relayed power in relay mode, the direct-path
    power in cellular mode.
    """

    n_subcarriers: int = 1000
    spacing_hz: float = 15e3
    center_freq_hz: float = 3.5e9
    uav_speed: float = 100.0 / 3.6
    desired_index: int = 500
    occupied: tuple[int, ...] = ()
    powers: tuple[float, ...] = ()
    desired_power: float = 1.0
    n_angle_samples: int = 512

    @property
    def max_normalized_doppler(self) -> float:
        return self.uav_speed * self.center_freq_hz / SPEED_OF_LIGHT / self.spacing_hz


def _angle_grid(n: int) -> np.ndarray:
    # midpoint rule over [0, pi]; the ray-arrival angle of an isotropic
    # scatter model enters only through cos, symmetric about pi.
    return (np.arange(n) + 0.5) * (np.pi / n)


def _mean_kernel_sq(offsets: np.ndarray, ctx: IciContext) -> np.ndarray:
    """E over arrival angle of |D(offset + eps cos phi)|^2, per offset."""
    eps = ctx.max_normalized_doppler
    if eps == 0.0:
        # no Doppler: bins stay orthogonal, integer offsets leak nothing
        return np.where(offsets % ctx.n_subcarriers == 0, 1.0, 0.0)
    phis = _angle_grid(ctx.n_angle_samples)
    x = offsets[:, None] + eps * np.cos(phis)[None, :]
    d = dirichlet_kernel(x, ctx.n_subcarriers)
    return np.mean(d * d, axis=1)


def ici_power(mode: str, ctx: IciContext) -> float:
    """Expected interference power leaked into the desired subcarrier by
    the occupied relayed subcarriers, in the same unit as ctx.powers."""
    if mode not in ("cellular", "relay"):
        raise ValueError("mode must be 'cellular' or 'relay'")
    if any(not 0 <= m < ctx.n_subcarriers for m in ctx.occupied):
        raise ValueError("occupied subcarrier index out of range")
    if not 0 <= ctx.desired_index < ctx.n_subcarriers:
        raise ValueError("desired subcarrier index out of range")
    pairs = [(m, p) for m, p in zip(ctx.occupied, ctx.powers) if m != ctx.desired_index]
    if not pairs:
        return 0.0
    offsets = np.array([m - ctx.desired_index for m, _ in pairs], dtype=float)
    powers = np.array([p for _, p in pairs])
    return float(np.dot(powers, _mean_kernel_sq(offsets, ctx)))


def desired_power(mode: str, ctx: IciContext) -> float:
    """Received power of the wanted signal after Doppler.  Only the relayed
    path moves, so cellular reception keeps full subcarrier orthogonality."""
    if mode == "cellular":
        return ctx.desired_power
    if mode == "relay":
        return ctx.desired_power * float(_mean_kernel_sq(np.zeros(1), ctx)[0])
    raise ValueError("mode must be 'cellular' or 'relay'")


def ici_ratio_db(mode: str, ctx: IciContext) -> float:
    return 10.0 * math.log10(ici_power(mode, ctx) / desired_power(mode, ctx))


def reference_ici_context(mode: str, occupancy: float = 1.0,
                          pathloss_advantage_db: float = 15.0,
                          **overrides) -> IciContext:
    """Representative configuration used to justify the constant ICI term.

    All relayed subcarriers arrive with equal power (the relay's automatic
    gain control equalizes them); in cellular mode the wanted direct path
    is `pathloss_advantage_db` weaker than the relayed interferers.
    `occupancy` keeps that fraction of the other subcarriers occupied,
    nearest to the desired one first (the worst case for leakage).
    """
    base = IciContext(**overrides)
    k = base.desired_index
    others = sorted((m for m in range(base.n_subcarriers) if m != k),
                    key=lambda m: (abs(m - k), m))
    n_occ = round(occupancy * len(others))
    occupied = tuple(sorted(others[:n_occ]))
    desired = 1.0 if mode == "relay" else 10.0 ** (-pathloss_advantage_db / 10.0)
    return IciContext(**{**base.__dict__,
                         "occupied": occupied,
                         "powers": (1.0,) * len(occupied),
                         "desired_power": desired})


def occupancy_sensitivity(fractions=(1.0, 0.75, 0.5, 0.25, 0.1)) -> list[tuple[float, float, float]]:
    """(fraction, relay ratio dB, cellular ratio dB) rows for the reference
    geometry at several occupancy levels."""
    rows = []
    for frac in fractions:
        relay = ici_ratio_db("relay", reference_ici_context("relay", frac))
        cell = ici_ratio_db("cellular", reference_ici_context("cellular", frac))
        rows.append((frac, relay, cell))
    return rows
