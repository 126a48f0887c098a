"""Slow fading (path loss, shadowing, antenna gain) and Ricean fast fading.

Slow fading is fixed for a drop; fast fading is redrawn every coherence
interval. All gains are linear power ratios, powers are in mW.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import ChannelConfig, SimulationConfig
from .topology import NetworkLayout, UserEquipment, WiFiDevices, wrap_displacement
from .units import db2lin

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0

# UMa NLOS street width and average building height (36.814 defaults)
_UMA_W = 20.0
_UMA_H = 20.0


def _clamp(d, floor, what):
    d = np.asarray(d, dtype=float)
    if np.any(d < floor):
        log.warning("%s distance below %.1f m clamped to the model floor", what, floor)
        d = np.maximum(d, floor)
    return d


def los_probability_uma(d2d):
    d2d = np.asarray(d2d, dtype=float)
    return np.minimum(18.0 / np.maximum(d2d, 1e-9), 1.0) * (1.0 - np.exp(-d2d / 63.0)) + np.exp(-d2d / 63.0)


def los_probability_d2d(d2d):
    d2d = np.asarray(d2d, dtype=float)
    return np.minimum(18.0 / np.maximum(d2d, 1e-9), 1.0) * (1.0 - np.exp(-d2d / 36.0)) + np.exp(-d2d / 36.0)


def path_loss_bs_link(d3d, fc_ghz=5.15, los=False, h_bs=25.0, h_ut=1.5, floor=35.0):
    """3GPP UMa path loss in dB (LOS dual slope / NLOS), 36.814 Table B.1.2.1-1."""
    d = _clamp(d3d, floor, "BS link")
    los = np.broadcast_to(np.asarray(los, dtype=bool), d.shape)
    hb, hu = h_bs - 1.0, h_ut - 1.0
    d_bp = 4.0 * hb * hu * fc_ghz * 1e9 / SPEED_OF_LIGHT
    lg = np.log10(d)
    pl_los = np.where(
        d < d_bp,
        22.0 * lg + 28.0 + 20.0 * np.log10(fc_ghz),
        40.0 * lg + 7.8 - 18.0 * np.log10(hb) - 18.0 * np.log10(hu) + 2.0 * np.log10(fc_ghz),
    )
    pl_nlos = (
        161.04 - 7.1 * np.log10(_UMA_W) + 7.5 * np.log10(_UMA_H)
        - (24.37 - 3.7 * (_UMA_H / h_bs) ** 2) * np.log10(h_bs)
        + (43.42 - 3.1 * np.log10(h_bs)) * (lg - 3.0)
        + 20.0 * np.log10(fc_ghz)
        - (3.2 * np.log10(11.75 * h_ut) ** 2 - 4.97)
    )
    return np.where(los, pl_los, pl_nlos)


def free_space_path_loss(d, fc_ghz):
    d = np.asarray(d, dtype=float)
    return 20.0 * np.log10(4.0 * np.pi * d * fc_ghz * 1e9 / SPEED_OF_LIGHT)


def path_loss_d2d(d, fc_ghz=5.15, los=False, h_tx=1.5, h_rx=1.5, floor=3.0):
    """Outdoor device-to-device path loss in dB.

    LOS follows the WINNER+ B1 dual slope with 1 m effective environment
    height; NLOS the hexagonal-layout microcell law. Both are bounded below
    by free space.
    """
    d = _clamp(d, floor, "D2D link")
    los = np.broadcast_to(np.asarray(los, dtype=bool), d.shape)
    h1, h2 = h_tx - 1.0, h_rx - 1.0
    d_bp = 4.0 * h1 * h2 * fc_ghz * 1e9 / SPEED_OF_LIGHT
    lg = np.log10(d)
    pl_los = np.where(
        d < d_bp,
        22.7 * lg + 27.0 + 20.0 * np.log10(fc_ghz),
        40.0 * lg + 7.56 - 17.3 * np.log10(h1) - 17.3 * np.log10(h2) + 2.7 * np.log10(fc_ghz),
    )
    pl_nlos = 36.7 * lg + 22.7 + 26.0 * np.log10(fc_ghz)
    return np.maximum(np.where(los, pl_los, pl_nlos), free_space_path_loss(d, fc_ghz))


def shadow_sigma_db(link_kind: str, cfg: ChannelConfig | None = None) -> float:
    cfg = cfg or ChannelConfig()
    try:
        return {
            "bs_los": cfg.shadow_sigma_bs_los_db,
            "bs_nlos": cfg.shadow_sigma_bs_nlos_db,
            "d2d_los": cfg.shadow_sigma_d2d_los_db,
            "d2d_nlos": cfg.shadow_sigma_d2d_nlos_db,
        }[link_kind]
    except KeyError:
        raise ValueError(f"unknown link kind {link_kind!r}") from None


def shadowing_sample(link_kind, rng, size=None, cfg: ChannelConfig | None = None):
    """Zero-mean Gaussian shadowing in dB, independent across links."""
    sigma = shadow_sigma_db(link_kind, cfg)
    if sigma == 0.0:
        return np.zeros(size) if size is not None else 0.0
    return rng.normal(0.0, sigma, size)


def element_gain(azimuth_off, elevation_off, max_gain=8.0, beamwidth=65.0, a_max=30.0):
    """Single-element pattern in dBi.

    Angles are in degrees, relative to the (tilted) boresight.
    """
    az = (np.asarray(azimuth_off, dtype=float) + 180.0) % 360.0 - 180.0
    el = np.asarray(elevation_off, dtype=float)
    a_h = -np.minimum(12.0 * (az / beamwidth) ** 2, a_max)
    a_v = -np.minimum(12.0 * (el / beamwidth) ** 2, a_max)
    return max_gain - np.minimum(-(a_h + a_v), a_max)


def ricean_k(d2d, intercept=13.0, slope=0.03):
    """Distance-dependent Ricean K factor in dB."""
    return intercept - slope * np.asarray(d2d, dtype=float)


def steering_vector(n_antennas: int, theta):
    """Half-wavelength ULA response toward azimuth ``theta`` (rad from broadside).

    Broadcasts over array-valued ``theta``; the antenna index is the last axis.
    """
    theta = np.asarray(theta, dtype=float)
    n = np.arange(n_antennas)
    return np.exp(-1j * np.pi * np.sin(theta)[..., None] * n)


def complex_normal(rng, shape):
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def fast_fading_vector(n_antennas, k_db, los_steering, rng):
    """Ricean fast fading: sqrt(K/(K+1)) LOS + sqrt(1/(K+1)) NLOS.

    ``k_db`` may be an array; ``los_steering`` then has shape ``k_db.shape + (N,)``.
    """
    k_db = np.asarray(k_db, dtype=float)
    los_steering = np.broadcast_to(np.asarray(los_steering, dtype=complex),
                                   k_db.shape + (n_antennas,))
    nlos = complex_normal(rng, k_db.shape + (n_antennas,))
    k = db2lin(k_db)
    with np.errstate(invalid="ignore", over="ignore"):
        a_los = np.where(np.isposinf(k_db), 1.0, np.sqrt(k / (k + 1.0)))
        a_nlos = np.where(np.isposinf(k_db), 0.0, np.sqrt(1.0 / (k + 1.0)))
    return a_los[..., None] * los_steering + a_nlos[..., None] * nlos


@dataclass
class SlowFading:
    """Slow fading of one family of links."""

    gain: np.ndarray  # linear
    path_loss_db: np.ndarray
    shadowing_db: np.ndarray
    antenna_gain_db: np.ndarray
    los: np.ndarray
    k_db: np.ndarray
    theta: np.ndarray | None = None  # azimuth from array broadside, rad (BS links)


@dataclass
class LinkBudget:
    """Slow fading of every link in a drop: BS-UE, BS-WiFi, WiFi-UE, WiFi-WiFi."""

    h: SlowFading  # (B, U)
    g: SlowFading  # (B, L)
    q: SlowFading  # (L, U)
    w: SlowFading  # (L, L)


@dataclass
class ChannelSet:
    """One coherence-interval realization.

    ``h[b, u]`` is the channel from BS ``b`` to the ``u``-th UE of
    ``ue_index``; ``g[b, l]`` from BS ``b`` to Wi-Fi device ``l``;
    ``q[l, u]`` from Wi-Fi device ``l`` to UE ``ue_index[u]``.
    """

    h: np.ndarray  # (B, U_sel, N)
    g: np.ndarray  # (B, L, N)
    q: np.ndarray  # (L, U_sel)
    ue_index: np.ndarray


def _bs_links(layout: NetworkLayout, positions, height, cfg: SimulationConfig, rng) -> SlowFading:
    ch = cfg.channel
    bs_pos = layout.bs_positions
    shape = (len(bs_pos), len(positions))
    if shape[1] == 0 or shape[0] == 0:
        empty = np.zeros(shape)
        return SlowFading(empty, empty, empty, empty, empty.astype(bool), empty, empty)
    disp = wrap_displacement(layout, bs_pos, positions)
    d2d = np.hypot(disp[..., 0], disp[..., 1])
    dh = cfg.layout.bs_height_m - height
    d3d = np.hypot(d2d, dh)
    az = np.degrees(np.arctan2(disp[..., 1], disp[..., 0])) - layout.bs_azimuths_deg[:, None]
    az = (az + 180.0) % 360.0 - 180.0
    el = np.degrees(np.arctan2(dh, d2d)) - ch.downtilt_deg
    ant = element_gain(az, el, ch.element_max_gain_dbi, ch.element_beamwidth_deg,
                       ch.element_max_attenuation_db)
    los = rng.uniform(size=shape) < los_probability_uma(d2d)
    pl = path_loss_bs_link(np.maximum(d3d, ch.bs_floor_m), ch.carrier_ghz, los,
                           cfg.layout.bs_height_m, height, ch.bs_floor_m)
    sigma = np.where(los, ch.shadow_sigma_bs_los_db, ch.shadow_sigma_bs_nlos_db)
    sh = sigma * rng.standard_normal(shape)
    gain = db2lin(ant - pl - sh)
    k_db = ricean_k(d2d, ch.k_factor_intercept_db, ch.k_factor_slope_db_per_m)
    return SlowFading(gain, pl, sh, ant, los, k_db, np.radians(az))


def _d2d_links(layout: NetworkLayout, src, dst, cfg: SimulationConfig, rng) -> SlowFading:
    ch = cfg.channel
    shape = (len(src), len(dst))
    if shape[0] == 0 or shape[1] == 0:
        empty = np.zeros(shape)
        return SlowFading(empty, empty, empty, empty, empty.astype(bool), empty)
    disp = wrap_displacement(layout, src, dst)
    d = np.hypot(disp[..., 0], disp[..., 1])
    los = rng.uniform(size=shape) < los_probability_d2d(d)
    pl = path_loss_d2d(np.maximum(d, ch.d2d_floor_m), ch.carrier_ghz, los,
                       cfg.layout.wifi_height_m, cfg.layout.ue_height_m, ch.d2d_floor_m)
    sigma = np.where(los, ch.shadow_sigma_d2d_los_db, ch.shadow_sigma_d2d_nlos_db)
    sh = sigma * rng.standard_normal(shape)
    ant = np.zeros(shape)
    k_db = ricean_k(d, ch.k_factor_intercept_db, ch.k_factor_slope_db_per_m)
    return SlowFading(db2lin(-pl - sh), pl, sh, ant, los, k_db)


def link_budget(layout: NetworkLayout, ues: UserEquipment, wifi: WiFiDevices,
                cfg: SimulationConfig, rng) -> LinkBudget:
    """Draw LOS states and shadowing, and compute all slow fading gains."""
    h = _bs_links(layout, ues.positions, cfg.layout.ue_height_m, cfg, rng)
    g = _bs_links(layout, wifi.positions, cfg.layout.wifi_height_m, cfg, rng)
    q = _d2d_links(layout, wifi.positions, ues.positions, cfg, rng)
    w = _d2d_links(layout, wifi.positions, wifi.positions, cfg, rng)
    return LinkBudget(h=h, g=g, q=q, w=w)


def realize_channels(budget: LinkBudget, n_antennas: int, rng, ue_index=None) -> ChannelSet:
    """Compose channels as sqrt(slow gain) x fast fading for one coherence interval.

    Only the UEs in ``ue_index`` (default: all) get BS and Wi-Fi channels.
    """
    if budget is None or n_antennas is None:
        raise ValueError("realize_channels needs a link budget and an antenna count")
    n_bs, n_ue = budget.h.gain.shape
    ue_index = np.arange(n_ue) if ue_index is None else np.asarray(ue_index, dtype=int)
    n_wifi = budget.g.gain.shape[1]

    h_k = budget.h.k_db[:, ue_index]
    h_los = steering_vector(n_antennas, budget.h.theta[:, ue_index])
    h = fast_fading_vector(n_antennas, h_k, h_los, rng)
    h *= np.sqrt(budget.h.gain[:, ue_index])[..., None]

    g_los = steering_vector(n_antennas, budget.g.theta)
    g = fast_fading_vector(n_antennas, budget.g.k_db, g_los, rng)
    g *= np.sqrt(budget.g.gain)[..., None]

    q_k = budget.q.k_db[:, ue_index]
    q = fast_fading_vector(1, q_k, np.ones(q_k.shape + (1,)), rng)[..., 0]
    q *= np.sqrt(budget.q.gain[:, ue_index])
    return ChannelSet(h=h.reshape(n_bs, len(ue_index), n_antennas),
                      g=g.reshape(n_bs, n_wifi, n_antennas),
                      q=q.reshape(n_wifi, len(ue_index)), ue_index=ue_index)
