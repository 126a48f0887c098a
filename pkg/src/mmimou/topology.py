"""Hexagonal multi-site layout with wrap-around and device drops."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import ConfigError

SQRT3 = np.sqrt(3.0)
_RING = {1: 0, 7: 1, 19: 2}

AP, STA = 0, 1


@dataclass
class BaseStation:
    id: int
    site: int
    position: np.ndarray
    sector_azimuth_deg: float
    n_antennas: int | None = None
    height_m: float = 25.0
    downtilt_deg: float = 12.0
    tx_power_dbm: float = 30.0


@dataclass
class NetworkLayout:
    sites: np.ndarray  # (S, 2)
    sectors_per_site: int
    bss: list
    isd: float
    wrap_vectors: np.ndarray  # (W, 2), empty for a single site

    @property
    def num_bs(self) -> int:
        return len(self.bss)

    @property
    def bs_positions(self) -> np.ndarray:
        return np.array([b.position for b in self.bss]).reshape(-1, 2)

    @property
    def bs_azimuths_deg(self) -> np.ndarray:
        return np.array([b.sector_azimuth_deg for b in self.bss], dtype=float)


@dataclass
class UserEquipment:
    """Dropped UEs, stored column-wise."""

    positions: np.ndarray  # (U, 2)
    drop_sector: np.ndarray  # (U,) BS id of the sector the UE was dropped in
    serving_bs: np.ndarray = field(default=None)  # (U,), filled by association

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.drop_sector = np.asarray(self.drop_sector, dtype=int)
        if self.serving_bs is None:
            self.serving_bs = self.drop_sector.copy()

    def __len__(self):
        return len(self.positions)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))


@dataclass
class WiFiDevices:
    """Wi-Fi APs and STAs of all hotspots, stored column-wise."""

    positions: np.ndarray  # (L, 2)
    kind: np.ndarray  # (L,) AP or STA
    cluster: np.ndarray  # (L,) global cluster index
    sector: np.ndarray  # (L,) BS id of the sector hosting the cluster
    tx_power_dbm: np.ndarray  # (L,)
    cluster_centers: np.ndarray  # (C, 2)
    associated_ap: np.ndarray = field(default=None)  # (L,) device index of serving AP

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.cluster_centers = np.asarray(self.cluster_centers, dtype=float).reshape(-1, 2)
        if self.associated_ap is None:
            self.associated_ap = np.full(len(self.positions), -1, dtype=int)

    def __len__(self):
        return len(self.positions)

    @property
    def num_clusters(self) -> int:
        return len(self.cluster_centers)

    @property
    def ap_index(self) -> np.ndarray:
        return np.flatnonzero(self.kind == AP)


def _axial_sites(ring: int) -> list:
    cells = []
    for q in range(-ring, ring + 1):
        for r in range(max(-ring, -q - ring), min(ring, -q + ring) + 1):
            cells.append((q, r))
    # center first, then by ring, then by angle, for stable site ids
    def key(c):
        q, r = c
        x, y = q + r / 2.0, r * SQRT3 / 2.0
        dist = max(abs(q), abs(r), abs(q + r))
        return (dist, np.round(np.arctan2(y, x) % (2 * np.pi), 9))
    return sorted(cells, key=key)


def _axial_to_xy(q, r, isd):
    return np.array([isd * (q + r / 2.0), isd * r * SQRT3 / 2.0])


def wrap_shifts(num_sites: int, isd: float) -> np.ndarray:
    """The six translations that tile the plane with copies of the cluster."""
    ring = _RING[num_sites]
    if ring == 0:
        return np.zeros((0, 2))
    q, r = 2 * ring + 1, -ring
    out = []
    for _ in range(6):
        out.append(_axial_to_xy(q, r, isd))
        q, r = -r, q + r  # rotate by 60 degrees
    return np.array(out)


def build_layout(num_sites: int = 19, isd: float = 500.0, sectors_per_site: int = 3,
                 bs_height: float = 25.0, downtilt: float = 12.0,
                 tx_power_dbm: float = 30.0) -> NetworkLayout:
    if num_sites not in _RING:
        raise ConfigError(f"num_sites must be one of 1, 7, 19 (got {num_sites})")
    if isd <= 0:
        raise ConfigError("isd must be positive")
    if sectors_per_site < 1:
        raise ConfigError("sectors_per_site must be >= 1")
    sites = np.array([_axial_to_xy(q, r, isd) for q, r in _axial_sites(_RING[num_sites])])
    bss = []
    for s, pos in enumerate(sites):
        for j in range(sectors_per_site):
            bss.append(BaseStation(
                id=s * sectors_per_site + j, site=s, position=pos.copy(),
                sector_azimuth_deg=360.0 * j / sectors_per_site,
                height_m=bs_height, downtilt_deg=downtilt, tx_power_dbm=tx_power_dbm,
            ))
    return NetworkLayout(sites=sites, sectors_per_site=sectors_per_site, bss=bss,
                         isd=float(isd), wrap_vectors=wrap_shifts(num_sites, isd))


def wrap_displacement(layout: NetworkLayout, a, b) -> np.ndarray:
    """Shortest displacements from each point of ``a`` to each point of ``b``.

    Returns an array of shape (len(a), len(b), 2).
    """
    return kernels.wrapped_displacement(a, b, layout.wrap_vectors)


def wrap_distance(layout: NetworkLayout, a, b):
    """Wrap-around distance between two points, or pairwise for point arrays."""
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    d = np.hypot(*np.moveaxis(wrap_displacement(layout, a_arr, b_arr), -1, 0))
    if a_arr.ndim == 1 and b_arr.ndim == 1:
        return float(d[0, 0])
    return d


def in_site_hexagon(xy, isd: float) -> np.ndarray:
    """Membership in the hexagonal site cell centered at the origin."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    h = isd / 2.0 + 1e-9
    x, y = xy[:, 0], xy[:, 1]
    return (np.abs(x) <= h) & (np.abs(0.5 * x + 0.5 * SQRT3 * y) <= h) & (
        np.abs(-0.5 * x + 0.5 * SQRT3 * y) <= h)


def sector_of(offsets, sectors_per_site: int) -> np.ndarray:
    """Sector index (0-based within the site) of site-relative offsets."""
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 2)
    width = 360.0 / sectors_per_site
    az = np.degrees(np.arctan2(offsets[:, 1], offsets[:, 0]))
    return (np.floor((az + width / 2.0) / width).astype(int)) % sectors_per_site


def _sample_in_sector(n, sector, sectors_per_site, isd, min_dist, rng):
    """Uniform points in the given sector wedge of a site hexagon."""
    out = np.empty((0, 2))
    half_w, half_h = isd / 2.0, isd / SQRT3
    while len(out) < n:
        m = max(16, 4 * sectors_per_site * (n - len(out)))
        cand = np.column_stack([rng.uniform(-half_w, half_w, m), rng.uniform(-half_h, half_h, m)])
        keep = in_site_hexagon(cand, isd)
        keep &= sector_of(cand, sectors_per_site) == sector
        keep &= np.hypot(cand[:, 0], cand[:, 1]) >= min_dist
        out = np.concatenate([out, cand[keep]])
    return out[:n]


def drop_ues(layout: NetworkLayout, mean_per_sector: float, rng,
             min_distance: float = 35.0) -> UserEquipment:
    """Poisson number of UEs per sector, uniform over the sector area."""
    if mean_per_sector <= 0:
        raise ValueError("mean_per_sector must be positive")
    pos, sec = [], []
    for bs in layout.bss:
        n = int(rng.poisson(mean_per_sector))
        j = bs.id % layout.sectors_per_site
        pts = _sample_in_sector(n, j, layout.sectors_per_site, layout.isd, min_distance, rng)
        pos.append(pts + bs.position)
        sec.append(np.full(n, bs.id, dtype=int))
    return UserEquipment(positions=np.concatenate(pos) if pos else np.zeros((0, 2)),
                         drop_sector=np.concatenate(sec) if sec else np.zeros(0, dtype=int))


def drop_wifi(layout: NetworkLayout, clusters_per_sector: int, radius: float, rng,
              stas_per_cluster: int = 7, ap_power_dbm: float = 24.0,
              sta_power_dbm: float = 18.0, min_distance: float = 35.0) -> WiFiDevices:
    """Drop hotspots: one AP plus ``stas_per_cluster`` STAs per cluster."""
    if clusters_per_sector < 0:
        raise ValueError("clusters_per_sector must be >= 0")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    per = 1 + stas_per_cluster
    bs_pos = layout.bs_positions
    centers, positions, kinds, clusters, sectors = [], [], [], [], []
    c = 0
    for bs in layout.bss:
        j = bs.id % layout.sectors_per_site
        cen = _sample_in_sector(clusters_per_sector, j, layout.sectors_per_site, layout.isd,
                                min_distance, rng) + bs.position
        for center in cen:
            dev = np.empty((per, 2))
            for m in range(per):
                while True:
                    rho = radius * np.sqrt(rng.uniform())
                    phi = rng.uniform(0.0, 2 * np.pi)
                    p = center + rho * np.array([np.cos(phi), np.sin(phi)])
                    d = np.min(np.hypot(*(wrap_displacement(layout, bs_pos, p)[:, 0, :].T)))
                    if d >= min_distance:
                        break
                dev[m] = p
            centers.append(center)
            positions.append(dev)
            kinds.append(np.array([AP] + [STA] * stas_per_cluster))
            clusters.append(np.full(per, c))
            sectors.append(np.full(per, bs.id))
            c += 1
    if c == 0:
        return WiFiDevices(positions=np.zeros((0, 2)), kind=np.zeros(0, dtype=int),
                           cluster=np.zeros(0, dtype=int), sector=np.zeros(0, dtype=int),
                           tx_power_dbm=np.zeros(0), cluster_centers=np.zeros((0, 2)))
    kind = np.concatenate(kinds)
    return WiFiDevices(
        positions=np.concatenate(positions), kind=kind, cluster=np.concatenate(clusters),
        sector=np.concatenate(sectors),
        tx_power_dbm=np.where(kind == AP, ap_power_dbm, sta_power_dbm).astype(float),
        cluster_centers=np.array(centers),
    )


def associate_ues(gains) -> np.ndarray:
    """Serving BS per UE: argmax over rows of a (B, U) gain table.

    Ties go to the lowest BS id.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.shape[1] == 0:
        return np.zeros(0, dtype=int)
    return np.argmax(gains, axis=0)


def associate_stas(wifi: WiFiDevices, gains) -> np.ndarray:
    """Each STA picks the AP with the largest gain; APs map to themselves.

    ``gains`` is the (L, L) device-to-device slow fading table.
    """
    gains = np.asarray(gains, dtype=float)
    aps = wifi.ap_index
    out = np.arange(len(wifi))
    if len(aps):
        sta = np.flatnonzero(wifi.kind == STA)
        out[sta] = aps[np.argmax(gains[np.ix_(aps, sta)], axis=0)]
    wifi.associated_ap = out
    return out
