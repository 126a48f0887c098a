"""Monte Carlo drops, Wi-Fi activity and rate models, and aggregation.

Seeding
-------
Drop ``d`` of a run with master seed ``s`` uses
``SeedSequence(entropy=s, spawn_key=(d,))``; each pipeline stage draws from
its own child ``SeedSequence(entropy=s, spawn_key=(d, stage))`` with the
stage numbers in :data:`STAGES`. Results are therefore a pure function of
(config, master seed), and two schemes run with the same seed see the same
topology, slow fading, fast fading, Wi-Fi activity and pilot noise.
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import phy, scheduler, subspace, topology
from .channel import complex_normal, link_budget, realize_channels
from .config import SimulationConfig, validate
from .units import dbm2mw, noise_power_dbm

log = logging.getLogger(__name__)

STAGES = {"topology": 0, "links": 1, "fast": 2, "activity": 3, "covariance": 4, "pilots": 5,
          "lbt": 6}


class DropError(RuntimeError):
    """A module error raised while simulating a drop, tagged with its seed."""


def drop_seed(master_seed: int, drop_index: int) -> int:
    """64-bit seed identifying a drop, derived from the master seed and index."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(drop_index,))
    return int(ss.generate_state(1, np.uint64)[0])


def stage_rng(master_seed: int, drop_index: int, stage: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(drop_index, STAGES[stage]))
    return np.random.default_rng(ss)


@functools.lru_cache(maxsize=16)
def _layout(num_sites, isd, sectors, height, tilt, power):
    return topology.build_layout(num_sites, isd, sectors, height, tilt, power)


def layout_for(cfg: SimulationConfig) -> topology.NetworkLayout:
    lay = cfg.layout
    return _layout(lay.num_sites, lay.isd_m, lay.sectors_per_site, lay.bs_height_m,
                   cfg.channel.downtilt_deg, cfg.power.bs_tx_dbm)


def sample_wifi_activity(cluster, rng, n_clusters=None) -> np.ndarray:
    """Indices of the active devices: one uniformly chosen device per cluster.

    ``cluster`` gives the cluster of every device.
    """
    cluster = np.asarray(cluster, dtype=int)
    if n_clusters is None:
        n_clusters = int(cluster.max()) + 1 if len(cluster) else 0
    active = np.empty(n_clusters, dtype=int)
    for c in range(n_clusters):
        members = np.flatnonzero(cluster == c)
        active[c] = members[rng.integers(len(members))]
    return active


def activity_matrix(cluster, n_symbols, rng) -> np.ndarray:
    """Boolean (M, L) matrix of active devices, redrawn independently per symbol."""
    cluster = np.asarray(cluster, dtype=int)
    n_dev = len(cluster)
    out = np.zeros((n_symbols, n_dev), dtype=bool)
    if n_dev == 0:
        return out
    n_clusters = int(cluster.max()) + 1
    members = [np.flatnonzero(cluster == c) for c in range(n_clusters)]
    sizes = np.array([len(m) for m in members])
    picks = rng.integers(0, sizes, size=(n_symbols, n_clusters))
    rows = np.repeat(np.arange(n_symbols), n_clusters)
    cols = np.array([members[c][picks[m, c]] for m in range(n_symbols) for c in range(n_clusters)])
    out[rows, cols] = True
    return out


def wifi_sector_rate(cluster_interferences, gamma_dbm=-62.0, per_cluster_rate=65.0):
    """Wi-Fi throughput of a sector in Mbps.

    ``cluster_interferences`` holds, for each cluster, the interference (mW)
    of its worst device (or an array of all its devices' interference).
    """
    thr = dbm2mw(gamma_dbm)
    total = 0.0
    for item in cluster_interferences:
        worst = float(np.max(item)) if np.size(item) else 0.0
        if worst < thr:
            total += per_cluster_rate
    return total


@dataclass
class DropMetrics:
    drop_index: int
    seed: int
    n_bs: int
    ue_id: np.ndarray  # served UEs
    ue_bs: np.ndarray
    ue_sinr: np.ndarray
    ue_rate_bps: np.ndarray
    bs_lbt_passed: np.ndarray
    bs_lbt_power_mw: np.ndarray
    bs_precoding_failed: np.ndarray
    bs_d_nulls: np.ndarray
    bs_cell_rate_bps: np.ndarray
    wifi_interference_mw: np.ndarray  # only BSs that gained access transmit
    wifi_interference_all_tx_mw: np.ndarray  # every BS with a precoder transmits
    wifi_kind: np.ndarray
    wifi_sector_rate_mbps: np.ndarray  # per BS sector


def _per_bs_selection(cfg, budget, serving, wifi, n_bs):
    p_b = float(dbm2mw(cfg.power.bs_tx_dbm))
    aps = wifi.ap_index
    metrics = scheduler.ue_metrics(budget.h.gain, serving, budget.q.gain[aps, :],
                                   dbm2mw(wifi.tx_power_dbm[aps]), p_b)
    u = np.arange(len(serving))
    rx = p_b * budget.h.gain[serving, u] if len(u) else np.zeros(0)
    eligible = rx >= dbm2mw(cfg.scheduler.ue_sensitivity_dbm)
    selected = []
    for b in range(n_bs):
        cand = np.flatnonzero((serving == b) & eligible)
        rep = scheduler.select_ues(cand, cfg.scheduler.k_ues, metrics[cand])
        selected.append(rep.selected_ids)
    return selected


def _covariances(cfg, g, wifi, powers, rng, noise_var):
    """Per-BS covariance estimates (exact expectation or sample average)."""
    n_bs, n_dev, n = g.shape
    if cfg.subspace.covariance_mode == "exact":
        prob = np.zeros(n_dev)
        for c in range(wifi.num_clusters):
            members = wifi.cluster == c
            prob[members] = 1.0 / members.sum()
        return [subspace.decompose(subspace.exact_covariance(g[b], powers, prob, noise_var))
                for b in range(n_bs)]
    m_c = cfg.subspace.m_c
    active = activity_matrix(wifi.cluster, m_c, rng)
    # the same Wi-Fi symbols reach every BS; noise is per BS
    symbols = complex_normal(rng, (n_dev, m_c)) * active.T * np.sqrt(powers)[:, None]
    out = []
    for b in range(n_bs):
        z = g[b].T @ symbols + complex_normal(rng, (n, m_c)) * np.sqrt(noise_var)
        out.append(subspace.estimate_covariance(z))
    return out


def run_drop(cfg: SimulationConfig, drop_index: int = 0, master_seed: int | None = None) -> DropMetrics:
    """Simulate one drop and one coherence interval."""
    validate(cfg, require_n=True)
    seed = cfg.sim.seed if master_seed is None else master_seed
    try:
        return _run_drop(cfg, drop_index, seed)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        raise DropError(f"drop {drop_index} (master seed {seed}, drop seed "
                        f"{drop_seed(seed, drop_index)}): {exc}") from exc


def _run_drop(cfg: SimulationConfig, drop_index: int, seed: int) -> DropMetrics:
    lay, pw, ch = cfg.layout, cfg.power, cfg.channel
    n = cfg.scheduler.n_antennas
    mmimo = cfg.sim.scheme == "mmimo_u"
    layout = layout_for(cfg)
    n_bs = layout.num_bs

    rng = stage_rng(seed, drop_index, "topology")
    ues = topology.drop_ues(layout, lay.ues_per_sector, rng, lay.min_distance_m)
    clusters = lay.clusters_per_sector if cfg.sim.wifi_present else 0
    wifi = topology.drop_wifi(layout, clusters, lay.cluster_radius_m, rng, lay.stas_per_cluster,
                              pw.ap_tx_dbm, pw.sta_tx_dbm, lay.min_distance_m)

    budget = link_budget(layout, ues, wifi, cfg, stage_rng(seed, drop_index, "links"))
    serving = topology.associate_ues(budget.h.gain)
    ues.serving_bs = serving
    topology.associate_stas(wifi, budget.w.gain)

    selected = _per_bs_selection(cfg, budget, serving, wifi, n_bs)
    served = np.concatenate(selected).astype(int) if selected else np.zeros(0, dtype=int)
    ue_bs = np.concatenate([np.full(len(s), b) for b, s in enumerate(selected)]).astype(int)
    stream = np.concatenate([np.arange(len(s)) for s in selected]).astype(int)

    chans = realize_channels(budget, n, stage_rng(seed, drop_index, "fast"), ue_index=served)

    p_b = float(dbm2mw(pw.bs_tx_dbm))
    wifi_p = dbm2mw(wifi.tx_power_dbm)
    bs_noise = float(dbm2mw(noise_power_dbm(ch.noise_psd_dbm_hz, ch.bandwidth_hz, ch.bs_noise_figure_db)))
    ue_noise = float(dbm2mw(noise_power_dbm(ch.noise_psd_dbm_hz, ch.bandwidth_hz, ch.ue_noise_figure_db)))

    active = sample_wifi_activity(wifi.cluster, stage_rng(seed, drop_index, "activity"),
                                  wifi.num_clusters)

    # d.o.f. and projectors
    m_c = cfg.subspace.m_c if cfg.subspace.covariance_mode == "estimated" else math.inf
    if mmimo:
        dof = scheduler.allocate_dof(n, cfg.scheduler.k_ues, m_c, cfg.scheduler.policy,
                                     cfg.scheduler.d_nulls)
        covs = _covariances(cfg, chans.g, wifi, wifi_p,
                            stage_rng(seed, drop_index, "covariance"), bs_noise)
        projs = [subspace.dominant_subspace(c, dof.d_i) for c in covs]
        pi_perp = [p.pi_perp for p in projs]
    else:
        dof = scheduler.DofAllocation(k_i=cfg.scheduler.k_ues, d_i=0)
        pi_perp = [np.eye(n) for _ in range(n_bs)]

    # listen before talk
    gamma = cfg.phy.gamma_lbt_dbm
    lbt_rng = stage_rng(seed, drop_index, "lbt")
    lbt_power = np.zeros(n_bs)
    for b in range(n_bs):
        g_act = chans.g[b, active]
        if cfg.phy.lbt_snapshots > 0:
            m = cfg.phy.lbt_snapshots
            act = np.zeros((m, len(wifi)), dtype=bool)
            act[:, active] = True
            z = subspace.sample_idle_signal(chans.g[b], wifi_p, act, bs_noise, lbt_rng)
            out = phy.enhanced_lbt(pi_perp[b], z, gamma) if mmimo else phy.conventional_lbt(z, gamma)
            lbt_power[b] = out.measured_power_mw
        else:
            lbt_power[b] = phy.expected_lbt_power(pi_perp[b], g_act, wifi_p[active], bs_noise)
    lbt_passed = lbt_power < dbm2mw(gamma)

    # uplink pilots and CSI
    prng = stage_rng(seed, drop_index, "pilots")
    book = phy.assign_pilots([len(s) for s in selected], cfg.phy.pilot_length, prng)
    pilot_idx = np.concatenate([book.assignment[b] for b in range(n_bs)]).astype(int)
    h_bar_srv = budget.h.gain[ue_bs, served] if len(served) else np.zeros(0)
    ue_p = dbm2mw(phy.uplink_pilot_power(h_bar_srv, pw.ue_max_dbm, pw.ue_p0_dbm, pw.ue_alpha,
                                                 pw.pilot_resource_blocks))
    rows = book.matrix[pilot_idx]
    wifi_sym, _ = phy.draw_pilot_interference(n, cfg.phy.pilot_length, len(active), bs_noise, prng)

    precoders = [None] * n_bs
    failed = np.zeros(n_bs, dtype=bool)
    for b in range(n_bs):
        noise = complex_normal(prng, (n, cfg.phy.pilot_length)) * np.sqrt(bs_noise)
        own = np.flatnonzero(ue_bs == b)
        if len(own) == 0:
            continue
        y = phy.received_pilot_block(chans.h[b], rows, ue_p, chans.g[b, active], wifi_p[active],
                                     wifi_sym, noise)
        if cfg.phy.csi_normalization == "fast_fading":
            scale = np.sqrt(ue_p[own] * h_bar_srv[own])
        else:
            scale = h_bar_srv[own]
        est = phy.estimate_ue_channels(y, rows[own], pi_perp[b], scale)
        try:
            precoders[b] = phy.zf_precoder(est.h_norm, cfg.phy.condition_bound)
        except phy.PrecodingError as exc:
            log.info("drop %d BS %d: %s", drop_index, b, exc)
            failed[b] = True

    # data phase
    k_max = max([len(s) for s in selected] + [1])
    w_rows = phy.stack_precoders(precoders, n, k_max)
    has_pre = np.array([p is not None for p in precoders])
    tx_gated = has_pre & lbt_passed
    sinr = phy.downlink_sinr(chans.h, w_rows, ue_bs, stream, tx_gated, chans.q[active, :],
                             wifi_p[active], p_b, ue_noise)
    ok = lbt_passed[ue_bs] & has_pre[ue_bs] if len(ue_bs) else np.zeros(0, dtype=bool)
    rate = phy.ue_rate(sinr, ok, ch.bandwidth_hz)
    cell_rate = np.bincount(ue_bs, weights=rate, minlength=n_bs) if len(ue_bs) else np.zeros(n_bs)

    i_gated = phy.wifi_interference(chans.g, w_rows, tx_gated, p_b)
    i_all = phy.wifi_interference(chans.g, w_rows, has_pre, p_b)

    sector_rate = np.zeros(n_bs)
    for b in range(n_bs):
        cl = np.unique(wifi.cluster[wifi.sector == b])
        sector_rate[b] = wifi_sector_rate([i_gated[wifi.cluster == c] for c in cl], gamma,
                                          cfg.sim.wifi_rate_mbps)

    return DropMetrics(
        drop_index=drop_index, seed=drop_seed(seed, drop_index), n_bs=n_bs,
        ue_id=served, ue_bs=ue_bs, ue_sinr=sinr, ue_rate_bps=rate,
        bs_lbt_passed=lbt_passed, bs_lbt_power_mw=lbt_power, bs_precoding_failed=failed,
        bs_d_nulls=np.full(n_bs, dof.d_i), bs_cell_rate_bps=cell_rate,
        wifi_interference_mw=i_gated, wifi_interference_all_tx_mw=i_all, wifi_kind=wifi.kind.copy(),
        wifi_sector_rate_mbps=sector_rate,
    )


@dataclass
class AggregateResult:
    n_drops: int
    cell_rate_bps: float  # mean over BSs and drops of the per-BS sum rate
    cell_rate_samples_bps: np.ndarray
    wifi_sector_rate_mbps: float
    lbt_pass_fraction: float
    samples: dict = field(default_factory=dict)

    def cdf(self, metric: str) -> np.ndarray:
        """Sorted samples of ``metric``; the i-th value has CDF (i+1)/n."""
        return np.sort(self.samples[metric])

    def percentile(self, metric: str, q):
        """Percentile by linear interpolation between order statistics."""
        return np.percentile(self.samples[metric], q)


def aggregate(drops) -> AggregateResult:
    """Fold drop metrics, in drop order, into figure-level statistics."""
    drops = list(drops)
    if not drops:
        raise ValueError("cannot aggregate an empty list of drops")
    cat = lambda attr: np.concatenate([getattr(d, attr) for d in drops])
    cell = cat("bs_cell_rate_bps")
    samples = {
        "wifi_interference_mw": cat("wifi_interference_mw"),
        "wifi_interference_all_tx_mw": cat("wifi_interference_all_tx_mw"),
        "bs_lbt_power_mw": cat("bs_lbt_power_mw"),
        "ue_sinr": cat("ue_sinr"),
        "ue_rate_bps": cat("ue_rate_bps"),
        "cell_rate_bps": cell,
        "wifi_sector_rate_mbps": cat("wifi_sector_rate_mbps"),
        "bs_lbt_passed": cat("bs_lbt_passed").astype(float),
    }
    return AggregateResult(
        n_drops=len(drops),
        cell_rate_bps=float(np.mean(cell)),
        cell_rate_samples_bps=cell,
        wifi_sector_rate_mbps=float(np.mean(samples["wifi_sector_rate_mbps"])),
        lbt_pass_fraction=float(np.mean(samples["bs_lbt_passed"])),
        samples=samples,
    )


def _drop_worker(args):
    cfg, index = args
    return run_drop(cfg, index)


def run_drops(cfg: SimulationConfig, drops: int | None = None, threads: int | None = None):
    """Run ``drops`` drops; results are returned in drop-index order."""
    drops = cfg.sim.drops if drops is None else drops
    threads = cfg.sim.threads if threads is None else threads
    jobs = [(cfg, d) for d in range(drops)]
    if threads > 1 and drops > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_drop_worker, jobs))
    return [_drop_worker(j) for j in jobs]


def run_experiment(cfg: SimulationConfig, sweep=None):
    """Aggregate results for each point of a sweep.

    ``sweep`` is a list of dicts of dotted-key overrides; ``None`` means a
    single point with the config as given. Returns a list of
    ``(overrides, AggregateResult)`` pairs.
    """
    sweep = [{}] if not sweep else sweep
    out = []
    for point in sweep:
        point_cfg = cfg.replace(**point)
        validate(point_cfg, require_n=True)
        out.append((point, aggregate(run_drops(point_cfg))))
    return out
