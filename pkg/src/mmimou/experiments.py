"""Figure-level experiments.

Each experiment maps a base config to a list of :class:`~mmimou.report.Table`.
Simulation results are memoized per resolved config inside the process, so
experiments sharing a sweep point (e.g. rates and interference versus the
number of nulls) run its drops once.
"""

from __future__ import annotations

import numpy as np

from . import sim
from .config import SimulationConfig, dumps
from .report import Table
from .units import lin2db

EXPERIMENTS = ("fig4_wifi_cdf", "fig5_bs_cdf", "fig6_rates_vs_n", "fig7_covariance",
               "fig8_rates_vs_d", "fig9_interference_vs_d", "custom")

SCHEMES = ("mmimo_u", "conventional")

_cache: dict = {}


def simulate(cfg: SimulationConfig) -> sim.AggregateResult:
    """Aggregate of ``cfg.sim.drops`` drops, memoized on the full config."""
    key = dumps(cfg)
    if key not in _cache:
        cfg.validate(require_n=True)
        _cache[key] = sim.aggregate(sim.run_drops(cfg))
    return _cache[key]


def clear_cache():
    _cache.clear()


def _dbm(mw):
    with np.errstate(divide="ignore"):
        return lin2db(np.asarray(mw, dtype=float))


def _n_list(cfg, n_list, default=None):
    if n_list:
        return [int(n) for n in n_list]
    if cfg.scheduler.n_antennas is not None:
        return [cfg.scheduler.n_antennas]
    return list(default if default is not None else cfg.sim.n_list)


def _cdf_table(name, values_dbm, column):
    t = Table(name, ["sample", "cdf", column])
    v = np.sort(values_dbm)
    for i, x in enumerate(v):
        t.add(i, (i + 1) / len(v), x)
    return t


def fig4_wifi_cdf(cfg, n_list=None):
    """CDF of the interference at Wi-Fi devices with every BS transmitting."""
    tables = []
    for n in _n_list(cfg, n_list):
        for scheme in SCHEMES:
            res = simulate(cfg.replace(**{"scheduler.n_antennas": n, "sim.scheme": scheme}))
            tables.append(_cdf_table(f"fig4_wifi_cdf_n{n}_{scheme}",
                                     _dbm(res.samples["wifi_interference_all_tx_mw"]),
                                     "interference_dbm"))
    return tables


def fig5_bs_cdf(cfg, n_list=None):
    """CDF of the Wi-Fi power measured by each BS during listen-before-talk."""
    tables = []
    for n in _n_list(cfg, n_list):
        for scheme in SCHEMES:
            res = simulate(cfg.replace(**{"scheduler.n_antennas": n, "sim.scheme": scheme}))
            tables.append(_cdf_table(f"fig5_bs_cdf_n{n}_{scheme}",
                                     _dbm(res.samples["bs_lbt_power_mw"]), "lbt_power_dbm"))
    return tables


def fig6_rates_vs_n(cfg, n_list=None):
    """Cellular and Wi-Fi rates versus N, with their exclusive-use upper bounds."""
    t = Table("fig6_rates_vs_n", ["n_antennas", "curve", "rate_mbps", "lbt_pass_fraction"])
    wifi_bound = cfg.sim.wifi_rate_mbps * cfg.layout.clusters_per_sector
    for n in _n_list(cfg, n_list):
        res = simulate(cfg.replace(**{"scheduler.n_antennas": n, "sim.scheme": "mmimo_u"}))
        alone = simulate(cfg.replace(**{"scheduler.n_antennas": n, "sim.scheme": "conventional",
                                        "sim.wifi_present": False}))
        t.add(n, "wifi_mmimo_u", res.wifi_sector_rate_mbps, res.lbt_pass_fraction)
        t.add(n, "cellular_mmimo_u", res.cell_rate_bps / 1e6, res.lbt_pass_fraction)
        t.add(n, "wifi_upper_bound", wifi_bound, float("nan"))
        t.add(n, "cellular_upper_bound", alone.cell_rate_bps / 1e6, alone.lbt_pass_fraction)
    return [t]


def fig7_covariance(cfg, n_list=None):
    """Rates and 5%-worst Wi-Fi interference versus covariance snapshots."""
    t = Table("fig7_covariance", ["n_antennas", "m_c_snapshots", "cellular_rate_mbps",
                                  "lbt_pass_fraction", "wifi_interference_p95_dbm",
                                  "wifi_interference_gated_p95_dbm"])
    for n in _n_list(cfg, n_list, default=[64]):
        for m_c in cfg.sim.m_c_list:
            res = simulate(cfg.replace(**{"scheduler.n_antennas": n, "sim.scheme": "mmimo_u",
                                          "subspace.covariance_mode": "estimated",
                                          "subspace.m_c": m_c}))
            t.add(n, m_c, res.cell_rate_bps / 1e6, res.lbt_pass_fraction,
                  _dbm(res.percentile("wifi_interference_all_tx_mw", 95)),
                  _dbm(res.percentile("wifi_interference_mw", 95)))
    return [t]


def d_sweep(cfg, n):
    """(clusters, D, result) over the configured cluster and D grids."""
    out = []
    k = cfg.scheduler.k_ues
    for clusters in cfg.sim.cluster_list:
        for d in cfg.sim.d_list:
            if d > n - k:
                continue
            res = simulate(cfg.replace(**{"scheduler.n_antennas": n, "sim.scheme": "mmimo_u",
                                          "layout.clusters_per_sector": clusters,
                                          "scheduler.d_nulls": d}))
            out.append((clusters, d, res))
    return out


def fig8_rates_vs_d(cfg, n_list=None):
    """Cellular rates versus the number of nulls for several cluster counts."""
    t = Table("fig8_rates_vs_d", ["n_antennas", "clusters_per_sector", "d_nulls",
                                  "cellular_rate_mbps", "lbt_pass_fraction",
                                  "wifi_sector_rate_mbps"])
    for n in _n_list(cfg, n_list, default=[64]):
        for clusters, d, res in d_sweep(cfg, n):
            t.add(n, clusters, d, res.cell_rate_bps / 1e6, res.lbt_pass_fraction,
                  res.wifi_sector_rate_mbps)
    return [t]


def fig9_interference_vs_d(cfg, n_list=None):
    """5%-worst and median Wi-Fi interference versus the number of nulls.

    Only BSs that passed listen-before-talk transmit.
    """
    t = Table("fig9_interference_vs_d", ["n_antennas", "clusters_per_sector", "d_nulls",
                                         "wifi_interference_p95_dbm",
                                         "wifi_interference_median_dbm"])
    for n in _n_list(cfg, n_list, default=[64]):
        for clusters, d, res in d_sweep(cfg, n):
            t.add(n, clusters, d, _dbm(res.percentile("wifi_interference_mw", 95)),
                  _dbm(res.percentile("wifi_interference_mw", 50)))
    return [t]


def custom(cfg, n_list=None):
    """Summary statistics of a single run of the config as given."""
    tables = []
    for n in _n_list(cfg, n_list):
        res = simulate(cfg.replace(**{"scheduler.n_antennas": n}))
        t = Table(f"custom_n{n}", ["metric", "unit", "value"])
        t.add("cellular_rate", "mbps", res.cell_rate_bps / 1e6)
        t.add("wifi_sector_rate", "mbps", res.wifi_sector_rate_mbps)
        t.add("lbt_pass_fraction", "fraction", res.lbt_pass_fraction)
        for q in (5, 50, 95):
            t.add(f"wifi_interference_p{q}", "dbm", _dbm(res.percentile("wifi_interference_mw", q)))
            t.add(f"bs_lbt_power_p{q}", "dbm", _dbm(res.percentile("bs_lbt_power_mw", q)))
            t.add(f"ue_sinr_p{q}", "db", _dbm(res.percentile("ue_sinr", q)))
        t.add("drops", "count", res.n_drops)
        tables.append(t)
    return tables


def run(name: str, cfg: SimulationConfig, n_list=None):
    if name not in EXPERIMENTS:
        raise KeyError(name)
    return globals()[name](cfg, n_list)
