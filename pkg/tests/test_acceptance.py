"""Acceptance suite: one test, and one summary line, per criterion.

Desk scale throughout: 7 sites with wrap-around and exact covariance unless
stated. Simulations are cached per config for the session so criteria that
share a sweep point run its drops once.
"""

import time

import numpy as np
import pytest
from scipy.optimize import isotonic_regression

from mmimou import checks, cli, experiments, phy, sim, subspace
from mmimou.config import SimulationConfig, dumps
from mmimou.units import dbm2mw, lin2db

from conftest import crandn

pytestmark = pytest.mark.slow

GAMMA_MW = float(dbm2mw(-62.0))
DROPS = 100
SWEEP_DROPS = 50  # per point of the M_c and D sweeps
BASE = SimulationConfig().replace(**{"sim.drops": DROPS, "sim.seed": 0})

_runs = {}
_elapsed = {}


def drops(**overrides):
    """Per-drop metrics for BASE with dotted overrides, cached."""
    cfg = BASE.replace(**overrides)
    key = dumps(cfg)
    if key not in _runs:
        t0 = time.perf_counter()
        _runs[key] = sim.run_drops(cfg)
        _elapsed[key] = time.perf_counter() - t0
    return _runs[key]


def agg(**overrides):
    return sim.aggregate(drops(**overrides))


def median_db(x):
    return float(lin2db(np.median(x)))


def test_median_interference_reduction(verdict):
    t0 = time.perf_counter()
    red = {}
    for n in (16, 128):
        a = agg(**{"scheduler.n_antennas": n}).samples["wifi_interference_all_tx_mw"]
        c = agg(**{"scheduler.n_antennas": n, "sim.scheme": "conventional"}).samples[
            "wifi_interference_all_tx_mw"]
        red[n] = median_db(c) - median_db(a)
    runtime = time.perf_counter() - t0
    ok = abs(red[16] - 3.0) <= 3.0 and abs(red[128] - 18.0) <= 5.0 and runtime < 1200
    verdict("median interference reduction", ok,
            f"N=16 {red[16]:.2f} dB (3+-3), N=128 {red[128]:.2f} dB (18+-5), {runtime:.0f} s (<1200)")
    assert ok


def test_threshold_compliance(verdict):
    n, k = 32, BASE.scheduler.k_ues
    half = agg(**{"scheduler.n_antennas": n}).samples["wifi_interference_all_tx_mw"]
    full = agg(**{"scheduler.n_antennas": n, "scheduler.d_nulls": n - k}).samples[
        "wifi_interference_all_tx_mw"]
    f_half, f_full = np.mean(half < GAMMA_MW), np.mean(full < GAMMA_MW)
    ok = f_half >= 0.99 and f_full == 1.0
    verdict("threshold compliance", ok,
            f"N=32 below -62 dBm: {100 * f_half:.3f}% with D=12 (>=99%), "
            f"{100 * f_full:.3f}% with D=N-K=24 (100%)")
    assert ok


def test_bs_side_access(verdict):
    e16 = agg(**{"scheduler.n_antennas": 16}).lbt_pass_fraction
    e32 = agg(**{"scheduler.n_antennas": 32}).lbt_pass_fraction
    c16 = agg(**{"scheduler.n_antennas": 16, "sim.scheme": "conventional"}).lbt_pass_fraction
    ok = 0.8 <= e16 <= 1.0 and e32 >= 0.99 and c16 <= 0.25
    verdict("BS-side access", ok,
            f"e-LBT pass N=16 {e16:.3f} ([0.8,1]), N=32 {e32:.3f} (>=0.99); "
            f"conventional N=16 {c16:.3f} (<=0.25)")
    assert ok


def test_rate_ordering(verdict):
    rates = [agg(**{"scheduler.n_antennas": n}).cell_rate_bps / 1e6 for n in (16, 48, 112)]
    ratio = rates[2] / rates[0]
    wifi = {n: agg(**{"scheduler.n_antennas": n}).wifi_sector_rate_mbps for n in (32, 48, 112)}
    increasing = rates[0] < rates[1] < rates[2]
    # N=48 and N=112 must be exact; N=32 shares the desk-scale 99% allowance
    wifi_ok = wifi[48] == 130.0 and wifi[112] == 130.0 and wifi[32] >= 0.99 * 130.0
    ok = increasing and 2.0 <= ratio <= 4.0 and wifi_ok
    verdict("rate ordering", ok,
            "cellular " + "/".join(f"{r:.0f}" for r in rates) + f" Mbps at N=16/48/112, "
            f"ratio {ratio:.2f} ([2,4]); Wi-Fi sector "
            + ", ".join(f"N={n}: {v:.2f}" for n, v in wifi.items()) + " Mbps")
    assert ok


def _bootstrap_se(per_point, stat, reps=200, seed=0):
    """Standard error of ``stat`` at each sweep point, resampling drops jointly."""
    rng = np.random.default_rng(seed)
    n = len(per_point[0])
    out = np.empty((reps, len(per_point)))
    for r in range(reps):
        idx = rng.integers(n, size=n)
        out[r] = [stat([runs[i] for i in idx]) for runs in per_point]
    return out.std(axis=0)


def _isotonic_ok(values, se, increasing):
    fit = isotonic_regression(values, increasing=increasing).x
    dev = np.abs(values - fit)
    return bool(np.all(dev <= 2.0 * se + 1e-12)), float(dev.max())


def _cell_rate(runs):
    return sim.aggregate(runs).cell_rate_bps / 1e6


def _p95_dbm(runs):
    x = np.concatenate([r.wifi_interference_all_tx_mw for r in runs])
    return float(lin2db(np.percentile(x, 95)))


def test_covariance_sample_sensitivity(verdict):
    n = 64
    grid = BASE.sim.m_c_list
    per_point = [drops(**{"scheduler.n_antennas": n, "subspace.covariance_mode": "estimated",
                          "subspace.m_c": m, "sim.drops": SWEEP_DROPS}) for m in grid]
    rate = np.array([_cell_rate(p) for p in per_point])
    intf = np.array([_p95_dbm(p) for p in per_point])
    rate_ok, rate_dev = _isotonic_ok(rate, _bootstrap_se(per_point, _cell_rate), True)
    intf_ok, intf_dev = _isotonic_ok(intf, _bootstrap_se(per_point, _p95_dbm), False)
    ok = rate_ok and intf_ok and rate[-1] > rate[0] and intf[-1] < intf[0]
    verdict("covariance-sample sensitivity", ok,
            f"N={n}, M_c {grid[0]}..{grid[-1]}: rate " + "/".join(f"{r:.0f}" for r in rate)
            + f" Mbps (isotonic dev {rate_dev:.1f}); 5%-worst interference "
            + "/".join(f"{v:.1f}" for v in intf) + f" dBm (isotonic dev {intf_dev:.2f})")
    assert ok


def test_null_count_tradeoff(verdict):
    n, k = 64, 8
    d_grid = [d for d in BASE.sim.d_list if d <= n - k]
    curves, best = {}, {}
    for clusters in (1, 4):
        curves[clusters] = np.array([
            agg(**{"scheduler.n_antennas": n, "scheduler.k_ues": k, "scheduler.d_nulls": d,
                   "layout.clusters_per_sector": clusters, "sim.drops": SWEEP_DROPS}).cell_rate_bps / 1e6
            for d in d_grid])
        best[clusters] = d_grid[int(np.argmax(curves[clusters]))]
    interior = all(c[0] < c.max() and c[-1] < c.max() for c in curves.values())
    ok = interior and best[4] >= best[1]
    verdict("D trade-off shape", ok,
            f"optimal D: 1 cluster {best[1]}, 4 clusters {best[4]}; endpoints/max "
            + "; ".join(f"{c} cl: {v[0]:.0f}/{v[-1]:.0f}/{v.max():.0f} Mbps" for c, v in curves.items()))
    assert ok


def _cov_error_slope(seed):
    rng = np.random.default_rng(seed)
    n, n_dev = 8, 4
    g = crandn(rng, n_dev, n)
    p = np.ones(n_dev)
    ref = subspace.exact_covariance(g, p, np.full(n_dev, 1 / n_dev), 0.1)
    grid = np.array([8, 16, 32, 64, 128, 256, 512])
    err = []
    for m in grid:
        e = []
        for _ in range(50):
            act = np.zeros((m, n_dev), dtype=bool)
            act[np.arange(m), rng.integers(n_dev, size=m)] = True
            z = subspace.sample_idle_signal(g, p, act, 0.1, rng)
            e.append(np.linalg.norm(subspace.estimate_covariance(z).z_hat - ref))
        err.append(np.mean(e))
    return float(np.polyfit(np.log(grid), np.log(err), 1)[0])


def test_property_suite(verdict):
    failed = []
    for seed in range(5):
        failed += [r.name for r in checks.run_checks(seed=seed) if not r.passed]
    slope = _cov_error_slope(0)
    ok = not failed and abs(slope + 0.5) <= 0.1
    verdict("property suite", ok,
            f"{len(checks.TOLERANCES)} invariants x 5 seeds, failures: {sorted(set(failed)) or 'none'}; "
            f"covariance error slope {slope:.3f} (-0.5+-0.1)")
    assert ok


def test_tiny_instance_oracle(verdict):
    """2 BSs, one UE each, one Wi-Fi device, N=4: straight-line equations."""
    rng = np.random.default_rng(2024)
    n, m_p = 4, 8
    p_b, p_w, noise_bs, noise_ue = 1000.0, 251.0, 2e-9, 6e-10
    h = crandn(rng, 2, 2, n) * 1e-4  # h[b, u]: BS b to UE u
    g = crandn(rng, 2, 1, n) * 1e-4  # g[b, 0]: BS b to the Wi-Fi device
    q = crandn(rng, 1, 2) * 1e-3
    p_ue = np.array([0.2, 0.05])
    s = phy.pilot_matrix(m_p)
    pilots = np.array([3, 3])  # reuse 1: both UEs share a pilot
    x_w = crandn(rng, 1, m_p)
    noise = [crandn(rng, n, m_p) * np.sqrt(noise_bs) for _ in range(2)]

    def package(project):
        w_pkg, est_pkg = [], []
        for b in range(2):
            cov = subspace.decompose(subspace.exact_covariance(g[b], [p_w], [1.0], noise_bs))
            pp = subspace.dominant_subspace(cov, 1 if project else 0).pi_perp
            y = phy.received_pilot_block(h[b], s[pilots], p_ue, g[b], [p_w], x_w, noise[b])
            est = phy.estimate_ue_channels(y, s[pilots][[b]], pp)
            est_pkg.append(est.h_hat[:, 0])
            w_pkg.append(phy.zf_precoder(est.h_hat))
        rows = phy.stack_precoders(w_pkg, n, 1)
        sinr = phy.downlink_sinr(h, rows, np.array([0, 1]), np.array([0, 0]), [True, True],
                                 q, [p_w], p_b, noise_ue)
        return est_pkg, sinr, phy.wifi_interference(g, rows, [True, True], p_b)[0]

    def straight_line(project):
        h_hats, w_ref = [], []
        for b in range(2):
            gb = g[b, 0]
            pi_perp = np.eye(n) - project * np.outer(gb, gb.conj()) / np.vdot(gb, gb).real
            y = np.zeros((n, m_p), dtype=complex)
            for u in range(2):
                y += np.sqrt(p_ue[u]) * np.outer(h[b, u], s[pilots[u]])
            y += np.sqrt(p_w) * np.outer(gb, x_w[0]) + noise[b]
            h_hat = pi_perp @ sum(y[:, m] * np.conj(s[pilots[b], m]) for m in range(m_p))
            h_hats.append(h_hat)
            w = h_hat / np.vdot(h_hat, h_hat)  # K=1 zero forcing before normalization
            w_ref.append(w / np.linalg.norm(w))
        sinr = []
        for u in range(2):
            gains = [p_b * abs(np.vdot(h[b, u], w_ref[b])) ** 2 for b in range(2)]
            sinr.append(gains[u] / (gains[1 - u] + p_w * abs(q[0, u]) ** 2 + noise_ue))
        intf = sum(p_b * abs(np.vdot(g[b, 0], w_ref[b])) ** 2 for b in range(2))
        return h_hats, sinr, intf

    errs = []
    level = None
    for project in (False, True):
        est_pkg, sinr_pkg, intf_pkg = package(project)
        h_ref, sinr_ref, intf_ref = straight_line(project)
        errs += [np.linalg.norm(a - b) / np.linalg.norm(b) for a, b in zip(est_pkg, h_ref)]
        errs += [abs(a - b) / b for a, b in zip(sinr_pkg, sinr_ref)]
        if level is None:
            level = intf_ref
            errs.append(abs(intf_pkg - intf_ref) / intf_ref)
        else:
            # the single device is nulled exactly: compare on the unprojected scale
            errs.append(abs(intf_pkg - intf_ref) / level)
    worst = max(errs)
    ok = worst <= 1e-12
    verdict("tiny-instance oracle", ok, f"max relative error {worst:.2e} (<=1e-12) over CSI, SINR, interference")
    assert ok


def test_determinism(tmp_path, verdict):
    args = ["--set", "layout.num_sites=1", "--drops", "2", "--seed", "99", "--n", "16",
            "--set", "sim.m_c_list=[8,32]", "--set", "sim.d_list=[0,4,8]",
            "--set", "sim.cluster_list=[1,2]"]
    differing = []
    for exp in experiments.EXPERIMENTS:
        outs = []
        for tag in ("a", "b"):
            experiments.clear_cache()
            out = tmp_path / tag
            assert cli.main(["run", exp, "--out", str(out)] + args) == 0
            outs.append(out)
        for f in sorted(outs[0].glob(f"{exp}*.csv")):
            if f.read_bytes() != (outs[1] / f.name).read_bytes():
                differing.append(f.name)
    n_files = len(list((tmp_path / "a").glob("*.csv")))
    ok = not differing and n_files > 0
    verdict("determinism", ok, f"{n_files} CSVs across {len(experiments.EXPERIMENTS)} experiments, "
            f"differing: {differing or 'none'}")
    assert ok
