import dataclasses

import numpy as np
import pytest

from mmimou import sim, topology
from mmimou.config import SimulationConfig
from mmimou.units import dbm2mw


def _same(a: sim.DropMetrics, b: sim.DropMetrics):
    for f in dataclasses.fields(a):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, np.ndarray):
            np.testing.assert_array_equal(x, y)
        else:
            assert x == y


def test_stage_seeds_are_distinct_and_stable():
    a = sim.stage_rng(7, 3, "links").integers(1 << 62)
    assert a == sim.stage_rng(7, 3, "links").integers(1 << 62)
    assert a != sim.stage_rng(7, 3, "fast").integers(1 << 62)
    assert a != sim.stage_rng(7, 4, "links").integers(1 << 62)
    assert sim.drop_seed(0, 0) != sim.drop_seed(0, 1)


def test_activity_one_per_cluster(rng):
    cluster = np.repeat(np.arange(2), 8)
    act = sim.sample_wifi_activity(cluster, rng)
    assert len(act) == 2
    np.testing.assert_array_equal(cluster[act], [0, 1])
    assert len(sim.sample_wifi_activity(np.zeros(0, dtype=int), rng)) == 0


def test_activity_uniform_within_cluster():
    rng = np.random.default_rng(1)
    cluster = np.zeros(8, dtype=int)
    counts = np.bincount([sim.sample_wifi_activity(cluster, rng, 1)[0] for _ in range(100000)],
                         minlength=8)
    # within 2% (relative) of 1/8 for every device
    np.testing.assert_allclose(counts / 1e5, 1 / 8, rtol=0.02)


def test_activity_matrix(rng):
    cluster = np.repeat(np.arange(3), [8, 8, 2])
    a = sim.activity_matrix(cluster, 50, rng)
    assert a.shape == (50, 18)
    for c in range(3):
        assert np.all(a[:, cluster == c].sum(axis=1) == 1)


@pytest.mark.parametrize("levels, expected", [
    ([-70.0, -65.0], 130.0), ([-70.0, -60.0], 65.0), ([-50.0, -61.9], 0.0), ([], 0.0)])
def test_wifi_sector_rate(levels, expected):
    assert sim.wifi_sector_rate([dbm2mw(x) for x in levels]) == expected


def test_sector_rate_uses_worst_device():
    clusters = [dbm2mw(np.array([-80.0, -61.0])), dbm2mw(np.array([-80.0, -70.0]))]
    assert sim.wifi_sector_rate(clusters) == 65.0


def test_run_drop_deterministic(small_cfg):
    _same(sim.run_drop(small_cfg, 1), sim.run_drop(small_cfg, 1))


def test_run_drop_physical_ranges(small_cfg):
    m = sim.run_drop(small_cfg, 0)
    assert m.n_bs == 3
    for arr in (m.ue_sinr, m.ue_rate_bps, m.bs_lbt_power_mw, m.wifi_interference_mw,
                m.wifi_interference_all_tx_mw, m.bs_cell_rate_bps):
        assert np.all(np.isfinite(arr)) and np.all(arr >= 0)
    assert np.all(m.wifi_interference_mw <= m.wifi_interference_all_tx_mw + 1e-30)
    assert np.all(np.bincount(m.ue_bs, minlength=3) <= 8)
    assert np.all(m.bs_d_nulls == 4)
    np.testing.assert_allclose(np.bincount(m.ue_bs, m.ue_rate_bps, minlength=3), m.bs_cell_rate_bps)
    assert np.all(m.ue_rate_bps[~m.bs_lbt_passed[m.ue_bs]] == 0)


def test_schemes_share_the_drop(small_cfg):
    a = sim.run_drop(small_cfg, 2)
    b = sim.run_drop(small_cfg.replace(**{"sim.scheme": "conventional"}), 2)
    np.testing.assert_array_equal(a.ue_id, b.ue_id)
    np.testing.assert_array_equal(a.wifi_kind, b.wifi_kind)
    assert np.all(b.bs_d_nulls == 0)


def test_no_wifi(small_cfg):
    m = sim.run_drop(small_cfg.replace(**{"sim.wifi_present": False, "sim.scheme": "conventional"}), 0)
    assert m.wifi_interference_mw.size == 0
    assert np.all(m.bs_lbt_passed)


def test_mmimo_lowers_interference_paired():
    cfg = SimulationConfig().replace(**{"scheduler.n_antennas": 64})
    a = sim.run_drop(cfg, 0)
    b = sim.run_drop(cfg.replace(**{"sim.scheme": "conventional"}), 0)
    assert np.mean(a.wifi_interference_all_tx_mw < b.wifi_interference_all_tx_mw) >= 0.95


def test_drop_error_carries_seed(small_cfg, monkeypatch):
    def boom(*args, **kwargs):
        raise ValueError("bad geometry")
    monkeypatch.setattr(topology, "drop_ues", boom)
    with pytest.raises(sim.DropError, match=r"drop 4 .*drop seed \d+.*bad geometry"):
        sim.run_drop(small_cfg, 4)


def _metrics(rates, n_bs=1):
    rates = np.asarray(rates, dtype=float)
    z = np.zeros(n_bs)
    return sim.DropMetrics(
        drop_index=0, seed=0, n_bs=n_bs, ue_id=np.arange(len(rates)), ue_bs=np.zeros(len(rates), int),
        ue_sinr=np.ones(len(rates)), ue_rate_bps=rates, bs_lbt_passed=np.ones(n_bs, bool),
        bs_lbt_power_mw=z, bs_precoding_failed=z.astype(bool), bs_d_nulls=z.astype(int),
        bs_cell_rate_bps=np.array([rates.sum()]), wifi_interference_mw=np.array([1e-9, 3e-9]),
        wifi_interference_all_tx_mw=np.array([1e-9, 3e-9]), wifi_kind=np.array([0, 1]),
        wifi_sector_rate_mbps=np.array([130.0]))


def test_aggregate_cell_rate():
    res = sim.aggregate([_metrics([10e6, 20e6])])
    assert res.cell_rate_bps == pytest.approx(30e6)
    res2 = sim.aggregate([_metrics([10e6, 20e6]), _metrics([50e6])])
    assert res2.cell_rate_bps == pytest.approx(40e6)
    assert res2.n_drops == 2


def test_aggregate_empty():
    with pytest.raises(ValueError):
        sim.aggregate([])


def test_percentile_matches_sort_oracle(rng):
    x = rng.exponential(size=101)
    res = sim.aggregate([_metrics([1.0])])
    res.samples["x"] = x
    s = np.sort(x)
    assert res.percentile("x", 50) == s[50]
    assert res.percentile("x", 5) == pytest.approx(s[5])
    # between order statistics: linear interpolation
    assert res.percentile("x", 2.5) == pytest.approx(0.5 * (s[2] + s[3]))
    np.testing.assert_array_equal(res.cdf("x"), s)


def test_run_drops_parallel_equals_serial(small_cfg):
    serial = sim.run_drops(small_cfg, 3, 1)
    parallel = sim.run_drops(small_cfg, 3, 2)
    for a, b in zip(serial, parallel):
        _same(a, b)


def test_sweep_of_one_is_plain_aggregate(small_cfg):
    [(point, res)] = sim.run_experiment(small_cfg)
    assert point == {}
    ref = sim.aggregate([sim.run_drop(small_cfg, d) for d in range(3)])
    assert res.cell_rate_bps == ref.cell_rate_bps
    np.testing.assert_array_equal(res.samples["wifi_interference_mw"], ref.samples["wifi_interference_mw"])
