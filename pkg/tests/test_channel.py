import logging
import math

import numpy as np
import pytest

from mmimou import channel as ch
from mmimou import topology as topo
from mmimou.config import ChannelConfig, SimulationConfig

C = 299792458.0


def uma_oracle(d3d, fc, los, hb=25.0, hu=1.5):
    """Straight transcription of the UMa equations, scalar only."""
    if los:
        dbp = 4 * (hb - 1) * (hu - 1) * fc * 1e9 / C
        if d3d < dbp:
            return 22 * math.log10(d3d) + 28 + 20 * math.log10(fc)
        return (40 * math.log10(d3d) + 7.8 - 18 * math.log10(hb - 1) - 18 * math.log10(hu - 1)
                + 2 * math.log10(fc))
    W = h = 20.0
    return (161.04 - 7.1 * math.log10(W) + 7.5 * math.log10(h)
            - (24.37 - 3.7 * (h / hb) ** 2) * math.log10(hb)
            + (43.42 - 3.1 * math.log10(hb)) * (math.log10(d3d) - 3)
            + 20 * math.log10(fc) - (3.2 * (math.log10(11.75 * hu)) ** 2 - 4.97))


def d2d_oracle(d, fc, los):
    fs = 20 * math.log10(d) + 20 * math.log10(fc * 1e9) + 20 * math.log10(4 * math.pi / C)
    if los:
        dbp = 4 * 0.5 * 0.5 * fc * 1e9 / C
        if d < dbp:
            pl = 22.7 * math.log10(d) + 27.0 + 20 * math.log10(fc)
        else:
            pl = (40 * math.log10(d) + 7.56 - 34.6 * math.log10(0.5) + 2.7 * math.log10(fc))
    else:
        pl = 36.7 * math.log10(d) + 22.7 + 26 * math.log10(fc)
    return max(pl, fs)


@pytest.mark.parametrize("d", [35.0, 50.0, 200.0, 823.0, 900.0, 1500.0])
@pytest.mark.parametrize("los", [True, False])
def test_uma_against_oracle(d, los):
    assert float(ch.path_loss_bs_link(d, 5.15, los)) == pytest.approx(uma_oracle(d, 5.15, los), abs=1e-9)


@pytest.mark.parametrize("d", [3.0, 5.0, 17.0, 18.0, 50.0, 300.0])
@pytest.mark.parametrize("los", [True, False])
def test_d2d_against_oracle(d, los):
    assert float(ch.path_loss_d2d(d, 5.15, los)) == pytest.approx(d2d_oracle(d, 5.15, los), abs=1e-9)


def test_frozen_path_loss_values():
    d = np.array([50.0, 200.0, 1000.0])
    np.testing.assert_allclose(ch.path_loss_bs_link(d, 5.15, True),
                               [79.61348468, 92.85880449, 109.79835203], atol=1e-7)
    np.testing.assert_allclose(ch.path_loss_bs_link(d, 5.15, False),
                               [94.18743898, 117.71978818, 145.03999956], atol=1e-7)
    np.testing.assert_allclose(ch.path_loss_d2d(np.array([5.0, 20.0, 100.0]), 5.15, False),
                               [66.85918711, 88.9547888, 114.60698796], atol=1e-7)


def test_nlos_never_below_los():
    d = np.linspace(35, 2000, 200)
    assert np.all(ch.path_loss_bs_link(d, 5.15, False) >= ch.path_loss_bs_link(d, 5.15, True))


def test_floor_clamps_with_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="mmimou.channel"):
        pl = ch.path_loss_bs_link(10.0, 5.15, True)
    assert float(pl) == pytest.approx(uma_oracle(35.0, 5.15, True))
    assert "clamped" in caplog.text


def test_los_probability():
    d = np.linspace(0.0, 2000.0, 500)
    for f in (ch.los_probability_uma, ch.los_probability_d2d):
        p = f(d)
        assert np.all((p >= 0) & (p <= 1))
        assert np.all(np.diff(p) <= 1e-12)
        assert p[0] == 1.0
    assert float(ch.los_probability_uma(100.0)) == pytest.approx(0.18 + 0.82 * math.exp(-100 / 63))


def test_element_pattern():
    g = ch.element_gain(np.array([0.0, 32.5, 90.0, 180.0]), np.array([0.0, 0.0, 10.0, 0.0]))
    np.testing.assert_allclose(g, [8.0, 5.0, -15.28994083, -22.0], atol=1e-7)
    # 3 dB down at half the beamwidth in azimuth and elevation
    assert float(ch.element_gain(0.0, 32.5)) == pytest.approx(5.0)
    assert float(ch.element_gain(-180.0, 90.0)) == pytest.approx(-22.0)


def test_ricean_k():
    np.testing.assert_allclose(ch.ricean_k([0.0, 100.0, 500.0]), [13.0, 10.0, -2.0])


def test_steering_vector():
    a = ch.steering_vector(8, 0.0)
    np.testing.assert_allclose(a, np.ones(8))
    b = ch.steering_vector(8, np.array([0.3, -1.0]))
    assert b.shape == (2, 8)
    np.testing.assert_allclose(np.abs(b), 1.0)
    np.testing.assert_allclose(b[0, 1], np.exp(-1j * np.pi * np.sin(0.3)))


def test_shadow_sigma_table():
    cfg = ChannelConfig()
    assert ch.shadow_sigma_db("bs_los", cfg) == 4.0
    assert ch.shadow_sigma_db("bs_nlos", cfg) == 6.0
    assert ch.shadow_sigma_db("d2d_los", cfg) == 3.0
    assert ch.shadow_sigma_db("d2d_nlos", cfg) == 4.0
    with pytest.raises(ValueError):
        ch.shadow_sigma_db("satellite")


def test_shadowing_statistics(rng):
    x = ch.shadowing_sample("bs_nlos", rng, 200000)
    assert abs(x.mean()) < 0.05
    assert x.std() == pytest.approx(6.0, rel=0.01)
    zero = ChannelConfig(shadow_sigma_bs_los_db=0.0)
    assert np.all(ch.shadowing_sample("bs_los", rng, 10, zero) == 0.0)


@pytest.mark.parametrize("k_db", [-10.0, 0.0, 7.0, 13.0])
def test_fast_fading_unit_energy(k_db, rng):
    n = 8
    a = ch.steering_vector(n, 0.4)
    f = ch.fast_fading_vector(n, np.full(20000, k_db), a, rng)
    assert np.mean(np.abs(f) ** 2) == pytest.approx(1.0, abs=0.02)
    # the mean is the LOS component
    k = 10 ** (k_db / 10)
    np.testing.assert_allclose(f.mean(axis=0), np.sqrt(k / (k + 1)) * a, atol=0.02)


def test_fast_fading_infinite_k_is_pure_los(rng):
    a = ch.steering_vector(4, 0.2)
    np.testing.assert_allclose(ch.fast_fading_vector(4, np.inf, a, rng), a)


def _budget(rng, n_sites=1, clusters=1):
    cfg = SimulationConfig().replace(**{"layout.num_sites": n_sites})
    lay = topo.build_layout(n_sites, 500.0)
    ues = topo.drop_ues(lay, 10.0, rng)
    wifi = topo.drop_wifi(lay, clusters, 20.0, rng)
    return cfg, lay, ues, wifi, ch.link_budget(lay, ues, wifi, cfg, rng)


def test_link_budget_shapes_and_composition(rng):
    cfg, lay, ues, wifi, b = _budget(rng)
    assert b.h.gain.shape == (3, len(ues))
    assert b.g.gain.shape == (3, len(wifi))
    assert b.q.gain.shape == (len(wifi), len(ues))
    assert b.w.gain.shape == (len(wifi), len(wifi))
    np.testing.assert_allclose(10 * np.log10(b.h.gain),
                               b.h.antenna_gain_db - b.h.path_loss_db - b.h.shadowing_db)
    np.testing.assert_allclose(10 * np.log10(b.q.gain), -b.q.path_loss_db - b.q.shadowing_db)
    assert np.all(b.h.gain > 0) and np.all(np.isfinite(b.h.gain))


def test_channel_energy_is_n_times_slow_gain(rng):
    # E ||h||^2 = N * slow gain for unit-energy fast fading
    cfg, lay, ues, wifi, b = _budget(rng)
    n, reps = 8, 4000
    acc = np.zeros_like(b.h.gain)
    for _ in range(reps):
        acc += np.sum(np.abs(ch.realize_channels(b, n, rng).h) ** 2, axis=-1)
    ratio = acc / reps / (n * b.h.gain)
    assert np.all(np.abs(ratio - 1.0) < 0.05)


def test_realize_subset_of_ues(rng):
    cfg, lay, ues, wifi, b = _budget(rng)
    cs = ch.realize_channels(b, 4, rng, ue_index=[2, 0])
    assert cs.h.shape == (3, 2, 4)
    assert cs.g.shape == (3, len(wifi), 4)
    assert cs.q.shape == (len(wifi), 2)
    np.testing.assert_array_equal(cs.ue_index, [2, 0])


def test_realize_requires_inputs(rng):
    with pytest.raises(ValueError):
        ch.realize_channels(None, 4, rng)
