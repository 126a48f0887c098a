"""Fast invariant suite run by ``mmimou validate``.

Each check returns the measured error; it passes when the error is at most
the tolerance. Tolerances can be overridden by name.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import phy, scheduler, sim, subspace, topology
from .channel import complex_normal
from .config import ConfigError, SimulationConfig

TOLERANCES = {
    "projector_idempotence": 1e-10,
    "projector_complement": 1e-10,
    "rank1_nulling": 1e-10,
    "zf_nulling": 1e-9,
    "zf_normalization": 1e-10,
    "elbt_equals_lbt_at_d0": 0.0,
    "dof_constraint": 0.0,
    "wrap_symmetry": 1e-9,
    "tiny_drop_finite": 0.0,
}


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


def _rel(a, b):
    return float(np.linalg.norm(a) / max(np.linalg.norm(b), 1e-300))


def _projectors(rng, n=16, d=5):
    g = complex_normal(rng, (9, n))
    cov = subspace.decompose(subspace.exact_covariance(g, np.ones(9), np.full(9, 0.5), 1e-3))
    return subspace.dominant_subspace(cov, d)


def check_projector_idempotence(rng):
    p = _projectors(rng)
    return max(_rel(p.pi @ p.pi - p.pi, p.pi), _rel(p.pi_perp @ p.pi_perp - p.pi_perp, p.pi_perp))


def check_projector_complement(rng):
    p = _projectors(rng)
    n = p.pi.shape[0]
    return max(float(np.abs(p.pi + p.pi_perp - np.eye(n)).max()),
               float(np.abs(p.pi @ p.pi_perp).max()))


def check_rank1_nulling(rng, n=16):
    g = complex_normal(rng, (1, n))
    cov = subspace.decompose(subspace.exact_covariance(g, [1.0], [1.0], 1e-6))
    p = subspace.dominant_subspace(cov, 1)
    return _rel(p.pi_perp @ g[0], g[0])


def check_zf_nulling(rng, n=16, k=6):
    h = complex_normal(rng, (n, k))
    w = phy.zf_precoder(h).w
    m = np.abs(h.conj().T @ w)
    off = m - np.diag(np.diag(m))
    return float(off.max() / np.diag(m).min())


def check_zf_normalization(rng, n=16, k=6):
    w = phy.zf_precoder(complex_normal(rng, (n, k))).w
    return abs(float(np.sum(np.abs(w) ** 2)) - 1.0)


def check_elbt_equals_lbt_at_d0(rng, n=8):
    z = complex_normal(rng, (n, 32)) * 1e-4
    g = complex_normal(rng, (3, n))
    cov = subspace.decompose(subspace.exact_covariance(g, np.ones(3), np.ones(3), 1.0))
    p = subspace.dominant_subspace(cov, 0)
    a = phy.enhanced_lbt(p.pi_perp, z, -62.0)
    b = phy.conventional_lbt(z, -62.0)
    return 0.0 if (a.passed == b.passed and a.measured_power_mw == b.measured_power_mw) else 1.0


def check_dof_constraint(rng):
    bad = 0
    for n in (4, 16, 64):
        for k in range(0, min(n, 8) + 1):
            for m_c in (1, 8, float("inf")):
                a = scheduler.allocate_dof(n, k, m_c)
                bad += not (0 <= a.d_i <= min(n - k, m_c))
    try:
        SimulationConfig().replace(**{"scheduler.n_antennas": 64, "scheduler.d_nulls": 999}).validate()
        bad += 1
    except ConfigError:
        pass
    return float(bad)


def check_wrap_symmetry(rng):
    layout = topology.build_layout(7, 500.0)
    pts = rng.uniform(-900, 900, size=(20, 2))
    d_ab = topology.wrap_displacement(layout, pts, pts)
    dist = np.hypot(d_ab[..., 0], d_ab[..., 1])
    return float(np.abs(dist - dist.T).max())


def check_tiny_drop_finite(rng):
    cfg = SimulationConfig().replace(**{"layout.num_sites": 1, "scheduler.n_antennas": 8,
                                        "scheduler.k_ues": 2, "sim.drops": 2})
    bad = 0
    for d in range(2):
        m = sim.run_drop(cfg, d)
        for arr in (m.ue_sinr, m.ue_rate_bps, m.bs_lbt_power_mw, m.wifi_interference_mw):
            bad += int(np.sum(~np.isfinite(arr)) + np.sum(arr < 0))
    return float(bad)


CHECKS = {name: globals()[f"check_{name}"] for name in TOLERANCES}


def run_checks(tolerances=None, seed=0):
    """Run every check with a fresh generator; returns a list of CheckResult."""
    tol = dict(TOLERANCES)
    for name, value in (tolerances or {}).items():
        if name not in tol:
            raise KeyError(f"unknown invariant {name!r}")
        tol[name] = float(value)
    out = []
    for i, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        err = fn(rng)
        out.append(CheckResult(name, float(err), tol[name], time.perf_counter() - t0))
    return out


def format_results(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'invariant':<{width}}  {'error':>10}  {'tolerance':>10}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.error:>10.3g}  {r.tolerance:>10.3g}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
