"""Spatial degree-of-freedom allocation and UE selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DofAllocation:
    k_i: int
    d_i: int


@dataclass
class SelectionReport:
    candidates: np.ndarray  # UE ids
    metrics: np.ndarray  # linear, inf when no interferers
    selected: np.ndarray  # bool, aligned with candidates
    rank: np.ndarray  # 1-based rank by descending metric
    shortfall: int = 0

    @property
    def selected_ids(self) -> np.ndarray:
        order = np.argsort(self.rank[self.selected], kind="stable")
        return self.candidates[self.selected][order]


def allocate_dof(n: int, k_target: int, m_c: float = math.inf, policy: str = "half",
                 d_override: int | None = None) -> DofAllocation:
    """Choose (K, D) subject to D <= min(N - K, M_c).

    The ``half`` policy uses D = round(0.5 (N - K)). An explicit
    ``d_override`` replaces the policy value; either way D is clamped.
    """
    if k_target > n:
        raise ValueError(f"cannot multiplex K={k_target} UEs with N={n} antennas")
    if k_target < 0:
        raise ValueError("K must be non-negative")
    if d_override is not None:
        d = int(d_override)
    elif policy == "half":
        d = int(math.floor(0.5 * (n - k_target) + 0.5))
    else:
        raise ValueError(f"unknown d.o.f. policy {policy!r}")
    d = max(0, min(d, n - k_target, m_c))
    return DofAllocation(k_i=int(k_target), d_i=int(d))


def ue_metric(serving_gain, other_bs_gains, ap_rx_mw, p_b_mw):
    """Broadcast SINR proxy without noise.

    ``other_bs_gains`` are slow fading gains from the non-serving BSs and
    ``ap_rx_mw`` the average powers P_l * q_l received from each Wi-Fi AP.
    Returns ``inf`` when there is no interferer at all.
    """
    den = p_b_mw * np.sum(other_bs_gains) + np.sum(ap_rx_mw)
    num = p_b_mw * serving_gain
    return math.inf if den <= 0 else float(num / den)


def ue_metrics(h_bar, serving, q_bar_ap, ap_power_mw, p_b_mw):
    """Vectorized :func:`ue_metric` for all UEs.

    Parameters
    ----------
    h_bar : (B, U) slow fading BS-UE gains
    serving : (U,) serving BS index
    q_bar_ap : (A, U) slow fading AP-UE gains
    ap_power_mw : (A,)
    """
    h_bar = np.asarray(h_bar, dtype=float)
    u = np.arange(h_bar.shape[1])
    sig = h_bar[serving, u]
    other = h_bar.sum(axis=0) - sig
    wifi = np.asarray(ap_power_mw, dtype=float) @ np.asarray(q_bar_ap, dtype=float).reshape(-1, len(u)) \
        if len(u) else np.zeros(0)
    den = p_b_mw * other + wifi
    with np.errstate(divide="ignore"):
        return np.where(den > 0, p_b_mw * sig / np.where(den > 0, den, 1.0), np.inf)


def select_ues(candidates, k_i: int, metrics) -> SelectionReport:
    """Top-``k_i`` candidates by metric; ties go to the lower UE id."""
    candidates = np.asarray(candidates, dtype=int)
    metrics = np.asarray(metrics, dtype=float)
    order = np.lexsort((candidates, -metrics))
    rank = np.empty(len(candidates), dtype=int)
    rank[order] = np.arange(1, len(candidates) + 1)
    selected = rank <= k_i
    return SelectionReport(candidates=candidates, metrics=metrics, selected=selected, rank=rank,
                           shortfall=max(0, k_i - len(candidates)))
