"""Per-coherence-interval transmission chain.

Listen-before-talk (conventional and projected), uplink pilots with
fractional power control, projected least-squares CSI, zero-forcing
precoding, and the downlink SINR / Wi-Fi interference / rate evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import complex_normal
from .units import dbm2mw, lin2db


class PrecodingError(RuntimeError):
    """The estimated channel Gram matrix could not be inverted safely."""


@dataclass
class LbtOutcome:
    passed: bool
    measured_power_mw: float
    gamma_dbm: float

    @property
    def measured_power_dbm(self) -> float:
        return float(lin2db(self.measured_power_mw))


@dataclass
class PilotBook:
    matrix: np.ndarray  # (M_p, M_p), row p is pilot p
    assignment: dict  # cell -> array of pilot indices, aligned with the cell's UEs

    @property
    def length(self) -> int:
        return self.matrix.shape[0]


@dataclass
class CsiEstimate:
    h_hat: np.ndarray  # (N, K) projected LS estimates
    h_norm: np.ndarray  # (N, K) normalized estimates fed to the precoder


@dataclass
class PrecoderState:
    w: np.ndarray  # (N, K), sum of squared column norms is 1
    zeta: float


def lbt_decision(power_mw: float, gamma_dbm: float) -> LbtOutcome:
    return LbtOutcome(passed=bool(power_mw < dbm2mw(gamma_dbm)),
                      measured_power_mw=float(power_mw), gamma_dbm=gamma_dbm)


def _mean_energy(z):
    z = np.asarray(z)
    return float(np.mean(np.sum(z.real ** 2 + z.imag ** 2, axis=0)))


def conventional_lbt(snapshots, gamma_dbm: float) -> LbtOutcome:
    """Energy detection on the snapshot columns of ``snapshots`` (N, M)."""
    return lbt_decision(_mean_energy(snapshots), gamma_dbm)


def enhanced_lbt(pi_perp, snapshots, gamma_dbm: float) -> LbtOutcome:
    """Energy detection after projecting out the Wi-Fi subspace."""
    return lbt_decision(_mean_energy(np.asarray(pi_perp) @ np.asarray(snapshots)), gamma_dbm)


def expected_lbt_power(pi_perp, g_active, powers_mw, noise_var) -> float:
    """Expectation over symbols and noise of the filtered listening energy.

    ``g_active`` (A, N) holds the channels of the currently active devices.
    """
    pi_perp = np.asarray(pi_perp)
    g_active = np.asarray(g_active, dtype=complex).reshape(-1, pi_perp.shape[0])
    f = g_active @ pi_perp.T  # rows are (pi_perp g)^T
    wifi = float(np.asarray(powers_mw, dtype=float) @ np.sum(f.real ** 2 + f.imag ** 2, axis=1))
    return wifi + noise_var * float(np.trace(pi_perp).real)


def pilot_matrix(m_p: int) -> np.ndarray:
    """Unitary DFT codebook; rows are orthonormal pilots."""
    n = np.arange(m_p)
    return np.exp(-2j * np.pi * np.outer(n, n) / m_p) / np.sqrt(m_p)


def assign_pilots(ues_per_cell, m_p: int, rng) -> PilotBook:
    """Random pilot indices, distinct inside each cell and reused across cells."""
    assignment = {}
    for cell, count in enumerate(ues_per_cell):
        if count > m_p:
            raise ValueError(f"cell {cell} needs {count} pilots but only {m_p} exist")
        assignment[cell] = rng.permutation(m_p)[:count]
    return PilotBook(matrix=pilot_matrix(m_p), assignment=assignment)


def uplink_pilot_power(slow_gain, p_max_dbm=23.0, p0_dbm=-58.0, alpha=0.6, n_rb=1):
    """Fractional power control in dBm: compensate a fraction alpha of the loss.

    ``p0_dbm`` is a per-resource-block level; a pilot spanning ``n_rb``
    blocks is sent with ``10 log10(n_rb)`` dB more power, up to ``p_max_dbm``.
    """
    g_db = lin2db(slow_gain)
    return np.minimum(p_max_dbm, p0_dbm + 10.0 * np.log10(n_rb) - alpha * g_db)


def received_pilot_block(h_ues, pilot_rows, ue_powers_mw, g_active, wifi_powers_mw,
                         wifi_symbols, noise):
    """Pilot-phase signal at one BS, shape (N, M_p).

    Parameters
    ----------
    h_ues : (U, N) channels from every pilot-sending UE (all cells) to this BS
    pilot_rows : (U, M_p) pilot sequence of each UE
    ue_powers_mw : (U,)
    g_active : (A, N) channels of active Wi-Fi devices to this BS
    wifi_powers_mw : (A,)
    wifi_symbols : (A, M_p)
    noise : (N, M_p)
    """
    h_ues = np.asarray(h_ues, dtype=complex)
    y = (h_ues.T * np.sqrt(np.asarray(ue_powers_mw, dtype=float))) @ np.asarray(pilot_rows)
    g_active = np.asarray(g_active, dtype=complex)
    if g_active.size:
        y = y + (g_active.T * np.sqrt(np.asarray(wifi_powers_mw, dtype=float))) @ wifi_symbols
    return y + noise


def draw_pilot_interference(n_antennas, m_p, n_active, noise_var, rng):
    """Random Wi-Fi symbols (A, M_p) and BS noise (N, M_p) for the pilot phase."""
    symbols = complex_normal(rng, (n_active, m_p))
    noise = complex_normal(rng, (n_antennas, m_p)) * np.sqrt(noise_var)
    return symbols, noise


def estimate_ue_channels(y_block, pilot_rows, pi_perp, scale=None) -> CsiEstimate:
    """Correlate with each UE's pilot and project onto the Wi-Fi null space.

    ``pilot_rows`` (K, M_p) are the pilots of the served UEs. ``scale`` (K,)
    divides each estimate to build the precoder input; a zero scale is an
    error.
    """
    pilot_rows = np.asarray(pilot_rows).reshape(-1, np.asarray(y_block).shape[1])
    h_hat = np.asarray(pi_perp) @ (np.asarray(y_block) @ pilot_rows.conj().T)
    if scale is None:
        return CsiEstimate(h_hat=h_hat, h_norm=h_hat.copy())
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0):
        raise ValueError("slow fading normalization must be strictly positive")
    return CsiEstimate(h_hat=h_hat, h_norm=h_hat / scale)


def zf_precoder(h_hat, condition_bound: float = 1e12) -> PrecoderState:
    """Zero-forcing precoder normalized to unit total power."""
    h_hat = np.asarray(h_hat, dtype=complex)
    n, k = h_hat.shape
    if k == 0:
        return PrecoderState(w=np.zeros((n, 0), dtype=complex), zeta=0.0)
    gram = h_hat.conj().T @ h_hat
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > condition_bound:
        raise PrecodingError(f"Gram matrix condition number {cond:.3g} exceeds {condition_bound:.3g}")
    w = h_hat @ np.linalg.inv(gram)
    zeta = float(np.sum(w.real ** 2 + w.imag ** 2))
    return PrecoderState(w=w / np.sqrt(zeta), zeta=zeta)


def stack_precoders(precoders, n_antennas, k_max):
    """Pad per-BS precoders into a (B, K_max, N) array of row vectors.

    ``None`` entries (silent BSs) become zero rows.
    """
    out = np.zeros((len(precoders), k_max, n_antennas), dtype=complex)
    for b, p in enumerate(precoders):
        if p is not None and p.w.shape[1]:
            out[b, :p.w.shape[1], :] = p.w.T
    return out


def downlink_sinr(h, w_rows, serving_bs, stream, transmitting, q_active, wifi_powers_mw,
                  p_b_mw, noise_mw):
    """SINR of every served UE.

    Parameters
    ----------
    h : (B, U, N) channels from every BS to every served UE
    w_rows : (B, K, N) stacked precoders (zero rows for unused streams)
    serving_bs, stream : (U,) serving BS and stream index of each UE
    transmitting : (B,) bool, BSs that gained access this interval
    q_active : (A, U) channels from active Wi-Fi devices to each UE
    """
    gains = kernels.beam_gains(h, w_rows)  # (B, U, K)
    gains = gains * np.asarray(transmitting, dtype=float)[:, None, None]
    u = np.arange(h.shape[1])
    own = gains[serving_bs, u, :]  # (U, K)
    signal = own[u, stream]
    intra = own.sum(axis=1) - signal
    inter = gains.sum(axis=(0, 2)) - own.sum(axis=1)
    q_active = np.asarray(q_active, dtype=complex).reshape(-1, h.shape[1])
    wifi = np.asarray(wifi_powers_mw, dtype=float) @ (q_active.real ** 2 + q_active.imag ** 2)
    return p_b_mw * signal / (p_b_mw * intra + p_b_mw * inter + wifi + noise_mw)


def ue_sinr(ue, serving_bs, stream, h, w_rows, transmitting, q_active, wifi_powers_mw,
            p_b_mw, noise_mw) -> float:
    """SINR of a single served UE; see :func:`downlink_sinr`."""
    sinr = downlink_sinr(h[:, [ue], :], w_rows, np.array([serving_bs]), np.array([stream]),
                         transmitting, np.asarray(q_active).reshape(-1, h.shape[1])[:, [ue]],
                         wifi_powers_mw, p_b_mw, noise_mw)
    return float(sinr[0])


def wifi_interference(g, w_rows, transmitting, p_b_mw):
    """Average cellular power received by each Wi-Fi device, mW.

    ``g`` is (B, L, N); returns (L,).
    """
    gains = kernels.beam_gains(g, w_rows)  # (B, L, K)
    tx = np.asarray(transmitting, dtype=float)
    return p_b_mw * np.einsum("blk,b->l", gains, tx)


def ue_rate(sinr, lbt_passed, bandwidth_hz=20e6):
    """Achievable rate in bit/s, zero when the serving BS did not gain access."""
    return np.where(lbt_passed, bandwidth_hz * np.log2(1.0 + np.asarray(sinr, dtype=float)), 0.0)
