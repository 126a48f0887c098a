"""Wi-Fi channel covariance at a BS and the derived suppression projectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import complex_normal


class SubspaceError(ValueError):
    pass


@dataclass
class CovarianceEstimate:
    z_hat: np.ndarray  # (N, N) Hermitian
    eigvals: np.ndarray  # (N,) descending
    eigvecs: np.ndarray  # (N, N) columns matching eigvals
    m_c: float  # number of snapshots, inf for the exact covariance


@dataclass
class ProjectorPair:
    sigma: np.ndarray  # (N, D)
    pi: np.ndarray  # (N, N)
    pi_perp: np.ndarray  # (N, N)

    @property
    def d(self) -> int:
        return self.sigma.shape[1]


def sample_idle_signal(g, powers_mw, active, noise_var, rng):
    """Signal received by a silent BS over several listening symbols.

    Parameters
    ----------
    g : complex ndarray, shape (L, N)
        Channels from every Wi-Fi device to this BS.
    powers_mw : ndarray, shape (L,)
    active : bool ndarray, shape (M, L)
        Active devices at each of the M symbols.
    noise_var : float
        Per-antenna noise power in mW.

    Returns
    -------
    complex ndarray, shape (N, M), one snapshot per column.
    """
    g = np.asarray(g, dtype=complex)
    active = np.asarray(active, dtype=bool)
    m, n_dev = active.shape
    n = g.shape[1]
    symbols = complex_normal(rng, (n_dev, m)) * active.T
    symbols *= np.sqrt(np.asarray(powers_mw, dtype=float))[:, None]
    noise = complex_normal(rng, (n, m)) * np.sqrt(noise_var)
    return g.T @ symbols + noise


def decompose(z: np.ndarray, m_c: float = math.inf) -> CovarianceEstimate:
    """Hermitian-symmetrize and eigendecompose with descending eigenvalues.

    Equal eigenvalues keep the decomposition's original column order.
    """
    z = 0.5 * (z + z.conj().T)
    w, u = np.linalg.eigh(z)
    idx = np.arange(len(w))
    order = np.lexsort((idx, -w))
    return CovarianceEstimate(z_hat=z, eigvals=w[order], eigvecs=u[:, order], m_c=m_c)


def estimate_covariance(snapshots) -> CovarianceEstimate:
    """Sample covariance of the columns of ``snapshots`` (N, M)."""
    y = np.asarray(snapshots, dtype=complex)
    if y.ndim != 2 or y.shape[1] == 0:
        raise SubspaceError("at least one snapshot is required")
    m = y.shape[1]
    return decompose((y @ y.conj().T) / m, m_c=m)


def exact_covariance(g, powers_mw, activity_prob, noise_var) -> np.ndarray:
    """Covariance of the idle signal averaged over symbols, noise and activity.

    ``activity_prob`` holds the probability that each device is active.
    """
    g = np.asarray(g, dtype=complex)
    n = g.shape[1] if g.ndim == 2 else 0
    weights = np.asarray(activity_prob, dtype=float) * np.asarray(powers_mw, dtype=float)
    z = (g.T * weights) @ g.conj() if len(weights) else np.zeros((n, n), dtype=complex)
    return z + noise_var * np.eye(n)


def dominant_subspace(cov: CovarianceEstimate, d: int) -> ProjectorPair:
    """Projectors onto the ``d`` dominant eigenvectors and their complement."""
    n = cov.eigvecs.shape[0]
    if d < 0 or d > n or d > cov.m_c:
        raise SubspaceError(f"cannot allocate {d} nulls with N={n}, M_c={cov.m_c}")
    sigma = cov.eigvecs[:, :d]
    pi = sigma @ sigma.conj().T
    pi_perp = np.eye(n) - pi
    return ProjectorPair(sigma=sigma, pi=pi, pi_perp=pi_perp)
