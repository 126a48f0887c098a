"""Pure numpy implementations of the hot kernels.

These are the reference versions; the compiled ``_ckernels`` module must
return the same values (up to floating point summation order).
"""

import numpy as np


def wrapped_displacement(src, dst, shifts):
    """Shortest displacement ``dst - src`` over all wrap-around images.

    Parameters
    ----------
    src : ndarray, shape (S, 2)
    dst : ndarray, shape (T, 2)
    shifts : ndarray, shape (W, 2)
        Image displacements of ``dst``. The zero shift is always tried
        first, so ties resolve to the direct path.

    Returns
    -------
    ndarray, shape (S, T, 2)
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    shifts = np.asarray(shifts, dtype=float).reshape(-1, 2)
    images = np.concatenate([np.zeros((1, 2)), shifts], axis=0)
    # (S, T, W+1, 2)
    delta = dst[None, :, None, :] - src[:, None, None, :] + images[None, None, :, :]
    dist2 = delta[..., 0] ** 2 + delta[..., 1] ** 2
    best = np.argmin(dist2, axis=2)
    return np.take_along_axis(delta, best[..., None, None], axis=2)[:, :, 0, :]


def beam_gains(channels, precoders_t):
    """Squared magnitudes ``|h^H w|^2`` for every (BS, target, stream).

    Parameters
    ----------
    channels : complex ndarray, shape (B, T, N)
        Channel from BS ``b`` to target ``t``.
    precoders_t : complex ndarray, shape (B, K, N)
        Precoding vectors of BS ``b``, one row per stream.

    Returns
    -------
    ndarray, shape (B, T, K)
    """
    prod = np.matmul(np.conj(channels), np.swapaxes(precoders_t, 1, 2))
    return prod.real ** 2 + prod.imag ** 2
