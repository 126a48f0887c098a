"""dB / linear conversions. Powers are handled in mW internally."""

import numpy as np


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm2mw(x):
    return db2lin(x)


def mw2dbm(x):
    return lin2db(x)


def noise_power_dbm(psd_dbm_hz, bandwidth_hz, noise_figure_db):
    """Thermal noise power over ``bandwidth_hz`` including the receiver NF."""
    return psd_dbm_hz + 10.0 * np.log10(bandwidth_hz) + noise_figure_db
