"""Unit conversions and physical constants.

All internal arithmetic in this package uses linear SI units (watts,
hertz, meters); decibel values appear only at I/O boundaries.
"""

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s, in air approximated as vacuum
BOLTZMANN = 1.380649e-23      # J/K


def db_to_lin(x):
    """dB -> linear power ratio."""
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    """Linear power ratio -> dB."""
    return 10.0 * np.log10(x)


def dbm_to_watt(x):
    """dBm -> watts."""
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(x):
    """Watts -> dBm."""
    return 10.0 * np.log10(x) + 30.0
