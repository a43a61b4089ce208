"""Physical constants and unit conversions.

Internally every frequency is angular (rad/s) and every length is in meters.
Values that cross the user boundary are ordinary frequencies in MHz, so a
reported ``12.1`` means ``2*pi*12.1 MHz``.
"""

import math

from scipy import constants as _c

SPEED_OF_LIGHT = _c.c

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6  # one "2*pi x MHz" in rad/s

MM = 1e-3
UM = 1e-6
NM = 1e-9
MS = 1e-3


def mhz_to_angular(value_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/s."""
    return value_mhz * MHZ


def angular_to_mhz(omega):
    """Angular frequency in rad/s -> ordinary frequency in MHz."""
    return omega / MHZ
