"""Mirror loss budget, decay rates and cooperativity.

Conventions: kappa and kappa_T are field decay rates (half widths) in rad/s,
mirror transmission T and round-trip absorption L are intensity fractions.
The per-mirror rate is kappa_T = T c / (4 l), so that

    kappa = 2 kappa_T + L c / (4 l)
    T_max = (2 kappa_T / kappa)**2
    1 - eta = (1 - 2 kappa_T / kappa)**2

hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NegativeLossError
from .units import SPEED_OF_LIGHT, TWO_PI


def finesse_from_linewidth(full_linewidth, cavity_length):
    """Finesse from the FWHM ``2*kappa`` (rad/s) and the length (m)."""
    if not (full_linewidth > 0 and cavity_length > 0):
        raise InputError("linewidth and length must be positive")
    kappa = full_linewidth / 2.0
    return math.pi * SPEED_OF_LIGHT / (2.0 * kappa * cavity_length)


def finesse_from_loss(round_trip_loss):
    """Finesse for a total fractional round-trip loss 2T + L."""
    if not round_trip_loss > 0:
        raise InputError("round-trip loss must be positive")
    return TWO_PI / round_trip_loss


def absorption_loss(finesse, transmission):
    """Round-trip absorption loss ``L = 2 pi / F - 2 T``.

    Raises:
        NegativeLossError: if the finesse is too high for the given mirror
            transmission.
    """
    total = TWO_PI / finesse
    loss = total - 2.0 * transmission
    if loss < 0.0:
        # a lossless pair built as F = pi / T lands one ulp either side of zero
        if -loss <= 4.0 * np.finfo(float).eps * total:
            return 0.0
        raise NegativeLossError(
            f"2pi/F = {total:.6g} is below 2T = {2 * transmission:.6g}; inputs are inconsistent"
        )
    return loss


def incoupling_efficiency(transmission, loss):
    total = 2.0 * transmission + loss
    return 1.0 - loss * loss / (total * total)


def resonant_transmission(transmission, loss):
    total = 2.0 * transmission + loss
    return 4.0 * transmission * transmission / (total * total)


def decay_rates(transmission, loss, cavity_length):
    """Return ``(kappa, kappa_T)`` in rad/s."""
    if not cavity_length > 0:
        raise InputError("cavity length must be positive")
    unit = SPEED_OF_LIGHT / (4.0 * cavity_length)
    return (2.0 * transmission + loss) * unit, transmission * unit


def cooperativity(coupling, kappa, gamma):
    """Single-atom cooperativity ``g0**2 / (2 kappa gamma)``."""
    return coupling * coupling / (2.0 * kappa * gamma)


@dataclass(frozen=True)
class LossBudget:
    mirror_transmission: float
    round_trip_absorption: float
    finesse: float
    cavity_field_decay: float
    mirror_field_decay: float
    incoupling_efficiency: float
    resonant_transmission: float

    def __post_init__(self):
        if not 0.0 < self.mirror_transmission < 1.0:
            raise InputError("mirror transmission must be in (0, 1)")
        if not 0.0 <= self.round_trip_absorption < 1.0:
            raise InputError("absorption loss must be in [0, 1)")

    @classmethod
    def from_finesse(cls, finesse, transmission, cavity_length):
        loss = absorption_loss(finesse, transmission)
        kappa, kappa_t = decay_rates(transmission, loss, cavity_length)
        return cls(
            mirror_transmission=transmission,
            round_trip_absorption=loss,
            finesse=finesse,
            cavity_field_decay=kappa,
            mirror_field_decay=kappa_t,
            incoupling_efficiency=incoupling_efficiency(transmission, loss),
            resonant_transmission=resonant_transmission(transmission, loss),
        )

    @classmethod
    def from_linewidth(cls, full_linewidth, transmission, cavity_length):
        return cls.from_finesse(finesse_from_linewidth(full_linewidth, cavity_length), transmission, cavity_length)


def propagate(func, values, sigmas, rel_step=1e-6):
    """First-order Gaussian error propagation through ``func(*values)``.

    Inputs are treated as uncorrelated; derivatives are central differences.
    Returns ``(value, sigma)``.
    """
    values = [float(v) for v in values]
    center = func(*values)
    variance = 0.0
    for i, s in enumerate(sigmas):
        if not s:
            continue
        h = rel_step * (abs(values[i]) or 1.0)
        up = list(values)
        down = list(values)
        up[i] += h
        down[i] -= h
        derivative = (func(*up) - func(*down)) / (2.0 * h)
        variance += (derivative * s) ** 2
    return center, math.sqrt(variance)


def budget_with_uncertainty(full_linewidth, transmission, cavity_length,
                            linewidth_sigma=0.0, transmission_sigma=0.0, length_sigma=0.0):
    """Budget derived from a measured linewidth, each entry as (value, sigma)."""
    sig = (linewidth_sigma, transmission_sigma, length_sigma)
    args = (full_linewidth, transmission, cavity_length)

    def field(name):
        return lambda w, t, l: getattr(LossBudget.from_linewidth(w, t, l), name)

    names = ("finesse", "round_trip_absorption", "incoupling_efficiency", "resonant_transmission",
             "cavity_field_decay", "mirror_field_decay")
    return {name: propagate(field(name), args, sig) for name in names}
