"""Weak-drive steady-state transmission and reflection of an atom-cavity system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InputError


@dataclass(frozen=True)
class CoupledSystem:
    """Single atom coupled to one cavity mode. All rates in rad/s.

    ``coupling_g0 = 0`` is the empty cavity.
    """

    coupling_g0: float
    cavity_decay_kappa: float
    mirror_decay_kappaT: float
    atom_decay_gamma: float
    cavity_resonance: float = 0.0
    atom_resonance: float = 0.0

    def __post_init__(self):
        if self.coupling_g0 < 0:
            raise InputError("coupling must be >= 0")
        if not (self.cavity_decay_kappa > 0 and self.mirror_decay_kappaT > 0 and self.atom_decay_gamma > 0):
            raise InputError("decay rates must be positive")
        if 2.0 * self.mirror_decay_kappaT > self.cavity_decay_kappa * (1.0 + 1e-12):
            raise InputError("2 kappa_T cannot exceed kappa")

    @property
    def frequency_offset(self) -> float:
        return self.cavity_resonance - self.atom_resonance

    @classmethod
    def with_offset(cls, coupling_g0, kappa, kappa_t, gamma, offset, cavity_resonance=0.0):
        """System with the atom at ``cavity_resonance - offset``."""
        return cls(coupling_g0, kappa, kappa_t, gamma, cavity_resonance, cavity_resonance - offset)

    def empty(self) -> CoupledSystem:
        return CoupledSystem(0.0, self.cavity_decay_kappa, self.mirror_decay_kappaT, self.atom_decay_gamma,
                             self.cavity_resonance, self.atom_resonance)


def _response(sys: CoupledSystem, omega):
    """Complex amplitude 2 kappa_T (i Da + gamma) / ((i Dc + kappa)(i Da + gamma) + g0^2)."""
    omega = np.asarray(omega, dtype=float)
    atom = 1j * (omega - sys.atom_resonance) + sys.atom_decay_gamma
    cavity = 1j * (omega - sys.cavity_resonance) + sys.cavity_decay_kappa
    return 2.0 * sys.mirror_decay_kappaT * atom / (cavity * atom + sys.coupling_g0 ** 2)


def transmission(sys: CoupledSystem, omega):
    """Intensity transmission at probe frequency ``omega`` (scalar or array)."""
    out = np.abs(_response(sys, omega)) ** 2
    return float(out) if out.ndim == 0 else out


def reflection(sys: CoupledSystem, omega):
    out = np.abs(1.0 - _response(sys, omega)) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Spectrum:
    """Sampled spectrum: angular frequencies, values, optional one-sigma errors."""

    frequency: np.ndarray
    value: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        freq = np.asarray(self.frequency, dtype=float)
        val = np.asarray(self.value, dtype=float)
        object.__setattr__(self, "frequency", freq)
        object.__setattr__(self, "value", val)
        if freq.ndim != 1 or freq.shape != val.shape:
            raise DataError("frequency and value must be 1-D arrays of equal length")
        if freq.size > 1 and not np.all(np.diff(freq) > 0):
            raise DataError("frequencies must be strictly increasing")
        if np.any(val < 0) or not np.all(np.isfinite(val)):
            raise DataError("values must be finite and non-negative")
        if self.sigma is not None:
            sig = np.asarray(self.sigma, dtype=float)
            if sig.shape != freq.shape:
                raise DataError("sigma must match the frequency grid")
            if not np.all(sig > 0):
                raise DataError("sigma must be positive")
            object.__setattr__(self, "sigma", sig)

    def __len__(self):
        return self.frequency.size


def sample_spectrum(sys: CoupledSystem, omega_grid, which="transmission") -> Spectrum:
    grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    if which == "transmission":
        values = transmission(sys, grid)
    elif which == "reflection":
        values = reflection(sys, grid)
    else:
        raise InputError(f"which must be 'transmission' or 'reflection', got {which!r}")
    return Spectrum(grid, np.atleast_1d(values))


@dataclass(frozen=True)
class NormalModes:
    """Complex eigenfrequencies: real part = position, imaginary = half width."""

    lower: complex
    upper: complex
    splitting: float
    resolved: bool


def normal_mode_frequencies(sys: CoupledSystem) -> NormalModes:
    """Roots in omega of ``(i Dc + kappa)(i Da + gamma) + g0**2 = 0``.

    The roots are ``(wc + wa)/2 +- sqrt(((wc - wa)/2)**2 + g0**2)`` with complex
    ``wc = omega_c + i kappa`` and ``wa = omega_a + i gamma``. The modes count
    as resolved when the square root is dominated by its real part, which for
    zero offset is the familiar condition g0**2 > (kappa - gamma)**2 / 4.
    """
    wc = sys.cavity_resonance + 1j * sys.cavity_decay_kappa
    wa = sys.atom_resonance + 1j * sys.atom_decay_gamma
    mean = (wc + wa) / 2.0
    root = np.sqrt(((wc - wa) / 2.0) ** 2 + sys.coupling_g0 ** 2 + 0j)
    a, b = complex(mean - root), complex(mean + root)
    lower, upper = sorted((a, b), key=lambda z: (z.real, z.imag))
    return NormalModes(lower, upper, upper.real - lower.real, bool(abs(root.real) > abs(root.imag)))


def shot_noise(spectrum: Spectrum, counts_at_unity, rng) -> Spectrum:
    """Poisson-sample a noiseless spectrum.

    A value of 1 corresponds to ``counts_at_unity`` expected detections; the
    returned values are detected counts divided by that scale. Sigma is the
    Poisson width of the expected counts, ``sqrt(max(mean, 1)) / counts_at_unity``:
    widths taken from the observed counts would favour low fluctuations and
    bias fitted amplitudes down by about one count per point.
    """
    if not counts_at_unity > 0:
        raise InputError("counts_at_unity must be positive")
    mean = spectrum.value * counts_at_unity
    counts = rng.poisson(mean)
    sigma = np.sqrt(np.maximum(mean, 1.0)) / counts_at_unity
    return Spectrum(spectrum.frequency, counts / counts_at_unity, sigma)
