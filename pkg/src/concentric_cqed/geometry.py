"""Resonator geometry and mode math for a two-mirror symmetric cavity.

Lengths are in meters, rates in rad/s, and mode spacings/FSR in Hz
(ordinary frequency, since that is what a spectrum analyzer reads).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateInputError,
    InputError,
    NoRootError,
    SingularGeometryError,
    TargetUnreachableError,
    UnstableGeometryError,
)
from .units import MHZ, NM, SPEED_OF_LIGHT, TWO_PI, UM

RB87_D2_WAVELENGTH = 780.241e-9
RB87_D2_LINEWIDTH = 6.07e6  # natural FWHM, Hz (= 2*gamma / 2pi)

LENGTH_RTOL = 1e-12
SWEEP_RTOL = 1e-6


@dataclass(frozen=True)
class AtomModel:
    """Two-level atom seen by the cavity mode.

    ``dipole_decay_rate`` is gamma, the field (dipole) decay rate, which is
    half the natural linewidth.
    """

    dipole_decay_rate: float = math.pi * RB87_D2_LINEWIDTH
    transition_wavelength: float = RB87_D2_WAVELENGTH

    def __post_init__(self):
        if not self.dipole_decay_rate > 0:
            raise InputError(f"dipole decay rate must be positive, got {self.dipole_decay_rate}")
        if not self.transition_wavelength > 0:
            raise InputError(f"wavelength must be positive, got {self.transition_wavelength}")

    @property
    def transition_frequency(self) -> float:
        return TWO_PI * SPEED_OF_LIGHT / self.transition_wavelength

    @classmethod
    def rb87_d2(cls) -> AtomModel:
        return cls()


@dataclass(frozen=True)
class CavityGeometry:
    """Symmetric two-mirror resonator.

    Geometries outside the stability region can be constructed; the mode
    operations reject them.
    """

    radius_of_curvature: float
    cavity_length: float
    wavelength: float = RB87_D2_WAVELENGTH

    def __post_init__(self):
        for name in ("radius_of_curvature", "cavity_length", "wavelength"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InputError(f"{name} must be positive and finite, got {value}")

    @classmethod
    def near_concentric(cls, radius_of_curvature, distance, wavelength=RB87_D2_WAVELENGTH):
        """Geometry with ``cavity_length = 2 * radius_of_curvature - distance``."""
        return cls(radius_of_curvature, 2.0 * radius_of_curvature - distance, wavelength)

    @property
    def stability(self) -> float:
        return 1.0 - self.cavity_length / self.radius_of_curvature

    @property
    def distance_to_concentric(self) -> float:
        return 2.0 * self.radius_of_curvature - self.cavity_length

    @property
    def is_stable(self) -> bool:
        return self.stability ** 2 <= 1.0

    @property
    def free_spectral_range(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.cavity_length)


@dataclass(frozen=True)
class ModeProperties:
    stability_g: float
    waist: float
    mode_volume: float
    free_spectral_range: float
    transverse_mode_spacing: float
    distance_to_concentric: float


def stability_parameter(geom: CavityGeometry) -> float:
    return 1.0 - geom.cavity_length / geom.radius_of_curvature


def _check_stable(geom: CavityGeometry) -> float:
    g = stability_parameter(geom)
    if g * g > 1.0:
        raise UnstableGeometryError(
            f"unstable resonator: g = {g:.9g} (l = {geom.cavity_length!r} m, R = {geom.radius_of_curvature!r} m)"
        )
    return g


def _spacing(radius, length):
    # 1 - arccos(g)/pi rewritten as (2/pi) asin(sqrt((1+g)/2)); with
    # 1 + g = 2 - l/R this keeps full precision next to concentricity.
    one_plus_g = 2.0 - length / radius
    return SPEED_OF_LIGHT / (2.0 * length) * (2.0 / math.pi) * math.asin(math.sqrt(one_plus_g / 2.0))


def transverse_mode_spacing(geom: CavityGeometry) -> float:
    """Frequency gap (Hz) between the fundamental and first transverse mode.

    Zero at the concentric point, FSR/2 at the confocal point.

    Raises:
        UnstableGeometryError: if g**2 > 1.
    """
    _check_stable(geom)
    return _spacing(geom.radius_of_curvature, geom.cavity_length)


def length_from_mode_spacing(spacing, radius_of_curvature, branch="near-concentric"):
    """Invert the transverse mode spacing for the cavity length.

    Args:
        spacing: measured transverse mode spacing in Hz.
        radius_of_curvature: mirror radius in meters.
        branch: ``"near-concentric"`` solves on R < l < 2R (default);
            ``"near-planar"`` on 0 < l < R.

    Returns:
        Cavity length in meters, found by bisection.

    Raises:
        NoRootError: when ``spacing`` cannot be reached on the branch.
    """
    R = radius_of_curvature
    if not R > 0:
        raise InputError("radius of curvature must be positive")
    confocal = SPEED_OF_LIGHT / (4.0 * R)

    if branch == "near-concentric":
        if not 0.0 < spacing < confocal:
            raise NoRootError(
                f"spacing {spacing:.6g} Hz outside (0, {confocal:.6g}) Hz on the near-concentric branch"
            )
        # Solve in the distance d = 2R - l so the relative tolerance applies to the small quantity.
        def f(d):
            return _spacing(R, 2.0 * R - d) - spacing

        d = optimize.bisect(f, 0.0, R, xtol=1e-300, rtol=LENGTH_RTOL, maxiter=400)
        return 2.0 * R - d

    if branch == "near-planar":
        if not spacing > confocal:
            raise NoRootError(f"spacing {spacing:.6g} Hz not above {confocal:.6g} Hz on the near-planar branch")

        def f(length):
            return _spacing(R, length) - spacing

        lo = R
        while f(lo) < 0.0:
            lo *= 0.5
            if lo < 1e-300:
                raise NoRootError("no near-planar solution")
        return optimize.bisect(f, lo, R, xtol=1e-300, rtol=LENGTH_RTOL, maxiter=400)

    raise InputError(f"unknown branch {branch!r}")


def length_from_dual_resonance(nu_a, nu_b, delta_n):
    """Cavity length from two simultaneously resonant fields.

    ``delta_n`` longitudinal orders separate the resonances at ``nu_a`` and
    ``nu_b`` (Hz), so ``l = c * delta_n / (2 * (nu_a - nu_b))``.
    """
    if int(delta_n) != delta_n or delta_n < 1:
        raise InputError(f"delta_n must be a positive integer, got {delta_n}")
    if nu_a == nu_b:
        raise DegenerateInputError("resonance frequencies coincide")
    if nu_a < nu_b:
        raise InputError("expected nu_a > nu_b")
    return SPEED_OF_LIGHT * delta_n / (2.0 * (nu_a - nu_b))


def waist(geom: CavityGeometry) -> float:
    """Beam waist (1/e^2 intensity radius) at the cavity center, in meters."""
    g = _check_stable(geom)
    if g == -1.0 or g == 1.0:
        raise SingularGeometryError(f"waist undefined for g = {g}")
    one_plus_g = 2.0 - geom.cavity_length / geom.radius_of_curvature
    one_minus_g = geom.cavity_length / geom.radius_of_curvature
    return math.sqrt(geom.wavelength * geom.cavity_length / TWO_PI) * (one_plus_g / one_minus_g) ** 0.25


def mode_volume(geom: CavityGeometry) -> float:
    """Standing-wave Gaussian mode volume (pi/4) w0^2 l, in m^3."""
    w0 = waist(geom)
    return math.pi / 4.0 * w0 * w0 * geom.cavity_length


def ideal_coupling(geom: CavityGeometry, atom: AtomModel | None = None) -> float:
    """Single-photon coupling g0 (rad/s) of a two-level atom at the mode center."""
    atom = atom or AtomModel()
    lam = atom.transition_wavelength
    volume = mode_volume(geom)
    return math.sqrt(3.0 * lam * lam * SPEED_OF_LIGHT * atom.dipole_decay_rate / (4.0 * math.pi * volume))


def mode_properties(geom: CavityGeometry) -> ModeProperties:
    return ModeProperties(
        stability_g=stability_parameter(geom),
        waist=waist(geom),
        mode_volume=mode_volume(geom),
        free_spectral_range=geom.free_spectral_range,
        transverse_mode_spacing=transverse_mode_spacing(geom),
        distance_to_concentric=geom.distance_to_concentric,
    )


@dataclass(frozen=True)
class MeasuredCalibration:
    """Coupling anchored to a measurement and extrapolated as d**(-1/4).

    Defaults: 2pi x 5.0 MHz observed at d = 1.65 um with a linearly polarized
    probe on a random m_F state, times sqrt(2) for a circularly polarized
    probe on the stretched transition.
    """

    coupling: float = 5.0 * MHZ
    distance: float = 1.65 * UM
    polarization_factor: float = math.sqrt(2.0)

    def __call__(self, d):
        return self.coupling * self.polarization_factor * (d / self.distance) ** -0.25


@dataclass(frozen=True)
class SweepTable:
    distance: np.ndarray
    coupling: np.ndarray
    ratio: np.ndarray  # g0 / gamma
    waist: np.ndarray


def _coupling_at(d, radius, wavelength, atom, calibration):
    if calibration == "ideal":
        return ideal_coupling(CavityGeometry.near_concentric(radius, d, wavelength), atom)
    if calibration == "measured":
        return MeasuredCalibration()(d)
    if isinstance(calibration, MeasuredCalibration):
        return calibration(d)
    raise InputError(f"unknown calibration {calibration!r}")


def _check_range(radius, d_range):
    d_lo, d_hi = d_range
    if not (0.0 < d_lo <= d_hi < radius):
        raise InputError(f"distance range {d_range} must lie inside (0, R_C = {radius})")
    return d_lo, d_hi


def concentric_sweep(radius_of_curvature, wavelength, atom=None, d_range=(10 * NM, 2 * UM), n_points=50,
                     calibration="ideal") -> SweepTable:
    """Coupling versus distance to concentricity, log-spaced in d.

    ``calibration`` is ``"ideal"`` (geometric g0 of a two-level atom),
    ``"measured"`` (default :class:`MeasuredCalibration`) or a
    :class:`MeasuredCalibration` instance.
    """
    atom = atom or AtomModel()
    d_lo, d_hi = _check_range(radius_of_curvature, d_range)
    if n_points < 1 or (n_points < 2 and d_lo != d_hi):
        raise InputError("n_points must be >= 2 for a non-degenerate range")
    d = np.array([d_lo]) if n_points == 1 else np.geomspace(d_lo, d_hi, n_points)
    coupling = np.array([_coupling_at(x, radius_of_curvature, wavelength, atom, calibration) for x in d])
    w0 = np.array([waist(CavityGeometry.near_concentric(radius_of_curvature, x, wavelength)) for x in d])
    return SweepTable(d, coupling, coupling / atom.dipole_decay_rate, w0)


def distance_for_ratio(target_ratio, radius_of_curvature, wavelength, atom=None, d_range=(10 * NM, 2 * UM),
                       calibration="ideal"):
    """Distance to concentricity at which g0/gamma equals ``target_ratio``.

    Raises:
        TargetUnreachableError: if the ratio is not crossed inside ``d_range``.
    """
    atom = atom or AtomModel()
    d_lo, d_hi = _check_range(radius_of_curvature, d_range)

    def f(d):
        return _coupling_at(d, radius_of_curvature, wavelength, atom, calibration) / atom.dipole_decay_rate - target_ratio

    f_lo, f_hi = f(d_lo), f(d_hi)
    if f_lo == 0.0:
        return d_lo
    if f_hi == 0.0:
        return d_hi
    if f_lo * f_hi > 0.0:
        raise TargetUnreachableError(
            f"g0/gamma = {target_ratio} not crossed for d in [{d_lo:.4g}, {d_hi:.4g}] m "
            f"(range {f_hi + target_ratio:.4g} .. {f_lo + target_ratio:.4g})"
        )
    return optimize.bisect(f, d_lo, d_hi, xtol=1e-300, rtol=SWEEP_RTOL)
