import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concentric_cqed.errors import (
    DegenerateInputError,
    NoRootError,
    SingularGeometryError,
    TargetUnreachableError,
    UnstableGeometryError,
)
from concentric_cqed.geometry import (
    AtomModel,
    CavityGeometry,
    MeasuredCalibration,
    concentric_sweep,
    distance_for_ratio,
    ideal_coupling,
    length_from_dual_resonance,
    length_from_mode_spacing,
    mode_properties,
    mode_volume,
    stability_parameter,
    transverse_mode_spacing,
    waist,
)
from concentric_cqed.units import MHZ, NM, SPEED_OF_LIGHT, UM

from .conftest import D_PAPER, R_C

C = SPEED_OF_LIGHT


def textbook_spacing(radius, length):
    """c/2l (1 - arccos(g)/pi) evaluated at 40 digits."""
    mp.mp.dps = 40
    g = 1 - mp.mpf(length) / mp.mpf(radius)
    return float(mp.mpf(C) / (2 * mp.mpf(length)) * (1 - mp.acos(g) / mp.pi))


class TestStability:
    def test_concentric_limit(self):
        assert stability_parameter(CavityGeometry(1.0, 2.0)) == -1.0

    def test_confocal_midpoint(self):
        assert stability_parameter(CavityGeometry(R_C, R_C)) == 0.0

    def test_paper_value(self, paper_geometry):
        assert stability_parameter(paper_geometry) == pytest.approx(-0.999700, abs=2e-6)

    def test_unstable_flagged_not_rejected(self):
        geom = CavityGeometry(R_C, 2.5 * R_C)
        assert not geom.is_stable
        with pytest.raises(UnstableGeometryError):
            transverse_mode_spacing(geom)

    @pytest.mark.parametrize("field", ["radius_of_curvature", "cavity_length", "wavelength"])
    def test_rejects_nonpositive(self, field):
        kwargs = dict(radius_of_curvature=R_C, cavity_length=R_C, wavelength=780e-9)
        kwargs[field] = 0.0
        with pytest.raises(ValueError):
            CavityGeometry(**kwargs)


class TestModeSpacing:
    def test_confocal_is_quarter_of_c_over_l(self):
        geom = CavityGeometry(R_C, R_C)
        assert transverse_mode_spacing(geom) == pytest.approx(C / (4 * R_C), rel=1e-14)
        assert transverse_mode_spacing(geom) == pytest.approx(geom.free_spectral_range / 2, rel=1e-14)

    def test_concentric_degenerate(self):
        assert transverse_mode_spacing(CavityGeometry(R_C, 2 * R_C)) == 0.0

    def test_paper_geometry(self):
        # 107.87 MHz: rounds to the reported 109(2) MHz within its error
        spacing = transverse_mode_spacing(CavityGeometry.near_concentric(R_C, 1.7 * UM))
        assert spacing == pytest.approx(107.8659998880e6, rel=1e-9)
        assert 107e6 <= spacing <= 111e6

    @pytest.mark.parametrize("d", [1e-9, 1e-7, 1.65e-6, 1e-4, 3e-3])
    def test_matches_arccos_form(self, d):
        geom = CavityGeometry.near_concentric(R_C, d)
        assert transverse_mode_spacing(geom) == pytest.approx(textbook_spacing(R_C, geom.cavity_length), rel=1e-9)

    def test_monotone_decreasing_on_near_concentric_branch(self):
        lengths = np.linspace(R_C * 1.0001, 2 * R_C, 2000)
        values = [transverse_mode_spacing(CavityGeometry(R_C, l)) for l in lengths]
        assert np.all(np.diff(values) < 0)


class TestLengthFromSpacing:
    def test_paper_inversion(self):
        length = length_from_mode_spacing(109e6, R_C)
        assert (2 * R_C - length) == pytest.approx(1.7 * UM, abs=0.1 * UM)
        # frozen from a 40-digit root of the arccos form
        assert (2 * R_C - length) == pytest.approx(1.735919015706829e-6, rel=1e-9)

    def test_200_mhz(self):
        length = length_from_mode_spacing(200e6, R_C)
        assert (2 * R_C - length) == pytest.approx(5.839266784466109e-6, rel=1e-9)
        assert transverse_mode_spacing(CavityGeometry(R_C, length)) == pytest.approx(200e6, rel=1e-11)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=math.log(10e-9), max_value=math.log(R_C - 1e-6)))
    def test_inverse_consistency(self, log_d):
        length = 2 * R_C - math.exp(log_d)
        spacing = transverse_mode_spacing(CavityGeometry(R_C, length))
        assert length_from_mode_spacing(spacing, R_C) == pytest.approx(length, rel=1e-9)

    @pytest.mark.parametrize("spacing", [0.0, -1e6, C / (4 * R_C), 1e12])
    def test_out_of_range(self, spacing):
        with pytest.raises(NoRootError):
            length_from_mode_spacing(spacing, R_C)

    def test_near_planar_branch_is_mirror_solution(self):
        spacing = transverse_mode_spacing(CavityGeometry(R_C, 0.3 * R_C))
        planar = length_from_mode_spacing(spacing, R_C, branch="near-planar")
        assert planar == pytest.approx(0.3 * R_C, rel=1e-9)
        with pytest.raises(NoRootError):
            length_from_mode_spacing(spacing, R_C)


class TestDualResonance:
    def test_single_fsr(self):
        fsr = C / (2 * 11e-3)
        assert length_from_dual_resonance(400e12 + fsr, 400e12, 1) == pytest.approx(11e-3, rel=1e-14)

    def test_paper_instance_inverse_form(self):
        # only delta_n = 1043 and the resulting length are published
        gap = 14.21502014820404e12
        length = length_from_dual_resonance(384.2e12, 384.2e12 - gap, 1043)
        assert 2 * R_C - length == pytest.approx(1.65 * UM, abs=0.01 * UM)

    def test_homogeneous_in_delta_n(self):
        a = length_from_dual_resonance(384e12, 370e12, 1)
        b = length_from_dual_resonance(384e12 + 14e12, 370e12, 2)
        assert a == pytest.approx(b, rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            length_from_dual_resonance(1e14, 1e14, 3)


class TestWaistAndVolume:
    def test_confocal_waist(self):
        geom = CavityGeometry(R_C, R_C, 780e-9)
        assert waist(geom) == pytest.approx(math.sqrt(780e-9 * R_C / (2 * math.pi)), rel=1e-14)

    def test_paper_waist(self):
        w0 = waist(CavityGeometry.near_concentric(R_C, D_PAPER, 780e-9))
        assert w0 == pytest.approx(4.1 * UM, abs=0.05 * UM)

    def test_100nm_waist(self):
        assert waist(CavityGeometry.near_concentric(R_C, 100 * NM)) == pytest.approx(2.0294185884969e-6, rel=1e-9)

    def test_fourth_root_law(self):
        for d in (1e-6, 3e-7, 1e-7):
            big = waist(CavityGeometry.near_concentric(R_C, d))
            small = waist(CavityGeometry.near_concentric(R_C, d / 16))
            assert small == pytest.approx(big / 2, rel=0.01)

    def test_waist_decreasing_in_length(self):
        lengths = np.linspace(R_C * 1.001, 2 * R_C * (1 - 1e-9), 500)
        w = [waist(CavityGeometry(R_C, l)) for l in lengths]
        assert np.all(np.diff(w) < 0)

    def test_singular_at_concentricity(self):
        with pytest.raises(SingularGeometryError):
            waist(CavityGeometry(R_C, 2 * R_C))
        with pytest.raises(SingularGeometryError):
            mode_volume(CavityGeometry(R_C, 2 * R_C))

    def test_paper_volume(self, paper_geometry):
        assert mode_volume(paper_geometry) == pytest.approx(1.4450140077152e-13, rel=1e-9)

    def test_volume_scaling(self):
        geom = CavityGeometry.near_concentric(R_C, D_PAPER)
        w0, length = waist(geom), geom.cavity_length
        assert mode_volume(geom) == pytest.approx(math.pi / 4 * w0 ** 2 * length, rel=1e-15)

    def test_mode_properties_bundle(self, paper_geometry):
        props = mode_properties(paper_geometry)
        assert 0 <= props.transverse_mode_spacing <= props.free_spectral_range
        assert props.distance_to_concentric == pytest.approx(2 * R_C - paper_geometry.cavity_length)
        assert props.waist > 0 and props.mode_volume > 0


class TestCoupling:
    def test_paper_ideal_coupling(self, paper_geometry, atom):
        assert ideal_coupling(paper_geometry, atom) / MHZ == pytest.approx(12.1, abs=0.2)
        assert ideal_coupling(paper_geometry, atom) / MHZ == pytest.approx(12.068358412973, rel=1e-9)

    def test_100nm(self, atom):
        g0 = ideal_coupling(CavityGeometry.near_concentric(R_C, 100 * NM), atom)
        assert g0 / MHZ == pytest.approx(24.320544000946, rel=1e-9)

    def test_inverse_square_root_of_volume(self, atom):
        # same length, waist doubled -> 4x volume
        geom = CavityGeometry(R_C, R_C, 780e-9)
        wider = CavityGeometry(R_C, R_C, 4 * 780e-9)
        assert ideal_coupling(wider, atom) == pytest.approx(ideal_coupling(geom, atom) / 2, rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(min_value=1e-9, max_value=5e-3))
    def test_g0_squared_times_volume_invariant(self, d):
        atom = AtomModel()
        ref = CavityGeometry.near_concentric(R_C, D_PAPER)
        geom = CavityGeometry.near_concentric(R_C, d)
        lhs = ideal_coupling(geom, atom) ** 2 * mode_volume(geom)
        rhs = ideal_coupling(ref, atom) ** 2 * mode_volume(ref)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_pure(self, paper_geometry, atom):
        assert ideal_coupling(paper_geometry, atom) == ideal_coupling(paper_geometry, atom)

    def test_atom_defaults(self, atom):
        assert 2 * atom.dipole_decay_rate / MHZ == pytest.approx(6.07)
        assert atom.transition_frequency == pytest.approx(2 * math.pi * C / 780.241e-9)


class TestSweep:
    def test_measured_target_4(self, atom):
        d = distance_for_ratio(4.0, R_C, 780.241e-9, atom, (10 * NM, 2 * UM), "measured")
        assert 50 * NM <= d <= 200 * NM
        # closed form of the d^-1/4 anchor: 1.65 um * (5 sqrt2 / (4 * 3.035))^4
        assert d == pytest.approx(1.899106000214706e-7, rel=1e-5)

    def test_ideal_target_8(self, atom):
        d = distance_for_ratio(8.0, R_C, 780.241e-9, atom, (10 * NM, 2 * UM), "ideal")
        assert d == pytest.approx(100.66963399895e-9, rel=1e-5)
        geom = CavityGeometry.near_concentric(R_C, d)
        assert ideal_coupling(geom, atom) / atom.dipole_decay_rate == pytest.approx(8.0, rel=1e-5)

    def test_target_at_lower_edge(self, atom):
        table = concentric_sweep(R_C, 780.241e-9, atom, (20 * NM, 2 * UM), 5)
        edge = table.ratio[0]
        assert distance_for_ratio(edge, R_C, 780.241e-9, atom, (20 * NM, 2 * UM)) == 20 * NM

    def test_unreachable(self, atom):
        with pytest.raises(TargetUnreachableError):
            distance_for_ratio(100.0, R_C, 780.241e-9, atom, (10 * NM, 2 * UM))

    def test_table_log_spaced_and_monotone(self, atom):
        table = concentric_sweep(R_C, 780.241e-9, atom, (10 * NM, 2 * UM), 25, "measured")
        ratios = table.distance[1:] / table.distance[:-1]
        assert np.allclose(ratios, ratios[0], rtol=1e-12)
        assert np.all(np.diff(table.ratio) < 0)
        assert np.all(np.diff(table.waist) > 0)

    def test_measured_anchor(self):
        cal = MeasuredCalibration()
        assert cal(D_PAPER) / MHZ == pytest.approx(5.0 * math.sqrt(2), rel=1e-14)
