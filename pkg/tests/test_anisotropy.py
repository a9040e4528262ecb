import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.anisotropy import (
    AnisotropyMap,
    antipodal_mismatch,
    argmin_locations,
    calibrate,
    calibrate_models,
    calibrate_with_record,
    census,
    direction_grid,
    euler_check,
    extremal_ratio,
    sweep,
    t2_at,
)
from src.core.coherence import gamma
from src.core.exceptions import CalibrationError, InvalidArgumentError
from src.core.geometry import FieldDirection, unit_vectors
from src.core.models import (
    ClusterDipoleModel,
    ClusterTrapModel,
    CriticalPointCensus,
    EWJNModel,
    HyperfineModel,
    Quantity,
    ReferenceMeasurement,
    Resolution,
    UniformDipoleModel,
    UniformTrapModel,
)

from tests.conftest import quadratic_map

REFERENCE = FieldDirection(math.pi / 2, 0.0)
TARGET = 840e-9
HYPERFINE = 1 / 2.01e-6

CHARGE_CONFIGURATIONS = [
    UniformDipoleModel(fit=True, tau_s=1e-5),
    UniformTrapModel(fit=True, tau_s=1e-5),
    ClusterDipoleModel(position_nm=(37, 0, 37), fit=True, tau_s=1e-5),
    ClusterDipoleModel(position_nm=(0, 37, 37), fit=True, tau_s=1e-5),
    ClusterTrapModel(position_nm=(37, 0, 137), fit=True, tau_s=1e-5),
    ClusterTrapModel(position_nm=(0, 37, 137), fit=True, tau_s=1e-5),
]


def calibrated(model, device):
    return [calibrate(model, device, REFERENCE, TARGET, HYPERFINE), HyperfineModel()]


class TestCalibration:

    @pytest.mark.parametrize("model", CHARGE_CONFIGURATIONS, ids=lambda m: m.type)
    def test_round_trip(self, device, model):
        models = calibrated(model, device)
        assert t2_at(REFERENCE, models, device) == pytest.approx(TARGET, rel=1e-6)
        assert models[0].fit is False

    def test_volume_density(self, device):
        _, record = calibrate_with_record(
            UniformDipoleModel(fit=True, tau_s=1e-5), device, REFERENCE, TARGET, HYPERFINE
        )
        assert record.parameter == "rho_v_per_cm3"
        assert record.fitted_value == pytest.approx(2.504e13, rel=0.01)
        assert record.hyperfine_share == pytest.approx(TARGET * HYPERFINE)
        assert 1 / record.charge_tphi_s == pytest.approx(1 / TARGET - HYPERFINE)

    def test_static_limit_density(self, device):
        fitted = calibrate(UniformDipoleModel(fit=True, tau_s=1.0), device, REFERENCE, TARGET, HYPERFINE)
        assert fitted.rho_v_per_cm3 == pytest.approx(2.388e13, rel=0.01)

    def test_charge_only_fit(self, device):
        _, record = calibrate_with_record(
            UniformDipoleModel(fit=True), device, REFERENCE, TARGET, 0.0
        )
        assert record.charge_tphi_s == pytest.approx(TARGET)
        assert record.hyperfine_share == 0.0

    def test_short_target_is_feasible(self, device):
        fitted = calibrate(UniformDipoleModel(fit=True), device, REFERENCE, 1e-9, HYPERFINE)
        assert t2_at(REFERENCE, [fitted, HyperfineModel()], device) == pytest.approx(1e-9, rel=1e-6)

    def test_background_exceeding_target_is_infeasible(self, device):
        with pytest.raises(CalibrationError, match="background"):
            calibrate(UniformDipoleModel(fit=True), device, REFERENCE, TARGET, 1 / 500e-9)

    def test_fixed_charge_noise_counts_as_background(self, device):
        fixed = ClusterDipoleModel(position_nm=(37, 0, 37), p0_Cm=1e-31, tau_s=1e-5)
        fitted, record = calibrate_with_record(
            UniformDipoleModel(fit=True, tau_s=1e-5), device, REFERENCE, TARGET, HYPERFINE, background=[fixed]
        )
        assert 0.0 < record.fixed_charge_gamma < 1.0
        assert record.fixed_charge_gamma == pytest.approx(
            gamma(record.charge_tphi_s, REFERENCE, [fixed], device), rel=1e-12
        )
        assert gamma(record.charge_tphi_s, REFERENCE, [fitted], device) == pytest.approx(
            1.0 - record.fixed_charge_gamma, rel=1e-9
        )
        total = t2_at(REFERENCE, [fitted, fixed, HyperfineModel()], device)
        assert total == pytest.approx(TARGET, rel=1e-6)

    def test_fixed_charge_noise_alone_too_strong(self, device):
        fixed = ClusterDipoleModel(position_nm=(37, 0, 37), p0_Cm=1e-30, tau_s=1e-5)
        with pytest.raises(CalibrationError, match="fixed charge noise"):
            calibrate(
                UniformDipoleModel(fit=True, tau_s=1e-5), device, REFERENCE, TARGET, HYPERFINE, background=[fixed]
            )

    def test_record_without_fixed_charge_noise(self, device):
        _, record = calibrate_with_record(
            UniformDipoleModel(fit=True, tau_s=1e-5), device, REFERENCE, TARGET, HYPERFINE
        )
        assert record.fixed_charge_gamma == 0.0

    def test_ewjn_background_rate(self, device):
        _, record = calibrate_with_record(
            UniformDipoleModel(fit=True), device, REFERENCE, TARGET, HYPERFINE, background=[EWJNModel()]
        )
        assert record.background_rate_per_s > HYPERFINE

    def test_non_charge_model_cannot_be_fitted(self, device):
        with pytest.raises(CalibrationError):
            calibrate(HyperfineModel(), device, REFERENCE, TARGET, 0.0)

    def test_models_without_reference(self, device):
        with pytest.raises(CalibrationError, match="reference"):
            calibrate_models([UniformDipoleModel(fit=True)], device, None)

    def test_models_pass_through_when_nothing_to_fit(self, device):
        models = [UniformDipoleModel(rho_v_per_cm3=1e13), HyperfineModel()]
        result, records = calibrate_models(models, device, None)
        assert result == models
        assert records == []

    def test_models_keep_order(self, device):
        models = [HyperfineModel(), UniformTrapModel(fit=True, tau_s=1e-5)]
        result, records = calibrate_models(models, device, ReferenceMeasurement(t2_s=TARGET))
        assert isinstance(result[0], HyperfineModel)
        assert result[1].rho_a_per_cm2 == pytest.approx(records[0].fitted_value)

    def test_reference_angles_are_folded(self, device):
        reference = ReferenceMeasurement(theta_rad=3 * math.pi / 2, phi_rad=0.0, t2_s=TARGET)
        _, records = calibrate_models([UniformDipoleModel(fit=True, tau_s=1e-5)], device, reference)
        assert records[0].reference_theta_rad == pytest.approx(math.pi / 2)
        assert records[0].reference_phi_rad == pytest.approx(math.pi)

    @pytest.mark.parametrize("angle", [math.nan, math.inf])
    def test_reference_angles_must_be_finite(self, angle):
        with pytest.raises(ValidationError):
            ReferenceMeasurement(theta_rad=angle, t2_s=TARGET)
        with pytest.raises(ValidationError):
            ReferenceMeasurement(phi_rad=angle, t2_s=TARGET)

    def test_unvalidated_reference_is_rejected(self, device):
        reference = ReferenceMeasurement.model_construct(theta_rad=math.nan, phi_rad=0.0, t2_s=TARGET)
        with pytest.raises(InvalidArgumentError):
            calibrate_models([UniformDipoleModel(fit=True)], device, reference)


class TestSweep:

    @pytest.fixture
    def ud_map(self, device, small_resolution):
        models = calibrated(CHARGE_CONFIGURATIONS[0], device)
        return sweep(Quantity.T2, models, device, small_resolution)

    def test_grid_layout(self, ud_map, small_resolution):
        assert ud_map.values.shape == (37, 72)
        assert ud_map.resolution == small_resolution
        assert ud_map.theta_grid[0] == 0.0 and ud_map.theta_grid[-1] == pytest.approx(math.pi)
        assert ud_map.phi_grid[-1] < 2 * math.pi
        assert np.all(ud_map.values[0] == ud_map.values[0, 0])
        assert np.all(ud_map.values[-1] == ud_map.values[-1, 0])

    def test_matches_point_evaluation(self, ud_map, device):
        models = calibrated(CHARGE_CONFIGURATIONS[0], device)
        i, j = 10, 17
        direction = FieldDirection(ud_map.theta_grid[i], ud_map.phi_grid[j])
        assert ud_map.values[i, j] == pytest.approx(t2_at(direction, models, device), rel=1e-9)

    def test_metadata(self, ud_map, device):
        meta = ud_map.metadata
        assert meta["quantity"] == "t2"
        assert meta["resolution"] == "37x72"
        assert meta["device_sha256"] == device.config_hash()
        assert meta["tau_s"] == [1e-5]
        assert [m["type"] for m in meta["models"]] == ["UD", "hyperfine"]

    def test_antipodal_symmetry(self, ud_map):
        assert antipodal_mismatch(ud_map) <= 1e-9

    def test_hyperfine_caps_t2(self, ud_map):
        assert ud_map.values.max() <= 2.01e-6 * (1 + 1e-9)
        # the maximum sits near the null direction of the gradient matrix
        assert 1.5 < extremal_ratio(ud_map) < 3.4

    def test_census_of_uniform_dipole(self, ud_map):
        result = census(ud_map)
        assert not result.degenerate
        assert result.counts == (2, 2, 2)
        assert euler_check(result)

    def test_include_t1_only_lowers_t2(self, device, small_resolution):
        models = calibrated(CHARGE_CONFIGURATIONS[0], device)
        plain = sweep(Quantity.T2, models, device, small_resolution)
        folded = sweep(Quantity.T2, models, device, small_resolution, include_t1_in_t2=True)
        assert np.all(folded.values <= plain.values)
        np.testing.assert_allclose(folded.values, plain.values, rtol=1e-6)

    def test_t1_map_without_relaxation_is_no_decay(self, device, small_resolution):
        amap = sweep(Quantity.T1, [HyperfineModel()], device, small_resolution)
        assert np.all(np.isinf(amap.values))

    def test_ewjn_anisotropy_grows_as_sigma_drops(self, device, small_resolution):
        ratios = [
            extremal_ratio(sweep(Quantity.T1, [EWJNModel()], device.with_sigma(s), small_resolution))
            for s in (2e8, 2e7, 2e6)
        ]
        assert ratios[0] < ratios[1] < ratios[2]
        assert ratios[0] == pytest.approx(1.5, rel=0.01)

    def test_ewjn_census_at_low_conductivity(self, device, small_resolution):
        amap = sweep(Quantity.T1, [EWJNModel()], device.with_sigma(2e6), small_resolution)
        result = census(amap)
        assert result.counts == (2, 2, 2)
        assert euler_check(result)

    def test_cluster_trap_is_degenerate(self, device, small_resolution, caplog):
        models = calibrated(CHARGE_CONFIGURATIONS[5], device)
        amap = sweep(Quantity.T2, models, device, small_resolution)
        with caplog.at_level(logging.WARNING):
            result = census(amap)
        assert result.degenerate
        assert result.reasons
        assert "degenerate" in caplog.text
        assert euler_check(result)

    def test_recalibrated_map_depends_on_tau_only_across_regimes(self, device, small_resolution):
        def t2_map(tau):
            models = calibrated(UniformDipoleModel(fit=True, tau_s=tau), device)
            return sweep(Quantity.T2, models, device, small_resolution).values

        def change(a, b):
            return float(np.max(np.abs(a / b - 1.0)))

        # tau far above T2 on both sides: static regime
        assert change(t2_map(1e-1), t2_map(1e-2)) < 1e-3
        # 10 ns is motional narrowing, 100 us is static
        assert change(t2_map(1e-8), t2_map(1e-4)) > 0.05

    def test_cluster_trap_is_more_anisotropic_than_uniform_trap(self, device, small_resolution):
        ct = sweep(Quantity.T2, calibrated(CHARGE_CONFIGURATIONS[5], device), device, small_resolution)
        ut = sweep(Quantity.T2, calibrated(CHARGE_CONFIGURATIONS[1], device), device, small_resolution)
        assert extremal_ratio(ct) > extremal_ratio(ut)


class TestCensus:

    def test_distinct_eigenvalues(self, small_resolution):
        amap = quadratic_map(np.diag([1.0, 2.0, 3.0]), small_resolution)
        result = census(amap)
        assert result.counts == (2, 2, 2)
        assert not result.degenerate
        assert euler_check(result)
        assert sorted(result.maxima) == [(0.0, 0.0), (pytest.approx(math.pi), 0.0)]

    def test_minima_locations(self, small_resolution):
        amap = quadratic_map(np.diag([1.0, 2.0, 3.0]), small_resolution)
        minima = sorted(argmin_locations(amap))
        assert minima[0] == (pytest.approx(math.pi / 2), pytest.approx(0.0))
        assert minima[1] == (pytest.approx(math.pi / 2), pytest.approx(math.pi))

    def test_constant_map_is_degenerate(self, small_resolution):
        theta, phi = direction_grid(small_resolution)
        amap = AnisotropyMap(theta, phi, np.full((len(theta), len(phi)), 1e-6), Quantity.T2)
        result = census(amap)
        assert result.degenerate
        assert result.flagged_cells

    def test_constant_map_has_no_minimum_location(self, small_resolution):
        theta, phi = direction_grid(small_resolution)
        amap = AnisotropyMap(theta, phi, np.full((len(theta), len(phi)), 1e-6), Quantity.T2)
        assert argmin_locations(amap) == []

    def test_ring_of_minima_is_degenerate(self, small_resolution):
        amap = quadratic_map(np.diag([1.0, 0.0, 0.0]), small_resolution)
        assert census(amap).degenerate

    def test_euler_check(self):
        assert euler_check(CriticalPointCensus(n_max=2, n_min=2, n_saddle=2))
        assert not euler_check(CriticalPointCensus(n_max=1, n_min=1, n_saddle=2))
        assert euler_check(CriticalPointCensus(n_max=1, n_min=1, n_saddle=2, degenerate=True))

    def test_extremal_ratio_skips_no_decay(self, small_resolution, caplog):
        amap = quadratic_map(np.diag([1.0, 2.0, 4.0]), small_resolution)
        values = amap.values.copy()
        values[5, 5] = math.inf
        patched = AnisotropyMap(amap.theta_grid, amap.phi_grid, values, Quantity.T2)
        with caplog.at_level(logging.WARNING):
            assert extremal_ratio(patched) == pytest.approx(4.0)
        assert "no-decay" in caplog.text

    def test_extremal_ratio_needs_finite_values(self, small_resolution):
        theta, phi = direction_grid(small_resolution)
        amap = AnisotropyMap(theta, phi, np.full((len(theta), len(phi)), math.inf), Quantity.T1)
        with pytest.raises(InvalidArgumentError):
            extremal_ratio(amap)

    def test_antipodal_needs_even_phi(self):
        amap = quadratic_map(np.eye(3), Resolution(n_theta=9, n_phi=9))
        with pytest.raises(InvalidArgumentError):
            antipodal_mismatch(amap)

    def test_rotated_quadratic(self, small_resolution):
        c, s = math.cos(0.7), math.sin(0.7)
        rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        c, s = math.cos(1.1), math.sin(1.1)
        ry = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        rotation = rz @ ry
        amap = quadratic_map(rotation @ np.diag([1.0, 2.0, 3.0]) @ rotation.T, small_resolution)
        result = census(amap)
        assert result.counts == (2, 2, 2)
        assert not result.degenerate
        step = math.pi / 36
        for theta, phi in result.minima:
            n = FieldDirection(theta, phi).unit_vector()
            assert abs(n @ rotation[:, 0]) > math.cos(1.5 * step)

    @pytest.mark.parametrize("factor", [2.0**-30, 2.0**20, 3.7])
    def test_positive_rescaling_keeps_census(self, device, small_resolution, factor):
        amap = sweep(Quantity.T2, calibrated(CHARGE_CONFIGURATIONS[1], device), device, small_resolution)
        scaled = AnisotropyMap(amap.theta_grid, amap.phi_grid, factor * amap.values, amap.quantity)
        before, after = census(amap), census(scaled)
        assert after.counts == before.counts
        assert after.degenerate == before.degenerate
        if math.log2(factor).is_integer():
            assert after.maxima == before.maxima
            assert after.minima == before.minima
            assert after.saddles == before.saddles

    def test_counts_obey_euler_without_filtering(self, device, small_resolution):
        amap = sweep(Quantity.T2, calibrated(CHARGE_CONFIGURATIONS[2], device), device, small_resolution)
        result = census(amap, persistence=0.0, merge_radius=0.0)
        assert result.n_max + result.n_min == result.n_saddle + 2

    def test_kinked_ridge_is_degenerate(self, small_resolution, caplog):
        theta, phi = direction_grid(small_resolution)
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        axis = np.array([0.6, 0.0, 0.8])
        values = 1.0 - np.abs(unit_vectors(tt, pp) @ axis)
        with caplog.at_level(logging.WARNING):
            result = census(AnisotropyMap(theta, phi, values, Quantity.T2))
        assert result.degenerate
        assert result.flagged_cells
        assert "degenerate" in caplog.text


class TestCensusResolution:
    """Counts of the nondegenerate maps agree between 91x180 and 181x360"""

    COARSE = Resolution(n_theta=91, n_phi=180)
    FINE = Resolution(n_theta=181, n_phi=360)

    @staticmethod
    def _sweep(name, device, resolution):
        if name == "ewjn_2e7":
            return sweep(Quantity.T1, [EWJNModel()], device.with_sigma(2e7), resolution)
        model = {"ut": CHARGE_CONFIGURATIONS[1], "cd_x": CHARGE_CONFIGURATIONS[2]}[name]
        return sweep(Quantity.T2, calibrated(model, device), device, resolution)

    @pytest.mark.parametrize("name", ["ut", "cd_x", "ewjn_2e7"])
    def test_counts_stable(self, device, name):
        coarse = census(self._sweep(name, device, self.COARSE))
        fine = census(self._sweep(name, device, self.FINE))
        assert not coarse.degenerate, coarse.reasons
        assert not fine.degenerate, fine.reasons
        assert coarse.counts == fine.counts == (2, 2, 2)

    def test_cluster_trap_stays_degenerate(self, device):
        models = calibrated(CHARGE_CONFIGURATIONS[5], device)
        assert census(sweep(Quantity.T2, models, device, self.COARSE)).degenerate
