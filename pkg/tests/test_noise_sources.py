import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import dblquad, quad, tplquad

from src.core import units
from src.core.exceptions import InvalidArgumentError, SingularSourceError
from src.core.models import (
    ClusterDipoleModel,
    ClusterTrapModel,
    NoiseModelType,
    UniformDipoleModel,
    UniformTrapModel,
)
from src.core.noise_sources import (
    NoiseSourceFactory,
    charge_uniform_efield_weights,
    cluster_efield_tensor,
    cluster_efield_weights,
    derive_hyperfine_rate,
    ewjn_electric_tensor,
    ewjn_magnetic_tensor,
    hyperfine_rate,
    lorentzian_spectrum,
    temporal_factor,
)
from src.core.spectra import SERIES_CUTOFF, Lorentzian, SpectralShapeFactory


@pytest.fixture
def lorentzian():
    return SpectralShapeFactory.get_shape()


class TestLorentzian:

    def test_density_integrates_to_two_pi(self, lorentzian):
        tau = 1.0
        total, _ = quad(lambda w: lorentzian.density(tau, w), -np.inf, np.inf)
        assert total == pytest.approx(2 * math.pi, rel=1e-8)

    def test_density_rejects_non_positive_tau(self, lorentzian):
        with pytest.raises(InvalidArgumentError):
            lorentzian.density(0.0, 1.0)

    @pytest.mark.parametrize("x", [0.01, 0.1, 1.0, 10.0, 1000.0])
    def test_closed_form_matches_quadrature(self, lorentzian, x):
        tau = 2e-6
        closed = lorentzian.temporal_factor(tau, x * tau)
        numeric = lorentzian.temporal_factor_numeric(tau, x * tau)
        assert numeric == pytest.approx(closed, rel=1e-6)

    def test_limits(self, lorentzian):
        tau = 1.0
        # static: pi t^2; white: 2 pi tau t
        assert lorentzian.temporal_factor(tau, 1e-4) == pytest.approx(math.pi * 1e-8, rel=1e-4)
        assert lorentzian.temporal_factor(tau, 1e4) == pytest.approx(2 * math.pi * 1e4, rel=1e-3)

    def test_series_branch_is_continuous(self, lorentzian):
        below = lorentzian.temporal_factor(1.0, SERIES_CUTOFF * (1 - 1e-9))
        above = lorentzian.temporal_factor(1.0, SERIES_CUTOFF * (1 + 1e-9))
        assert above == pytest.approx(below, rel=1e-6)

    def test_module_helpers_use_the_lorentzian(self):
        tau = 3e-6
        assert lorentzian_spectrum(tau, 0.0) == pytest.approx(2 * tau)
        assert lorentzian_spectrum(tau, 1 / tau) == pytest.approx(tau)
        assert lorentzian_spectrum(tau, 10 / tau) == pytest.approx(2 * tau / 101)
        assert temporal_factor(tau, tau) == pytest.approx(2 * math.pi * tau**2 * math.exp(-1))

    def test_zero_time(self, lorentzian):
        assert lorentzian.temporal_factor(1e-6, 0.0) == 0.0
        assert lorentzian.temporal_factor_numeric(1e-6, 0.0) == 0.0

    def test_negative_time_rejected(self, lorentzian):
        with pytest.raises(InvalidArgumentError):
            lorentzian.temporal_factor(1e-6, -1.0)
        with pytest.raises(InvalidArgumentError):
            lorentzian.temporal_factor_numeric(1e-6, -1.0)

    @given(
        st.floats(min_value=1e-9, max_value=1e3),
        st.floats(min_value=0.0, max_value=1e4),
        st.floats(min_value=1.01, max_value=10.0),
    )
    def test_monotone_in_time(self, tau, t, factor):
        shape = Lorentzian()
        assert shape.temporal_factor(tau, t * factor) >= shape.temporal_factor(tau, t)

    def test_vectorised(self, lorentzian):
        taus = np.array([[1e-6, 1e-5]])
        t = np.array([[1e-6], [2e-6]])
        values = lorentzian.temporal_factor(taus, t)
        assert values.shape == (2, 2)
        assert values[1, 0] == pytest.approx(lorentzian.temporal_factor(1e-6, 2e-6))


class TestEWJN:

    def test_case_study_amplitudes(self, device):
        electric = ewjn_electric_tensor(device, device.omega_op)
        magnetic = ewjn_magnetic_tensor(device, device.omega_op)
        assert electric.entries[2, 2] == pytest.approx(9.92e-21, rel=5e-3)
        assert magnetic.entries[2, 2] == pytest.approx(2.025e-14, rel=5e-3)

    def test_half_space_pattern(self, device):
        for tensor in (
            ewjn_electric_tensor(device, device.omega_op),
            ewjn_magnetic_tensor(device, device.omega_op),
        ):
            zz = tensor.entries[2, 2]
            np.testing.assert_allclose(tensor.entries, np.diag([0.5, 0.5, 1.0]) * zz)

    def test_conductivity_scaling(self, device):
        low = device.with_sigma(2e6)
        omega = device.omega_op
        assert ewjn_magnetic_tensor(low, omega).entries[2, 2] == pytest.approx(
            ewjn_magnetic_tensor(device, omega).entries[2, 2] / 100
        )
        assert ewjn_electric_tensor(low, omega).entries[2, 2] == pytest.approx(
            ewjn_electric_tensor(device, omega).entries[2, 2] * 100
        )

    @pytest.mark.parametrize("omega", [0.0, -1.0])
    def test_non_positive_frequency_rejected(self, device, omega):
        with pytest.raises(InvalidArgumentError):
            ewjn_electric_tensor(device, omega)
        with pytest.raises(InvalidArgumentError):
            ewjn_magnetic_tensor(device, omega)


class TestChargeWeights:

    def test_uniform_dipole_weights(self, device):
        model = UniformDipoleModel(rho_v_per_cm3=1e13)
        weights = charge_uniform_efield_weights(model, device)
        p0 = units.to_internal(model.p0_Cm, "C m")
        expected = math.pi * 1e13 * p0**2 / 12 * (1 / device.l**3 - 1 / device.d**3)
        assert weights.s_xx == pytest.approx(expected)
        assert weights.s_yy == pytest.approx(expected)
        assert weights.s_xy == 0.0

    def test_uniform_dipole_needs_thin_oxide(self, device):
        thick = replace(device, l=2 * device.d)
        with pytest.raises(InvalidArgumentError):
            charge_uniform_efield_weights(UniformDipoleModel(rho_v_per_cm3=1.0), thick)

    def test_uniform_trap_anisotropy(self, device):
        weights = charge_uniform_efield_weights(UniformTrapModel(rho_a_per_cm2=1e8), device)
        ratio = (9 * math.pi + 6) / (9 * math.pi - 6)
        assert weights.s_xx / weights.s_yy == pytest.approx(ratio)
        assert weights.s_xy == 0.0

    def test_cluster_dipole_on_axis(self):
        model = ClusterDipoleModel(position_nm=(0, 0, 50))
        weights = cluster_efield_weights(model)
        p0 = units.to_internal(model.p0_Cm, "C m")
        r = 50e-7
        np.testing.assert_allclose(weights, np.diag([1.0, 1.0, 4.0]) * p0**2 / (3 * r**6))

    def test_cluster_trap_overhead_has_no_in_plane_field(self):
        weights = cluster_efield_weights(ClusterTrapModel(position_nm=(0, 0, 137)))
        np.testing.assert_allclose(weights[:2, :], 0.0, atol=0.0)
        assert weights[2, 2] > 0.0

    def test_cluster_trap_is_rank_one(self):
        weights = cluster_efield_weights(ClusterTrapModel(position_nm=(37, 0, 137)))
        assert np.linalg.matrix_rank(weights) == 1
        np.testing.assert_allclose(weights, weights.T)

    def test_cluster_on_qubit_is_singular(self):
        model = ClusterDipoleModel.model_construct(position_nm=(0.0, 0.0, 0.0))
        with pytest.raises(SingularSourceError):
            cluster_efield_weights(model)

    def test_cluster_at_origin_fails_validation(self):
        with pytest.raises(ValueError):
            ClusterDipoleModel(position_nm=(0, 0, 0))

    def test_cluster_tensor_carries_the_spectrum(self, lorentzian):
        model = ClusterDipoleModel(position_nm=(37, 0, 37), tau_s=1e-5)
        tensor = cluster_efield_tensor(model, 1e6)
        np.testing.assert_allclose(
            tensor.entries, cluster_efield_weights(model) * lorentzian.density(1e-5, 1e6)
        )


NM_INV3_PER_CM_INV3 = 1e21
NM_INV4_PER_CM_INV4 = 1e28


def _dipole_layer_xx(z_lo, z_hi):
    """<Ex Ex> per unit rho_v p0^2 of randomly oriented dipoles filling z_lo < z < z_hi, nm^-3"""
    def integrand(phi, rho, z):
        r2 = rho**2 + z**2
        x2 = (rho * math.cos(phi)) ** 2
        return rho * (3.0 * x2 / r2 + 1.0) / (3.0 * r2**3)

    value, _ = tplquad(
        integrand, z_lo, z_hi, 0.0, np.inf, 0.0, 2.0 * math.pi, epsabs=1e-30, epsrel=1e-5
    )
    return value


def _trap_plane(d, component):
    """Trap weights per unit rho_a p0^2 over the plane z = d, phi in [-pi/4, 5pi/4], nm^-4"""
    def integrand(phi, rho):
        x, y = rho * math.cos(phi), rho * math.sin(phi)
        a, b = {"xx": (x, x), "yy": (y, y), "xy": (x, y)}[component]
        return rho * 9.0 * d**2 * a * b / (rho**2 + d**2) ** 5

    value, _ = dblquad(
        integrand, 0.0, np.inf, -math.pi / 4, 5.0 * math.pi / 4, epsabs=1e-30, epsrel=1e-6
    )
    return value


class TestBruteForceWeights:

    def test_uniform_dipole_matches_integral_between_l_and_d(self, device):
        model = UniformDipoleModel(rho_v_per_cm3=1.0)
        p0_sq = units.to_internal(model.p0_Cm, "C m") ** 2
        closed = charge_uniform_efield_weights(model, device).s_xx / p0_sq
        l_nm = units.from_internal(device.l, "nm")
        d_nm = units.from_internal(device.d, "nm")
        brute = _dipole_layer_xx(l_nm, d_nm) * NM_INV3_PER_CM_INV3
        assert closed == pytest.approx(brute, rel=0.02)

    def test_uniform_dipole_oxide_layer_integral_differs(self, device):
        # integrating over the oxide itself, d - l < z < d, is far larger than the closed form
        model = UniformDipoleModel(rho_v_per_cm3=1.0)
        p0_sq = units.to_internal(model.p0_Cm, "C m") ** 2
        closed = charge_uniform_efield_weights(model, device).s_xx / p0_sq
        l_nm = units.from_internal(device.l, "nm")
        d_nm = units.from_internal(device.d, "nm")
        oxide = _dipole_layer_xx(d_nm - l_nm, d_nm) * NM_INV3_PER_CM_INV3
        assert oxide / closed > 10.0

    def test_uniform_trap_matches_plane_integral(self, device):
        model = UniformTrapModel(rho_a_per_cm2=1.0)
        p0_sq = units.to_internal(model.p0_Cm, "C m") ** 2
        weights = charge_uniform_efield_weights(model, device)
        d_nm = units.from_internal(device.d, "nm")
        scale = _trap_plane(d_nm, "xx")
        assert weights.s_xx / p0_sq == pytest.approx(scale * NM_INV4_PER_CM_INV4, rel=0.02)
        assert weights.s_yy / p0_sq == pytest.approx(
            _trap_plane(d_nm, "yy") * NM_INV4_PER_CM_INV4, rel=0.02
        )
        assert abs(_trap_plane(d_nm, "xy")) < 1e-6 * scale


class TestNoiseSourceFactory:

    def test_all_charge_blocks_registered(self):
        for model_type in (
            NoiseModelType.UNIFORM_DIPOLE,
            NoiseModelType.UNIFORM_TRAP,
            NoiseModelType.CLUSTER_DIPOLE,
            NoiseModelType.CLUSTER_TRAP,
        ):
            assert NoiseSourceFactory.get_block(model_type).model_type == model_type

    def test_ewjn_has_no_block(self):
        with pytest.raises(ValueError):
            NoiseSourceFactory.get_block(NoiseModelType.EWJN)

    @pytest.mark.parametrize(
        "model",
        [
            UniformDipoleModel(rho_v_per_cm3=2e13),
            UniformTrapModel(rho_a_per_cm2=5e7),
            ClusterDipoleModel(position_nm=(37, 0, 37)),
            ClusterTrapModel(position_nm=(0, 37, 137)),
        ],
    )
    def test_scale_strength_scales_weights_linearly(self, device, model):
        block = NoiseSourceFactory.get_block(model.type)
        scaled = block.scale_strength(model, 3.0)
        np.testing.assert_allclose(
            NoiseSourceFactory.electric_weights(scaled, device),
            3.0 * NoiseSourceFactory.electric_weights(model, device),
            rtol=1e-12,
        )

    def test_unset_density_counts_as_one(self, device):
        block = NoiseSourceFactory.get_block(NoiseModelType.UNIFORM_DIPOLE)
        model = UniformDipoleModel(fit=True)
        assert block.strength(model) == 1.0
        assert block.scale_strength(model, 2.5e13).rho_v_per_cm3 == pytest.approx(2.5e13)


def test_hyperfine_rate_from_measured_t2_star():
    rate = derive_hyperfine_rate(1.83e-6, 20.4e-6)
    assert 1 / rate == pytest.approx(2.01e-6, rel=1e-3)
    assert hyperfine_rate() == pytest.approx(1 / 2.01e-6)
