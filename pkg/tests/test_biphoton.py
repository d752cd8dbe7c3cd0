import numpy as np
import pytest

from conftest import gaussian_amplitude
from homspec.biphoton import (BiphotonAmplitude, CrystalSpec, DeltaAmplitude,
                              FrequencyGrid, GridAxis, GridCoverageError,
                              PumpSpec, build_jsa, default_grid,
                              delta_limit_amplitude, entanglement_time,
                              export_intensity, from_frequency_values,
                              pair_amplitude_point, to_time_domain)

PUMP = PumpSpec(omega_p=2.9, sigma_p=0.5)
CRYSTAL = CrystalSpec(omega_a=1.5, omega_b=1.4, T_a=10.0, T_b=-14.0)


@pytest.fixture(scope="module")
def jsa():
    return build_jsa(PUMP, CRYSTAL, 0.0, default_grid(PUMP, CRYSTAL, n=256))


class TestSpecs:
    def test_pump_validation(self):
        with pytest.raises(ValueError):
            PumpSpec(omega_p=2.0, sigma_p=0.0)
        with pytest.raises(ValueError):
            PumpSpec(omega_p=-1.0, sigma_p=0.5)

    def test_degenerate_crystal_rejected(self):
        with pytest.raises(ValueError):
            CrystalSpec(omega_a=1.0, omega_b=1.0, T_a=5.0, T_b=5.0)

    def test_pointwise_value_degenerate_symmetric_sum(self):
        # both phase-matching factors are 1 at the beam centers
        pump = PumpSpec(omega_p=3.0, sigma_p=0.4)
        crystal = CrystalSpec(omega_a=1.5, omega_b=1.5, T_a=50.0, T_b=30.0)
        val = pair_amplitude_point(pump, crystal, 0.0, 1.5, 1.5)
        assert val == pytest.approx(np.sqrt(2.0) * 1.0)

    def test_pointwise_antisymmetric_diagonal_zero(self):
        pump = PumpSpec(omega_p=3.0, sigma_p=0.4)
        crystal = CrystalSpec(omega_a=1.5, omega_b=1.5, T_a=50.0, T_b=30.0)
        assert pair_amplitude_point(pump, crystal, np.pi, 1.55, 1.55) == 0.0

    def test_pointwise_nondegenerate_value(self):
        # independent transcription of the amplitude formula
        pump = PumpSpec(omega_p=2.9, sigma_p=0.3)
        crystal = CrystalSpec(omega_a=1.5, omega_b=1.4, T_a=50.0, T_b=30.0)
        wa, wb = 1.6, 1.2

        def sinc(x):
            return 1.0 if x == 0 else np.sin(x) / x

        envelope = np.exp(-((wa + wb - 2.9) / 0.3) ** 2)
        direct = envelope * sinc((wa - 1.5) * 50.0 + (wb - 1.4) * 30.0)
        swapped = envelope * sinc((wb - 1.5) * 50.0 + (wa - 1.4) * 30.0)
        expected = (direct + swapped) / np.sqrt(2.0)
        got = pair_amplitude_point(pump, crystal, 0.0, wa, wb)
        assert got == pytest.approx(expected, rel=1e-12)


class TestBuildJsa:
    def test_normalized_both_domains(self, jsa):
        assert jsa.frequency_norm() == pytest.approx(1.0, abs=1e-9)
        assert jsa.time_norm() == pytest.approx(1.0, abs=1e-6)

    def test_exchange_symmetry_exact(self, jsa):
        assert np.array_equal(jsa.values, jsa.values.T)

    def test_antisymmetric_at_pi(self):
        # longer group delays: the antisymmetric amplitude has fatter
        # spectral tails and needs them to decay inside a 256-point span
        crystal = CrystalSpec(omega_a=1.5, omega_b=1.4, T_a=25.0, T_b=-35.0)
        amp = build_jsa(PUMP, crystal, np.pi,
                        default_grid(PUMP, crystal, n=256, theta=np.pi))
        assert np.array_equal(amp.values, -amp.values.T)
        assert np.all(np.diag(amp.values) == 0)

    def test_coverage_refusal(self):
        tiny = GridAxis(1.45, 0.01, 16)
        with pytest.raises(GridCoverageError):
            build_jsa(PUMP, CRYSTAL, 0.0, FrequencyGrid(tiny, tiny))

    def test_default_grid_reports_needed_size(self):
        crystal = CrystalSpec(omega_a=1.5, omega_b=1.4, T_a=30.0, T_b=50.0)
        pump = PumpSpec(omega_p=2.9, sigma_p=0.3)
        with pytest.raises(GridCoverageError, match="increase the grid"):
            default_grid(pump, crystal, n=256)


class TestTimeDomain:
    def test_shift_property_exact_on_lattice(self, jsa):
        k = 16
        shifted = to_time_domain(jsa, s=k * jsa.dt1)
        assert np.max(np.abs(shifted.time_values[k:] - jsa.time_values[:-k])) < 1e-9

    def test_delay_arm_b(self, jsa):
        k = 8
        shifted = to_time_domain(
            BiphotonAmplitude(theta=jsa.theta, s=0.0, delay_arm="b",
                              omega_a=jsa.omega_a, omega_b=jsa.omega_b,
                              values=jsa.values), s=k * jsa.dt2)
        base = to_time_domain(
            BiphotonAmplitude(theta=jsa.theta, s=0.0, delay_arm="b",
                              omega_a=jsa.omega_a, omega_b=jsa.omega_b,
                              values=jsa.values))
        assert np.max(np.abs(shifted.time_values[:, k:]
                             - base.time_values[:, :-k])) < 1e-9

    def test_gaussian_transform_closed_form(self):
        # separable Gaussian: per-axis transform (sig/sqrt2) e^{-ict-sig^2t^2/4}
        c, sig = 1.0, 0.4
        w = np.linspace(c - 2.0, c + 2.0, 128)
        wa, wb = w[:, None], w[None, :]
        amp = from_frequency_values(w, w, np.exp(-((wa - c) / sig) ** 2
                                                 - ((wb - c) / sig) ** 2))
        t1, t2 = amp.t1[:, None], amp.t2[None, :]
        ana = (sig / np.sqrt(2.0)) ** 2 * np.exp(-1j * c * (t1 + t2)) \
            * np.exp(-sig ** 2 * (t1 ** 2 + t2 ** 2) / 4.0)
        ana /= np.sqrt(np.sum(np.abs(ana) ** 2) * amp.dt1 * amp.dt2)
        err = np.max(np.abs(ana - amp.time_values)) / np.max(np.abs(ana))
        assert err < 1e-6

    def test_interpolation_exact_on_nodes(self, jsa):
        vals = jsa.time_value(jsa.t1[100], jsa.t2[200])
        assert abs(vals - jsa.time_values[100, 200]) < 1e-12

    def test_interpolation_accurate_between_nodes(self):
        amp = gaussian_amplitude()
        mid = amp.t1.size // 2
        xn, yn = amp.t1[mid + 3], amp.t2[mid - 2]
        x = xn + 0.37 * amp.dt1
        y = yn + 0.61 * amp.dt2
        # analytic reference for the correlated Gaussian used by the fixture
        c, sp, sm = 1.0, 0.3, 0.5

        def analytic(t1, t2):
            return np.exp(-sp ** 2 * (t1 + t2) ** 2 / 16.0
                          - sm ** 2 * (t1 - t2) ** 2 / 16.0
                          - 1j * c * (t1 + t2))

        scale = analytic(x, y) / amp.time_value(x, y)
        scale_n = analytic(xn, yn) / amp.time_value(xn, yn)
        # envelope-curvature-limited; the raw-carrier interpolation this
        # guards against is wrong by order one
        assert abs(scale / scale_n - 1.0) < 2e-3

    def test_alias_guard(self):
        w = np.linspace(0.0, 1.0, 32)
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(32, 32))
        with pytest.raises(GridCoverageError, match="wraps"):
            from_frequency_values(w, w, vals)


class TestDeltaLimit:
    def test_on_support_value(self):
        assert delta_limit_amplitude(5.0, 5.0, 0.0, 0.5) == pytest.approx(2.0)

    def test_off_support(self):
        assert delta_limit_amplitude(5.0, 0.0, 2.0, 0.5) == 0.0

    def test_riemann_mass(self):
        u = np.arange(-40.0, 40.0, 0.5)
        total = delta_limit_amplitude(u, 0.0, 2.0, 0.5).sum() * 0.5
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_value_one_convention(self):
        assert delta_limit_amplitude(1.0, 1.0, 0.0, 0.5,
                                     convention="value_one") == 1.0

    def test_symmetric_only_without_delay(self):
        d0 = DeltaAmplitude(s=0.0, spacing=0.5)
        assert d0.time_value(1.2, 1.3) == d0.time_value(1.3, 1.2)
        d1 = DeltaAmplitude(s=2.0, spacing=0.5)
        assert d1.time_value(3.0, 1.0) != d1.time_value(1.0, 3.0)


class TestEntanglementTime:
    def test_delta_limit_width_is_lattice_limited(self):
        # the discrete delta placed on a lattice has no intrinsic width
        from types import SimpleNamespace

        t = np.arange(-20.0, 20.0, 0.5)
        vals = delta_limit_amplitude(t[:, None], t[None, :], 0.0, 0.5)
        amp = SimpleNamespace(t1=t, t2=t, time_values=vals)
        assert entanglement_time(amp) <= 0.5

    def test_gaussian_moment(self):
        amp = gaussian_amplitude(sigma_diff=0.5)
        # anti-diagonal RMS width of the correlated Gaussian is 2/sigma_diff
        assert entanglement_time(amp) == pytest.approx(2.0 / 0.5, rel=1e-6)

    def test_width_scales_with_group_delays(self):
        pump = PumpSpec(omega_p=2.9, sigma_p=0.5)
        c1 = CrystalSpec(omega_a=1.5, omega_b=1.4, T_a=5.0, T_b=-7.0)
        c2 = CrystalSpec(omega_a=1.5, omega_b=1.4, T_a=10.0, T_b=-14.0)
        a1 = build_jsa(pump, c1, 0.0, default_grid(pump, c1, n=256))
        a2 = build_jsa(pump, c2, 0.0, default_grid(pump, c2, n=256))
        ratio = entanglement_time(a2) / entanglement_time(a1)
        assert ratio == pytest.approx(2.0, rel=0.15)


def test_export_intensity(tmp_path, jsa):
    path = tmp_path / "jsi.dat"
    export_intensity(jsa, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    data = np.loadtxt(path)
    assert data.shape == jsa.values.shape
    assert np.allclose(data, np.abs(jsa.values) ** 2, atol=1e-10)
