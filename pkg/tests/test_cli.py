import numpy as np
import pytest
import yaml

from homspec.cli import ConfigError, load_config, main, run, serialize_config
from homspec.signal import SignalGrid

BASE_CONFIG = {
    "system": {
        "levels": [
            {"label": "g0", "manifold": "g", "energy_rad_per_fs": 0.0},
            {"label": "e0", "manifold": "e", "energy_rad_per_fs": 0.8},
        ],
        "dipoles_ge": [[1.0]],
        "dephasing": {"default_per_fs": 0.25},
    },
    "pump": {"omega_p_rad_per_fs": 1.6, "sigma_p_rad_per_fs": 0.5},
    "crystal": {"omega_a_rad_per_fs": 0.85, "omega_b_rad_per_fs": 0.75,
                "T_a_fs": 10.0, "T_b_fs": -14.0},
    "scan": {"tau_fs": [0.0, 2.0], "T_fs": [1.0], "s_fs": [3.0]},
    "grid": {"n": 192, "half_span_rad_per_fs": 6.0},
    "quadrature": {"step_fs": 0.5},
    "mode": "full",
}


def write_config(tmp_path, overrides=None, drop=None):
    import copy

    data = copy.deepcopy(BASE_CONFIG)
    for path, value in (overrides or {}).items():
        node = data
        keys = path.split(".")
        for key in keys[:-1]:
            node = node[key]
        node[keys[-1]] = value
    for path in drop or []:
        node = data
        keys = path.split(".")
        for key in keys[:-1]:
            node = node[key]
        del node[keys[-1]]
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump(data))
    return cfg


class TestLoadConfig:
    def test_minimal_config_defaults(self, tmp_path):
        config = load_config(write_config(tmp_path))
        assert config.theta == 0.0
        assert config.delay_arm == "a"
        assert config.hom_t == pytest.approx(1 / np.sqrt(2))
        assert config.mode == "full"
        assert config.output == "signal.dat"
        assert np.array_equal(config.tau_axis, [0.0, 2.0])

    def test_negative_dephasing_names_field(self, tmp_path):
        cfg = write_config(tmp_path,
                           {"system.dephasing.default_per_fs": -0.1})
        with pytest.raises(ConfigError, match="dephasing"):
            load_config(cfg)

    def test_missing_pump_bandwidth_names_field(self, tmp_path):
        cfg = write_config(tmp_path, drop=["pump.sigma_p_rad_per_fs"])
        with pytest.raises(ConfigError, match=r"pump\.sigma_p_rad_per_fs"):
            load_config(cfg)

    def test_bad_axis_named(self, tmp_path):
        cfg = write_config(tmp_path, {"scan.tau_fs": [2.0, 1.0]})
        with pytest.raises(ConfigError, match=r"scan\.tau_fs"):
            load_config(cfg)

    def test_axis_range_forms(self, tmp_path):
        cfg = write_config(tmp_path, {
            "scan.tau_fs": {"start": 0.0, "stop": 2.0, "num": 5},
            "scan.T_fs": {"start": 0.0, "stop": 1.0, "step": 0.5},
        })
        config = load_config(cfg)
        assert np.allclose(config.tau_axis, np.linspace(0, 2, 5))
        assert np.allclose(config.T_axis, [0.0, 0.5, 1.0])

    def test_round_trip(self, tmp_path):
        config = load_config(write_config(tmp_path))
        echoed = tmp_path / "echo.yaml"
        echoed.write_text(serialize_config(config))
        again = load_config(echoed)
        assert np.array_equal(config.tau_axis, again.tau_axis)
        assert config.system.dephasing_default == again.system.dephasing_default
        assert config.quad_step == again.quad_step
        assert [lv.label for lv in config.system.levels] == \
            [lv.label for lv in again.system.levels]

    def test_complex_dipole_entries(self, tmp_path):
        cfg = write_config(tmp_path, {"system.dipoles_ge": [[[0.6, 0.8]]]})
        config = load_config(cfg)
        assert config.system.dipoles_ge[0, 0] == pytest.approx(0.6 + 0.8j)


class TestRun:
    def test_run_writes_grid_and_sidecar(self, tmp_path):
        out = tmp_path / "out.dat"
        cfg = write_config(tmp_path, {"output": str(out)})
        assert run(load_config(cfg)) == 0
        grid = SignalGrid.load(out)
        assert grid.values.shape == (2, 1, 1)
        assert np.all(np.isfinite(grid.values))
        sidecar = yaml.safe_load((tmp_path / "out.dat.meta").read_text())
        assert "config" in sidecar and "wall_time_s" in sidecar
        assert sidecar["system_hash"] == grid.meta["system_hash"]

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "out.dat"
        cfg = write_config(tmp_path, {"output": str(out)})
        run(load_config(cfg))
        first = out.read_bytes()
        run(load_config(cfg))
        assert out.read_bytes() == first

    def test_single_point_matches_api(self, tmp_path):
        from homspec.biphoton import FrequencyGrid, GridAxis, build_jsa
        from homspec.model import LiouvilleOperatorSet
        from homspec.pathways import HomSpec
        from homspec.signal import coincidence, default_quadrature

        out = tmp_path / "out.dat"
        cfg = write_config(tmp_path, {"output": str(out),
                                      "scan.tau_fs": [1.0]})
        config = load_config(cfg)
        run(config)
        grid = SignalGrid.load(out)
        ops = LiouvilleOperatorSet(config.system)
        axis = GridAxis(0.8, 12.0 / 192, 192)
        amp = build_jsa(config.pump, config.crystal, 0.0,
                        FrequencyGrid(axis, axis), s=3.0)
        q = default_quadrature(ops, amp, step=0.5)
        expected = coincidence(1.0, 1.0, 3.0, amp, ops, q, hom=HomSpec(T=1.0))
        assert grid.values[0, 0, 0] == pytest.approx(expected, rel=1e-12)


class TestMain:
    def test_validate_ok(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["validate", "--config", str(cfg)]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_validate_reports_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, drop=["pump.sigma_p_rad_per_fs"])
        assert main(["validate", "--config", str(cfg)]) == 2
        assert "pump.sigma_p_rad_per_fs" in capsys.readouterr().err

    def test_pathways_dump(self, capsys):
        assert main(["pathways", "dump"]) == 0
        out = capsys.readouterr().out
        assert len([ln for ln in out.splitlines() if ln.strip()]) >= 21

    def test_short_te_domain_guard(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "mode": "short_Te",
            "scan.s_fs": [0.0],
            "output": str(tmp_path / "o.dat"),
        })
        code = main(["run", "--config", str(cfg)])
        assert code == 1
        assert "s > 0" in capsys.readouterr().err

    def test_run_mode_override(self, tmp_path):
        out = tmp_path / "o.dat"
        cfg = write_config(tmp_path, {"output": str(out)})
        assert main(["run", "--config", str(cfg), "--mode", "bs_removed",
                     "--workers", "2"]) == 0
        assert SignalGrid.load(out).mode == "bs_removed"
