import json

import numpy as np
import pytest

from photonmem import TimeGrid, mode_norm2
from photonmem.cli import (
    ConfigError,
    RunConfig,
    _parse_piecewise_control,
    make_reference_input,
    main,
    parse_config_file,
)


class TestReferenceInput:
    def test_unit_energy(self):
        mode = make_reference_input(20.0)
        assert mode_norm2(mode) == pytest.approx(1.0, abs=1e-10)

    def test_endpoints_exactly_zero(self):
        mode = make_reference_input(13.0)
        assert mode.samples[0] == 0.0
        assert mode.samples[-1] == 0.0

    def test_symmetric_about_midpoint(self):
        mode = make_reference_input(20.0, TimeGrid.linspace(0.0, 20.0, 1001))
        assert np.allclose(mode.samples, mode.samples[::-1], atol=1e-12)

    def test_positive_duration_required(self):
        with pytest.raises(ValueError):
            make_reference_input(-1.0)


class TestConfig:
    def test_parse_file(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("d = 2,20\n# comment\ndelta = 1.5  # inline\n")
        values = parse_config_file(cfg_file)
        assert values == {"d": "2,20", "delta": "1.5"}

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="optical_depht"):
            RunConfig({"optical_depht": "3"})

    def test_bad_value_named(self):
        with pytest.raises(ConfigError, match="'tol'"):
            RunConfig({"tol": "fast"})

    def test_d_list_validation(self):
        with pytest.raises(ConfigError):
            RunConfig({"d": "1,-3"}).d_list()

    def test_piecewise_control(self):
        grid = TimeGrid.linspace(0.0, 10.0, 11)
        ctrl = _parse_piecewise_control("0:0; 5:2; 10:1+1j", grid, "control")
        assert ctrl.samples[0] == 0.0
        assert ctrl.samples[5] == pytest.approx(2.0)
        assert ctrl.samples[-1] == pytest.approx(1.0 + 1.0j)

    def test_piecewise_control_errors(self):
        grid = TimeGrid.linspace(0.0, 1.0, 3)
        with pytest.raises(ConfigError, match="'control'"):
            _parse_piecewise_control("0=1", grid, "control")
        with pytest.raises(ConfigError):
            _parse_piecewise_control("0:not_a_number", grid, "control")


class TestCommands:
    def test_optimal_spinwave_outputs(self, tmp_path):
        out = tmp_path / "o"
        rc = main(["optimal-spinwave", "--d", "1,10,100", "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "optimal_spinwave_summary.json").read_text())
        etas = [r["eta_r_max"] for r in summary["results"]]
        assert etas == sorted(etas)
        for d in (1, 10, 100):
            csv = (out / f"spinwave_d{d}.csv").read_text().splitlines()
            assert csv[0] == "zeta,S"
            assert len(csv) == summary["metadata"]["grids"]["gauss_nodes"] + 1

    def test_deterministic_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["optimal-spinwave", "--d", "10", "--out", str(a)]) == 0
        assert main(["optimal-spinwave", "--d", "10", "--out", str(b)]) == 0
        for name in ("spinwave_d10.csv", "optimal_spinwave_summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_shape_controls_summary_consistent(self, tmp_path):
        out = tmp_path / "s"
        rc = main(["shape-controls", "--d", "10", "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "shape_controls_summary.json").read_text())
        spin = tmp_path / "o2"
        main(["optimal-spinwave", "--d", "10", "--out", str(spin)])
        eta = json.loads((spin / "optimal_spinwave_summary.json").read_text())["results"][0][
            "eta_r_max"
        ]
        assert summary["results"][0]["predicted_eta_s"] == pytest.approx(eta, abs=1e-9)
        header = (out / "control_d10.csv").read_text().splitlines()[0]
        assert header == "tau,re_omega,im_omega,re_omega_display,im_omega_display"

    def test_shape_controls_raman_regime_runs(self, tmp_path):
        out = tmp_path / "raman"
        rc = main(["shape-controls", "--d", "10", "--delta", "50", "--out", str(out)])
        assert rc == 0

    def test_fig2_display_units_ordering(self, tmp_path):
        # in sqrt(d/T) display units the mid-pulse control level decreases
        # with depth
        out = tmp_path / "f"
        assert main(["shape-controls", "--d", "1,10,100", "--out", str(out)]) == 0
        mids = {}
        for d in (1, 10, 100):
            rows = np.genfromtxt(out / f"control_d{d}.csv", delimiter=",", names=True)
            mag = np.hypot(rows["re_omega_display"], rows["im_omega_display"])
            mids[d] = mag[len(mag) // 2]
        assert mids[1] > mids[10] > mids[100]

    def test_curves_small_sweep(self, tmp_path):
        out = tmp_path / "c"
        rc = main([
            "curves", "--d-min", "1", "--d-max", "20", "--d-points", "4", "--out", str(out)
        ])
        assert rc == 0
        rows = np.genfromtxt(out / "curves.csv", delimiter=",", names=True)
        assert rows.shape == (4,)
        assert np.all(rows["eta_back"] >= rows["eta_forw"] - 1e-12)
        assert np.all(rows["eta_back"] >= rows["eta_square"] - 1e-12)

    def test_simulate_zero_control(self, tmp_path):
        out = tmp_path / "z"
        rc = main(["simulate", "--d", "10", "--control", "0:0", "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "simulate_summary.json").read_text())
        storage = summary["results"]["storage"]
        assert storage["eta_storage"] == 0.0
        assert abs(storage["audit_defect"]) < 1e-4
        csv_rows = (out / "output_mode.csv").read_text().splitlines()
        assert csv_rows[0] == "tau,re_E,im_E"
        # one row per sample of the run's own uniform output grid, spanning
        # the full input window
        taus = np.array([float(r.split(",")[0]) for r in csv_rows[1:]])
        assert np.allclose(np.diff(taus), taus[1] - taus[0])
        assert taus[0] == 0.0
        assert taus[-1] == pytest.approx(20.0, abs=1e-12)

    def test_simulate_with_retrieval(self, tmp_path):
        out = tmp_path / "sr"
        rc = main([
            "simulate", "--d", "5", "--control", "0:0.5", "--retrieve", "backward",
            "--out", str(out),
        ])
        assert rc == 0
        summary = json.loads((out / "simulate_summary.json").read_text())
        assert "retrieval" in summary["results"]
        assert summary["results"]["retrieval"]["eta_total"] <= 1.0
        assert (out / "retrieved_mode.csv").exists()

    def test_iterate_seeded_determinism(self, tmp_path):
        outs = []
        for name in ("i1", "i2"):
            out = tmp_path / name
            rc = main([
                "iterate", "--d", "5", "--init", "random", "--seed", "3", "--out", str(out)
            ])
            assert rc == 0
            outs.append((out / "iterate_summary.json").read_bytes())
        assert outs[0] == outs[1]
        trace = json.loads(outs[0])
        effs = trace["results"]["efficiencies"]
        assert all(b >= a - 1e-6 for a, b in zip(effs, effs[1:]))


class TestExitCodes:
    def test_config_error_is_one(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not_a_key = 3\n")
        assert main(["optimal-spinwave", "--config", str(cfg)]) == 1

    def test_missing_config_file_is_one(self):
        assert main(["optimal-spinwave", "--config", "/nonexistent/x.cfg"]) == 1

    def test_usage_error_is_one(self):
        assert main(["unknown-command"]) == 1

    def test_numerical_failure_is_two(self, tmp_path):
        # a one-node quadrature grid cannot be built
        cfg = tmp_path / "n.cfg"
        cfg.write_text("gauss_nodes = 1\n")
        rc = main(["optimal-spinwave", "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert rc == 2

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("d = 3\n")
        out = tmp_path / "o"
        assert main(["optimal-spinwave", "--config", str(cfg), "--d", "7", "--out", str(out)]) == 0
        summary = json.loads((out / "optimal_spinwave_summary.json").read_text())
        assert summary["results"][0]["d"] == 7.0
