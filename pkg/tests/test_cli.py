import csv
import hashlib
import json

import numpy as np
import pytest

from eplab.cli import main

from conftest import OMEGA, Q, TAU0


def read_csv_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return header, data


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1))
    return path


def exponential_doc(**grid_kwargs):
    grid = {"t0": 0.0, "t1": 10.0}
    grid.update(grid_kwargs or {"abs_tol": 1e-12, "rel_tol": 1e-12})
    return {
        "mass": {"kind": "exponential", "m0": 1.0, "q": Q},
        "omega": OMEGA,
        "tau": {"kind": "monomial", "value": TAU0},
        "sigma0": 1.0,
        "sigma_dot0": 0.2,
        "grid": grid,
        "solver": "rk45_adaptive" if "dt" not in grid_kwargs else "rk4_fixed",
    }


class TestSolveEP:
    def test_exponential_scenario_run(self, tmp_path):
        cfg = write_config(tmp_path, exponential_doc())
        out = tmp_path / "out"
        code = main(["solve-ep", "--config", str(cfg), "--out", str(out),
                     "--scenario", "exponential"])
        assert code == 0
        header, data = read_csv_columns(out / "sigma.csv")
        assert header == ["t", "sigma", "sigma_dot"]
        ref = np.exp(0.2 * data[:, 0])
        assert np.max(np.abs(data[:, 1] - ref) / ref) < 1e-6
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["flags"]["residual_under_tolerance"] == "pass"
        assert manifest["flags"]["closed_form_match"] == "pass"
        assert (out / "sigma.png").exists()

    def test_fixed_step_outputs_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, exponential_doc(dt=1e-3))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["solve-ep", "--config", str(cfg), "--out", str(out1),
                     "--no-plot"]) == 0
        assert main(["solve-ep", "--config", str(cfg), "--out", str(out2),
                     "--no-plot"]) == 0
        d1 = hashlib.sha256((out1 / "sigma.csv").read_bytes()).hexdigest()
        d2 = hashlib.sha256((out2 / "sigma.csv").read_bytes()).hexdigest()
        assert d1 == d2

    def test_manifest_lists_all_outputs_with_checksums(self, tmp_path):
        cfg = write_config(tmp_path, exponential_doc())
        out = tmp_path / "out"
        assert main(["solve-ep", "--config", str(cfg), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        names = {entry["path"] for entry in manifest["outputs"]}
        assert names == {"sigma.csv", "sigma.png"}
        for entry in manifest["outputs"]:
            digest = hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest()
            assert digest == entry["sha256"]

    def test_malformed_json_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "broken.json"
        bad.write_text("{ not json")
        code = main(["solve-ep", "--config", str(bad), "--out", str(tmp_path)])
        assert code == 1
        assert "line" in capsys.readouterr().err

    def test_unknown_key_exits_one(self, tmp_path, capsys):
        doc = exponential_doc()
        doc["typo_key"] = 1
        cfg = write_config(tmp_path, doc)
        code = main(["solve-ep", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == 1
        assert "typo_key" in capsys.readouterr().err

    def test_exponential_constraint_violation_exits_one(self, tmp_path, capsys):
        doc = exponential_doc()
        doc["omega"] = 0.05  # omega^2 < tau0
        cfg = write_config(tmp_path, doc)
        code = main(["solve-ep", "--config", str(cfg), "--out", str(tmp_path),
                     "--scenario", "exponential"])
        assert code == 1
        err = capsys.readouterr().err
        assert "omega^2" in err and "tau0" in err

    def test_missing_config_flag_exits_one(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve-ep"])
        assert exc.value.code == 1

    def test_solver_override(self, tmp_path):
        cfg = write_config(tmp_path, exponential_doc())
        out = tmp_path / "out"
        assert main(["solve-ep", "--config", str(cfg), "--out", str(out),
                     "--solver", "rk4", "--no-plot"]) == 0


class TestCoeffs:
    def test_delta_column_constant_and_flags(self, tmp_path):
        cfg = write_config(tmp_path, exponential_doc())
        out = tmp_path / "out"
        assert main(["coeffs", "--config", str(cfg), "--out", str(out)]) == 0
        header, data = read_csv_columns(out / "coeffs.csv")
        assert header == ["t", "alpha", "delta", "epsilon", "gamma", "E"]
        delta = data[:, 2]
        assert np.max(np.abs(delta - delta[0])) < 1e-8
        assert delta[0] == pytest.approx(-0.2, abs=1e-9)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["flags"]["two_route_agreement"] == "pass"
        assert manifest["flags"]["closure_gap"] == "pass"
        assert manifest["flags"]["delta_constant"] == "pass"
        summary = manifest["residual_summary"]
        assert summary["two_route_gap"] < 1e-7
        assert summary["max_closure_gap"] < 1e-8
        assert summary["max_tau_residual"] < 1e-6
        assert summary["skipped_samples"] == 0

    def test_constant_mass_fixed_point_columns(self, tmp_path):
        doc = {
            "mass": {"kind": "constant", "m0": 1.0},
            "omega": 1.0,
            "tau": {"kind": "constant", "value": 1.0},
            "sigma0": 1.0,
            "sigma_dot0": 0.0,
            "grid": {"t0": 0.0, "t1": 5.0, "abs_tol": 1e-12, "rel_tol": 1e-12},
            "solver": "rk45_adaptive",
        }
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["coeffs", "--config", str(cfg), "--out", str(out),
                     "--no-plot"]) == 0
        _header, data = read_csv_columns(out / "coeffs.csv")
        for col in range(1, 6):
            assert np.max(np.abs(data[:, col] - data[0, col])) < 1e-9
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["flags"]["delta_constant"] == "skipped"

    def test_perturbed_epsilon_fails_route_agreement(self, tmp_path):
        cfg = write_config(tmp_path, exponential_doc())
        out = tmp_path / "out"
        code = main(["coeffs", "--config", str(cfg), "--out", str(out),
                     "--epsilon0-scale", "1.1", "--no-plot"])
        assert code == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["flags"]["two_route_agreement"] == "fail"
        assert manifest["residual_summary"]["two_route_gap"] > 1e-3


class TestVerify:
    def quantum_doc(self, **overrides):
        doc = exponential_doc()
        quantum = {
            "xmin": -28.0, "xmax": 28.0, "n": 255, "dt": 2e-3, "t_final": 1.0,
            "measure_every": 100,
            "state": {"center": 0.0, "width": 2.6, "momentum": 2.2},
        }
        quantum.update(overrides)
        doc["quantum"] = quantum
        return doc

    def test_small_run_passes_with_loose_gate(self, tmp_path):
        cfg = write_config(tmp_path, self.quantum_doc())
        out = tmp_path / "out"
        code = main(["verify", "--config", str(cfg), "--out", str(out),
                     "--drift-tol", "0.05"])
        assert code == 0
        report = json.loads((out / "verify.json").read_text())
        assert report["valid"] is True
        assert report["drift"] < 0.05
        assert report["convergence_order"] == pytest.approx(2.0, abs=0.5)
        header, data = read_csv_columns(out / "verify.csv")
        assert header == ["t", "expectation_I", "norm", "residual"]
        assert np.max(np.abs(data[:, 2] - 1.0)) < 1e-10
        assert (out / "verify.png").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert {e["path"] for e in manifest["outputs"]} == {
            "verify.csv", "verify.json", "verify.png"}

    def test_no_refine_skips_order_flag(self, tmp_path):
        cfg = write_config(tmp_path, self.quantum_doc())
        out = tmp_path / "out"
        code = main(["verify", "--config", str(cfg), "--out", str(out),
                     "--drift-tol", "0.05", "--no-refine", "--no-plot"])
        assert code == 0
        report = json.loads((out / "verify.json").read_text())
        assert report["convergence_order"] is None
        assert report["flags"]["convergence_order"] == "skipped"

    def test_boundary_violation_flagged(self, tmp_path):
        cfg = write_config(tmp_path, self.quantum_doc(xmin=-7.0, xmax=7.0, n=127))
        out = tmp_path / "out"
        code = main(["verify", "--config", str(cfg), "--out", str(out),
                     "--drift-tol", "1.0", "--no-refine", "--no-plot"])
        assert code == 2
        report = json.loads((out / "verify.json").read_text())
        assert report["valid"] is False
        assert report["flags"]["boundary_amplitude"] == "fail"

    def test_unknown_quantum_key_rejected(self, tmp_path, capsys):
        doc = self.quantum_doc()
        doc["quantum"]["n_grid"] = 10
        cfg = write_config(tmp_path, doc)
        code = main(["verify", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == 1
        assert "n_grid" in capsys.readouterr().err

    def test_density_snapshot_output(self, tmp_path):
        cfg = write_config(tmp_path, self.quantum_doc(snapshots=[0.0, 1.0]))
        out = tmp_path / "out"
        code = main(["verify", "--config", str(cfg), "--out", str(out),
                     "--drift-tol", "0.05", "--no-refine", "--no-plot"])
        assert code == 0
        payload = json.loads((out / "psi_snapshots.json").read_text())
        assert len(payload["times"]) == 2
        assert len(payload["density"]) == 2
        assert len(payload["density"][0]) == len(payload["x"]) == 255
        manifest = json.loads((out / "manifest.json").read_text())
        assert "psi_snapshots.json" in {e["path"] for e in manifest["outputs"]}


class TestFigure1:
    def test_default_family(self, tmp_path):
        out = tmp_path / "fig"
        assert main(["figure1", "--out", str(out)]) == 0
        header, data = read_csv_columns(out / "figure1.csv")
        assert header == ["t", "m_omega_0.1", "m_omega_0.3", "m_omega_0.5",
                          "m_omega_0.7", "m_omega_0.9"]
        assert data.shape == (1001, 6)
        # omega = 0.1 sits on the q = 0 edge: identically the initial mass
        assert np.all(data[:, 1] == 1.0)
        # strictly decreasing across omega for every t > 0
        for col in range(1, 5):
            assert np.all(data[1:, col] > data[1:, col + 1])
        assert (out / "figure1.png").exists()

    def test_decay_rate_values(self, tmp_path):
        out = tmp_path / "fig"
        assert main(["figure1", "--out", str(out), "--no-plot"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        q = manifest["residual_summary"]["q_values"]
        expected = {"0.1": 0.0, "0.3": 0.565685424949238,
                    "0.5": 0.9797958971132712, "0.7": 1.3856406460551018,
                    "0.9": 1.7888543819998317}
        for key, value in expected.items():
            assert q[key] == pytest.approx(value, abs=1e-6)

    def test_constraint_violation_names_omega(self, tmp_path, capsys):
        code = main(["figure1", "--out", str(tmp_path), "--omegas", "0.05,0.3"])
        assert code == 1
        assert "0.05" in capsys.readouterr().err

    def test_custom_parameters(self, tmp_path):
        out = tmp_path / "fig"
        assert main(["figure1", "--out", str(out), "--tau0", "0.04",
                     "--omegas", "0.2,0.5", "--m0", "2.0", "--t-max", "5.0",
                     "--samples", "101", "--no-plot"]) == 0
        header, data = read_csv_columns(out / "figure1.csv")
        assert header == ["t", "m_omega_0.2", "m_omega_0.5"]
        assert data.shape == (101, 3)
        assert data[0, 1] == 2.0 and data[0, 2] == 2.0
        assert data[-1, 0] == 5.0
