import json

import numpy as np
import pytest

from spintomo import ConfigError, load_config
from spintomo.cli import main
from spintomo.measurement import read_record


def base_config(**overrides):
    doc = {
        "version": 1,
        "F": 3,
        "waveform": {
            "n_steps": 30,
            "dt": 5e-5,
            "phi": "random:10",
            "omega_larmor": 62831.853071795864,
            "chi": 37699.11184307752,
            "gamma_dec": 0.0,
            "jump_preset": "isotropic",
        },
        "sampling": {"n_samples": 150, "substeps": 4},
        "noise": {"sigma": 0.9, "seed": 7, "n_averaged": 1},
        "state": {"kind": "basis_state", "m": -3},
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestConfigParsing:
    def test_golden_config(self, tmp_path):
        config = load_config(write_config(tmp_path, base_config()))
        assert config.F == 3.0
        assert config.waveform.n_steps == 30
        assert config.n_samples == 150
        assert len(config.states) == 1
        assert config.states[0][0] == "basis_state"

    def test_unknown_key_named(self, tmp_path):
        doc = base_config()
        doc["waveform"]["wobble"] = 1
        with pytest.raises(ConfigError, match="wobble"):
            load_config(write_config(tmp_path, doc))

    def test_missing_key_named(self, tmp_path):
        doc = base_config()
        del doc["waveform"]["omega_larmor"]
        with pytest.raises(ConfigError, match="omega_larmor"):
            load_config(write_config(tmp_path, doc))

    def test_bad_version(self, tmp_path):
        with pytest.raises(ConfigError, match="version"):
            load_config(write_config(tmp_path, base_config(version=3)))

    def test_explicit_phi_list(self, tmp_path):
        doc = base_config()
        doc["waveform"]["phi"] = [0.1] * 30
        config = load_config(write_config(tmp_path, doc))
        assert config.waveform.phi == (0.1,) * 30

    def test_sample_alignment_checked(self, tmp_path):
        doc = base_config()
        doc["sampling"]["n_samples"] = 100
        with pytest.raises(ConfigError, match="n_samples"):
            load_config(write_config(tmp_path, doc))

    def test_state_and_states_exclusive(self, tmp_path):
        doc = base_config()
        doc["states"] = [doc["state"]]
        with pytest.raises(ConfigError, match="exactly one"):
            load_config(write_config(tmp_path, doc))

    def test_matrix_state(self, tmp_path):
        doc = base_config()
        rho = np.eye(7) / 7
        doc["state"] = {
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in rho]
        }
        config = load_config(write_config(tmp_path, doc))
        assert np.max(np.abs(config.states[0][1] - rho)) < 1e-15

    def test_bad_state_parameter(self, tmp_path):
        doc = base_config(state={"kind": "basis_state", "m": 9})
        with pytest.raises(ConfigError, match="m=9"):
            load_config(write_config(tmp_path, doc))


class TestCliPipeline:
    def test_simulate_then_estimate_noiseless(self, tmp_path, capsys):
        doc = base_config()
        doc["noise"]["sigma"] = 0.0
        cfg = write_config(tmp_path, doc)
        record = str(tmp_path / "record.json")
        est = str(tmp_path / "estimate.json")
        assert main(["simulate", cfg, record]) == 0
        out = capsys.readouterr().out
        assert "fingerprint:" in out and "noiseless_rms:" in out
        assert main(["estimate", record, cfg, est]) == 0
        out = capsys.readouterr().out
        fid = float(out.split("fidelity:")[1].strip().splitlines()[0])
        assert fid >= 0.999999
        assert json.loads((tmp_path / "estimate.json").read_text())["rank"] == 48

    def test_mixed_state_zero_values(self, tmp_path):
        doc = base_config(state={"kind": "mixed"})
        doc["noise"]["sigma"] = 0.0
        cfg = write_config(tmp_path, doc)
        record_path = str(tmp_path / "record.json")
        assert main(["simulate", cfg, record_path]) == 0
        record = read_record(record_path)
        assert np.max(np.abs(record.values)) < 1e-10

    def test_rerun_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        r1, r2 = str(tmp_path / "r1.json"), str(tmp_path / "r2.json")
        assert main(["simulate", cfg, r1]) == 0
        assert main(["simulate", cfg, r2]) == 0
        assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()

    def test_fingerprint_mismatch_exit_4(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        record = str(tmp_path / "record.json")
        assert main(["simulate", cfg, record]) == 0
        other = base_config()
        other["waveform"]["chi"] = 1000.0
        cfg2 = write_config(tmp_path, other, "other.json")
        assert main(["estimate", record, cfg2, str(tmp_path / "e.json")]) == 4

    def test_malformed_config_exit_2(self, tmp_path, capsys):
        doc = base_config()
        doc["waveform"]["bogus_knob"] = 1
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", cfg, str(tmp_path / "r.json")]) == 2
        assert "bogus_knob" in capsys.readouterr().err

    def test_prefix_curve_rows(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        record = str(tmp_path / "record.json")
        curve = tmp_path / "curve.csv"
        assert main(["simulate", cfg, record]) == 0
        assert main(
            ["estimate", record, cfg, str(tmp_path / "e.json"), "--prefix-curve", str(curve)]
        ) == 0
        lines = curve.read_text().splitlines()
        assert lines[0] == "time,fidelity,max_eigenvalue"
        assert len(lines) == 1 + (150 // 5 + 1)
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) == pytest.approx(1 / 7, abs=1e-12)

    def test_nuisance_flag(self, tmp_path, capsys):
        doc = base_config()
        doc["noise"]["sigma"] = 0.0
        cfg = write_config(tmp_path, doc)
        record = str(tmp_path / "record.json")
        assert main(["simulate", cfg, record]) == 0
        capsys.readouterr()
        code = main(
            [
                "estimate", record, cfg, str(tmp_path / "e.json"),
                "--nuisance", "omega_scale:0.99:1.01", "--budget", "60",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        scale = float(out.split("nuisance omega_scale:")[1].strip().splitlines()[0])
        assert abs(scale - 1.0) < 2e-3


class TestCliSweep:
    def test_empty_sweep(self, tmp_path, capsys):
        cfg = write_config(tmp_path, base_config())
        out_csv = tmp_path / "sweep.csv"
        assert main(["sweep", cfg, "0", str(out_csv)]) == 0
        assert out_csv.read_text() == "trial,state,seed,fidelity\n"

    def test_noiseless_sweep_perfect(self, tmp_path, capsys):
        doc = base_config()
        del doc["state"]
        doc["states"] = [{"kind": "basis_state", "m": -3}, {"kind": "mixed"}]
        doc["noise"]["sigma"] = 0.0
        cfg = write_config(tmp_path, doc)
        out_csv = tmp_path / "sweep.csv"
        assert main(["sweep", cfg, "2", str(out_csv)]) == 0
        out = capsys.readouterr().out
        mean = float(out.split("mean_fidelity:")[1].strip().splitlines()[0])
        assert mean >= 1 - 1e-6
        assert len(out_csv.read_text().splitlines()) == 1 + 4

    def test_concurrent_sweep_deterministic(self, tmp_path):
        doc = base_config()
        del doc["state"]
        doc["states"] = [{"kind": "cat"}, {"kind": "mixed"}]
        cfg = write_config(tmp_path, doc)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", cfg, "4", str(a), "--jobs", "4"]) == 0
        assert main(["sweep", cfg, "4", str(b), "--jobs", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestCliWignerDesignCheck:
    def test_wigner_of_mixed_config(self, tmp_path):
        doc = base_config(state={"kind": "mixed"})
        cfg = write_config(tmp_path, doc)
        out_csv = tmp_path / "w.csv"
        assert main(["wigner", cfg, str(out_csv), "--n-theta", "12", "--n-phi", "16"]) == 0
        rows = out_csv.read_text().splitlines()[4:]
        values = np.array([float(r.split(",")[2]) for r in rows])
        assert np.max(np.abs(values - 1 / (4 * np.pi))) < 1e-12

    def test_wigner_of_estimate_document(self, tmp_path):
        doc = base_config()
        doc["noise"]["sigma"] = 0.0
        cfg = write_config(tmp_path, doc)
        record = str(tmp_path / "record.json")
        est = str(tmp_path / "estimate.json")
        assert main(["simulate", cfg, record]) == 0
        assert main(["estimate", record, cfg, est]) == 0
        assert main(["wigner", est, str(tmp_path / "w.csv"), "--n-theta", "10", "--n-phi", "10"]) == 0

    def test_check_incomplete_exit_5(self, tmp_path, capsys):
        doc = base_config()
        doc["waveform"]["chi"] = 0.0
        cfg = write_config(tmp_path, doc)
        assert main(["check", cfg]) == 5
        out = capsys.readouterr().out
        assert "rank: 5" in out

    def test_design_then_check(self, tmp_path):
        doc = base_config()
        doc["waveform"]["phi"] = "random:3"
        doc["waveform"]["chi"] = 6283.185307179586  # weak twisting to start
        cfg = write_config(tmp_path, doc)
        out_cfg = str(tmp_path / "designed.json")
        assert main(["design", cfg, out_cfg, "--budget", "50", "--seed", "0"]) == 0
        designed = json.loads((tmp_path / "designed.json").read_text())
        assert isinstance(designed["waveform"]["phi"], list)
        assert main(["check", out_cfg]) == 0

    def test_estimate_files_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        record = str(tmp_path / "record.json")
        assert main(["simulate", cfg, record]) == 0
        e1, e2 = tmp_path / "e1.json", tmp_path / "e2.json"
        assert main(["estimate", record, cfg, str(e1)]) == 0
        assert main(["estimate", record, cfg, str(e2)]) == 0
        assert e1.read_bytes() == e2.read_bytes()


def test_shipped_configs_parse():
    import pathlib

    here = pathlib.Path(__file__).resolve().parent.parent / "configs"
    for name in ("cat.json", "paper_states_sweep.json"):
        config = load_config(here / name)
        assert config.F == 3.0
