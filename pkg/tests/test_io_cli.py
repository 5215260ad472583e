import json
import os

import numpy as np
import pytest

from hcma import cli
from hcma.io import (ConfigError, ExperimentConfig, Snapshot, SnapshotError,
                     load_config, report_json, write_fields_csv)

SMALL_CONFIG = """\
[grid]
nt = 9
nx = 16
ny = 16

[profile]
kind = annulus
epsilon = 1e-3

[boundary]
phi1 = 1,0,0.005,0

[run]
seed = 0

[trace]
starts = 0.0,0.25,0.5
step = 0.05
"""


def write_config(tmp_path, text=SMALL_CONFIG, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfigParse:
    def test_defaults(self):
        cfg = ExperimentConfig.parse("")
        assert cfg.nt == 9 and cfg.profile_kind == "annulus"
        assert cfg.checks is None

    def test_small_config(self):
        cfg = ExperimentConfig.parse(SMALL_CONFIG)
        assert cfg.epsilon == 1e-3
        assert cfg.phi1_modes == ((1, 0, 0.005 + 0j),)
        assert cfg.trace_starts == ((0.0, 0.25, 0.5),)

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse("[nope]\nx = 1\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse("[grid]\nnz = 4\n")

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse("[boundary]\nphi1 = 1,0,0.005\n")

    def test_bad_profile_kind(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse("[profile]\nkind = mystery\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse("[grid]\nnt = nine\n")

    def test_round_trip_idempotent(self):
        cfg = ExperimentConfig.parse(SMALL_CONFIG)
        again = ExperimentConfig.parse(cfg.serialize())
        assert again == cfg
        assert again.serialize() == cfg.serialize()

    def test_factories(self):
        cfg = ExperimentConfig.parse(SMALL_CONFIG)
        grid = cfg.make_grid()
        assert grid.shape == (9, 16, 16)
        assert cfg.make_profile().epsilon == 1e-3
        assert cfg.make_boundary().phi1 == ((1, 0, 0.005 + 0j),)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")


class TestSnapshot:
    def make_snapshot(self, grid_small):
        from hcma import AnnulusProfile, newton_solve
        cfg = ExperimentConfig.parse(SMALL_CONFIG)
        sol = newton_solve(grid_small, cfg.make_boundary(),
                           AnnulusProfile(1e-3))
        return Snapshot.from_solution(sol, cfg), sol

    def test_bitwise_round_trip(self, tmp_path, grid_small):
        snap, sol = self.make_snapshot(grid_small)
        p = tmp_path / "a.snap"
        snap.save(p)
        back = Snapshot.load(p)
        assert back.values.tobytes() == sol.phi.values.tobytes()
        assert back.config_text == snap.config_text
        assert back.converged and back.modulus == 1j

    def test_save_load_save_identical_bytes(self, tmp_path, grid_small):
        snap, _ = self.make_snapshot(grid_small)
        p1, p2 = tmp_path / "a.snap", tmp_path / "b.snap"
        snap.save(p1)
        Snapshot.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_to_solution(self, tmp_path, grid_small):
        snap, sol = self.make_snapshot(grid_small)
        back, cfg = snap.to_solution()
        assert np.array_equal(back.phi.values, sol.phi.values)
        assert cfg.epsilon == 1e-3

    def test_bad_magic(self, tmp_path, grid_small):
        snap, _ = self.make_snapshot(grid_small)
        p = tmp_path / "a.snap"
        snap.save(p)
        raw = bytearray(p.read_bytes())
        raw[:8] = b"NOTASNAP"
        p.write_bytes(bytes(raw))
        with pytest.raises(SnapshotError):
            Snapshot.load(p)

    def test_truncated_payload(self, tmp_path, grid_small):
        snap, _ = self.make_snapshot(grid_small)
        p = tmp_path / "a.snap"
        snap.save(p)
        p.write_bytes(p.read_bytes()[:-16])
        with pytest.raises(SnapshotError):
            Snapshot.load(p)

    def test_wrong_version(self, tmp_path, grid_small):
        snap, _ = self.make_snapshot(grid_small)
        p = tmp_path / "a.snap"
        snap.save(p)
        raw = bytearray(p.read_bytes())
        raw[8] = 99
        p.write_bytes(bytes(raw))
        with pytest.raises(SnapshotError):
            Snapshot.load(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SnapshotError):
            Snapshot.load(tmp_path / "nope.snap")


class TestReports:
    def test_deterministic_after_stripping_timestamp(self):
        d = {"meta": {"seed": 0}, "checks": [{"name": "x", "pass": True}]}
        j1 = json.loads(report_json(d))
        j2 = json.loads(report_json(d))
        j1["meta"].pop("timestamp")
        j2["meta"].pop("timestamp")
        assert j1 == j2

    def test_fields_csv(self, tmp_path, grid_small):
        p = tmp_path / "f.csv"
        write_fields_csv(p, grid_small, {"one": np.ones(grid_small.shape)})
        lines = p.read_text().splitlines()
        assert lines[0] == "it,ix,iy,one"
        assert len(lines) == 1 + grid_small.n_nodes


class TestCliEndToEnd:
    def test_solve_verify_trace_plotdata(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert cli.main(["solve", "--config", cfg, "--out", out]) == 0
        snap = os.path.join(out, "solution.snap")
        assert os.path.exists(snap)
        summary = json.loads(
            open(os.path.join(out, "summary.json")).read())
        assert summary["summary"]["final_residual"] < 1e-10

        assert cli.main(["verify", "--snapshot", snap, "--out", out]) == 0
        report = json.loads(open(os.path.join(out, "report.json")).read())
        assert all(c["pass"] or c["vacuous"] for c in report["checks"])
        assert os.path.exists(os.path.join(out, "fields.csv"))

        assert cli.main(["trace", "--snapshot", snap, "--config", cfg,
                         "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "leaf_000.csv"))
        diag = json.loads(
            open(os.path.join(out, "trace_diagnostics.json")).read())
        assert diag["checks"][0]["in_hypothesis"]

        assert cli.main(["plotdata", "--snapshot", snap, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "jetmap.csv"))

    def test_report_reproducible(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        cli.main(["solve", "--config", cfg, "--out", out])
        snap = os.path.join(out, "solution.snap")
        o1, o2 = str(tmp_path / "v1"), str(tmp_path / "v2")
        cli.main(["verify", "--snapshot", snap, "--out", o1])
        cli.main(["verify", "--snapshot", snap, "--out", o2])
        r1 = json.loads(open(os.path.join(o1, "report.json")).read())
        r2 = json.loads(open(os.path.join(o2, "report.json")).read())
        r1["meta"].pop("timestamp")
        r2["meta"].pop("timestamp")
        assert r1 == r2

    def test_malformed_config_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, "[nope]\nx = 1\n")
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert cli.main(["solve", "--config", str(tmp_path / "nope.ini"),
                         "--out", str(tmp_path / "o")]) == 2

    def test_nonconvex_boundary_exit_2(self, tmp_path):
        text = SMALL_CONFIG.replace("phi1 = 1,0,0.005,0", "phi1 = 1,0,0.2,0")
        cfg = write_config(tmp_path, text)
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 2

    def test_solver_failure_exit_3(self, tmp_path):
        text = SMALL_CONFIG + "\n[solver]\nnewton_tol = 1e-16\nmax_newton_iters = 0\n"
        cfg = write_config(tmp_path, text)
        out = str(tmp_path / "o")
        assert cli.main(["solve", "--config", cfg, "--out", out]) == 3
        assert os.path.exists(os.path.join(out, "diagnostics.snap"))
        summary = json.loads(open(os.path.join(out, "summary.json")).read())
        assert "failure" in summary

    def test_corrupted_snapshot_exit_2(self, tmp_path):
        p = tmp_path / "bad.snap"
        p.write_bytes(b"NOTASNAP" + b"\x00" * 64)
        assert cli.main(["verify", "--snapshot", str(p),
                         "--out", str(tmp_path / "o")]) == 2

    def test_injected_violation_exit_4(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        cli.main(["solve", "--config", cfg, "--out", out])
        snap_path = os.path.join(out, "solution.snap")
        snap = Snapshot.load(snap_path)
        nt, nx = snap.nt, snap.nx
        t = np.linspace(0, 1, nt)[:, None, None]
        x = (np.arange(nx) / nx)[None, :, None]
        snap.values = snap.values + 0.3 * np.cos(2 * np.pi * x) * np.sin(
            np.pi * t)
        bad = str(tmp_path / "bad.snap")
        snap.save(bad)
        assert cli.main(["verify", "--snapshot", bad,
                         "--out", str(tmp_path / "v")]) == 4

    def test_unknown_check_exit_2(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        cli.main(["solve", "--config", cfg, "--out", out])
        assert cli.main(["verify", "--snapshot",
                         os.path.join(out, "solution.snap"),
                         "--out", out, "--checks", "nope"]) == 2

    def test_empty_sweep_exit_2(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli.main(["sweep", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 2

    def test_sweep_with_schedule(self, tmp_path):
        text = SMALL_CONFIG.replace(
            "epsilon = 1e-3", "epsilon = 1e-3\nschedule = 1e-2, 1e-3")
        cfg = write_config(tmp_path, text)
        out = str(tmp_path / "o")
        assert cli.main(["sweep", "--config", cfg, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "eps_000.snap"))
        rep = json.loads(open(os.path.join(out, "sweep_report.json")).read())
        names = {c["name"] for c in rep["checks"]}
        assert "eps_monotone_limit" in names
        assert "metric_lower_bound_stability" in names

    def test_sweep_with_lambdas(self, tmp_path):
        text = SMALL_CONFIG + "\n[sweep]\nlambdas = 0.0, 0.5, 1.0\n"
        cfg = write_config(tmp_path, text)
        out = str(tmp_path / "o")
        assert cli.main(["sweep", "--config", cfg, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "lambda_002.snap"))

    def test_bad_trace_start_exit_2(self, tmp_path):
        text = SMALL_CONFIG.replace("starts = 0.0,0.25,0.5",
                                    "starts = 1.5,0.25,0.5")
        cfg = write_config(tmp_path, text, name="bad_trace.ini")
        out = str(tmp_path / "out")
        cli.main(["solve", "--config", write_config(tmp_path), "--out", out])
        assert cli.main(["trace", "--snapshot",
                         os.path.join(out, "solution.snap"),
                         "--config", cfg, "--out", out]) == 2
