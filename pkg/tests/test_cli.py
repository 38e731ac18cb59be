import csv

import pytest

from mpraloha import cli

SCENARIO = """\
[channel]
mpr = 5
deadline = 1

[estimator]
interval_len = 500
memory_factor = 0.7
probe_low = 2
probe_high = 5
n_max = 100

[stages]
1-4 = 20
5-8 = 40
"""


def _rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


class TestUsageErrors:
    def test_no_subcommand(self, capsys):
        assert cli.main([]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert cli.main(["solve", "--n", "5", "--frequency", "2"]) == 1

    def test_missing_required_flag(self):
        assert cli.main(["solve", "--n", "20", "--m", "5"]) == 1

    def test_invalid_configuration(self, capsys):
        assert cli.main(["solve", "--n", "5", "--m", "5", "--d", "1"]) == 1
        assert "mpr" in capsys.readouterr().err

    def test_bad_list_syntax(self):
        assert cli.main(
            ["sweep", "--n", "6;9", "--m", "2", "--d", "1"]
        ) == 1


class TestSolve:
    def test_prints_report(self, capsys):
        assert cli.main(["solve", "--n", "20", "--m", "5", "--d", "1"]) == 0
        out = capsys.readouterr().out
        values = {}
        for line in out.strip().splitlines():
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        assert float(values["tau_opt"]) == pytest.approx(
            0.186330175, abs=1e-8
        )
        assert values["converged"] == "yes"

    def test_single_packet_closed_form(self, capsys):
        assert cli.main(["solve", "--n", "10", "--m", "1", "--d", "1"]) == 0
        assert "tau_opt    = 0.1\n" in capsys.readouterr().out

    def test_nonconvergence_exits_two(self, capsys):
        code = cli.main(
            ["solve", "--n", "20", "--m", "5", "--d", "1",
             "--max-iter", "2"]
        )
        assert code == 2
        assert "converged  = no" in capsys.readouterr().out

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "solve.csv"
        assert cli.main(
            ["solve", "--n", "20", "--m", "5", "--d", "1",
             "--out", str(path)]
        ) == 0
        rows = _rows(path)
        assert len(rows) == 1
        assert rows[0]["n_users"] == "20"
        assert rows[0]["converged"] == "true"


class TestSweep:
    def test_csv_to_stdout(self, capsys):
        assert cli.main(
            ["sweep", "--n", "6:8", "--m", "2,8", "--d", "1,5"]
        ) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        # m=8 is infeasible for every n here, so 3 populations x 2 deadlines.
        assert len(lines) == 1 + 6
        assert lines[0] == (
            "n_users,mpr,deadline,tau_opt,sdp_max,iterations,residual,"
            "converged,grid_tau,grid_sdp,tau_abs_diff"
        )

    def test_grid_search_column_agrees(self, tmp_path):
        path = tmp_path / "sweep.csv"
        assert cli.main(
            ["sweep", "--n", "10,20", "--m", "5", "--d", "1",
             "--out", str(path)]
        ) == 0
        for row in _rows(path):
            diff = abs(float(row["tau_opt"]) - float(row["grid_tau"]))
            assert float(row["tau_abs_diff"]) == pytest.approx(diff)
            assert diff < 1e-6
            assert float(row["grid_sdp"]) == pytest.approx(
                float(row["sdp_max"]), abs=1e-9
            )

    def test_optimum_trends_across_grid(self, tmp_path):
        path = tmp_path / "trend.csv"
        assert cli.main(
            ["sweep", "--n", "10,20,40", "--m", "1,2,5", "--d", "5",
             "--out", str(path)]
        ) == 0
        rows = _rows(path)
        # More stations compete, so each station must send less often.
        for m in ("1", "2", "5"):
            taus = [float(r["tau_opt"]) for r in rows if r["mpr"] == m]
            assert taus == sorted(taus, reverse=True)
        # A stronger receiver always helps.
        for n in ("10", "20", "40"):
            sdps = [float(r["sdp_max"]) for r in rows if r["n_users"] == n]
            assert sdps == sorted(sdps)

    def test_all_combinations_infeasible(self, capsys):
        assert cli.main(
            ["sweep", "--n", "6", "--m", "8", "--d", "1"]
        ) == 1
        assert "no valid" in capsys.readouterr().err

    def test_unwritable_out_is_io_error(self, tmp_path):
        target = tmp_path / "missing-dir" / "x.csv"
        assert cli.main(
            ["sweep", "--n", "10", "--m", "2", "--d", "1",
             "--out", str(target)]
        ) == 3


class TestSimulate:
    def test_summary_and_csv(self, tmp_path, capsys):
        path = tmp_path / "reps.csv"
        code = cli.main(
            ["simulate", "--n", "10", "--m", "2", "--d", "5",
             "--tau", "0.2", "--slots", "20000", "--reps", "3",
             "--seed", "1", "--out", str(path)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "z_score" in out
        rows = _rows(path)
        # One row per station per replication, then the aggregate.
        assert len(rows) == 3 * 10 + 1
        stations = rows[:-1]
        assert sorted({r["seed"] for r in stations}) == ["1", "2", "3"]
        assert [r["user_id"] for r in stations[:10]] == [
            str(u) for u in range(10)
        ]
        assert all(r["z_score"] == "" for r in stations)
        total = rows[-1]
        assert (total["rep"], total["user_id"]) == ("all", "all")
        assert int(total["packets_completed"]) == sum(
            int(r["packets_completed"]) for r in stations
        )
        assert float(total["analytic"]) == pytest.approx(
            0.2932711, abs=1e-6
        )
        assert total["z_score"] != ""

    def test_optimal_tau_default(self, capsys):
        assert cli.main(
            ["simulate", "--n", "10", "--m", "2", "--d", "5",
             "--slots", "5000"]
        ) == 0
        out = capsys.readouterr().out
        assert "tau        = 0.135315" in out

    def test_bad_tau(self, capsys):
        assert cli.main(
            ["simulate", "--n", "10", "--m", "2", "--d", "5",
             "--tau", "lots"]
        ) == 1
        assert "--tau" in capsys.readouterr().err

    def test_bad_reps(self):
        assert cli.main(
            ["simulate", "--n", "10", "--m", "2", "--d", "5",
             "--reps", "0"]
        ) == 1


class TestDynamic:
    @pytest.fixture()
    def scenario_path(self, tmp_path):
        path = tmp_path / "surge.cfg"
        path.write_text(SCENARIO)
        return path

    def test_writes_trace_and_stages(self, scenario_path, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = cli.main(
            ["dynamic", "--scenario", str(scenario_path),
             "--out", str(out_dir)]
        )
        assert code == 0
        trace = _rows(out_dir / "trace.csv")
        stages = _rows(out_dir / "stages.csv")
        assert len(trace) == 4 * 20 + 4 * 40
        assert len(stages) == 2
        assert stages[0]["active_users"] == "20"
        assert "stage 1:" in capsys.readouterr().out

    def test_repeat_runs_byte_identical(self, scenario_path, tmp_path):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            assert cli.main(
                ["dynamic", "--scenario", str(scenario_path),
                 "--out", str(d), "--seed", "3"]
            ) == 0
        for name in ("trace.csv", "stages.csv"):
            assert (dirs[0] / name).read_bytes() == (
                dirs[1] / name
            ).read_bytes()

    def test_seed_override_changes_output(self, scenario_path, tmp_path):
        for seed, d in (("3", tmp_path / "a"), ("4", tmp_path / "b")):
            assert cli.main(
                ["dynamic", "--scenario", str(scenario_path),
                 "--out", str(d), "--seed", seed]
            ) == 0
        assert (tmp_path / "a" / "trace.csv").read_bytes() != (
            tmp_path / "b" / "trace.csv"
        ).read_bytes()

    def test_missing_scenario_is_io_error(self, tmp_path):
        assert cli.main(
            ["dynamic", "--scenario", str(tmp_path / "nope.cfg"),
             "--out", str(tmp_path)]
        ) == 3

    def test_malformed_scenario_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(SCENARIO.replace("1-4 = 20", "1-4 = 200"))
        assert cli.main(
            ["dynamic", "--scenario", str(path), "--out", str(tmp_path)]
        ) == 1
        err = capsys.readouterr().err
        assert "bad.cfg" in err


class TestVerify:
    ARGS = ["verify", "--n", "2,5", "--m", "1,2", "--d", "1,2",
            "--sweep-n", "6:8", "--sweep-m", "2", "--sweep-d", "1,5"]

    def test_small_grid_passes(self, capsys):
        assert cli.main(self.ARGS) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 12
        assert "FAIL" not in out
        assert "all 12 checks passed" in out

    def test_impossible_tolerance_fails_honestly(self, capsys):
        assert cli.main(self.ARGS + ["--tolerance", "1e-18"]) == 2
        captured = capsys.readouterr()
        assert "FAIL moment_ratio_identity" in captured.out
        assert "checks failed" in captured.err
