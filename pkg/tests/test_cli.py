"""CLI surface: exit codes, payload shapes, the store, and sweep rows."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from robinsim.cli import dumps17, experiment_id, main, sweep_values


@pytest.fixture(autouse=True)
def _no_ambient_store(monkeypatch):
    monkeypatch.delenv("ROBINSIM_STORE", raising=False)
    monkeypatch.delenv("ROBINSIM_THREADS", raising=False)


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# fast interior start two ball radii from absorption; keeps sim tests short
FAST_SIM = [
    "--paths", "200", "--seed", "5", "--dt-min", "1e-6", "--dt-max", "1e-3",
]


class TestSerialization:
    def test_dumps17_sorts_keys_and_formats_floats(self):
        s = dumps17({"b": 0.1, "a": 1, "c": [True, None, 2.0]})
        assert s == '{"a": 1, "b": 0.10000000000000001, "c": [true, null, 2]}'

    def test_dumps17_nullifies_non_finite(self):
        assert dumps17({"x": math.nan, "y": math.inf}) == '{"x": null, "y": null}'

    def test_dumps17_round_trips_floats(self):
        x = 0.9175443611198906
        assert json.loads(dumps17({"x": x}))["x"] == x

    def test_experiment_id_is_deterministic_and_input_sensitive(self):
        a = experiment_id("simulate", "{}", "{}", 7)
        assert a == experiment_id("simulate", "{}", "{}", 7)
        assert a != experiment_id("simulate", "{}", "{}", 8)
        assert a != experiment_id("classify", "{}", "{}", 7)


class TestSweepValues:
    def test_row_count_formula(self):
        # floor((b-a)/s)+1 even when the quotient lands on x.9999...
        assert len(sweep_values(1.1, 3.0, 0.1)) == 20
        assert len(sweep_values(2.0, 4.0, 0.25)) == 9
        assert len(sweep_values(1.5, 1.5, 0.1)) == 1

    def test_bad_ranges_rejected(self):
        with pytest.raises(ValueError):
            sweep_values(3.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            sweep_values(1.0, 2.0, -0.1)


class TestClassify:
    def test_active_cusp_exit_0(self, capsys):
        code, out, _ = run_cli(
            ["classify", "--family", "cusp", "--d", "2", "--alpha", "1.5",
             "--criterion", "activity"], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["verdict"] == "ACTIVE"
        assert payload["report"]["threshold_verdict"] == "ACTIVE"

    def test_trap_snowflake_exit_3(self, capsys):
        code, out, _ = run_cli(
            ["classify", "--family", "snowflake", "--d", "3", "--rho", "0.2",
             "--beta", "3.5", "--criterion", "trap"], capsys)
        assert code == 3
        assert json.loads(out)["verdict"] == "TRAP"

    def test_inconclusive_exit_4(self, capsys):
        code, out, _ = run_cli(
            ["classify", "--family", "cusp", "--d", "2", "--alpha", "1.96"],
            capsys)
        assert code == 4
        assert json.loads(out)["verdict"] == "INCONCLUSIVE"

    def test_invalid_alpha_exit_2(self, capsys):
        code, _, err = run_cli(
            ["classify", "--family", "cusp", "--d", "2", "--alpha", "0.5"],
            capsys)
        assert code == 2
        assert "alpha" in err

    def test_missing_family_exit_2(self, capsys):
        code, _, err = run_cli(["classify", "--alpha", "1.5"], capsys)
        assert code == 2
        assert "--family" in err

    def test_csv_output(self, capsys):
        code, out, _ = run_cli(
            ["classify", "--family", "cusp", "--d", "2", "--alpha", "1.5",
             "--out", "csv"], capsys)
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "# verdict ACTIVE"
        assert lines[1] == "n,term,partial_sum"
        assert len(lines) == 22  # 20 bands


class TestSimulate:
    def test_u_payload_and_store(self, capsys, tmp_path):
        store = tmp_path / "runs.jsonl"
        argv = ["simulate", "--mode", "u", "--family", "disk", "--d", "2",
                "--x0", "0.5,0", *FAST_SIM, "--store", str(store)]
        code, out, _ = run_cli(argv, capsys)
        payload = json.loads(out)
        assert code == 0
        assert 0.0 < payload["mean"] <= 1.0
        assert payload["n"] == 200
        assert payload["domain"]["family"] == "disk"

        record = json.loads(store.read_text().splitlines()[0])
        assert set(record) == {"id", "timestamp", "command", "result", "version"}
        assert record["id"] == payload["id"]
        assert record["result"]["mean"] == payload["mean"]

    def test_rerun_appends_identical_result(self, capsys, tmp_path):
        store = tmp_path / "runs.jsonl"
        argv = ["simulate", "--mode", "exit", "--family", "disk", "--d", "2",
                "--x0", "0.5,0", *FAST_SIM, "--store", str(store)]
        _, out1, _ = run_cli(argv, capsys)
        _, out2, _ = run_cli(argv, capsys)
        assert out1 == out2
        r1, r2 = [json.loads(line) for line in store.read_text().splitlines()]
        assert r1["id"] == r2["id"]
        assert r1["result"] == r2["result"]

    def test_thread_count_does_not_change_output(self, capsys, monkeypatch):
        argv = ["simulate", "--mode", "exit", "--family", "disk", "--d", "2",
                "--x0", "0.5,0", *FAST_SIM]
        monkeypatch.setenv("ROBINSIM_THREADS", "1")
        _, out1, _ = run_cli(argv, capsys)
        monkeypatch.setenv("ROBINSIM_THREADS", "3")
        _, out3, _ = run_cli(argv, capsys)
        assert out1 == out3

    def test_snowflake_refused(self, capsys):
        code, _, err = run_cli(
            ["simulate", "--mode", "u", "--family", "snowflake", "--d", "3",
             "--rho", "0.25", "--beta", "2.0", "--x0", "0,0,0"], capsys)
        assert code == 2
        assert "criterion-only family" in err

    def test_missing_x0_exit_2(self, capsys):
        code, _, err = run_cli(
            ["simulate", "--mode", "u", "--family", "box", "--d", "2"], capsys)
        assert code == 2
        assert "--x0" in err

    def test_wrong_arity_x0_exit_2(self, capsys):
        code, _, err = run_cli(
            ["simulate", "--mode", "u", "--family", "box", "--d", "2",
             "--x0", "0.5,0.5,0.5"], capsys)
        assert code == 2
        assert "coordinates" in err

    def test_hitprob_needs_cuts(self, capsys):
        code, _, err = run_cli(
            ["simulate", "--mode", "hitprob", "--family", "box", "--d", "2",
             "--x0", "0.4,0.3"], capsys)
        assert code == 2
        assert "--cut-a" in err

    def test_bstar_flags_override_default(self, capsys):
        code, out, _ = run_cli(
            ["simulate", "--mode", "exit", "--family", "box", "--d", "2",
             "--x0", "0.2,0.2", "--bstar-c", "0.3,0.3", "--bstar-r", "0.1",
             *FAST_SIM], capsys)
        payload = json.loads(out)
        assert code == 0
        assert payload["domain"]["bstar"] == {"center": [0.3, 0.3], "radius": 0.1}

    def test_harmonic_probabilities_sum_to_one(self, capsys):
        code, out, _ = run_cli(
            ["simulate", "--mode", "harmonic", "--family", "box", "--d", "2",
             "--x0", "0.5,0.2", *FAST_SIM], capsys)
        payload = json.loads(out)
        assert code == 0
        probs = payload["probabilities"]
        assert set(probs) == {"x1=0", "x1=1", "x2=0", "x2=1", "other"}
        total = sum(probs.values())
        assert total == pytest.approx(1.0 - payload["truncated_fraction"], abs=1e-12)

    def test_csv_out_single_row(self, capsys):
        code, out, _ = run_cli(
            ["simulate", "--mode", "exit", "--family", "disk", "--d", "2",
             "--x0", "0.5,0", *FAST_SIM, "--out", "csv"], capsys)
        lines = out.splitlines()
        assert code == 0
        assert len(lines) == 2
        header = lines[0].split(",")
        row = lines[1].split(",")
        assert "mean" in header and len(header) == len(row)


class TestSweep:
    def test_csv_rows_and_single_flip(self, capsys):
        code, out, _ = run_cli(
            ["sweep", "--family", "snowflake", "--d", "3", "--rho", "0.2",
             "--param", "beta", "--from", "2.5", "--to", "3.5", "--step",
             "0.25", "--criterion", "trap"], capsys)
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "value,verdict,last_partial_sum,log_slope"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 5
        verdicts = [r[1] for r in rows]
        flips = sum(a != b for a, b in zip(verdicts, verdicts[1:]))
        assert flips == 1
        assert verdicts[rows.index(next(r for r in rows if float(r[0]) == 3.0))] == "TRAP"

    def test_empty_range_exit_2(self, capsys):
        code, _, err = run_cli(
            ["sweep", "--family", "cusp", "--d", "2", "--param", "alpha",
             "--from", "3.0", "--to", "1.0", "--step", "0.5"], capsys)
        assert code == 2
        assert "empty range" in err

    def test_single_value_one_row(self, capsys):
        code, out, _ = run_cli(
            ["sweep", "--family", "cusp", "--d", "2", "--param", "alpha",
             "--from", "1.5", "--to", "1.5", "--step", "0.1"], capsys)
        assert code == 0
        assert len(out.strip().splitlines()) == 2

    def test_unsweepable_param_exit_2(self, capsys):
        code, _, err = run_cli(
            ["sweep", "--family", "box", "--d", "2", "--param", "alpha",
             "--from", "1.0", "--to", "2.0", "--step", "0.5"], capsys)
        assert code == 2
        assert "not sweepable" in err

    def test_figure_rendered(self, capsys, tmp_path):
        fig = tmp_path / "sweep.png"
        code, _, _ = run_cli(
            ["sweep", "--family", "cusp", "--d", "2", "--param", "alpha",
             "--from", "1.4", "--to", "1.6", "--step", "0.1",
             "--fig", str(fig)], capsys)
        assert code == 0
        assert fig.stat().st_size > 0


class TestGreenReport:
    def test_writes_csv_and_figure(self, capsys, tmp_path):
        code, out, _ = run_cli(
            ["green-report", "--family", "box", "--d", "2", "--x0", "0.2,0.5",
             "--cells", "5", *FAST_SIM, "--out-dir", str(tmp_path)], capsys)
        summary = json.loads(out)
        assert code == 0
        csv_lines = (tmp_path / "green.csv").read_text().strip().splitlines()
        assert csv_lines[0] == "cell_lo,cell_hi,volume,occupation,density,visits"
        assert len(csv_lines) == 6
        assert (tmp_path / "green.png").stat().st_size > 0
        assert summary["csv"].endswith("green.csv")

    def test_occupation_identity_in_summary(self, capsys, tmp_path):
        code, out, _ = run_cli(
            ["green-report", "--family", "box", "--d", "2", "--x0", "0.2,0.5",
             "--cells", "4", *FAST_SIM, "--out-dir", str(tmp_path)], capsys)
        summary = json.loads(out)
        assert code == 0
        assert summary["mean_exit"]["truncated_fraction"] == 0.0
        assert summary["occupation_total"] == pytest.approx(
            summary["mean_exit"]["mean"], rel=1e-12)
