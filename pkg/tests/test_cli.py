"""End-to-end tests for the command-line pipeline.

Subcommands are invoked in-process through ``main(argv)`` (fast, and exit
codes are returned directly); one test drives the installed module entry
point in a subprocess.
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lm_ensemble.cli import main
from lm_ensemble.data import read_labels_csv


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def make_scenario(letter, seed=1, out="data"):
    code = main(["synth", letter, "--out", out, "--seed", str(seed)])
    assert code == 0
    return f"{out}/manifest.json"


def read_report(path):
    return json.loads(Path(path).read_text())


class TestSynthCommand:
    def test_writes_tree_and_report(self, workdir):
        manifest = make_scenario("B")
        assert Path(manifest).is_file()
        report = read_report("data/synth-report.json")
        assert report["scenario"] == "B"
        assert report["seed"] == 1
        assert report["m"] == 100

    def test_unknown_scenario_is_usage_error(self, workdir):
        assert main(["synth", "Q", "--out", "data"]) == 2

    def test_out_required(self, workdir):
        assert main(["synth", "A"]) == 2


class TestValidateCommand:
    def test_clean_manifest_exit_zero(self, workdir, capsys):
        manifest = make_scenario("B")
        assert main(["validate", manifest]) == 0
        report = read_report("validate-report.json")
        assert report["valid"] is True and report["violations"] == []
        assert "violations" in capsys.readouterr().out

    def test_out_of_range_value_exit_one_with_location(self, workdir, capsys):
        manifest = make_scenario("B")
        prob_file = next(Path("data").glob("*probs.csv"))
        lines = prob_file.read_text().splitlines()
        first = lines[1].split(",")
        first[1] = "1.5"
        lines[1] = ",".join(first)
        prob_file.write_text("\n".join(lines) + "\n")
        assert main(["validate", manifest]) == 1
        err = capsys.readouterr().err
        assert "outside" in err
        report = read_report("validate-report.json")
        assert report["valid"] is False and report["violations"]

    def test_unparsable_value_exit_one_names_file_and_line(self, workdir, capsys):
        manifest = make_scenario("B")
        prob_file = next(Path("data").glob("*probs.csv"))
        text = prob_file.read_text().splitlines()
        text[3] = text[3].rsplit(",", 1)[0] + ",oops"
        prob_file.write_text("\n".join(text) + "\n")
        assert main(["validate", manifest]) == 1
        err = capsys.readouterr().err
        assert f"{prob_file.name}:4" in err

    def test_missing_manifest_exit_one(self, workdir, capsys):
        assert main(["validate", "no/such/manifest.json"]) == 1
        err = capsys.readouterr().err
        assert "file not found" in err
        assert err.count("no/such/manifest.json") == 1


class TestShallowCommand:
    def test_report_has_exactly_the_contract_keys(self, workdir):
        manifest = make_scenario("A")
        assert main(["shallow", manifest]) == 0
        report = read_report("shallow-report.json")
        assert set(report) == {"alpha", "loss", "accuracy", "evaluations"}
        assert report["loss"] == 0 and report["accuracy"] == 1.0
        assert report["evaluations"] == 101
        assert len(report["alpha"]) == 2

    def test_train_split_flag(self, workdir):
        manifest = make_scenario("A")
        assert main(["shallow", manifest, "--split", "train"]) == 0
        assert read_report("shallow-report.json")["loss"] == 0

    def test_predictions_cover_all_ids(self, workdir):
        manifest = make_scenario("A")
        main(["shallow", manifest])
        ids, labels = read_labels_csv(Path("shallow-predictions.csv"))
        want_ids, _ = read_labels_csv(Path("data/labels.csv"))
        assert ids == want_ids
        assert len(labels) == 100

    def test_corrupt_input_exit_one(self, workdir, capsys):
        manifest = make_scenario("A")
        labels = Path("data/labels.csv")
        labels.write_text(labels.read_text().replace("ex0000,", "ex0000,bad", 1))
        assert main(["shallow", manifest]) == 1
        assert "labels.csv" in capsys.readouterr().err


class TestSemiCommand:
    def test_report_keys_and_artifacts(self, workdir):
        manifest = make_scenario("B", seed=7)
        assert main(["semi", manifest, "--hidden", "8", "--epochs", "40", "--seed", "7"]) == 0
        report = read_report("semi-report.json")
        assert set(report) == {"loss", "accuracy", "epochs_run", "final_train_ce"}
        assert report["epochs_run"] == 40
        assert report["loss"] + round(report["accuracy"] * 100) == 100
        assert Path("semi-classifier.json").is_file()
        ids, _ = read_labels_csv(Path("semi-predictions.csv"))
        assert len(ids) == 100

    def test_pca_flag(self, workdir):
        manifest = make_scenario("B", seed=7)
        assert main(["semi", manifest, "--pca", "4", "--epochs", "10"]) == 0
        clf = json.loads(Path("semi-classifier.json").read_text())
        assert len(clf["w1"][0]) == 4

    def test_pca_too_wide_exit_one(self, workdir, capsys):
        manifest = make_scenario("B", seed=7)
        assert main(["semi", manifest, "--pca", "999", "--epochs", "1"]) == 1
        assert "error" in capsys.readouterr().err


class TestDeepCommand:
    def test_report_keys_and_trace(self, workdir):
        manifest = make_scenario("C", seed=2)
        code = main(
            ["deep", manifest, "--epochs", "12", "--rounds", "5",
             "--hidden", "8", "--seed", "2"]
        )
        assert code == 0
        report = read_report("deep-report.json")
        assert set(report) == {"beta", "reward", "loss", "accuracy", "rounds", "trace"}
        assert report["rounds"] == 5 and len(report["trace"]) == 5
        for i, entry in enumerate(report["trace"]):
            assert set(entry) == {"round", "beta", "reward", "train_ce", "zero_one"}
            assert entry["round"] == i
        assert 0.0 <= report["beta"] <= 1.0
        assert Path("deep-classifier.json").is_file()
        assert Path("deep-predictions.csv").is_file()

    def test_rounds_defaults_to_epochs(self, workdir):
        manifest = make_scenario("C", seed=2)
        assert main(["deep", manifest, "--epochs", "6", "--hidden", "4"]) == 0
        assert read_report("deep-report.json")["rounds"] == 6

    def test_without_knowledge_exit_one(self, workdir, capsys):
        manifest = make_scenario("A")
        assert main(["deep", manifest, "--epochs", "2"]) == 1
        assert "knowledge" in capsys.readouterr().err


class TestEvalCommand:
    def prepare_predictions(self):
        manifest = make_scenario("B", seed=7)
        assert main(["shallow", manifest, "--seed", "7"]) == 0
        assert main(["semi", manifest, "--hidden", "8", "--epochs", "40", "--seed", "7"]) == 0
        return manifest

    def test_table_and_report(self, workdir, capsys):
        manifest = self.prepare_predictions()
        code = main(
            ["eval", manifest, "--pred", "shallow-predictions.csv",
             "semi-predictions.csv", "--baseline", "shallow"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "strategy" in out and "p vs shallow" in out and "shallow *" in out
        report = read_report("eval-report.json")
        assert set(report) == {"baseline", "m", "metric", "rows", "test"}
        assert report["baseline"] == "shallow" and report["m"] == 100
        assert {r["strategy"] for r in report["rows"]} == {"shallow", "semi"}
        for row in report["rows"]:
            assert set(row) == {"strategy", "accuracy", "loss", "p_value"}

    def test_mcnemar_flag(self, workdir):
        manifest = self.prepare_predictions()
        code = main(
            ["eval", manifest, "--pred", "shallow-predictions.csv",
             "semi-predictions.csv", "--baseline", "semi", "--test", "mcnemar"]
        )
        assert code == 0
        assert read_report("eval-report.json")["test"] == "mcnemar"

    def test_unknown_baseline_exit_one(self, workdir, capsys):
        manifest = self.prepare_predictions()
        code = main(
            ["eval", manifest, "--pred", "shallow-predictions.csv", "--baseline", "nope"]
        )
        assert code == 1
        assert "baseline" in capsys.readouterr().err

    def test_mismatched_ids_exit_one(self, workdir, capsys):
        manifest = self.prepare_predictions()
        Path("rogue-predictions.csv").write_text(
            "id,label\n" + "".join(f"zz{i:04d},0\n" for i in range(100))
        )
        code = main(
            ["eval", manifest, "--pred", "rogue-predictions.csv", "--baseline", "rogue"]
        )
        assert code == 1
        assert "do not match" in capsys.readouterr().err

    def test_prediction_class_out_of_range_exit_one(self, workdir, capsys):
        manifest = self.prepare_predictions()
        ids, _ = read_labels_csv(Path("data/labels.csv"))
        Path("wild-predictions.csv").write_text(
            "id,label\n" + "".join(f"{i},7\n" for i in ids)
        )
        code = main(
            ["eval", manifest, "--pred", "wild-predictions.csv", "--baseline", "wild"]
        )
        assert code == 1
        assert "out of range" in capsys.readouterr().err


class TestUsageErrors:
    def test_unknown_flag(self, workdir):
        assert main(["shallow", "x.json", "--frobnicate"]) == 2

    def test_unknown_subcommand(self, workdir):
        assert main(["explode"]) == 2

    def test_no_subcommand(self, workdir):
        assert main([]) == 2

    def test_bad_flag_values(self, workdir):
        manifest = "data/manifest.json"
        assert main(["shallow", manifest, "--grid", "0"]) == 2
        assert main(["shallow", manifest, "--restarts", "-1"]) == 2
        assert main(["shallow", manifest, "--holdout-frac", "1.5"]) == 2
        assert main(["semi", manifest, "--epochs", "0"]) == 2
        assert main(["semi", manifest, "--lr", "-0.5"]) == 2
        assert main(["deep", manifest, "--lambda", "-1"]) == 2
        assert main(["deep", manifest, "--beta-step", "0"]) == 2
        assert main(["deep", manifest, "--rounds", "0"]) == 2

    def test_help_exits_zero(self, workdir):
        assert main(["--help"]) == 0


class TestDeterminism:
    def test_every_subcommand_rerun_byte_identical(self, workdir):
        manifest = make_scenario("C", seed=4, out="data")
        synth_first = Path("data/synth-report.json").read_bytes()
        assert main(["synth", "C", "--out", "data", "--seed", "4"]) == 0
        assert Path("data/synth-report.json").read_bytes() == synth_first

        def run_twice(argv, report):
            assert main(argv + ["--out", "r1"]) == 0
            assert main(argv + ["--out", "r2"]) == 0
            b1 = Path("r1", report).read_bytes()
            b2 = Path("r2", report).read_bytes()
            assert b1 == b2, report
            return b1

        run_twice(["validate", manifest], "validate-report.json")
        run_twice(["shallow", manifest, "--seed", "5"], "shallow-report.json")
        run_twice(
            ["semi", manifest, "--epochs", "15", "--hidden", "4", "--seed", "5"],
            "semi-report.json",
        )
        run_twice(
            ["deep", manifest, "--epochs", "8", "--rounds", "3", "--hidden", "4",
             "--seed", "5"],
            "deep-report.json",
        )
        run_twice(
            ["eval", manifest, "--pred", "r1/shallow-predictions.csv",
             "--baseline", "shallow"],
            "eval-report.json",
        )

    def test_prediction_files_rerun_byte_identical(self, workdir):
        manifest = make_scenario("B", seed=7)
        main(["semi", manifest, "--epochs", "10", "--out", "r1", "--seed", "1"])
        main(["semi", manifest, "--epochs", "10", "--out", "r2", "--seed", "1"])
        assert (
            Path("r1/semi-predictions.csv").read_bytes()
            == Path("r2/semi-predictions.csv").read_bytes()
        )
        assert (
            Path("r1/semi-classifier.json").read_bytes()
            == Path("r2/semi-classifier.json").read_bytes()
        )


class TestOutputPlumbing:
    def test_out_dir_created_and_used(self, workdir):
        manifest = make_scenario("A")
        assert main(["shallow", manifest, "--out", "nested/results"]) == 0
        assert Path("nested/results/shallow-report.json").is_file()
        assert Path("nested/results/shallow-predictions.csv").is_file()
        assert not Path("shallow-report.json").exists()

    def test_log_env_var_does_not_change_reports(self, workdir, monkeypatch):
        manifest = make_scenario("A")
        assert main(["shallow", manifest, "--out", "quiet"]) == 0
        monkeypatch.setenv("LM_ENSEMBLE_LOG", "DEBUG")
        assert main(["shallow", manifest, "--out", "loud"]) == 0
        assert (
            Path("quiet/shallow-report.json").read_bytes()
            == Path("loud/shallow-report.json").read_bytes()
        )

    def test_reports_end_with_newline_and_sorted_keys(self, workdir):
        manifest = make_scenario("A")
        main(["shallow", manifest])
        raw = Path("shallow-report.json").read_text()
        assert raw.endswith("\n")
        keys = list(json.loads(raw))
        assert keys == sorted(keys)


class TestModuleEntryPoint:
    def test_python_dash_m_runs(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "lm_ensemble", "synth", "A",
             "--out", str(tmp_path / "d"), "--seed", "1"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "d" / "manifest.json").is_file()
        assert "scenario" in proc.stdout

    def test_usage_error_returncode(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "lm_ensemble", "bogus"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
