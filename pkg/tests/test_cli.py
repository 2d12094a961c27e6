"""End-to-end coverage of the command-line interface and its run directories."""

import csv
import json
import os

import numpy as np
import pytest

from jointgibbs.cli import main
from jointgibbs.data import md_pattern, md_pattern_rows, read_csv
from jointgibbs.models import build_model_graph, describe_models


def _write_data(path, seed=12, n=50, miss=0.2):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    z = rng.normal(size=n)
    y = 1.0 + 2.0 * x - 1.5 * z + rng.normal(0.0, 0.5, n)
    gone = rng.random(n) < miss
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("y,x,z\n")
        for i in range(n):
            xs = "NA" if gone[i] else f"{x[i]:.6f}"
            fh.write(f"{y[i]:.6f},{xs},{z[i]:.6f}\n")
    return path


def _write_config(path, data, out, **extra):
    cfg = {
        "data": str(data),
        "formulas": ["y ~ x + z"],
        "n_iter": 120,
        "n_adapt": 40,
        "n_chains": 2,
        "seed": 7,
        "monitor_params": {"imps": True},
        "out": str(out),
    }
    cfg.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh)
    return path


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """One fitted run directory shared by the read-only commands."""
    root = tmp_path_factory.mktemp("clirun")
    data = _write_data(root / "data.csv")
    cfg = _write_config(root / "cfg.json", data, root / "run")
    assert main(["fit", "--config", str(cfg)]) == 0
    return root / "run"


class TestFit:
    def test_run_directory_contents(self, run_dir):
        for name in ("manifest.json", "meta.json", "model_graph.txt",
                     "samples_chain1.csv", "samples_chain2.csv",
                     "warnings.log"):
            assert (run_dir / name).exists()
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert manifest["seed"] == 7
        assert len(manifest["config_hash"]) == 64
        assert len(manifest["data_sha256"]) == 64
        meta = json.loads((run_dir / "meta.json").read_text())
        with open(run_dir / "samples_chain1.csv", newline="") as fh:
            header = next(csv.reader(fh))
        assert header == ["iteration"] + meta["nodes"]
        assert meta["iterations"][0] == 41
        assert len(meta["iterations"]) == 120

    def test_graph_dump_mirrors_the_model_description(self, run_dir):
        manifest = json.loads((run_dir / "manifest.json").read_text())
        ds = read_csv(manifest["config"]["data"])
        graph = build_model_graph(manifest["config"]["formulas"], ds,
                                  monitor_params={"imps": True})
        dump = (run_dir / "model_graph.txt").read_text()
        assert dump == describe_models(graph) + "\n"

    def test_same_seed_runs_are_byte_identical(self, tmp_path):
        data = _write_data(tmp_path / "d.csv", n=30)
        for out in ("a", "b"):
            code = main(["fit", "--data", str(data), "--formula", "y ~ x + z",
                         "--out", str(tmp_path / out), "--n-iter", "50",
                         "--n-adapt", "20", "--n-chains", "2", "--seed", "5"])
            assert code == 0
        for k in (1, 2):
            a = (tmp_path / "a" / f"samples_chain{k}.csv").read_bytes()
            b = (tmp_path / "b" / f"samples_chain{k}.csv").read_bytes()
            assert a == b

    def test_zero_iterations_dump_the_graph_only(self, tmp_path):
        data = _write_data(tmp_path / "d.csv", n=30)
        out = tmp_path / "dry"
        assert main(["fit", "--data", str(data), "--formula", "y ~ x + z",
                     "--out", str(out), "--n-iter", "0"]) == 0
        assert "Linear model" in (out / "model_graph.txt").read_text()
        meta = json.loads((out / "meta.json").read_text())
        assert meta["iterations"] == []
        with open(out / "samples_chain1.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1  # header only

    def test_flags_override_the_config_file(self, tmp_path):
        data = _write_data(tmp_path / "d.csv", n=30)
        cfg = _write_config(tmp_path / "cfg.json", data, tmp_path / "x",
                            n_iter=60, n_chains=1, n_adapt=10)
        out = tmp_path / "overridden"
        assert main(["fit", "--config", str(cfg), "--n-iter", "30",
                     "--out", str(out)]) == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["settings"]["n_iter"] == 30
        assert meta["settings"]["n_chains"] == 1

    def test_unknown_variable_exits_with_the_data_code(self, tmp_path, capsys):
        data = _write_data(tmp_path / "d.csv", n=20)
        code = main(["fit", "--data", str(data), "--formula", "y ~ ghost",
                     "--out", str(tmp_path / "x"), "--n-iter", "10"])
        assert code == 3
        assert "ghost" in capsys.readouterr().err

    def test_missing_required_option_exits_with_the_config_code(
            self, tmp_path, capsys):
        data = _write_data(tmp_path / "d.csv", n=20)
        code = main(["fit", "--data", str(data),
                     "--out", str(tmp_path / "x"), "--n-iter", "10"])
        assert code == 2
        assert "formulas" in capsys.readouterr().err

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        data = _write_data(tmp_path / "d.csv", n=20)
        cfg = _write_config(tmp_path / "cfg.json", data, tmp_path / "x",
                            bogus=1)
        assert main(["fit", "--config", str(cfg)]) == 2
        assert "bogus" in capsys.readouterr().err


class TestSummary:
    def test_prints_the_mcmc_settings_block(self, run_dir, capsys):
        assert main(["summary", str(run_dir)]) == 0
        text = capsys.readouterr().out
        assert "Iterations = 41:160" in text
        assert "Sample size per chain = 120" in text
        assert "Thinning interval = 1" in text
        assert "Number of chains = 2" in text
        assert "y.x" in text
        out = run_dir / "summary"
        assert (out / "summary.txt").exists()
        payload = json.loads((out / "summary.json").read_text())
        assert "y.x" in payload["nodes"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "summary"
        assert manifest["fit_config_hash"]

    def test_subset_flags_are_forwarded(self, run_dir, capsys):
        assert main(["summary", str(run_dir), "--start", "101",
                     "--exclude-chains", "2"]) == 0
        text = capsys.readouterr().out
        assert "Iterations = 101:160" in text
        assert "Number of chains = 1" in text

    def test_missing_run_directory_exits_with_the_config_code(
            self, tmp_path, capsys):
        assert main(["summary", str(tmp_path / "nope")]) == 2
        assert "not a run directory" in capsys.readouterr().err

    def test_changed_data_file_is_refused(self, tmp_path, capsys):
        data = _write_data(tmp_path / "d.csv", n=30)
        out = tmp_path / "run"
        assert main(["fit", "--data", str(data), "--formula", "y ~ x + z",
                     "--out", str(out), "--n-iter", "30", "--n-adapt", "10",
                     "--n-chains", "1", "--seed", "1"]) == 0
        with open(data, "a", encoding="utf-8") as fh:
            fh.write("0,0,0\n")
        assert main(["summary", str(out)]) == 3
        assert "changed since the fit" in capsys.readouterr().err


class TestDiagnose:
    def test_writes_tables_and_plot_data(self, run_dir, capsys):
        assert main(["diagnose", str(run_dir), "--plots", "trace,mcse_ratio",
                     "--subset", '{"analysis_main": true}']) == 0
        text = capsys.readouterr().out
        assert "GR-point" in text and "y.x" in text
        out = run_dir / "diagnose"
        payload = json.loads((out / "diagnose.json").read_text())
        assert "y.x" in payload["gelman_rubin"]
        assert payload["gelman_rubin"]["y.x"]["point"] > 0
        assert payload["mc_error"]["y.x"]["ratio"] > 0
        assert (out / "trace.csv").exists()
        assert (out / "trace.json").exists()
        assert (out / "mcse_ratio.csv").exists()
        with open(out / "trace.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["chain", "iteration", "node", "value"]
        assert len(rows) - 1 == 2 * 120 * 4

    def test_single_chain_run_reports_a_note(self, tmp_path, capsys):
        data = _write_data(tmp_path / "d.csv", n=30)
        out = tmp_path / "run"
        assert main(["fit", "--data", str(data), "--formula", "y ~ x + z",
                     "--out", str(out), "--n-iter", "40", "--n-adapt", "10",
                     "--n-chains", "1", "--seed", "2"]) == 0
        assert main(["diagnose", str(out)]) == 0
        payload = json.loads((out / "diagnose" / "diagnose.json").read_text())
        assert payload["gelman_rubin"] is None
        assert any("chains" in note for note in payload["notes"])


class TestPredict:
    def test_grid_prediction_artifacts(self, run_dir):
        assert main(["predict", str(run_dir), "--vars", "~ x",
                     "--grid-length", "4"]) == 0
        out = run_dir / "predict"
        with open(out / "prediction.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "z", "fit", "lo", "hi"]
        assert len(rows) - 1 == 4
        sidecar = (out / "prediction.json").read_text()
        assert sidecar.count("\n") == 1
        payload = json.loads(sidecar)
        assert payload["kind"] == "link"
        assert payload["n_rows"] == 4

    def test_overrides_multiply_the_grid(self, run_dir):
        assert main(["predict", str(run_dir), "--vars", "~ x",
                     "--grid-length", "3", "--override", "z=0,1"]) == 0
        payload = json.loads(
            (run_dir / "predict" / "prediction.json").read_text())
        assert payload["n_rows"] == 6

    def test_newdata_prediction(self, run_dir, tmp_path):
        nd = tmp_path / "nd.csv"
        nd.write_text("y,x,z\n0.0,0.5,1.0\n2.0,-0.5,0.0\n")
        assert main(["predict", str(run_dir), "--newdata", str(nd),
                     "--type", "response"]) == 0
        with open(run_dir / "predict" / "prediction.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) - 1 == 2

    def test_newdata_and_vars_together_rejected(self, run_dir, tmp_path,
                                                capsys):
        nd = tmp_path / "nd.csv"
        nd.write_text("y,x,z\n0,0,0\n")
        code = main(["predict", str(run_dir), "--newdata", str(nd),
                     "--vars", "~ x"])
        assert code == 2
        assert "not both" in capsys.readouterr().err


class TestImputeExport:
    def test_export_writes_the_stacked_data(self, run_dir):
        assert main(["impute-export", str(run_dir), "--m", "2",
                     "--seed", "5", "--minspace", "10"]) == 0
        out = run_dir / "impute"
        with open(out / "imputations.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["Imputation_", ".id", ".rownr", "y", "x", "z"]
        assert len(rows) - 1 == 3 * 50
        blocks = {r[0] for r in rows[1:]}
        assert blocks == {"0", "1", "2"}
        assert not any(c == "NA" for r in rows[1:] if r[0] != "0" for c in r)
        payload = json.loads((out / "imputations.json").read_text())
        assert len(payload["picks"]) == 2

    def test_without_the_original_block(self, run_dir, tmp_path):
        out = tmp_path / "exported"
        assert main(["impute-export", str(run_dir), "--m", "2", "--seed", "5",
                     "--minspace", "10", "--no-original",
                     "--out", str(out)]) == 0
        with open(out / "imputations.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) - 1 == 2 * 50
        assert {r[0] for r in rows[1:]} == {"1", "2"}

    def test_requires_monitored_imputations(self, tmp_path, capsys):
        data = _write_data(tmp_path / "d.csv", n=30)
        out = tmp_path / "run"
        assert main(["fit", "--data", str(data), "--formula", "y ~ x + z",
                     "--out", str(out), "--n-iter", "30", "--n-adapt", "10",
                     "--n-chains", "1", "--seed", "3"]) == 0
        code = main(["impute-export", str(out), "--m", "2", "--minspace", "5"])
        assert code == 2
        assert "imps" in capsys.readouterr().err


class TestMdPattern:
    def test_matrix_printed_and_written(self, tmp_path, capsys):
        data = tmp_path / "toy.csv"
        data.write_text("a,b,c\n1,2,3\n1,NA,3\n1,NA,NA\n1,2,3\n")
        out = tmp_path / "pattern"
        assert main(["md-pattern", "--data", str(data),
                     "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "count" in text
        ds = read_csv(str(data))
        expected = md_pattern_rows(md_pattern(ds))
        with open(out / "md_pattern.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows == [[str(c) for c in row] for row in expected]
        assert (out / "manifest.json").exists()

    def test_print_only_without_out(self, tmp_path, capsys):
        data = tmp_path / "toy.csv"
        data.write_text("a,b\n1,NA\n2,2\n")
        assert main(["md-pattern", "--data", str(data)]) == 0
        assert "count" in capsys.readouterr().out
        assert not (tmp_path / "md_pattern.csv").exists()


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "jointgibbs" in capsys.readouterr().out

    def test_bad_subset_json_rejected(self, run_dir, capsys):
        assert main(["summary", str(run_dir), "--subset", "{oops"]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_bad_quantiles_rejected(self, run_dir, capsys):
        assert main(["summary", str(run_dir), "--quantiles", "a,b"]) == 2
        assert "quantiles" in capsys.readouterr().err
