"""Command line workflows: simulate -> fit -> summarize, exit codes, config files."""

import csv
import json
import os

import pytest

from covspec.cli import main

FAST_FIT = [
    "--iterations", "60",
    "--burnin", "10",
    "--tmin", "30",
    "--wmin", "1",
    "--max-time-seg", "2",
    "--max-cov-seg", "2",
    "--nbasis", "5",
    "--seed", "5",
    "--audit-every", "30",
]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = main(
        [
            "simulate", "--kind", "ar1", "--phi", "0.5",
            "--subjects", "4", "--length", "120", "--seed", "2",
            "--out", str(out),
        ]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def chain_file(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit") / "chain.jsonl"
    code = main(
        [
            "fit",
            "--series", str(sim_dir / "series.csv"),
            "--covariates", str(sim_dir / "covariates.csv"),
            "--out", str(out),
            *FAST_FIT,
        ]
    )
    assert code == 0
    return out


def test_simulate_writes_series_covariates_manifest(sim_dir):
    series = (sim_dir / "series.csv").read_text().strip().splitlines()
    assert len(series) == 4
    assert len(series[0].split(",")) == 120
    covs = (sim_dir / "covariates.csv").read_text().strip().splitlines()
    assert len(covs) == 4
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["kind"] == "ar1"
    assert manifest["phi"] == 0.5
    assert manifest["series"] == "series.csv"


def test_simulate_requires_phi_for_ar1(tmp_path, capsys):
    code = main(["simulate", "--kind", "ar1", "--out", str(tmp_path / "x")])
    assert code == 2
    assert "phi" in capsys.readouterr().err


def test_fit_writes_chain_and_report(chain_file):
    assert chain_file.exists()
    report = json.loads((chain_file.parent / "chain.report.json").read_text())
    assert report["n_chains"] == 1
    assert report["iterations"] == 60
    entry = report["chains"][0]
    assert entry["seed"] == 5
    assert entry["wall_time_sec"] > 0
    assert set(entry["acceptance"]) == {
        "time_between", "time_within", "cov_between", "cov_within", "refresh",
    }


def test_fit_same_seed_is_byte_identical(sim_dir, tmp_path, chain_file):
    out2 = tmp_path / "again.jsonl"
    code = main(
        [
            "fit",
            "--series", str(sim_dir / "series.csv"),
            "--covariates", str(sim_dir / "covariates.csv"),
            "--out", str(out2),
            *FAST_FIT,
        ]
    )
    assert code == 0
    assert out2.read_bytes() == chain_file.read_bytes()


def test_fit_multiple_chains(sim_dir, tmp_path):
    out = tmp_path / "multi.jsonl"
    code = main(
        [
            "fit",
            "--series", str(sim_dir / "series.csv"),
            "--covariates", str(sim_dir / "covariates.csv"),
            "--out", str(out),
            *FAST_FIT,
            "--iterations", "20",
            "--burnin", "5",
            "--chains", "2",
        ]
    )
    assert code == 0
    c0, c1 = tmp_path / "multi.0.jsonl", tmp_path / "multi.1.jsonl"
    assert c0.exists() and c1.exists()
    assert c0.read_bytes() != c1.read_bytes()  # seeds differ
    report = json.loads((tmp_path / "multi.report.json").read_text())
    assert [c["seed"] for c in report["chains"]] == [5, 6]


def test_config_file_applies_and_flags_override(sim_dir, tmp_path):
    cfg = tmp_path / "fit.cfg"
    cfg.write_text(
        "# sampler settings\n"
        "iterations = 25\n"
        "burnin = 5\n"
        "tmin = 30\n"
        "wmin = 1\n"
        "max-time-seg = 2\n"
        "max_cov_seg = 2\n"
        "nbasis = 5\n"
        "seed = 9\n"
        "audit_every = 25\n"
    )
    out = tmp_path / "cfg.jsonl"
    code = main(
        [
            "fit",
            "--series", str(sim_dir / "series.csv"),
            "--covariates", str(sim_dir / "covariates.csv"),
            "--out", str(out),
            "--config", str(cfg),
            "--iterations", "15",  # flag beats file
        ]
    )
    assert code == 0
    report = json.loads((tmp_path / "cfg.report.json").read_text())
    assert report["iterations"] == 15
    assert report["chains"][0]["seed"] == 9


def test_config_file_rejects_unknown_keys(sim_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mystery = 3\n")
    code = main(
        [
            "fit",
            "--series", str(sim_dir / "series.csv"),
            "--covariates", str(sim_dir / "covariates.csv"),
            "--out", str(tmp_path / "x.jsonl"),
            "--config", str(cfg),
        ]
    )
    assert code == 2
    assert "mystery" in capsys.readouterr().err


def test_summarize_writes_tables_and_figures(chain_file, tmp_path):
    out = tmp_path / "report"
    code = main(
        [
            "summarize",
            "--chain", str(chain_file),
            "--out", str(out),
            "--u-points", "8",
            "--freq-points", "17",
        ]
    )
    assert code == 0
    for name in (
        "model_posterior.csv",
        "time_cuts.csv",
        "cov_cuts.csv",
        "surface.csv",
        "collapsed.csv",
        "summary.json",
        "model_posterior.png",
        "time_cuts.png",
        "cov_cuts.png",
        "surface.png",
        "collapsed.png",
    ):
        assert (out / name).exists(), name
        assert (out / name).stat().st_size > 0, name
    with open(out / "model_posterior.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert sum(float(r["probability"]) for r in rows) == pytest.approx(1.0)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_records"] == 50  # 60 iterations - 10 burn-in
    assert summary["modal_m"] >= 1 and summary["modal_p"] >= 1
    with open(out / "surface.csv", newline="") as fh:
        surows = list(csv.DictReader(fh))
    assert len(surows) == len(set((r["covariate"], r["time"], r["frequency"]) for r in surows))


def test_summarize_no_plots(chain_file, tmp_path):
    out = tmp_path / "noplots"
    code = main(["summarize", "--chain", str(chain_file), "--out", str(out), "--no-plots",
                 "--u-points", "4", "--freq-points", "9"])
    assert code == 0
    assert (out / "model_posterior.csv").exists()
    assert not list(out.glob("*.png"))


def test_summarize_pools_chains_and_rejects_mismatched_configs(sim_dir, tmp_path):
    out_a = tmp_path / "a.jsonl"
    out_b = tmp_path / "b.jsonl"
    common = [
        "fit",
        "--series", str(sim_dir / "series.csv"),
        "--covariates", str(sim_dir / "covariates.csv"),
        *FAST_FIT,
        "--iterations", "20",
        "--burnin", "4",
    ]
    assert main([*common, "--out", str(out_a)]) == 0
    assert main([*common, "--out", str(out_b), "--seed", "6"]) == 0
    out = tmp_path / "pooled"
    code = main(
        [
            "summarize", "--chain", str(out_a), "--chain", str(out_b),
            "--out", str(out), "--no-plots", "--u-points", "4", "--freq-points", "9",
        ]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_records"] == 32  # 2 x (20 - 4)

    mismatched = tmp_path / "c.jsonl"
    assert main([*common, "--out", str(mismatched), "--nbasis", "6"]) == 0
    code = main(
        [
            "summarize", "--chain", str(out_a), "--chain", str(mismatched),
            "--out", str(tmp_path / "bad"), "--no-plots",
        ]
    )
    assert code == 2


def test_exit_code_3_for_bad_data(tmp_path, capsys):
    series = tmp_path / "ragged.csv"
    series.write_text("1,2,3\n4,5\n")
    covs = tmp_path / "covs.csv"
    covs.write_text("0.0\n1.0\n")
    code = main(
        ["fit", "--series", str(series), "--covariates", str(covs),
         "--out", str(tmp_path / "x.jsonl"), *FAST_FIT]
    )
    assert code == 3
    assert "data error" in capsys.readouterr().err


def test_exit_code_4_for_missing_files(tmp_path, capsys):
    code = main(
        ["fit", "--series", str(tmp_path / "none.csv"),
         "--covariates", str(tmp_path / "none2.csv"),
         "--out", str(tmp_path / "x.jsonl"), *FAST_FIT]
    )
    assert code == 4
    code = main(["summarize", "--chain", str(tmp_path / "ghost.jsonl"), "--out", str(tmp_path)])
    assert code == 4
    capsys.readouterr()


def test_exit_code_2_for_bad_settings(sim_dir, tmp_path, capsys):
    code = main(
        ["fit", "--series", str(sim_dir / "series.csv"),
         "--covariates", str(sim_dir / "covariates.csv"),
         "--out", str(tmp_path / "x.jsonl"), "--tmin", "2"]
    )
    assert code == 2
    code = main(
        ["fit", "--series", str(sim_dir / "series.csv"),
         "--covariates", str(sim_dir / "covariates.csv"),
         "--out", str(tmp_path / "x.jsonl"), *FAST_FIT, "--chains", "0"]
    )
    assert code == 2
    capsys.readouterr()


def test_summarize_quantile_level_validation(chain_file, tmp_path, capsys):
    code = main(
        ["summarize", "--chain", str(chain_file), "--out", str(tmp_path / "q"),
         "--quantile-level", "1.5", "--no-plots"]
    )
    assert code == 2
    capsys.readouterr()
