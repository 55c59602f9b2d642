import json

import numpy as np
import pytest

from rabi_xtalk.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from rabi_xtalk.core import load_chip
from rabi_xtalk.learning import load_report


def write_config(path, **doc):
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def test_generate_chip_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("generate-chip", "--seed", 3, "--output-dir", a) == EXIT_OK
    assert run("generate-chip", "--seed", 3, "--output-dir", b) == EXIT_OK
    assert (a / "chip.json").read_bytes() == (b / "chip.json").read_bytes()
    chip = load_chip(a / "chip.json")
    assert chip.qubit_count == 8


@pytest.mark.parametrize("hi", [0.0, 0.15])
def test_generate_beta_range(tmp_path, hi):
    cfg = write_config(tmp_path / "c.json", generate={"beta_range": [0.0, hi], "qubits": 6})
    assert run("generate-chip", "--config", cfg, "--output-dir", tmp_path) == EXIT_OK
    beta = load_chip(tmp_path / "chip.json").crosstalk.beta
    off = beta[~np.eye(6, dtype=bool)]
    assert off.max() <= hi
    if hi == 0.0:
        assert np.all(off == 0.0)


def test_characterize_pairs_filter_and_rerun(tmp_path):
    cfg = write_config(tmp_path / "c.json", generate={"qubits": 4})
    args = ("characterize", "--config", cfg, "--output-dir", tmp_path / "o", "--seed", 2, "--pairs", "1:0,2:3")
    assert run(*args) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "o" / "datasets").iterdir())
    assert files == ["a1_b0.csv", "a1_b0.json", "a2_b3.csv", "a2_b3.json"]
    report_bytes = (tmp_path / "o" / "fit_report.json").read_bytes()
    assert run(*args) == EXIT_OK
    assert (tmp_path / "o" / "fit_report.json").read_bytes() == report_bytes
    assert [r.pair for r in load_report(tmp_path / "o" / "fit_report.json").results] == [(1, 0), (2, 3)]


@pytest.mark.slow
def test_characterize_full_chip_with_disabled_readout(tmp_path):
    cfg = write_config(tmp_path / "c.json", generate={"disabled_readout": [5]})
    assert run("characterize", "--config", cfg, "--output-dir", tmp_path, "--workers", 4) == EXIT_OK
    assert len(list((tmp_path / "datasets").glob("*.json"))) == 49
    assert len(load_report(tmp_path / "fit_report.json").results) == 49


def test_fit_predict_verify_report_pipeline(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(tmp_path / "c.json", generate={"qubits": 4}, master_seed=1)
    assert run("characterize", "--config", cfg, "--output-dir", out) == EXIT_OK
    before = (out / "fit_report.json").read_bytes()
    assert run("fit", "--config", cfg, "--output-dir", out) == EXIT_OK
    assert (out / "fit_report.json").read_bytes() == before
    assert run("predict", "--config", cfg, "--output-dir", out, "--multiplet", "0:1,2", "--decompose") == EXIT_OK
    assert len(list((out / "predictions").glob("*.json"))) >= 3
    assert run("verify", "--config", cfg, "--output-dir", out, "--multiplet", "0:1,2", "--multiplet", "3:0,1,2") == EXIT_OK
    summary = json.loads((out / "verify" / "summary.json").read_text())
    assert len(summary["multiplets"]) == 2
    assert set(summary["median_chi2_per_dof_by_size"]) == {"3", "4"}
    assert run("report", "--config", cfg, "--output-dir", out) == EXIT_OK
    for name in ("crosstalk.dot", "graph.json", "chi2_hist.csv", "beta_hist.csv", "beta_theta.csv", "summary.csv"):
        assert (out / "report" / name).exists()
    scatter = (out / "report" / "beta_theta.csv").read_text().splitlines()
    assert len(scatter) == 1 + 12


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"generate": {"qubits": 1}}')
    assert run("generate-chip", "--config", bad, "--output-dir", tmp_path) == EXIT_CONFIG
    bad.write_text('{"generate": {"qbits": 4}}')
    assert run("generate-chip", "--config", bad, "--output-dir", tmp_path) == EXIT_CONFIG
    bad.write_text('{"generate": ')
    assert run("generate-chip", "--config", bad, "--output-dir", tmp_path) == EXIT_CONFIG
    assert run("report", "--output-dir", tmp_path / "missing") == EXIT_IO
    assert run("generate-chip", "--config", tmp_path / "nope.json") == EXIT_IO


def test_config_error_names_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"verify": {"sizes": [5]}}')
    assert run("verify", "--config", bad, "--output-dir", tmp_path) == EXIT_CONFIG
    assert "verify.sizes" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path / "c.json", output_dir=str(tmp_path / "from_cfg"), generate={"qubits": 3})
    assert run("generate-chip", "--config", cfg, "--output-dir", tmp_path / "from_flag") == EXIT_OK
    assert (tmp_path / "from_flag" / "chip.json").exists()
    assert not (tmp_path / "from_cfg").exists()
