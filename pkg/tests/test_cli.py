import json

import numpy as np
import pytest

from qseq.cli import DEFAULT_CONFIG, load_config, main
from qseq.data import read_series_csv
from qseq.models import MODEL_KINDS

GOOD_LINE = "1\t1383260400000\t39\t0.42\t\t\t\t"


@pytest.fixture(autouse=True)
def _isolate(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("QSEQ_OUT_DIR", raising=False)
    return tmp_path


def _write_config(path, **sections):
    path.write_text(json.dumps(sections), encoding="utf-8")
    return str(path)


def _tiny_bench_config(tmp_path, **train_overrides):
    train = {"max_epochs": 1, "early_stop_patience": None, "seeds": [0, 1], "seq_lens": [4]}
    train.update(train_overrides)
    return _write_config(
        tmp_path / "cfg.json",
        data={"length": 400},
        models=["lstm"],
        train=train,
    )


# ---------------------------------------------------------------------------
# parsing and config plumbing


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for command in ("ingest", "synth", "train", "benchmark", "complexity", "report"):
        assert command in out


def test_unknown_command_is_usage_error(capsys):
    assert main(["bogus"]) == 1


def test_missing_required_flag_is_usage_error(capsys):
    assert main(["ingest"]) == 1
    assert "--input" in capsys.readouterr().err


def test_config_defaults_without_file():
    cfg = load_config(None)
    assert cfg == DEFAULT_CONFIG
    assert cfg is not DEFAULT_CONFIG  # caller owns a private copy


def test_config_schema_violation_reports_pointer(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", train={"lr": "fast"})
    assert main(["synth", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "/train/lr" in err


def test_config_multiple_violations_all_reported(tmp_path, capsys):
    cfg = _write_config(
        tmp_path / "cfg.json",
        data={"source": "ftp"},
        train={"seeds": []},
    )
    assert main(["synth", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "/data/source" in err and "/train/seeds" in err


def test_config_unknown_section_rejected(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", extra={"x": 1})
    assert main(["synth", "--config", cfg]) == 1


def test_config_invalid_json(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["synth", "--config", str(path)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_config_file_missing(capsys):
    assert main(["synth", "--config", "nope.json"]) == 1
    assert "not found" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# synth


def test_synth_writes_series(tmp_path):
    out = tmp_path / "series.csv"
    assert main(["synth", "--length", "400", "--out", str(out)]) == 0
    (series,) = read_series_csv(out)
    assert len(series) == 400


def test_synth_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--length", "400", "--out", str(a)]) == 0
    assert main(["synth", "--length", "400", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_synth_rejects_short_series(capsys):
    assert main(["synth", "--length", "100"]) == 1
    assert "length" in capsys.readouterr().err


def test_synth_honours_env_out_dir(tmp_path, monkeypatch):
    target = tmp_path / "artifacts"
    monkeypatch.setenv("QSEQ_OUT_DIR", str(target))
    assert main(["synth", "--length", "400"]) == 0
    assert (target / "series.csv").exists()


def test_out_flag_beats_env(tmp_path, monkeypatch):
    monkeypatch.setenv("QSEQ_OUT_DIR", str(tmp_path / "ignored"))
    explicit = tmp_path / "explicit.csv"
    assert main(["synth", "--length", "400", "--out", str(explicit)]) == 0
    assert explicit.exists()
    assert not (tmp_path / "ignored").exists()


# ---------------------------------------------------------------------------
# ingest


def _dump(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_ingest_end_to_end(tmp_path, capsys):
    base = 1383260400000
    lines = [f"1\t{base + i * 600000}\t39\t{0.1 * (i + 1)}\t\t\t\t" for i in range(30)]
    _dump(tmp_path / "a.txt", lines[:15])
    _dump(tmp_path / "b.txt", lines[15:])
    out = tmp_path / "series.csv"
    code = main(["ingest", "--input", str(tmp_path / "*.txt"), "--out", str(out)])
    assert code == 0
    err = capsys.readouterr().err
    assert "kept 1/1 cells" in err
    (series,) = read_series_csv(out)
    assert len(series) == 30


def test_ingest_missing_file(capsys):
    assert main(["ingest", "--input", "missing.txt"]) == 2
    assert "missing.txt" in capsys.readouterr().err


def test_ingest_empty_input_list(capsys):
    assert main(["ingest", "--input", ""]) == 2
    assert "no input files" in capsys.readouterr().err


def test_ingest_coverage_one_on_gappy_data(tmp_path, capsys):
    base = 1383260400000
    # every second interval missing: coverage ~0.5
    lines = [f"7\t{base + 2 * i * 600000}\t39\t1.0\t\t\t\t" for i in range(20)]
    _dump(tmp_path / "gappy.txt", lines)
    code = main(
        ["ingest", "--input", str(tmp_path / "gappy.txt"), "--coverage", "1.0"]
    )
    assert code == 2
    assert "no cell reaches coverage 1.0" in capsys.readouterr().err


def test_ingest_malformed_over_threshold(tmp_path, capsys):
    _dump(tmp_path / "bad.txt", ["just one broken line"])
    assert main(["ingest", "--input", str(tmp_path / "bad.txt")]) == 2
    err = capsys.readouterr().err
    assert "bad.txt" in err


# ---------------------------------------------------------------------------
# train


def test_train_single_run(tmp_path):
    cfg = _tiny_bench_config(tmp_path)
    out = tmp_path / "run"
    code = main(
        ["train", "--model", "lstm", "--seq-len", "4", "--config", cfg, "--out", str(out)]
    )
    assert code == 0
    assert (out / "lstm_t4_seed0.npz").exists()
    metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    assert metrics["model"] == "lstm"
    assert np.isfinite(metrics["mse"])


def test_train_unknown_model_lists_names(capsys):
    assert main(["train", "--model", "qgru"]) == 1
    err = capsys.readouterr().err
    for kind in MODEL_KINDS:
        assert kind in err


# ---------------------------------------------------------------------------
# benchmark


def test_benchmark_sweep(tmp_path):
    cfg = _tiny_bench_config(tmp_path)
    out = tmp_path / "bench"
    code = main(["benchmark", "--config", cfg, "--out", str(out)])
    assert code == 0
    for name in (
        "runs.csv",
        "pivot_mae.csv",
        "pivot_mse.csv",
        "complexity.csv",
        "report.json",
    ):
        assert (out / name).exists()
    lines = (out / "runs.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3  # header + 2 seeds
    assert lines[1].startswith("lstm,4,0,")


def test_benchmark_reruns_byte_identical(tmp_path):
    cfg = _tiny_bench_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["benchmark", "--config", cfg, "--out", str(a), "--jobs", "1"]) == 0
    assert main(["benchmark", "--config", cfg, "--out", str(b), "--jobs", "1"]) == 0
    assert (a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()
    assert (a / "pivot_mae.csv").read_bytes() == (b / "pivot_mae.csv").read_bytes()


def test_benchmark_parallel_matches_serial(tmp_path):
    cfg = _tiny_bench_config(tmp_path)
    a, b = tmp_path / "serial", tmp_path / "parallel"
    assert main(["benchmark", "--config", cfg, "--out", str(a), "--jobs", "1"]) == 0
    assert main(["benchmark", "--config", cfg, "--out", str(b), "--jobs", "2"]) == 0
    assert (a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()


def test_benchmark_flag_overrides(tmp_path):
    cfg = _tiny_bench_config(tmp_path)
    out = tmp_path / "bench"
    code = main(
        ["benchmark", "--config", cfg, "--out", str(out), "--seeds", "3"]
    )
    assert code == 0
    lines = (out / "runs.csv").read_text(encoding="utf-8").splitlines()
    assert lines[1].startswith("lstm,4,3,")
    assert len(lines) == 2


def test_benchmark_invalid_model_name(tmp_path, capsys):
    cfg = _tiny_bench_config(tmp_path)
    assert main(["benchmark", "--config", cfg, "--models", "lstm,qgru"]) == 1
    err = capsys.readouterr().err
    for kind in MODEL_KINDS:
        assert kind in err


# ---------------------------------------------------------------------------
# complexity


def test_complexity_default_roster(tmp_path):
    out = tmp_path / "complexity.csv"
    assert main(["complexity", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 9  # header + 8 architectures
    qlstm = next(line for line in lines if line.startswith("qlstm,"))
    assert ",20.0," in qlstm


def test_complexity_single_model(tmp_path):
    out = tmp_path / "one.csv"
    assert main(["complexity", "--models", "lstm", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("lstm,")


def test_complexity_rejects_unknown(capsys):
    assert main(["complexity", "--models", "qgru"]) == 1


# ---------------------------------------------------------------------------
# report


def test_report_rebuilds_from_runs_csv(tmp_path):
    cfg = _tiny_bench_config(tmp_path)
    bench_out = tmp_path / "bench"
    assert main(["benchmark", "--config", cfg, "--out", str(bench_out)]) == 0
    rebuilt = tmp_path / "rebuilt"
    code = main(
        [
            "report",
            "--runs",
            str(bench_out / "runs.csv"),
            "--config",
            cfg,
            "--out",
            str(rebuilt),
        ]
    )
    assert code == 0
    assert (rebuilt / "runs.csv").read_bytes() == (bench_out / "runs.csv").read_bytes()
    original = json.loads((bench_out / "report.json").read_text(encoding="utf-8"))
    again = json.loads((rebuilt / "report.json").read_text(encoding="utf-8"))
    assert again["pivot_mae"] == original["pivot_mae"]
    assert again["aggregates"] == original["aggregates"]
    assert again["baselines"] == original["baselines"]


def test_report_rejects_foreign_models(tmp_path, capsys):
    runs = tmp_path / "runs.csv"
    runs.write_text(
        "model,seq_len,seed,mae,mse,epochs,completed\nqfwp8,4,0,0.1,0.02,3,True\n",
        encoding="utf-8",
    )
    cfg = _tiny_bench_config(tmp_path)
    assert main(["report", "--runs", str(runs), "--config", cfg]) == 1
    assert "qfwp8" in capsys.readouterr().err


def test_report_rejects_bad_header(tmp_path, capsys):
    runs = tmp_path / "runs.csv"
    runs.write_text("model,mae\nlstm,0.1\n", encoding="utf-8")
    cfg = _tiny_bench_config(tmp_path)
    assert main(["report", "--runs", str(runs), "--config", cfg]) == 2
