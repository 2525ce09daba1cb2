"""Command-line front end.

Six commands: ``ingest`` (raw telecom dumps -> canonical series CSV),
``synth`` (deterministic synthetic series), ``train`` (one model, one run),
``benchmark`` (the full model x window-length x seed sweep), ``complexity``
(architecture table) and ``report`` (rebuild pivots and report.json from an
existing runs.csv).

All commands accept ``--config`` pointing at a JSON document with sections
``data``, ``models``, ``train`` and ``output``; command-line flags override
config values, and the ``QSEQ_OUT_DIR`` environment variable supplies the
default output directory when neither a flag nor the config names one.

Exit codes: 0 success, 1 usage error (bad flags or config), 2 data error,
3 run failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from pathlib import Path

import jsonschema

from .bench import (
    BenchError,
    BenchReport,
    RunResult,
    RUNS_HEADER,
    TrainConfig,
    aggregate_runs,
    complexity_csv,
    complexity_table,
    emit_report,
    multi_run,
    persistence_baseline,
    train,
)
from .data import (
    SYNTH_KINDS,
    CellSeries,
    IngestError,
    SelectionError,
    SplitError,
    aggregate,
    build_datasets,
    load_milan,
    read_series_csv,
    select_active,
    synthesize,
    write_series_csv,
)
from .models import MODEL_KINDS, build_model, default_config, save_parameters


class UsageError(Exception):
    """Bad flags or config; maps to exit code 1."""


DEFAULT_CONFIG = {
    "data": {
        "source": "synthetic",
        "kind": "sinusoid",
        "length": 2000,
        "noise_sd": 0.05,
        "seed": 0,
        "period": 48,
        "path": None,
        "square_id": None,
        "coverage": 0.95,
        "fractions": [0.70, 0.15, 0.15],
    },
    "models": list(MODEL_KINDS),
    "train": {
        "lr": 1e-3,
        "batch_size": 16,
        "max_epochs": 50,
        "early_stop_patience": 10,
        "weight_decay": 0.01,
        "seeds": [0, 1, 2, 3, 4],
        "seq_lens": [4, 8, 12, 16, 32, 64],
        "metric_space": "normalized",
    },
    "output": {"dir": None},
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["synthetic", "csv"]},
                "kind": {"enum": list(SYNTH_KINDS)},
                "length": {"type": "integer", "minimum": 200},
                "noise_sd": {"type": "number", "minimum": 0},
                "seed": {"type": "integer"},
                "period": {"type": "integer", "minimum": 2},
                "path": {"type": ["string", "null"]},
                "square_id": {"type": ["integer", "null"]},
                "coverage": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "fractions": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
        },
        "models": {
            "type": "array",
            "items": {"type": "string"},
            "minItems": 1,
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "max_epochs": {"type": "integer", "minimum": 1},
                "early_stop_patience": {"type": ["integer", "null"], "minimum": 0},
                "weight_decay": {"type": "number", "minimum": 0},
                "seeds": {
                    "type": "array",
                    "items": {"type": "integer"},
                    "minItems": 1,
                },
                "seq_lens": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
                "metric_space": {"enum": ["normalized", "denormalized"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": ["string", "null"]}},
        },
    },
}


def _pointer(error: jsonschema.ValidationError) -> str:
    return "".join(f"/{part}" for part in error.absolute_path) or "/"


def load_config(path: str | None) -> dict:
    """Defaults overlaid with the config file; schema violations become a
    UsageError naming every offending JSON-pointer path."""
    merged = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return merged
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise UsageError(f"config {path} is not valid JSON: {err}") from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    problems = sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
    if problems:
        detail = "; ".join(f"{_pointer(e)}: {e.message}" for e in problems)
        raise UsageError(f"config {path}: {detail}")
    for section, value in payload.items():
        if isinstance(value, dict):
            merged[section].update(value)
        else:
            merged[section] = value
    return merged


def _split_flag(raw: str, caster, flag: str):
    try:
        return tuple(caster(part) for part in raw.split(",") if part != "")
    except ValueError:
        raise UsageError(f"{flag} expects a comma-separated list, got {raw!r}") from None


def _train_config(config: dict, args) -> TrainConfig:
    fields = dict(config["train"])
    fields["models"] = tuple(config["models"])
    if getattr(args, "models", None):
        fields["models"] = _split_flag(args.models, str, "--models")
    if getattr(args, "seq_lens", None):
        fields["seq_lens"] = _split_flag(args.seq_lens, int, "--seq-lens")
    if getattr(args, "seeds", None):
        fields["seeds"] = _split_flag(args.seeds, int, "--seeds")
    try:
        return TrainConfig(**fields)
    except BenchError as err:
        raise UsageError(str(err)) from None


def _load_series(config: dict) -> CellSeries:
    data = config["data"]
    if data["source"] == "synthetic":
        return synthesize(
            data["kind"],
            length=data["length"],
            noise_sd=data["noise_sd"],
            seed=data["seed"],
            period=data["period"],
        )
    if not data["path"]:
        raise UsageError("data.source is 'csv' but data.path is not set")
    cells = read_series_csv(data["path"])
    if data["square_id"] is not None:
        for cell in cells:
            if cell.square_id == data["square_id"]:
                return cell
        raise IngestError(
            f"{data['path']}: no cell {data['square_id']}; "
            f"available: {sorted(c.square_id for c in cells)}"
        )
    if len(cells) > 1:
        raise UsageError(
            f"{data['path']} holds {len(cells)} cells; set data.square_id"
        )
    return cells[0]


def _out_dir(args, config: dict) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if config["output"]["dir"]:
        return Path(config["output"]["dir"])
    env = os.environ.get("QSEQ_OUT_DIR")
    return Path(env) if env else Path(".")


def _out_file(args, config: dict, default_name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return _out_dir(args, config) / default_name


# ---------------------------------------------------------------------------
# commands


def _cmd_ingest(args) -> int:
    config = load_config(args.config)
    coverage = args.coverage if args.coverage is not None else config["data"]["coverage"]
    parsed = load_milan(_split_flag(args.input, str, "--input"))
    cells = aggregate(parsed)
    kept = select_active(cells, coverage)
    out = _out_file(args, config, "series.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_series_csv(kept, out)
    print(
        f"kept {len(kept)}/{len(cells)} cells at coverage >= {coverage}; "
        f"{parsed.malformed} malformed and {parsed.skipped} empty-value lines skipped",
        file=sys.stderr,
    )
    print(out)
    return 0


def _cmd_synth(args) -> int:
    config = load_config(args.config)
    data = dict(config["data"])
    for name, flag in (
        ("kind", args.kind),
        ("length", args.length),
        ("noise_sd", args.noise_sd),
        ("seed", args.seed),
        ("period", args.period),
    ):
        if flag is not None:
            data[name] = flag
    try:
        series = synthesize(
            data["kind"],
            length=data["length"],
            noise_sd=data["noise_sd"],
            seed=data["seed"],
            period=data["period"],
        )
    except ValueError as err:
        raise UsageError(str(err)) from None
    out = _out_file(args, config, "series.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_series_csv(series, out)
    print(out)
    return 0


def _cmd_train(args) -> int:
    config = load_config(args.config)
    train_cfg = _train_config(config, args)
    if args.model not in MODEL_KINDS:
        raise UsageError(
            f"unknown model {args.model!r}; valid names: {', '.join(MODEL_KINDS)}"
        )
    series = _load_series(config)
    datasets, normalizer = build_datasets(
        series, args.seq_len, tuple(config["data"]["fractions"])
    )
    model = build_model(default_config(args.model, t=args.seq_len, seed=args.seed))
    result = train(model, datasets, train_cfg, args.seed, normalizer)
    out = _out_dir(args, config)
    out.mkdir(parents=True, exist_ok=True)
    if not result.completed:
        print(f"error: {result.error}", file=sys.stderr)
        return 3
    params_path = out / f"{args.model}_t{args.seq_len}_seed{args.seed}.npz"
    save_parameters(model, params_path)
    metrics = {
        "model": args.model,
        "seq_len": args.seq_len,
        "seed": args.seed,
        "epochs": result.epochs,
        "best_val_loss": result.best_val_loss,
        "mae": result.mae,
        "mse": result.mse,
        "metric_space": train_cfg.metric_space,
    }
    (out / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"{args.model} t={args.seq_len} seed={args.seed}: "
        f"mae={result.mae:.6f} mse={result.mse:.6f} after {result.epochs} epochs"
    )
    print(params_path)
    return 0


def _cmd_benchmark(args) -> int:
    config = load_config(args.config)
    train_cfg = _train_config(config, args)
    series = _load_series(config)
    report = multi_run(
        train_cfg,
        series,
        fractions=tuple(config["data"]["fractions"]),
        jobs=args.jobs,
    )
    out = _out_dir(args, config)
    emit_report(report, out_dir=out)
    failed = [r for r in report.runs if not r.completed]
    for run in failed:
        print(
            f"aborted: {run.model} t={run.seq_len} seed={run.seed}: {run.error}",
            file=sys.stderr,
        )
    print(f"{len(report.runs) - len(failed)}/{len(report.runs)} runs completed")
    print(out / "runs.csv")
    return 3 if failed else 0


def _cmd_complexity(args) -> int:
    config = load_config(args.config)
    kinds = config["models"]
    if getattr(args, "models", None):
        kinds = _split_flag(args.models, str, "--models")
    unknown = [k for k in kinds if k not in MODEL_KINDS]
    if unknown:
        raise UsageError(
            f"unknown models {unknown}; valid names: {', '.join(MODEL_KINDS)}"
        )
    out = _out_file(args, config, "complexity.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(complexity_csv(complexity_table(kinds)), encoding="utf-8")
    print(out)
    return 0


def _parse_runs_csv(path: Path) -> list[RunResult]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != RUNS_HEADER:
            raise IngestError(
                f"{path}: expected header {','.join(RUNS_HEADER)}"
            )
        runs = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(RUNS_HEADER):
                raise IngestError(f"{path}: bad row {row!r}")
            model, seq_len, seed, mae, mse, epochs, completed = row
            runs.append(
                RunResult(
                    model=model,
                    seq_len=int(seq_len),
                    seed=int(seed),
                    epochs=int(epochs),
                    best_val_loss=None,
                    mae=float(mae),
                    mse=float(mse),
                    wall_s=0.0,
                    completed=completed == "True",
                )
            )
    return runs


def _cmd_report(args) -> int:
    config = load_config(args.config)
    train_cfg = _train_config(config, args)
    runs = _parse_runs_csv(Path(args.runs))
    missing = [r.model for r in runs if r.model not in train_cfg.models]
    if missing:
        raise UsageError(
            f"runs.csv mentions models outside the config roster: {sorted(set(missing))}"
        )
    series = _load_series(config)
    baselines = []
    for t in sorted(set(train_cfg.seq_lens)):
        datasets, normalizer = build_datasets(
            series, t, tuple(config["data"]["fractions"])
        )
        mae, mse = persistence_baseline(
            datasets["test"], normalizer, train_cfg.metric_space
        )
        baselines.append({"seq_len": t, "mae": mae, "mse": mse})
    report = BenchReport(train_cfg, runs, aggregate_runs(runs), baselines)
    out = _out_dir(args, config)
    emit_report(report, out_dir=out)
    print(out / "report.json")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run config (sections data/models/train/output)")
    parser.add_argument("--out", help="output file or directory (default: QSEQ_OUT_DIR or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qseq", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser(
        "ingest", help="raw telecom TSV dumps -> canonical series CSV"
    )
    ingest.add_argument(
        "--input", required=True, help="input file, glob, or comma-separated list"
    )
    ingest.add_argument(
        "--coverage", type=float, default=None,
        help="minimum grid coverage for a cell to be kept (default 0.95)",
    )
    _add_common(ingest)
    ingest.set_defaults(func=_cmd_ingest)

    synth = commands.add_parser("synth", help="write a deterministic synthetic series")
    synth.add_argument("--kind", choices=SYNTH_KINDS, default=None,
                       help="series shape (default sinusoid)")
    synth.add_argument("--length", type=int, default=None, help="points (default 2000)")
    synth.add_argument("--noise-sd", dest="noise_sd", type=float, default=None,
                       help="additive noise level (default 0.05)")
    synth.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    synth.add_argument("--period", type=int, default=None,
                       help="sinusoid period in samples (default 48)")
    _add_common(synth)
    synth.set_defaults(func=_cmd_synth)

    train_cmd = commands.add_parser("train", help="train a single model once")
    train_cmd.add_argument("--model", required=True, help="architecture name")
    train_cmd.add_argument("--seq-len", dest="seq_len", type=int, default=8,
                           help="input window length T (default 8)")
    train_cmd.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    _add_common(train_cmd)
    train_cmd.set_defaults(func=_cmd_train)

    benchmark = commands.add_parser(
        "benchmark", help="full model x window-length x seed sweep"
    )
    benchmark.add_argument("--models", default=None,
                           help="comma-separated architecture names")
    benchmark.add_argument("--seq-lens", dest="seq_lens", default=None,
                           help="comma-separated window lengths (default 4,8,12,16,32,64)")
    benchmark.add_argument("--seeds", default=None,
                           help="comma-separated seeds (default 0,1,2,3,4)")
    benchmark.add_argument("--jobs", type=int, default=1,
                           help="worker processes (default 1 for strict determinism)")
    _add_common(benchmark)
    benchmark.set_defaults(func=_cmd_benchmark)

    complexity = commands.add_parser(
        "complexity", help="architecture complexity table as CSV"
    )
    complexity.add_argument("--models", default=None,
                            help="comma-separated architecture names")
    _add_common(complexity)
    complexity.set_defaults(func=_cmd_complexity)

    report = commands.add_parser(
        "report", help="rebuild pivots and report.json from an existing runs.csv"
    )
    report.add_argument("--runs", required=True, help="path to runs.csv")
    report.add_argument("--models", default=None,
                        help="comma-separated architecture names")
    report.add_argument("--seq-lens", dest="seq_lens", default=None,
                        help="comma-separated window lengths")
    report.add_argument("--seeds", default=None, help="comma-separated seeds")
    _add_common(report)
    report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (IngestError, SelectionError, SplitError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except BenchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
