"""Training engine, sweep orchestration, complexity accounting, reports.

``train`` runs mini-batch AdamW on MSE with optional early stopping on
validation loss and best-weights restore.  ``multi_run`` schedules the
(model, window length, seed) grid on a worker pool — each job is internally
single threaded and fully determined by its seed — and merges results in
sorted order regardless of completion order.  Reported metrics default to
the normalized [0,1] space the models are trained in; a switch converts
them back to raw units via the stored normalizer.

``complexity_table`` emits one row per architecture combining the exact
trainable-parameter census of this implementation with the reference
parameter-split figures the hybridization ratio is quoted against, plus the
coarse per-gate estimator (qubits * layers * R).  The two accountings are
printed side by side on purpose; where they disagree the table shows it
rather than hiding it.

Report files: ``runs.csv`` (one row per completed or aborted run),
``pivot_mae.csv`` / ``pivot_mse.csv`` (window length rows x model columns),
``complexity.csv``, and ``report.json`` mirroring all of them.  Every value
in the CSVs is deterministic for a fixed config and seed set; wall-clock
timings live only in the JSON ``meta`` block so reruns produce byte-identical
CSVs.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from io import StringIO
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import AdamW, mse_loss
from .data import (
    DEFAULT_FRACTIONS,
    CellSeries,
    Normalizer,
    WindowDataset,
    build_datasets,
)
from .models import MODEL_KINDS, build_model, default_config
from .models.base import SHUFFLE_STREAM, seeded_rng

DEFAULT_SEQ_LENS = (4, 8, 12, 16, 32, 64)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
GATES_PER_QUBIT_PER_LAYER = 3
METRIC_SPACES = ("normalized", "denormalized")

# Reference parameter-split figures for the standard architecture roster.
# kind -> (est_quantum, est_classical); the ratio column of the complexity
# table is defined over these, while the census columns carry what this
# implementation actually instantiates.
REFERENCE_ESTIMATES = {
    "qfwp8": (90, 25),
    "qfwp10": (132, 31),
    "qfwp12": (182, 37),
    "qfwp14": (240, 43),
    "qasa": (36, 595609),
    "qlstm": (100, 5),
    "qrwkv": (16, 1774976),
    "lstm": (0, 17217),
}
TABLE_ORDER = tuple(REFERENCE_ESTIMATES)


class BenchError(ValueError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    max_epochs: int = 50
    early_stop_patience: int | None = 10
    weight_decay: float = 0.01
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    seq_lens: tuple[int, ...] = DEFAULT_SEQ_LENS
    models: tuple[str, ...] = MODEL_KINDS
    metric_space: str = "normalized"

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.seq_lens = tuple(int(t) for t in self.seq_lens)
        self.models = tuple(self.models)
        if self.lr <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise BenchError("lr must be positive, batch_size and max_epochs >= 1")
        if self.early_stop_patience is not None and self.early_stop_patience < 0:
            raise BenchError("patience must be >= 0 or None to disable")
        if self.metric_space not in METRIC_SPACES:
            raise BenchError(f"metric_space must be one of {METRIC_SPACES}")
        if not self.seeds or not self.seq_lens or not self.models:
            raise BenchError("need at least one seed, window length and model")
        unknown = [m for m in self.models if m not in MODEL_KINDS]
        if unknown:
            raise BenchError(
                f"unknown models {unknown}; valid names: {', '.join(MODEL_KINDS)}"
            )

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["seeds"] = list(self.seeds)
        payload["seq_lens"] = list(self.seq_lens)
        payload["models"] = list(self.models)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(payload) - known
        if extra:
            raise BenchError(f"unknown train settings: {sorted(extra)}")
        return cls(**payload)


@dataclass
class RunResult:
    model: str
    seq_len: int
    seed: int
    epochs: int
    best_val_loss: float | None
    mae: float
    mse: float
    wall_s: float
    completed: bool = True
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BenchReport:
    config: TrainConfig
    runs: list[RunResult]
    aggregates: list[dict]
    baselines: list[dict] = field(default_factory=list)


# ---------------------------------------------------------------------------
# metrics


def _to_space(values: np.ndarray, normalizer: Normalizer | None, space: str):
    if space == "normalized":
        return values
    if normalizer is None:
        raise BenchError("denormalized metrics need the fitted normalizer")
    return normalizer.inverse(values)


def _metrics(pred, target, normalizer=None, space="normalized"):
    pred = _to_space(np.asarray(pred), normalizer, space)
    target = _to_space(np.asarray(target), normalizer, space)
    err = pred - target
    return float(np.abs(err).mean()), float((err**2).mean())


def evaluate(model, dataset: WindowDataset, normalizer=None, space="normalized"):
    """(MAE, MSE) of the model on the dataset, in the requested space."""
    if len(dataset) == 0:
        raise BenchError("cannot evaluate on an empty dataset")
    preds = np.concatenate(
        [
            model.predict(dataset.inputs[i : i + 256])
            for i in range(0, len(dataset), 256)
        ]
    )
    return _metrics(preds, dataset.targets, normalizer, space)


def persistence_baseline(dataset: WindowDataset, normalizer=None, space="normalized"):
    """Metrics of the last-observed-value predictor on the dataset."""
    if len(dataset) == 0:
        raise BenchError("cannot evaluate on an empty dataset")
    return _metrics(dataset.inputs[:, -1], dataset.targets, normalizer, space)


# ---------------------------------------------------------------------------
# training


def _param_norms(model) -> str:
    worst = sorted(
        ((float(np.max(np.abs(p.value))), p.name) for p in model.parameters),
        reverse=True,
    )[:3]
    return ", ".join(f"{name}={value:.3e}" for value, name in worst)


def train(
    model,
    datasets: dict[str, WindowDataset],
    config: TrainConfig,
    seed: int,
    normalizer: Normalizer | None = None,
) -> RunResult:
    """Mini-batch AdamW on MSE with early stopping and best-weights restore.

    The stopping signal is always the normalized-space validation MSE; the
    reported test metrics follow ``config.metric_space``.  A non-finite loss
    aborts the run and flags the result instead of raising.
    """
    train_ds, val_ds, test_ds = datasets["train"], datasets["val"], datasets["test"]
    t = model.config.t
    if not (train_ds.t == val_ds.t == test_ds.t == t):
        raise BenchError("train/val/test window lengths must match the model")
    if len(train_ds) == 0:
        raise BenchError("cannot train on an empty dataset")
    patience = config.early_stop_patience
    if len(val_ds) == 0 and patience is not None:
        raise BenchError(
            "early stopping needs a validation split; "
            "set early_stop_patience=None for a two-way split"
        )

    start = time.perf_counter()

    def aborted(epoch: int, detail: str) -> RunResult:
        return RunResult(
            model=model.config.kind,
            seq_len=t,
            seed=seed,
            epochs=epoch,
            best_val_loss=None,
            mae=float("nan"),
            mse=float("nan"),
            wall_s=time.perf_counter() - start,
            completed=False,
            error=(
                f"non-finite {detail} at epoch {epoch} "
                f"(lr={config.lr}, largest weights: {_param_norms(model)})"
            ),
        )

    rng = seeded_rng(seed, SHUFFLE_STREAM)
    optimizer = AdamW(
        model.parameters, lr=config.lr, weight_decay=config.weight_decay
    )
    best_val = np.inf
    best_state = None
    bad_epochs = 0
    epochs_run = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_ds))
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss = mse_loss(model.forward(train_ds.inputs[idx]), train_ds.targets[idx])
            if not np.isfinite(loss.value):
                return aborted(epoch + 1, "training loss")
            loss.backward()
            optimizer.step()
        epochs_run = epoch + 1
        if len(val_ds) == 0:
            continue
        _, val_mse = evaluate(model, val_ds)
        if not np.isfinite(val_mse):
            return aborted(epochs_run, "validation loss")
        if val_mse < best_val:
            best_val = val_mse
            best_state = model.state_dict()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if patience is not None and bad_epochs > patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    mae, mse = evaluate(model, test_ds, normalizer, config.metric_space)
    return RunResult(
        model=model.config.kind,
        seq_len=t,
        seed=seed,
        epochs=epochs_run,
        best_val_loss=None if best_state is None else float(best_val),
        mae=mae,
        mse=mse,
        wall_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# sweep orchestration


def _series_payload(series: CellSeries) -> dict:
    return {
        "square_id": series.square_id,
        "intervals": series.intervals,
        "values": series.values,
        "coverage": series.coverage,
    }


def _run_job(args) -> RunResult:
    kind, t, seed, config_payload, series_payload, fractions = args
    config = TrainConfig.from_dict(config_payload)
    series = CellSeries(**series_payload)
    datasets, normalizer = build_datasets(series, t, fractions)
    model = build_model(default_config(kind, t=t, seed=seed))
    return train(model, datasets, config, seed, normalizer)


def aggregate_runs(runs: Sequence[RunResult]) -> list[dict]:
    """Mean and sample std of MAE/MSE per (model, T) over completed runs."""
    cells: dict[tuple[str, int], list[RunResult]] = {}
    for run in runs:
        cells.setdefault((run.model, run.seq_len), []).append(run)
    out = []
    for model, seq_len in sorted(cells):
        completed = [r for r in cells[(model, seq_len)] if r.completed]
        entry = {
            "model": model,
            "seq_len": seq_len,
            "count": len(completed),
            "aborted": len(cells[(model, seq_len)]) - len(completed),
        }
        for name in ("mae", "mse"):
            values = np.array([getattr(r, name) for r in completed])
            entry[f"{name}_mean"] = float(values.mean()) if len(values) else None
            entry[f"{name}_std"] = (
                float(values.std(ddof=1)) if len(values) > 1 else 0.0
            ) if len(values) else None
        out.append(entry)
    return out


def multi_run(
    config: TrainConfig,
    series: CellSeries,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    jobs: int = 1,
) -> BenchReport:
    """Run the full (model, window length, seed) grid over one series."""
    grid = sorted(
        (kind, t, seed)
        for kind in config.models
        for t in config.seq_lens
        for seed in config.seeds
    )
    payload = _series_payload(series)
    args = [
        (kind, t, seed, config.to_dict(), payload, tuple(fractions))
        for kind, t, seed in grid
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_job, args))
    else:
        runs = [_run_job(a) for a in args]
    baselines = []
    for t in sorted(set(config.seq_lens)):
        datasets, normalizer = build_datasets(series, t, fractions)
        mae, mse = persistence_baseline(
            datasets["test"], normalizer, config.metric_space
        )
        baselines.append({"seq_len": t, "mae": mae, "mse": mse})
    return BenchReport(config, runs, aggregate_runs(runs), baselines)


# ---------------------------------------------------------------------------
# complexity accounting


def estimate_quantum_params(
    q_total: int, q_layers: int, r: int = GATES_PER_QUBIT_PER_LAYER
) -> int:
    """Coarse count: qubits * layers * (average parameterized gates/qubit/layer)."""
    if q_total < 0 or q_layers < 0 or r < 0:
        raise BenchError("counts must be nonnegative")
    return q_total * q_layers * r


def gamma(est_quantum: float, est_classical: float) -> float:
    """Quantum-to-classical parameter ratio; the +1 guard applies only to an
    all-quantum model (zero classical parameters), so published ratios like
    100/5 = 20 come out exact."""
    if est_quantum < 0 or est_classical < 0:
        raise BenchError("counts must be nonnegative")
    if est_classical == 0:
        return est_quantum / (est_classical + 1.0)
    return est_quantum / est_classical


@dataclass
class ComplexityRow:
    model: str
    q_core: int
    q_aux: int
    q_total: int
    q_layers: int
    params_total: int
    params_trainable: int
    est_quantum: int
    est_classical: int
    gamma: float
    census_quantum: int
    census_classical: int
    census_total: int
    formula_quantum: int

    def to_dict(self) -> dict:
        return asdict(self)


def complexity_table(kinds: Sequence[str] | None = None) -> list[ComplexityRow]:
    """One row per architecture, reference split + live census side by side."""
    if kinds is None:
        kinds = TABLE_ORDER
    rows = []
    for kind in [k for k in TABLE_ORDER if k in set(kinds)]:
        model = build_model(default_config(kind))
        census_q, census_c = model.parameter_counts()
        est_q, est_c = REFERENCE_ESTIMATES[kind]
        rows.append(
            ComplexityRow(
                model=kind,
                q_core=model.q_core,
                q_aux=model.q_aux,
                q_total=model.q_total,
                q_layers=model.q_layers,
                params_total=est_q + est_c,
                params_trainable=est_q + est_c,
                est_quantum=est_q,
                est_classical=est_c,
                gamma=gamma(est_q, est_c),
                census_quantum=census_q,
                census_classical=census_c,
                census_total=census_q + census_c,
                formula_quantum=estimate_quantum_params(
                    model.q_total, model.q_layers
                ),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# report emission

RUNS_HEADER = ("model", "seq_len", "seed", "mae", "mse", "epochs", "completed")
COMPLEXITY_HEADER = tuple(ComplexityRow.__dataclass_fields__)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(header, rows) -> str:
    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buffer.getvalue()


def _runs_csv(runs: Sequence[RunResult]) -> str:
    rows = [
        (r.model, r.seq_len, r.seed, r.mae, r.mse, r.epochs, r.completed)
        for r in sorted(runs, key=lambda r: (r.model, r.seq_len, r.seed))
    ]
    return _csv_text(RUNS_HEADER, rows)


def _pivot(report: BenchReport, metric: str) -> dict:
    """seq_len rows x model columns of mean metric over completed runs."""
    models = [m for m in report.config.models]
    lens = sorted(set(report.config.seq_lens))
    table = {}
    for entry in report.aggregates:
        table[(entry["model"], entry["seq_len"])] = entry[f"{metric}_mean"]
    return {
        "columns": models,
        "rows": [
            {
                "seq_len": t,
                "cells": [table.get((m, t)) for m in models],
            }
            for t in lens
        ],
    }


def _pivot_csv(pivot: dict) -> str:
    header = ["seq_len"] + list(pivot["columns"])
    rows = [
        [row["seq_len"]] + ["" if c is None else c for c in row["cells"]]
        for row in pivot["rows"]
    ]
    return _csv_text(header, rows)


def complexity_csv(rows: Sequence[ComplexityRow]) -> str:
    """Render complexity rows as CSV text (header + one line per model)."""
    return _csv_text(
        COMPLEXITY_HEADER,
        [[getattr(r, name) for name in COMPLEXITY_HEADER] for r in rows],
    )


def emit_report(
    report: BenchReport,
    out_dir=None,
    complexity: Sequence[ComplexityRow] | None = None,
) -> dict[str, str]:
    """Render all report documents; write them when out_dir is given.

    Wall-clock values appear only under report.json's ``meta`` key, keeping
    every CSV byte-identical across reruns of the same config.
    """
    if complexity is None:
        complexity = complexity_table(report.config.models)
    pivot_mae = _pivot(report, "mae")
    pivot_mse = _pivot(report, "mse")
    run_rows = []
    meta_wall = {}
    for run in sorted(report.runs, key=lambda r: (r.model, r.seq_len, r.seed)):
        payload = run.to_dict()
        meta_wall[f"{run.model}:t={run.seq_len}:seed={run.seed}"] = payload.pop(
            "wall_s"
        )
        for key in ("mae", "mse", "best_val_loss"):
            if payload[key] is not None and not np.isfinite(payload[key]):
                payload[key] = None
        run_rows.append(payload)
    body = {
        "config": report.config.to_dict(),
        "runs": run_rows,
        "aggregates": report.aggregates,
        "baselines": report.baselines,
        "pivot_mae": pivot_mae,
        "pivot_mse": pivot_mse,
        "complexity": [row.to_dict() for row in complexity],
        "meta": {
            "created_unix": time.time(),
            "wall_s_total": sum(meta_wall.values()),
            "wall_s": meta_wall,
        },
    }
    documents = {
        "runs.csv": _runs_csv(report.runs),
        "pivot_mae.csv": _pivot_csv(pivot_mae),
        "pivot_mse.csv": _pivot_csv(pivot_mse),
        "complexity.csv": complexity_csv(complexity),
        "report.json": json.dumps(body, indent=2, sort_keys=True) + "\n",
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in documents.items():
            (out_dir / name).write_text(text, encoding="utf-8")
    return documents
