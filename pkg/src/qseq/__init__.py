"""Hybrid quantum-classical sequence models for one-step-ahead forecasting.

The package stacks five layers, each usable on its own:

- ``statevector``: differentiable dense statevector circuit simulator
- ``autodiff``: reverse-mode engine the models are written against
- ``data``: telecom-traffic ingestion, synthetic series, windowing
- ``models``: LSTM baseline plus four quantum-enhanced architectures
- ``bench``: training loop, sweep orchestration, complexity accounting
- ``cli``: the ``qseq`` command-line front end
"""

from .statevector import (
    MAX_QUBITS,
    CircuitSpec,
    GateOp,
    SimulationError,
    StateVector,
    apply_gate,
    build_ring_variational,
    expect_z,
    grad_expect_z,
    run,
    run_batch,
    vjp_expect_z_batch,
)
from .autodiff import (
    AdamW,
    Node,
    Parameter,
    constant,
    finite_difference_check,
    mse_loss,
    quantum_expect,
    quantum_expect_amplitude,
)
from .data import (
    CellSeries,
    Normalizer,
    WindowDataset,
    aggregate,
    build_datasets,
    build_pooled_datasets,
    load_milan,
    read_series_csv,
    select_active,
    synthesize,
    write_series_csv,
)
from .models import (
    MODEL_KINDS,
    ForecastModel,
    ModelConfig,
    build_model,
    count_parameters,
    default_config,
    load_parameters,
    save_parameters,
)
from .bench import (
    BenchReport,
    RunResult,
    TrainConfig,
    aggregate_runs,
    complexity_table,
    emit_report,
    estimate_quantum_params,
    evaluate,
    gamma,
    multi_run,
    persistence_baseline,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_QUBITS",
    "CircuitSpec",
    "GateOp",
    "SimulationError",
    "StateVector",
    "apply_gate",
    "build_ring_variational",
    "expect_z",
    "grad_expect_z",
    "run",
    "run_batch",
    "vjp_expect_z_batch",
    "AdamW",
    "Node",
    "Parameter",
    "constant",
    "finite_difference_check",
    "mse_loss",
    "quantum_expect",
    "quantum_expect_amplitude",
    "CellSeries",
    "Normalizer",
    "WindowDataset",
    "aggregate",
    "build_datasets",
    "build_pooled_datasets",
    "load_milan",
    "read_series_csv",
    "select_active",
    "synthesize",
    "write_series_csv",
    "MODEL_KINDS",
    "ForecastModel",
    "ModelConfig",
    "build_model",
    "count_parameters",
    "default_config",
    "load_parameters",
    "save_parameters",
    "BenchReport",
    "RunResult",
    "TrainConfig",
    "aggregate_runs",
    "complexity_table",
    "emit_report",
    "estimate_quantum_params",
    "evaluate",
    "gamma",
    "multi_run",
    "persistence_baseline",
    "train",
    "__version__",
]
