"""Shared forecaster plumbing: configs, parameter registry, serialization.

All models consume a window of T past values, shape (batch, T), and emit a
one-step-ahead prediction per row.  Parameters are registered on creation in
a fixed order, initialized from a generator seeded only by ``config.seed``:
classical tensors ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) with zero
biases, quantum angle banks ~ uniform(-pi/60, +pi/60).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..autodiff import Node, Parameter

PARAMS_FORMAT = "qseq-params"
PARAMS_VERSION = 1

INIT_STREAM = 0
SHUFFLE_STREAM = 1

QUANTUM_INIT_SCALE = np.pi / 60.0


def seeded_rng(seed: int, stream: int) -> np.random.Generator:
    """An independent generator for (seed, stream); streams never collide."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


@dataclass
class ModelConfig:
    """Hyperparameters for one forecaster; semantics of the generic fields
    depend on the kind (see ``default_config``)."""

    kind: str
    t: int = 8
    seed: int = 0
    n_qubits: int = 0
    n_quantum_layers: int = 0
    hidden: int = 0       # lstm: cell size; qasa: model dim; qrwkv: embed dim; qfwp: slow-net hidden
    heads: int = 0        # qasa attention heads
    ff_hidden: int = 0    # qasa / qrwkv feed-forward width
    n_blocks: int = 0     # qasa encoder layers / qrwkv mixing blocks
    encoding: str = "angle"  # qasa: "angle" or "amplitude"

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"window length must be >= 1, got {self.t}")


_DEFAULTS = {
    "lstm": dict(hidden=64),
    "qlstm": dict(n_qubits=5, n_quantum_layers=5, hidden=4),
    "qasa": dict(
        n_qubits=9, n_quantum_layers=4, hidden=128, heads=4, ff_hidden=256, n_blocks=4
    ),
    "qrwkv": dict(n_qubits=4, n_quantum_layers=2, hidden=128, ff_hidden=256, n_blocks=2),
    "qfwp8": dict(n_qubits=8, n_quantum_layers=2, hidden=8),
    "qfwp10": dict(n_qubits=10, n_quantum_layers=2, hidden=8),
    "qfwp12": dict(n_qubits=12, n_quantum_layers=2, hidden=8),
    "qfwp14": dict(n_qubits=14, n_quantum_layers=2, hidden=8),
}

MODEL_KINDS = tuple(_DEFAULTS)


def default_config(kind: str, t: int = 8, seed: int = 0, **overrides) -> ModelConfig:
    if kind not in _DEFAULTS:
        raise ValueError(
            f"unknown model {kind!r}; valid names: {', '.join(MODEL_KINDS)}"
        )
    fields = dict(_DEFAULTS[kind])
    fields.update(overrides)
    return ModelConfig(kind=kind, t=t, seed=seed, **fields)


class ForecastModel:
    """Base class: parameter registry plus the forward contract."""

    kind = "base"
    q_core = 0
    q_aux = 0

    def __init__(self, config: ModelConfig):
        self.config = config
        self.parameters: list[Parameter] = []
        self._rng = seeded_rng(config.seed, INIT_STREAM)

    # -- registry -----------------------------------------------------------

    def _classical(self, name: str, shape, fan_in: int) -> Parameter:
        bound = 1.0 / np.sqrt(fan_in)
        p = Parameter(name, self._rng.uniform(-bound, bound, size=shape), "classical")
        self.parameters.append(p)
        return p

    def _bias(self, name: str, size: int) -> Parameter:
        p = Parameter(name, np.zeros(size), "classical")
        self.parameters.append(p)
        return p

    def _quantum(self, name: str, shape) -> Parameter:
        p = Parameter(
            name,
            self._rng.uniform(-QUANTUM_INIT_SCALE, QUANTUM_INIT_SCALE, size=shape),
            "quantum",
        )
        self.parameters.append(p)
        return p

    # -- contract ------------------------------------------------------------

    @property
    def q_total(self) -> int:
        return self.q_core + self.q_aux

    @property
    def q_layers(self) -> int:
        return self.config.n_quantum_layers

    def forward(self, windows: np.ndarray) -> Node:
        raise NotImplementedError

    def predict(self, windows: np.ndarray) -> np.ndarray:
        return self.forward(windows).value

    def _check_windows(self, windows) -> np.ndarray:
        arr = np.asarray(windows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.config.t:
            raise ValueError(
                f"windows must be (batch, {self.config.t}), got {arr.shape}"
            )
        return arr

    def parameter_counts(self) -> tuple[int, int]:
        """(quantum, classical) value counts."""
        quantum = sum(p.value.size for p in self.parameters if p.kind == "quantum")
        classical = sum(p.value.size for p in self.parameters if p.kind == "classical")
        return quantum, classical

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for p in self.parameters:
            if p.name not in state:
                raise KeyError(f"missing parameter {p.name!r}")
            arr = np.asarray(state[p.name], dtype=np.float64)
            if arr.shape != p.value.shape:
                raise ValueError(
                    f"parameter {p.name!r}: shape {arr.shape} != {p.value.shape}"
                )
            p.value = arr.copy()


def count_parameters(model: ForecastModel) -> tuple[int, int]:
    return model.parameter_counts()


def save_parameters(model: ForecastModel, path) -> None:
    """Flat named-tensor archive with a version header entry."""
    header = json.dumps(
        {
            "format": PARAMS_FORMAT,
            "version": PARAMS_VERSION,
            "model": model.kind,
            "config": asdict(model.config),
        }
    )
    arrays = {p.name: p.value for p in model.parameters}
    np.savez(path, __header__=np.array(header), **arrays)


def load_parameters(model: ForecastModel, path) -> None:
    with np.load(path, allow_pickle=False) as archive:
        if "__header__" not in archive:
            raise ValueError("not a parameter archive: missing header")
        header = json.loads(str(archive["__header__"]))
        if header.get("format") != PARAMS_FORMAT:
            raise ValueError(f"unexpected archive format {header.get('format')!r}")
        if header.get("version") != PARAMS_VERSION:
            raise ValueError(f"unsupported archive version {header.get('version')!r}")
        if header.get("model") != model.kind:
            raise ValueError(
                f"archive holds {header.get('model')!r} weights, model is "
                f"{model.kind!r}"
            )
        model.load_state_dict({k: archive[k] for k in archive.files if k != "__header__"})
