"""Forecaster registry.

``build_model`` is the one constructor call sites need; it resolves a
``ModelConfig.kind`` string to the implementing class.
"""

from .base import (
    MODEL_KINDS,
    ForecastModel,
    ModelConfig,
    count_parameters,
    default_config,
    load_parameters,
    save_parameters,
)
from .lstm import LSTMForecaster
from .qasa import QASAForecaster, scaled_dot_attention
from .qfwp import QFWPForecaster
from .qlstm import QLSTMForecaster
from .qrwkv import QRWKVForecaster

_REGISTRY = {
    "lstm": LSTMForecaster,
    "qlstm": QLSTMForecaster,
    "qasa": QASAForecaster,
    "qrwkv": QRWKVForecaster,
}


def build_model(config: ModelConfig) -> ForecastModel:
    if config.kind.startswith("qfwp"):
        if config.kind not in MODEL_KINDS:
            raise ValueError(
                f"unknown model {config.kind!r}; valid names: {', '.join(MODEL_KINDS)}"
            )
        return QFWPForecaster(config)
    try:
        cls = _REGISTRY[config.kind]
    except KeyError:
        raise ValueError(
            f"unknown model {config.kind!r}; valid names: {', '.join(MODEL_KINDS)}"
        ) from None
    return cls(config)


__all__ = [
    "MODEL_KINDS",
    "ForecastModel",
    "ModelConfig",
    "LSTMForecaster",
    "QLSTMForecaster",
    "QASAForecaster",
    "QRWKVForecaster",
    "QFWPForecaster",
    "build_model",
    "count_parameters",
    "default_config",
    "load_parameters",
    "save_parameters",
    "scaled_dot_attention",
]
