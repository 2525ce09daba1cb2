"""Classical LSTM baseline: one unidirectional layer plus a linear head.

Both the input->hidden and hidden->hidden maps carry their own bias vector
(the usual dual-bias bookkeeping), which is what puts the default census at
4*(64*1 + 64*64) + 2*4*64 + 65 = 17217 trainable values.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    Node,
    add,
    add_bias,
    constant,
    matmul,
    mul,
    narrow,
    reshape,
    sigmoid,
    tanh,
)
from .base import ForecastModel, ModelConfig


class LSTMForecaster(ForecastModel):
    kind = "lstm"

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h = config.hidden
        if h < 1:
            raise ValueError("lstm needs hidden >= 1")
        self.hidden = h
        # gate order along the 4h axis: input, forget, cell, output
        self.w_ih = self._classical("w_ih", (1, 4 * h), fan_in=1)
        self.w_hh = self._classical("w_hh", (h, 4 * h), fan_in=h)
        self.b_ih = self._bias("b_ih", 4 * h)
        self.b_hh = self._bias("b_hh", 4 * h)
        self.w_head = self._classical("w_head", (h, 1), fan_in=h)
        self.b_head = self._bias("b_head", 1)

    def forward(self, windows: np.ndarray) -> Node:
        windows = self._check_windows(windows)
        batch = windows.shape[0]
        h = self.hidden
        hidden = constant(np.zeros((batch, h)))
        cell = constant(np.zeros((batch, h)))
        for t in range(self.config.t):
            x_t = constant(windows[:, t : t + 1])
            z = add(
                add_bias(matmul(x_t, self.w_ih), self.b_ih),
                add_bias(matmul(hidden, self.w_hh), self.b_hh),
            )
            i_gate = sigmoid(narrow(z, 1, 0, h))
            f_gate = sigmoid(narrow(z, 1, h, h))
            g_gate = tanh(narrow(z, 1, 2 * h, h))
            o_gate = sigmoid(narrow(z, 1, 3 * h, h))
            cell = add(mul(f_gate, cell), mul(i_gate, g_gate))
            hidden = mul(o_gate, tanh(cell))
        out = add_bias(matmul(hidden, self.w_head), self.b_head)
        return reshape(out, (batch,))
