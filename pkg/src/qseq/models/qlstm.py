"""LSTM cell whose four gates are variational quantum circuits.

Per step, the scalar input and the 4-dim hidden state concatenate into five
RY-encoded angles (no Hadamard layer: zero inputs leave the register in
|00000> so an untrained forget gate reads sigmoid(<Z>=1)).  Each gate owns a
five-qubit circuit of five (CNOT ring, then RY column) layers — 25 angles per
gate, 100 quantum parameters in total — measured on the first four qubits.
The only classical parameters are the 4->1 readout and its bias.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    Node,
    add,
    add_bias,
    concat,
    constant,
    expand_rows,
    matmul,
    mul,
    narrow,
    reshape,
    sigmoid,
    tanh,
)
from ..autodiff import quantum_expect
from ..statevector import CircuitSpec, GateOp, build_ring_variational
from .base import ForecastModel, ModelConfig

GATE_NAMES = ("forget", "input", "update", "output")


def build_gate_circuit(n_qubits: int, n_layers: int, n_measured: int) -> CircuitSpec:
    gates = [GateOp("RY", q, input_slot=q) for q in range(n_qubits)]
    frag, n_par = build_ring_variational(
        n_qubits, n_layers, ("RY",), entangle_first=True
    )
    gates.extend(frag)
    return CircuitSpec(
        n_qubits,
        tuple(gates),
        n_input_slots=n_qubits,
        n_param_slots=n_par,
        measured_qubits=tuple(range(n_measured)),
    )


class QLSTMForecaster(ForecastModel):
    kind = "qlstm"
    q_core = 5
    q_aux = 0

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        if config.n_qubits != config.hidden + 1:
            raise ValueError("qlstm needs n_qubits == hidden + 1 (scalar input)")
        self.hidden = config.hidden
        self.circuit = build_gate_circuit(
            config.n_qubits, config.n_quantum_layers, config.hidden
        )
        self.thetas = {
            name: self._quantum(f"theta_{name}", self.circuit.n_param_slots)
            for name in GATE_NAMES
        }
        self.w_head = self._classical("w_head", (config.hidden, 1), fan_in=config.hidden)
        self.b_head = self._bias("b_head", 1)

    @staticmethod
    def cell_update(cell, f_gate, i_gate, g_gate, o_gate):
        """c' = f*c + i*g;  h' = o * tanh(c')."""
        new_cell = add(mul(f_gate, cell), mul(i_gate, g_gate))
        new_hidden = mul(o_gate, tanh(new_cell))
        return new_cell, new_hidden

    def forward(self, windows: np.ndarray) -> Node:
        windows = self._check_windows(windows)
        batch = windows.shape[0]
        h = self.hidden
        hidden = constant(np.zeros((batch, h)))
        cell = constant(np.zeros((batch, h)))
        # all four gate circuits share one dispatch per step: rows 0..B-1 are
        # the forget gate, B..2B-1 the input gate, and so on, with the per-row
        # parameter table carrying each gate's own angles
        theta_rows = concat(
            [expand_rows(self.thetas[name], batch) for name in GATE_NAMES], axis=0
        )
        for t in range(self.config.t):
            x_t = constant(windows[:, t : t + 1])
            angles = concat([x_t, hidden], axis=1)
            z = quantum_expect(
                self.circuit, concat([angles] * len(GATE_NAMES), axis=0), theta_rows
            )
            f_gate = sigmoid(narrow(z, 0, 0, batch))
            i_gate = sigmoid(narrow(z, 0, batch, batch))
            g_gate = tanh(narrow(z, 0, 2 * batch, batch))
            o_gate = sigmoid(narrow(z, 0, 3 * batch, batch))
            cell, hidden = self.cell_update(cell, f_gate, i_gate, g_gate, o_gate)
        out = add_bias(matmul(hidden, self.w_head), self.b_head)
        return reshape(out, (batch,))
