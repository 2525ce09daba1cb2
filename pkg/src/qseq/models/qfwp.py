"""Fast-weight programmer driving a variational circuit.

A small slow network maps each input to two vectors, L (one entry per
circuit layer) and Q (one per qubit); their outer product is added onto the
circuit's angle table, so the fast weights accumulate over the window and
reset to the trainable base table at every new window.  The circuit itself is
Hadamards, an RY data-encoding column (a learned linear lift of the scalar),
then per layer an RY column reading the fast-weight table plus a CNOT ring;
all qubits are measured and a linear head reads the final step.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    Node,
    add,
    add_bias,
    constant,
    expand_rows,
    matmul,
    narrow,
    outer,
    quantum_expect,
    reshape,
    tanh,
)
from ..statevector import CircuitSpec, GateOp, build_ring_variational
from .base import ForecastModel, ModelConfig


def build_fast_weight_circuit(n_qubits: int, n_layers: int) -> CircuitSpec:
    gates = [GateOp("H", q) for q in range(n_qubits)]
    gates += [GateOp("RY", q, input_slot=q) for q in range(n_qubits)]
    frag, n_par = build_ring_variational(n_qubits, n_layers, ("RY",))
    gates.extend(frag)
    return CircuitSpec(
        n_qubits,
        tuple(gates),
        n_input_slots=n_qubits,
        n_param_slots=n_par,
        measured_qubits=tuple(range(n_qubits)),
    )


class QFWPForecaster(ForecastModel):
    q_aux = 0

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        n = config.n_qubits
        layers = config.n_quantum_layers
        slow_hidden = config.hidden
        if n < 2 or layers < 1 or slow_hidden < 1:
            raise ValueError("qfwp needs n_qubits >= 2, layers >= 1, hidden >= 1")
        self.kind = config.kind
        self.q_core = n
        self.n_qubits = n
        self.n_layers = layers
        self.circuit = build_fast_weight_circuit(n, layers)
        # base angle table, layer-major to match the circuit's slot order
        self.theta_base = self._quantum("theta_base", (layers, n))
        self.w_lift = self._classical("w_lift", (1, n), fan_in=1)
        self.b_lift = self._bias("b_lift", n)
        self.w_slow1 = self._classical("w_slow1", (1, slow_hidden), fan_in=1)
        self.b_slow1 = self._bias("b_slow1", slow_hidden)
        self.w_slow2 = self._classical("w_slow2", (slow_hidden, layers + n), fan_in=slow_hidden)
        self.b_slow2 = self._bias("b_slow2", layers + n)
        self.w_head = self._classical("w_head", (n, 1), fan_in=n)
        self.b_head = self._bias("b_head", 1)

    def slow_network(self, x_t: Node) -> tuple[Node, Node]:
        """x_t (batch, 1) -> (L (batch, layers), Q (batch, qubits))."""
        hid = tanh(add_bias(matmul(x_t, self.w_slow1), self.b_slow1))
        out = add_bias(matmul(hid, self.w_slow2), self.b_slow2)
        l_vec = narrow(out, 1, 0, self.n_layers)
        q_vec = narrow(out, 1, self.n_layers, self.n_qubits)
        return l_vec, q_vec

    def step(self, theta: Node, x_t: Node) -> tuple[Node, Node]:
        """One fast-weight update followed by a circuit evaluation.

        theta is (batch, layers, qubits); the update is purely additive:
        theta' = theta + L (x) Q, and the circuit runs with theta'.
        """
        l_vec, q_vec = self.slow_network(x_t)
        theta = add(theta, outer(l_vec, q_vec))
        angles = add_bias(matmul(x_t, self.w_lift), self.b_lift)
        batch = x_t.value.shape[0]
        flat = reshape(theta, (batch, self.n_layers * self.n_qubits))
        z_t = quantum_expect(self.circuit, angles, flat)
        return theta, z_t

    def forward(self, windows: np.ndarray) -> Node:
        windows = self._check_windows(windows)
        batch = windows.shape[0]
        theta = expand_rows(self.theta_base, batch)
        z_t = None
        for t in range(self.config.t):
            x_t = constant(windows[:, t : t + 1])
            theta, z_t = self.step(theta, x_t)
        out = add_bias(matmul(z_t, self.w_head), self.b_head)
        return reshape(out, (batch,))
