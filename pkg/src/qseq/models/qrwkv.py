"""Receptance-weighted backbone with a quantum hidden readout.

Tokens (a learned lift of each scalar) pass through two mixing blocks.  The
time-mix sublayer blends each token with its predecessor, runs an
exponential moving average with a learned per-channel decay over the value
path, gates it with the receptance sigmoid, and adds the result back; the
channel-mix sublayer is the squared-ReLU feed-forward variant of the same
shift-and-blend pattern.  Each mixed token is then projected to four angles
and fed through a single 4-qubit, 2-layer circuit (RY+RZ per qubit per
layer, 16 quantum parameters); its <Z> readout is the per-step hidden state
from which three linear maps derive q/k/v.  The
prediction attends from the final position over all steps (plain softmax of
inner products, no scaling) and reads the mixed values through a linear head.

The classical width is configurable; the quantum side is fixed at 16 angles.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    Node,
    Parameter,
    add,
    add_bias,
    concat,
    constant,
    dot_rows,
    matmul,
    mul,
    mul_vec,
    narrow,
    quantum_expect,
    relu,
    reshape,
    scale_rows,
    sigmoid,
    softmax,
)
from ..statevector import CircuitSpec, GateOp, build_ring_variational
from .base import ForecastModel, ModelConfig


def build_hidden_circuit(n_qubits: int, n_layers: int) -> CircuitSpec:
    gates = [GateOp("RY", q, input_slot=q) for q in range(n_qubits)]
    frag, n_par = build_ring_variational(n_qubits, n_layers, ("RY", "RZ"))
    gates.extend(frag)
    return CircuitSpec(
        n_qubits,
        tuple(gates),
        n_input_slots=n_qubits,
        n_param_slots=n_par,
        measured_qubits=tuple(range(n_qubits)),
    )


class _Block:
    """Parameter bundle for one (time-mix, channel-mix) pair."""

    def __init__(self, model: "QRWKVForecaster", index: int):
        d = model.dim
        ff = model.config.ff_hidden
        grade = np.arange(d) / max(d - 1, 1)

        def graded(name, values):
            p = Parameter(name, values, "classical")
            model.parameters.append(p)
            return p

        self.mu_r = graded(f"b{index}_mu_r", grade.copy())
        self.mu_v = graded(f"b{index}_mu_v", grade.copy())
        self.decay = graded(f"b{index}_decay", -1.0 + 2.0 * grade)
        self.w_r = model._classical(f"b{index}_w_r", (d, d), fan_in=d)
        self.w_v = model._classical(f"b{index}_w_v", (d, d), fan_in=d)
        self.w_o = model._classical(f"b{index}_w_o", (d, d), fan_in=d)
        self.mu_ck = graded(f"b{index}_mu_ck", grade.copy())
        self.mu_cr = graded(f"b{index}_mu_cr", grade.copy())
        self.w_ck = model._classical(f"b{index}_w_ck", (d, ff), fan_in=d)
        self.w_cv = model._classical(f"b{index}_w_cv", (ff, d), fan_in=ff)
        self.w_cr = model._classical(f"b{index}_w_cr", (d, d), fan_in=d)


def _lerp(prev: Node, cur: Node, mu: Node) -> Node:
    """prev + (cur - prev) * mu, channel-wise."""
    return add(prev, mul_vec(add(cur, -prev), mu))


class QRWKVForecaster(ForecastModel):
    kind = "qrwkv"
    q_core = 4
    q_aux = 0

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        if config.hidden < 1 or config.ff_hidden < 1 or config.n_blocks < 1:
            raise ValueError("qrwkv needs hidden, ff_hidden and n_blocks >= 1")
        self.dim = config.hidden
        self.circuit = build_hidden_circuit(config.n_qubits, config.n_quantum_layers)
        self.w_emb = self._classical("w_emb", (1, self.dim), fan_in=1)
        self.b_emb = self._bias("b_emb", self.dim)
        self.blocks = [_Block(self, i) for i in range(config.n_blocks)]
        self.w_ang = self._classical("w_ang", (self.dim, config.n_qubits), fan_in=self.dim)
        self.b_ang = self._bias("b_ang", config.n_qubits)
        self.theta = self._quantum("theta", self.circuit.n_param_slots)
        n = config.n_qubits
        self.w_q = self._classical("w_q", (n, n), fan_in=n)
        self.b_q = self._bias("b_q", n)
        self.w_k = self._classical("w_k", (n, n), fan_in=n)
        self.b_k = self._bias("b_k", n)
        self.w_v = self._classical("w_v", (n, n), fan_in=n)
        self.b_v = self._bias("b_v", n)
        self.w_head = self._classical("w_head", (n, 1), fan_in=n)
        self.b_head = self._bias("b_head", 1)

    def _time_mix(self, block: _Block, tokens: list[Node], batch: int):
        zeros = constant(np.zeros((batch, self.dim)))
        decay = sigmoid(block.decay)
        fresh = 1.0 - decay
        state = zeros
        prev = zeros
        outputs = []
        for cur in tokens:
            xr = _lerp(prev, cur, block.mu_r)
            xv = _lerp(prev, cur, block.mu_v)
            prev = cur
            gate = sigmoid(matmul(xr, block.w_r))
            value = matmul(xv, block.w_v)
            state = add(mul_vec(state, decay), mul_vec(value, fresh))
            outputs.append(add(cur, matmul(mul(gate, state), block.w_o)))
        return outputs

    def _channel_mix(self, block: _Block, tokens: list[Node], batch: int):
        prev = constant(np.zeros((batch, self.dim)))
        outputs = []
        for cur in tokens:
            xk = _lerp(prev, cur, block.mu_ck)
            xr = _lerp(prev, cur, block.mu_cr)
            prev = cur
            k = relu(matmul(xk, block.w_ck))
            kv = matmul(mul(k, k), block.w_cv)
            outputs.append(add(cur, mul(sigmoid(matmul(xr, block.w_cr)), kv)))
        return outputs

    def forward(self, windows: np.ndarray) -> Node:
        windows = self._check_windows(windows)
        batch, t_len = windows.shape
        tokens = [
            add_bias(matmul(constant(windows[:, t : t + 1]), self.w_emb), self.b_emb)
            for t in range(t_len)
        ]
        for block in self.blocks:
            tokens = self._time_mix(block, tokens, batch)
            tokens = self._channel_mix(block, tokens, batch)
        keys = []
        values = []
        query = None
        for t, tok in enumerate(tokens):
            angles = add_bias(matmul(tok, self.w_ang), self.b_ang)
            h_t = quantum_expect(self.circuit, angles, self.theta)
            keys.append(add_bias(matmul(h_t, self.w_k), self.b_k))
            values.append(add_bias(matmul(h_t, self.w_v), self.b_v))
            if t == t_len - 1:
                query = add_bias(matmul(h_t, self.w_q), self.b_q)
        scores = concat(
            [reshape(dot_rows(query, k_t), (batch, 1)) for k_t in keys], axis=1
        )
        weights = softmax(scores)
        context = None
        for t, v_t in enumerate(values):
            term = scale_rows(v_t, reshape(narrow(weights, 1, t, 1), (batch,)))
            context = term if context is None else add(context, term)
        out = add_bias(matmul(context, self.w_head), self.b_head)
        return reshape(out, (batch,))
