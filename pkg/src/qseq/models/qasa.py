"""Self-attention encoder whose Q/K/V features come from a quantum circuit.

Each scalar is lifted to a 128-dim token and tagged with the standard
sinusoidal position code.  Three per-stream linear maps squeeze a token to
nine angles (eight core qubits plus one auxiliary); a single shared bank of
36 variational angles — one per (layer, qubit), applied as an RY/RZ pair —
drives the circuit for all three streams, so the whole attention block holds
exactly 36 quantum parameters.  Default encoding is an RX/RZ pair per qubit
followed by a CNOT ring; amplitude loading of a per-stream 128-dim map is
available as a config option.  Per-stream 9->128 maps restore model width,
four heads attend (scaled dot product) from the final position, and a stack
of pre-norm feed-forward encoder layers plus a linear head emits the scalar.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    Node,
    add,
    add_bias,
    concat,
    constant,
    dot_rows,
    layer_norm,
    matmul,
    narrow,
    quantum_expect,
    quantum_expect_amplitude,
    relu,
    reshape,
    scale,
    scale_rows,
    softmax,
    transpose,
)
from ..statevector import CircuitSpec, GateOp, build_ring_variational
from .base import ForecastModel, ModelConfig

STREAMS = ("q", "k", "v")


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """The usual fixed transformer position table, shape (length, dim)."""
    pos = np.arange(length)[:, None]
    exponent = np.arange(0, dim, 2) / dim
    rates = pos / np.power(10000.0, exponent)[None, :]
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(rates)
    table[:, 1::2] = np.cos(rates[:, : table[:, 1::2].shape[1]])
    return table


def build_qkv_circuit(n_qubits: int, n_layers: int) -> CircuitSpec:
    """RX/RZ angle encoding, CNOT ring, then shared-slot RY/RZ ring layers."""
    gates = []
    for q in range(n_qubits):
        gates.append(GateOp("RX", q, input_slot=q))
        gates.append(GateOp("RZ", q, input_slot=q))
    gates += [
        GateOp("CNOT", target=(q + 1) % n_qubits, control=q) for q in range(n_qubits)
    ]
    frag, n_par = build_ring_variational(
        n_qubits, n_layers, ("RY", "RZ"), share_layer_slot=True
    )
    gates.extend(frag)
    return CircuitSpec(
        n_qubits,
        tuple(gates),
        n_input_slots=n_qubits,
        n_param_slots=n_par,
        measured_qubits=tuple(range(n_qubits)),
    )


def build_amplitude_circuit(n_qubits: int, n_layers: int) -> CircuitSpec:
    frag, n_par = build_ring_variational(
        n_qubits, n_layers, ("RY", "RZ"), share_layer_slot=True
    )
    return CircuitSpec(
        n_qubits,
        tuple(frag),
        n_param_slots=n_par,
        measured_qubits=tuple(range(n_qubits)),
    )


def scaled_dot_attention(query: Node, key: Node, value: Node) -> Node:
    """softmax(Q K^T / sqrt(d)) V for single-sample (T, d) nodes."""
    d = query.value.shape[1]
    scores = scale(matmul(query, transpose(key)), 1.0 / np.sqrt(d))
    return matmul(softmax(scores), value)


class QASAForecaster(ForecastModel):
    kind = "qasa"
    q_core = 8
    q_aux = 1

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d = config.hidden
        if d < config.heads or d % config.heads:
            raise ValueError("model dim must be a positive multiple of heads")
        if config.encoding not in ("angle", "amplitude"):
            raise ValueError(f"unknown qasa encoding {config.encoding!r}")
        self.dim = d
        self.head_dim = d // config.heads
        self.w_embed = self._classical("w_embed", (1, d), fan_in=1)
        self.b_embed = self._bias("b_embed", d)
        self.positions = sinusoidal_positions(config.t, d)
        n = config.n_qubits
        if config.encoding == "angle":
            self.circuit = build_qkv_circuit(n, config.n_quantum_layers)
            self.stream_in = {
                s: (
                    self._classical(f"w_{s}_angles", (d, n), fan_in=d),
                    self._bias(f"b_{s}_angles", n),
                )
                for s in STREAMS
            }
        else:
            self.circuit = build_amplitude_circuit(n, config.n_quantum_layers)
            self.stream_in = {
                s: (
                    self._classical(f"w_{s}_load", (d, d), fan_in=d),
                    self._bias(f"b_{s}_load", d),
                )
                for s in STREAMS
            }
        self.theta = self._quantum("theta", self.circuit.n_param_slots)
        self.stream_out = {
            s: (
                self._classical(f"w_{s}_out", (n, d), fan_in=n),
                self._bias(f"b_{s}_out", d),
            )
            for s in STREAMS
        }
        self.ff_layers = []
        for i in range(config.n_blocks):
            self.ff_layers.append(
                {
                    "ln_g": self._gain(f"ff{i}_ln_g", d),
                    "ln_b": self._bias(f"ff{i}_ln_b", d),
                    "w1": self._classical(f"ff{i}_w1", (d, config.ff_hidden), fan_in=d),
                    "b1": self._bias(f"ff{i}_b1", config.ff_hidden),
                    "w2": self._classical(f"ff{i}_w2", (config.ff_hidden, d), fan_in=config.ff_hidden),
                    "b2": self._bias(f"ff{i}_b2", d),
                }
            )
        self.final_ln_g = self._gain("final_ln_g", d)
        self.final_ln_b = self._bias("final_ln_b", d)
        self.w_head = self._classical("w_head", (d, 1), fan_in=d)
        self.b_head = self._bias("b_head", 1)

    def _gain(self, name, size):
        from ..autodiff import Parameter

        p = Parameter(name, np.ones(size), "classical")
        self.parameters.append(p)
        return p

    def embed(self, windows: np.ndarray, t: int) -> Node:
        x_t = constant(windows[:, t : t + 1])
        token = add_bias(matmul(x_t, self.w_embed), self.b_embed)
        return add(token, constant(np.broadcast_to(self.positions[t], token.value.shape).copy()))

    def _stream_features(self, token: Node, stream: str) -> Node:
        """Quantum feature map for one stream; token rows may stack several
        positions — the circuit treats every row independently."""
        w_in, b_in = self.stream_in[stream]
        projected = add_bias(matmul(token, w_in), b_in)
        if self.config.encoding == "angle":
            z = quantum_expect(self.circuit, projected, self.theta)
        else:
            z = quantum_expect_amplitude(self.circuit, projected, self.theta)
        w_out, b_out = self.stream_out[stream]
        return add_bias(matmul(z, w_out), b_out)

    def forward(self, windows: np.ndarray) -> Node:
        windows = self._check_windows(windows)
        batch, t_len = windows.shape
        tokens = [self.embed(windows, t) for t in range(t_len)]
        # run each stream once over all positions (rows stacked) rather than
        # per token: identical numbers, far fewer circuit dispatches
        stacked = concat(tokens, axis=0)
        k_all = self._stream_features(stacked, "k")
        v_all = self._stream_features(stacked, "v")
        keys = [narrow(k_all, 0, t * batch, batch) for t in range(t_len)]
        values = [narrow(v_all, 0, t * batch, batch) for t in range(t_len)]
        query = self._stream_features(tokens[-1], "q")

        hd = self.head_dim
        inv_scale = 1.0 / np.sqrt(hd)
        head_contexts = []
        for head in range(self.config.heads):
            q_h = narrow(query, 1, head * hd, hd)
            scores = concat(
                [
                    reshape(
                        scale(dot_rows(q_h, narrow(k_t, 1, head * hd, hd)), inv_scale),
                        (batch, 1),
                    )
                    for k_t in keys
                ],
                axis=1,
            )
            weights = softmax(scores)
            ctx = None
            for t, v_t in enumerate(values):
                term = scale_rows(
                    narrow(v_t, 1, head * hd, hd),
                    reshape(narrow(weights, 1, t, 1), (batch,)),
                )
                ctx = term if ctx is None else add(ctx, term)
            head_contexts.append(ctx)
        attended = concat(head_contexts, axis=1)
        x = add(tokens[-1], attended)
        for layer in self.ff_layers:
            normed = layer_norm(x, layer["ln_g"], layer["ln_b"])
            hidden = relu(add_bias(matmul(normed, layer["w1"]), layer["b1"]))
            x = add(x, add_bias(matmul(hidden, layer["w2"]), layer["b2"]))
        x = layer_norm(x, self.final_ln_g, self.final_ln_b)
        out = add_bias(matmul(x, self.w_head), self.b_head)
        return reshape(out, (batch,))
