"""Shared test oracles: dense-matrix circuit simulation and random circuits.

Everything here is implemented independently of the package's kernels —
gates are embedded as explicit 2**n x 2**n matrices via Kronecker products
and permutation matrices, so agreement is a real cross-check.
"""

from __future__ import annotations

import numpy as np

from qseq.statevector import CircuitSpec, GateOp

S2 = 1.0 / np.sqrt(2.0)


def rx_matrix(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry_matrix(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(t):
    return np.array([[np.exp(-1j * t / 2), 0], [0, np.exp(1j * t / 2)]])


H_MATRIX = np.array([[S2, S2], [S2, -S2]], dtype=complex)

ONE_QUBIT = {"RX": rx_matrix, "RY": ry_matrix, "RZ": rz_matrix}


def embed_single(mat: np.ndarray, target: int, n: int) -> np.ndarray:
    """Spread a 2x2 matrix onto qubit ``target`` (LSB-first index order)."""
    left = np.eye(1 << (n - 1 - target))
    right = np.eye(1 << target)
    return np.kron(np.kron(left, mat), right)


def cnot_dense(control: int, target: int, n: int) -> np.ndarray:
    dim = 1 << n
    mat = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        j = i ^ (1 << target) if (i >> control) & 1 else i
        mat[j, i] = 1.0
    return mat


def dense_unitary(circuit: CircuitSpec, inputs=(), params=()) -> np.ndarray:
    """Compose the full circuit unitary by plain matrix multiplication."""
    inputs = np.asarray(inputs, dtype=float).ravel()
    params = np.asarray(params, dtype=float).ravel()
    n = circuit.n_qubits
    u = np.eye(1 << n, dtype=complex)
    for gate in circuit.gates:
        if gate.kind == "H":
            mat = embed_single(H_MATRIX, gate.target, n)
        elif gate.kind == "CNOT":
            mat = cnot_dense(gate.control, gate.target, n)
        else:
            if gate.const is not None:
                theta = gate.const
            elif gate.input_slot is not None:
                theta = inputs[gate.input_slot]
            else:
                theta = params[gate.param_slot]
            mat = embed_single(ONE_QUBIT[gate.kind](theta), gate.target, n)
        u = mat @ u
    return u


def dense_run(circuit: CircuitSpec, inputs=(), params=(), initial=None) -> np.ndarray:
    dim = 1 << circuit.n_qubits
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    if initial is not None:
        psi = np.asarray(initial, dtype=complex)
    return dense_unitary(circuit, inputs, params) @ psi


def dense_expect_z(psi: np.ndarray, n: int, qubits) -> np.ndarray:
    idx = np.arange(1 << n)
    probs = np.abs(psi) ** 2
    return np.array(
        [np.sum(probs * (1.0 - 2.0 * ((idx >> q) & 1))) for q in qubits]
    )


def random_circuit(
    rng: np.random.Generator,
    max_qubits: int = 4,
    max_layers: int = 3,
) -> tuple[CircuitSpec, np.ndarray, np.ndarray]:
    """A random circuit over all gate kinds plus matching input/param vectors."""
    n = int(rng.integers(1, max_qubits + 1))
    layers = int(rng.integers(1, max_layers + 1))
    gates = []
    n_inputs = int(rng.integers(0, n + 1))
    n_params = 0
    for _ in range(layers):
        for q in range(n):
            roll = rng.random()
            if roll < 0.15:
                gates.append(GateOp("H", q))
            elif roll < 0.3 and n >= 2:
                other = int(rng.integers(0, n - 1))
                other = other if other != q else n - 1
                gates.append(GateOp("CNOT", target=other, control=q))
            else:
                kind = ("RX", "RY", "RZ")[int(rng.integers(0, 3))]
                source = rng.random()
                if source < 0.25:
                    gates.append(GateOp(kind, q, const=float(rng.normal())))
                elif source < 0.5 and n_inputs:
                    gates.append(
                        GateOp(kind, q, input_slot=int(rng.integers(0, n_inputs)))
                    )
                else:
                    gates.append(GateOp(kind, q, param_slot=n_params))
                    n_params += 1
    if not gates:
        gates.append(GateOp("H", 0))
    circuit = CircuitSpec(
        n_qubits=n,
        gates=tuple(gates),
        n_input_slots=n_inputs,
        n_param_slots=n_params,
        measured_qubits=tuple(range(n)),
    )
    inputs = rng.normal(size=n_inputs)
    params = rng.normal(size=n_params)
    return circuit, inputs, params
