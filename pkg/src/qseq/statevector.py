"""Dense statevector simulation of parameterized quantum circuits.

Conventions, fixed once and used everywhere:

* Qubit 0 is the least-significant bit of the basis index, so the amplitude
  at index ``i`` belongs to the bit pattern of ``i`` read LSB-first.
* Rotations use the half-angle convention::

      RX(t) = [[cos t/2, -i sin t/2], [-i sin t/2, cos t/2]]
      RY(t) = [[cos t/2,   -sin t/2], [   sin t/2, cos t/2]]
      RZ(t) = [[exp(-i t/2), 0], [0, exp(+i t/2)]]

* ``CNOT`` flips the target bit when the control bit is 1.
* Global phase is unconstrained; states are compared up to phase only where
  a contract says so.

Circuits are descriptions, not closures: a :class:`CircuitSpec` is an ordered
list of :class:`GateOp`, where every rotation angle comes from exactly one of
a bound constant, an input slot (data), or a parameter slot (trainable).
``run``/``run_batch`` resolve slots against concrete vectors.

Gradients of Pauli-Z expectations come in two flavours.  ``grad_expect_z``
and ``grad_expect_z_inputs`` implement the two-term parameter-shift rule
(exact for these half-angle generators).  ``vjp_expect_z_batch`` computes the
same derivatives by an adjoint reverse sweep — one forward pass plus one
backward pass per weighted observable instead of two evaluations per angle —
and is what the training path uses.  The two routes are cross-checked in the
test suite.

All operations are pure: they accept states/specs and return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_QUBITS = 20

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("H", "CNOT")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)

# Generator Pauli for each rotation kind (G = exp(-i * theta * P / 2)).
_GENERATOR = {"RX": "X", "RY": "Y", "RZ": "Z"}


class SimulationError(ValueError):
    """Invalid circuit structure, slot mismatch, or degenerate encoding."""


# ---------------------------------------------------------------------------
# circuit description


@dataclass(frozen=True)
class GateOp:
    """One gate: a kind, wire indices, and (for rotations) an angle source.

    Exactly one of ``const``, ``input_slot``, ``param_slot`` must be set for
    rotation gates; none may be set for H/CNOT.
    """

    kind: str
    target: int
    control: int | None = None
    const: float | None = None
    input_slot: int | None = None
    param_slot: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        sources = sum(
            s is not None for s in (self.const, self.input_slot, self.param_slot)
        )
        if self.kind in ROTATION_KINDS:
            if sources != 1:
                raise SimulationError(
                    f"{self.kind} on qubit {self.target} needs exactly one angle "
                    f"source, got {sources}"
                )
        elif sources:
            raise SimulationError(f"{self.kind} carries no angle")
        if self.kind == "CNOT":
            if self.control is None:
                raise SimulationError("CNOT needs a control qubit")
            if self.control == self.target:
                raise SimulationError("CNOT control and target must differ")
        elif self.control is not None:
            raise SimulationError(f"{self.kind} takes no control qubit")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATION_KINDS


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered gate list plus slot counts and the measured qubit set."""

    n_qubits: int
    gates: tuple[GateOp, ...]
    n_input_slots: int = 0
    n_param_slots: int = 0
    measured_qubits: tuple[int, ...] = ()

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "measured_qubits", tuple(self.measured_qubits))
        for g in self.gates:
            wires = (g.target,) if g.control is None else (g.target, g.control)
            for w in wires:
                if not 0 <= w < self.n_qubits:
                    raise SimulationError(
                        f"gate {g.kind} touches qubit {w}, circuit has "
                        f"{self.n_qubits}"
                    )
            if g.input_slot is not None and not 0 <= g.input_slot < self.n_input_slots:
                raise SimulationError(f"input slot {g.input_slot} out of range")
            if g.param_slot is not None and not 0 <= g.param_slot < self.n_param_slots:
                raise SimulationError(f"param slot {g.param_slot} out of range")
        if len(set(self.measured_qubits)) != len(self.measured_qubits):
            raise SimulationError("measured_qubits contains duplicates")
        for q in self.measured_qubits:
            if not 0 <= q < self.n_qubits:
                raise SimulationError(f"measured qubit {q} out of range")


@dataclass
class StateVector:
    """Complex amplitudes over the 2**n_qubits computational basis states."""

    n_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _check_n_qubits(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise SimulationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n}")


# ---------------------------------------------------------------------------
# batched kernels (amps arrays have shape (batch, 2**n))


def _apply_rotation_batch(
    amps: np.ndarray, kind: str, target: int, angles: np.ndarray
) -> np.ndarray:
    batch, dim = amps.shape
    lo = 1 << target
    hi = dim >> (target + 1)
    view = amps.reshape(batch, hi, 2, lo)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    half = 0.5 * np.asarray(angles, dtype=np.float64)
    out = np.empty_like(view)
    if kind == "RZ":
        phase = np.exp(-1j * half)[:, None, None]
        out[:, :, 0, :] = a0 * phase
        out[:, :, 1, :] = a1 * np.conj(phase)
    else:
        c = np.cos(half)[:, None, None]
        s = np.sin(half)[:, None, None]
        if kind == "RX":
            out[:, :, 0, :] = c * a0 - 1j * s * a1
            out[:, :, 1, :] = -1j * s * a0 + c * a1
        else:  # RY
            out[:, :, 0, :] = c * a0 - s * a1
            out[:, :, 1, :] = s * a0 + c * a1
    return out.reshape(batch, dim)


def _apply_h_batch(amps: np.ndarray, target: int) -> np.ndarray:
    batch, dim = amps.shape
    lo = 1 << target
    hi = dim >> (target + 1)
    view = amps.reshape(batch, hi, 2, lo)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    out = np.empty_like(view)
    out[:, :, 0, :] = (a0 + a1) * _INV_SQRT2
    out[:, :, 1, :] = (a0 - a1) * _INV_SQRT2
    return out.reshape(batch, dim)


# In-place variants for the engine's privately owned arrays.  They apply the
# same arithmetic in the same order as the pure kernels above (bit-identical
# results) while avoiding the full-size output allocation per gate, which
# dominates the cost of deep circuits on wide batches.


def _rotate_inplace(amps: np.ndarray, kind: str, target: int, angles) -> None:
    batch, dim = amps.shape
    lo = 1 << target
    view = amps.reshape(batch, dim >> (target + 1), 2, lo)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    half = 0.5 * np.asarray(angles, dtype=np.float64)
    if kind == "RZ":
        phase = np.exp(-1j * half)[:, None, None]
        np.multiply(a0, phase, out=a0)
        np.multiply(a1, np.conj(phase), out=a1)
        return
    c = np.cos(half)[:, None, None]
    s = np.sin(half)[:, None, None]
    if kind == "RX":
        s = 1j * s
    tmp = s * a0
    np.multiply(a0, c, out=a0)
    a0 -= s * a1
    np.multiply(a1, c, out=a1)
    if kind == "RX":
        a1 -= tmp
    else:
        a1 += tmp


def _h_inplace(amps: np.ndarray, target: int) -> None:
    batch, dim = amps.shape
    lo = 1 << target
    view = amps.reshape(batch, dim >> (target + 1), 2, lo)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    tmp = a0 - a1
    a0 += a1
    np.multiply(a0, _INV_SQRT2, out=a0)
    np.multiply(tmp, _INV_SQRT2, out=tmp)
    a1[...] = tmp


@lru_cache(maxsize=None)
def _cnot_source(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    src = np.where((idx >> control) & 1 == 1, idx ^ (1 << target), idx)
    src.setflags(write=False)
    return src


def _apply_cnot_batch(
    amps: np.ndarray, n: int, control: int, target: int
) -> np.ndarray:
    return amps[:, _cnot_source(n, control, target)]


@lru_cache(maxsize=None)
def _bit_signs(n: int, qubit: int) -> np.ndarray:
    # +1 where the qubit reads |0>, -1 where it reads |1>
    idx = np.arange(1 << n)
    signs = 1.0 - 2.0 * ((idx >> qubit) & 1)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=None)
def _z_sign_matrix(n: int, qubits: tuple[int, ...]) -> np.ndarray:
    mat = np.stack([_bit_signs(n, q) for q in qubits])
    mat.setflags(write=False)
    return mat


def _apply_pauli_batch(amps: np.ndarray, kind: str, n: int, target: int) -> np.ndarray:
    bit = 1 << target
    if kind == "Z":
        return amps * _bit_signs(n, target)
    flipped = amps[:, np.arange(amps.shape[1]) ^ bit]
    if kind == "X":
        return flipped
    # Y: |0> -> i|1>, |1> -> -i|0>; after the flip the factor is +i where the
    # destination bit is 1 and -i where it is 0.
    return flipped * (-1j * _bit_signs(n, target))


def _generator_overlap(
    phi: np.ndarray, psi: np.ndarray, kind: str, target: int
) -> np.ndarray:
    """Im<phi|P|psi> per row for P in {X, Y, Z} acting on ``target``.

    Expands Im(conj(phi) * (P psi)) into real dot products over the two
    half-views along the target axis, so neither P|psi> nor conj(phi) is ever
    materialized.
    """
    batch, dim = psi.shape
    lo = 1 << target
    hi = dim >> (target + 1)
    p = phi.reshape(batch, hi, 2, lo)
    q = psi.reshape(batch, hi, 2, lo)
    p0, p1 = p[:, :, 0, :], p[:, :, 1, :]
    q0, q1 = q[:, :, 0, :], q[:, :, 1, :]

    def dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("bhl,bhl->b", x, y)

    if kind == "Z":
        return (
            dot(p0.real, q0.imag)
            - dot(p0.imag, q0.real)
            - dot(p1.real, q1.imag)
            + dot(p1.imag, q1.real)
        )
    if kind == "X":
        return (
            dot(p0.real, q1.imag)
            - dot(p0.imag, q1.real)
            + dot(p1.real, q0.imag)
            - dot(p1.imag, q0.real)
        )
    # Y: (P psi)_0 = -i psi_1 and (P psi)_1 = i psi_0, so the imaginary parts
    # reduce to real inner products.
    return (
        dot(p1.real, q0.real)
        + dot(p1.imag, q0.imag)
        - dot(p0.real, q1.real)
        - dot(p0.imag, q1.imag)
    )


# ---------------------------------------------------------------------------
# slot resolution and the forward engine


def _as_batch(vec, n_slots: int, what: str) -> np.ndarray:
    """Coerce ``vec`` to a (batch, n_slots) float64 array."""
    arr = np.asarray(vec, dtype=np.float64)
    if n_slots == 0:
        if arr.size != 0:
            raise SimulationError(f"circuit takes no {what}, got {arr.size} values")
        return np.zeros((1, 0))
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n_slots:
        raise SimulationError(
            f"{what} must have {n_slots} entries per row, got shape {arr.shape}"
        )
    return arr


def _resolve_angles(
    circuit: CircuitSpec, inputs: np.ndarray, params: np.ndarray, batch: int
) -> np.ndarray:
    """Per-gate angle matrix of shape (batch, n_gates); zero for H/CNOT."""
    angles = np.zeros((batch, len(circuit.gates)), dtype=np.float64)
    for g, gate in enumerate(circuit.gates):
        if gate.const is not None:
            angles[:, g] = gate.const
        elif gate.input_slot is not None:
            angles[:, g] = inputs[:, gate.input_slot]
        elif gate.param_slot is not None:
            angles[:, g] = params[:, gate.param_slot]
    return angles


def _run_resolved(
    n: int,
    gates: Sequence[GateOp],
    angles: np.ndarray,
    initial: np.ndarray,
) -> np.ndarray:
    # Consumes ``initial``: every caller hands over a freshly allocated array,
    # so single-qubit gates may mutate it instead of allocating per gate.
    amps = initial
    for g, gate in enumerate(gates):
        if gate.kind == "H":
            _h_inplace(amps, gate.target)
        elif gate.kind == "CNOT":
            amps = _apply_cnot_batch(amps, n, gate.control, gate.target)
        else:
            _rotate_inplace(amps, gate.kind, gate.target, angles[:, g])
    return amps


def _broadcast_rows(arr: np.ndarray, batch: int, what: str) -> np.ndarray:
    if arr.shape[0] == batch:
        return arr
    if arr.shape[0] == 1:
        return np.broadcast_to(arr, (batch, arr.shape[1]))
    raise SimulationError(
        f"{what} rows ({arr.shape[0]}) do not match batch size {batch}"
    )


def run_batch(
    circuit: CircuitSpec,
    inputs,
    params,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Run the circuit for a batch; returns amplitudes of shape (B, 2**n).

    ``inputs`` is (B, n_input_slots) or (n_input_slots,); ``params`` may be a
    single (n_param_slots,) vector shared across the batch or one row per
    batch element.  ``initial`` overrides the |0...0> start state.
    """
    inp = _as_batch(inputs, circuit.n_input_slots, "inputs")
    par = _as_batch(params, circuit.n_param_slots, "params")
    batch = max(inp.shape[0], par.shape[0])
    if initial is not None:
        if initial.ndim == 1:
            initial = initial[None, :]
        batch = max(batch, initial.shape[0])
    inp = _broadcast_rows(inp, batch, "inputs")
    par = _broadcast_rows(par, batch, "params")
    dim = 1 << circuit.n_qubits
    if initial is None:
        amps = np.zeros((batch, dim), dtype=np.complex128)
        amps[:, 0] = 1.0
    else:
        if initial.shape[1] != dim:
            raise SimulationError(
                f"initial state has dim {initial.shape[1]}, circuit needs {dim}"
            )
        amps = np.array(
            np.broadcast_to(initial, (batch, dim)), dtype=np.complex128, copy=True
        )
    angles = _resolve_angles(circuit, inp, par, batch)
    return _run_resolved(circuit.n_qubits, circuit.gates, angles, amps)


# ---------------------------------------------------------------------------
# public single-state operations


def init_zero(n_qubits: int) -> StateVector:
    """The |0...0> state on ``n_qubits`` qubits."""
    _check_n_qubits(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def amplitude_encode(x, n_qubits: int) -> StateVector:
    """L2-normalize ``x`` into the first ``len(x)`` amplitudes, zero-pad the rest."""
    _check_n_qubits(n_qubits)
    vec = np.asarray(x, dtype=np.float64).ravel()
    dim = 1 << n_qubits
    if vec.size > dim:
        raise SimulationError(
            f"cannot amplitude-encode {vec.size} values into {n_qubits} qubits"
        )
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise SimulationError("amplitude encoding of an all-zero vector is degenerate")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[: vec.size] = vec / norm
    return StateVector(n_qubits, amps)


def angle_encode_ry(x, n_qubits: int) -> StateVector:
    """Apply H to every qubit, then RY(x_i) on qubit i (missing angles = 0)."""
    _check_n_qubits(n_qubits)
    vec = np.asarray(x, dtype=np.float64).ravel()
    if vec.size > n_qubits:
        raise SimulationError(
            f"{vec.size} angles do not fit on {n_qubits} qubits"
        )
    amps = init_zero(n_qubits).amplitudes[None, :]
    for q in range(n_qubits):
        amps = _apply_h_batch(amps, q)
    for q in range(vec.size):
        amps = _apply_rotation_batch(amps, "RY", q, np.array([vec[q]]))
    return StateVector(n_qubits, amps[0])


def apply_gate(state: StateVector, gate: GateOp, angle: float | None = None) -> StateVector:
    """Apply one gate to a state; ``angle`` feeds slot-sourced rotations."""
    n = state.n_qubits
    wires = (gate.target,) if gate.control is None else (gate.target, gate.control)
    for w in wires:
        if not 0 <= w < n:
            raise SimulationError(f"gate touches qubit {w}, state has {n}")
    amps = state.amplitudes[None, :]
    if gate.kind == "H":
        out = _apply_h_batch(amps, gate.target)
    elif gate.kind == "CNOT":
        out = _apply_cnot_batch(amps, n, gate.control, gate.target)
    else:
        if gate.const is not None:
            theta = gate.const
        elif angle is not None:
            theta = float(angle)
        else:
            raise SimulationError(
                f"{gate.kind} reads a slot; supply the resolved angle"
            )
        out = _apply_rotation_batch(amps, gate.kind, gate.target, np.array([theta]))
    return StateVector(n, out[0])


def run(
    circuit: CircuitSpec,
    inputs=(),
    params=(),
    initial_state: StateVector | None = None,
) -> StateVector:
    """Run the circuit once from |0...0> (or ``initial_state``)."""
    initial = None if initial_state is None else initial_state.amplitudes[None, :]
    amps = run_batch(circuit, inputs, params, initial=initial)
    if amps.shape[0] != 1:
        raise SimulationError("run() is single-shot; use run_batch for batches")
    return StateVector(circuit.n_qubits, amps[0])


def expect_z(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """<Z> on each listed qubit, as a float vector in [-1, 1]."""
    return expect_z_batch(state.amplitudes[None, :], state.n_qubits, tuple(qubits))[0]


def expect_z_batch(amps: np.ndarray, n: int, qubits: tuple[int, ...]) -> np.ndarray:
    for q in qubits:
        if not 0 <= q < n:
            raise SimulationError(f"measured qubit {q} out of range")
    probs = amps.real**2 + amps.imag**2
    return probs @ _z_sign_matrix(n, tuple(qubits)).T


# ---------------------------------------------------------------------------
# derivatives


def _measured(circuit: CircuitSpec, qubits) -> tuple[int, ...]:
    q = circuit.measured_qubits if qubits is None else tuple(qubits)
    if not q:
        raise SimulationError("no measured qubits given")
    return tuple(q)


def _shift_jacobian(
    circuit: CircuitSpec, inputs, params, qubits, slot_kind: str
) -> np.ndarray:
    """Parameter-shift Jacobian d<Z_k>/d(slot_j), shape (K, n_slots).

    A slot referenced by several gates gets the sum of per-occurrence
    two-term shifts (the single-occurrence case reduces to the textbook
    formula).
    """
    qubits = _measured(circuit, qubits)
    inp = _as_batch(inputs, circuit.n_input_slots, "inputs")
    par = _as_batch(params, circuit.n_param_slots, "params")
    if inp.shape[0] != 1 or par.shape[0] != 1:
        raise SimulationError("shift-rule Jacobians are single-sample")
    base = _resolve_angles(circuit, inp, par, 1)[0]

    n_slots = (
        circuit.n_param_slots if slot_kind == "param" else circuit.n_input_slots
    )
    occurrences: list[tuple[int, int]] = []  # (slot, gate index)
    for g, gate in enumerate(circuit.gates):
        slot = gate.param_slot if slot_kind == "param" else gate.input_slot
        if slot is not None:
            occurrences.append((slot, g))

    jac = np.zeros((len(qubits), n_slots))
    if not occurrences:
        return jac
    rows = np.tile(base, (2 * len(occurrences), 1))
    for i, (_, g) in enumerate(occurrences):
        rows[2 * i, g] += np.pi / 2
        rows[2 * i + 1, g] -= np.pi / 2
    dim = 1 << circuit.n_qubits
    start = np.zeros((rows.shape[0], dim), dtype=np.complex128)
    start[:, 0] = 1.0
    amps = _run_resolved(circuit.n_qubits, circuit.gates, rows, start)
    expv = expect_z_batch(amps, circuit.n_qubits, qubits)
    for i, (slot, _) in enumerate(occurrences):
        jac[:, slot] += 0.5 * (expv[2 * i] - expv[2 * i + 1])
    return jac


def grad_expect_z(circuit: CircuitSpec, inputs, params, qubits=None) -> np.ndarray:
    """Parameter-shift gradient of each <Z_k> w.r.t. the parameter slots."""
    return _shift_jacobian(circuit, inputs, params, qubits, "param")


def grad_expect_z_inputs(circuit: CircuitSpec, inputs, params, qubits=None) -> np.ndarray:
    """Parameter-shift gradient of each <Z_k> w.r.t. the input slots."""
    return _shift_jacobian(circuit, inputs, params, qubits, "input")


def vjp_expect_z_batch(
    circuit: CircuitSpec,
    inputs,
    params,
    weights: np.ndarray,
    qubits=None,
    initial: np.ndarray | None = None,
    need_initial_grad: bool = False,
    final: np.ndarray | None = None,
):
    """Adjoint-mode vector-Jacobian product for weighted <Z> sums.

    For each batch row b this differentiates ``sum_k weights[b, k] *
    <Z_{qubits[k]}>`` with respect to every input slot and parameter slot,
    in one forward and one reverse sweep.  Returns ``(expectations,
    grad_inputs, grad_params, grad_initial)`` where ``grad_initial`` is the
    derivative w.r.t. a real-valued initial amplitude vector (``None``
    unless requested).  Exact — cross-checked against the shift rule.

    ``final`` lets a caller that already ran the circuit (via ``run_batch``
    with the same inputs/params/initial) hand over the end-of-circuit
    amplitudes so the forward pass is not repeated; the array is copied, not
    consumed.
    """
    qubits = _measured(circuit, qubits)
    inp = _as_batch(inputs, circuit.n_input_slots, "inputs")
    par = _as_batch(params, circuit.n_param_slots, "params")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim == 1:
        weights = weights[None, :]
    batch = max(inp.shape[0], par.shape[0], weights.shape[0])
    if initial is not None and initial.ndim == 2:
        batch = max(batch, initial.shape[0])
    inp = _broadcast_rows(inp, batch, "inputs")
    par = _broadcast_rows(par, batch, "params")
    weights = _broadcast_rows(weights, batch, "weights")
    if weights.shape[1] != len(qubits):
        raise SimulationError("one weight per measured qubit required")

    n = circuit.n_qubits
    dim = 1 << n
    angles = _resolve_angles(circuit, inp, par, batch)
    if final is not None:
        if final.shape != (batch, dim):
            raise SimulationError(
                f"final amplitudes must have shape {(batch, dim)}, got {final.shape}"
            )
        psi = np.array(final, dtype=np.complex128, copy=True)
    else:
        if initial is None:
            start = np.zeros((batch, dim), dtype=np.complex128)
            start[:, 0] = 1.0
        else:
            if initial.ndim == 1:
                initial = initial[None, :]
            start = np.array(
                np.broadcast_to(initial, (batch, dim)), dtype=np.complex128, copy=True
            )
        psi = _run_resolved(n, circuit.gates, angles, start)
    expectations = expect_z_batch(psi, n, qubits)

    # phi starts as O|psi> with O = sum_k w_k Z_k (diagonal, per batch row)
    diag = weights @ _z_sign_matrix(n, qubits)
    phi = psi * diag

    grad_angles = np.zeros_like(angles)
    for g in range(len(circuit.gates) - 1, -1, -1):
        gate = circuit.gates[g]
        if gate.is_rotation:
            grad_angles[:, g] = _generator_overlap(
                phi, psi, _GENERATOR[gate.kind], gate.target
            )
            neg = -angles[:, g]
            _rotate_inplace(psi, gate.kind, gate.target, neg)
            _rotate_inplace(phi, gate.kind, gate.target, neg)
        elif gate.kind == "H":
            _h_inplace(psi, gate.target)
            _h_inplace(phi, gate.target)
        else:
            psi = _apply_cnot_batch(psi, n, gate.control, gate.target)
            phi = _apply_cnot_batch(phi, n, gate.control, gate.target)

    grad_inputs = np.zeros((batch, circuit.n_input_slots))
    grad_params = np.zeros((batch, circuit.n_param_slots))
    for g, gate in enumerate(circuit.gates):
        if gate.input_slot is not None:
            grad_inputs[:, gate.input_slot] += grad_angles[:, g]
        elif gate.param_slot is not None:
            grad_params[:, gate.param_slot] += grad_angles[:, g]

    grad_initial = 2.0 * phi.real if need_initial_grad else None
    return expectations, grad_inputs, grad_params, grad_initial


# ---------------------------------------------------------------------------
# circuit builders


def build_ring_variational(
    n_qubits: int,
    n_layers: int,
    rotation_set: Sequence[str] = ("RY",),
    *,
    first_param_slot: int = 0,
    entangle_first: bool = False,
    share_layer_slot: bool = False,
) -> tuple[list[GateOp], int]:
    """Layered variational fragment on a CNOT ring.

    Default layer = one rotation per qubit per kind in ``rotation_set`` (each
    a fresh parameter slot) followed by CNOT(i, (i+1) mod n).
    ``entangle_first`` swaps the two halves; ``share_layer_slot`` makes all
    rotations on a given (layer, qubit) consume a single slot.  Returns the
    gate list and the next free parameter slot.
    """
    _check_n_qubits(n_qubits)
    if n_layers < 1:
        raise SimulationError("n_layers must be >= 1")
    rotation_set = tuple(rotation_set)
    if not rotation_set:
        raise SimulationError("rotation_set must not be empty")
    for kind in rotation_set:
        if kind not in ROTATION_KINDS:
            raise SimulationError(f"{kind!r} is not a rotation kind")

    gates: list[GateOp] = []
    slot = first_param_slot
    for _layer in range(n_layers):
        rotations: list[GateOp] = []
        for q in range(n_qubits):
            if share_layer_slot:
                for kind in rotation_set:
                    rotations.append(GateOp(kind, q, param_slot=slot))
                slot += 1
            else:
                for kind in rotation_set:
                    rotations.append(GateOp(kind, q, param_slot=slot))
                    slot += 1
        ring = [
            GateOp("CNOT", target=(q + 1) % n_qubits, control=q)
            for q in range(n_qubits)
        ] if n_qubits >= 2 else []
        if entangle_first:
            gates.extend(ring)
            gates.extend(rotations)
        else:
            gates.extend(rotations)
            gates.extend(ring)
    return gates, slot
