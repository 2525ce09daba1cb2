"""A first walk through the statevector simulator.

Builds a two-qubit circuit gate by gate, runs it, and pokes at the state:
amplitudes, measurement probabilities, Pauli-Z expectations, and the
norm-preservation guarantee.
"""

import numpy as np

from qseq import CircuitSpec, GateOp, expect_z, run

# A Bell-pair maker with a tunable rotation on top: H(0), CNOT(0->1), RY(q1).
# Rotation angles can come from a constant, an input slot, or a parameter
# slot; here the RY reads input slot 0 so the same circuit can be re-run
# with different angles without rebuilding anything.
circuit = CircuitSpec(
    n_qubits=2,
    gates=[
        GateOp("H", target=0),
        GateOp("CNOT", target=1, control=0),
        GateOp("RY", target=1, input_slot=0),
    ],
    n_input_slots=1,
    measured_qubits=(0, 1),
)

state = run(circuit, inputs=[0.0])
print("amplitudes at angle 0:", np.round(state.amplitudes, 6))
print("probabilities:        ", np.round(np.abs(state.amplitudes) ** 2, 6))

# With no rotation this is the Bell state (|00> + |11>)/sqrt(2): each qubit
# alone is maximally mixed, so both <Z> values vanish.
print("<Z_0>, <Z_1>:", expect_z(state, (0, 1)))

# Fun fact: no local rotation on qubit 1 can move its <Z> here — each half
# of a Bell pair is maximally mixed, so the readout stays 0 for every angle.
state = run(circuit, inputs=[1.234])
print("<Z_1> after a local rotation on the Bell pair:", expect_z(state, (1,))[0])

# For a readout that *does* respond, rotate an unentangled qubit:
# RY(theta)|0> gives <Z> = cos(theta).
solo = CircuitSpec(
    n_qubits=1,
    gates=[GateOp("RY", target=0, input_slot=0)],
    n_input_slots=1,
    measured_qubits=(0,),
)
print("\nangle sweep on a single qubit (expect cos(theta)):")
for angle in np.linspace(0.0, np.pi, 5):
    state = run(solo, inputs=[angle])
    print(
        f"  theta={angle:5.3f}  <Z>={expect_z(state, (0,))[0]:+.6f}  "
        f"cos={np.cos(angle):+.6f}  norm={state.norm():.12f}"
    )

# The engine never renormalizes: unitarity alone keeps the norm at 1, and
# every public entry point asserts it to 1e-9.
