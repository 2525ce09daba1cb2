import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import (
    S2,
    dense_expect_z,
    dense_run,
    random_circuit,
    ry_matrix,
)
from qseq.statevector import (
    CircuitSpec,
    GateOp,
    SimulationError,
    StateVector,
    amplitude_encode,
    angle_encode_ry,
    apply_gate,
    build_ring_variational,
    expect_z,
    grad_expect_z,
    grad_expect_z_inputs,
    init_zero,
    run,
    run_batch,
    vjp_expect_z_batch,
)


# ---------------------------------------------------------------------------
# known states


def test_init_zero_single_qubit():
    psi = init_zero(1)
    assert_allclose(psi.amplitudes, [1, 0], atol=1e-15)


def test_init_zero_norm_and_size():
    psi = init_zero(3)
    assert psi.amplitudes.shape == (8,)
    assert_allclose(psi.norm(), 1.0, atol=1e-15)


def test_hadamard_on_zero():
    psi = apply_gate(init_zero(1), GateOp("H", 0))
    assert_allclose(psi.amplitudes, [S2, S2], atol=1e-12)


def test_ry_half_pi_rotates_zero():
    psi = apply_gate(init_zero(1), GateOp("RY", 0, const=np.pi / 2))
    assert_allclose(psi.amplitudes, [S2, S2], atol=1e-12)


def test_rx_pi_flips_up_to_phase():
    psi = apply_gate(init_zero(1), GateOp("RX", 0, const=np.pi))
    assert_allclose(np.abs(psi.amplitudes), [0, 1], atol=1e-12)


def test_cnot_on_plus_zero_gives_bell():
    # qubit 0 is the LSB: H on qubit 0, CNOT(control=0, target=1)
    psi = apply_gate(init_zero(2), GateOp("H", 0))
    psi = apply_gate(psi, GateOp("CNOT", target=1, control=0))
    assert_allclose(psi.amplitudes, [S2, 0, 0, S2], atol=1e-12)


def test_cnot_control_not_set_is_identity():
    psi = apply_gate(init_zero(2), GateOp("H", 1))
    out = apply_gate(psi, GateOp("CNOT", target=1, control=0))
    assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-15)


def test_lsb_ordering_of_x_like_rotation():
    # RX(pi) on qubit 1 of two qubits sends |00> to |10> = index 2
    psi = apply_gate(init_zero(2), GateOp("RX", 1, const=np.pi))
    assert_allclose(np.abs(psi.amplitudes), [0, 0, 1, 0], atol=1e-12)


# ---------------------------------------------------------------------------
# encodings


def test_amplitude_encode_normalizes():
    psi = amplitude_encode([3.0, 4.0], 1)
    assert_allclose(psi.amplitudes, [0.6, 0.8], atol=1e-15)


def test_amplitude_encode_pads_with_zeros():
    psi = amplitude_encode([1.0, 1.0], 2)
    assert_allclose(psi.amplitudes, [S2, S2, 0, 0], atol=1e-12)


def test_amplitude_encode_rejects_zero_vector():
    with pytest.raises(SimulationError):
        amplitude_encode([0.0, 0.0], 2)


def test_amplitude_encode_rejects_oversized_input():
    with pytest.raises(SimulationError):
        amplitude_encode(np.ones(5), 2)


def test_angle_encode_ry_half_pi():
    # RY(pi/2) H |0> = (0, 1) exactly
    psi = angle_encode_ry([np.pi / 2], 1)
    assert_allclose(psi.amplitudes, [0, 1], atol=1e-12)


def test_angle_encode_zero_angles_is_plus_state():
    psi = angle_encode_ry([0.0, 0.0], 2)
    assert_allclose(psi.amplitudes, [0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_angle_encode_matches_dense_composition():
    angles = [0.3, -1.1, 2.2]
    psi = angle_encode_ry(angles, 3)
    gates = [GateOp("H", q) for q in range(3)]
    gates += [GateOp("RY", q, input_slot=q) for q in range(3)]
    circ = CircuitSpec(3, tuple(gates), n_input_slots=3, measured_qubits=(0,))
    assert_allclose(psi.amplitudes, dense_run(circ, inputs=angles), atol=1e-12)


# ---------------------------------------------------------------------------
# run / expect


def _bell_circuit():
    gates = (GateOp("H", 0), GateOp("CNOT", target=1, control=0))
    return CircuitSpec(2, gates, measured_qubits=(0, 1))


def test_run_bell():
    psi = run(_bell_circuit())
    assert_allclose(psi.amplitudes, [S2, 0, 0, S2], atol=1e-12)


def test_run_slot_count_mismatch_raises():
    circ = CircuitSpec(
        1, (GateOp("RY", 0, input_slot=0),), n_input_slots=1, measured_qubits=(0,)
    )
    with pytest.raises(SimulationError):
        run(circ, inputs=[0.1, 0.2])


def test_expect_z_plus_state_is_zero():
    psi = apply_gate(init_zero(1), GateOp("H", 0))
    assert_allclose(expect_z(psi, [0]), [0.0], atol=1e-12)


def test_expect_z_of_ry_is_cosine():
    for theta in (-2.0, -0.4, 0.0, 0.7, 2.5):
        psi = apply_gate(init_zero(1), GateOp("RY", 0, const=theta))
        assert_allclose(expect_z(psi, [0]), [np.cos(theta)], atol=1e-12)


def test_expect_z_multi_qubit_signs():
    # |10>: qubit 0 reads |0> (+1), qubit 1 reads |1> (-1)
    psi = apply_gate(init_zero(2), GateOp("RX", 1, const=np.pi))
    assert_allclose(expect_z(psi, [0, 1]), [1.0, -1.0], atol=1e-12)


def test_run_batch_broadcasts_shared_params():
    circ = CircuitSpec(
        1,
        (GateOp("RY", 0, input_slot=0), GateOp("RY", 0, param_slot=0)),
        n_input_slots=1,
        n_param_slots=1,
        measured_qubits=(0,),
    )
    inputs = np.array([[0.1], [0.5], [1.2]])
    amps = run_batch(circ, inputs, np.array([0.3]))
    assert amps.shape == (3, 2)
    for b, x in enumerate([0.1, 0.5, 1.2]):
        expected = ry_matrix(0.3) @ ry_matrix(x) @ np.array([1.0, 0.0])
        assert_allclose(amps[b], expected, atol=1e-12)


# ---------------------------------------------------------------------------
# random-circuit agreement with the dense oracle


@pytest.mark.parametrize("seed", range(40))
def test_run_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    circuit, inputs, params = random_circuit(rng)
    psi = run(circuit, inputs, params)
    assert_allclose(psi.amplitudes, dense_run(circuit, inputs, params), atol=1e-12)
    assert_allclose(
        expect_z(psi, circuit.measured_qubits),
        dense_expect_z(psi.amplitudes, circuit.n_qubits, circuit.measured_qubits),
        atol=1e-12,
    )


@pytest.mark.parametrize("seed", range(10))
def test_norm_preserved_on_random_circuits(seed):
    rng = np.random.default_rng(1000 + seed)
    circuit, inputs, params = random_circuit(rng)
    psi = run(circuit, inputs, params)
    assert abs(psi.norm() - 1.0) <= 1e-9


def test_run_is_deterministic():
    rng = np.random.default_rng(7)
    circuit, inputs, params = random_circuit(rng)
    a = run(circuit, inputs, params).amplitudes
    b = run(circuit, inputs, params).amplitudes
    assert np.array_equal(a, b)


def test_run_does_not_mutate_initial_state():
    start = init_zero(2)
    before = start.amplitudes.copy()
    run(_bell_circuit(), initial_state=start)
    assert np.array_equal(start.amplitudes, before)


# ---------------------------------------------------------------------------
# parameter-shift gradients


def test_grad_expect_z_single_ry():
    circ = CircuitSpec(
        1, (GateOp("RY", 0, param_slot=0),), n_param_slots=1, measured_qubits=(0,)
    )
    for theta in (0.0, np.pi / 2, 1.3, -2.1):
        jac = grad_expect_z(circ, (), [theta])
        assert_allclose(jac, [[-np.sin(theta)]], atol=1e-12)


def _fd_jacobian(circuit, inputs, params, qubits, wrt, h=1e-5):
    inputs = np.asarray(inputs, dtype=float).copy()
    params = np.asarray(params, dtype=float).copy()
    vec = inputs if wrt == "input" else params
    jac = np.zeros((len(qubits), vec.size))
    for j in range(vec.size):
        vec[j] += h
        up = expect_z(run(circuit, inputs, params), qubits)
        vec[j] -= 2 * h
        dn = expect_z(run(circuit, inputs, params), qubits)
        vec[j] += h
        jac[:, j] = (up - dn) / (2 * h)
    return jac


def _check_close_fd(analytic, fd):
    small = np.abs(fd) < 1e-2
    if np.any(small):
        assert np.max(np.abs(analytic[small] - fd[small])) <= 1e-7
    if np.any(~small):
        rel = np.abs(analytic[~small] - fd[~small]) / np.abs(fd[~small])
        assert np.max(rel) <= 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_grad_expect_z_matches_finite_differences(seed):
    rng = np.random.default_rng(200 + seed)
    circuit, inputs, params = random_circuit(rng)
    if circuit.n_param_slots == 0:
        pytest.skip("no parameters drawn")
    jac = grad_expect_z(circuit, inputs, params)
    fd = _fd_jacobian(circuit, inputs, params, circuit.measured_qubits, "param")
    _check_close_fd(jac, fd)


@pytest.mark.parametrize("seed", range(10))
def test_grad_expect_z_inputs_matches_finite_differences(seed):
    rng = np.random.default_rng(300 + seed)
    circuit, inputs, params = random_circuit(rng)
    if circuit.n_input_slots == 0:
        pytest.skip("no inputs drawn")
    jac = grad_expect_z_inputs(circuit, inputs, params)
    fd = _fd_jacobian(circuit, inputs, params, circuit.measured_qubits, "input")
    _check_close_fd(jac, fd)


def test_grad_with_shared_slot_across_two_gates():
    # one parameter feeding both RY and RZ on the same qubit
    gates = (
        GateOp("H", 0),
        GateOp("RY", 0, param_slot=0),
        GateOp("RZ", 0, param_slot=0),
    )
    circ = CircuitSpec(1, gates, n_param_slots=1, measured_qubits=(0,))
    theta = np.array([0.813])
    jac = grad_expect_z(circ, (), theta)
    fd = _fd_jacobian(circ, (), theta, (0,), "param")
    assert_allclose(jac, fd, atol=1e-8)


# ---------------------------------------------------------------------------
# adjoint VJP agrees with the shift rule


@pytest.mark.parametrize("seed", range(15))
def test_vjp_matches_shift_jacobians(seed):
    rng = np.random.default_rng(400 + seed)
    circuit, inputs, params = random_circuit(rng)
    k = len(circuit.measured_qubits)
    weights = rng.normal(size=k)
    expv, gin, gpar, _ = vjp_expect_z_batch(circuit, inputs, params, weights)
    assert_allclose(
        expv[0],
        expect_z(run(circuit, inputs, params), circuit.measured_qubits),
        atol=1e-12,
    )
    jac_p = grad_expect_z(circuit, inputs, params)
    jac_i = grad_expect_z_inputs(circuit, inputs, params)
    assert_allclose(gpar[0], weights @ jac_p, atol=1e-10)
    assert_allclose(gin[0], weights @ jac_i, atol=1e-10)


def test_vjp_batched_rows_are_independent():
    rng = np.random.default_rng(99)
    circ = CircuitSpec(
        2,
        (
            GateOp("RY", 0, input_slot=0),
            GateOp("RY", 1, input_slot=1),
            GateOp("CNOT", target=1, control=0),
            GateOp("RX", 0, param_slot=0),
            GateOp("RZ", 1, param_slot=1),
        ),
        n_input_slots=2,
        n_param_slots=2,
        measured_qubits=(0, 1),
    )
    inputs = rng.normal(size=(4, 2))
    params = rng.normal(size=2)
    weights = rng.normal(size=(4, 2))
    expv, gin, gpar, _ = vjp_expect_z_batch(circ, inputs, params, weights)
    for b in range(4):
        e1, g1, p1, _ = vjp_expect_z_batch(circ, inputs[b], params, weights[b])
        assert_allclose(expv[b], e1[0], atol=1e-12)
        assert_allclose(gin[b], g1[0], atol=1e-12)
        assert_allclose(gpar[b], p1[0], atol=1e-12)


def test_vjp_initial_state_gradient():
    # E(y) = <y|U^T Z U|y> for real unnormalized y fed in directly
    gates, n_par = build_ring_variational(2, 1, ("RY", "RZ"))
    circ = CircuitSpec(2, tuple(gates), n_param_slots=n_par, measured_qubits=(0, 1))
    rng = np.random.default_rng(5)
    params = rng.normal(size=n_par)
    y = rng.normal(size=4)
    y /= np.linalg.norm(y)
    weights = np.array([0.7, -0.4])

    def value(vec):
        amps = run_batch(circ, (), params, initial=vec[None, :].astype(complex))
        from qseq.statevector import expect_z_batch

        return float(expect_z_batch(amps, 2, (0, 1))[0] @ weights)

    _, _, _, ginit = vjp_expect_z_batch(
        circ, (), params, weights, initial=y[None, :].astype(complex),
        need_initial_grad=True,
    )
    h = 1e-6
    fd = np.zeros(4)
    for i in range(4):
        up = y.copy()
        up[i] += h
        dn = y.copy()
        dn[i] -= h
        fd[i] = (value(up) - value(dn)) / (2 * h)
    assert_allclose(ginit[0], fd, atol=1e-6)


# ---------------------------------------------------------------------------
# builders and validation


def test_ring_builder_slot_counts():
    _, n = build_ring_variational(5, 5, ("RY",))
    assert n == 25
    _, n = build_ring_variational(4, 2, ("RY", "RZ"))
    assert n == 16
    _, n = build_ring_variational(9, 4, ("RY", "RZ"), share_layer_slot=True)
    assert n == 36
    _, n = build_ring_variational(8, 2, ("RY",))
    assert n == 16


def test_ring_builder_layer_order():
    gates, _ = build_ring_variational(3, 1, ("RY",))
    assert [g.kind for g in gates] == ["RY", "RY", "RY", "CNOT", "CNOT", "CNOT"]
    gates, _ = build_ring_variational(3, 1, ("RY",), entangle_first=True)
    assert [g.kind for g in gates] == ["CNOT", "CNOT", "CNOT", "RY", "RY", "RY"]


def test_ring_builder_ring_wraps_around():
    gates, _ = build_ring_variational(3, 1, ("RY",))
    cnots = [(g.control, g.target) for g in gates if g.kind == "CNOT"]
    assert cnots == [(0, 1), (1, 2), (2, 0)]


def test_ring_builder_single_qubit_has_no_ring():
    gates, n = build_ring_variational(1, 2, ("RY",))
    assert all(g.kind == "RY" for g in gates)
    assert n == 2


def test_gateop_validation():
    with pytest.raises(SimulationError):
        GateOp("RY", 0)  # no angle source
    with pytest.raises(SimulationError):
        GateOp("RY", 0, const=0.1, param_slot=0)  # two sources
    with pytest.raises(SimulationError):
        GateOp("H", 0, const=0.3)
    with pytest.raises(SimulationError):
        GateOp("CNOT", 0)
    with pytest.raises(SimulationError):
        GateOp("CNOT", 1, control=1)
    with pytest.raises(SimulationError):
        GateOp("SWAP", 0)


def test_circuit_validation():
    with pytest.raises(SimulationError):
        CircuitSpec(1, (GateOp("H", 1),))
    with pytest.raises(SimulationError):
        CircuitSpec(1, (GateOp("RY", 0, input_slot=2),), n_input_slots=1)
    with pytest.raises(SimulationError):
        CircuitSpec(2, (), measured_qubits=(0, 0))
    with pytest.raises(SimulationError):
        CircuitSpec(25, ())


def test_qubit_cap_enforced():
    with pytest.raises(SimulationError):
        init_zero(21)
    psi = init_zero(1)
    assert isinstance(psi, StateVector)
