"""Reverse-mode automatic differentiation over float64 numpy tensors.

A :class:`Node` wraps a value array, its gradient, and a closure that pushes
the gradient to its parents; ``backward()`` runs the closures once each in
reverse topological order.  Shapes are explicit: no broadcasting happens
outside of named ops (``add_bias``, ``mul_vec``, ``scale_rows``, ...) and
scalar-times-tensor.

``quantum_expect`` is the bridge into the statevector simulator: forward runs
the circuit batch, backward pulls exact angle derivatives through the
adjoint VJP (cross-checked against the parameter-shift rule in the tests).
"""

from __future__ import annotations

import numpy as np

from . import statevector as sv


class ShapeError(ValueError):
    pass


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "grad", "_parents", "_backward", "_op")

    def __init__(self, value, parents=(), op="leaf"):
        self.value = _arr(value)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = None
        self._op = op

    @property
    def shape(self):
        return self.value.shape

    def backward(self):
        if self.value.size != 1:
            raise ShapeError("backward() starts from a scalar node")
        topo: list[Node] = []
        seen = set()
        stack: list[tuple[Node, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in topo:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # operator sugar; full-shape ops live in the module functions below
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Node(op={self._op!r}, shape={self.value.shape})"


class Parameter(Node):
    """A trainable leaf with a name and a census kind."""

    __slots__ = ("name", "kind")

    def __init__(self, name: str, value, kind: str = "classical"):
        if kind not in ("classical", "quantum"):
            raise ValueError(f"unknown parameter kind {kind!r}")
        super().__init__(value, op="param")
        self.name = name
        self.kind = kind

    def __repr__(self):
        return f"Parameter({self.name!r}, kind={self.kind!r}, shape={self.value.shape})"


def constant(value) -> Node:
    return Node(value, op="const")


def _lift(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def _same_shape(a: Node, b: Node, op: str):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: shapes {a.value.shape} and {b.value.shape} differ")


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    if a.value.shape != b.value.shape and a.value.size != 1 and b.value.size != 1:
        raise ShapeError(f"add: shapes {a.value.shape} and {b.value.shape} differ")
    out = Node(a.value + b.value, (a, b), "add")

    def _back():
        a.grad += _reduce_to(out.grad, a.value.shape)
        b.grad += _reduce_to(out.grad, b.value.shape)

    out._backward = _back
    return out


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return grad.sum().reshape(shape)  # only the scalar case reaches here


def sub(a, b) -> Node:
    return add(a, scale(_lift(b), -1.0))


def mul(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    if a.value.size == 1 or b.value.size == 1:
        if a.value.size == 1 and b.value.size != 1:
            a, b = b, a  # tensor first
        out = Node(a.value * b.value, (a, b), "mul")

        def _back_scalar():
            a.grad += out.grad * b.value
            b.grad += _reduce_to(out.grad * a.value, b.value.shape)

        out._backward = _back_scalar
        return out
    _same_shape(a, b, "mul")
    out = Node(a.value * b.value, (a, b), "mul")

    def _back():
        a.grad += out.grad * b.value
        b.grad += out.grad * a.value

    out._backward = _back
    return out


def scale(a: Node, s: float) -> Node:
    out = Node(a.value * s, (a,), "scale")

    def _back():
        a.grad += out.grad * s

    out._backward = _back
    return out


def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"matmul: inner dims {a.value.shape} @ {b.value.shape} do not match"
        )
    out = Node(a.value @ b.value, (a, b), "matmul")

    def _back():
        a.grad += out.grad @ b.value.T
        b.grad += a.value.T @ out.grad

    out._backward = _back
    return out


def add_bias(x: Node, b: Node) -> Node:
    """(rows, n) + (n,) with the gradient summed over rows."""
    if x.value.ndim != 2 or b.value.ndim != 1 or x.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"add_bias: {x.value.shape} + {b.value.shape}")
    out = Node(x.value + b.value[None, :], (x, b), "add_bias")

    def _back():
        x.grad += out.grad
        b.grad += out.grad.sum(axis=0)

    out._backward = _back
    return out


def mul_vec(x: Node, v: Node) -> Node:
    """Row-wise channel product: (rows, n) * (n,)."""
    if x.value.ndim != 2 or v.value.ndim != 1 or x.value.shape[1] != v.value.shape[0]:
        raise ShapeError(f"mul_vec: {x.value.shape} * {v.value.shape}")
    out = Node(x.value * v.value[None, :], (x, v), "mul_vec")

    def _back():
        x.grad += out.grad * v.value[None, :]
        v.grad += (out.grad * x.value).sum(axis=0)

    out._backward = _back
    return out


def scale_rows(x: Node, s: Node) -> Node:
    """Scale row i of (rows, n) by s[i]."""
    if x.value.ndim != 2 or s.value.ndim != 1 or x.value.shape[0] != s.value.shape[0]:
        raise ShapeError(f"scale_rows: {x.value.shape} by {s.value.shape}")
    out = Node(x.value * s.value[:, None], (x, s), "scale_rows")

    def _back():
        x.grad += out.grad * s.value[:, None]
        s.grad += (out.grad * x.value).sum(axis=1)

    out._backward = _back
    return out


def dot_rows(a: Node, b: Node) -> Node:
    """Row-wise inner product of two (rows, n) arrays -> (rows,)."""
    _same_shape(a, b, "dot_rows")
    if a.value.ndim != 2:
        raise ShapeError("dot_rows expects 2-D operands")
    out = Node(np.einsum("bi,bi->b", a.value, b.value), (a, b), "dot_rows")

    def _back():
        a.grad += out.grad[:, None] * b.value
        b.grad += out.grad[:, None] * a.value

    out._backward = _back
    return out


def outer(a: Node, b: Node) -> Node:
    """Outer product: (p,) x (q,) -> (p, q), or batched (B, p) x (B, q) -> (B, p, q)."""
    if a.value.ndim == 1 and b.value.ndim == 1:
        out = Node(np.einsum("i,j->ij", a.value, b.value), (a, b), "outer")

        def _back1():
            a.grad += out.grad @ b.value
            b.grad += a.value @ out.grad

        out._backward = _back1
        return out
    if a.value.ndim == 2 and b.value.ndim == 2 and a.value.shape[0] == b.value.shape[0]:
        out = Node(np.einsum("bi,bj->bij", a.value, b.value), (a, b), "outer")

        def _back2():
            a.grad += np.einsum("bij,bj->bi", out.grad, b.value)
            b.grad += np.einsum("bij,bi->bj", out.grad, a.value)

        out._backward = _back2
        return out
    raise ShapeError(f"outer: {a.value.shape} x {b.value.shape}")


# ---------------------------------------------------------------------------
# shape plumbing


def concat(nodes, axis: int = 1) -> Node:
    nodes = [_lift(n) for n in nodes]
    values = [n.value for n in nodes]
    out = Node(np.concatenate(values, axis=axis), tuple(nodes), "concat")
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def _back():
        for n, start, stop in zip(nodes, offsets[:-1], offsets[1:]):
            index = [slice(None)] * out.grad.ndim
            index[axis] = slice(start, stop)
            n.grad += out.grad[tuple(index)]

    out._backward = _back
    return out


def narrow(x: Node, axis: int, start: int, length: int) -> Node:
    if not (0 <= start and start + length <= x.value.shape[axis]):
        raise ShapeError(
            f"narrow: [{start}, {start + length}) out of range on axis {axis} "
            f"of {x.value.shape}"
        )
    index = [slice(None)] * x.value.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out = Node(x.value[index], (x,), "narrow")

    def _back():
        x.grad[index] += out.grad

    out._backward = _back
    return out


def reshape(x: Node, shape) -> Node:
    out = Node(x.value.reshape(shape), (x,), "reshape")

    def _back():
        x.grad += out.grad.reshape(x.value.shape)

    out._backward = _back
    return out


def transpose(x: Node) -> Node:
    if x.value.ndim != 2:
        raise ShapeError("transpose expects a 2-D node")
    out = Node(x.value.T, (x,), "transpose")

    def _back():
        x.grad += out.grad.T

    out._backward = _back
    return out


def expand_rows(x: Node, rows: int) -> Node:
    """Tile a tensor along a new leading axis; gradient sums back over it."""
    out = Node(np.broadcast_to(x.value, (rows,) + x.value.shape).copy(), (x,), "expand")

    def _back():
        x.grad += out.grad.sum(axis=0)

    out._backward = _back
    return out


# ---------------------------------------------------------------------------
# nonlinearities


def sigmoid(x: Node) -> Node:
    v = x.value
    out_val = np.empty_like(v)
    pos = v >= 0
    out_val[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out_val[~pos] = ev / (1.0 + ev)
    out = Node(out_val, (x,), "sigmoid")

    def _back():
        x.grad += out.grad * out.value * (1.0 - out.value)

    out._backward = _back
    return out


def tanh(x: Node) -> Node:
    out = Node(np.tanh(x.value), (x,), "tanh")

    def _back():
        x.grad += out.grad * (1.0 - out.value**2)

    out._backward = _back
    return out


def relu(x: Node) -> Node:
    out = Node(np.maximum(x.value, 0.0), (x,), "relu")

    def _back():
        x.grad += out.grad * (x.value > 0.0)

    out._backward = _back
    return out


def softmax(x: Node, axis: int = -1) -> Node:
    """Row-stabilized softmax (max subtraction before exponentiation)."""
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out = Node(ex / ex.sum(axis=axis, keepdims=True), (x,), "softmax")

    def _back():
        inner = (out.grad * out.value).sum(axis=axis, keepdims=True)
        x.grad += out.value * (out.grad - inner)

    out._backward = _back
    return out


def layer_norm(x: Node, gain: Node, bias: Node, eps: float = 1e-5) -> Node:
    if x.value.ndim != 2:
        raise ShapeError("layer_norm expects (rows, features)")
    n = x.value.shape[1]
    if gain.value.shape != (n,) or bias.value.shape != (n,):
        raise ShapeError("layer_norm gain/bias must match the feature dim")
    mu = x.value.mean(axis=1, keepdims=True)
    xc = x.value - mu
    var = (xc**2).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xn = xc * inv
    out = Node(xn * gain.value[None, :] + bias.value[None, :], (x, gain, bias), "ln")

    def _back():
        g = out.grad
        gain.grad += (g * xn).sum(axis=0)
        bias.grad += g.sum(axis=0)
        dxn = g * gain.value[None, :]
        x.grad += inv * (
            dxn
            - dxn.mean(axis=1, keepdims=True)
            - xn * (dxn * xn).mean(axis=1, keepdims=True)
        )

    out._backward = _back
    return out


# ---------------------------------------------------------------------------
# losses


def mse_loss(pred: Node, target) -> Node:
    target = _arr(target)
    if pred.value.shape != target.shape:
        raise ShapeError(
            f"mse_loss: prediction {pred.value.shape} vs target {target.shape}"
        )
    if target.size == 0:
        raise ShapeError("mse_loss on an empty batch")
    diff = pred.value - target
    out = Node(np.mean(diff**2), (pred,), "mse")

    def _back():
        pred.grad += out.grad * (2.0 / target.size) * diff

    out._backward = _back
    return out


# ---------------------------------------------------------------------------
# quantum bridge


def quantum_expect(circuit: sv.CircuitSpec, inputs: Node, params: Node, qubits=None) -> Node:
    """Batched <Z> readout of a parameterized circuit, differentiable in both
    the input angles and the parameter angles."""
    qubits = circuit.measured_qubits if qubits is None else tuple(qubits)
    single = inputs.value.ndim == 1
    in_val = inputs.value if not single else inputs.value[None, :]
    if in_val.ndim != 2 or in_val.shape[1] != circuit.n_input_slots:
        raise ShapeError(
            f"quantum_expect: inputs {inputs.value.shape} vs "
            f"{circuit.n_input_slots} slots"
        )
    if params.value.ndim not in (1, 2) or params.value.shape[-1] != circuit.n_param_slots:
        raise ShapeError(
            f"quantum_expect: params {params.value.shape} vs "
            f"{circuit.n_param_slots} slots"
        )
    amps = sv.run_batch(circuit, in_val, params.value)
    expv = sv.expect_z_batch(amps, circuit.n_qubits, qubits)
    out = Node(expv[0] if single else expv, (inputs, params), "qexpect")

    def _back():
        weights = out.grad if not single else out.grad[None, :]
        _, gin, gpar, _ = sv.vjp_expect_z_batch(
            circuit, in_val, params.value, weights, qubits, final=amps
        )
        inputs.grad += gin[0] if single else gin
        if params.value.ndim == 1:
            params.grad += gpar.sum(axis=0)
        else:
            params.grad += gpar

    out._backward = _back
    return out


def quantum_expect_amplitude(
    circuit: sv.CircuitSpec, vec: Node, params: Node, qubits=None
) -> Node:
    """<Z> readout with the (row-wise normalized) input vector loaded as the
    initial amplitudes; the circuit must take no input slots."""
    if circuit.n_input_slots != 0:
        raise ShapeError("amplitude mode needs a circuit without input slots")
    qubits = circuit.measured_qubits if qubits is None else tuple(qubits)
    if vec.value.ndim != 2:
        raise ShapeError("quantum_expect_amplitude expects (batch, features)")
    batch, width = vec.value.shape
    dim = 1 << circuit.n_qubits
    if width > dim:
        raise ShapeError(f"cannot amplitude-encode {width} features on {dim} amplitudes")
    norms = np.linalg.norm(vec.value, axis=1)
    if np.any(norms == 0.0):
        raise sv.SimulationError("amplitude encoding of an all-zero row is degenerate")
    unit = vec.value / norms[:, None]
    initial = np.zeros((batch, dim), dtype=np.complex128)
    initial[:, :width] = unit
    amps = sv.run_batch(circuit, (), params.value, initial=initial)
    expv = sv.expect_z_batch(amps, circuit.n_qubits, qubits)
    out = Node(expv, (vec, params), "qexpect_amp")

    def _back():
        _, _, gpar, ginit = sv.vjp_expect_z_batch(
            circuit, (), params.value, out.grad, qubits,
            need_initial_grad=True, final=amps,
        )
        gy = ginit[:, :width]
        # chain through y = v / ||v||
        inner = np.einsum("bi,bi->b", gy, unit)
        vec.grad += (gy - unit * inner[:, None]) / norms[:, None]
        if params.value.ndim == 1:
            params.grad += gpar.sum(axis=0)
        else:
            params.grad += gpar

    out._backward = _back
    return out


# ---------------------------------------------------------------------------
# optimizer


class AdamW:
    """Adam with decoupled weight decay (decay applied to the value itself,
    independently of the moment update)."""

    def __init__(
        self,
        params,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.params = list(params)
        if not self.params:
            raise ValueError("AdamW needs at least one parameter")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.state = {
            id(p): (np.zeros_like(p.value), np.zeros_like(p.value))
            for p in self.params
        }

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p in self.params:
            if p.grad is None:
                raise ValueError(f"parameter {p!r} has no gradient; run backward()")
            if self.weight_decay:
                p.value *= 1.0 - self.lr * self.weight_decay
            m, v = self.state[id(p)]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad**2
            p.value -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


# ---------------------------------------------------------------------------
# gradient checking


def finite_difference_check(
    loss_fn,
    params,
    h: float = 1e-5,
    floor: float = 1e-3,
    max_components: int | None = None,
    seed: int = 0,
) -> float:
    """Max scaled error between backward gradients and central differences.

    The error for one component is ``|g - fd| / max(|fd|, floor)``; with the
    default floor, a return value <= 1e-4 means every checked component is
    within 1e-4 relative error (or 1e-7 absolute where the derivative is
    tiny).  ``max_components`` caps how many components of each parameter are
    probed (a seeded random subset) so that large dense maps stay affordable.
    """
    loss = loss_fn()
    loss.backward()
    grads = [p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.value.reshape(-1)
        gflat = g.reshape(-1)
        idx = np.arange(flat.size)
        if max_components is not None and flat.size > max_components:
            idx = rng.choice(flat.size, size=max_components, replace=False)
            idx.sort()
        for j in idx:
            keep = flat[j]
            flat[j] = keep + h
            up = float(loss_fn().value)
            flat[j] = keep - h
            dn = float(loss_fn().value)
            flat[j] = keep
            fd = (up - dn) / (2.0 * h)
            err = abs(gflat[j] - fd) / max(abs(fd), floor)
            if err > worst:
                worst = err
    return worst
