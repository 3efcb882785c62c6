"""Minimal reverse-mode building blocks shared by the agent heads and the
forecaster: dense layers, activations, categorical sampling, an LSTM cell,
a Wengert-list gradient tape, optimizers and flat parameter serialization.

Ops accept either a feature vector or a [batch, features] matrix; the
batched form is what keeps trajectory updates and full-batch BPTT fast.
All math is float64.

Checkpoint byte layout (``pack_arrays``/``save_arrays``):

    magic   b"DNP1"
    count   uint32 little-endian, number of arrays
    per array:
        ndim    uint32 LE
        dims    ndim x uint64 LE
        data    float64 LE, C order
"""

from __future__ import annotations

import struct

import numpy as np


class Param:
    """Trainable array with a gradient buffer that ops accumulate into."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)


class Node:
    """One traced value on a tape."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)


def _accumulate_param(param: Param, g: np.ndarray, x: np.ndarray) -> None:
    """Weight/bias gradient for an affine op, batched or not."""
    if x.ndim == 2:
        param.grad += g.T @ x
    else:
        param.grad += np.outer(g, x)


class Tape:
    """Ordered record of a forward pass; backward replays it in reverse.

    Every op returns a Node. Calling :meth:`backward` seeds the loss node
    and sweeps the recorded vector-Jacobian products last-to-first,
    accumulating into Node.grad and Param.grad.
    """

    def __init__(self):
        self._records = []

    def _push(self, vjp) -> None:
        self._records.append(vjp)

    @staticmethod
    def constant(value) -> Node:
        return Node(value)

    def backward(self, loss: Node, seed: float = 1.0) -> None:
        if not self._records:
            raise ValueError("backward called before any forward op was recorded")
        loss.grad = loss.grad + np.asarray(seed, dtype=np.float64)
        for vjp in reversed(self._records):
            vjp()

    # -- ops ---------------------------------------------------------------

    def dense(self, layer: "Dense", x: Node) -> Node:
        if x.value.shape[-1] != layer.w.value.shape[1]:
            raise ValueError(
                f"dense expects input width {layer.w.value.shape[1]}, "
                f"got {x.value.shape[-1]}"
            )
        out = Node(x.value @ layer.w.value.T + layer.b.value)

        def vjp():
            g = out.grad
            _accumulate_param(layer.w, g, x.value)
            layer.b.grad += g.sum(axis=0) if g.ndim == 2 else g
            x.grad += g @ layer.w.value

        self._push(vjp)
        return out

    def tanh(self, x: Node) -> Node:
        out = Node(np.tanh(x.value))

        def vjp():
            x.grad += (1.0 - out.value * out.value) * out.grad

        self._push(vjp)
        return out

    def sigmoid(self, x: Node) -> Node:
        out = Node(_sigmoid(x.value))

        def vjp():
            x.grad += out.value * (1.0 - out.value) * out.grad

        self._push(vjp)
        return out

    def softmax(self, x: Node) -> Node:
        out = Node(softmax(x.value))

        def vjp():
            g = out.grad
            inner = np.sum(g * out.value, axis=-1, keepdims=True)
            x.grad += out.value * (g - inner)

        self._push(vjp)
        return out

    def log(self, x: Node) -> Node:
        out = Node(np.log(x.value))

        def vjp():
            x.grad += out.grad / x.value

        self._push(vjp)
        return out

    def pick(self, x: Node, index) -> Node:
        """Gather x[i, index[i]] per batch row (or x[index] for vectors)."""
        if x.value.ndim == 2:
            idx = np.asarray(index, dtype=np.intp)
            rows = np.arange(x.value.shape[0])
            out = Node(x.value[rows, idx])

            def vjp():
                np.add.at(x.grad, (rows, idx), out.grad)

        else:
            idx = int(index)
            out = Node(x.value[idx])

            def vjp():
                x.grad[idx] += out.grad

        self._push(vjp)
        return out

    def add(self, a: Node, b: Node) -> Node:
        out = Node(a.value + b.value)

        def vjp():
            a.grad += out.grad
            b.grad += out.grad

        self._push(vjp)
        return out

    def add_const(self, x: Node, c) -> Node:
        out = Node(x.value + c)

        def vjp():
            x.grad += out.grad

        self._push(vjp)
        return out

    def mul(self, a: Node, b: Node) -> Node:
        out = Node(a.value * b.value)

        def vjp():
            a.grad += b.value * out.grad
            b.grad += a.value * out.grad

        self._push(vjp)
        return out

    def scale(self, x: Node, c) -> Node:
        out = Node(x.value * c)

        def vjp():
            x.grad += np.asarray(c) * out.grad

        self._push(vjp)
        return out

    def square(self, x: Node) -> Node:
        out = Node(x.value * x.value)

        def vjp():
            x.grad += 2.0 * x.value * out.grad

        self._push(vjp)
        return out

    def sum(self, x: Node) -> Node:
        out = Node(np.sum(x.value))

        def vjp():
            x.grad += out.grad

        self._push(vjp)
        return out

    def lstm(self, cell: "LstmCell", x: Node, state) -> tuple[Node, Node]:
        """One LSTM step; returns (hidden, cell_state) nodes."""
        h, c = state
        if x.value.shape[-1] != cell.input_size:
            raise ValueError(
                f"lstm expects input width {cell.input_size}, got {x.value.shape[-1]}"
            )
        z = np.concatenate([x.value, h.value], axis=-1)
        gi = _sigmoid(z @ cell.w_i.value.T + cell.b_i.value)
        gf = _sigmoid(z @ cell.w_f.value.T + cell.b_f.value)
        go = _sigmoid(z @ cell.w_o.value.T + cell.b_o.value)
        gg = np.tanh(z @ cell.w_g.value.T + cell.b_g.value)
        c_new = Node(gf * c.value + gi * gg)
        tc = np.tanh(c_new.value)
        h_new = Node(go * tc)

        def vjp():
            gh = h_new.grad
            dc = c_new.grad + gh * go * (1.0 - tc * tc)
            dgo = gh * tc * go * (1.0 - go)
            dgi = dc * gg * gi * (1.0 - gi)
            dgf = dc * c.value * gf * (1.0 - gf)
            dgg = dc * gi * (1.0 - gg * gg)
            c.grad += dc * gf
            dz = (
                dgi @ cell.w_i.value
                + dgf @ cell.w_f.value
                + dgo @ cell.w_o.value
                + dgg @ cell.w_g.value
            )
            for param_w, param_b, dg in (
                (cell.w_i, cell.b_i, dgi),
                (cell.w_f, cell.b_f, dgf),
                (cell.w_o, cell.b_o, dgo),
                (cell.w_g, cell.b_g, dgg),
            ):
                _accumulate_param(param_w, dg, z)
                param_b.grad += dg.sum(axis=0) if dg.ndim == 2 else dg
            d = cell.input_size
            x.grad += dz[..., :d]
            h.grad += dz[..., d:]

        self._push(vjp)
        return h_new, c_new

    def vqc(self, angles: Param, n_qubits: int, depth: int, x: Node) -> Node:
        """Variational-circuit encoder; backward runs the parameter-shift rule."""
        from . import qsim  # local import keeps diffnet importable standalone

        params = qsim.VqcParams(n_qubits, depth, angles.value)
        batched = x.value.ndim == 2
        xv = x.value if batched else x.value[None, :]
        out_val = qsim.run_vqc_batch(xv, params)
        out = Node(out_val if batched else out_val[0])

        def vjp():
            up = out.grad if batched else out.grad[None, :]
            if not np.any(up):
                return
            pg, ig = qsim.vqc_gradients_batch(xv, params, up)
            angles.grad += pg
            x.grad += ig if batched else ig[0]

        self._push(vjp)
        return out


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def softmax(v) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    v = np.asarray(v, dtype=np.float64)
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


class Dense:
    """Affine layer y = W x + b with uniform(-1/sqrt(fan_in), ..) init."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(n_in)
        self.w = Param(rng.uniform(-bound, bound, (n_out, n_in)))
        self.b = Param(rng.uniform(-bound, bound, n_out))

    def parameters(self) -> list[Param]:
        return [self.w, self.b]


class LstmCell:
    """Single-layer LSTM cell. Gate weights have shape [H, D+H]; the forget
    bias starts at 1.0 so memory is initially sticky."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        self.input_size = input_size
        self.hidden_size = hidden_size
        bound = 1.0 / np.sqrt(input_size + hidden_size)

        def w():
            return Param(rng.uniform(-bound, bound, (hidden_size, input_size + hidden_size)))

        def b():
            return Param(rng.uniform(-bound, bound, hidden_size))

        self.w_i, self.b_i = w(), b()
        self.w_f, self.b_f = w(), Param(np.ones(hidden_size))
        self.w_o, self.b_o = w(), b()
        self.w_g, self.b_g = w(), b()

    def parameters(self) -> list[Param]:
        return [
            self.w_i, self.b_i, self.w_f, self.b_f,
            self.w_o, self.b_o, self.w_g, self.b_g,
        ]

    def initial_state(self, batch: int | None = None) -> tuple[Node, Node]:
        shape = (self.hidden_size,) if batch is None else (batch, self.hidden_size)
        return Node(np.zeros(shape)), Node(np.zeros(shape))


def categorical_sample(probs, rng: np.random.Generator) -> int:
    """Sample an index from a probability vector; deterministic given rng state."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be a nonnegative vector summing to 1")
    r = rng.random()
    return int(min(np.searchsorted(np.cumsum(p), r, side="right"), len(p) - 1))


# -- parameter plumbing -----------------------------------------------------

def flatten_params(params: list[Param]) -> np.ndarray:
    if not params:
        return np.zeros(0)
    return np.concatenate([p.value.ravel() for p in params])


def flatten_grads(params: list[Param]) -> np.ndarray:
    if not params:
        return np.zeros(0)
    return np.concatenate([p.grad.ravel() for p in params])


def set_flat_params(params: list[Param], theta: np.ndarray) -> None:
    offset = 0
    for p in params:
        size = p.value.size
        p.value[...] = theta[offset:offset + size].reshape(p.value.shape)
        offset += size
    if offset != theta.size:
        raise ValueError(f"flat vector has {theta.size} entries, params need {offset}")


def zero_grads(params: list[Param]) -> None:
    for p in params:
        p.grad[...] = 0.0


def clip_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm > 0:
        return grad * (max_norm / norm)
    return grad


class SgdOptimizer:
    """Plain theta <- theta - lr * grad."""

    def __init__(self, size: int, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return theta - self.learning_rate * grad


class AdamOptimizer:
    def __init__(self, size: int, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, size: int, learning_rate: float):
    if kind == "adam":
        return AdamOptimizer(size, learning_rate)
    if kind == "sgd":
        return SgdOptimizer(size, learning_rate)
    raise ValueError(f"unknown optimizer kind '{kind}'")


# -- serialization ----------------------------------------------------------

_MAGIC = b"DNP1"


def pack_arrays(arrays: list[np.ndarray]) -> bytes:
    parts = [_MAGIC, struct.pack("<I", len(arrays))]
    for a in arrays:
        a = np.asarray(a, dtype=np.float64)
        parts.append(struct.pack("<I", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(a.astype("<f8").tobytes(order="C"))
    return b"".join(parts)


def unpack_arrays(blob: bytes) -> list[np.ndarray]:
    if blob[:4] != _MAGIC:
        raise ValueError("not a DNP1 parameter blob")
    offset = 4
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    arrays = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}Q", blob, offset)
        offset += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        arrays.append(data.reshape(shape).astype(np.float64))
    return arrays


def save_arrays(path, arrays: list[np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_arrays(arrays))


def load_arrays(path) -> list[np.ndarray]:
    with open(path, "rb") as fh:
        return unpack_arrays(fh.read())
