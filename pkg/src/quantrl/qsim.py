"""Exact statevector simulation of the RY/RZ/CNOT variational circuit.

Qubit indexing is little-endian: qubit 0 is the least significant bit of
the basis-state index, so for two qubits the amplitude order is
|00>, |01>, |10>, |11> with the *right* digit being qubit 0.

The circuit family is fixed: an angle-encoding layer RY(pi * x_i) on every
qubit, followed by `depth` variational layers of per-qubit RY and RZ
rotations and a CNOT ring CNOT(i, (i+1) mod n). Measurement is the vector
of per-qubit Pauli-Z expectations. Gradients use the parameter-shift rule,
which is exact for rotation gates; all shifted circuits are evaluated in
one batched pass.

Everything here is stateless: functions take statevectors or parameter
bundles in and hand new ones back, so concurrent use on distinct instances
is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError

MAX_QUBITS = 16
ENCODING_SCALE = np.pi  # post-tanh latents in (-1, 1) map to angles in (-pi, pi)


@dataclass
class QuantumState:
    """Complex statevector over ``n_qubits`` (length ``2**n_qubits``)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"statevector for {self.n_qubits} qubits must have length "
                f"{1 << self.n_qubits}, got {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def z_expectations(self) -> np.ndarray:
        """Per-qubit <Z_i>, each in [-1, 1]."""
        probs = np.abs(self.amplitudes) ** 2
        return probs @ _z_signs(self.n_qubits).T


@dataclass
class VqcParams:
    """Trainable rotation angles, shape [depth][n_qubits][2] (0=RY, 1=RZ)."""

    n_qubits: int = 8
    depth: int = 2
    angles: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.angles is None:
            self.angles = np.zeros((self.depth, self.n_qubits, 2))
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.shape != (self.depth, self.n_qubits, 2):
            raise ValueError(
                f"angles must have shape {(self.depth, self.n_qubits, 2)}, "
                f"got {self.angles.shape}"
            )
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("angles must be finite")

    @property
    def n_trainable(self) -> int:
        return self.angles.size


def init_zero_state(n_qubits: int) -> QuantumState:
    """State |0...0>."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(
            f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}"
        )
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return QuantumState(n_qubits, amps)


def _check_qubit(n_qubits: int, qubit: int, what: str = "qubit") -> None:
    if not 0 <= qubit < n_qubits:
        raise ValueError(f"{what} index {qubit} out of range for {n_qubits} qubits")


@lru_cache(maxsize=None)
def _z_signs(n_qubits: int) -> np.ndarray:
    """signs[q, i] = +1 if bit q of basis index i is 0, else -1."""
    idx = np.arange(1 << n_qubits)
    bits = (idx[None, :] >> np.arange(n_qubits)[:, None]) & 1
    return (1.0 - 2.0 * bits).astype(np.float64)


@lru_cache(maxsize=None)
def _cnot_perm(n_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    flipped = idx ^ (1 << target)
    control_set = (idx >> control) & 1 == 1
    return np.where(control_set, flipped, idx)


# Batched in-place kernels. `amps` has shape [batch, 2**n]; `theta` is a
# scalar or a length-batch vector of per-row angles.

def _ry_inplace(amps: np.ndarray, n: int, qubit: int, theta) -> None:
    hi = 1 << (n - 1 - qubit)
    lo = 1 << qubit
    a = amps.reshape(amps.shape[0], hi, 2, lo)
    half = 0.5 * np.asarray(theta, dtype=np.float64)
    c, s = np.cos(half), np.sin(half)
    if c.ndim:
        c = c.reshape(-1, 1, 1)
        s = s.reshape(-1, 1, 1)
    a0 = a[:, :, 0, :].copy()
    a1 = a[:, :, 1, :]
    a[:, :, 0, :] = c * a0 - s * a1
    a[:, :, 1, :] = s * a0 + c * a1


def _rz_inplace(amps: np.ndarray, n: int, qubit: int, theta) -> None:
    hi = 1 << (n - 1 - qubit)
    lo = 1 << qubit
    a = amps.reshape(amps.shape[0], hi, 2, lo)
    half = 0.5 * np.asarray(theta, dtype=np.float64)
    phase = np.exp(1j * half)
    if phase.ndim:
        phase = phase.reshape(-1, 1, 1)
    a[:, :, 0, :] *= np.conj(phase)
    a[:, :, 1, :] *= phase


def _cnot_inplace(amps: np.ndarray, n: int, control: int, target: int) -> None:
    amps[:, :] = amps[:, _cnot_perm(n, control, target)]


def apply_ry(state: QuantumState, qubit: int, theta: float) -> QuantumState:
    """RY(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]] on one qubit."""
    _check_qubit(state.n_qubits, qubit)
    amps = state.amplitudes[None, :].copy()
    _ry_inplace(amps, state.n_qubits, qubit, float(theta))
    return QuantumState(state.n_qubits, amps[0])


def apply_rz(state: QuantumState, qubit: int, theta: float) -> QuantumState:
    """Phase rotation diag(exp(-i t/2), exp(+i t/2)) on one qubit."""
    _check_qubit(state.n_qubits, qubit)
    amps = state.amplitudes[None, :].copy()
    _rz_inplace(amps, state.n_qubits, qubit, float(theta))
    return QuantumState(state.n_qubits, amps[0])


def apply_cnot(state: QuantumState, control: int, target: int) -> QuantumState:
    """Flip `target` on basis states where `control` is set."""
    _check_qubit(state.n_qubits, control, "control")
    _check_qubit(state.n_qubits, target, "target")
    if control == target:
        raise ValueError("control and target must differ")
    amps = state.amplitudes[None, :].copy()
    _cnot_inplace(amps, state.n_qubits, control, target)
    return QuantumState(state.n_qubits, amps[0])


def _run_circuit(amps: np.ndarray, params: VqcParams, encoding_angles) -> None:
    """Run the fixed ansatz in place over a batch of |0..0> states.

    encoding_angles: callable qubit -> scalar or per-row vector; keeps one
    code path for plain forwards and parameter-shifted batches.
    """
    n = params.n_qubits
    for q in range(n):
        _ry_inplace(amps, n, q, encoding_angles(q))
    for layer in range(params.depth):
        for q in range(n):
            _ry_inplace(amps, n, q, params.angles[layer, q, 0])
        for q in range(n):
            _rz_inplace(amps, n, q, params.angles[layer, q, 1])
        if n > 1:  # a one-qubit ring would be a self-CNOT
            for q in range(n):
                _cnot_inplace(amps, n, q, (q + 1) % n)


def run_vqc_batch(inputs: np.ndarray, params: VqcParams) -> np.ndarray:
    """Per-qubit Z expectations for a batch of input rows, shape [B, n]."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n_qubits:
        raise ValueError(
            f"inputs must have shape [batch, {params.n_qubits}], got {x.shape}"
        )
    batch = x.shape[0]
    amps = np.zeros((batch, 1 << params.n_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    _run_circuit(amps, params, lambda q: ENCODING_SCALE * x[:, q])
    probs = np.abs(amps) ** 2
    return probs @ _z_signs(params.n_qubits).T


def run_vqc(inputs: np.ndarray, params: VqcParams) -> np.ndarray:
    """Per-qubit Z expectations for one input vector of length n_qubits."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.n_qubits:
        raise ValueError(
            f"input must be a vector of length {params.n_qubits}, got shape {x.shape}"
        )
    return run_vqc_batch(x[None, :], params)[0]


def vqc_gradients_batch(
    inputs: np.ndarray,
    params: VqcParams,
    upstream: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Parameter-shift gradients of sum_b upstream[b] . <Z>(inputs[b]).

    Returns (param_grads with the shape of ``params.angles`` summed over the
    batch, input_grads of shape [B, n]). Every shifted circuit for every
    batch row is evaluated in a single vectorized pass: row layout is
    (batch, parameter, +/-) with parameters ordered encoding-first.
    """
    x = np.asarray(inputs, dtype=np.float64)
    up = np.asarray(upstream, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n_qubits:
        raise ValueError(
            f"inputs must have shape [batch, {params.n_qubits}], got {x.shape}"
        )
    if up.shape != x.shape:
        raise ValueError(f"upstream must match inputs shape {x.shape}, got {up.shape}")

    n = params.n_qubits
    depth = params.depth
    batch = x.shape[0]
    n_params = n + depth * n * 2  # encoding angles first, then (layer, qubit, kind)
    rows = batch * n_params * 2

    row_batch = np.repeat(np.arange(batch), n_params * 2)
    row_param = np.tile(np.repeat(np.arange(n_params), 2), batch)
    row_shift = np.tile(np.array([np.pi / 2, -np.pi / 2]), batch * n_params)

    amps = np.zeros((rows, 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0

    def encoding(q):
        base = ENCODING_SCALE * x[row_batch, q]
        return base + np.where(row_param == q, row_shift, 0.0)

    for q in range(n):
        _ry_inplace(amps, n, q, encoding(q))
    for layer in range(depth):
        for kind, op in ((0, _ry_inplace), (1, _rz_inplace)):
            for q in range(n):
                pidx = n + (layer * n + q) * 2 + kind
                theta = params.angles[layer, q, kind] + np.where(
                    row_param == pidx, row_shift, 0.0
                )
                op(amps, n, q, theta)
        if n > 1:
            for q in range(n):
                _cnot_inplace(amps, n, q, (q + 1) % n)

    probs = np.abs(amps) ** 2
    expect = probs @ _z_signs(n).T                      # [rows, n]
    expect = expect.reshape(batch, n_params, 2, n)
    dexp = 0.5 * (expect[:, :, 0, :] - expect[:, :, 1, :])  # [B, P, n]

    # contract each parameter's Z-derivatives with that row's upstream
    grads = np.einsum("bpn,bn->bp", dexp, up)           # [B, P]
    input_grads = ENCODING_SCALE * grads[:, :n]
    param_grads = grads[:, n:].sum(axis=0).reshape(depth, n, 2)
    return param_grads, input_grads


def vqc_gradients(
    inputs: np.ndarray,
    params: VqcParams,
    upstream: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Single-instance convenience wrapper around :func:`vqc_gradients_batch`."""
    x = np.asarray(inputs, dtype=np.float64)
    up = np.asarray(upstream, dtype=np.float64)
    if x.ndim != 1 or up.ndim != 1:
        raise ValueError("inputs and upstream must be vectors")
    param_grads, input_grads = vqc_gradients_batch(x[None, :], params, up[None, :])
    return param_grads, input_grads[0]
