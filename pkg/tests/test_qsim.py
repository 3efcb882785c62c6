"""Statevector simulator tests, checked against dense-matrix and
finite-difference oracles that share no code with the implementation."""

import numpy as np
import pytest

from quantrl.errors import ConfigError
from quantrl.qsim import (
    QuantumState,
    VqcParams,
    apply_cnot,
    apply_ry,
    apply_rz,
    init_zero_state,
    run_vqc,
    run_vqc_batch,
    vqc_gradients,
    vqc_gradients_batch,
)


# ---------------------------------------------------------------------------
# dense-matrix oracle: builds the full 2^n x 2^n unitary gate by gate
# ---------------------------------------------------------------------------

def _ry_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz_matrix(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _embed_single(gate, qubit, n):
    """kron(I_high, gate, I_low) for little-endian qubit order."""
    return np.kron(
        np.eye(1 << (n - 1 - qubit)), np.kron(gate, np.eye(1 << qubit))
    )


def _cnot_matrix(control, target, n):
    dim = 1 << n
    mat = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        j = i ^ (1 << target) if (i >> control) & 1 else i
        mat[j, i] = 1.0
    return mat


def dense_oracle_expectations(x, params):
    """Simulate the full circuit with explicit matrix products."""
    n = params.n_qubits
    unitary = np.eye(1 << n, dtype=complex)
    for q in range(n):
        unitary = _embed_single(_ry_matrix(np.pi * x[q]), q, n) @ unitary
    for layer in range(params.depth):
        for q in range(n):
            unitary = _embed_single(_ry_matrix(params.angles[layer, q, 0]), q, n) @ unitary
        for q in range(n):
            unitary = _embed_single(_rz_matrix(params.angles[layer, q, 1]), q, n) @ unitary
        if n > 1:
            for q in range(n):
                unitary = _cnot_matrix(q, (q + 1) % n, n) @ unitary
    psi = unitary[:, 0]
    probs = np.abs(psi) ** 2
    out = np.empty(n)
    for q in range(n):
        signs = np.array([1.0 if (i >> q) & 1 == 0 else -1.0 for i in range(1 << n)])
        out[q] = probs @ signs
    return out


def random_instance(rng, n=4, depth=2):
    x = rng.uniform(-1, 1, n)
    params = VqcParams(n, depth, rng.uniform(-np.pi, np.pi, (depth, n, 2)))
    return x, params


# ---------------------------------------------------------------------------
# init / gates
# ---------------------------------------------------------------------------

def test_init_zero_state_one_qubit():
    assert np.array_equal(init_zero_state(1).amplitudes, [1, 0])


def test_init_zero_state_two_qubits():
    assert np.array_equal(init_zero_state(2).amplitudes, [1, 0, 0, 0])


@pytest.mark.parametrize("bad", [0, 17, -3])
def test_init_zero_state_out_of_range(bad):
    with pytest.raises(ConfigError):
        init_zero_state(bad)


def test_ry_pi_is_pauli_flip():
    state = apply_ry(init_zero_state(1), 0, np.pi)
    assert state.z_expectations()[0] == pytest.approx(-1.0, abs=1e-12)
    assert abs(state.amplitudes[1]) == pytest.approx(1.0, abs=1e-12)


def test_ry_zero_is_identity():
    state = apply_ry(init_zero_state(1), 0, 0.0)
    assert np.array_equal(state.amplitudes, [1, 0])


def test_ry_half_pi_gives_zero_expectation():
    state = apply_ry(init_zero_state(1), 0, np.pi / 2)
    assert state.z_expectations()[0] == pytest.approx(0.0, abs=1e-12)


def test_rz_on_basis_state_is_global_phase():
    state = apply_rz(init_zero_state(1), 0, np.pi)
    assert state.z_expectations()[0] == pytest.approx(1.0, abs=1e-12)
    assert abs(state.amplitudes[0]) == pytest.approx(1.0, abs=1e-12)


def test_rz_pi_flips_x_expectation():
    plus = QuantumState(1, np.array([1, 1]) / np.sqrt(2))

    def x_expect(s):
        return float(2 * np.real(np.conj(s.amplitudes[0]) * s.amplitudes[1]))

    assert x_expect(plus) == pytest.approx(1.0)
    rotated = apply_rz(plus, 0, np.pi)
    assert x_expect(rotated) == pytest.approx(-1.0, abs=1e-12)


def test_rz_zero_is_identity():
    rng = np.random.default_rng(7)
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    amps /= np.linalg.norm(amps)
    state = QuantumState(2, amps)
    assert np.allclose(apply_rz(state, 1, 0.0).amplitudes, amps, atol=1e-15)


def test_cnot_truth_table():
    # |10> means qubit 1 set, qubit 0 clear -> basis index 2
    ten = QuantumState(2, np.array([0, 0, 1, 0], dtype=complex))
    out = apply_cnot(ten, 1, 0)
    assert np.array_equal(out.amplitudes, [0, 0, 0, 1])  # |11>


def test_cnot_identity_on_zero():
    out = apply_cnot(init_zero_state(2), 0, 1)
    assert np.array_equal(out.amplitudes, [1, 0, 0, 0])


def test_cnot_is_involution():
    rng = np.random.default_rng(3)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    amps /= np.linalg.norm(amps)
    state = QuantumState(3, amps)
    twice = apply_cnot(apply_cnot(state, 2, 0), 2, 0)
    assert np.allclose(twice.amplitudes, amps, atol=1e-15)


def test_gate_index_validation():
    state = init_zero_state(2)
    with pytest.raises(ValueError):
        apply_ry(state, 2, 0.1)
    with pytest.raises(ValueError):
        apply_rz(state, -1, 0.1)
    with pytest.raises(ValueError):
        apply_cnot(state, 1, 1)
    with pytest.raises(ValueError):
        apply_cnot(state, 0, 5)


def test_norm_preserved_under_random_gate_sequence():
    rng = np.random.default_rng(42)
    state = init_zero_state(4)
    for _ in range(1000):
        kind = rng.integers(3)
        q = int(rng.integers(4))
        if kind == 0:
            state = apply_ry(state, q, rng.uniform(-np.pi, np.pi))
        elif kind == 1:
            state = apply_rz(state, q, rng.uniform(-np.pi, np.pi))
        else:
            t = (q + 1 + int(rng.integers(3))) % 4
            state = apply_cnot(state, q, t)
    assert abs(state.norm_squared() - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# run_vqc
# ---------------------------------------------------------------------------

def test_vqc_encoding_only_zero_input():
    out = run_vqc(np.zeros(1), VqcParams(1, 0))
    assert out[0] == pytest.approx(1.0, abs=1e-14)


def test_vqc_zero_params_analytic_expectation():
    # encoding RY(pi * x) on |0> gives <Z> = cos(pi x)
    out = run_vqc(np.array([0.5]), VqcParams(1, 1))
    assert out[0] == pytest.approx(np.cos(0.5 * np.pi), abs=1e-12)
    out = run_vqc(np.array([0.3]), VqcParams(1, 2))
    assert out[0] == pytest.approx(np.cos(0.3 * np.pi), abs=1e-12)


def test_vqc_input_length_validation():
    with pytest.raises(ValueError):
        run_vqc(np.zeros(3), VqcParams(4, 2))
    with pytest.raises(ValueError):
        run_vqc_batch(np.zeros((2, 3)), VqcParams(4, 2))


def test_vqc_matches_dense_unitary_oracle():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3, 4):
        for _ in range(5):
            x, params = random_instance(rng, n=n, depth=2)
            got = run_vqc(x, params)
            want = dense_oracle_expectations(x, params)
            assert np.max(np.abs(got - want)) < 1e-10


def test_vqc_batch_agrees_with_single():
    rng = np.random.default_rng(5)
    params = VqcParams(3, 2, rng.uniform(-1, 1, (2, 3, 2)))
    xs = rng.uniform(-1, 1, (6, 3))
    batch = run_vqc_batch(xs, params)
    for i, x in enumerate(xs):
        assert np.allclose(batch[i], run_vqc(x, params), atol=1e-14)


def test_vqc_expectations_bounded():
    rng = np.random.default_rng(23)
    for _ in range(20):
        x, params = random_instance(rng)
        out = run_vqc(x, params)
        assert np.all(out <= 1.0 + 1e-12) and np.all(out >= -1.0 - 1e-12)


def test_vqc_deterministic_bit_identical():
    rng = np.random.default_rng(9)
    x, params = random_instance(rng)
    assert np.array_equal(run_vqc(x, params), run_vqc(x, params))


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def test_single_ry_gradient_is_minus_sine():
    for theta in (np.pi / 2, 0.3, -1.1):
        params = VqcParams(1, 1, np.array([[[theta, 0.0]]]))
        param_grads, _ = vqc_gradients(np.zeros(1), params, np.ones(1))
        assert param_grads[0, 0, 0] == pytest.approx(-np.sin(theta), abs=1e-12)


def test_encoding_gradient_has_pi_chain_factor():
    # <Z> = cos(pi x) so d/dx = -pi sin(pi x)
    x = 0.3
    _, input_grads = vqc_gradients(np.array([x]), VqcParams(1, 1), np.ones(1))
    assert input_grads[0] == pytest.approx(-np.pi * np.sin(np.pi * x), abs=1e-12)


def test_zero_upstream_zero_gradients():
    rng = np.random.default_rng(1)
    x, params = random_instance(rng)
    param_grads, input_grads = vqc_gradients(x, params, np.zeros(4))
    assert np.all(param_grads == 0.0)
    assert np.all(input_grads == 0.0)


def fd_gradients(x, params, upstream, h=1e-5):
    """Central finite differences through the public run_vqc only."""

    def scalar(xv, angles):
        return float(upstream @ run_vqc(xv, VqcParams(params.n_qubits, params.depth, angles)))

    param_grads = np.zeros_like(params.angles)
    for idx in np.ndindex(params.angles.shape):
        up = params.angles.copy()
        dn = params.angles.copy()
        up[idx] += h
        dn[idx] -= h
        param_grads[idx] = (scalar(x, up) - scalar(x, dn)) / (2 * h)
    input_grads = np.zeros_like(x)
    for i in range(len(x)):
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        input_grads[i] = (scalar(up, params.angles) - scalar(dn, params.angles)) / (2 * h)
    return param_grads, input_grads


def test_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(77)
    for _ in range(10):
        x, params = random_instance(rng)
        upstream = rng.uniform(-1, 1, 4)
        pg, ig = vqc_gradients(x, params, upstream)
        fpg, fig = fd_gradients(x, params, upstream)
        assert np.max(np.abs(pg - fpg)) < 1e-6
        assert np.max(np.abs(ig - fig)) < 1e-6


def test_batch_gradients_sum_over_rows():
    rng = np.random.default_rng(13)
    params = VqcParams(3, 2, rng.uniform(-1, 1, (2, 3, 2)))
    xs = rng.uniform(-1, 1, (5, 3))
    ups = rng.uniform(-1, 1, (5, 3))
    pg_batch, ig_batch = vqc_gradients_batch(xs, params, ups)
    pg_sum = np.zeros_like(params.angles)
    for i in range(5):
        pg, ig = vqc_gradients(xs[i], params, ups[i])
        pg_sum += pg
        assert np.allclose(ig_batch[i], ig, atol=1e-12)
    assert np.allclose(pg_batch, pg_sum, atol=1e-12)


def test_gradient_shape_validation():
    params = VqcParams(2, 1)
    with pytest.raises(ValueError):
        vqc_gradients(np.zeros(3), params, np.zeros(2))
    with pytest.raises(ValueError):
        vqc_gradients(np.zeros(2), params, np.zeros(3))
