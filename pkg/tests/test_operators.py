import numpy as np
import pytest

from nmqrt.operators import (
    DimensionError,
    InvariantError,
    SuperOperator,
    anticommutator,
    check_density,
    check_hermitian,
    commutator,
    gks_superop,
    hamiltonian_superop,
    herm_propagator,
    matrix_from_json,
    matrix_to_json,
    partial_trace_bath,
    superop_apply,
    tensor,
    unvec,
    vec,
)

from conftest import I2, SX, SY, SZ, rand_density, rand_herm, rand_matrix


def test_commutator_examples(rng):
    assert np.allclose(commutator(I2, SX), 0)
    assert np.allclose(commutator(SX, SZ), -2j * SY)
    A = rand_matrix(rng, 3)
    assert np.allclose(commutator(A, A), 0)


def test_anticommutator_examples(rng):
    assert np.allclose(anticommutator(SX, SX), 2 * I2)
    A = rand_matrix(rng, 2)
    assert np.allclose(anticommutator(I2, A), 2 * A)
    assert np.allclose(anticommutator(SX, SY), 0)


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionError):
        commutator(np.eye(2), np.eye(3))
    with pytest.raises(DimensionError):
        anticommutator(np.eye(2), np.ones((2, 3)))


def test_tensor(rng):
    assert np.allclose(tensor(I2, I2), np.eye(4))
    A, B, C, D = (rand_matrix(rng, 2) for _ in range(4))
    assert np.isclose(np.trace(tensor(A, B)), np.trace(A) * np.trace(B))
    assert np.allclose(tensor(A, B) @ tensor(C, D), tensor(A @ C, B @ D))


def test_partial_trace(rng):
    A, B = rand_matrix(rng, 2), rand_matrix(rng, 3)
    assert np.allclose(partial_trace_bath(np.kron(A, B), 2, 3), np.trace(B) * A)
    rs, rb = rand_density(rng, 2), rand_density(rng, 3)
    assert np.allclose(partial_trace_bath(np.kron(rs, rb), 2, 3), rs)
    M = rand_matrix(rng, 6)
    assert np.isclose(np.trace(partial_trace_bath(M, 2, 3)), np.trace(M))
    N = rand_matrix(rng, 6)
    assert np.allclose(partial_trace_bath(2 * M - 1j * N, 2, 3),
                       2 * partial_trace_bath(M, 2, 3) - 1j * partial_trace_bath(N, 2, 3))
    with pytest.raises(DimensionError):
        partial_trace_bath(M, 4, 2)


def test_herm_propagator(rng):
    assert np.allclose(herm_propagator(SZ, 0.0), I2)
    assert np.allclose(herm_propagator(SZ, np.pi), np.diag([np.exp(-1j * np.pi), np.exp(1j * np.pi)]))
    for _ in range(20):
        H = rand_herm(rng, 3)
        s, t = rng.uniform(0, 1, size=2)
        U = herm_propagator(H, t)
        assert np.allclose(U @ U.conj().T, np.eye(3), atol=1e-10)
        assert np.allclose(herm_propagator(H, s) @ U, herm_propagator(H, s + t), atol=1e-9)


def test_herm_propagator_rejects_non_hermitian():
    with pytest.raises(InvariantError):
        herm_propagator(np.array([[0, 1], [0, 0]]), 1.0)


def test_vectorization_convention(rng):
    # vec(A X B) = (B^T kron A) vec(X), column stacking
    A, X, B = (rand_matrix(rng, 3) for _ in range(3))
    assert np.allclose(vec(A @ X @ B), np.kron(B.T, A) @ vec(X))
    assert np.allclose(unvec(vec(X), 3), X)


def test_superop_apply_matches_direct(rng):
    assert np.allclose(superop_apply(SuperOperator.identity(3), X := rand_matrix(rng, 3)), X)
    assert np.allclose(hamiltonian_superop(np.zeros((2, 2)))(rand_density(rng, 2)), 0)
    for _ in range(100):
        H, X = rand_herm(rng, 3), rand_matrix(rng, 3)
        direct = -1j * (H @ X - X @ H)
        got = hamiltonian_superop(H)(X)
        assert np.linalg.norm(got - direct) <= 1e-10 * max(1.0, np.linalg.norm(direct))


def test_superop_linearity(rng):
    L = SuperOperator(rand_matrix(rng, 4))
    X, Y = rand_matrix(rng, 2), rand_matrix(rng, 2)
    a, b = 0.3 - 1.2j, 2.1
    assert np.allclose(L(a * X + b * Y), a * L(X) + b * L(Y), atol=1e-10)


def test_gks_zero_coefficients_is_commutator(rng):
    H = rand_herm(rng, 2)
    basis = np.array([SX / np.sqrt(2), SZ / np.sqrt(2)])
    L = gks_superop(H, np.zeros((2, 2)), basis)
    assert np.allclose(L.matrix, hamiltonian_superop(H).matrix)


def test_gks_amplitude_damping():
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    L = gks_superop(np.zeros((2, 2)), np.array([[1.0]]), np.array([sm]))
    ground = np.diag([1.0, 0.0]).astype(complex)
    assert np.allclose(L(ground), 0)
    # closed-form damping generator with rate 2
    rho = np.array([[0.3, 0.2], [0.2, 0.7]], dtype=complex)
    expected = 2 * (sm @ rho @ sm.T) - (sm.T @ sm @ rho + rho @ sm.T @ sm)
    assert np.allclose(L(rho), expected)


def test_gks_trace_annihilating(rng):
    basis = np.array([SX, SY, SZ]) / np.sqrt(2)
    for _ in range(20):
        C = rand_herm(rng, 3)
        L = gks_superop(rand_herm(rng, 2), C, basis)
        assert abs(np.trace(L(rand_matrix(rng, 2)))) <= 1e-10


def test_gks_rejects_non_hermitian_coefficients():
    basis = np.array([SX, SZ]) / np.sqrt(2)
    with pytest.raises(InvariantError):
        gks_superop(np.zeros((2, 2)), np.array([[1, 1], [0, 1]]), basis)


def test_density_checks_name_the_invariant():
    with pytest.raises(InvariantError, match="unit-trace"):
        check_density(np.diag([0.5, 0.4]))
    with pytest.raises(InvariantError):
        check_density(np.diag([1.2, -0.2]))
    with pytest.raises(InvariantError):
        check_hermitian(np.array([[0, 1], [0, 0]]))


def test_json_round_trip(rng):
    M = rand_matrix(rng, 3)
    obj = matrix_to_json(M)
    assert obj["dim"] == 3 and len(obj["re"]) == 9
    assert np.array_equal(matrix_from_json(obj), M)
    with pytest.raises(DimensionError):
        matrix_from_json({"dim": 2, "re": [1, 0, 0], "im": [0, 0, 0, 0]})
