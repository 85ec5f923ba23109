import numpy as np
import pytest
from scipy.linalg import expm

from nmqrt.generators import GeneratorBundle
from nmqrt.harness import driven_qubit_generator, rk4_order, tl_generator_correction
from nmqrt.operators import SuperOperator, gks_superop, hamiltonian_superop, unvec, vec
from nmqrt.propagation import (
    PropagationConfig,
    PropagationError,
    TimeDependentGenerator,
    adjoint_propagate,
    duhamel_diff,
    duhamel_map,
    free_propagate,
    num_steps,
    propagator_matrix,
    time_ordered_propagate,
)
from nmqrt.scenario import load_fixture

from conftest import SX, SZ, rand_density, rand_herm, rand_matrix


def test_free_propagate(rng):
    H, X = rand_herm(rng, 3), rand_matrix(rng, 3)
    assert np.allclose(free_propagate(H, X, 0.0), X)
    assert np.allclose(free_propagate(SZ, np.diag([0.3, 0.7]), 2.3), np.diag([0.3, 0.7]))
    s, t = 0.4, 1.1
    assert np.allclose(free_propagate(H, free_propagate(H, X, s), t), free_propagate(H, X, s + t))


def test_zero_generator_is_identity(rng):
    X = rand_matrix(rng, 2)
    gen = TimeDependentGenerator.constant(np.zeros((4, 4)))
    assert np.allclose(time_ordered_propagate(gen, X, 1.5), X)


def test_constant_generator_matches_exponential(rng):
    H = rand_herm(rng, 3)
    L0 = hamiltonian_superop(H)
    rho = rand_density(rng, 3)
    cfg = PropagationConfig()
    got = time_ordered_propagate(TimeDependentGenerator.constant(L0), rho, 1.3, cfg)
    assert np.linalg.norm(got - free_propagate(H, rho, 1.3)) <= cfg.rtol
    basis = np.array([np.array([[0, 1], [0, 0]], dtype=complex)])
    L = gks_superop(0.5 * SZ, np.array([[0.3]]), basis)
    r = rand_density(rng, 2)
    got = time_ordered_propagate(TimeDependentGenerator.constant(L), r, 2.0, cfg)
    assert np.linalg.norm(got - unvec(expm(2.0 * L.matrix) @ vec(r), 2)) <= cfg.rtol


def test_magnus_scheme_converges(rng):
    gen = driven_qubit_generator()
    rho = rand_density(rng, 2)
    ref = time_ordered_propagate(gen, rho, 1.0, steps=2000)
    cfg = PropagationConfig(scheme="magnus2", steps_per_unit_time=200)
    assert np.linalg.norm(time_ordered_propagate(gen, rho, 1.0, cfg) - ref) <= 1e-4


def test_rk4_halving_reduces_error_sixteenfold():
    gen = driven_qubit_generator()
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    n = 16
    ref = time_ordered_propagate(gen, rho, 2.0, steps=10 * 4 * n)
    e1 = np.linalg.norm(time_ordered_propagate(gen, rho, 2.0, steps=n) - ref)
    e2 = np.linalg.norm(time_ordered_propagate(gen, rho, 2.0, steps=2 * n) - ref)
    assert 12 <= e1 / e2 <= 20


def test_rk4_fitted_order():
    assert 3.6 <= rk4_order()["order"] <= 4.4


def test_richardson_error_estimate(rng):
    gen = driven_qubit_generator()
    rho = rand_density(rng, 2)
    X, err = time_ordered_propagate(gen, rho, 1.0, steps=20, return_error=True)
    true = np.linalg.norm(X - time_ordered_propagate(gen, rho, 1.0, steps=2000))
    assert 0.3 * true <= err <= 3 * true


def test_step_underflow_reported():
    with pytest.raises(PropagationError, match="underflow"):
        num_steps(PropagationConfig(), 1e9, 10.0)
    with pytest.raises(ValueError):
        time_ordered_propagate(driven_qubit_generator(), np.eye(2), -1.0)
    with pytest.raises(ValueError):
        PropagationConfig(steps_per_unit_time=3)


def test_linearity(rng):
    gen = driven_qubit_generator()
    X, Y = rand_matrix(rng, 2), rand_matrix(rng, 2)
    a, b = 0.7 + 0.2j, -1.3
    lhs = time_ordered_propagate(gen, a * X + b * Y, 1.2)
    rhs = a * time_ordered_propagate(gen, X, 1.2) + b * time_ordered_propagate(gen, Y, 1.2)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_propagator_matrix_matches_vector_runs(rng):
    gen = driven_qubit_generator()
    P = propagator_matrix(gen, 0.9, t0=0.3)
    X = rand_matrix(rng, 2)
    assert np.allclose(unvec(P @ vec(X), 2), time_ordered_propagate(gen, X, 0.9, t0=0.3))


def _tl_correction(lam):
    sc = load_fixture("a")
    b = GeneratorBundle(sc.system.with_lambda(lam), sc.spectrum)
    return sc, tl_generator_correction(b, 1.5)


def test_duhamel_diff_trivial_cases(rng):
    sc, gen = _tl_correction(0.0)
    assert np.allclose(duhamel_diff(gen, 1.5, sc.rho0, H_S=sc.system.H_S), 0, atol=1e-8)
    sc, gen = _tl_correction(0.1)
    assert np.allclose(duhamel_diff(gen, 1.5, np.zeros((2, 2)), H_S=sc.system.H_S), 0)


def test_duhamel_diff_matches_direct_difference(rng):
    sc, gen = _tl_correction(0.2)
    H = sc.system.H_S
    L0 = hamiltonian_superop(H)
    full = TimeDependentGenerator(lambda s: L0.matrix + gen(s), gen.norm_bound + 2.0, 2)
    direct = time_ordered_propagate(full, sc.rho0, 1.5, steps=3000) - free_propagate(H, sc.rho0, 1.5)
    got = duhamel_diff(gen, 1.5, sc.rho0, H_S=H)
    assert np.linalg.norm(got - direct) <= 1e-9
    M = duhamel_map(gen, 1.5, H_S=H)
    assert np.allclose(unvec(M @ vec(sc.rho0), 2), got, atol=1e-10)


@pytest.mark.parametrize("lam", [0.025, 0.05])
def test_duhamel_diff_is_quadratic(lam):
    sc, g1 = _tl_correction(lam)
    _, g2 = _tl_correction(2 * lam)
    H = sc.system.H_S
    r = np.linalg.norm(duhamel_diff(g2, 1.5, sc.rho0, H_S=H)) / np.linalg.norm(duhamel_diff(g1, 1.5, sc.rho0, H_S=H))
    assert abs(r / 4 - 1) <= 0.1


def test_adjoint_hamiltonian_is_heisenberg(rng):
    H = rand_herm(rng, 3)
    O = rand_herm(rng, 3)
    gen = TimeDependentGenerator.constant(hamiltonian_superop(H))
    U = expm(-1j * 0.8 * H)
    assert np.allclose(adjoint_propagate(gen, 0.8, O), U.conj().T @ O @ U, atol=1e-9)
    assert np.allclose(adjoint_propagate(gen, 0.0, O), O)


def test_adjoint_duality(rng):
    gen = driven_qubit_generator()
    for _ in range(10):
        O, X = rand_matrix(rng, 2), rand_matrix(rng, 2)
        fwd = time_ordered_propagate(gen, X, 1.4, steps=400)
        back = adjoint_propagate(gen, 1.4, O, steps=400)
        assert abs(np.trace(O.conj().T @ fwd) - np.trace(back.conj().T @ X)) <= 1e-8


def test_adjoint_with_closed_form_adjoint(rng):
    sc = load_fixture("a")
    b = GeneratorBundle(sc.system, sc.spectrum)
    gen = TimeDependentGenerator(lambda s: b.L_A(s, 1.0), 5.0, 2)
    adj = lambda s: b.L_A_adj(s, 1.0)
    O = rand_herm(rng, 2)
    assert np.allclose(adjoint_propagate(gen, 1.0, O, adjoint=adj), adjoint_propagate(gen, 1.0, O))
