import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import ortho_group

from nmqrt.bath import BathSpectrum, CoupledSystem
from nmqrt.generators import (
    BasisTensors,
    GeneratorBundle,
    adjoint_dissipator,
    basis_coefficients,
    check_orthonormal,
    coefficient_matrix,
    collective_coupling,
    cumulant_M2,
    dissipator,
    hermitian_basis,
    hermitian_split,
    lamb_shift,
    positive_split,
    tl_generator,
)
from nmqrt.harness import tl_generator_correction
from nmqrt.operators import InvariantError, gks_matrix, hamiltonian_superop, herm_propagator
from nmqrt.oracle import q_identity_check
from nmqrt.propagation import duhamel_diff, free_propagate
from nmqrt.scenario import load_fixture

from conftest import SX, SY, SZ, rand_density, rand_herm, rand_matrix

QUBIT = hermitian_basis(2)


def rotated_basis(rng, d):
    O = ortho_group.rvs(d * d, random_state=rng)
    return np.einsum("jk,kab->jab", O, hermitian_basis(d))


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_hermitian_basis_is_orthonormal_and_hermitian(d):
    V = hermitian_basis(d)
    assert len(V) == d * d
    check_orthonormal(V)
    assert np.allclose(V, np.conj(np.swapaxes(V, 1, 2)))


def test_check_orthonormal_rejects():
    with pytest.raises(InvariantError):
        check_orthonormal(np.array([SX, SZ]))


def test_collective_coupling():
    sys1 = CoupledSystem(SZ, SX, 0.3)
    assert np.allclose(collective_coupling(sys1, BathSpectrum([0.5], [[1.0]]), 0), 0.3 * SX)
    assert np.allclose(collective_coupling(sys1, BathSpectrum([0.5], [[0.0]]), 0), 0)
    sys2 = CoupledSystem(SZ, [SX, SY], 0.3)
    T = collective_coupling(sys2, BathSpectrum([0.5], [[1.0, 1j]]), 0)
    assert np.allclose(T, 0.3 * (SX + 1j * SY))
    with pytest.raises(IndexError):
        collective_coupling(sys1, BathSpectrum([0.5], [[1.0]]), 1)


def test_basis_coefficients(rng):
    y = basis_coefficients(QUBIT[1], QUBIT, SZ, 0.7, 0.0)
    assert np.allclose(y, [0, 1, 0, 0])
    # commuting coupling, zero frequency: constant
    assert np.allclose(basis_coefficients(SZ, QUBIT, SZ, 0.0, 1.3), basis_coefficients(SZ, QUBIT, SZ, 0.0, 0.0))
    V = hermitian_basis(3)
    for _ in range(10):
        H, T = rand_herm(rng, 3), rand_matrix(rng, 3)
        om, t = rng.normal(), rng.uniform(-2, 2)
        y = basis_coefficients(T, V, H, om, t)
        U = herm_propagator(H, t)
        assert np.allclose(np.einsum("j,jab->ab", y, V), U.conj().T @ T @ U * np.exp(-1j * om * t))


def test_bundle_y_matches_direct(rng):
    sys = CoupledSystem(rand_herm(rng, 3), [rand_herm(rng, 3), rand_herm(rng, 3)], 0.2)
    sp = BathSpectrum([0.4, -1.1], rng.normal(size=(2, 2)))
    b = GeneratorBundle(sys, sp)
    t = 0.83
    direct = np.array([basis_coefficients(collective_coupling(sys, sp, mu), b.basis, sys.H_S,
                                          sp.omegas[mu], t) for mu in range(2)])
    assert np.allclose(b.y(t), direct)


def _qubit_instance(lam=0.3):
    return CoupledSystem(0.5 * SZ, SX, lam), BathSpectrum([0.3, 1.7], [[0.8], [0.5]])


def test_coefficient_matrix_trivial_cases():
    sys, sp = _qubit_instance()
    assert np.allclose(coefficient_matrix(sys, sp, QUBIT, 0.2, 0.0), 0)
    flat = CoupledSystem(np.zeros((2, 2)), SX, 0.3)
    sp0 = BathSpectrum([0.0], [[1.0]])
    y0 = basis_coefficients(collective_coupling(flat, sp0, 0), QUBIT, flat.H_S, 0.0, 0.0)
    assert np.allclose(coefficient_matrix(flat, sp0, QUBIT, 0.4, 1.5), 1.5 * np.outer(y0, y0.conj()))
    with pytest.raises(ValueError):
        coefficient_matrix(sys, sp, QUBIT, 0.0, -1.0)
    with pytest.raises(ValueError):
        coefficient_matrix(sys, sp, QUBIT, 0.0, 1.0, quad_points=1)


def test_coefficient_matrix_against_refined_trapezoid():
    sys, sp = _qubit_instance()
    s, h = 0.4, 1.3
    v = np.linspace(0.0, h, 2 ** 17 + 1)
    ref = np.zeros((4, 4), dtype=complex)
    for mu in range(sp.num_modes):
        T = collective_coupling(sys, sp, mu)
        y0 = basis_coefficients(T, QUBIT, sys.H_S, sp.omegas[mu], 0.0)
        E, W = np.linalg.eigh(sys.H_S)
        tt = -(v + s)
        U = np.einsum("ab,nb,cb->nac", W, np.exp(-1j * np.outer(tt, E)), W.conj())
        Tt = np.conj(np.swapaxes(U, 1, 2)) @ T @ U
        ys = np.einsum("jab,nab->nj", QUBIT.conj(), Tt) * np.exp(-1j * sp.omegas[mu] * tt)[:, None]
        ref += np.outer(y0, trapezoid(ys.conj(), v, axis=0))
    got = coefficient_matrix(sys, sp, QUBIT, s, h)
    assert np.abs(got - ref).max() <= 1e-8
    # the bundle's fast path and its closed form agree with the direct quadrature
    assert np.allclose(GeneratorBundle(sys, sp).D(s, h), got, atol=1e-13)
    assert np.allclose(GeneratorBundle(sys, sp, quadrature="exact").D(s, h), got, atol=1e-13)


def test_coefficient_matrix_converges_with_nodes():
    sys, sp = _qubit_instance()
    exact = GeneratorBundle(sys, sp, quadrature="exact").D(0.0, 6.0)
    errs = [np.abs(coefficient_matrix(sys, sp, QUBIT, 0.0, 6.0, quad_points=n) - exact).max()
            for n in (4, 6, 8, 12)]
    assert errs[0] > errs[1] > errs[2] > errs[3]


def test_hermitian_split(rng):
    H = rand_herm(rng, 3)
    A, B = hermitian_split(H)
    assert np.allclose(B, 0) and np.allclose(A, H)
    A, B = hermitian_split(1j * H)
    assert np.allclose(A, 0)
    D = rand_matrix(rng, 4)
    A, B = hermitian_split(D)
    assert np.abs(A + 1j * B - D).max() <= 1e-14
    assert np.allclose(A, A.conj().T, atol=1e-12) and np.allclose(B, B.conj().T, atol=1e-12)


def test_dissipator_zero_and_duality(rng):
    V = hermitian_basis(3)
    assert np.allclose(dissipator(np.zeros((9, 9)), V).matrix, 0)
    A = rand_herm(rng, 9)
    L, Ld = dissipator(A, V), adjoint_dissipator(A, V)
    for _ in range(100):
        X, Y = rand_matrix(rng, 3), rand_matrix(rng, 3)
        assert abs(np.trace(Y.conj().T @ L(X)) - np.trace(Ld(Y).conj().T @ X)) <= 1e-10
    assert np.allclose(Ld.matrix, L.matrix.conj().T)


def test_dissipator_diagonal_is_standard_lindblad(rng):
    V = QUBIT
    gam = np.array([0.0, 0.4, 1.1, 0.25])
    L = dissipator(np.diag(gam), V)
    rho = rand_density(rng, 2)
    direct = sum(g * (v @ rho @ v.conj().T - 0.5 * (v.conj().T @ v @ rho + rho @ v.conj().T @ v))
                 for g, v in zip(gam, V))
    assert np.allclose(L(rho), direct)
    with pytest.raises(InvariantError):
        dissipator(np.triu(np.ones((4, 4))), V)


def test_lamb_shift(rng):
    V = hermitian_basis(3)
    assert np.allclose(lamb_shift(np.eye(9), V), np.einsum("jab,jcb->ac", V, V.conj()))
    assert np.allclose(lamb_shift(np.zeros((9, 9)), V), 0)
    H = lamb_shift(rand_herm(rng, 9), V)
    assert np.allclose(H, H.conj().T, atol=1e-12)


def test_positive_split(rng):
    c = rand_herm(rng, 5)
    Cp, Cm = positive_split(c)
    assert np.abs(Cp - Cm - c).max() <= 1e-10
    assert np.linalg.eigvalsh(Cp)[0] >= -1e-10 and np.linalg.eigvalsh(Cm)[0] >= -1e-10
    Cp, Cm = positive_split(np.zeros((3, 3)))
    assert np.allclose(Cp, 0) and np.allclose(Cm, 0)


def test_basis_tensors_match_direct_builders(rng):
    V = hermitian_basis(3)
    T = BasisTensors(V)
    A = rand_herm(rng, 9)
    assert np.allclose(T.dissipator(A), gks_matrix(A, V))
    assert np.allclose(T.adjoint(A), adjoint_dissipator(A, V).matrix)
    assert np.allclose(T.lamb_commutator(A), hamiltonian_superop(lamb_shift(A, V)).matrix)
    assert np.allclose(T.lamb_operator(A), lamb_shift(A, V))


def test_coefficient_objects_are_quadratic_in_lambda():
    sc = load_fixture("c")
    b1 = GeneratorBundle(sc.system, sc.spectrum)
    b2 = b1.scaled(2.0)
    for t in (0.3, 1.2):
        c1, c2 = b1.coefficients(t), b2.coefficients(t)
        for name in ("D", "A", "B", "C_tl", "C_plus", "C_minus", "lamb_shift"):
            x1, x2 = getattr(c1, name), getattr(c2, name)
            assert np.allclose(x2, 4 * x1, rtol=1e-12, atol=1e-15), name
        assert np.allclose(b2.D(0.4, t), 4 * b1.D(0.4, t), rtol=1e-12, atol=1e-15)


def test_dissipative_maps_annihilate_trace(rng):
    sc = load_fixture("c")
    b = GeneratorBundle(sc.system, sc.spectrum)
    maps = [b.L_A(0.3, 1.0), b.L_B(0.3, 1.0), b.L_H(0.3, 1.0), b.K(0.8)]
    for L in maps:
        for _ in range(5):
            assert abs(np.trace(L(rand_matrix(rng, 4)))) <= 1e-10


def test_maps_are_basis_independent(rng):
    sc = load_fixture("c")
    b1 = GeneratorBundle(sc.system, sc.spectrum)
    b2 = GeneratorBundle(sc.system, sc.spectrum, basis=rotated_basis(rng, 4))
    for s, h in ((0.0, 1.0), (0.6, 0.4)):
        assert np.abs(b1.L_A(s, h).matrix - b2.L_A(s, h).matrix).max() <= 1e-8
        assert np.abs(b1.L_B(s, h).matrix - b2.L_B(s, h).matrix).max() <= 1e-8
        assert np.abs(b1.lamb(s, h) - b2.lamb(s, h)).max() <= 1e-8
        assert np.abs(b1.L_A_adj(s, h).matrix - b2.L_A_adj(s, h).matrix).max() <= 1e-8


def test_q_identity_holds_for_produced_coefficients(rng):
    sc = load_fixture("a")
    b = GeneratorBundle(sc.system, sc.spectrum)
    D = b.D(0.3, 0.9)
    rho, O = rand_density(rng, 2), rand_herm(rng, 2)
    res = q_identity_check(D, b.basis, rho, O)
    assert res <= 1e-10 * np.linalg.norm(D) * np.linalg.norm(rho) * np.linalg.norm(O)


def test_tl_generator_trivial():
    sys, sp = _qubit_instance(lam=0.0)
    c, dH = tl_generator(sys, sp, QUBIT, 1.0)
    assert np.allclose(c, 0) and np.allclose(dH, 0)
    with pytest.raises(ValueError):
        tl_generator(sys, sp, QUBIT, -1.0)


def test_cumulant_trivial():
    sys, sp = _qubit_instance()
    rho = np.diag([0.7, 0.3]).astype(complex)
    assert np.allclose(cumulant_M2(sys, sp, rho, 0.0), 0)
    assert np.allclose(cumulant_M2(sys.with_lambda(0.0), sp, rho, 1.0), 0)
    with pytest.raises(ValueError):
        cumulant_M2(sys, sp, rho, -0.5)


def test_cumulant_pure_dephasing_closed_form():
    # S = sigma_z commutes with H_S, so only the coherence decays:
    # M2_01 = -4 lam^2 rho_01 sum_mu |g_mu|^2 (1 - cos(w_mu t)) / w_mu^2
    lam, t = 0.2, 1.7
    sys = CoupledSystem(0.5 * SZ, SZ, lam)
    w = np.array([0.3, 1.1, 2.5])
    g = np.array([[0.8], [0.4 + 0.2j], [0.3]])
    sp = BathSpectrum(w, g)
    rho = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    M2 = cumulant_M2(sys, sp, rho, t)
    phi = np.sum(np.abs(g[:, 0]) ** 2 * (1 - np.cos(w * t)) / w ** 2)
    expected = np.array([[0, -4 * lam ** 2 * rho[0, 1] * phi], [-4 * lam ** 2 * rho[1, 0] * phi, 0]])
    assert np.abs(M2 - expected).max() <= 1e-8


def test_cumulant_traceless(rng):
    sc = load_fixture("c")
    M2 = cumulant_M2(sc.system, sc.spectrum, rand_density(rng, 4), 1.2)
    assert abs(np.trace(M2)) <= 1e-12


def test_dyson_expansion_of_time_local_generator_reproduces_cumulant():
    sc = load_fixture("a")
    lam, t = 1e-3, 1.0
    H, rho0 = sc.system.H_S, sc.rho0

    def diff(l):
        b = GeneratorBundle(sc.system.with_lambda(l), sc.spectrum)
        return duhamel_diff(tl_generator_correction(b, t), t, rho0, sc.propagation, H)

    M2 = cumulant_M2(sc.system.with_lambda(lam), sc.spectrum, free_propagate(H, rho0, t), t)
    raw = diff(lam)
    assert np.linalg.norm(raw - M2) <= 1e-6 * np.linalg.norm(M2)
    # removing the lam^4 part leaves only quadrature and step error
    second = (16 * raw - diff(2 * lam)) / 12
    assert np.linalg.norm(second - M2) <= 1e-8 * np.linalg.norm(M2)


def test_cptp_pieces_recombine():
    sc = load_fixture("b")
    b = GeneratorBundle(sc.system, sc.spectrum)
    plus, minus = b.cptp_pieces(0.7)
    assert np.allclose((plus - minus).matrix, b.L_C(0.7).matrix, atol=1e-13)
