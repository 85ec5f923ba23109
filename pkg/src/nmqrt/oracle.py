"""Brute-force reference values on the full system-plus-bath space.

Everything here is dense and exact up to eigensolver accuracy, except
:func:`perturbative_rho`, which evaluates the low-order terms of the
Duhamel expansion by Gauss-Legendre quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import total_hamiltonian
from .generators import NODES_PER_UNIT_TIME, gauss_nodes, gks_matrix, lamb_shift
from .operators import (
    DimensionError,
    InvariantError,
    anticommutator,
    check_density,
    commutator,
    dag,
    partial_trace_bath,
    unvec,
    vec,
)

MAX_DIM = 64


def _check_size(d):
    if d > MAX_DIM:
        raise DimensionError(f"the exact oracle is limited to total dimension {MAX_DIM}, got {d}")


@dataclass(frozen=True, eq=False)
class TotalState:
    rho_tot: np.ndarray
    d_S: int
    d_B: int

    def reduced(self):
        return partial_trace_bath(self.rho_tot, self.d_S, self.d_B)


class _Eigen:
    """Cached eigendecomposition of a Hermitian total Hamiltonian."""

    def __init__(self, H):
        _check_size(H.shape[0])
        self.E, self.W = np.linalg.eigh(0.5 * (H + dag(H)))

    def U(self, t):
        return (self.W * np.exp(-1j * self.E * t)) @ dag(self.W)

    def heisenberg(self, A, t):
        U = self.U(t)
        return dag(U) @ A @ U


def evolve_total(H_tot, rho_tot, t, d_S=None, d_B=None):
    """``U rho U^dag`` with ``U = exp(-i t H_tot)``."""
    ev = _Eigen(np.asarray(H_tot, dtype=complex))
    U = ev.U(t)
    rho = U @ rho_tot @ dag(U)
    n = rho.shape[0]
    return TotalState(rho, d_S or n, d_B or 1)


def _setup(sys, bath, rho0, O1, O2):
    d_S, d_B = sys.dim, bath.dim
    _check_size(d_S * d_B)
    rho0 = check_density(rho0, "rho0")
    ev = _Eigen(total_hamiltonian(sys, bath))
    IB = np.eye(d_B)
    return ev, np.kron(rho0, bath.rho_B), np.kron(O1, IB), np.kron(O2, IB), d_S, d_B


def chi_exact_kubo(sys, bath, rho0, O1, O2, t1, t2, *, return_complex=False):
    """``-i tr([A_1(t1), A_2(t2)] rho_tot(0))`` with Heisenberg operators."""
    ev, rho, A1, A2, _, _ = _setup(sys, bath, rho0, O1, O2)
    A1t = ev.heisenberg(A1, t1)
    A2t = ev.heisenberg(A2, t2)
    val = -1j * np.trace((A1t @ A2t - A2t @ A1t) @ rho)
    return complex(val) if return_complex else float(val.real)


def chi_exact_compact(sys, bath, rho0, O1, O2, t1, t2, *, return_complex=False):
    """``-i tr_S(O_1 tr_B(U(tau) [O_2 (x) I, rho_tot(t2)] U(tau)^dag))``."""
    ev, rho, _, A2, d_S, d_B = _setup(sys, bath, rho0, O1, O2)
    U2 = ev.U(t2)
    r2 = U2 @ rho @ dag(U2)
    U = ev.U(t1 - t2)
    X = partial_trace_bath(U @ (A2 @ r2 - r2 @ A2) @ dag(U), d_S, d_B)
    val = -1j * np.trace(np.asarray(O1) @ X)
    return complex(val) if return_complex else float(val.real)


def two_point_exact(sys, bath, rho0, O1, O2, t1, t2, form="O1O2"):
    """``<O_1(t1) O_2(t2)>`` (``form="O1O2"``) or ``<O_2(t2) O_1(t1)>``."""
    ev, rho, A1, A2, _, _ = _setup(sys, bath, rho0, O1, O2)
    A1t = ev.heisenberg(A1, t1)
    A2t = ev.heisenberg(A2, t2)
    if form == "O1O2":
        return complex(np.trace(A1t @ A2t @ rho))
    if form == "O2O1":
        return complex(np.trace(A2t @ A1t @ rho))
    raise ValueError(f"form must be 'O1O2' or 'O2O1', got {form!r}")


def reduced_state_exact(sys, bath, rho0, t):
    ev, rho, _, _, d_S, d_B = _setup(sys, bath, rho0, np.eye(sys.dim), np.eye(sys.dim))
    U = ev.U(t)
    return partial_trace_bath(U @ rho @ dag(U), d_S, d_B)


def perturbative_rho(sys, bath, Gamma, R, t, order, nodes_per_unit=2 * NODES_PER_UNIT_TIME):
    """Order-``n`` term of the weak-coupling expansion of ``rho_tot(t)``.

    With ``H_0 = H_S + H_B``, ``rho0(t) = e^{-itH_0} (Gamma (x) R) e^{itH_0}``
    and ``H_SB = lam sum S_j (x) B_j``, the Duhamel recursion gives

        rho1(t) = -i int_0^t e^{-i(t-s)H_0} [H_SB, rho0(s)] e^{i(t-s)H_0} ds
        rho2(t) = -i int_0^t e^{-i(t-s)H_0} [H_SB, rho1(s)] e^{i(t-s)H_0} ds.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"unsupported order {order}; expected 0, 1 or 2")
    if t < 0:
        raise ValueError("t must be non-negative")
    d_S, d_B = sys.dim, bath.dim
    _check_size(d_S * d_B)
    IS, IB = np.eye(d_S), np.eye(d_B)
    H0 = np.kron(sys.H_S, IB) + np.kron(IS, bath.H_B)
    Hsb = sys.lam * sum(np.kron(S, B) for S, B in zip(sys.S_ops, bath.B_ops))
    ev = _Eigen(H0)
    rho_init = np.kron(Gamma, R)

    def free(X, s):
        U = ev.U(s)
        return U @ X @ dag(U)

    def rho0(s):
        return free(rho_init, s)

    def rho1(s):
        if s == 0:
            return np.zeros_like(rho_init)
        x, w = gauss_nodes(0.0, s, nodes_per_unit)
        return sum(wi * free(-1j * commutator(Hsb, rho0(xi)), s - xi) for xi, wi in zip(x, w))

    if order == 0:
        return rho0(t)
    if t == 0 or sys.lam == 0:
        return np.zeros_like(rho_init)
    inner = rho0 if order == 1 else rho1
    x, w = gauss_nodes(0.0, t, nodes_per_unit)
    return sum(wi * free(-1j * commutator(Hsb, inner(xi)), t - xi) for xi, wi in zip(x, w))


def q_identity_check(D, basis, rho, O):
    """Residual of the eight-term identity behind the generalized response.

    The left side is the eight-term sum over ``d_jk`` and ``conj(d_jk)``; the
    right side rebuilds it from ``L_A``, ``L_B``, their adjoints and the Lamb
    shift of ``B``.  Returns ``||LHS - RHS||_F``.
    """
    V = np.asarray(basis, dtype=complex)
    D = np.asarray(D, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    O = np.asarray(O, dtype=complex)
    if D.shape != (len(V), len(V)):
        raise DimensionError("coefficient matrix does not match the basis")
    Vd = dag(V)
    Dc = D.conj()
    # left side, term by term
    lhs = (
        -np.einsum("jk,jab,kbc,cd,de->ae", D, V, Vd, rho, O)
        + np.einsum("jk,jab,bc,kcd,de->ae", Dc, Vd, rho, V, O)
        + np.einsum("jk,kab,bc,cd,jde->ae", D, Vd, rho, O, V)
        - np.einsum("jk,ab,kbc,cd,jde->ae", Dc, rho, V, O, Vd)
        + np.einsum("jk,jab,bc,kcd,de->ae", D, V, O, Vd, rho)
        - np.einsum("jk,jab,bc,cd,kde->ae", Dc, Vd, O, rho, V)
        - np.einsum("jk,ab,kbc,cd,jde->ae", D, O, Vd, rho, V)
        + np.einsum("jk,ab,bc,kcd,jde->ae", Dc, O, rho, V, Vd)
    )
    A = 0.5 * (D + dag(D))
    B = (D - dag(D)) / 2j
    d = rho.shape[0]

    def ap(M, X):
        return unvec(M @ vec(X), d)

    LA, LB = gks_matrix(A, V), gks_matrix(B, V)
    LAd, LBd = dag(LA), dag(LB)
    H = lamb_shift(B, V)
    rhs = (
        ap(LA, commutator(rho, O)) + commutator(ap(LA, rho), O) - commutator(rho, ap(LAd, O))
        + 1j * ap(LB, anticommutator(rho, O)) - 1j * anticommutator(ap(LB, rho), O)
        + 1j * anticommutator(rho, ap(LBd, O))
        - 1j * (commutator(commutator(H, rho), O) + commutator(rho, commutator(H, O)))
    )
    return float(np.linalg.norm(lhs - rhs))


def onepoint_exact(sys, bath, rho0, O, t):
    """``tr(O tr_B rho_tot(t))``."""
    return float(np.real(np.trace(np.asarray(O) @ reduced_state_exact(sys, bath, rho0, t))))


__all__ = [
    "MAX_DIM", "TotalState", "evolve_total", "chi_exact_kubo", "chi_exact_compact",
    "two_point_exact", "reduced_state_exact", "perturbative_rho", "q_identity_check",
    "onepoint_exact", "InvariantError",
]
