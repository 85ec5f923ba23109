"""Time-local generators built from a coupled system and a bath spectrum.

Every collective coupling ``T_mu = lam * sum_j g_{j,mu} S_j`` is expanded in a
fixed orthonormal operator basis ``{V_a}``,

    U_S(t)^dag T_mu U_S(t) exp(-i omega_mu t) = sum_a y_{mu,a}(t) V_a,

and the coefficient matrix used by the response formula is

    d_ab(s; h) = sum_mu int_0^h y_{mu,a}(0) conj(y_{mu,b}(-v - s)) dv.

Its Hermitian split ``D = A + iB`` feeds the maps

    L_A(X) = sum_ab a_ab (V_b X V_a^dag - 1/2 {V_a^dag V_b, X})
    Lamb shift  Lambda = sum_ab b_ab V_a V_b^dag.

The same construction with ``s = 0`` and ``h = t`` gives the time-local
generator of the reduced dynamics.  The basis must be Hermitian for the
response identity to hold, which is why :func:`hermitian_basis` is the
default.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .operators import (
    DimensionError,
    InvariantError,
    ORTHONORMAL_TOL,
    SuperOperator,
    as_matrix,
    dag,
    gks_matrix,
    hamiltonian_superop,
    herm_propagator,
    is_hermitian,
)

NODES_PER_UNIT_TIME = 64
MIN_NODES = 8


@lru_cache(maxsize=None)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_nodes(a, b, nodes_per_unit=NODES_PER_UNIT_TIME, n=None):
    """Gauss-Legendre nodes and weights on ``[a, b]``."""
    if n is None:
        n = max(MIN_NODES, int(np.ceil(nodes_per_unit * abs(b - a))))
    x, w = _legendre(int(n))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def hermitian_basis(d):
    """``I/sqrt(d)`` followed by the normalised generalised Gell-Mann matrices."""
    if d < 1:
        raise DimensionError("basis dimension must be positive")
    out = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            M = np.zeros((d, d), dtype=complex)
            M[j, k] = M[k, j] = 1 / np.sqrt(2)
            out.append(M)
            M = np.zeros((d, d), dtype=complex)
            M[j, k], M[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out.append(M)
    for l in range(1, d):
        M = np.zeros((d, d), dtype=complex)
        M[np.arange(l), np.arange(l)] = 1.0
        M[l, l] = -l
        out.append(M / np.sqrt(l * (l + 1)))
    return np.array(out)


def check_orthonormal(basis, tol=ORTHONORMAL_TOL):
    V = np.asarray(basis, dtype=complex)
    if V.ndim != 3 or V.shape[1] != V.shape[2]:
        raise DimensionError(f"basis must be a stack of square matrices, got {V.shape}")
    G = np.einsum("jab,kab->jk", V.conj(), V)
    err = np.max(np.abs(G - np.eye(len(V))))
    if err > tol:
        raise InvariantError(f"basis is not Hilbert-Schmidt orthonormal (error {err:.2e})")
    return V


def collective_coupling(sys, spectrum, mu):
    """``T_mu = lam * sum_j g_{j,mu} S_j``."""
    if not (0 <= mu < spectrum.num_modes):
        raise IndexError(f"mode index {mu} out of range for {spectrum.num_modes} modes")
    if spectrum.num_couplings != sys.num_couplings:
        raise DimensionError("spectrum and system disagree on the number of couplings")
    return sys.lam * np.einsum("j,jab->ab", spectrum.g[mu], sys.S_ops)


def basis_coefficients(T_mu, basis, H_S, omega_mu, t):
    """Components of ``U_S(t)^dag T_mu U_S(t) exp(-i omega_mu t)`` along the basis."""
    U = herm_propagator(H_S, t)
    Tt = dag(U) @ as_matrix(T_mu, "T_mu") @ U
    V = np.asarray(basis, dtype=complex)
    return np.einsum("jab,ab->j", V.conj(), Tt) * np.exp(-1j * omega_mu * t)


def hermitian_split(D):
    """``D = A + iB`` with Hermitian ``A`` and ``B``."""
    D = np.asarray(D, dtype=complex)
    A = 0.5 * (D + dag(D))
    B = (D - dag(D)) / 2j
    return A, B


def _check_coeffs(C, basis):
    C = as_matrix(C, "coefficient matrix")
    if not is_hermitian(C, 1e-10):
        raise InvariantError("dissipator coefficients must form a Hermitian matrix")
    if C.shape != (len(basis), len(basis)):
        raise DimensionError(f"coefficient matrix {C.shape} does not match {len(basis)} basis elements")
    return C


def dissipator(A, basis):
    """``X -> sum_jk a_jk (V_k X V_j^dag - 1/2 V_j^dag V_k X - 1/2 X V_j^dag V_k)``."""
    V = np.asarray(basis, dtype=complex)
    return SuperOperator(gks_matrix(_check_coeffs(A, V), V))


def adjoint_dissipator(A, basis):
    """``Y -> sum_jk a_jk (V_j^dag Y V_k - 1/2 V_j^dag V_k Y - 1/2 Y V_j^dag V_k)``."""
    V = np.asarray(basis, dtype=complex)
    A = _check_coeffs(A, V)
    d = V.shape[-1]
    jump = np.einsum("jk,kba,jec->acbe", A, V, V.conj()).reshape(d * d, d * d)
    P = np.einsum("jk,jba,kbc->ac", A, V.conj(), V)
    I = np.eye(d)
    return SuperOperator(jump - 0.5 * np.kron(I, P) - 0.5 * np.kron(P.T, I))


def lamb_shift(A, basis):
    """``sum_jk a_jk V_j V_k^dag``."""
    V = np.asarray(basis, dtype=complex)
    return np.einsum("jk,jab,kcb->ac", np.asarray(A, dtype=complex), V, V.conj())


def positive_split(c, tol=0.0):
    """``c = C_plus - C_minus`` with both parts positive semidefinite.

    Eigenvalues ``<= tol`` in magnitude (exact zeros by default) go to
    ``C_plus``.
    """
    c = as_matrix(c, "c")
    if not is_hermitian(c, 1e-10):
        raise InvariantError("positive_split needs a Hermitian matrix")
    w, U = np.linalg.eigh(0.5 * (c + dag(c)))
    neg = w < -tol
    Cp = (U[:, ~neg] * w[~neg]) @ dag(U[:, ~neg])
    Cm = -(U[:, neg] * w[neg]) @ dag(U[:, neg])
    return Cp, Cm


class BasisTensors:
    """Superoperators of every basis pair, so that coefficient-weighted maps
    reduce to one matrix product.

    For coefficients ``C`` the dissipator is ``C.ravel() @ jump`` reshaped,
    and likewise for the adjoint and the Lamb-shift commutator.  An optional
    unitary ``transform`` (a change of basis on vectorised operators) is
    folded in, giving every map directly in that frame.
    """

    def __init__(self, basis, transform=None):
        V = np.asarray(basis, dtype=complex)
        N, d = len(V), V.shape[-1]
        I = np.eye(d)
        P = np.einsum("jba,kbc->jkac", V.conj(), V)  # V_j^dag V_k
        jump = np.einsum("jab,kce->jkacbe", V.conj(), V).reshape(N, N, d * d, d * d)
        anti = (np.einsum("ab,jkce->jkacbe", I, P) + np.einsum("jkba,ce->jkacbe", P, I)) \
            .reshape(N, N, d * d, d * d)
        diss = jump - 0.5 * anti
        adj_jump = np.einsum("kba,jec->jkacbe", V, V.conj()).reshape(N, N, d * d, d * d)
        adj = adj_jump - 0.5 * anti
        VV = np.einsum("jab,kcb->jkac", V, V.conj())  # V_j V_k^dag
        ham = -1j * (np.einsum("ab,jkce->jkacbe", I, VV) - np.einsum("jkba,ce->jkacbe", VV, I)) \
            .reshape(N, N, d * d, d * d)
        if transform is not None:
            Wt = np.asarray(transform)
            diss, adj, ham = (dag(Wt) @ T @ Wt for T in (diss, adj, ham))
        self.N, self.dim = N, d
        self._diss = diss.reshape(N * N, -1)
        self._adj = adj.reshape(N * N, -1)
        self._ham = ham.reshape(N * N, -1)
        self._VV = VV.reshape(N * N, d * d)

    def _apply(self, T, C):
        d2 = self.dim * self.dim
        return (np.asarray(C).reshape(-1) @ T).reshape(d2, d2)

    def dissipator(self, C):
        return self._apply(self._diss, C)

    def adjoint(self, C):
        return self._apply(self._adj, C)

    def lamb_commutator(self, B):
        """Matrix of ``X -> -i[sum b_jk V_j V_k^dag, X]``."""
        return self._apply(self._ham, B)

    def lamb_operator(self, B):
        return (np.asarray(B).reshape(-1) @ self._VV).reshape(self.dim, self.dim)


@dataclass(frozen=True, eq=False)
class CoefficientMatrices:
    t: float
    D: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C_tl: np.ndarray
    C_plus: np.ndarray
    C_minus: np.ndarray
    lamb_shift: np.ndarray


class GeneratorBundle:
    """All coefficient functions of one (system, spectrum, basis) triple.

    ``y_{mu,a}(t)`` is a finite sum of exponentials in the eigenbasis of
    ``H_S``, so ``e_ab(w) = sum_mu y_{mu,a}(0) conj(y_{mu,b}(-w))`` is stored as
    amplitudes ``P_K`` and frequencies ``Omega_K`` with
    ``e(w) = sum_K P_K exp(i Omega_K w)``.

    ``quadrature`` selects Gauss-Legendre integration of ``e`` (the default)
    or the closed-form integral of each exponential (``"exact"``), which is
    used as a cross-check.
    """

    def __init__(self, sys, spectrum, basis=None, nodes_per_unit=NODES_PER_UNIT_TIME,
                 quadrature="gauss"):
        if spectrum.num_couplings != sys.num_couplings:
            raise DimensionError("spectrum and system disagree on the number of couplings")
        if quadrature not in ("gauss", "exact"):
            raise ValueError(f"unknown quadrature {quadrature!r}")
        self.sys = sys
        self.spectrum = spectrum
        d = sys.dim
        self.basis = check_orthonormal(hermitian_basis(d) if basis is None else basis)
        if self.basis.shape[-1] != d:
            raise DimensionError("basis dimension does not match the system")
        self.nodes_per_unit = nodes_per_unit
        self.quadrature = quadrature
        self.tensors = BasisTensors(self.basis)
        self.dim = d
        self.L0 = hamiltonian_superop(sys.H_S)

        E, W = np.linalg.eigh(sys.H_S)
        self._E, self._W = E, W
        N = len(self.basis)
        M = spectrum.num_modes
        T = sys.lam * np.einsum("uj,jab->uab", spectrum.g, sys.S_ops)
        Tt = dag(W) @ T @ W
        Vt = dag(W) @ self.basis @ W
        # y_{mu,a}(t) = sum_mn Y[mu,a,mn] exp(i freq[mu,mn] t)
        Y = np.einsum("amn,umn->uamn", Vt.conj(), Tt).reshape(M, N, d * d)
        freq = (E[:, None] - E[None, :])[None] - spectrum.omegas[:, None, None]
        self._Y = Y
        self._freq = freq.reshape(M, d * d)
        y0 = Y.sum(axis=-1)
        P = np.einsum("ua,ubk->ukab", y0, Y.conj())
        self._P = P.reshape(M * d * d, N * N)
        self._Omega = self._freq.reshape(-1)
        self._N = N

    # coefficient functions -------------------------------------------------

    def y(self, t):
        """``y_{mu,a}(t)`` as an ``(M, N)`` array."""
        return np.einsum("uak,uk->ua", self._Y, np.exp(1j * self._freq * t))

    def e(self, w):
        """Integrand ``e_ab(w)``; array ``w`` gives a stacked result."""
        w = np.asarray(w, dtype=float)
        out = np.exp(1j * np.multiply.outer(w, self._Omega)) @ self._P
        return out.reshape(w.shape + (self._N, self._N))

    def D(self, s, horizon):
        """``d_ab(s; h) = int_s^{s+h} e_ab(w) dw``."""
        if horizon < 0:
            raise ValueError(f"horizon must be non-negative, got {horizon}")
        if horizon == 0 or self._P.size == 0:
            return np.zeros((self._N, self._N), dtype=complex)
        if self.quadrature == "exact":
            h = float(horizon)
            weights = h * np.exp(1j * self._Omega * (s + 0.5 * h)) * np.sinc(self._Omega * h / (2 * np.pi))
        else:
            x, w = gauss_nodes(s, s + horizon, self.nodes_per_unit)
            weights = w @ np.exp(1j * np.multiply.outer(x, self._Omega))
        return (weights @ self._P).reshape(self._N, self._N)

    def E(self, t):
        """Time-local coefficient integral ``E(t) = d(0; t)``."""
        return self.D(0.0, t)

    def coefficients(self, t):
        """Every coefficient object of the time-local generator at time ``t``."""
        D = self.E(t)
        A, B = hermitian_split(D)
        Cp, Cm = positive_split(A)
        return CoefficientMatrices(
            t=float(t), D=D, A=A, B=B, C_tl=A, C_plus=Cp, C_minus=Cm,
            lamb_shift=lamb_shift(B, self.basis))

    # superoperators ---------------------------------------------------------

    def _split(self, s, horizon):
        return hermitian_split(self.D(s, horizon))

    def L_A(self, s, horizon):
        A, _ = self._split(s, horizon)
        return SuperOperator(gks_matrix(A, self.basis))

    def L_A_adj(self, s, horizon):
        A, _ = self._split(s, horizon)
        return adjoint_dissipator(A, self.basis)

    def L_B(self, s, horizon):
        _, B = self._split(s, horizon)
        return SuperOperator(gks_matrix(B, self.basis))

    def L_B_adj(self, s, horizon):
        _, B = self._split(s, horizon)
        return adjoint_dissipator(B, self.basis)

    def lamb(self, s, horizon):
        """Lamb-shift operator ``Lambda(s) = sum b_ab V_a V_b^dag``."""
        _, B = self._split(s, horizon)
        return lamb_shift(B, self.basis)

    def L_H(self, s, horizon):
        """``X -> -i[Lambda(s), X]``."""
        return hamiltonian_superop(self.lamb(s, horizon))

    def response_maps(self, s, horizon, tensors=None):
        """``(L_A, L_B, L_H)`` matrices at ``s`` from a single coefficient evaluation.

        ``tensors`` may carry a change of frame (see :class:`BasisTensors`).
        """
        T = tensors or self.tensors
        A, B = self._split(s, horizon)
        return T.dissipator(A), T.dissipator(B), T.lamb_commutator(B)

    def response_adjoint_maps(self, s, horizon, tensors=None):
        """Hilbert-Schmidt adjoints of :meth:`response_maps`, built from the
        closed-form adjoint dissipator rather than by transposition."""
        T = tensors or self.tensors
        A, B = self._split(s, horizon)
        return T.adjoint(A), T.adjoint(B), -T.lamb_commutator(B)

    def K_matrix(self, t, tensors=None):
        T = tensors or self.tensors
        A, B = hermitian_split(self.E(t))
        return T.lamb_commutator(B) + 2.0 * T.dissipator(A)

    def K(self, t):
        """Correction to ``L_0`` in the time-local generator, ``O(lam^2)``."""
        return SuperOperator(self.K_matrix(t))

    def L_C(self, t):
        """Full time-local generator ``L_0 + K(t)``."""
        return self.L0 + self.K(t)

    def cptp_pieces(self, t):
        """``(L_plus, L_minus)`` with ``L_C = L_plus - L_minus``.

        ``L_plus = L_0 - i[Lambda, .] + 2 L_{C_plus}`` and
        ``L_minus = 2 L_{C_minus}`` are both Lindblad generators.
        """
        c = self.coefficients(t)
        plus = (self.L0.matrix + hamiltonian_superop(c.lamb_shift).matrix
                + 2.0 * gks_matrix(c.C_plus, self.basis))
        return SuperOperator(plus), SuperOperator(2.0 * gks_matrix(c.C_minus, self.basis))

    def markov_generator(self, t_ref):
        """``L_0 + K(t_ref)``: the time-local generator frozen at ``t_ref``."""
        return self.L_C(t_ref)

    def norm_bound(self, horizon):
        """Cheap bound on ``sup ||K||`` and the response maps over ``[0, horizon]``."""
        weight = np.sum(np.abs(self._P), axis=0).reshape(self._N, self._N)
        coeff = horizon * np.linalg.norm(weight, 2)
        return 4.0 * coeff * self.dim

    def scaled(self, factor):
        """Same bundle for ``lam -> factor * lam`` (coefficients scale by factor**2)."""
        return GeneratorBundle(self.sys.with_lambda(self.sys.lam * factor), self.spectrum,
                               self.basis, self.nodes_per_unit, self.quadrature)


def coefficient_matrix(sys, spectrum, basis, t1_prime, t2_horizon, quad_points=None):
    """``d_jk(t1') = sum_mu int_0^{t2} y_{mu,j}(0) conj(y_{mu,k}(-t2' - t1')) dt2'``.

    ``quad_points`` fixes the Gauss-Legendre node count; by default it is
    64 per unit of ``t2_horizon``.
    """
    if t2_horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {t2_horizon}")
    if quad_points is not None and quad_points < 2:
        raise ValueError("quad_points must be at least 2")
    V = check_orthonormal(basis)
    N = len(V)
    if t2_horizon == 0:
        return np.zeros((N, N), dtype=complex)
    x, w = gauss_nodes(0.0, t2_horizon, n=quad_points)
    T = [collective_coupling(sys, spectrum, mu) for mu in range(spectrum.num_modes)]
    D = np.zeros((N, N), dtype=complex)
    for mu, T_mu in enumerate(T):
        om = spectrum.omegas[mu]
        y0 = basis_coefficients(T_mu, V, sys.H_S, om, 0.0)
        ys = np.array([basis_coefficients(T_mu, V, sys.H_S, om, -(v + t1_prime)) for v in x])
        D += np.outer(y0, w @ ys.conj())
    return D


def tl_generator(sys, spectrum, basis, t, nodes_per_unit=NODES_PER_UNIT_TIME):
    """Coefficients ``(c(t), Delta_H(t))`` of the time-local master equation

        d rho/dt = -i[H_S + Delta_H, rho]
                   + sum_jk c_jk (2 V_k rho V_j^dag - {V_j^dag V_k, rho}).
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    bundle = GeneratorBundle(sys, spectrum, basis, nodes_per_unit)
    c = bundle.coefficients(t)
    return c.C_tl, c.lamb_shift


def cumulant_M2(sys, spectrum, rho_t, t, nodes_per_unit=NODES_PER_UNIT_TIME):
    """Second-order cumulant as the direct double time integral.

    Uses ``S_j(s) = U_S(s)^dag S_j U_S(s)`` and the bath correlation
    ``C_jk`` on the triangle ``0 <= t2 <= t1 <= t``.  Independent of the
    basis expansion, so it serves as the oracle for :func:`tl_generator`.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    rho = as_matrix(rho_t, "rho")
    if t == 0 or sys.lam == 0:
        return np.zeros_like(rho)
    E, W = np.linalg.eigh(sys.H_S)
    Sw = dag(W) @ sys.S_ops @ W

    def heis(s):
        ph = np.exp(1j * np.multiply.outer(s, E))  # (n, d)
        Sd = ph[:, None, :, None] * Sw[None] * ph.conj()[:, None, None, :]
        return W @ Sd @ dag(W)  # (n, J, d, d)

    x1, w1 = gauss_nodes(0.0, t, nodes_per_unit)
    S1 = heis(x1 - t)
    out = np.zeros_like(rho)
    for t1, wt1, S1j in zip(x1, w1, S1):
        x2, w2 = gauss_nodes(0.0, t1, nodes_per_unit)
        S2 = heis(x2 - t)
        Cf = spectrum.correlation_matrix(t1 - x2)  # C_jk(t1 - t2)
        Cb = spectrum.correlation_matrix(x2 - t1)  # C_jk(t2 - t1)
        # term by term with j on S(t1 - t) and k on S(t2 - t)
        a = np.einsum("n,njk,jab,nkbc->ac", w2, Cf, S1j, S2) @ rho
        b = np.einsum("n,nkj,jab,bc,nkcd->ad", w2, Cb, S1j, rho, S2)
        c = np.einsum("n,njk,nkab,bc,jcd->ad", w2, Cf, S2, rho, S1j)
        e = rho @ np.einsum("n,nkj,nkab,jbc->ac", w2, Cb, S2, S1j)
        out += wt1 * (a - b - c + e)
    return -sys.lam ** 2 * out
