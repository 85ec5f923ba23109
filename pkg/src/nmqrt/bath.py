"""Bath descriptions, the two-point bath correlation function and the
total system-plus-bath Hamiltonian.

Two representations are supported.  :class:`BathSpectrum` is a finite list of
modes ``(omega_mu, g_{j,mu})`` with

    C_jk(t) = sum_mu g_{j,mu} conj(g_{k,mu}) exp(-i omega_mu t),

and :class:`ExplicitBath` is a finite-dimensional bath with Hamiltonian,
coupling operators and a stationary reference state.
:func:`spectrum_from_explicit` converts the second into the first.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .operators import (
    DimensionError,
    InvariantError,
    as_matrix,
    check_density,
    check_hermitian,
    dag,
    herm_expm,
    herm_propagator,
)

STATIONARY_TOL = 1e-10
ZERO_MEAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BathSpectrum:
    """Finite mode list: ``omegas`` has shape ``(M,)`` and ``g`` shape ``(M, J)``."""

    omegas: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).reshape(-1)
        g = np.asarray(self.g, dtype=complex)
        if g.ndim == 1:
            g = g.reshape(len(w), -1) if len(w) else g.reshape(0, 1)
        if g.ndim != 2 or g.shape[0] != len(w) or g.shape[1] < 1:
            raise DimensionError(f"amplitudes of shape {g.shape} do not match {len(w)} modes")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(g))):
            raise InvariantError("bath spectrum has non-finite entries")
        w.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "g", g)
        C0 = self.correlation_matrix(0.0)
        if np.linalg.eigvalsh(0.5 * (C0 + dag(C0)))[0] < -1e-12 * max(1.0, np.abs(C0).max()):
            raise InvariantError("C(0) is not positive semidefinite")

    @property
    def num_couplings(self):
        return self.g.shape[1]

    @property
    def num_modes(self):
        return len(self.omegas)

    def correlation_matrix(self, t):
        """``[C_jk(t)]`` for scalar ``t``, or stacked along axis 0 for arrays."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(-1j * np.multiply.outer(t, self.omegas))
        return np.einsum("...m,mj,mk->...jk", phase, self.g, self.g.conj())


@dataclass(frozen=True, eq=False)
class ExplicitBath:
    """Finite bath with ``[H_B, rho_B] = 0`` and ``tr(B_j rho_B) = 0``."""

    H_B: np.ndarray
    B_ops: np.ndarray
    rho_B: np.ndarray

    def __post_init__(self):
        H = check_hermitian(self.H_B, "bath.H_B", tol=1e-10)
        B = np.asarray(self.B_ops, dtype=complex)
        if B.ndim == 2:
            B = B[None]
        if B.ndim != 3 or B.shape[1:] != H.shape:
            raise DimensionError(f"bath couplings of shape {B.shape} do not match H_B {H.shape}")
        for j, Bj in enumerate(B):
            check_hermitian(Bj, f"bath.B[{j}]", tol=1e-10)
        rho = check_density(self.rho_B, "bath.rho_B")
        if rho.shape != H.shape:
            raise DimensionError("rho_B and H_B dimensions differ")
        comm = np.max(np.abs(H @ rho - rho @ H))
        if comm > STATIONARY_TOL:
            raise InvariantError(
                f"bath.rho_B: max|[H_B, rho_B]| = {comm:.3e} violates the stationary-bath "
                f"assumption (rho_B must be invariant under H_B)")
        for j, Bj in enumerate(B):
            m = abs(np.trace(Bj @ rho))
            if m > ZERO_MEAN_TOL:
                raise InvariantError(
                    f"bath.B[{j}]: |tr(B_j rho_B)| = {m:.3e} violates the zero-mean coupling "
                    f"assumption")
        for name, val in (("H_B", H), ("B_ops", B), ("rho_B", rho)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def dim(self):
        return self.H_B.shape[0]

    @property
    def num_couplings(self):
        return self.B_ops.shape[0]


@dataclass(frozen=True, eq=False)
class CoupledSystem:
    """System Hamiltonian, coupling operators ``S_j`` and the scale ``lam``.

    The interaction is ``lam * sum_j S_j (x) B_j``; ``lam`` is kept separate so
    that scaling studies can rescale it without rebuilding the operators.
    """

    H_S: np.ndarray
    S_ops: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        H = check_hermitian(self.H_S, "system.H_S", tol=1e-10)
        S = np.asarray(self.S_ops, dtype=complex)
        if S.ndim == 2:
            S = S[None]
        if S.ndim != 3 or S.shape[1:] != H.shape:
            raise DimensionError(f"system couplings of shape {S.shape} do not match H_S {H.shape}")
        for j, Sj in enumerate(S):
            check_hermitian(Sj, f"system.S[{j}]", tol=1e-10)
        lam = float(self.lam)
        if not np.isfinite(lam) or lam < 0:
            raise InvariantError(f"coupling scale must be finite and non-negative, got {lam}")
        H.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "H_S", H)
        object.__setattr__(self, "S_ops", S)
        object.__setattr__(self, "lam", lam)

    @property
    def dim(self):
        return self.H_S.shape[0]

    @property
    def num_couplings(self):
        return self.S_ops.shape[0]

    def with_lambda(self, lam):
        return replace(self, lam=lam)


def _check_index(j, J):
    if not (0 <= j < J):
        raise IndexError(f"coupling index {j} out of range for {J} couplings")


def bcf(spectrum, j, k, t):
    """``C_jk(t)`` from the spectral sum; ``t`` may be an array."""
    J = spectrum.num_couplings
    _check_index(j, J)
    _check_index(k, J)
    t = np.asarray(t, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(t, spectrum.omegas))
    return phase @ (spectrum.g[:, j] * spectrum.g[:, k].conj())


def bcf_exact(bath, j, k, t):
    """``tr(rho_B e^{itH_B} B_j e^{-itH_B} B_k)`` by dense algebra."""
    _check_index(j, bath.num_couplings)
    _check_index(k, bath.num_couplings)
    U = herm_propagator(bath.H_B, t)
    Bj_t = dag(U) @ bath.B_ops[j] @ U
    return complex(np.trace(bath.rho_B @ Bj_t @ bath.B_ops[k]))


def total_hamiltonian(sys, bath):
    if sys.num_couplings != bath.num_couplings:
        raise DimensionError(
            f"{sys.num_couplings} system couplings but {bath.num_couplings} bath couplings")
    IS = np.eye(sys.dim)
    IB = np.eye(bath.dim)
    H = np.kron(sys.H_S, IB) + np.kron(IS, bath.H_B)
    for S, B in zip(sys.S_ops, bath.B_ops):
        H = H + sys.lam * np.kron(S, B)
    return H


def _joint_eigenbasis(H_B, rho_B, tol=1e-9):
    """Eigenbasis of ``H_B`` that also diagonalises ``rho_B``."""
    E, W = np.linalg.eigh(H_B)
    start = 0
    for stop in range(1, len(E) + 1):
        if stop == len(E) or E[stop] - E[start] > tol * max(1.0, abs(E[start])):
            if stop - start > 1:
                blk = W[:, start:stop]
                _, R = np.linalg.eigh(dag(blk) @ rho_B @ blk)
                W[:, start:stop] = blk @ R
            start = stop
    return E, W


def spectrum_from_explicit(bath, J=None, prune=1e-14):
    """Spectral modes of an explicit bath.

    With ``H_B = sum_a E_a |a><a|`` and ``rho_B = sum_a p_a |a><a|`` each pair
    ``(a, b)`` with ``p_a > 0`` gives a mode of frequency ``E_b - E_a`` and
    amplitudes ``g_j = sqrt(p_a) <a|B_j|b>``.
    """
    J = bath.num_couplings if J is None else J
    if J != bath.num_couplings:
        raise DimensionError(f"bath has {bath.num_couplings} couplings, {J} requested")
    E, W = _joint_eigenbasis(bath.H_B, bath.rho_B)
    R = dag(W) @ bath.rho_B @ W
    off = np.max(np.abs(R - np.diag(np.diag(R))), initial=0.0)
    if off > 1e-9:
        raise InvariantError(f"rho_B is not diagonal in the H_B eigenbasis (off-diagonal {off:.2e})")
    p = np.clip(np.diag(R).real, 0.0, None)
    Bt = np.einsum("ba,jbc,cd->jad", W.conj(), bath.B_ops, W)
    amp = np.sqrt(p)[None, :, None] * Bt  # (J, a, b)
    omega = E[None, :] - E[:, None]  # omega[a, b] = E_b - E_a
    keep = np.max(np.abs(amp), axis=0) > prune
    a_idx, b_idx = np.nonzero(keep)
    g = amp[:, a_idx, b_idx].T
    return BathSpectrum(omega[a_idx, b_idx], g.reshape(len(a_idx), J))


def gibbs_state(H_B, beta):
    """Thermal state ``exp(-beta H_B) / Z``."""
    H = check_hermitian(as_matrix(H_B), "H_B", tol=1e-10)
    E = np.linalg.eigvalsh(H)
    rho = herm_expm(H - E[0] * np.eye(len(E)), -beta)
    return rho / np.trace(rho).real


def correlation_time(spectrum, horizon, samples=2001):
    """First time at which ``||C(t)||_F`` drops to ``||C(0)||_F / e``.

    Returns ``horizon`` when the correlation never decays that far inside
    ``[0, horizon]`` (a bath with persistent memory).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    ts = np.linspace(0.0, horizon, samples)
    norms = np.linalg.norm(spectrum.correlation_matrix(ts), axis=(-2, -1))
    if norms[0] == 0:
        return 0.0
    hit = np.nonzero(norms <= norms[0] / np.e)[0]
    return float(ts[hit[0]]) if len(hit) else float(horizon)
