"""Dense operator algebra shared by every other module.

Operators are plain ``numpy`` complex arrays.  Superoperators act on
column-stacked vectors, so the conjugation ``X -> A X B`` is represented by
``kron(B.T, A)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Library-wide tolerances.  Every validator accepts an override.
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
ORTHONORMAL_TOL = 1e-12


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class InvariantError(ValueError):
    """An input violates a stated mathematical invariant."""


def as_matrix(A, name="matrix"):
    M = np.asarray(A, dtype=complex)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvariantError(f"{name} has non-finite entries")
    return M


def _square(A, name):
    M = as_matrix(A, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def dag(A):
    return np.conj(np.swapaxes(A, -1, -2))


def commutator(A, B):
    """Return ``AB - BA`` for square matrices of equal size."""
    A = _square(A, "A")
    B = _square(B, "B")
    if A.shape != B.shape:
        raise DimensionError(f"commutator of {A.shape} and {B.shape}")
    return A @ B - B @ A


def anticommutator(A, B):
    """Return ``AB + BA`` for square matrices of equal size."""
    A = _square(A, "A")
    B = _square(B, "B")
    if A.shape != B.shape:
        raise DimensionError(f"anticommutator of {A.shape} and {B.shape}")
    return A @ B + B @ A


def tensor(A, B):
    return np.kron(as_matrix(A, "A"), as_matrix(B, "B"))


def partial_trace_bath(M, d_S, d_B):
    """Trace out the second tensor factor of a ``(d_S*d_B)``-square matrix."""
    M = _square(M, "M")
    if d_S < 1 or d_B < 1 or M.shape[0] != d_S * d_B:
        raise DimensionError(f"cannot split dimension {M.shape[0]} as {d_S} x {d_B}")
    return np.einsum("iaja->ij", M.reshape(d_S, d_B, d_S, d_B))


def is_hermitian(H, tol=HERMITIAN_TOL):
    H = np.asarray(H)
    scale = max(np.max(np.abs(H)), 1.0) if H.size else 1.0
    return bool(np.max(np.abs(H - dag(H)), initial=0.0) <= tol * scale)


def check_hermitian(H, name="operator", tol=HERMITIAN_TOL):
    H = _square(H, name)
    if not is_hermitian(H, tol):
        err = np.max(np.abs(H - dag(H)))
        raise InvariantError(f"{name} is not Hermitian (max |M - M^dag| = {err:.3e})")
    return H


def check_density(rho, name="density matrix", trace_tol=TRACE_TOL, pos_tol=POSITIVITY_TOL):
    rho = check_hermitian(rho, name, tol=HERMITIAN_TOL)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvariantError(
            f"{name}: trace {tr:.12g} violates the unit-trace invariant (|tr - 1| <= {trace_tol:g})")
    lo = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0]
    if lo < -pos_tol:
        raise InvariantError(
            f"{name}: minimum eigenvalue {lo:.3e} violates positivity (>= {-pos_tol:g})")
    return rho


def _eigh_checked(H):
    H = _square(H, "H")
    if not is_hermitian(H, 1e-10):
        raise InvariantError("eigendecomposition requested for a non-Hermitian operator")
    return np.linalg.eigh(0.5 * (H + dag(H)))


def herm_propagator(H, t):
    """``exp(-i t H)`` for Hermitian ``H`` via its eigendecomposition."""
    E, W = _eigh_checked(H)
    return (W * np.exp(-1j * t * E)) @ dag(W)


def herm_expm(H, s):
    """``exp(s H)`` for Hermitian ``H`` and real ``s``."""
    E, W = _eigh_checked(H)
    return (W * np.exp(s * E)) @ dag(W)


def vec(X):
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unvec(v, d):
    return np.asarray(v).reshape(d, d, order="F")


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on ``d x d`` operators stored as its ``d^2 x d^2`` matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        n = M.shape[0]
        d = int(round(np.sqrt(n)))
        if M.ndim != 2 or M.shape[1] != n or d * d != n:
            raise DimensionError(f"superoperator matrix must be d^2 x d^2, got {M.shape}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self):
        return int(round(np.sqrt(self.matrix.shape[0])))

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d * d, dtype=complex))

    @classmethod
    def zero(cls, d):
        return cls(np.zeros((d * d, d * d), dtype=complex))

    def __call__(self, X):
        return superop_apply(self, X)

    def __add__(self, other):
        return SuperOperator(self.matrix + other.matrix)

    def __sub__(self, other):
        return SuperOperator(self.matrix - other.matrix)

    def __neg__(self):
        return SuperOperator(-self.matrix)

    def __mul__(self, c):
        return SuperOperator(c * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return SuperOperator(self.matrix @ other.matrix)

    def adjoint(self):
        """Hilbert-Schmidt adjoint, so ``tr(Y^dag S(X)) = tr(S^dag(Y)^dag X)``."""
        return SuperOperator(dag(self.matrix))


def superop_apply(S, X):
    M = S.matrix if isinstance(S, SuperOperator) else np.asarray(S)
    X = as_matrix(X, "X")
    d = X.shape[0]
    if M.shape[0] != d * d:
        raise DimensionError(f"superoperator of size {M.shape[0]} applied to {X.shape}")
    return unvec(M @ vec(X), d)


def hamiltonian_superop(H):
    """Matrix of ``X -> -i[H, X]``."""
    H = _square(H, "H")
    I = np.eye(H.shape[0])
    return SuperOperator(-1j * (np.kron(I, H) - np.kron(H.T, I)))


def conjugation_superop(U):
    """Matrix of ``X -> U X U^dag``."""
    U = _square(U, "U")
    return SuperOperator(np.kron(U.conj(), U))


def gks_matrix(C, basis):
    """Matrix of ``X -> sum_jk C_jk (V_k X V_j^dag - 1/2 {V_j^dag V_k, X})``.

    No Hermiticity check; used internally for coefficient matrices that are
    already known to be Hermitian.
    """
    V = np.asarray(basis, dtype=complex)
    C = np.asarray(C, dtype=complex)
    d = V.shape[-1]
    jump = np.einsum("jk,jab,kce->acbe", C, V.conj(), V).reshape(d * d, d * d)
    P = np.einsum("jk,jba,kbc->ac", C, V.conj(), V)
    I = np.eye(d)
    return jump - 0.5 * np.kron(I, P) - 0.5 * np.kron(P.T, I)


def gks_superop(H_eff, C, basis, tol=HERMITIAN_TOL):
    """``-i[H_eff, .] + sum_jk c_jk (2 V_k . V_j^dag - V_j^dag V_k . - . V_j^dag V_k)``."""
    C = as_matrix(C, "C")
    if not is_hermitian(C, tol):
        raise InvariantError("GKS coefficient matrix must be Hermitian")
    V = np.asarray(basis, dtype=complex)
    if C.shape != (len(V), len(V)):
        raise DimensionError(f"coefficient matrix {C.shape} does not match {len(V)} basis elements")
    H = check_hermitian(H_eff, "H_eff", tol=1e-10)
    return SuperOperator(hamiltonian_superop(H).matrix + 2.0 * gks_matrix(C, V))


def matrix_to_json(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"only square matrices serialize, got {M.shape}")
    return {"dim": int(M.shape[0]), "re": M.real.ravel().tolist(), "im": M.imag.ravel().tolist()}


def matrix_from_json(obj, name="matrix"):
    try:
        d = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros(d * d)), dtype=float)
    except (KeyError, TypeError) as exc:
        raise InvariantError(f"{name}: expected {{'dim', 're', 'im'}} object") from exc
    if d < 1 or re.size != d * d or im.size != d * d:
        raise DimensionError(f"{name}: entry count does not match dim {d}")
    return as_matrix((re + 1j * im).reshape(d, d), name)
