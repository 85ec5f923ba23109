"""Time evolution: free conjugation, time-ordered exponentials of
time-dependent generators, Duhamel differences and adjoint propagation.

Generators are callables ``s -> d^2 x d^2`` matrices (or
:class:`~nmqrt.operators.SuperOperator`).  Fixed-step RK4 is the default
integrator; ``magnus2`` (exponential midpoint) is available for comparison.

Duhamel differences are computed in the interaction picture of ``H_S``,

    T exp(int_0^t L_0 + L(s) ds) - exp(t L_0) = G(t) (Phi(t) - I),
    dPhi/ds = G(-s) L(s) G(s) Phi,   Phi(0) = I,

where ``G(s)`` is free conjugation.  The free part is then exact and the
integrator only resolves the small ``O(lam^2)`` correction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .operators import (
    DimensionError,
    SuperOperator,
    as_matrix,
    dag,
    herm_propagator,
    unvec,
    vec,
)

SCHEMES = ("rk4_fixed", "magnus2")
MAX_STEPS = 2_000_000


class PropagationError(RuntimeError):
    """Integration could not be carried out (for example too many steps)."""


@dataclass(frozen=True)
class PropagationConfig:
    scheme: str = "rk4_fixed"
    steps_per_unit_time: int = 40
    rtol: float = 1e-8

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.steps_per_unit_time) < 4:
            raise ValueError("steps_per_unit_time must be at least 4")
        if not self.rtol > 0:
            raise ValueError("rtol must be positive")


DEFAULT_CONFIG = PropagationConfig()


def _as_array(L):
    return L.matrix if isinstance(L, SuperOperator) else np.asarray(L, dtype=complex)


@dataclass(frozen=True)
class TimeDependentGenerator:
    """``s -> L(s)`` with a bound on ``sup ||L(s)||`` used for step control.

    ``evaluator`` may return a single ``d^2 x d^2`` matrix or a stack of them
    (shape ``(k, d^2, d^2)``) that are propagated side by side.
    """

    evaluator: Callable[[float], object]
    norm_bound: float
    dim: int

    def __call__(self, s):
        return _as_array(self.evaluator(s))

    @classmethod
    def constant(cls, L):
        M = _as_array(L)
        d = int(round(np.sqrt(M.shape[-1])))
        return cls(lambda s: M, float(np.linalg.norm(M, 2)), d)


def num_steps(cfg, norm_bound, t):
    n = int(np.ceil(cfg.steps_per_unit_time * (1.0 + norm_bound) * abs(t)))
    if n > MAX_STEPS:
        raise PropagationError(
            f"step size underflow: {n} steps requested for t={t} (norm bound {norm_bound:.3g})")
    return max(n, 1)


def _integrate(gen, Y0, t0, t, n, scheme):
    """Advance ``dY/ds = L(s) Y`` from ``t0`` to ``t0 + t`` in ``n`` steps."""
    Y = np.array(Y0, dtype=complex)
    h = t / n
    if scheme == "magnus2":
        for i in range(n):
            Y = expm(h * gen(t0 + (i + 0.5) * h)) @ Y
        return Y
    L_left = gen(t0)
    for i in range(n):
        s = t0 + i * h
        L_mid = gen(s + 0.5 * h)
        L_right = gen(s + h)
        k1 = L_left @ Y
        k2 = L_mid @ (Y + 0.5 * h * k1)
        k3 = L_mid @ (Y + 0.5 * h * k2)
        k4 = L_right @ (Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        L_left = L_right
    return Y


def free_propagate(H_S, X, t):
    """``U_S(t) X U_S(t)^dag`` with ``U_S(t) = exp(-i t H_S)``."""
    U = herm_propagator(H_S, t)
    return U @ as_matrix(X, "X") @ dag(U)


def time_ordered_propagate(gen, X0, t, cfg=None, *, t0=0.0, steps=None, return_error=False):
    """Solve ``dX/ds = L(s) X`` on ``[t0, t0 + t]``.

    ``X0`` is a ``d x d`` operator.  With ``return_error`` the result is paired
    with a Richardson estimate of the global error from a half-resolution run.
    """
    cfg = cfg or DEFAULT_CONFIG
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    X0 = as_matrix(X0, "X0")
    d = X0.shape[0]
    if d != gen.dim:
        raise DimensionError(f"generator acts on dimension {gen.dim}, got operator of size {d}")
    if t == 0:
        return (X0.copy(), 0.0) if return_error else X0.copy()
    n = steps if steps is not None else num_steps(cfg, gen.norm_bound, t)
    Y = _integrate(gen, vec(X0), t0, t, n, cfg.scheme)
    X = unvec(Y, d)
    if not return_error:
        return X
    coarse = unvec(_integrate(gen, vec(X0), t0, t, max(n // 2, 1), cfg.scheme), d)
    order = 4 if cfg.scheme == "rk4_fixed" else 2
    return X, float(np.linalg.norm(X - coarse) / (2 ** order - 1))


def propagator_matrix(gen, t, cfg=None, *, t0=0.0, steps=None):
    """Materialised ``d^2 x d^2`` propagator (stacked if the generator is)."""
    cfg = cfg or DEFAULT_CONFIG
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    L = gen(t0)
    I = np.broadcast_to(np.eye(L.shape[-1], dtype=complex), L.shape).copy()
    if t == 0:
        return I
    n = steps if steps is not None else num_steps(cfg, gen.norm_bound, t)
    return _integrate(gen, I, t0, t, n, cfg.scheme)


class FreeFrame:
    """Free conjugation ``G(s)`` in the eigenbasis of ``H_S``.

    In that basis ``G(s)`` is diagonal, so moving a generator into the
    interaction picture is an elementwise phase multiplication.
    """

    def __init__(self, H_S):
        H = as_matrix(H_S, "H_S")
        self.E, self.W = np.linalg.eigh(0.5 * (H + dag(H)))
        d = len(self.E)
        self.dim = d
        self.Wsup = np.kron(self.W.conj(), self.W)
        # vec index a + d*b carries X_ab, which evolves as exp(-i(E_a - E_b)s)
        self.gaps = (self.E[:, None] - self.E[None, :]).reshape(-1, order="F")

    @property
    def max_gap(self):
        return float(np.max(np.abs(self.gaps), initial=0.0))

    def to_eigen(self, L):
        return dag(self.Wsup) @ L @ self.Wsup

    def from_eigen(self, L):
        return self.Wsup @ L @ dag(self.Wsup)

    def phases(self, s):
        return np.exp(-1j * self.gaps * s)

    def superop(self, s):
        """Matrix of ``G(s)`` in the original basis."""
        return (self.Wsup * self.phases(s)) @ dag(self.Wsup)

    def interaction(self, L_eig, s):
        """``G(-s) L G(s)`` for ``L`` given in the eigenbasis; result in the eigenbasis."""
        ph = self.phases(s)
        return ph.conj()[:, None] * L_eig * ph[None, :]


def interaction_generator(H_S, gen, extra_rate=0.0):
    """Generator ``s -> G(-s) L(s) G(s)`` expressed in the ``H_S`` eigenbasis.

    Returns ``(frame, generator)``; use ``frame.from_eigen`` on results.
    ``extra_rate`` adds to the step-control bound (for example the fastest
    bath frequency entering ``L(s)``).
    """
    frame = FreeFrame(H_S)
    if gen.dim != frame.dim:
        raise DimensionError("generator and H_S dimensions differ")

    def ev(s):
        return frame.interaction(frame.to_eigen(gen(s)), s)

    bound = gen.norm_bound + frame.max_gap + extra_rate
    return frame, TimeDependentGenerator(ev, bound, frame.dim)


def duhamel_map(gen, t, cfg=None, H_S=None, *, frame="schrodinger", extra_rate=0.0):
    """Matrix of ``T exp(int_0^t L_0 + L) - exp(t L_0)``.

    With ``frame="interaction"`` the matrix ``Phi(t) - I`` is returned instead,
    which differs from the Schrodinger-frame map by a final ``G(t)``.
    """
    if H_S is None:
        H_S = np.zeros((gen.dim, gen.dim))
    fr, igen = interaction_generator(H_S, gen, extra_rate)
    Phi = propagator_matrix(igen, t, cfg)
    I = np.eye(Phi.shape[-1])
    M = fr.from_eigen(Phi - I)
    if frame == "interaction":
        return M
    if frame != "schrodinger":
        raise ValueError(f"unknown frame {frame!r}")
    return fr.superop(t) @ M


def duhamel_diff(gen, t, X, cfg=None, H_S=None):
    """``(T exp(int_0^t L_0 + L) - exp(t L_0)) X`` for a correction ``L``."""
    X = as_matrix(X, "X")
    if H_S is None:
        H_S = np.zeros_like(X)
    fr, igen = interaction_generator(H_S, gen)
    Xe = dag(fr.W) @ X @ fr.W
    if t == 0:
        return np.zeros_like(X)
    cfg = cfg or DEFAULT_CONFIG
    n = num_steps(cfg, igen.norm_bound, t)
    v = _integrate(igen, vec(Xe), 0.0, t, n, cfg.scheme) - vec(Xe)
    Y = fr.W @ unvec(v, fr.dim) @ dag(fr.W)
    return free_propagate(H_S, Y, t)


def adjoint_propagate(gen, t, O, cfg=None, *, adjoint=None, steps=None):
    """Heisenberg-picture propagation ``Phi(t)^dag O``.

    Integrates ``dY/ds = L(t - s)^dag Y`` backwards through the generator.
    ``adjoint`` may supply ``s -> L(s)^dag`` directly (for example from a
    closed-form adjoint); otherwise the conjugate transpose of ``gen`` is used.
    """
    cfg = cfg or DEFAULT_CONFIG
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    O = as_matrix(O, "O")
    if t == 0:
        return O.copy()
    adj = adjoint if adjoint is not None else (lambda s: dag(gen(s)))
    back = TimeDependentGenerator(lambda s: _as_array(adj(t - s)), gen.norm_bound, gen.dim)
    n = steps if steps is not None else num_steps(cfg, gen.norm_bound, t)
    return unvec(_integrate(back, vec(O), 0.0, t, n, cfg.scheme), O.shape[0])
