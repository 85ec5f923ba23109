"""Classical model of the commutator and anticommutator estimators.

The Kraus map ``M_delta(rho) = e^{delta O} rho e^{delta O}`` satisfies

    M_delta - M_-delta = 2 delta {O, rho} + O(delta^3),

so centred differences of ``M_{+-delta}`` and ``M_{+-2delta}`` reconstruct
``{O, rho}``.  Replacing the Kraus operator by ``e^{-i delta O}`` gives
``-i[O, rho]`` in the same way.  :func:`simulate_estimator` replays the
estimation protocol with exact traces plus additive Gaussian noise, and the
``cost_*`` functions evaluate the query and gate-count formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .operators import (
    SuperOperator,
    anticommutator,
    as_matrix,
    check_hermitian,
    commutator,
    dag,
    herm_expm,
    herm_propagator,
    unvec,
    vec,
)

# finite-difference stencils: offsets (in units of delta) and weights
STENCILS = {
    "second": ((1, -1), (1.0, -1.0), 2.0),
    "fourth": ((2, 1, -1, -2), (-1.0, 8.0, -8.0, 1.0), 12.0),
}
ORDERS = {"second": 3, "fourth": 5}
BOUND_CONSTANTS = {"second": 4.0 / 3.0, "fourth": 32.0 / 30.0}


class EstimatorAbort(RuntimeError):
    """The postselection proxy fell below its threshold."""


@dataclass(frozen=True)
class KrausDifferenceScheme:
    order: str = "fourth"
    delta: float = 0.1
    delta0: float = 1.0

    def __post_init__(self):
        if self.order not in STENCILS:
            raise ValueError(f"order must be 'second' or 'fourth', got {self.order!r}")
        if not (0 < self.delta0 <= 1):
            raise ValueError(f"delta0 must lie in (0, 1], got {self.delta0}")
        if not (0 < self.delta <= self.delta0):
            raise ValueError(f"delta {self.delta} must lie in (0, delta0={self.delta0}]")


@dataclass(frozen=True)
class CostModel:
    alpha: float = 1.0
    b: int = 1
    eps: float = 1e-2
    c_O1: float = 1.0
    c_O2: float = 1.0
    c_rho: float = 1.0
    c_L: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "eps", "c_O1", "c_O2", "c_rho", "c_L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.b < 1:
            raise ValueError("ancilla count must be positive")


def kraus_map(O, rho, delta):
    """``e^{delta O} rho e^{delta O}``."""
    K = herm_expm(check_hermitian(O, "O", tol=1e-10), delta)
    return K @ as_matrix(rho, "rho") @ K


def unitary_map(O, rho, delta):
    """``e^{-i delta O} rho e^{i delta O}``."""
    U = herm_propagator(check_hermitian(O, "O", tol=1e-10), delta)
    return U @ as_matrix(rho, "rho") @ dag(U)


def _stencil(fn, O, rho, scheme):
    offsets, weights, denom = STENCILS[scheme.order]
    total = sum(w * fn(O, rho, k * scheme.delta) for k, w in zip(offsets, weights))
    return total / (denom * scheme.delta)


def anticomm_reconstruct(O, rho, scheme):
    """Finite-difference approximation of ``{O, rho}``.

    Second order divides ``M_delta - M_-delta`` by ``2 delta``; fourth order
    divides ``-M_2d + 8 M_d - 8 M_-d + M_-2d`` by ``12 delta``.
    """
    return _stencil(kraus_map, O, rho, scheme)


def comm_reconstruct(O, rho, scheme):
    """Finite-difference approximation of ``[O, rho]`` from unitary conjugations."""
    return 1j * _stencil(unitary_map, O, rho, scheme)


def remainder(O, rho, scheme, kind="anticommutator"):
    """Operator norm of ``delta * (reconstruction - exact)``.

    This is the remainder ``R_p`` of ``M_delta - M_-delta = 2 delta {O, rho} + 2 R_2``
    (and its fourth-order analogue), which scales as ``delta^3`` or ``delta^5``.
    """
    if kind == "anticommutator":
        err = anticomm_reconstruct(O, rho, scheme) - anticommutator(O, rho)
    elif kind == "commutator":
        err = comm_reconstruct(O, rho, scheme) - commutator(O, rho)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return float(scheme.delta * np.linalg.norm(err, 2))


def remainder_bound(O, scheme):
    """``K delta^p ||O||^p exp(2 delta0 ||O||)`` with ``(K, p) = (4/3, 3)`` or ``(32/30, 5)``."""
    n = float(np.linalg.norm(np.asarray(O), 2))
    p = ORDERS[scheme.order]
    return BOUND_CONSTANTS[scheme.order] * (scheme.delta * n) ** p * math.exp(2 * scheme.delta0 * n)


def _channel(L, t):
    M = L.matrix if isinstance(L, SuperOperator) else np.asarray(L, dtype=complex)
    return expm(t * M)


def simulate_estimator(O1, O2, rho, L, t, target_eps, rng_seed=0, *, variant="anticommutator",
                       c0=0.1, c1=0.5, threshold=0.5):
    """Replay the two-time estimator with noisy traces.

    Estimates ``tr(O_2 e^{Lt}({rho, O_1}))`` (``variant="anticommutator"``) or
    ``tr(O_2 e^{Lt}(-i[O_1, rho]))`` (``variant="commutator"``).  With
    ``delta = c1 eps^(1/4)`` and ``eps0 = c0 eps^(5/4)`` each of the eight
    traces

        xi_1..xi_4 = tr(O_2 e^{Lt} M_s(rho)) / tr(M_s(rho)),  s = d, -d, 2d, -2d
        xi_5..xi_8 = tr(M_s(rho))

    receives independent ``N(0, eps0^2)`` noise and the estimate is
    ``(-xi_3 xi_7 + 8 xi_1 xi_5 - 8 xi_2 xi_6 + xi_4 xi_8) / (12 delta)``.
    For the commutator variant the maps are unitary, the normalisations are
    exactly one and are not estimated.

    Returns ``(estimate, diagnostics)``.
    """
    if not (0 < target_eps < 1):
        raise ValueError("target_eps must lie in (0, 1)")
    O1 = check_hermitian(O1, "O1", tol=1e-10)
    O2 = check_hermitian(O2, "O2", tol=1e-10)
    rho = as_matrix(rho, "rho")
    d = rho.shape[0]
    delta = c1 * target_eps ** 0.25
    eps0 = c0 * target_eps ** 1.25
    Phi = _channel(L, t)

    def evolve(X):
        return unvec(Phi @ vec(X), d)

    if variant == "anticommutator":
        fn = kraus_map
        truth = np.trace(O2 @ evolve(anticommutator(rho, O1))).real
    elif variant == "commutator":
        fn = unitary_map
        truth = np.trace(O2 @ evolve(-1j * commutator(O1, rho))).real
    else:
        raise ValueError(f"unknown variant {variant!r}")

    steps = (1, -1, 2, -2)
    mapped = [fn(O1, rho, s * delta) for s in steps]
    if variant == "commutator":
        norms = np.ones(4)  # unitary conjugation preserves the trace
    else:
        norms = np.array([np.trace(m).real for m in mapped])
    if norms.min() < threshold:
        raise EstimatorAbort(
            f"postselection proxy tr(M(rho)) = {norms.min():.3g} below threshold {threshold}")
    ratios = np.array([np.trace(O2 @ evolve(m)).real for m in mapped]) / norms
    rng = np.random.default_rng(rng_seed)
    xi = np.concatenate([ratios, norms])
    noise = rng.normal(0.0, eps0, size=8) if eps0 > 0 else np.zeros(8)
    if variant == "commutator":
        noise[4:] = 0.0
    xi = xi + noise
    x1, x2, x3, x4, x5, x6, x7, x8 = xi
    estimate = (-x3 * x7 + 8 * x1 * x5 - 8 * x2 * x6 + x4 * x8) / (12 * delta)
    diag = {
        "truth": float(truth),
        "estimate": float(estimate),
        "eps": float(target_eps),
        "delta": float(delta),
        "eps0": float(eps0),
        "seed": int(rng_seed),
        "variant": variant,
        "xi": [float(x) for x in xi],
    }
    return float(estimate), diag


def _log2_inv(eps):
    return max(math.log2(1.0 / eps), 0.0)


def cost_exp_be(cost, delta=1.0, c=1.0):
    """Queries for a block-encoding of ``exp(-delta A)``.

    ``ceil(c sqrt(max(alpha, log2(1/eps)) log2(1/eps)))``, at least one.
    """
    if not (0 <= delta <= 1):
        raise ValueError("delta must lie in [0, 1]")
    ell = _log2_inv(cost.eps)
    return max(1, math.ceil(c * math.sqrt(max(cost.alpha, ell) * ell)))


def cost_expectation(cost, eps, fail_prob, c=1.0):
    """``(c_rho + c_L + c_O1 + c_O2) (alpha / eps) ln(1 / fail_prob)``."""
    if not (0 < fail_prob < 1):
        raise ValueError("fail_prob must lie in (0, 1)")
    if not eps > 0:
        raise ValueError("eps must be positive")
    circuit = cost.c_rho + cost.c_L + cost.c_O1 + cost.c_O2
    return c * circuit * (cost.alpha / eps) * math.log(1.0 / fail_prob)


def cost_total(cost, T, norm_L, eps):
    """``T ||L|| eps^(-1.25)`` times ``sqrt(max(alpha, l) l)``, ``l = log2(1/eps)``."""
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if T < 0 or norm_L < 0:
        raise ValueError("T and norm_L must be non-negative")
    ell = _log2_inv(eps)
    return T * norm_L * eps ** -1.25 * math.sqrt(max(cost.alpha, ell) * ell)
