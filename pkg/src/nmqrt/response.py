"""Two-time response function chi(t1, t2).

Three evaluations are provided:

* :func:`chi_closed`, the response with the bath switched off,
* :func:`chi_qrt`, the standard regression theorem with a frozen Markovian
  generator,
* :func:`chi_generalized`, the eleven-term formula accurate to ``O(lam^3)``.

The generalized response is a sum of eleven traces ``sign * tr(O_1 G(tau) Z)``
with ``tau = t1 - t2``, ``rho = rho_S(t2)`` the freely evolved state and
``G`` free conjugation.  Writing ``M_X`` for the interaction-picture Duhamel
map of a correction ``L_X`` (``M_X = Phi_X - I`` with
``dPhi_X/ds = G(-s) L_X(s) G(s) Phi_X``) the table is

====  =====  ===============================
term  sign   Z
====  =====  ===============================
1     +i     [rho, O_2]
2     +i     M_K(tau) [rho, O_2]
3     +i     [G(t2) M_K(t2) rho_S(0), O_2]
4     +i     M_A [rho, O_2]
5     +i     [M_A rho, O_2]
6     -i     [rho, M_A^dag O_2]
7     -1     M_B {rho, O_2}
8     +1     {M_B rho, O_2}
9     -1     {rho, M_B^dag O_2}
10    +i     [M_H rho, O_2]
11    -i     [rho, M_H^dag O_2]
====  =====  ===============================

``K`` is the correction of the time-local generator restarted at zero.
``L_A``, ``L_B`` and ``L_H = -i[Lambda(s), .]`` are evaluated at
``s in [0, tau]`` with coefficient horizon ``t2``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .bath import correlation_time
from .generators import NODES_PER_UNIT_TIME, BasisTensors, GeneratorBundle
from .operators import (
    DimensionError,
    InvariantError,
    SuperOperator,
    anticommutator,
    check_density,
    check_hermitian,
    commutator,
    dag,
    unvec,
    vec,
)
from .propagation import (
    DEFAULT_CONFIG,
    FreeFrame,
    PropagationError,
    TimeDependentGenerator,
    _integrate,
    num_steps,
)

TERM_LABELS = tuple(f"term_{i}" for i in range(1, 12))
TERM_SIGNS = (1j, 1j, 1j, 1j, 1j, -1j, -1.0, 1.0, -1.0, 1j, -1j)
THREADS_ENV = "QRT_THREADS"


@dataclass(frozen=True, eq=False)
class ResponseRequest:
    sys: object
    spectrum: object
    rho0: np.ndarray
    O1: np.ndarray
    O2: np.ndarray
    grid: tuple = ()
    cfg: object = DEFAULT_CONFIG
    basis: np.ndarray | None = None
    t_ref: float | None = None
    markov_generator: SuperOperator | None = None
    nodes_per_unit: int = NODES_PER_UNIT_TIME

    def __post_init__(self):
        d = self.sys.dim
        rho0 = check_density(self.rho0, "rho0")
        O1 = check_hermitian(self.O1, "O1", tol=1e-10)
        O2 = check_hermitian(self.O2, "O2", tol=1e-10)
        for name, M in (("rho0", rho0), ("O1", O1), ("O2", O2)):
            if M.shape != (d, d):
                raise DimensionError(f"{name} has shape {M.shape}, system dimension is {d}")
        grid = tuple((float(a), float(b)) for a, b in self.grid)
        for t1, t2 in grid:
            if not (0.0 <= t2 <= t1):
                raise InvariantError(f"grid point ({t1}, {t2}) violates 0 <= t2 <= t1")
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "O1", O1)
        object.__setattr__(self, "O2", O2)
        object.__setattr__(self, "grid", grid)


@dataclass
class ResponsePoint:
    t1: float
    t2: float
    chi_total: float
    chi_closed: float
    chi_qrt: float
    terms: np.ndarray  # signed contributions, complex, length 11
    im_residue: float


@dataclass
class ResponseResult:
    points: list = field(default_factory=list)
    t_ref: float | None = None

    def __len__(self):
        return len(self.points)

    def column(self, name):
        return np.array([getattr(p, name) for p in self.points])

    @property
    def terms(self):
        return np.array([p.terms for p in self.points]).reshape(len(self.points), 11)


class ResponseEngine:
    """Evaluates the three response functions for one request.

    The generator bundle and the eigenbasis of ``H_S`` are computed once and
    shared read-only by all grid points.
    """

    def __init__(self, req):
        self.req = req
        self.bundle = GeneratorBundle(req.sys, req.spectrum, req.basis, req.nodes_per_unit)
        self.frame = FreeFrame(req.sys.H_S)
        # basis superoperators rotated into the H_S eigenframe
        self.etensors = BasisTensors(self.bundle.basis, self.frame.Wsup)
        self.d = req.sys.dim
        self.cfg = req.cfg
        horizon = max([1.0] + [t1 for t1, _ in req.grid])
        self.t_ref = req.t_ref if req.t_ref is not None else correlation_time(req.spectrum, horizon)
        self._markov = req.markov_generator
        # fastest oscillation in any coefficient function
        om = np.abs(req.spectrum.omegas)
        self._rate = self.frame.max_gap + (float(om.max()) if om.size else 0.0)

    # helpers ----------------------------------------------------------------

    def rho_free(self, t):
        U = self.frame.W @ np.diag(np.exp(-1j * self.frame.E * t)) @ dag(self.frame.W)
        return U @ self.req.rho0 @ dag(U)

    def _U(self, t):
        return (self.frame.W * np.exp(-1j * self.frame.E * t)) @ dag(self.frame.W)

    def _to_eig(self, X):
        return dag(self.frame.W) @ X @ self.frame.W

    def _from_eig(self, X):
        return self.frame.W @ X @ dag(self.frame.W)

    def _bound(self, horizon):
        return self._rate + self.bundle.norm_bound(horizon)

    def markov_generator(self):
        if self._markov is None:
            self._markov = self.bundle.markov_generator(self.t_ref)
        return self._markov

    def _stack_generator(self, maps, horizon, reverse_from=None):
        """Interaction-picture generator for ``s -> stack of eigenframe maps``.

        With ``reverse_from = tau`` the maps and phases are evaluated at
        ``tau - s`` (used for backward adjoint integration).
        """
        fr = self.frame

        def ev(s):
            u = s if reverse_from is None else reverse_from - s
            ph = fr.phases(u)
            return np.asarray(maps(u)) * (ph.conj()[:, None] * ph[None, :])

        return TimeDependentGenerator(ev, self._bound(horizon), self.d)

    def _propagate(self, gen, vectors, t):
        """``(Phi(t) - I) v`` for each column stack; vectors are eigenbasis operators."""
        Y0 = np.array([[vec(X) for X in group] for group in vectors])  # (k, m, d^2)
        Y0 = np.swapaxes(Y0, 1, 2)
        if t == 0:
            return np.zeros_like(Y0)
        n = num_steps(self.cfg, gen.norm_bound, t)
        return _integrate(gen, Y0, 0.0, t, n, self.cfg.scheme) - Y0

    def _K_gen(self, horizon):
        return self._stack_generator(lambda s: (self.bundle.K_matrix(s, self.etensors),), horizon)

    def _response_gen(self, t2, horizon):
        return self._stack_generator(
            lambda s: self.bundle.response_maps(s, t2, self.etensors), max(horizon, t2))

    def _response_adj_gen(self, t2, tau):
        """Backward generator ``s -> G(-u) L(u)^dag G(u)`` with ``u = tau - s``."""
        return self._stack_generator(
            lambda u: self.bundle.response_adjoint_maps(u, t2, self.etensors),
            max(tau, t2), reverse_from=tau)

    # response functions -----------------------------------------------------

    def closed(self, t1, t2):
        O1, O2 = self.req.O1, self.req.O2
        tau = t1 - t2
        rho = self.rho_free(t2)
        U = self._U(tau)
        return float(np.real(1j * np.trace(O1 @ U @ commutator(rho, O2) @ dag(U))))

    def qrt(self, t1, t2, markov_generator=None):
        L = markov_generator if markov_generator is not None else self.markov_generator()
        L = L.matrix if isinstance(L, SuperOperator) else np.asarray(L)
        d = self.d
        r = unvec(expm(t2 * L) @ vec(self.req.rho0), d)
        Z = unvec(expm((t1 - t2) * L) @ vec(commutator(self.req.O2, r)), d)
        return float(np.real(-1j * np.trace(self.req.O1 @ Z)))

    def generalized(self, t1, t2):
        """Returns ``(chi_total, signed_terms, im_residue)``."""
        if not (0.0 <= t2 <= t1):
            raise InvariantError(f"grid point ({t1}, {t2}) violates 0 <= t2 <= t1")
        O1, O2, rho0 = self.req.O1, self.req.O2, self.req.rho0
        tau = t1 - t2
        rho = self.rho_free(t2)
        U = self._U(tau)
        O1h = dag(U) @ O1 @ U  # tr(O1 G(tau) Z) = tr(O1h Z)
        cr = commutator(rho, O2)
        ar = anticommutator(rho, O2)
        E = self._to_eig
        F = self._from_eig
        d = self.d

        try:
            label = "term_2"
            (mk_tau,) = self._propagate(self._K_gen(tau), [[E(cr)]], tau)
            label = "term_3"
            (mk_t2,) = self._propagate(self._K_gen(t2), [[E(rho0)]], t2)
            label = "terms_4_to_11"
            gen = self._response_gen(t2, tau)
            # the Lamb-shift slot repeats rho to keep the stack rectangular
            mA, mB, mH = self._propagate(
                gen, [[E(cr), E(rho)], [E(ar), E(rho)], [E(rho), E(rho)]], tau)
            label = "adjoint_terms"
            adj_gen = self._response_adj_gen(t2, tau)
            adj = self._propagate(adj_gen, [[E(O2)], [E(O2)], [E(O2)]], tau)
        except PropagationError as exc:
            raise PropagationError(f"{label}: {exc}") from exc

        op = lambda v: F(unvec(v, d))
        MK_cr = op(mk_tau[:, 0])
        MK_rho0 = self._U(t2) @ op(mk_t2[:, 0]) @ dag(self._U(t2))
        MA_cr, MA_rho = op(mA[:, 0]), op(mA[:, 1])
        MB_ar, MB_rho = op(mB[:, 0]), op(mB[:, 1])
        MH_rho = op(mH[:, 0])
        MA_O2, MB_O2, MH_O2 = (op(a[:, 0]) for a in adj)

        tr = lambda Z: np.trace(O1h @ Z)
        raw = (
            tr(cr),
            tr(MK_cr),
            tr(commutator(MK_rho0, O2)),
            tr(MA_cr),
            tr(commutator(MA_rho, O2)),
            tr(commutator(rho, MA_O2)),
            tr(MB_ar),
            tr(anticommutator(MB_rho, O2)),
            tr(anticommutator(rho, MB_O2)),
            tr(commutator(MH_rho, O2)),
            tr(commutator(rho, MH_O2)),
        )
        terms = np.array([s * v for s, v in zip(TERM_SIGNS, raw)])
        total = terms.sum()
        return float(total.real), terms, float(total.imag)

    def term6_trace_cycled(self, t1, t2):
        """Term 6 as ``-i tr(O_2 M_A([O1h, rho]))`` (forward map only)."""
        tau = t1 - t2
        rho = self.rho_free(t2)
        U = self._U(tau)
        O1h = dag(U) @ self.req.O1 @ U
        X = self._to_eig(commutator(O1h, rho))
        gen = self._stack_generator(
            lambda s: self.bundle.response_maps(s, t2, self.etensors)[:1], max(tau, t2))
        (m,) = self._propagate(gen, [[X]], tau)
        return -1j * np.trace(self.req.O2 @ self._from_eig(unvec(m[:, 0], self.d)))

    def point(self, t1, t2):
        chi, terms, im = self.generalized(t1, t2)
        return ResponsePoint(t1, t2, chi, self.closed(t1, t2), self.qrt(t1, t2), terms, im)


def _engine(req):
    return ResponseEngine(req)


def chi_closed(req, t1, t2):
    return _engine(req).closed(t1, t2)


def chi_qrt(req, t1, t2, markov_generator=None):
    """Standard regression theorem with a frozen generator.

    Defaults to ``L_0 + K(t_ref)`` with ``t_ref`` the bath correlation time.
    """
    return _engine(req).qrt(t1, t2, markov_generator)


def chi_generalized(req, t1, t2):
    """``(chi, terms)`` with the eleven signed contributions."""
    chi, terms, _ = _engine(req).generalized(t1, t2)
    return chi, terms


def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sweep(req, threads=None, engine=None):
    """All three response functions on every grid point of ``req``."""
    eng = engine or ResponseEngine(req)
    eng.markov_generator()  # build shared state before any worker starts
    n = _threads(threads)
    if n == 1 or len(req.grid) < 2:
        pts = [eng.point(t1, t2) for t1, t2 in req.grid]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            pts = list(pool.map(lambda g: eng.point(*g), req.grid))
    return ResponseResult(pts, eng.t_ref)
