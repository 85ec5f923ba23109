"""Acceptance suite: ten numbered criteria, each with a tolerance and a
runtime budget.  :func:`run_acceptance` runs them in order and returns one
:class:`CriterionResult` per criterion.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .bath import CoupledSystem, ExplicitBath, gibbs_state
from .estimator import (
    CostModel,
    KrausDifferenceScheme,
    cost_total,
    remainder,
    remainder_bound,
    simulate_estimator,
)
from .generators import GeneratorBundle, hermitian_basis
from .harness import estimator_inputs, fit_slope, onepoint_check, request, rk4_order, sweep_lambda
from .oracle import chi_exact_compact, chi_exact_kubo, q_identity_check
from .propagation import TimeDependentGenerator, time_ordered_propagate
from .response import sweep
from .scenario import load_fixture

TOTAL_BUDGET = 600.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    limit: float | None = None
    metrics: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        budget = f" <= {self.limit:g}s" if self.limit else ""
        return f"[{tag}] criterion {self.number:>2}: {self.title}: {self.detail} ({self.seconds:.2f}s{budget})"

    def to_dict(self):
        return asdict(self)


def _rand_herm(rng, d, scale=1.0):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (A + A.conj().T) / 2


def _rand_density(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = A @ A.conj().T
    return r / np.trace(r).real


def random_instance(rng, d_S, d_B, J, lam):
    """Random stationary bath with zero-mean couplings plus a random system."""
    H_B = _rand_herm(rng, d_B)
    rho_B = gibbs_state(H_B, rng.uniform(0.2, 2.0))
    B = []
    for _ in range(J):
        Bj = _rand_herm(rng, d_B)
        B.append(Bj - np.trace(Bj @ rho_B).real * np.eye(d_B))
    bath = ExplicitBath(H_B, np.array(B), rho_B)
    sys = CoupledSystem(_rand_herm(rng, d_S), np.array([_rand_herm(rng, d_S) for _ in range(J)]), lam)
    return sys, bath


def criterion_1(seed=1, n=50):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d_S, d_B = rng.choice([2, 3]), rng.choice([2, 3])
        sys, bath = random_instance(rng, d_S, d_B, int(rng.integers(1, 3)), rng.uniform(0, 0.3))
        rho0 = _rand_density(rng, d_S)
        O1, O2 = _rand_herm(rng, d_S), _rand_herm(rng, d_S)
        t1, t2 = rng.uniform(0, 2, size=2)
        a = chi_exact_kubo(sys, bath, rho0, O1, O2, t1, t2)
        b = chi_exact_compact(sys, bath, rho0, O1, O2, t1, t2)
        worst = max(worst, abs(a - b))
    ok = worst <= 1e-10
    return ok, f"max |kubo - compact| = {worst:.2e} over {n} instances (tol 1e-10)", {"max_diff": worst}


def criterion_2(seed=2, n=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d = int(rng.choice([2, 3]))
        V = hermitian_basis(d)
        N = len(V)
        D = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        rho = _rand_density(rng, d)
        O = _rand_herm(rng, d)
        res = q_identity_check(D, V, rho, O)
        scale = np.linalg.norm(D) * np.linalg.norm(rho) * np.linalg.norm(O)
        worst = max(worst, res / scale)
    ok = worst <= 1e-10
    return ok, f"max relative residual = {worst:.2e} over {n} instances (tol 1e-10)", {"max_rel": worst}


def criterion_3_and_9():
    sc = load_fixture("a")
    rep = sweep_lambda(sc, lambdas=(0.025, 0.05, 0.1, 0.2), point=(1.0, 0.4))
    sg, sq = rep["slopes"]["err_generalized"], rep["slopes"]["err_qrt"]
    ok3 = 2.6 <= sg <= 3.4 and 1.6 <= sq <= 2.4
    errs = ", ".join(f"{r['lambda']:g}:{r['err_generalized']:.2e}/{r['err_qrt']:.2e}" for r in rep["rows"])
    d3 = f"slope generalized = {sg:.3f} in [2.6, 3.4], slope QRT = {sq:.3f} in [1.6, 2.4]; errors {errs}"

    worst_im, worst_sum, worst_rel, n = 0.0, 0.0, 0.0, 0
    results = {}
    for key in ("a", "b", "c"):
        fx = load_fixture(key)
        res = sweep(request(fx))
        results[key] = res
        scale = 1.0 + np.linalg.norm(fx.O1, 2) * np.linalg.norm(fx.O2, 2)
        for p in res.points:
            n += 1
            worst_im = max(worst_im, abs(p.im_residue))
            worst_rel = max(worst_rel, abs(p.im_residue) / scale)
            worst_sum = max(worst_sum, abs(np.sum(p.terms).real - p.chi_total))
    ok9 = worst_rel <= 1e-8 and worst_sum <= 1e-12
    d9 = (f"{n} grid points: max |Im chi| = {worst_im:.1e} (<= 1e-8 (1+|O1||O2|)), "
          f"max |signed term sum - chi_total| = {worst_sum:.1e} (<= 1e-12)")
    return (ok3, d3, {"slope_generalized": sg, "slope_qrt": sq, "rows": rep["rows"]}), \
        (ok9, d9, {"max_im": worst_im, "max_sum_diff": worst_sum}), results


def criterion_4():
    rep = onepoint_check(load_fixture("a"), lambdas=(0.025, 0.05, 0.1, 0.2), t=1.0)
    s = rep["slope"]
    errs = ", ".join(f"{r['lambda']:g}:{r['error']:.2e}" for r in rep["rows"])
    return 2.6 <= s <= 3.4, f"one-point slope = {s:.3f} in [2.6, 3.4]; errors {errs}", {"slope": s}


def criterion_5(results=None, lam=0.1):
    diffs = {}
    for key in ("a", "b"):
        sc = load_fixture(key).with_lambda(lam)
        res = (results or {}).get(key)
        if res is None or sc.lam != load_fixture(key).lam:
            res = sweep(request(sc))
        diffs[key] = (np.abs(res.column("chi_total") - res.column("chi_qrt")), res.t_ref,
                      [(p.t1, p.t2) for p in res.points])
    da, tra, ga = diffs["a"]
    db, trb, gb = diffs["b"]
    if ga != gb:
        return False, "fixtures (a) and (b) use different grids", {}
    ratios = da / np.maximum(db, 1e-300)
    ok = bool(np.all(db * 3.0 <= da))
    return ok, (f"per-point |gen - qrt| ratio a/b: min {ratios.min():.1f}, median "
                f"{np.median(ratios):.1f} over {len(ratios)} points (need >= 3); max a = {da.max():.2e}, "
                f"max b = {db.max():.2e}; t_ref a = {tra:g}, b = {trb:g}"), \
        {"min_ratio": float(ratios.min()), "max_a": float(da.max()), "max_b": float(db.max())}


def criterion_6(seed=6, n=25):
    rng = np.random.default_rng(seed)
    deltas = (0.1, 0.05, 0.025, 0.0125)
    orders = {k: [] for k in ("second/anticommutator", "second/commutator",
                              "fourth/anticommutator", "fourth/commutator")}
    worst_ratio = 0.0
    for _ in range(n):
        O = _rand_herm(rng, 2)
        O *= rng.uniform(0.2, 1.0) / np.linalg.norm(O, 2)
        rho = _rand_density(rng, 2)
        for order in ("second", "fourth"):
            for kind in ("anticommutator", "commutator"):
                R = []
                for dlt in deltas:
                    sch = KrausDifferenceScheme(order, dlt, delta0=max(deltas))
                    r = remainder(O, rho, sch, kind)
                    worst_ratio = max(worst_ratio, r / remainder_bound(O, sch))
                    R.append(r)
                orders[f"{order}/{kind}"].append(fit_slope(deltas, R))
    ok = worst_ratio <= 1.0
    parts = []
    for k, v in orders.items():
        lo, hi = min(v), max(v)
        target, tol = (3.0, 0.4) if k.startswith("second") else (5.0, 0.5)
        ok = ok and (target - tol <= lo) and (hi <= target + tol)
        parts.append(f"{k} order in [{lo:.2f}, {hi:.2f}]")
    detail = "; ".join(parts) + f"; max remainder/bound = {worst_ratio:.3f} over {n} instances"
    return ok, detail, {"orders": orders, "max_bound_ratio": worst_ratio}


def criterion_7(trials=200, alpha=32.0):
    O1, O2, rho, L, t = estimator_inputs(load_fixture("a"))
    fracs = {}
    ok = True
    for eps in (1e-1, 1e-2, 1e-3):
        hits = 0
        for seed in range(trials):
            est, diag = simulate_estimator(O1, O2, rho, L, t, eps, seed)
            hits += abs(est - diag["truth"]) <= eps
        fracs[eps] = hits / trials
        ok = ok and fracs[eps] >= 0.95
    cm = CostModel(alpha=alpha)
    ratios = {eps: cost_total(cm, 1.0, 1.0, eps) / cost_total(cm, 1.0, 1.0, 10 * eps) for eps in (1e-2, 1e-3)}
    for r in ratios.values():
        ok = ok and 10 ** 1.15 <= r <= 10 ** 1.45
    detail = ("success fraction " + ", ".join(f"eps={e:g}: {f:.3f}" for e, f in fracs.items())
              + " (need >= 0.95); cost ratio exponent "
              + ", ".join(f"eps={e:g}: {np.log10(r):.3f}" for e, r in ratios.items())
              + f" in [1.15, 1.45] (alpha = {alpha:g})")
    return ok, detail, {"fractions": fracs, "cost_log10_ratios": {e: float(np.log10(r)) for e, r in ratios.items()}}


def criterion_8(horizon=2.0, samples=8):
    worst_tr, worst_eig = 0.0, 0.0
    for key in ("a", "b", "c"):
        sc = load_fixture(key)
        b = GeneratorBundle(sc.system, sc.spectrum)
        om = float(np.abs(sc.spectrum.omegas).max())
        for piece in (0, 1):
            def L(s, piece=piece):
                plus, minus = b.cptp_pieces(s)
                return plus.matrix if piece == 0 else b.L0.matrix + minus.matrix
            gen = TimeDependentGenerator(L, np.linalg.norm(b.L0.matrix, 2) + om + b.norm_bound(horizon),
                                         sc.system.dim)
            rho = sc.rho0
            dt = horizon / samples
            for k in range(samples):
                rho = time_ordered_propagate(gen, rho, dt, sc.propagation, t0=k * dt)
                worst_tr = max(worst_tr, abs(np.trace(rho).real - 1.0))
                worst_eig = min(worst_eig, np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    rk = rk4_order()
    ok = worst_tr <= 1e-10 and worst_eig >= -1e-8 and 3.6 <= rk["order"] <= 4.4
    return ok, (f"max |tr - 1| = {worst_tr:.1e}, min eigenvalue = {worst_eig:.1e} across fixtures; "
                f"RK4 order = {rk['order']:.3f} in [3.6, 4.4]"), \
        {"max_trace_err": worst_tr, "min_eig": worst_eig, "rk4_order": rk["order"]}


TITLES = {
    1: "compact formula equals the Kubo definition",
    2: "eight-term identity",
    3: "generalized response error scales as lambda^3",
    4: "time-local one-point error scales as lambda^3",
    5: "generalized formula approaches QRT in the Markov limit",
    6: "finite-difference orders and remainder bounds",
    7: "estimator schedule and cost exponent",
    8: "propagator hygiene",
    9: "reality and term decomposition",
    10: "full suite within budget",
}
LIMITS = {1: 10, 2: 5, 3: 60, 4: 30, 5: 60, 6: 10, 7: 120, 8: 30, 9: 60, 10: TOTAL_BUDGET}


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


def run_acceptance(echo=None):
    """Run all ten criteria; ``echo`` (e.g. ``print``) receives each result line."""
    start = time.perf_counter()
    results = []

    def record(num, ok, detail, metrics, secs):
        r = CriterionResult(num, TITLES[num], bool(ok) and secs <= LIMITS[num], detail, secs,
                            LIMITS[num], metrics)
        if ok and secs > LIMITS[num]:
            r.detail += " [over runtime budget]"
        results.append(r)
        if echo:
            echo(r.line())

    for num, fn in ((1, criterion_1), (2, criterion_2)):
        (ok, det, met), secs = _timed(fn)
        record(num, ok, det, met, secs)
    (c3, c9, sweeps), secs = _timed(criterion_3_and_9)
    record(3, *c3, secs)
    (ok, det, met), secs4 = _timed(criterion_4)
    record(4, ok, det, met, secs4)
    (ok, det, met), secs5 = _timed(criterion_5, sweeps)
    record(5, ok, det, met, secs5)
    for num, fn in ((6, criterion_6), (7, criterion_7), (8, criterion_8)):
        (ok, det, met), s = _timed(fn)
        record(num, ok, det, met, s)
    record(9, *c9, secs)
    results.sort(key=lambda r: r.number)
    total = time.perf_counter() - start
    all_ok = all(r.passed for r in results)
    record(10, all_ok and total <= TOTAL_BUDGET,
           f"{sum(r.passed for r in results)}/9 criteria passed in {total:.1f}s", {"total_seconds": total},
           total)
    return results
