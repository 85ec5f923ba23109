"""Experiments driven by a :class:`~nmqrt.scenario.Scenario`.

Each function returns plain Python data (lists of row dicts or report
dicts) so that the CLI, the acceptance suite and the demos share them.
"""
from __future__ import annotations

import numpy as np

from .bath import CoupledSystem
from .estimator import simulate_estimator
from .generators import GeneratorBundle
from .oracle import chi_exact_kubo, onepoint_exact
from .operators import SuperOperator, gks_superop, hamiltonian_superop, matrix_from_json
from .propagation import (
    PropagationConfig,
    TimeDependentGenerator,
    duhamel_diff,
    free_propagate,
    time_ordered_propagate,
)
from .response import ResponseEngine, ResponseRequest, sweep


def fit_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def request(sc, grid=None, lam=None, cfg=None):
    sys = sc.system if lam is None else sc.system.with_lambda(lam)
    return ResponseRequest(sys, sc.spectrum, sc.rho0, sc.O1, sc.O2,
                           sc.grid if grid is None else grid,
                           cfg or sc.propagation, t_ref=sc.t_ref)


def response_rows(sc, threads=None, cfg=None):
    req = request(sc, cfg=cfg)
    res = sweep(req, threads=threads)
    rows = []
    for p in res.points:
        row = {"t1": p.t1, "t2": p.t2, "chi_total": p.chi_total,
               "chi_closed": p.chi_closed, "chi_qrt": p.chi_qrt}
        for i, z in enumerate(p.terms, start=1):
            row[f"term_{i}_re"] = float(z.real)
            row[f"term_{i}_im"] = float(z.imag)
        row["im_residue"] = p.im_residue
        rows.append(row)
    return rows, res


def _require_bath(sc):
    if sc.bath is None:
        raise ValueError(f"scenario {sc.name!r} has no explicit bath; the exact oracle needs one")
    return sc.bath


def tl_generator_correction(bundle, horizon):
    """``K(s)`` of the time-local generator as a :class:`TimeDependentGenerator`."""
    om = np.abs(bundle.spectrum.omegas)
    rate = (float(om.max()) if om.size else 0.0) + bundle.norm_bound(horizon)
    return TimeDependentGenerator(lambda s: bundle.K(s), rate, bundle.dim)


def onepoint_tl(bundle, rho0, O, t, cfg=None):
    """``tr(O T exp(int_0^t L_0 + K(s) ds) rho0)``."""
    H_S = bundle.sys.H_S
    rho_t = free_propagate(H_S, rho0, t)
    if t > 0:
        rho_t = rho_t + duhamel_diff(tl_generator_correction(bundle, t), t, rho0, cfg, H_S)
    return float(np.real(np.trace(O @ rho_t)))


def onepoint_check(sc, lambdas=None, t=None, cfg=None):
    """Error of the time-local one-point evolution against the exact oracle."""
    bath = _require_bath(sc)
    lambdas = tuple(lambdas or sc.lambda_sweep or (sc.lam,))
    t = sc.onepoint["t"] if t is None else t
    O = sc.onepoint["O"]
    rows = []
    for lam in lambdas:
        sys = sc.system.with_lambda(lam)
        b = GeneratorBundle(sys, sc.spectrum)
        tl = onepoint_tl(b, sc.rho0, O, t, cfg or sc.propagation)
        ex = onepoint_exact(sys, bath, sc.rho0, O, t)
        rows.append({"lambda": lam, "t": t, "tl": tl, "exact": ex, "error": abs(tl - ex)})
    pos = [r for r in rows if r["lambda"] > 0]
    slope = fit_slope([r["lambda"] for r in pos], [r["error"] for r in pos]) if len(pos) > 1 else None
    return {"rows": rows, "slope": slope}


def sweep_lambda(sc, lambdas=None, point=None, cfg=None):
    """Errors of the generalized, standard and one-point predictions versus ``lam``."""
    bath = _require_bath(sc)
    lambdas = tuple(lambdas or sc.lambda_sweep)
    t1, t2 = point or sc.reference_point
    rows = []
    for lam in lambdas:
        req = request(sc, grid=((t1, t2),), lam=lam, cfg=cfg)
        eng = ResponseEngine(req)
        chi, terms, im = eng.generalized(t1, t2)
        q = eng.qrt(t1, t2)
        ex = chi_exact_kubo(req.sys, bath, sc.rho0, sc.O1, sc.O2, t1, t2)
        tl = onepoint_tl(eng.bundle, sc.rho0, sc.onepoint["O"], sc.onepoint["t"], req.cfg)
        ex1 = onepoint_exact(req.sys, bath, sc.rho0, sc.onepoint["O"], sc.onepoint["t"])
        rows.append({"lambda": lam, "t1": t1, "t2": t2, "chi_exact": ex, "chi_generalized": chi,
                     "chi_qrt": q, "err_generalized": abs(chi - ex), "err_qrt": abs(q - ex),
                     "err_onepoint": abs(tl - ex1), "im_residue": im, "t_ref": eng.t_ref})
    pos = [r for r in rows if r["lambda"] > 0]
    slopes = {}
    if len(pos) > 1:
        lam = [r["lambda"] for r in pos]
        for key in ("err_generalized", "err_qrt", "err_onepoint"):
            slopes[key] = fit_slope(lam, [r[key] for r in pos])
    return {"rows": rows, "slopes": slopes}


def driven_qubit_generator(amp=0.8, nu=1.7, gamma=0.3):
    """Smooth test generator: driven, damped qubit ``L(t)`` on 2x2 operators."""
    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    basis = np.array([sm])
    damp = gks_superop(np.zeros((2, 2)), np.array([[gamma / 2]]), basis).matrix
    H0 = hamiltonian_superop(0.5 * sz).matrix
    Hx = hamiltonian_superop(sx).matrix
    norm = np.linalg.norm(H0, 2) + amp * np.linalg.norm(Hx, 2) + np.linalg.norm(damp, 2)
    return TimeDependentGenerator(lambda t: H0 + amp * np.cos(nu * t) * Hx + damp, norm, 2)


def rk4_order(steps=(8, 16, 32, 64), t=2.0, reference_steps=4096):
    """Fitted global-error order of fixed-step RK4 on :func:`driven_qubit_generator`."""
    gen = driven_qubit_generator()
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    ref = time_ordered_propagate(gen, rho, t, steps=reference_steps)
    errs = [float(np.linalg.norm(time_ordered_propagate(gen, rho, t, steps=n) - ref)) for n in steps]
    h = [t / n for n in steps]
    return {"steps": list(steps), "errors": errs, "order": fit_slope(h, errs)}


def converge(sc, steps=(10, 20, 40, 80), threads=None):
    """Convergence report: RK4 order, step refinement of chi and quadrature refinement."""
    rk4 = rk4_order()
    t1, t2 = sc.reference_point
    vals = []
    for n in steps:
        cfg = PropagationConfig(sc.propagation.scheme, n, sc.propagation.rtol)
        eng = ResponseEngine(request(sc, grid=((t1, t2),), cfg=cfg))
        vals.append(eng.generalized(t1, t2)[0])
    diffs = [abs(a - vals[-1]) for a in vals[:-1]]
    quad = []
    for npu in (8, 16, 32, 64):
        b = GeneratorBundle(sc.system, sc.spectrum, nodes_per_unit=npu)
        ex = GeneratorBundle(sc.system, sc.spectrum, quadrature="exact")
        quad.append({"nodes_per_unit": npu,
                     "error": float(np.abs(b.D(0.3, t2 or 1.0) - ex.D(0.3, t2 or 1.0)).max())})
    return {
        "rk4": rk4,
        "chi_step_refinement": {"point": [t1, t2], "steps_per_unit_time": list(steps),
                                "chi": vals, "diff_to_finest": diffs,
                                "order": fit_slope([1.0 / n for n in steps[:-1]], diffs)},
        "quadrature": quad,
    }


def estimator_inputs(sc):
    """``(O1, O2, rho, L, t)`` for the estimator: the frozen time-local generator."""
    est = sc.estimator
    rho = matrix_from_json(est["rho"], "estimator.rho") if "rho" in est else sc.rho0
    bundle = GeneratorBundle(sc.system, sc.spectrum)
    plus, _ = bundle.cptp_pieces(float(est.get("t_gen", 1.0)))
    return sc.O1, sc.O2, rho, plus, float(est.get("t", 1.0))


def estimate(sc, seed=0, eps=None):
    est = sc.estimator
    O1, O2, rho, L, t = estimator_inputs(sc)
    _, diag = simulate_estimator(
        O1, O2, rho, L, t, float(eps or est.get("eps", 1e-2)), seed,
        variant=est.get("variant", "anticommutator"), c0=float(est.get("c0", 0.1)),
        c1=float(est.get("c1", 0.5)), threshold=float(est.get("threshold", 0.5)))
    diag.pop("xi", None)
    return diag


__all__ = [
    "fit_slope", "request", "response_rows", "onepoint_tl", "onepoint_check", "sweep_lambda",
    "driven_qubit_generator", "rk4_order", "converge", "estimator_inputs", "estimate",
    "CoupledSystem", "SuperOperator",
]
