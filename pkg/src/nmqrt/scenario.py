"""Scenario files: a single JSON document describing one experiment.

Matrices use the ``{"dim": d, "re": [...], "im": [...]}`` row-major schema.
See ``docs/scenario_format.md`` for the full field list.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bath import BathSpectrum, CoupledSystem, ExplicitBath, spectrum_from_explicit
from .operators import (
    DimensionError,
    InvariantError,
    check_density,
    check_hermitian,
    matrix_from_json,
    matrix_to_json,
)
from .propagation import PropagationConfig

SCHEMA = "nmqrt-scenario/1"
FIXTURES = {
    "a": "a_slow_mode.json",
    "b": "b_spread_modes.json",
    "c": "c_two_qubits.json",
}


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    system: CoupledSystem
    rho0: np.ndarray
    O1: np.ndarray
    O2: np.ndarray
    spectrum: BathSpectrum
    bath: ExplicitBath | None
    lambda_sweep: tuple
    grid: tuple
    propagation: PropagationConfig
    t_ref: float | None
    reference_point: tuple
    onepoint: dict
    estimator: dict
    raw: dict = field(repr=False)

    @property
    def lam(self):
        return self.system.lam

    def with_lambda(self, lam):
        raw = copy.deepcopy(self.raw)
        raw["lambda"] = float(lam)
        return scenario_from_dict(raw)

    def with_steps(self, steps):
        raw = copy.deepcopy(self.raw)
        raw.setdefault("propagation", {})["steps_per_unit_time"] = int(steps)
        return scenario_from_dict(raw)

    def digest(self):
        return hashlib.sha256(canonical_json(self.raw).encode()).hexdigest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _get(d, key, path, default=KeyError):
    if key in d:
        return d[key]
    if default is KeyError:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return default


def _matrix(obj, path, role=None):
    try:
        M = matrix_from_json(obj, path)
        if role == "hermitian":
            check_hermitian(M, path, tol=1e-10)
        elif role == "density":
            check_density(M, path)
    except (InvariantError, DimensionError) as exc:
        raise ScenarioError(path, str(exc).removeprefix(f"{path}: ")) from exc
    return M


def _bath(obj, J, path="bath"):
    if "explicit" in obj:
        e = obj["explicit"]
        p = f"{path}.explicit"
        H_B = _matrix(_get(e, "H_B", p), f"{p}.H_B", "hermitian")
        B = [_matrix(b, f"{p}.B[{i}]", "hermitian") for i, b in enumerate(_get(e, "B", p))]
        rho_B = _matrix(_get(e, "rho_B", p), f"{p}.rho_B", "density")
        try:
            bath = ExplicitBath(H_B, np.array(B), rho_B)
        except (InvariantError, DimensionError) as exc:
            raise ScenarioError(p, str(exc)) from exc
        if bath.num_couplings != J:
            raise ScenarioError(f"{p}.B", f"{bath.num_couplings} bath couplings for {J} system couplings")
        return spectrum_from_explicit(bath), bath
    if "modes" in obj:
        omegas, gs = [], []
        for i, m in enumerate(obj["modes"]):
            p = f"{path}.modes[{i}]"
            omegas.append(float(_get(m, "omega", p)))
            g = _get(m, "g", p)
            if len(g) != J:
                raise ScenarioError(f"{p}.g", f"expected {J} amplitudes, got {len(g)}")
            gs.append([complex(*z) if isinstance(z, (list, tuple)) else complex(z) for z in g])
        try:
            spec = BathSpectrum(np.array(omegas), np.array(gs, dtype=complex).reshape(len(omegas), J))
        except (InvariantError, DimensionError) as exc:
            raise ScenarioError(f"{path}.modes", str(exc)) from exc
        return spec, None
    raise ScenarioError(path, "expected an 'explicit' or 'modes' bath description")


def _grid(obj, path="grid"):
    if obj is None:
        return ()
    if "points" in obj:
        pts = [tuple(map(float, p)) for p in obj["points"]]
    else:
        t1s = [float(t) for t in _get(obj, "t1", path)]
        if "t2" in obj:
            pts = [(a, float(b)) for a in t1s for b in obj["t2"] if float(b) <= a]
        else:
            fr = [float(f) for f in _get(obj, "t2_fractions", path)]
            pts = [(a, f * a) for a in t1s for f in fr]
    for i, (t1, t2) in enumerate(pts):
        if not (0.0 <= t2 <= t1):
            raise ScenarioError(f"{path}[{i}]", f"point ({t1}, {t2}) violates 0 <= t2 <= t1")
    return tuple(pts)


def scenario_from_dict(raw):
    if not isinstance(raw, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    schema = raw.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ScenarioError("schema", f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    name = str(_get(raw, "name", ""))
    sysd = _get(raw, "system", "")
    H_S = _matrix(_get(sysd, "H_S", "system"), "system.H_S", "hermitian")
    S = [_matrix(s, f"system.S[{i}]", "hermitian") for i, s in enumerate(_get(sysd, "S", "system"))]
    if not S:
        raise ScenarioError("system.S", "at least one coupling operator is required")
    rho0 = _matrix(_get(sysd, "rho0", "system"), "system.rho0", "density")
    O1 = _matrix(_get(sysd, "O1", "system"), "system.O1", "hermitian")
    O2 = _matrix(_get(sysd, "O2", "system"), "system.O2", "hermitian")
    d = H_S.shape[0]
    for label, M in [("rho0", rho0), ("O1", O1), ("O2", O2)] + [(f"S[{i}]", s) for i, s in enumerate(S)]:
        if M.shape != (d, d):
            raise ScenarioError(f"system.{label}", f"dimension {M.shape[0]} differs from H_S dimension {d}")
    lam = float(_get(raw, "lambda", "", 1.0))
    if lam < 0:
        raise ScenarioError("lambda", "coupling scale must be non-negative")
    system = CoupledSystem(H_S, np.array(S), lam)
    spectrum, bath = _bath(_get(raw, "bath", ""), len(S))
    if bath is not None and bath.dim * d > 64:
        raise ScenarioError("bath.explicit", f"total dimension {bath.dim * d} exceeds the oracle limit 64")
    sweep = tuple(float(x) for x in raw.get("lambda_sweep", ()))
    if any(x < 0 for x in sweep):
        raise ScenarioError("lambda_sweep", "coupling scales must be non-negative")
    prop = raw.get("propagation", {})
    try:
        cfg = PropagationConfig(**prop)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("propagation", str(exc)) from exc
    t_ref = raw.get("t_ref")
    ref = tuple(float(x) for x in raw.get("reference_point", (1.0, 0.4)))
    if len(ref) != 2 or not (0 <= ref[1] <= ref[0]):
        raise ScenarioError("reference_point", "expected [t1, t2] with 0 <= t2 <= t1")
    onepoint = dict(raw.get("onepoint", {}))
    op_O = _matrix(onepoint["O"], "onepoint.O", "hermitian") if "O" in onepoint else O1
    onepoint = {"O": op_O, "t": float(onepoint.get("t", 1.0))}
    est = dict(raw.get("estimator", {}))
    return Scenario(
        name=name, system=system, rho0=rho0, O1=O1, O2=O2, spectrum=spectrum, bath=bath,
        lambda_sweep=sweep, grid=_grid(raw.get("grid")), propagation=cfg,
        t_ref=None if t_ref is None else float(t_ref), reference_point=ref,
        onepoint=onepoint, estimator=est, raw=copy.deepcopy(raw))


def resolve_path(path_or_name):
    """Path on disk, or the name of a shipped fixture (``a``, ``b``, ``c`` or file stem)."""
    p = Path(path_or_name)
    if p.exists():
        return p
    key = str(path_or_name)
    fname = FIXTURES.get(key)
    if fname is None:
        stems = {Path(f).stem: f for f in FIXTURES.values()}
        fname = stems.get(key)
    if fname is None:
        raise FileNotFoundError(f"no scenario file or shipped fixture named {path_or_name!r}")
    return Path(str(resources.files("nmqrt") / "fixtures" / fname))


def load_scenario(path):
    p = resolve_path(path)
    try:
        raw = json.loads(Path(p).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"parse error at line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_dict(raw)


def load_fixture(key):
    return load_scenario(key)


def dump_scenario(sc, path=None):
    """Canonical JSON text of a scenario; written to ``path`` when given."""
    raw = copy.deepcopy(sc.raw)
    raw.setdefault("schema", SCHEMA)
    text = json.dumps(raw, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def matrix_entry(M):
    """Scenario-file form of a matrix (for building scenarios in code)."""
    return matrix_to_json(M)
