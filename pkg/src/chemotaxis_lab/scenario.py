"""Scenario documents: JSON parsing, validation, serialisation and presets."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, fields, replace
from typing import Any

import numpy as np

from . import analysis
from .errors import ChemotaxisLabError, ParseError, ValidationError
from .grid import Grid
from .integrator import SimConfig, SimState
from .params import Equilibrium, Params, Regime

REFERENCES = ("auto", "coexistence", "semitrivial", "none")
MEASURE_RTOL = 1e-12


@dataclass(frozen=True)
class Perturbation:
    shape: str = "cosine"  # "cosine" | "random"
    amplitude: float = 0.1
    modes: tuple[int, ...] = (1,)


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "equilibrium"  # "equilibrium" | "constant" | "arrays"
    which: str = "auto"
    values: tuple[float, float, float] | None = None
    arrays: tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]] | None = None
    perturbation: Perturbation | None = Perturbation()


@dataclass(frozen=True)
class BoundednessSpec:
    dim: int
    p_exp: float | None = None
    C_p: float | None = None


@dataclass(frozen=True)
class AnalysisSpec:
    regime: bool = True
    boundedness: BoundednessSpec | None = None
    stability: str | None = None
    require: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    params: Params
    grid: Grid
    sim: SimConfig = SimConfig()
    initial: InitialSpec = InitialSpec()
    analysis: AnalysisSpec = AnalysisSpec()
    reference: str = "auto"
    simulate: bool = True
    delta: float | None = None
    seed: int | None = None


# --------------------------------------------------------------------------- parsing


def _take(doc: dict, path: str, allowed: set[str]) -> dict:
    if not isinstance(doc, dict):
        raise ValidationError("must be an object", path or None)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ValidationError("unknown key", where)
    return doc


def _number(value: Any, path: str, *, positive=False, nonneg=False, integer=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError("must be a number", path)
    if not math.isfinite(value):
        raise ValidationError("must be finite", path)
    if integer and int(value) != value:
        raise ValidationError("must be an integer", path)
    if positive and not value > 0:
        raise ValidationError("must be > 0", path)
    if nonneg and value < 0:
        raise ValidationError("must be >= 0", path)
    return int(value) if integer else float(value)


def _per_axis(value: Any, dim: int, path: str, **kw) -> tuple:
    items = value if isinstance(value, list) else [value] * dim
    if len(items) != dim:
        raise ValidationError(f"needs {dim} entries", path)
    return tuple(_number(x, f"{path}[{i}]", **kw) for i, x in enumerate(items))


def _parse_grid(doc: dict) -> Grid:
    _take(doc, "grid", {"dim", "n", "L"})
    dim = _number(doc.get("dim", 1), "grid.dim", integer=True)
    if dim not in (1, 2):
        raise ValidationError("must be 1 or 2", "grid.dim")
    if "n" not in doc:
        raise ValidationError("missing", "grid.n")
    shape = _per_axis(doc["n"], dim, "grid.n", integer=True)
    if min(shape) < 4:
        raise ValidationError("need at least 4 cells per axis", "grid.n")
    lengths = _per_axis(doc.get("L", 1.0), dim, "grid.L", positive=True)
    return Grid(shape, lengths)


def _parse_sim(doc: dict) -> SimConfig:
    names = {f.name for f in fields(SimConfig)}
    _take(doc, "sim", names)
    kwargs = {}
    for key, value in doc.items():
        kwargs[key] = _number(value, f"sim.{key}", integer=(key == "record_every"))
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ValidationError(str(exc), "sim") from None


def _parse_perturbation(doc: Any, dim: int) -> Perturbation | None:
    if doc is None:
        return None
    _take(doc, "initial.perturbation", {"shape", "amplitude", "modes"})
    shape = doc.get("shape", "cosine")
    if shape not in ("cosine", "random"):
        raise ValidationError("must be 'cosine' or 'random'", "initial.perturbation.shape")
    amp = _number(doc.get("amplitude", 0.1), "initial.perturbation.amplitude", nonneg=True)
    if amp >= 1:
        # relative amplitude; >= 1 could make densities negative
        raise ValidationError("must be < 1", "initial.perturbation.amplitude")
    modes = _per_axis(doc.get("modes", 1), dim, "initial.perturbation.modes", integer=True, nonneg=True)
    return Perturbation(shape, amp, modes)


def _parse_initial(doc: dict, grid: Grid) -> InitialSpec:
    _take(doc, "initial", {"kind", "which", "u", "v", "w", "perturbation"})
    kind = doc.get("kind", "equilibrium")
    pert = _parse_perturbation(doc.get("perturbation", {}), grid.dim) if "perturbation" in doc \
        else (Perturbation(modes=(1,) * grid.dim) if kind != "arrays" else None)
    if kind == "equilibrium":
        if any(k in doc for k in ("u", "v", "w")):
            raise ValidationError("equilibrium initial data takes no field values", "initial")
        which = doc.get("which", "auto")
        if which not in ("auto", "coexistence", "semitrivial"):
            raise ValidationError("must be auto, coexistence or semitrivial", "initial.which")
        return InitialSpec(kind, which, None, None, pert)
    if kind == "constant":
        vals = tuple(_number(doc.get(k), f"initial.{k}", nonneg=True) for k in ("u", "v", "w"))
        return InitialSpec(kind, "auto", vals, None, pert)
    if kind == "arrays":
        arrays = []
        for k in ("u", "v", "w"):
            try:
                arr = np.asarray(doc[k], dtype=float)
            except KeyError:
                raise ValidationError("missing", f"initial.{k}") from None
            except (TypeError, ValueError):
                raise ValidationError("must be a numeric array", f"initial.{k}") from None
            if arr.size != grid.size:
                raise ValidationError(f"needs {grid.size} values", f"initial.{k}")
            if not np.isfinite(arr).all() or (arr < 0).any():
                raise ValidationError("values must be finite and nonnegative", f"initial.{k}")
            arrays.append(tuple(float(x) for x in arr.ravel()))
        return InitialSpec(kind, "auto", None, tuple(arrays), pert)
    raise ValidationError("must be equilibrium, constant or arrays", "initial.kind")


def _parse_analysis(doc: dict, dim: int) -> AnalysisSpec:
    _take(doc, "analysis", {"regime", "boundedness", "stability", "require"})
    regime = doc.get("regime", True)
    require = doc.get("require", False)
    for key, val in (("regime", regime), ("require", require)):
        if not isinstance(val, bool):
            raise ValidationError("must be a boolean", f"analysis.{key}")
    bnd = doc.get("boundedness", {})
    bspec = None
    if bnd is not None:
        _take(bnd, "analysis.boundedness", {"dim", "p_exp", "C_p"})
        bdim = _number(bnd.get("dim", dim), "analysis.boundedness.dim", integer=True, positive=True)
        p_exp = bnd.get("p_exp")
        C_p = bnd.get("C_p")
        if p_exp is not None:
            p_exp = _number(p_exp, "analysis.boundedness.p_exp", positive=True)
            if bdim >= 3 and not p_exp > bdim:
                raise ValidationError("must exceed dim", "analysis.boundedness.p_exp")
        if C_p is not None:
            C_p = _number(C_p, "analysis.boundedness.C_p", positive=True)
        bspec = BoundednessSpec(bdim, p_exp, C_p)
    stab = doc.get("stability")
    if stab is not None:
        _take(stab, "analysis.stability", {"case"})
        stab = stab.get("case")
        if stab not in analysis.CASES:
            raise ValidationError(f"must be one of {analysis.CASES}", "analysis.stability.case")
    return AnalysisSpec(regime, bspec, stab, require)


def scenario_from_dict(doc: dict) -> Scenario:
    _take(doc, "", {
        "name", "params", "grid", "sim", "initial", "analysis",
        "reference", "simulate", "delta", "seed",
    })
    if "params" not in doc:
        raise ValidationError("missing", "params")
    if not isinstance(doc["params"], dict):
        raise ValidationError("must be an object", "params")
    params = Params.from_dict(doc["params"]).validate()
    grid = _parse_grid(doc.get("grid", {"dim": 1, "n": 128, "L": params.omega_measure}))
    if abs(grid.measure - params.omega_measure) > MEASURE_RTOL * params.omega_measure:
        raise ValidationError(
            f"grid measure {grid.measure!r} != omega_measure {params.omega_measure!r}",
            "grid.L",
        )
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ValidationError("must be a string", "name")
    reference = doc.get("reference", "auto")
    if reference not in REFERENCES:
        raise ValidationError(f"must be one of {REFERENCES}", "reference")
    simulate = doc.get("simulate", True)
    if not isinstance(simulate, bool):
        raise ValidationError("must be a boolean", "simulate")
    delta = doc.get("delta")
    if delta is not None:
        delta = _number(delta, "delta", positive=True)
    seed = doc.get("seed")
    if seed is not None:
        seed = _number(seed, "seed", integer=True, nonneg=True)
    return Scenario(
        name=name,
        params=params,
        grid=grid,
        sim=_parse_sim(doc.get("sim", {})),
        initial=_parse_initial(doc.get("initial", {}), grid),
        analysis=_parse_analysis(doc.get("analysis", {}), grid.dim),
        reference=reference,
        simulate=simulate,
        delta=delta,
        seed=seed,
    )


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


def scenario_to_dict(s: Scenario) -> dict:
    init: dict[str, Any] = {"kind": s.initial.kind}
    if s.initial.kind == "equilibrium":
        init["which"] = s.initial.which
    elif s.initial.kind == "constant":
        init.update(zip(("u", "v", "w"), s.initial.values))
    else:
        init.update(zip(("u", "v", "w"), (list(a) for a in s.initial.arrays)))
    pert = s.initial.perturbation
    init["perturbation"] = None if pert is None else {
        "shape": pert.shape, "amplitude": pert.amplitude, "modes": list(pert.modes),
    }
    a = s.analysis
    return {
        "name": s.name,
        "params": s.params.to_dict(),
        "grid": {"dim": s.grid.dim, "n": list(s.grid.shape), "L": list(s.grid.lengths)},
        "sim": {f.name: getattr(s.sim, f.name) for f in fields(SimConfig)},
        "initial": init,
        "analysis": {
            "regime": a.regime,
            "boundedness": None if a.boundedness is None else {
                "dim": a.boundedness.dim, "p_exp": a.boundedness.p_exp, "C_p": a.boundedness.C_p,
            },
            "stability": None if a.stability is None else {"case": a.stability},
            "require": a.require,
        },
        "reference": s.reference,
        "simulate": s.simulate,
        "delta": s.delta,
        "seed": s.seed,
    }


def serialize(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2)


def set_path(doc: dict, path: str, value: Any) -> dict:
    """Return a deep copy of ``doc`` with the dotted ``path`` set to ``value``."""
    out = copy.deepcopy(doc)
    node = out
    keys = path.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValidationError("path does not address an object", path)
    node[keys[-1]] = value
    return out


# --------------------------------------------------------------------------- resolution


def resolve_reference(s: Scenario) -> Equilibrium | None:
    """Equilibrium used for distances, convergence and Lyapunov values."""
    choice = s.reference
    if choice == "auto":
        if s.analysis.stability == "weak":
            choice = "coexistence"
        elif s.analysis.stability == "asymmetric":
            choice = "semitrivial"
        else:
            regime = analysis.classify_regime(s.params).regime
            choice = {
                Regime.WEAK: "coexistence",
                Regime.STRONGLY_ASYMMETRIC: "semitrivial",
            }.get(regime, "none")
    if choice == "none":
        return None
    try:
        if choice == "coexistence":
            return analysis.coexistence_equilibrium(s.params)
        return analysis.semitrivial_equilibrium(s.params)
    except ChemotaxisLabError as exc:
        raise ValidationError(f"{choice} equilibrium unavailable: {exc}", "reference") from None


def initial_state(s: Scenario, seed: int | None = None) -> SimState:
    g = s.grid
    spec = s.initial
    if spec.kind == "arrays":
        fields_ = [np.asarray(a, dtype=float).reshape(g.shape) for a in spec.arrays]
    else:
        if spec.kind == "constant":
            base = spec.values
        else:
            which = spec.which
            if which == "auto":
                eq = resolve_reference(s)
                if eq is None:
                    raise ValidationError("no reference equilibrium to start from", "initial.which")
            else:
                eq = resolve_reference(replace(s, reference=which))
            base = eq.as_tuple()
        fields_ = [g.constant(c) for c in base]

    pert = spec.perturbation
    if pert is not None and pert.amplitude > 0:
        if pert.shape == "cosine":
            profile = np.ones(g.shape)
            for x, m, L in zip(g.centers, pert.modes, g.lengths):
                profile = profile * np.cos(m * np.pi * x / L)
            fields_ = [f * (1 + pert.amplitude * profile) for f in fields_]
        else:
            rng = np.random.default_rng(seed if seed is not None else s.seed)
            fields_ = [f * (1 + pert.amplitude * rng.uniform(-1, 1, g.shape)) for f in fields_]
    return SimState(g, 0.0, *fields_)


# --------------------------------------------------------------------------- presets

_BASE_PARAMS = dict(
    d1=1.0, d2=1.0, d3=1.0, chi1=0.5, chi2=0.5,
    a0=1.0, a1=1.0, a2=1.0, a3=0.1, a4=0.1,
    b0=1.0, b1=1.0, b2=1.0, b3=0.1, b4=0.1,
    lam=1.0, k=1.0, l=1.0, omega_measure=1.0,
)


def weak_w1_params() -> Params:
    """Weak-competition family with a1 = b2 raised until the stability check passes."""
    p = Params(**_BASE_PARAMS)
    return analysis.escalate_local_competition(p, "weak", start=1.0, step=0.5)


def _doc(name: str, p: Params, **extra) -> dict:
    doc = {
        "name": name,
        "params": p.to_dict(),
        "grid": {"dim": 1, "n": 128, "L": p.omega_measure},
    }
    doc.update(extra)
    return doc


def preset_documents() -> dict[str, dict]:
    w1 = weak_w1_params()
    a1 = Params(**{**_BASE_PARAMS, "a1": 2.0, "a2": 2.0, "b0": 2.0, "b1": 0.5, "b2": 2.0})
    a1_eq = analysis.semitrivial_equilibrium(a1)
    coop = {**_BASE_PARAMS, "a3": -1.0, "a4": -1.0, "b3": -1.0, "b4": -1.0, "a1": 0.5, "b2": 0.5}
    coop_ok = {
        **_BASE_PARAMS, "a2": 0.5, "b1": 0.5, "a3": -0.2, "a4": -0.2, "b3": -0.2, "b4": -0.2,
    }
    blow = {
        **_BASE_PARAMS, "a3": -5.0, "a4": -5.0, "b3": -5.0, "b4": -5.0,
        "a1": 0.1, "b2": 0.1, "chi1": 5.0, "chi2": 5.0,
    }
    return {
        "weak-w1": _doc(
            "weak-w1", w1,
            sim={"dt_init": 0.01, "t_end": 100.0, "record_every": 10, "converge_tol": 1e-6},
            initial={"kind": "equilibrium", "which": "coexistence",
                     "perturbation": {"shape": "cosine", "amplitude": 0.1, "modes": [1]}},
            analysis={"stability": {"case": "weak"}, "require": True},
        ),
        "asym-a1": _doc(
            "asym-a1", a1,
            sim={"dt_init": 0.01, "t_end": 50.0, "record_every": 10, "converge_tol": 1e-8},
            initial={"kind": "constant", "u": 0.5, "v": a1_eq.v, "w": a1_eq.w,
                     "perturbation": {"shape": "cosine", "amplitude": 0.1, "modes": [1]}},
            analysis={"stability": {"case": "asymmetric"}, "require": True},
        ),
        "coop-fail": _doc(
            "coop-fail", Params(**coop),
            sim={"dt_init": 0.01, "t_end": 10.0},
            initial={"kind": "constant", "u": 1.0, "v": 1.0, "w": 1.0},
            analysis={"require": True},
            reference="none",
        ),
        "coop-bounded": _doc(
            "coop-bounded", Params(**coop_ok),
            sim={"dt_init": 0.01, "t_end": 20.0, "record_every": 1},
            initial={"kind": "constant", "u": 0.3, "v": 1.5, "w": 1.0,
                     "perturbation": {"shape": "cosine", "amplitude": 0.5, "modes": [2]}},
            analysis={"require": True},
        ),
        "blowup-guard": _doc(
            "blowup-guard", Params(**blow),
            sim={"dt_init": 0.01, "t_end": 10.0},
            initial={"kind": "constant", "u": 1.0, "v": 1.0, "w": 1.0,
                     "perturbation": {"shape": "cosine", "amplitude": 0.5, "modes": [1]}},
            reference="none",
        ),
    }


PRESET_NAMES = ("weak-w1", "asym-a1", "coop-fail", "coop-bounded", "blowup-guard")


def preset(name: str) -> Scenario:
    docs = preset_documents()
    if name not in docs:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}", "preset")
    return scenario_from_dict(docs[name])
