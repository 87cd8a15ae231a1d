"""Command-line entry point: ``analyze``, ``simulate``, ``sweep`` and ``presets``.

Exit codes: 0 success, 2 validation error, 3 blow-up guard, 4 step underflow,
5 hypothesis failure in a scenario that requires its hypotheses.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, analysis
from .diagnostics import DiagRecord, Recorder, check_decay
from .errors import ChemotaxisLabError, InsufficientData, ParseError, ValidationError
from .integrator import Outcome, SimState, distance_linf, run
from .params import Equilibrium, EquilibriumKind
from .scenario import (
    PRESET_NAMES,
    Scenario,
    initial_state,
    parse_scenario,
    preset,
    preset_documents,
    resolve_reference,
    scenario_from_dict,
    scenario_to_dict,
    set_path,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BLOWUP = 3
EXIT_UNDERFLOW = 4
EXIT_HYPOTHESIS = 5

_OUTCOME_EXIT = {
    Outcome.CONVERGED: EXIT_OK,
    Outcome.REACHED_T_END: EXIT_OK,
    Outcome.BLOW_UP: EXIT_BLOWUP,
    Outcome.STEP_UNDERFLOW: EXIT_UNDERFLOW,
}

DEFAULT_MAX_POINTS = 10_000


@dataclass
class ScenarioResult:
    report: dict[str, Any]
    exit_code: int
    records: list[DiagRecord] = field(default_factory=list)
    initial: SimState | None = None
    final: SimState | None = None


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _equilibrium_dict(eq: Equilibrium) -> dict:
    return {"u": eq.u, "v": eq.v, "w": eq.w, "kind": eq.kind.value}


def _jsonable(x: Any) -> Any:
    """Replace non-finite floats by strings so the report stays strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def mass_bound(s: Scenario, state0: SimState) -> dict | None:
    """L1 bound on ``u + v`` implied by the intraspecific-dominance condition."""
    p = s.params
    neg = analysis.neg
    C3 = max(neg(p.a3), neg(p.b4), (neg(p.a4) + neg(p.b3)) / 2)
    C4 = min(p.a1, p.b2) / p.omega_measure - C3
    if not C4 > 0:
        return None
    g = state0.grid
    m0 = float(np.sum(state0.u + state0.v)) * g.cell_volume
    return {"C3": C3, "C4": C4, "bound": max(m0, max(p.a0, p.b0) / C4)}


def analyze(s: Scenario) -> tuple[dict[str, Any], bool]:
    """Run the requested coefficient analyses. Returns (report section, all required passed)."""
    p = s.params
    out: dict[str, Any] = {}
    ok = True
    if s.analysis.regime:
        rc = analysis.classify_regime(p)
        out["regime"] = {
            "class": rc.regime.value, "r_low": rc.r_low, "r_mid": rc.r_mid, "r_high": rc.r_high,
        }
    eqs: dict[str, Any] = {}
    for name, fn in (
        ("coexistence", analysis.coexistence_equilibrium),
        ("semitrivial", analysis.semitrivial_equilibrium),
    ):
        try:
            eqs[name] = _equilibrium_dict(fn(p))
        except ChemotaxisLabError as exc:
            eqs[name] = {"error": f"{type(exc).__name__}: {exc}"}
    out["equilibria"] = eqs

    if s.analysis.boundedness is not None:
        b = s.analysis.boundedness
        rep = analysis.check_boundedness(p, b.dim, b.p_exp, b.C_p)
        out["boundedness"] = rep.to_dict()
        ok &= rep.overall

    if s.analysis.stability is not None:
        try:
            rep, cert = analysis.check_stability(p, s.analysis.stability)
        except ChemotaxisLabError as exc:
            out["stability"] = {"error": f"{type(exc).__name__}: {exc}"}
            ok = False
        else:
            out["stability"] = {
                "report": rep.to_dict(),
                "certificate": None if cert is None else cert.to_dict(),
            }
            ok &= rep.overall and cert is not None and cert.positive_definite
    return out, ok


def _lyapunov_setup(s: Scenario, eq: Equilibrium | None, report: dict) -> tuple[float | None, float]:
    """Weight ``delta`` of the signal term and weight of the ``v`` entropy term."""
    p = s.params
    v_weight = p.a2 / p.b1
    if eq is None:
        return None, v_weight
    if s.delta is not None:
        return s.delta, v_weight
    cert = report.get("stability", {}).get("certificate")
    case = "weak" if eq.kind is EquilibriumKind.COEXISTENCE else "asymmetric"
    if cert is not None and cert["case"] == case:
        return cert["delta_chosen"], v_weight
    try:
        lo, hi = analysis.delta_interval(p, case)
    except ChemotaxisLabError:
        return None, v_weight
    return 0.5 * (lo + hi), v_weight


def run_scenario(s: Scenario, out_dir: str | Path | None = None, seed: int | None = None) -> ScenarioResult:
    """Execute analyses and (optionally) the simulation; write outputs into ``out_dir``."""
    report: dict[str, Any] = {"scenario": s.name}
    section, ok = analyze(s)
    report.update(section)
    result = ScenarioResult(report, EXIT_OK)

    if s.analysis.require and not ok:
        result.exit_code = EXIT_HYPOTHESIS
        report["simulation"] = None
    elif s.simulate:
        eq = resolve_reference(s)
        state0 = initial_state(s, seed)
        delta, v_weight = _lyapunov_setup(s, eq, report)
        rec = Recorder(eq, delta, v_weight)
        res = run(state0, s.params, s.sim, rec, eq)
        result.records = rec.records
        result.initial, result.final = state0, res.final
        result.exit_code = _OUTCOME_EXIT[res.outcome]

        sim: dict[str, Any] = {
            "outcome": res.outcome.value,
            "t_final": res.final.t,
            "steps": res.steps,
            "rejected_steps": res.rejected,
            "reference": None if eq is None else _equilibrium_dict(eq),
            "delta": delta,
            "v_weight": v_weight,
            "final_linf_distance": None if eq is None else list(distance_linf(res.final, eq)),
            "final_mass": [rec.records[-1].mass_u, rec.records[-1].mass_v],
            "initial_mass": [rec.records[0].mass_u, rec.records[0].mass_v],
        }
        try:
            verdict = check_decay(rec.records)
            sim["decay"] = {
                "monotone": verdict.monotone,
                "epsilon_hat": verdict.epsilon_hat,
                "violations": verdict.violations,
            }
        except InsufficientData as exc:
            sim["decay"] = {"error": str(exc)}
        mb = mass_bound(s, state0)
        if mb is not None:
            peak = max(r.mass_u + r.mass_v for r in rec.records)
            mb.update(max_mass=peak, holds=peak <= 1.05 * mb["bound"])
        sim["mass_bound"] = mb
        report["simulation"] = sim
    else:
        report["simulation"] = None

    report["exit_code"] = result.exit_code
    report["meta"] = {"package_version": __version__}
    if out_dir is not None:
        write_outputs(result, Path(out_dir))
    return result


def write_outputs(result: ScenarioResult, out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(_jsonable(result.report), indent=2) + "\n")
        if result.records:
            with open(out / "series.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(DiagRecord.header())
                for r in result.records:
                    w.writerow(_fmt(x) for x in r.row())
        for label, state in (("initial", result.initial), ("final", result.final)):
            if state is not None:
                write_snapshot(out / f"snapshot_{label}.txt", state)
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc}") from exc


def write_snapshot(path: Path, state: SimState) -> None:
    g = state.grid
    lines = [
        f"# dims {' '.join(str(n) for n in g.shape)}",
        f"# h {' '.join(_fmt(h) for h in g.h)}",
        f"# t {_fmt(state.t)}",
    ]
    for name in ("u", "v", "w"):
        lines.append(f"# field {name}")
        data = getattr(state, name)
        rows = data.reshape(1, -1) if g.dim == 1 else data
        lines.extend(" ".join(_fmt(x) for x in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepAxis:
    paths: tuple[str, ...]
    values: tuple[Any, ...]


@dataclass(frozen=True)
class SweepSpec:
    base: dict
    axes: tuple[SweepAxis, ...] = ()
    max_points: int = DEFAULT_MAX_POINTS
    workers: int = 1

    @property
    def size(self) -> int:
        return math.prod(len(a.values) for a in self.axes)


def parse_sweep(text: str) -> SweepSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("sweep document must be a JSON object")
    unknown = sorted(set(doc) - {"base", "base_preset", "axes", "max_points", "workers"})
    if unknown:
        raise ValidationError("unknown key", unknown[0])
    if ("base" in doc) == ("base_preset" in doc):
        raise ValidationError("give exactly one of base / base_preset", "base")
    if "base_preset" in doc:
        docs = preset_documents()
        if doc["base_preset"] not in docs:
            raise ValidationError("unknown preset", "base_preset")
        base = docs[doc["base_preset"]]
    else:
        base = doc["base"]
    scenario_from_dict(base)  # validate early
    axes = []
    for i, ax in enumerate(doc.get("axes", [])):
        if not isinstance(ax, dict) or set(ax) != {"path", "values"}:
            raise ValidationError("axis needs exactly 'path' and 'values'", f"axes[{i}]")
        paths = ax["path"] if isinstance(ax["path"], list) else [ax["path"]]
        if not paths or not all(isinstance(x, str) for x in paths):
            raise ValidationError("path must be a string or list of strings", f"axes[{i}].path")
        if not isinstance(ax["values"], list) or not ax["values"]:
            raise ValidationError("values must be a non-empty list", f"axes[{i}].values")
        axes.append(SweepAxis(tuple(paths), tuple(ax["values"])))
    spec = SweepSpec(
        base,
        tuple(axes),
        int(doc.get("max_points", DEFAULT_MAX_POINTS)),
        int(doc.get("workers", 1)),
    )
    if spec.size > spec.max_points:
        raise ValidationError(f"{spec.size} points exceed max_points={spec.max_points}", "axes")
    return spec


def _sweep_point(args: tuple[dict, int | None]) -> dict[str, Any]:
    doc, seed = args
    row: dict[str, Any] = {}
    try:
        s = scenario_from_dict(doc)
        res = run_scenario(s, None, seed)
    except (ChemotaxisLabError, ValueError, ArithmeticError) as exc:
        row.update(status="error", exit_code=EXIT_VALIDATION, error=f"{type(exc).__name__}: {exc}")
        return row
    rep = res.report
    row["status"] = "ok"
    row["exit_code"] = res.exit_code
    row["regime"] = rep.get("regime", {}).get("class", "")
    for section in ("boundedness", "stability"):
        sec = rep.get(section)
        if sec is None:
            continue
        conds = sec.get("conditions") or (sec.get("report") or {}).get("conditions") or []
        for c in conds:
            row[f"{section}.{c['id']}"] = c["margin"]
        if "error" in sec:
            row[f"{section}.error"] = sec["error"]
    sim = rep.get("simulation")
    if sim:
        row["outcome"] = sim["outcome"]
        dist = sim["final_linf_distance"]
        row["final_linf_distance"] = max(dist) if dist is not None else ""
    return row


def run_sweep(spec: SweepSpec, out_dir: str | Path | None = None, seed: int | None = None) -> list[dict]:
    """Evaluate every point of the cartesian product; failures are recorded per row."""
    if spec.size > spec.max_points:
        raise ValidationError(f"{spec.size} points exceed max_points={spec.max_points}", "axes")
    combos = list(itertools.product(*(ax.values for ax in spec.axes)))
    jobs = []
    for combo in combos:
        doc = spec.base
        for ax, value in zip(spec.axes, combo):
            for path in ax.paths:
                doc = set_path(doc, path, value)
        jobs.append((doc, seed))

    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]

    axis_cols = ["+".join(ax.paths) for ax in spec.axes]
    rows = []
    for combo, res in zip(combos, results):
        rows.append({**dict(zip(axis_cols, combo)), **res})
    if out_dir is not None:
        write_sweep_csv(rows, axis_cols, Path(out_dir) / "sweep.csv")
    return rows


def write_sweep_csv(rows: list[dict], axis_cols: list[str], path: Path) -> None:
    fixed = ["status", "exit_code", "regime"]
    tail = ["outcome", "final_linf_distance", "error"]
    margins: list[str] = []
    for r in rows:
        for k in r:
            if k not in axis_cols and k not in fixed and k not in tail and k not in margins:
                margins.append(k)
    header = axis_cols + fixed + margins + tail

    def cell(x: Any) -> str:
        if isinstance(x, float):
            return _fmt(x)
        return "" if x is None else str(x)

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(cell(r.get(k, "")) for k in header)


# --------------------------------------------------------------------------- argparse


def _load_scenario(args) -> Scenario:
    if args.preset and args.scenario:
        raise ValidationError("give either --preset or --scenario, not both")
    if args.preset:
        s = preset(args.preset)
    elif args.scenario:
        try:
            text = Path(args.scenario).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {args.scenario}: {exc}") from None
        s = parse_scenario(text)
    else:
        raise ValidationError("need --preset or --scenario")
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    return s


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemotaxis-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--preset", choices=PRESET_NAMES)
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, help="seed for random initial perturbations")

    common(sub.add_parser("analyze", help="coefficient analysis only"))
    common(sub.add_parser("simulate", help="analysis plus time integration"))
    sw = sub.add_parser("sweep", help="cartesian parameter sweep")
    sw.add_argument("--scenario", required=True, help="sweep JSON file")
    sw.add_argument("--out", help="output directory for sweep.csv")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--workers", type=int, help="override the worker count")
    pr = sub.add_parser("presets", help="list presets or print one")
    pr.add_argument("--show", choices=PRESET_NAMES, help="print the scenario document")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "presets":
            if args.show:
                print(json.dumps(scenario_to_dict(preset(args.show)), indent=2))
            else:
                print("\n".join(PRESET_NAMES))
            return EXIT_OK
        if args.command == "sweep":
            try:
                text = Path(args.scenario).read_text()
            except OSError as exc:
                raise ParseError(f"cannot read {args.scenario}: {exc}") from None
            spec = parse_sweep(text)
            if args.workers:
                spec = replace(spec, workers=args.workers)
            rows = run_sweep(spec, args.out, args.seed)
            print(f"{len(rows)} sweep points" + (f" written to {args.out}/sweep.csv" if args.out else ""))
            return EXIT_OK
        s = _load_scenario(args)
        if args.command == "analyze":
            s = replace(s, simulate=False)
        res = run_scenario(s, args.out, args.seed)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "analyze" or not args.out:
        print(json.dumps(_jsonable(res.report), indent=2))
    else:
        sim = res.report.get("simulation") or {}
        print(f"{s.name}: exit {res.exit_code}, outcome {sim.get('outcome', 'not simulated')}")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
