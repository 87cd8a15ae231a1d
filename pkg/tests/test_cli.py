import csv
import json

import numpy as np
import pytest

from chemotaxis_lab import cli
from chemotaxis_lab.errors import ParseError, ValidationError
from chemotaxis_lab.params import Params
from chemotaxis_lab.scenario import (
    PRESET_NAMES,
    initial_state,
    parse_scenario,
    preset,
    preset_documents,
    scenario_to_dict,
    serialize,
    set_path,
)

PARAMS = {
    "d1": 1, "d2": 1, "d3": 1, "chi1": 0.5, "chi2": 0.5,
    "a0": 1, "a1": 1.5, "a2": 1, "a3": 0.1, "a4": 0.1,
    "b0": 1, "b1": 1, "b2": 1.5, "b3": 0.1, "b4": 0.1,
    "lambda": 1, "k": 1, "l": 1,
}


def _doc(**extra):
    return {"params": dict(PARAMS), "grid": {"dim": 1, "n": 128, "L": 1}, **extra}


class TestParse:
    def test_minimal_defaults(self):
        s = parse_scenario(json.dumps(_doc()))
        assert s.grid.shape == (128,) and s.grid.measure == 1.0
        assert s.initial.kind == "equilibrium" and s.reference == "auto"
        assert s.params.lam == 1.0 and s.params.omega_measure == 1.0

    def test_negative_coefficient_path(self):
        d = _doc()
        d["params"]["a2"] = -1
        with pytest.raises(ValidationError) as err:
            parse_scenario(json.dumps(d))
        assert err.value.path == "params.a2"

    def test_measure_mismatch(self):
        with pytest.raises(ValidationError) as err:
            parse_scenario(json.dumps({**_doc(), "grid": {"dim": 1, "n": 128, "L": 2}}))
        assert err.value.path == "grid.L"

    @pytest.mark.parametrize("where", ["", "grid", "sim", "params"])
    def test_unknown_keys(self, where):
        d = _doc(sim={})
        (d[where] if where else d)["bogus"] = 1
        with pytest.raises(ValidationError):
            parse_scenario(json.dumps(d))

    def test_missing_param(self):
        d = _doc()
        del d["params"]["k"]
        with pytest.raises(ValidationError):
            parse_scenario(json.dumps(d))

    @pytest.mark.parametrize("text", ["{", "[1, 2]", "nul"])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse_scenario(text)

    def test_negative_initial_data_rejected(self):
        d = _doc(initial={"kind": "constant", "u": 0.5, "v": -0.1, "w": 1.0})
        with pytest.raises(ValidationError):
            parse_scenario(json.dumps(d))

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_round_trip_presets(self, name):
        s = preset(name)
        assert parse_scenario(serialize(s)) == s

    def test_round_trip_arrays(self):
        u = [0.1 * i for i in range(8)]
        d = {
            **_doc(), "grid": {"dim": 1, "n": 8, "L": 1},
            "initial": {"kind": "arrays", "u": u, "v": u, "w": u},
            "analysis": {"boundedness": {"dim": 3, "p_exp": 5, "C_p": 0.2}, "stability": {"case": "weak"}},
            "seed": 4,
        }
        s = parse_scenario(json.dumps(d))
        assert parse_scenario(serialize(s)) == s
        assert scenario_to_dict(s)["params"]["lambda"] == 1.0

    def test_set_path_copies(self):
        base = preset_documents()["weak-w1"]
        new = set_path(base, "params.a1", 5.0)
        assert new["params"]["a1"] == 5.0 and base["params"]["a1"] == 1.5


def test_params_json_alias():
    p = Params.from_dict(PARAMS)
    assert p.to_dict()["lambda"] == 1.0 and "lam" not in p.to_dict()


def test_perturbation_is_neumann_cosine():
    s = preset("weak-w1")
    st = initial_state(s)
    (x,) = s.grid.centers
    eq = cli.resolve_reference(s)
    assert np.allclose(st.u, eq.u * (1 + 0.1 * np.cos(np.pi * x)), rtol=1e-14)


def test_random_perturbation_seeded():
    d = _doc(initial={"perturbation": {"shape": "random", "amplitude": 0.2}})
    s = parse_scenario(json.dumps(d))
    a, b, c = initial_state(s, 1), initial_state(s, 1), initial_state(s, 2)
    assert np.array_equal(a.u, b.u) and not np.array_equal(a.u, c.u)


class TestRunScenario:
    def test_weak_preset(self):
        res = cli.run_scenario(preset("weak-w1"))
        rep = res.report
        assert res.exit_code == cli.EXIT_OK
        assert rep["stability"]["report"]["overall"] and rep["simulation"]["outcome"] == "Converged"
        assert rep["simulation"]["decay"]["epsilon_hat"] > 0

    def test_asym_preset(self):
        res = cli.run_scenario(preset("asym-a1"))
        assert res.exit_code == cli.EXIT_OK
        assert res.report["simulation"]["final_mass"][0] < 1e-4

    def test_coop_fail(self):
        res = cli.run_scenario(preset("coop-fail"))
        assert res.exit_code == cli.EXIT_HYPOTHESIS
        assert res.report["boundedness"]["conditions"][0]["margin"] < 0
        assert res.report["simulation"] is None

    def test_blowup_preset(self):
        assert cli.run_scenario(preset("blowup-guard")).exit_code in (cli.EXIT_BLOWUP, cli.EXIT_UNDERFLOW)

    def test_outputs_written_and_deterministic(self, tmp_path):
        s = preset("coop-bounded")
        cli.run_scenario(s, tmp_path / "a")
        cli.run_scenario(s, tmp_path / "b")
        for f in ("report.json", "series.csv", "snapshot_initial.txt", "snapshot_final.txt"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        with open(tmp_path / "a" / "series.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == cli.DiagRecord.header()
        snap = (tmp_path / "a" / "snapshot_final.txt").read_text().splitlines()
        assert snap[0] == "# dims 128" and snap[3] == "# field u"
        report = json.loads((tmp_path / "a" / "report.json").read_text())
        assert report["meta"]["package_version"]


class TestSweep:
    def _spec(self, axes, **extra):
        return cli.parse_sweep(json.dumps({"base_preset": "coop-fail", "axes": axes, **extra}))

    def test_cartesian_count(self, tmp_path):
        spec = self._spec([
            {"path": "params.a1", "values": [0.5, 1, 2]},
            {"path": "params.chi1", "values": [0.1, 0.2, 0.3]},
        ])
        rows = cli.run_sweep(spec, tmp_path)
        assert len(rows) == 9
        with open(tmp_path / "sweep.csv") as fh:
            table = list(csv.reader(fh))
        assert len(table) == 10 and table[0][:2] == ["params.a1", "params.chi1"]

    def test_empty_axes_matches_single_run(self):
        rows = cli.run_sweep(self._spec([]))
        assert len(rows) == 1
        assert rows[0]["exit_code"] == cli.run_scenario(preset("coop-fail")).exit_code

    def test_errors_recorded_in_row(self):
        rows = cli.run_sweep(self._spec([{"path": "params.a1", "values": [-1, 1]}]))
        assert rows[0]["status"] == "error" and "a1" in rows[0]["error"]
        assert rows[1]["status"] == "ok"

    def test_size_bound(self):
        with pytest.raises(ValidationError):
            self._spec([{"path": "params.a1", "values": [1, 2, 3]}], max_points=2)

    def test_w1_family_margins_improve(self):
        doc = set_path(preset_documents()["weak-w1"], "simulate", False)
        spec = cli.parse_sweep(json.dumps({
            "base": doc, "axes": [{"path": ["params.a1", "params.b2"], "values": [1, 5, 20, 100]}],
        }))
        rows = cli.run_sweep(spec)
        assert "RegimeMismatch" in rows[0]["stability.error"]
        margins = [r["stability.competition_product"] for r in rows[1:]]
        assert margins == sorted(margins) and margins[0] > 0

    def test_workers_do_not_change_rows(self):
        axes = [{"path": "params.a1", "values": [0.5, 1, 2, 3]}]
        assert cli.run_sweep(self._spec(axes, workers=2)) == cli.run_sweep(self._spec(axes))


class TestMain:
    def test_presets_listing(self, capsys):
        assert cli.main(["presets"]) == 0
        assert capsys.readouterr().out.split() == list(PRESET_NAMES)

    def test_analyze(self, capsys):
        assert cli.main(["analyze", "--preset", "weak-w1"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["regime"]["class"] == "Weak" and rep["simulation"] is None

    def test_validation_exit(self, tmp_path, capsys):
        d = _doc()
        d["params"]["a2"] = -1
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(d))
        assert cli.main(["simulate", "--scenario", str(path)]) == cli.EXIT_VALIDATION
        assert "params.a2" in capsys.readouterr().err

    def test_simulate_exit_codes(self, tmp_path):
        assert cli.main(["simulate", "--preset", "coop-fail", "--out", str(tmp_path / "f")]) == 5
        assert cli.main(["simulate", "--preset", "blowup-guard", "--out", str(tmp_path / "b")]) in (3, 4)

    def test_sweep_command(self, tmp_path):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps({"base_preset": "coop-fail", "axes": [{"path": "params.a1", "values": [1, 2]}]}))
        assert cli.main(["sweep", "--scenario", str(path), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "sweep.csv").exists()
