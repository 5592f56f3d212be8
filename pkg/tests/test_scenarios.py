import copy
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weldfeas._num import format_number, parse_number
from weldfeas.errors import ConfigError, InvalidArgument, UndefinedRatio
from weldfeas.robotmodel import get_model
from weldfeas.scenarios import (BUILTIN_IDS, SCENARIO_DIR_ENV, CriterionResult, RunOptions, Scenario,
                                builtin_scenarios, dump_pose, find_scenario, get_scenario, load_expected,
                                load_scenario, relative_performance, run_scenario, validate_document)


@pytest.fixture(scope="module")
def case4_doc():
    return get_scenario("case4").to_dict()


def _result(value, scenario="s"):
    return CriterionResult(scenario, "max_height", "r", "ur", value, "-")


def test_builtins_load_and_validate():
    loaded = builtin_scenarios()
    assert [s.id for s in loaded] == list(BUILTIN_IDS)
    for s in loaded:
        assert validate_document(s.to_dict()) == []
        assert s.seams and s.bases


def test_expected_fixture_covers_every_builtin():
    exp = load_expected()
    assert set(BUILTIN_IDS) <= set(exp)
    signs = [math.copysign(1, exp[k]["relative_pct"]) for k in BUILTIN_IDS]
    assert signs == [1, 1, 1, -1, 1]


def test_base_poses_round_trip_exactly():
    for s in builtin_scenarios():
        for name, raw in s.to_dict()["bases"].items():
            values = [parse_number(x) for x in raw]
            again = [parse_number(x) for x in dump_pose(values)]
            assert again == values  # bit-exact
            assert np.array_equal(s.bases[name].position, values[:3])


@given(st.integers(-8, 8).filter(bool), st.sampled_from([1, 2, 3, 4, 6, 8, 12]))
def test_pi_multiples_stay_symbolic(num, den):
    x = num * math.pi / den
    text = format_number(x)
    assert "pi" in text
    assert parse_number(text) == x


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_number_format_round_trip(x):
    assert parse_number(format_number(x)) == x


@pytest.mark.parametrize("bad", ["pi pi", "2pi", "", "nan-ish", None, True])
def test_parse_number_rejects_garbage(bad):
    with pytest.raises(ValueError):
        parse_number(bad)


def test_seven_number_pose_reported_with_pointer(case4_doc):
    doc = copy.deepcopy(case4_doc)
    doc["bases"]["A"] = doc["bases"]["A"] + ["0"]
    errors = validate_document(doc)
    assert errors and all(e.startswith("/bases/A") for e in errors)


def test_seam_gap_reported_at_segment(case4_doc):
    doc = copy.deepcopy(case4_doc)
    seg = {"type": "line", "start": [0.101, 0, 0], "end": [0.2, 0, 0], "n1": [0, 0, 1], "n2": [0, 1, 0]}
    first = {"type": "line", "start": [0, 0, 0], "end": [0.1, 0, 0], "n1": [0, 0, 1], "n2": [0, 1, 0]}
    doc["seams"][0] = {"name": "gap", "segments": [first, seg]}
    errors = validate_document(doc)
    assert any(e.startswith("/seams/0/segments/1:") for e in errors)


@pytest.mark.parametrize("mutate, pointer", [
    (lambda d: d.update(criterion="fastest"), "/criterion"),
    (lambda d: d["bases"].update(A=["0", "0", "x", "0", "0", "0"]), "/bases/A"),
    (lambda d: d["seams"][2].update(mirror_of="9.9"), "/seams/2/mirror_of"),
    (lambda d: d.update(params={"camera_side": "left"}), "/params"),
    (lambda d: d.pop("seams"), "/"),
])
def test_validation_pointers(case4_doc, mutate, pointer):
    doc = copy.deepcopy(case4_doc)
    mutate(doc)
    errors = validate_document(doc)
    assert any(e.startswith(pointer) for e in errors), errors
    with pytest.raises(ConfigError):
        Scenario.from_dict(doc)


def test_load_errors(tmp_path):
    with pytest.raises(OSError):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenario(bad)
    with pytest.raises(FileNotFoundError):
        find_scenario("no_such_case")


def test_search_path_env_var(tmp_path, monkeypatch, case4_doc):
    doc = copy.deepcopy(case4_doc)
    doc["id"] = "mine"
    (tmp_path / "mine.json").write_text(json.dumps(doc))
    (tmp_path / "case1.json").write_text(json.dumps(dict(doc, id="shadow")))
    monkeypatch.setenv(SCENARIO_DIR_ENV, str(tmp_path))
    assert get_scenario("mine").id == "mine"
    assert get_scenario("case1").id == "shadow"  # user directories come first
    monkeypatch.delenv(SCENARIO_DIR_ENV)
    assert get_scenario("case1").id == "case1"


def test_relative_performance():
    a = _result(0.98)
    assert relative_performance(a, a) == 0.0
    assert relative_performance(_result(57.0), _result(35.0)) == pytest.approx(62.857, abs=1e-3)
    assert relative_performance(_result(2.0), _result(4.0)) == -50.0
    with pytest.raises(UndefinedRatio):
        relative_performance(a, _result(0.0))
    with pytest.raises(UndefinedRatio):
        relative_performance(a, _result(None))
    with pytest.raises(InvalidArgument):
        relative_performance(a, _result(1.0, "other"))


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_relative_performance_sign(x, y):
    r = relative_performance(_result(x), _result(y))
    assert math.copysign(1, r) == math.copysign(1, x - y) or x == y


def test_unknown_base_rejected():
    with pytest.raises(ConfigError):
        run_scenario(get_scenario("case4"), get_model("ur"), RunOptions(bases=("Z",)))


def test_mirrored_seams_match_when_evaluated(case4_doc):
    # drop the mirror shortcut so 1.3 and 1.4 are computed from scratch
    doc = copy.deepcopy(case4_doc)
    for s in doc["seams"]:
        s.pop("mirror_of", None)
    s = Scenario.from_dict(doc)
    for key in ("ur", "puma"):
        res = run_scenario(s, get_model(key), RunOptions(bases=("A",), cameras=("front",)))
        for a, b in (("1.1", "1.3"), ("1.2", "1.4")):
            oa, ob = res.outcome("A", a), res.outcome("A", b)
            assert len(oa.feasible_postures) == len(ob.feasible_postures)
            fa, fb = oa.failure_summary(), ob.failure_summary()
            assert (fa is None) == (fb is None)
            if fa is not None:
                assert fa["kind"] == fb["kind"] and abs(fa["sample"] - fb["sample"]) <= 1


def test_result_independent_of_base_order():
    s = get_scenario("case4")
    m = get_model("puma")
    ab = run_scenario(s, m, RunOptions(bases=("A", "B"), cameras=("front",)))
    ba = run_scenario(s, m, RunOptions(bases=("B", "A"), cameras=("front",)))
    assert ab.feasible_table() == ba.feasible_table()
    assert ab.value == ba.value and ab.best_base == ba.best_base
    for o in ab.outcomes:
        assert o.as_dict() == ba.outcome(o.base, o.seam, o.camera).as_dict()


def test_feasible_table_and_dict():
    res = run_scenario(get_scenario("case4"), get_model("puma"), RunOptions(bases=("A",), cameras=("front",)))
    table = res.feasible_table("front")
    assert set(table["A"]) == {"1.1", "1.2", "1.3", "1.4"}
    d = res.as_dict()
    assert d["value"] == res.value and d["settings"]["cameras"] == ["front"]
    json.dumps(d, allow_nan=False)
