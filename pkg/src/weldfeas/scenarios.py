"""Application scenarios: workpiece scenes, seams, base candidates and their criteria.

Scenarios live in versioned JSON files (see ``data/scenarios`` and
``data/scenario.schema.json``). Numbers may be plain JSON numbers or decimal
strings, and angles may use ``pi`` symbolically (``"pi/2"``, ``"-3*pi/4"``).

Five criteria are supported:

* ``max_height``: grow a seam from its start in fixed increments until the
  first infeasible extent; value = rise / arm length.
* ``max_length``: grow a seam both ways from its midpoint; value =
  length / (2 * arm length).
* ``max_speed``: weld two seams joined by an around-end pivot; value = the
  highest weld speed keeping every joint at 80 % of its limit.
* ``trajectory_count`` / ``posture_table``: evaluate every (base, seam) and
  count feasible postures; value = most seams feasible from a single base.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from weldfeas._num import format_number, parse_number
from weldfeas.collision import DEFAULT_MARGIN, robot_geometry, scene_from_dicts
from weldfeas.errors import ConfigError, GeometryError, InvalidArgument, NotApplicable, UndefinedRatio
from weldfeas.feasibility import PostureResult, SpeedLimit, evaluate, max_cartesian_speed
from weldfeas.geom import Pose, pose_from_rpy
from weldfeas.robotmodel import RobotModel
from weldfeas.torchpath import (DEFAULT_STEP, ArcSegment, LineSegment, TorchTrajectory, WeldParams, WeldSeam,
                                around_end_contour, line_seam, plan_trajectory)

SCHEMA_VERSION = 1
CRITERIA = ("max_height", "max_length", "max_speed", "trajectory_count", "posture_table")
BUILTIN_IDS = ("case1", "case2", "case3", "case4", "case5")
SCENARIO_DIR_ENV = "WELDFEAS_SCENARIO_DIR"
GROWTH_STEP = 0.005
_AXES = {"x": 0, "y": 1, "z": 2}


# -- loading ------------------------------------------------------------------

def _data_file(*parts) -> Path:
    return Path(str(resources.files("weldfeas").joinpath("data", *parts)))


def load_schema() -> dict:
    with open(_data_file("scenario.schema.json"), encoding="utf-8") as fh:
        return json.load(fh)


def load_expected() -> dict:
    """Reference results with their tolerances (regression fixture)."""
    with open(_data_file("expected_results.json"), encoding="utf-8") as fh:
        return json.load(fh)


def _vec(v) -> np.ndarray:
    return np.array([parse_number(x) for x in v], dtype=float)


def _normal(v):
    return v if isinstance(v, str) else _vec(v)


def segment_from_dict(d: dict):
    if d["type"] == "line":
        return LineSegment(_vec(d["start"]), _vec(d["end"]), _normal(d["n1"]), _normal(d["n2"]))
    return ArcSegment(_vec(d["center"]), _vec(d["axis"]), parse_number(d["radius"]),
                      parse_number(d["start_angle"]), parse_number(d["sweep"]),
                      _normal(d["n1"]), _normal(d["n2"]),
                      None if d.get("ref") is None else _vec(d["ref"]))


def seam_from_dict(d: dict) -> WeldSeam:
    return WeldSeam([segment_from_dict(s) for s in d["segments"]], d["name"])


def base_from_list(v) -> Pose:
    return pose_from_rpy(*[parse_number(x) for x in v])


def _schema_errors(doc) -> list[str]:
    validator = jsonschema.Draft202012Validator(load_schema())
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        ptr = "/" + "/".join(str(p) for p in err.absolute_path)
        out.append(f"{ptr}: {err.message}")
    return out


def validate_document(doc) -> list[str]:
    """Violations of the scenario format, each prefixed by a JSON pointer.

    Checks the JSON schema first, then what the schema cannot express:
    numeric strings, seam continuity and references between sections.
    """
    errors = _schema_errors(doc)
    if errors:
        return errors
    for i, prim in enumerate(doc["scene"]):
        try:
            scene_from_dicts([prim])
        except (ValueError, GeometryError, InvalidArgument) as exc:
            errors.append(f"/scene/{i}: {exc}")
    names = []
    for i, sd in enumerate(doc["seams"]):
        names.append(sd["name"])
        segs = []
        for j, seg in enumerate(sd["segments"]):
            try:
                segs.append(segment_from_dict(seg))
            except (ValueError, GeometryError, InvalidArgument) as exc:
                errors.append(f"/seams/{i}/segments/{j}: {exc}")
        if len(segs) == len(sd["segments"]):
            for j in range(len(segs) - 1):
                a, b = segs[j], segs[j + 1]
                gap = float(np.linalg.norm(a.point(a.length) - b.point(0.0)))
                if gap > 1e-9:
                    errors.append(f"/seams/{i}/segments/{j + 1}: starts {gap:.4g} m away from the previous end")
        mirror = sd.get("mirror_of")
        if mirror is not None and mirror not in [s["name"] for s in doc["seams"]]:
            errors.append(f"/seams/{i}/mirror_of: unknown seam {mirror!r}")
    if len(set(names)) != len(names):
        errors.append("/seams: seam names must be unique")
    for name, pose in doc["bases"].items():
        try:
            [parse_number(x) for x in pose]
        except ValueError as exc:
            errors.append(f"/bases/{name}: {exc}")
    search = doc.get("search", {})
    for key in ("seam", "first", "second"):
        if key in search and search[key] not in names:
            errors.append(f"/search/{key}: unknown seam {search[key]!r}")
    if "primary_base" in search and search["primary_base"] not in doc["bases"]:
        errors.append(f"/search/primary_base: unknown base {search['primary_base']!r}")
    try:
        params_from_dict(doc.get("params", {}))
    except (ValueError, InvalidArgument, TypeError) as exc:
        errors.append(f"/params: {exc}")
    return errors


def params_from_dict(d: dict) -> WeldParams:
    kw = {}
    for k, v in d.items():
        kw[k] = v if k == "camera_side" else parse_number(v)
    return WeldParams(**kw)


@dataclass(frozen=True, eq=False)
class Scenario:
    """One application case, ready to run.

    Attributes:
        seams: seams by name, in welding order.
        bases: candidate base poses by name.
        cameras: camera settings evaluated, the first one sets the value.
        search: criterion settings (seam names, growth axis, pivot point...).
        mirrors: seam name -> the seam whose verdict it shares by symmetry.
        document: the source JSON document.
    """

    id: str
    title: str
    criterion: str
    scene: tuple
    seams: dict
    bases: dict
    params: WeldParams
    cameras: tuple
    search: dict
    mirrors: dict
    document: dict = field(repr=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        errors = validate_document(doc)
        if errors:
            raise ConfigError("invalid scenario:\n  " + "\n  ".join(errors))
        params = params_from_dict(doc.get("params", {}))
        cameras = tuple(doc.get("cameras", [params.camera_side]))
        return cls(
            id=doc["id"],
            title=doc.get("title", doc["id"]),
            criterion=doc["criterion"],
            scene=scene_from_dicts(doc["scene"]),
            seams={s["name"]: seam_from_dict(s) for s in doc["seams"]},
            bases={k: base_from_list(v) for k, v in doc["bases"].items()},
            params=params,
            cameras=cameras,
            search=dict(doc.get("search", {})),
            mirrors={s["name"]: s["mirror_of"] for s in doc["seams"] if s.get("mirror_of")},
            document=copy.deepcopy(doc),
        )

    def to_dict(self) -> dict:
        return copy.deepcopy(self.document)

    def base_pose_numbers(self, name: str) -> list[float]:
        return [parse_number(x) for x in self.document["bases"][name]]


def load_scenario(path) -> Scenario:
    """Read a scenario file. Raises OSError when unreadable and ConfigError when invalid."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return Scenario.from_dict(doc)


def scenario_search_path() -> list[Path]:
    out = []
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env:
        out.extend(Path(p) for p in env.split(os.pathsep) if p)
    out.append(_data_file("scenarios"))
    return out


def find_scenario(name: str) -> Path:
    """Resolve a scenario id or path: explicit paths first, then the search path."""
    p = Path(name)
    if p.suffix == ".json" or p.exists():
        if not p.exists():
            raise FileNotFoundError(name)
        return p
    for d in scenario_search_path():
        cand = d / f"{name}.json"
        if cand.exists():
            return cand
    raise FileNotFoundError(f"scenario {name!r} not found in {[str(d) for d in scenario_search_path()]}")


def builtin_scenarios() -> list[Scenario]:
    return [load_scenario(_data_file("scenarios", f"{k}.json")) for k in BUILTIN_IDS]


def get_scenario(name: str) -> Scenario:
    return load_scenario(find_scenario(name))


def dump_pose(values) -> list[str]:
    """Pose numbers as scenario-file strings (multiples of pi kept symbolic)."""
    return [format_number(float(x)) for x in values]


# -- results ------------------------------------------------------------------

@dataclass
class SeamOutcome:
    """Everything evaluated for one (base, camera, seam) combination."""

    base: str
    camera: str
    seam: str
    postures: list
    extent: float | None = None
    speed: SpeedLimit | None = None
    mirror_of: str | None = None
    note: str | None = None

    @property
    def feasible_postures(self) -> list[str]:
        return [r.posture for r in self.postures if r.verdict.feasible]

    @property
    def best(self) -> PostureResult | None:
        if not self.postures:
            return None
        return max(self.postures, key=_progress)

    def failure_summary(self) -> dict | None:
        """Failure of the posture that got furthest (None when some posture is feasible)."""
        if self.feasible_postures or self.best is None:
            return None
        return self.best.verdict.failure.as_dict()

    def as_dict(self, series: bool = False) -> dict:
        d = {
            "base": self.base,
            "camera": self.camera,
            "seam": self.seam,
            "feasible_postures": self.feasible_postures,
            "postures": [_posture_dict(r, series) for r in self.postures],
        }
        if self.extent is not None:
            d["extent_m"] = self.extent
        if self.speed is not None:
            d["v_max_m_s"] = self.speed.v_max
            d["v_max_cm_min"] = self.speed.v_max * 6000.0
            d["limiting_joint"] = self.speed.limiting_joint
            d["speed_ratio_at_test_speed"] = self.speed.ratio
            d["speed_posture"] = self.speed.posture
        if self.mirror_of is not None:
            d["mirror_of"] = self.mirror_of
        if self.note is not None:
            d["note"] = self.note
        fs = self.failure_summary()
        if fs is not None:
            d["failure"] = fs
        return d


def _progress(r: PostureResult):
    n = r.verdict.first_failure_sample
    return (r.verdict.feasible, math.inf if n is None else n, -r.verdict.stats.get("speed_max_pct", 0.0))


def _posture_dict(r: PostureResult, series: bool) -> dict:
    d = {
        "posture": r.posture,
        "feasible": r.verdict.feasible,
        "stats": dict(r.verdict.stats),
    }
    if r.verdict.failure is not None:
        d["failure"] = r.verdict.failure.as_dict()
    if series and r.trajectory is not None:
        jt = r.trajectory
        d["series"] = {
            "t": jt.t.tolist(),
            "qdot": jt.qdot.tolist(),
            "tau": jt.tau.tolist(),
        }
        if jt.clearance is not None:
            d["series"]["clearance"] = np.asarray(jt.clearance)[: len(jt.t)].tolist()
    return d


@dataclass
class CriterionResult:
    """Outcome of a scenario for one robot."""

    scenario: str
    criterion: str
    robot: str
    morphology: str
    value: float | None
    unit: str
    best_base: str | None = None
    posture_count: int = 0
    outcomes: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def outcome(self, base: str, seam: str, camera: str | None = None) -> SeamOutcome:
        for o in self.outcomes:
            if o.base == base and o.seam == seam and (camera is None or o.camera == camera):
                return o
        raise KeyError((base, seam, camera))

    def feasible_table(self, camera: str | None = None) -> dict:
        """base -> seam -> number of feasible postures."""
        out: dict = {}
        for o in self.outcomes:
            if camera is not None and o.camera != camera:
                continue
            out.setdefault(o.base, {})[o.seam] = len(o.feasible_postures)
        return out

    def as_dict(self, series: bool = False) -> dict:
        return {
            "scenario": self.scenario,
            "criterion": self.criterion,
            "robot": self.robot,
            "morphology": self.morphology,
            "value": self.value,
            "unit": self.unit,
            "best_base": self.best_base,
            "posture_count": self.posture_count,
            "settings": self.settings,
            "outcomes": [o.as_dict(series) for o in self.outcomes],
        }


def relative_performance(a: CriterionResult, b: CriterionResult) -> float:
    """100 (a - b) / b, in percent."""
    if a.scenario != b.scenario:
        raise InvalidArgument("results come from different scenarios")
    if a.value is None or b.value is None:
        raise UndefinedRatio("a criterion value is missing")
    if b.value == 0:
        raise UndefinedRatio("reference value is zero")
    return 100.0 * (a.value - b.value) / b.value


# -- running ------------------------------------------------------------------

@dataclass(frozen=True)
class RunOptions:
    bases: tuple | None = None
    cameras: tuple | None = None
    margin: float = DEFAULT_MARGIN
    step: float = DEFAULT_STEP
    params: dict = field(default_factory=dict)


def run_scenario(s: Scenario, model: RobotModel, options: RunOptions = RunOptions()) -> CriterionResult:
    """Evaluate a scenario for one robot. Infeasibility is reported, never raised."""
    params = s.params.updated(**options.params)
    cameras = options.cameras or ((params.camera_side,) if "camera_side" in options.params else s.cameras)
    bases = options.bases or tuple(s.bases)
    for b in bases:
        if b not in s.bases:
            raise ConfigError(f"scenario {s.id!r} has no base {b!r}; choose from {sorted(s.bases)}")
    geom = robot_geometry(model, scene=s.scene)
    ctx = _Context(s, model, geom, params, options.margin, options.step)
    runner = {
        "max_height": _run_growth,
        "max_length": _run_two_way_growth,
        "max_speed": _run_speed,
        "trajectory_count": _run_table,
        "posture_table": _run_table,
    }[s.criterion]
    result = runner(ctx, bases, cameras)
    result.settings = {
        "bases": list(bases),
        "cameras": list(cameras),
        "margin_m": options.margin,
        "sample_step_m": options.step,
        "params": {
            "tilt_angle_rad": params.tilt_angle,
            "drag_angle_rad": params.drag_angle,
            "stick_out_m": params.stick_out,
            "cartesian_speed_m_s": params.cartesian_speed,
            "camera_side": params.camera_side,
        },
    }
    return result


@dataclass
class _Context:
    s: Scenario
    model: RobotModel
    geom: object
    params: WeldParams
    margin: float
    step: float

    def evaluate(self, base: str, traj: TorchTrajectory, camera: str) -> list:
        p = replace(self.params, camera_side=camera)
        return evaluate(self.model, self.s.bases[base], self.geom, traj, p, self.margin)

    def plan(self, seam: WeldSeam, camera: str) -> TorchTrajectory:
        return plan_trajectory(seam, replace(self.params, camera_side=camera), self.step)

    def new_result(self, unit: str) -> CriterionResult:
        return CriterionResult(self.s.id, self.s.criterion, self.model.name, self.model.morphology, None, unit)


def _reach(r: PostureResult, n: int) -> int:
    """Number of leading samples the posture passes."""
    k = r.verdict.first_failure_sample
    return n if k is None else k


def _truncated_line(seam: WeldSeam, length: float, name: str) -> WeldSeam:
    seg = seam.segments[0]
    a = seg.point(0.0)
    return line_seam(a, a + length * seg.tangent(0.0), seg.n1, seg.n2, name)


def _run_growth(ctx: _Context, bases, cameras) -> CriterionResult:
    """Longest feasible prefix of a straight seam, in ``GROWTH_STEP`` increments.

    The full seam is evaluated once; every gate is decided sample by sample
    along a causally tracked branch, so a posture's first failing sample
    bounds its feasible prefix. The candidate is floored to the growth grid
    and re-evaluated as a seam of its own, shrinking until it passes.
    """
    s = ctx.s
    seam = s.seams[s.search["seam"]]
    if len(seam.segments) != 1 or not isinstance(seam.segments[0], LineSegment):
        raise ConfigError("growth search needs a single straight seam")
    axis = _AXES[s.search.get("axis", "z")]
    step = float(s.search.get("step", GROWTH_STEP))
    seg = seam.segments[0]
    rate = abs(seg.tangent(0.0)[axis])
    res = ctx.new_result("1")
    best = (0.0, None, [])
    for base in bases:
        for cam in cameras:
            tr = ctx.plan(seam, cam)
            full = ctx.evaluate(base, tr, cam)
            n = len(tr)
            k_best = max((_reach(r, n) for r in full), default=0)
            outcome = SeamOutcome(base, cam, seam.name, full, extent=0.0)
            if k_best >= 2:
                s_max = float(tr.meta["seam_s"][k_best - 1])
                m = int(math.floor(s_max / step + 1e-9))
                while m > 0:
                    part = ctx.plan(_truncated_line(seam, m * step, seam.name), cam)
                    rs = ctx.evaluate(base, part, cam)
                    if any(r.verdict.feasible for r in rs):
                        outcome = SeamOutcome(base, cam, seam.name, rs, extent=m * step * rate)
                        if k_best == n:
                            outcome.note = "whole seam feasible; the scene bounds the search"
                        break
                    m -= 1
            res.outcomes.append(outcome)
            if outcome.extent > best[0]:
                best = (outcome.extent, base, outcome.feasible_postures)
    res.value = best[0] / ctx.model.l_arm
    res.best_base = best[1]
    res.posture_count = len(best[2])
    return res


def _run_two_way_growth(ctx: _Context, bases, cameras) -> CriterionResult:
    """Longest feasible window of a straight seam grown both ways from its midpoint.

    Each half is evaluated from the midpoint outward (the backward half by
    visiting the same poses in reverse order, which leaves every per-sample
    check unchanged). Postures are matched by their label at the midpoint,
    both reaches are floored to the growth grid, and the combined window is
    re-evaluated, trimming the longer side until it passes.
    """
    s = ctx.s
    seam = s.seams[s.search["seam"]]
    axis = _AXES[s.search.get("axis", "y")]
    step = float(s.search.get("step", GROWTH_STEP))
    res = ctx.new_result("1")
    best = (0.0, None, [])
    for base in bases:
        for cam in cameras:
            tr = ctx.plan(seam, cam)
            n = len(tr)
            sv = np.asarray(tr.meta["seam_s"])
            c = int(np.argmin(np.abs(sv - sv[-1] / 2)))
            fw = tr.window(c, n - 1)
            bw = tr.window(0, c).time_reversed()
            rf = {r.posture: r for r in ctx.evaluate(base, fw, cam)}
            rb = {r.posture: r for r in ctx.evaluate(base, bw, cam)}
            cands = []
            for key in sorted(set(rf) & set(rb)):
                kf, kb = _reach(rf[key], len(fw)), _reach(rb[key], len(bw))
                if kf < 2 or kb < 2:
                    continue
                mf = int(math.floor((sv[c + kf - 1] - sv[c]) / step + 1e-9))
                mb = int(math.floor((sv[c] - sv[c - kb + 1]) / step + 1e-9))
                cands.append((mf + mb, mf, mb, key))
            cands.sort(key=lambda x: (-x[0], x[3]))
            outcome = SeamOutcome(base, cam, seam.name, list(rf.values()), extent=0.0)
            for _, mf, mb, key in cands[:2]:
                found = None
                while mf + mb > 0 and found is None:
                    i0 = int(np.argmin(np.abs(sv - (sv[c] - mb * step))))
                    i1 = int(np.argmin(np.abs(sv - (sv[c] + mf * step))))
                    rs = ctx.evaluate(base, tr.window(i0, i1), cam)
                    if any(r.verdict.feasible for r in rs):
                        span = abs(tr.weld_points[i1, axis] - tr.weld_points[i0, axis])
                        found = SeamOutcome(base, cam, seam.name, rs, extent=float(span))
                    elif mf >= mb:
                        mf -= 1
                    else:
                        mb -= 1
                if found is not None and found.extent > (outcome.extent or 0.0):
                    outcome = found
            res.outcomes.append(outcome)
            if outcome.extent > best[0]:
                best = (outcome.extent, base, outcome.feasible_postures)
    res.value = best[0] / (2.0 * ctx.model.l_arm)
    res.best_base = best[1]
    res.posture_count = len(best[2])
    return res


def _run_speed(ctx: _Context, bases, cameras) -> CriterionResult:
    s = ctx.s
    a, b = s.seams[s.search["first"]], s.seams[s.search["second"]]
    end = _vec(s.search["end_point"])
    primary = s.search.get("primary_base")
    res = ctx.new_result("m/s")
    best = (None, None, 0)
    for base in bases:
        for cam in cameras:
            tr = around_end_contour(a, b, end, replace(ctx.params, camera_side=cam), ctx.step)
            rs = ctx.evaluate(base, tr, cam)
            outcome = SeamOutcome(base, cam, tr.name, rs)
            try:
                outcome.speed = max_cartesian_speed(ctx.model, s.bases[base], ctx.geom, tr,
                                                    replace(ctx.params, camera_side=cam), ctx.margin, results=rs)
            except NotApplicable:
                pass
            res.outcomes.append(outcome)
            if outcome.speed is None or (primary is not None and base != primary):
                continue
            if best[0] is None or outcome.speed.v_max > best[0]:
                nsp = sum(1 for r in rs if r.verdict.failure is None or r.verdict.failure.kind == "speed_exceeded")
                best = (outcome.speed.v_max, base, nsp)
    res.value, res.best_base, res.posture_count = best
    return res


def _run_table(ctx: _Context, bases, cameras) -> CriterionResult:
    s = ctx.s
    res = ctx.new_result("trajectories")
    names = list(s.seams)
    counted: dict = {}
    for base in bases:
        for cam in cameras:
            done: dict = {}
            for name in names:
                src = s.mirrors.get(name)
                if src is not None and src in done:
                    o = replace(done[src], seam=name, mirror_of=src)
                else:
                    tr = ctx.plan(s.seams[name], cam)
                    o = SeamOutcome(base, cam, name, ctx.evaluate(base, tr, cam))
                done[name] = o
                res.outcomes.append(o)
            if cam == cameras[0]:
                counted[base] = sum(1 for o in done.values() if o.feasible_postures)
    top = max(counted.values(), default=0)
    res.value = float(top)
    res.best_base = next((b for b in bases if counted.get(b) == top), None) if top else None
    res.posture_count = sum(len(o.feasible_postures) for o in res.outcomes
                            if o.base == res.best_base and o.camera == cameras[0])
    return res

