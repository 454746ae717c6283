"""Benchmark protocol: success-rate curves, ttp95 / l95 / l_conv, efficiency gains, parallel speedup."""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from spath.planners import WORK_COSTS, PlannerConfig
from spath.pipeline import Environment, PlanResult, Query, SubproblemPool, run, setup
from spath.rng import derive_seed

SUCCESS_MARK = 0.95
DEFAULT_TTP_MIN = 0.001
DEFAULT_TTP_MAX = 6.0
DEFAULT_TRIALS = 30
DEFAULT_POINTS = 12
ABLATIONS = ("I", "II", "III", "SPATH_SEQ")


@dataclass(frozen=True)
class AboveRange:
    """Marker for a curve that never reaches the success mark within the sweep."""

    ttp_max: float

    def __str__(self):
        return f"> {self.ttp_max * 1000:.2f}"


@dataclass(frozen=True)
class CurvePoint:
    ttp: float
    success_rate: float
    lengths: tuple[float, ...]

    @property
    def median_length(self) -> float:
        return float(statistics.median(self.lengths)) if self.lengths else math.nan

    @property
    def min_length(self) -> float:
        return min(self.lengths) if self.lengths else math.nan


@dataclass(frozen=True)
class SuccessCurve:
    points: tuple[CurvePoint, ...]
    trials: int
    ablation: str = ""
    planner: str = ""
    query: str = ""

    def __post_init__(self):
        ttps = [p.ttp for p in self.points]
        if any(b <= a for a, b in zip(ttps, ttps[1:])):
            raise ValueError("ttp values must be strictly increasing")
        if any(not 0.0 <= p.success_rate <= 1.0 for p in self.points):
            raise ValueError("success rates must lie in [0, 1]")

    @property
    def ttps(self):
        return [p.ttp for p in self.points]

    @property
    def rates(self):
        return [p.success_rate for p in self.points]

    @classmethod
    def from_rates(cls, ttps, rates, trials: int = 1) -> "SuccessCurve":
        return cls(tuple(CurvePoint(float(t), float(r), ()) for t, r in zip(ttps, rates)), trials)


@dataclass(frozen=True)
class EfficiencyRow:
    ablation: str
    ttp95: float | AboveRange
    l95: float
    l_conv: float
    eta_ttp: float | None
    eta_l: float | None
    eta: float | None
    eta_bar: float | None


def log_ttps(ttp_min: float, ttp_max: float, points: int) -> list[float]:
    if not 0 < ttp_min < ttp_max:
        raise ValueError("need 0 < ttp_min < ttp_max")
    if points < 2:
        raise ValueError("need at least two sample points")
    vals = np.logspace(math.log10(ttp_min), math.log10(ttp_max), points)
    vals[0], vals[-1] = ttp_min, ttp_max
    return [float(v) for v in vals]


def length_at(res: PlanResult, ttp: float) -> float:
    """Path length the query would have returned with time budget ``ttp``.

    Valid for runs on the work clock made with a budget of at least ``ttp``: every
    planner is deterministic and its anytime trace is a prefix of any longer run.
    Decomposed legs get their effort-proportional share of ``ttp``.
    """
    if res.decomposition is None:
        return res.legs[0].path.at_budget(ttp)
    subs = res.decomposition.subproblems
    total = sum(s.effort for s in subs)
    out = 0.0
    for s, leg in zip(subs, res.legs):
        b = ttp * s.effort / total if total > 0 else ttp / len(subs)
        out += leg.path.at_budget(b)
    return out


def sweep(
    env: Environment,
    query: Query,
    ablation: str,
    planner: PlannerConfig,
    ttp_min: float = DEFAULT_TTP_MIN,
    ttp_max: float = DEFAULT_TTP_MAX,
    points: int = DEFAULT_POINTS,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> SuccessCurve:
    """Success rate and path lengths at log-spaced budgets, one seeded run per trial.

    Each trial runs once at ``ttp_max`` on the work clock and is evaluated at every
    smaller budget from its trace, which equals rerunning with that budget.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ttps = log_ttps(ttp_min, ttp_max, points)
    found = [[] for _ in ttps]
    cfg = planner.with_(clock="work")
    for trial in range(trials):
        q = query.with_(ttp=ttp_max, mode=ablation, planner=cfg, seed=derive_seed(seed, trial))
        res = run(env, q)
        for k, t in enumerate(ttps):
            length = length_at(res, t)
            if math.isfinite(length):
                found[k].append(length)
    pts = tuple(CurvePoint(t, len(f) / trials, tuple(f)) for t, f in zip(ttps, found))
    return SuccessCurve(pts, trials, ablation, planner.kind)


def ttp95(curve: SuccessCurve, mark: float = SUCCESS_MARK):
    """First budget where the log10-linear interpolant of raw success rates reaches ``mark``."""
    ttps, rates = curve.ttps, curve.rates
    for i, r in enumerate(rates):
        if r >= mark:
            if i == 0:
                return ttps[0]
            r0 = rates[i - 1]
            x0, x1 = math.log10(ttps[i - 1]), math.log10(ttps[i])
            return 10 ** (x0 + (mark - r0) / (r - r0) * (x1 - x0))
    return AboveRange(ttps[-1])


def l95(curve: SuccessCurve, t95) -> float:
    """Median successful length at the first sample at or above ``t95``."""
    if isinstance(t95, AboveRange):
        return math.nan
    for p in curve.points:
        if p.ttp >= t95 * (1 - 1e-12):
            return p.median_length
    return math.nan


def l_conv(curve: SuccessCurve) -> float:
    return curve.points[-1].min_length


def efficiency(curves: dict) -> list[EfficiencyRow]:
    """Efficiency gains of every ablation relative to ablation ``"I"``."""
    if "I" not in curves:
        raise ValueError("ablation I is required as the reference")
    base = {}
    for name, c in curves.items():
        t = ttp95(c)
        base[name] = (t, l95(c, t), l_conv(c))
    t_ref = base["I"][0]
    if isinstance(t_ref, AboveRange):
        raise ValueError("ablation I never reaches the success mark")
    eta_ref = base["I"][2] / base["I"][1]
    rows = []
    for name in curves:
        t, l9, lc = base[name]
        if isinstance(t, AboveRange):
            rows.append(EfficiencyRow(name, t, l9, lc, None, None, None, None))
            continue
        e_ttp = 1.0 if name == "I" else t_ref / t
        e_l = lc / l9
        e = e_l * e_ttp
        e_bar = 1.0 if name == "I" else e / eta_ref
        rows.append(EfficiencyRow(name, t, l9, lc, e_ttp, e_l, e, e_bar))
    return rows


def speedup(env: Environment, queries, ttp: float = 1.0, planner: PlannerConfig | None = None, workers: int | None = None, seed: int = 0):
    """Sequential over parallel solve wall time per query, with identical leg seeds."""
    planner = (planner or PlannerConfig(kind="prmstar")).with_(clock="cpu")
    out = []
    with SubproblemPool(env.df, workers) as pool:
        if pool.workers < 2:
            raise ValueError("speedup needs at least two workers")
        for i, (start, goal) in enumerate(queries):
            q = Query(start, goal, ttp=ttp, mode="SPATH_SEQ", planner=planner, seed=derive_seed(seed, i))
            seq = run(env, q)
            par = run(env, q.with_(mode="SPATH_PAR"), pool=pool)
            out.append(
                {
                    "query": i,
                    "subproblems": len(seq.legs),
                    "seq_wall": seq.solve_wall_time,
                    "par_wall": par.solve_wall_time,
                    "speedup": seq.solve_wall_time / par.solve_wall_time,
                    "workers": pool.workers,
                }
            )
    return out


def group_speedups(rows) -> dict[int, float]:
    groups: dict[int, list] = {}
    for r in rows:
        groups.setdefault(r["subproblems"], []).append(r["speedup"])
    return {k: float(statistics.median(v)) for k, v in sorted(groups.items())}


# --- scenario runner ------------------------------------------------------------


def _fmt(x):
    if x is None or isinstance(x, AboveRange):
        return None
    return None if not math.isfinite(x) else x


def _cell(x, digits=2):
    if isinstance(x, AboveRange):
        return str(x)
    if x is None or not math.isfinite(x):
        return "-"
    return f"{x:.{digits}f}"


def load_scenario(path) -> dict:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("schema") != "spath-scenario/1":
        raise ValueError(f"{path}: not a scenario file")
    env = Path(doc["env"])
    if not env.is_absolute():
        env = (path.parent / env).resolve()
    doc["env"] = str(env)
    return doc


def run_bench(scenario: dict, out_dir, trials: int | None = None, points: int | None = None, seed: int | None = None, log=None) -> dict:
    """Sweep every query x planner x ablation in a scenario and write the report files."""
    from spath.envgen import load_environment

    sg, grid = load_environment(scenario["env"])
    env = setup(sg, grid)
    trials = trials or scenario.get("trials", DEFAULT_TRIALS)
    points = points or scenario.get("points", DEFAULT_POINTS)
    seed = scenario.get("seed", 0) if seed is None else seed
    ttp_min = scenario.get("ttp_min", DEFAULT_TTP_MIN)
    ttp_max = scenario.get("ttp_max", DEFAULT_TTP_MAX)
    planners = scenario.get("planners", ["prmstar", "bitstar", "rrtstar"])
    ablations = scenario.get("ablations", list(ABLATIONS))
    if "I" not in ablations:
        ablations = ["I"] + list(ablations)
    robot_radius = scenario.get("robot_radius", 0.3)
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)

    report = {
        "schema": "spath-report/1",
        "metadata": {
            "interpolation": "piecewise linear in log10(ttp) over raw success rates",
            "l95": "median successful length at the first sample with ttp >= ttp95",
            "l_conv": "minimum successful length at ttp_max",
            "clock": "work",
            "work_costs": dict(WORK_COSTS),
            "trials": trials,
            "points": points,
            "seed": seed,
            "ttp_min": ttp_min,
            "ttp_max": ttp_max,
        },
        "curves": [],
        "efficiency": [],
    }
    audit = {"wall_seconds": {}}
    eff_rows = []
    for qi, qd in enumerate(scenario["queries"]):
        name = qd.get("name", f"q{qi}")
        start = qd["start"] if isinstance(qd["start"], str) else tuple(qd["start"])
        goal = qd["goal"] if isinstance(qd["goal"], str) else tuple(qd["goal"])
        for kind in planners:
            curves = {}
            for abl in ablations:
                t0 = time.perf_counter()
                cfg = PlannerConfig(kind=kind, robot_radius=robot_radius, clock="work")
                q = Query(start, goal, ttp=ttp_max, mode=abl, planner=cfg)
                c = sweep(env, q, abl, cfg, ttp_min, ttp_max, points, trials, derive_seed(seed, qi))
                curves[abl] = SuccessCurve(c.points, c.trials, abl, kind, name)
                audit["wall_seconds"][f"{name}/{kind}/{abl}"] = time.perf_counter() - t0
                if log:
                    log(f"{name} {kind} {abl}: ttp95={ttp95(c)}")
                stem = f"{name}_{kind}_{abl}"
                with open(out / "curves" / f"{stem}.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["ttp_ms", "success_rate", "median_length_m"])
                    for p in c.points:
                        w.writerow([repr(p.ttp * 1000), repr(p.success_rate), "" if not p.lengths else repr(p.median_length)])
                t = ttp95(c)
                report["curves"].append(
                    {
                        "query": name,
                        "planner": kind,
                        "ablation": abl,
                        "csv": f"curves/{stem}.csv",
                        "samples": [
                            {"ttp_ms": p.ttp * 1000, "success_rate": p.success_rate, "median_length_m": _fmt(p.median_length)}
                            for p in c.points
                        ],
                        "ttp95_ms": str(t) if isinstance(t, AboveRange) else t * 1000,
                        "l95_m": _fmt(l95(c, t)),
                        "l_conv_m": _fmt(l_conv(c)),
                    }
                )
            try:
                rows = efficiency(curves)
            except ValueError as exc:
                report["efficiency"].append({"query": name, "planner": kind, "error": str(exc)})
                continue
            for r in rows:
                t_ms = str(r.ttp95) if isinstance(r.ttp95, AboveRange) else r.ttp95 * 1000
                report["efficiency"].append(
                    {
                        "query": name,
                        "planner": kind,
                        "ablation": r.ablation,
                        "ttp95_ms": t_ms,
                        "l95_m": _fmt(r.l95),
                        "l_conv_m": _fmt(r.l_conv),
                        "eta_ttp": r.eta_ttp,
                        "eta_l": r.eta_l,
                        "eta": r.eta,
                        "eta_bar": r.eta_bar,
                    }
                )
                eff_rows.append(
                    [name, kind, r.ablation, _cell(r.ttp95 * 1000 if not isinstance(r.ttp95, AboveRange) else r.ttp95),
                     _cell(r.l95), _cell(r.l_conv), _cell(r.eta_ttp), _cell(r.eta_l), _cell(r.eta), _cell(r.eta_bar)]
                )

    spd = scenario.get("speedup")
    if spd:
        qs = [(q["start"] if isinstance(q["start"], str) else tuple(q["start"]),
               q["goal"] if isinstance(q["goal"], str) else tuple(q["goal"])) for q in scenario["queries"]]
        try:
            rows = speedup(env, qs, spd.get("ttp", 1.0), PlannerConfig(kind="prmstar", robot_radius=robot_radius), spd.get("workers"), seed)
            audit["speedup"] = rows
            audit["speedup_by_subproblems"] = group_speedups(rows)
        except ValueError as exc:
            audit["speedup_error"] = str(exc)

    with open(out / "efficiency.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "planner", "ablation", "ttp95_ms", "l95_m", "l_conv_m", "eta_ttp", "eta_l", "eta", "eta_bar"])
        w.writerows(eff_rows)
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    (out / "audit.json").write_text(json.dumps(audit, indent=1, sort_keys=True) + "\n")
    return report
