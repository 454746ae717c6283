"""Command-line interface: gen-env, plan, replan, bench."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from spath.pipeline import (
    CLI_MODES,
    Query,
    SolutionCache,
    SubproblemPool,
    block_doorway,
    replan,
    result_from_dict,
    result_to_dict,
    run,
    setup,
)
from spath.planners import PLANNERS, PlannerConfig

log = logging.getLogger("spath")

PRESETS = ("sf1", "sf2", "rf1", "rf2")


def _endpoint(text: str):
    parts = text.split(",")
    if len(parts) == 2:
        try:
            return (float(parts[0]), float(parts[1]))
        except ValueError:
            pass
    return text


def cmd_gen_env(args) -> int:
    from spath import envgen

    if args.spec in PRESETS:
        if args.spec in ("rf1", "rf2"):
            sg, grid = envgen.rf1_like() if args.spec == "rf1" else envgen.rf2_like()
            spec = None
        else:
            spec = envgen.SF1_SPEC if args.spec == "sf1" else envgen.SF2_SPEC
    else:
        spec = envgen.FloorSpec.from_dict(json.loads(Path(args.spec).read_text()))
    if spec is not None:
        if args.seed is not None:
            spec = envgen.FloorSpec.from_dict({**spec.to_dict(), "seed": args.seed})
        sg, grid = envgen.generate_checked(spec)
    out = envgen.save_environment(args.out, sg, grid, spec)
    report = envgen.connectivity_check(sg, grid)
    rooms = sorted(r for r in sg.rooms if r.startswith("R")) or sorted(sg.rooms)
    env = setup(sg, grid)
    start, goal = rooms[0], rooms[-1]
    from spath.semantic import astar

    route = astar(env.semantic_graph, start, goal)
    blockages = [route.doorways[len(route.doorways) // 2]] if route.doorways else []
    envgen.write_scenario(
        out / "scenario.json",
        ".",
        [{"name": "q0", "start": start, "goal": goal, "blockages": blockages}],
    )
    print(f"wrote {out}: {len(sg.rooms)} rooms, {len(sg.doorways)} doorways, {sg.n_walls} walls, "
          f"{len(report['disagreements'])} connectivity disagreements")
    return 0


def _load_env(env_dir, blocked=()):
    from spath.envgen import load_environment

    sg, grid = load_environment(env_dir)
    env = setup(sg, grid)
    for d in blocked:
        env = block_doorway(env, d)
    return env


def cmd_plan(args) -> int:
    env = _load_env(args.env)
    cfg = PlannerConfig(kind=args.planner, robot_radius=args.robot_radius, clock=args.clock)
    q = Query(_endpoint(args.start), _endpoint(args.goal), ttp=args.ttp / 1000.0, mode=args.mode, planner=cfg, seed=args.seed)
    if q.mode == "SPATH_PAR":
        with SubproblemPool(env.df, args.threads) as pool:
            res = run(env, q, SolutionCache(), pool)
    else:
        res = run(env, q, SolutionCache())
    doc = result_to_dict(res, str(Path(args.env).resolve()))
    doc["blocked"] = []
    _emit(doc, args.out)
    return 0 if res.success else 1


def cmd_replan(args) -> int:
    path = Path(args.result)
    doc = json.loads(path.read_text())
    prev = result_from_dict(doc)
    blocked = list(doc.get("blocked", []))
    env = _load_env(doc["env"], blocked)
    cache = SolutionCache.from_result(prev)
    res = replan(env, args.block, prev, cache, mu=args.mu)
    out = result_to_dict(res, doc["env"])
    out["blocked"] = blocked + [args.block]
    _emit(out, args.out or str(path.with_suffix(".replan.json")))
    return 0 if res.success else 1


def cmd_bench(args) -> int:
    from spath.bench import load_scenario, run_bench

    scenario = load_scenario(args.scenario)
    run_bench(scenario, args.out, trials=args.trials, points=args.points, seed=args.seed, log=log.info)
    print(f"wrote {Path(args.out) / 'report.json'}")
    return 0


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=1)
    if out:
        Path(out).write_text(text + "\n")
        n = len(doc["legs"])
        print(f"{'solved' if doc['success'] else 'FAILED'}: length={doc['length']} legs={n} "
              f"cache_hits={doc['cache_hits']} -> {out}")
        for line in doc["instructions"]:
            print("  " + line)
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spath", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-env", help="generate a synthetic floor")
    g.add_argument("--spec", required=True, help="FloorSpec JSON file or preset: " + ", ".join(PRESETS))
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_env)

    pl = sub.add_parser("plan", help="plan one query")
    pl.add_argument("--env", required=True)
    pl.add_argument("--start", required=True, help="x,y or room id")
    pl.add_argument("--goal", required=True, help="x,y or room id")
    pl.add_argument("--mode", choices=sorted(CLI_MODES), default="spath-seq")
    pl.add_argument("--planner", choices=PLANNERS, default="prmstar")
    pl.add_argument("--ttp", type=float, default=1000.0, help="time budget in ms")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--threads", type=int, default=None)
    pl.add_argument("--clock", choices=("cpu", "wall", "work"), default="cpu")
    pl.add_argument("--robot-radius", type=float, default=0.3)
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_plan)

    r = sub.add_parser("replan", help="block a doorway and replan from a saved result")
    r.add_argument("--result", required=True)
    r.add_argument("--block", required=True)
    r.add_argument("--mu", type=float, default=0.5)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_replan)

    b = sub.add_parser("bench", help="run the benchmark protocol on a scenario")
    b.add_argument("--scenario", required=True)
    b.add_argument("--trials", type=int, default=None)
    b.add_argument("--points", type=int, default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
