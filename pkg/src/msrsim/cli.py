"""Command-line entry point: run scenarios, certify graphs, generate topologies."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import graph as G
from . import scenario_io
from .engine import ScenarioError, ScheduleError, run
from .model import NonFiniteStateError
from .svg import trace_charts

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_INPUT = 2
EXIT_INVARIANT = 3
EXIT_CAP = 4


def _resolve_scenario(ref: str) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    try:
        return scenario_io.preset_path(ref)
    except KeyError as exc:
        raise FileNotFoundError(f"{ref}: no such file or preset") from exc


def _describe_graph(sc, cap: int, threads: int) -> str:
    g = sc.graph_at(0) if not isinstance(sc.graph, G.GraphSequence) else None
    if g is None:
        seq = sc.graph
        return f"graph: sequence of {len(seq.graphs)} graphs, window {seq.window}"
    if g.n > cap:
        return f"graph: {g.n} nodes, {len(g.edges)} edges (robustness not certified above cap {cap})"
    rep = G.max_robustness(g, cap=cap, threads=threads)
    r = rep.max_r()
    return f"graph: {g.n} nodes, {len(g.edges)} edges, ({r},{rep.max_s(r)})-robust, max r = {r}"


def cmd_run(args) -> int:
    try:
        path = _resolve_scenario(args.scenario)
        sc = scenario_io.load(path)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except scenario_io.ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT if "invariant" in str(exc) else EXIT_INPUT
    if args.seed is not None:
        import dataclasses

        sc = dataclasses.replace(sc, seed=args.seed)
    try:
        res = run(sc)
    except (ScenarioError, ScheduleError, NonFiniteStateError) as exc:
        print(f"error: run aborted: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(res.trace.to_csv())
    (out / "metrics.csv").write_text(res.metrics.to_csv())
    pos, vel = trace_charts(res.trace, sc.normal_ids)
    (out / "positions.svg").write_text(pos)
    (out / "velocities.svg").write_text(vel)

    m = res.metrics
    print(f"scenario: {sc.name or path.stem} ({path})")
    print(_describe_graph(sc, args.cap, args.threads))
    print(f"steps: {sc.horizon}, normal vehicles: {', '.join(str(i) for i in sc.normal_ids)}")
    if sc.horizon == 0:
        print("verdict: none (empty horizon)")
    elif m.converged:
        print(f"verdict: converged at step {m.convergence_step} (Dx, Dv < {sc.epsilon})")
    else:
        print(f"verdict: no convergence (final Dx = {m.Dx[-1]:.6g}, Dv = {m.Dv[-1]:.6g})")
    if sc.horizon > 0:
        groups = "; ".join("{" + ", ".join(map(str, g)) + "}" for g in m.groups)
        print(f"groups: {len(m.groups)}  {groups}")
        if m.slope is not None:
            print(f"rate fit: slope {m.slope:.6g} per step over [{m.fit_window[0]}, {m.fit_window[1]}), R^2 = {m.fit_r2:.4f}")
        else:
            print("rate fit: not enough data above the rounding floor")
        print(f"safety interval: {m.safety_violations} expansions (largest {m.safety_max_expansion:.6g})")
        print(f"filter envelope violations: {m.envelope_violations} of {m.filter_calls} filter calls")
    print(f"wrote {out}/trace.csv, metrics.csv, positions.svg, velocities.svg")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        g = G.read_edge_list(args.graph)
    except (OSError, G.GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.max:
            rep = G.max_robustness(g, cap=args.cap, threads=args.threads)
            print(rep.table())
            top = rep.top()
            print(f"top: ({top[0]}, {top[1]})")
            return EXIT_OK
        if args.r is None:
            print("error: give r [s] or --max", file=sys.stderr)
            return EXIT_INPUT
        res = G.is_rs_robust(g, args.r, args.s, cap=args.cap, threads=args.threads)
    except G.EnumerationCapError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CAP
    except G.GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if res.robust:
        print(f"certified: ({args.r}, {args.s})-robust")
        return EXIT_OK
    v1, v2 = res.witness
    print(f"refuted: not ({args.r}, {args.s})-robust")
    print(f"witness: V1 = {sorted(v1)}, V2 = {sorted(v2)}")
    print(f"  X1 = {sorted(G.x_set(g, v1, args.r))}, X2 = {sorted(G.x_set(g, v2, args.r))}")
    return EXIT_REFUTED


def cmd_generate(args) -> int:
    params = {}
    if args.kind in ("complete", "edgeless", "random"):
        if args.n is None:
            print(f"error: {args.kind} needs --n", file=sys.stderr)
            return EXIT_INPUT
        params["n"] = args.n
    if args.kind == "counterexample":
        params["f"] = args.f
    if args.kind == "random":
        params["density"] = args.density
        params["seed"] = args.seed
    try:
        g = G.generate(args.kind, **params)
    except G.GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = G.format_edge_list(g)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}: {g.n} nodes, {len(g.edges)} edges")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in scenario_io.preset_names():
            print(name)
        return EXIT_OK
    try:
        path = scenario_io.preset_path(args.name)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    if args.action == "path":
        print(path)
    else:
        sys.stdout.write(path.read_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msrsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file or preset")
    r.add_argument("scenario", help="path to a .scn file or a preset name")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--threads", type=int, default=1, help="certifier threads for the graph summary")
    r.add_argument("--cap", type=int, default=G.DEFAULT_CAP, help="enumeration cap for the graph summary")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-robustness", help="certify (r,s)-robustness of an edge-list graph")
    c.add_argument("graph", help="edge-list file")
    c.add_argument("r", type=int, nargs="?")
    c.add_argument("s", type=int, nargs="?", default=1)
    c.add_argument("--max", action="store_true", help="print the full (r,s) report")
    c.add_argument("--cap", type=int, default=G.DEFAULT_CAP, help=f"largest n to enumerate (default {G.DEFAULT_CAP})")
    c.add_argument("--threads", type=int, default=1)
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("generate", help="write a generated graph as an edge list")
    g.add_argument("kind", choices=["complete", "edgeless", "counterexample", "random"])
    g.add_argument("--n", type=int)
    g.add_argument("--f", type=int, default=1)
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output file (default: stdout)")
    g.set_defaults(func=cmd_generate)

    pr = sub.add_parser("presets", help="bundled scenarios")
    pr.add_argument("action", choices=["list", "show", "path"])
    pr.add_argument("name", nargs="?")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets" and args.action != "list" and not args.name:
        parser.error(f"presets {args.action} needs a preset name")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
