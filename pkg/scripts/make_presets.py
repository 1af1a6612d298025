"""Regenerate the bundled .scn presets from their Python definitions.

    python3 scripts/make_presets.py [outdir]

Vehicle ids are 0-based: vehicle 1 in the published experiments is id 0,
and the malicious vehicle 4 is id 3.
"""

from __future__ import annotations

import sys
from pathlib import Path

from msrsim import scenario_io
from msrsim.adversary import AttackScript, DelaySchedule, Motion, SensingModel
from msrsim.engine import Scenario, UpdateRule, prop1_scenario, theorem1_necessity_scenario
from msrsim.expr import Expr
from msrsim.graph import DirectedGraph, GraphSequence, complete, is_rs_robust
from msrsim.model import ModelParams

# 5-node stand-in: (2,2)-robust, not 3-robust; found by search (see ledger)
SPLIT_GRAPH = DirectedGraph.from_edges(
    5, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 0), (1, 2), (1, 3), (1, 4), (3, 0), (3, 1), (3, 2), (3, 4)]
)

# hand-built graph that fails (2,2)-robustness with V1={0,1}, V2={3,4}
NECESSITY_GRAPH = DirectedGraph.from_edges(
    5, [(2, 0), (3, 0), (0, 1), (2, 1), (4, 3), (2, 3), (3, 4), (2, 4), (0, 2), (1, 2), (3, 2), (4, 2)]
)
NECESSITY_WITNESS = ({0, 1}, {3, 4})

UPDATES = (UpdateRule(12, 6), UpdateRule(12, 9), UpdateRule(12, 11), UpdateRule(), UpdateRule(12, 4))
LIE = Expr("parity(2, 200)")


def setting(which: int, graph: DirectedGraph, name: str) -> Scenario:
    v0 = (50, 70, 70, 60, 10)
    if which == 1:
        x0, alpha = (4, 250, 150, 8, 0), (2, 3, 3, 2, 2)
        script = AttackScript(kind="broadcast_fn", value=LIE, frame="p")
        sensing = SensingModel()
    else:
        x0, alpha = (100, 400, 500, 10, 0), (2, 10, 10, 2, 2)
        script = AttackScript(
            kind="broadcast_fn",
            per_receiver=((0, LIE), (4, LIE)),
            frame="p",
            motion=Motion("trajectory", Expr("0.1*k + 5*sqrt(k) + k*T*r")),
        )
        sensing = SensingModel(frozenset({1, 2}))
    return Scenario(
        n=5, f=1, params=ModelParams(0.01, 100), graph=graph, alpha=alpha, x0=x0, v0=v0, horizon=20000,
        updates=UPDATES, delays=DelaySchedule(11), malicious=((3, script),), sensing=sensing, epsilon=0.5, name=name,
    )


def halves(g: DirectedGraph) -> tuple[DirectedGraph, DirectedGraph]:
    fwd = {e: w for e, w in g.weights.items() if e[0] < e[1]}
    back = {e: w for e, w in g.weights.items() if e[0] > e[1]}
    return DirectedGraph(g.n, fwd), DirectedGraph(g.n, back)


def joint(last: DirectedGraph, name: str) -> Scenario:
    """Graphs alternate between the two halves of ``last`` and ``last`` itself, window 2."""
    a, b = halves(last)
    seq = GraphSequence((a, b, last), window=2)
    script = AttackScript(
        kind="broadcast_fn",
        value=Expr("2"),
        per_receiver=((1, Expr("200")), (2, Expr("200"))),
        frame="p",
    )
    return Scenario(
        n=5, f=1, params=ModelParams(0.01, 100), graph=seq, alpha=(2, 3, 3, 2, 2), x0=(4, 250, 150, 8, 0),
        v0=(50, 70, 70, 60, 10), horizon=20000, delays=DelaySchedule(2), malicious=((3, script),), epsilon=0.5,
        name=name,
    )


def build() -> dict[str, Scenario]:
    assert is_rs_robust(SPLIT_GRAPH, 2, 2).robust and not is_rs_robust(SPLIT_GRAPH, 3, 1).robust
    k5 = complete(5)
    nec = theorem1_necessity_scenario(NECESSITY_GRAPH, 1, NECESSITY_WITNESS, horizon=2000)
    return {
        "setting1_fail": setting(1, SPLIT_GRAPH, "setting1_fail"),
        "setting1_success": setting(1, k5, "setting1_success"),
        "setting2_fail": setting(2, SPLIT_GRAPH, "setting2_fail"),
        "setting2_success": setting(2, k5, "setting2_success"),
        "prop1_attack_f1": prop1_scenario(1, a=0.0, b=1.0, c=0.5, delta=0.5, horizon=2000),
        "necessity_witness": nec,
        "joint_success": joint(k5, "joint_success"),
        "joint_fail": joint(SPLIT_GRAPH, "joint_fail"),
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else Path(__file__).resolve().parents[1] / "src" / "msrsim" / "presets"
    out.mkdir(parents=True, exist_ok=True)
    for name, sc in build().items():
        path = out / f"{name}.scn"
        path.write_text(scenario_io.dumps(sc))
        back = scenario_io.load(path)
        if back != sc:
            raise SystemExit(f"{name}: round trip changed the scenario")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
