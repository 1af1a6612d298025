"""Reading and writing ``.scn`` scenario files (YAML).

Every parse or validation error carries the line and column of the
offending node. Unknown keys are rejected.

Layout::

    name: setting1_success
    n: 5
    f: 1
    T: 0.01
    r: 100
    model: total            # total | local | both
    graph:
      edges: [[0, 1], [1, 0, 2.5]]          # j i [weight]
      # or  generator: {kind: complete, n: 5}
      # or  sequence: {window: 2, graphs: [{edges: ...}, ...]}
    weights: [[0, 1, 2.0]]  # optional per-edge overrides
    offsets: {eta: [0, 0, 0, 0, 0]}         # or {delta: [[...], ...]}
    alpha: [2, 3, 3, 2, 2]
    x0: [...]
    v0: [...]
    updates:
      - {vehicle: 0, period: 12, phase: 6}
      - {vehicle: 1, steps: [0, 5, 9]}
    delays:
      bound: 11
      default: "0"
      edges: [{from: 3, to: 0, delay: "parity(0, 1)"}]
    malicious:
      - vehicle: 3
        script: {kind: broadcast_fn, frame: p, value: "parity(2, 200)"}
    sensing: {active: [1, 2]}
    horizon: 20000
    epsilon: 0.5
    seed: 0
    omissive: false
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .adversary import AdversaryError, AttackScript, DelaySchedule, Motion, SensingModel
from .engine import Scenario, ScenarioError, UpdateRule
from .expr import Expr, ExprError
from .graph import DirectedGraph, GraphError, GraphSequence, generate
from .model import ModelParams
from .protocol import OffsetSpec, ProtocolError

TOP_KEYS = {
    "name", "n", "f", "T", "r", "model", "graph", "weights", "offsets", "alpha", "x0", "v0",
    "updates", "delays", "malicious", "sensing", "horizon", "epsilon", "seed", "omissive",
}
REQUIRED = ("n", "f", "T", "r", "graph", "alpha", "x0", "v0", "horizon")


class ScenarioFileError(ValueError):
    def __init__(self, message: str, source: str = "<scenario>", line: int | None = None, column: int | None = None):
        where = source if line is None else f"{source}:{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line
        self.column = column


class _Reader:
    """Walks a composed YAML node tree, converting values and reporting positions."""

    def __init__(self, source: str):
        self.source = source
        self._loader = None

    def fail(self, node, message: str):
        mark = node.start_mark if node is not None else None
        if mark is None:
            raise ScenarioFileError(message, self.source)
        raise ScenarioFileError(message, self.source, mark.line + 1, mark.column + 1)

    def scalar(self, node):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, "expected a scalar value")
        return self._loader.construct_object(node)

    def mapping(self, node, allowed: set[str], required: tuple[str, ...] = (), what: str = "mapping") -> dict:
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"expected a {what}")
        out = {}
        for knode, vnode in node.value:
            key = self.scalar(knode)
            if key not in allowed:
                self.fail(knode, f"unknown key {key!r} in {what}; allowed: {', '.join(sorted(map(str, allowed)))}")
            if key in out:
                self.fail(knode, f"duplicate key {key!r}")
            out[key] = vnode
        for key in required:
            if key not in out:
                self.fail(node, f"missing required key {key!r} in {what}")
        return out

    def seq(self, node, what: str = "list") -> list:
        if not isinstance(node, yaml.SequenceNode):
            self.fail(node, f"expected a {what}")
        return list(node.value)

    def integer(self, node, lo: int | None = None) -> int:
        v = self.scalar(node)
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(node, f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            self.fail(node, f"expected an integer >= {lo}, got {v}")
        return v

    def number(self, node) -> float:
        v = self.scalar(node)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(node, f"expected a number, got {v!r}")
        return float(v)

    def numbers(self, node) -> list[float]:
        return [self.number(x) for x in self.seq(node, "list of numbers")]

    def ints(self, node) -> list[int]:
        return [self.integer(x) for x in self.seq(node, "list of integers")]

    def expr(self, node) -> Expr:
        v = self.scalar(node)
        try:
            return Expr.coerce(v)
        except ExprError as exc:
            self.fail(node, str(exc))

    def boolean(self, node) -> bool:
        v = self.scalar(node)
        if not isinstance(v, bool):
            self.fail(node, f"expected true or false, got {v!r}")
        return v

    # ---------------------------------------------------------- sections

    def edges(self, node, n: int) -> dict:
        w = {}
        for e in self.seq(node, "list of edges"):
            parts = self.seq(e, "edge [j, i] or [j, i, weight]")
            if len(parts) not in (2, 3):
                self.fail(e, "edge must be [j, i] or [j, i, weight]")
            j, i = self.integer(parts[0]), self.integer(parts[1])
            w[(j, i)] = self.number(parts[2]) if len(parts) == 3 else 1.0
        return w

    def one_graph(self, node, n: int) -> DirectedGraph:
        m = self.mapping(node, {"edges", "generator"}, what="graph")
        try:
            if ("edges" in m) == ("generator" in m):
                self.fail(node, "graph needs exactly one of 'edges' or 'generator'")
            if "edges" in m:
                return DirectedGraph(n, self.edges(m["edges"], n))
            gm = self.mapping(m["generator"], {"kind", "n", "f", "density", "seed"}, ("kind",), "generator")
            params = {k: self.scalar(v) for k, v in gm.items() if k != "kind"}
            g = generate(self.scalar(gm["kind"]), **params)
        except (GraphError, KeyError, TypeError) as exc:
            self.fail(node, f"bad graph: {exc}")
        if g.n != n:
            self.fail(node, f"generated graph has {g.n} nodes, scenario declares n={n}")
        return g

    def graph(self, node, n: int):
        if isinstance(node, yaml.MappingNode) and any(self.scalar(k) == "sequence" for k, _ in node.value):
            m = self.mapping(node, {"sequence"}, what="graph")
            sm = self.mapping(m["sequence"], {"window", "graphs"}, ("window", "graphs"), "graph sequence")
            graphs = [self.one_graph(g, n) for g in self.seq(sm["graphs"], "list of graphs")]
            try:
                return GraphSequence(tuple(graphs), self.integer(sm["window"], 1))
            except GraphError as exc:
                self.fail(node, str(exc))
        return self.one_graph(node, n)

    def offsets(self, node) -> OffsetSpec:
        m = self.mapping(node, {"eta", "delta"}, what="offsets")
        if len(m) != 1:
            self.fail(node, "offsets need exactly one of 'eta' or 'delta'")
        if "eta" in m:
            return OffsetSpec(tuple(self.numbers(m["eta"])))
        rows = [self.numbers(row) for row in self.seq(m["delta"], "offset matrix")]
        try:
            return OffsetSpec.from_matrix(rows)
        except ProtocolError as exc:
            self.fail(m["delta"], str(exc))

    def updates(self, node, n: int) -> tuple[UpdateRule, ...]:
        rules: dict[int, UpdateRule] = {}
        for item in self.seq(node, "list of update rules"):
            m = self.mapping(item, {"vehicle", "period", "phase", "steps"}, ("vehicle",), "update rule")
            i = self.integer(m["vehicle"], 0)
            if i >= n:
                self.fail(m["vehicle"], f"vehicle {i} outside [0, {n})")
            if i in rules:
                self.fail(item, f"vehicle {i} has two update rules")
            try:
                if "steps" in m:
                    if "period" in m or "phase" in m:
                        self.fail(item, "use either 'steps' or 'period'/'phase', not both")
                    rules[i] = UpdateRule(steps=tuple(self.ints(m["steps"])))
                else:
                    period = self.integer(m["period"], 1) if "period" in m else 1
                    phase = self.integer(m["phase"], 0) if "phase" in m else 0
                    rules[i] = UpdateRule(period, phase)
            except ScenarioError as exc:
                self.fail(item, str(exc))
        return tuple(rules.get(i, UpdateRule()) for i in range(n))

    def delays(self, node) -> DelaySchedule:
        m = self.mapping(node, {"bound", "default", "edges"}, ("bound",), "delays")
        edges = []
        if "edges" in m:
            for item in self.seq(m["edges"], "list of delay edges"):
                em = self.mapping(item, {"from", "to", "delay"}, ("from", "to", "delay"), "delay edge")
                edges.append(((self.integer(em["from"]), self.integer(em["to"])), self.expr(em["delay"])))
        kw = {"default": self.expr(m["default"])} if "default" in m else {}
        try:
            return DelaySchedule(self.integer(m["bound"], 0), tuple(edges), **kw)
        except AdversaryError as exc:
            self.fail(node, str(exc))

    def script(self, node) -> AttackScript:
        keys = {"kind", "value", "per_receiver", "values", "frame", "motion", "when"}
        m = self.mapping(node, keys, ("kind",), "attack script")
        kw: dict = {"kind": self.scalar(m["kind"])}
        if "value" in m:
            kw["value"] = self.expr(m["value"])
        if "per_receiver" in m:
            pm = m["per_receiver"]
            if not isinstance(pm, yaml.MappingNode):
                self.fail(pm, "per_receiver must map receiver ids to expressions")
            kw["per_receiver"] = tuple((self.integer(k), self.expr(v)) for k, v in pm.value)
        if "values" in m:
            vals = self.seq(m["values"], "pair [even, odd]")
            if len(vals) != 2:
                self.fail(m["values"], "alternating values need exactly [even, odd]")
            kw["values"] = (self.expr(vals[0]), self.expr(vals[1]))
        if "frame" in m:
            kw["frame"] = self.scalar(m["frame"])
        if "motion" in m:
            mm = self.mapping(m["motion"], {"kind", "expr"}, ("kind",), "motion")
            try:
                kw["motion"] = Motion(self.scalar(mm["kind"]), self.expr(mm["expr"]) if "expr" in mm else None)
            except AdversaryError as exc:
                self.fail(m["motion"], str(exc))
        if "when" in m:
            kw["silent_when"] = self.expr(m["when"])
        try:
            return AttackScript(**kw)
        except AdversaryError as exc:
            self.fail(node, str(exc))

    def malicious(self, node) -> tuple:
        out = []
        seen = set()
        for item in self.seq(node, "list of malicious vehicles"):
            m = self.mapping(item, {"vehicle", "script"}, ("vehicle", "script"), "malicious entry")
            i = self.integer(m["vehicle"], 0)
            if i in seen:
                self.fail(item, f"vehicle {i} listed twice")
            seen.add(i)
            out.append((i, self.script(m["script"])))
        return tuple(out)

    # -------------------------------------------------------------- top

    def scenario(self, text: str) -> Scenario:
        try:
            self._loader = yaml.SafeLoader(text)
            root = self._loader.get_single_node()
        except yaml.MarkedYAMLError as exc:
            mark = exc.problem_mark
            raise ScenarioFileError(f"YAML syntax: {exc.problem}", self.source,
                                    mark.line + 1 if mark else None, mark.column + 1 if mark else None) from None
        if root is None:
            raise ScenarioFileError("empty scenario file", self.source)
        m = self.mapping(root, TOP_KEYS, REQUIRED, "scenario")
        n = self.integer(m["n"], 2)
        kw: dict = {
            "n": n,
            "f": self.integer(m["f"], 0),
            "horizon": self.integer(m["horizon"], 0),
            "alpha": tuple(self.numbers(m["alpha"])),
            "x0": tuple(self.numbers(m["x0"])),
            "v0": tuple(self.numbers(m["v0"])),
        }
        try:
            kw["params"] = ModelParams(self.number(m["T"]), self.number(m["r"]))
        except ValueError as exc:
            self.fail(m["T"], str(exc))
        g = self.graph(m["graph"], n)
        if "weights" in m:
            over = self.edges(m["weights"], n)
            members = g.graphs if isinstance(g, GraphSequence) else (g,)
            for (j, i) in over:
                if not any((j, i) in h.weights for h in members):
                    self.fail(m["weights"], f"weight given for missing edge ({j}, {i})")
            rew = tuple(DirectedGraph(n, {e: over.get(e, w) for e, w in h.weights.items()}) for h in members)
            g = GraphSequence(rew, g.window) if isinstance(g, GraphSequence) else rew[0]
        kw["graph"] = g
        if "name" in m:
            kw["name"] = str(self.scalar(m["name"]))
        if "model" in m:
            kw["model"] = self.scalar(m["model"])
        if "offsets" in m:
            kw["offsets"] = self.offsets(m["offsets"])
        if "updates" in m:
            kw["updates"] = self.updates(m["updates"], n)
        if "delays" in m:
            kw["delays"] = self.delays(m["delays"])
        if "malicious" in m:
            kw["malicious"] = self.malicious(m["malicious"])
        if "sensing" in m:
            sm = self.mapping(m["sensing"], {"active"}, what="sensing")
            kw["sensing"] = SensingModel(frozenset(self.ints(sm["active"])) if "active" in sm else frozenset())
        if "epsilon" in m:
            kw["epsilon"] = self.number(m["epsilon"])
        if "seed" in m:
            kw["seed"] = self.integer(m["seed"])
        if "omissive" in m:
            kw["omissive"] = self.boolean(m["omissive"])
        sc = Scenario(**kw)
        try:
            sc.validate()
        except ScenarioError as exc:
            anchor = {"f-total": "malicious", "f-local": "malicious", "window <= tau": "delays",
                      "delay bound": "delays", "reception every tau steps": "updates"}.get(exc.invariant, exc.invariant)
            node = m.get(anchor, root)
            self.fail(node, f"invariant '{exc.invariant}' violated: {exc}")
        return sc


def loads(text: str, source: str = "<scenario>") -> Scenario:
    return _Reader(source).scenario(text)


def load(path) -> Scenario:
    path = Path(path)
    return loads(path.read_text(), str(path))


# ------------------------------------------------------------- writing


class _Flow(list):
    """A list emitted inline."""


def _flow_representer(dumper, data):
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=True)


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(_Flow, _flow_representer)


def _num(v: float):
    return int(v) if float(v).is_integer() and abs(v) < 2**53 else float(v)


def _edges(g: DirectedGraph) -> list:
    return [_Flow([j, i] if w == 1.0 else [j, i, w]) for (j, i), w in g.weights.items()]


def _script(s: AttackScript) -> dict:
    out: dict = {"kind": s.kind, "frame": s.frame}
    if s.value is not None:
        out["value"] = s.value.source
    if s.per_receiver:
        out["per_receiver"] = {i: e.source for i, e in s.per_receiver}
    if s.values is not None:
        out["values"] = _Flow([s.values[0].source, s.values[1].source])
    if s.motion.kind != "hold":
        out["motion"] = {"kind": s.motion.kind, "expr": s.motion.expr.source}
    if s.silent_when is not None:
        out["when"] = s.silent_when.source
    return out


def to_dict(sc: Scenario) -> dict:
    d: dict = {}
    if sc.name:
        d["name"] = sc.name
    d.update(n=sc.n, f=sc.f, T=sc.params.T, r=_num(sc.params.r), model=sc.model)
    if isinstance(sc.graph, GraphSequence):
        d["graph"] = {"sequence": {"window": sc.graph.window, "graphs": [{"edges": _edges(g)} for g in sc.graph.graphs]}}
    else:
        d["graph"] = {"edges": _edges(sc.graph)}
    d["offsets"] = {"eta": _Flow(_num(v) for v in sc.offsets.eta)}
    d["alpha"] = _Flow(_num(v) for v in sc.alpha)
    d["x0"] = _Flow(_num(v) for v in sc.x0)
    d["v0"] = _Flow(_num(v) for v in sc.v0)
    ups = []
    for i, u in enumerate(sc.updates):
        if u == UpdateRule():
            continue
        if u.steps is not None:
            ups.append({"vehicle": i, "steps": _Flow(u.steps)})
        else:
            ups.append({"vehicle": i, "period": u.period, "phase": u.phase})
    if ups:
        d["updates"] = ups
    delays: dict = {"bound": sc.delays.bound, "default": sc.delays.default.source}
    if sc.delays.edges:
        delays["edges"] = [{"from": j, "to": i, "delay": e.source} for (j, i), e in sc.delays.edges]
    d["delays"] = delays
    if sc.malicious:
        d["malicious"] = [{"vehicle": i, "script": _script(s)} for i, s in sc.malicious]
    d["sensing"] = {"active": _Flow(sorted(sc.sensing.active))}
    d.update(horizon=sc.horizon, epsilon=sc.epsilon, seed=sc.seed, omissive=sc.omissive)
    return d


def dumps(sc: Scenario) -> str:
    return yaml.dump(to_dict(sc), Dumper=_Dumper, sort_keys=False, default_flow_style=False, width=120)


def dump(sc: Scenario, path) -> None:
    Path(path).write_text(dumps(sc))


# ------------------------------------------------------------- presets

PRESET_DIR = Path(__file__).resolve().parent / "presets"


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.scn"))


def preset_path(name: str) -> Path:
    path = PRESET_DIR / f"{name}.scn"
    if not path.is_file():
        raise KeyError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return path


def load_preset(name: str) -> Scenario:
    return load(preset_path(name))
