"""Deterministic step-driven execution of a scenario.

Per step k, in ascending vehicle id:

1. every normal vehicle scheduled to update at k ingests the neighbour
   values delivered at k (value of j stamped k - tau_ij[k]) and reruns
   the ADP-MSR filter on its view;
2. every normal vehicle computes its control from its frozen retained set
   and stored neighbour values against its current own state;
3. malicious vehicles take their scripted input;
4. everyone advances one sampling period.

The protocol runs in transformed coordinates; the trace keeps raw x, v.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import protocol
from .adversary import (
    AttackScript,
    CompiledScript,
    DelaySchedule,
    SensingModel,
    prop1_attack,
    validate_f_local,
    validate_f_total,
    warn_link_additions,
)
from .graph import DirectedGraph, GraphSequence, counterexample, counterexample_blocks, is_violating_pair, x_set
from .model import ModelParams, NonFiniteStateError, step_xv
from .protocol import NeighborEntry, NeighborView, OffsetSpec

MALICIOUS_MODELS = ("total", "local", "both")


class ScenarioError(ValueError):
    """A scenario violates one of its declared invariants."""

    def __init__(self, message: str, invariant: str = "scenario"):
        super().__init__(message)
        self.invariant = invariant


class ScheduleError(RuntimeError):
    def __init__(self, message: str, step: int, edge: tuple[int, int] | None = None):
        where = f"step {step}" + (f", edge {edge[0]}->{edge[1]}" if edge else "")
        super().__init__(f"{where}: {message}")
        self.step = step
        self.edge = edge


@dataclass(frozen=True)
class UpdateRule:
    """When a vehicle refreshes its neighbour data: periodic or an explicit list."""

    period: int = 1
    phase: int = 0
    steps: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.steps is not None:
            object.__setattr__(self, "steps", tuple(sorted(set(int(s) for s in self.steps))))
        elif self.period < 1 or self.phase < 0:
            raise ScenarioError(f"bad update rule period={self.period} phase={self.phase}", "updates")

    def updates_at(self, k: int) -> bool:
        if self.steps is not None:
            i = bisect.bisect_left(self.steps, k)
            return i < len(self.steps) and self.steps[i] == k
        return k >= self.phase and (k - self.phase) % self.period == 0


@dataclass(frozen=True)
class Scenario:
    n: int
    f: int
    params: ModelParams
    graph: DirectedGraph | GraphSequence
    alpha: tuple[float, ...]
    x0: tuple[float, ...]
    v0: tuple[float, ...]
    horizon: int
    offsets: OffsetSpec | None = None
    updates: tuple[UpdateRule, ...] | None = None
    delays: DelaySchedule = field(default_factory=lambda: DelaySchedule(0))
    malicious: tuple[tuple[int, AttackScript], ...] = ()
    sensing: SensingModel = field(default_factory=SensingModel)
    epsilon: float = 0.5
    seed: int = 0
    model: str = "total"
    omissive: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "malicious", tuple(sorted(self.malicious, key=lambda t: t[0])))
        if self.offsets is None:
            object.__setattr__(self, "offsets", OffsetSpec.zeros(self.n))
        if self.updates is None:
            object.__setattr__(self, "updates", tuple(UpdateRule() for _ in range(self.n)))
        for k in ("alpha", "x0", "v0"):
            object.__setattr__(self, k, tuple(float(v) for v in getattr(self, k)))

    @property
    def malicious_ids(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.malicious)

    @property
    def normal_ids(self) -> list[int]:
        m = self.malicious_ids
        return [i for i in range(self.n) if i not in m]

    def graph_at(self, k: int) -> DirectedGraph:
        g = self.graph
        return g.at(k) if isinstance(g, GraphSequence) else g

    def member_graphs(self) -> tuple[DirectedGraph, ...]:
        g = self.graph
        return g.graphs if isinstance(g, GraphSequence) else (g,)

    def validate(self) -> None:
        """Check every static invariant; raise ScenarioError naming the one broken."""
        n = self.n
        if self.horizon < 0:
            raise ScenarioError(f"horizon must be >= 0, got {self.horizon}", "horizon")
        if self.f < 0:
            raise ScenarioError(f"f must be >= 0, got {self.f}", "f")
        if not self.epsilon > 0:
            raise ScenarioError(f"epsilon must be positive, got {self.epsilon}", "epsilon")
        for g in self.member_graphs():
            if g.n != n:
                raise ScenarioError(f"graph has {g.n} nodes, scenario declares n={n}", "graph")
        for key in ("alpha", "x0", "v0"):
            vals = getattr(self, key)
            if len(vals) != n:
                raise ScenarioError(f"{key} has {len(vals)} entries, expected {n}", key)
            if not all(math.isfinite(v) for v in vals):
                raise ScenarioError(f"{key} has non-finite entries", key)
        if any(a <= 0 for i, a in enumerate(self.alpha) if i not in self.malicious_ids):
            raise ScenarioError("alpha must be positive for every normal vehicle", "alpha")
        if len(self.offsets.eta) != n:
            raise ScenarioError(f"offsets cover {len(self.offsets.eta)} vehicles, expected {n}", "offsets")
        if len(self.updates) != n:
            raise ScenarioError(f"{len(self.updates)} update rules, expected {n}", "updates")
        for i, _ in self.malicious:
            if not 0 <= i < n:
                raise ScenarioError(f"malicious vehicle {i} outside [0, {n})", "malicious")
        for i in self.sensing.active:
            if not 0 <= i < n:
                raise ScenarioError(f"sensing entry {i} outside [0, {n})", "sensing")
        if self.model not in MALICIOUS_MODELS:
            raise ScenarioError(f"model must be one of {MALICIOUS_MODELS}", "model")
        m = self.malicious_ids
        if self.model in ("total", "both") and not validate_f_total(m, self.f):
            raise ScenarioError(f"{len(m)} malicious vehicles exceed the f-total bound f={self.f}", "f-total")
        if self.model in ("local", "both"):
            for k, g in enumerate(self.member_graphs()):
                if not validate_f_local(g, m, self.f):
                    raise ScenarioError(f"graph {k} violates the f-local bound f={self.f}", "f-local")
            if isinstance(self.graph, GraphSequence):
                warn_link_additions(self.graph.graphs, m, self.f)
        if isinstance(self.graph, GraphSequence) and self.graph.window > self.delays.bound:
            raise ScenarioError(
                f"joint-robustness window {self.graph.window} exceeds the delay bound {self.delays.bound}",
                "window <= tau",
            )
        self._validate_delays()

    def _validate_delays(self) -> None:
        """Every delay lies in [0, tau] and stored values never get staler than tau."""
        tau = self.delays.bound
        delays = self.delays.compile(self.params.T, self.params.r)
        m = self.malicious_ids
        scripted = {e for e, _ in self.delays.edges}
        for i in self.normal_ids:
            rule = self.updates[i]
            last: dict[int, int] = {}
            nbrs0 = self.graph_at(0).in_neighbors(i)
            for j in nbrs0:
                last[j] = 0
            for k in range(self.horizon + 1):
                g = self.graph_at(k)
                upd = rule.updates_at(k)
                for j in g.in_neighbors(i):
                    if upd or (j, i) in scripted:
                        d = delays(j, i, k)
                        if not 0 <= d <= tau:
                            raise ScenarioError(
                                f"step {k}, edge {j}->{i}: delay {d} outside [0, {tau}]", "delay bound"
                            )
                        if upd:
                            last[j] = max(last.get(j, k - d), k - d)
                if isinstance(self.graph, GraphSequence):
                    continue
                for j, stamp in last.items():
                    if j not in m and k - stamp > tau:
                        raise ScenarioError(
                            f"step {k}, edge {j}->{i}: value is {k - stamp} steps old, bound is {tau}",
                            "reception every tau steps",
                        )


# --------------------------------------------------------------------- trace


@dataclass
class Trace:
    n: int
    malicious: frozenset[int]
    x: list[list[float]] = field(default_factory=list)
    v: list[list[float]] = field(default_factory=list)
    u: list[list[float]] = field(default_factory=list)
    updated: list[list[bool]] = field(default_factory=list)
    retained: list[list[tuple[int, ...] | None]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.x)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "vehicle", "x", "v", "u", "updated", "retained"])
        for k in range(len(self.x)):
            for i in range(self.n):
                ret = self.retained[k][i]
                w.writerow(
                    [
                        k,
                        i,
                        repr(self.x[k][i]),
                        repr(self.v[k][i]),
                        repr(self.u[k][i]),
                        int(self.updated[k][i]),
                        "" if ret is None else ";".join(map(str, ret)),
                    ]
                )
        return buf.getvalue()


@dataclass
class Metrics:
    Dx: list[float]
    Dv: list[float]
    epsilon: float
    convergence_step: int | None
    groups: list[list[int]]
    slope: float | None
    fit_r2: float | None
    fit_window: tuple[int, int] | None
    safety_violations: int
    safety_max_expansion: float
    envelope_violations: int
    filter_calls: int

    @property
    def converged(self) -> bool:
        return self.convergence_step is not None

    def to_csv(self) -> str:
        lines = ["k,Dx,Dv"]
        lines += [f"{k},{dx!r},{dv!r}" for k, (dx, dv) in enumerate(zip(self.Dx, self.Dv))]
        return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    scenario: Scenario
    trace: Trace
    metrics: Metrics


# --------------------------------------------------------------------- loop


def run(scenario: Scenario, *, validate: bool = True) -> RunResult:
    sc = scenario
    if validate:
        sc.validate()
    n, K, f = sc.n, sc.horizon, sc.f
    T, r = sc.params.T, sc.params.r
    Tr = T * r
    tau = sc.delays.bound
    eta = sc.offsets.eta
    mal = sc.malicious_ids
    normals = sc.normal_ids
    scripts = {i: CompiledScript(s, T, r) for i, s in sc.malicious}
    active = sc.sensing.active
    delays = sc.delays.compile(T, r)
    alpha = sc.alpha
    time_varying = isinstance(sc.graph, GraphSequence)
    static_nbrs = None if time_varying else {i: sc.graph.in_neighbors(i) for i in range(n)}

    xs = list(sc.x0)
    vs = list(sc.v0)
    hist_p: list[list[float]] = [[xs[i]] for i in range(n)]  # p_i[k] for k = 0..current

    def true_p(j: int, stamp: int) -> float:
        return hist_p[j][stamp if stamp > 0 else 0]

    def observe(j: int, i: int, stamp: int):
        """Value of j at ``stamp`` as i perceives it; None when j is silent."""
        if j not in mal:
            return true_p(j, stamp)
        cs = scripts[j]
        if cs.silent(stamp):
            return None
        if i in active:
            return true_p(j, stamp)
        return cs.broadcast_p(stamp, i, true_p(j, stamp))

    views = {i: NeighborView() for i in normals}
    trace = Trace(n, mal)
    envelope_bad = 0
    filter_calls = 0

    def refilter(i: int, k: int, silent: set[int]) -> None:
        nonlocal envelope_bad, filter_calls
        view = views[i]
        p_i = hist_p[i][k]
        vals = []
        for j, e in sorted(view.entries.items()):
            if sc.omissive and j in silent:
                continue
            age = k - e.stamp
            if not 0 <= age <= tau:
                raise ScheduleError(f"filter input is {age} steps old, bound is {tau}", k, (j, i))
            vals.append((j, e.p - p_i - (eta[j] - eta[i])))
        if sc.omissive:
            m = len(silent)
            if m > f:
                raise ScheduleError(f"{m} silent neighbours exceed f={f}", k)
            kept = protocol.adp_msr_filter_omissive(vals, f, m)
        else:
            kept = protocol.adp_msr_filter(vals, f)
        filter_calls += 1
        if mal and not protocol.msr_envelope_ok(vals, kept, mal):
            envelope_bad += 1
        view.last_filter = kept

    def ingest(i: int, k: int) -> set[int]:
        view = views[i]
        g = sc.graph_at(k)
        nbrs = static_nbrs[i] if static_nbrs is not None else g.in_neighbors(i)
        silent = set()
        for j in nbrs:
            stamp = k - delays(j, i, k)
            val = observe(j, i, stamp)
            if val is None:
                silent.add(j)
                continue
            view.entries[j] = NeighborEntry(val, stamp, g.weight(j, i))
        for j in [j for j, e in view.entries.items() if k - e.stamp > tau]:
            del view.entries[j]
        return silent

    # warm-up: every view starts from the neighbours' step-0 values
    for i in normals:
        g0 = sc.graph_at(0)
        for j in g0.in_neighbors(i):
            val = observe(j, i, 0)
            if val is not None:
                views[i].entries[j] = NeighborEntry(val, 0, g0.weight(j, i))
        refilter(i, 0, set())

    for k in range(K + 1):
        u = [0.0] * n
        upd = [False] * n
        ret: list[tuple[int, ...] | None] = [None] * n
        kTr = k * Tr
        for i in normals:
            if sc.updates[i].updates_at(k):
                silent = ingest(i, k)
                refilter(i, k, silent)
                upd[i] = True
            view = views[i]
            p_i = hist_p[i][k]
            acc = 0.0
            ents = view.entries
            for j in view.last_filter:
                e = ents.get(j)
                if e is None or k - e.stamp > tau:
                    raise ScheduleError(f"retained value missing or older than {tau} steps", k, (j, i))
                acc += e.weight * (e.p - p_i - (eta[j] - eta[i]))
            u[i] = acc - alpha[i] * (vs[i] - r)
            ret[i] = view.last_filter
        for i in mal:
            u[i] = scripts[i].input(k, xs[i], vs[i])
        trace.x.append(list(xs))
        trace.v.append(list(vs))
        trace.u.append(u)
        trace.updated.append(upd)
        trace.retained.append(ret)
        if k == K:
            break
        for i in range(n):
            if not math.isfinite(u[i]):
                raise NonFiniteStateError(f"vehicle {i} produced non-finite input {u[i]}", k)
            xs[i], vs[i] = step_xv(xs[i], vs[i], u[i], T)
            if not (math.isfinite(xs[i]) and math.isfinite(vs[i])):
                raise NonFiniteStateError(f"vehicle {i} state became non-finite", k + 1)
            hist_p[i].append(xs[i] - (kTr + Tr))

    metrics = compute_metrics(sc, trace, envelope_bad, filter_calls)
    return RunResult(sc, trace, metrics)


# ------------------------------------------------------------------- metrics


def disagreement(sc: Scenario, trace: Trace) -> tuple[list[float], list[float]]:
    normals = sc.normal_ids
    eta = sc.offsets.eta
    r = sc.params.r
    Dx, Dv = [], []
    for xk, vk in zip(trace.x, trace.v):
        c = [xk[i] - eta[i] for i in normals]
        Dx.append(max(c) - min(c) if c else 0.0)
        Dv.append(max((abs(vk[i] - r) for i in normals), default=0.0))
    return Dx, Dv


def detect_convergence(Dx: Sequence[float], Dv: Sequence[float], eps: float) -> int | None:
    """First step from which both disagreements stay below eps through the end."""
    first = None
    for k in range(len(Dx) - 1, -1, -1):
        if Dx[k] < eps and Dv[k] < eps:
            first = k
        else:
            break
    return first


def fit_rate(Dx: Sequence[float], window: tuple[int, int] | None = None) -> tuple[float, float]:
    """Least-squares slope of ln Dx per step over ``window`` and its R^2."""
    lo, hi = window if window is not None else (0, len(Dx))
    ks = list(range(lo, hi))
    if len(ks) < 2:
        raise ValueError("fit window needs at least two points")
    ys = [math.log(max(Dx[k], 1e-15)) for k in ks]
    mk = sum(ks) / len(ks)
    my = sum(ys) / len(ys)
    sxx = sum((k - mk) ** 2 for k in ks)
    sxy = sum((k - mk) * (y - my) for k, y in zip(ks, ys))
    syy = sum((y - my) ** 2 for y in ys)
    slope = sxy / sxx
    if syy == 0.0:
        return slope, 1.0
    r2 = (sxy * sxy) / (sxx * syy)
    return slope, r2


def tail_window(Dx: Sequence[float], scale: float) -> tuple[int, int] | None:
    """Later half of the stretch where Dx is still above the rounding floor.

    Positions of magnitude ``scale`` cannot resolve differences much below
    1e-10 * scale, so samples under that floor are left out of the fit.
    """
    floor = 1e-10 * max(1.0, scale)
    end = len(Dx)
    while end > 0 and Dx[end - 1] <= floor:
        end -= 1
    if end < 4:
        return None
    return end // 2, end


def group_split(values: Sequence[float], ids: Sequence[int], gap: float) -> list[list[int]]:
    order = sorted(zip(values, ids))
    groups: list[list[int]] = []
    prev = None
    for val, i in order:
        if prev is None or val - prev > gap:
            groups.append([])
        groups[-1].append(i)
        prev = val
    return groups


def safety_interval(sc: Scenario, trace: Trace, tol: float = 1e-9) -> tuple[int, float]:
    """Count steps where the normal vehicles' running p-envelope grows.

    The envelope at step k spans every offset-corrected transformed
    position of a normal vehicle over steps k - tau .. k.
    """
    normals = sc.normal_ids
    if not normals:
        return 0, 0.0
    Tr = sc.params.T * sc.params.r
    eta = sc.offsets.eta
    w = sc.delays.bound + 1
    lo_q: deque = deque()
    hi_q: deque = deque()
    prev = None
    count, worst = 0, 0.0
    for k, xk in enumerate(trace.x):
        ps = [xk[i] - k * Tr - eta[i] for i in normals]
        m, M = min(ps), max(ps)
        while lo_q and lo_q[-1][1] >= m:
            lo_q.pop()
        lo_q.append((k, m))
        while hi_q and hi_q[-1][1] <= M:
            hi_q.pop()
        hi_q.append((k, M))
        while lo_q[0][0] <= k - w:
            lo_q.popleft()
        while hi_q[0][0] <= k - w:
            hi_q.popleft()
        cur = (lo_q[0][1], hi_q[0][1])
        if prev is not None:
            grow = max(prev[0] - cur[0], cur[1] - prev[1])
            if grow > tol:
                count += 1
                worst = max(worst, grow)
        prev = cur
    return count, worst


def compute_metrics(sc: Scenario, trace: Trace, envelope_bad: int = 0, filter_calls: int = 0) -> Metrics:
    Dx, Dv = disagreement(sc, trace)
    conv = detect_convergence(Dx, Dv, sc.epsilon)
    normals = sc.normal_ids
    final = trace.x[-1]
    groups = group_split([final[i] - sc.offsets.eta[i] for i in normals], normals, 10 * sc.epsilon)
    scale = max(abs(v) for v in final) if final else 1.0
    win = tail_window(Dx, scale)
    slope = r2 = None
    if win is not None:
        slope, r2 = fit_rate(Dx, win)
    sv, sw = safety_interval(sc, trace)
    return Metrics(Dx, Dv, sc.epsilon, conv, groups, slope, r2, win, sv, sw, envelope_bad, filter_calls)


# ---------------------------------------------------------------- scenarios


def prop1_scenario(
    f: int = 1,
    a: float = 0.0,
    b: float = 1.0,
    c: float = 0.5,
    delta: float = 0.0,
    horizon: int = 2000,
    T: float = 0.01,
    r: float = 0.0,
    alpha: float = 2.0,
) -> Scenario:
    """Synchronous run of the stalling attack on ``counterexample(f)``.

    G3 starts at a - delta/2, G4 at b + delta/2, G1 at c, every velocity at
    the target. Needs a < c < b.
    """
    if not a < c < b:
        raise ScenarioError(f"need a < c < b, got a={a}, c={c}, b={b}", "prop1 ordering")
    g = counterexample(f)
    blocks = counterexample_blocks(f)
    atk = prop1_attack(f, a, b, delta)
    n = g.n
    p0 = [0.0] * n
    for i in blocks.g1:
        p0[i] = c
    for i in blocks.g2:
        p0[i] = c
    for i in blocks.g3:
        p0[i] = a + atk.eta[i]
    for i in blocks.g4:
        p0[i] = b + atk.eta[i]
    return Scenario(
        n=n,
        f=f,
        params=ModelParams(T, r),
        graph=g,
        alpha=(alpha,) * n,
        x0=tuple(p0),
        v0=(r,) * n,
        horizon=horizon,
        offsets=OffsetSpec(atk.eta),
        delays=atk.delays,
        malicious=tuple(atk.scripts.items()),
        epsilon=1e-6,
        name=f"prop1_attack_f{f}",
    )


def theorem1_necessity_scenario(
    g: DirectedGraph,
    f: int,
    witness: tuple[Iterable[int], Iterable[int]] | None = None,
    a: float = 0.0,
    b: float = 1.0,
    c: float = 0.5,
    horizon: int = 2000,
    T: float = 0.01,
    r: float = 0.0,
    alpha: float = 2.0,
) -> Scenario:
    """Configuration from the necessity argument: V1 at a, V2 at b, the rest at c.

    The vehicles of V1 and V2 with f+1 or more in-links from outside their
    own set are made malicious and hold their values; there are at most f
    of them because the pair violates (f+1, f+1)-robustness.
    """
    from .graph import is_rs_robust

    if not a <= c <= b:
        raise ScenarioError(f"need a <= c <= b, got a={a}, c={c}, b={b}", "necessity ordering")
    if witness is None:
        res = is_rs_robust(g, f + 1, f + 1)
        if res.robust:
            raise ScenarioError(f"graph is ({f + 1},{f + 1})-robust; no violating pair exists", "witness")
        witness = res.witness
    v1, v2 = frozenset(witness[0]), frozenset(witness[1])
    if not is_violating_pair(g, v1, v2, f + 1, f + 1):
        raise ScenarioError(f"{sorted(v1)}, {sorted(v2)} does not violate ({f + 1},{f + 1})-robustness", "witness")
    bad = sorted(x_set(g, v1, f + 1) | x_set(g, v2, f + 1))
    p0 = [c] * g.n
    for i in v1:
        p0[i] = a
    for i in v2:
        p0[i] = b
    scripts = [(i, AttackScript(kind="broadcast_fn", value=_const(p0[i]), frame="p")) for i in bad]
    return Scenario(
        n=g.n,
        f=f,
        params=ModelParams(T, r),
        graph=g,
        alpha=(alpha,) * g.n,
        x0=tuple(p0),
        v0=(r,) * g.n,
        horizon=horizon,
        malicious=tuple(scripts),
        epsilon=1e-6,
        name="necessity_witness",
    )


def _const(v: float):
    from .expr import Expr

    return Expr(repr(float(v)))
