"""Directed communication graphs and exact (r, s)-robustness certification.

Nodes are integers in ``[0, n)``. An edge ``(j, i)`` is an incoming link
from j to i, so ``in_neighbors(i)`` lists every j that i listens to.

The certifier enumerates all 3^n assignments of nodes to {V1, V2, neither}.
The inner scan lives in a compiled extension (``_robust_core``) when it
was built; otherwise the pure-Python twin in ``_robust_py`` is used. Set
``MSRSIM_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import _robust_py

if os.environ.get("MSRSIM_PURE_PYTHON"):
    _core = None
else:
    try:
        from . import _robust_core as _core
    except ImportError:  # extension not built
        _core = None

BACKENDS = {"python": _robust_py}
if _core is not None:
    BACKENDS["compiled"] = _core
KERNEL = "compiled" if _core is not None else "python"

DEFAULT_CAP = 12
HARD_CAP = 30


class GraphError(ValueError):
    pass


class EnumerationCapError(GraphError):
    """Raised instead of running an exhaustive check on a graph that is too large."""


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    weights: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise GraphError(f"need n > 1 nodes, got {self.n}")
        clean = {}
        for (j, i), w in dict(self.weights).items():
            j, i, w = int(j), int(i), float(w)
            if j == i:
                raise GraphError(f"self-loop ({j}, {i})")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise GraphError(f"edge ({j}, {i}) outside [0, {self.n})")
            if not (w > 0 and math.isfinite(w)):
                raise GraphError(f"edge ({j}, {i}) has non-positive weight {w}")
            clean[(j, i)] = w
        object.__setattr__(self, "weights", dict(sorted(clean.items())))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, weight: float = 1.0) -> "DirectedGraph":
        w = {}
        for e in edges:
            if len(e) == 3:
                w[(e[0], e[1])] = e[2]
            else:
                w[(e[0], e[1])] = weight
        return cls(n, w)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(self.weights)

    def weight(self, j: int, i: int) -> float:
        return self.weights.get((j, i), 0.0)

    def in_neighbors(self, i: int) -> list[int]:
        return sorted(j for (j, k) in self.weights if k == i)

    def out_neighbors(self, j: int) -> list[int]:
        return sorted(i for (k, i) in self.weights if k == j)

    def in_degree(self, i: int) -> int:
        return sum(1 for (_, k) in self.weights if k == i)

    def min_in_degree(self) -> int:
        return min(self.in_degree(i) for i in range(self.n))

    def in_masks(self) -> list[int]:
        masks = [0] * self.n
        for j, i in self.weights:
            masks[i] |= 1 << j
        return masks

    def union(self, other: "DirectedGraph") -> "DirectedGraph":
        if other.n != self.n:
            raise GraphError(f"node count mismatch: {self.n} vs {other.n}")
        w = dict(self.weights)
        for e, x in other.weights.items():
            w[e] = max(w.get(e, 0.0), x)
        return DirectedGraph(self.n, w)

    def without_edges(self, removed: Iterable[tuple[int, int]]) -> "DirectedGraph":
        removed = set(removed)
        return DirectedGraph(self.n, {e: w for e, w in self.weights.items() if e not in removed})

    def induced(self, keep: Sequence[int]) -> "DirectedGraph":
        """Subgraph on ``keep``, relabelled to 0..len(keep)-1 in the given order."""
        index = {v: k for k, v in enumerate(keep)}
        return DirectedGraph(
            len(keep),
            {(index[j], index[i]): w for (j, i), w in self.weights.items() if j in index and i in index},
        )


# ---------------------------------------------------------------- certifier


def _mask_to_set(mask: int) -> frozenset[int]:
    return frozenset(i for i in range(mask.bit_length()) if mask >> i & 1)


def _check_cap(g: DirectedGraph, cap: int) -> None:
    if g.n > min(cap, HARD_CAP):
        raise EnumerationCapError(
            f"exhaustive robustness check refused: n={g.n} exceeds the enumeration cap {cap} "
            f"(3^n subset pairs); raise the cap explicitly to proceed"
        )


def _chunks(n: int, threads: int) -> list[tuple[int, int]]:
    top = 1 << n
    if threads <= 1:
        return [(1, top)]
    # V1 masks near the top have few free nodes, so cut finer than `threads`.
    parts = max(1, threads * 4)
    step = max(1, top // parts)
    bounds = list(range(1, top, step)) + [top]
    return list(zip(bounds[:-1], bounds[1:]))


def _scan(g: DirectedGraph, r: int, s: int, stop_early: bool, threads: int, backend: str | None):
    """Minimum violating score and first witness in enumeration order.

    The result does not depend on ``threads``: chunks are merged by
    (score, chunk index), which reproduces the sequential first minimum.
    """
    mod = BACKENDS[backend or KERNEL]
    table = mod.subset_table(g.in_masks(), g.n, r)
    chunks = _chunks(g.n, threads)
    if len(chunks) == 1:
        results = [mod.scan(table, g.n, s, chunks[0][0], chunks[0][1], stop_early)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: mod.scan(table, g.n, s, c[0], c[1], stop_early), chunks))
    if stop_early:
        for best, w1, w2 in results:
            if best < s:
                return best, w1, w2
        return mod.NO_VIOLATION, 0, 0
    best = min(results, key=lambda t: t[0])
    return best


@dataclass(frozen=True)
class RobustnessResult:
    robust: bool
    witness: tuple[frozenset[int], frozenset[int]] | None = None

    def __bool__(self) -> bool:
        return self.robust


def is_rs_robust(
    g: DirectedGraph,
    r: int,
    s: int = 1,
    *,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
    backend: str | None = None,
) -> RobustnessResult:
    """Exact (r, s)-robustness test.

    On failure the result carries a violating pair (V1, V2): neither set
    has all its nodes with r outside in-neighbours, and together they have
    fewer than s such nodes.
    """
    if not (0 <= r < g.n and 1 <= s < g.n):
        raise GraphError(f"(r, s) = ({r}, {s}) out of range for n={g.n}: need 0 <= r < n, 1 <= s < n")
    _check_cap(g, cap)
    best, w1, w2 = _scan(g, r, s, True, threads, backend)
    if best < s:
        return RobustnessResult(False, (_mask_to_set(w1), _mask_to_set(w2)))
    return RobustnessResult(True)


def is_r_robust(g: DirectedGraph, r: int, **kw) -> RobustnessResult:
    return is_rs_robust(g, r, 1, **kw)


def x_set(g: DirectedGraph, subset: Iterable[int], r: int) -> frozenset[int]:
    """Nodes of ``subset`` with at least r in-neighbours outside it."""
    subset = frozenset(subset)
    return frozenset(i for i in subset if sum(1 for j in g.in_neighbors(i) if j not in subset) >= r)


def is_violating_pair(g: DirectedGraph, v1, v2, r: int, s: int) -> bool:
    v1, v2 = frozenset(v1), frozenset(v2)
    if not v1 or not v2 or v1 & v2:
        return False
    x1, x2 = x_set(g, v1, r), x_set(g, v2, r)
    return x1 != v1 and x2 != v2 and len(x1) + len(x2) < s


@dataclass
class RobustnessReport:
    n: int
    certified: set[tuple[int, int]] = field(default_factory=set)
    refuted: dict[tuple[int, int], tuple[frozenset[int], frozenset[int]]] = field(default_factory=dict)

    def max_r(self) -> int:
        return max(r for r, s in self.certified if s == 1)

    def max_s(self, r: int) -> int:
        """Largest certified s for this r, or 0 if (r, 1) is refuted."""
        return max((s for rr, s in self.certified if rr == r), default=0)

    def top(self) -> tuple[int, int]:
        r = self.max_r()
        return r, self.max_s(r)

    def table(self) -> str:
        rows = [f"{'r':>3} {'max s':>6}  refuted-witness (first s beyond)"]
        for r in range(0, math.ceil(self.n / 2) + 1):
            ms = self.max_s(r)
            nxt = (r, ms + 1)
            wit = self.refuted.get(nxt)
            wtxt = f"V1={sorted(wit[0])} V2={sorted(wit[1])}" if wit else "-"
            rows.append(f"{r:>3} {ms:>6}  {wtxt}")
        return "\n".join(rows)


def max_robustness(
    g: DirectedGraph, *, cap: int = DEFAULT_CAP, threads: int = 1, backend: str | None = None
) -> RobustnessReport:
    """Decide every (r, s) with r <= ceil(n/2), 1 <= s <= n-1."""
    _check_cap(g, cap)
    rep = RobustnessReport(g.n)
    for r in range(0, math.ceil(g.n / 2) + 1):
        best, w1, w2 = _scan(g, r, g.n, False, threads, backend)
        for s in range(1, g.n):
            if s <= best:
                rep.certified.add((r, s))
            else:
                rep.refuted[(r, s)] = (_mask_to_set(w1), _mask_to_set(w2))
    return rep


@dataclass(frozen=True)
class GraphSequence:
    graphs: tuple[DirectedGraph, ...]
    window: int = 1

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise GraphError("graph sequence is empty")
        if self.window < 1:
            raise GraphError(f"window must be >= 1, got {self.window}")
        n = graphs[0].n
        for k, gk in enumerate(graphs):
            if gk.n != n:
                raise GraphError(f"graph {k} has {gk.n} nodes, expected {n}")
        object.__setattr__(self, "graphs", graphs)

    @property
    def n(self) -> int:
        return self.graphs[0].n

    def at(self, k: int) -> DirectedGraph:
        """Graph active at step k; the list repeats cyclically."""
        return self.graphs[k % len(self.graphs)]

    def windows(self) -> list[DirectedGraph]:
        out = []
        for start in range(len(self.graphs)):
            u = self.graphs[start]
            for gk in self.graphs[start + 1 : start + self.window]:
                u = u.union(gk)
            out.append(u)
        return out

    def union(self) -> DirectedGraph:
        u = self.graphs[0]
        for gk in self.graphs[1:]:
            u = u.union(gk)
        return u


def is_jointly_r_robust(seq: GraphSequence, r: int, **kw) -> bool:
    """Every window of ``seq.window`` consecutive graphs has an r-robust union.

    Windows slide one step at a time; windows starting near the end use
    whatever graphs remain.
    """
    return all(is_rs_robust(u, r, 1, **kw) for u in seq.windows())


# -------------------------------------------------------------- connectivity


def _reaches_all(g: DirectedGraph, root: int, alive: frozenset[int]) -> bool:
    seen = {root}
    stack = [root]
    out = {v: [] for v in alive}
    for j, i in g.weights:
        if j in alive and i in alive:
            out[j].append(i)
    while stack:
        v = stack.pop()
        for w in out[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(alive)


def has_spanning_tree(g: DirectedGraph, alive: Iterable[int] | None = None) -> bool:
    """Some node reaches every other node along directed edges."""
    alive = frozenset(range(g.n)) if alive is None else frozenset(alive)
    return any(_reaches_all(g, v, alive) for v in sorted(alive))


def vertex_connectivity(g: DirectedGraph) -> int:
    """Fewest nodes whose removal leaves the digraph not strongly connected.

    Complete digraphs get n - 1 by convention.
    """
    import networkx as nx

    h = nx.DiGraph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges)
    return nx.node_connectivity(h)


def rooted_connectivity(g: DirectedGraph) -> int:
    """Fewest nodes whose removal leaves no directed spanning tree.

    This is the in-direction analogue of vertex connectivity that
    r-robustness actually controls on digraphs. Brute force over removal
    sets; complete digraphs get n - 1.
    """
    from itertools import combinations

    nodes = range(g.n)
    for k in range(0, g.n - 1):
        for removed in combinations(nodes, k):
            alive = frozenset(nodes) - set(removed)
            if not has_spanning_tree(g, alive):
                return k
    return g.n - 1


# ---------------------------------------------------------------- generators


def complete(n: int) -> DirectedGraph:
    return DirectedGraph.from_edges(n, [(j, i) for i in range(n) for j in range(n) if i != j])


def edgeless(n: int) -> DirectedGraph:
    return DirectedGraph(n, {})


def random_digraph(n: int, density: float, seed: int) -> DirectedGraph:
    if not 0.0 <= density <= 1.0:
        raise GraphError(f"density must lie in [0, 1], got {density}")
    rng = random.Random(seed)
    edges = [(j, i) for i in range(n) for j in range(n) if i != j and rng.random() < density]
    return DirectedGraph.from_edges(n, edges)


@dataclass(frozen=True)
class CounterexampleBlocks:
    g1: tuple[int, ...]
    g2: tuple[int, ...]
    g3: tuple[int, ...]
    g4: tuple[int, ...]


def counterexample_blocks(f: int) -> CounterexampleBlocks:
    return CounterexampleBlocks(
        tuple(range(0, 4 * f)),
        tuple(range(4 * f, 5 * f)),
        tuple(range(5 * f, 6 * f)),
        tuple(range(6 * f, 7 * f)),
    )


def counterexample(f: int, *, cap: int = DEFAULT_CAP) -> DirectedGraph:
    """The 2f-robust topology on which delayed asynchronous updates can stall.

    Four internally complete blocks: G1 (4f nodes) and G2, G3, G4 (f nodes
    each). Every G2 node hears 2f G1 nodes; every G3 and G4 node hears f G1
    nodes and all f G2 nodes. G2 is the block the attack makes malicious.
    Donors are the lowest-indexed G1 nodes.
    """
    if f < 1:
        raise GraphError(f"counterexample needs f >= 1, got {f}")
    b = counterexample_blocks(f)
    edges = set()
    for block in (b.g1, b.g2, b.g3, b.g4):
        edges.update((j, i) for i in block for j in block if i != j)
    for i in b.g2:
        edges.update((j, i) for j in b.g1[: 2 * f])
    for i in b.g3 + b.g4:
        edges.update((j, i) for j in b.g1[:f])
        edges.update((j, i) for j in b.g2)
    g = DirectedGraph.from_edges(7 * f, sorted(edges))
    if g.min_in_degree() < 3 * f - 1:
        raise AssertionError(f"counterexample({f}) construction bug: min in-degree {g.min_in_degree()}")
    if g.n <= cap and not is_rs_robust(g, 2 * f, 1, cap=cap):
        raise AssertionError(f"counterexample({f}) construction bug: not {2 * f}-robust")
    return g


def generate(kind: str, **params) -> DirectedGraph:
    if kind == "complete":
        return complete(int(params["n"]))
    if kind == "edgeless":
        return edgeless(int(params["n"]))
    if kind == "counterexample":
        return counterexample(int(params["f"]))
    if kind == "random":
        return random_digraph(int(params["n"]), float(params["density"]), int(params["seed"]))
    raise GraphError(f"unknown graph kind {kind!r}")


# ------------------------------------------------------------ edge-list format


def format_edge_list(g: DirectedGraph) -> str:
    lines = [f"n {g.n}"]
    for (j, i), w in g.weights.items():
        lines.append(f"{j} {i}" if w == 1.0 else f"{j} {i} {w!r}")
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str, source: str = "<edge list>") -> DirectedGraph:
    n = None
    weights = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if n is None:
                if parts[0] != "n" or len(parts) != 2:
                    raise ValueError("expected header 'n <count>'")
                n = int(parts[1])
                continue
            if len(parts) not in (2, 3):
                raise ValueError("expected 'j i [weight]'")
            j, i = int(parts[0]), int(parts[1])
            weights[(j, i)] = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise GraphError(f"{source}:{lineno}: {exc}") from None
    if n is None:
        raise GraphError(f"{source}: missing header 'n <count>'")
    try:
        return DirectedGraph(n, weights)
    except GraphError as exc:
        raise GraphError(f"{source}: {exc}") from None


def read_edge_list(path) -> DirectedGraph:
    path = Path(path)
    return parse_edge_list(path.read_text(), str(path))


def write_edge_list(g: DirectedGraph, path) -> None:
    Path(path).write_text(format_edge_list(g))
