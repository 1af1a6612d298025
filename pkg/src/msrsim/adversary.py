"""Malicious-vehicle scripts, sensing modes and adversarial delay schedules.

The omniscient adversary is modelled as precomputed, step-indexed scripts
written with full knowledge of the scenario. A script decides two things
independently: what the vehicle *broadcasts* (to passive receivers) and
how it actually *moves* (what active receivers see through their own
sensors).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .expr import Expr
from .graph import DirectedGraph, counterexample_blocks

log = logging.getLogger(__name__)

SCRIPT_KINDS = ("broadcast_fn", "alternating", "free_motion", "silent")
MOTION_KINDS = ("hold", "free_motion", "trajectory")
FRAMES = ("x", "p")


class AdversaryError(ValueError):
    pass


class _Silent:
    def __repr__(self):
        return "SILENT"


SILENT = _Silent()


@dataclass(frozen=True)
class Motion:
    """True motion of a malicious vehicle.

    ``hold`` applies zero input (constant velocity). ``free_motion`` applies
    the scripted acceleration u(k). ``trajectory`` chooses u each step so
    that the position lands exactly on x(k+1), which keeps the vehicle
    governed by the same discrete dynamics as everyone else.
    """

    kind: str = "hold"
    expr: Expr | None = None

    def __post_init__(self):
        if self.kind not in MOTION_KINDS:
            raise AdversaryError(f"unknown motion kind {self.kind!r}; expected one of {MOTION_KINDS}")
        if (self.kind == "hold") != (self.expr is None):
            raise AdversaryError(f"motion {self.kind!r} {'takes no' if self.kind == 'hold' else 'needs an'} expression")


@dataclass(frozen=True)
class AttackScript:
    kind: str
    value: Expr | None = None  # broadcast_fn: uniform lie
    per_receiver: tuple[tuple[int, Expr], ...] = ()  # broadcast_fn: receiver-specific lies
    values: tuple[Expr, Expr] | None = None  # alternating: (even step, odd step)
    frame: str = "x"
    motion: Motion = field(default_factory=Motion)
    silent_when: Expr | None = None  # silent: nonzero means no transmission

    def __post_init__(self):
        if self.kind not in SCRIPT_KINDS:
            raise AdversaryError(f"unknown script kind {self.kind!r}; expected one of {SCRIPT_KINDS}")
        if self.frame not in FRAMES:
            raise AdversaryError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        object.__setattr__(self, "per_receiver", tuple(sorted(self.per_receiver)))
        if self.kind == "broadcast_fn" and self.value is None and not self.per_receiver:
            raise AdversaryError("broadcast_fn needs a value or per-receiver values")
        if self.kind == "alternating" and (self.values is None or len(self.values) != 2):
            raise AdversaryError("alternating needs exactly two values (even, odd)")
        if self.kind == "free_motion" and self.motion.kind == "hold":
            raise AdversaryError("free_motion needs a motion with an input or trajectory")
        if self.kind == "silent" and self.silent_when is None:
            raise AdversaryError("silent needs a 'when' expression")

    def lie_for(self, receiver: int) -> Expr | None:
        """The broadcast expression aimed at ``receiver``, or None if truthful."""
        if self.kind == "broadcast_fn":
            return dict(self.per_receiver).get(receiver, self.value)
        if self.kind == "alternating":
            e, o = self.values
            return Expr(f"parity({e.source}, {o.source})")
        return None


@dataclass(frozen=True)
class SensingModel:
    active: frozenset[int] = frozenset()

    def mode(self, receiver: int) -> str:
        return "active" if receiver in self.active else "passive"


class CompiledScript:
    """An AttackScript with every expression bound to (T, r), ready for the loop."""

    def __init__(self, script: AttackScript, T: float, r: float):
        self.script = script
        self.T, self.r = T, r
        self._lies: dict[int | None, Callable[[int], float] | None] = {}
        self._silent = script.silent_when.bind(T=T, r=r) if script.silent_when is not None else None
        m = script.motion
        self.motion_kind = m.kind
        self._motion = m.expr.bind(T=T, r=r) if m.expr is not None else None

    def _lie(self, receiver: int):
        if receiver not in self._lies:
            e = self.script.lie_for(receiver)
            self._lies[receiver] = e.bind(T=self.T, r=self.r) if e is not None else None
        return self._lies[receiver]

    def silent(self, k: int) -> bool:
        return self._silent is not None and self._silent(k) != 0

    def broadcast_p(self, k: int, receiver: int, true_p: float) -> float:
        """Transformed position claimed toward ``receiver`` for step k."""
        fn = self._lie(receiver)
        if fn is None:
            return true_p
        val = float(fn(k))
        if self.script.frame == "x":
            return val - k * self.T * self.r
        return val

    def input(self, k: int, x: float, v: float) -> float:
        if self.motion_kind == "hold":
            return 0.0
        if self.motion_kind == "free_motion":
            return float(self._motion(k))
        T = self.T
        return 2.0 * (float(self._motion(k + 1)) - x - T * v) / (T * T)


def broadcast_x(script: AttackScript, k: int, receiver: int, true_x: float, T: float, r: float) -> float:
    """Raw position the script claims toward ``receiver`` at step k."""
    e = script.lie_for(receiver)
    if e is None:
        return true_x
    val = e(k, T=T, r=r)
    return val + k * T * r if script.frame == "p" else val


def emitted_value(
    script: AttackScript,
    k: int,
    receiver: int,
    true_p: float,
    T: float,
    r: float,
    sensing: SensingModel = SensingModel(),
):
    """Transformed position observed by ``receiver`` for step k, or SILENT.

    Active receivers measure the true position themselves, so only a
    passive receiver can be lied to; a silent step suppresses both.
    """
    cs = CompiledScript(script, T, r)
    if cs.silent(k):
        return SILENT
    if sensing.mode(receiver) == "active":
        return true_p
    return cs.broadcast_p(k, receiver, true_p)


def validate_f_total(malicious: Iterable[int], f: int) -> bool:
    return len(set(malicious)) <= f


def validate_f_local(g: DirectedGraph, malicious: Iterable[int], f: int) -> bool:
    m = set(malicious)
    return all(len(m.intersection(g.in_neighbors(i))) <= f for i in range(g.n) if i not in m)


def warn_link_additions(graphs: Iterable[DirectedGraph], malicious: Iterable[int], f: int) -> list[str]:
    """Flag graph changes that push a normal vehicle past f malicious in-neighbours."""
    m = set(malicious)
    out = []
    for k, g in enumerate(graphs):
        for i in range(g.n):
            if i in m:
                continue
            bad = m.intersection(g.in_neighbors(i))
            if len(bad) > f:
                msg = f"graph {k}: vehicle {i} hears {len(bad)} malicious neighbours {sorted(bad)} > f={f}"
                log.warning(msg)
                out.append(msg)
    return out


@dataclass(frozen=True)
class DelaySchedule:
    """Per-edge delay tau_ij[k] as an expression of k, bounded by ``bound``.

    Edges not listed use ``default`` (zero unless stated).
    """

    bound: int
    edges: tuple[tuple[tuple[int, int], Expr], ...] = ()
    default: Expr = field(default_factory=lambda: Expr("0"))

    def __post_init__(self):
        if self.bound < 0:
            raise AdversaryError(f"delay bound must be >= 0, got {self.bound}")
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    def compile(self, T: float, r: float) -> "CompiledDelays":
        return CompiledDelays(self, T, r)


class CompiledDelays:
    def __init__(self, sched: DelaySchedule, T: float, r: float):
        self.bound = sched.bound
        self._edges = {e: x.bind(T=T, r=r) for e, x in sched.edges}
        self._const_default = None
        try:
            self._const_default = int(float(sched.default.source))
        except ValueError:
            self._default = sched.default.bind(T=T, r=r)

    def __call__(self, j: int, i: int, k: int) -> int:
        fn = self._edges.get((j, i))
        if fn is not None:
            val = fn(k)
        elif self._const_default is not None:
            val = self._const_default
        else:
            val = self._default(k)
        if val != int(val):
            raise AdversaryError(f"delay on edge ({j}, {i}) at step {k} is not an integer: {val}")
        return int(val)


@dataclass(frozen=True)
class Prop1Attack:
    f: int
    scripts: Mapping[int, AttackScript]
    delays: DelaySchedule
    eta: tuple[float, ...]  # formation offsets that make the lie look stationary


def prop1_attack(f: int, a: float = 0.0, b: float = 1.0, delta: float = 0.0) -> Prop1Attack:
    """Scripts and delays that freeze G3 at a and G4 at b on ``counterexample(f)``.

    Every G2 vehicle broadcasts a (in transformed coordinates) on even steps
    and b on odd steps. Delays alternate 0/1 on G2 -> G3 links (delayed on
    odd steps) and 1/0 on G2 -> G4 links, so G3 only ever receives the
    even-step value and G4 only the odd-step one. G3 and G4 carry offsets
    -delta/2 and +delta/2 so their desired gap is delta.
    """
    if f < 1:
        raise AdversaryError(f"f must be >= 1, got {f}")
    blocks = counterexample_blocks(f)
    n = 7 * f
    script = AttackScript(kind="alternating", values=(Expr(repr(float(a))), Expr(repr(float(b)))), frame="p")
    scripts = {j: script for j in blocks.g2}
    edges = []
    for j in blocks.g2:
        edges += [((j, i), Expr("parity(0, 1)")) for i in blocks.g3]
        edges += [((j, i), Expr("parity(1, 0)")) for i in blocks.g4]
    eta = [0.0] * n
    for i in blocks.g3:
        eta[i] = -delta / 2
    for i in blocks.g4:
        eta[i] = delta / 2
    return Prop1Attack(f, scripts, DelaySchedule(1, tuple(edges)), tuple(eta))
