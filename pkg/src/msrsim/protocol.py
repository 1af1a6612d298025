"""ADP-MSR filtering and the delayed relative-position control law.

Every quantity here lives in transformed coordinates: p = x - k*T*r and
q = v - r. A relative value for neighbour j, as seen by vehicle i, is
``stored_p_j - p_i - delta_ij``; zero means the pair sits exactly at its
formation offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class ProtocolError(ValueError):
    pass


@dataclass
class NeighborEntry:
    p: float  # transformed position as received
    stamp: int  # step at which the value was generated
    weight: float = 1.0


@dataclass
class NeighborView:
    """Stored, possibly stale neighbour values held by one vehicle."""

    entries: dict[int, NeighborEntry] = field(default_factory=dict)
    last_filter: tuple[int, ...] = ()

    def staleness(self, k: int) -> dict[int, int]:
        return {j: k - e.stamp for j, e in self.entries.items()}


@dataclass(frozen=True)
class OffsetSpec:
    """Formation offsets, stored as one target offset eta_i per vehicle.

    delta_ij = eta_j - eta_i, so a converged formation has
    x_j - x_i = delta_ij and every vehicle sits at a common centre plus its
    own eta.
    """

    eta: tuple[float, ...]

    @classmethod
    def zeros(cls, n: int) -> "OffsetSpec":
        return cls((0.0,) * n)

    @classmethod
    def from_matrix(cls, delta: Sequence[Sequence[float]], tol: float = 1e-9) -> "OffsetSpec":
        n = len(delta)
        for i in range(n):
            if len(delta[i]) != n:
                raise ProtocolError("offset matrix must be square")
            for j in range(n):
                if abs(delta[i][j] + delta[j][i]) > tol:
                    raise ProtocolError(f"offset matrix not antisymmetric at ({i}, {j})")
                for k in range(n):
                    if abs(delta[i][j] + delta[j][k] - delta[i][k]) > tol:
                        raise ProtocolError(f"offset matrix not realizable at ({i}, {j}, {k})")
        return cls(tuple(float(delta[0][j]) for j in range(n)))

    def delta(self, i: int, j: int) -> float:
        return self.eta[j] - self.eta[i]

    def matrix(self) -> list[list[float]]:
        n = len(self.eta)
        return [[self.delta(i, j) for j in range(n)] for i in range(n)]


@dataclass(frozen=True)
class ControlGains:
    alpha: float
    f: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ProtocolError(f"alpha must be positive, got {self.alpha}")
        if self.f < 0:
            raise ProtocolError(f"f must be nonnegative, got {self.f}")


def relative_values(view: NeighborView, own_p: float, offsets: OffsetSpec, i: int) -> list[tuple[int, float]]:
    return [(j, e.p - own_p - offsets.delta(i, j)) for j, e in sorted(view.entries.items())]


def adp_msr_filter(values: Iterable[tuple[int, float]], f: int) -> tuple[int, ...]:
    """Drop up to f values on each side of zero; return surviving ids, ascending.

    Values are ranked largest first with ties broken by ascending id; the
    smallest values are taken from the tail of that same order. On the
    high side, if fewer than f values are >= 0 all of them go, otherwise
    the f largest go. The low side then applies the mirror rule to what is
    left, with <= 0. Zero counts on both sides but a neighbour is dropped
    at most once.
    """
    if f < 0:
        raise ProtocolError(f"f must be nonnegative, got {f}")
    order = sorted(values, key=lambda jv: (-jv[1], jv[0]))
    if f == 0:
        return tuple(sorted(j for j, _ in order))
    nonneg = [j for j, v in order if v >= 0]
    dropped = set(nonneg) if len(nonneg) < f else {j for j, _ in order[:f]}
    rest = [(j, v) for j, v in order if j not in dropped]
    nonpos = [j for j, v in rest if v <= 0]
    if len(nonpos) < f:
        dropped.update(nonpos)
    else:
        dropped.update(j for j, _ in rest[len(rest) - f :])
    return tuple(sorted(j for j, _ in order if j not in dropped))


def adp_msr_filter_omissive(values: Iterable[tuple[int, float]], f: int, m: int) -> tuple[int, ...]:
    """Filter with the budget reduced by the m neighbours that stayed silent."""
    if not 0 <= m <= f:
        raise ProtocolError(f"{m} silent neighbours exceeds the adversary bound f={f}")
    return adp_msr_filter(values, f - m)


def control_input(
    retained: Iterable[int],
    values: Mapping[int, float] | Iterable[tuple[int, float]],
    weights: Mapping[int, float] | None,
    alpha: float,
    own_q: float,
) -> float:
    """u = sum over retained j of a_ij * value_j, minus alpha * q_i."""
    vals = dict(values)
    u = 0.0
    for j in retained:
        if j not in vals:
            raise ProtocolError(f"retained neighbour {j} has no value")
        a = 1.0 if weights is None else weights.get(j, 1.0)
        u += a * vals[j]
    return u - alpha * own_q


def msr_envelope_ok(values: Sequence[tuple[int, float]], retained: Iterable[int], adversarial: Iterable[int]) -> bool:
    """True when every retained value lies within the normal-value envelope.

    The envelope spans the values of normal neighbours together with the
    filtering vehicle's own relative value, 0.
    """
    adversarial = set(adversarial)
    vals = dict(values)
    normal = [v for j, v in vals.items() if j not in adversarial] + [0.0]
    lo, hi = min(normal), max(normal)
    return all(lo <= vals[j] <= hi for j in retained)
