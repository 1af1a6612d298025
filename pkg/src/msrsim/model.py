"""Longitudinal double-integrator vehicle model (zero-order-hold exact)."""

from __future__ import annotations

import math
from dataclasses import dataclass


class NonFiniteStateError(ArithmeticError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class VehicleState:
    x: float  # position, m
    v: float  # velocity, m/s


@dataclass(frozen=True)
class TransformedState:
    p: float  # position minus the reference trajectory k*T*r, m
    q: float  # velocity minus the target velocity r, m/s


@dataclass(frozen=True)
class ModelParams:
    T: float
    r: float

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"sampling period must be positive, got {self.T}")
        if not math.isfinite(self.r):
            raise ValueError(f"target velocity must be finite, got {self.r}")


def step(state: VehicleState, u: float, T: float, k: int | None = None) -> VehicleState:
    """Advance one sampling period under constant acceleration u."""
    if not (math.isfinite(u) and math.isfinite(state.x) and math.isfinite(state.v)):
        raise NonFiniteStateError(f"non-finite state or input (x={state.x}, v={state.v}, u={u})", k)
    return VehicleState(state.x + T * state.v + 0.5 * T * T * u, state.v + T * u)


def step_xv(x: float, v: float, u: float, T: float) -> tuple[float, float]:
    """Same arithmetic as :func:`step` on bare floats, for the engine loop."""
    return x + T * v + 0.5 * T * T * u, v + T * u


def to_transformed(state: VehicleState, k: int, params: ModelParams) -> TransformedState:
    return TransformedState(state.x - k * params.T * params.r, state.v - params.r)


def from_transformed(ts: TransformedState, k: int, params: ModelParams) -> VehicleState:
    return VehicleState(ts.p + k * params.T * params.r, ts.q + params.r)
