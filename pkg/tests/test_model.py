import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from msrsim.model import (
    ModelParams,
    NonFiniteStateError,
    TransformedState,
    VehicleState,
    from_transformed,
    step,
    step_xv,
    to_transformed,
)

finite = st.floats(-1e4, 1e4, allow_nan=False)


def test_step_examples():
    assert step(VehicleState(0, 0), 0, 0.01) == VehicleState(0, 0)
    assert step(VehicleState(0, 1), 0, 0.01) == VehicleState(0.01, 1)
    s = step(VehicleState(0, 1), 2, 0.01)
    assert s.x == pytest.approx(0.0101, abs=1e-15) and s.v == pytest.approx(1.02, abs=1e-15)


def test_step_rejects_non_finite():
    with pytest.raises(NonFiniteStateError, match="step 7"):
        step(VehicleState(0, 0), math.nan, 0.01, k=7)
    with pytest.raises(NonFiniteStateError):
        step(VehicleState(math.inf, 0), 0, 0.01)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0, 1)
    with pytest.raises(ValueError):
        ModelParams(0.01, math.nan)


def test_transform_examples():
    p = ModelParams(0.01, 100)
    assert to_transformed(VehicleState(100, 100), 0, p) == TransformedState(100, 0)
    assert to_transformed(VehicleState(110, 100), 10, p) == TransformedState(100, 0)


@given(finite, finite, st.integers(0, 10**5), st.floats(1e-3, 1.0), finite)
def test_transform_round_trip(x, v, k, T, r):
    p = ModelParams(T, r)
    back = from_transformed(to_transformed(VehicleState(x, v), k, p), k, p)
    assert back.x == pytest.approx(x, rel=1e-12, abs=1e-9 * (1 + abs(k * T * r)))
    assert back.v == pytest.approx(v, rel=1e-12, abs=1e-12 * (1 + abs(r)))


@given(finite, finite, finite, st.integers(0, 10**4), st.floats(1e-3, 0.1), finite)
def test_transform_commutes_with_dynamics(x, v, u, k, T, r):
    """Stepping then transforming equals transforming then stepping (p, q) with the same law."""
    prm = ModelParams(T, r)
    a = to_transformed(step(VehicleState(x, v), u, T), k + 1, prm)
    ts = to_transformed(VehicleState(x, v), k, prm)
    p2, q2 = step_xv(ts.p, ts.q, u, T)
    scale = 1 + abs(x) + abs(v) + abs(u) + abs(k * T * r) + abs(r)
    assert a.p == pytest.approx(p2, abs=1e-12 * scale)
    assert a.q == pytest.approx(q2, abs=1e-12 * scale)


def test_drift_is_exact():
    rng = random.Random(0)
    for _ in range(20):
        x0, v0, T = rng.uniform(-100, 100), rng.uniform(-50, 50), 0.01
        s = VehicleState(x0, v0)
        for _ in range(1000):
            s = step(s, 0.0, T)
        assert s.v == v0
        assert abs(s.x - (x0 + 1000 * T * v0)) <= 1000 * 4 * math.ulp(abs(x0) + 10 * abs(v0) + 1)


def test_step_xv_matches_step():
    s = step(VehicleState(1.5, -2.0), 3.0, 0.05)
    assert (s.x, s.v) == step_xv(1.5, -2.0, 3.0, 0.05)
