"""Resilient coordinated movement of double-integrator vehicles under ADP-MSR filtering."""

from .graph import DirectedGraph, GraphSequence, is_rs_robust, max_robustness
from .engine import Scenario, run
from .scenario_io import load, load_preset

__all__ = [
    "DirectedGraph",
    "GraphSequence",
    "Scenario",
    "is_rs_robust",
    "load",
    "load_preset",
    "max_robustness",
    "run",
]
__version__ = "0.1.0"
