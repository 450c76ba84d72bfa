"""Planar articulated-chain simulator and the closed-loop relaxation demo."""

from .chain import DT, PlanarChain, Rod, SimState, initial_state, step
from .demo import DemoReport, DemoResult, chair_scenario, run_weightless_demo

__all__ = ["DT", "PlanarChain", "Rod", "SimState", "initial_state", "step",
           "DemoReport", "DemoResult", "chair_scenario", "run_weightless_demo"]
