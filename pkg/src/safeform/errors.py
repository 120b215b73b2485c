"""Exceptions raised when a simulation run must abort."""

from __future__ import annotations


class SimulationError(RuntimeError):
    """Base class for conditions that abort a run, annotated with the time."""

    def __init__(self, t: float, message: str) -> None:
        super().__init__(f"t={t:.6f}: {message}")
        self.t = t


class CollisionError(SimulationError):
    """An agent entered an unsafe region or two agents got closer than allowed."""


class ConnectivityLostError(SimulationError):
    """The sensing graph disconnected, or a live edge reached the sensing radius."""


class SensingRangeError(ValueError):
    """A pair quantity was requested for agents at or beyond the sensing radius."""


class ScenarioError(ValueError):
    """A scenario failed validation; carries one message per violated invariant."""

    def __init__(self, violations: list[str]) -> None:
        super().__init__("invalid scenario:\n  " + "\n  ".join(violations))
        self.violations = violations
