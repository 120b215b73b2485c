"""Deterministic 2-D simulator for distributed safe-region formation control.

Double-integrator agents run a nominal formation / region-attraction /
tracking controller whose output passes through a per-agent exponential-CBF
quadratic-program safety filter.  ``run`` simulates a ``Scenario`` and returns
a ``TrajectoryLog``; the ``safeform`` CLI wraps the same pipeline with CSV and
SVG output.
"""

from .errors import (
    CollisionError,
    ConnectivityLostError,
    ScenarioError,
    SensingRangeError,
    SimulationError,
)
from .geometry import Circle, ConvexPolygon, closest_boundary_point, contains, project
from .kernels import backend_name, get_backend
from .scenario_io import (
    ScenarioFormatError,
    available_scenarios,
    load_scenario,
    save_scenario,
)
from .sim import (
    Event,
    StepRecord,
    TrajectoryLog,
    World,
    formation_error,
    initial_world,
    min_margins,
    run,
    step,
)
from .world import (
    AgentState,
    CircularReference,
    ConstantReference,
    ControllerParams,
    FormationSpec,
    Scenario,
    ZeroReference,
    reference_velocity,
)

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "Circle",
    "CircularReference",
    "CollisionError",
    "ConnectivityLostError",
    "ConstantReference",
    "ControllerParams",
    "ConvexPolygon",
    "Event",
    "FormationSpec",
    "Scenario",
    "ScenarioError",
    "ScenarioFormatError",
    "SensingRangeError",
    "SimulationError",
    "StepRecord",
    "TrajectoryLog",
    "World",
    "ZeroReference",
    "available_scenarios",
    "backend_name",
    "closest_boundary_point",
    "contains",
    "formation_error",
    "get_backend",
    "initial_world",
    "load_scenario",
    "min_margins",
    "project",
    "reference_velocity",
    "run",
    "save_scenario",
    "step",
    "__version__",
]
