"""Scenario file I/O: a small YAML schema plus dot-path overrides.

The file is a human-readable tree; all geometry uses SI units and the same
conventions as the in-memory types.  ``scenario_from_dict`` /
``scenario_to_dict`` round-trip exactly for every valid scenario.
"""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path

import yaml

from .geometry import Circle, ConvexPolygon, Region
from .world import (
    AgentState,
    CircularReference,
    ConstantReference,
    ControllerParams,
    FormationSpec,
    ReferenceMode,
    Scenario,
    ZeroReference,
)

__all__ = [
    "load_scenario",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "apply_overrides",
    "parse_override",
    "available_scenarios",
    "scenario_text",
]


class ScenarioFormatError(ValueError):
    """Raised when a scenario file is structurally invalid."""


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ScenarioFormatError(f"{where}: missing required key {key!r}")
    return data[key]


def _pair(value, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioFormatError(f"{where}: expected a pair [x, y], got {value!r}")
    return float(value[0]), float(value[1])


def _region_from_dict(data: dict, where: str) -> Region:
    kind = _require(data, "type", where)
    if kind == "circle":
        return Circle(
            center=_pair(_require(data, "center", where), f"{where}.center"),
            radius=float(_require(data, "radius", where)),
        )
    if kind == "polygon":
        verts = _require(data, "vertices", where)
        if not isinstance(verts, list) or len(verts) < 3:
            raise ScenarioFormatError(f"{where}.vertices: need at least 3 vertices")
        return ConvexPolygon(
            vertices=tuple(_pair(v, f"{where}.vertices[{i}]") for i, v in enumerate(verts))
        )
    raise ScenarioFormatError(f"{where}.type: expected 'circle' or 'polygon', got {kind!r}")


def _region_to_dict(region: Region) -> dict:
    if isinstance(region, Circle):
        return {
            "type": "circle",
            "center": [region.center[0], region.center[1]],
            "radius": region.radius,
        }
    return {"type": "polygon", "vertices": [[x, y] for x, y in region.vertices]}


def _reference_from_dict(data, where: str) -> ReferenceMode:
    if data is None:
        return ZeroReference()
    mode = _require(data, "mode", where)
    if mode == "zero":
        return ZeroReference()
    if mode == "circular":
        return CircularReference(
            v0=float(_require(data, "v0", where)),
            theta=float(_require(data, "theta", where)),
        )
    if mode == "constant":
        return ConstantReference(
            velocity=_pair(_require(data, "velocity", where), f"{where}.velocity")
        )
    raise ScenarioFormatError(
        f"{where}.mode: expected 'zero', 'circular' or 'constant', got {mode!r}"
    )


def _reference_to_dict(ref: ReferenceMode) -> dict:
    if isinstance(ref, ZeroReference):
        return {"mode": "zero"}
    if isinstance(ref, CircularReference):
        return {"mode": "circular", "v0": ref.v0, "theta": ref.theta}
    return {"mode": "constant", "velocity": [ref.velocity[0], ref.velocity[1]]}


def scenario_from_dict(data: dict) -> Scenario:
    """Build a Scenario from a parsed tree; structural errors carry key paths."""
    if not isinstance(data, dict):
        raise ScenarioFormatError(f"scenario: expected a mapping, got {type(data).__name__}")
    agents_raw = _require(data, "agents", "scenario")
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ScenarioFormatError("agents: expected a non-empty list")
    agents = []
    for i, a in enumerate(agents_raw):
        where = f"agents[{i}]"
        if not isinstance(a, dict):
            raise ScenarioFormatError(f"{where}: expected a mapping")
        ident = int(a.get("id", i))
        if ident != i:
            raise ScenarioFormatError(f"{where}.id: expected {i}, got {ident}")
        agents.append(
            AgentState(
                id=i,
                position=_pair(_require(a, "position", where), f"{where}.position"),
                velocity=_pair(a.get("velocity", [0.0, 0.0]), f"{where}.velocity"),
                is_leader=bool(a.get("leader", False)),
            )
        )
    form_raw = _require(data, "formation", "scenario")
    targets = _require(form_raw, "targets", "formation")
    formation = FormationSpec(
        targets=tuple(_pair(v, f"formation.targets[{i}]") for i, v in enumerate(targets))
    )
    params_raw = data.get("params", {}) or {}
    known = {f.name for f in dataclasses.fields(ControllerParams)}
    unknown = set(params_raw) - known
    if unknown:
        raise ScenarioFormatError(f"params: unknown keys {sorted(unknown)}")
    params = ControllerParams(**{k: float(v) for k, v in params_raw.items()})
    obstacles = [
        _region_from_dict(o, f"obstacles[{k}]")
        for k, o in enumerate(data.get("obstacles", []) or [])
    ]
    return Scenario(
        name=str(data.get("name", "unnamed")),
        agents=agents,
        formation=formation,
        target=_region_from_dict(_require(data, "target", "scenario"), "target"),
        obstacles=obstacles,
        params=params,
        radius=float(_require(data, "radius", "scenario")),
        margin=float(_require(data, "margin", "scenario")),
        duration=float(_require(data, "duration", "scenario")),
        dt=float(data.get("dt", 1e-3)),
        reference=_reference_from_dict(data.get("reference"), "reference"),
        controller=str(data.get("controller", "full")),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """Fully explicit tree (no defaults omitted), round-trips exactly."""
    return {
        "name": scenario.name,
        "radius": scenario.radius,
        "margin": scenario.margin,
        "duration": scenario.duration,
        "dt": scenario.dt,
        "controller": scenario.controller,
        "reference": _reference_to_dict(scenario.reference),
        "target": _region_to_dict(scenario.target),
        "obstacles": [_region_to_dict(o) for o in scenario.obstacles],
        "formation": {"targets": [[x, y] for x, y in scenario.formation.targets]},
        "agents": [
            {
                "id": a.id,
                "position": [a.position[0], a.position[1]],
                "velocity": [a.velocity[0], a.velocity[1]],
                "leader": a.is_leader,
            }
            for a in scenario.agents
        ],
        "params": {
            f.name: getattr(scenario.params, f.name)
            for f in dataclasses.fields(ControllerParams)
        },
    }


def available_scenarios() -> list[str]:
    """Names of the scenario files shipped inside the package."""
    root = resources.files("safeform") / "scenarios"
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def scenario_text(source: str | Path) -> str:
    """Raw file text for a path or a shipped-scenario name."""
    p = Path(source)
    if p.exists():
        return p.read_text(encoding="utf-8")
    if p.suffix == "" and "/" not in str(source):
        shipped = resources.files("safeform") / "scenarios" / f"{source}.yaml"
        if shipped.is_file():
            return shipped.read_text(encoding="utf-8")
    raise FileNotFoundError(
        f"no scenario file {str(source)!r}; shipped scenarios: "
        + ", ".join(available_scenarios())
    )


def load_scenario(source: str | Path, overrides: list[str] | None = None) -> Scenario:
    """Load a scenario from a file path or a shipped-scenario name."""
    data = yaml.safe_load(scenario_text(source))
    if overrides:
        data = apply_overrides(data, overrides)
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(scenario), fh, sort_keys=False)


def parse_override(text: str) -> tuple[list, object]:
    """Split ``dotted.path=value`` into path segments and a parsed value.

    Integer segments index lists; the value is parsed with the same reader as
    the scenario file, so ``params.c2=0.06``, ``reference.mode=zero`` and
    ``obstacles=[]`` all work.
    """
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ValueError(f"override must look like path=value, got {text!r}")
    segments: list = []
    for part in key.split("."):
        segments.append(int(part) if part.lstrip("-").isdigit() else part)
    return segments, yaml.safe_load(raw if raw != "" else "null")


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``path=value`` substitutions to a parsed scenario tree."""
    for text in overrides:
        segments, value = parse_override(text)
        node = data
        for seg in segments[:-1]:
            if isinstance(node, list):
                if not isinstance(seg, int):
                    raise ValueError(f"override {text!r}: {seg!r} cannot index a list")
                node = node[seg]
            elif isinstance(node, dict):
                node = node.setdefault(seg, {})
            else:
                raise ValueError(f"override {text!r}: cannot descend into {type(node).__name__}")
        last = segments[-1]
        if isinstance(node, list):
            if not isinstance(last, int):
                raise ValueError(f"override {text!r}: {last!r} cannot index a list")
            node[last] = value
        elif isinstance(node, dict):
            node[last] = value
        else:
            raise ValueError(f"override {text!r}: cannot assign into {type(node).__name__}")
    return data
