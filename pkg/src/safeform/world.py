"""World state for the swarm: agents, desired formation, hysteresis sensing graph,
controller parameters, reference velocity and the scenario container."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .geometry import Region, Vec2, contains

__all__ = [
    "AgentState",
    "FormationSpec",
    "NeighborGraph",
    "ControllerParams",
    "ZeroReference",
    "CircularReference",
    "ConstantReference",
    "ReferenceMode",
    "Scenario",
    "empty_graph",
    "update_neighbors",
    "is_connected",
    "sync_estimator_state",
    "reference_velocity",
]


@dataclass
class AgentState:
    """One double-integrator agent plus its controller auxiliaries.

    ``phi`` is the relative-position filter state behind the neighbor velocity
    estimate, keyed by neighbor id and kept in lockstep with the neighbor set.
    ``gamma`` is the auxiliary tracking reference position.
    """

    id: int
    position: Vec2
    velocity: Vec2 = (0.0, 0.0)
    is_leader: bool = False
    phi: dict[int, Vec2] = field(default_factory=dict)
    gamma: Vec2 = (0.0, 0.0)


@dataclass(frozen=True)
class FormationSpec:
    """Desired formation given as one target point per agent.

    Only differences of target points matter: the controller consumes the
    desired displacement d_ij = targets[i] - targets[j].
    """

    targets: tuple[Vec2, ...]

    def displacement(self, i: int, j: int) -> Vec2:
        ti = self.targets[i]
        tj = self.targets[j]
        return (ti[0] - tj[0], ti[1] - tj[1])


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected sensing graph with make-below / break-above hysteresis.

    A missing edge appears only when the pair gets closer than
    ``radius - margin``; an existing edge survives until the pair separates to
    ``radius`` or beyond.  Edges are stored as ``(i, j)`` with ``i < j``.
    """

    n_agents: int
    radius: float
    margin: float
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self) -> None:
        if not (0.0 < self.margin < self.radius):
            raise ValueError(
                f"hysteresis margin must lie in (0, radius), got {self.margin} vs {self.radius}"
            )

    def neighbors(self, i: int) -> list[int]:
        out = [b for a, b in self.edges if a == i]
        out += [a for a, b in self.edges if b == i]
        out.sort()
        return out


def empty_graph(n_agents: int, radius: float, margin: float) -> NeighborGraph:
    return NeighborGraph(n_agents=n_agents, radius=radius, margin=margin)


def update_neighbors(graph: NeighborGraph, positions: list[Vec2]) -> NeighborGraph:
    """Next neighbor graph for the given positions.

    Applied to an empty graph this yields exactly the pairs closer than
    ``radius - margin``, which is the rule for the initial edge set.
    """
    n = len(positions)
    if n != graph.n_agents:
        raise ValueError(f"expected {graph.n_agents} positions, got {n}")
    keep2 = graph.radius * graph.radius
    make = graph.radius - graph.margin
    make2 = make * make
    edges = set()
    for i in range(n):
        xi, yi = positions[i]
        for j in range(i + 1, n):
            dx = xi - positions[j][0]
            dy = yi - positions[j][1]
            d2 = dx * dx + dy * dy
            if (i, j) in graph.edges:
                if d2 < keep2:
                    edges.add((i, j))
            elif d2 < make2:
                edges.add((i, j))
    return replace(graph, edges=frozenset(edges))


def is_connected(graph: NeighborGraph) -> bool:
    """Breadth-first reachability of every agent from agent 0."""
    n = graph.n_agents
    if n <= 1:
        return True
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in graph.edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for a in frontier:
            for b in adj[a]:
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        frontier = nxt
    return len(seen) == n


def sync_estimator_state(
    agent: AgentState, new_neighbors: set[int], positions: list[Vec2]
) -> AgentState:
    """Align ``agent.phi`` with a new neighbor set.

    Surviving neighbors keep their filter state; fresh edges start at the
    current relative position, which makes the velocity estimate for that
    neighbor start at exactly zero.  Entries for lost neighbors are dropped.
    """
    px, py = agent.position
    phi: dict[int, Vec2] = {}
    for j in sorted(new_neighbors):
        old = agent.phi.get(j)
        if old is not None:
            phi[j] = old
        else:
            qx, qy = positions[j]
            phi[j] = (px - qx, py - qy)
    return replace(agent, phi=phi)


@dataclass(frozen=True)
class ZeroReference:
    """No commanded motion: v_d = 0."""


@dataclass(frozen=True)
class CircularReference:
    """Rotating velocity command v_d(t) = v0 (cos(theta t), sin(theta t))."""

    v0: float
    theta: float


@dataclass(frozen=True)
class ConstantReference:
    velocity: Vec2


ReferenceMode = ZeroReference | CircularReference | ConstantReference


def reference_velocity(mode: ReferenceMode, t: float) -> tuple[Vec2, Vec2]:
    """Reference velocity and its time derivative at time ``t``."""
    if isinstance(mode, ZeroReference):
        return (0.0, 0.0), (0.0, 0.0)
    if isinstance(mode, CircularReference):
        a = mode.theta * t
        c = math.cos(a)
        s = math.sin(a)
        return (
            (mode.v0 * c, mode.v0 * s),
            (-mode.v0 * mode.theta * s, mode.v0 * mode.theta * c),
        )
    return mode.velocity, (0.0, 0.0)


@dataclass(frozen=True)
class ControllerParams:
    """Gains and safety parameters shared by the controller and the CBF filter.

    c1: formation potential gain        c2: velocity-consensus gain
    c3: region attraction gain          c4: tracking gain
    c5: tracking filter rate            eta: velocity estimator rate
    k0, k1: barrier pole coefficients (s^2 + k1 s + k0 with two negative real roots)
    delta_in / delta_ex: inter-agent / obstacle safety clearances
    u_max: per-axis control bound       mu: potential denominator offset
    """

    c1: float = 15.0
    c2: float = 0.2
    c3: float = 1.5
    c4: float = 5.0
    c5: float = 4.0
    eta: float = 100.0
    k0: float = 1.0
    k1: float = 5.0
    delta_in: float = 0.1
    delta_ex: float = 0.5
    u_max: float = 5.0
    mu: float = 0.01

    def validate(self) -> list[str]:
        """Violation messages for invariants that do not need world context."""
        bad = []
        for name in ("c1", "c2", "c3", "c4", "c5", "eta", "k0", "k1", "delta_in",
                     "delta_ex", "u_max", "mu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                bad.append(f"params.{name}: must be a positive finite number, got {v}")
        if self.k1 * self.k1 < 4.0 * self.k0:
            bad.append(
                f"params.k1: k1^2 >= 4 k0 required for two negative real barrier "
                f"poles, got k1={self.k1}, k0={self.k0}"
            )
        return bad


@dataclass
class Scenario:
    """Complete, self-contained description of one simulation run."""

    name: str
    agents: list[AgentState]
    formation: FormationSpec
    target: Region
    obstacles: list[Region]
    params: ControllerParams
    radius: float
    margin: float
    duration: float
    dt: float = 1e-3
    reference: ReferenceMode = ZeroReference()
    controller: str = "full"  # "full" | "no_tracking"

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def leaders(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.agents if a.is_leader)

    def validate(self) -> tuple[list[str], list[str]]:
        """(violations, warnings); a scenario is runnable iff violations is empty."""
        bad: list[str] = []
        warn: list[str] = []
        n = len(self.agents)
        if n < 1:
            bad.append("agents: at least one agent required")
            return bad, warn
        if [a.id for a in self.agents] != list(range(n)):
            bad.append("agents: ids must be 0..n-1 in order")
            return bad, warn
        bad += self.params.validate()
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            bad.append(f"radius: must be positive, got {self.radius}")
        elif not (0.0 < self.margin < self.radius):
            bad.append(
                f"margin: hysteresis margin must lie in (0, radius), got {self.margin}"
            )
        if math.isfinite(self.radius) and self.radius > 0.0:
            half = 0.5 * self.radius
            if self.params.delta_in >= half:
                bad.append(
                    f"params.delta_in: must be < radius/2 = {half}, got {self.params.delta_in}"
                )
            if self.params.delta_ex >= half:
                bad.append(
                    f"params.delta_ex: must be < radius/2 = {half}, got {self.params.delta_ex}"
                )
        if self.controller not in ("full", "no_tracking"):
            bad.append(f"controller: must be 'full' or 'no_tracking', got {self.controller!r}")
        if not (math.isfinite(self.duration) and self.duration >= 0.0):
            bad.append(f"duration: must be >= 0, got {self.duration}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            bad.append(f"dt: must be > 0, got {self.dt}")
        if len(self.formation.targets) != n:
            bad.append(
                f"formation: {len(self.formation.targets)} targets for {n} agents"
            )
        for a in self.agents:
            if a.velocity != (0.0, 0.0):
                bad.append(f"agents[{a.id}]: initial velocity must be zero, got {a.velocity}")
        # Initial safety: clear of obstacles and of each other.
        for a in self.agents:
            for k, obs in enumerate(self.obstacles):
                if contains(obs, a.position):
                    bad.append(f"agents[{a.id}]: starts inside obstacle {k}")
        for i in range(n):
            xi, yi = self.agents[i].position
            for j in range(i + 1, n):
                dx = xi - self.agents[j].position[0]
                dy = yi - self.agents[j].position[1]
                if math.sqrt(dx * dx + dy * dy) < self.params.delta_in:
                    bad.append(f"agents: pair ({i},{j}) starts closer than delta_in")
        # Connectivity of the initial graph and of the desired formation.
        if not bad:
            g0 = update_neighbors(
                empty_graph(n, self.radius, self.margin),
                [a.position for a in self.agents],
            )
            if not is_connected(g0):
                bad.append("agents: initial sensing graph is not connected")
            gstar = update_neighbors(
                empty_graph(n, self.radius, self.margin), list(self.formation.targets)
            )
            if not is_connected(gstar):
                bad.append("formation: desired formation graph is not connected")
        if not self.leaders:
            warn.append("no leaders: region attraction and tracking terms are inert")
        if self.params.eta * self.dt > 0.5:
            warn.append(
                f"eta*dt = {self.params.eta * self.dt:.3g} > 0.5: estimator dynamics "
                f"are marginally resolved at this step size"
            )
        return bad, warn
