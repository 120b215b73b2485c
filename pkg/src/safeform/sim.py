"""Simulation driver: fixed-step loop, event log, abort checks, trajectory log.

Step order, from one common state snapshot per step: (1) refresh the
hysteresis neighbor graph and sync the estimator state, (2) evaluate every
agent's nominal control, barrier constraints and filter QP, (3) integrate one
RK4 step with the filtered controls held, (4) record metrics and events.
A run aborts (with the partial log attached to the exception) on collision,
on loss of graph connectivity, or when a live edge reaches the sensing
radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cbf, qp
from .control import velocity_estimate
from .errors import CollisionError, ConnectivityLostError, ScenarioError, SimulationError
from .geometry import Vec2, closest_boundary_point, contains
from .kernels import (
    F_NEEDS_RELAX,
    F_OBSTACLE_HIT,
    F_RANGE,
    N_SCALARS,
    S_EF,
    S_ESTERR,
    S_FLOW,
    S_MIN_HEXT,
    S_MIN_HINT,
    S_MIN_PAIR,
    S_POT,
    STATUS_OPTIMAL,
    STATUS_RELAXED,
    backend_name,
    get_backend,
    make_kernel_data,
    make_workspace,
    set_adjacency,
)
from .world import (
    AgentState,
    NeighborGraph,
    Scenario,
    empty_graph,
    is_connected,
    reference_velocity,
    update_neighbors,
)

__all__ = [
    "World",
    "Event",
    "StepRecord",
    "TrajectoryLog",
    "initial_world",
    "step",
    "run",
    "formation_error",
    "min_margins",
]

#: Discretization allowance on safety checks: the integrator can overshoot a
#: continuous-time boundary by this much within one step before it counts.
TOL_DISC = 1e-3

_STATUS_NAMES = ("optimal", "relaxed")


@dataclass
class World:
    """Instantaneous simulation state: time, agents, sensing graph."""

    t: float
    agents: list[AgentState]
    graph: NeighborGraph


@dataclass(frozen=True)
class Event:
    t: float
    kind: str  # edge-gain | edge-loss | region-entry | relaxed-qp | collision | connectivity-loss
    detail: str


@dataclass(frozen=True)
class StepRecord:
    """One logged step: the pre-integration snapshot plus the controls applied from it."""

    t: float
    positions: tuple[Vec2, ...]
    velocities: tuple[Vec2, ...]
    controls: tuple[Vec2, ...]
    nominal_controls: tuple[Vec2, ...]
    qp_status: tuple[str, ...]
    qp_slack: tuple[float, ...]
    in_region: tuple[bool, ...]
    edges: tuple[tuple[int, int], ...]
    connected: bool
    min_pair_dist: float
    min_h_ext: float
    min_h_int: float
    formation_error: float
    all_leaders_in_region: bool


class TrajectoryLog:
    """Array-backed per-step history of a run.

    Rows are indexed 0..n_steps; row k holds the state at t = k dt and the
    controls computed from it (the final row's controls are evaluated but
    never applied).  ``scalars`` columns follow the kernel layout
    (min_pair_dist, min_h_ext, min_h_int, formation_error, potential,
    potential_flow, estimate_error).
    """

    def __init__(self, scenario: Scenario, n_steps: int, backend: str) -> None:
        n = scenario.n_agents
        rows = n_steps + 1
        self.scenario = scenario
        self.backend = backend
        self.n_steps = n_steps
        self.t = np.zeros(rows)
        self.positions = np.zeros((rows, n, 2))
        self.velocities = np.zeros((rows, n, 2))
        self.controls = np.zeros((rows, n, 2))
        self.nominal_controls = np.zeros((rows, n, 2))
        self.qp_status = np.zeros((rows, n), dtype=np.uint8)
        self.qp_slack = np.zeros((rows, n))
        self.nominal_feasible = np.zeros((rows, n), dtype=np.uint8)
        self.in_region = np.zeros((rows, n), dtype=np.uint8)
        self.scalars = np.zeros((rows, N_SCALARS))
        self.connected = np.zeros(rows, dtype=bool)
        self.edges: list[tuple[tuple[int, int], ...]] = []
        self.events: list[Event] = []
        self.t_f: float | None = None
        self.aborted: str | None = None
        self.n_rows = 0

    def __len__(self) -> int:
        return self.n_rows

    @property
    def leaders(self) -> tuple[int, ...]:
        return self.scenario.leaders

    def record(self, k: int) -> StepRecord:
        if not 0 <= k < self.n_rows:
            raise IndexError(k)
        leaders = self.leaders
        inreg = tuple(bool(v) for v in self.in_region[k])
        return StepRecord(
            t=float(self.t[k]),
            positions=tuple((float(x), float(y)) for x, y in self.positions[k]),
            velocities=tuple((float(x), float(y)) for x, y in self.velocities[k]),
            controls=tuple((float(x), float(y)) for x, y in self.controls[k]),
            nominal_controls=tuple((float(x), float(y)) for x, y in self.nominal_controls[k]),
            qp_status=tuple(_STATUS_NAMES[s] for s in self.qp_status[k]),
            qp_slack=tuple(float(s) for s in self.qp_slack[k]),
            in_region=inreg,
            edges=self.edges[k],
            connected=bool(self.connected[k]),
            min_pair_dist=float(self.scalars[k, S_MIN_PAIR]),
            min_h_ext=float(self.scalars[k, S_MIN_HEXT]),
            min_h_int=float(self.scalars[k, S_MIN_HINT]),
            formation_error=float(self.scalars[k, S_EF]),
            all_leaders_in_region=bool(leaders) and all(inreg[i] for i in leaders),
        )

    @property
    def records(self):
        for k in range(self.n_rows):
            yield self.record(k)

    def final_record(self) -> StepRecord:
        return self.record(self.n_rows - 1)

    def summary(self) -> dict:
        """Headline numbers, all derived from the logged arrays."""
        last = self.n_rows - 1
        relaxed = sum(1 for e in self.events if e.kind == "relaxed-qp")
        losses = sum(1 for e in self.events if e.kind == "edge-loss")
        filtered = int(
            np.any(self.controls[: self.n_rows] != self.nominal_controls[: self.n_rows], axis=(1, 2)).sum()
        )
        return {
            "scenario": self.scenario.name,
            "backend": self.backend,
            "n_agents": self.scenario.n_agents,
            "dt": self.scenario.dt,
            "steps": self.n_steps,
            "t_final": float(self.t[last]),
            "t_f": self.t_f,
            "formation_error_initial": float(self.scalars[0, S_EF]),
            "formation_error_final": float(self.scalars[last, S_EF]),
            "min_pair_dist": float(self.scalars[: self.n_rows, S_MIN_PAIR].min()),
            "min_h_ext": float(self.scalars[: self.n_rows, S_MIN_HEXT].min()),
            "min_h_int": float(self.scalars[: self.n_rows, S_MIN_HINT].min()),
            "max_control_inf": float(np.abs(self.controls[: self.n_rows]).max(initial=0.0)),
            "relaxed_qp_events": relaxed,
            "edge_loss_events": losses,
            "filtered_steps": filtered,
            "connected_throughout": bool(self.connected[: self.n_rows].all()),
            "aborted": self.aborted,
        }


class _Sim:
    """Mutable array state plus the kernel plumbing for one run."""

    def __init__(self, scenario: Scenario, backend: str | None = None) -> None:
        bad, _ = scenario.validate()
        if bad:
            raise ScenarioError(bad)
        self.scenario = scenario
        self.impl = get_backend(backend)
        self.kd = make_kernel_data(scenario)
        n = scenario.n_agents
        self.n = n
        self.pos = np.array([a.position for a in scenario.agents], dtype=np.float64)
        self.vel = np.array([a.velocity for a in scenario.agents], dtype=np.float64)
        self.phi = np.zeros((n, n, 2))
        self.gamma = self.pos.copy()
        self.adj = np.zeros((n, n), dtype=np.uint8)
        self.ws = make_workspace(n)
        self.graph = update_neighbors(
            empty_graph(n, scenario.radius, scenario.margin), self._positions()
        )
        for i, j in self.graph.edges:
            self._init_phi(i, j)
        self._sync_adj()
        self.u = np.zeros((n, 2))
        self.unom = np.zeros((n, 2))
        self.status = np.zeros(n, dtype=np.uint8)
        self.slack = np.zeros(n)
        self.nomfeas = np.zeros(n, dtype=np.uint8)
        self.inreg = np.zeros(n, dtype=np.uint8)
        self.scalars = np.zeros(N_SCALARS)
        self.prev_inreg = None

    @classmethod
    def from_world(cls, world: World, scenario: Scenario, backend: str | None = None) -> "_Sim":
        sim = cls(scenario, backend)
        n = sim.n
        sim.pos = np.array([a.position for a in world.agents], dtype=np.float64)
        sim.vel = np.array([a.velocity for a in world.agents], dtype=np.float64)
        sim.gamma = np.array([a.gamma for a in world.agents], dtype=np.float64)
        sim.phi = np.zeros((n, n, 2))
        for a in world.agents:
            for j, v in a.phi.items():
                sim.phi[a.id, j, 0] = v[0]
                sim.phi[a.id, j, 1] = v[1]
        sim.graph = world.graph
        sim._sync_adj()
        return sim

    def _positions(self) -> list[Vec2]:
        return [(float(x), float(y)) for x, y in self.pos]

    def _init_phi(self, i: int, j: int) -> None:
        dx = self.pos[i, 0] - self.pos[j, 0]
        dy = self.pos[i, 1] - self.pos[j, 1]
        self.phi[i, j, 0] = dx
        self.phi[i, j, 1] = dy
        self.phi[j, i, 0] = -dx
        self.phi[j, i, 1] = -dy

    def _sync_adj(self) -> None:
        self.adj[:] = 0
        for i, j in self.graph.edges:
            self.adj[i, j] = 1
            self.adj[j, i] = 1
        set_adjacency(self.ws, self.adj)

    def refresh_graph(self, t: float, events: list[Event]) -> None:
        """Hysteresis update; fresh edges restart their estimator state."""
        new = update_neighbors(self.graph, self._positions())
        if new.edges != self.graph.edges:
            for i, j in sorted(new.edges - self.graph.edges):
                self._init_phi(i, j)
                events.append(Event(t, "edge-gain", f"pair=({i},{j})"))
            for i, j in sorted(self.graph.edges - new.edges):
                self.phi[i, j] = 0.0
                self.phi[j, i] = 0.0
                events.append(Event(t, "edge-loss", f"pair=({i},{j})"))
            self.graph = new
            self._sync_adj()
        else:
            self.graph = new

    def compute_controls(self, t: float, events: list[Event]) -> None:
        """Controls + constraints + filter for every agent from the snapshot at t."""
        sc = self.scenario
        if not is_connected(self.graph):
            events.append(Event(t, "connectivity-loss", "sensing graph disconnected"))
            raise ConnectivityLostError(t, "sensing graph disconnected")
        vd, vddot = reference_velocity(sc.reference, t)
        flags = self.impl.compute_controls(
            self.kd, self.pos, self.vel, self.phi, self.gamma, self.adj,
            vd[0], vd[1], vddot[0], vddot[1],
            self.u, self.unom, self.status, self.slack,
            self.nomfeas, self.inreg, self.scalars,
        )
        if flags & F_OBSTACLE_HIT:
            i, k = self._find_obstacle_hit()
            events.append(Event(t, "collision", f"agent={i} obstacle={k}"))
            raise CollisionError(t, f"agent {i} entered obstacle {k}")
        if self.scalars[S_MIN_PAIR] < sc.params.delta_in - TOL_DISC:
            i, j = self._find_close_pair()
            events.append(Event(t, "collision", f"pair=({i},{j})"))
            raise CollisionError(
                t,
                f"agents {i} and {j} closer than delta_in - {TOL_DISC}"
                f" ({self.scalars[S_MIN_PAIR]:.6f} < {sc.params.delta_in})",
            )
        if flags & F_RANGE:
            events.append(Event(t, "connectivity-loss", "live edge reached sensing radius"))
            raise ConnectivityLostError(t, "live edge reached the sensing radius")
        if flags & F_NEEDS_RELAX:
            for i in range(self.n):
                if self.status[i] == STATUS_RELAXED:
                    sol = qp.solve_relaxed(self._build_problem(i))
                    self.u[i, 0] = sol.control[0]
                    self.u[i, 1] = sol.control[1]
                    self.slack[i] = sol.slack
                    events.append(Event(t, "relaxed-qp", f"agent={i} slack={sol.slack:.6g}"))
        # Region-entry events on membership transitions.
        if self.prev_inreg is not None:
            for i in range(self.n):
                if self.inreg[i] and not self.prev_inreg[i]:
                    events.append(Event(t, "region-entry", f"agent={i}"))
        self.prev_inreg = self.inreg.copy()

    def _build_problem(self, i: int) -> qp.QpProblem:
        """Rebuild agent i's QP exactly as the kernel assembled it."""
        sc = self.scenario
        p_i = (float(self.pos[i, 0]), float(self.pos[i, 1]))
        v_i = (float(self.vel[i, 0]), float(self.vel[i, 1]))
        cons: list[cbf.CbfConstraint] = []
        for j in self.graph.neighbors(i):
            p_j = (float(self.pos[j, 0]), float(self.pos[j, 1]))
            phi_ij = (float(self.phi[i, j, 0]), float(self.phi[i, j, 1]))
            v_hat = velocity_estimate(phi_ij, p_i, p_j, sc.params.eta)
            cons.append(
                cbf.internal_constraint(p_i, p_j, v_hat, sc.params, agent=i, neighbor=j)
            )
        for k, s_ik in cbf.sensed_obstacles(p_i, sc.obstacles, sc.radius):
            cons.append(
                cbf.external_constraint(p_i, v_i, s_ik, sc.params, agent=i, obstacle=k)
            )
        nominal = (float(self.unom[i, 0]), float(self.unom[i, 1]))
        return qp.QpProblem(nominal=nominal, constraints=tuple(cons), u_max=sc.params.u_max)

    def _find_obstacle_hit(self) -> tuple[int, int]:
        for i in range(self.n):
            p = (float(self.pos[i, 0]), float(self.pos[i, 1]))
            for k, obs in enumerate(self.scenario.obstacles):
                if contains(obs, p):
                    return i, k
        return -1, -1

    def _find_close_pair(self) -> tuple[int, int]:
        best = (math.inf, -1, -1)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                dx = self.pos[i, 0] - self.pos[j, 0]
                dy = self.pos[i, 1] - self.pos[j, 1]
                d = math.sqrt(dx * dx + dy * dy)
                if d < best[0]:
                    best = (d, i, j)
        return best[1], best[2]

    def advance(self, t: float, dt: float) -> None:
        sc = self.scenario
        vd0, _ = reference_velocity(sc.reference, t)
        vdh, _ = reference_velocity(sc.reference, t + 0.5 * dt)
        vd1, _ = reference_velocity(sc.reference, t + dt)
        self.impl.integrate(
            self.kd, self.pos, self.vel, self.phi, self.gamma, self.u,
            vd0[0], vd0[1], vdh[0], vdh[1], vd1[0], vd1[1], dt, self.ws,
        )

    def agents(self) -> list[AgentState]:
        out = []
        for i in range(self.n):
            phi = {}
            for j in self.graph.neighbors(i):
                phi[j] = (float(self.phi[i, j, 0]), float(self.phi[i, j, 1]))
            out.append(
                AgentState(
                    id=i,
                    position=(float(self.pos[i, 0]), float(self.pos[i, 1])),
                    velocity=(float(self.vel[i, 0]), float(self.vel[i, 1])),
                    is_leader=self.scenario.agents[i].is_leader,
                    phi=phi,
                    gamma=(float(self.gamma[i, 0]), float(self.gamma[i, 1])),
                )
            )
        return out


def _n_steps(duration: float, dt: float) -> int:
    if duration <= 0.0:
        return 0
    return max(0, math.ceil(duration / dt - 1e-9))


def _log_row(log: TrajectoryLog, sim: _Sim, t: float) -> None:
    k = log.n_rows
    log.t[k] = t
    log.positions[k] = sim.pos
    log.velocities[k] = sim.vel
    log.controls[k] = sim.u
    log.nominal_controls[k] = sim.unom
    log.qp_status[k] = sim.status
    log.qp_slack[k] = sim.slack
    log.nominal_feasible[k] = sim.nomfeas
    log.in_region[k] = sim.inreg
    log.scalars[k] = sim.scalars
    log.connected[k] = True
    log.edges.append(tuple(sorted(sim.graph.edges)))
    log.n_rows += 1
    leaders = log.leaders
    if log.t_f is None and all(sim.inreg[i] for i in leaders):
        log.t_f = t


def run(scenario: Scenario, *, backend: str | None = None) -> TrajectoryLog:
    """Simulate the full scenario; returns the complete per-step log.

    On abort the raised :class:`SimulationError` carries the partial log as
    its ``log`` attribute.
    """
    sim = _Sim(scenario, backend)
    n_steps = _n_steps(scenario.duration, scenario.dt)
    log = TrajectoryLog(scenario, n_steps, backend_name(sim.impl))
    dt = scenario.dt
    try:
        for k in range(n_steps + 1):
            t = k * dt
            if k:
                sim.refresh_graph(t, log.events)
            sim.compute_controls(t, log.events)
            _log_row(log, sim, t)
            if k < n_steps:
                sim.advance(t, dt)
    except SimulationError as exc:
        log.aborted = str(exc)
        exc.log = log
        raise
    return log


def formation_error(positions, spec) -> float:
    """Sum of ``|p_i - p_j - d_ij|^2`` over all ordered pairs i != j.

    Zero exactly when the formation is achieved, and invariant under common
    translations of all agents.  Accumulation order matches the kernels so
    the value agrees bitwise with the logged one.
    """
    n = len(positions)
    total = 0.0
    for i in range(n):
        pix, piy = positions[i]
        for j in range(n):
            if j == i:
                continue
            d = spec.displacement(i, j)
            ex = (pix - positions[j][0]) - d[0]
            ey = (piy - positions[j][1]) - d[1]
            total += ex * ex + ey * ey
    return total


def min_margins(world: World, obstacles, params) -> tuple[float, float, float]:
    """(min pairwise distance, min external h, min internal h) for one snapshot.

    External h uses the distance to the obstacle *set* (zero for a point
    inside), so the value is well defined and negative in that degenerate
    case instead of raising.  Empty categories report ``math.inf``.
    """
    agents = world.agents
    n = len(agents)
    radius = world.graph.radius
    min_pair = math.inf
    min_hint = math.inf
    for i in range(n):
        pix, piy = agents[i].position
        for j in range(i + 1, n):
            dx = pix - agents[j].position[0]
            dy = piy - agents[j].position[1]
            d2 = dx * dx + dy * dy
            d = math.sqrt(d2)
            if d < min_pair:
                min_pair = d
            h = d2 - params.delta_in * params.delta_in
            if h < min_hint:
                min_hint = h
    min_hext = math.inf
    dex2 = params.delta_ex * params.delta_ex
    for a in agents:
        px, py = a.position
        for obs in obstacles:
            if contains(obs, a.position):
                h = -dex2
            else:
                s = closest_boundary_point(obs, a.position)
                dx = px - s[0]
                dy = py - s[1]
                d2 = dx * dx + dy * dy
                if math.sqrt(d2) >= radius:
                    continue
                h = d2 - dex2
            if h < min_hext:
                min_hext = h
    return min_pair, min_hext, min_hint


def initial_world(scenario: Scenario) -> World:
    """World at t = 0: graph from the make-threshold, estimator and tracking
    state initialized from positions."""
    sim = _Sim(scenario)
    return World(t=0.0, agents=sim.agents(), graph=sim.graph)


def step(
    world: World,
    scenario: Scenario,
    t: float | None = None,
    dt: float | None = None,
) -> tuple[World, StepRecord]:
    """Advance one step from an explicit world state.

    ``t`` defaults to ``world.t``; ``dt`` to the scenario step.  Returns the
    post-step world and the record of the step taken (snapshot at ``t`` plus
    the controls applied over it).
    """
    if t is None:
        t = world.t
    if dt is None:
        dt = scenario.dt
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    sim = _Sim.from_world(world, scenario, None)
    log = TrajectoryLog(scenario, 0, backend_name(sim.impl))
    sim.refresh_graph(t, log.events)
    sim.compute_controls(t, log.events)
    _log_row(log, sim, t)
    sim.advance(t, dt)
    rec = log.record(0)
    return World(t=t + dt, agents=sim.agents(), graph=sim.graph), rec
