"""Per-agent safety filter: project the nominal control onto the constraint set.

The problem is tiny and fixed-shape — minimize ||z - u_nominal||^2 over z in
the box |z|_inf <= u_max intersected with at most a handful of half-planes
a + b.z >= 0 — so instead of an iterative solver it is solved exactly by
enumerating every candidate active set of size 0, 1 or 2 (half-planes and box
faces alike), screening each candidate's KKT multipliers, and keeping the
feasible candidate with the smallest objective.  Ties break toward the
earliest candidate in enumeration order, which makes the solver fully
deterministic; when the nominal control is already feasible it is returned
bit-for-bit unchanged.

When the half-planes and the box have empty intersection, the fallback
relaxes all half-planes by the smallest common slack (a minimax linear
program, solved exactly the same way by vertex enumeration) and re-solves;
the box is never relaxed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cbf import CbfConstraint
from .geometry import Vec2

__all__ = ["QpProblem", "QpSolution", "solve", "solve_relaxed", "oracle_solve"]

#: Primal/dual feasibility tolerance for candidate screening.
FEAS_TOL = 1e-9
#: Below this, a candidate system is treated as degenerate and skipped.
DEGEN_TOL = 1e-12


@dataclass(frozen=True)
class QpProblem:
    """One agent's filter problem: nominal control, half-planes, box bound."""

    nominal: Vec2
    constraints: tuple[CbfConstraint, ...]
    u_max: float


@dataclass(frozen=True)
class QpSolution:
    """Filter output.

    ``active_set`` indexes the rows that hold with equality at the solution:
    constraint rows first (in problem order), then the four box faces
    +x, -x, +y, -y.  ``slack`` is the common relaxation applied to the
    half-planes, zero unless ``status`` is "relaxed".
    """

    control: Vec2
    status: str  # "optimal" | "relaxed"
    active_set: tuple[int, ...]
    slack: float


def _box_rows(u_max: float) -> list[tuple[float, float, float]]:
    # Faces as half-planes a + b.z >= 0, order: +x, -x, +y, -y.
    return [
        (u_max, -1.0, 0.0),
        (u_max, 1.0, 0.0),
        (u_max, 0.0, -1.0),
        (u_max, 0.0, 1.0),
    ]


def _clamp(v: float, u_max: float) -> float:
    if v > u_max:
        return u_max
    if v < -u_max:
        return -u_max
    return v


def _solve_rows(
    ux: float, uy: float, rows: list[tuple[float, float, float]], u_max: float
) -> tuple[float, float, tuple[int, ...], bool, bool]:
    """Active-set enumeration over explicit rows (half-planes + box faces).

    Returns (zx, zy, active, feasible, nominal_feasible).  ``feasible`` is
    False only when no candidate satisfies every row, i.e. the intersection
    is empty.  The returned point is clamped onto the box, which removes the
    last <=1e-9 of screening tolerance in the box direction.
    """
    m = len(rows)
    best_obj = math.inf
    best: tuple[float, float, tuple[int, ...]] | None = None
    primal_obj = math.inf
    primal: tuple[float, float, tuple[int, ...]] | None = None
    nominal_ok = False

    def consider(zx: float, zy: float, active: tuple[int, ...], dual_ok: bool) -> bool:
        nonlocal best_obj, best, primal_obj, primal
        for a, bx, by in rows:
            if a + bx * zx + by * zy < -FEAS_TOL:
                return False
        wx = zx - ux
        wy = zy - uy
        obj = 0.5 * (wx * wx + wy * wy)
        if obj < primal_obj:
            primal_obj = obj
            primal = (zx, zy, active)
        if dual_ok and obj < best_obj:
            best_obj = obj
            best = (zx, zy, active)
        return True

    if consider(ux, uy, (), True):
        nominal_ok = True
    for k in range(m):
        a, bx, by = rows[k]
        bb = bx * bx + by * by
        if bb < DEGEN_TOL:
            continue
        lam = -(a + bx * ux + by * uy) / bb
        consider(ux + lam * bx, uy + lam * by, (k,), lam >= -FEAS_TOL)
    for k in range(m):
        ak, bkx, bky = rows[k]
        for l in range(k + 1, m):
            al, blx, bly = rows[l]
            det = bkx * bly - bky * blx
            if abs(det) < DEGEN_TOL:
                continue
            zx = (al * bky - ak * bly) / det
            zy = (ak * blx - al * bkx) / det
            wx = zx - ux
            wy = zy - uy
            lam1 = (wx * bly - blx * wy) / det
            lam2 = (bkx * wy - wx * bky) / det
            consider(zx, zy, (k, l), lam1 >= -FEAS_TOL and lam2 >= -FEAS_TOL)

    chosen = best if best is not None else primal
    if chosen is None:
        return ux, uy, (), False, False
    zx, zy, active = chosen
    return _clamp(zx, u_max), _clamp(zy, u_max), active, True, nominal_ok


def _cbf_rows(problem: QpProblem) -> list[tuple[float, float, float]]:
    return [(c.offset, c.normal[0], c.normal[1]) for c in problem.constraints]


def solve(problem: QpProblem) -> QpSolution:
    """Exact filter solution; falls back to :func:`solve_relaxed` when empty."""
    ux, uy = problem.nominal
    rows = _cbf_rows(problem) + _box_rows(problem.u_max)
    zx, zy, active, feasible, _ = _solve_rows(ux, uy, rows, problem.u_max)
    if not feasible:
        return solve_relaxed(problem)
    return QpSolution(control=(zx, zy), status="optimal", active_set=active, slack=0.0)


def _minimax_slack(
    cbf: list[tuple[float, float, float]], u_max: float
) -> float:
    """Smallest s >= 0 such that every half-plane relaxed by s meets the box.

    Linear program in (zx, zy, s), solved by enumerating all vertices (triples
    of tight constraints) of the feasible polyhedron.
    """
    rows = [(a, bx, by, 1.0) for a, bx, by in cbf]
    rows += [(x, bx, by, 0.0) for x, bx, by in _box_rows(u_max)]
    rows.append((0.0, 0.0, 0.0, 1.0))  # s >= 0
    n = len(rows)
    best = math.inf
    for i in range(n):
        ai, bix, biy, bis = rows[i]
        for j in range(i + 1, n):
            aj, bjx, bjy, bjs = rows[j]
            for k in range(j + 1, n):
                ak, bkx, bky, bks = rows[k]
                det = (
                    bix * (bjy * bks - bjs * bky)
                    - biy * (bjx * bks - bjs * bkx)
                    + bis * (bjx * bky - bjy * bkx)
                )
                if abs(det) < DEGEN_TOL:
                    continue
                # Cramer for [b_i; b_j; b_k] (z, s) = -(a_i, a_j, a_k).
                zx = (
                    -ai * (bjy * bks - bjs * bky)
                    + biy * (aj * bks - bjs * ak)
                    - bis * (aj * bky - bjy * ak)
                ) / det
                zy = (
                    -bix * (aj * bks - bjs * ak)
                    + ai * (bjx * bks - bjs * bkx)
                    + bis * (aj * bkx - ak * bjx)
                ) / det
                s = (
                    -bix * (bjy * ak - aj * bky)
                    + biy * (bjx * ak - aj * bkx)
                    - ai * (bjx * bky - bjy * bkx)
                ) / det
                if s >= best:
                    continue
                ok = True
                for a, bx, by, bs in rows:
                    if a + bx * zx + by * zy + bs * s < -FEAS_TOL:
                        ok = False
                        break
                if ok:
                    best = s
    if best < 0.0:
        best = 0.0
    return best


def solve_relaxed(problem: QpProblem) -> QpSolution:
    """Filter solution with the smallest uniform half-plane relaxation.

    For a feasible problem this is exactly :func:`solve`'s answer with zero
    slack.  Otherwise all half-plane offsets are raised by the minimax
    violation and the relaxed problem is solved exactly; the box is hard.
    """
    ux, uy = problem.nominal
    cbf = _cbf_rows(problem)
    box = _box_rows(problem.u_max)
    zx, zy, active, feasible, _ = _solve_rows(ux, uy, cbf + box, problem.u_max)
    if feasible:
        return QpSolution(control=(zx, zy), status="optimal", active_set=active, slack=0.0)
    slack = _minimax_slack(cbf, problem.u_max)
    # The relaxed system is feasible by construction; the tiny bumps only
    # guard against the vertex-enumeration tolerance itself.
    for bump in (0.0, 1e-12, 1e-9, 1e-6):
        shifted = [(a + slack + bump, bx, by) for a, bx, by in cbf] + box
        zx, zy, active, feasible, _ = _solve_rows(ux, uy, shifted, problem.u_max)
        if feasible:
            return QpSolution(control=(zx, zy), status="relaxed", active_set=active, slack=slack)
    return QpSolution(
        control=(_clamp(ux, problem.u_max), _clamp(uy, problem.u_max)),
        status="relaxed",
        active_set=(),
        slack=slack,
    )


# --- brute-force lattice oracle ------------------------------------------------

def _lattice(u_max: float, grid: int) -> np.ndarray:
    return np.linspace(-u_max, u_max, grid)


def _oracle_feasible(problem: QpProblem, grid: int) -> tuple[Vec2 | None, float]:
    """Best feasible lattice point and its objective, or (None, inf).

    Column-interval evaluation: for each lattice x the feasible y's form an
    interval per half-plane, so the candidate nearest the nominal y is found
    directly instead of scanning the full lattice.  The winner is re-verified
    against every constraint; on the (numerically marginal) chance the
    verification fails, the full scan decides.
    """
    u = problem.u_max
    ux, uy = problem.nominal
    cbf = _cbf_rows(problem)
    xs = _lattice(u, grid)
    h = 2.0 * u / (grid - 1)
    lo = np.full(grid, -u)
    hi = np.full(grid, u)
    ok = np.ones(grid, dtype=bool)
    for a, bx, by in cbf:
        t = a + bx * xs
        if by > 0.0:
            lo = np.maximum(lo, -t / by)
        elif by < 0.0:
            hi = np.minimum(hi, -t / by)
        else:
            ok &= t >= 0.0
    ok &= lo <= hi
    # Bound the float intervals before index conversion (a steep constraint can
    # push them to +-huge and overflow the cast), and keep untouched bounds at
    # the exact lattice ends rather than round-tripping them through h.
    lim = u + 2.0 * h
    klo = np.where(
        lo <= -u,
        0,
        np.ceil((np.clip(lo, -lim, lim) + u) / h).astype(np.int64),
    )
    khi = np.where(
        hi >= u,
        grid - 1,
        np.floor((np.clip(hi, -lim, lim) + u) / h).astype(np.int64),
    )
    ok &= klo <= khi
    np.clip(klo, 0, grid - 1, out=klo)
    np.clip(khi, 0, grid - 1, out=khi)
    if not ok.any():
        return None, math.inf
    # Nearest feasible lattice y to the nominal, per column; ties to lower y.
    q = math.floor((uy + u) / h)
    ka = np.clip(q, klo, khi)
    kb = np.clip(q + 1, klo, khi)
    ya = xs[ka]
    yb = xs[kb]
    pick_b = np.abs(yb - uy) < np.abs(ya - uy)
    kbest = np.where(pick_b, kb, ka)
    ybest = xs[kbest]
    obj = (xs - ux) ** 2 + (ybest - uy) ** 2
    obj[~ok] = math.inf
    col = int(np.argmin(obj))
    z = (float(xs[col]), float(ybest[col]))
    if math.isinf(obj[col]):
        return None, math.inf
    for a, bx, by in cbf:
        if a + bx * z[0] + by * z[1] < 0.0:
            return _oracle_scan(problem, grid)
    return z, 0.5 * float(obj[col])


def _oracle_scan(problem: QpProblem, grid: int) -> tuple[Vec2 | None, float]:
    """Definitional full-lattice scan (x-major, first minimum wins)."""
    u = problem.u_max
    ux, uy = problem.nominal
    cbf = _cbf_rows(problem)
    xs = _lattice(u, grid)
    best = None
    best_obj = math.inf
    for x in xs:
        for y in xs:
            feas = True
            for a, bx, by in cbf:
                if a + bx * x + by * y < 0.0:
                    feas = False
                    break
            if not feas:
                continue
            o = (x - ux) ** 2 + (y - uy) ** 2
            if o < best_obj:
                best_obj = o
                best = (float(x), float(y))
    if best is None:
        return None, math.inf
    return best, 0.5 * best_obj


def _violation_at(
    cbf: list[tuple[float, float, float]], xs: np.ndarray, ys: np.ndarray
) -> np.ndarray:
    """Worst half-plane violation at points (xs[i], ys[i]), elementwise."""
    v = np.zeros_like(xs)
    for a, bx, by in cbf:
        np.maximum(v, -(a + bx * xs + by * ys), out=v)
    return v


def _oracle_relaxed(problem: QpProblem, grid: int) -> tuple[Vec2, float]:
    """Lattice minimax point: smallest worst violation, then nearest to nominal.

    Per column the violation is convex in y, so the column minimizer is found
    by binary search on the first non-decreasing difference, and the sublevel
    set at the winning violation is an index interval found the same way.
    """
    u = problem.u_max
    ux, uy = problem.nominal
    cbf = _cbf_rows(problem)
    xs = _lattice(u, grid)
    h = 2.0 * u / (grid - 1)
    cols = np.arange(grid)

    def viol(k: np.ndarray) -> np.ndarray:
        return _violation_at(cbf, xs, xs[k])

    # Leftmost column minimizer: first k with V(k+1) >= V(k).
    lo = np.zeros(grid, dtype=np.int64)
    hi = np.full(grid, grid - 1, dtype=np.int64)
    while (lo < hi).any():
        mid = (lo + hi) // 2
        up = viol(np.minimum(mid + 1, grid - 1)) >= viol(mid)
        hi = np.where(up & (lo < hi), mid, hi)
        lo = np.where(~up & (lo < hi), mid + 1, lo)
    kmin = lo
    vmin = viol(kmin)
    vstar = float(vmin.min())
    thr = vstar + 1e-12
    # Columns that reach the winning violation; find their sublevel interval.
    reach = vmin <= thr
    left = np.zeros(grid, dtype=np.int64)
    right = np.full(grid, grid - 1, dtype=np.int64)
    llo, lhi = np.zeros(grid, dtype=np.int64), kmin.copy()
    while (llo < lhi).any():
        mid = (llo + lhi) // 2
        inside = viol(mid) <= thr
        lhi = np.where(inside & (llo < lhi), mid, lhi)
        llo = np.where(~inside & (llo < lhi), mid + 1, llo)
    left = llo
    rlo, rhi = kmin.copy(), np.full(grid, grid - 1, dtype=np.int64)
    while (rlo < rhi).any():
        mid = (rlo + rhi + 1) // 2
        inside = viol(mid) <= thr
        rlo = np.where(inside & (rlo < rhi), mid, rlo)
        rhi = np.where(~inside & (rlo < rhi), mid - 1, rhi)
    right = rlo
    q = math.floor((uy + u) / h)
    ka = np.clip(q, left, right)
    kb = np.clip(q + 1, left, right)
    pick_b = np.abs(xs[kb] - uy) < np.abs(xs[ka] - uy)
    kbest = np.where(pick_b, kb, ka)
    obj = (xs - ux) ** 2 + (xs[kbest] - uy) ** 2
    obj[~reach] = math.inf
    col = int(np.argmin(obj))
    return (float(xs[col]), float(xs[kbest[col]])), vstar


def oracle_solve(problem: QpProblem, grid: int = 2000) -> Vec2:
    """Brute-force reference: best point of a grid x grid lattice on the box.

    Used only to cross-check :func:`solve` in tests.  When no lattice point
    satisfies every half-plane, returns the lattice minimax point (smallest
    worst violation, nearest to nominal among those) — the lattice analogue
    of :func:`solve_relaxed`.
    """
    if grid < 100:
        raise ValueError(f"oracle grid must be >= 100, got {grid}")
    z, _ = _oracle_feasible(problem, grid)
    if z is not None:
        return z
    z, _ = _oracle_relaxed(problem, grid)
    return z


def _oracle_info(problem: QpProblem, grid: int = 2000) -> tuple[Vec2, bool, float, float]:
    """(point, lattice_feasible, objective, slack) — test-facing detail."""
    z, obj = _oracle_feasible(problem, grid)
    if z is not None:
        return z, True, obj, 0.0
    z, slack = _oracle_relaxed(problem, grid)
    ux, uy = problem.nominal
    obj = 0.5 * ((z[0] - ux) ** 2 + (z[1] - uy) ** 2)
    return z, False, obj, slack
