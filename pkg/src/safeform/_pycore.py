"""Pure-Python simulation kernels; the reference backend.

``safeform._core`` is a transliteration of this module into Cython.  The two
must stay operation-for-operation identical — same expressions, same
evaluation and accumulation order, same libm functions — so that trajectories
agree bit-for-bit across backends.  Edit both together or not at all.
"""

from __future__ import annotations

import math

import numpy as np

from . import qp
from .kernels import (
    F_NEEDS_RELAX,
    F_OBSTACLE_HIT,
    F_RANGE,
    S_EF,
    S_ESTERR,
    S_FLOW,
    S_MIN_HEXT,
    S_MIN_HINT,
    S_MIN_PAIR,
    S_POT,
    STATUS_OPTIMAL,
    STATUS_RELAXED,
)

_BTOL = 1e-9  # geometry.BOUNDARY_TOL, inlined to mirror the compiled kernel


def _contains_pt(kind: int, circ, verts, px: float, py: float) -> bool:
    """Region membership on lowered region data; mirrors geometry.contains."""
    if kind == 0:
        dx = px - circ[0]
        dy = py - circ[1]
        return math.sqrt(dx * dx + dy * dy) <= circ[2] + _BTOL
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        if i + 1 < n:
            bx, by = verts[i + 1]
        else:
            bx, by = verts[0]
        ex = bx - ax
        ey = by - ay
        cross = ex * (py - ay) - ey * (px - ax)
        if cross < -_BTOL * math.sqrt(ex * ex + ey * ey):
            return False
    return True


def _closest_pt(kind: int, circ, verts, px: float, py: float) -> tuple[float, float]:
    """Closest boundary point for exterior points; mirrors geometry._exterior_closest."""
    if kind == 0:
        cx = circ[0]
        cy = circ[1]
        dx = px - cx
        dy = py - cy
        d = math.sqrt(dx * dx + dy * dy)
        scale = circ[2] / d
        return (cx + dx * scale, cy + dy * scale)
    n = len(verts)
    best_d2 = math.inf
    bqx, bqy = verts[0]
    for i in range(n):
        ax, ay = verts[i]
        if i + 1 < n:
            bx, by = verts[i + 1]
        else:
            bx, by = verts[0]
        ex = bx - ax
        ey = by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            qx, qy = ax, ay
        elif t > 1.0:
            qx, qy = bx, by
        else:
            qx = ax + t * ex
            qy = ay + t * ey
        ddx = px - qx
        ddy = py - qy
        d2 = ddx * ddx + ddy * ddy
        if d2 < best_d2:
            best_d2 = d2
            bqx, bqy = qx, qy
    return (bqx, bqy)


def compute_controls(
    kd,
    pos,
    vel,
    phi,
    gamma,
    adj,
    vdx: float,
    vdy: float,
    vddx: float,
    vddy: float,
    out_u,
    out_unom,
    out_status,
    out_slack,
    out_nomfeas,
    out_inreg,
    out_scalars,
) -> int:
    """One control evaluation for every agent from a common state snapshot.

    Fills the ``out_*`` arrays and the step metrics; returns the flag bits
    (needs-relaxation / obstacle hit / sensing-range overrun).  Agents whose
    constraint set is empty get status ``STATUS_RELAXED`` and a clamped
    nominal control as a placeholder; the driver re-solves them.
    """
    n = kd.n
    radius = kd.radius
    mu = kd.mu
    c1 = kd.c1
    c2 = kd.c2
    c3 = kd.c3
    c4 = kd.c4
    c5 = kd.c5
    eta = kd.eta
    k0 = kd.k0
    k1 = kd.k1
    din = kd.delta_in
    dex = kd.delta_ex
    umax = kd.u_max
    trk = kd.include_tracking
    P = pos.tolist()
    V = vel.tolist()
    PH = phi.tolist()
    G = gamma.tolist()
    A = adj.tolist()
    D = kd.ddisp.tolist()
    LD = kd.leader.tolist()
    TC = kd.tgt_circ.tolist()
    TVs = kd.tgt_verts.tolist()
    OK_ = kd.obs_kind.tolist()
    OC = kd.obs_circ.tolist()
    VO = kd.obs_voff.tolist()
    OV = kd.obs_verts.tolist()
    r2 = radius * radius
    flags = 0

    min_pair2 = math.inf
    ef = 0.0
    for i in range(n):
        pix, piy = P[i]
        for j in range(n):
            if j == i:
                continue
            dx = pix - P[j][0]
            dy = piy - P[j][1]
            ex = dx - D[i][j][0]
            ey = dy - D[i][j][1]
            ef += ex * ex + ey * ey
            if j > i:
                d2 = dx * dx + dy * dy
                if d2 < min_pair2:
                    min_pair2 = d2

    pot = 0.0
    flow = 0.0
    esterr = 0.0
    min_hext = math.inf
    for i in range(n):
        pix, piy = P[i]
        vix, viy = V[i]
        inr = _contains_pt(kd.tgt_kind, TC, TVs, pix, piy)
        out_inreg[i] = 1 if inr else 0
        s1x = s1y = 0.0
        s2x = s2y = 0.0
        rows: list[tuple[float, float, float]] = []
        for j in range(n):
            if j == i or A[i][j] == 0:
                continue
            dx = pix - P[j][0]
            dy = piy - P[j][1]
            d2 = dx * dx + dy * dy
            if d2 >= r2:
                flags |= F_RANGE
                continue
            ex = dx - D[i][j][0]
            ey = dy - D[i][j][1]
            l1 = r2 - d2 + mu
            l2 = ex * ex + ey * ey
            denom = l1 * l1
            gx = (2.0 * l1 * ex + 2.0 * l2 * dx) / denom
            gy = (2.0 * l1 * ey + 2.0 * l2 * dy) / denom
            s1x += gx
            s1y += gy
            pot += 0.5 * (l2 / l1)
            flow += vix * gx + viy * gy
            phx, phy = PH[i][j]
            vhx = -eta * (phx - dx)
            vhy = -eta * (phy - dy)
            s2x += vhx
            s2y += vhy
            # Estimator deviation in the max norm: the per-axis bound
            # 2 u_max / eta is exact under the per-axis saturation.
            emx = abs(vhx - (vix - V[j][0]))
            emy = abs(vhy - (viy - V[j][1]))
            em = emx if emx > emy else emy
            if em > esterr:
                esterr = em
            dist = math.sqrt(d2)
            e = 2.0 * umax / eta
            rel = math.sqrt(vhx * vhx + vhy * vhy) - e
            if rel < 0.0:
                rel = 0.0
            at = (
                2.0 * rel * rel
                + 2.0 * k1 * (dx * vhx + dy * vhy)
                - 4.0 * k1 * dist * umax / eta
                + k0 * (d2 - din * din)
            )
            rows.append((0.5 * at, 2.0 * dx, 2.0 * dy))
        for k in range(kd.n_obs):
            okind = OK_[k]
            circ = OC[k]
            verts = OV[VO[k]:VO[k + 1]]
            if _contains_pt(okind, circ, verts, pix, piy):
                flags |= F_OBSTACLE_HIT
                continue
            sx, sy = _closest_pt(okind, circ, verts, pix, piy)
            dx = pix - sx
            dy = piy - sy
            d2o = dx * dx + dy * dy
            if math.sqrt(d2o) < radius:
                h = d2o - dex * dex
                if h < min_hext:
                    min_hext = h
                a = (
                    2.0 * (vix * vix + viy * viy)
                    + 2.0 * k1 * (dx * vix + dy * viy)
                    + k0 * (d2o - dex * dex)
                )
                rows.append((a, 2.0 * dx, 2.0 * dy))

        u1x = -s1x
        u1y = -s1y
        u2x = -s2x
        u2y = -s2y
        u3x = u3y = 0.0
        if LD[i] and not inr:
            qx, qy = _closest_pt(kd.tgt_kind, TC, TVs, pix, piy)
            ddx = pix - qx
            ddy = piy - qy
            dd = math.sqrt(ddx * ddx + ddy * ddy)
            u3x = -ddx / dd
            u3y = -ddy / dd
        u4x = u4y = 0.0
        ffx = ffy = 0.0
        if trk:
            if LD[i] and inr:
                u4x = -math.tanh(c5 * (pix - G[i][0]))
                u4y = -math.tanh(c5 * (piy - G[i][1]))
            if inr:
                ffx = vddx
                ffy = vddy
        unx = ffx + c1 * u1x + c2 * u2x + c3 * u3x + c4 * u4x
        uny = ffy + c1 * u1y + c2 * u2y + c3 * u3y + c4 * u4y
        out_unom[i, 0] = unx
        out_unom[i, 1] = uny

        zx, zy, _active, feasible, nom_ok = qp._solve_rows(
            unx, uny, rows + qp._box_rows(umax), umax
        )
        if feasible:
            out_u[i, 0] = zx
            out_u[i, 1] = zy
            out_status[i] = STATUS_OPTIMAL
            out_slack[i] = 0.0
        else:
            flags |= F_NEEDS_RELAX
            out_status[i] = STATUS_RELAXED
            out_u[i, 0] = qp._clamp(unx, umax)
            out_u[i, 1] = qp._clamp(uny, umax)
            out_slack[i] = math.nan
        out_nomfeas[i] = 1 if nom_ok else 0

    out_scalars[S_MIN_PAIR] = math.sqrt(min_pair2)
    out_scalars[S_MIN_HEXT] = min_hext
    out_scalars[S_MIN_HINT] = min_pair2 - din * din
    out_scalars[S_EF] = ef
    out_scalars[S_POT] = pot
    out_scalars[S_FLOW] = flow
    out_scalars[S_ESTERR] = esterr
    return flags


def integrate(
    kd,
    pos,
    vel,
    phi,
    gamma,
    u,
    vd0x: float,
    vd0y: float,
    vdhx: float,
    vdhy: float,
    vd1x: float,
    vd1y: float,
    dt: float,
    ws,
) -> None:
    """One classical RK4 step of (p, v, phi, gamma) with the control held.

    Stage rates: dp = v, dv = u, dphi = -eta (phi - (p_i - p_j)) on live
    edges (zero elsewhere), dgamma = c5 (p - gamma) + v_d at the stage time.
    """
    eta = kd.eta
    c5 = kd.c5
    hh = dt * 0.5
    s6 = dt / 6.0
    tp, tv, tg, tphi = ws.tp, ws.tv, ws.tg, ws.tphi
    kp, kv, kg, kphi = ws.kp, ws.kv, ws.kg, ws.kphi
    ap, av, ag, aphi = ws.ap, ws.av, ws.ag, ws.aphi
    dpos = ws.dpos
    am = ws.amask

    def derivs(P, Vl, PH, G, sx, sy):
        np.copyto(kp, Vl)
        np.copyto(kv, u)
        np.subtract(P[:, None, :], P[None, :, :], out=dpos)
        np.subtract(PH, dpos, out=kphi)
        np.multiply(kphi, -eta, out=kphi)
        np.multiply(kphi, am, out=kphi)
        np.subtract(P, G, out=kg)
        np.multiply(kg, c5, out=kg)
        kg[:, 0] += sx
        kg[:, 1] += sy

    def shift(t, base, scale, k):
        # t = base + scale * k
        np.multiply(k, scale, out=t)
        t += base

    def accumulate(acc, k, scale, scratch):
        # acc += scale * k, using scratch for the product
        np.multiply(k, scale, out=scratch)
        acc += scratch

    derivs(pos, vel, phi, gamma, vd0x, vd0y)
    np.copyto(ap, kp)
    np.copyto(av, kv)
    np.copyto(aphi, kphi)
    np.copyto(ag, kg)
    shift(tp, pos, hh, kp)
    shift(tv, vel, hh, kv)
    shift(tphi, phi, hh, kphi)
    shift(tg, gamma, hh, kg)

    derivs(tp, tv, tphi, tg, vdhx, vdhy)
    accumulate(ap, kp, 2.0, tp)
    accumulate(av, kv, 2.0, tv)
    accumulate(aphi, kphi, 2.0, tphi)
    accumulate(ag, kg, 2.0, tg)
    shift(tp, pos, hh, kp)
    shift(tv, vel, hh, kv)
    shift(tphi, phi, hh, kphi)
    shift(tg, gamma, hh, kg)

    derivs(tp, tv, tphi, tg, vdhx, vdhy)
    accumulate(ap, kp, 2.0, tp)
    accumulate(av, kv, 2.0, tv)
    accumulate(aphi, kphi, 2.0, tphi)
    accumulate(ag, kg, 2.0, tg)
    shift(tp, pos, dt, kp)
    shift(tv, vel, dt, kv)
    shift(tphi, phi, dt, kphi)
    shift(tg, gamma, dt, kg)

    derivs(tp, tv, tphi, tg, vd1x, vd1y)
    accumulate(ap, kp, 1.0, tp)
    accumulate(av, kv, 1.0, tv)
    accumulate(aphi, kphi, 1.0, tphi)
    accumulate(ag, kg, 1.0, tg)

    accumulate(pos, ap, s6, tp)
    accumulate(vel, av, s6, tv)
    accumulate(phi, aphi, s6, tphi)
    accumulate(gamma, ag, s6, tg)
