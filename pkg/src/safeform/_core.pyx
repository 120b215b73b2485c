# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels; a transliteration of ``safeform._pycore``.

The two backends must stay operation-for-operation identical — same
expressions, same evaluation and accumulation order, same libm calls — so
that trajectories agree bit-for-bit.  Edit both together or not at all.
(The build uses -ffp-contract=off to keep multiplies and adds unfused.)
"""

from libc.math cimport INFINITY, NAN, fabs, sqrt, tanh

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

# The C loops use literal flag/status/index values; pin them to the Python-side
# definitions at import time.
assert (F_NEEDS_RELAX, F_OBSTACLE_HIT, F_RANGE) == (1, 2, 4)
assert (STATUS_OPTIMAL, STATUS_RELAXED) == (0, 1)
assert (S_MIN_PAIR, S_MIN_HEXT, S_MIN_HINT, S_EF, S_POT, S_FLOW, S_ESTERR) == (
    0, 1, 2, 3, 4, 5, 6,
)

cdef bint _contains_pt(int kind, const double* circ, const double* verts,
                       int nverts, double px, double py) noexcept nogil:
    cdef double dx, dy, ax, ay, bx, by, ex, ey, cross
    cdef int i
    if kind == 0:
        dx = px - circ[0]
        dy = py - circ[1]
        return sqrt(dx * dx + dy * dy) <= circ[2] + 1e-9
    for i in range(nverts):
        ax = verts[2 * i]
        ay = verts[2 * i + 1]
        if i + 1 < nverts:
            bx = verts[2 * (i + 1)]
            by = verts[2 * (i + 1) + 1]
        else:
            bx = verts[0]
            by = verts[1]
        ex = bx - ax
        ey = by - ay
        cross = ex * (py - ay) - ey * (px - ax)
        if cross < -1e-9 * sqrt(ex * ex + ey * ey):
            return 0
    return 1


cdef void _closest_pt(int kind, const double* circ, const double* verts,
                      int nverts, double px, double py,
                      double* outx, double* outy) noexcept nogil:
    cdef double cx, cy, dx, dy, d, scale
    cdef double ax, ay, bx, by, ex, ey, t, qx, qy, ddx, ddy, d2
    cdef double best_d2, bqx, bqy
    cdef int i
    if kind == 0:
        cx = circ[0]
        cy = circ[1]
        dx = px - cx
        dy = py - cy
        d = sqrt(dx * dx + dy * dy)
        scale = circ[2] / d
        outx[0] = cx + dx * scale
        outy[0] = cy + dy * scale
        return
    best_d2 = INFINITY
    bqx = verts[0]
    bqy = verts[1]
    for i in range(nverts):
        ax = verts[2 * i]
        ay = verts[2 * i + 1]
        if i + 1 < nverts:
            bx = verts[2 * (i + 1)]
            by = verts[2 * (i + 1) + 1]
        else:
            bx = verts[0]
            by = verts[1]
        ex = bx - ax
        ey = by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            qx = ax
            qy = ay
        elif t > 1.0:
            qx = bx
            qy = by
        else:
            qx = ax + t * ex
            qy = ay + t * ey
        ddx = px - qx
        ddy = py - qy
        d2 = ddx * ddx + ddy * ddy
        if d2 < best_d2:
            best_d2 = d2
            bqx = qx
            bqy = qy
    outx[0] = bqx
    outy[0] = bqy


cdef inline double _clampd(double v, double umax) noexcept nogil:
    if v > umax:
        return umax
    if v < -umax:
        return -umax
    return v


cdef inline bint _rows_ok(const double* ra, const double* rbx, const double* rby,
                          int m, double zx, double zy) noexcept nogil:
    cdef int r
    for r in range(m):
        if ra[r] + rbx[r] * zx + rby[r] * zy < -1e-9:
            return 0
    return 1


cdef bint _solve_rows_c(double ux, double uy, const double* ra, const double* rbx,
                        const double* rby, int m, double umax,
                        double* ozx, double* ozy, bint* onom) noexcept nogil:
    """Mirror of qp._solve_rows (without the active-set output)."""
    cdef double best_obj = INFINITY
    cdef double bzx = 0.0, bzy = 0.0
    cdef bint has_best = 0
    cdef double primal_obj = INFINITY
    cdef double pzx = 0.0, pzy = 0.0
    cdef bint has_primal = 0
    cdef bint nominal_ok = 0
    cdef int k, l
    cdef double a, bx, by, bb, lam
    cdef double ak, bkx, bky, al, blx, bly, det
    cdef double zx, zy, wx, wy, lam1, lam2, obj
    cdef bint dual_ok

    # empty active set
    zx = ux
    zy = uy
    if _rows_ok(ra, rbx, rby, m, zx, zy):
        nominal_ok = 1
        wx = zx - ux
        wy = zy - uy
        obj = 0.5 * (wx * wx + wy * wy)
        if obj < primal_obj:
            primal_obj = obj
            pzx = zx
            pzy = zy
            has_primal = 1
        if obj < best_obj:
            best_obj = obj
            bzx = zx
            bzy = zy
            has_best = 1
    # single active rows
    for k in range(m):
        a = ra[k]
        bx = rbx[k]
        by = rby[k]
        bb = bx * bx + by * by
        if bb < 1e-12:
            continue
        lam = -(a + bx * ux + by * uy) / bb
        zx = ux + lam * bx
        zy = uy + lam * by
        dual_ok = lam >= -1e-9
        if _rows_ok(ra, rbx, rby, m, zx, zy):
            wx = zx - ux
            wy = zy - uy
            obj = 0.5 * (wx * wx + wy * wy)
            if obj < primal_obj:
                primal_obj = obj
                pzx = zx
                pzy = zy
                has_primal = 1
            if dual_ok and obj < best_obj:
                best_obj = obj
                bzx = zx
                bzy = zy
                has_best = 1
    # pairs of active rows
    for k in range(m):
        ak = ra[k]
        bkx = rbx[k]
        bky = rby[k]
        for l in range(k + 1, m):
            al = ra[l]
            blx = rbx[l]
            bly = rby[l]
            det = bkx * bly - bky * blx
            if det < 1e-12 and det > -1e-12:
                continue
            zx = (al * bky - ak * bly) / det
            zy = (ak * blx - al * bkx) / det
            wx = zx - ux
            wy = zy - uy
            lam1 = (wx * bly - blx * wy) / det
            lam2 = (bkx * wy - wx * bky) / det
            dual_ok = lam1 >= -1e-9 and lam2 >= -1e-9
            if _rows_ok(ra, rbx, rby, m, zx, zy):
                obj = 0.5 * (wx * wx + wy * wy)
                if obj < primal_obj:
                    primal_obj = obj
                    pzx = zx
                    pzy = zy
                    has_primal = 1
                if dual_ok and obj < best_obj:
                    best_obj = obj
                    bzx = zx
                    bzy = zy
                    has_best = 1

    if has_best:
        ozx[0] = _clampd(bzx, umax)
        ozy[0] = _clampd(bzy, umax)
        onom[0] = nominal_ok
        return 1
    if has_primal:
        ozx[0] = _clampd(pzx, umax)
        ozy[0] = _clampd(pzy, umax)
        onom[0] = nominal_ok
        return 1
    ozx[0] = ux
    ozy[0] = uy
    onom[0] = 0
    return 0


def compute_controls(kd,
                     double[:, ::1] pos, double[:, ::1] vel,
                     double[:, :, ::1] phi, double[:, ::1] gamma,
                     unsigned char[:, ::1] adj,
                     double vdx, double vdy, double vddx, double vddy,
                     double[:, ::1] out_u, double[:, ::1] out_unom,
                     unsigned char[::1] out_status, double[::1] out_slack,
                     unsigned char[::1] out_nomfeas, unsigned char[::1] out_inreg,
                     double[::1] out_scalars):
    """See ``safeform._pycore.compute_controls``; identical contract."""
    cdef int n = kd.n
    cdef double radius = kd.radius
    cdef double mu = kd.mu
    cdef double c1 = kd.c1
    cdef double c2 = kd.c2
    cdef double c3 = kd.c3
    cdef double c4 = kd.c4
    cdef double c5 = kd.c5
    cdef double eta = kd.eta
    cdef double k0 = kd.k0
    cdef double k1 = kd.k1
    cdef double din = kd.delta_in
    cdef double dex = kd.delta_ex
    cdef double umax = kd.u_max
    cdef bint trk = kd.include_tracking
    cdef unsigned char[::1] leader = kd.leader
    cdef double[:, :, ::1] ddisp = kd.ddisp
    cdef int tgt_kind = kd.tgt_kind
    cdef double[::1] tgt_circ = kd.tgt_circ
    cdef double[:, ::1] tgt_verts = kd.tgt_verts
    cdef int n_obs = kd.n_obs
    cdef long[::1] obs_kind = kd.obs_kind
    cdef double[:, ::1] obs_circ = kd.obs_circ
    cdef long[::1] obs_voff = kd.obs_voff
    cdef double[:, ::1] obs_verts = kd.obs_verts

    cdef const double* tcp = &tgt_circ[0]
    cdef const double* tvp = &tgt_verts[0, 0]
    cdef int tnv = tgt_verts.shape[0]
    cdef const double* ovp = &obs_verts[0, 0]

    cdef double r2 = radius * radius
    cdef int flags = 0
    cdef int i, j, k, mr
    cdef double pix, piy, vix, viy
    cdef double dx, dy, d2, ex, ey, l1, l2, denom, gx, gy
    cdef double phx, phy, vhx, vhy, emx, emy, em
    cdef double dist, e, rel, at
    cdef double sx, sy, d2o, h, a
    cdef double s1x, s1y, s2x, s2y
    cdef double u1x, u1y, u2x, u2y, u3x, u3y, u4x, u4y, ffx, ffy
    cdef double qx, qy, ddx2, ddy2, dd
    cdef double unx, uny, zx, zy
    cdef bint inr, feasible, nom_ok
    cdef double ra[64]
    cdef double rbx[64]
    cdef double rby[64]
    cdef const double* ocp
    cdef const double* ovk
    cdef int onv, okind

    cdef double min_pair2 = INFINITY
    cdef double ef = 0.0
    for i in range(n):
        pix = pos[i, 0]
        piy = pos[i, 1]
        for j in range(n):
            if j == i:
                continue
            dx = pix - pos[j, 0]
            dy = piy - pos[j, 1]
            ex = dx - ddisp[i, j, 0]
            ey = dy - ddisp[i, j, 1]
            ef += ex * ex + ey * ey
            if j > i:
                d2 = dx * dx + dy * dy
                if d2 < min_pair2:
                    min_pair2 = d2

    cdef double pot = 0.0
    cdef double flow = 0.0
    cdef double esterr = 0.0
    cdef double min_hext = INFINITY
    for i in range(n):
        pix = pos[i, 0]
        piy = pos[i, 1]
        vix = vel[i, 0]
        viy = vel[i, 1]
        inr = _contains_pt(tgt_kind, tcp, tvp, tnv, pix, piy)
        out_inreg[i] = 1 if inr else 0
        s1x = 0.0
        s1y = 0.0
        s2x = 0.0
        s2y = 0.0
        mr = 0
        for j in range(n):
            if j == i or adj[i, j] == 0:
                continue
            dx = pix - pos[j, 0]
            dy = piy - pos[j, 1]
            d2 = dx * dx + dy * dy
            if d2 >= r2:
                flags |= 4  # F_RANGE
                continue
            ex = dx - ddisp[i, j, 0]
            ey = dy - ddisp[i, j, 1]
            l1 = r2 - d2 + mu
            l2 = ex * ex + ey * ey
            denom = l1 * l1
            gx = (2.0 * l1 * ex + 2.0 * l2 * dx) / denom
            gy = (2.0 * l1 * ey + 2.0 * l2 * dy) / denom
            s1x += gx
            s1y += gy
            pot += 0.5 * (l2 / l1)
            flow += vix * gx + viy * gy
            phx = phi[i, j, 0]
            phy = phi[i, j, 1]
            vhx = -eta * (phx - dx)
            vhy = -eta * (phy - dy)
            s2x += vhx
            s2y += vhy
            # Estimator deviation in the max norm: the per-axis bound
            # 2 u_max / eta is exact under the per-axis saturation.
            emx = fabs(vhx - (vix - vel[j, 0]))
            emy = fabs(vhy - (viy - vel[j, 1]))
            em = emx if emx > emy else emy
            if em > esterr:
                esterr = em
            dist = sqrt(d2)
            e = 2.0 * umax / eta
            rel = sqrt(vhx * vhx + vhy * vhy) - e
            if rel < 0.0:
                rel = 0.0
            at = (2.0 * rel * rel
                  + 2.0 * k1 * (dx * vhx + dy * vhy)
                  - 4.0 * k1 * dist * umax / eta
                  + k0 * (d2 - din * din))
            ra[mr] = 0.5 * at
            rbx[mr] = 2.0 * dx
            rby[mr] = 2.0 * dy
            mr += 1
        for k in range(n_obs):
            okind = <int> obs_kind[k]
            ocp = &obs_circ[k, 0]
            ovk = ovp + 2 * obs_voff[k]
            onv = <int> (obs_voff[k + 1] - obs_voff[k])
            if _contains_pt(okind, ocp, ovk, onv, pix, piy):
                flags |= 2  # F_OBSTACLE_HIT
                continue
            _closest_pt(okind, ocp, ovk, onv, pix, piy, &sx, &sy)
            dx = pix - sx
            dy = piy - sy
            d2o = dx * dx + dy * dy
            if sqrt(d2o) < radius:
                h = d2o - dex * dex
                if h < min_hext:
                    min_hext = h
                a = (2.0 * (vix * vix + viy * viy)
                     + 2.0 * k1 * (dx * vix + dy * viy)
                     + k0 * (d2o - dex * dex))
                ra[mr] = a
                rbx[mr] = 2.0 * dx
                rby[mr] = 2.0 * dy
                mr += 1

        u1x = -s1x
        u1y = -s1y
        u2x = -s2x
        u2y = -s2y
        u3x = 0.0
        u3y = 0.0
        if leader[i] and not inr:
            _closest_pt(tgt_kind, tcp, tvp, tnv, pix, piy, &qx, &qy)
            ddx2 = pix - qx
            ddy2 = piy - qy
            dd = sqrt(ddx2 * ddx2 + ddy2 * ddy2)
            u3x = -ddx2 / dd
            u3y = -ddy2 / dd
        u4x = 0.0
        u4y = 0.0
        ffx = 0.0
        ffy = 0.0
        if trk:
            if leader[i] and inr:
                u4x = -tanh(c5 * (pix - gamma[i, 0]))
                u4y = -tanh(c5 * (piy - gamma[i, 1]))
            if inr:
                ffx = vddx
                ffy = vddy
        unx = ffx + c1 * u1x + c2 * u2x + c3 * u3x + c4 * u4x
        uny = ffy + c1 * u1y + c2 * u2y + c3 * u3y + c4 * u4y
        out_unom[i, 0] = unx
        out_unom[i, 1] = uny

        # box faces, order +x, -x, +y, -y (mirrors qp._box_rows)
        ra[mr] = umax
        rbx[mr] = -1.0
        rby[mr] = 0.0
        ra[mr + 1] = umax
        rbx[mr + 1] = 1.0
        rby[mr + 1] = 0.0
        ra[mr + 2] = umax
        rbx[mr + 2] = 0.0
        rby[mr + 2] = -1.0
        ra[mr + 3] = umax
        rbx[mr + 3] = 0.0
        rby[mr + 3] = 1.0

        feasible = _solve_rows_c(unx, uny, ra, rbx, rby, mr + 4, umax,
                                 &zx, &zy, &nom_ok)
        if feasible:
            out_u[i, 0] = zx
            out_u[i, 1] = zy
            out_status[i] = 0  # STATUS_OPTIMAL
            out_slack[i] = 0.0
        else:
            flags |= 1  # F_NEEDS_RELAX
            out_status[i] = 1  # STATUS_RELAXED
            out_u[i, 0] = _clampd(unx, umax)
            out_u[i, 1] = _clampd(uny, umax)
            out_slack[i] = NAN
        out_nomfeas[i] = 1 if nom_ok else 0

    out_scalars[0] = sqrt(min_pair2)
    out_scalars[1] = min_hext
    out_scalars[2] = min_pair2 - din * din
    out_scalars[3] = ef
    out_scalars[4] = pot
    out_scalars[5] = flow
    out_scalars[6] = esterr
    return flags


cdef void _derivs(int n, double eta, double c5, double sx, double sy,
                  double[:, ::1] P, double[:, ::1] Vl,
                  double[:, :, ::1] PH, double[:, ::1] G, double[:, ::1] u,
                  double[:, ::1] kp, double[:, ::1] kv,
                  double[:, :, ::1] kphi, double[:, ::1] kg,
                  double[:, :, ::1] am) noexcept nogil:
    cdef int i, j
    cdef double dx0, dx1
    for i in range(n):
        kp[i, 0] = Vl[i, 0]
        kp[i, 1] = Vl[i, 1]
        kv[i, 0] = u[i, 0]
        kv[i, 1] = u[i, 1]
        kg[i, 0] = (P[i, 0] - G[i, 0]) * c5 + sx
        kg[i, 1] = (P[i, 1] - G[i, 1]) * c5 + sy
        for j in range(n):
            dx0 = P[i, 0] - P[j, 0]
            dx1 = P[i, 1] - P[j, 1]
            kphi[i, j, 0] = (PH[i, j, 0] - dx0) * (-eta) * am[i, j, 0]
            kphi[i, j, 1] = (PH[i, j, 1] - dx1) * (-eta) * am[i, j, 0]


cdef void _shift2(int n, double[:, ::1] t, double[:, ::1] base, double scale,
                  double[:, ::1] k) noexcept nogil:
    cdef int i
    for i in range(n):
        t[i, 0] = k[i, 0] * scale + base[i, 0]
        t[i, 1] = k[i, 1] * scale + base[i, 1]


cdef void _shift3(int n, double[:, :, ::1] t, double[:, :, ::1] base, double scale,
                  double[:, :, ::1] k) noexcept nogil:
    cdef int i, j
    for i in range(n):
        for j in range(n):
            t[i, j, 0] = k[i, j, 0] * scale + base[i, j, 0]
            t[i, j, 1] = k[i, j, 1] * scale + base[i, j, 1]


cdef void _acc2(int n, double[:, ::1] acc, double[:, ::1] k, double scale) noexcept nogil:
    cdef int i
    for i in range(n):
        acc[i, 0] = acc[i, 0] + k[i, 0] * scale
        acc[i, 1] = acc[i, 1] + k[i, 1] * scale


cdef void _acc3(int n, double[:, :, ::1] acc, double[:, :, ::1] k, double scale) noexcept nogil:
    cdef int i, j
    for i in range(n):
        for j in range(n):
            acc[i, j, 0] = acc[i, j, 0] + k[i, j, 0] * scale
            acc[i, j, 1] = acc[i, j, 1] + k[i, j, 1] * scale


cdef void _copy2(int n, double[:, ::1] dst, double[:, ::1] src) noexcept nogil:
    cdef int i
    for i in range(n):
        dst[i, 0] = src[i, 0]
        dst[i, 1] = src[i, 1]


cdef void _copy3(int n, double[:, :, ::1] dst, double[:, :, ::1] src) noexcept nogil:
    cdef int i, j
    for i in range(n):
        for j in range(n):
            dst[i, j, 0] = src[i, j, 0]
            dst[i, j, 1] = src[i, j, 1]


def integrate(kd,
              double[:, ::1] pos, double[:, ::1] vel,
              double[:, :, ::1] phi, double[:, ::1] gamma,
              double[:, ::1] u,
              double vd0x, double vd0y, double vdhx, double vdhy,
              double vd1x, double vd1y, double dt, ws):
    """See ``safeform._pycore.integrate``; identical contract."""
    cdef int n = kd.n
    cdef double eta = kd.eta
    cdef double c5 = kd.c5
    cdef double hh = dt * 0.5
    cdef double s6 = dt / 6.0
    cdef double[:, ::1] tp = ws.tp
    cdef double[:, ::1] tv = ws.tv
    cdef double[:, ::1] tg = ws.tg
    cdef double[:, :, ::1] tphi = ws.tphi
    cdef double[:, ::1] kp = ws.kp
    cdef double[:, ::1] kv = ws.kv
    cdef double[:, ::1] kg = ws.kg
    cdef double[:, :, ::1] kphi = ws.kphi
    cdef double[:, ::1] ap = ws.ap
    cdef double[:, ::1] av = ws.av
    cdef double[:, ::1] ag = ws.ag
    cdef double[:, :, ::1] aphi = ws.aphi
    cdef double[:, :, ::1] am = ws.amask

    with nogil:
        _derivs(n, eta, c5, vd0x, vd0y, pos, vel, phi, gamma, u, kp, kv, kphi, kg, am)
        _copy2(n, ap, kp)
        _copy2(n, av, kv)
        _copy3(n, aphi, kphi)
        _copy2(n, ag, kg)
        _shift2(n, tp, pos, hh, kp)
        _shift2(n, tv, vel, hh, kv)
        _shift3(n, tphi, phi, hh, kphi)
        _shift2(n, tg, gamma, hh, kg)

        _derivs(n, eta, c5, vdhx, vdhy, tp, tv, tphi, tg, u, kp, kv, kphi, kg, am)
        _acc2(n, ap, kp, 2.0)
        _acc2(n, av, kv, 2.0)
        _acc3(n, aphi, kphi, 2.0)
        _acc2(n, ag, kg, 2.0)
        _shift2(n, tp, pos, hh, kp)
        _shift2(n, tv, vel, hh, kv)
        _shift3(n, tphi, phi, hh, kphi)
        _shift2(n, tg, gamma, hh, kg)

        _derivs(n, eta, c5, vdhx, vdhy, tp, tv, tphi, tg, u, kp, kv, kphi, kg, am)
        _acc2(n, ap, kp, 2.0)
        _acc2(n, av, kv, 2.0)
        _acc3(n, aphi, kphi, 2.0)
        _acc2(n, ag, kg, 2.0)
        _shift2(n, tp, pos, dt, kp)
        _shift2(n, tv, vel, dt, kv)
        _shift3(n, tphi, phi, dt, kphi)
        _shift2(n, tg, gamma, dt, kg)

        _derivs(n, eta, c5, vd1x, vd1y, tp, tv, tphi, tg, u, kp, kv, kphi, kg, am)
        _acc2(n, ap, kp, 1.0)
        _acc2(n, av, kv, 1.0)
        _acc3(n, aphi, kphi, 1.0)
        _acc2(n, ag, kg, 1.0)

        _acc2(n, pos, ap, s6)
        _acc2(n, vel, av, s6)
        _acc3(n, phi, aphi, s6)
        _acc2(n, gamma, ag, s6)
