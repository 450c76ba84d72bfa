"""Pure-Python/numpy implementations of the hot kernels.

These are the reference versions; ``_native.pyx`` mirrors them operation
for operation. Keep the two in step.
"""

import numpy as np


def causal_moving_average(x, window):
    n = x.shape[0]
    out = np.empty(n)
    for t in range(n):
        lo = max(0, t - window + 1)
        s = 0.0
        for k in range(lo, t + 1):
            s += x[k]
        out[t] = s / (t + 1 - lo)
    return out


def median_filter(x, window):
    n = x.shape[0]
    if n == 0 or window == 1:
        return np.array(x, dtype=float)
    half = window // 2
    padded = np.concatenate([np.full(half, x[0]), x, np.full(half, x[-1])])
    windows = np.lib.stride_tricks.sliding_window_view(padded, window)
    return np.sort(windows, axis=1)[:, half].copy()


def _rect_contact(px, pz, rect):
    """Signed distance and outward normal of a point against an (x, z) rectangle."""
    x0, x1, z0, z1 = rect
    cx = min(max(px, x0), x1)
    cz = min(max(pz, z0), z1)
    dx, dz = px - cx, pz - cz
    if dx != 0.0 or dz != 0.0:
        d = (dx * dx + dz * dz) ** 0.5
        return d, dx / d, dz / d
    # inside: leave through the nearest face
    faces = ((px - x0, -1.0, 0.0), (x1 - px, 1.0, 0.0), (pz - z0, 0.0, -1.0), (z1 - pz, 0.0, 1.0))
    best = faces[0]
    for f in faces[1:]:
        if f[0] < best[0]:
            best = f
    return -best[0], best[1], best[2]


def planar_substeps(x, v, parent, attach, length, mass, inertia, direction,
                    cp_body, cp_frac, rects, ground,
                    q_des, kp, kd, limit, w, tau_ff, joint_damping,
                    gravity, k_contact, c_contact, c_tangent, mu,
                    dt, nsub, fixed_base, out_fn, out_pen, out_prim):
    """Advance ``nsub`` semi-implicit Euler steps in place. Returns 1 on divergence."""
    nb = parent.shape[0]
    nj = nb - 1
    nd = 3 + nj
    ncp = cp_body.shape[0]
    nrect = rects.shape[0]
    anc = np.zeros((nb, nb), dtype=bool)  # anc[b, a]: body a's joint moves body b
    for b in range(1, nb):
        a = b
        while a > 0:
            anc[b, a] = True
            a = parent[a]

    for _ in range(nsub):
        phi = np.empty(nb)
        dphi = np.empty(nb)
        u = np.empty((nb, 2))
        P = np.empty((nb, 2))
        Pd = np.empty((nb, 2))
        A = np.empty((nb, 2))
        for b in range(nb):
            if b == 0:
                phi[b] = x[2]
                dphi[b] = v[2]
                P[b] = (x[0], x[1])
                Pd[b] = (v[0], v[1])
                A[b] = (0.0, 0.0)
            else:
                p = parent[b]
                phi[b] = phi[p] + x[2 + b]
                dphi[b] = dphi[p] + v[2 + b]
                r = attach[b] * length[p]
                P[b] = P[p] + r * u[p]
                Pd[b] = Pd[p] + r * dphi[p] * np.array([u[p, 1], -u[p, 0]])
                A[b] = A[p] - r * dphi[p] * dphi[p] * u[p]
            c, s = np.cos(phi[b]), np.sin(phi[b])
            dx, dz = direction[b]
            u[b] = (c * dx + s * dz, -s * dx + c * dz)

        def jacobian(b, pt):
            J = np.zeros((2, nd))
            J[0, 0] = 1.0
            J[1, 1] = 1.0
            r = pt - P[0]
            J[:, 2] = (r[1], -r[0])
            for a in range(1, nb):
                if anc[b, a]:
                    r = pt - P[a]
                    J[:, 2 + a] = (r[1], -r[0])
            return J

        M = np.zeros((nd, nd))
        Q = np.zeros(nd)
        for b in range(nb):
            h = 0.5 * length[b]
            com = P[b] + h * u[b]
            J = jacobian(b, com)
            acc_vp = A[b] - h * dphi[b] * dphi[b] * u[b]
            M += mass[b] * (J.T @ J)
            jw = np.zeros(nd)
            jw[2] = 1.0
            for a in range(1, nb):
                if anc[b, a]:
                    jw[2 + a] = 1.0
            M += inertia[b] * np.outer(jw, jw)
            Q += mass[b] * (J.T @ (np.array([0.0, -gravity]) - acc_vp))

        for i in range(ncp):
            b = cp_body[i]
            r = cp_frac[i] * length[b]
            pt = P[b] + r * u[b]
            vel = Pd[b] + r * dphi[b] * np.array([u[b, 1], -u[b, 0]])
            fn_total = 0.0
            pen_max = 0.0
            prim = -1
            force = np.zeros(2)
            for k in range(nrect + 1):
                if k == 0:
                    d, nx, nz = pt[1] - ground, 0.0, 1.0
                else:
                    d, nx, nz = _rect_contact(pt[0], pt[1], rects[k - 1])
                if d >= 0.0:
                    continue
                depth = -d
                vn = vel[0] * nx + vel[1] * nz
                fn = k_contact * depth - c_contact * vn
                if fn <= 0.0:
                    continue
                tx, tz = nz, -nx
                vt = vel[0] * tx + vel[1] * tz
                ft = -c_tangent * vt
                fmax = mu * fn
                if ft > fmax:
                    ft = fmax
                elif ft < -fmax:
                    ft = -fmax
                force += (fn * nx + ft * tx, fn * nz + ft * tz)
                fn_total += fn
                if depth > pen_max:
                    pen_max = depth
                    prim = k
            out_fn[i] = fn_total
            out_pen[i] = pen_max
            out_prim[i] = prim
            if fn_total > 0.0:
                Q += jacobian(b, pt).T @ force

        qj = x[3:]
        vj = v[3:]
        tau = kp * (q_des - qj) - kd * vj + tau_ff
        tau = np.minimum(np.maximum(tau, -limit), limit) * w
        Q[3:] += tau - joint_damping * vj

        if fixed_base:
            acc = np.zeros(nd)
            acc[3:] = np.linalg.solve(M[3:, 3:], Q[3:])
        else:
            acc = np.linalg.solve(M, Q)
        v += dt * acc
        x += dt * v
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            return 1
    return 0
