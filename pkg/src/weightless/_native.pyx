# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_pykernels``.

Same algorithms and argument lists; results agree with the Python
reference to round-off.
"""

from libc.math cimport sin, cos, sqrt, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memset

import numpy as np
cimport numpy as cnp

cnp.import_array()


def causal_moving_average(const double[::1] x, int window):
    cdef Py_ssize_t n = x.shape[0], t, k, lo
    cdef double s
    out = np.empty(n)
    cdef double[::1] o = out
    for t in range(n):
        lo = t - window + 1
        if lo < 0:
            lo = 0
        s = 0.0
        for k in range(lo, t + 1):
            s += x[k]
        o[t] = s / (t + 1 - lo)
    return out


cdef void _insertion_sort(double* a, int n) noexcept nogil:
    cdef int i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


def median_filter(const double[::1] x, int window):
    cdef Py_ssize_t n = x.shape[0], t, k, idx
    cdef int half = window // 2
    out = np.empty(n)
    cdef double[::1] o = out
    if n == 0:
        return out
    cdef double* buf = <double*> malloc(window * sizeof(double))
    try:
        for t in range(n):
            for k in range(window):
                idx = t - half + k
                if idx < 0:
                    idx = 0
                elif idx > n - 1:
                    idx = n - 1
                buf[k] = x[idx]
            _insertion_sort(buf, window)
            o[t] = buf[half]
    finally:
        free(buf)
    return out


cdef inline void _rect_contact(double px, double pz, double x0, double x1, double z0, double z1,
                               double* d, double* nx, double* nz) noexcept nogil:
    cdef double cx = px, cz = pz, dx, dz, dist, best
    if cx < x0:
        cx = x0
    elif cx > x1:
        cx = x1
    if cz < z0:
        cz = z0
    elif cz > z1:
        cz = z1
    dx = px - cx
    dz = pz - cz
    if dx != 0.0 or dz != 0.0:
        dist = sqrt(dx * dx + dz * dz)
        d[0] = dist
        nx[0] = dx / dist
        nz[0] = dz / dist
        return
    best = px - x0
    nx[0] = -1.0
    nz[0] = 0.0
    if x1 - px < best:
        best = x1 - px
        nx[0] = 1.0
        nz[0] = 0.0
    if pz - z0 < best:
        best = pz - z0
        nx[0] = 0.0
        nz[0] = -1.0
    if z1 - pz < best:
        best = z1 - pz
        nx[0] = 0.0
        nz[0] = 1.0
    d[0] = -best


cdef int _cholesky_solve(double* M, double* b, int n, int off) noexcept nogil:
    """Solve the SPD block ``M[off:, off:] y = b[off:]`` in place (``b`` receives ``y``)."""
    cdef int i, j, k, m = n - off
    cdef double s
    # lower factor overwrites the block
    for j in range(m):
        s = M[(off + j) * n + off + j]
        for k in range(j):
            s -= M[(off + j) * n + off + k] * M[(off + j) * n + off + k]
        if not s > 0.0:
            return 1
        M[(off + j) * n + off + j] = sqrt(s)
        for i in range(j + 1, m):
            s = M[(off + i) * n + off + j]
            for k in range(j):
                s -= M[(off + i) * n + off + k] * M[(off + j) * n + off + k]
            M[(off + i) * n + off + j] = s / M[(off + j) * n + off + j]
    for i in range(m):
        s = b[off + i]
        for k in range(i):
            s -= M[(off + i) * n + off + k] * b[off + k]
        b[off + i] = s / M[(off + i) * n + off + i]
    for i in range(m - 1, -1, -1):
        s = b[off + i]
        for k in range(i + 1, m):
            s -= M[(off + k) * n + off + i] * b[off + k]
        b[off + i] = s / M[(off + i) * n + off + i]
    return 0


cdef void _point_jac(int b, double px, double pz, int nb, int nd, double* P,
                     unsigned char* anc, double* J) noexcept nogil:
    """Fill the 2 x nd Jacobian of a point rigidly attached to body ``b``."""
    cdef int a
    memset(J, 0, 2 * nd * sizeof(double))
    J[0] = 1.0
    J[nd + 1] = 1.0
    J[2] = pz - P[1]
    J[nd + 2] = -(px - P[0])
    for a in range(1, nb):
        if anc[b * nb + a]:
            J[2 + a] = pz - P[2 * a + 1]
            J[nd + 2 + a] = -(px - P[2 * a])


def planar_substeps(double[::1] x, double[::1] v, const int[::1] parent, const double[::1] attach,
                    const double[::1] length, const double[::1] mass, const double[::1] inertia,
                    const double[:, ::1] direction, const int[::1] cp_body, const double[::1] cp_frac,
                    const double[:, ::1] rects, double ground,
                    const double[::1] q_des, const double[::1] kp, const double[::1] kd, const double[::1] limit,
                    const double[::1] w, const double[::1] tau_ff, const double[::1] joint_damping,
                    double gravity, double k_contact, double c_contact, double c_tangent, double mu,
                    double dt, int nsub, bint fixed_base,
                    double[::1] out_fn, double[::1] out_pen, int[::1] out_prim):
    """Advance ``nsub`` semi-implicit Euler steps in place. Returns 1 on divergence."""
    cdef int nb = parent.shape[0]
    cdef int nd = 3 + nb - 1
    cdef int ncp = cp_body.shape[0]
    cdef int nrect = rects.shape[0]
    cdef int step, b, p, a, i, j, k, prim, status = 0
    cdef double c, s, dx, dz, r, h, comx, comz, ax, az, fx, fz, ptx, ptz, vx, vz
    cdef double d, nx, nz, depth, vn, fn, tx, tz, vt, ft, fmax, fn_total, pen_max, tau

    cdef double* phi = <double*> malloc(nb * sizeof(double))
    cdef double* dphi = <double*> malloc(nb * sizeof(double))
    cdef double* U = <double*> malloc(2 * nb * sizeof(double))
    cdef double* P = <double*> malloc(2 * nb * sizeof(double))
    cdef double* Pd = <double*> malloc(2 * nb * sizeof(double))
    cdef double* A = <double*> malloc(2 * nb * sizeof(double))
    cdef double* M = <double*> malloc(nd * nd * sizeof(double))
    cdef double* Q = <double*> malloc(nd * sizeof(double))
    cdef double* J = <double*> malloc(2 * nd * sizeof(double))
    cdef double* jw = <double*> malloc(nd * sizeof(double))
    cdef unsigned char* anc = <unsigned char*> malloc(nb * nb)
    try:
        memset(anc, 0, nb * nb)
        for b in range(1, nb):
            a = b
            while a > 0:
                anc[b * nb + a] = 1
                a = parent[a]

        for step in range(nsub):
            for b in range(nb):
                if b == 0:
                    phi[0] = x[2]
                    dphi[0] = v[2]
                    P[0] = x[0]
                    P[1] = x[1]
                    Pd[0] = v[0]
                    Pd[1] = v[1]
                    A[0] = 0.0
                    A[1] = 0.0
                else:
                    p = parent[b]
                    phi[b] = phi[p] + x[2 + b]
                    dphi[b] = dphi[p] + v[2 + b]
                    r = attach[b] * length[p]
                    P[2 * b] = P[2 * p] + r * U[2 * p]
                    P[2 * b + 1] = P[2 * p + 1] + r * U[2 * p + 1]
                    Pd[2 * b] = Pd[2 * p] + r * dphi[p] * U[2 * p + 1]
                    Pd[2 * b + 1] = Pd[2 * p + 1] + r * dphi[p] * (-U[2 * p])
                    A[2 * b] = A[2 * p] - r * dphi[p] * dphi[p] * U[2 * p]
                    A[2 * b + 1] = A[2 * p + 1] - r * dphi[p] * dphi[p] * U[2 * p + 1]
                c = cos(phi[b])
                s = sin(phi[b])
                dx = direction[b, 0]
                dz = direction[b, 1]
                U[2 * b] = c * dx + s * dz
                U[2 * b + 1] = -s * dx + c * dz

            memset(M, 0, nd * nd * sizeof(double))
            memset(Q, 0, nd * sizeof(double))
            for b in range(nb):
                h = 0.5 * length[b]
                comx = P[2 * b] + h * U[2 * b]
                comz = P[2 * b + 1] + h * U[2 * b + 1]
                _point_jac(b, comx, comz, nb, nd, P, anc, J)
                ax = 0.0 - (A[2 * b] - h * dphi[b] * dphi[b] * U[2 * b])
                az = -gravity - (A[2 * b + 1] - h * dphi[b] * dphi[b] * U[2 * b + 1])
                for i in range(nd):
                    Q[i] += mass[b] * (J[i] * ax + J[nd + i] * az)
                    for j in range(nd):
                        M[i * nd + j] += mass[b] * (J[i] * J[j] + J[nd + i] * J[nd + j])
                memset(jw, 0, nd * sizeof(double))
                jw[2] = 1.0
                for a in range(1, nb):
                    if anc[b * nb + a]:
                        jw[2 + a] = 1.0
                for i in range(nd):
                    for j in range(nd):
                        M[i * nd + j] += inertia[b] * jw[i] * jw[j]

            for i in range(ncp):
                b = cp_body[i]
                r = cp_frac[i] * length[b]
                ptx = P[2 * b] + r * U[2 * b]
                ptz = P[2 * b + 1] + r * U[2 * b + 1]
                vx = Pd[2 * b] + r * dphi[b] * U[2 * b + 1]
                vz = Pd[2 * b + 1] + r * dphi[b] * (-U[2 * b])
                fn_total = 0.0
                pen_max = 0.0
                prim = -1
                fx = 0.0
                fz = 0.0
                for k in range(nrect + 1):
                    if k == 0:
                        d = ptz - ground
                        nx = 0.0
                        nz = 1.0
                    else:
                        _rect_contact(ptx, ptz, rects[k - 1, 0], rects[k - 1, 1],
                                      rects[k - 1, 2], rects[k - 1, 3], &d, &nx, &nz)
                    if d >= 0.0:
                        continue
                    depth = -d
                    vn = vx * nx + vz * nz
                    fn = k_contact * depth - c_contact * vn
                    if fn <= 0.0:
                        continue
                    tx = nz
                    tz = -nx
                    vt = vx * tx + vz * tz
                    ft = -c_tangent * vt
                    fmax = mu * fn
                    if ft > fmax:
                        ft = fmax
                    elif ft < -fmax:
                        ft = -fmax
                    fx += fn * nx + ft * tx
                    fz += fn * nz + ft * tz
                    fn_total += fn
                    if depth > pen_max:
                        pen_max = depth
                        prim = k
                out_fn[i] = fn_total
                out_pen[i] = pen_max
                out_prim[i] = prim
                if fn_total > 0.0:
                    _point_jac(b, ptx, ptz, nb, nd, P, anc, J)
                    for j in range(nd):
                        Q[j] += J[j] * fx + J[nd + j] * fz

            for j in range(nb - 1):
                tau = kp[j] * (q_des[j] - x[3 + j]) - kd[j] * v[3 + j] + tau_ff[j]
                if tau < -limit[j]:
                    tau = -limit[j]
                elif tau > limit[j]:
                    tau = limit[j]
                Q[3 + j] += tau * w[j] - joint_damping[j] * v[3 + j]

            if _cholesky_solve(M, Q, nd, 3 if fixed_base else 0):
                status = 1
                break
            if fixed_base:
                Q[0] = 0.0
                Q[1] = 0.0
                Q[2] = 0.0
            for i in range(nd):
                v[i] += dt * Q[i]
                x[i] += dt * v[i]
            for i in range(nd):
                if not (isfinite(x[i]) and isfinite(v[i])):
                    status = 1
            if status:
                break
    finally:
        free(phi); free(dphi); free(U); free(P); free(Pd); free(A)
        free(M); free(Q); free(J); free(jw); free(anc)
    return status
