# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rollout kernels.

Same contract as the numpy backend in ``_reference.py``: RK4 propagation of
shooting intervals with optional exact forward-mode tangents.  The inner
loops run on C doubles; states never exceed 7 components and tangent blocks
never exceed 9 columns, so fixed-size stack arrays are used throughout.
"""

import numpy as np

from libc.math cimport cos, sin, tan

DEF NMAX = 7
DEF CMAX = 9

CAR_LIKE = 0
TWO_TRAILER = 1
PC_COMPONENTS = {0: (3, 4), 1: (3, 4, 5, 6)}
N_STATES = {0: 5, 1: 7}


cdef inline void _dyn_c(int kind, double* x, double v, double u,
                        double L1, double L2, double L3, double kk,
                        double* f) noexcept nogil:
    cdef double c3, s3, c2, s2, t2, ta, g, speed
    if kind == 0:
        f[0] = v * cos(x[2])
        f[1] = v * sin(x[2])
        f[2] = v * tan(x[3]) / L1
        f[3] = x[4]
        f[4] = u
    else:
        c3 = cos(x[3]); s3 = sin(x[3])
        c2 = cos(x[4]); s2 = sin(x[4])
        t2 = s2 / c2
        ta = tan(x[5])
        g = 1.0 + kk * t2 * ta
        speed = v * c3 * c2 * g
        f[0] = speed * cos(x[2])
        f[1] = speed * sin(x[2])
        f[2] = v * s3 * c2 * g / L3
        f[3] = v * c2 * ((t2 - kk * ta) / L2 - (s3 / L3) * g)
        f[4] = v * (ta / L1 - s2 / L2 + (kk / L2) * c2 * ta)
        f[5] = x[6]
        f[6] = u


cdef inline void _jac_c(int kind, double* x, double v,
                        double L1, double L2, double L3, double kk,
                        double jx[NMAX][NMAX]) noexcept nogil:
    cdef int i, j
    cdef int n = 5 if kind == 0 else 7
    cdef double c3, s3, c2, s2, t2, ta, sec2a, g, cth, sth, dc2g, dga
    for i in range(n):
        for j in range(n):
            jx[i][j] = 0.0
    if kind == 0:
        jx[0][2] = -v * sin(x[2])
        jx[1][2] = v * cos(x[2])
        c2 = cos(x[3])
        jx[2][3] = v / (c2 * c2 * L1)
        jx[3][4] = 1.0
    else:
        c3 = cos(x[3]); s3 = sin(x[3])
        c2 = cos(x[4]); s2 = sin(x[4])
        t2 = s2 / c2
        ta = tan(x[5])
        sec2a = 1.0 + ta * ta
        g = 1.0 + kk * t2 * ta
        cth = cos(x[2]); sth = sin(x[2])
        dc2g = -s2 * g + kk * ta / c2
        dga = kk * t2 * sec2a
        jx[0][2] = -v * c3 * c2 * g * sth
        jx[0][3] = -v * s3 * c2 * g * cth
        jx[0][4] = v * c3 * dc2g * cth
        jx[0][5] = v * c3 * c2 * dga * cth
        jx[1][2] = v * c3 * c2 * g * cth
        jx[1][3] = -v * s3 * c2 * g * sth
        jx[1][4] = v * c3 * dc2g * sth
        jx[1][5] = v * c3 * c2 * dga * sth
        jx[2][3] = v * c3 * c2 * g / L3
        jx[2][4] = v * s3 * dc2g / L3
        jx[2][5] = v * s3 * c2 * dga / L3
        jx[3][3] = -v * (c3 / L3) * c2 * g
        jx[3][4] = v * ((c2 + s2 * kk * ta) / L2 - (s3 / L3) * dc2g)
        jx[3][5] = -v * kk * sec2a * (c2 / L2 + (s3 / L3) * c2 * t2)
        jx[4][4] = v * (-c2 / L2 - (kk / L2) * s2 * ta)
        jx[4][5] = v * sec2a * (1.0 / L1 + kk * c2 / L2)
        jx[5][6] = 1.0


def propagate_intervals(xs, us, double v, double T, int substeps, p, int kind,
                        bint want_tangents):
    """See ``_reference.propagate_intervals``; identical semantics."""
    cdef double[:, ::1] xs_v = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] us_v = np.ascontiguousarray(us, dtype=np.float64)
    cdef double[::1] p_v = np.ascontiguousarray(p, dtype=np.float64)
    cdef int K = xs_v.shape[0]
    cdef int n = xs_v.shape[1]
    cdef int S = substeps
    cdef double L1 = p_v[0], L2 = p_v[1], L3 = p_v[2]
    cdef double kk = p_v[3] / p_v[0]
    cdef double dt = T / (K * S)
    cdef double eta = 1.0 / (K * S)
    cdef int nc = n + 2
    cdef int ucol = n, tcol = n + 1
    cdef int omega_row = n - 1

    pc = PC_COMPONENTS[kind]
    cdef int npc = len(pc)
    cdef int pc_arr[4]
    cdef int i
    for i in range(npc):
        pc_arr[i] = pc[i]

    ends_np = np.empty((K, n))
    samples_np = np.empty((K, S - 1, npc))
    cdef double[:, ::1] ends = ends_np
    cdef double[:, :, ::1] samples = samples_np

    cdef double[:, :, ::1] jx_out
    cdef double[:, ::1] ju_out, jt_out
    cdef double[:, :, :, ::1] sjx
    cdef double[:, :, ::1] sju, sjt
    if want_tangents:
        jx_np = np.empty((K, n, n))
        ju_np = np.empty((K, n))
        jt_np = np.empty((K, n))
        sjx_np = np.empty((K, S - 1, npc, n))
        sju_np = np.empty((K, S - 1, npc))
        sjt_np = np.empty((K, S - 1, npc))
        jx_out = jx_np
        ju_out = ju_np
        jt_out = jt_np
        sjx = sjx_np
        sju = sju_np
        sjt = sjt_np
    else:
        jx_np = ju_np = jt_np = sjx_np = sju_np = sjt_np = None

    cdef double x[NMAX]
    cdef double a[NMAX]
    cdef double k1[NMAX]
    cdef double k2[NMAX]
    cdef double k3[NMAX]
    cdef double k4[NMAX]
    cdef double ksum[NMAX]
    cdef double X[NMAX][CMAX]
    cdef double A[NMAX][CMAX]
    cdef double K1[NMAX][CMAX]
    cdef double K2[NMAX][CMAX]
    cdef double K3[NMAX][CMAX]
    cdef double K4[NMAX][CMAX]
    cdef double jm[NMAX][NMAX]
    cdef double u, acc
    cdef int k, s, r, c, j

    with nogil:
        for k in range(K):
            u = us_v[k]
            for i in range(n):
                x[i] = xs_v[k, i]
            if want_tangents:
                for i in range(n):
                    for c in range(nc):
                        X[i][c] = 1.0 if c == i else 0.0
            for s in range(S):
                _dyn_c(kind, x, v, u, L1, L2, L3, kk, k1)
                for i in range(n):
                    a[i] = x[i] + 0.5 * dt * k1[i]
                if want_tangents:
                    _jac_c(kind, x, v, L1, L2, L3, kk, jm)
                    for r in range(n):
                        for c in range(nc):
                            acc = 0.0
                            for j in range(n):
                                acc += jm[r][j] * X[j][c]
                            K1[r][c] = acc
                    K1[omega_row][ucol] += 1.0
                    for r in range(n):
                        for c in range(nc):
                            A[r][c] = X[r][c] + 0.5 * dt * K1[r][c]
                        A[r][tcol] += 0.5 * eta * k1[r]
                    _jac_c(kind, a, v, L1, L2, L3, kk, jm)
                _dyn_c(kind, a, v, u, L1, L2, L3, kk, k2)
                if want_tangents:
                    for r in range(n):
                        for c in range(nc):
                            acc = 0.0
                            for j in range(n):
                                acc += jm[r][j] * A[j][c]
                            K2[r][c] = acc
                    K2[omega_row][ucol] += 1.0
                for i in range(n):
                    a[i] = x[i] + 0.5 * dt * k2[i]
                if want_tangents:
                    for r in range(n):
                        for c in range(nc):
                            A[r][c] = X[r][c] + 0.5 * dt * K2[r][c]
                        A[r][tcol] += 0.5 * eta * k2[r]
                    _jac_c(kind, a, v, L1, L2, L3, kk, jm)
                _dyn_c(kind, a, v, u, L1, L2, L3, kk, k3)
                if want_tangents:
                    for r in range(n):
                        for c in range(nc):
                            acc = 0.0
                            for j in range(n):
                                acc += jm[r][j] * A[j][c]
                            K3[r][c] = acc
                    K3[omega_row][ucol] += 1.0
                for i in range(n):
                    a[i] = x[i] + dt * k3[i]
                if want_tangents:
                    for r in range(n):
                        for c in range(nc):
                            A[r][c] = X[r][c] + dt * K3[r][c]
                        A[r][tcol] += eta * k3[r]
                    _jac_c(kind, a, v, L1, L2, L3, kk, jm)
                _dyn_c(kind, a, v, u, L1, L2, L3, kk, k4)
                if want_tangents:
                    for r in range(n):
                        for c in range(nc):
                            acc = 0.0
                            for j in range(n):
                                acc += jm[r][j] * A[j][c]
                            K4[r][c] = acc
                    K4[omega_row][ucol] += 1.0
                for i in range(n):
                    ksum[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]
                    x[i] = x[i] + (dt / 6.0) * ksum[i]
                if want_tangents:
                    for r in range(n):
                        for c in range(nc):
                            X[r][c] = X[r][c] + (dt / 6.0) * (
                                K1[r][c] + 2.0 * K2[r][c] + 2.0 * K3[r][c] + K4[r][c])
                        X[r][tcol] += (eta / 6.0) * ksum[r]
                if s < S - 1:
                    for i in range(npc):
                        samples[k, s, i] = x[pc_arr[i]]
                    if want_tangents:
                        for i in range(npc):
                            for j in range(n):
                                sjx[k, s, i, j] = X[pc_arr[i]][j]
                            sju[k, s, i] = X[pc_arr[i]][ucol]
                            sjt[k, s, i] = X[pc_arr[i]][tcol]
            for i in range(n):
                ends[k, i] = x[i]
            if want_tangents:
                for r in range(n):
                    for c in range(n):
                        jx_out[k, r, c] = X[r][c]
                    ju_out[k, r] = X[r][ucol]
                    jt_out[k, r] = X[r][tcol]

    return (ends_np, samples_np, jx_np, ju_np, jt_np, sjx_np, sju_np, sjt_np)


def rollout(x0, us, double v, double T, int substeps, p, int kind):
    """Integrate a whole trajectory; returns the K+1 knot states."""
    cdef double[::1] x0_v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[::1] us_v = np.ascontiguousarray(us, dtype=np.float64)
    cdef double[::1] p_v = np.ascontiguousarray(p, dtype=np.float64)
    cdef int K = us_v.shape[0]
    cdef int n = x0_v.shape[0]
    cdef double L1 = p_v[0], L2 = p_v[1], L3 = p_v[2]
    cdef double kk = p_v[3] / p_v[0]
    cdef double dt = T / (K * substeps)
    knots_np = np.empty((K + 1, n))
    cdef double[:, ::1] knots = knots_np
    cdef double x[NMAX]
    cdef double a[NMAX]
    cdef double k1[NMAX]
    cdef double k2[NMAX]
    cdef double k3[NMAX]
    cdef double k4[NMAX]
    cdef double u
    cdef int i, k, s
    for i in range(n):
        x[i] = x0_v[i]
        knots[0, i] = x[i]
    with nogil:
        for k in range(K):
            u = us_v[k]
            for s in range(substeps):
                _dyn_c(kind, x, v, u, L1, L2, L3, kk, k1)
                for i in range(n):
                    a[i] = x[i] + 0.5 * dt * k1[i]
                _dyn_c(kind, a, v, u, L1, L2, L3, kk, k2)
                for i in range(n):
                    a[i] = x[i] + 0.5 * dt * k2[i]
                _dyn_c(kind, a, v, u, L1, L2, L3, kk, k3)
                for i in range(n):
                    a[i] = x[i] + dt * k3[i]
                _dyn_c(kind, a, v, u, L1, L2, L3, kk, k4)
                for i in range(n):
                    x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(n):
                knots[k + 1, i] = x[i]
    return knots_np
