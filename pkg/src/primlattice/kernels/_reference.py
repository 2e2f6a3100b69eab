"""Numpy fallback for the rollout kernels.

Mirrors the compiled backend operation for operation: fixed-substep RK4
propagation of one shooting interval per batch row, with optional exact
forward-mode tangents with respect to the interval start state, the
interval's steering acceleration and the total duration T.

Batch rows are independent, so everything is vectorized over the leading
axis.  Joint angles are not guarded here; states that leave the model's
validity region simply produce non-finite numbers that callers reject.
"""

from __future__ import annotations

import numpy as np

CAR_LIKE = 0
TWO_TRAILER = 1

# state components sampled for path constraints, per kind
PC_COMPONENTS = {CAR_LIKE: (3, 4), TWO_TRAILER: (3, 4, 5, 6)}
N_STATES = {CAR_LIKE: 5, TWO_TRAILER: 7}


def _dyn(x, v, us, p, kind):
    """Dynamics for a batch of states x (B, n); us (B,) steering accel."""
    f = np.zeros_like(x)
    if kind == CAR_LIKE:
        f[:, 0] = v * np.cos(x[:, 2])
        f[:, 1] = v * np.sin(x[:, 2])
        f[:, 2] = v * np.tan(x[:, 3]) / p[0]
        f[:, 3] = x[:, 4]
        f[:, 4] = us
        return f
    L1, L2, L3, M1 = p
    c3 = np.cos(x[:, 3])
    s3 = np.sin(x[:, 3])
    c2 = np.cos(x[:, 4])
    s2 = np.sin(x[:, 4])
    t2 = s2 / c2
    ta = np.tan(x[:, 5])
    k = M1 / L1
    g = 1.0 + k * t2 * ta
    cth = np.cos(x[:, 2])
    sth = np.sin(x[:, 2])
    speed = v * c3 * c2 * g
    f[:, 0] = speed * cth
    f[:, 1] = speed * sth
    f[:, 2] = v * s3 * c2 * g / L3
    f[:, 3] = v * c2 * ((t2 - k * ta) / L2 - (s3 / L3) * g)
    f[:, 4] = v * (ta / L1 - s2 / L2 + (k / L2) * c2 * ta)
    f[:, 5] = x[:, 6]
    f[:, 6] = us
    return f


def _jac(x, v, p, kind):
    """State Jacobian of the dynamics for a batch of states, (B, n, n)."""
    b, n = x.shape
    jx = np.zeros((b, n, n))
    if kind == CAR_LIKE:
        jx[:, 0, 2] = -v * np.sin(x[:, 2])
        jx[:, 1, 2] = v * np.cos(x[:, 2])
        jx[:, 2, 3] = v / (np.cos(x[:, 3]) ** 2 * p[0])
        jx[:, 3, 4] = 1.0
        return jx
    L1, L2, L3, M1 = p
    c3 = np.cos(x[:, 3])
    s3 = np.sin(x[:, 3])
    c2 = np.cos(x[:, 4])
    s2 = np.sin(x[:, 4])
    t2 = s2 / c2
    ta = np.tan(x[:, 5])
    sec2a = 1.0 + ta * ta
    k = M1 / L1
    g = 1.0 + k * t2 * ta
    cth = np.cos(x[:, 2])
    sth = np.sin(x[:, 2])
    dc2g = -s2 * g + k * ta / c2   # d(c2*g)/dbeta2
    dga = k * t2 * sec2a           # d(g)/dalpha
    jx[:, 0, 2] = -v * c3 * c2 * g * sth
    jx[:, 0, 3] = -v * s3 * c2 * g * cth
    jx[:, 0, 4] = v * c3 * dc2g * cth
    jx[:, 0, 5] = v * c3 * c2 * dga * cth
    jx[:, 1, 2] = v * c3 * c2 * g * cth
    jx[:, 1, 3] = -v * s3 * c2 * g * sth
    jx[:, 1, 4] = v * c3 * dc2g * sth
    jx[:, 1, 5] = v * c3 * c2 * dga * sth
    jx[:, 2, 3] = v * c3 * c2 * g / L3
    jx[:, 2, 4] = v * s3 * dc2g / L3
    jx[:, 2, 5] = v * s3 * c2 * dga / L3
    jx[:, 3, 3] = -v * (c3 / L3) * c2 * g
    jx[:, 3, 4] = v * ((c2 + s2 * k * ta) / L2 - (s3 / L3) * dc2g)
    jx[:, 3, 5] = -v * k * sec2a * (c2 / L2 + (s3 / L3) * c2 * t2)
    jx[:, 4, 4] = v * (-c2 / L2 - (k / L2) * s2 * ta)
    jx[:, 4, 5] = v * sec2a * (1.0 / L1 + k * c2 / L2)
    jx[:, 5, 6] = 1.0
    return jx


def propagate_intervals(xs, us, v, T, substeps, p, kind, want_tangents):
    """RK4-propagate K shooting intervals of duration T/K each.

    Parameters
    ----------
    xs : (K, n) interval start states
    us : (K,) per-interval steering accelerations
    v : signed longitudinal speed, constant
    T : total duration; each interval integrates T/K in `substeps` RK4 steps
    want_tangents : also return d(end)/d(start, u, T) and the tangent rows of
        the interior substep samples

    Returns
    -------
    (ends, samples, jx, ju, jt, sjx, sju, sjt); tangent entries are None when
    not requested.  `samples` holds the path-constrained state components at
    the substeps strictly inside each interval, shape (K, substeps-1, npc).
    """
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    K, n = xs.shape
    S = int(substeps)
    pc = PC_COMPONENTS[kind]
    npc = len(pc)
    dt = T / (K * S)
    eta = 1.0 / (K * S)   # d(dt)/dT
    ucol, tcol = n, n + 1

    x = xs.copy()
    samples = np.empty((K, S - 1, npc))
    if want_tangents:
        X = np.zeros((K, n, n + 2))
        X[:, np.arange(n), np.arange(n)] = 1.0
        sjx = np.empty((K, S - 1, npc, n))
        sju = np.empty((K, S - 1, npc))
        sjt = np.empty((K, S - 1, npc))
    else:
        X = sjx = sju = sjt = None

    omega_row = n - 1
    with np.errstate(all="ignore"):
        for s in range(S):
            k1 = _dyn(x, v, us, p, kind)
            a2 = x + (0.5 * dt) * k1
            k2 = _dyn(a2, v, us, p, kind)
            a3 = x + (0.5 * dt) * k2
            k3 = _dyn(a3, v, us, p, kind)
            a4 = x + dt * k3
            k4 = _dyn(a4, v, us, p, kind)
            ksum = k1 + 2.0 * k2 + 2.0 * k3 + k4
            if want_tangents:
                j1 = _jac(x, v, p, kind)
                K1 = np.matmul(j1, X)
                K1[:, omega_row, ucol] += 1.0
                A2 = X + (0.5 * dt) * K1
                A2[:, :, tcol] += (0.5 * eta) * k1
                j2 = _jac(a2, v, p, kind)
                K2 = np.matmul(j2, A2)
                K2[:, omega_row, ucol] += 1.0
                A3 = X + (0.5 * dt) * K2
                A3[:, :, tcol] += (0.5 * eta) * k2
                j3 = _jac(a3, v, p, kind)
                K3 = np.matmul(j3, A3)
                K3[:, omega_row, ucol] += 1.0
                A4 = X + dt * K3
                A4[:, :, tcol] += eta * k3
                j4 = _jac(a4, v, p, kind)
                K4 = np.matmul(j4, A4)
                K4[:, omega_row, ucol] += 1.0
                Ksum = K1 + 2.0 * K2 + 2.0 * K3 + K4
                X = X + (dt / 6.0) * Ksum
                X[:, :, tcol] += (eta / 6.0) * ksum
            x = x + (dt / 6.0) * ksum
            if s < S - 1:
                samples[:, s, :] = x[:, pc]
                if want_tangents:
                    sjx[:, s, :, :] = X[:, pc, :n]
                    sju[:, s, :] = X[:, pc, ucol]
                    sjt[:, s, :] = X[:, pc, tcol]

    if want_tangents:
        return (x, samples, X[:, :, :n].copy(), X[:, :, ucol].copy(),
                X[:, :, tcol].copy(), sjx, sju, sjt)
    return x, samples, None, None, None, None, None, None


def rollout(x0, us, v, T, substeps, p, kind):
    """Integrate a whole trajectory; returns the K+1 knot states."""
    x0 = np.asarray(x0, dtype=float)
    us = np.asarray(us, dtype=float)
    K = us.shape[0]
    n = x0.shape[0]
    knots = np.empty((K + 1, n))
    knots[0] = x0
    x = x0[None, :].copy()
    dt = T / (K * substeps)
    with np.errstate(all="ignore"):
        for k in range(K):
            u = us[k:k + 1]
            for _ in range(substeps):
                k1 = _dyn(x, v, u, p, kind)
                k2 = _dyn(x + (0.5 * dt) * k1, v, u, p, kind)
                k3 = _dyn(x + (0.5 * dt) * k2, v, u, p, kind)
                k4 = _dyn(x + dt * k3, v, u, p, kind)
                x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            knots[k + 1] = x[0]
    return knots
