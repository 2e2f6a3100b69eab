"""Trajectory optimization by direct multiple shooting with free final time.

The continuous problem (minimize duration plus a weighted smoothness
integral subject to the vehicle dynamics, actuator bounds and a terminal
manifold) is transcribed into a nonlinear program: the decision variables
are the knot states, one steering acceleration per interval, and the
duration T.  Time is normalized so every interval integrates T/K with a
fixed number of RK4 substeps; the rollout kernels supply exact tangents of
the interval maps.

The NLP is solved by an augmented-Lagrangian method with projected, damped
Newton inner iterations on the bound box.  Equality constraints are the
shooting defects and the terminal rows; actuator bounds at the interior
substep samples enter as one-sided inequalities so paths cannot bulge past
the limits between knots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import kernels
from .maneuvers import Direction, OcpSpec, TerminalManifold, fixed_manifold
from .vehicles import (EquilibriumNotFound, VehicleKind, VehicleParams,
                       equilibrium_configuration, max_equilibrium_steering,
                       normalize_angle)

_BIG = 1e20


class DegenerateBvpError(ValueError):
    """Zero-length boundary value request (initial state equals final)."""


@dataclass(frozen=True)
class ObjectiveWeights:
    """Trade-off weights of the stage cost T + lambda * integral(J).

    J is the weighted quadratic of steering angle, steering rate and
    steering acceleration; the joint-angle terms are active only for
    backward motions of the 2-trailer system, where they discourage
    configurations close to jack-knife.
    """

    lam: float = 1.0
    w_alpha: float = 1.0
    w_omega: float = 10.0
    w_ualpha: float = 1.0
    w_beta3: float = 1.0
    w_beta2: float = 1.0

    def __post_init__(self):
        for name in ("lam", "w_alpha", "w_omega", "w_ualpha", "w_beta3", "w_beta2"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"objective weight {name} must be >= 0")

    def state_weights(self, kind: VehicleKind, direction: Direction) -> np.ndarray:
        n = 5 if kind == VehicleKind.CAR_LIKE else 7
        w = np.zeros(n)
        if kind == VehicleKind.CAR_LIKE:
            w[3], w[4] = self.w_alpha, self.w_omega
        else:
            w[5], w[6] = self.w_alpha, self.w_omega
            if direction == Direction.BACKWARD:
                w[3], w[4] = self.w_beta3, self.w_beta2
        return w

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "w_alpha": self.w_alpha,
                "w_omega": self.w_omega, "w_ualpha": self.w_ualpha,
                "w_beta3": self.w_beta3, "w_beta2": self.w_beta2}

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveWeights":
        return cls(lam=float(d.get("lambda", 1.0)),
                   w_alpha=float(d.get("w_alpha", 1.0)),
                   w_omega=float(d.get("w_omega", 10.0)),
                   w_ualpha=float(d.get("w_ualpha", 1.0)),
                   w_beta3=float(d.get("w_beta3", 1.0)),
                   w_beta2=float(d.get("w_beta2", 1.0)))


@dataclass(frozen=True)
class SolverConfig:
    k_intervals: int = 40
    substeps: int = 10
    tol_con: float = 1e-9         # equality/path residual target
    tol_kkt: float = 1e-7         # projected stationarity target
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e10
    max_outer: int = 500
    max_newton_total: int = 5000
    max_inner: int = 100
    t_min: float = 0.05           # s
    t_max: float = 90.0           # s
    beta_guard: float = 1.45      # rad, keeps joints off the tan singularity
    attempts: int = 3
    infeasibility_violation: float = 1e-4
    sample_every: int = 2         # path-bound samples at every n-th substep
    verbose: bool = False

    def __post_init__(self):
        if self.k_intervals < 20:
            raise ValueError("k_intervals must be at least 20")
        if self.substeps < 2:
            raise ValueError("substeps must be at least 2")
        if self.sample_every < 1:
            raise ValueError("sample_every must be at least 1")

    def lean(self) -> "SolverConfig":
        """Reduced budgets for bulk boundary-value sweeps."""
        return replace(self, max_outer=30, max_newton_total=700,
                       max_inner=50, attempts=1)


@dataclass
class Trajectory:
    """Sampled solution: K+1 knots uniform in time, one control per interval."""

    duration: float
    knots: np.ndarray            # (K+1, n)
    controls: np.ndarray         # (K, 2) columns (v1, u_alpha)
    cost: float
    direction: Direction

    @property
    def k_intervals(self) -> int:
        return self.controls.shape[0]

    @property
    def kind(self) -> VehicleKind:
        return VehicleKind.CAR_LIKE if self.knots.shape[1] == 5 else VehicleKind.TWO_TRAILER

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.knots.shape[0])

    @property
    def end_state(self) -> np.ndarray:
        return self.knots[-1]


@dataclass
class SolveResult:
    status: str                  # "converged" | "infeasible"
    trajectory: Trajectory | None
    kkt_residual: float
    constraint_violation: float
    n_outer: int
    n_newton: int
    message: str = ""
    aux: dict = field(default_factory=dict)   # final multipliers, penalty

    @property
    def ok(self) -> bool:
        return self.status == "converged"


def _quadrature_terms(knots, u_alpha, wx, wu):
    q = (knots * knots) @ wx
    qsum = 0.5 * q[0] + q[1:-1].sum() + 0.5 * q[-1]
    usum = wu * float(u_alpha @ u_alpha)
    return qsum, usum


def objective_value(knots, controls, duration, weights, direction) -> float:
    kind = VehicleKind.CAR_LIKE if knots.shape[1] == 5 else VehicleKind.TWO_TRAILER
    wx = weights.state_weights(kind, direction)
    qsum, usum = _quadrature_terms(knots, controls[:, 1], wx, weights.w_ualpha)
    h = duration / controls.shape[0]
    return duration + weights.lam * h * (qsum + usum)


def evaluate_objective(traj: Trajectory, weights: ObjectiveWeights) -> float:
    """Duration plus the trapezoidal quadrature of the smoothness integrand."""
    return objective_value(traj.knots, traj.controls, traj.duration, weights,
                           traj.direction)


def smoothness_integral(traj: Trajectory, weights: ObjectiveWeights) -> float:
    """Quadrature of J alone (the integral the trade-off weight multiplies)."""
    wx = weights.state_weights(traj.kind, traj.direction)
    qsum, usum = _quadrature_terms(traj.knots, traj.controls[:, 1], wx,
                                   weights.w_ualpha)
    h = traj.duration / traj.k_intervals
    return h * (qsum + usum)


def integration_defects(traj: Trajectory, params: VehicleParams,
                        substeps: int, impl=None) -> np.ndarray:
    """Knot-to-knot defects of re-integrating each interval, shape (K, n)."""
    mod = impl if impl is not None else kernels
    v = traj.controls[0, 0]
    ends = mod.propagate_intervals(
        np.ascontiguousarray(traj.knots[:-1]),
        np.ascontiguousarray(traj.controls[:, 1]), v, traj.duration,
        substeps, params.pack_lengths(), kernels.kind_code(params.kind),
        False)[0]
    return traj.knots[1:] - ends


class _ShootingNlp:
    """Dense transcription of one OcpSpec plus the merit machinery."""

    def __init__(self, ocp: OcpSpec, cfg: SolverConfig):
        self.ocp = ocp
        self.cfg = cfg
        p = ocp.params
        self.params = p
        self.kind = p.kind
        self.kcode = kernels.kind_code(p.kind)
        self.pvec = p.pack_lengths()
        self.n = p.n_states
        self.K = cfg.k_intervals
        self.S = cfg.substeps
        self.v = p.speed(ocp.direction == Direction.FORWARD)
        self.x0 = np.asarray(ocp.initial_state, dtype=float)
        self.wx = ocp.weights.state_weights(p.kind, ocp.direction)
        self.wu = ocp.weights.w_ualpha
        self.lam = ocp.weights.lam

        man = ocp.manifold
        self.fixed_rows = [(idx, tgt, idx in man.angular) for idx, tgt in man.fixed]
        self.linear_rows = list(man.linear_constraints)
        n, K = self.n, self.K
        self.m_eq = K * n + len(self.fixed_rows) + len(self.linear_rows)
        self.N = K * (n + 1) + 1
        self.iT = K * (n + 1)
        self.bw = 2 * n       # Hessian band halfwidth (excluding the T arrow)

        lb = np.full(self.N, -_BIG)
        ub = np.full(self.N, _BIG)
        a_i, o_i = p.alpha_index, p.omega_index
        for k in range(K):
            lb[self._iu(k)], ub[self._iu(k)] = -p.u_alpha_max, p.u_alpha_max
        for k in range(1, K + 1):
            base = self._ix(k)
            lb[base + a_i], ub[base + a_i] = -p.alpha_max, p.alpha_max
            lb[base + o_i], ub[base + o_i] = -p.omega_max, p.omega_max
            if self.kind == VehicleKind.TWO_TRAILER:
                for j in (3, 4):
                    lb[base + j], ub[base + j] = -cfg.beta_guard, cfg.beta_guard
        lb[self.iT], ub[self.iT] = cfg.t_min, cfg.t_max
        self.lb, self.ub = lb, ub

        pc = kernels.PC_COMPONENTS[self.kcode]
        self.npc = len(pc)
        bvals = {a_i: p.alpha_max, o_i: p.omega_max,
                 3: cfg.beta_guard, 4: cfg.beta_guard}
        self.pc_bound = np.array([bvals[c] for c in pc])
        # near-active margin: rows this close to their bound enter the
        # Newton model's curvature so steps do not overshoot into them
        self.pc_margin = 0.02 * self.pc_bound
        # proximal method of multipliers: a small quadratic pull toward the
        # previous outer iterate supplies curvature where the reduced
        # objective is linear (pure minimum time); zero leaves it off
        self.prox_sigma = 1e-3 if ocp.weights.lam == 0.0 else 0.0
        self.prox_ref: np.ndarray | None = None
        # substep indices where the path bounds are imposed (knot values are
        # box constrained already, so interior substeps suffice)
        self.s_idx = np.arange(cfg.sample_every - 1, self.S - 1,
                               cfg.sample_every)
        self.ns1 = self.s_idx.size
        self.n_samp = K * self.ns1 * self.npc

    # -- variable layout -------------------------------------------------
    def _iu(self, k: int) -> int:
        return k * (self.n + 1)

    def _ix(self, k: int) -> int:
        return (k - 1) * (self.n + 1) + 1

    def pack(self, knots: np.ndarray, u_alpha: np.ndarray, T: float) -> np.ndarray:
        z = np.empty(self.N)
        for k in range(self.K):
            z[self._iu(k)] = u_alpha[k]
            z[self._ix(k + 1):self._ix(k + 1) + self.n] = knots[k + 1]
        z[self.iT] = T
        return z

    def unpack(self, z: np.ndarray):
        n, K = self.n, self.K
        knots = np.empty((K + 1, n))
        knots[0] = self.x0
        u = np.empty(K)
        for k in range(K):
            u[k] = z[self._iu(k)]
            knots[k + 1] = z[self._ix(k + 1):self._ix(k + 1) + n]
        return knots, u, z[self.iT]

    # -- model evaluation -------------------------------------------------
    def _propagate(self, z, want_tangents: bool):
        knots, u, T = self.unpack(z)
        out = kernels.propagate_intervals(
            np.ascontiguousarray(knots[:-1]), u, self.v, T, self.S,
            self.pvec, self.kcode, want_tangents)
        return knots, u, T, out

    def _equalities(self, knots, T, ends):
        c = np.empty(self.m_eq)
        n, K = self.n, self.K
        c[:K * n] = (knots[1:] - ends).ravel()
        r = K * n
        xK = knots[K]
        for idx, tgt, ang in self.fixed_rows:
            d = xK[idx] - tgt
            c[r] = normalize_angle(d) if ang else d
            r += 1
        for ax, ay, b in self.linear_rows:
            c[r] = ax * xK[0] + ay * xK[1] - b
            r += 1
        return c

    def objective(self, knots, u, T) -> float:
        qsum, usum = _quadrature_terms(knots, u, self.wx, self.wu)
        return T + self.lam * (T / self.K) * (qsum + usum)

    def merit(self, z, mu, eta_p, eta_m, rho):
        """Merit value and raw constraint data; +inf outside the model domain."""
        knots, u, T, out = self._propagate(z, False)
        ends, samples = out[0], out[1]
        if not (np.all(np.isfinite(ends)) and np.all(np.isfinite(samples))):
            return math.inf, None, None, None
        c = self._equalities(knots, T, ends)
        y = samples[:, self.s_idx, :].reshape(self.K * self.ns1, self.npc)
        gp = (y - self.pc_bound).ravel()
        gm = (-y - self.pc_bound).ravel()
        phi = self.objective(knots, u, T)
        phi += float(mu @ c) + 0.5 * rho * float(c @ c)
        ap = np.maximum(0.0, eta_p + rho * gp)
        am = np.maximum(0.0, eta_m + rho * gm)
        phi += (float(ap @ ap) - float(eta_p @ eta_p)) / (2.0 * rho)
        phi += (float(am @ am) - float(eta_m @ eta_m)) / (2.0 * rho)
        if self.prox_sigma > 0.0 and self.prox_ref is not None:
            dz = z - self.prox_ref
            phi += 0.5 * self.prox_sigma * float(dz @ dz)
        return phi, c, gp, gm

    def _grad_hess(self, z, mu, eta_p, eta_m, rho):
        """Merit value, gradient and Gauss-Newton Hessian at z.

        All constraint rows couple one interval's consecutive variable block
        plus the duration T, so the Hessian is assembled directly in lower
        banded storage with a T arrow: ab[o, j] = H[j+o, j], plus the arrow
        column and corner scalar.
        """
        n, K, N = self.n, self.K, self.N
        knots, u, T, out = self._propagate(z, True)
        ends, samples, jx, ju, jt, sjx, sju, sjt = out
        if not np.all(np.isfinite(ends)):
            return math.inf, None, None, None
        c = self._equalities(knots, T, ends)
        y = samples[:, self.s_idx, :].reshape(K * self.ns1, self.npc)
        gp = (y - self.pc_bound).ravel()
        gm = (-y - self.pc_bound).ravel()

        bw = self.bw
        Nb = N - 1
        ab = np.zeros((bw + 1, Nb))
        arrow = np.zeros(Nb)
        corner = 0.0
        g = np.zeros(N)

        # objective value, gradient, Hessian (diagonal plus T couplings)
        qsum, usum = _quadrature_terms(knots, u, self.wx, self.wu)
        h = T / K
        f = T + self.lam * h * (qsum + usum)
        lam = self.lam
        for k in range(1, K + 1):
            fac = 1.0 if k < K else 0.5
            base = self._ix(k)
            xk = knots[k]
            g[base:base + n] = lam * h * fac * 2.0 * self.wx * xk
            ab[0, base:base + n] += lam * h * fac * 2.0 * self.wx
            arrow[base:base + n] += lam * fac * 2.0 * self.wx * xk / K
        for k in range(K):
            iu = self._iu(k)
            g[iu] = lam * h * 2.0 * self.wu * u[k]
            ab[0, iu] += lam * h * 2.0 * self.wu
            arrow[iu] += lam * 2.0 * self.wu * u[k] / K
        g[self.iT] += 1.0 + lam * (qsum + usum) / K

        # defect blocks: local variables [x_k, u_k, x_{k+1}] are the
        # consecutive range starting at ix(k) (iu(0) for k = 0), plus T
        mul = (mu + rho * c)[:K * n].reshape(K, n)
        L = 2 * n + 1
        loc = np.zeros((K, n, L + 1))
        loc[:, :, n + 1:L] = np.eye(n)[None, :, :]
        loc[1:, :, :n] = -jx[1:]
        loc[:, :, n] = -ju
        loc[:, :, L] = -jt
        G = rho * np.einsum('kil,kim->klm', loc, loc)
        gl = np.einsum('kil,ki->kl', loc, mul)
        bases = np.array([self._iu(0)] + [self._ix(k) for k in range(1, K)])
        # k = 0 has no x_k columns;ローカル width still L+1 with zeros, but its
        # base must keep u_0 at local position n, so shift by -n and rely on
        # the zero block (guarded below by clipping scatter columns)
        cols_rel = np.arange(L)
        karr = np.arange(K)[:, None]
        for o in range(0, L):
            qs = np.arange(0, L - o)
            colmat = bases[:, None] + qs[None, :]
            vals = G[karr, (qs + o)[None, :], qs[None, :]]
            # adjust k = 0: its columns start at iu(0) = 0 but local indices
            # include the absent x_0 block; mask those columns out
            colmat0 = colmat.copy()
            colmat0[0, :] = qs + self._iu(0) - n
            valid = colmat0 >= 0
            np.add.at(ab[o], colmat0[valid], vals[valid])
        arr_vals = G[:, L, :L]
        colmat = bases[:, None] + cols_rel[None, :]
        colmat0 = colmat.copy()
        colmat0[0, :] = cols_rel + self._iu(0) - n
        valid = colmat0 >= 0
        np.add.at(arrow, colmat0[valid], arr_vals[valid])
        corner += float(np.sum(G[:, L, L]))
        gvals = gl[:, :L]
        np.add.at(g, np.where(valid, colmat0, 0), np.where(valid, gvals, 0.0))
        g[self.iT] += float(np.sum(gl[:, L]))

        # terminal rows touch only x_K entries
        r = K * n
        bK = self._ix(K)
        mulr = mu + rho * c
        for idx, _tgt, _ang in self.fixed_rows:
            g[bK + idx] += mulr[r]
            ab[0, bK + idx] += rho
            r += 1
        for ax, ay, _b in self.linear_rows:
            g[bK] += ax * mulr[r]
            g[bK + 1] += ay * mulr[r]
            ab[0, bK] += rho * ax * ax
            ab[0, bK + 1] += rho * ay * ay
            off = 1  # columns bK and bK+1
            ab[off, bK] += rho * ax * ay
            r += 1

        # sampled path bounds: gradient from the active rows, curvature also
        # from near-active ones (conservative model at the boundary)
        ap = eta_p + rho * gp
        am = eta_m + rho * gm
        marg = rho * np.tile(self.pc_margin, K * self.ns1)
        for sign, a in ((1.0, ap), (-1.0, am)):
            idxs = np.nonzero(a > -marg)[0]
            for flat in idxs:
                k, rem = divmod(int(flat), self.ns1 * self.npc)
                si, comp = divmod(rem, self.npc)
                s = self.s_idx[si]
                row = np.empty(n + 1)
                row[:n] = sign * sjx[k, s, comp]
                row[n] = sign * sju[k, s, comp]
                rT = sign * sjt[k, s, comp]
                if k >= 1:
                    base = self._ix(k)
                    width = n + 1
                else:
                    base = self._iu(0)
                    row = row[n:]
                    width = 1
                aval = max(a[flat], 0.0)
                g[base:base + width] += aval * row
                g[self.iT] += aval * rT
                for o in range(width):
                    ab[o, base:base + width - o] += rho * row[o:] * row[:width - o]
                arrow[base:base + width] += rho * rT * row
                corner += rho * rT * rT

        phi = f + float(mu @ c) + 0.5 * rho * float(c @ c)
        phi += (float(np.maximum(0.0, ap) @ np.maximum(0.0, ap))
                - float(eta_p @ eta_p)) / (2.0 * rho)
        phi += (float(np.maximum(0.0, am) @ np.maximum(0.0, am))
                - float(eta_m @ eta_m)) / (2.0 * rho)
        if self.prox_sigma > 0.0 and self.prox_ref is not None:
            dz = z - self.prox_ref
            phi += 0.5 * self.prox_sigma * float(dz @ dz)
            g += self.prox_sigma * dz
            ab[0] += self.prox_sigma
            corner += self.prox_sigma
        return phi, g, (ab, arrow, corner), (c, gp, gm)

    def _linearize(self, z):
        """Objective gradient, equality data and sampled-bound rows at z."""
        n, K, N = self.n, self.K, self.N
        knots, u, T, out = self._propagate(z, True)
        ends, samples, jx, ju, jt, sjx, sju, sjt = out
        c = self._equalities(knots, T, ends)
        qsum, usum = _quadrature_terms(knots, u, self.wx, self.wu)
        h = T / K
        g = np.zeros(N)
        lam = self.lam
        for k in range(1, K + 1):
            fac = 1.0 if k < K else 0.5
            base = self._ix(k)
            g[base:base + n] = lam * h * fac * 2.0 * self.wx * knots[k]
        for k in range(K):
            g[self._iu(k)] = lam * h * 2.0 * self.wu * u[k]
        g[self.iT] = 1.0 + lam * (qsum + usum) / K

        J = np.zeros((self.m_eq, N))
        eye = np.eye(n)
        for k in range(K):
            rr = slice(k * n, (k + 1) * n)
            J[rr, self._ix(k + 1):self._ix(k + 1) + n] = eye
            if k >= 1:
                J[rr, self._ix(k):self._ix(k) + n] = -jx[k]
            J[rr, self._iu(k)] = -ju[k]
            J[rr, self.iT] = -jt[k]
        r = K * n
        bK = self._ix(K)
        for idx, _t, _a in self.fixed_rows:
            J[r, bK + idx] = 1.0
            r += 1
        for ax, ay, _b in self.linear_rows:
            J[r, bK], J[r, bK + 1] = ax, ay
            r += 1

        y = samples[:, self.s_idx, :].reshape(K * self.ns1, self.npc)
        gp = (y - self.pc_bound).ravel()
        gm = (-y - self.pc_bound).ravel()

        def sample_rows(mask_p, mask_m):
            rows = []
            vals = []
            for sign, mask, gv in ((1.0, mask_p, gp), (-1.0, mask_m, gm)):
                idxs = np.nonzero(mask)[0]
                for flat in idxs:
                    k, rem = divmod(int(flat), self.ns1 * self.npc)
                    si, comp = divmod(rem, self.npc)
                    s = self.s_idx[si]
                    row = np.zeros(N)
                    if k >= 1:
                        row[self._ix(k):self._ix(k) + n] = sign * sjx[k, s, comp]
                    row[self._iu(k)] = sign * sju[k, s, comp]
                    row[self.iT] = sign * sjt[k, s, comp]
                    rows.append(row)
                    vals.append(gv[flat])
            return rows, vals

        return g, J, c, gp, gm, sample_rows

    def _restore_feasibility(self, z, iters: int = 4):
        """Minimum-norm Newton pullback onto defects, terminal rows and any
        violated sampled bounds."""
        viol = math.inf
        for _ in range(iters):
            _g, J, c, gp, gm, sample_rows = self._linearize(z)
            if not np.all(np.isfinite(c)):
                return z, math.inf
            rows, vals = sample_rows(gp > 0.0, gm > 0.0)
            if rows:
                R = np.vstack([J] + [np.asarray(rows)])
                rhs = np.concatenate([c, np.asarray(vals)])
            else:
                R = J
                rhs = c
            viol = float(np.max(np.abs(rhs)))
            if viol <= 1e-11:
                break
            RRt = R @ R.T
            RRt[np.diag_indices_from(RRt)] += 1e-12 * max(
                1.0, float(np.trace(RRt)) / R.shape[0])
            try:
                f = scipy.linalg.cho_factor(RRt, lower=True, check_finite=False)
            except scipy.linalg.LinAlgError:
                return z, viol
            z = np.clip(z - R.T @ scipy.linalg.cho_solve(f, rhs, check_finite=False),
                        self.lb, self.ub)
        knots, u, T, out = self._propagate(z, False)
        if not (np.all(np.isfinite(out[0])) and np.all(np.isfinite(out[1]))):
            return z, math.inf
        c = self._equalities(knots, T, out[0])
        y = out[1][:, self.s_idx, :].reshape(-1, self.npc)
        viol = max(float(np.max(np.abs(c))),
                   float(max(np.max(np.abs(y) - self.pc_bound), 0.0)))
        return z, viol

    def slp_polish(self, z: np.ndarray, max_iter: int = 40):
        """Trust-region sequential-LP descent for vertex-type optima.

        Smoothed Newton methods crawl where the reduced objective is linear
        and the solution sits on a vertex of bound-activity swaps (pure
        minimum-time problems).  Linear programs take such steps natively;
        feasibility is restored by Newton on the defects after each step.
        Returns the polished point and the final LP first-order gap.
        """
        from scipy import sparse
        from scipy.optimize import linprog
        p = self.params
        tr_state = 0.4
        tr_u = max(1.0, p.u_alpha_max / 4.0)
        tr_T = 0.2
        tr_scale = np.ones(self.N)
        for k in range(self.K):
            tr_scale[self._iu(k)] = tr_u / tr_state
        tr_scale[self.iT] = tr_T / tr_state
        delta = tr_state
        gap = math.inf
        margin = 0.05 * np.tile(self.pc_bound, self.K * self.ns1)

        def f_of(zz):
            knots, u, T, _ = self._propagate(zz, False)
            return self.objective(knots, u, T)

        def lp_step(zz, dd):
            g, J, c, gp, gm, sample_rows = self._linearize(zz)
            rows, vals = sample_rows(gp >= -margin[:gp.size],
                                     gm >= -margin[:gm.size])
            bounds = []
            for i in range(self.N):
                lo = max(self.lb[i] - zz[i], -dd * tr_scale[i])
                hi = min(self.ub[i] - zz[i], dd * tr_scale[i])
                bounds.append((lo, max(hi, lo)))
            A_ub = sparse.csr_matrix(np.vstack(rows)) if rows else None
            b_ub = -np.asarray(vals) if rows else None
            res = linprog(g, A_ub=A_ub, b_ub=b_ub,
                          A_eq=sparse.csr_matrix(J), b_eq=-c,
                          bounds=bounds, method="highs")
            if not res.success:
                return None, None
            return res.x, -float(g @ res.x)

        f_cur = f_of(z)
        verbose = self.cfg.verbose
        for it in range(max_iter):
            d, gap = lp_step(z, delta)
            if d is None:
                delta *= 0.5
                if delta < 1e-7:
                    break
                continue
            if gap <= 1e-9 * (1.0 + abs(f_cur)):
                if delta >= 0.9 * tr_state:
                    break       # stationary at full trust region: done
                delta = tr_state
                continue
            z_try, viol = self._restore_feasibility(
                np.clip(z + d, self.lb, self.ub))
            f_try = f_of(z_try)
            if verbose:
                print(f"  slp {it:3d}: gap={gap:9.2e} viol={viol:8.1e} "
                      f"f={f_cur:.6f}->{f_try:.6f} delta={delta:.3f}")
            if viol <= 1e-9 and f_try < f_cur - 1e-12:
                z = z_try
                f_cur = f_try
                delta = min(delta * 1.5, tr_state)
            else:
                delta *= 0.4
                if delta < 1e-7:
                    break
        # certify with a fresh full trust region
        _d, gap = lp_step(z, tr_state)
        if gap is None:
            gap = math.inf
        return z, gap

    def _kkt_least_squares(self, z) -> float:
        """Stationarity residual with least-squares multiplier estimates.

        The merit gradient scales with rho * c and is useless as a KKT
        measure once the penalty is large; this solves for the multipliers
        that best explain the objective gradient on the free variables and
        reports the remaining residual.
        """
        n, K, N = self.n, self.K, self.N
        knots, u, T, out = self._propagate(z, True)
        ends, samples, jx, ju, jt, sjx, sju, sjt = out
        qsum, usum = _quadrature_terms(knots, u, self.wx, self.wu)
        h = T / K
        g = np.zeros(N)
        lam = self.lam
        for k in range(1, K + 1):
            fac = 1.0 if k < K else 0.5
            base = self._ix(k)
            g[base:base + n] = lam * h * fac * 2.0 * self.wx * knots[k]
        for k in range(K):
            g[self._iu(k)] = lam * h * 2.0 * self.wu * u[k]
        g[self.iT] = 1.0 + lam * (qsum + usum) / K

        rows = [np.zeros((0, N))]
        J = np.zeros((self.m_eq, N))
        eye = np.eye(n)
        for k in range(K):
            rr = slice(k * n, (k + 1) * n)
            J[rr, self._ix(k + 1):self._ix(k + 1) + n] = eye
            if k >= 1:
                J[rr, self._ix(k):self._ix(k) + n] = -jx[k]
            J[rr, self._iu(k)] = -ju[k]
            J[rr, self.iT] = -jt[k]
        r = K * n
        bK = self._ix(K)
        for idx, _t, _a in self.fixed_rows:
            J[r, bK + idx] = 1.0
            r += 1
        for ax, ay, _b in self.linear_rows:
            J[r, bK], J[r, bK + 1] = ax, ay
            r += 1
        rows.append(J)
        y = samples[:, self.s_idx, :].reshape(K * self.ns1, self.npc)
        gp = (y - self.pc_bound).ravel()
        gm = (-y - self.pc_bound).ravel()
        act_tol = 1e-6
        for sign, gv in ((1.0, gp), (-1.0, gm)):
            idxs = np.nonzero(gv >= -act_tol)[0]
            if idxs.size:
                A = np.zeros((idxs.size, N))
                for rr, flat in enumerate(idxs):
                    k, rem = divmod(int(flat), self.ns1 * self.npc)
                    si, comp = divmod(rem, self.npc)
                    s = self.s_idx[si]
                    if k >= 1:
                        A[rr, self._ix(k):self._ix(k) + n] = sign * sjx[k, s, comp]
                    A[rr, self._iu(k)] = sign * sju[k, s, comp]
                    A[rr, self.iT] = sign * sjt[k, s, comp]
                rows.append(A)
        at_lb = z <= self.lb + 1e-9
        at_ub = z >= self.ub - 1e-9
        free = ~(at_lb | at_ub)
        A_ls = np.vstack(rows)[:, free].T
        b = g[free]
        if A_ls.shape[1] == 0:
            return float(np.max(np.abs(b)))
        sol, *_ = np.linalg.lstsq(A_ls, -b, rcond=None)
        return float(np.max(np.abs(A_ls @ sol + b)))

    # -- inner solver ------------------------------------------------------
    def _solve_newton(self, Hs, g, free, tau, scale):
        """Newton direction from the banded-plus-arrow system on the free set."""
        ab, arrow, corner = Hs
        iT = self.iT
        fb = np.nonzero(free[:iT])[0]
        nf = fb.size
        bw = self.bw
        d = np.zeros(self.N)
        if nf == 0:
            if free[iT]:
                den = corner + tau * scale
                if den <= 0.0:
                    raise scipy.linalg.LinAlgError("indefinite corner")
                d[iT] = -g[iT] / den
            return d
        abf = np.zeros((bw + 1, nf))
        abf[0] = ab[0, fb] + tau * scale
        for o in range(1, bw + 1):
            if o >= nf:
                break
            fj = fb[:-o]
            orig = fb[o:] - fj
            valid = orig <= bw
            row = np.zeros(nf - o)
            row[valid] = ab[orig[valid], fj[valid]]
            abf[o, :nf - o] = row
        cb = scipy.linalg.cholesky_banded(abf, lower=True, check_finite=False)
        gB = g[fb]
        if free[iT]:
            aB = arrow[fb]
            y1 = scipy.linalg.cho_solve_banded((cb, True), gB, check_finite=False)
            y2 = scipy.linalg.cho_solve_banded((cb, True), aB, check_finite=False)
            den = corner + tau * scale - float(aB @ y2)
            if den <= 0.0:
                raise scipy.linalg.LinAlgError("indefinite Schur complement")
            dT = -(g[iT] - float(aB @ y1)) / den
            d[fb] = -y1 - dT * y2
            d[iT] = dT
        else:
            d[fb] = -scipy.linalg.cho_solve_banded((cb, True), gB,
                                                   check_finite=False)
        return d

    def _projected_grad(self, z, g):
        pg = g.copy()
        at_lb = z <= self.lb + 1e-11
        at_ub = z >= self.ub - 1e-11
        pg[at_lb & (g > 0.0)] = 0.0
        pg[at_ub & (g < 0.0)] = 0.0
        return pg

    def _inner(self, z, mu, eta_p, eta_m, rho, omega, max_iter):
        tau = 0.0
        pg_norm = math.inf
        it = 0
        phi_prev = math.inf
        slow = 0
        while it < max_iter:
            phi, g, H, parts = self._grad_hess(z, mu, eta_p, eta_m, rho)
            if not math.isfinite(phi):
                raise FloatingPointError("merit not finite at an accepted point")
            it += 1
            pg = self._projected_grad(z, g)
            pg_norm = float(np.max(np.abs(pg)))
            if pg_norm <= omega:
                break
            # hand back to the outer loop when merit progress has died out
            if phi_prev - phi <= 1e-13 * (1.0 + abs(phi)):
                slow += 1
                if slow >= 3:
                    break
            else:
                slow = 0
            phi_prev = phi
            at_lb = z <= self.lb + 1e-11
            at_ub = z >= self.ub - 1e-11
            active = (at_lb & (g > 0.0)) | (at_ub & (g < 0.0))
            scale = max(1.0, float(np.mean(np.abs(H[0][0]))))
            solved = False
            d = None
            for _ in range(12):
                try:
                    d = self._solve_newton(H, g, ~active, tau, scale)
                    solved = True
                    break
                except scipy.linalg.LinAlgError:
                    tau = max(tau * 10.0, 1e-10)
            if not solved or float(g @ d) >= 0.0:
                d = -pg
            # Gauss-Newton misses the multiplier-weighted constraint
            # curvature, so near-null model directions can blow up; cap the
            # step and adapt the damping to the accepted fraction instead of
            # shrinking it after every acceptance.
            step_cap = 10.0 * (1.0 + float(np.max(np.abs(z))))
            dmax = float(np.max(np.abs(d)))
            if dmax > step_cap:
                d *= step_cap / dmax
            step_ok = False
            soc_factor = None
            J_eq = None
            t = 1.0
            for _ in range(40):
                z_try = np.clip(z + t * d, self.lb, self.ub)
                dz = z_try - z
                if float(np.max(np.abs(dz))) == 0.0:
                    break
                phi_try = self.merit(z_try, mu, eta_p, eta_m, rho)[0]
                if phi_try <= phi + 1e-4 * float(g @ dz):
                    z = z_try
                    step_ok = True
                    break
                if solved and t >= 0.125:
                    # second-order correction: pull the trial back onto the
                    # constraint manifold, otherwise curved-manifold descent
                    # of a linear reduced objective dies under the penalty
                    if soc_factor is None:
                        J_eq = self._linearize(z)[1]
                        JJt = J_eq @ J_eq.T
                        JJt[np.diag_indices_from(JJt)] += 1e-10 * max(
                            1.0, float(np.trace(JJt)) / self.m_eq)
                        try:
                            soc_factor = scipy.linalg.cho_factor(
                                JJt, lower=True, check_finite=False)
                        except scipy.linalg.LinAlgError:
                            soc_factor = False
                    if soc_factor is not False:
                        knots_t, u_t, T_t, out_t = self._propagate(z_try, False)
                        if np.all(np.isfinite(out_t[0])):
                            c_try = self._equalities(knots_t, T_t, out_t[0])
                            corr = -J_eq.T @ scipy.linalg.cho_solve(
                                soc_factor, c_try, check_finite=False)
                            z_soc = np.clip(z_try + corr, self.lb, self.ub)
                            phi_soc = self.merit(z_soc, mu, eta_p, eta_m, rho)[0]
                            if phi_soc <= phi + 1e-4 * t * float(g @ d):
                                z = z_soc
                                step_ok = True
                                break
                t *= 0.5
            if step_ok:
                if t >= 0.99:
                    tau *= 0.25
                elif t < 0.25:
                    tau = max(tau * 4.0, 1e-8)
            else:
                tau = max(tau * 100.0, 1e-8)
                if tau > 1e8:
                    break
        return z, pg_norm, it

    # -- outer augmented-Lagrangian loop ------------------------------------
    def _violation(self, z, mu, eta_p, eta_m, rho):
        _phi, c, gp, gm = self.merit(z, mu, eta_p, eta_m, rho)
        if c is None:
            return math.inf, None, None, None
        viol = max(float(np.max(np.abs(c))),
                   float(max(np.max(gp, initial=0.0), 0.0)),
                   float(max(np.max(gm, initial=0.0), 0.0)))
        return viol, c, gp, gm

    def solve(self, z0: np.ndarray, mu0=None, eta_p0=None, eta_m0=None,
              rho_init=None) -> SolveResult:
        cfg = self.cfg
        z = np.clip(z0, self.lb, self.ub)
        mu = np.zeros(self.m_eq) if mu0 is None else np.asarray(mu0, dtype=float)
        eta_p = (np.zeros(self.n_samp) if eta_p0 is None
                 else np.asarray(eta_p0, dtype=float))
        eta_m = (np.zeros(self.n_samp) if eta_m0 is None
                 else np.asarray(eta_m0, dtype=float))
        # Tearing a boundary gap across the K defect rows costs only
        # rho/(2K) * gap^2 in the merit, so the initial penalty must grow
        # with K or minimum-time objectives collapse the trajectory.
        rho = (cfg.rho0 * max(1.0, float(self.K)) if rho_init is None
               else float(rho_init))
        omega = 1e-2
        viol_ref = math.inf
        stall = 0
        stuck_inner = 0
        feas_stall = 0
        pg_prev = math.inf
        n_newton = 0
        pg_norm = math.inf
        status = "infeasible"
        message = "iteration budget exhausted"
        viol = math.inf
        outer = 0
        for outer in range(1, cfg.max_outer + 1):
            budget = cfg.max_newton_total - n_newton
            if budget <= 0:
                break
            viol_entry = self._violation(z, mu, eta_p, eta_m, rho)[0]
            z_entry = z.copy()
            self.prox_ref = z_entry
            try:
                z, pg_norm, used = self._inner(
                    z, mu, eta_p, eta_m, rho, omega,
                    min(cfg.max_inner, budget))
            except FloatingPointError:
                message = "model domain left during iteration"
                break
            n_newton += used
            viol, c, gp, gm = self._violation(z, mu, eta_p, eta_m, rho)
            if viol > 10.0 * viol_entry + 1e-8 and viol > 1e-3:
                # merit minimization dove away from feasibility; veto the
                # step and retry under a stiffer penalty
                z = z_entry
                rho = min(rho * cfg.rho_growth, cfg.rho_max)
                if cfg.verbose:
                    print(f"  outer {outer:3d}: violation dive "
                          f"({viol_entry:.2e} -> {viol:.2e}), rho={rho:.1e}")
                if rho >= cfg.rho_max:
                    stall += 1
                    if stall >= 4:
                        message = "feasibility stalled at maximum penalty"
                        break
                continue
            if cfg.verbose:
                print(f"  outer {outer:3d}: viol={viol:9.2e} pg={pg_norm:9.2e} "
                      f"rho={rho:8.1e} omega={omega:8.1e} newton={n_newton}")
            if viol <= cfg.tol_con and pg_norm <= cfg.tol_kkt:
                status = "converged"
                message = "optimal"
                break
            if viol <= 1e-8 and pg_norm > cfg.tol_kkt:
                # the merit gradient scales with rho*c here; judge
                # stationarity by the multiplier least-squares residual
                kkt_ls = self._kkt_least_squares(z)
                if kkt_ls <= max(cfg.tol_kkt, 1e-6):
                    status = "converged"
                    message = "optimal (multiplier estimate)"
                    pg_norm = kkt_ls
                    break
                if abs(pg_norm - pg_prev) <= 0.01 * pg_prev:
                    feas_stall += 1
                    if feas_stall >= 3:
                        message = "stationarity stalled at a feasible point"
                        break
                else:
                    feas_stall = 0
                pg_prev = pg_norm
            inner_done = pg_norm <= omega
            if viol <= max(cfg.tol_con, 0.25 * viol_ref):
                mu = mu + rho * c
                eta_p = np.maximum(0.0, eta_p + rho * gp)
                eta_m = np.maximum(0.0, eta_m + rho * gm)
                viol_ref = viol
                omega = max(0.25 * omega, 0.3 * cfg.tol_kkt)
                stuck_inner = 0
                stall = 0
            elif inner_done or stuck_inner >= 2:
                # raise the penalty only once the subproblem is actually
                # solved (or persistently stuck); blind escalation makes
                # stationarity unreachable through the rho*c noise floor.
                # In the polishing regime the penalty stays moderate.
                rho_cap = cfg.rho_max if viol > 1e-6 else min(cfg.rho_max, 1e8)
                rho = min(rho * cfg.rho_growth, rho_cap)
                omega = max(0.5 * omega, 0.3 * cfg.tol_kkt)
                stuck_inner = 0
                if rho >= rho_cap:
                    stall += 1
                    if stall >= 6:
                        message = "feasibility stalled at maximum penalty"
                        break
            else:
                stuck_inner += 1
        # accept a slightly looser band when budgets ran out near the solution
        if status != "converged" and viol <= 1e-8:
            kkt_ls = self._kkt_least_squares(z)
            if kkt_ls <= 1e-6:
                status = "converged"
                message = "acceptable tolerance"
                pg_norm = kkt_ls
        knots, u, T = self.unpack(z)
        traj = None
        if status == "converged" or viol <= 1e-6:
            # near-feasible points are kept so polishing stages can refine
            # them; only "converged" marks an accepted solution
            controls = np.column_stack([np.full(self.K, self.v), u])
            traj = Trajectory(duration=float(T), knots=knots, controls=controls,
                              cost=self.objective(knots, u, T),
                              direction=self.ocp.direction)
        elif viol > cfg.infeasibility_violation:
            message = f"infeasible (violation {viol:.2e}); {message}"
        return SolveResult(status=status, trajectory=traj,
                           kkt_residual=pg_norm, constraint_violation=viol,
                           n_outer=outer, n_newton=n_newton, message=message,
                           aux={"mu": mu, "eta_p": eta_p, "eta_m": eta_m,
                                "rho": rho})


# -- initial guesses ---------------------------------------------------------

def _alpha_profile(K, a0, a_mid, a_end):
    idx = np.arange(K + 1, dtype=float)
    return np.interp(idx, [0.0, 0.2 * K, 0.8 * K, float(K)],
                     [a0, a_mid, a_mid, a_end])


def _rates_from_alpha(alpha, T):
    K = alpha.shape[0] - 1
    h = T / K
    omega = np.zeros(K + 1)
    omega[1:-1] = (alpha[2:] - alpha[:-2]) / (2.0 * h)
    u = np.diff(omega) / h
    return omega, u


def _equilibrium_joints(alpha, params):
    """Equilibrium joints per knot; saturates where no equilibrium exists."""
    b3 = np.empty_like(alpha)
    b2 = np.empty_like(alpha)
    last = (0.0, 0.0)
    for i, a in enumerate(alpha):
        a = float(a)
        for _ in range(20):
            try:
                last = equilibrium_configuration(a, params)
                break
            except EquilibriumNotFound:
                a *= 0.85
        b3[i], b2[i] = last
    return b3, b2


def _initial_guess(ocp: OcpSpec, cfg: SolverConfig, attempt: int):
    """Knots/controls/duration seed for one solve attempt."""
    p = ocp.params
    n, K = p.n_states, cfg.k_intervals
    x0 = np.asarray(ocp.initial_state, dtype=float)
    v = p.speed(ocp.direction == Direction.FORWARD)
    hint = dict(ocp.init_hint)
    kind = hint.get("type", "bvp")
    fixed = dict(ocp.manifold.fixed)
    a_end = fixed.get(p.alpha_index, 0.0)
    a0 = x0[p.alpha_index]
    tau = np.linspace(0.0, 1.0, K + 1)
    knots = np.tile(x0, (K + 1, 1))

    if kind == "straight":
        xt, yt = hint["target_xy"]
        dist = math.hypot(xt - x0[0], yt - x0[1])
        T = max(dist / abs(v), cfg.t_min * 2)
        knots[:, 0] = x0[0] + tau * (xt - x0[0])
        knots[:, 1] = x0[1] + tau * (yt - x0[1])
        alpha = _alpha_profile(K, a0, 0.0, a_end)
    elif kind == "arc":
        dth = hint["dtheta"]
        scale = (0.7, 0.45, 0.92)[attempt % 3]
        a_cap = p.alpha_max
        if p.kind == VehicleKind.TWO_TRAILER:
            a_cap = min(a_cap, 0.9 * max_equilibrium_steering(p))
        a_mag = max(0.05 * p.alpha_max, scale * a_cap)
        T = p.L1 * abs(dth) / (abs(v) * math.tan(a_mag))
        psidot = dth / T
        th = x0[2] + dth * tau
        knots[:, 0] = x0[0] + (v / psidot) * (np.sin(th) - math.sin(x0[2]))
        knots[:, 1] = x0[1] - (v / psidot) * (np.cos(th) - math.cos(x0[2]))
        knots[:, 2] = th
        a_arc = math.atan(p.L1 * psidot / v)
        alpha = _alpha_profile(K, a0, a_arc, a_end)
    elif kind == "parallel":
        c = hint["c_lat"]
        scale = (1.0, 1.7, 2.6)[attempt % 3]
        ell = max(3.0 * abs(c), 2.5 * p.L1) * scale
        s_dir = 1.0 if v > 0 else -1.0
        th0 = x0[2]
        a = s_dir * ell * tau
        frac = np.abs(a) / ell
        b = c * (3.0 * frac ** 2 - 2.0 * frac ** 3)
        knots[:, 0] = x0[0] + a * math.cos(th0) - b * math.sin(th0)
        knots[:, 1] = x0[1] + a * math.sin(th0) + b * math.cos(th0)
        dx = np.gradient(knots[:, 0])
        dy = np.gradient(knots[:, 1])
        th = np.unwrap(np.arctan2(s_dir * dy, s_dir * dx))
        th += th0 - th[0]
        th[-1] = th0
        knots[:, 2] = th
        plen = float(np.sum(np.hypot(np.diff(knots[:, 0]), np.diff(knots[:, 1]))))
        T = max(plen / abs(v), cfg.t_min * 2)
        dthdt = np.gradient(th) * K / T
        alpha = np.arctan(np.clip(p.L1 * dthdt / v, -3.0, 3.0))
        alpha[0], alpha[-1] = a0, a_end
    else:  # generic fixed-target interpolation
        target = hint.get("target")
        if target is None:
            target = np.array([fixed.get(i, x0[i]) for i in range(n)])
        target = np.asarray(target, dtype=float)
        dth = normalize_angle(target[2] - x0[2])
        chord = math.hypot(target[0] - x0[0], target[1] - x0[1])
        scale = (1.0, 1.4, 0.8)[attempt % 3]
        if abs(dth) < 1e-9:
            knots[:, 0] = x0[0] + tau * (target[0] - x0[0])
            knots[:, 1] = x0[1] + tau * (target[1] - x0[1])
            T = max(chord / abs(v), cfg.t_min * 2) * scale
            alpha = _alpha_profile(K, a0, 0.0, a_end)
        else:
            a_cap = p.alpha_max
            if p.kind == VehicleKind.TWO_TRAILER:
                a_cap = min(a_cap, 0.9 * max_equilibrium_steering(p))
            a_mag = 0.6 * a_cap * scale
            T = max(p.L1 * abs(dth) / (abs(v) * math.tan(a_mag)),
                    chord / abs(v))
            psidot = dth / T
            th = x0[2] + dth * tau
            bx = x0[0] + (v / psidot) * (np.sin(th) - math.sin(x0[2]))
            by = x0[1] - (v / psidot) * (np.cos(th) - math.cos(x0[2]))
            knots[:, 0] = bx + tau * (target[0] - bx[-1])
            knots[:, 1] = by + tau * (target[1] - by[-1])
            knots[:, 2] = th
            a_arc = math.atan(p.L1 * psidot / v)
            alpha = _alpha_profile(K, a0, a_arc, a_end)

    T = float(np.clip(T, cfg.t_min, cfg.t_max))
    alpha = np.clip(alpha, -0.98 * p.alpha_max, 0.98 * p.alpha_max)
    omega, u = _rates_from_alpha(alpha, T)
    omega = np.clip(omega, -0.95 * p.omega_max, 0.95 * p.omega_max)
    omega[0] = x0[p.omega_index]
    omega[-1] = fixed.get(p.omega_index, 0.0)
    u = np.clip(u, -0.95 * p.u_alpha_max, 0.95 * p.u_alpha_max)
    knots[:, p.alpha_index] = alpha
    knots[:, p.omega_index] = omega
    if p.kind == VehicleKind.TWO_TRAILER:
        b3, b2 = _equilibrium_joints(alpha, p)
        knots[:, 3], knots[:, 4] = b3, b2
    return knots, u, T


def _guess_from_trajectory(traj: Trajectory, K: int):
    """Resample a warm-start trajectory onto K intervals."""
    Kw = traj.k_intervals
    if Kw == K:
        return traj.knots.copy(), traj.controls[:, 1].copy(), traj.duration
    t_old = np.linspace(0.0, 1.0, Kw + 1)
    t_new = np.linspace(0.0, 1.0, K + 1)
    knots = np.column_stack([np.interp(t_new, t_old, traj.knots[:, j])
                             for j in range(traj.knots.shape[1])])
    tc_old = (np.arange(Kw) + 0.5) / Kw
    tc_new = (np.arange(K) + 0.5) / K
    u = np.interp(tc_new, tc_old, traj.controls[:, 1])
    return knots, u, traj.duration


# -- public entry points -----------------------------------------------------

def _polish_min_time(prob: _ShootingNlp, res: SolveResult) -> SolveResult:
    """Vertex polish for lambda = 0 results; upgrades or returns unchanged."""
    traj = res.trajectory
    if traj is None:
        return res
    z = prob.pack(traj.knots, traj.controls[:, 1], traj.duration)
    try:
        z2, gap = prob.slp_polish(z)
    except Exception:
        return res
    knots, u, T, out = prob._propagate(z2, False)
    ends, samples = out[0], out[1]
    if not (np.all(np.isfinite(ends)) and np.all(np.isfinite(samples))):
        return res
    c = prob._equalities(knots, T, ends)
    y = samples[:, prob.s_idx, :].reshape(-1, prob.npc)
    viol = max(float(np.max(np.abs(c))),
               float(max(np.max(np.abs(y) - prob.pc_bound), 0.0)))
    kkt = prob._kkt_least_squares(z2)
    new_cost = prob.objective(knots, u, T)
    if (viol <= 1e-8 and kkt <= 1e-6 and gap <= 1e-6 * (1.0 + abs(new_cost))
            and (not res.ok or new_cost <= traj.cost + 1e-12)):
        controls = np.column_stack([np.full(prob.K, prob.v), u])
        traj2 = Trajectory(duration=float(T), knots=knots, controls=controls,
                           cost=new_cost, direction=prob.ocp.direction)
        return SolveResult(status="converged", trajectory=traj2,
                           kkt_residual=kkt, constraint_violation=viol,
                           n_outer=res.n_outer, n_newton=res.n_newton,
                           message="vertex polish", aux=res.aux)
    return res


def solve_ocp(ocp: OcpSpec, config: SolverConfig | None = None,
              warm: Trajectory | None = None) -> SolveResult:
    """Solve one maneuver OCP / BVP; retries with varied seeds on failure.

    Pure minimum-time problems (lambda = 0) are warm started through a short
    smoothing homotopy: the bang-bang structure emerges gradually from a
    mildly regularized solve, which the final exact solve then refines.
    """
    cfg = config if config is not None else SolverConfig()
    prob = _ShootingNlp(ocp, cfg)
    if warm is None and ocp.weights.lam == 0.0:
        # smoothing weights are de-rated by how far the rate limits exceed
        # their nominal values, so fast transients stay affordable and the
        # smoothed solution already carries the minimum-time structure
        p = ocp.params
        pre_w = ObjectiveWeights(
            lam=0.02,
            w_alpha=1.0,
            w_omega=10.0 / max(1.0, (p.omega_max / 0.5) ** 2),
            w_ualpha=1.0 / max(1.0, (p.u_alpha_max / 40.0) ** 2),
            w_beta3=1.0, w_beta2=1.0)
        pre = OcpSpec(initial_state=ocp.initial_state,
                      start_lattice=ocp.start_lattice, manifold=ocp.manifold,
                      direction=ocp.direction, weights=pre_w,
                      params=ocp.params, tag=ocp.tag + "/presolve",
                      init_hint=ocp.init_hint)
        pre_res = solve_ocp(pre, cfg)
        if pre_res.ok:
            # hand the smoothed solution straight to the vertex polish; a
            # smoothed Newton refinement of the exact minimum-time problem
            # only crawls (zero reduced curvature)
            knots, u, T = _guess_from_trajectory(pre_res.trajectory,
                                                 cfg.k_intervals)
            controls = np.column_stack([np.full(cfg.k_intervals, prob.v), u])
            seed_traj = Trajectory(duration=T, knots=knots, controls=controls,
                                   cost=math.inf, direction=ocp.direction)
            seed = SolveResult(status="infeasible", trajectory=seed_traj,
                               kkt_residual=math.inf,
                               constraint_violation=math.inf,
                               n_outer=pre_res.n_outer,
                               n_newton=pre_res.n_newton)
            res = _polish_min_time(prob, seed)
            if res.ok:
                return res
    best: SolveResult | None = None
    seeds: list[tuple] = []
    if warm is not None:
        seeds.append(_guess_from_trajectory(warm, cfg.k_intervals))
    attempt = 0
    while len(seeds) < max(1, cfg.attempts):
        seeds.append(_initial_guess(ocp, cfg, attempt))
        attempt += 1
    for knots, u, T in seeds:
        res = prob.solve(prob.pack(knots, u, T))
        if ocp.weights.lam == 0.0:
            res = _polish_min_time(prob, res)
        if res.ok:
            return res
        if best is None or res.constraint_violation < best.constraint_violation:
            best = res
    return best


def solve_maneuver_ocp(ocp: OcpSpec, config: SolverConfig | None = None) -> SolveResult:
    """Solve a maneuver OCP with a partially free terminal manifold."""
    return solve_ocp(ocp, config)


def solve_bvp(initial: np.ndarray, final: np.ndarray, direction: Direction,
              weights: ObjectiveWeights, params: VehicleParams,
              config: SolverConfig | None = None,
              warm: Trajectory | None = None,
              tag: str = "bvp") -> SolveResult:
    """Fixed-endpoint problem: every terminal component pinned to `final`."""
    initial = np.asarray(initial, dtype=float)
    final = np.asarray(final, dtype=float)
    d = np.abs(initial - final)
    d[2] = abs(normalize_angle(initial[2] - final[2]))
    if float(np.max(d)) <= 1e-9:
        raise DegenerateBvpError("initial and final states coincide")
    from .lattice import LatticeState  # local import to avoid cycles
    ocp = OcpSpec(
        initial_state=initial,
        start_lattice=LatticeState(0, 0, 0, 0),
        manifold=fixed_manifold(final),
        direction=direction,
        weights=weights,
        params=params,
        tag=tag,
        init_hint={"type": "bvp", "target": final},
    )
    return solve_ocp(ocp, config, warm=warm)
