"""Kinematic models for the supported vehicle family.

Two instances are covered: a car-like vehicle (also used for trucks without
trailers) and a general 2-trailer combination with a car-like truck, dolly
and trailer.  Both share the same control vector (longitudinal velocity v1
and steering angle acceleration u_alpha), so the rest of the pipeline treats
them uniformly through :class:`VehicleParams`.

State layouts (all angles in rad, positions in m):

* car-like:    (x1, y1, theta1, alpha, omega)
* 2-trailer:   (x3, y3, theta3, beta3, beta2, alpha, omega)

where (x3, y3) is the center of the trailer's rear axle, beta3/beta2 are the
joint angles at the trailer and dolly couplings, alpha is the truck steering
angle and omega its rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi


class VehicleKind(str, Enum):
    CAR_LIKE = "car_like"
    TWO_TRAILER = "two_trailer"


class ModelDomainError(ValueError):
    """A state outside the kinematic model's validity region (jack-knife)."""


class EquilibriumNotFound(RuntimeError):
    """The circular-equilibrium root find did not converge."""


def normalize_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = a % TWO_PI
    if r > math.pi:
        r -= TWO_PI
    return r


def angle_diff(a: float, b: float) -> float:
    """Signed difference a - b wrapped to (-pi, pi]."""
    return normalize_angle(a - b)


@dataclass(frozen=True)
class VehicleParams:
    """Geometric and actuator parameters identifying a system instance.

    L1 is the truck/car wheel base.  For the 2-trailer system L2 is the dolly
    drawbar length, L3 the trailer wheel base and M1 the (signed) off-axle
    hitch offset; M1 > 0 places the hitch behind the truck's rear axle.
    """

    kind: VehicleKind
    L1: float
    L2: float = 0.0
    L3: float = 0.0
    M1: float = 0.0
    alpha_max: float = math.pi / 4        # rad
    omega_max: float = 0.5                # rad/s
    u_alpha_max: float = 40.0             # rad/s^2
    v_set: tuple[float, ...] = (1.0, -1.0)  # m/s

    def __post_init__(self):
        if self.L1 <= 0.0:
            raise ValueError("L1 must be positive")
        if self.kind == VehicleKind.TWO_TRAILER and (self.L2 <= 0.0 or self.L3 <= 0.0):
            raise ValueError("L2 and L3 must be positive for the 2-trailer model")
        if not 0.0 < self.alpha_max < math.pi / 2:
            raise ValueError("alpha_max must lie in (0, pi/2)")
        if self.omega_max <= 0.0 or self.u_alpha_max <= 0.0:
            raise ValueError("omega_max and u_alpha_max must be positive")
        if len(self.v_set) == 0 or any(v == 0.0 or not math.isfinite(v) for v in self.v_set):
            raise ValueError("v_set must be a nonzero finite speed set")

    @property
    def n_states(self) -> int:
        return 5 if self.kind == VehicleKind.CAR_LIKE else 7

    @property
    def alpha_index(self) -> int:
        return 3 if self.kind == VehicleKind.CAR_LIKE else 5

    @property
    def omega_index(self) -> int:
        return self.alpha_index + 1

    def speed(self, forward: bool) -> float:
        """Signed longitudinal speed used for the given motion direction."""
        if forward:
            speeds = [v for v in self.v_set if v > 0.0]
            if not speeds:
                raise ValueError("v_set contains no forward speed")
            return max(speeds)
        speeds = [v for v in self.v_set if v < 0.0]
        if not speeds:
            raise ValueError("v_set contains no backward speed")
        return min(speeds)

    def as_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "L1_m": self.L1,
            "alpha_max_rad": self.alpha_max,
            "omega_max_rad_s": self.omega_max,
            "u_alpha_max_rad_s2": self.u_alpha_max,
            "v_set_m_s": [float(v) for v in self.v_set],
        }
        if self.kind == VehicleKind.TWO_TRAILER:
            d["L2_m"] = self.L2
            d["L3_m"] = self.L3
            d["M1_m"] = self.M1
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleParams":
        kind = VehicleKind(d["kind"])
        return cls(
            kind=kind,
            L1=float(d["L1_m"]),
            L2=float(d.get("L2_m", 0.0)),
            L3=float(d.get("L3_m", 0.0)),
            M1=float(d.get("M1_m", 0.0)),
            alpha_max=float(d["alpha_max_rad"]),
            omega_max=float(d["omega_max_rad_s"]),
            u_alpha_max=float(d["u_alpha_max_rad_s2"]),
            v_set=tuple(float(v) for v in d["v_set_m_s"]),
        )

    def pack_lengths(self) -> np.ndarray:
        """Length parameters as the flat array the rollout kernels expect."""
        return np.array([self.L1, self.L2, self.L3, self.M1], dtype=float)


def _check_state_dim(state: np.ndarray, params: VehicleParams) -> None:
    if state.shape != (params.n_states,):
        raise ValueError(
            f"state has shape {state.shape}, expected ({params.n_states},) "
            f"for kind {params.kind.value}")


def dynamics(state: np.ndarray, control, params: VehicleParams) -> np.ndarray:
    """Time derivative of the state under control (v1, u_alpha).

    Raises :class:`ModelDomainError` if a joint angle of the 2-trailer system
    is at or beyond pi/2, where the model degenerates.
    """
    state = np.asarray(state, dtype=float)
    _check_state_dim(state, params)
    v1, u_alpha = float(control[0]), float(control[1])
    f = np.zeros_like(state)

    if params.kind == VehicleKind.CAR_LIKE:
        x1, y1, th1, alpha, omega = state
        f[0] = v1 * math.cos(th1)
        f[1] = v1 * math.sin(th1)
        f[2] = v1 * math.tan(alpha) / params.L1
        f[3] = omega
        f[4] = u_alpha
        return f

    x3, y3, th3, b3, b2, alpha, omega = state
    if abs(b3) >= math.pi / 2 or abs(b2) >= math.pi / 2:
        raise ModelDomainError(
            f"joint angles (beta3={b3:.3f}, beta2={b2:.3f}) outside the "
            "model's validity region |beta| < pi/2")
    L1, L2, L3, M1 = params.L1, params.L2, params.L3, params.M1
    c3, s3 = math.cos(b3), math.sin(b3)
    c2, s2 = math.cos(b2), math.sin(b2)
    t2 = math.tan(b2)
    ta = math.tan(alpha)
    k = M1 / L1
    g = 1.0 + k * t2 * ta
    f[0] = v1 * c3 * c2 * g * math.cos(th3)
    f[1] = v1 * c3 * c2 * g * math.sin(th3)
    f[2] = v1 * s3 * c2 * g / L3
    f[3] = v1 * c2 * ((t2 - k * ta) / L2 - (s3 / L3) * g)
    f[4] = v1 * (ta / L1 - s2 / L2 + (k / L2) * c2 * ta)
    f[5] = omega
    f[6] = u_alpha
    return f


def dynamics_jacobian(state: np.ndarray, control, params: VehicleParams):
    """Jacobians (df/dx, df/du_alpha) of :func:`dynamics`.

    v1 is treated as a fixed mode, so only the u_alpha column is returned
    for the control.
    """
    state = np.asarray(state, dtype=float)
    _check_state_dim(state, params)
    v1 = float(control[0])
    n = params.n_states
    jx = np.zeros((n, n))
    ju = np.zeros(n)

    if params.kind == VehicleKind.CAR_LIKE:
        th1, alpha = state[2], state[3]
        sec2a = 1.0 / math.cos(alpha) ** 2
        jx[0, 2] = -v1 * math.sin(th1)
        jx[1, 2] = v1 * math.cos(th1)
        jx[2, 3] = v1 * sec2a / params.L1
        jx[3, 4] = 1.0
        ju[4] = 1.0
        return jx, ju

    th3, b3, b2, alpha = state[2], state[3], state[4], state[5]
    L1, L2, L3, M1 = params.L1, params.L2, params.L3, params.M1
    c3, s3 = math.cos(b3), math.sin(b3)
    c2, s2 = math.cos(b2), math.sin(b2)
    t2 = math.tan(b2)
    ta = math.tan(alpha)
    sec2a = 1.0 + ta * ta
    k = M1 / L1
    g = 1.0 + k * t2 * ta
    cth, sth = math.cos(th3), math.sin(th3)
    # d(c2*g)/db2 = -s2*g + k*ta/c2,  d(g)/dalpha = k*t2*sec2a
    dc2g_db2 = -s2 * g + k * ta / c2
    # rows x3, y3: v * c3 * (c2 g) * {cos,sin}(th3)
    jx[0, 2] = -v1 * c3 * c2 * g * sth
    jx[0, 3] = -v1 * s3 * c2 * g * cth
    jx[0, 4] = v1 * c3 * dc2g_db2 * cth
    jx[0, 5] = v1 * c3 * c2 * k * t2 * sec2a * cth
    jx[1, 2] = v1 * c3 * c2 * g * cth
    jx[1, 3] = -v1 * s3 * c2 * g * sth
    jx[1, 4] = v1 * c3 * dc2g_db2 * sth
    jx[1, 5] = v1 * c3 * c2 * k * t2 * sec2a * sth
    # row theta3: v * s3 * (c2 g) / L3
    jx[2, 3] = v1 * c3 * c2 * g / L3
    jx[2, 4] = v1 * s3 * dc2g_db2 / L3
    jx[2, 5] = v1 * s3 * c2 * k * t2 * sec2a / L3
    # row beta3: v * [ (s2 - c2 k ta)/L2 ... ] written as c2(t2 - k ta)/L2 - (s3/L3) c2 g
    jx[3, 3] = -v1 * (c3 / L3) * c2 * g
    jx[3, 4] = v1 * ((c2 + s2 * k * ta) / L2 - (s3 / L3) * dc2g_db2)
    jx[3, 5] = -v1 * k * sec2a * (c2 / L2 + (s3 / L3) * c2 * t2)
    # row beta2: v * (ta/L1 - s2/L2 + (k/L2) c2 ta)
    jx[4, 4] = v1 * (-c2 / L2 - (k / L2) * s2 * ta)
    jx[4, 5] = v1 * sec2a * (1.0 / L1 + k * c2 / L2)
    jx[5, 6] = 1.0
    ju[6] = 1.0
    return jx, ju


def equilibrium_configuration(alpha_e: float, params: VehicleParams) -> tuple[float, float]:
    """Joint angles (beta3_e, beta2_e) of the circular equilibrium.

    At the returned configuration a constant steering angle alpha_e keeps
    both joint angles constant, so every axle traces a circle.  beta2 solves
    the scalar condition beta2' = 0 (Newton, started at 0); beta3 then
    follows in closed form from beta3' = 0.
    """
    if params.kind != VehicleKind.TWO_TRAILER:
        raise ValueError("equilibrium configurations apply to the 2-trailer model")
    if abs(alpha_e) > params.alpha_max + 1e-12:
        raise ValueError("alpha_e exceeds alpha_max")
    L1, L2, L3, M1 = params.L1, params.L2, params.L3, params.M1
    ta = math.tan(alpha_e)
    k = M1 / L1

    b2 = 0.0
    converged = False
    for _ in range(60):
        r = ta / L1 - math.sin(b2) / L2 + (k / L2) * math.cos(b2) * ta
        dr = -math.cos(b2) / L2 - (k / L2) * math.sin(b2) * ta
        step = r / dr
        b2 -= step
        if abs(step) < 1e-15:
            converged = True
            break
    if not converged or abs(b2) >= math.pi / 2:
        raise EquilibriumNotFound(f"no equilibrium joint angle for alpha_e={alpha_e}")

    t2 = math.tan(b2)
    g = 1.0 + k * t2 * ta
    arg = L3 * (t2 - k * ta) / (L2 * g)
    if abs(arg) > 1.0:
        raise EquilibriumNotFound(f"no equilibrium trailer angle for alpha_e={alpha_e}")
    b3 = math.asin(arg)
    return b3, b2


def max_equilibrium_steering(params: VehicleParams, tol: float = 1e-6) -> float:
    """Largest steering angle admitting a circular equilibrium.

    Long trailers saturate the trailer joint angle before alpha_max is
    reached; arcs beyond this steering cannot be tracked at equilibrium.
    """
    if params.kind != VehicleKind.TWO_TRAILER:
        return params.alpha_max

    def feasible(a: float) -> bool:
        try:
            equilibrium_configuration(a, params)
            return True
        except EquilibriumNotFound:
            return False

    hi = params.alpha_max
    if feasible(hi):
        return hi
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def validate(state: np.ndarray, control, params: VehicleParams) -> bool:
    """True iff the state/control pair satisfies the actuator bounds."""
    state = np.asarray(state, dtype=float)
    alpha = state[params.alpha_index]
    omega = state[params.omega_index]
    u_alpha = float(control[1])
    return (abs(alpha) <= params.alpha_max
            and abs(omega) <= params.omega_max
            and abs(u_alpha) <= params.u_alpha_max)


def rotate_state(state: np.ndarray, quarter_turns: int) -> np.ndarray:
    """Rotate a state by quarter_turns * 90 degrees about the origin.

    Positions use the exact integer rotation, the heading is shifted and
    re-normalized; steering, rate and joint angles are rotation invariant.
    """
    k = quarter_turns % 4
    out = np.array(state, dtype=float)
    x, y = out[0], out[1]
    for _ in range(k):
        x, y = -y, x
    out[0], out[1] = x, y
    out[2] = normalize_angle(out[2] + k * math.pi / 2)
    return out


def body_poses(state: np.ndarray, params: VehicleParams) -> list[tuple[float, float, float]]:
    """Poses (x, y, theta) of each rigid body, tractor first.

    For the car-like model this is the single body at the rear axle.  For the
    2-trailer system the truck and dolly poses are reconstructed from the
    trailer state via the joint angles and the coupling geometry.
    """
    state = np.asarray(state, dtype=float)
    _check_state_dim(state, params)
    if params.kind == VehicleKind.CAR_LIKE:
        return [(state[0], state[1], state[2])]
    x3, y3, th3, b3, b2 = state[0], state[1], state[2], state[3], state[4]
    th2 = th3 + b3
    th1 = th2 + b2
    p2x = x3 + params.L3 * math.cos(th3)
    p2y = y3 + params.L3 * math.sin(th3)
    hx = p2x + params.L2 * math.cos(th2)
    hy = p2y + params.L2 * math.sin(th2)
    p1x = hx + params.M1 * math.cos(th1)
    p1y = hy + params.M1 * math.sin(th1)
    return [(p1x, p1y, th1), (p2x, p2y, th2), (x3, y3, th3)]
