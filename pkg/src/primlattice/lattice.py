"""Discrete search space: position grid, heading set and steering levels.

A lattice state is (ix, iy, heading_idx, steering_idx).  Its continuous
embedding places the position at (ix*r, iy*r), the heading at the indexed
member of the heading set, the steering angle at the indexed equilibrium
steering level, and the steering rate at zero.  For the 2-trailer system the
joint angles are implied by the steering level through the circular
equilibrium, which keeps the discretized state five dimensional for both
vehicle kinds.

Heading sets must be closed under rotation by pi/2 so that primitives can be
generated for one representative heading per rotation orbit and expanded by
symmetry afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .vehicles import (VehicleKind, VehicleParams, equilibrium_configuration,
                       normalize_angle)

TWO_PI = 2.0 * math.pi
_ANGLE_TOL = 1e-9


class LatticeError(ValueError):
    """Invalid lattice configuration."""


@dataclass(frozen=True)
class LatticeState:
    ix: int
    iy: int
    heading_idx: int
    steering_idx: int

    def as_list(self) -> list[int]:
        return [self.ix, self.iy, self.heading_idx, self.steering_idx]


@dataclass(frozen=True)
class LatticeSpec:
    """Discretization: position resolution r, heading set, steering levels."""

    r: float
    headings: tuple[float, ...]
    steering_levels: tuple[float, ...]
    kind: VehicleKind

    def __post_init__(self):
        if self.r <= 0.0:
            raise LatticeError("position resolution r must be positive")
        th = list(self.headings)
        n = len(th)
        if n % 4 != 0 or n == 0:
            raise LatticeError("heading count must be a positive multiple of 4")
        if any(not 0.0 <= a < TWO_PI for a in th):
            raise LatticeError("headings must lie in [0, 2*pi)")
        if any(th[i + 1] - th[i] <= _ANGLE_TOL for i in range(n - 1)):
            raise LatticeError("headings must be strictly increasing and distinct")
        # closure under +pi/2: sorted order is quadrant periodic
        q = n // 4
        for k in range(n):
            want = (th[k] + math.pi / 2.0) % TWO_PI
            have = th[(k + q) % n]
            if abs(normalize_angle(want - have)) > _ANGLE_TOL:
                raise LatticeError("heading set is not closed under rotation by pi/2")
        phi = list(self.steering_levels)
        if not any(abs(a) <= _ANGLE_TOL for a in phi):
            raise LatticeError("steering levels must contain 0")
        for a in phi:
            if not any(abs(a + b) <= _ANGLE_TOL for b in phi):
                raise LatticeError("steering levels must be symmetric about 0")
        if any(phi[i + 1] - phi[i] <= 0 for i in range(len(phi) - 1)):
            raise LatticeError("steering levels must be strictly increasing")

    @property
    def n_headings(self) -> int:
        return len(self.headings)

    @property
    def n_steering(self) -> int:
        return len(self.steering_levels)

    @property
    def zero_steering_idx(self) -> int:
        for i, a in enumerate(self.steering_levels):
            if abs(a) <= _ANGLE_TOL:
                return i
        raise LatticeError("steering levels must contain 0")

    def orbit_representatives(self) -> range:
        """One heading index per pi/2-rotation orbit (first quadrant)."""
        return range(self.n_headings // 4)

    def heading_index(self, angle: float) -> int:
        for k, a in enumerate(self.headings):
            if abs(normalize_angle(a - angle)) <= _ANGLE_TOL:
                return k
        raise LatticeError(f"heading {angle!r} is not a member of the lattice")

    def steering_index(self, value: float) -> int:
        for k, a in enumerate(self.steering_levels):
            if abs(a - value) <= _ANGLE_TOL:
                return k
        raise LatticeError(f"steering angle {value!r} is not a lattice level")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "r_m": self.r,
            "headings_rad": [float(a) for a in self.headings],
            "steering_levels_rad": [float(a) for a in self.steering_levels],
        }

    @classmethod
    def from_dict(cls, d: dict, params: VehicleParams | None = None) -> "LatticeSpec":
        """Build from a JSON document.

        Headings may be given explicitly (``headings_rad``) or as a count
        (``n_headings``).  Steering levels may be explicit
        (``steering_levels_rad``) or generated from ``n_steering`` and
        ``turning_radius_m``, which requires the vehicle parameters.
        """
        kind = VehicleKind(d["kind"])
        if "headings_rad" in d:
            headings = tuple(float(a) for a in d["headings_rad"])
        else:
            headings = default_heading_set(int(d["n_headings"]))
        if "steering_levels_rad" in d:
            steering = tuple(float(a) for a in d["steering_levels_rad"])
        else:
            if params is None:
                raise LatticeError("generated steering levels need vehicle parameters")
            steering = default_steering_set(
                params, n_levels=int(d.get("n_steering", 3)),
                turning_radius=float(d.get("turning_radius_m", 20.0)))
        return cls(r=float(d["r_m"]), headings=headings,
                   steering_levels=steering, kind=kind)


def default_heading_set(n: int) -> tuple[float, ...]:
    """Standard heading sets closed under rotation by pi/2.

    n = 16 gives the irregular set spanned by the integer vectors
    (1,0), (2,1), (1,1), (1,2) and their axis rotations, which admits a short
    straight grid motion from every heading.  Other multiples of 4 give the
    regular set {2*pi*k/n}.
    """
    if n == 16:
        base = [0.0, math.atan2(1.0, 2.0), math.pi / 4.0, math.atan2(2.0, 1.0)]
    elif n > 0 and n % 4 == 0:
        base = [TWO_PI * k / n for k in range(n // 4)]
    else:
        raise LatticeError(
            f"heading count {n} cannot be closed under rotation by pi/2")
    out = []
    for k in range(4):
        for b in base:
            out.append((b + k * (math.pi / 2.0)) % TWO_PI)
    return tuple(sorted(out))


def default_steering_set(params: VehicleParams, n_levels: int = 3,
                         turning_radius: float = 20.0) -> tuple[float, ...]:
    """Symmetric steering levels; the extreme level turns at the given radius."""
    if n_levels < 1 or n_levels % 2 == 0:
        raise LatticeError("steering level count must be odd (0 is required)")
    if n_levels == 1:
        return (0.0,)
    a0 = math.atan2(params.L1, turning_radius)
    if a0 > params.alpha_max:
        raise LatticeError("turning radius violates the steering limit")
    half = n_levels // 2
    levels = [a0 * j / half for j in range(-half, half + 1)]
    levels[half] = 0.0
    return tuple(levels)


def aligned_grid_vector(theta: float, max_component: int = 8) -> tuple[int, int]:
    """Smallest integer grid vector aligned with the heading theta."""
    best = None
    for i in range(-max_component, max_component + 1):
        for j in range(-max_component, max_component + 1):
            if i == 0 and j == 0:
                continue
            if abs(i * math.sin(theta) - j * math.cos(theta)) > _ANGLE_TOL:
                continue
            if i * math.cos(theta) + j * math.sin(theta) <= 0.0:
                continue
            norm = i * i + j * j
            if best is None or norm < best[0]:
                best = (norm, i, j)
    if best is None:
        raise LatticeError(
            f"no integer grid vector within +-{max_component} aligns with "
            f"heading {theta!r}")
    return best[1], best[2]


def embed(ls: LatticeState, spec: LatticeSpec, params: VehicleParams) -> np.ndarray:
    """Continuous state of a lattice state (joints at circular equilibrium)."""
    if not (0 <= ls.heading_idx < spec.n_headings
            and 0 <= ls.steering_idx < spec.n_steering):
        raise LatticeError(f"lattice state {ls} has out-of-range indices")
    if spec.kind != params.kind:
        raise LatticeError("lattice and vehicle kinds differ")
    alpha = spec.steering_levels[ls.steering_idx]
    heading = normalize_angle(spec.headings[ls.heading_idx])
    if params.kind == VehicleKind.CAR_LIKE:
        return np.array([ls.ix * spec.r, ls.iy * spec.r, heading, alpha, 0.0])
    b3, b2 = equilibrium_configuration(alpha, params)
    return np.array([ls.ix * spec.r, ls.iy * spec.r, heading, b3, b2, alpha, 0.0])


def rotate_lattice_state(ls: LatticeState, spec: LatticeSpec,
                         quarter_turns: int) -> LatticeState:
    """Rotate by quarter_turns * 90 degrees about the grid origin."""
    k = quarter_turns % 4
    ix, iy = ls.ix, ls.iy
    for _ in range(k):
        ix, iy = -iy, ix
    q = spec.n_headings // 4
    return LatticeState(ix, iy, (ls.heading_idx + k * q) % spec.n_headings,
                        ls.steering_idx)


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, u, w) with u*a + w*b = g = gcd(a, b)."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_w, w = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_u, u = u, old_u - q * u
        old_w, w = w, old_w - q * w
    return old_r, old_u, old_w


def lattice_points_on_line(ax: float, ay: float, b: float, r: float,
                           near_xy: tuple[float, float]) -> list[tuple[int, int]]:
    """The two grid index pairs on the line ax*x + ay*y = b nearest a point.

    The line must actually contain grid points; a line with no integer
    solutions raises :class:`LatticeError`.
    """
    dir_angle = math.atan2(ax, -ay)          # direction (-ay, ax)
    di, dj = aligned_grid_vector(dir_angle)
    # integer normal (-dj, di) is parallel to (ax, ay); project the line's
    # closest-to-origin point to get the integer offset
    scale = ax * ax + ay * ay
    px, py = b * ax / scale, b * ay / scale  # a point on the line (meters)
    m_real = -dj * (px / r) + di * (py / r)
    m = round(m_real)
    if abs(m_real - m) > 1e-6:
        raise LatticeError("line contains no lattice points")
    g, u, w = _ext_gcd(-dj, di)
    if g < 0:
        g, u, w = -g, -u, -w
    if m % g != 0:
        raise LatticeError("line contains no lattice points")
    bx, by = u * (m // g), w * (m // g)
    t_star = ((near_xy[0] / r - bx) * di + (near_xy[1] / r - by) * dj) / (di * di + dj * dj)
    cands = []
    for t in {math.floor(t_star), math.ceil(t_star)}:
        cands.append((bx + t * di, by + t * dj))
    return cands


def snap_candidates(x_cont: np.ndarray, spec: LatticeSpec, manifold) -> list[LatticeState]:
    """Nearest lattice end-state candidates for a continuous end state.

    Heading and steering are taken from the manifold's fixed components
    (they are lattice valued by construction).  Candidate positions are the
    surrounding grid corners for a free position, the two nearest grid
    points on the constraint line when the position is confined to one, or
    the single fixed point.  Ordered by ascending position distance, ties
    broken by (ix, iy).
    """
    x_cont = np.asarray(x_cont, dtype=float)
    fixed = dict(manifold.fixed)
    alpha_comp = 3 if spec.kind == VehicleKind.CAR_LIKE else 5

    heading_idx = (spec.heading_index(fixed[2]) if 2 in fixed
                   else _nearest_heading(spec, x_cont[2]))
    steering_idx = (spec.steering_index(fixed[alpha_comp]) if alpha_comp in fixed
                    else _nearest_steering(spec, x_cont[alpha_comp]))

    r = spec.r
    if 0 in fixed and 1 in fixed:
        pairs = [(round(fixed[0] / r), round(fixed[1] / r))]
    elif manifold.linear_constraints:
        ax, ay, b = manifold.linear_constraints[0]
        pairs = lattice_points_on_line(ax, ay, b, r, (x_cont[0], x_cont[1]))
    else:
        fx, fy = x_cont[0] / r, x_cont[1] / r
        pairs = [(ix, iy)
                 for ix in {math.floor(fx), math.ceil(fx)}
                 for iy in {math.floor(fy), math.ceil(fy)}]

    def dist(p):
        return math.hypot(p[0] * r - x_cont[0], p[1] * r - x_cont[1])

    pairs = sorted(set(pairs), key=lambda p: (dist(p), p[0], p[1]))
    return [LatticeState(ix, iy, heading_idx, steering_idx) for ix, iy in pairs]


def _nearest_heading(spec: LatticeSpec, angle: float) -> int:
    return min(range(spec.n_headings),
               key=lambda k: abs(normalize_angle(spec.headings[k] - angle)))


def _nearest_steering(spec: LatticeSpec, value: float) -> int:
    return min(range(spec.n_steering),
               key=lambda k: abs(spec.steering_levels[k] - value))
