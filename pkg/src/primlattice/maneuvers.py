"""Maneuver interpretation: principle motion types to boundary-value data.

A maneuver declares a type of motion (straight, heading change, parallel,
circular) for the whole vehicle family.  Interpretation turns each maneuver
into concrete optimal-control problems: an initial state embedded at the
grid origin plus a terminal manifold that fixes some end-state components
and leaves the rest to the optimizer.  Rotational symmetry is accounted for
here: only one representative heading per pi/2-orbit is emitted, the
generation stage rotates the solved motions to the remaining headings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lattice import LatticeSpec, LatticeState, aligned_grid_vector, embed
from .vehicles import (VehicleKind, VehicleParams, equilibrium_configuration,
                       normalize_angle)

TWO_PI = 2.0 * math.pi


class InterpretationError(ValueError):
    """A maneuver cannot be realized on the given lattice."""


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class ManeuverType(str, Enum):
    STRAIGHT = "straight"
    HEADING_CHANGE = "heading_change"
    PARALLEL = "parallel"
    CIRCULAR = "circular"


@dataclass(frozen=True)
class ManeuverSpec:
    """One user-declared maneuver.

    delta_theta is the heading-index offset for heading changes (both signs
    are generated); c_lat the lateral offset in meters for parallel moves;
    steering_transition an optional explicit pair of adjacent steering-level
    indices for circular maneuvers (all compatible adjacent pairs are used
    when omitted).
    """

    type: ManeuverType
    direction: Direction = Direction.FORWARD
    delta_theta: int = 0
    c_lat: float = 0.0
    steering_transition: tuple[int, int] | None = None

    def __post_init__(self):
        if self.type in (ManeuverType.HEADING_CHANGE, ManeuverType.CIRCULAR):
            if self.delta_theta < 1:
                raise ValueError("delta_theta must be a positive heading offset")
        if self.type == ManeuverType.PARALLEL and self.c_lat == 0.0:
            raise ValueError("parallel maneuvers need a nonzero lateral offset")
        if self.steering_transition is not None:
            si, sf = self.steering_transition
            if abs(si - sf) != 1:
                raise ValueError("steering transition indices must be adjacent")


@dataclass(frozen=True)
class TerminalManifold:
    """End-point constraint g(x(T)) = 0 with declared degrees of freedom.

    ``fixed`` holds (component, target) equalities, ``linear_constraints``
    affine rows ax*x + ay*y = b over the position, and ``free`` the
    components left entirely to the optimizer.  Components listed in
    ``angular`` compare with wrap-around.
    """

    fixed: tuple[tuple[int, float], ...]
    free: tuple[int, ...] = ()
    linear_constraints: tuple[tuple[float, float, float], ...] = ()
    angular: tuple[int, ...] = (2,)

    @property
    def codim(self) -> int:
        return len(self.fixed) + len(self.linear_constraints)

    def covered_components(self, n: int) -> dict[int, str]:
        cover: dict[int, str] = {}
        for idx, _ in self.fixed:
            cover[idx] = cover.get(idx, "") + "fixed"
        for idx in self.free:
            cover[idx] = cover.get(idx, "") + "free"
        for ax, ay, _ in self.linear_constraints:
            if abs(ax) > 1e-12:
                cover[0] = cover.get(0, "") + "lin"
            if abs(ay) > 1e-12:
                cover[1] = cover.get(1, "") + "lin"
        return cover

    def check_cover(self, n: int) -> None:
        cover = self.covered_components(n)
        for i in range(n):
            tag = cover.get(i)
            if tag is None:
                raise ValueError(f"terminal component {i} is unconstrained and "
                                 "not declared free")
            if tag not in ("fixed", "free", "lin"):
                raise ValueError(f"terminal component {i} is covered more than once")

    def residual(self, x_T: np.ndarray) -> np.ndarray:
        x_T = np.asarray(x_T, dtype=float)
        out = []
        for idx, target in self.fixed:
            d = x_T[idx] - target
            if idx in self.angular:
                d = normalize_angle(d)
            out.append(d)
        for ax, ay, b in self.linear_constraints:
            out.append(ax * x_T[0] + ay * x_T[1] - b)
        return np.array(out)


def manifold_residual(manifold: TerminalManifold, x_T: np.ndarray) -> np.ndarray:
    """Stacked residuals of the manifold's equalities at a terminal state."""
    return manifold.residual(x_T)


def fixed_manifold(x_target: np.ndarray) -> TerminalManifold:
    """Degenerate manifold pinning every terminal component (plain BVP)."""
    x_target = np.asarray(x_target, dtype=float)
    return TerminalManifold(
        fixed=tuple((i, float(x_target[i])) for i in range(x_target.shape[0])))


@dataclass(frozen=True, eq=False)
class OcpSpec:
    """One boundary-value problem emitted by the interpreter."""

    initial_state: np.ndarray
    start_lattice: LatticeState
    manifold: TerminalManifold
    direction: Direction
    weights: object          # trajopt.ObjectiveWeights
    params: VehicleParams
    tag: str
    init_hint: dict = field(default_factory=dict)


def _terminal_fixed(spec: LatticeSpec, params: VehicleParams, heading: float,
                    alpha_f: float, extra: dict[int, float] | None = None):
    """Fixed rows shared by all maneuvers: heading, joints, steering, rate."""
    rows: dict[int, float] = {} if extra is None else dict(extra)
    rows[2] = normalize_angle(heading)
    if params.kind == VehicleKind.TWO_TRAILER:
        b3, b2 = equilibrium_configuration(alpha_f, params)
        rows[3] = b3
        rows[4] = b2
    rows[params.alpha_index] = alpha_f
    rows[params.omega_index] = 0.0
    return tuple(sorted(rows.items()))


def parallel_line(heading: float, c_lat: float, form: str = "lateral"):
    """Coefficients (ax, ay, b) of the parallel maneuver's terminal line.

    ``lateral`` measures the offset perpendicular to the heading
    (-sin(t)*x + cos(t)*y = c_lat, positive to the left).  ``printed`` keeps
    the swapped-trig variant sin(t)*x + cos(t)*y = c_lat that some references
    state; both coincide at heading 0.
    """
    if form == "lateral":
        return (-math.sin(heading), math.cos(heading), c_lat)
    if form == "printed":
        return (math.sin(heading), math.cos(heading), c_lat)
    raise ValueError(f"unknown parallel line form {form!r}")


def _parallel_representable(spec: LatticeSpec, heading_idx: int, c_lat: float) -> bool:
    i, j = aligned_grid_vector(spec.headings[heading_idx])
    m = c_lat * math.hypot(i, j) / spec.r
    return abs(m - round(m)) <= 1e-9


def _signed_heading_change(spec: LatticeSpec, k: int, f: int, sign: int) -> float:
    d = (spec.headings[f] - spec.headings[k]) % TWO_PI
    if sign > 0:
        return d if d > 1e-12 else TWO_PI
    return d - TWO_PI if d > 1e-12 else -TWO_PI


def _circular_transitions(spec: LatticeSpec, m: ManeuverSpec, sign: int):
    """Adjacent steering-level pairs compatible with the turn direction."""
    if m.steering_transition is not None:
        si, sf = m.steering_transition
        if not (0 <= si < spec.n_steering and 0 <= sf < spec.n_steering):
            raise InterpretationError("steering transition index out of range")
        outer = max(spec.steering_levels[si], spec.steering_levels[sf],
                    key=abs)
        if (outer > 0 and sign > 0) or (outer < 0 and sign < 0):
            return [(si, sf)]
        return []
    z = spec.zero_steering_idx
    pairs = []
    if sign > 0 and z + 1 < spec.n_steering:
        pairs = [(z, z + 1), (z + 1, z)]
    elif sign < 0 and z - 1 >= 0:
        pairs = [(z, z - 1), (z - 1, z)]
    return pairs


def interpret(maneuvers: list[ManeuverSpec], spec: LatticeSpec,
              params: VehicleParams, objective, reduce_symmetry: bool = True,
              parallel_form: str = "lateral") -> list[OcpSpec]:
    """Compile maneuvers into the list of OCPs to solve.

    One OcpSpec is emitted per (maneuver, applicable initial heading, sign),
    restricted to one representative heading per rotation orbit unless
    ``reduce_symmetry`` is disabled.  The emission order is deterministic.
    """
    if not maneuvers:
        raise InterpretationError("maneuver list is empty")
    if spec.kind != params.kind:
        raise InterpretationError("lattice and vehicle kinds differ")
    n_head = spec.n_headings
    heads = (spec.orbit_representatives() if reduce_symmetry else range(n_head))
    z_idx = spec.zero_steering_idx
    out: list[OcpSpec] = []

    def emit(m, k, manifold, tag, hint, steering_idx=None):
        si = z_idx if steering_idx is None else steering_idx
        start = LatticeState(0, 0, k, si)
        out.append(OcpSpec(
            initial_state=embed(start, spec, params),
            start_lattice=start,
            manifold=manifold,
            direction=m.direction,
            weights=objective,
            params=params,
            tag=tag,
            init_hint=hint,
        ))

    for m in maneuvers:
        d_abbr = "fwd" if m.direction == Direction.FORWARD else "bwd"
        if m.type == ManeuverType.STRAIGHT:
            for k in heads:
                i, j = aligned_grid_vector(spec.headings[k])
                sgn = 1 if m.direction == Direction.FORWARD else -1
                target = np.array(embed(LatticeState(sgn * i, sgn * j, k, z_idx),
                                        spec, params))
                manifold = fixed_manifold(target)
                emit(m, k, manifold, f"straight/{d_abbr}/h{k}",
                     {"type": "straight", "target_xy": (target[0], target[1])})
        elif m.type == ManeuverType.HEADING_CHANGE:
            if not 1 <= m.delta_theta <= n_head // 2:
                raise InterpretationError(
                    f"delta_theta {m.delta_theta} out of range for "
                    f"{n_head} headings")
            for k in heads:
                for sign in (1, -1):
                    f = (k + sign * m.delta_theta) % n_head
                    if sign < 0 and f == (k + m.delta_theta) % n_head:
                        continue   # delta of half a turn: +/- coincide
                    manifold = TerminalManifold(
                        fixed=_terminal_fixed(spec, params, spec.headings[f], 0.0),
                        free=(0, 1))
                    dth = _signed_heading_change(spec, k, f, sign)
                    emit(m, k, manifold,
                         f"heading_change({sign * m.delta_theta:+d})/{d_abbr}/h{k}",
                         {"type": "arc", "dtheta": dth})
        elif m.type == ManeuverType.PARALLEL:
            applicable = [k for k in heads
                          if _parallel_representable(spec, k, m.c_lat)]
            if not all(_parallel_representable(spec, k, m.c_lat)
                       for k in range(n_head)) and not applicable:
                raise InterpretationError(
                    f"lateral offset {m.c_lat} m is not representable on any "
                    "line of grid points")
            for k in applicable:
                th = spec.headings[k]
                line = parallel_line(th, m.c_lat, parallel_form)
                covered = tuple(c for c, coef in ((0, line[0]), (1, line[1]))
                                if abs(coef) > 1e-12)
                free = tuple(c for c in (0, 1) if c not in covered)
                manifold = TerminalManifold(
                    fixed=_terminal_fixed(spec, params, th, 0.0),
                    free=free, linear_constraints=(line,))
                emit(m, k, manifold,
                     f"parallel({m.c_lat:+g})/{d_abbr}/h{k}",
                     {"type": "parallel", "c_lat": m.c_lat, "line": line})
        elif m.type == ManeuverType.CIRCULAR:
            if not 1 <= m.delta_theta <= n_head // 2:
                raise InterpretationError(
                    f"delta_theta {m.delta_theta} out of range for "
                    f"{n_head} headings")
            for k in heads:
                for sign in (1, -1):
                    f = (k + sign * m.delta_theta) % n_head
                    if sign < 0 and f == (k + m.delta_theta) % n_head:
                        continue
                    for si, sf in _circular_transitions(spec, m, sign):
                        alpha_f = spec.steering_levels[sf]
                        manifold = TerminalManifold(
                            fixed=_terminal_fixed(spec, params,
                                                  spec.headings[f], alpha_f),
                            free=(0, 1))
                        dth = _signed_heading_change(spec, k, f, sign)
                        emit(m, k, manifold,
                             f"circular({sign * m.delta_theta:+d},a{si}->a{sf})"
                             f"/{d_abbr}/h{k}",
                             {"type": "arc", "dtheta": dth}, steering_idx=si)
        else:  # pragma: no cover
            raise InterpretationError(f"unknown maneuver type {m.type}")

    for ocp in out:
        ocp.manifold.check_cover(params.n_states)
    return out


def maneuvers_from_config(entries: list[dict]) -> list[ManeuverSpec]:
    """Expand maneuver file entries into concrete ManeuverSpecs.

    Heading changes and circular maneuvers accept either ``delta_theta`` or
    ``delta_theta_max`` (expands to the full range 1..max); parallel entries
    accept ``c_lat_m`` as a value or list.  ``directions`` defaults to
    forward only.
    """
    specs: list[ManeuverSpec] = []
    for e in entries:
        mtype = ManeuverType(e["type"])
        directions = [Direction(d) for d in e.get("directions", ["forward"])]
        if mtype == ManeuverType.STRAIGHT:
            for d in directions:
                specs.append(ManeuverSpec(type=mtype, direction=d))
        elif mtype in (ManeuverType.HEADING_CHANGE, ManeuverType.CIRCULAR):
            if "delta_theta_max" in e:
                deltas = list(range(1, int(e["delta_theta_max"]) + 1))
            else:
                deltas = [int(e["delta_theta"])]
            trans = e.get("steering_transition")
            for d in directions:
                for dt in deltas:
                    specs.append(ManeuverSpec(
                        type=mtype, direction=d, delta_theta=dt,
                        steering_transition=tuple(trans) if trans else None))
        elif mtype == ManeuverType.PARALLEL:
            c_vals = e["c_lat_m"]
            if not isinstance(c_vals, list):
                c_vals = [c_vals]
            for d in directions:
                for c in c_vals:
                    specs.append(ManeuverSpec(type=mtype, direction=d,
                                              c_lat=float(c)))
    if not specs:
        raise InterpretationError("maneuver configuration expands to nothing")
    return specs
