"""Motion primitive generation.

The pipeline interprets the declared maneuvers into OCPs, solves each one,
restores lattice connectivity with the rounding step (re-solving the
fixed-endpoint problem at the nearest grid candidates and keeping the
cheapest), and expands every solved representative to the remaining headings
by the quarter-turn rotations.  An exhaustive baseline in the style of the
classical generators (fixed-endpoint attempts to every candidate in a box,
ordered by distance) is included for comparison runs.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import LatticeSpec, LatticeState, embed, rotate_lattice_state
from .maneuvers import Direction, OcpSpec, interpret
from .trajopt import (DegenerateBvpError, SolverConfig, Trajectory,
                      evaluate_objective, solve_bvp, solve_ocp)
from .vehicles import VehicleParams, normalize_angle


class GenerationError(RuntimeError):
    """The pipeline produced no primitives at all."""


@dataclass
class MotionPrimitive:
    """A lattice-to-lattice motion with its stage cost.

    The start state always sits at the grid origin; planners translate the
    trajectory to any anchor with the same heading and steering indices.
    """

    prim_id: int
    start: LatticeState
    end: LatticeState
    trajectory: Trajectory
    cost: float
    maneuver_tag: str
    rotation: int = 0          # quarter turns applied to the solved motion
    rep_id: int = 0            # index of the originating OCP

    @property
    def direction(self) -> Direction:
        return self.trajectory.direction


@dataclass
class PrimitiveSet:
    lattice: LatticeSpec
    params: VehicleParams
    weights: object
    primitives: list[MotionPrimitive]
    k_intervals: int
    substeps: int

    def __post_init__(self):
        self._index: dict[tuple[int, int], list[MotionPrimitive]] = {}
        for p in self.primitives:
            key = (p.start.heading_idx, p.start.steering_idx)
            self._index.setdefault(key, []).append(p)

    @property
    def index(self) -> dict[tuple[int, int], list[MotionPrimitive]]:
        return self._index

    def applicable(self, state: LatticeState) -> list[MotionPrimitive]:
        return self._index.get((state.heading_idx, state.steering_idx), [])

    def connectivity(self) -> list[tuple[LatticeState, LatticeState, Direction, str]]:
        """Start/end pairs of the solved representatives (rotation 0)."""
        return [(p.start, p.end, p.direction, p.maneuver_tag)
                for p in self.primitives if p.rotation == 0]


@dataclass
class GenerationReport:
    n_ocp: int
    n_prim: int
    n_infeasible: int
    wall_time: float
    per_maneuver: list[dict] = field(default_factory=list)
    infeasible_log: list[dict] = field(default_factory=list)
    partial: bool = False

    def as_dict(self) -> dict:
        return {
            "schema": "generation-report/1",
            "n_ocp": self.n_ocp,
            "n_prim": self.n_prim,
            "n_infeasible": self.n_infeasible,
            "wall_time_s": self.wall_time,
            "per_maneuver": self.per_maneuver,
            "infeasible_log": self.infeasible_log,
            "partial": self.partial,
        }


def rotate_trajectory(traj: Trajectory, quarter_turns: int) -> Trajectory:
    """Rotate a trajectory about the origin by exact quarter turns."""
    k = quarter_turns % 4
    knots = traj.knots.copy()
    x, y = knots[:, 0].copy(), knots[:, 1].copy()
    for _ in range(k):
        x, y = -y, x.copy()
    knots[:, 0], knots[:, 1] = x, y
    knots[:, 2] = knots[:, 2] + k * (math.pi / 2.0)
    return Trajectory(duration=traj.duration, knots=knots,
                      controls=traj.controls.copy(), cost=traj.cost,
                      direction=traj.direction)


def exploit_symmetries(prim: MotionPrimitive, lattice: LatticeSpec) -> list[MotionPrimitive]:
    """The four quarter-turn copies of a primitive (the original first)."""
    out = [prim]
    for k in range(1, 4):
        out.append(MotionPrimitive(
            prim_id=-1,
            start=rotate_lattice_state(prim.start, lattice, k),
            end=rotate_lattice_state(prim.end, lattice, k),
            trajectory=rotate_trajectory(prim.trajectory, k),
            cost=prim.cost,
            maneuver_tag=prim.maneuver_tag,
            rotation=k,
            rep_id=prim.rep_id,
        ))
    return out


def ensure_connectivity(result, ocp: OcpSpec, lattice: LatticeSpec,
                        config: SolverConfig):
    """Round a free-endpoint solution onto the lattice.

    Re-solves the fixed-endpoint problem for every nearby candidate end
    state (warm started from the continuous solution) and returns the
    cheapest feasible one together with the number of failed candidates.
    Ties within 1e-9 go to the candidate closest to the continuous end.
    """
    from .lattice import snap_candidates

    traj = result.trajectory
    cands = snap_candidates(traj.end_state, lattice, ocp.manifold)
    best = None
    best_cost = math.inf
    best_cand = None
    n_failed = 0
    for cand in cands:
        target = embed(cand, lattice, ocp.params)
        try:
            res = solve_bvp(ocp.initial_state, target, ocp.direction,
                            ocp.weights, ocp.params, config, warm=traj,
                            tag=ocp.tag + "/round")
        except DegenerateBvpError:
            n_failed += 1
            continue
        if not res.ok:
            n_failed += 1
            continue
        if res.trajectory.cost < best_cost - 1e-9:
            best = res.trajectory
            best_cost = res.trajectory.cost
            best_cand = cand
    if best is None:
        return None, n_failed
    prim = MotionPrimitive(prim_id=-1, start=ocp.start_lattice, end=best_cand,
                           trajectory=best, cost=best.cost,
                           maneuver_tag=ocp.tag, rotation=0, rep_id=-1)
    return prim, n_failed


def _solve_one(args):
    """Worker task: solve one maneuver OCP and round it onto the lattice."""
    idx, ocp, lattice, cfg = args
    res = solve_ocp(ocp, cfg)
    if not res.ok:
        return idx, None, 1, f"maneuver OCP: {res.message}"
    prim, n_failed = ensure_connectivity(res, ocp, lattice, cfg)
    if prim is None:
        return idx, None, n_failed, "all rounding candidates infeasible"
    prim.rep_id = idx
    return idx, prim, n_failed, ""


def generate(maneuvers, lattice: LatticeSpec, params: VehicleParams,
             weights, config: SolverConfig | None = None,
             workers: int = 1) -> tuple[PrimitiveSet, GenerationReport]:
    """Run the full generation pipeline for one system instance."""
    cfg = config if config is not None else SolverConfig()
    t0 = time.perf_counter()
    specs = interpret(maneuvers, lattice, params, weights)
    tasks = [(i, ocp, lattice, cfg) for i, ocp in enumerate(specs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, tasks))
    else:
        results = [_solve_one(t) for t in tasks]

    prims: list[MotionPrimitive] = []
    n_inf = 0
    stats: dict[str, dict] = {}
    inf_log: list[dict] = []
    for (idx, prim, n_failed, msg), ocp in zip(results, specs):
        key = ocp.tag.split("/")[0]
        st = stats.setdefault(key, {"tag": key, "n_ocp": 0, "n_prim": 0,
                                    "n_infeasible": 0})
        st["n_ocp"] += 1
        n_inf += n_failed
        st["n_infeasible"] += n_failed
        if prim is None:
            inf_log.append({"tag": ocp.tag, "stage": "maneuver", "reason": msg})
            continue
        copies = exploit_symmetries(prim, lattice)
        for c in copies:
            c.prim_id = len(prims)
            prims.append(c)
        st["n_prim"] += len(copies)

    report = GenerationReport(
        n_ocp=len(specs), n_prim=len(prims), n_infeasible=n_inf,
        wall_time=time.perf_counter() - t0,
        per_maneuver=[stats[k] for k in sorted(stats)],
        infeasible_log=inf_log)
    if not prims:
        raise GenerationError("generation produced an empty primitive set")
    pset = PrimitiveSet(lattice=lattice, params=params, weights=weights,
                        primitives=prims, k_intervals=cfg.k_intervals,
                        substeps=cfg.substeps)
    return pset, report


def generate_from_connectivity(connectivity, lattice: LatticeSpec,
                               params: VehicleParams, weights,
                               config: SolverConfig | None = None
                               ) -> tuple[PrimitiveSet | None, GenerationReport]:
    """Re-solve a reused connectivity (fixed endpoints) for a new instance.

    `connectivity` is a list of (start, end, direction, tag) lattice pairs,
    typically another instance's solved representatives.  Endpoints a less
    agile vehicle cannot reach make the generation infeasible; the report
    carries the count and the set is returned only if every endpoint solved.
    """
    cfg = config if config is not None else SolverConfig()
    t0 = time.perf_counter()
    prims: list[MotionPrimitive] = []
    n_inf = 0
    inf_log: list[dict] = []
    for start, end, direction, tag in connectivity:
        x0 = embed(start, lattice, params)
        xf = embed(end, lattice, params)
        try:
            res = solve_bvp(x0, xf, direction, weights, params, cfg,
                            tag=tag + "/reuse")
        except DegenerateBvpError:
            n_inf += 1
            inf_log.append({"tag": tag, "stage": "reuse", "reason": "degenerate"})
            continue
        if not res.ok:
            n_inf += 1
            inf_log.append({"tag": tag, "stage": "reuse", "reason": res.message})
            continue
        prim = MotionPrimitive(prim_id=-1, start=start, end=end,
                               trajectory=res.trajectory,
                               cost=res.trajectory.cost, maneuver_tag=tag)
        for c in exploit_symmetries(prim, lattice):
            c.prim_id = len(prims)
            prims.append(c)
    report = GenerationReport(
        n_ocp=len(connectivity), n_prim=len(prims), n_infeasible=n_inf,
        wall_time=time.perf_counter() - t0, infeasible_log=inf_log)
    if n_inf > 0 or not prims:
        return None, report
    pset = PrimitiveSet(lattice=lattice, params=params, weights=weights,
                        primitives=prims, k_intervals=cfg.k_intervals,
                        substeps=cfg.substeps)
    return pset, report


def baseline_exhaustive(lattice: LatticeSpec, params: VehicleParams, weights,
                        radius: int = 4, config: SolverConfig | None = None,
                        directions=(Direction.FORWARD, Direction.BACKWARD),
                        time_budget: float | None = None
                        ) -> tuple[PrimitiveSet, GenerationReport]:
    """Exhaustive fixed-endpoint search over a box of candidate end states.

    For every representative start (heading orbit representative at each
    steering level) a fixed-endpoint problem is attempted to every lattice
    state within the box, ordered by distance from the origin.  Every failed
    attempt counts as infeasible, which is what makes this approach slow
    compared to the maneuver pipeline.
    """
    cfg = config if config is not None else SolverConfig()
    t0 = time.perf_counter()
    prims: list[MotionPrimitive] = []
    n_inf = 0
    n_ocp = 0
    partial = False

    positions = [(ix, iy) for ix in range(-radius, radius + 1)
                 for iy in range(-radius, radius + 1)]
    positions.sort(key=lambda p: (p[0] * p[0] + p[1] * p[1], p[0], p[1]))

    done = False
    for rep in lattice.orbit_representatives():
        for s_i in range(lattice.n_steering):
            start = LatticeState(0, 0, rep, s_i)
            x0 = embed(start, lattice, params)
            for direction in directions:
                for ix, iy in positions:
                    for h_f in range(lattice.n_headings):
                        for s_f in range(lattice.n_steering):
                            if time_budget is not None and \
                                    time.perf_counter() - t0 > time_budget:
                                partial = True
                                done = True
                                break
                            end = LatticeState(ix, iy, h_f, s_f)
                            xf = embed(end, lattice, params)
                            n_ocp += 1
                            try:
                                res = solve_bvp(x0, xf, direction, weights,
                                                params, cfg, tag="baseline")
                            except DegenerateBvpError:
                                n_inf += 1
                                continue
                            if not res.ok:
                                n_inf += 1
                                continue
                            prim = MotionPrimitive(
                                prim_id=-1, start=start, end=end,
                                trajectory=res.trajectory,
                                cost=res.trajectory.cost,
                                maneuver_tag=f"baseline/h{rep}")
                            for c in exploit_symmetries(prim, lattice):
                                c.prim_id = len(prims)
                                prims.append(c)
                        if done:
                            break
                    if done:
                        break
                if done:
                    break
            if done:
                break
        if done:
            break

    report = GenerationReport(
        n_ocp=n_ocp, n_prim=len(prims), n_infeasible=n_inf,
        wall_time=time.perf_counter() - t0, partial=partial)
    pset = PrimitiveSet(lattice=lattice, params=params, weights=weights,
                        primitives=prims, k_intervals=cfg.k_intervals,
                        substeps=cfg.substeps)
    return pset, report


def check_primitive(prim: MotionPrimitive, lattice: LatticeSpec,
                    params: VehicleParams, weights,
                    substeps: int | None = None, impl=None) -> dict:
    """Independent invariant audit of one primitive.

    Re-integrates the controls from the start state, compares endpoints
    against the lattice embeddings and re-evaluates the stage cost.  Returns
    the observed deviations so tests can assert their own tolerances.
    """
    from . import kernels
    mod = impl if impl is not None else kernels
    traj = prim.trajectory
    S = substeps if substeps is not None else 10
    knots = mod.rollout(traj.knots[0], np.ascontiguousarray(traj.controls[:, 1]),
                        traj.controls[0, 0], traj.duration, S,
                        params.pack_lengths(), kernels.kind_code(params.kind))
    end_err = np.abs(knots[-1] - traj.knots[-1])
    end_err[2] = abs(normalize_angle(knots[-1, 2] - traj.knots[-1, 2]))
    start_embed = embed(prim.start, lattice, params)
    end_embed = embed(prim.end, lattice, params)
    de_s = np.abs(traj.knots[0] - start_embed)
    de_s[2] = abs(normalize_angle(traj.knots[0, 2] - start_embed[2]))
    de_e = np.abs(traj.knots[-1] - end_embed)
    de_e[2] = abs(normalize_angle(traj.knots[-1, 2] - end_embed[2]))
    return {
        "reintegration_end_error": float(np.max(end_err)),
        "start_embed_error": float(np.max(de_s)),
        "end_embed_error": float(np.max(de_e)),
        "cost_error": abs(evaluate_objective(traj, weights) - prim.cost),
    }
