"""Scripted whole-body motions built on the velocity-level engine.

A motion script is a sequence of phases.  Each phase maps the current state
and phase-local time to an equality constraint set; the runner solves the
velocity problem, reconstructs roller rates, integrates one step, and
records a trajectory frame with solver and integration diagnostics plus a
support-polygon stability margin.

Runs never leave an invalid state behind.  On inconsistent constraints,
rank-deficient solves, edge-length or roller-ordering violations, or a
stability breach, the run stops with an abort record naming the phase, the
tick, and the reason.  A limit violation additionally bisects the offending
step so the final frame lands on the binding limit instead of short of it.

Script builders cover the motions the robots actually perform: vertical
squat/extension of the top face, ring twist with an optional azimuth hold
on the face above, panel tilt about a support joint or edge, panel sweep
about the vertical, and a full crawling cycle (shift weight, step each
foot, drag the rear vertex, re-tension back to the remembered roller
positions).  Envelope searches drive a motion into its binding limit and
then verify the largest target that still completes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import EngineTolerances, FeasibilityLimits
from .kinematics import (AxisMove, EdgeRate, GroupMove,
                         InfeasibleConstraintsError, IntegrationDiagnostics,
                         LimitViolationError, MotionConstraintSet, Move,
                         ReconstructionError, RelativeMove, SolveDiagnostics,
                         TrussState, d_implied_lengths, integrate_step,
                         rigidity_matrix, roller_rates, solve_velocities)
from .topology import TrussTopology, incidence_matrices


@dataclass
class Phase:
    """One stage of a motion script.

    ``generator(state, t)`` returns the constraint set for the step starting
    at phase-local time ``t``.  ``completion(state)``, when given, ends the
    phase early; a phase that has a completion test but never passes it
    aborts the run as a timeout.  ``min_stability`` aborts the run when the
    support margin falls below it (None disables the check).
    """

    name: str
    duration: float
    generator: Callable[[TrussState, float], MotionConstraintSet]
    completion: Callable[[TrussState], bool] | None = None
    min_stability: float | None = 0.0


@dataclass
class MotionScript:
    name: str
    phases: list[Phase]


@dataclass
class TrajectoryFrame:
    """State after one integration step plus the commands that produced it.

    ``xdot`` and ``ddot`` are the velocities applied over the step that
    ends at this frame, i.e. they were solved at the previous frame's
    state.  Frame 0 is the initial state with zero velocities and no
    diagnostics.
    """

    tick: int
    time: float
    phase: str
    state: TrussState
    xdot: np.ndarray
    ddot: np.ndarray
    solve: SolveDiagnostics | None
    integ: IntegrationDiagnostics | None
    stability: float
    max_roller_rate: float


@dataclass
class AbortInfo:
    reason: str    # infeasible | rank_deficient | reconstruction | limit | stability | timeout
    message: str
    phase: str
    tick: int


@dataclass
class TrajectoryResult:
    frames: list[TrajectoryFrame]
    completed: bool
    abort: AbortInfo | None = None

    @property
    def final_state(self) -> TrussState:
        return self.frames[-1].state

    @property
    def duration(self) -> float:
        return self.frames[-1].time


# ---------------------------------------------------------------------------
# support polygon


def convex_hull_2d(points) -> np.ndarray:
    """Convex hull of 2D points, counter-clockwise (monotone chain).

    Collinear boundary points are dropped.  Degenerate inputs return what
    is left: two points for a segment, one for a point.
    """
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    den = float(ab @ ab)
    if den == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / den, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def polygon_margin(point, hull: np.ndarray) -> float:
    """Signed distance from a point to the hull boundary, positive inside.

    Degenerate hulls (segment, point, empty) have no interior, so the
    margin is the negated distance to them, -inf for an empty hull.
    """
    p = np.asarray(point, dtype=float)
    if len(hull) == 0:
        return -np.inf
    if len(hull) == 1:
        return -float(np.linalg.norm(p - hull[0]))
    if len(hull) == 2:
        return -_point_segment_distance(p, hull[0], hull[1])
    margin = np.inf
    for k in range(len(hull)):
        a, b = hull[k], hull[(k + 1) % len(hull)]
        e = b - a
        # CCW hull: inward distance is the left-turn cross product
        d = (e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / np.linalg.norm(e)
        margin = min(margin, float(d))
    return margin


def center_of_mass(state: TrussState, masses=None) -> np.ndarray:
    p = state.positions()
    if masses is None:
        return p.mean(axis=0)
    m = np.asarray(masses, dtype=float)
    return (m[:, None] * p).sum(axis=0) / m.sum()


def support_polygon(state: TrussState, z_contact_tol: float = 0.01,
                    exclude: tuple[int, ...] = ()) -> np.ndarray:
    p = state.positions()
    ids = [i for i in range(p.shape[0])
           if p[i, 2] < z_contact_tol and i not in exclude]
    if not ids:
        return np.zeros((0, 2))
    return convex_hull_2d(p[ids, :2])


def stability_margin(state: TrussState, masses=None,
                     z_contact_tol: float = 0.01,
                     exclude: tuple[int, ...] = ()) -> float:
    """Inward distance from the gravity-weighted center to the support hull.

    ``exclude`` removes contacts hypothetically, which is how a weight
    shift decides it is safe to lift a foot.
    """
    com = center_of_mass(state, masses)[:2]
    return polygon_margin(com, support_polygon(state, z_contact_tol, exclude))


# ---------------------------------------------------------------------------
# runner


def trapezoid_window(t: float, duration: float, ramp_frac: float = 0.1) -> float:
    """Unit-mean velocity window with linear ramps on both ends."""
    if duration <= 0.0:
        return 0.0
    u = t / duration
    if u <= 0.0 or u >= 1.0:
        return 0.0
    peak = 1.0 / (1.0 - ramp_frac)
    if u < ramp_frac:
        return peak * u / ramp_frac
    if u > 1.0 - ramp_frac:
        return peak * (1.0 - u) / ramp_frac
    return peak


def _bisect_limit_step(state, xdot, ddot, dt, topology, lims, tols, cs,
                       first_err, iters: int = 14):
    """Largest feasible fraction of a step that tripped a limit.

    Returns (state, diagnostics, step_dt, error); state is None when even
    the smallest trial fraction violates (start already on the limit).
    """
    lo, hi = 0.0, 1.0
    best = None
    err = first_err
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        try:
            cand = integrate_step(state, xdot, ddot, mid * dt, topology,
                                  lims, tols, fixed_nodes=cs.fixed_nodes,
                                  sliding_nodes=cs.sliding_nodes)
        except LimitViolationError as e:
            hi, err = mid, e
            continue
        lo, best = mid, cand
    if best is None:
        return None, None, 0.0, err
    new_state, idiag = best
    return new_state, idiag, lo * dt, err


def run_script(script: MotionScript, state: TrussState, topology: TrussTopology,
               *, dt: float | None = None,
               limits: FeasibilityLimits | None = None,
               tolerances: EngineTolerances | None = None,
               masses=None, z_contact_tol: float = 0.01) -> TrajectoryResult:
    """Execute a motion script from the given state.

    The returned trajectory always starts with the initial state as frame 0
    and contains every successfully integrated step after it, including the
    bisected partial step that lands on a binding limit.
    """
    tols = tolerances or EngineTolerances()
    lims = limits or FeasibilityLimits()
    dt = tols.dt if dt is None else float(dt)
    inc = incidence_matrices(topology)
    n = topology.node_count
    m = None if masses is None else np.asarray(masses, dtype=float)

    state = state.copy()
    frames = [TrajectoryFrame(
        tick=0, time=0.0,
        phase=script.phases[0].name if script.phases else "idle",
        state=state, xdot=np.zeros(3 * n),
        ddot=np.zeros(2 * topology.triangle_count),
        solve=None, integ=None,
        stability=stability_margin(state, m, z_contact_tol),
        max_roller_rate=0.0)]
    tick = 0
    t_global = 0.0

    def aborted(reason, message, phase_name):
        return TrajectoryResult(frames=frames, completed=False,
                                abort=AbortInfo(reason, message, phase_name, tick))

    for phase in script.phases:
        steps = max(1, int(round(phase.duration / dt)))
        done = phase.completion is None
        for k in range(steps):
            cs = phase.generator(state, k * dt)
            R = rigidity_matrix(state.x, topology, tols.tol_degenerate)
            try:
                xdot, sdiag = solve_velocities(state, topology, cs, tols,
                                               R=R, inc=inc)
            except InfeasibleConstraintsError as e:
                return aborted("infeasible", str(e), phase.name)
            if sdiag.rank_deficient:
                return aborted("rank_deficient",
                               f"velocity solve lost rank in phase '{phase.name}'",
                               phase.name)
            try:
                ddot = roller_rates(xdot, state, topology, tols, R=R, inc=inc)
            except ReconstructionError as e:
                return aborted("reconstruction", str(e), phase.name)

            step_dt = dt
            limit_err = None
            try:
                new_state, idiag = integrate_step(
                    state, xdot, ddot, dt, topology, lims, tols,
                    fixed_nodes=cs.fixed_nodes, sliding_nodes=cs.sliding_nodes)
            except LimitViolationError as e:
                new_state, idiag, step_dt, limit_err = _bisect_limit_step(
                    state, xdot, ddot, dt, topology, lims, tols, cs, e)
                if new_state is None:
                    return aborted("limit", str(limit_err), phase.name)

            margin = stability_margin(new_state, m, z_contact_tol)
            if phase.min_stability is not None and margin < phase.min_stability:
                return aborted(
                    "stability",
                    f"support margin {margin:.4f} m fell below "
                    f"{phase.min_stability:.4f} m in phase '{phase.name}'",
                    phase.name)

            state = new_state
            tick += 1
            t_global += step_dt
            frames.append(TrajectoryFrame(
                tick=tick, time=t_global, phase=phase.name, state=state,
                xdot=xdot, ddot=ddot, solve=sdiag, integ=idiag,
                stability=margin,
                max_roller_rate=float(np.max(np.abs(ddot), initial=0.0))))
            if limit_err is not None:
                return aborted("limit", str(limit_err), phase.name)
            if phase.completion is not None and phase.completion(state):
                done = True
                break
        if not done:
            return aborted("timeout",
                           f"phase '{phase.name}' hit its duration cap "
                           "before completing", phase.name)
    return TrajectoryResult(frames=frames, completed=True, abort=None)


# ---------------------------------------------------------------------------
# measurements


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def _azimuths(p: np.ndarray, nodes) -> np.ndarray:
    idx = list(nodes)
    return np.arctan2(p[idx, 1], p[idx, 0])


def mean_height(state: TrussState, nodes) -> float:
    return float(np.mean(state.positions()[list(nodes), 2]))


def effective_height(state: TrussState, nodes, scale: float) -> float:
    """Mean height of a node group scaled to the joint-center frame, m."""
    return mean_height(state, nodes) * scale


def azimuth_advance_deg(state0: TrussState, state1: TrussState, nodes) -> float:
    """Mean azimuth advance of a node ring between two states, degrees.

    Valid while the advance stays within +-180 degrees, which covers every
    scripted rotation here.
    """
    a0 = _azimuths(state0.positions(), nodes)
    a1 = _azimuths(state1.positions(), nodes)
    return float(np.degrees(np.mean(_wrap(a1 - a0))))


def panel_normal(state: TrussState, nodes) -> np.ndarray:
    """Unit normal of a three-node face, right-hand rule on the node order.

    Orientation follows the winding, so a face tipped past vertical keeps a
    continuous normal instead of snapping back.  Wind the nodes so the rest
    pose points up (the built-in groups do).
    """
    i, j, k = list(nodes)
    p = state.positions()
    nrm = np.cross(p[j] - p[i], p[k] - p[i])
    return nrm / np.linalg.norm(nrm)


def upward_winding(state: TrussState, nodes) -> tuple[int, ...]:
    """Reorder three nodes so their winding normal points up in this state."""
    i, j, k = list(nodes)
    if panel_normal(state, (i, j, k))[2] >= 0.0:
        return (i, j, k)
    return (i, k, j)


def panel_tilt_deg(state: TrussState, nodes) -> float:
    nz = panel_normal(state, nodes)[2]
    return float(np.degrees(np.arccos(np.clip(nz, -1.0, 1.0))))


def panel_azimuth_deg(state: TrussState, nodes) -> float:
    """Azimuth of the face normal's horizontal part; meaningless when flat."""
    n = panel_normal(state, nodes)
    return float(np.degrees(np.arctan2(n[1], n[0])))


def net_displacement(state0: TrussState, state1: TrussState) -> np.ndarray:
    """Mean node displacement vector between two states, m."""
    return np.asarray(state1.positions().mean(axis=0)
                      - state0.positions().mean(axis=0))


# ---------------------------------------------------------------------------
# script builders


def squat_extend_script(target_height: float, groups: dict, scale: float, *,
                        rate: float = 0.02, base: str = "fixed",
                        spread_base: bool = False,
                        topology: TrussTopology | None = None,
                        limits: FeasibilityLimits | None = None,
                        duration_cap: float = 200.0,
                        name: str | None = None) -> MotionScript:
    """Drive the top face vertically until it reaches a target height.

    ``target_height`` is in the joint-center frame (built coordinates times
    ``scale``).  ``base`` picks how the bottom ring meets the ground:
    "fixed" pins it, "sliding" lets it slip horizontally.  An unreachable
    target ends in a limit abort on the binding edge, which is how the
    reachable-height envelope is probed.

    ``spread_base`` (sliding base only, needs ``topology``) prepends a phase
    that grows the bottom ring edges to just under their upper bound and
    then holds them while descending.  Without it the greedy descent binds
    the middle ring early and the squat stops well above the true envelope.
    """
    if base not in ("fixed", "sliding"):
        raise ValueError(f"unknown base mode '{base}'")
    if spread_base and (base != "sliding" or topology is None):
        raise ValueError("spread_base needs a sliding base and a topology")
    top = tuple(groups["top"])
    bottom = tuple(groups["bottom"])
    lims = limits or FeasibilityLimits()
    cell: dict = {}

    def slide_anchor_rows(p) -> tuple[AxisMove, ...]:
        # pin the base ring's horizontal centroid and one tangential rate
        # so sliding runs keep no free rigid mode
        x, y = p[bottom[0], 0], p[bottom[0], 1]
        rho = math.hypot(x, y)
        return (AxisMove((bottom[0],), (-y / rho, x / rho, 0.0), 0.0),
                AxisMove(bottom, (1.0, 0.0, 0.0), 0.0),
                AxisMove(bottom, (0.0, 1.0, 0.0), 0.0))

    ring_edges: tuple[int, ...] = ()
    if spread_base:
        ring_edges = tuple(k for k, (i, j) in enumerate(topology.edges)
                           if i in bottom and j in bottom)

    def ring_lengths(state: TrussState) -> np.ndarray:
        lengths = d_implied_lengths(state, topology)
        return lengths[list(ring_edges)]

    def gen_spread(state: TrussState, t: float) -> MotionConstraintSet:
        rates = tuple(EdgeRate(k, rate) for k in ring_edges)
        return MotionConstraintSet(sliding_nodes=bottom, edge_rates=rates,
                                   axis_moves=slide_anchor_rows(state.positions()))

    def done_spread(state: TrussState) -> bool:
        hi = min(lims.upper_bound(state.perimeter[k // 3]) for k in ring_edges)
        return float(np.min(ring_lengths(state))) >= hi - 0.003

    def gen(state: TrussState, t: float) -> MotionConstraintSet:
        if "dir" not in cell:
            cell["dir"] = 1.0 if target_height >= effective_height(state, top, scale) else -1.0
        vz = cell["dir"] * rate
        gm = (GroupMove(top, (0.0, 0.0, vz)),)
        if base == "fixed":
            return MotionConstraintSet(group_moves=gm, fixed_nodes=bottom)
        p = state.positions()
        x, y = p[bottom[0], 0], p[bottom[0], 1]
        rho = math.hypot(x, y)
        spin = (AxisMove((bottom[0],), (-y / rho, x / rho, 0.0), 0.0),)
        # hold the spread ring while the top comes down
        held = tuple(EdgeRate(k, 0.0) for k in ring_edges)
        return MotionConstraintSet(group_moves=gm, sliding_nodes=bottom,
                                   axis_moves=spin, edge_rates=held)

    def done(state: TrussState) -> bool:
        return (effective_height(state, top, scale) - target_height) * cell["dir"] >= 0.0

    nm = name or f"height_{target_height:.3f}"
    phases = []
    if spread_base:
        phases.append(Phase("spread_base", 120.0, gen_spread, completion=done_spread))
    phases.append(Phase(nm, duration_cap, gen, completion=done))
    return MotionScript(nm, phases)


def ring_edge_indices(topology, nodes) -> tuple[int, ...]:
    """Indices of tube edges whose both endpoints lie in ``nodes``."""
    ring = set(nodes)
    return tuple(k for k, (i, j) in enumerate(topology.edges)
                 if i in ring and j in ring)


def twist_script(angle_deg: float, spin_nodes, fixed_nodes, *,
                 hold_nodes=(), topology=None, rate_deg: float = 0.6,
                 k_feedback: float = 2.0, tol_deg: float = 0.02,
                 tail: float = 6.0, name: str | None = None) -> MotionScript:
    """Rotate a node ring about the vertical axis by a signed angle.

    Each spinning node gets one tangential-rate row; ``hold_nodes`` get
    feedback rows that keep their own azimuths parked.  When ``topology``
    is given, every tube edge inside the spinning ring is held at zero
    rate: the triangle bases stay constant, so the ring winds as a rigid
    triangle at fixed radius while the structure's height absorbs the
    reconfiguration.

    A deep wind passes a flat pose near half the commanded angle where
    every member length is momentarily stationary, so the rollers lose
    first-order authority and the drift projection, if it fires right
    there, pins the structure instead of letting it glide across.  The
    default rate keeps per-step integration error small enough that the
    projection stays quiet through the crossing; rates much above 1 deg/s
    lose that race and the script stalls at the flat pose until its
    duration cap trips.
    """
    spin = tuple(spin_nodes)
    hold = tuple(hold_nodes)
    target = math.radians(angle_deg)
    w_nom = math.radians(rate_deg)
    bases = ring_edge_indices(topology, spin) if topology is not None else ()
    cell: dict = {}

    def advance(state: TrussState) -> float:
        # accumulate per-call deltas so winds beyond a half turn track
        az = _azimuths(state.positions(), spin)
        if "az_prev" not in cell:
            cell["az_prev"] = az
            cell["az0_hold"] = (_azimuths(state.positions(), hold)
                                if hold else None)
            cell["total"] = 0.0
        cell["total"] += float(np.mean(_wrap(az - cell["az_prev"])))
        cell["az_prev"] = az
        return cell["total"]

    def gen(state: TrussState, t: float) -> MotionConstraintSet:
        phi = advance(state)
        w = float(np.clip(k_feedback * (target - phi), -w_nom, w_nom))
        p = state.positions()
        rows = []
        for i in spin:
            x, y = p[i, 0], p[i, 1]
            rho = math.hypot(x, y)
            rows.append(AxisMove((i,), (-y / rho, x / rho, 0.0), rho * w))
        if hold:
            drift = _wrap(_azimuths(p, hold) - cell["az0_hold"])
            for j, err in zip(hold, drift):
                x, y = p[j, 0], p[j, 1]
                rho = math.hypot(x, y)
                wj = float(np.clip(-k_feedback * err, -w_nom, w_nom))
                rows.append(AxisMove((j,), (-y / rho, x / rho, 0.0), rho * wj))
        return MotionConstraintSet(fixed_nodes=tuple(fixed_nodes),
                                   axis_moves=tuple(rows),
                                   edge_rates=tuple(EdgeRate(k, 0.0)
                                                    for k in bases))

    def done(state: TrussState) -> bool:
        return abs(target - advance(state)) < math.radians(tol_deg)

    nm = name or f"twist_{angle_deg:+.0f}"
    duration = abs(angle_deg) / rate_deg + tail
    return MotionScript(nm, [Phase(nm, duration, gen, completion=done)])


def tilt_script(angle_deg: float, groups: dict, *, axis_mode: str = "joint",
                anchor: int = 0, rate_deg: float = 2.0,
                k_feedback: float = 2.0, k_recenter: float = 0.5,
                tol_deg: float = 0.05, tail: float = 6.0,
                name: str | None = None) -> MotionScript:
    """Tip the top panel to a target inclination.

    ``axis_mode`` selects the pivot: "joint" rotates about a horizontal
    axis through one panel vertex, "edge" about the panel edge starting at
    ``anchor``.  The panel is driven as a rigid body through velocity
    differences, so the pivot itself stays free to ride with the structure.
    Weak recentering rows keep the middle ring over the base while the
    panel leans out.
    """
    if axis_mode not in ("joint", "edge"):
        raise ValueError(f"unknown axis mode '{axis_mode}'")
    top = tuple(groups["top"])
    middle = tuple(groups["middle"])
    bottom = tuple(groups["bottom"])
    target = math.radians(angle_deg)
    w_nom = math.radians(rate_deg)
    cell: dict = {}

    def oriented(state: TrussState) -> tuple[int, ...]:
        if "top" not in cell:
            cell["top"] = upward_winding(state, top)
        return cell["top"]

    def gen(state: TrussState, t: float) -> MotionConstraintSet:
        p = state.positions()
        if "axis" not in cell:
            if axis_mode == "joint":
                a = top[anchor]
                x, y = p[a, 0], p[a, 1]
                rho = math.hypot(x, y)
                cell["axis"] = np.array([-y / rho, x / rho, 0.0])
                cell["anchor"] = a
                cell["pair"] = None
                cell["swing"] = tuple(j for j in top if j != a)
            else:
                a, b = top[anchor], top[(anchor + 1) % 3]
                e = p[b] - p[a]
                cell["axis"] = e / np.linalg.norm(e)
                cell["anchor"] = a
                cell["pair"] = b
                cell["swing"] = tuple(j for j in top if j not in (a, b))
        theta = math.radians(panel_tilt_deg(state, oriented(state)))
        w = float(np.clip(k_feedback * (target - theta), -w_nom, w_nom))
        a = cell["anchor"]
        rel = []
        if cell["pair"] is not None:
            rel.append(RelativeMove(a, cell["pair"], (0.0, 0.0, 0.0)))
        for j in cell["swing"]:
            v = w * np.cross(cell["axis"], p[j] - p[a])
            rel.append(RelativeMove(a, j, (float(v[0]), float(v[1]), float(v[2]))))
        cx, cy = p[list(middle), 0].mean(), p[list(middle), 1].mean()
        recenter = (
            AxisMove(middle, (1.0, 0.0, 0.0),
                     float(np.clip(-k_recenter * cx, -0.02, 0.02))),
            AxisMove(middle, (0.0, 1.0, 0.0),
                     float(np.clip(-k_recenter * cy, -0.02, 0.02))),
        )
        return MotionConstraintSet(fixed_nodes=bottom,
                                   relative_moves=tuple(rel),
                                   axis_moves=recenter)

    def done(state: TrussState) -> bool:
        return abs(angle_deg - panel_tilt_deg(state, oriented(state))) < tol_deg

    nm = name or f"tilt_{axis_mode}_{angle_deg:.0f}"
    duration = abs(angle_deg) / rate_deg + tail
    return MotionScript(nm, [Phase(nm, duration, gen, completion=done)])


def sweep_script(angle_deg: float, groups: dict,
                 limits: FeasibilityLimits | None = None, *,
                 rate_deg: float = 2.0, k_feedback: float = 2.0,
                 tol_deg: float = 0.05, tail: float = 6.0,
                 name: str | None = None) -> MotionScript:
    """Slew the tilted panel's facing direction about the vertical axis.

    Commands beyond the configured sweep envelope are rejected at build
    time: past it an upper-tube edge leaves its admissible length band, so
    the script would only ever end in a limit abort.  The middle ring is
    driven tangentially and the panel rides along; feedback closes the loop
    on the panel normal's azimuth (or on the ring itself when the panel is
    too flat to define one).
    """
    lims = limits or FeasibilityLimits()
    if abs(angle_deg) > lims.sweep_limit_deg + 1e-9:
        raise ValueError(
            f"sweep of {angle_deg:.1f} deg exceeds the safe envelope of "
            f"+-{lims.sweep_limit_deg:.1f} deg: beyond it an upper tube edge "
            "leaves its admissible length band")
    top = tuple(groups["top"])
    middle = tuple(groups["middle"])
    bottom = tuple(groups["bottom"])
    target = math.radians(angle_deg)
    w_nom = math.radians(rate_deg)
    cell: dict = {}

    def heading(state: TrussState) -> float:
        if "mode" not in cell:
            cell["top"] = upward_winding(state, top)
            n = panel_normal(state, cell["top"])
            cell["mode"] = "normal" if math.hypot(n[0], n[1]) > 0.08 else "ring"
        if cell["mode"] == "normal":
            return math.radians(panel_azimuth_deg(state, cell["top"]))
        return float(np.mean(_azimuths(state.positions(), middle)))

    def advance(state: TrussState) -> float:
        h = heading(state)
        if "h0" not in cell:
            cell["h0"] = h
        return float(_wrap(h - cell["h0"]))

    def gen(state: TrussState, t: float) -> MotionConstraintSet:
        a = advance(state)
        w = float(np.clip(k_feedback * (target - a), -w_nom, w_nom))
        p = state.positions()
        rows = []
        for i in middle:
            x, y = p[i, 0], p[i, 1]
            rho = math.hypot(x, y)
            rows.append(AxisMove((i,), (-y / rho, x / rho, 0.0), rho * w))
        return MotionConstraintSet(fixed_nodes=bottom, axis_moves=tuple(rows))

    def done(state: TrussState) -> bool:
        return abs(target - advance(state)) < math.radians(tol_deg)

    nm = name or f"sweep_{angle_deg:+.0f}"
    duration = abs(angle_deg) / rate_deg + tail
    return MotionScript(nm, [Phase(nm, duration, gen, completion=done)])


def locomotion_cycle_script(groups: dict, topology: TrussTopology, *,
                            masses=None, margin_req: float = 0.04,
                            step_length: float = 0.61,
                            slide_length: float = 0.46,
                            lift_height: float = 0.10,
                            shift_rate: float = 0.02,
                            lift_rate: float = 0.04,
                            travel_rate: float = 0.042,
                            track_gain: float = 0.2,
                            track_cap: float = 0.04,
                            name: str = "crawl_cycle") -> MotionScript:
    """One full crawling cycle for the ground robot.

    Sequence: lean away from each foot, lift it, swing it forward by
    ``step_length``, plant it; then drag the rear vertex forward by
    ``slide_length`` and re-tension every tube back to the roller positions
    remembered at the start of the cycle.  The re-tension phase anchors the
    rear vertex and lets the remaining contacts slide, so the closed shape
    comes back congruent to the start and the whole robot nets exactly the
    rear slide per cycle.
    """
    front = groups["front"][0]
    rear = groups["rear"][0]
    top = groups["top"][0]
    feet = tuple(groups["feet"])
    contacts = tuple(groups["contacts"])
    right_foot, left_foot = feet
    B = incidence_matrices(topology).B_active_T
    m = None if masses is None else np.asarray(masses, dtype=float)
    cell: dict = {}

    def remember(state: TrussState):
        if "d0" not in cell:
            cell["d0"] = state.d.copy()

    def gen_lean(sign: float):
        def g(state, t):
            remember(state)
            return MotionConstraintSet(
                fixed_nodes=contacts,
                axis_moves=(AxisMove((top,), (0.0, sign, 0.0), shift_rate),))
        return g

    def done_lean(foot: int):
        def c(state):
            return stability_margin(state, m, exclude=(foot,)) >= margin_req
        return c

    def gen_lift(foot: int, anchors: tuple[int, ...]):
        def g(state, t):
            remember(state)
            z = float(state.positions()[foot, 2])
            vz = min(lift_rate, 5.0 * max(lift_height - z, 0.0))
            return MotionConstraintSet(moves=(Move(foot, (0.0, 0.0, vz)),),
                                       fixed_nodes=anchors)
        return g

    def done_lift(foot: int):
        def c(state):
            return float(state.positions()[foot, 2]) >= lift_height - 2e-4
        return c

    T_swing = step_length / travel_rate

    def gen_swing(foot: int, anchors: tuple[int, ...]):
        def g(state, t):
            remember(state)
            vx = travel_rate * trapezoid_window(t, T_swing)
            return MotionConstraintSet(moves=(Move(foot, (vx, 0.0, 0.0)),),
                                       fixed_nodes=anchors)
        return g

    def gen_plant(foot: int, anchors: tuple[int, ...]):
        def g(state, t):
            remember(state)
            z = float(state.positions()[foot, 2])
            vz = -min(lift_rate, 5.0 * max(z, 0.0))
            return MotionConstraintSet(moves=(Move(foot, (0.0, 0.0, vz)),),
                                       fixed_nodes=anchors)
        return g

    def done_plant(foot: int):
        def c(state):
            return float(state.positions()[foot, 2]) <= 1e-4
        return c

    T_slide = slide_length / travel_rate

    def gen_slide(state, t):
        remember(state)
        vx = travel_rate * trapezoid_window(t, T_slide)
        # rear is declared sliding so the drift projection also treats its
        # height as pinned; left free it would creep down a soft near-ground
        # mode a few tenths of a millimetre per frame
        return MotionConstraintSet(moves=(Move(rear, (vx, 0.0, 0.0)),),
                                   fixed_nodes=(front,) + feet,
                                   sliding_nodes=(rear,))

    def gen_reset(state, t):
        remember(state)
        # gentle gain matters: re-tensioning much faster than ~0.25/s bows
        # the shape enough to lift the front contact mid-reset, and the
        # support polygon collapses to the rear-feet triangle
        dd = np.clip(track_gain * (cell["d0"] - state.d), -track_cap, track_cap)
        Ldot = B @ dd
        rates = tuple(EdgeRate(k, float(Ldot[k])) for k in range(Ldot.size))
        # 21 edge rows use up every shape freedom, so only 6 rigid pins fit:
        # rear (3), foot heights (2), front yaw (1).  The front's height is
        # left to ride; it lands back on the ground at closure because the
        # remembered shape has all four contacts coplanar.
        return MotionConstraintSet(
            fixed_nodes=(rear,),
            sliding_nodes=feet,
            axis_moves=(AxisMove((front,), (0.0, 1.0, 0.0), 0.0),),
            edge_rates=rates)

    def done_reset(state):
        return float(np.max(np.abs(state.d - cell["d0"]))) < 1e-4

    others_r = (front, rear, left_foot)
    others_l = (front, rear, right_foot)
    phases = [
        Phase("unload_right", 60.0, gen_lean(-1.0), done_lean(right_foot)),
        Phase("lift_right", 8.0, gen_lift(right_foot, others_r), done_lift(right_foot)),
        Phase("swing_right", T_swing, gen_swing(right_foot, others_r)),
        Phase("plant_right", 8.0, gen_plant(right_foot, others_r), done_plant(right_foot)),
        Phase("unload_left", 90.0, gen_lean(1.0), done_lean(left_foot)),
        Phase("lift_left", 8.0, gen_lift(left_foot, others_l), done_lift(left_foot)),
        Phase("swing_left", T_swing, gen_swing(left_foot, others_l)),
        Phase("plant_left", 8.0, gen_plant(left_foot, others_l), done_plant(left_foot)),
        Phase("slide_rear", T_slide, gen_slide),
        Phase("reset_shape", 80.0, gen_reset, done_reset),
    ]
    return MotionScript(name, phases)


# ---------------------------------------------------------------------------
# envelope searches


@dataclass
class EnvelopeResult:
    """Outcome of driving a motion into its binding limit.

    ``achieved`` is the largest value measured along the probe run, which
    ends on the limit itself; ``verified`` is the largest tested target that
    completed as a normal script.  ``binding`` is the limit message.
    """

    achieved: float
    verified: float
    binding: str
    probe: TrajectoryResult


def max_tilt_angle(state: TrussState, topology: TrussTopology, groups: dict, *,
                   axis_mode: str = "joint", anchor: int = 0,
                   limits: FeasibilityLimits | None = None,
                   tolerances: EngineTolerances | None = None,
                   masses=None, probe_angle: float = 100.0,
                   tol_deg: float = 0.5, **tilt_kwargs) -> EnvelopeResult:
    """Largest panel inclination before an edge limit binds, half-degree tol.

    An over-ambitious probe run rides into the limit; the reported maximum
    is then pinned down by bisection between the last completing and first
    aborting targets.  A probe that completes returns ``probe_angle`` with
    no binding: the true maximum lies above the cap.
    """
    top = upward_winding(state, tuple(groups["top"]))

    def attempt(target):
        return run_script(
            tilt_script(target, groups, axis_mode=axis_mode, anchor=anchor,
                        **tilt_kwargs),
            state, topology, limits=limits, tolerances=tolerances,
            masses=masses)

    probe = attempt(probe_angle)
    if probe.completed:
        return EnvelopeResult(probe_angle, probe_angle, "", probe)
    achieved = max(panel_tilt_deg(f.state, top) for f in probe.frames)
    binding = probe.abort.message
    lo, hi = None, achieved
    back = tol_deg
    for _ in range(6):
        trial = attempt(achieved - back)
        if trial.completed:
            lo = achieved - back
            break
        hi = achieved - back
        back *= 2.0
    if lo is None:
        raise RuntimeError(
            f"no completing tilt target found below the {achieved:.2f} deg "
            "limit")
    while hi - lo > tol_deg:
        mid = 0.5 * (lo + hi)
        if attempt(mid).completed:
            lo = mid
        else:
            hi = mid
    return EnvelopeResult(achieved, lo, binding, probe)


def height_envelope(state: TrussState, topology: TrussTopology, groups: dict,
                    scale: float, *, direction: str, base: str = "fixed",
                    limits: FeasibilityLimits | None = None,
                    tolerances: EngineTolerances | None = None,
                    masses=None, tol: float = 0.005,
                    rate: float = 0.02) -> EnvelopeResult:
    """Reachable top-face height envelope in the given direction, 5 mm tol.

    ``direction`` is "up" (extension) or "down" (squat); heights are in the
    joint-center frame.
    """
    if direction not in ("up", "down"):
        raise ValueError(f"unknown direction '{direction}'")
    top = tuple(groups["top"])
    sign = 1.0 if direction == "up" else -1.0
    spread = base == "sliding" and direction == "down"
    probe_target = effective_height(state, top, scale) + sign * 10.0

    def build(tgt):
        return squat_extend_script(tgt, groups, scale, base=base, rate=rate,
                                   spread_base=spread, topology=topology,
                                   limits=limits)

    probe = run_script(build(probe_target), state, topology, limits=limits,
                       tolerances=tolerances, masses=masses)
    if probe.completed:
        return EnvelopeResult(probe_target, probe_target, "", probe)
    achieved = effective_height(probe.final_state, top, scale)
    binding = probe.abort.message
    target = achieved - sign * tol
    for _ in range(6):
        trial = run_script(build(target), state, topology, limits=limits,
                           tolerances=tolerances, masses=masses)
        if trial.completed:
            return EnvelopeResult(achieved, target, binding, probe)
        target -= sign * tol
    raise RuntimeError(
        f"no completing height target found inside the {achieved:.3f} m limit")
