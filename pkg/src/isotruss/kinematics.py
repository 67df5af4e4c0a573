"""Velocity-level kinematics for isoperimetric truss robots.

The robot's shape is a node-position vector ``x`` (stacked 3-vectors) plus
the roller arc positions ``d`` (two active units per triangle).  Edge-length
rates relate to node velocities through the scaled rigidity matrix ``R``:
each tube-edge row holds the unit edge vector in the tail node's block and
its negation in the head node's block, so ``L. = R @ x.``.

Motion commands are equality constraints on ``x.``.  The engine solves

    minimize    || R x. ||^2
    subject to  A x. = b

where ``A`` stacks move rows, fixed/sliding-node rows, per-triangle
perimeter rows ``P R x. = 0``, locked virtual-edge rows, and optional
edge-rate rows.  The stationarity conditions form the symmetric indefinite
KKT system ``[[2 R^T R, A^T], [A, 0]]``; a minimum-norm least-squares
solution is returned (with a rank-deficiency flag) when it is singular.

Roller rates are recovered per triangle by pseudoinverting the incidence
block: ``d. = pinv(B_active_T) @ R x.``.  The printed source form of this
relation is only dimensionally meaningful as that composition, which is what
is implemented here.

Integration is explicit Euler on both ``x`` and ``d``.  The roller state is
ground truth: after each step the node positions are projected back onto the
manifold of shapes whose edge lengths match ``d`` (Gauss-Newton), which is
what keeps perimeter drift at numerical noise over long runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .config import EngineTolerances, FeasibilityLimits
from .topology import IncidenceMatrices, TrussTopology, incidence_matrices


class DegenerateEdgeError(ValueError):
    """An edge length collapsed below the degeneracy tolerance."""


class InfeasibleConstraintsError(ValueError):
    """The commanded equality constraints are mutually inconsistent."""

    def __init__(self, message: str, block: str, residual: float):
        super().__init__(message)
        self.block = block
        self.residual = residual


class ReconstructionError(ValueError):
    """Edge rates are not representable by active-roller motion."""


class LimitViolationError(ValueError):
    """An edge left the admissible band or roller ordering broke."""

    def __init__(self, message: str, triangle: int, edge: int,
                 value: float, bound: float):
        super().__init__(message)
        self.triangle = triangle
        self.edge = edge
        self.value = value
        self.bound = bound


@dataclass
class TrussState:
    """Node positions, roller arc positions, and per-triangle constants.

    ``x``  flat node coordinates, length 3n, meters.
    ``d``  active-roller arc positions, length 2T, meters, ordered
           (d_A, d_B) per triangle with 0 < d_A < d_B < perimeter.
    ``perimeter``  tube perimeter per triangle, meters.
    ``pressure``   tube pressure per triangle, kPa.
    """

    x: np.ndarray
    d: np.ndarray
    perimeter: np.ndarray
    pressure: np.ndarray

    def copy(self) -> "TrussState":
        return TrussState(self.x.copy(), self.d.copy(),
                          self.perimeter.copy(), self.pressure.copy())

    def positions(self) -> np.ndarray:
        """Node positions as an (n, 3) array (a view when possible)."""
        return self.x.reshape(-1, 3)


@dataclass(frozen=True)
class Move:
    """Full velocity command for one node, m/s."""
    node: int
    velocity: tuple[float, float, float]


@dataclass(frozen=True)
class GroupMove:
    """Velocity command for the centroid of a node set, m/s."""
    nodes: tuple[int, ...]
    velocity: tuple[float, float, float]


@dataclass(frozen=True)
class AxisMove:
    """Single-direction rate command: axis . mean(velocity of nodes) = rate."""
    nodes: tuple[int, ...]
    axis: tuple[float, float, float]
    rate: float


@dataclass(frozen=True)
class RelativeMove:
    """Velocity difference command: v(node_b) - v(node_a) = velocity."""
    node_a: int
    node_b: int
    velocity: tuple[float, float, float]


@dataclass(frozen=True)
class EdgeRate:
    """Commanded length rate for one tube edge, m/s."""
    edge: int
    rate: float


@dataclass(frozen=True)
class MotionConstraintSet:
    """Equality constraints handed to the velocity solver.

    ``fixed_nodes`` pin all three components; ``sliding_nodes`` pin only the
    vertical component (ground contact that may slip).  Perimeter rows are
    always included; virtual-edge rows are included while
    ``rigid_edges_locked`` is true.
    """

    moves: tuple[Move, ...] = ()
    fixed_nodes: tuple[int, ...] = ()
    sliding_nodes: tuple[int, ...] = ()
    group_moves: tuple[GroupMove, ...] = ()
    axis_moves: tuple[AxisMove, ...] = ()
    relative_moves: tuple[RelativeMove, ...] = ()
    edge_rates: tuple[EdgeRate, ...] = ()
    rigid_edges_locked: bool = True


@dataclass
class SolveDiagnostics:
    objective_value: float
    max_constraint_residual: float
    kkt_residual_norm: float
    rank_deficient: bool


@dataclass
class IntegrationDiagnostics:
    drift_before: float       # worst |L(x) - L(d)| after the Euler step, m
    drift_after: float        # same measure after projection, m
    projected: bool
    correction_magnitude: float  # infinity norm of the position correction, m
    iterations: int = 0
    # worst per-triangle |sum of edge mismatches| / perimeter
    perimeter_rel_drift_before: float = 0.0
    perimeter_rel_drift_after: float = 0.0


def edge_lengths(x: np.ndarray, topology: TrussTopology,
                 tol_degenerate: float = 1e-9) -> np.ndarray:
    """Tube edge lengths from node positions, length 3T."""
    p = np.asarray(x, dtype=float).reshape(-1, 3)
    out = np.empty(topology.edge_count)
    for k, (i, j) in enumerate(topology.edges):
        out[k] = np.linalg.norm(p[i] - p[j])
        if out[k] < tol_degenerate:
            raise DegenerateEdgeError(
                f"edge {k} (nodes {i}-{j}) collapsed to {out[k]:.3e} m")
    return out


def virtual_lengths(x: np.ndarray, topology: TrussTopology) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1, 3)
    return np.array([np.linalg.norm(p[i] - p[j])
                     for i, j, _ in topology.virtual_edges])


def d_implied_lengths(state: TrussState, topology: TrussTopology) -> np.ndarray:
    """Edge lengths dictated by roller arc positions, length 3T."""
    T = topology.triangle_count
    out = np.empty(3 * T)
    for t in range(T):
        dA, dB = state.d[2 * t], state.d[2 * t + 1]
        C = state.perimeter[t]
        out[3 * t] = dA
        out[3 * t + 1] = dB - dA
        out[3 * t + 2] = C - dB
    return out


def rigidity_matrix(x: np.ndarray, topology: TrussTopology,
                    tol_degenerate: float = 1e-9) -> np.ndarray:
    """Scaled rigidity matrix, rows = tube edges then virtual edges.

    Row ``k`` maps node velocities to the rate of edge ``k``'s length.
    """
    p = np.asarray(x, dtype=float).reshape(-1, 3)
    n = p.shape[0]
    members = list(topology.edges) + [(i, j) for i, j, _ in topology.virtual_edges]
    R = np.zeros((len(members), 3 * n))
    for k, (i, j) in enumerate(members):
        diff = p[i] - p[j]
        length = np.linalg.norm(diff)
        if length < tol_degenerate:
            raise DegenerateEdgeError(
                f"member {k} (nodes {i}-{j}) collapsed to {length:.3e} m")
        u = diff / length
        R[k, 3 * i:3 * i + 3] = u
        R[k, 3 * j:3 * j + 3] = -u
    return R


def _node_row(n: int, node: int, vec) -> np.ndarray:
    row = np.zeros(3 * n)
    row[3 * node:3 * node + 3] = vec
    return row


def assemble_constraints(state: TrussState, topology: TrussTopology,
                         constraints: MotionConstraintSet,
                         R: np.ndarray, inc: IncidenceMatrices,
                         ) -> tuple[np.ndarray, np.ndarray, list[tuple[str, slice]]]:
    """Stack the equality system (A, b) and remember block extents."""
    n = topology.node_count
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    blocks: list[tuple[str, slice]] = []

    def push(name: str, new_rows, new_rhs):
        start = len(rows)
        rows.extend(new_rows)
        rhs.extend(new_rhs)
        blocks.append((name, slice(start, len(rows))))

    all_ids = ([mv.node for mv in constraints.moves]
               + list(constraints.fixed_nodes) + list(constraints.sliding_nodes)
               + [i for gm in constraints.group_moves for i in gm.nodes]
               + [i for am in constraints.axis_moves for i in am.nodes]
               + [i for rm in constraints.relative_moves
                  for i in (rm.node_a, rm.node_b)])
    for node in all_ids:
        if not (0 <= node < n):
            raise ValueError(f"node id {node} out of range (n={n})")

    if constraints.moves:
        mv_rows, mv_rhs = [], []
        for mv in constraints.moves:
            for c in range(3):
                e = np.zeros(3)
                e[c] = 1.0
                mv_rows.append(_node_row(n, mv.node, e))
                mv_rhs.append(float(mv.velocity[c]))
        push("move", mv_rows, mv_rhs)
    if constraints.group_moves:
        gm_rows, gm_rhs = [], []
        for gm in constraints.group_moves:
            w = 1.0 / len(gm.nodes)
            for c in range(3):
                row = np.zeros(3 * n)
                for node in gm.nodes:
                    row[3 * node + c] = w
                gm_rows.append(row)
                gm_rhs.append(float(gm.velocity[c]))
        push("group_move", gm_rows, gm_rhs)
    if constraints.axis_moves:
        ax_rows, ax_rhs = [], []
        for am in constraints.axis_moves:
            axis = np.asarray(am.axis, dtype=float)
            norm = np.linalg.norm(axis)
            if norm == 0:
                raise ValueError("axis move with zero axis")
            axis = axis / norm
            row = np.zeros(3 * n)
            w = 1.0 / len(am.nodes)
            for node in am.nodes:
                row[3 * node:3 * node + 3] += w * axis
            ax_rows.append(row)
            ax_rhs.append(float(am.rate))
        push("axis_move", ax_rows, ax_rhs)
    if constraints.relative_moves:
        rm_rows, rm_rhs = [], []
        for rm in constraints.relative_moves:
            for c in range(3):
                row = np.zeros(3 * n)
                row[3 * rm.node_b + c] = 1.0
                row[3 * rm.node_a + c] = -1.0
                rm_rows.append(row)
                rm_rhs.append(float(rm.velocity[c]))
        push("relative_move", rm_rows, rm_rhs)
    if constraints.fixed_nodes:
        fx_rows = []
        for node in constraints.fixed_nodes:
            for c in range(3):
                e = np.zeros(3)
                e[c] = 1.0
                fx_rows.append(_node_row(n, node, e))
        push("fixed", fx_rows, [0.0] * len(fx_rows))
    if constraints.sliding_nodes:
        sl_rows = [_node_row(n, node, (0.0, 0.0, 1.0))
                   for node in constraints.sliding_nodes]
        push("sliding", sl_rows, [0.0] * len(sl_rows))

    # perimeter conservation, always on
    T = topology.triangle_count
    PR = inc.P @ R[:3 * T]
    push("perimeter", list(PR), [0.0] * T)

    if constraints.rigid_edges_locked and topology.virtual_edges:
        push("virtual", list(R[3 * T:]), [0.0] * len(topology.virtual_edges))

    if constraints.edge_rates:
        er_rows, er_rhs = [], []
        # remove any per-triangle mean so the commands cannot fight the
        # perimeter rows over roundoff in the current lengths
        per_tri: dict[int, list[EdgeRate]] = {}
        for er in constraints.edge_rates:
            per_tri.setdefault(er.edge // 3, []).append(er)
        for t, ers in per_tri.items():
            if len(ers) == 3:
                mean = sum(e.rate for e in ers) / 3.0
            else:
                mean = 0.0
            for er in ers:
                er_rows.append(R[er.edge].copy())
                er_rhs.append(float(er.rate) - mean)
        push("edge_rate", er_rows, er_rhs)

    A = np.array(rows) if rows else np.zeros((0, 3 * n))
    b = np.array(rhs)
    return A, b, blocks


def _independent_rows(A: np.ndarray, tol: float = 1e-11) -> np.ndarray:
    """Indices of a maximal linearly independent row subset (QR pivoting)."""
    if A.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, Rf, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rf))
    if diag.size == 0 or diag[0] == 0:
        return np.zeros(0, dtype=int)
    rank = int(np.sum(diag > tol * diag[0]))
    return np.sort(piv[:rank])


def solve_velocities(state: TrussState, topology: TrussTopology,
                     constraints: MotionConstraintSet,
                     tolerances: EngineTolerances | None = None,
                     R: np.ndarray | None = None,
                     inc: IncidenceMatrices | None = None,
                     ) -> tuple[np.ndarray, SolveDiagnostics]:
    """Minimum edge-rate-norm node velocities under equality constraints.

    Raises InfeasibleConstraintsError when the stacked equality system is
    inconsistent beyond ``tol_feas``, naming the worst-violated block.
    """
    tols = tolerances or EngineTolerances()
    if R is None:
        R = rigidity_matrix(state.x, topology, tols.tol_degenerate)
    if inc is None:
        inc = incidence_matrices(topology)
    A, b, blocks = assemble_constraints(state, topology, constraints, R, inc)

    # consistency check on the full system before any row pruning
    x_p, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
    residual = A @ x_p - b
    worst = float(np.max(np.abs(residual))) if residual.size else 0.0
    if worst > tols.tol_feas:
        name = "unknown"
        for blk_name, blk in blocks:
            seg = residual[blk]
            if seg.size and np.max(np.abs(seg)) >= worst - 1e-15:
                name = blk_name
                break
        raise InfeasibleConstraintsError(
            f"inconsistent constraints (block '{name}', residual {worst:.3e})",
            name, worst)

    keep = _independent_rows(A)
    A_r, b_r = A[keep], b[keep]
    m = A_r.shape[0]
    dim = A.shape[1]

    K = np.zeros((dim + m, dim + m))
    K[:dim, :dim] = 2.0 * (R.T @ R)
    K[:dim, dim:] = A_r.T
    K[dim:, :dim] = A_r
    rhs = np.concatenate([np.zeros(dim), b_r])
    sol, _, rank, _ = np.linalg.lstsq(K, rhs, rcond=None)
    xdot = sol[:dim]

    res_full = A @ xdot - b
    diag = SolveDiagnostics(
        objective_value=float(np.sum((R @ xdot) ** 2)),
        max_constraint_residual=float(np.max(np.abs(res_full))) if res_full.size else 0.0,
        kkt_residual_norm=float(np.linalg.norm(K @ sol - rhs)),
        rank_deficient=bool(rank < dim + m),
    )
    return xdot, diag


def roller_rates(xdot: np.ndarray, state: TrussState, topology: TrussTopology,
                 tolerances: EngineTolerances | None = None,
                 R: np.ndarray | None = None,
                 inc: IncidenceMatrices | None = None) -> np.ndarray:
    """Active-roller arc rates reproducing the tube edge-length rates.

    Raises ReconstructionError when the requested edge rates change any
    perimeter (they are then outside the incidence column space).
    """
    tols = tolerances or EngineTolerances()
    if R is None:
        R = rigidity_matrix(state.x, topology, tols.tol_degenerate)
    if inc is None:
        inc = incidence_matrices(topology)
    Ldot = R[:topology.edge_count] @ xdot
    ddot = np.linalg.pinv(inc.B_active_T) @ Ldot
    err = float(np.max(np.abs(inc.B_active_T @ ddot - Ldot), initial=0.0))
    if err > tols.tol_recon:
        raise ReconstructionError(
            f"edge rates violate perimeter invariance (residual {err:.3e} m/s)")
    return ddot


def _project_to_lengths(x: np.ndarray, topology: TrussTopology,
                        targets: np.ndarray, free_mask: np.ndarray,
                        tol: float, max_iter: int = 40,
                        tol_degenerate: float = 1e-9) -> tuple[np.ndarray, int]:
    """Gauss-Newton projection of node positions onto target member lengths.

    A backtracking line search keeps the residual monotone.  That matters
    near flat poses, where the rigidity matrix is ill conditioned and a
    raw Gauss-Newton step can overshoot by orders of magnitude.
    """
    x = x.copy()

    def residual(xv: np.ndarray) -> np.ndarray:
        cur = np.concatenate([edge_lengths(xv, topology, tol_degenerate),
                              virtual_lengths(xv, topology)])
        return cur - targets

    f = residual(x)
    err = float(np.max(np.abs(f)))
    for it in range(max_iter):
        if err < tol:
            return x, it
        J = rigidity_matrix(x, topology, tol_degenerate)[:, free_mask]
        step, _, _, _ = np.linalg.lstsq(J, -f, rcond=None)
        scale = 1.0
        for _ in range(16):
            trial = x.copy()
            trial[free_mask] += scale * step
            f_try = residual(trial)
            err_try = float(np.max(np.abs(f_try)))
            if err_try < err:
                x, f, err = trial, f_try, err_try
                break
            scale *= 0.5
        else:
            return x, it + 1
    return x, max_iter


def integrate_step(state: TrussState, xdot: np.ndarray, ddot: np.ndarray,
                   dt: float, topology: TrussTopology,
                   limits: FeasibilityLimits | None = None,
                   tolerances: EngineTolerances | None = None,
                   fixed_nodes: tuple[int, ...] = (),
                   sliding_nodes: tuple[int, ...] = (),
                   ) -> tuple[TrussState, IntegrationDiagnostics]:
    """Explicit Euler step with drift projection and limit checks.

    Roller positions are integrated exactly (linear); node positions are
    then corrected so the x-implied member lengths match the d-implied
    lengths (and any virtual-edge lengths), holding pinned components.
    """
    tols = tolerances or EngineTolerances()
    lims = limits or FeasibilityLimits()

    new = state.copy()
    new.x = state.x + dt * np.asarray(xdot, dtype=float)
    new.d = state.d + dt * np.asarray(ddot, dtype=float)

    # d is ground truth, so its limits are checked before any position fixup
    _check_limits(new, topology, lims)

    target = np.concatenate([d_implied_lengths(new, topology),
                             [le for _, _, le in topology.virtual_edges]])
    current = np.concatenate([edge_lengths(new.x, topology, tols.tol_degenerate),
                              virtual_lengths(new.x, topology)])
    drift_before = float(np.max(np.abs(current - target)))

    def perimeter_drift(cur):
        T = topology.triangle_count
        tri = (cur[:3 * T] - target[:3 * T]).reshape(T, 3).sum(axis=1)
        return float(np.max(np.abs(tri) / new.perimeter))

    peri_before = perimeter_drift(current)

    projected = False
    iterations = 0
    correction = 0.0
    drift_after = drift_before
    peri_after = peri_before
    # Projection only fires past tol_consistency.  A tighter trigger is not
    # safer: flat poses (all length rates momentarily zero) leave d lagging
    # x by a sub-tolerance amount, and projecting onto that lag pins the
    # structure at the flat pose instead of letting it glide across.
    if drift_before > tols.tol_consistency:
        free = np.ones(new.x.size, dtype=bool)
        for node in fixed_nodes:
            free[3 * node:3 * node + 3] = False
        for node in sliding_nodes:
            free[3 * node + 2] = False
        x_proj, iterations = _project_to_lengths(
            new.x, topology, target, free,
            tol=1e-10,
            tol_degenerate=tols.tol_degenerate)
        correction = float(np.max(np.abs(x_proj - new.x)))
        new.x = x_proj
        projected = True
        current = np.concatenate([edge_lengths(new.x, topology, tols.tol_degenerate),
                                  virtual_lengths(new.x, topology)])
        drift_after = float(np.max(np.abs(current - target)))
        peri_after = perimeter_drift(current)

    return new, IntegrationDiagnostics(drift_before=drift_before,
                                       drift_after=drift_after,
                                       projected=projected,
                                       correction_magnitude=correction,
                                       iterations=iterations,
                                       perimeter_rel_drift_before=peri_before,
                                       perimeter_rel_drift_after=peri_after)


def _check_limits(state: TrussState, topology: TrussTopology,
                  limits: FeasibilityLimits) -> None:
    lengths = d_implied_lengths(state, topology)
    for t in range(topology.triangle_count):
        C = state.perimeter[t]
        dA, dB = state.d[2 * t], state.d[2 * t + 1]
        if not (0.0 < dA < dB < C):
            raise LimitViolationError(
                f"triangle {t}: roller ordering broken (d_A={dA:.4f}, d_B={dB:.4f}, C={C:.4f})",
                t, 3 * t, dA, 0.0)
        hi = limits.upper_bound(C)
        for e in range(3):
            L = lengths[3 * t + e]
            if L < limits.L_min:
                raise LimitViolationError(
                    f"triangle {t} edge {3 * t + e}: length {L:.4f} m below "
                    f"roller-contact limit {limits.L_min:.4f} m",
                    t, 3 * t + e, L, limits.L_min)
            if L > hi:
                raise LimitViolationError(
                    f"triangle {t} edge {3 * t + e}: length {L:.4f} m above "
                    f"half-perimeter bound {hi:.4f} m",
                    t, 3 * t + e, L, hi)


@dataclass
class EdgeMargin:
    edge: int
    triangle: int
    length: float
    lower_margin: float  # distance to the roller-contact limit, m
    upper_margin: float  # distance to the half-perimeter bound, m


@dataclass
class FeasibilityReport:
    margins: list[EdgeMargin]
    feasible: bool
    worst_edge: int
    worst_margin: float

    def min_lower(self) -> float:
        return min(m.lower_margin for m in self.margins)

    def min_upper(self) -> float:
        return min(m.upper_margin for m in self.margins)


def check_feasibility(state: TrussState, topology: TrussTopology,
                      limits: FeasibilityLimits | None = None) -> FeasibilityReport:
    """Per-edge distances to both length limits, from roller positions."""
    lims = limits or FeasibilityLimits()
    lengths = d_implied_lengths(state, topology)
    margins = []
    worst_edge, worst_margin = -1, np.inf
    for k, L in enumerate(lengths):
        t = k // 3
        hi = lims.upper_bound(state.perimeter[t])
        em = EdgeMargin(edge=k, triangle=t, length=float(L),
                        lower_margin=float(L - lims.L_min),
                        upper_margin=float(hi - L))
        margins.append(em)
        m = min(em.lower_margin, em.upper_margin)
        if m < worst_margin:
            worst_margin, worst_edge = m, k
    return FeasibilityReport(margins=margins,
                             feasible=bool(worst_margin > 0.0),
                             worst_edge=worst_edge,
                             worst_margin=float(worst_margin))


def validate_state(state: TrussState, topology: TrussTopology,
                   tolerances: EngineTolerances | None = None) -> None:
    """Check roller ordering and x-vs-d length consistency."""
    tols = tolerances or EngineTolerances()
    T = topology.triangle_count
    if state.d.shape != (2 * T,):
        raise ValueError(f"d must have length {2 * T}")
    if state.perimeter.shape != (T,) or state.pressure.shape != (T,):
        raise ValueError("perimeter and pressure must have one entry per triangle")
    for t in range(T):
        dA, dB = state.d[2 * t], state.d[2 * t + 1]
        if not (0.0 < dA < dB < state.perimeter[t]):
            raise ValueError(f"triangle {t}: roller ordering invalid")
    mismatch = np.abs(edge_lengths(state.x, topology, tols.tol_degenerate)
                      - d_implied_lengths(state, topology))
    if np.max(mismatch) > tols.tol_consistency:
        raise ValueError(
            f"node positions disagree with roller positions by {np.max(mismatch):.3e} m")


def state_from_positions(positions: np.ndarray, topology: TrussTopology,
                         pressure: np.ndarray | float = 0.0) -> TrussState:
    """Build a consistent state from node positions alone.

    Roller arc positions and perimeters are derived from the x-implied edge
    lengths, so the result is exactly self-consistent.
    """
    x = np.asarray(positions, dtype=float).reshape(-1)
    lengths = edge_lengths(x, topology)
    T = topology.triangle_count
    d = np.empty(2 * T)
    C = np.empty(T)
    for t in range(T):
        L1, L2, L3 = lengths[3 * t:3 * t + 3]
        d[2 * t] = L1
        d[2 * t + 1] = L1 + L2
        C[t] = L1 + L2 + L3
    if np.isscalar(pressure):
        pressure = np.full(T, float(pressure))
    return TrussState(x=x, d=d, perimeter=C, pressure=np.asarray(pressure, dtype=float))
