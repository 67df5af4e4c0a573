import numpy as np
import pytest
from hypothesis import given, settings, strategies as st, assume

from isotruss.config import EngineTolerances, FeasibilityLimits
from isotruss.kinematics import (
    AxisMove,
    DegenerateEdgeError,
    EdgeRate,
    GroupMove,
    InfeasibleConstraintsError,
    LimitViolationError,
    Move,
    MotionConstraintSet,
    ReconstructionError,
    check_feasibility,
    d_implied_lengths,
    edge_lengths,
    integrate_step,
    rigidity_matrix,
    roller_rates,
    solve_velocities,
    state_from_positions,
    validate_state,
)
from isotruss.topology import build_topology, incidence_matrices

from oracle import solve_qp_nullspace, lengths_direct, directional_derivative

TUBE = 3.65
S = TUBE / 3.0


def flat_triangle():
    """One tube pinched into an equilateral triangle lying in z = 0.

    Node 0 is the apex (passive roller); nodes 1 and 2 are the base.
    """
    pts = np.array([
        [S / 2.0, S * np.sqrt(3.0) / 2.0, 0.0],
        [0.0, 0.0, 0.0],
        [S, 0.0, 0.0],
    ])
    topo = build_topology(1, [(0, 1, 2)])
    return topo, state_from_positions(pts, topo)


def octahedron():
    """Three tubes pinched into the triangles of a regular octahedron."""
    r = S / np.sqrt(3.0)
    h = S * np.sqrt(6.0) / 3.0
    pts = np.zeros((6, 3))
    for k, az in enumerate((90.0, 210.0, 330.0)):
        a = np.radians(az)
        pts[k] = (r * np.cos(a), r * np.sin(a), 0.0)
    for k, az in enumerate((30.0, 150.0, 270.0)):
        a = np.radians(az)
        pts[3 + k] = (r * np.cos(a), r * np.sin(a), h)
    topo = build_topology(3, [(4, 0, 1), (5, 1, 2), (3, 2, 0)])
    return topo, state_from_positions(pts, topo)


def two_triangle_chain():
    """Two tubes sharing node 1, generic nondegenerate placement."""
    pts = np.array([
        [0.0, 0.0, 0.0],
        [S, 0.0, 0.0],
        [S / 2.0, S * 0.8, 0.1],
        [2.0 * S, 0.15, 0.3],
        [1.6 * S, -0.9, 0.05],
    ])
    topo = build_topology(2, [(0, 1, 2), (1, 3, 4)])
    return topo, state_from_positions(pts, topo)


# ---------------------------------------------------------------- lengths

def test_edge_lengths_345():
    topo = build_topology(1, [(0, 1, 2)])
    pts = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0], [3.0, 0.0, 0.0]])
    L = edge_lengths(pts.ravel(), topo)
    np.testing.assert_allclose(L, [5.0, 4.0, 3.0], atol=1e-12)


def test_edge_lengths_equilateral_from_tube():
    topo, state = flat_triangle()
    L = edge_lengths(state.x, topo)
    np.testing.assert_allclose(L, TUBE / 3.0, atol=1e-12)
    assert abs(L[0] - 1.21667) < 1e-5


def test_degenerate_edge_error():
    topo = build_topology(1, [(0, 1, 2)])
    pts = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(DegenerateEdgeError):
        edge_lengths(pts.ravel(), topo)


# ---------------------------------------------------------------- rigidity

def test_rigidity_row_convention():
    # edge 0 runs between nodes 0 and 1 with p0 - p1 = +x, unit length
    topo = build_topology(1, [(0, 1, 2)])
    pts = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.9, 0.0]])
    R = rigidity_matrix(pts.ravel(), topo)
    np.testing.assert_allclose(R[0, :6], [1, 0, 0, -1, 0, 0], atol=1e-14)
    assert np.all(R[0, 6:] == 0.0)


def test_rigidity_shape_includes_virtual_rows():
    topo = build_topology(1, [(0, 1, 2)], virtual_edges=[(0, 1, S)])
    _, state = flat_triangle()
    R = rigidity_matrix(state.x, topo)
    assert R.shape == (4, 9)


def test_rigidity_first_order_bound():
    topo, state = octahedron()
    rng = np.random.default_rng(7)
    members = list(topo.edges)
    for _ in range(20):
        delta = rng.normal(size=state.x.size)
        delta *= 1e-4 / np.linalg.norm(delta)
        R = rigidity_matrix(state.x, topo)
        lhs = lengths_direct(state.x + delta, members) - lengths_direct(state.x, members)
        err = np.linalg.norm(lhs - R @ delta)
        assert err <= 10.0 * np.linalg.norm(delta) ** 2


def test_rigidity_central_difference_slope():
    topo, state = octahedron()
    rng = np.random.default_rng(3)
    v = rng.normal(size=state.x.size)
    v /= np.linalg.norm(v)
    R = rigidity_matrix(state.x, topo)
    exact = R @ v
    members = list(topo.edges)
    hs = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
    errs = np.array([
        np.linalg.norm(directional_derivative(state.x, v, members, h) - exact)
        for h in hs
    ])
    slope, _ = np.polyfit(np.log(hs), np.log(errs), 1)
    assert abs(slope - 2.0) < 0.1


def test_rigid_body_motion_in_nullspace():
    topo = build_topology(3, [(4, 0, 1), (5, 1, 2), (3, 2, 0)],
                          virtual_edges=[(3, 4, S)])
    _, state = octahedron()
    R = rigidity_matrix(state.x, topo)
    rng = np.random.default_rng(11)
    p = state.positions()
    for _ in range(5):
        t = rng.normal(size=3)
        w = rng.normal(size=3)
        v = (t[None, :] + np.cross(w[None, :], p)).ravel()
        assert np.max(np.abs(R @ v)) < 1e-12


# ---------------------------------------------------------------- solving

def test_apex_lift_on_ground_fixed_triangle():
    topo, state = flat_triangle()
    cs = MotionConstraintSet(moves=(Move(0, (0.0, 0.0, 0.1)),),
                             fixed_nodes=(1, 2))
    xdot, diag = solve_velocities(state, topo, cs)
    assert diag.max_constraint_residual < 1e-10
    assert not diag.rank_deficient
    R = rigidity_matrix(state.x, topo)
    inc = incidence_matrices(topo)
    assert np.max(np.abs(inc.P @ R @ xdot)) < 1e-10
    # lifting the apex of a flat triangle is a rotation about the base line,
    # so no edge changes length and the rollers stay put
    assert diag.objective_value < 1e-18
    np.testing.assert_allclose(xdot[0:3], [0.0, 0.0, 0.1], atol=1e-10)
    assert np.max(np.abs(xdot[3:9])) < 1e-10
    ddot = roller_rates(xdot, state, topo)
    assert np.max(np.abs(ddot)) < 1e-9


def test_solver_matches_nullspace_oracle_simple():
    topo, state = flat_triangle()
    cs = MotionConstraintSet(moves=(Move(0, (0.0, 0.0, 0.1)),),
                             fixed_nodes=(1, 2))
    xdot, diag = solve_velocities(state, topo, cs)
    R = rigidity_matrix(state.x, topo)
    inc = incidence_matrices(topo)
    from isotruss.kinematics import assemble_constraints
    A, b, _ = assemble_constraints(state, topo, cs, R, inc)
    ref, unique = solve_qp_nullspace(R, A, b)
    assert unique and not diag.rank_deficient
    assert np.max(np.abs(xdot - ref)) < 1e-8


def test_top_node_on_fully_fixed_base_is_overconstrained():
    # with its triangle's other two nodes pinned, a lone top node can only
    # move tangent to a surface of constant edge-length sum; an arbitrary
    # velocity command is inconsistent with perimeter conservation
    topo, state = octahedron()
    cs = MotionConstraintSet(moves=(Move(4, (0.02, 0.01, 0.03)),),
                             fixed_nodes=(0, 1, 2))
    with pytest.raises(InfeasibleConstraintsError):
        solve_velocities(state, topo, cs)


def test_solver_matches_oracle_on_octahedron():
    topo, state = octahedron()
    cs = MotionConstraintSet(moves=(Move(4, (0.02, 0.01, 0.03)),),
                             fixed_nodes=(1, 2))
    xdot, diag = solve_velocities(state, topo, cs)
    assert diag.max_constraint_residual < 1e-9
    R = rigidity_matrix(state.x, topo)
    inc = incidence_matrices(topo)
    from isotruss.kinematics import assemble_constraints
    A, b, _ = assemble_constraints(state, topo, cs, R, inc)
    ref, unique = solve_qp_nullspace(R, A, b)
    if unique and not diag.rank_deficient:
        assert np.max(np.abs(xdot - ref)) < 1e-8
    # either way both must satisfy constraints and conserve perimeters
    assert np.max(np.abs(inc.P @ R[:topo.edge_count] @ xdot)) < 1e-8
    assert np.max(np.abs(xdot[3:9])) < 1e-10


def test_contradictory_move_and_fixed_node():
    topo, state = flat_triangle()
    cs = MotionConstraintSet(moves=(Move(0, (0.0, 0.0, 0.1)),),
                             fixed_nodes=(0, 1, 2))
    with pytest.raises(InfeasibleConstraintsError) as exc:
        solve_velocities(state, topo, cs)
    assert exc.value.block in ("move", "fixed")
    assert exc.value.residual > 1e-8


def test_zero_velocity_move_on_fixed_node_is_consistent():
    topo, state = flat_triangle()
    cs = MotionConstraintSet(moves=(Move(0, (0.0, 0.0, 0.0)),),
                             fixed_nodes=(0, 1, 2))
    xdot, diag = solve_velocities(state, topo, cs)
    assert np.max(np.abs(xdot)) < 1e-12


def test_conflicting_duplicate_moves():
    topo, state = flat_triangle()
    cs = MotionConstraintSet(moves=(Move(0, (0.0, 0.0, 0.1)),
                                    Move(0, (0.0, 0.0, -0.1))),
                             fixed_nodes=(1, 2))
    with pytest.raises(InfeasibleConstraintsError):
        solve_velocities(state, topo, cs)


def test_group_move_contradiction_names_block():
    topo, state = octahedron()
    cs = MotionConstraintSet(group_moves=(GroupMove((0, 1), (1.0, 0.0, 0.0)),),
                             fixed_nodes=(0, 1, 2))
    with pytest.raises(InfeasibleConstraintsError) as exc:
        solve_velocities(state, topo, cs)
    assert exc.value.block in ("group_move", "fixed")


def test_axis_move_drives_projection():
    topo, state = octahedron()
    cs = MotionConstraintSet(axis_moves=(AxisMove((3, 4, 5), (0, 0, 1), 0.04),),
                             fixed_nodes=(0, 1, 2))
    xdot, diag = solve_velocities(state, topo, cs)
    top_vz = xdot.reshape(-1, 3)[3:6, 2]
    assert abs(np.mean(top_vz) - 0.04) < 1e-9
    assert diag.max_constraint_residual < 1e-9


def test_sliding_node_keeps_vertical_fixed_only():
    topo, state = octahedron()
    cs = MotionConstraintSet(moves=(Move(4, (0.03, 0.0, 0.02)),),
                             fixed_nodes=(0,), sliding_nodes=(1, 2))
    xdot, diag = solve_velocities(state, topo, cs)
    v = xdot.reshape(-1, 3)
    assert abs(v[1, 2]) < 1e-10 and abs(v[2, 2]) < 1e-10
    assert diag.max_constraint_residual < 1e-9


# -------------------------------------------------------------- roller map

def solve_for_edge_rates(topo, state, rates, fixed):
    cs = MotionConstraintSet(
        edge_rates=tuple(EdgeRate(k, r) for k, r in enumerate(rates)),
        fixed_nodes=fixed)
    xdot, diag = solve_velocities(state, topo, cs)
    assert diag.max_constraint_residual < 1e-9
    return xdot


def test_roller_rates_base_lengthening():
    topo, state = flat_triangle()
    xdot = solve_for_edge_rates(topo, state, (1.0, -1.0, 0.0), (0,))
    ddot = roller_rates(xdot, state, topo)
    np.testing.assert_allclose(ddot, [1.0, 0.0], atol=1e-8)


def test_roller_rates_second_pattern():
    topo, state = flat_triangle()
    xdot = solve_for_edge_rates(topo, state, (0.0, 1.0, -1.0), (0,))
    ddot = roller_rates(xdot, state, topo)
    np.testing.assert_allclose(ddot, [0.0, 1.0], atol=1e-8)


def test_roller_rates_reject_uniform_expansion():
    topo, state = flat_triangle()
    center = state.positions().mean(axis=0)
    xdot = (state.positions() - center).ravel() * 0.1
    with pytest.raises(ReconstructionError):
        roller_rates(xdot, state, topo)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-0.05, 0.05), min_size=6, max_size=6))
def test_roller_reconstruction_round_trip(dd):
    topo, state = octahedron()
    ddot_cmd = np.asarray(dd)
    assume(np.max(np.abs(ddot_cmd)) > 1e-6)
    inc = incidence_matrices(topo)
    rates = inc.B_active_T @ ddot_cmd
    xdot = solve_for_edge_rates(topo, state, rates, (0,))
    ddot = roller_rates(xdot, state, topo)
    np.testing.assert_allclose(ddot, ddot_cmd, atol=1e-8)


# -------------------------------------------------------------- integration

def test_integrate_identity():
    topo, state = flat_triangle()
    new, diag = integrate_step(state, np.zeros(9), np.zeros(2), 0.05, topo)
    np.testing.assert_array_equal(new.x, state.x)
    np.testing.assert_array_equal(new.d, state.d)
    assert not diag.projected


def test_integrate_constant_roller_rate_one_second():
    topo, state = flat_triangle()
    inc = incidence_matrices(topo)
    ddot = np.array([0.05, 0.0])
    rates = inc.B_active_T @ ddot
    d0 = state.d.copy()
    C0 = state.perimeter.copy()
    dt = 0.01
    tols = EngineTolerances()
    for _ in range(100):
        xdot = solve_for_edge_rates(topo, state, rates, (1,))
        state, diag = integrate_step(state, xdot, ddot, dt, topo,
                                     fixed_nodes=(1,))
        # after the projection stage the mismatch never exceeds the trigger,
        # and any frame that actually projected ends far below it
        assert diag.drift_after <= tols.tol_consistency
        if diag.projected:
            assert diag.drift_after < 1e-9
    assert abs(state.d[0] - (d0[0] + 0.05)) < 1e-12
    assert abs(state.d[1] - d0[1]) < 1e-12
    np.testing.assert_array_equal(state.perimeter, C0)
    validate_state(state, topo)
    # x follows d up to the consistency tolerance
    np.testing.assert_allclose(edge_lengths(state.x, topo),
                               d_implied_lengths(state, topo), atol=1e-6)


def test_integrate_strict_consistency_tracks_exactly():
    # a hair-trigger consistency tolerance forces projection every step,
    # pinning x-implied lengths onto the roller ground truth
    topo, state = flat_triangle()
    inc = incidence_matrices(topo)
    ddot = np.array([0.03, -0.01])
    rates = inc.B_active_T @ ddot
    tols = EngineTolerances(tol_consistency=1e-12)
    for _ in range(50):
        xdot = solve_for_edge_rates(topo, state, rates, (1,))
        state, diag = integrate_step(state, xdot, ddot, 0.01, topo,
                                     fixed_nodes=(1,), tolerances=tols)
        assert diag.drift_after < 1e-9
    np.testing.assert_allclose(edge_lengths(state.x, topo),
                               d_implied_lengths(state, topo), atol=1e-9)


def test_limit_violation_roller_contact():
    topo, state = flat_triangle()
    gap = state.d[1] - state.d[0]
    shift = (gap - 0.25) / 2.0    # close the gap to 0.25 m symmetrically
    ddot = np.array([shift, -shift])
    with pytest.raises(LimitViolationError) as exc:
        integrate_step(state, np.zeros(9), ddot, 1.0, topo)
    assert exc.value.triangle == 0
    assert exc.value.edge == 1
    assert exc.value.bound == pytest.approx(0.30)


def test_limit_violation_half_perimeter():
    topo = build_topology(1, [(0, 1, 2)])
    # isoceles triangle with base 1.82 m out of a 3.65 m tube: valid shape,
    # but beyond the C/2 - eps feasibility bound
    base = 1.82
    other = (TUBE - base) / 2.0
    y = np.sqrt(other ** 2 - (base / 2.0) ** 2)
    pts = np.array([[0.0, 0.0, 0.0], [base, 0.0, 0.0], [base / 2.0, y, 0.0]])
    state = state_from_positions(pts, topo)
    with pytest.raises(LimitViolationError) as exc:
        integrate_step(state, np.zeros(9), np.zeros(2), 0.05, topo)
    assert exc.value.edge == 0
    assert exc.value.bound == pytest.approx(TUBE / 2.0 - 0.02)


def test_limit_violation_ordering():
    topo, state = flat_triangle()
    state.d = np.array([2.0, 1.0])
    with pytest.raises(LimitViolationError):
        integrate_step(state, np.zeros(9), np.zeros(2), 0.05, topo)


def test_projection_follows_rollers_not_euler():
    # a deliberately inconsistent xdot: d advances but x stands still;
    # the projector must drag x onto the d-implied lengths
    topo, state = flat_triangle()
    ddot = np.array([0.004, 0.0])
    new, diag = integrate_step(state, np.zeros(9), ddot, 0.05, topo,
                               fixed_nodes=(1,))
    assert diag.projected
    np.testing.assert_allclose(edge_lengths(new.x, topo),
                               d_implied_lengths(new, topo), atol=1e-9)
    np.testing.assert_array_equal(new.x[3:6], state.x[3:6])


# -------------------------------------------------------------- feasibility

def test_feasibility_margins_equilateral():
    topo, state = flat_triangle()
    report = check_feasibility(state, topo)
    assert report.feasible
    for m in report.margins:
        assert m.lower_margin == pytest.approx(TUBE / 3.0 - 0.30, abs=1e-9)
        assert m.upper_margin == pytest.approx(0.588333, abs=1e-4)


def test_feasibility_flags_edge_at_lower_limit():
    topo = build_topology(1, [(0, 1, 2)])
    lims = FeasibilityLimits()
    b = lims.L_min
    other = (TUBE - b) / 2.0
    y = np.sqrt(other ** 2 - (b / 2.0) ** 2)
    pts = np.array([[0.0, 0.0, 0.0], [b, 0.0, 0.0], [b / 2.0, y, 0.0]])
    state = state_from_positions(pts, topo)
    report = check_feasibility(state, topo, lims)
    assert not report.feasible
    assert report.worst_margin == pytest.approx(0.0, abs=1e-9)
    assert report.worst_edge == 0


def test_feasibility_flags_half_perimeter_violation():
    topo = build_topology(1, [(0, 1, 2)])
    b = 1.90
    other = (TUBE - b) / 2.0
    y = np.sqrt(other ** 2 - (b / 2.0) ** 2 + 0j).real
    # 1.90 > C/2 means no planar triangle exists; build the state from
    # roller positions directly instead of from geometry
    pts = np.array([[0.0, 0.0, 0.0], [1.2, 0.0, 0.0], [0.6, 1.0, 0.0]])
    state = state_from_positions(pts, topo)
    state.d = np.array([1.90, 1.90 + (TUBE - 1.90) / 2.0])
    state.perimeter = np.array([TUBE])
    report = check_feasibility(state, topo)
    assert not report.feasible
    assert report.margins[0].upper_margin < 0.0


def test_validate_state_catches_inconsistency():
    topo, state = flat_triangle()
    bad = state.copy()
    bad.x[0] += 0.01
    with pytest.raises(ValueError):
        validate_state(bad, topo)
    validate_state(state, topo)


# -------------------------------------------------------- oracle equivalence

TOPOLOGY_BUILDERS = [flat_triangle, two_triangle_chain, octahedron]


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_oracle_equivalence_randomized(data):
    builder = data.draw(st.sampled_from(TOPOLOGY_BUILDERS))
    topo, state = builder()
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 31 - 1)))
    state.x = state.x + rng.normal(scale=0.03, size=state.x.size)
    state = state_from_positions(state.positions(), topo)

    n = topo.node_count
    move_node = int(rng.integers(0, n))
    vel = tuple(rng.uniform(-0.05, 0.05, size=3))
    others = [k for k in range(n) if k != move_node]
    rng.shuffle(others)
    n_fixed = int(rng.integers(0, min(3, len(others)) + 1))
    cs = MotionConstraintSet(moves=(Move(move_node, vel),),
                             fixed_nodes=tuple(others[:n_fixed]))
    try:
        xdot, diag = solve_velocities(state, topo, cs)
    except InfeasibleConstraintsError:
        assume(False)
        return

    R = rigidity_matrix(state.x, topo)
    inc = incidence_matrices(topo)
    from isotruss.kinematics import assemble_constraints
    A, b, _ = assemble_constraints(state, topo, cs, R, inc)
    ref, unique = solve_qp_nullspace(R, A, b)

    assert np.max(np.abs(A @ xdot - b)) < 1e-8
    assert np.max(np.abs(inc.P @ R[:topo.edge_count] @ xdot)) < 1e-8
    for node in cs.fixed_nodes:
        assert np.max(np.abs(xdot[3 * node:3 * node + 3])) < 1e-10
    if unique and not diag.rank_deficient:
        assert np.max(np.abs(xdot - ref)) < 1e-8
