"""Isoperimetric truss robots: topology, kinematics, motions, rollers, teleoperation.

The package simulates trusses built from inflated tubes pinched into
triangles by roller units.  Roller arc positions are the actuated
coordinates; node motion follows through a constrained velocity solve and
drift-projected integration.  See README.md for the map of modules.
"""

__version__ = "0.1.0"

from .config import EngineTolerances, FeasibilityLimits, load_engine_config, load_limits
from .configurations import (
    CONFIG_NAMES,
    RobotSpec,
    build_robot,
    geometry_metrics,
    node_groups,
    node_masses,
)
from .kinematics import (
    AxisMove,
    EdgeRate,
    GroupMove,
    InfeasibleConstraintsError,
    LimitViolationError,
    MotionConstraintSet,
    Move,
    RelativeMove,
    TrussState,
    check_feasibility,
    integrate_step,
    roller_rates,
    solve_velocities,
    state_from_positions,
)
from .motions import (
    MotionScript,
    Phase,
    TrajectoryResult,
    height_envelope,
    locomotion_cycle_script,
    max_tilt_angle,
    run_script,
    squat_extend_script,
    stability_margin,
    sweep_script,
    tilt_script,
    twist_script,
)
from .rollers import (
    RollerCommandFrame,
    RollerUnitModel,
    battery_endurance,
    decode_frame,
    encode_frame,
    motor_current,
    step_unit,
)
from .scriptlib import available_scripts, build_named_script, load_script_file
from .topology import TrussTopology, build_topology, incidence_matrices
from .trajectory import read_trajectory, replay_length_error, write_trajectory
