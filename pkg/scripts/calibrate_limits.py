#!/usr/bin/env python3
"""Map how the feasibility limit settings move the motion envelopes.

The two limit parameters are hardware properties (roller collision length
and the half-perimeter safety margin).  This sweep shows which envelope
each one controls: the squat floor and tilt maxima ride on the upper bound
(L_half_margin), the extension ceiling on the roller-contact bound
(L_min).

Usage: python scripts/calibrate_limits.py
"""
import sys

from isotruss.config import FeasibilityLimits
from isotruss.configurations import (
    RobotSpec,
    build_robot,
    node_groups,
    node_masses,
)
from isotruss.motions import height_envelope, max_tilt_angle


def main() -> int:
    topo, state = build_robot("solar")
    groups = node_groups("solar")
    masses = node_masses(topo)
    scale = RobotSpec().scale

    print(f"{'L_min':>6} {'L_half':>7} | {'squat':>6} {'extend':>7} "
          f"{'tilt_j':>7} {'tilt_e':>7}")
    for L_min in (0.30, 0.45, 0.60):
        for L_half in (0.02, 0.17, 0.30):
            lims = FeasibilityLimits(L_min=L_min, L_half_margin=L_half)
            lo = height_envelope(state, topo, groups, scale,
                                 direction="down", base="fixed", limits=lims)
            hi = height_envelope(state, topo, groups, scale,
                                 direction="up", base="fixed", limits=lims)
            tj = max_tilt_angle(state, topo, groups, axis_mode="joint",
                                limits=lims, masses=masses)
            te = max_tilt_angle(state, topo, groups, axis_mode="edge",
                                limits=lims, masses=masses)
            print(f"{L_min:6.2f} {L_half:7.2f} | {lo.achieved:6.2f} "
                  f"{hi.achieved:7.2f} {tj.verified:7.1f} {te.verified:7.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
