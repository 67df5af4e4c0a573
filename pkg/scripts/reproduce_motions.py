#!/usr/bin/env python3
"""Re-run every headline motion and print the measured figures.

Usage: python scripts/reproduce_motions.py [--quick]

--quick skips the envelope searches (tilt/height), which dominate runtime.
"""
import argparse
import sys
import time

import numpy as np

from isotruss.config import FeasibilityLimits
from isotruss.configurations import (
    RobotSpec,
    build_robot,
    geometry_metrics,
    node_groups,
    node_masses,
)
from isotruss.kinematics import d_implied_lengths
from isotruss.motions import (
    azimuth_advance_deg,
    height_envelope,
    locomotion_cycle_script,
    max_tilt_angle,
    net_displacement,
    panel_azimuth_deg,
    run_script,
    sweep_script,
    tilt_script,
    twist_script,
    upward_winding,
)
from isotruss.rollers import battery_endurance, motor_current

HARDWARE_LIMITS = FeasibilityLimits(L_min=0.45, L_half_margin=0.17)


def banner(title):
    print(f"\n== {title} " + "=" * max(0, 60 - len(title)))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="skip the envelope searches")
    args = ap.parse_args(argv)
    t_start = time.perf_counter()

    banner("deployment and power")
    geo = geometry_metrics(None, "solar")
    motor = motor_current(76.0)
    print(f"deployed volume   {geo['deployed_volume']:.2f} m^3")
    print(f"stow ratio        {geo['stow_ratio']:.1f}")
    print(f"motor current     {motor:.2f} A at 76 kPa")
    print(f"endurance         {battery_endurance(1.3, motor):.1f} min")

    topo, state = build_robot("solar")
    groups = node_groups("solar")
    masses = node_masses(topo)

    banner("twist 120 deg")
    res = run_script(
        twist_script(120.0, groups["middle"], groups["bottom"],
                     hold_nodes=groups["top"], topology=topo),
        state, topo, masses=masses)
    print(f"completed         {res.completed} ({len(res.frames) - 1} steps)")
    print(f"middle advance    "
          f"{azimuth_advance_deg(state, res.final_state, groups['middle']):.2f} deg")
    print(f"top advance       "
          f"{azimuth_advance_deg(state, res.final_state, groups['top']):.2e} deg")

    banner("sweep after 20 deg tilt")
    tilted = run_script(tilt_script(20.0, groups), state, topo, masses=masses)
    top = upward_winding(tilted.final_state, groups["top"])
    az0 = panel_azimuth_deg(tilted.final_state, top)
    for target in (35.0, -35.0):
        swept = run_script(sweep_script(target, groups), tilted.final_state,
                           topo, masses=masses)
        az1 = panel_azimuth_deg(swept.final_state, top)
        adv = (az1 - az0 + 180.0) % 360.0 - 180.0
        print(f"sweep {target:+5.1f}       -> {adv:+7.2f} deg "
              f"(completed {swept.completed})")

    banner("locomotion cycle")
    ltopo, lstate = build_robot("locomotion")
    lgroups = node_groups("locomotion")
    lmasses = node_masses(ltopo)
    lres = run_script(locomotion_cycle_script(lgroups, ltopo, masses=lmasses),
                      lstate, ltopo, masses=lmasses)
    closure = float(np.max(np.abs(d_implied_lengths(lres.final_state, ltopo)
                                  - d_implied_lengths(lstate, ltopo))))
    print(f"completed         {lres.completed}")
    print(f"net displacement  {net_displacement(lstate, lres.final_state)[0]:.3f} m")
    print(f"shape closure     {closure:.2e} m")
    print(f"min stability     {min(f.stability for f in lres.frames):.3f} m")

    if not args.quick:
        banner("height envelope (hardware limit profile)")
        scale = RobotSpec().scale
        for base in ("fixed", "sliding"):
            lo = height_envelope(state, topo, groups, scale, direction="down",
                                 base=base, limits=HARDWARE_LIMITS)
            hi = height_envelope(state, topo, groups, scale, direction="up",
                                 base=base, limits=HARDWARE_LIMITS)
            print(f"{base:8s}          {lo.achieved:.2f} .. {hi.achieved:.2f} m")

        banner("tilt envelope (hardware limit profile)")
        for mode in ("joint", "edge"):
            env = max_tilt_angle(state, topo, groups, axis_mode=mode,
                                 limits=HARDWARE_LIMITS, masses=masses)
            print(f"{mode:5s} axis        {env.verified:.1f} deg "
                  f"(binds: {env.binding})")

    print(f"\ntotal {time.perf_counter() - t_start:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
