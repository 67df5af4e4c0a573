"""Command line entry points: headless runs, metrics reports, and serving.

Subcommands:

  run      execute a script file against a configuration, write a
           trajectory table
  metrics  print deployment and power figures for a configuration
  serve    start the realtime session endpoint

Exit codes: 0 success, 1 run aborted (reason on stderr), 2 usage or I/O
error.  ISOTRUSS_CONFIG may point at a YAML file providing defaults for
the engine tolerances, limits, and robot sections; command line flags win.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import yaml

from .config import (
    ENV_CONFIG,
    EngineTolerances,
    FeasibilityLimits,
    load_engine_config,
    load_limits,
)
from .configurations import (
    CONFIG_NAMES,
    RobotSpec,
    build_robot,
    geometry_metrics,
    node_masses,
)
from .motions import run_script
from .rollers import BATTERY_CAPACITY_AH, RADIO_IDLE_A, battery_endurance, motor_current
from .scriptlib import build_named_script, load_script_file
from .trajectory import write_trajectory


class UsageError(Exception):
    pass


def _override_spec(spec: RobotSpec, data: dict) -> RobotSpec:
    fields = {f.name for f in dataclasses.fields(spec)}
    unknown = set(data) - fields
    if unknown:
        raise UsageError(f"unknown robot spec keys: {sorted(unknown)}")
    return dataclasses.replace(spec, **data)


def resolve_robot(config_arg: str | None) -> tuple[str, RobotSpec]:
    """Map --config (builtin name, file path, or None) to (name, spec).

    With no flag, the ISOTRUSS_CONFIG file's robot section applies if
    present; otherwise the solar array is the default.
    """
    spec = RobotSpec()
    if config_arg is None:
        path = os.environ.get(ENV_CONFIG)
        if path is None:
            return "solar", spec
        return _robot_from_file(path, default_ok=True)
    if config_arg in CONFIG_NAMES:
        return config_arg, spec
    if os.path.exists(config_arg):
        return _robot_from_file(config_arg, default_ok=False)
    raise UsageError(
        f"unknown configuration '{config_arg}': not one of {CONFIG_NAMES} "
        f"and not a file")


def _robot_from_file(path: str, default_ok: bool) -> tuple[str, RobotSpec]:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise UsageError(f"config file {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} is not a mapping")
    robot = data.get("robot", data if "base" in data else None)
    if robot is None:
        if default_ok:
            return "solar", RobotSpec()
        raise UsageError(f"config file {path} has no robot section")
    base = robot.get("base", "solar")
    if base not in CONFIG_NAMES:
        raise UsageError(f"config file {path}: unknown base '{base}'")
    return base, _override_spec(RobotSpec(), robot.get("spec") or {})


def _resolve_limits(args) -> tuple[EngineTolerances, FeasibilityLimits]:
    tols, limits = load_engine_config()
    if getattr(args, "limits", None):
        try:
            limits = load_limits(args.limits)
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot load limits: {e}") from e
    return tols, limits


def cmd_run(args) -> int:
    name, spec = resolve_robot(args.config)
    tols, limits = _resolve_limits(args)
    if not os.path.exists(args.script):
        raise UsageError(f"script file not found: {args.script}")
    kind, params, display = load_script_file(args.script)
    topology, state = build_robot(name, spec)
    script = build_named_script(kind, params, config_name=name,
                                topology=topology, state=state, spec=spec,
                                limits=limits, name=display)
    masses = node_masses(topology, spec)
    result = run_script(script, state, topology, dt=args.dt,
                        limits=limits, tolerances=tols, masses=masses)
    if args.out:
        try:
            write_trajectory(result, topology, args.out)
        except OSError as e:
            raise UsageError(f"cannot write {args.out}: {e}") from e
    if not result.completed:
        a = result.abort
        where = f"phase '{a.phase}' tick {a.tick}" if a else "unknown"
        reason = f"{a.reason}: {a.message}" if a else "unknown"
        print(f"aborted in {where}: {reason}", file=sys.stderr)
        return 1
    print(f"completed '{script.name}' in {len(result.frames) - 1} steps "
          f"({result.duration:.2f} s simulated)")
    return 0


def cmd_metrics(args) -> int:
    name, spec = resolve_robot(args.config)
    topology, _ = build_robot(name, spec)
    geo = geometry_metrics(spec, name)
    T = topology.triangle_count
    active, passive = 2 * T, T
    mass_active = active * spec.active_roller_mass
    mass_passive = passive * spec.passive_roller_mass
    motor = motor_current(spec.pressure_structural)
    minutes = battery_endurance(BATTERY_CAPACITY_AH, motor, RADIO_IDLE_A)
    lines = [
        f"configuration      {name}",
        f"tubes              {T}",
        f"deployed volume    {geo['deployed_volume']:.2f} m^3",
        f"stowed volume      {geo['stowed_volume']:.3f} m^3",
        f"stow ratio         {geo['stow_ratio']:.1f}",
        f"footprint          {geo['footprint']:.2f} m^2",
        f"height             {geo['height']:.2f} m",
        "mass",
        f"  active rollers   {active:2d} x {spec.active_roller_mass:.2f} kg"
        f" = {mass_active:6.2f} kg",
        f"  passive rollers  {passive:2d} x {spec.passive_roller_mass:.2f} kg"
        f" = {mass_passive:6.2f} kg",
        f"  total            {mass_active + mass_passive:6.2f} kg",
        "power",
        f"  motor current    {motor:.2f} A at {spec.pressure_structural:.0f} kPa",
        f"  radio idle       {RADIO_IDLE_A * 1000:.1f} mA",
        f"  battery          {BATTERY_CAPACITY_AH:.1f} Ah per unit",
        f"  endurance        {minutes:.1f} min",
    ]
    print("\n".join(lines))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    name, spec = resolve_robot(args.config)
    _, limits = _resolve_limits(args)
    app = create_app(config_name=name, spec=spec, limits=limits,
                     rate_hz=args.rate)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isotruss")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a script file headlessly")
    run.add_argument("--config", help="single|solar|locomotion or a YAML file")
    run.add_argument("--script", required=True, help="script file (YAML)")
    run.add_argument("--dt", type=float, default=0.05,
                     help="integration step, s")
    run.add_argument("--out", help="trajectory output path (CSV)")
    run.add_argument("--limits", help="feasibility limits file (YAML)")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="print configuration metrics")
    met.add_argument("--config", help="single|solar|locomotion or a YAML file")
    met.set_defaults(func=cmd_metrics)

    srv = sub.add_parser("serve", help="serve the realtime session endpoint")
    srv.add_argument("--config", help="single|solar|locomotion or a YAML file")
    srv.add_argument("--port", type=int, default=8750)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--rate", type=float, default=20.0,
                     help="telemetry rate, Hz")
    srv.add_argument("--limits", help="feasibility limits file (YAML)")
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
