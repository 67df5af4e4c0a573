"""Named motion scripts buildable from plain parameter dicts.

This is the bridge between serialized script requests (YAML files on the
CLI, JSON messages on the session socket) and the script builders in
``motions``.  Each entry takes only scalars, so a script is fully described
by ``{"script": name, "params": {...}}``.

Script file schema (YAML):

    version: 1            # mandatory, only version 1 exists
    script: twist         # one of available_scripts()
    name: twist120        # optional display name
    params:               # builder parameters, all optional unless noted
      angle_deg: 120.0

Unknown scripts, unknown parameters, and group requirements the chosen
configuration cannot satisfy all raise ValueError at build time.
"""
from __future__ import annotations

import yaml

from .config import FeasibilityLimits
from .configurations import RobotSpec, node_groups, node_masses
from .kinematics import TrussState
from .motions import (
    MotionScript,
    locomotion_cycle_script,
    squat_extend_script,
    sweep_script,
    tilt_script,
    twist_script,
)
from .topology import TrussTopology

SCHEMA_VERSION = 1


def _require(params: dict, key: str, script: str) -> float:
    if key not in params:
        raise ValueError(f"script '{script}' needs parameter '{key}'")
    return params[key]


def _need_groups(groups: dict, names, script: str) -> None:
    missing = [g for g in names if g not in groups]
    if missing:
        raise ValueError(
            f"script '{script}' needs node groups {missing}; "
            f"this configuration has {sorted(groups)}")


def _build_twist(params, ctx) -> MotionScript:
    groups = ctx["groups"]
    _need_groups(groups, ("bottom",), "twist")
    spin = params.pop("spin_group", "middle" if "middle" in groups else "top")
    _need_groups(groups, (spin,), "twist")
    hold = groups["top"] if spin != "top" and "top" in groups else ()
    angle = _require(params, "angle_deg", "twist")
    params.pop("angle_deg")
    return twist_script(angle, groups[spin], groups["bottom"],
                        hold_nodes=hold, topology=ctx["topology"], **params)


def _build_height(params, ctx) -> MotionScript:
    groups = ctx["groups"]
    _need_groups(groups, ("top", "bottom"), "height")
    target = _require(params, "target_height", "height")
    params.pop("target_height")
    return squat_extend_script(target, groups, ctx["spec"].scale,
                               topology=ctx["topology"],
                               limits=ctx["limits"], **params)


def _build_tilt(params, ctx) -> MotionScript:
    groups = ctx["groups"]
    _need_groups(groups, ("top", "middle", "bottom"), "tilt")
    angle = _require(params, "angle_deg", "tilt")
    params.pop("angle_deg")
    return tilt_script(angle, groups, **params)


def _build_sweep(params, ctx) -> MotionScript:
    groups = ctx["groups"]
    _need_groups(groups, ("top", "middle", "bottom"), "sweep")
    angle = _require(params, "angle_deg", "sweep")
    params.pop("angle_deg")
    return sweep_script(angle, groups, ctx["limits"], **params)


def _build_locomotion(params, ctx) -> MotionScript:
    groups = ctx["groups"]
    _need_groups(groups, ("front", "rear", "feet", "contacts"), "locomotion")
    return locomotion_cycle_script(groups, ctx["topology"],
                                   masses=ctx["masses"], **params)


_BUILDERS = {
    "twist": _build_twist,
    "height": _build_height,
    "tilt": _build_tilt,
    "sweep": _build_sweep,
    "locomotion": _build_locomotion,
}

_GROUP_NEEDS = {
    "twist": ("bottom",),
    "height": ("top", "bottom"),
    "tilt": ("top", "middle", "bottom"),
    "sweep": ("top", "middle", "bottom"),
    "locomotion": ("front", "rear", "feet", "contacts"),
}


def available_scripts(config_name: str) -> list[str]:
    """Script kinds whose group requirements this configuration meets."""
    groups = node_groups(config_name)
    return [k for k, needs in _GROUP_NEEDS.items()
            if all(g in groups for g in needs)]


def build_named_script(kind: str, params: dict | None, *,
                       config_name: str, topology: TrussTopology,
                       state: TrussState, spec: RobotSpec | None = None,
                       limits: FeasibilityLimits | None = None,
                       name: str | None = None) -> MotionScript:
    """Instantiate a script by name for a built robot.

    Raises ValueError for unknown kinds, missing or unknown parameters,
    and commands outside build-time envelopes (e.g. sweep past the limit).
    """
    if kind not in _BUILDERS:
        raise ValueError(f"unknown script '{kind}' "
                         f"(expected one of {sorted(_BUILDERS)})")
    spec = spec or RobotSpec()
    ctx = {
        "config_name": config_name,
        "topology": topology,
        "state": state,
        "spec": spec,
        "groups": node_groups(config_name),
        "limits": limits or FeasibilityLimits(),
        "masses": node_masses(topology, spec),
    }
    params = dict(params or {})
    if name is not None:
        params.setdefault("name", name)
    try:
        return _BUILDERS[kind](params, ctx)
    except TypeError as e:
        # builder signatures reject unknown parameters; surface them as
        # schema errors rather than tracebacks
        raise ValueError(f"bad parameters for script '{kind}': {e}") from e


def load_script_file(path: str) -> tuple[str, dict, str | None]:
    """Parse a script file, returning (kind, params, display name)."""
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ValueError(f"script file {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ValueError(f"script file {path} is not a mapping")
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"script file {path}: unsupported version {version!r}")
    kind = data.get("script")
    if not isinstance(kind, str):
        raise ValueError(f"script file {path}: missing 'script' name")
    params = data.get("params") or {}
    if not isinstance(params, dict):
        raise ValueError(f"script file {path}: 'params' must be a mapping")
    name = data.get("name")
    return kind, params, name
