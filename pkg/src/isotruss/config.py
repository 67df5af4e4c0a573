"""Engine tolerances, feasibility limits, and global configuration loading.

A global config file (YAML) may override any of the defaults below.  Its path
is taken from the ``ISOTRUSS_CONFIG`` environment variable unless passed
explicitly.  Recognized top-level keys: ``engine``, ``limits``, ``robot``.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import yaml

ENV_CONFIG = "ISOTRUSS_CONFIG"


@dataclass(frozen=True)
class EngineTolerances:
    """Numerical tolerances and the default integration step."""

    tol_feas: float = 1e-8          # equality-constraint consistency, m/s
    tol_consistency: float = 1e-6   # x-vs-d mismatch that triggers projection, m
    tol_recon: float = 1e-8         # roller-rate reconstruction residual, m/s
    tol_degenerate: float = 1e-9    # edge length below this is degenerate, m
    dt: float = 0.05                # integration step, s


@dataclass(frozen=True)
class FeasibilityLimits:
    """Hard geometric limits on tube edge lengths and sweep commands.

    ``L_min`` is the roller-contact limit: two roller units on the same tube
    cannot pass through each other.  ``L_half_margin`` keeps every edge below
    half its tube perimeter so the triangle inequality never degenerates.
    Both are hardware-dependent settings, not universal constants.
    """

    L_min: float = 0.30             # shortest admissible edge, m
    L_half_margin: float = 0.02     # edge must stay below C/2 - margin, m
    sweep_limit_deg: float = 35.0   # hard bound on sweep commands, deg

    def upper_bound(self, perimeter: float) -> float:
        return 0.5 * perimeter - self.L_half_margin


def _override(dc, data: dict):
    fields = {f.name for f in dataclasses.fields(dc)}
    unknown = set(data) - fields
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return dataclasses.replace(dc, **data)


def load_engine_config(path: str | None = None) -> tuple[EngineTolerances, FeasibilityLimits]:
    """Load (tolerances, limits), falling back to defaults.

    ``path=None`` consults the ISOTRUSS_CONFIG environment variable; if that
    is unset, defaults are returned.
    """
    tols = EngineTolerances()
    limits = FeasibilityLimits()
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        return tols, limits
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as e:
            raise ValueError(f"config file {path} is not valid YAML: {e}") from e
    if "engine" in data:
        tols = _override(tols, data["engine"])
    if "limits" in data:
        limits = _override(limits, data["limits"])
    return tols, limits


def load_limits(path: str) -> FeasibilityLimits:
    """Load a FeasibilityLimits profile from a YAML file.

    Accepts either a bare mapping of limit fields or a file with a
    ``limits:`` section.
    """
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as e:
            raise ValueError(f"limits file {path} is not valid YAML: {e}") from e
    if "limits" in data:
        data = data["limits"]
    return _override(FeasibilityLimits(), data)
