"""Plain-text trajectory files: one row per integration step.

Column layout (single header row, comma separated):

    tick, time,
    x0, y0, z0, ... x{n-1}, y{n-1}, z{n-1},      node positions, m
    dA0, dB0, ... dA{T-1}, dB{T-1},              roller arc positions, m
    drift0 ... drift{T-1},                       per-triangle perimeter
                                                 drift sum(L) - C, m
    margin                                       stability margin, m

Numbers are written with 9 significant digits in the C locale, so files
diff cleanly and round-trip losslessly enough for replay checks.  The
roller columns are the authoritative shape record; node positions can be
cross-checked against them (see ``replay_length_error``).
"""
from __future__ import annotations

import numpy as np

from .kinematics import edge_lengths
from .topology import TrussTopology

FORMAT_VERSION = 1


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def trajectory_header(topology: TrussTopology) -> list[str]:
    n = topology.node_count
    T = topology.triangle_count
    cols = ["tick", "time"]
    for i in range(n):
        cols += [f"x{i}", f"y{i}", f"z{i}"]
    for t in range(T):
        cols += [f"dA{t}", f"dB{t}"]
    cols += [f"drift{t}" for t in range(T)]
    cols.append("margin")
    return cols


def perimeter_drift(state, topology: TrussTopology) -> np.ndarray:
    """Signed per-triangle drift of position-implied perimeter, m."""
    L = edge_lengths(state.x, topology)
    return L.reshape(-1, 3).sum(axis=1) - state.perimeter


def write_trajectory(frames, topology: TrussTopology, path: str) -> None:
    """Write frames (a list or a result object with ``.frames``) as text."""
    frames = getattr(frames, "frames", frames)
    lines = [",".join(trajectory_header(topology))]
    for f in frames:
        row = [str(int(f.tick)), _fmt(f.time)]
        row += [_fmt(v) for v in f.state.x]
        row += [_fmt(v) for v in f.state.d]
        row += [_fmt(v) for v in perimeter_drift(f.state, topology)]
        row.append(_fmt(f.stability))
        lines.append(",".join(row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory(path: str) -> tuple[list[str], np.ndarray]:
    """Header names and an (n_rows, n_cols) float array."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise ValueError(
            f"row width {data.shape[1]} != header width {len(header)}")
    return header, data


def replay_length_error(data: np.ndarray, topology: TrussTopology,
                        perimeter: np.ndarray) -> float:
    """Worst x-vs-d edge length disagreement across all rows, m.

    Recomputes tube edge lengths from the position columns and compares
    with the lengths implied by the roller columns.  ``perimeter`` is the
    per-triangle tube perimeter of the configuration that produced the
    file (the file itself stores only drifts).
    """
    n = topology.node_count
    T = topology.triangle_count
    xs = data[:, 2:2 + 3 * n]
    ds = data[:, 2 + 3 * n:2 + 3 * n + 2 * T]
    worst = 0.0
    for x, d in zip(xs, ds):
        L = edge_lengths(x, topology)
        dA, dB = d[0::2], d[1::2]
        implied = np.stack([dA, dB - dA, perimeter - dB], axis=1).ravel()
        worst = max(worst, float(np.max(np.abs(L - implied))))
    return worst
