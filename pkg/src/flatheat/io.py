"""CSV artifacts with ``#`` metadata headers, and the key-value run report.

Every artifact starts with ``# key = value`` lines holding the run
configuration, then a ``# checksum = sha256:...`` line over the data body.
Surfaces are written with times down the rows and the axial coordinate
across the columns.
"""

from __future__ import annotations

import hashlib
import io as _io
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_pairs
from .control import ControlSchedule, StateField

__all__ = [
    "format_float",
    "write_artifact",
    "read_artifact",
    "header_config",
    "write_schedule",
    "read_schedule",
    "write_fields",
    "read_fields",
    "write_report",
    "read_report",
]

_RESERVED = ("artifact", "checksum", "columns")


def format_float(v: float) -> str:
    """Shortest round-tripping representation (deterministic across runs)."""
    v = float(v)
    if v == 0.0:
        return "0"
    return repr(v)


def _body(header_row: list[str], rows) -> str:
    buf = _io.StringIO()
    buf.write(",".join(header_row) + "\n")
    for row in rows:
        buf.write(",".join(format_float(v) for v in row) + "\n")
    return buf.getvalue()


def write_artifact(path, kind: str, config: RunConfig, header_row: list[str], rows, extra=()) -> Path:
    path = Path(path)
    body = _body(header_row, rows)
    digest = hashlib.sha256(body.encode()).hexdigest()
    lines = [f"# artifact = {kind}"]
    lines += [f"# {k} = {v}" for k, v in config.to_pairs()]
    lines += [f"# {k} = {v}" for k, v in extra]
    lines.append(f"# checksum = sha256:{digest}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n" + body)
    return path


def read_artifact(path, verify: bool = True):
    """Return ``(meta, columns, data)``; ``meta`` maps header keys to strings."""
    text = Path(path).read_text()
    head, body = [], []
    for line in text.splitlines(keepends=True):
        (head if line.startswith("#") and not body else body).append(line)
    meta = dict(parse_pairs("".join(line[1:] for line in head)))
    body_text = "".join(body)
    if verify:
        want = meta.get("checksum", "")
        got = "sha256:" + hashlib.sha256(body_text.encode()).hexdigest()
        if want != got:
            raise ValueError(f"{path}: checksum mismatch")
    lines = body_text.splitlines()
    columns = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return meta, columns, data.reshape(-1, len(columns))


def header_config(meta: dict) -> RunConfig:
    """Rebuild the run configuration recorded in an artifact header."""
    pairs = [(k, v) for k, v in meta.items() if k not in _RESERVED and not k.startswith("x_")]
    known = {k for k, _ in RunConfig().to_pairs()}
    pairs = [(k, v) for k, v in pairs if k in known]
    try:
        return RunConfig.from_pairs(pairs)
    except ConfigError as exc:
        raise ValueError(f"header does not describe a valid configuration: {exc}") from exc


def write_schedule(path, schedule: ControlSchedule, config: RunConfig) -> Path:
    """Control samples: ``t,u`` on the rod, ``t,<x1 values...>`` on the box."""
    if schedule.space_grid.size == 0:
        cols = ["t", "u"]
    else:
        cols = ["t"] + [format_float(x) for x in schedule.space_grid]
    rows = np.column_stack([schedule.times, schedule.values])
    return write_artifact(path, "control", config, cols, rows, extra=[("tau_switch", format_float(schedule.tau))])


def read_schedule(path) -> tuple[ControlSchedule, RunConfig]:
    meta, cols, data = read_artifact(path)
    sg = np.zeros(0) if cols[1:] == ["u"] else np.array([float(c) for c in cols[1:]])
    tau = float(meta.get("tau_switch", "0"))
    return ControlSchedule(data[:, 0], sg, data[:, 1:], tau=tau), header_config(meta)


def write_fields(path, fields: list[StateField], config: RunConfig, kind: str) -> Path:
    """Snapshots on a common grid.

    1-D: one row per time, columns ``t,<z values...>``.  2-D: one row per
    ``(t, x1)``, columns ``t,x1,<z values...>``.
    """
    if not fields:
        raise ValueError("no fields to write")
    grid = fields[0].grid
    for f in fields:
        if len(f.grid) != len(grid) or any(not np.array_equal(a, b) for a, b in zip(f.grid, grid)):
            raise ValueError("snapshots must share one grid")
    z = grid[-1]
    if len(grid) == 1:
        cols = ["t"] + [format_float(v) for v in z]
        rows = [[f.t, *f.values] for f in fields]
    elif len(grid) == 2:
        cols = ["t", "x1"] + [format_float(v) for v in z]
        rows = [[f.t, x1, *f.values[a]] for f in fields for a, x1 in enumerate(grid[0])]
    else:
        raise ValueError("only 1-D and 2-D fields are exported")
    return write_artifact(path, kind, config, cols, rows)


def read_fields(path) -> tuple[list[StateField], RunConfig]:
    meta, cols, data = read_artifact(path)
    cfg = header_config(meta)
    if cols[1] == "x1":
        z = np.array([float(c) for c in cols[2:]])
        out = []
        for t in np.unique(data[:, 0]):
            block = data[data[:, 0] == t]
            out.append(StateField(float(t), (block[:, 1], z), block[:, 2:]))
        return out, cfg
    z = np.array([float(c) for c in cols[1:]])
    return [StateField(float(r[0]), (z,), r[1:]) for r in data], cfg


def write_report(path, entries: dict, config: RunConfig | None = None) -> Path:
    """``key: value`` lines; floats use the round-tripping representation."""
    lines = []
    if config is not None:
        lines += [f"config.{k}: {v}" for k, v in config.to_pairs()]
    for k, v in entries.items():
        if isinstance(v, (float, np.floating)):
            v = format_float(v)
        elif isinstance(v, (list, tuple)):
            v = " ".join(format_float(x) if isinstance(x, (float, np.floating)) else str(x) for x in v)
        lines.append(f"{k}: {v}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if ":" in line:
            k, _, v = line.partition(":")
            out[k.strip()] = v.strip()
    return out
