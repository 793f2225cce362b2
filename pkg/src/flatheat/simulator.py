"""Finite-volume heat solver used to check the synthesized control.

Cell-centred grids on the unit interval/square, zero flux on every face except
the axial face ``z = 1`` where the flux equals the control.  Crank-Nicolson in
1-D and Peaceman-Rachford ADI in 2-D; both start with a few implicit Euler
half-steps (Rannacher start-up) to damp the stiff modes of rough data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded

from .control import ControlSchedule, StateField

log = logging.getLogger(__name__)

__all__ = [
    "SimGrid",
    "SimState",
    "SimulationError",
    "RunResult",
    "step_1d",
    "step_2d",
    "run",
    "compare_fields",
    "half_step_times",
]


class SimulationError(RuntimeError):
    """Numerical failure: non-finite state or blow-up."""


@dataclass(frozen=True)
class SimGrid:
    """Uniform cell-centred grid; ``cells`` is ``(m,)`` or ``(m1, m2)`` with the axial axis last."""

    cells: tuple
    dt: float
    startup_steps: int = 4  # implicit Euler half-steps, taken in pairs

    def __post_init__(self):
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if len(cells) not in (1, 2):
            raise ValueError("simulation supports 1-D and 2-D grids only")
        if min(cells) < 8:
            raise ValueError("need at least 8 cells per axis")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.startup_steps < 0:
            raise ValueError("startup_steps must be non-negative")
        object.__setattr__(self, "cells", cells)

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def scheme(self) -> str:
        return "crank-nicolson" if self.ndim == 1 else "peaceman-rachford-adi"

    @property
    def spacing(self) -> tuple:
        return tuple(1.0 / m for m in self.cells)

    def centers(self) -> tuple:
        return tuple((np.arange(m) + 0.5) / m for m in self.cells)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))


@dataclass(frozen=True)
class SimState:
    t: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise SimulationError(f"non-finite temperature at t={self.t}")
        object.__setattr__(self, "values", v)


def _laplacian_bands(m: int, h: float) -> np.ndarray:
    """Banded (1, 1) storage of the Neumann finite-volume Laplacian."""
    ab = np.zeros((3, m))
    ab[0, 1:] = 1.0
    ab[2, :-1] = 1.0
    ab[1, :] = -2.0
    ab[1, 0] = ab[1, -1] = -1.0
    return ab / h**2


def _apply_laplacian(v: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = v[:-2] - 2.0 * v[1:-1] + v[2:]
    out[0] = v[1] - v[0]
    out[-1] = v[-2] - v[-1]
    return np.moveaxis(out / h**2, 0, axis)


def _implicit_bands(m: int, h: float, coef: float) -> np.ndarray:
    """Bands of ``I - coef * L``."""
    ab = -coef * _laplacian_bands(m, h)
    ab[1] += 1.0
    return ab


def _solve(ab: np.ndarray, rhs: np.ndarray, axis: int) -> np.ndarray:
    r = np.moveaxis(rhs, axis, 0)
    out = solve_banded((1, 1), ab, r, check_finite=False)
    return np.moveaxis(out, 0, axis)


def _flux_source(u, m: int, h: float, shape: tuple) -> np.ndarray:
    """Source ``u / h`` in the last axial cell from the flux through ``z = 1``."""
    b = np.zeros(shape)
    b[..., m - 1] = np.asarray(u, dtype=float).reshape(shape[:-1]) / h
    return b


def step_1d(state: SimState, schedule: ControlSchedule, dt: float, implicit_euler: bool = False) -> SimState:
    """One Crank-Nicolson step (flux at the half-step) or one implicit Euler step.

    Solved in increment form, so a steady state gives a zero right-hand side
    and is reproduced exactly.
    """
    v = state.values
    m = v.shape[0]
    h = 1.0 / m
    t_flux = state.t + (dt if implicit_euler else 0.5 * dt)
    b = _flux_source(schedule.at(t_flux)[0], m, h, v.shape)
    coef = dt if implicit_euler else 0.5 * dt
    delta = _solve(_implicit_bands(m, h, coef), dt * (_apply_laplacian(v, h, 0) + b), 0)
    return SimState(state.t + dt, v + delta)


def step_2d(state: SimState, schedule: ControlSchedule, dt: float, implicit_euler: bool = False) -> SimState:
    """One Peaceman-Rachford step; ``values[a, b]`` with ``b`` the axial index.

    With ``implicit_euler`` a first-order locally one-dimensional implicit
    step is taken instead (used for start-up damping).  Both are solved in
    increment form.
    """
    v = state.values
    m1, m2 = v.shape
    h1, h2 = 1.0 / m1, 1.0 / m2
    if implicit_euler:
        b = _flux_source(schedule.at(state.t + dt), m2, h2, v.shape)
        w = v + _solve(_implicit_bands(m1, h1, dt), dt * _apply_laplacian(v, h1, 0), 0)
        rhs = dt * (_apply_laplacian(w, h2, 1) + b)
        return SimState(state.t + dt, w + _solve(_implicit_bands(m2, h2, dt), rhs, 1))
    half = 0.5 * dt
    b = _flux_source(schedule.at(state.t + half), m2, h2, v.shape)
    rhs = half * (_apply_laplacian(v, h1, 0) + _apply_laplacian(v, h2, 1) + b)
    w = v + _solve(_implicit_bands(m1, h1, half), rhs, 0)
    rhs = half * (_apply_laplacian(w, h1, 0) + _apply_laplacian(w, h2, 1) + b)
    new = w + _solve(_implicit_bands(m2, h2, half), rhs, 1)
    return SimState(state.t + dt, new)


def half_step_times(T: float, dt: float) -> np.ndarray:
    """Times ``k dt / 2`` covering ``[0, T]``; the last step is shortened to hit ``T``."""
    n = int(np.ceil(T / dt - 1e-9))
    full = np.minimum(np.arange(n + 1) * dt, T)
    times = np.empty(2 * n + 1)
    times[0::2] = full
    times[1::2] = 0.5 * (full[:-1] + full[1:])
    return times


@dataclass
class RunResult:
    snapshots: list
    report: dict

    @property
    def final(self) -> SimState:
        return self.snapshots[-1]


def _l2(values: np.ndarray, vol: float) -> float:
    return float(np.sqrt(vol * np.sum(values**2)))


def run(theta0, schedule: ControlSchedule, grid: SimGrid, T: float, snapshot_every: int = 1) -> RunResult:
    """Integrate from ``0`` to ``T`` driven by ``schedule``.

    ``theta0`` holds cell-centred values with the grid's shape.  The report
    carries the final L2 and max norms, their ratio to the initial norms,
    and the snapshot times.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != grid.cells:
        raise ValueError(f"initial data shape {theta0.shape} does not match grid {grid.cells}")
    if grid.ndim == 2 and schedule.values.shape[1] != grid.cells[0]:
        raise ValueError("2-D schedule must be sampled at the cross-section cell centres")
    stepper = step_1d if grid.ndim == 1 else step_2d
    vol = grid.cell_volume
    state = SimState(0.0, theta0)
    norm0 = _l2(theta0, vol)
    ref = max(norm0, np.abs(theta0).max(), 1e-300)
    peak_u = float(np.abs(schedule.values).max()) if schedule.values.size else 0.0
    snaps = [state]
    n = int(np.ceil(T / grid.dt - 1e-9))
    k = 0
    for k in range(n):
        dt = min(grid.dt, T - state.t)
        if 2 * k < grid.startup_steps:
            for _ in range(2):
                state = stepper(state, schedule, dt / 2, implicit_euler=True)
        else:
            state = stepper(state, schedule, dt)
        cur = np.abs(state.values).max()
        if cur > 1e3 * (ref + peak_u * max(T, 1.0)):
            raise SimulationError(f"state grew by more than 1e3 at t={state.t:.6g} (max |theta| = {cur:.3e})")
        if (k + 1) % snapshot_every == 0 or k == n - 1:
            snaps.append(state)
    if snaps[-1] is not state:
        snaps.append(state)
    final = state.values
    report = {
        "scheme": grid.scheme,
        "cells": "x".join(str(c) for c in grid.cells),
        "dt": grid.dt,
        "steps": n,
        "final_time": state.t,
        "final_l2": _l2(final, vol),
        "final_linf": float(np.abs(final).max()),
        "initial_l2": norm0,
        "initial_linf": float(np.abs(theta0).max()),
        "relative_l2": _l2(final, vol) / norm0 if norm0 > 0 else 0.0,
        "snapshot_times": [s.t for s in snaps],
    }
    return RunResult(snaps, report)


def compare_fields(a: StateField, b: SimState, grid: SimGrid) -> dict:
    """L2 and max norms of ``a - b`` on the finer of the two grids."""
    centers = grid.centers()
    ga = tuple(np.asarray(g, dtype=float) for g in a.grid)
    if len(ga) != len(centers):
        raise ValueError("fields have different dimensions")
    fine_a = sum(g.size for g in ga) >= sum(c.size for c in centers)
    if fine_a:
        target = ga
        va = a.values
        vb = _interp(centers, b.values, target)
    else:
        target = centers
        va = _interp(ga, a.values, target)
        vb = b.values
    d = va - vb
    return {"l2": float(np.sqrt(np.mean(d**2))), "linf": float(np.abs(d).max())}


def _interp(src_grid: tuple, values: np.ndarray, target: tuple) -> np.ndarray:
    f = RegularGridInterpolator(src_grid, values, method="linear", bounds_error=False, fill_value=None)
    mesh = np.meshgrid(*target, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    return f(pts).reshape(mesh[0].shape)
