"""Truncated flatness-based control, predicted state and error model.

With ``Y[j, i](t) = y_j^(i)(t)`` the truncated series are

    u(t, x')        = sum_j e^{-lambda_j t} e_j(x') sum_{1<=i<=ibar} Y[j, i] / (2i-1)!
    theta(t, x', z) = sum_j e^{-lambda_j t} e_j(x') sum_{0<=i<=ibar} Y[j, i] z^{2i} / (2i)!

where ``z`` is the axial coordinate and the control acts on the face ``z = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flat_output import FlatOutputs
from .spectral import PI2

__all__ = [
    "TruncationOrders",
    "ErrorModelConstants",
    "ControlSchedule",
    "StateField",
    "control_value",
    "state_prediction",
    "truncation_residual",
    "error_bound",
    "calibrate_c1",
    "sample_schedule",
    "truncate_family",
]


@dataclass(frozen=True)
class TruncationOrders:
    """Series cutoffs: Taylor order ``i_bar``, cross modes ``j_bar``, axial modes ``n_bar``."""

    i_bar: int
    j_bar: int = 0
    n_bar: int = 0

    def __post_init__(self):
        for name in ("i_bar", "j_bar", "n_bar"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")
        if self.i_bar < 1:
            raise ValueError("i_bar must be at least 1 for a nonzero control")


@dataclass(frozen=True)
class ErrorModelConstants:
    """Constants of ``C1 (e^{-C2 jbar^{2/(N-1)}} + e^{-C3 ibar ln ibar} + e^{-C4 nbar^2})``."""

    C1: float
    C2: float
    C3: float
    C4: float
    A1: float = PI2

    @classmethod
    def default(cls, tau: float, s: float, C1: float = 1.0) -> "ErrorModelConstants":
        return cls(C1=C1, C2=0.9 * PI2 * tau, C3=(2.0 - s) * 6.0 / 7.0, C4=0.9 * PI2 * tau)

    def validate(self, tau: float, s: float) -> None:
        if min(self.C1, self.C2, self.C3, self.C4) <= 0:
            raise ValueError("error-model constants must be positive")
        if not self.C2 < self.A1 * tau:
            raise ValueError(f"C2={self.C2} must be below A1*tau={self.A1 * tau}")
        if not self.C3 < 2.0 - s:
            raise ValueError(f"C3={self.C3} must be below 2-s={2.0 - s}")
        if not self.C4 < PI2 * tau:
            raise ValueError(f"C4={self.C4} must be below pi^2*tau={PI2 * tau}")


@dataclass(frozen=True)
class ControlSchedule:
    """Control samples ``values[time, cross_point]``; one column on the rod."""

    times: np.ndarray
    space_grid: np.ndarray
    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        t = np.asarray(self.times, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != t.size:
            raise ValueError("one row of control values per time sample")
        if not np.all(np.isfinite(v)):
            raise ValueError("control values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "space_grid", np.asarray(self.space_grid, dtype=float))

    def at(self, t: float) -> np.ndarray:
        """Control profile at ``t``: exact sample on the grid, linear in between."""
        idx = np.searchsorted(self.times, t)
        if idx < self.times.size and abs(self.times[idx] - t) <= 1e-12 * max(1.0, abs(t)):
            return self.values[idx]
        if idx > 0 and abs(self.times[idx - 1] - t) <= 1e-12 * max(1.0, abs(t)):
            return self.values[idx - 1]
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"schedule does not cover t={t}")
        w = (t - self.times[idx - 1]) / (self.times[idx] - self.times[idx - 1])
        return (1.0 - w) * self.values[idx - 1] + w * self.values[idx]

    @classmethod
    def zero(cls, times, space_grid=()) -> "ControlSchedule":
        sg = np.asarray(space_grid, dtype=float)
        return cls(np.asarray(times, float), sg, np.zeros((np.size(times), max(1, sg.shape[0] if sg.ndim else 1))))


@dataclass(frozen=True)
class StateField:
    """Temperature samples at one time.

    ``grid`` is a tuple of coordinate vectors, the axial one last; ``values``
    has shape ``tuple(len(g) for g in grid)``.
    """

    t: float
    grid: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        shape = tuple(len(g) for g in self.grid)
        if v.shape != shape:
            raise ValueError(f"values shape {v.shape} does not match grid {shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("state values must be finite")
        object.__setattr__(self, "values", v)


def truncate_family(flat: FlatOutputs, orders: TruncationOrders) -> FlatOutputs:
    series = flat.series
    if series.j_max < orders.j_bar or series.n_max < orders.n_bar:
        raise ValueError(
            f"series has (j, n) up to ({series.j_max}, {series.n_max}); "
            f"orders ask for ({orders.j_bar}, {orders.n_bar})"
        )
    j = orders.j_bar if series.cross_dim else 0
    return FlatOutputs(series.truncate(j, orders.n_bar), flat.tau, flat.T, flat.step)


def _inv_factorials(values) -> np.ndarray:
    return np.exp(-np.array([math.lgamma(v + 1.0) for v in values]))


def _cross_weights(flat: FlatOutputs, t: np.ndarray, xp) -> np.ndarray:
    """``e^{-lambda_j t} e_j(x')``; shape ``(J,) + t.shape + (P,)``."""
    dom = flat.domain
    J = flat.series.j_max
    if dom.cross_dim == 0:
        E = np.ones((1, 1))
    else:
        if xp is None:
            raise ValueError("cross-section coordinates are required for N >= 2")
        E = dom.cross_basis(J, xp)
    lam = flat.eigenvalues
    decay = np.exp(-lam.reshape((-1,) + (1,) * t.ndim) * t[None, ...])
    return decay[..., None] * E.reshape((E.shape[0],) + (1,) * t.ndim + (E.shape[1],))


def control_value(flat: FlatOutputs, orders: TruncationOrders, t, xp=None):
    """Truncated control on ``[tau, T]``.

    Returns shape ``t.shape`` on the rod and ``t.shape + (P,)`` for ``P``
    cross-section points otherwise.
    """
    fam = truncate_family(flat, orders)
    t = np.asarray(t, dtype=float)
    ib = orders.i_bar
    Y = fam.y_table(t, ib)  # (J, I, ...)
    w = np.zeros(ib + 1)
    w[1:] = _inv_factorials(2 * np.arange(1, ib + 1) - 1)
    S = np.tensordot(w, np.moveaxis(Y, 1, 0), axes=1)  # (J, ...)
    out = np.sum(_cross_weights(fam, t, xp) * S[..., None], axis=0)  # (..., P)
    if fam.domain.cross_dim == 0:
        out = out[..., 0]
    return out[()] if out.ndim == 0 else out


def _axial_table(ib: int, z) -> np.ndarray:
    """``z^{2i} / (2i)!`` for ``i = 0..ib``; shape ``(ib + 1, Z)``."""
    z = np.asarray(z, dtype=float).reshape(-1)
    i = np.arange(ib + 1)
    inv = _inv_factorials(2 * i)
    return z[None, :] ** (2 * i[:, None]) * inv[:, None]


def _series_in_z(flat: FlatOutputs, orders: TruncationOrders, t, z, xp, coeff_table, i_min: int = 0) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    ib = orders.i_bar
    Y = coeff_table(t)  # (J, I, ...)
    A = _axial_table(ib, z)  # (I, Z)
    A[:i_min] = 0.0
    S = np.tensordot(np.moveaxis(Y, 1, -1), A, axes=1)  # (J, ..., Z)
    W = _cross_weights(flat, t, xp)  # (J, ..., P)
    out = np.sum(W[..., :, None] * S[..., None, :], axis=0)  # (..., P, Z)
    if flat.domain.cross_dim == 0:
        out = out[..., 0, :]
    return out


def state_prediction(flat: FlatOutputs, orders: TruncationOrders, t, z, xp=None, i_min: int = 0) -> np.ndarray:
    """Truncated state on ``[tau, T]``.

    Shape ``t.shape + (Z,)`` on the rod and ``t.shape + (P, Z)`` otherwise,
    where ``z`` are axial coordinates and ``xp`` cross-section points.
    Terms with ``i < i_min`` are skipped, which gives differences between
    two Taylor truncations without cancellation.
    """
    fam = truncate_family(flat, orders)
    return _series_in_z(fam, orders, t, z, xp, lambda tt: fam.y_table(tt, orders.i_bar), i_min)


def truncation_residual(flat: FlatOutputs, orders: TruncationOrders, t, z, xp=None) -> np.ndarray:
    """Exact ``(d_t - Laplacian)`` of the truncated state.

    Equals ``sum_j e^{-lambda_j t} e_j(x') z^{2 ibar} / (2 ibar)! y_j^(ibar+1)(t)``.
    """
    fam = truncate_family(flat, orders)
    ib = orders.i_bar
    t = np.asarray(t, dtype=float)
    Y = fam.y_table(t, ib + 1)[:, ib + 1]  # (J, ...)
    zz = np.asarray(z, dtype=float).reshape(-1)
    A = zz ** (2 * ib) * math.exp(-math.lgamma(2 * ib + 1))
    W = _cross_weights(fam, t, xp)  # (J, ..., P)
    out = np.sum(W[..., :, None] * (Y[..., None, None] * A), axis=0)
    if fam.domain.cross_dim == 0:
        out = out[..., 0, :]
    return out


def error_bound(
    orders: TruncationOrders,
    constants: ErrorModelConstants,
    norm_theta0: float,
    spatial_dim: int = 1,
    tau: float | None = None,
    s: float | None = None,
) -> float:
    """``C1 f(ibar, jbar, nbar) ||theta0||``; the ``jbar`` term is dropped on the rod."""
    if tau is not None and s is not None:
        constants.validate(tau, s)
    ib = orders.i_bar
    if ib < 2:
        raise ValueError("the error model needs i_bar >= 2 (ln i_bar > 0)")
    f = math.exp(-constants.C3 * ib * math.log(ib)) + math.exp(-constants.C4 * orders.n_bar**2)
    if spatial_dim >= 2:
        f += math.exp(-constants.C2 * orders.j_bar ** (2.0 / (spatial_dim - 1)))
    return constants.C1 * f * norm_theta0


def calibrate_c1(
    measured: float, orders: TruncationOrders, constants: ErrorModelConstants, norm_theta0: float, spatial_dim: int = 1
) -> ErrorModelConstants:
    """Return constants whose ``C1`` reproduces a measured error at ``orders``."""
    unit = ErrorModelConstants(1.0, constants.C2, constants.C3, constants.C4, constants.A1)
    f = error_bound(orders, unit, norm_theta0, spatial_dim)
    c1 = measured / f if f > 0 else constants.C1
    return ErrorModelConstants(max(c1, np.finfo(float).tiny), constants.C2, constants.C3, constants.C4, constants.A1)


def sample_schedule(flat: FlatOutputs, orders: TruncationOrders, times, space_grid=None) -> ControlSchedule:
    """Control samples with exact zeros for ``t <= tau``."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0):
        raise ValueError("time grid must be a sorted 1-D array")
    if times.size and (times[0] < 0 or times[-1] > flat.T * (1 + 1e-12)):
        raise ValueError("time grid must lie in [0, T]")
    times = np.minimum(times, flat.T)
    rod = flat.domain.cross_dim == 0
    sg = np.zeros(0) if (rod or space_grid is None) else np.asarray(space_grid, dtype=float)
    P = 1 if rod else sg.shape[0]
    values = np.zeros((times.size, P))
    active = times > flat.tau
    if np.any(active):
        u = control_value(flat, orders, times[active], None if rod else sg)
        values[active] = u.reshape(-1, P)
    return ControlSchedule(times, sg, values, tau=flat.tau)
