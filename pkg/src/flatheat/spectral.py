"""Neumann cosine eigenbasis on the unit interval and the unit box.

Axial profiles are expanded as ``theta(x) = sum_n c_n sqrt(2) cos(n pi x)``,
including ``n = 0`` whose basis function is the constant ``sqrt(2)``.  On a
cylinder ``omega x (0, 1)`` with ``omega = (0, 1)^(N-1)`` the cross-section
modes are ``e_0 = 1`` and tensor products of ``sqrt(2) cos(j pi x_i)`` with
eigenvalues ``pi^2 |j|^2``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

SQRT2 = math.sqrt(2.0)
PI2 = math.pi**2

__all__ = [
    "CosineSeries",
    "TensorCosineSeries",
    "BoxDomain",
    "project_profile",
    "project_profile_2d",
    "step_coefficients",
    "double_step_coefficients",
    "free_evolution",
    "axial_basis",
    "write_coefficients_csv",
    "read_coefficients_csv",
]


@dataclass(frozen=True)
class CosineSeries:
    """Coefficients ``c_0 .. c_nbar`` of a 1-D profile."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size < 1:
            raise ValueError("a cosine series needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("cosine coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_max(self) -> int:
        return self.coeffs.size - 1

    def truncate(self, n_max: int) -> "CosineSeries":
        return CosineSeries(self.coeffs[: n_max + 1])

    def energy(self) -> float:
        """``2 c_0^2 + sum_{n>=1} c_n^2``, the squared L2 norm on (0, 1)."""
        c = self.coeffs
        return float(2.0 * c[0] ** 2 + np.sum(c[1:] ** 2))

    def __call__(self, x):
        return free_evolution(self, 0.0, x)

    def as_tensor(self) -> "TensorCosineSeries":
        """View as a cylinder series with only the ``j = 0`` cross-section mode."""
        return TensorCosineSeries(self.coeffs[None, :], cross_dim=0)


@dataclass(frozen=True)
class TensorCosineSeries:
    """Coefficients ``c[j, n]`` on ``omega x (0, 1)``.

    ``cross_dim`` is ``N - 1``; ``0`` denotes the rod (single row ``j = 0``).
    For ``cross_dim = 2`` the row index follows :meth:`BoxDomain.cross_modes`.
    """

    coeffs: np.ndarray
    cross_dim: int = 1

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("tensor coefficients must be a non-empty 2-D array")
        if not np.all(np.isfinite(c)):
            raise ValueError("tensor coefficients must be finite")
        if self.cross_dim not in (0, 1, 2):
            raise ValueError("cross_dim must be 0, 1 or 2")
        if self.cross_dim == 0 and c.shape[0] != 1:
            raise ValueError("a rod series has a single cross-section row")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def j_max(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def n_max(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def domain(self) -> "BoxDomain":
        return BoxDomain(self.cross_dim + 1)

    def truncate(self, j_max: int | None = None, n_max: int | None = None) -> "TensorCosineSeries":
        j = self.j_max if j_max is None else j_max
        n = self.n_max if n_max is None else n_max
        return TensorCosineSeries(self.coeffs[: j + 1, : n + 1], self.cross_dim)

    def energy(self) -> float:
        c = self.coeffs
        return float(2.0 * np.sum(c[:, 0] ** 2) + np.sum(c[:, 1:] ** 2))


@dataclass(frozen=True)
class BoxDomain:
    """``Omega = (0, 1)^N`` seen as the cylinder ``(0, 1)^(N-1) x (0, 1)``."""

    spatial_dim: int

    def __post_init__(self):
        if self.spatial_dim not in (1, 2, 3):
            raise ValueError("spatial_dim must be 1, 2 or 3")

    @property
    def cross_dim(self) -> int:
        return self.spatial_dim - 1

    def cross_modes(self, j_max: int) -> np.ndarray:
        """Multi-indices of the first ``j_max + 1`` cross-section modes.

        Shape ``(j_max + 1, cross_dim)``.  Modes are ordered by eigenvalue,
        ties broken lexicographically, so ``lambda_j`` is non-decreasing.
        """
        d = self.cross_dim
        if d == 0:
            if j_max != 0:
                raise ValueError("the rod has only the j = 0 cross-section mode")
            return np.zeros((1, 0), dtype=int)
        if d == 1:
            return np.arange(j_max + 1).reshape(-1, 1)
        return _box_modes_2d(j_max)

    def eigenvalues(self, j_max: int) -> np.ndarray:
        idx = self.cross_modes(j_max)
        return PI2 * np.sum(idx.astype(float) ** 2, axis=1)

    def cross_basis(self, j_max: int, xp) -> np.ndarray:
        """Evaluate ``e_j(x')``; returns shape ``(j_max + 1, npoints)``.

        ``xp`` has shape ``(npoints, cross_dim)`` (or ``(npoints,)`` when
        ``cross_dim == 1``).
        """
        idx = self.cross_modes(j_max)
        d = self.cross_dim
        if d == 0:
            xp = np.asarray(xp, dtype=float).reshape(-1)
            return np.ones((1, max(xp.size, 1)))
        xp = np.asarray(xp, dtype=float).reshape(-1, d)
        out = np.ones((idx.shape[0], xp.shape[0]))
        for axis in range(d):
            jj = idx[:, axis][:, None]
            fac = np.where(jj == 0, 1.0, SQRT2 * np.cos(math.pi * jj * xp[:, axis][None, :]))
            out *= fac
        return out


def _box_modes_2d(j_max: int) -> np.ndarray:
    r = int(math.isqrt(4 * (j_max + 1))) + 2
    while True:
        pairs = sorted(itertools.product(range(r + 1), repeat=2), key=lambda p: (p[0] ** 2 + p[1] ** 2, p))
        # all pairs with |j|^2 <= r^2 are present, so the prefix is complete
        complete = [p for p in pairs if p[0] ** 2 + p[1] ** 2 <= r * r]
        if len(complete) > j_max:
            return np.array(complete[: j_max + 1], dtype=int)
        r *= 2


def axial_basis(n_max: int, x) -> np.ndarray:
    """``sqrt(2) cos(n pi x)`` for ``n = 0..n_max``; shape ``(n_max + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    n = np.arange(n_max + 1).reshape((-1,) + (1,) * x.ndim)
    return SQRT2 * np.cos(math.pi * n * x[None, ...])


def _trapezoid_weights(m: int) -> np.ndarray:
    w = np.full(m, 1.0 / (m - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def project_profile(samples, n_max: int) -> CosineSeries:
    """Project samples on the uniform grid ``x_k = k / (m - 1)``.

    Composite trapezoid quadrature; exact for band-limited profiles with
    ``n <= n_max`` when ``m >= 2 n_max + 2``.  Discontinuous data converge
    only like ``O(1/n)`` in the coefficients; prefer the closed forms.
    """
    f = np.asarray(samples, dtype=float).reshape(-1)
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if f.size < 2 * n_max + 2:
        raise ValueError(f"need at least {2 * n_max + 2} samples for n_max={n_max}, got {f.size}")
    if not np.all(np.isfinite(f)):
        raise ValueError("profile samples must be finite")
    x = np.linspace(0.0, 1.0, f.size)
    w = _trapezoid_weights(f.size)
    c = axial_basis(n_max, x) @ (w * f)
    c[0] *= 0.5  # the n = 0 basis function sqrt(2) has squared norm 2
    return CosineSeries(c)


def project_profile_2d(samples, j_max: int, n_max: int) -> TensorCosineSeries:
    """Project ``samples[a, b] = theta0(x1_a, x2_b)`` on uniform endpoint grids."""
    f = np.asarray(samples, dtype=float)
    if f.ndim != 2:
        raise ValueError("expected a 2-D array of samples")
    if f.shape[0] < 2 * j_max + 2 or f.shape[1] < 2 * n_max + 2:
        raise ValueError("too few samples for the requested orders")
    if not np.all(np.isfinite(f)):
        raise ValueError("profile samples must be finite")
    x1 = np.linspace(0.0, 1.0, f.shape[0])
    x2 = np.linspace(0.0, 1.0, f.shape[1])
    e = BoxDomain(2).cross_basis(j_max, x1) * _trapezoid_weights(x1.size)
    b = axial_basis(n_max, x2) * _trapezoid_weights(x2.size)
    c = e @ f @ b.T
    c[:, 0] *= 0.5
    return TensorCosineSeries(c, cross_dim=1)


def step_coefficients(levels, breakpoint: float, n_max: int) -> CosineSeries:
    """Exact coefficients of ``levels[0]`` on ``(0, b)`` and ``levels[1]`` on ``(b, 1)``."""
    lo, hi = (float(v) for v in levels)
    b = float(breakpoint)
    if not 0.0 < b < 1.0:
        raise ValueError("breakpoint must lie in (0, 1)")
    c = np.empty(n_max + 1)
    c[0] = (lo * b + hi * (1.0 - b)) / SQRT2
    n = np.arange(1, n_max + 1)
    # int_0^b sqrt2 cos(n pi x) = sqrt2 sin(n pi b) / (n pi)
    c[1:] = (lo - hi) * SQRT2 * np.sin(n * math.pi * b) / (n * math.pi)
    if b == 0.5:
        # sin(n pi / 2) is exactly 0 or +-1
        c[1:] = np.where(n % 2 == 0, 0.0, (lo - hi) * SQRT2 * (-1.0) ** ((n - 1) // 2) / (n * math.pi))
    return CosineSeries(c)


def double_step_coefficients(j_max: int = 25, n_max: int = 25) -> TensorCosineSeries:
    """Coefficients ``c[2l+1, 2p+1] = -2 (-1)^(l+p) / (pi^2 (2l+1)(2p+1))``.

    These are the exact coefficients of the checkerboard taking the value
    ``-1/4`` on ``(0,1/2)^2`` and ``(1/2,1)^2`` and ``+1/4`` elsewhere; see
    :func:`double_step_profile`.
    """
    c = np.zeros((j_max + 1, n_max + 1))
    j = np.arange(j_max + 1)[:, None]
    n = np.arange(n_max + 1)[None, :]
    odd = (j % 2 == 1) & (n % 2 == 1)
    sign = (-1.0) ** ((j - 1) // 2 + (n - 1) // 2)
    with np.errstate(divide="ignore"):
        val = -2.0 * sign / (PI2 * j * n)
    c[odd] = val[odd]
    return TensorCosineSeries(c, cross_dim=1)


DOUBLE_STEP_LEVEL = 0.25


def double_step_profile(x1, x2):
    """Checkerboard matching :func:`double_step_coefficients` (levels +-1/4)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    same = (x1 < 0.5) == (x2 < 0.5)
    return np.where(same, -DOUBLE_STEP_LEVEL, DOUBLE_STEP_LEVEL)


def free_evolution(series, t, x, xp=None):
    """Zero-control solution ``sum c_n e^{-n^2 pi^2 t} sqrt2 cos(n pi x)``.

    For a :class:`TensorCosineSeries` pass the cross-section coordinates in
    ``xp`` (broadcast against ``x``); the decay rate is ``lambda_j + n^2 pi^2``.
    """
    t = float(t)
    if t < 0:
        raise ValueError("free evolution is defined for t >= 0")
    x = np.asarray(x, dtype=float)
    if isinstance(series, CosineSeries):
        c = series.coeffs
        n = np.arange(c.size)
        amp = c * np.exp(-PI2 * n**2 * t)
        out = np.tensordot(amp, axial_basis(c.size - 1, x), axes=1)
        return out[()] if out.ndim == 0 else out
    dom = series.domain
    c = series.coeffs
    lam = dom.eigenvalues(series.j_max)
    n = np.arange(c.shape[1])
    amp = c * np.exp(-(lam[:, None] + PI2 * n[None, :] ** 2) * t)
    if dom.cross_dim == 0:
        xp_arr = np.zeros(x.shape)
    else:
        xp_arr = np.asarray(xp, dtype=float)
    shape = np.broadcast_shapes(x.shape, xp_arr.shape[: xp_arr.ndim - (1 if dom.cross_dim == 2 else 0)])
    xb = np.broadcast_to(x, shape).reshape(-1)
    if dom.cross_dim == 2:
        xpb = np.broadcast_to(xp_arr, shape + (2,)).reshape(-1, 2)
    else:
        xpb = np.broadcast_to(xp_arr, shape).reshape(-1)
    E = dom.cross_basis(series.j_max, xpb)  # (J, P)
    B = axial_basis(series.n_max, xb)  # (N, P)
    out = np.einsum("jn,jp,np->p", amp, E, B).reshape(shape)
    return out[()] if out.ndim == 0 else out


def write_coefficients_csv(series, path) -> None:
    """Write coefficients as ``n,value`` or ``j,n,value`` rows (row-major)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(series, CosineSeries):
            w.writerow(["n", "value"])
            for n, v in enumerate(series.coeffs):
                w.writerow([n, repr(float(v))])
        else:
            fh.write(f"# cross_dim={series.cross_dim}\n")
            w.writerow(["j", "n", "value"])
            for (j, n), v in np.ndenumerate(series.coeffs):
                w.writerow([j, n, repr(float(v))])


def read_coefficients_csv(path):
    """Inverse of :func:`write_coefficients_csv`."""
    cross_dim = 1
    rows = []
    with Path(path).open() as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "cross_dim":
                    cross_dim = int(val)
                continue
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    rows = [r for r in reader if r]
    if header == ["n", "value"]:
        c = np.zeros(len(rows))
        for n, v in rows:
            c[int(n)] = float(v)
        return CosineSeries(c)
    if header == ["j", "n", "value"]:
        jn = [(int(j), int(n)) for j, n, _ in rows]
        J = max(j for j, _ in jn) + 1
        N = max(n for _, n in jn) + 1
        c = np.zeros((J, N))
        for (j, n), (_, _, v) in zip(jn, rows):
            c[j, n] = float(v)
        return TensorCosineSeries(c, cross_dim=cross_dim)
    raise ValueError(f"unrecognised coefficient CSV header: {header}")
