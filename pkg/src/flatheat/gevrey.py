"""Gevrey step function and truncated Taylor (jet) arithmetic.

A :class:`Jet` carries the Taylor coefficients ``a_p = f^(p)(t0) / p!`` of a
scalar function at one or several base points.  The coefficient array has the
order along axis 0 and any batch shape after it, so a single recurrence
evaluates the jets of many base points at once.

:class:`GevreyStep` builds the smooth step

    phi_s(t) = 1 - int_0^t bump / int_0^1 bump,
    bump(t)  = exp(-1 / (2 t^k (1 - t)^k)),   k = 1 / (s - 1),

whose derivatives of every order vanish at both ends of ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

__all__ = [
    "Jet",
    "JetOverflowError",
    "StepUnderflowError",
    "GevreyStep",
    "jet_mul",
    "jet_exp",
    "jet_pow_real",
    "jet_reciprocal",
    "fit_gevrey_constants",
    "MAX_ORDER",
]

MAX_ORDER = 64

# exp(-x) underflows a double for x above ~745; 700 keeps a margin.
UNDERFLOW_EXPONENT = 700.0


class JetOverflowError(FloatingPointError):
    """A jet coefficient overflowed; the caller should apply an endpoint guard."""


class StepUnderflowError(FloatingPointError):
    """The bump peak ``exp(-0.5 * 4**k)`` underflows, so the step is not representable."""


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion ``sum_p coeffs[p] (t - base_point)^p``."""

    base_point: np.ndarray | float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 0 or c.shape[0] < 1:
            raise ValueError("a jet needs at least one coefficient")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def variable(cls, t, order: int) -> "Jet":
        """Jet of the identity function ``f(t) = t`` at ``t``."""
        t = np.asarray(t, dtype=float)
        c = np.zeros((order + 1,) + t.shape)
        c[0] = t
        if order >= 1:
            c[1] = 1.0
        return cls(t, c)

    @classmethod
    def constant(cls, value, t, order: int) -> "Jet":
        t = np.asarray(t, dtype=float)
        c = np.zeros((order + 1,) + t.shape)
        c[0] = value
        return cls(t, c)

    def derivatives(self) -> np.ndarray:
        """Return ``f^(p)(t0)`` for ``p = 0..order`` (coefficients times ``p!``)."""
        fact = np.array([math.factorial(p) for p in range(self.order + 1)], dtype=float)
        return self.coeffs * fact.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))

    def __add__(self, other):
        if isinstance(other, Jet):
            _check_compatible(self, other)
            return Jet(self.base_point, self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] = c[0] + other
        return Jet(self.base_point, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.base_point, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        return Jet(self.base_point, self.coeffs * other)

    __rmul__ = __mul__


def _check_compatible(a: Jet, b: Jet) -> None:
    if a.order != b.order:
        raise ValueError(f"jet order mismatch: {a.order} vs {b.order}")
    if not np.array_equal(np.asarray(a.base_point), np.asarray(b.base_point)):
        raise ValueError("jets expanded at different base points")


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Cauchy product of two jets."""
    _check_compatible(a, b)
    K = a.order
    out = np.zeros(np.broadcast_shapes(a.coeffs.shape, b.coeffs.shape))
    for p in range(K + 1):
        out[p] = np.sum(a.coeffs[: p + 1] * b.coeffs[p::-1], axis=0)
    return Jet(a.base_point, out)


def jet_reciprocal(a: Jet) -> Jet:
    """Jet of ``1 / f``; requires ``f(t0) != 0``."""
    a0 = a.coeffs[0]
    if np.any(a0 == 0):
        raise ZeroDivisionError("reciprocal of a jet with zero constant term")
    K = a.order
    r = np.zeros_like(a.coeffs)
    r[0] = 1.0 / a0
    for p in range(1, K + 1):
        r[p] = -np.sum(a.coeffs[1 : p + 1] * r[p - 1 :: -1], axis=0) / a0
    return Jet(a.base_point, r)


def jet_exp(a: Jet) -> Jet:
    """Jet of ``exp(f)`` via ``p e_p = sum_{q=1}^p q a_q e_{p-q}``.

    Raises :class:`JetOverflowError` if any coefficient is not finite.
    """
    K = a.order
    e = np.zeros_like(a.coeffs)
    with np.errstate(over="ignore", invalid="ignore"):
        e[0] = np.exp(a.coeffs[0])
        q = np.arange(1, K + 1, dtype=float).reshape((-1,) + (1,) * (a.coeffs.ndim - 1))
        qa = q * a.coeffs[1:]
        for p in range(1, K + 1):
            e[p] = np.sum(qa[:p] * e[p - 1 :: -1], axis=0) / p
    if not np.all(np.isfinite(e)):
        raise JetOverflowError("jet_exp produced non-finite coefficients")
    return Jet(a.base_point, e)


def jet_pow_real(a: Jet, alpha: float) -> Jet:
    """Jet of ``f ** alpha`` for real ``alpha``; requires ``f(t0) > 0``.

    Uses ``p a_0 c_p = sum_{q=1}^p (q (alpha + 1) - p) a_q c_{p-q}``.
    """
    a0 = a.coeffs[0]
    if np.any(~(a0 > 0)):
        raise ValueError("jet_pow_real needs a strictly positive constant term")
    K = a.order
    c = np.zeros_like(a.coeffs)
    c[0] = a0**alpha
    for p in range(1, K + 1):
        q = np.arange(1, p + 1, dtype=float).reshape((-1,) + (1,) * (a.coeffs.ndim - 1))
        w = q * (alpha + 1.0) - p
        c[p] = np.sum(w * a.coeffs[1 : p + 1] * c[p - 1 :: -1], axis=0) / (p * a0)
    return Jet(a.base_point, c)


@lru_cache(maxsize=None)
def _bump_mass(s: float) -> float:
    k = 1.0 / (s - 1.0)

    def bump(t):
        return math.exp(-0.5 / (t * (1.0 - t)) ** k)

    lo, hi = _guard_interval(k)
    # symmetric integrand: integrate one half and double it
    val, _ = integrate.quad(bump, lo, 0.5, epsabs=1e-14, epsrel=1e-14, limit=200)
    return 2.0 * val


def _guard_interval(k: float) -> tuple[float, float]:
    # t(1-t) = (1 / (2 * 700))^(1/k) solved for the root nearest 0
    w = (0.5 / UNDERFLOW_EXPONENT) ** (1.0 / k)
    if 4.0 * w >= 1.0:
        s = 1.0 + 1.0 / k
        raise StepUnderflowError(f"Gevrey order s={s:.6g} is too close to 1: the bump underflows everywhere")
    lo = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * w))
    return lo, 1.0 - lo


@dataclass(frozen=True)
class GevreyStep:
    """Gevrey step ``phi_s`` built from the integral of a compact bump.

    Parameters
    ----------
    s : float
        Gevrey order, ``1 < s <= 2`` (``s = 2`` gives ``k = 1``).
    max_order : int
        Largest derivative order accepted by the derivative methods.
    """

    s: float
    max_order: int = MAX_ORDER
    k: float = field(init=False)
    Z: float = field(init=False)
    guard_eps: float = field(init=False)

    def __post_init__(self):
        if not 1.0 < self.s <= 2.0:
            raise ValueError(f"Gevrey order s must lie in (1, 2], got {self.s}")
        k = 1.0 / (self.s - 1.0)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "Z", _bump_mass(float(self.s)))
        object.__setattr__(self, "guard_eps", _guard_interval(k)[0])

    def _interior(self, t: np.ndarray) -> np.ndarray:
        return (t > self.guard_eps) & (t < 1.0 - self.guard_eps)

    def bump(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = self._interior(t)
        tm = t[m]
        out[m] = np.exp(-0.5 / (tm * (1.0 - tm)) ** self.k)
        return out

    def bump_jet(self, t, K: int) -> Jet:
        """Taylor jet of the bump at ``t`` (zero jet inside the endpoint guard)."""
        self._check_order(K)
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > 1)):
            raise ValueError("bump is evaluated on [0, 1] only")
        flat = t.reshape(-1)
        coeffs = np.zeros((K + 1, flat.size))
        m = self._interior(flat)
        if np.any(m):
            x = Jet.variable(flat[m], K)
            prod = jet_mul(jet_pow_real(x, self.k), jet_pow_real(1.0 - x, self.k))
            arg = jet_reciprocal(prod) * -0.5
            coeffs[:, m] = jet_exp(arg).coeffs
        return Jet(t, coeffs.reshape((K + 1,) + t.shape))

    def bump_derivatives(self, t, K: int) -> np.ndarray:
        """Derivatives ``bump^(p)(t)`` for ``p = 0..K`` (axis 0)."""
        return self.bump_jet(t, K).derivatives()

    def value(self, t):
        """``phi_s(t)`` with exact 1 below the guard and exact 0 above it."""
        t = np.asarray(t, dtype=float)
        out = np.where(t <= self.guard_eps, 1.0, 0.0).reshape(-1)
        flat = t.reshape(-1)
        for i in np.flatnonzero(self._interior(flat)):
            out[i] = _step_value(float(self.s), float(flat[i]))
        out = out.reshape(t.shape)
        return out[()] if out.ndim == 0 else out

    def step_derivatives(self, t, K: int) -> np.ndarray:
        """Derivatives ``phi_s^(p)(t)`` for ``p = 0..K`` (axis 0)."""
        self._check_order(K)
        t = np.asarray(t, dtype=float)
        out = np.zeros((K + 1,) + t.shape)
        out[0] = self.value(t)
        if K >= 1:
            out[1:] = -self.bump_derivatives(t, K - 1) / self.Z
        return out

    def _check_order(self, K: int) -> None:
        if K < 0 or K > self.max_order:
            raise ValueError(f"derivative order {K} outside [0, {self.max_order}]")


@lru_cache(maxsize=65536)
def _step_value(s: float, t: float) -> float:
    k = 1.0 / (s - 1.0)
    Z = _bump_mass(s)

    def bump(r):
        if r <= 0.0 or r >= 1.0:
            return 0.0
        return math.exp(-0.5 / (r * (1.0 - r)) ** k)

    # integrate over the shorter side to keep the small tail accurate
    if t <= 0.5:
        part, _ = integrate.quad(bump, 0.0, t, epsabs=1e-15, epsrel=1e-14, limit=200)
        return 1.0 - part / Z
    part, _ = integrate.quad(bump, t, 1.0, epsabs=1e-15, epsrel=1e-14, limit=200)
    return part / Z


def fit_gevrey_constants(table, s: float) -> tuple[float, float, float]:
    """Fit ``max|f^(i)| <= M i!^s / R^i`` by least squares in log space.

    Parameters
    ----------
    table : array_like
        ``table[i]`` is the largest observed ``|f^(i)|``.
    s : float
        Assumed Gevrey order.

    Returns
    -------
    M, R, residual
        ``residual`` is the RMS misfit of the log model (natural log units).
    """
    table = np.abs(np.asarray(table, dtype=float))
    order = np.arange(table.size)
    keep = table > 0
    if keep.sum() < 4:
        raise ValueError("need at least 4 nonzero derivative orders to fit (M, R)")
    i = order[keep]
    lhs = np.log(table[keep]) - s * np.array([math.lgamma(n + 1) for n in i])
    A = np.column_stack([np.ones(i.size), -i.astype(float)])
    (logM, logR), *_ = np.linalg.lstsq(A, lhs, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([logM, logR]) - lhs) ** 2)))
    return float(math.exp(logM)), float(math.exp(logR)), resid
