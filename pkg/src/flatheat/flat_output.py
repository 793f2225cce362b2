"""Per-mode flat outputs and their time derivatives.

For cross-section mode ``j`` the flat output is

    y_j(t) = phi_s((t - tau) / (T - tau)) * g_j(t),
    g_j(t) = sqrt(2) sum_n c[j, n] exp(-n^2 pi^2 t),

and ``y_j^(i)(tau)`` must equal the Taylor data of the free state at ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gevrey import GevreyStep
from .spectral import PI2, SQRT2, BoxDomain, CosineSeries, TensorCosineSeries

__all__ = [
    "FlatMode",
    "FlatOutputs",
    "analytic_part_derivatives",
    "y_derivatives",
    "y_tau_coefficients",
    "compensated_sum",
]


@lru_cache(maxsize=None)
def binomial_table(i_max: int) -> np.ndarray:
    """``C(i, k)`` for ``0 <= k <= i <= i_max`` computed exactly, then cast."""
    tab = np.zeros((i_max + 1, i_max + 1))
    for i in range(i_max + 1):
        for k in range(i + 1):
            tab[i, k] = float(math.comb(i, k))
    tab.setflags(write=False)
    return tab


def compensated_sum(terms: np.ndarray, axis: int = 0) -> np.ndarray:
    """Neumaier summation along ``axis``."""
    terms = np.moveaxis(np.asarray(terms, dtype=float), axis, 0)
    s = np.zeros(terms.shape[1:])
    comp = np.zeros_like(s)
    for term in terms:
        tmp = s + term
        big = np.abs(s) >= np.abs(term)
        comp += np.where(big, (s - tmp) + term, (term - tmp) + s)
        s = tmp
    return s + comp


def _analytic_table(coeffs: np.ndarray, t: np.ndarray, i_max: int) -> np.ndarray:
    """``g_j^(i)(t)`` for all rows of ``coeffs``; shape ``(J, i_max + 1) + t.shape``.

    Each summand is ``sign * exp(i ln(n^2 pi^2) - n^2 pi^2 t + ln|c|)`` so the
    power ``(n^2 pi^2)^i`` is never formed on its own.
    """
    coeffs = np.atleast_2d(coeffs)
    J, N = coeffs.shape
    t = np.asarray(t, dtype=float)
    tf = t.reshape(-1)
    out = np.zeros((J, i_max + 1, tf.size))
    out[:, 0, :] = SQRT2 * coeffs[:, :1]
    if N > 1:
        n = np.arange(1, N, dtype=float)
        lam = PI2 * n**2
        c = coeffs[:, 1:]
        nz = c != 0
        logc = np.where(nz, np.log(np.abs(np.where(nz, c, 1.0))), -np.inf)
        sign_c = np.sign(c)
        i = np.arange(i_max + 1, dtype=float)
        # exponent[i, n, t]
        expo = i[:, None, None] * np.log(lam)[None, :, None] - lam[None, :, None] * tf[None, None, :]
        sign_i = np.where(np.arange(i_max + 1) % 2 == 0, 1.0, -1.0)
        for jj in range(J):
            if not nz[jj].any():
                continue
            terms = sign_c[jj][None, :, None] * np.exp(expo + logc[jj][None, :, None])
            # terms[i, n, t]; sum over n
            out[jj] += SQRT2 * sign_i[:, None] * compensated_sum(terms, axis=1)
    return out.reshape((J, i_max + 1) + t.shape)


@dataclass(frozen=True)
class FlatOutputs:
    """All cross-section modes of a flat-output family sharing ``tau, T, phi_s``.

    Parameters
    ----------
    series : TensorCosineSeries
        Coefficients ``c[j, n]`` already truncated to ``(jbar, nbar)``.
    tau, T : float
        Switching and final times, ``0 < tau < T``.
    step : GevreyStep
        Step used to modulate the analytic part.
    """

    series: TensorCosineSeries
    tau: float
    T: float
    step: GevreyStep

    def __post_init__(self):
        if isinstance(self.series, CosineSeries):
            object.__setattr__(self, "series", self.series.as_tensor())
        if not 0.0 < self.tau < self.T:
            raise ValueError(f"need 0 < tau < T, got tau={self.tau}, T={self.T}")

    @property
    def domain(self) -> BoxDomain:
        return self.series.domain

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.domain.eigenvalues(self.series.j_max)

    def mode(self, j: int) -> "FlatMode":
        return FlatMode(
            j=j,
            lambda_j=float(self.eigenvalues[j]),
            coeffs_n=self.series.coeffs[j],
            tau=self.tau,
            T=self.T,
            gs=self.step,
        )

    def analytic_table(self, t, i_max: int) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("derivatives of the analytic part need t > 0")
        return _analytic_table(self.series.coeffs, t, i_max)

    def step_table(self, t, i_max: int) -> np.ndarray:
        """``phi^(k)(u) (T - tau)^-k`` at ``u = (t - tau) / (T - tau)``."""
        t = np.asarray(t, dtype=float)
        span = self.T - self.tau
        u = np.clip((t - self.tau) / span, 0.0, 1.0)
        d = self.step.step_derivatives(u, i_max)
        scale = span ** -np.arange(i_max + 1, dtype=float)
        return d * scale.reshape((-1,) + (1,) * t.ndim)

    def y_table(self, t, i_max: int) -> np.ndarray:
        """``y_j^(i)(t)``; shape ``(J, i_max + 1) + t.shape``."""
        t = np.asarray(t, dtype=float)
        if np.any((t < self.tau) | (t > self.T)):
            raise ValueError("y is defined on [tau, T]")
        g = self.analytic_table(t, i_max)  # (J, I, ...)
        phi = self.step_table(t, i_max)  # (I, ...)
        binom = binomial_table(i_max)
        out = np.empty_like(g)
        for i in range(i_max + 1):
            k = np.arange(i + 1)
            # terms[k, J, ...] = C(i,k) phi^(k) g^(i-k)
            bk = binom[i, : i + 1].reshape((-1,) + (1,) * t.ndim) * phi[: i + 1]
            terms = bk[:, None, ...] * np.moveaxis(g[:, i - k], 1, 0)
            out[:, i] = compensated_sum(terms, axis=0)
        return out

    def tau_table(self, i_max: int) -> np.ndarray:
        """Matching coefficients ``y_{j,i}``; shape ``(J, i_max + 1)``."""
        return _analytic_table(self.series.coeffs, np.array(self.tau), i_max)


@dataclass(frozen=True)
class FlatMode:
    """A single cross-section mode ``j`` (``lambda_j = 0`` on the rod)."""

    j: int
    lambda_j: float
    coeffs_n: np.ndarray
    tau: float
    T: float
    gs: GevreyStep

    def __post_init__(self):
        if not 0.0 < self.tau < self.T:
            raise ValueError("need 0 < tau < T")
        if self.j == 0 and self.lambda_j != 0.0:
            raise ValueError("the j = 0 mode has lambda_0 = 0")
        c = np.array(self.coeffs_n, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs_n", c)

    @classmethod
    def from_series(cls, series: CosineSeries, tau: float, T: float, gs: GevreyStep) -> "FlatMode":
        return cls(0, 0.0, series.coeffs, tau, T, gs)

    def _family(self) -> FlatOutputs:
        return FlatOutputs(TensorCosineSeries(self.coeffs_n[None, :], cross_dim=0), self.tau, self.T, self.gs)


def analytic_part_derivatives(mode: FlatMode, t, i_max: int) -> np.ndarray:
    """``g^(i)(t) = sqrt2 sum_n c_n (-n^2 pi^2)^i e^{-n^2 pi^2 t}``, ``i = 0..i_max``."""
    return mode._family().analytic_table(t, i_max)[0]


def y_derivatives(mode: FlatMode, t, i_max: int) -> np.ndarray:
    """Leibniz expansion of ``y^(i)(t)`` for ``t`` in ``[tau, T]``."""
    return mode._family().y_table(t, i_max)[0]


def y_tau_coefficients(mode: FlatMode, i_max: int) -> np.ndarray:
    """``y_i = sqrt2 sum_n c_n e^{-n^2 pi^2 tau} (-n^2 pi^2)^i``."""
    if mode.tau <= 0:
        raise ValueError("tau must be positive")
    return mode._family().tau_table(i_max)[0]
