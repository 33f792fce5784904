"""The limiting Gaussian analytic function and its kernel samples.

xi(u) = sum_k xi_k u^k / sqrt(k!) with i.i.d. real standard normal
coefficients; covariance E[xi(u) xi(v)] = e^{uv}. The limit kernel of the
rescaled martingale tail is u -> sigma * sqrt(N_infty) * xi(tau u), with the
population limit independent of xi.

Samples are truncated power series: the truncation order is chosen so the
tail variance at the declared working radius is below a fixed tolerance, far
under Monte Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

TAIL_TOL = 1e-12


def truncation_order(radius: float, tol: float = TAIL_TOL) -> int:
    """Minimal K with sum_{k>=K} radius^{2k} / k! <= tol."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0.0:
        return 1
    r2 = radius * radius
    terms = [1.0]
    k = 1
    while True:
        terms.append(terms[-1] * r2 / k)
        # past the peak and individually negligible: tail is geometric-dominated
        if k > r2 and terms[-1] < tol * 1e-6:
            break
        k += 1
        if k > 100000:
            raise ValueError("radius too large for float64 truncation search")
    tails = np.cumsum(np.array(terms)[::-1])[::-1]
    idx = np.flatnonzero(tails <= tol)
    if idx.size == 0:
        return len(terms)
    return max(1, int(idx[0]))


def _coeff_scale(order: int) -> np.ndarray:
    # 1/sqrt(k!) via cumulative products, stable for the orders used here
    scale = np.empty(order)
    scale[0] = 1.0
    for k in range(1, order):
        scale[k] = scale[k - 1] / math.sqrt(k)
    return scale


@dataclass
class GafSample:
    """One realization of xi as a truncated coefficient sequence."""

    coeffs: np.ndarray  # xi_0 .. xi_{K-1}, standard normal draws
    radius: float  # declared working radius of the truncation bound

    @property
    def order(self) -> int:
        return int(self.coeffs.size)

    def eval(self, u: Union[complex, np.ndarray]) -> Union[complex, np.ndarray]:
        u = np.asarray(u)
        c = self.coeffs * _coeff_scale(self.order)
        out = np.polynomial.polynomial.polyval(u, c)
        return complex(out) if out.ndim == 0 else out

    def derivative_at_zero(self) -> float:
        return float(self.coeffs[1]) if self.order > 1 else 0.0


def sample_gaf(radius: float, rng: np.random.Generator, tol: float = TAIL_TOL) -> GafSample:
    order = truncation_order(radius, tol)
    return GafSample(coeffs=rng.standard_normal(order), radius=float(radius))


def sample_values(
    points: np.ndarray, replicates: int, rng: np.random.Generator, tol: float = TAIL_TOL
) -> np.ndarray:
    """(replicates, len(points)) matrix of xi(points) over independent samples."""
    points = np.asarray(points, dtype=np.complex128)
    radius = float(np.abs(points).max()) if points.size else 0.0
    order = truncation_order(radius, tol)
    powers = np.vander(points, N=order, increasing=True).T  # (order, npts)
    powers *= _coeff_scale(order)[:, None]
    normals = rng.standard_normal((replicates, order))
    return normals @ powers


def sample_derivatives(
    points: np.ndarray, replicates: int, rng: np.random.Generator, tol: float = TAIL_TOL
) -> np.ndarray:
    """(replicates, len(points)) matrix of xi'(points) over independent samples."""
    points = np.asarray(points, dtype=np.complex128)
    radius = float(np.abs(points).max()) if points.size else 0.0
    order = max(2, truncation_order(radius, tol) + 1)
    # term-by-term derivative: coefficient of u^{k-1} is xi_k k / sqrt(k!)
    powers = np.vander(points, N=order - 1, increasing=True).T
    scale = (_coeff_scale(order) * np.arange(order))[1:]
    powers = powers * scale[:, None]
    normals = rng.standard_normal((replicates, order))
    return normals[:, 1:] @ powers


@dataclass
class MomentEstimate:
    estimate: complex
    target: complex
    se: float
    replicates: int

    @property
    def within(self) -> float:
        """|estimate - target| in units of the standard error."""
        return abs(self.estimate - self.target) / self.se


def _mean_and_se(values: np.ndarray) -> tuple[complex, float]:
    m = complex(values.mean())
    var = float(np.var(values.real, ddof=1) + np.var(values.imag, ddof=1))
    return m, math.sqrt(var / values.size)


def covariance_check(
    u: complex, v: complex, replicates: int, rng: np.random.Generator
) -> tuple[MomentEstimate, MomentEstimate]:
    """Monte Carlo E[xi(u) xi(v)] and E[xi(u) conj(xi(v))] vs e^{uv}, e^{u conj v}."""
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    vals = sample_values(np.array([u, v], dtype=np.complex128), replicates, rng)
    prod = vals[:, 0] * vals[:, 1]
    prod_conj = vals[:, 0] * np.conj(vals[:, 1])
    e1, s1 = _mean_and_se(prod)
    e2, s2 = _mean_and_se(prod_conj)
    return (
        MomentEstimate(e1, np.exp(complex(u) * complex(v)), s1, replicates),
        MomentEstimate(e2, np.exp(complex(u) * np.conj(complex(v))), s2, replicates),
    )


def stationarity_check(
    u: float, v: float, replicates: int, rng: np.random.Generator
) -> MomentEstimate:
    """E[xi~(u) xi~(v)] with xi~(u) = e^{-u^2/2} xi(u), target e^{-(u-v)^2/2}.

    Real arguments only: the damped process is a stationary real Gaussian
    process, so the estimate should depend on u - v alone.
    """
    u, v = float(u), float(v)
    vals = sample_values(np.array([u, v], dtype=np.complex128), replicates, rng).real
    damped = vals * np.exp(-0.5 * np.array([u * u, v * v]))
    prod = damped[:, 0] * damped[:, 1]
    est = float(prod.mean())
    se = math.sqrt(float(np.var(prod, ddof=1)) / replicates)
    return MomentEstimate(est, math.exp(-0.5 * (u - v) ** 2), se, replicates)


@dataclass
class LimitKernelSample:
    """One draw of the limit kernel u -> sigma sqrt(N) xi(tau u)."""

    gaf: GafSample
    sigma: float
    tau: float
    n_infty: float

    def eval(self, u):
        if self.sigma == 0.0:
            u = np.asarray(u)
            zeros = np.zeros(u.shape, dtype=np.complex128)
            return complex(0) if u.ndim == 0 else zeros
        return self.sigma * math.sqrt(self.n_infty) * self.gaf.eval(self.tau * np.asarray(u))


def sample_limit_kernel(
    sigma: float,
    tau: float,
    n_infty_source: Union[float, Callable[[np.random.Generator], float]],
    rng: np.random.Generator,
    radius: float = 1.0,
) -> LimitKernelSample:
    """Draw (xi, N_infty) independently; frozen kernels pass a fixed N value.

    ``n_infty_source`` is either a number (conditional kernel, outcome frozen)
    or a callable drawing from the population-limit law (unconditional mixture).
    """
    if sigma < 0 or tau < 0:
        raise ValueError("sigma and tau must be >= 0")
    gaf = sample_gaf(tau * radius, rng)
    if callable(n_infty_source):
        n_val = float(n_infty_source(rng))
    else:
        n_val = float(n_infty_source)
    if n_val <= 0:
        raise ValueError("N_infty draw must be positive")
    return LimitKernelSample(gaf=gaf, sigma=float(sigma), tau=float(tau), n_infty=n_val)
