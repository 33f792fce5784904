"""Yule birth times, exact moment products, and Kendall spacings.

Birth times of a rate-lambda pure-birth process admit the representation
lambda T_n = sum_{k=1}^{n-1} E_k / k with i.i.d. unit exponentials E_k
(T_1 = 0). The normalized population n e^{-lambda T_n} converges a.s. to the
Exp(1) population limit, the moments E (n / e^{lambda T_n})^r are an exact
telescoping product converging to Gamma(r+1), and conditionally on the limit
y the points y (e^{lambda T_n} - 1) form a unit-rate Poisson process, so
their spacings beyond a burn-in are near-i.i.d. Exp(1).

Trees advance by particle count; birth times are attached after the fact, so
tree statistics never require simulating clocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .harness import KsReport, exp1_cdf, ks_statistic


@dataclass
class YuleTimes:
    """Birth times T_1 = 0 <= T_2 <= ... <= T_n of a rate-lambda Yule process.

    ``exp_draws`` stores the unit exponentials behind the representation, so a
    rate change is an exact rescaling of the same path.
    """

    lam: float
    times: np.ndarray
    exp_draws: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.times[0] != 0.0:
            raise ValueError("T_1 must be 0")

    @property
    def n(self) -> int:
        return int(self.times.size)

    def population_limit_estimate(self) -> float:
        """n e^{-lambda T_n} at the largest simulated index."""
        return self.n * math.exp(-self.lam * float(self.times[-1]))

    def with_rate(self, lam: float) -> "YuleTimes":
        """Same exponential path at a different rate (times scale by 1/lam)."""
        scale = self.lam / lam
        return YuleTimes(lam=lam, times=self.times * scale, exp_draws=self.exp_draws)


def sample_times(n: int, lam: float, rng: np.random.Generator) -> YuleTimes:
    """Birth times via the harmonic-weighted exponential representation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    draws = rng.standard_exponential(n - 1)
    lam_t = np.concatenate([[0.0], np.cumsum(draws / np.arange(1, n))])
    return YuleTimes(lam=lam, times=lam_t / lam, exp_draws=draws)


def population_limit_sample(
    n: int, replicates: int, rng: np.random.Generator, chunk: int = 256
) -> np.ndarray:
    """Replicates of n e^{-lambda T_n} (the Exp(1)-limit surrogate).

    Rate-free: lambda T_n depends only on the exponential draws. Drawn in
    chunks so n * replicates exponentials never materialize at once.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    inv_k = 1.0 / np.arange(1, n)
    out = np.empty(replicates)
    for i in range(0, replicates, chunk):
        rows = min(chunk, replicates - i)
        lam_t = rng.standard_exponential((rows, n - 1)) @ inv_k
        out[i : i + rows] = n * np.exp(-lam_t)
    return out


def moment_product(n: int, r: float) -> tuple[float, float]:
    """(exact, limit) for E (n / e^{lambda T_n})^r.

    The exact value is n^r * prod_{k=1}^{n-1} (1 + r/k)^{-1}; the limit is
    Gamma(r+1). Integer r telescopes and is computed in exact rational
    arithmetic; fractional r goes through the log domain.
    """
    if r <= -1:
        raise ValueError("moment product requires r > -1")
    if n < 1:
        raise ValueError("n must be >= 1")
    limit = math.gamma(r + 1.0)
    if float(r).is_integer():
        ri = int(r)
        # n^r * (n-1)! * r! / (n+r-1)!
        num = Fraction(n) ** ri * Fraction(math.factorial(ri))
        den = Fraction(1)
        for k in range(n, n + ri):
            den *= k
        return float(num / den), limit
    log_val = r * math.log(n) - math.fsum(math.log1p(r / k) for k in range(1, n))
    return math.exp(log_val), limit


def kendall_check(
    times: YuleTimes,
    n_infty_estimate: Optional[float] = None,
    burn_in: int = 1000,
) -> KsReport:
    """KS test of the rescaled birth-point spacings against Exp(1).

    Forms P_k = yhat (e^{lambda T_k} - 1) with yhat the trajectory's own
    population-limit estimate and tests the spacings P_{k+1} - P_k past the
    burn-in index.
    """
    if burn_in < 1:
        raise ValueError("burn_in must be >= 1")
    if times.n < burn_in + 3:
        raise ValueError(f"need more than burn_in+2 = {burn_in + 2} birth times")
    if n_infty_estimate is None:
        n_infty_estimate = times.population_limit_estimate()
    growth = np.exp(times.lam * times.times[burn_in - 1 :])
    points = n_infty_estimate * (growth - 1.0)
    spacings = np.diff(points)
    return ks_statistic(spacings, exp1_cdf, target="Exp(1) spacings")


def poisson_times(n: int, lam: float, y: float, rng: np.random.Generator) -> YuleTimes:
    """Synthetic birth times whose rescaled points are an exact Poisson process.

    Null case for the spacing test: conditionally on limit y the construction
    inverts P_k = y (e^{lambda T_k} - 1) from unit-rate Poisson points.
    """
    gaps = rng.standard_exponential(n - 1)
    p = np.concatenate([[0.0], np.cumsum(gaps)])
    return YuleTimes(lam=lam, times=np.log1p(p / y) / lam, exp_draws=None)


def attach_times(times: YuleTimes, values: np.ndarray) -> np.ndarray:
    """Pair per-count statistics with birth times: rows (k, T_k, value_k).

    Product-space embedding: the index-driven tree trajectory and the clock are
    sampled independently and joined by particle count.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size != times.n:
        raise ValueError("need one value per birth time")
    idx = np.arange(1, times.n + 1, dtype=np.float64)
    return np.column_stack([idx, times.times, values])


def times_write_csv(times: YuleTimes, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,time\n")
        for i, t in enumerate(times.times, start=1):
            fh.write(f"{i},{t!r}\n")
