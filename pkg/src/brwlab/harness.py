"""Empirical-distribution machinery and the conditional-resampling engine.

Limit statements of the form  L(statistic | F_n) -> {omega -> kernel(omega)}
are tested operationally: freeze one realized path to time n, run M
independent continuations from the frozen state, and compare the conditional
empirical law of the statistic against the omega-dependent target, with the
acceptance threshold calibrated by running the identical Kolmogorov-Smirnov
pipeline on exact draws from the target.

Continuations evolve lattice-aggregated counts (see :mod:`brwlab.brw`), so a
16-generation prefix with ~6e4 particles costs a handful of multinomial draws
per continuation rather than per-particle work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .brw import (
    ClusterLaw,
    DEFAULT_COUNT_BUDGET,
    lattice_ensemble,
    lattice_eval_w,
    lattice_step_ensemble,
    lattice_totals,
)

__all__ = [
    "EmpiricalSample",
    "KsReport",
    "ks_statistic",
    "kolmogorov_pvalue",
    "normal_cdf",
    "exp1_cdf",
    "normal_mixture_cdf",
    "calibrate_ks_threshold",
    "FrozenCloud",
    "freeze_lattice_path",
    "ConditionalExperiment",
    "run_conditional",
    "conditional_profile_values",
    "fdd_covariance_check",
    "FddReport",
    "joint_independence_check",
    "IndependenceReport",
    "estimate_sigma2",
]


@dataclass
class EmpiricalSample:
    """Uniformly weighted sample of reals."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("sample must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample contains non-finite values")

    @cached_property
    def sorted_values(self) -> np.ndarray:
        return np.sort(self.values)

    @property
    def size(self) -> int:
        return int(self.values.size)


@dataclass
class KsReport:
    statistic: float
    p_value: float
    n: int
    target: str = ""

    def __post_init__(self):
        assert 0.0 <= self.statistic <= 1.0
        assert 0.0 <= self.p_value <= 1.0


def kolmogorov_pvalue(d: float, n: int) -> float:
    """Asymptotic two-sided p-value 2 sum_k (-1)^{k-1} exp(-2 k^2 (d sqrt n)^2)."""
    lam = d * math.sqrt(n)
    if lam < 1e-8:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += (-1) ** (k - 1) * term
        if term < 1e-16:
            break
    return float(min(1.0, max(0.0, 2.0 * total)))


def ks_statistic(sample, target_cdf: Callable[[np.ndarray], np.ndarray], target: str = "") -> KsReport:
    """One-sample KS distance sup |F_emp - F| with the asymptotic p-value."""
    if not isinstance(sample, EmpiricalSample):
        sample = EmpiricalSample(np.asarray(sample))
    n = sample.size
    if n < 2:
        raise ValueError("need at least 2 observations")
    xs = sample.sorted_values
    cdf = np.asarray(target_cdf(xs), dtype=np.float64)
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - cdf))
    d_minus = float(np.max(cdf - (grid - 1.0 / n)))
    d = max(d_plus, d_minus, 0.0)
    return KsReport(statistic=d, p_value=kolmogorov_pvalue(d, n), n=n, target=target)


def normal_cdf(variance: float) -> Callable[[np.ndarray], np.ndarray]:
    """CDF of N(0, variance); variance 0 degenerates to the unit step at 0."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    if variance == 0.0:
        return lambda x: (np.asarray(x) >= 0).astype(float)
    s = math.sqrt(variance)
    return lambda x: ndtr(np.asarray(x) / s)


def exp1_cdf(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, -np.expm1(-x), 0.0)


def normal_mixture_cdf(
    variance_samples: Sequence[float], multiplier: float = 1.0
) -> Callable[[np.ndarray], np.ndarray]:
    """CDF of the centered normal scale mixture x -> mean_v Phi(x / sqrt(mult*v)).

    Deterministic given the sample list. Zero-variance atoms contribute unit
    steps at 0.
    """
    v = np.asarray(variance_samples, dtype=np.float64) * multiplier
    if v.size == 0:
        raise ValueError("empty variance sample list")
    if np.any(v < 0):
        raise ValueError("negative variance sample")
    pos = v[v > 0]
    n_zero = v.size - pos.size
    sd = np.sqrt(pos)

    def cdf(x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = np.zeros(x.size)
        chunk = max(1, int(2e7 // max(1, sd.size)))
        for i in range(0, x.size, chunk):
            xi = x[i : i + chunk]
            out[i : i + chunk] = ndtr(xi[:, None] / sd[None, :]).mean(axis=1) * (pos.size / v.size)
        if n_zero:
            out += (n_zero / v.size) * (x >= 0)
        return out

    return cdf


def calibrate_ks_threshold(
    sample_size: int,
    runs: int,
    rng: np.random.Generator,
    quantile: float = 0.99,
) -> float:
    """Null calibration: KS quantile when the sample truly follows the target.

    Distribution-free, so uniforms against the identity CDF suffice.
    """
    ds = np.empty(runs)
    for i in range(runs):
        u = rng.random(sample_size)
        ds[i] = ks_statistic(u, lambda x: np.clip(x, 0.0, 1.0)).statistic
    return float(np.quantile(ds, quantile))


# --- frozen paths and conditional continuation -----------------------------------

@dataclass
class FrozenCloud:
    """Lattice snapshot of one BRW path at a fixed generation."""

    law: ClusterLaw
    generation: int
    base: int
    counts: np.ndarray  # (sites,) int64

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def normalized_count(self) -> float:
        """Frozen-path estimate of the population limit: N_n / m^n."""
        return self.total / self.law.mean_count**self.generation

    def eval_w(self, beta: complex) -> complex:
        return complex(
            lattice_eval_w(self.counts[None, :], self.base, self.generation, self.law, beta)[0]
        )


def freeze_lattice_path(
    law: ClusterLaw,
    n: int,
    rng: np.random.Generator,
    budget: int = DEFAULT_COUNT_BUDGET,
) -> FrozenCloud:
    counts, base = lattice_ensemble(law, n, 1, rng, budget=budget)
    return FrozenCloud(law=law, generation=n, base=base, counts=counts[0])


@dataclass
class ConditionalExperiment:
    """Specification of one frozen-path resampling experiment.

    Continuations are i.i.d. given the snapshot (the process is Markov in the
    current cloud). ``statistic`` is one of ``gw_residual`` (population
    residual m^{n/2} (Nhat_infty - N_n/m^n)) or ``gw_residual_selfnorm``
    (the same divided by sqrt(Nhat_infty) per continuation).
    """

    model: str
    snapshot: FrozenCloud
    continuations: int
    horizon: int
    statistic: str = "gw_residual"

    def __post_init__(self):
        if self.continuations < 2:
            raise ValueError("need at least 2 continuations")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def _continue_counts(
    snapshot: FrozenCloud,
    horizon: int,
    replicates: int,
    rng: np.random.Generator,
    budget: int = DEFAULT_COUNT_BUDGET,
) -> tuple[np.ndarray, int]:
    counts = np.tile(snapshot.counts, (replicates, 1))
    base = snapshot.base
    for _ in range(horizon):
        counts, base = lattice_step_ensemble(counts, base, snapshot.law, rng, budget=budget)
    return counts, base


def run_conditional(
    experiment: ConditionalExperiment,
    rng: np.random.Generator,
    budget: int = DEFAULT_COUNT_BUDGET,
) -> tuple[EmpiricalSample, dict]:
    """Conditional empirical law of the statistic over M continuations.

    Diagnostics carry the frozen-path population estimate Nhat_infty(omega) and
    a degeneracy flag (zero-variance laws produce an identically-zero
    statistic).
    """
    snap = experiment.snapshot
    law = snap.law
    m = law.mean_count
    n = snap.generation
    h = experiment.horizon
    counts, _ = _continue_counts(snap, h, experiment.continuations, rng, budget=budget)
    n_hat = lattice_totals(counts).astype(np.float64) / m ** (n + h)
    w0_frozen = snap.normalized_count
    stat = m ** (n / 2) * (n_hat - w0_frozen)
    if experiment.statistic == "gw_residual":
        values = stat
    elif experiment.statistic == "gw_residual_selfnorm":
        values = stat / np.sqrt(n_hat)
    else:
        raise ValueError(f"unknown statistic {experiment.statistic!r}")
    degenerate = bool(np.all(values == 0.0))
    diagnostics = {
        "n_hat_infty": w0_frozen,
        "frozen_total": snap.total,
        "generation": n,
        "horizon": h,
        "degenerate": degenerate,
    }
    return EmpiricalSample(values), diagnostics


def conditional_profile_values(
    snapshot: FrozenCloud,
    horizon: int,
    replicates: int,
    grid: np.ndarray,
    rng: np.random.Generator,
    disk_radius: float = 1.0,
    budget: int = DEFAULT_COUNT_BUDGET,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-continuation rescaled-tail values D(u) on a grid.

    Returns (values, flags): values is (replicates, len(grid)) complex, flags
    marks grid points outside the working disk (values set to 0 there). The
    difference W_{n+h} - W_n is formed directly; the float64 error m^{n/2} eps
    is orders of magnitude below Monte Carlo noise for the n used here.
    """
    grid = np.asarray(grid, dtype=np.complex128)
    n = snapshot.generation
    law = snapshot.law
    m = law.mean_count
    flags = np.abs(grid) / math.sqrt(n) > disk_radius
    counts, base = _continue_counts(snapshot, horizon, replicates, rng, budget=budget)
    values = np.zeros((replicates, grid.size), dtype=np.complex128)
    for i, u in enumerate(grid):
        if flags[i]:
            continue
        beta = complex(u) / math.sqrt(n)
        w_end = lattice_eval_w(counts, base, n + horizon, law, beta)
        w_frozen = snapshot.eval_w(beta)
        values[:, i] = m ** (n / 2) * (w_end - w_frozen)
    return values, flags


@dataclass
class FddReport:
    grid: np.ndarray
    weight_sums: np.ndarray  # exact finite-n sum_j a_j(u) a_j(v), complex matrix
    weight_targets: np.ndarray  # Nhat_infty * exp(tau^2 u v)
    mc_covariance: Optional[np.ndarray]  # mean D(u_i) D(u_j) over continuations
    mc_targets: Optional[np.ndarray]  # sigma2 * Nhat_infty * exp(tau^2 u_i u_j)
    n_hat_infty: float

    def weight_rel_errors(self) -> np.ndarray:
        return np.abs(self.weight_sums - self.weight_targets) / np.abs(self.weight_targets)

    def mc_rel_errors(self) -> np.ndarray:
        return np.abs(self.mc_covariance - self.mc_targets) / np.abs(self.mc_targets)


def weight_sum_matrix(snapshot: FrozenCloud, grid: np.ndarray) -> np.ndarray:
    """Exact sum_j a_{j,n}(u) a_{j,n}(v) from the frozen cloud.

    a_{j,n}(u) = m^{n/2} m(u/sqrt n)^{-n} e^{(u/sqrt n) z_j}, so the (u, v)
    entry collapses to a single exponential-sum evaluation at (u+v)/sqrt n.
    """
    grid = np.asarray(grid, dtype=np.complex128)
    n = snapshot.generation
    law = snapshot.law
    m = law.mean_count
    sites = snapshot.base + np.arange(snapshot.counts.size, dtype=np.float64)
    k = grid.size
    out = np.empty((k, k), dtype=np.complex128)
    for i in range(k):
        for j in range(i, k):
            beta_sum = (grid[i] + grid[j]) / math.sqrt(n)
            log_mi = np.log(complex(law.mgf(grid[i] / math.sqrt(n))))
            log_mj = np.log(complex(law.mgf(grid[j] / math.sqrt(n))))
            log_pref = n * (math.log(m) - log_mi - log_mj)
            total = np.sum(snapshot.counts * np.exp(beta_sum * sites + log_pref))
            out[i, j] = total
            out[j, i] = total
    return out


def fdd_covariance_check(
    snapshot: FrozenCloud,
    grid: np.ndarray,
    tau2: float,
    sigma2: Optional[float] = None,
    horizon: int = 0,
    replicates: int = 0,
    rng: Optional[np.random.Generator] = None,
    disk_radius: float = 1.0,
    budget: int = DEFAULT_COUNT_BUDGET,
) -> FddReport:
    """Finite-dimensional covariance checks for the rescaled tail.

    Always computes the deterministic weight-sum matrix against
    Nhat_infty * exp(tau^2 u v). With ``replicates`` > 0 it also runs
    continuations and estimates the conditional covariance of (D(u_i)) against
    sigma2 * Nhat_infty * exp(tau^2 u_i u_j).
    """
    grid = np.asarray(grid, dtype=np.complex128)
    n_hat = snapshot.normalized_count
    ws = weight_sum_matrix(snapshot, grid)
    wt = n_hat * np.exp(tau2 * np.outer(grid, grid))
    mc = None
    mt = None
    if replicates:
        if rng is None or sigma2 is None or horizon < 1:
            raise ValueError("MC covariance needs rng, sigma2 and horizon >= 1")
        values, _ = conditional_profile_values(
            snapshot, horizon, replicates, grid, rng, disk_radius=disk_radius, budget=budget
        )
        mc = (values.T @ values) / replicates
        mt = sigma2 * n_hat * np.exp(tau2 * np.outer(grid, grid))
    return FddReport(
        grid=grid,
        weight_sums=ws,
        weight_targets=wt,
        mc_covariance=mc,
        mc_targets=mt,
        n_hat_infty=n_hat,
    )


@dataclass
class IndependenceReport:
    correlation: float
    threshold: float
    n: int
    degenerate: bool = False

    @property
    def passed(self) -> bool:
        return not self.degenerate and abs(self.correlation) <= self.threshold


def joint_independence_check(residuals, surrogates) -> IndependenceReport:
    """Sample correlation between normalized residuals and their limit surrogates.

    Asymptotic independence predicts correlation 0; the threshold is the
    3-sigma null band 3/sqrt(M) for M paired paths.
    """
    x = np.asarray(residuals, dtype=np.float64)
    y = np.asarray(surrogates, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("residuals and surrogates must be equal-length vectors")
    m = x.size
    if m < 3:
        raise ValueError("need at least 3 paths")
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        return IndependenceReport(float("nan"), 3.0 / math.sqrt(m), m, degenerate=True)
    corr = float(np.corrcoef(x, y)[0, 1])
    return IndependenceReport(corr, 3.0 / math.sqrt(m), m)


def estimate_sigma2(
    law: ClusterLaw, n: int, replicates: int, rng: np.random.Generator
) -> float:
    """Monte Carlo estimate of Var N_infty from the variance of N_n / m^n."""
    counts, _ = lattice_ensemble(law, n, replicates, rng)
    w0 = lattice_totals(counts).astype(np.float64) / law.mean_count**n
    return float(np.var(w0, ddof=1))
