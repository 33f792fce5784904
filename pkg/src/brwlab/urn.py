"""Polya urn: martingale proportion, Beta limit, and conditional normal limit.

Start with b black and r red balls; each draw returns the ball plus c more of
its color. The black proportion Z_n is a martingale converging a.s. to
Z_infty ~ Beta(b/c, r/c), and conditionally on the first n draws Z_infty is
exactly Beta(B_n/c, R_n/c). The conditional law of sqrt(n) (Z_infty - Z_n)
therefore converges, path by path, to a centered normal whose variance
Z_infty (1 - Z_infty) is itself random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .harness import KsReport, ks_statistic, normal_cdf


@dataclass(frozen=True)
class UrnState:
    b: int
    r: int
    c: int
    black: int
    red: int
    draws: int

    def __post_init__(self):
        if min(self.b, self.r, self.c) < 1:
            raise ValueError("b, r, c must be positive integers")
        if self.black + self.red != self.b + self.r + self.c * self.draws:
            raise ValueError("ball count inconsistent with draw count")
        if self.black < self.b or self.red < self.r:
            raise ValueError("colors never lose balls")

    @property
    def proportion(self) -> float:
        return self.black / (self.black + self.red)


def initial(b: int, r: int, c: int) -> UrnState:
    return UrnState(b=b, r=r, c=c, black=b, red=r, draws=0)


def draw(state: UrnState, rng: np.random.Generator) -> UrnState:
    """One draw-and-reinforce step."""
    if rng.random() < state.proportion:
        return replace(state, black=state.black + state.c, draws=state.draws + 1)
    return replace(state, red=state.red + state.c, draws=state.draws + 1)


def run(state: UrnState, n_draws: int, rng: np.random.Generator) -> UrnState:
    for _ in range(n_draws):
        state = draw(state, rng)
    return state


def simulate_proportions(
    b: int, r: int, c: int, n: int, replicates: int, rng: np.random.Generator
) -> np.ndarray:
    """Z_n over independent urns, stepped jointly (vectorized across replicates)."""
    black = np.full(replicates, b, dtype=np.int64)
    total = b + r
    for k in range(n):
        u = rng.random(replicates)
        black += c * (u * total < black)
        total += c
    return black / total


def conditional_limit_law(state: UrnState) -> tuple[float, float]:
    """Beta parameters (B_n/c, R_n/c) of the conditional law of Z_infty."""
    return state.black / state.c, state.red / state.c


def beta_clt_check(
    alpha: float, beta: float, replicates: int, rng: np.random.Generator
) -> KsReport:
    """KS of sqrt(a+b) (Beta(a,b) - a/(a+b)) against N(0, p(1-p)), p = a/(a+b).

    Beta variates are built from the Gamma ratio G_a / (G_a + G_b).
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("shape parameters must be positive")
    p = alpha / (alpha + beta)
    if p <= 0.0 or p >= 1.0:
        raise ValueError("degenerate limit fraction")
    ga = rng.gamma(alpha, size=replicates)
    gb = rng.gamma(beta, size=replicates)
    bsamp = ga / (ga + gb)
    stat = math.sqrt(alpha + beta) * (bsamp - p)
    return ks_statistic(stat, normal_cdf(p * (1 - p)), target=f"N(0, {p * (1 - p):.6g})")


def asw_check(
    state: UrnState, replicates: int, rng: np.random.Generator
) -> tuple[KsReport, dict]:
    """Conditional normal limit for one frozen urn path.

    Draws Z_infty exactly from Beta(B_n/c, R_n/c), forms sqrt(n)(Z_infty - Z_n),
    and tests against N(0, Zhat (1 - Zhat)) with Zhat = Z_n standing in for the
    unobservable limit proportion (bias O(n^{-1/2}), mitigated by a long
    prefix).
    """
    n = state.draws
    if n < 1:
        raise ValueError("frozen path must contain at least one draw")
    a, bb = conditional_limit_law(state)
    z_n = state.proportion
    z_inf = rng.beta(a, bb, size=replicates)
    stat = math.sqrt(n) * (z_inf - z_n)
    var_hat = z_n * (1 - z_n)
    report = ks_statistic(stat, normal_cdf(var_hat), target=f"N(0, {var_hat:.6g})")
    diagnostics = {"z_n": z_n, "variance_hat": var_hat, "prefix_n": n, "alpha": a, "beta": bb}
    return report, diagnostics


def enumerate_distribution(b: int, r: int, c: int, n: int):
    """Exact law of the black-draw count after n draws (dynamic program).

    Returns (black_counts, probabilities) with exact Fractions; the state after
    k draws is determined by the number j of black draws so far.
    """
    if n > 12:
        raise ValueError("exact enumeration capped at n = 12")
    probs = [Fraction(1)]
    for k in range(n):
        nxt = [Fraction(0)] * (k + 2)
        total = b + r + c * k
        for j, p in enumerate(probs):
            if p == 0:
                continue
            black = b + c * j
            nxt[j + 1] += p * Fraction(black, total)
            nxt[j] += p * Fraction(total - black, total)
        probs = nxt
    blacks = np.array([b + c * j for j in range(n + 1)], dtype=np.int64)
    return blacks, probs


def enumerate_martingale_step(b: int, r: int, c: int, n: int) -> bool:
    """Exact one-step martingale identity E[Z_{k+1} | counts] = Z_k on every state."""
    for j in range(n + 1):
        black = Fraction(b + c * j)
        total = Fraction(b + r + c * n)
        z = black / total
        up = (black + c) / (total + c)
        down = black / (total + c)
        if z * up + (1 - z) * down != z:
            return False
    return True
