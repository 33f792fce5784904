"""Biggins martingale evaluation and the rescaled martingale tail.

For a BRW with generation-1 intensity mgf m(beta), the Biggins martingale is

    W_n(beta) = m(beta)^-n * sum_j exp(beta * z_{j,n}),

an analytic-function-valued martingale with W_n(0) = N_n / m^n. Its derivative
at 0 is the position martingale L_n = (S_n - d n N_n) / m^n. The rescaled tail

    D_n(u) = m^{n/2} * (W_infty(u/sqrt n) - W_n(u/sqrt n))

is computed cancellation-free through the subtree decomposition

    m(b)^n (W_{n+h} - W_n)(b) = sum_j exp(b z_j) (W_j^(h)(b) - 1),

with an independent depth-h subtree per time-n particle standing in for the
inaccessible infinite-horizon limit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .brw import (
    BrwTrajectory,
    ClusterLaw,
    InvalidLawError,
    ModelParams,
    DEFAULT_PARTICLE_BUDGET,
    extend,
    simulate,
)
from .rng import substream

MAX_EXPONENT = 700.0  # exp argument ceiling before float64 overflow


class NumericalConsistencyError(Exception):
    """Two routes to the same quantity disagree beyond tolerance."""


class EvalOverflowError(Exception):
    pass


# --- cumulants ----------------------------------------------------------------

@dataclass(frozen=True)
class CumulantSpec:
    """Closed-form log-mgf phi with its derived constants.

    ``kind`` is "generation" when phi = log m(beta) of a discrete-step cluster
    law (growth constant is m = e^phi(0)) or "rate" for a continuous-time
    branching rate function (growth constant is lambda = phi(0)).
    ``d`` / ``tau2`` carry closed forms when known; otherwise finite
    differences are used.
    """

    phi: Callable[[complex], complex]
    kind: str = "generation"
    beta0: float = 1.0
    d: Optional[float] = None
    tau2: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("generation", "rate"):
            raise ValueError("kind must be 'generation' or 'rate'")

    @classmethod
    def from_law(cls, law: ClusterLaw, beta0: float = 1.0, label: str = "") -> "CumulantSpec":
        return cls(
            phi=lambda b: cmath.log(law.mgf(b)),
            kind="generation",
            beta0=beta0,
            d=law.mean_displacement,
            tau2=law.displacement_variance,
            label=label or law.variant,
        )

    @property
    def growth(self) -> float:
        p0 = complex(self.phi(0.0)).real
        return math.exp(p0) if self.kind == "generation" else p0


@dataclass(frozen=True)
class Cumulants:
    growth: float  # m for generation laws, lambda for rate laws
    d: float
    tau2: float


def _richardson_d1(phi, h: float) -> float:
    def d1(s):
        return (complex(phi(s)).real - complex(phi(-s)).real) / (2 * s)

    return (4 * d1(h / 2) - d1(h)) / 3


def _richardson_d2(phi, h: float) -> float:
    p0 = complex(phi(0.0)).real

    def d2(s):
        return (complex(phi(s)).real - 2 * p0 + complex(phi(-s)).real) / (s * s)

    return (4 * d2(h / 2) - d2(h)) / 3


def cumulants(spec: CumulantSpec, fd_step: float = 1e-5, grid_points: int = 33) -> Cumulants:
    """(growth, d, tau2) from the closed forms, else central differences.

    Convexity of the real restriction of phi is checked on a grid inside the
    working disk; failure marks the law invalid.
    """
    r = min(spec.beta0, 1.0) * 0.9
    grid = np.linspace(-r, r, grid_points)
    vals = np.array([complex(spec.phi(b)).real for b in grid])
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    if np.any(second < -1e-9 * max(1.0, np.abs(vals).max())):
        raise InvalidLawError("phi restricted to real beta is not convex on the grid")
    d = spec.d if spec.d is not None else _richardson_d1(spec.phi, fd_step)
    tau2 = spec.tau2 if spec.tau2 is not None else _richardson_d2(spec.phi, fd_step)
    return Cumulants(growth=spec.growth, d=float(d), tau2=float(tau2))


# --- martingale evaluation ------------------------------------------------------

@dataclass
class MartingaleValue:
    beta: complex
    n: int
    value: complex
    log_norm: complex  # n * log m(beta), kept separately


def eval_W(
    traj: BrwTrajectory, beta: complex, generation: Optional[int] = None
) -> MartingaleValue:
    """W_n(beta) with per-term normalization and pairwise summation."""
    if generation is None:
        generation = traj.n
    cloud = traj.clouds[generation]
    beta = complex(beta)
    log_m = cmath.log(complex(traj.law.mgf(beta)))
    log_norm = generation * log_m
    z = cloud.positions
    expo_max = (beta.real * z.max() if beta.real >= 0 else beta.real * z.min()) - log_norm.real
    if expo_max > MAX_EXPONENT:
        raise EvalOverflowError(
            f"exp argument {expo_max:.1f} exceeds float range even after normalization"
        )
    terms = np.exp(beta * z - log_norm)
    return MartingaleValue(beta=beta, n=generation, value=complex(np.sum(terms)), log_norm=log_norm)


def derivative_martingale(traj: BrwTrajectory, params: ModelParams, generation: Optional[int] = None) -> float:
    """L_n = W_n'(0) = (S_n - d n N_n) / m^n."""
    if generation is None:
        generation = traj.n
    s = traj.position_sums[generation]
    nn = traj.counts[generation]
    return (s - params.d * generation * nn) / params.m**generation


def cauchy_derivative(f: Callable[[complex], complex], r: float = 0.1, K: int = 64) -> complex:
    """f'(0) by the trapezoidal Cauchy-integral rule on a circle of radius r.

    Exact for polynomials of degree < K+1; error decays like r^K for analytic f.
    """
    if K < 16:
        raise ValueError("K must be >= 16")
    theta = 2 * np.pi * np.arange(K) / K
    pts = r * np.exp(1j * theta)
    vals = np.array([complex(f(p)) for p in pts])
    return complex(np.mean(vals * np.exp(-1j * theta)) / r)


def derivative_via_cauchy(
    traj: BrwTrajectory,
    r: float = 0.1,
    K: int = 64,
    params: Optional[ModelParams] = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> complex:
    """W_n'(0) by quadrature; cross-checked against the direct L_n formula.

    When ``params`` is supplied the direct route is evaluated and disagreement
    beyond atol + rtol*|L_n| raises NumericalConsistencyError.
    """
    est = cauchy_derivative(lambda b: eval_W(traj, b).value, r=r, K=K)
    if params is not None:
        direct = derivative_martingale(traj, params)
        if abs(est - direct) > atol + rtol * abs(direct):
            raise NumericalConsistencyError(
                f"Cauchy derivative {est} vs direct formula {direct}"
            )
    return est


# --- horizon surrogates for the martingale limit --------------------------------

@dataclass
class WInftyEstimate:
    value: complex
    error_estimate: Optional[float]
    horizon: int
    trajectory: BrwTrajectory  # the extended trajectory (n + h generations)


def approx_w_infinity(
    traj: BrwTrajectory,
    horizon: int,
    beta: complex,
    rng: np.random.Generator,
    budget: int = DEFAULT_PARTICLE_BUDGET,
) -> WInftyEstimate:
    """W_{n+h}(beta) as a surrogate for W_infty(beta).

    The error estimate extrapolates the geometric L2 decay of martingale
    increments, ratio rho = m(2 Re beta) / |m(beta)|^2 per generation, from the
    last observed increment. horizon 0 returns W_n unchanged.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon == 0:
        return WInftyEstimate(eval_W(traj, beta).value, None, 0, traj)
    ext = extend(traj, horizon, rng, budget=budget)
    w_end = eval_W(ext, beta).value
    w_prev = eval_W(ext, beta, generation=ext.n - 1).value
    law = traj.law
    rho = abs(complex(law.mgf(2 * complex(beta).real))) / abs(complex(law.mgf(beta))) ** 2
    q = math.sqrt(rho)
    err = abs(w_end - w_prev) * q / (1 - q) if q < 1 else float("inf")
    return WInftyEstimate(w_end, err, horizon, ext)


# --- rescaled martingale tail on a disk ------------------------------------------

@dataclass
class DiskProfile:
    """Values of the rescaled tail D_n(u) (or of a limit-kernel sample) on a grid.

    ``flags[i]`` marks grid points where u/sqrt(n) left the working disk; such
    values are defined as 0 by convention.
    """

    radius: float
    points: np.ndarray  # complex grid, includes 0
    values: np.ndarray  # complex
    flags: np.ndarray  # bool
    generation: int = 0
    horizon: int = 0

    def __post_init__(self):
        if not np.any(self.points == 0):
            raise ValueError("grid must include u = 0")
        if not np.all(np.isfinite(self.values.view(np.float64))):
            raise ValueError("non-finite profile value")

    def at_zero(self) -> complex:
        return complex(self.values[np.flatnonzero(self.points == 0)[0]])


def disk_grid(radius: float, n_rings: int = 4, n_angles: int = 8) -> np.ndarray:
    """Concentric-ring grid on the closed disk, origin included."""
    pts = [0j]
    for i in range(1, n_rings + 1):
        r = radius * i / n_rings
        ang = 2 * np.pi * np.arange(n_angles) / n_angles
        pts.extend(r * np.exp(1j * ang))
    return np.array(pts, dtype=np.complex128)


def _subtree_w(
    law: ClusterLaw,
    horizon: int,
    betas: np.ndarray,
    rng: np.random.Generator,
    budget: int,
) -> np.ndarray:
    """W_h(beta) of one fresh subtree, for every beta at once."""
    sub = simulate(law, horizon, rng, budget=budget)
    pos = sub.final.positions
    log_m = np.array([cmath.log(complex(law.mgf(b))) for b in betas])
    return np.exp(np.outer(betas, pos) - horizon * log_m[:, None]).sum(axis=1)


def d_profile(
    traj: BrwTrajectory,
    horizon: int,
    grid: np.ndarray,
    rng: np.random.Generator,
    disk_radius: float = 1.0,
    budget: int = DEFAULT_PARTICLE_BUDGET,
) -> DiskProfile:
    """Rescaled martingale tail D_n(u) = m^{n/2}(W_{n+h} - W_n)(u/sqrt n).

    Computed through the subtree decomposition rather than by subtracting two
    O(1) martingale values, since the difference itself is O(m^{-n/2}). Each
    time-n particle gets an independent depth-``horizon`` subtree drawn from a
    child stream keyed by its index.
    """
    if traj.n < 1:
        raise ValueError("need at least one generation")
    n = traj.n
    grid = np.asarray(grid, dtype=np.complex128)
    flags = np.abs(grid) / math.sqrt(n) > disk_radius
    betas = grid / math.sqrt(n)
    ok = ~flags
    betas_ok = betas[ok]
    law = traj.law
    z = traj.final.positions
    log_m = np.array([cmath.log(complex(law.mgf(b))) for b in betas_ok])
    # per-particle weights exp(beta z_j - n log m(beta)), rows = grid points
    weights = np.exp(np.outer(betas_ok, z) - n * log_m[:, None])
    acc = np.zeros(betas_ok.size, dtype=np.complex128)
    for j in range(z.size):
        wj = _subtree_w(law, horizon, betas_ok, substream(rng, j), budget)
        acc += weights[:, j] * (wj - 1.0)
    values = np.zeros(grid.size, dtype=np.complex128)
    values[ok] = law.mean_count ** (n / 2) * acc
    return DiskProfile(
        radius=float(np.abs(grid).max()),
        points=grid,
        values=values,
        flags=flags,
        generation=n,
        horizon=horizon,
    )


def decomposition_check(
    traj: BrwTrajectory,
    extra: int,
    beta: complex,
    rng: np.random.Generator,
    budget: int = DEFAULT_PARTICLE_BUDGET,
) -> float:
    """Relative residual of the subtree decomposition identity.

    Extends every time-n particle ``extra`` generations and compares
    sum_j e^{beta z_j} W_j^(extra)(beta) against m(beta)^n W_{n+extra}(beta)
    assembled from the combined cloud. The identity is exact; anything beyond
    float round-off signals a bug.
    """
    n = traj.n
    law = traj.law
    beta = complex(beta)
    log_m = cmath.log(complex(law.mgf(beta)))
    z = traj.final.positions
    rhs = 0j
    all_positions = []
    for j in range(z.size):
        sub = simulate(law, extra, substream(rng, j), budget=budget)
        rel = sub.final.positions
        w_j = complex(np.sum(np.exp(beta * rel - extra * log_m)))
        rhs += cmath.exp(beta * z[j] - n * log_m) * w_j
        all_positions.append(rel + z[j])
    combined = np.concatenate(all_positions)
    lhs = complex(np.sum(np.exp(beta * combined - (n + extra) * log_m)))
    return abs(lhs - rhs) / abs(lhs)


def moment_monitor(
    law: ClusterLaw,
    generations: Sequence[int],
    betas: Sequence[complex],
    powers: Sequence[float],
    replicates: int,
    rng: np.random.Generator,
) -> dict[int, dict[float, float]]:
    """Empirical sup over the beta grid of E|W_n(beta)|^p, per n and p.

    Diagnostic for uniform L^p boundedness of the martingale; values are
    reported, not asserted.
    """
    from .brw import lattice_ensemble, lattice_eval_w, lattice_step_ensemble

    gens = sorted(set(int(g) for g in generations))
    out: dict[int, dict[float, float]] = {}
    counts, base = np.ones((replicates, 1), dtype=np.int64), 0
    g = 0
    for target in gens:
        while g < target:
            counts, base = lattice_step_ensemble(counts, base, law, rng)
            g += 1
        row: dict[float, float] = {}
        for p in powers:
            worst = 0.0
            for b in betas:
                w = lattice_eval_w(counts, base, g, law, b)
                worst = max(worst, float(np.mean(np.abs(w) ** p)))
            row[float(p)] = worst
        out[g] = row
    return out


def profile_write_csv(profile: DiskProfile, path) -> None:
    """CSV rows (Re u, Im u, Re D, Im D, flag), header included."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("re_u,im_u,re_d,im_d,flag\n")
        for u, v, f in zip(profile.points, profile.values, profile.flags):
            fh.write(f"{u.real!r},{u.imag!r},{v.real!r},{v.imag!r},{int(f)}\n")
