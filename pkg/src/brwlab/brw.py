"""Discrete-time branching random walk (BRW) simulation.

A BRW starts with one particle at the origin. Each generation, every particle
is replaced by a cluster of offspring displaced relative to it, the cluster
drawn independently from a fixed law. The particle counts ``N_n`` form a
supercritical Galton-Watson process; the position sums ``S_n`` feed the
derivative martingale.

Two representations are provided:

* position-resolved clouds (:func:`simulate` / :func:`step`): every particle's
  position is stored, genealogy optionally recorded. Memory is O(particles),
  guarded by a hard particle budget.
* lattice-aggregated counts (:func:`lattice_ensemble` and friends): for laws
  with integer displacements the cloud is a histogram over lattice sites, and
  whole ensembles evolve via multinomial splitting. This is exact in law and
  is what makes 1e5-replicate experiments affordable.

All built-in laws have bounded cluster sizes and bounded support, so every
exponential moment of the generation-1 cloud is finite and no numeric moment
checks are needed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_PARTICLE_BUDGET = 2**24  # position-resolved clouds
DEFAULT_COUNT_BUDGET = 2**34  # lattice-aggregated counts (per replicate)

PMF_SUM_TOL = 1e-12


class BrwError(Exception):
    pass


class ParticleBudgetError(BrwError):
    """Population would exceed the configured budget (growth is m^n)."""


class InvalidLawError(BrwError, ValueError):
    """Cluster law violates the standing assumptions."""


def _validate_pmf(pairs: Sequence[tuple[float, float]], name: str) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        raise InvalidLawError(f"{name}: empty pmf")
    vals = np.array([p[0] for p in pairs], dtype=np.float64)
    probs = np.array([p[1] for p in pairs], dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise InvalidLawError(f"{name}: non-finite support value")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise InvalidLawError(f"{name}: probabilities must be finite and >= 0")
    if abs(probs.sum() - 1.0) > PMF_SUM_TOL:
        raise InvalidLawError(f"{name}: probabilities sum to {probs.sum()!r}, not 1 +- {PMF_SUM_TOL}")
    if len(np.unique(vals)) != len(vals):
        raise InvalidLawError(f"{name}: repeated support value")
    order = np.argsort(vals)
    return vals[order], probs[order]


@dataclass(frozen=True)
class ClusterLaw:
    """Law of the offspring displacement cluster.

    ``variant`` is one of ``deterministic``, ``count_and_shift``, ``bst_split``,
    ``rrt_split``; the latter two are fixed deterministic clusters kept as named
    variants so configs round-trip.
    """

    variant: str
    displacements: Optional[tuple[float, ...]] = None
    count_pmf: Optional[tuple[tuple[int, float], ...]] = None
    shift_pmf: Optional[tuple[tuple[float, float], ...]] = None
    _cvals: np.ndarray = field(init=False, repr=False, compare=False, default=None)
    _cprobs: np.ndarray = field(init=False, repr=False, compare=False, default=None)
    _svals: np.ndarray = field(init=False, repr=False, compare=False, default=None)
    _sprobs: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.variant in ("deterministic", "bst_split", "rrt_split"):
            if self.displacements is None or len(self.displacements) == 0:
                raise InvalidLawError("deterministic law needs a nonempty displacement list")
            if len(self.displacements) == 1:
                # a.s. exactly one offspring: the walk never branches
                raise InvalidLawError("cluster of size 1 with probability 1 is not allowed")
            if not all(math.isfinite(d) for d in self.displacements):
                raise InvalidLawError("non-finite displacement")
        elif self.variant == "count_and_shift":
            cvals, cprobs = _validate_pmf(self.count_pmf, "count_pmf")
            if np.any(cvals < 1) or np.any(cvals != np.round(cvals)):
                raise InvalidLawError("cluster counts must be integers >= 1")
            if len(cvals) == 1 and cvals[0] == 1:
                raise InvalidLawError("cluster of size 1 with probability 1 is not allowed")
            svals, sprobs = _validate_pmf(self.shift_pmf, "shift_pmf")
            object.__setattr__(self, "_cvals", cvals.astype(np.int64))
            object.__setattr__(self, "_cprobs", cprobs)
            object.__setattr__(self, "_svals", svals)
            object.__setattr__(self, "_sprobs", sprobs)
        else:
            raise InvalidLawError(f"unknown variant {self.variant!r}")

    # --- closed-form moments of the generation-1 intensity measure ---

    def mgf(self, beta: complex) -> complex:
        """m(beta) = E sum_children exp(beta * displacement)."""
        if self.displacements is not None:
            return complex(np.sum(np.exp(np.multiply(beta, self.displacements))))
        count_mean = float(self._cvals @ self._cprobs)
        return count_mean * complex(self._sprobs @ np.exp(np.multiply(beta, self._svals)))

    @property
    def mean_count(self) -> float:
        if self.displacements is not None:
            return float(len(self.displacements))
        return float(self._cvals @ self._cprobs)

    @property
    def count_variance(self) -> float:
        if self.displacements is not None:
            return 0.0
        mu = self.mean_count
        return float(self._cprobs @ (self._cvals.astype(float) - mu) ** 2)

    @property
    def mean_displacement(self) -> float:
        """d = (log m)'(0)."""
        if self.displacements is not None:
            return float(np.mean(self.displacements))
        return float(self._sprobs @ self._svals)

    @property
    def displacement_variance(self) -> float:
        """tau^2 = (log m)''(0)."""
        if self.displacements is not None:
            d = np.asarray(self.displacements, dtype=float)
            return float(np.mean((d - d.mean()) ** 2))
        mu = self.mean_displacement
        return float(self._sprobs @ (self._svals - mu) ** 2)

    @property
    def max_cluster_size(self) -> int:
        if self.displacements is not None:
            return len(self.displacements)
        return int(self._cvals.max())

    @property
    def is_lattice(self) -> bool:
        """True when all displacements are integers (enables count aggregation)."""
        if self.displacements is not None:
            return all(float(d).is_integer() for d in self.displacements)
        return bool(np.all(self._svals == np.round(self._svals)))

    def sample_cluster(self, rng: np.random.Generator) -> np.ndarray:
        """One cluster of displacements."""
        if self.displacements is not None:
            return np.asarray(self.displacements, dtype=np.float64)
        k = int(rng.choice(self._cvals, p=self._cprobs))
        return rng.choice(self._svals, size=k, p=self._sprobs)


@dataclass(frozen=True)
class ModelParams:
    """Derived model constants: growth mean m, drift d, diffusion tau2, Var N_infty."""

    m: float
    d: float
    tau2: float
    sigma2: float = 0.0
    analytic: bool = True

    def __post_init__(self):
        if not self.m > 1:
            raise InvalidLawError("m must exceed 1 (supercritical)")
        if self.tau2 < 0 or self.sigma2 < 0:
            raise InvalidLawError("tau2 and sigma2 must be >= 0")

    @classmethod
    def from_law(cls, law: "ClusterLaw", sigma2: Optional[float] = None) -> "ModelParams":
        if sigma2 is None:
            sigma2 = gw_limit_variance(law)
        return cls(
            m=law.mean_count,
            d=law.mean_displacement,
            tau2=law.displacement_variance,
            sigma2=sigma2,
            analytic=True,
        )


def deterministic(displacements: Sequence[float]) -> ClusterLaw:
    return ClusterLaw("deterministic", displacements=tuple(float(d) for d in displacements))


def bst_split() -> ClusterLaw:
    """Both children one level deeper: the binary-search-tree split."""
    return ClusterLaw("bst_split", displacements=(1.0, 1.0))


def rrt_split() -> ClusterLaw:
    """One child in place, one a level deeper: the recursive-tree split."""
    return ClusterLaw("rrt_split", displacements=(0.0, 1.0))


def count_and_shift(count_pmf, shift_pmf) -> ClusterLaw:
    """Random cluster size, i.i.d. displacement per child.

    ``count_pmf`` / ``shift_pmf`` are mappings or (value, probability) pairs.
    """
    cp = tuple((int(v), float(p)) for v, p in _pairs(count_pmf))
    sp = tuple((float(v), float(p)) for v, p in _pairs(shift_pmf))
    return ClusterLaw("count_and_shift", count_pmf=cp, shift_pmf=sp)


def _pairs(pmf):
    if hasattr(pmf, "items"):
        return sorted(pmf.items())
    return list(pmf)


# --- config round-trip -------------------------------------------------------

def parse_pmf(text: str) -> dict[float, float]:
    """Parse ``"1:0.5,3:0.5"`` into ``{1.0: 0.5, 3.0: 0.5}``."""
    out: dict[float, float] = {}
    for item in text.split(","):
        v, _, p = item.partition(":")
        if not p:
            raise InvalidLawError(f"bad pmf entry {item!r}, expected value:prob")
        out[float(v)] = float(p)
    return out


def law_to_dict(law: ClusterLaw) -> dict:
    d: dict = {"variant": law.variant}
    if law.variant == "deterministic":
        d["displacements"] = list(law.displacements)
    elif law.variant == "count_and_shift":
        d["count_pmf"] = [[int(v), p] for v, p in law.count_pmf]
        d["shift_pmf"] = [[v, p] for v, p in law.shift_pmf]
    return d


def law_from_dict(d: dict) -> ClusterLaw:
    variant = d.get("variant")
    if variant == "deterministic":
        return deterministic(d["displacements"])
    if variant == "bst_split":
        return bst_split()
    if variant == "rrt_split":
        return rrt_split()
    if variant == "count_and_shift":
        return count_and_shift(d["count_pmf"], d["shift_pmf"])
    raise InvalidLawError(f"unknown variant {variant!r}")


def load_law(path) -> ClusterLaw:
    with open(path, "r", encoding="utf-8") as fh:
        return law_from_dict(json.load(fh))


# --- position-resolved simulation --------------------------------------------

@dataclass
class ParticleCloud:
    """Positions of all particles alive at one generation (no binning)."""

    generation: int
    positions: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.size < 1:
            raise BrwError("empty cloud")

    @property
    def count(self) -> int:
        return int(self.positions.size)


@dataclass
class BrwTrajectory:
    """Clouds for generations 0..n with per-generation summaries.

    ``counts[k]`` is N_k, ``position_sums[k]`` is S_k (accumulated as the cloud
    is built). ``parents[k][j]`` is the index in cloud k of the parent of
    particle j in cloud k+1; ``parents`` is None unless genealogy was requested.
    """

    law: ClusterLaw
    clouds: list[ParticleCloud]
    counts: np.ndarray
    position_sums: np.ndarray
    parents: Optional[list[np.ndarray]] = None

    @property
    def n(self) -> int:
        return self.clouds[-1].generation

    @property
    def final(self) -> ParticleCloud:
        return self.clouds[-1]


def step(
    cloud: ParticleCloud,
    law: ClusterLaw,
    rng: np.random.Generator,
    budget: int = DEFAULT_PARTICLE_BUDGET,
    want_parents: bool = False,
):
    """Replace every particle by an independent displaced cluster.

    Returns ``(child_cloud, parents)`` where ``parents`` maps each child to its
    parent's index (None unless requested).
    """
    pos = cloud.positions
    n = pos.size
    if law.displacements is not None:
        disp = np.asarray(law.displacements, dtype=np.float64)
        total = n * disp.size
        if total > budget:
            raise ParticleBudgetError(f"step would create {total} particles > budget {budget}")
        children = (pos[:, None] + disp[None, :]).ravel()
        parents = np.repeat(np.arange(n), disp.size) if want_parents else None
    else:
        counts = rng.choice(law._cvals, size=n, p=law._cprobs)
        total = int(counts.sum())
        if total > budget:
            raise ParticleBudgetError(f"step would create {total} particles > budget {budget}")
        shifts = rng.choice(law._svals, size=total, p=law._sprobs)
        children = np.repeat(pos, counts) + shifts
        parents = np.repeat(np.arange(n), counts) if want_parents else None
    return ParticleCloud(cloud.generation + 1, children), parents


def simulate(
    law: ClusterLaw,
    n_generations: int,
    rng: np.random.Generator,
    keep_genealogy: bool = False,
    budget: int = DEFAULT_PARTICLE_BUDGET,
) -> BrwTrajectory:
    """Run a BRW from a single particle at 0 for ``n_generations`` steps."""
    if n_generations < 0:
        raise ValueError("n_generations must be >= 0")
    clouds = [ParticleCloud(0, np.zeros(1))]
    counts = [1]
    sums = [0.0]
    parents: Optional[list[np.ndarray]] = [] if keep_genealogy else None
    for _ in range(n_generations):
        child, par = step(clouds[-1], law, rng, budget=budget, want_parents=keep_genealogy)
        clouds.append(child)
        counts.append(child.count)
        sums.append(float(np.sum(child.positions)))
        if keep_genealogy:
            parents.append(par)
    return BrwTrajectory(law, clouds, np.array(counts, dtype=np.int64), np.array(sums), parents)


def extend(
    traj: BrwTrajectory,
    extra_generations: int,
    rng: np.random.Generator,
    budget: int = DEFAULT_PARTICLE_BUDGET,
) -> BrwTrajectory:
    """Continue a trajectory ``extra_generations`` further (fresh randomness)."""
    clouds = list(traj.clouds)
    counts = list(traj.counts)
    sums = list(traj.position_sums)
    keep = traj.parents is not None
    parents = list(traj.parents) if keep else None
    for _ in range(extra_generations):
        child, par = step(clouds[-1], traj.law, rng, budget=budget, want_parents=keep)
        clouds.append(child)
        counts.append(child.count)
        sums.append(float(np.sum(child.positions)))
        if keep:
            parents.append(par)
    return BrwTrajectory(traj.law, clouds, np.array(counts, dtype=np.int64), np.array(sums), parents)


def gw_normalized_count(traj: BrwTrajectory, m: Optional[float] = None) -> float:
    """N_n / m^n for the final generation (the Galton-Watson martingale)."""
    if m is None:
        m = traj.law.mean_count
    if m <= 1:
        raise ValueError("m must exceed 1 (supercritical)")
    n = traj.n
    return float(traj.counts[-1]) / m**n


# --- lattice-aggregated ensembles ---------------------------------------------

def _int_displacements(law: ClusterLaw) -> tuple[np.ndarray, np.ndarray]:
    """(values, multiplicities) of a deterministic integer cluster."""
    d = np.asarray(law.displacements, dtype=np.int64)
    vals, mult = np.unique(d, return_counts=True)
    return vals, mult


def _require_lattice(law: ClusterLaw):
    if not law.is_lattice:
        raise InvalidLawError("lattice aggregation needs integer displacements")


def lattice_step_ensemble(
    counts: np.ndarray,
    base: int,
    law: ClusterLaw,
    rng: np.random.Generator,
    budget: int = DEFAULT_COUNT_BUDGET,
) -> tuple[np.ndarray, int]:
    """Advance an ensemble of count histograms one generation.

    ``counts`` is (replicates, sites) int64 with site i at position base+i.
    Aggregating particles by site is exact in law: cluster draws are i.i.d., so
    the children of k co-located parents split multinomially over (count value,
    shift) cells.
    """
    _require_lattice(law)
    M, S = counts.shape
    if law.displacements is not None:
        vals, mult = _int_displacements(law)
        lo, hi = int(vals.min()), int(vals.max())
        new = np.zeros((M, S + hi - lo), dtype=np.int64)
        for v, mu in zip(vals, mult):
            new[:, v - lo : v - lo + S] += mu * counts
    else:
        svals = law._svals.astype(np.int64)
        lo, hi = int(svals.min()), int(svals.max())
        new = np.zeros((M, S + hi - lo), dtype=np.int64)
        cvals, cprobs = law._cvals, law._cprobs
        for j in range(S):
            k = counts[:, j]
            if not k.any():
                continue
            if cvals.size == 1:
                totals = cvals[0] * k
            else:
                totals = rng.multinomial(k, cprobs) @ cvals
            if svals.size == 1:
                new[:, j + svals[0] - lo] += totals
            else:
                split = rng.multinomial(totals, law._sprobs)
                for a, sv in enumerate(svals):
                    new[:, j + sv - lo] += split[:, a]
    top = int(new.sum(axis=1).max())
    if top > budget:
        raise ParticleBudgetError(f"lattice population {top} > budget {budget}")
    return new, base + lo


def lattice_ensemble(
    law: ClusterLaw,
    n_generations: int,
    replicates: int,
    rng: np.random.Generator,
    budget: int = DEFAULT_COUNT_BUDGET,
) -> tuple[np.ndarray, int]:
    """Evolve ``replicates`` independent BRWs for n generations, aggregated.

    Returns (counts, base): counts[r, i] particles of replicate r at site base+i.
    """
    counts = np.ones((replicates, 1), dtype=np.int64)
    base = 0
    for _ in range(n_generations):
        counts, base = lattice_step_ensemble(counts, base, law, rng, budget=budget)
    return counts, base


def lattice_totals(counts: np.ndarray) -> np.ndarray:
    return counts.sum(axis=1)


def lattice_position_sums(counts: np.ndarray, base: int) -> np.ndarray:
    sites = base + np.arange(counts.shape[1], dtype=np.float64)
    return counts @ sites


def lattice_eval_w(
    counts: np.ndarray, base: int, generation: int, law: ClusterLaw, beta: complex
) -> np.ndarray:
    """Biggins martingale values W_n(beta) for every replicate row.

    Per-site terms carry the m(beta)^-n normalization so nothing overflows.
    """
    sites = base + np.arange(counts.shape[1], dtype=np.float64)
    log_norm = generation * np.log(complex(law.mgf(beta)))
    terms = np.exp(np.multiply(beta, sites) - log_norm)
    return counts.astype(np.float64) @ terms


def gw_limit_variance(law: ClusterLaw) -> float:
    """Var of the Galton-Watson limit N_infty: Var(N_1) / (m^2 - m).

    Closed-form oracle used to cross-check the Monte Carlo estimate.
    """
    m = law.mean_count
    if m <= 1:
        raise ValueError("supercritical law required")
    return law.count_variance / (m * m - m)
