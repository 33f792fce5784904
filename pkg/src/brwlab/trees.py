"""Binary search trees and random recursive trees by total path length.

Both models grow one node per step and embed into a continuous-time branching
random walk whose particles track external (BST) or all (RRT) node depths:

* BST: a uniformly chosen external node becomes internal and spawns two
  externals one level deeper; the external path length gains depth+2.
* RRT: a uniformly chosen node gets a child one level deeper; the internal
  path length gains depth+1.

Exact mean recurrences provide the centering for the exact-centered
martingale (path length - mean)/(n+1); the log-centered normalization
(path length - c n log n)/n converges to the path-length limit, whose
deep-trajectory value serves as the limit surrogate. Natural log throughout.

The growth loops are numba-compiled; a pure-python variant retains the full
binary-word node set for small trees so the increment rules can be audited
against recomputation from scratch.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Optional

import numpy as np
from numba import njit
from scipy.special import ndtri

MAX_WORD_NODES = 1024  # full word-set retained only for small trees


@dataclass(frozen=True)
class TreeKind:
    """Constants of the continuous-time embedding (unit split rate)."""

    name: str
    lam: float
    d: float  # drift phi'(0); also the n log n centering coefficient via d/lam
    tau2: float  # phi''(0)
    sigma2: float  # Var of the Exp(1) population limit

    def phi(self, beta: complex) -> complex:
        if self.name == "bst":
            return 2 * cmath.exp(beta) - 1
        return cmath.exp(beta)

    def cumulant_spec(self, closed: bool = True):
        from .martingale import CumulantSpec

        return CumulantSpec(
            phi=self.phi,
            kind="rate",
            beta0=2.0,
            d=self.d if closed else None,
            tau2=self.tau2 if closed else None,
            label=self.name,
        )


BST = TreeKind(name="bst", lam=1.0, d=2.0, tau2=2.0, sigma2=1.0)
RRT = TreeKind(name="rrt", lam=1.0, d=1.0, tau2=1.0, sigma2=1.0)
KINDS = {"bst": BST, "rrt": RRT}


def kind(name) -> TreeKind:
    if isinstance(name, TreeKind):
        return name
    try:
        return KINDS[name]
    except KeyError:
        raise ValueError(f"unknown tree kind {name!r}") from None


# --- growth kernels -------------------------------------------------------------

@njit(cache=True)
def _bst_kernel(u, sizes, out_pl, depths):
    """Grow a BST; record EPL at the requested node counts.

    u: one uniform per growth step; sizes: sorted requested node counts,
    sizes[-1] == u.size + 1; depths: external-depth scratch of length
    sizes[-1] + 1.
    """
    depths[0] = 1
    depths[1] = 1
    s = 1
    epl = 2
    ptr = 0
    if sizes[ptr] == 1:
        out_pl[ptr] = epl
        ptr += 1
    for k in range(u.size):
        idx = int(u[k] * (s + 1))
        d = depths[idx]
        depths[idx] = d + 1
        depths[s + 1] = d + 1
        epl += d + 2
        s += 1
        if ptr < sizes.size and s == sizes[ptr]:
            out_pl[ptr] = epl
            ptr += 1
    return epl


@njit(cache=True)
def _rrt_kernel(u, sizes, out_pl, depths, parents):
    """Grow an RRT; record IPL at the requested node counts.

    depths/parents are per-node scratch of length sizes[-1]; parents are
    1-based labels with 0 for the root.
    """
    depths[0] = 0
    parents[0] = 0
    s = 1
    ipl = 0
    ptr = 0
    if sizes[ptr] == 1:
        out_pl[ptr] = ipl
        ptr += 1
    for k in range(u.size):
        idx = int(u[k] * s)
        d = depths[idx] + 1
        depths[s] = d
        parents[s] = idx + 1
        ipl += d
        s += 1
        if ptr < sizes.size and s == sizes[ptr]:
            out_pl[ptr] = ipl
            ptr += 1
    return ipl


@dataclass
class PathLengthTrace:
    """Per-n total path length for node counts 1..n."""

    kind: str
    values: np.ndarray  # int64, values[k] is the path length at k+1 nodes

    @property
    def n(self) -> int:
        return int(self.values.size)

    def at(self, n: int) -> int:
        return int(self.values[n - 1])


@dataclass
class BstState:
    n: int
    external_depths: np.ndarray  # n+1 entries
    epl: int
    words: Optional[set] = None  # internal nodes as bit tuples, small trees only

    def __post_init__(self):
        assert self.external_depths.size == self.n + 1
        assert int(self.external_depths.sum()) == self.epl


@dataclass
class RrtState:
    n: int
    parents: np.ndarray  # 1-based parent labels, parents[0] == 0 for the root
    depths: np.ndarray
    ipl: int

    def __post_init__(self):
        assert int(self.depths.sum()) == self.ipl


def grow_bst(
    n: int, rng: np.random.Generator, keep_words: bool = False
) -> tuple[BstState, PathLengthTrace]:
    """Uniform external attachment up to n nodes, with the EPL trace."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if keep_words:
        if n > MAX_WORD_NODES:
            raise ValueError(f"word-set retention capped at {MAX_WORD_NODES} nodes")
        return _grow_bst_words(n, rng)
    u = rng.random(n - 1)
    sizes = np.arange(1, n + 1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    depths = np.zeros(n + 1, dtype=np.int64)
    _bst_kernel(u, sizes, out, depths)
    state = BstState(n=n, external_depths=depths[: n + 1].copy(), epl=int(out[-1]))
    return state, PathLengthTrace(kind="bst", values=out)


def _grow_bst_words(n: int, rng: np.random.Generator):
    internal = {()}
    externals = [(0,), (1,)]
    epl = 2
    trace = [2]
    for _ in range(n - 1):
        idx = int(rng.random() * len(externals))
        w = externals[idx]
        internal.add(w)
        externals[idx] = w + (0,)
        externals.append(w + (1,))
        epl += len(w) + 2
        trace.append(epl)
    depths = np.array(sorted(len(w) for w in externals), dtype=np.int64)
    state = BstState(n=n, external_depths=depths, epl=epl, words=internal)
    return state, PathLengthTrace(kind="bst", values=np.array(trace, dtype=np.int64))


def grow_rrt(n: int, rng: np.random.Generator) -> tuple[RrtState, PathLengthTrace]:
    """Uniform attachment up to n nodes, with the IPL trace."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.random(n - 1)
    sizes = np.arange(1, n + 1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    depths = np.zeros(n, dtype=np.int64)
    parents = np.zeros(n, dtype=np.int64)
    _rrt_kernel(u, sizes, out, depths, parents)
    state = RrtState(n=n, parents=parents, depths=depths, ipl=int(out[-1]))
    return state, PathLengthTrace(kind="rrt", values=out)


def path_length_batch(
    kind_name: str, sizes, replicates: int, seed: int, path_prefix: tuple = ()
) -> np.ndarray:
    """(replicates, len(sizes)) path lengths, one independent tree per row.

    Replicate r draws from the stream keyed by (seed, *path_prefix, r), so the
    matrix is reproducible regardless of how rows are distributed over workers.
    """
    from .rng import stream

    k = kind(kind_name)
    sizes = np.asarray(sorted(int(s) for s in sizes), dtype=np.int64)
    n_big = int(sizes[-1])
    out = np.empty((replicates, sizes.size), dtype=np.int64)
    row = np.empty(sizes.size, dtype=np.int64)
    if k.name == "bst":
        depths = np.zeros(n_big + 1, dtype=np.int64)
    else:
        depths = np.zeros(n_big, dtype=np.int64)
        parents = np.zeros(n_big, dtype=np.int64)
    for r in range(replicates):
        u = stream(seed, *path_prefix, r).random(n_big - 1)
        if k.name == "bst":
            _bst_kernel(u, sizes, row, depths)
        else:
            _rrt_kernel(u, sizes, row, depths, parents)
        out[r] = row
    return out


# --- exact means and Quicksort moments -------------------------------------------

@njit(cache=True)
def _qs_mean_kernel(n):
    """E K_0..E K_n by the linear recurrence, Kahan-compensated running sum."""
    out = np.zeros(n + 1)
    acc = 0.0
    comp = 0.0
    for i in range(1, n + 1):
        val = (i - 1.0) + 2.0 * acc / i
        out[i] = val
        y = val - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return out


@lru_cache(maxsize=8)
def _qs_mean_trace(n: int) -> np.ndarray:
    return _qs_mean_kernel(int(n))


def quicksort_mean(n: int) -> float:
    """E K_n, the expected comparison count of Quicksort on n keys."""
    return float(_qs_mean_trace(n)[n]) if n <= 2**20 else _qs_mean_closed(n)


def _qs_mean_closed(n: int) -> float:
    h = float(np.sum(1.0 / np.arange(1, n + 1)))
    return 2.0 * (n + 1) * h - 4.0 * n


@njit(cache=True)
def _qs_second_moment_kernel(n):
    """E K_n^2 by the exact split recurrence (O(n^2) via the cross convolution)."""
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    sa = 0.0  # sum of a_0..a_{i-1}
    sb = 0.0
    for i in range(1, n + 1):
        cross = 0.0
        for j in range(i):
            cross += a[j] * a[i - 1 - j]
        a[i] = (i - 1.0) + 2.0 * sa / i
        b[i] = (i - 1.0) ** 2 + 4.0 * (i - 1.0) * sa / i + 2.0 * sb / i + 2.0 * cross / i
        sa += a[i]
        sb += b[i]
    return a, b


@lru_cache(maxsize=8)
def quicksort_variance(n: int) -> float:
    """Var K_n by the exact second-moment recurrence."""
    a, b = _qs_second_moment_kernel(int(n))
    return float(b[n] - a[n] ** 2)


def quicksort_variance_closed(n: int) -> float:
    k = np.arange(1, n + 1, dtype=np.float64)
    h1 = float(np.sum(1.0 / k))
    h2 = float(np.sum(1.0 / k**2))
    return 7.0 * n * n - 4.0 * (n + 1.0) ** 2 * h2 - 2.0 * (n + 1.0) * h1 + 13.0 * n


def quicksort_limit_variance() -> float:
    """Variance of the exact-centered path-length limit: 7 - 2 pi^2 / 3."""
    return 7.0 - 2.0 * math.pi**2 / 3.0


def expected_path_length_trace(n: int, kind_name: str) -> np.ndarray:
    """Exact E PL_k for k = 1..n (float64)."""
    k = kind(kind_name)
    if k.name == "bst":
        return _qs_mean_trace(n)[1:] + 2.0 * np.arange(1, n + 1)
    # E IPL_n = sum_{j<=n} H_{j-1}
    harm = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, n))])
    return np.cumsum(harm)


def expected_path_length(n: int, kind_name: str) -> float:
    if n > 10**6:
        raise ValueError("linear recurrence capped at n = 1e6")
    return float(expected_path_length_trace(n, kind_name)[-1])


# --- normalizations ---------------------------------------------------------------

@dataclass
class NormalizedTrace:
    kind: str
    n: np.ndarray
    regnier: np.ndarray  # (PL_n - E PL_n) / (n+1), exact centering
    brw: np.ndarray  # (PL_n - c n ln n) / n, log centering


def log_centering_coefficient(kind_name: str) -> float:
    k = kind(kind_name)
    return k.d / k.lam


def normalized_martingales(trace: PathLengthTrace) -> NormalizedTrace:
    """Both normalizations of a path-length trace, natural log throughout."""
    if trace.n < 1:
        raise ValueError("empty trace")
    n = np.arange(1, trace.n + 1, dtype=np.float64)
    pl = trace.values.astype(np.float64)
    mean = expected_path_length_trace(trace.n, trace.kind)
    regnier = (pl - mean) / (n + 1.0)
    c = log_centering_coefficient(trace.kind)
    brw = (pl - c * n * np.log(n)) / n
    return NormalizedTrace(kind=trace.kind, n=n, regnier=regnier, brw=brw)


def brw_normalized(pl_n: float, n: int, kind_name: str) -> float:
    c = log_centering_coefficient(kind_name)
    return (pl_n - c * n * math.log(n)) / n


@dataclass
class LimitEstimate:
    value: float
    dispersion: float  # std of the normalized trace over its last decade
    n: int


def estimate_limit(trace: PathLengthTrace) -> LimitEstimate:
    """Deep-trajectory surrogate for the path-length limit."""
    if trace.n < 10**4:
        raise ValueError("limit surrogate needs at least 1e4 nodes")
    norm = normalized_martingales(trace)
    window = norm.brw[trace.n // 10 - 1 :]
    return LimitEstimate(value=float(norm.brw[-1]), dispersion=float(np.std(window)), n=trace.n)


def prediction_interval(
    pl_n: float, n: int, alpha: float, kind_name: str
) -> tuple[float, float]:
    """Level-(1-alpha) strong prediction interval for the path-length limit.

    Center (PL_n - c n ln n)/n, half-width z_{1-alpha/2} sqrt(tau^2 ln n / n).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if n < 2:
        raise ValueError("n must be >= 2")
    k = kind(kind_name)
    center = brw_normalized(pl_n, n, k.name)
    half = float(ndtri(1 - alpha / 2)) * math.sqrt(k.tau2 * math.log(n) / (k.lam * n))
    return center - half, center + half


# --- exact small-n oracles ---------------------------------------------------------

def quicksort_brute_force(n: int) -> dict[int, int]:
    """Comparison-count distribution over all n! pivot orders (counts per value)."""
    if n > 9:
        raise ValueError("brute force capped at n = 9")
    out: dict[int, int] = {}
    for perm in permutations(range(n)):
        left: dict[int, int] = {}
        right: dict[int, int] = {}
        total = 0
        root = perm[0]
        for key in perm[1:]:
            cur = root
            depth = 0
            while True:
                depth += 1
                nxt = left if key < cur else right
                if cur in nxt:
                    cur = nxt[cur]
                else:
                    nxt[cur] = key
                    break
            total += depth
        out[total] = out.get(total, 0) + 1
    return out


def attachment_epl_distribution(n: int) -> dict[int, Fraction]:
    """Exact EPL_n law under uniform external attachment (DFS over sequences)."""
    if n > 8:
        raise ValueError("attachment enumeration capped at n = 8")
    out: dict[int, Fraction] = {}

    def rec(depth_counts: tuple, size: int, epl: int, prob: Fraction):
        if size == n:
            out[epl] = out.get(epl, Fraction(0)) + prob
            return
        total = size + 1
        for d, c in enumerate(depth_counts):
            if c == 0:
                continue
            nd = list(depth_counts)
            nd[d] -= 1
            while len(nd) <= d + 1:
                nd.append(0)
            nd[d + 1] += 2
            rec(tuple(nd), size + 1, epl + d + 2, prob * Fraction(c, total))

    rec((0, 2), 1, 2, Fraction(1))
    return out


def recompute_bst_epl(state: BstState) -> int:
    """EPL from the stored word set (externals = children of internals not internal)."""
    if state.words is None:
        raise ValueError("word set was not retained")
    total = 0
    count = 0
    for w in state.words:
        for bit in (0, 1):
            child = w + (bit,)
            if child not in state.words:
                total += len(child)
                count += 1
    assert count == state.n + 1
    return total


def recompute_rrt_ipl(state: RrtState) -> int:
    """IPL from the parent array alone."""
    depths = np.zeros(state.n, dtype=np.int64)
    for k in range(1, state.n):
        p = int(state.parents[k])
        assert 1 <= p <= k
        depths[k] = depths[p - 1] + 1
    return int(depths.sum())


def trace_write_csv(trace: PathLengthTrace, path) -> None:
    """Per-n CSV: n, path_length, regnier, brw_normalized."""
    norm = normalized_martingales(trace)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("n,path_length,regnier,brw_normalized\n")
        for i in range(trace.n):
            fh.write(
                f"{i + 1},{int(trace.values[i])},{norm.regnier[i]!r},{norm.brw[i]!r}\n"
            )
