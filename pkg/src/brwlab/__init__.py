"""Branching random walks, their martingale limit theorems, and the random
trees, urns and Galton-Watson processes they unify, with Monte Carlo
verification machinery built around exact identities and conditional
resampling from frozen paths."""

from . import brw, experiments, gaf, harness, martingale, trees, urn, yule
from .brw import (
    ClusterLaw,
    ModelParams,
    bst_split,
    count_and_shift,
    deterministic,
    rrt_split,
    simulate,
)
from .martingale import CumulantSpec, cumulants, eval_W
from .rng import stream

__version__ = "0.1.0"

__all__ = [
    "brw",
    "martingale",
    "gaf",
    "yule",
    "trees",
    "urn",
    "harness",
    "experiments",
    "ClusterLaw",
    "ModelParams",
    "CumulantSpec",
    "bst_split",
    "count_and_shift",
    "deterministic",
    "rrt_split",
    "simulate",
    "cumulants",
    "eval_W",
    "stream",
    "__version__",
]
