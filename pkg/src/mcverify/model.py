"""Interfaces a sampler under test plugs into.

A verification run needs four things from the user: how to draw from the
prior, how to draw data given parameters, the transition kernel being tested,
and one or more scalar functions of the state whose distributions the tests
compare.  These are deliberately plain callables bundled in small dataclasses;
nothing here assumes a particular state representation beyond "picklable
Python object the callables agree on".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .rng import RngStream

__all__ = [
    "GenerativeModel",
    "KernelFamily",
    "OrdinalRanking",
    "ParamSpace",
    "RankRecord",
    "TestFunction",
    "rank_of_pivot",
    "rank_with_tiebreak",
]


@dataclass(frozen=True)
class ParamSpace:
    """Shape of the parameter space: dimension (None if it varies) + kind flags."""

    dimension: int | None
    continuous: bool = True
    discrete: bool = False


@dataclass(frozen=True)
class GenerativeModel:
    """Joint distribution p(theta) p(y | theta), as sampling callables.

    sample_prior(rng) -> theta and sample_data(rng, theta) -> y must draw
    exclusively from the stream they are handed.  The log densities are
    optional; they exist for test functions and kernels that want them, not
    for the core tests themselves.
    """

    sample_prior: Callable[[RngStream], Any]
    sample_data: Callable[[RngStream, Any], Any]
    log_prior: Callable[[Any], float] | None = None
    log_likelihood: Callable[[Any, Any], float] | None = None
    space: ParamSpace | None = None
    meta: Any = field(default=None, compare=False)


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """A family of transition kernels indexed by the observed data.

    step(rng, y, theta) -> theta' applies one transition of the kernel for
    data y, drawing only from `rng`.  `declared_reversible` is the *user's
    claim* about the kernel; the rank test requires it (and will detect a
    false claim).  `batch` optionally points at a compiled batch simulator
    factory for this kernel; the generic drivers use it when it supports the
    model at hand and produce bit-identical results either way.
    """

    step: Callable[[RngStream, Any, Any], Any]
    declared_reversible: bool = False
    name: str = ""
    batch: Any = field(default=None, compare=False)
    meta: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class TestFunction:
    """Scalar summary g(theta, y) whose distribution the two-sample test compares.

    value_kind routes the comparison: "continuous" values go to the KS test,
    "discrete" (integer) values to the chi-square homogeneity test.
    """

    name: str
    evaluate: Callable[[Any, Any], float]
    value_kind: str = "continuous"

    __test__ = False  # keep pytest from collecting the class by its name

    def __post_init__(self):
        if self.value_kind not in ("continuous", "discrete"):
            raise ValueError(
                f"value_kind must be 'continuous' or 'discrete', got {self.value_kind!r}"
            )


@dataclass(frozen=True)
class OrdinalRanking:
    """Total preorder on states for the rank test, via a scalar score."""

    name: str
    score: Callable[[Any, Any], float]


@dataclass(frozen=True)
class RankRecord:
    """One observed rank plus enough provenance to reproduce it."""

    rank: int
    length: int
    thinning: int
    stream_key: int
    replication: int


def rank_with_tiebreak(values, pivot_index: int, perm) -> int:
    """Rank of values[pivot_index-1] among all values, ties broken by `perm`.

    `pivot_index` is 1-based.  `perm` assigns each position a distinct
    priority; between equal values the one with the smaller priority ranks
    lower.  With `perm` a uniform random permutation this makes the rank
    exactly uniform on {1..L} under exchangeability, ties included.
    """
    length = len(values)
    if not 1 <= pivot_index <= length:
        raise ValueError(f"pivot_index {pivot_index} outside 1..{length}")
    if len(perm) != length or sorted(perm) != list(range(length)):
        raise ValueError("perm must be a permutation of range(len(values))")
    pivot_value = values[pivot_index - 1]
    if pivot_value != pivot_value:
        raise ValueError("values must not contain NaN")
    pivot_priority = perm[pivot_index - 1]
    rank = 1
    for j in range(length):
        if j == pivot_index - 1:
            continue
        v = values[j]
        if v != v:
            raise ValueError("values must not contain NaN")
        if v < pivot_value or (v == pivot_value and perm[j] < pivot_priority):
            rank += 1
    return rank


def rank_of_pivot(values, pivot_index: int, tie_rng: RngStream) -> int:
    """Rank of the pivot with a random tie-breaking permutation from `tie_rng`."""
    perm = tie_rng.permutation(len(values))
    return rank_with_tiebreak(values, pivot_index, perm)
