"""Sequential wrapper around a repeatable p-value source.

The wrapper runs a test at geometrically tightening thresholds so that a
correct sampler usually stops after one cheap iteration while the overall
false-rejection probability stays below alpha regardless of when (or
whether) the procedure stops early.

Thresholds: beta_1 = alpha / k, gamma = beta_1^(1/k), beta_{i+1} = beta_i /
gamma.  Iteration i fails outright when the Bonferroni-aggregated p-value q
satisfies q <= beta_i, passes outright when q > gamma + beta_i, and continues
otherwise; the sample size is scaled by delta once, after the first
iteration.  Soundness does not depend on the p-values being independent
across iterations in the FAIL direction: the union bound sum(beta_i *
gamma^(i-1)) = alpha covers every path to a rejection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .rng import RngStream
from .stats import bonferroni_min

__all__ = [
    "IterationRecord",
    "PValueVector",
    "SequentialConfig",
    "SequentialVerdict",
    "expected_extra_effort_uniform",
    "extra_effort_bound",
    "sequential_test",
]


@dataclass(frozen=True)
class PValueVector:
    """Output of one batch test: parallel p-values plus bookkeeping.

    `n` is the per-test-function sample size actually used; `effort` is the
    source's own cost measure (kernel steps, say) so sequential effort can be
    reported in the source's units.
    """

    p: tuple
    names: tuple
    n: int
    effort: float

    def __post_init__(self):
        if len(self.p) == 0:
            raise ValueError("p-value vector must be nonempty")
        for v in self.p:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"p-values must lie in [0, 1], got {v}")
        if self.names and len(self.names) != len(self.p):
            raise ValueError("names must be empty or match p in length")


@dataclass(frozen=True)
class SequentialConfig:
    """Parameters of the sequential procedure.

    alpha: overall false-rejection bound.  k: maximum iterations.  delta:
    sample-size growth factor applied once after iteration 1 (real, >= 1).
    n0: first-iteration sample size.
    """

    alpha: float = 1e-5
    k: int = 7
    delta: float = 4.0
    n0: int = 1000

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.delta >= 1.0:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.n0 < 1:
            raise ValueError(f"n0 must be >= 1, got {self.n0}")
        gamma = self.gamma
        if gamma + self.betas[0] >= 1.0:
            raise ValueError(
                f"degenerate thresholds: gamma + beta_1 = {gamma + self.betas[0]} >= 1 "
                f"(alpha={self.alpha}, k={self.k} leave no continue region)"
            )
        # closed under the recursion: beta_k must land back on gamma
        assert abs(self.betas[-1] - gamma) <= 1e-12

    @property
    def gamma(self) -> float:
        return (self.alpha / self.k) ** (1.0 / self.k)

    @property
    def betas(self) -> tuple:
        beta = self.alpha / self.k
        gamma = self.gamma
        out = [beta]
        for _ in range(self.k - 1):
            beta = beta / gamma
            out.append(beta)
        return tuple(out)


@dataclass(frozen=True)
class IterationRecord:
    index: int
    n: int
    q: float
    beta: float
    p: tuple
    decision: str  # "fail" | "ok" | "continue"


@dataclass(frozen=True)
class SequentialVerdict:
    """Outcome of a sequential run: status, per-iteration trace, total effort."""

    status: str  # "OK" | "FAIL"
    iterations: tuple
    total_effort: float

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)


def sequential_test(
    p_source: Callable[[int, RngStream], PValueVector],
    config: SequentialConfig,
    rng: RngStream,
) -> SequentialVerdict:
    """Run the sequential procedure against a p-value source.

    `p_source(n, rng)` runs the underlying test at sample size n, drawing
    only from `rng`, and returns a PValueVector of fixed dimension.  Each
    iteration i gets the dedicated substream rng.substream(i).
    """
    gamma = config.gamma
    betas = config.betas
    n = config.n0
    dim = None
    records = []
    effort = 0.0
    for i in range(1, config.k + 1):
        beta = betas[i - 1]
        pv = p_source(n, rng.substream(i))
        if dim is None:
            dim = len(pv.p)
        elif len(pv.p) != dim:
            raise ValueError(
                f"p-value source changed dimension: {dim} then {len(pv.p)}"
            )
        q = bonferroni_min(pv.p)
        effort += pv.effort
        if q <= beta:
            records.append(IterationRecord(i, n, q, beta, tuple(pv.p), "fail"))
            return SequentialVerdict("FAIL", tuple(records), effort)
        if q > gamma + beta:
            records.append(IterationRecord(i, n, q, beta, tuple(pv.p), "ok"))
            return SequentialVerdict("OK", tuple(records), effort)
        records.append(IterationRecord(i, n, q, beta, tuple(pv.p), "continue"))
        if i == 1:
            n = int(round(config.delta * n))
    return SequentialVerdict("OK", tuple(records), effort)


def expected_extra_effort_uniform(config: SequentialConfig) -> float:
    """Expected extra effort under exactly uniform p-values, d = 1.

    Relative to the first iteration's cost: each later iteration i costs
    delta and is reached with probability gamma^(i-1) (the continue band has
    width exactly gamma at every threshold), giving
    delta * gamma * (1 - gamma^(k-1)) / (1 - gamma).
    """
    if config.k <= 1:
        return 0.0
    g = config.gamma
    return config.delta * g * (1.0 - g ** (config.k - 1)) / (1.0 - g)


def extra_effort_bound(config: SequentialConfig) -> float:
    """Worst-case extra effort over all p-value distributions.

    The continue probability at iteration i is at most gamma + beta_i, so
    the expected extra effort is at most
    delta * sum_{i=2..k} prod_{j=1..i-1} (gamma + beta_j).
    """
    if config.k <= 1:
        return 0.0
    g = config.gamma
    betas = config.betas
    total = 0.0
    prod = 1.0
    for i in range(2, config.k + 1):
        prod *= g + betas[i - 2]
        total += prod
    return config.delta * total
