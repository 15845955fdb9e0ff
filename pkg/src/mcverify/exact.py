"""Exactness tests for transition kernels.

Both tests here have *exactly* valid null distributions at any finite run
length, with no burn-in or convergence assumption:

* Two-sample test: replications of (draw theta from the prior, draw y from
  the likelihood, apply the kernel for y L times starting at theta) have
  theta marginally distributed by the prior whenever the kernel is exact for
  its posterior, for every L.  Those chain outputs are compared against
  direct prior draws, per test function.  The Gibbs extension resamples
  y | theta after each kernel step, which propagates a kernel error into the
  data coordinate as well and sharpens detection.

* Rank test: pick M uniform on {1..L}, put an exact draw (theta, y) at
  position M, simulate positions M-1..1 and M+1..L from the kernel (the
  backward legs use the forward kernel, which is why the kernel must be
  reversible), and rank position M's score among all L.  Under exactness the
  tie-broken rank is exactly uniform on {1..L}; thinning raises power
  against slowly-mixing kernels.  The optional joint update replaces the
  kernel step by a data resample y ~ p(. | theta) with a per-step
  probability, extending the test to the joint state space.

Stream discipline (a package contract, mirrored by the compiled batch
kernels): the test's root stream forks substream 0 for chain replications
and substream 1 for direct draws (two-sample), or substream 0 for
replications (rank).  Replication i uses child i of that fork, and inside a
replication the role substreams below feed the prior draw, the data draw,
every chain-evolution draw in order, the M draw, and tie-breaking.  All
results are therefore independent of evaluation order, threading, and
back end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .model import GenerativeModel, KernelFamily, OrdinalRanking, TestFunction, rank_with_tiebreak
from .rng import RngStream
from .sequential import PValueVector
from .stats import TestOutcome, chi2_two_sample_discrete, chi2_uniformity, ks_two_sample

__all__ = [
    "ROLE_CHAIN",
    "ROLE_DATA",
    "ROLE_M",
    "ROLE_PRIOR",
    "ROLE_TIE",
    "RankConfig",
    "TwoSampleConfig",
    "check_detailed_balance",
    "rank_statistic",
    "rank_test",
    "two_sample_test",
]

# role indices of a replication's substreams; the compiled kernels hard-code
# the same numbers
ROLE_M = 0
ROLE_TIE = 1
ROLE_PRIOR = 2
ROLE_DATA = 3
ROLE_CHAIN = 4

# forks of a test's root stream
_FORK_FITTED = 0
_FORK_DIRECT = 1


@dataclass(frozen=True)
class TwoSampleConfig:
    """Two-sample test sizes: chain length L, N1 chains, N2 direct draws."""

    L: int
    N1: int
    N2: int
    gibbs_extension: bool = False
    test_functions: Sequence[TestFunction] = ()

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.N1 < 1 or self.N2 < 1:
            raise ValueError(f"need N1, N2 >= 1, got {self.N1}, {self.N2}")
        if not self.test_functions:
            raise ValueError("need at least one test function")

    def scaled(self, n: int) -> "TwoSampleConfig":
        """Copy with both sample sizes set to n (sequential reruns)."""
        return TwoSampleConfig(self.L, n, n, self.gibbs_extension, self.test_functions)


@dataclass(frozen=True)
class RankConfig:
    """Rank test sizes: chain length L, per-step thinning, n_reps ranks."""

    L: int
    n_reps: int
    thinning: int = 1
    rankings: Sequence[OrdinalRanking] = ()
    joint_update_prob: float = 0.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if self.n_reps < 1:
            raise ValueError(f"n_reps must be >= 1, got {self.n_reps}")
        if self.thinning < 1:
            raise ValueError(f"thinning must be >= 1, got {self.thinning}")
        if not self.rankings:
            raise ValueError("need at least one ranking")
        if not 0.0 <= self.joint_update_prob < 1.0:
            raise ValueError(
                f"joint_update_prob must lie in [0, 1), got {self.joint_update_prob}"
            )

    def scaled(self, n: int) -> "RankConfig":
        return RankConfig(self.L, n, self.thinning, self.rankings, self.joint_update_prob)


def _fitted_replication(model, kernel, L, gibbs_extension, rep_rng):
    """One chain replication: exact joint start, then L kernel steps at fixed
    (or Gibbs-refreshed) data."""
    theta = model.sample_prior(rep_rng.substream(ROLE_PRIOR))
    y = model.sample_data(rep_rng.substream(ROLE_DATA), theta)
    chain = rep_rng.substream(ROLE_CHAIN)
    for _ in range(L):
        theta = kernel.step(chain, y, theta)
        if gibbs_extension:
            y = model.sample_data(chain, theta)
    return theta, y


def _direct_replication(model, rep_rng):
    theta = model.sample_prior(rep_rng.substream(ROLE_PRIOR))
    y = model.sample_data(rep_rng.substream(ROLE_DATA), theta)
    return theta, y


def _evaluate(tf, thetas, ys):
    return np.array([float(tf.evaluate(th, y)) for th, y in zip(thetas, ys)])


def _compare(tf, fitted_values, direct_values):
    if tf.value_kind == "discrete":
        a = np.rint(fitted_values).astype(np.int64)
        b = np.rint(direct_values).astype(np.int64)
        if not (np.all(a == fitted_values) and np.all(b == direct_values)):
            raise ValueError(
                f"test function {tf.name!r} is declared discrete but returned "
                "non-integer values"
            )
        lo = min(int(a.min()), int(b.min()))
        hi = max(int(a.max()), int(b.max()))
        counts_a = np.bincount(a - lo, minlength=hi - lo + 1)
        counts_b = np.bincount(b - lo, minlength=hi - lo + 1)
        if hi == lo:
            # all mass in one category: the distributions agree trivially
            return TestOutcome(0.0, 1.0, int(a.size + b.size))
        return chi2_two_sample_discrete(counts_a, counts_b)
    return ks_two_sample(fitted_values, direct_values)


def _batch_simulator(kernel, model):
    factory = kernel.batch
    if factory is None:
        return None
    import os

    if os.environ.get("MCVERIFY_NO_BATCH"):
        return None
    return factory.build(model)


def two_sample_test(
    model: GenerativeModel,
    kernel: KernelFamily,
    config: TwoSampleConfig,
    rng: RngStream,
    threads: int | None = None,
) -> PValueVector:
    """Compare L-step chain replications against direct prior draws.

    Returns one p-value per test function (order preserved).  Effort is
    counted in kernel steps: N1 * L.
    """
    fitted_rng = rng.substream(_FORK_FITTED)
    direct_rng = rng.substream(_FORK_DIRECT)

    sim = _batch_simulator(kernel, model)
    if sim is not None:
        fitted_states = sim.two_sample_fitted(fitted_rng, config, threads)
        direct_states = sim.two_sample_direct(direct_rng, config.N2, threads)
        thetas_f, ys_f = fitted_states
        thetas_d, ys_d = direct_states
    else:
        pairs_f = [
            _fitted_replication(
                model, kernel, config.L, config.gibbs_extension, fitted_rng.substream(i)
            )
            for i in range(config.N1)
        ]
        pairs_d = [
            _direct_replication(model, direct_rng.substream(i))
            for i in range(config.N2)
        ]
        thetas_f = [p[0] for p in pairs_f]
        ys_f = [p[1] for p in pairs_f]
        thetas_d = [p[0] for p in pairs_d]
        ys_d = [p[1] for p in pairs_d]

    p_values = []
    names = []
    for tf in config.test_functions:
        if sim is not None:
            fv = sim.evaluate(tf, thetas_f, ys_f)
            dv = sim.evaluate(tf, thetas_d, ys_d)
        else:
            fv = _evaluate(tf, thetas_f, ys_f)
            dv = _evaluate(tf, thetas_d, ys_d)
        out = _compare(tf, fv, dv)
        p_values.append(out.p_value)
        names.append(tf.name)
    return PValueVector(tuple(p_values), tuple(names), config.N1, float(config.N1 * config.L))


def _require_reversible(kernel, allow_nonreversible):
    if not kernel.declared_reversible and not allow_nonreversible:
        raise ValueError(
            "the rank test's backward legs reuse the forward kernel, which is "
            "only valid for kernels declared reversible; pass "
            "allow_nonreversible=True to run it anyway (the test then probes "
            "that very claim)"
        )


def _evolve(model, kernel, theta, y, thinning, joint_prob, chain_rng):
    for _ in range(thinning):
        if joint_prob > 0.0 and chain_rng.random() < joint_prob:
            y = model.sample_data(chain_rng, theta)
        else:
            theta = kernel.step(chain_rng, y, theta)
    return theta, y


def _rank_chain(model, kernel, config, rep_rng):
    """States of one rank replication, pivot M at an exact joint draw."""
    m = 1 + rep_rng.substream(ROLE_M).randint(config.L)
    theta = model.sample_prior(rep_rng.substream(ROLE_PRIOR))
    y = model.sample_data(rep_rng.substream(ROLE_DATA), theta)
    chain = rep_rng.substream(ROLE_CHAIN)
    states = [None] * config.L
    states[m - 1] = (theta, y)
    th, yy = theta, y
    for pos in range(m - 1, 0, -1):
        th, yy = _evolve(model, kernel, th, yy, config.thinning, config.joint_update_prob, chain)
        states[pos - 1] = (th, yy)
    th, yy = theta, y
    for pos in range(m + 1, config.L + 1):
        th, yy = _evolve(model, kernel, th, yy, config.thinning, config.joint_update_prob, chain)
        states[pos - 1] = (th, yy)
    return m, states


def rank_statistic(
    model: GenerativeModel,
    kernel: KernelFamily,
    config: RankConfig,
    ranking: OrdinalRanking,
    rng: RngStream,
    *,
    allow_nonreversible: bool = False,
) -> int:
    """One rank draw; exactly uniform on {1..L} when the kernel is exact."""
    _require_reversible(kernel, allow_nonreversible)
    m, states = _rank_chain(model, kernel, config, rng)
    scores = [float(ranking.score(th, yy)) for th, yy in states]
    perm = rng.substream(ROLE_TIE).substream(0).permutation(config.L)
    return rank_with_tiebreak(scores, m, perm)


def rank_test(
    model: GenerativeModel,
    kernel: KernelFamily,
    config: RankConfig,
    rng: RngStream,
    threads: int | None = None,
    *,
    allow_nonreversible: bool = False,
    return_ranks: bool = False,
) -> PValueVector:
    """Chi-square uniformity test of n_reps ranks, one p-value per ranking.

    Replication i draws its pivot index, exact start, chain evolution, and
    per-ranking tie permutations from dedicated substreams, so every ranking
    sees the same chains.  Effort is counted in elementary updates:
    n_reps * (L - 1) * thinning.  With return_ranks the (n_reps, n_rankings)
    rank matrix rides along for histogram reporting.
    """
    _require_reversible(kernel, allow_nonreversible)
    base = rng.substream(0)
    n_rankings = len(config.rankings)
    ranks = np.empty((config.n_reps, n_rankings), dtype=np.int64)

    sim = _batch_simulator(kernel, model)
    if sim is not None:
        ms, score_mat = sim.rank_chains(base, config, threads)
        # score_mat[i, r, pos]: ranking r's scores along replication i
        for i in range(config.n_reps):
            rep = RngStream(base.key, i)
            tie_base = rep.substream(ROLE_TIE)
            for r in range(n_rankings):
                perm = tie_base.substream(r).permutation(config.L)
                ranks[i, r] = rank_with_tiebreak(score_mat[i, r], int(ms[i]), perm)
    else:
        for i in range(config.n_reps):
            rep = base.substream(i)
            m, states = _rank_chain(model, kernel, config, rep)
            tie_base = rep.substream(ROLE_TIE)
            for r, ranking in enumerate(config.rankings):
                scores = [float(ranking.score(th, yy)) for th, yy in states]
                perm = tie_base.substream(r).permutation(config.L)
                ranks[i, r] = rank_with_tiebreak(scores, m, perm)

    p_values = []
    names = []
    for r, ranking in enumerate(config.rankings):
        counts = np.bincount(ranks[:, r] - 1, minlength=config.L)
        out = chi2_uniformity(counts)
        p_values.append(out.p_value)
        names.append(ranking.name)
    effort = float(config.n_reps * (config.L - 1) * config.thinning)
    pv = PValueVector(tuple(p_values), tuple(names), config.n_reps, effort)
    if return_ranks:
        return pv, ranks
    return pv


def check_detailed_balance(P, pi, tol: float = 1e-10) -> bool:
    """Detailed-balance check for a finite-state transition matrix."""
    P = np.asarray(P, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if pi.shape != (P.shape[0],):
        raise ValueError("pi must match P's dimension")
    if (P < -1e-15).any() or np.abs(P.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("P must be row-stochastic")
    if (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError("pi must be a probability vector")
    flux = pi[:, None] * P
    return bool(np.abs(flux - flux.T).max() <= tol)
