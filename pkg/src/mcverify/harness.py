"""Rejection-rate drivers behind the CLI: the two benchmark tables for the
Gaussian sampler, the sequential-parameter tuning study, and the
trans-dimensional four-cell grid.

Every driver takes a master seed and hands each cell a substream keyed by
the cell's position in the full grid, so running a subset of cells
reproduces exactly what the full run would have produced for them.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr

from . import gaussian, rjmcmc
from .exact import (
    RankConfig,
    TwoSampleConfig,
    _direct_replication,
    _fitted_replication,
    rank_test,
    two_sample_test,
)
from .rng import RngStream, derive_substream
from .sequential import (
    PValueVector,
    SequentialConfig,
    SequentialVerdict,
    extra_effort_bound,
    sequential_test,
)
from .stats import ks_one_sample_uniform01


@dataclass(frozen=True)
class CellResult:
    """One cell of a rejection-rate table."""

    test: str
    scenario: str
    test_function: str
    runs: int
    rejections: int
    mean_effort: float

    @property
    def rate(self) -> float:
        return self.rejections / self.runs

    @property
    def mc_se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.runs)


def seq_two_sample(model, kernel, config, seq, rng, threads=None):
    """Sequential wrapper around the two-sample test; the config's sample
    sizes are replaced by the sequential schedule."""

    def p_source(n, sub):
        return two_sample_test(model, kernel, config.scaled(n), sub, threads)

    return sequential_test(p_source, seq, rng)


def seq_rank(model, kernel, config, seq, rng, threads=None, *, allow_nonreversible=False):
    def p_source(n, sub):
        return rank_test(
            model, kernel, config.scaled(n), sub, threads,
            allow_nonreversible=allow_nonreversible,
        )

    return sequential_test(p_source, seq, rng)


def rejection_rate(run_one, runs, root):
    """FAIL count and mean effort of `run_one(rng)` over dedicated substreams."""
    rejections = 0
    effort = 0.0
    for i in range(runs):
        verdict = run_one(derive_substream(root, i))
        rejections += verdict.status == "FAIL"
        effort += verdict.total_effort
    return rejections, effort / max(runs, 1)


# ---------------------------------------------------------------------------
# Gaussian benchmark cases

_DEFAULT_PARAMS = gaussian.GaussianModelParams()

# seeded-defect scenarios: (bug, scan)
TABLE1_SCENARIOS = (
    ("correct-random-scan", ("none", "random")),
    ("correct-systematic-scan", ("none", "systematic")),
    ("wrong-mean", ("wrong_expectation", "random")),
    ("wrong-variance", ("wrong_variance", "random")),
    ("truncated", ("truncated", "random")),
)

# assumed-prior mismatch scenarios: the kernel conditions with these
# parameters while the data keep coming from the defaults
TABLE2_SCENARIOS = (
    ("correct", _DEFAULT_PARAMS),
    ("mean-10", gaussian.GaussianModelParams(mu=10.0)),
    ("sigma-5", gaussian.GaussianModelParams(sigma=5.0)),
    ("rho-0.5", gaussian.GaussianModelParams(rho=0.5)),
)

FUNCTION_NAMES = ("theta1", "theta1_sq", "theta1_theta2", "log_prior", "log_likelihood", "all")
TABLE_TESTS = ("seq-two-sample", "seq-rank")


@dataclass(frozen=True)
class GaussianCase:
    model: object
    kernel: object
    test_functions: tuple
    rankings: tuple
    allow_nonreversible: bool


def build_gaussian_case(variant: str) -> GaussianCase:
    """Model/kernel pair for a named scenario, defect or prior mismatch."""
    params = _DEFAULT_PARAMS
    table1 = dict(TABLE1_SCENARIOS)
    table2 = dict(TABLE2_SCENARIOS)
    if variant in table1:
        bug, scan = table1[variant]
        kernel = gaussian.gibbs_kernel(params, bug=bug, scan=scan)
        allow = scan == "systematic"
    elif variant in ("prior-mean-10", "prior-sigma-5", "prior-rho-0.5"):
        assumed = table2[variant[len("prior-"):]]
        kernel = gaussian.gibbs_kernel(assumed)
        allow = False
    elif variant == "perfect-posterior":
        kernel = gaussian.perfect_posterior_kernel(params)
        allow = False
    else:
        known = [name for name, _ in TABLE1_SCENARIOS]
        known += ["prior-mean-10", "prior-sigma-5", "prior-rho-0.5", "perfect-posterior"]
        raise ValueError(f"unknown gaussian variant {variant!r}; known: {', '.join(known)}")
    return GaussianCase(
        model=gaussian.gaussian_model(params),
        kernel=kernel,
        test_functions=gaussian.default_test_functions(params),
        rankings=gaussian.default_rankings(params),
        allow_nonreversible=allow,
    )


def _select(items, name):
    if name == "all":
        return tuple(items)
    return (items[FUNCTION_NAMES.index(name)],)


def _table_cell(case, test, scenario, function, runs, cell_root, threads,
                seq, ts_template, rank_template):
    if test == "seq-two-sample":
        cfg = TwoSampleConfig(
            L=ts_template.L, N1=seq.n0, N2=seq.n0,
            test_functions=_select(case.test_functions, function),
        )
        run_one = lambda rng: seq_two_sample(case.model, case.kernel, cfg, seq, rng, threads)
    else:
        cfg = RankConfig(
            L=rank_template.L, n_reps=seq.n0, thinning=rank_template.thinning,
            rankings=_select(case.rankings, function),
        )
        run_one = lambda rng: seq_rank(
            case.model, case.kernel, cfg, seq, rng, threads,
            allow_nonreversible=case.allow_nonreversible,
        )
    rejections, mean_effort = rejection_rate(run_one, runs, cell_root)
    return CellResult(test, scenario, function, runs, rejections, mean_effort)


def _table_cells(scenario_cases, runs, seed, threads, seq, ts_template,
                 rank_template, scenarios, tests, functions):
    all_scenarios = [name for name, _ in scenario_cases]
    scenarios = all_scenarios if scenarios is None else list(scenarios)
    tests = TABLE_TESTS if tests is None else tuple(tests)
    functions = FUNCTION_NAMES if functions is None else tuple(functions)
    for name, pool, label in (
        (scenarios, all_scenarios, "scenario"),
        (tests, TABLE_TESTS, "test"),
        (functions, FUNCTION_NAMES, "function"),
    ):
        for item in name:
            if item not in pool:
                raise ValueError(f"unknown {label} {item!r}; known: {', '.join(pool)}")
    root = RngStream(seed, 0)
    out = []
    for scenario in scenarios:
        case = dict(scenario_cases)[scenario]()
        s_idx = all_scenarios.index(scenario)
        for test in tests:
            t_idx = TABLE_TESTS.index(test)
            for function in functions:
                f_idx = FUNCTION_NAMES.index(function)
                cell_root = root.substream(s_idx).substream(t_idx).substream(f_idx)
                out.append(_table_cell(
                    case, test, scenario, function, runs, cell_root,
                    threads, seq, ts_template, rank_template,
                ))
    return out


def _seq_with_overrides(alpha, k, delta, n0, base_alpha, base_k, base_delta):
    return SequentialConfig(
        alpha=base_alpha if alpha is None else alpha,
        k=base_k if k is None else k,
        delta=base_delta if delta is None else delta,
        n0=n0,
    )


def table1_cells(runs=500, *, seed=0, threads=None, scenarios=None,
                 tests=None, functions=None, alpha=None, k=None, delta=None):
    """Seeded-defect rejection rates: five scenarios x two sequential tests
    x per-function rows plus a Bonferroni "all" row.

    Sizes: chains of length 5 over 500 replications per iteration, alpha
    0.01, up to 3 iterations with a doubling schedule.
    """
    seq = _seq_with_overrides(alpha, k, delta, 500, 0.01, 3, 2.0)
    ts = TwoSampleConfig(L=5, N1=500, N2=500,
                         test_functions=gaussian.default_test_functions(_DEFAULT_PARAMS))
    rk = RankConfig(L=5, n_reps=500, thinning=1,
                    rankings=gaussian.default_rankings(_DEFAULT_PARAMS))
    cases = tuple(
        (name, (lambda n=name: build_gaussian_case(n))) for name, _ in TABLE1_SCENARIOS
    )
    return _table_cells(cases, runs, seed, threads, seq, ts, rk,
                        scenarios, tests, functions)


def table2_cells(runs=500, *, seed=0, threads=None, scenarios=None,
                 tests=None, functions=None, alpha=None, k=None, delta=None):
    """Assumed-prior mismatch rejection rates.

    Longer chains than the defect table (the mismatches are subtler):
    50 full update cycles for the two-sample test and rank thinning of 5
    cycles, at 10^3 replications per iteration; same sequential layer
    (alpha 0.01, k=3, delta=2).  Chain lengths below are stated in
    single-coordinate kernel applications, two per cycle.
    """
    seq = _seq_with_overrides(alpha, k, delta, 1000, 0.01, 3, 2.0)
    ts = TwoSampleConfig(L=100, N1=1000, N2=1000,
                         test_functions=gaussian.default_test_functions(_DEFAULT_PARAMS))
    rk = RankConfig(L=10, n_reps=1000, thinning=10,
                    rankings=gaussian.default_rankings(_DEFAULT_PARAMS))

    def case_for(assumed):
        if assumed is _DEFAULT_PARAMS:
            return build_gaussian_case("correct-random-scan")
        return GaussianCase(
            model=gaussian.gaussian_model(_DEFAULT_PARAMS),
            kernel=gaussian.gibbs_kernel(assumed),
            test_functions=gaussian.default_test_functions(_DEFAULT_PARAMS),
            rankings=gaussian.default_rankings(_DEFAULT_PARAMS),
            allow_nonreversible=False,
        )

    cases = tuple(
        (name, (lambda a=assumed: case_for(a))) for name, assumed in TABLE2_SCENARIOS
    )
    return _table_cells(cases, runs, seed, threads, seq, ts, rk,
                        scenarios, tests, functions)


# ---------------------------------------------------------------------------
# Tuning study: sequential parameters on a classical iid problem

TUNING_ROWS = ((1, 1.0), (7, 1.0), (7, 4.0))
# (label, mean shift, scale, alpha); the first column doubles as the
# loose-alpha null check
TUNING_SCENARIOS = (
    ("N(0,1) alpha=0.01", 0.0, 1.0, 0.01),
    ("N(0,1)", 0.0, 1.0, 1e-5),
    ("N(0.03,1)", 0.03, 1.0, 1e-5),
    ("N(0.05,1)", 0.05, 1.0, 1e-5),
)


@dataclass(frozen=True)
class TuningCell:
    """One cell of the tuning study: a (k, delta) row under one sampling
    distribution, effort-matched through the first-iteration size."""

    scenario: str
    k: int
    delta: float
    alpha: float
    base_n: int
    runs: int
    rejections: int
    mean_effort: float

    @property
    def rate(self) -> float:
        return self.rejections / self.runs

    @property
    def mc_se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.runs)


def tuning_base_n(alpha, k, delta, n_ref=10_000) -> int:
    """First-iteration sample size that matches the non-sequential
    reference effort n_ref under the worst-case continue bound."""
    probe = SequentialConfig(alpha=alpha, k=k, delta=delta, n0=1)
    return int(round(n_ref / (1.0 + extra_effort_bound(probe))))


def _iid_ks_source(shift, scale):
    """Draws n variates from N(shift, scale^2), maps them through the
    standard normal CDF, and KS-tests the result against U(0, 1)."""

    def source(n, sub):
        buf = np.empty(n)
        # backend twin of [shift + scale * z for z from sub.substream(0)]
        gaussian._impl.fill_normals(sub.key, 0, n, shift, scale, buf)
        outcome = ks_one_sample_uniform01(ndtr(buf))
        return PValueVector(p=(outcome.p_value,), names=("ks",), n=n, effort=float(n))

    return source


def tuning_cells(runs=500, *, seed=0, n_ref=10_000, rows=None, scenarios=None):
    """Power of the sequential KS test across (k, delta) settings, effort-
    matched to a single test of n_ref samples.  Returns rows with the
    scenario label carrying the sampling distribution."""
    rows = TUNING_ROWS if rows is None else tuple(rows)
    scenarios = TUNING_SCENARIOS if scenarios is None else tuple(scenarios)
    root = RngStream(seed, 0)
    out = []
    for row in rows:
        k, delta = row
        r_idx = TUNING_ROWS.index(row) if row in TUNING_ROWS else len(TUNING_ROWS) + rows.index(row)
        for scenario in scenarios:
            label, shift, scale, alpha = scenario
            s_idx = (
                TUNING_SCENARIOS.index(scenario)
                if scenario in TUNING_SCENARIOS
                else len(TUNING_SCENARIOS) + scenarios.index(scenario)
            )
            n0 = tuning_base_n(alpha, k, delta, n_ref)
            seq = SequentialConfig(alpha=alpha, k=k, delta=delta, n0=n0)
            source = _iid_ks_source(shift, scale)
            run_one = lambda rng: sequential_test(source, seq, rng)
            cell_root = root.substream(r_idx).substream(s_idx)
            rejections, mean_effort = rejection_rate(run_one, runs, cell_root)
            out.append(TuningCell(
                scenario=label, k=k, delta=delta, alpha=alpha, base_n=n0,
                runs=runs, rejections=rejections, mean_effort=mean_effort,
            ))
    return out


# ---------------------------------------------------------------------------
# Trans-dimensional grid

RJ_VARIANTS = (
    ("corrected-truncated", ("truncated_poisson", "corrected")),
    ("erroneous-truncated", ("truncated_poisson", "erroneous")),
    ("corrected-accelerated", ("accelerated_poisson", "corrected")),
    ("erroneous-accelerated", ("accelerated_poisson", "erroneous")),
)


def build_rjmcmc_case(variant: str):
    """SinusoidParams for a named cell of the ratio x prior grid."""
    table = dict(RJ_VARIANTS)
    if variant not in table:
        raise ValueError(
            f"unknown rjmcmc variant {variant!r}; known: "
            + ", ".join(name for name, _ in RJ_VARIANTS)
        )
    prior, ratio = table[variant]
    return rjmcmc.SinusoidParams(prior_variant=prior, ratio_variant=ratio)


@dataclass(frozen=True)
class RjCellResult:
    variant: str
    rank_verdict: SequentialVerdict
    two_sample_verdict: SequentialVerdict
    first_rank_p: float
    rank_histogram: tuple
    k_fitted: tuple
    k_direct: tuple

    @property
    def status(self) -> str:
        fails = (self.rank_verdict.status, self.two_sample_verdict.status)
        return "FAIL" if "FAIL" in fails else "OK"


def _k_counts(model, kernel, L, n, rng, k_max):
    """Empirical distribution of the component count among fitted chains
    (length-L evolutions) and direct prior draws; report plumbing."""
    fitted = np.zeros(k_max + 1, dtype=np.int64)
    direct = np.zeros(k_max + 1, dtype=np.int64)
    for i in range(n):
        rep = rng.substream(0).substream(i)
        theta, _ = _fitted_replication(model, kernel, L, False, rep)
        fitted[len(theta)] += 1
        rep = rng.substream(1).substream(i)
        theta, _ = _direct_replication(model, rep)
        direct[len(theta)] += 1
    return tuple(int(c) for c in fitted), tuple(int(c) for c in direct)


def rjmcmc_cell(variant, *, seed=0, threads=None, seq=None,
                rank_L=10, rank_thin=10, two_sample_L=100, n0=1000,
                k_dist_n=500):
    """Both sequential tests on one grid cell, plus the histogram payloads
    the CLI writes out.  The cell FAILs if either test does."""
    params = build_rjmcmc_case(variant)
    model = rjmcmc.sinusoid_model(params)
    kernel = rjmcmc.rj_kernel(params)
    tfs = rjmcmc.default_test_functions()
    rankings = rjmcmc.default_rankings()
    if seq is None:
        seq = SequentialConfig(alpha=1e-5, k=7, delta=4.0, n0=n0)
    cell = RngStream(seed, 0).substream(
        [name for name, _ in RJ_VARIANTS].index(variant)
    )

    rank_cfg = RankConfig(L=rank_L, n_reps=n0, thinning=rank_thin, rankings=rankings)
    first = {}

    def rank_source(n, sub):
        pv, ranks = rank_test(
            model, kernel, rank_cfg.scaled(n), sub, threads, return_ranks=True
        )
        if "p" not in first:
            first["p"] = pv.p[0]
            counts = np.bincount(ranks[:, 0], minlength=rank_cfg.L + 1)[1:]
            first["hist"] = tuple(int(c) for c in counts)
        return pv

    rank_verdict = sequential_test(rank_source, seq, cell.substream(0))

    ts_cfg = TwoSampleConfig(L=two_sample_L, N1=n0, N2=n0, test_functions=tfs)
    ts_verdict = seq_two_sample(model, kernel, ts_cfg, seq, cell.substream(1), threads)

    k_fitted, k_direct = _k_counts(
        model, kernel, two_sample_L, k_dist_n, cell.substream(2), params.k_max
    )
    return RjCellResult(
        variant=variant,
        rank_verdict=rank_verdict,
        two_sample_verdict=ts_verdict,
        first_rank_p=first["p"],
        rank_histogram=first["hist"],
        k_fitted=k_fitted,
        k_direct=k_direct,
    )
