"""Engine tests on a fully enumerable finite model.

A 3-state parameter with a 2-state observation is small enough to compute
every distribution in closed form: transition matrices for the
Metropolis-within-posterior kernel, exact L-step marginals, and the complete
law of the tie-broken rank (summing over pivot, seat, chain paths, and tie
permutations).  The engines must (a) be exactly calibrated when the kernel
is exact, to enumeration precision in theory and statistically in Monte
Carlo, and (b) match the enumerated non-null law under a deliberately broken
kernel, which pins down that the implementation computes the defined
statistic and not merely something uniform.
"""

import math
from itertools import permutations, product

import numpy as np
import pytest

from mcverify.exact import (
    RankConfig,
    TwoSampleConfig,
    check_detailed_balance,
    rank_statistic,
    rank_test,
    two_sample_test,
)
from mcverify.model import GenerativeModel, KernelFamily, OrdinalRanking, TestFunction
from mcverify.rng import RngStream, sample_categorical
from mcverify.stats import chi2_uniformity

from oracles import chi2_sf_oracle

PRIOR = (0.5, 0.3, 0.2)
LIK1 = (0.2, 0.6, 0.9)  # P(y=1 | theta)


def posterior_weights(y, tilt=0.0):
    return tuple(
        PRIOR[t] * (LIK1[t] if y == 1 else 1.0 - LIK1[t]) * math.exp(tilt * t)
        for t in range(3)
    )


def finite_model():
    def sample_prior(rng):
        return sample_categorical(rng, PRIOR)

    def sample_data(rng, theta):
        return 1 if rng.random() < LIK1[theta] else 0

    return GenerativeModel(sample_prior=sample_prior, sample_data=sample_data)


def mh_kernel(tilt=0.0, declared_reversible=True):
    """Uniform-proposal Metropolis targeting the (optionally tilted) posterior."""

    def step(rng, y, theta):
        w = posterior_weights(y, tilt)
        prop = rng.randint(3)
        if rng.random() < min(1.0, w[prop] / w[theta]):
            return prop
        return theta

    return KernelFamily(step=step, declared_reversible=declared_reversible, name="mh")


def perfect_kernel():
    def step(rng, y, theta):
        return sample_categorical(rng, posterior_weights(y))

    return KernelFamily(step=step, declared_reversible=True, name="perfect")


def identity_kernel():
    return KernelFamily(step=lambda rng, y, theta: theta, declared_reversible=True, name="id")


def cyclic_kernel():
    """theta -> theta + 1 proposals with a plain Metropolis accept: not
    reversible and not invariant for the posterior (the reverse proposal has
    probability zero)."""

    def step(rng, y, theta):
        w = posterior_weights(y)
        prop = (theta + 1) % 3
        if rng.random() < min(1.0, w[prop] / w[theta]):
            return prop
        return theta

    return KernelFamily(step=step, declared_reversible=False, name="cycle")


def mh_matrix(w):
    P = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            if i != j:
                P[i, j] = (1.0 / 3.0) * min(1.0, w[j] / w[i])
        P[i, i] = 1.0 - P[i].sum()
    return P


def matrices(tilt=0.0):
    return [mh_matrix(posterior_weights(y, tilt)) for y in (0, 1)]


def y_marginal(y):
    return sum(PRIOR[t] * (LIK1[t] if y == 1 else 1.0 - LIK1[t]) for t in range(3))


def posterior(y):
    w = np.array(posterior_weights(y))
    return w / w.sum()


def rank_oracle(vals, pivot_index, perm):
    order = sorted(range(len(vals)), key=lambda j: (vals[j], perm[j]))
    return order.index(pivot_index - 1) + 1


def enumerate_rank_dist(L, P_by_y, thinning=1):
    """Exact law of the tie-broken rank of the pivot's theta value."""
    Pt = [np.linalg.matrix_power(P, thinning) for P in P_by_y]
    dist = np.zeros(L)
    for y in (0, 1):
        p_y = y_marginal(y)
        post = posterior(y)
        P = Pt[y]
        for m in range(1, L + 1):
            for pivot in range(3):
                base = p_y * (1.0 / L) * post[pivot]
                if base == 0.0:
                    continue
                for path in product(range(3), repeat=L - 1):
                    states = [None] * L
                    states[m - 1] = pivot
                    prob = 1.0
                    idx = 0
                    cur = pivot
                    for pos in range(m - 1, 0, -1):
                        nxt = path[idx]
                        idx += 1
                        prob *= P[cur, nxt]
                        states[pos - 1] = nxt
                        cur = nxt
                    cur = pivot
                    for pos in range(m + 1, L + 1):
                        nxt = path[idx]
                        idx += 1
                        prob *= P[cur, nxt]
                        states[pos - 1] = nxt
                        cur = nxt
                    if prob == 0.0:
                        continue
                    vals = [float(t) for t in states]
                    share = base * prob / math.factorial(L)
                    for perm in permutations(range(L)):
                        dist[rank_oracle(vals, m, perm) - 1] += share
    return dist


def enumerate_fitted_marginal(L, P_by_y):
    marg = np.zeros(3)
    for y in (0, 1):
        PL = np.linalg.matrix_power(P_by_y[y], L)
        for t0 in range(3):
            w = PRIOR[t0] * (LIK1[t0] if y == 1 else 1.0 - LIK1[t0])
            marg += w * PL[t0]
    return marg


def enumerate_gibbs_joint(L, P_by_y):
    """Joint (theta, y) law after L rounds of kernel step + y resample."""
    T = np.zeros((6, 6))
    for th in range(3):
        for y in (0, 1):
            for th2 in range(3):
                for y2 in (0, 1):
                    q2 = LIK1[th2] if y2 == 1 else 1.0 - LIK1[th2]
                    T[2 * th + y, 2 * th2 + y2] = P_by_y[y][th, th2] * q2
    start = np.array(
        [
            PRIOR[th] * (LIK1[th] if y == 1 else 1.0 - LIK1[th])
            for th in range(3)
            for y in (0, 1)
        ]
    )
    return start @ np.linalg.matrix_power(T, L)


TF_THETA = TestFunction("theta", lambda th, y: float(th), "discrete")
TF_Y = TestFunction("y", lambda th, y: float(y), "discrete")
RANK_THETA = OrdinalRanking("theta", lambda th, y: float(th))


# ---------------------------------------------------------------- enumeration


def test_mh_matrices_satisfy_detailed_balance():
    for y in (0, 1):
        P = matrices()[y]
        assert check_detailed_balance(P, posterior(y), tol=1e-14)


def test_cyclic_kernel_violates_detailed_balance():
    # exact one-step matrix of the cyclic kernel
    for y in (0, 1):
        w = posterior_weights(y)
        P = np.zeros((3, 3))
        for i in range(3):
            j = (i + 1) % 3
            P[i, j] = min(1.0, w[j] / w[i])
            P[i, i] = 1.0 - P[i, j]
        assert not check_detailed_balance(P, posterior(y), tol=1e-6)


def test_detailed_balance_validation():
    with pytest.raises(ValueError):
        check_detailed_balance(np.ones((2, 3)), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        check_detailed_balance(np.eye(2) * 2.0, np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        check_detailed_balance(np.eye(2), np.array([0.7, 0.7]))


def test_enumerated_rank_uniform_for_exact_kernel():
    # the theorem, verified to enumeration precision, thinning included
    for thinning in (1, 2, 5):
        dist = enumerate_rank_dist(3, matrices(), thinning=thinning)
        assert np.abs(dist - 1.0 / 3.0).max() < 1e-12


def test_enumerated_rank_nonuniform_for_tilted_kernel():
    dist = enumerate_rank_dist(3, matrices(tilt=0.8))
    assert np.abs(dist - 1.0 / 3.0).max() > 0.01


def test_enumerated_fitted_marginal_is_prior_for_exact_kernel():
    for L in (1, 2, 5):
        marg = enumerate_fitted_marginal(L, matrices())
        assert np.abs(marg - np.array(PRIOR)).max() < 1e-12


def test_enumerated_gibbs_joint_invariant_for_exact_kernel():
    start = enumerate_gibbs_joint(0, matrices())
    for L in (1, 3):
        assert np.abs(enumerate_gibbs_joint(L, matrices()) - start).max() < 1e-12


# ------------------------------------------------------- two-sample engine


def test_two_sample_exact_kernel_calibrated():
    # p-values over repeated runs of an exact kernel should look uniform;
    # aggregate with a chi-square on deciles
    model = finite_model()
    kernel = mh_kernel()
    config = TwoSampleConfig(L=3, N1=150, N2=150, test_functions=[TF_THETA])
    root = RngStream(9001, 0)
    bins = [0] * 10
    runs = 400
    for i in range(runs):
        pv = two_sample_test(model, kernel, config, root.substream(i))
        bins[min(9, int(pv.p[0] * 10))] += 1
    # discrete statistics make sub-uniform p-values; only gross miscalibration
    # (mass piling into the lowest bins) must fail
    assert chi2_uniformity(bins).p_value > 1e-6
    assert bins[0] < runs * 0.2


def test_two_sample_detects_tilted_kernel():
    # enumerated theta_L marginal is far from the prior at L=2, so a single
    # decent-sized run must reject
    marg = enumerate_fitted_marginal(2, matrices(tilt=0.8))
    assert np.abs(marg - np.array(PRIOR)).sum() > 0.05
    model = finite_model()
    config = TwoSampleConfig(L=2, N1=4000, N2=4000, test_functions=[TF_THETA])
    pv = two_sample_test(model, mh_kernel(tilt=0.8), config, RngStream(77, 0))
    assert pv.p[0] < 1e-6


def test_two_sample_gibbs_extension_detects_via_y():
    # with the Gibbs extension a kernel error leaks into the data coordinate
    joint = enumerate_gibbs_joint(3, matrices(tilt=0.8))
    y1 = joint[1::2].sum()
    assert abs(y1 - y_marginal(1)) > 0.01
    model = finite_model()
    config = TwoSampleConfig(
        L=3, N1=6000, N2=6000, gibbs_extension=True, test_functions=[TF_Y]
    )
    pv = two_sample_test(model, mh_kernel(tilt=0.8), config, RngStream(78, 0))
    assert pv.p[0] < 1e-3


def test_two_sample_gibbs_extension_calibrated():
    model = finite_model()
    config = TwoSampleConfig(
        L=3, N1=300, N2=300, gibbs_extension=True, test_functions=[TF_THETA, TF_Y]
    )
    root = RngStream(4242, 0)
    low = 0
    runs = 200
    for i in range(runs):
        pv = two_sample_test(model, mh_kernel(), config, root.substream(i))
        low += min(pv.p) < 0.05
    # Bonferroni-free per-function 0.05 exceedance; 2 functions, discrete
    # conservatism keeps this well under ~0.1 per run
    assert low < runs * 0.25


def test_two_sample_identity_and_perfect_kernels_pass():
    model = finite_model()
    config = TwoSampleConfig(L=4, N1=500, N2=500, test_functions=[TF_THETA])
    for kernel in (identity_kernel(), perfect_kernel()):
        pv = two_sample_test(model, kernel, config, RngStream(5005, 0))
        assert pv.p[0] > 0.01


def test_two_sample_deterministic_and_bookkeeping():
    model = finite_model()
    config = TwoSampleConfig(L=3, N1=80, N2=120, test_functions=[TF_THETA, TF_Y])
    a = two_sample_test(model, mh_kernel(), config, RngStream(31337, 0))
    b = two_sample_test(model, mh_kernel(), config, RngStream(31337, 0))
    assert a == b
    assert a.names == ("theta", "y")
    assert a.n == 80
    assert a.effort == 80 * 3


def test_two_sample_config_validation():
    with pytest.raises(ValueError):
        TwoSampleConfig(L=0, N1=10, N2=10, test_functions=[TF_THETA])
    with pytest.raises(ValueError):
        TwoSampleConfig(L=1, N1=0, N2=10, test_functions=[TF_THETA])
    with pytest.raises(ValueError):
        TwoSampleConfig(L=1, N1=10, N2=10)
    c = TwoSampleConfig(L=2, N1=10, N2=20, test_functions=[TF_THETA])
    assert c.scaled(77) == TwoSampleConfig(L=2, N1=77, N2=77, test_functions=[TF_THETA])


# ------------------------------------------------------------- rank engine


def test_rank_requires_reversibility_declaration():
    model = finite_model()
    config = RankConfig(L=3, n_reps=10, rankings=[RANK_THETA])
    with pytest.raises(ValueError):
        rank_test(model, cyclic_kernel(), config, RngStream(1, 0))
    with pytest.raises(ValueError):
        rank_statistic(model, cyclic_kernel(), config, RANK_THETA, RngStream(1, 0))
    # explicit override runs
    rank_test(model, cyclic_kernel(), config, RngStream(1, 0), allow_nonreversible=True)


def test_rank_counts_match_enumeration_exact_kernel():
    model = finite_model()
    config = RankConfig(L=3, n_reps=6000, rankings=[RANK_THETA])
    pv, ranks = rank_test(
        model, mh_kernel(), config, RngStream(1234, 0), return_ranks=True
    )
    counts = np.bincount(ranks[:, 0] - 1, minlength=3)
    assert chi2_uniformity(counts).p_value > 1e-4
    assert pv.p[0] > 1e-4


def test_rank_counts_match_enumeration_tilted_kernel():
    # the implementation must reproduce the enumerated *non-null* law
    dist = enumerate_rank_dist(3, matrices(tilt=0.8))
    model = finite_model()
    config = RankConfig(L=3, n_reps=6000, rankings=[RANK_THETA])
    pv, ranks = rank_test(
        model,
        mh_kernel(tilt=0.8),
        config,
        RngStream(4321, 0),
        return_ranks=True,
    )
    counts = np.bincount(ranks[:, 0] - 1, minlength=3)
    stat = float(((counts - config.n_reps * dist) ** 2 / (config.n_reps * dist)).sum())
    assert chi2_sf_oracle(stat, 2) > 1e-4
    # and the uniformity test itself must reject strongly
    assert pv.p[0] < 1e-8


def test_rank_thinning_matches_enumeration():
    dist = enumerate_rank_dist(3, matrices(tilt=0.8), thinning=3)
    model = finite_model()
    config = RankConfig(L=3, n_reps=6000, thinning=3, rankings=[RANK_THETA])
    pv, ranks = rank_test(
        model,
        mh_kernel(tilt=0.8),
        config,
        RngStream(8765, 0),
        return_ranks=True,
    )
    counts = np.bincount(ranks[:, 0] - 1, minlength=3)
    stat = float(((counts - config.n_reps * dist) ** 2 / (config.n_reps * dist)).sum())
    assert chi2_sf_oracle(stat, 2) > 1e-4


def test_rank_joint_update_stays_uniform_for_exact_kernel():
    # mixing in y resamples keeps the rank exactly uniform when the kernel is
    # exact (both component moves are reversible for the joint law)
    model = finite_model()
    config = RankConfig(
        L=4,
        n_reps=5000,
        rankings=[OrdinalRanking("state", lambda th, y: th + 0.5 * y)],
        joint_update_prob=0.3,
    )
    pv, ranks = rank_test(
        model, mh_kernel(), config, RngStream(2468, 0), return_ranks=True
    )
    counts = np.bincount(ranks[:, 0] - 1, minlength=4)
    assert chi2_uniformity(counts).p_value > 1e-4


def test_rank_detects_nonreversible_cyclic_kernel():
    model = finite_model()
    config = RankConfig(L=3, n_reps=4000, rankings=[RANK_THETA])
    pv = rank_test(
        model, cyclic_kernel(), config, RngStream(1357, 0), allow_nonreversible=True
    )
    assert pv.p[0] < 1e-6


def test_rank_identity_kernel_uniform_through_tiebreak():
    # all L states tie; uniformity must come entirely from the permutation
    model = finite_model()
    config = RankConfig(L=5, n_reps=5000, rankings=[RANK_THETA])
    pv, ranks = rank_test(
        model, identity_kernel(), config, RngStream(9753, 0), return_ranks=True
    )
    counts = np.bincount(ranks[:, 0] - 1, minlength=5)
    assert chi2_uniformity(counts).p_value > 1e-4


def test_rank_constant_score_uniform():
    model = finite_model()
    config = RankConfig(
        L=4, n_reps=4000, rankings=[OrdinalRanking("const", lambda th, y: 0.0)]
    )
    pv, ranks = rank_test(
        model, mh_kernel(), config, RngStream(8642, 0), return_ranks=True
    )
    counts = np.bincount(ranks[:, 0] - 1, minlength=4)
    assert chi2_uniformity(counts).p_value > 1e-4


def test_rank_statistic_matches_rank_test_law():
    # the one-shot helper follows the same replication recipe
    model = finite_model()
    config = RankConfig(L=3, n_reps=1, rankings=[RANK_THETA])
    root = RngStream(1122, 0)
    counts = [0] * 3
    for i in range(3000):
        r = rank_statistic(model, mh_kernel(), config, RANK_THETA, root.substream(i))
        counts[r - 1] += 1
    assert chi2_uniformity(counts).p_value > 1e-4


def test_rank_deterministic_and_bookkeeping():
    model = finite_model()
    config = RankConfig(L=3, n_reps=50, thinning=2, rankings=[RANK_THETA])
    a = rank_test(model, mh_kernel(), config, RngStream(99, 0))
    b = rank_test(model, mh_kernel(), config, RngStream(99, 0))
    assert a == b
    assert a.names == ("theta",)
    assert a.n == 50
    assert a.effort == 50 * 2 * 2  # n_reps * (L-1) * thinning


def test_rank_config_validation():
    with pytest.raises(ValueError):
        RankConfig(L=1, n_reps=10, rankings=[RANK_THETA])
    with pytest.raises(ValueError):
        RankConfig(L=3, n_reps=0, rankings=[RANK_THETA])
    with pytest.raises(ValueError):
        RankConfig(L=3, n_reps=10, thinning=0, rankings=[RANK_THETA])
    with pytest.raises(ValueError):
        RankConfig(L=3, n_reps=10, rankings=[])
    with pytest.raises(ValueError):
        RankConfig(L=3, n_reps=10, rankings=[RANK_THETA], joint_update_prob=1.0)
