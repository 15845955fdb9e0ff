"""Gaussian benchmark model: y = theta1 + theta2 + noise.

A two-parameter conjugate model whose posterior conditionals are available
in closed form, so a Gibbs sampler for it can be written down exactly -- and
broken in controlled ways.  The kernel family covers a correct sampler
(random-coordinate or systematic sweep) plus three seeded bugs:

* wrong_expectation: the conditional mean uses y + theta_j instead of
  y - theta_j;
* wrong_variance: the sampler uses the square root of the correct
  conditional variance as its variance;
* truncated: each coordinate draws from a half-normal around the
  conditional mean, with the side fixed by a hash of the data value, so one
  replication's chain stays one-sided while the side marginalizes out across
  replications (aggregate marginals stay nearly correct, which is what makes
  this bug hard for two-sample comparisons and easy for rank tests).

The kernel can also assume a *different* prior than the generative one
(`assumed` in `gibbs_kernel`), which turns prior/kernel mismatch into a
testable bug family of its own.

Hot loops run through a compiled extension when available; set
MCVERIFY_BACKEND=c|python|auto to force a back end.  Both back ends and the
generic per-replication engine produce bit-identical results.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..model import GenerativeModel, KernelFamily, OrdinalRanking, ParamSpace, TestFunction
from ..rng import mix64

__all__ = [
    "BACKEND",
    "GaussianModelParams",
    "GaussianSimulator",
    "GibbsVariant",
    "conditional_posterior",
    "default_rankings",
    "default_test_functions",
    "gaussian_model",
    "gibbs_kernel",
    "perfect_posterior_kernel",
    "resolve_threads",
]

_BUG_CODES = {"none": 0, "wrong_expectation": 1, "wrong_variance": 2, "truncated": 3}
_SCAN_CODES = {"random": 0, "systematic": 1}

# per-coordinate salts for the truncated bug's side hash; the compiled and
# fallback kernels carry the same constants
_TRUNC_SALT = (0xD1B54A32D192ED03, 0x8CB92BA72F3D8DD7)


def _select_backend():
    choice = os.environ.get("MCVERIFY_BACKEND", "auto").lower()
    if choice not in ("auto", "c", "python"):
        raise ValueError(
            f"MCVERIFY_BACKEND must be auto, c, or python, got {choice!r}"
        )
    if choice in ("auto", "c"):
        try:
            from . import _core

            return _core
        except ImportError:
            if choice == "c":
                raise ImportError(
                    "MCVERIFY_BACKEND=c but the compiled kernels are not built"
                )
    from . import _fallback

    return _fallback


_impl = _select_backend()
BACKEND = _impl.BACKEND


def resolve_threads(threads: int | None) -> int:
    """Explicit argument, else MCVERIFY_THREADS, else the CPU count."""
    if threads is None:
        env = os.environ.get("MCVERIFY_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


@dataclass(frozen=True)
class GaussianModelParams:
    """Prior N((mu, mu), sigma^2 [[1, rho], [rho, 1]]), noise variance sigma_eps2."""

    mu: float = 0.0
    sigma: float = 10.0
    rho: float = 0.0
    sigma_eps2: float = 0.1

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not self.sigma_eps2 > 0.0:
            raise ValueError(f"sigma_eps2 must be positive, got {self.sigma_eps2}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")


@dataclass(frozen=True)
class GibbsVariant:
    """Which sampler is under test: seeded bug, scan order, assumed prior."""

    bug: str = "none"
    scan: str = "random"
    assumed_prior: GaussianModelParams = GaussianModelParams()

    def __post_init__(self):
        if self.bug not in _BUG_CODES:
            raise ValueError(f"bug must be one of {sorted(_BUG_CODES)}, got {self.bug!r}")
        if self.scan not in _SCAN_CODES:
            raise ValueError(f"scan must be one of {sorted(_SCAN_CODES)}, got {self.scan!r}")


def conditional_posterior(params: GaussianModelParams, y: float, other: float):
    """Mean and variance of theta_i | theta_j = other, y under `params`.

    The prior conditional N(mu + rho (other - mu), sigma^2 (1 - rho^2))
    combines with the likelihood (y - other ~ N(theta_i, sigma_eps2)) by
    precision weighting.
    """
    pvar = (params.sigma * params.sigma) * (1.0 - params.rho * params.rho)
    cond_var = 1.0 / (1.0 / params.sigma_eps2 + 1.0 / pvar)
    mean = cond_var * (
        (y - other) / params.sigma_eps2
        + (params.mu + params.rho * (other - params.mu)) / pvar
    )
    return mean, cond_var


def gaussian_model(params: GaussianModelParams) -> GenerativeModel:
    """Generative model as sampling closures over a stream."""
    sig_term = math.sqrt(1.0 - params.rho * params.rho)
    eps_sd = math.sqrt(params.sigma_eps2)
    mu = params.mu
    sigma = params.sigma
    rho = params.rho

    def sample_prior(rng):
        z1 = rng.normal()
        z2 = rng.normal()
        th1 = mu + sigma * z1
        th2 = mu + sigma * (rho * z1 + sig_term * z2)
        return (th1, th2)

    def sample_data(rng, theta):
        return theta[0] + theta[1] + eps_sd * rng.normal()

    tfs = default_test_functions(params)
    return GenerativeModel(
        sample_prior=sample_prior,
        sample_data=sample_data,
        log_prior=lambda th: tfs[3].evaluate(th, None),
        log_likelihood=lambda th, y: tfs[4].evaluate(th, y),
        space=ParamSpace(dimension=2),
        meta=params,
    )


def _make_step(variant: GibbsVariant):
    a = variant.assumed_prior
    mu_a = a.mu
    rho_a = a.rho
    se2_a = a.sigma_eps2
    pvar_a = (a.sigma * a.sigma) * (1.0 - a.rho * a.rho)
    cond_var = 1.0 / (1.0 / se2_a + 1.0 / pvar_a)
    if variant.bug == "wrong_variance":
        samp_sd = math.sqrt(math.sqrt(cond_var))
    else:
        samp_sd = math.sqrt(cond_var)
    bug = variant.bug

    def update(rng, y, th, coord):
        other = th[1 - coord]
        if bug == "wrong_expectation":
            mean = cond_var * ((y + other) / se2_a + (mu_a + rho_a * (other - mu_a)) / pvar_a)
        else:
            mean = cond_var * ((y - other) / se2_a + (mu_a + rho_a * (other - mu_a)) / pvar_a)
        z = rng.normal()
        if bug == "truncated":
            bits = struct.unpack("=Q", struct.pack("=d", y))[0]
            if mix64(bits ^ _TRUNC_SALT[coord]) & 1:
                val = mean + samp_sd * math.fabs(z)
            else:
                val = mean - samp_sd * math.fabs(z)
        else:
            val = mean + samp_sd * z
        return (val, th[1]) if coord == 0 else (th[0], val)

    if variant.scan == "random":

        def step(rng, y, theta):
            return update(rng, y, theta, rng.randint(2))

    else:

        def step(rng, y, theta):
            return update(rng, y, update(rng, y, theta, 0), 1)

    return step


class _BatchFactory:
    """Hands the generic engine a batch simulator when the model matches."""

    def __init__(self, variant: GibbsVariant):
        self.variant = variant

    def build(self, model: GenerativeModel):
        if not isinstance(model.meta, GaussianModelParams):
            return None
        return GaussianSimulator(self.variant, model.meta)


def gibbs_kernel(
    params: GaussianModelParams,
    bug: str = "none",
    scan: str = "random",
) -> KernelFamily:
    """Gibbs kernel family targeting the posterior under `params`.

    `params` is the prior the *kernel* assumes; pass the generative
    parameters for a matched sampler.  Random-scan kernels are declared
    reversible (the seeded bugs break exactness, not the declaration);
    systematic sweeps are not reversible and say so.
    """
    variant = GibbsVariant(bug=bug, scan=scan, assumed_prior=params)
    name = f"gibbs-{scan}" if bug == "none" else f"gibbs-{scan}-{bug}"
    return KernelFamily(
        step=_make_step(variant),
        declared_reversible=(scan == "random"),
        name=name,
        batch=_BatchFactory(variant),
        meta=variant,
    )


def perfect_posterior_kernel(params: GaussianModelParams) -> KernelFamily:
    """Independence kernel drawing fresh exact posterior samples."""
    s2 = params.sigma * params.sigma
    rho = params.rho
    mu = params.mu
    s = 2.0 * s2 * (1.0 + rho) + params.sigma_eps2
    gain = s2 * (1.0 + rho) / s
    v11 = s2 - s2 * (1.0 + rho) * gain
    v12 = s2 * rho - s2 * (1.0 + rho) * gain
    c11 = math.sqrt(v11)
    c21 = v12 / c11
    c22 = math.sqrt(v11 - c21 * c21)

    def step(rng, y, theta):
        mean = mu + gain * (y - 2.0 * mu)
        z1 = rng.normal()
        z2 = rng.normal()
        return (mean + c11 * z1, mean + c21 * z1 + c22 * z2)

    return KernelFamily(step=step, declared_reversible=True, name="perfect-posterior")


def default_test_functions(params: GaussianModelParams):
    """The five scalar summaries used throughout: theta1, theta1^2,
    theta1 theta2, and the log prior and log likelihood densities.

    Density summaries are logs: the tests are invariant under strictly
    monotone transforms, and logs avoid exp underflow far in the tails.
    All five evaluate with plain arithmetic only, so array inputs produce
    bitwise the same values as scalar loops.
    """
    mu = params.mu
    rho = params.rho
    s2 = params.sigma * params.sigma
    qden = s2 * (1.0 - rho * rho)
    log_norm_prior = -math.log(2.0 * math.pi * s2 * math.sqrt(1.0 - rho * rho))
    se2 = params.sigma_eps2
    log_norm_lik = -0.5 * math.log(2.0 * math.pi * se2)

    def theta1(th, y):
        return th[0]

    def theta1_sq(th, y):
        return th[0] * th[0]

    def theta1_theta2(th, y):
        return th[0] * th[1]

    def log_prior(th, y):
        d1 = th[0] - mu
        d2 = th[1] - mu
        return log_norm_prior - 0.5 * (d1 * d1 - 2.0 * rho * d1 * d2 + d2 * d2) / qden

    def log_likelihood(th, y):
        r = y - th[0] - th[1]
        return log_norm_lik - (r * r) / (2.0 * se2)

    return [
        TestFunction("theta1", theta1),
        TestFunction("theta1_sq", theta1_sq),
        TestFunction("theta1_theta2", theta1_theta2),
        TestFunction("log_prior", log_prior),
        TestFunction("log_likelihood", log_likelihood),
    ]


def default_rankings(params: GaussianModelParams):
    return [
        OrdinalRanking(tf.name, tf.evaluate) for tf in default_test_functions(params)
    ]


def _eval_many(fn, th1, th2, ys):
    """Vectorized evaluation with a scalar fallback for non-array callables."""
    try:
        vals = np.asarray(fn((th1, th2), ys), dtype=np.float64)
        if vals.shape != ys.shape:
            raise TypeError
    except Exception:
        vals = np.empty(ys.shape, dtype=np.float64)
        f1 = th1.ravel()
        f2 = th2.ravel()
        fy = ys.ravel()
        fo = vals.ravel()
        for i in range(fy.size):
            fo[i] = float(fn((float(f1[i]), float(f2[i])), float(fy[i])))
    return vals


class GaussianSimulator:
    """Batch replication driver matching the generic engine's stream tree.

    Replications are split into contiguous index chunks across a thread
    pool; every replication derives its own stream from (base key, index),
    so results do not depend on the chunking.
    """

    def __init__(self, variant: GibbsVariant, generative: GaussianModelParams):
        self.variant = variant
        self.generative = generative
        a = variant.assumed_prior
        g = generative
        self._gen = (g.mu, g.sigma, g.rho, g.sigma_eps2)
        self._assumed = (a.mu, a.sigma, a.rho, a.sigma_eps2)
        self._bug = _BUG_CODES[variant.bug]
        self._scan = _SCAN_CODES[variant.scan]

    def _run(self, fn, key, n, threads, *tail):
        t = min(resolve_threads(threads), n)
        if t <= 1:
            fn(key, 0, n, *tail)
            return
        step = (n + t - 1) // t
        spans = [(s, min(n, s + step)) for s in range(0, n, step)]
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            for fut in [pool.submit(fn, key, s, e, *tail) for s, e in spans]:
                fut.result()

    def two_sample_fitted(self, rng, config, threads=None):
        out = np.empty((config.N1, 3), dtype=np.float64)
        self._run(
            _impl.two_sample_fitted_chunk, rng.key, config.N1, threads,
            config.L, config.gibbs_extension, *self._gen, *self._assumed,
            self._bug, self._scan, out,
        )
        return out[:, :2], out[:, 2]

    def two_sample_direct(self, rng, n, threads=None):
        out = np.empty((n, 3), dtype=np.float64)
        self._run(_impl.two_sample_direct_chunk, rng.key, n, threads, *self._gen, out)
        return out[:, :2], out[:, 2]

    def rank_chains(self, rng, config, threads=None):
        n = config.n_reps
        states = np.empty((n, config.L, 3), dtype=np.float64)
        ms = np.empty(n, dtype=np.int64)
        self._run(
            _impl.rank_chunk, rng.key, n, threads,
            config.L, config.thinning, config.joint_update_prob,
            *self._gen, *self._assumed, self._bug, self._scan, states, ms,
        )
        score_mat = np.empty((n, len(config.rankings), config.L), dtype=np.float64)
        th1 = states[:, :, 0]
        th2 = states[:, :, 1]
        yv = states[:, :, 2]
        for r, ranking in enumerate(config.rankings):
            score_mat[:, r, :] = _eval_many(ranking.score, th1, th2, yv)
        return ms, score_mat

    def evaluate(self, tf, thetas, ys):
        return _eval_many(tf.evaluate, thetas[:, 0], thetas[:, 1], ys)
