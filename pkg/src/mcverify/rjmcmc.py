"""Trans-dimensional sampler for sinusoid detection in noise.

The observation is y_t = sum_l a_{2l-1} cos(w_l t) + a_{2l} sin(w_l t) + noise
for t = 0..N-1 with an unknown number k of frequencies.  Amplitudes get a
g-style prior a | sigma^2 ~ N(0, sigma^2 delta2 (D^T D)^{-1}) and
sigma^2 ~ InvGamma(v0/2, gamma0/2), so both integrate out in closed form and
the chain only carries (k, w).  The state is the tuple of frequencies in
(0, pi); slot order carries no meaning beyond bookkeeping.

Moves: birth (uniform new frequency into a uniform slot), death (uniform
slot), and two fixed-k updates chosen by a fair coin -- a random-walk update
of one frequency, and an independence update proposing from the smoothed
periodogram of y.  Birth and death probabilities follow the truncated
Poisson prior ratios with ceiling 0.25 regardless of which prior the
generative model uses: the sampler under test was designed for the
truncated prior, and the prior variants exist to probe what its acceptance
ratio is actually exact for.

Two acceptance-ratio conventions are built in.  `corrected` is exact for
the truncated Poisson prior on k.  `erroneous` divides the birth ratio by
the number of components after insertion (a bookkeeping slip that is easy
to make when mixing ordered and unordered state descriptions); that chain
is *also* exact, but for the tilted prior pmf(k) proportional to
rate^k / (k!)^2.  Crossing the two conventions with the two priors gives
two correct samplers and two subtly wrong ones, which is exactly the grid
the verification tests are pointed at.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GenerativeModel, KernelFamily, OrdinalRanking, ParamSpace, TestFunction
from .rng import RngStream, sample_categorical, sample_inverse_gamma

__all__ = [
    "DesignWorkspace",
    "SinusoidParams",
    "accelerated_poisson_pmf",
    "birth_ratio",
    "default_rankings",
    "default_test_functions",
    "design_matrix",
    "design_workspace",
    "gfk_step",
    "lfk_step",
    "move_probabilities",
    "prior_pmf",
    "quad_form_Pk",
    "rj_kernel",
    "rj_step",
    "sinusoid_model",
    "spectral_log_density",
    "spectral_weights",
    "target_log_density",
    "truncated_poisson_pmf",
]

_PI = math.pi
_PRIORS = ("truncated_poisson", "accelerated_poisson")
_RATIOS = ("corrected", "erroneous")


@dataclass(frozen=True)
class SinusoidParams:
    n_obs: int = 64
    rate: float = 3.0
    v0: float = 10.0
    gamma0: float = 10.0
    delta2: float = 64.0
    sigma_rw: float = 0.02
    pad_factor: int = 4
    prior_variant: str = "truncated_poisson"
    ratio_variant: str = "corrected"

    def __post_init__(self):
        if self.n_obs < 3:
            raise ValueError(f"n_obs must be >= 3, got {self.n_obs}")
        if not self.rate > 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        for field in ("v0", "gamma0", "delta2", "sigma_rw"):
            if not getattr(self, field) > 0.0:
                raise ValueError(f"{field} must be positive, got {getattr(self, field)}")
        if self.pad_factor < 1 or (self.pad_factor * self.n_obs) % 2:
            raise ValueError("pad_factor * n_obs must be even and positive")
        if self.prior_variant not in _PRIORS:
            raise ValueError(f"prior_variant must be one of {_PRIORS}, got {self.prior_variant!r}")
        if self.ratio_variant not in _RATIOS:
            raise ValueError(f"ratio_variant must be one of {_RATIOS}, got {self.ratio_variant!r}")

    @property
    def k_max(self) -> int:
        # 2 k_max < n_obs keeps the design generically full-rank
        return (self.n_obs - 1) // 2

    @property
    def n_pad(self) -> int:
        return self.pad_factor * self.n_obs


def truncated_poisson_pmf(rate: float, k_max: int) -> np.ndarray:
    """Poisson(rate) restricted to {0..k_max} and renormalized."""
    w = np.empty(k_max + 1)
    w[0] = 1.0
    for k in range(1, k_max + 1):
        w[k] = w[k - 1] * rate / k
    return w / w.sum()


def accelerated_poisson_pmf(rate: float, k_max: int) -> np.ndarray:
    """pmf proportional to rate^k / (k!)^2 on {0..k_max}.

    This is the prior the erroneous birth ratio is secretly exact for: each
    accepted birth carries a spurious 1/(k+1), and those compose to 1/k!.
    """
    w = np.empty(k_max + 1)
    w[0] = 1.0
    for k in range(1, k_max + 1):
        w[k] = w[k - 1] * rate / (k * k)
    return w / w.sum()


def prior_pmf(params: SinusoidParams) -> np.ndarray:
    if params.prior_variant == "truncated_poisson":
        return truncated_poisson_pmf(params.rate, params.k_max)
    return accelerated_poisson_pmf(params.rate, params.k_max)


def move_probabilities(pmf: np.ndarray, ceiling: float = 0.25):
    """Birth and death probabilities per k from prior ratios."""
    if not 0.0 < ceiling <= 0.5:
        raise ValueError(f"ceiling must lie in (0, 0.5], got {ceiling}")
    k_max = len(pmf) - 1
    birth = np.zeros(k_max + 1)
    death = np.zeros(k_max + 1)
    for k in range(k_max):
        birth[k] = ceiling * min(1.0, pmf[k + 1] / pmf[k])
    for k in range(1, k_max + 1):
        death[k] = ceiling * min(1.0, pmf[k - 1] / pmf[k])
    return birth, death


def design_matrix(w, n_obs: int) -> np.ndarray:
    """Columns cos(w_l t), sin(w_l t) for t = 0..n_obs-1, interleaved."""
    t = np.arange(n_obs, dtype=np.float64)
    out = np.empty((n_obs, 2 * len(w)))
    for l, wl in enumerate(w):
        out[:, 2 * l] = np.cos(wl * t)
        out[:, 2 * l + 1] = np.sin(wl * t)
    return out


@dataclass(frozen=True)
class DesignWorkspace:
    """Per-state linear algebra bundle: design, Gram, its Cholesky factor,
    and the shrunk quadratic form y^T P_k y."""

    design: np.ndarray
    gram: np.ndarray
    chol: np.ndarray
    quad: float


def design_workspace(y, w, params: SinusoidParams):
    """Builds the workspace for one state; None when the Gram matrix is
    singular (duplicate frequencies or a lattice point that zeroes a
    column), which callers treat as an unusable state."""
    y = np.asarray(y, dtype=np.float64)
    total = float(y @ y)
    if len(w) == 0:
        empty = np.empty((0, 0))
        return DesignWorkspace(np.empty((params.n_obs, 0)), empty, empty, total)
    d = design_matrix(w, params.n_obs)
    g = d.T @ d
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        return None
    # exact duplicates can leave a pivot of pure rounding noise that the
    # factorization itself does not reject
    pivots = np.diag(chol)
    if np.min(pivots) <= 1e-7 * math.sqrt(float(np.max(np.diag(g)))):
        return None
    b = d.T @ y
    half = np.linalg.solve(chol, b)
    shrink = params.delta2 / (1.0 + params.delta2)
    quad = total - shrink * float(half @ half)
    if not math.isfinite(quad) or quad + params.gamma0 <= 0.0:
        return None
    return DesignWorkspace(d, g, chol, quad)


def quad_form_Pk(y, w, params: SinusoidParams):
    """y^T P_k y with P_k = I - (delta2/(1+delta2)) D (D^T D)^{-1} D^T;
    k = 0 gives y^T y.  None signals a singular design."""
    ws = design_workspace(y, w, params)
    return None if ws is None else ws.quad


def _half_exponent(params: SinusoidParams) -> float:
    return 0.5 * (params.n_obs + params.v0)


def _state_log_density(y, state, params: SinusoidParams):
    """Log target without the k-prior pmf term (constant within fixed-k moves)."""
    for wl in state:
        if not 0.0 < wl < _PI:
            return -math.inf
    quad = quad_form_Pk(y, state, params)
    if quad is None:
        return -math.inf
    k = len(state)
    return (
        -_half_exponent(params) * math.log(params.gamma0 + quad)
        - k * math.log1p(params.delta2)
        - k * math.log(_PI)
    )


def target_log_density(y, state, params: SinusoidParams) -> float:
    """Unnormalized log posterior of (k, w) with amplitudes and noise
    variance integrated out, including the k prior pmf and the uniform
    density of the frequencies."""
    base = _state_log_density(y, state, params)
    if base == -math.inf:
        return base
    return base + math.log(float(prior_pmf(params)[len(state)]))


def birth_ratio(y, state, w_new: float, params: SinusoidParams) -> float:
    """Acceptance ratio of a birth adding w_new to `state`; the matching
    death accepts with min(1, 1/r) of its reversed birth.

    Prior pmf and move probabilities cancel against each other, so the
    corrected ratio is the marginal-likelihood ratio over (1 + delta2); the
    erroneous convention divides by the post-insertion component count.
    Singular designs give ratio 0.
    """
    if len(state) >= params.k_max:
        raise ValueError("birth from k_max is not a valid move")
    if not 0.0 < w_new < _PI:
        return 0.0
    q_old = quad_form_Pk(y, state, params)
    q_new = quad_form_Pk(y, state + (w_new,), params)
    if q_new is None or q_old is None:
        return 0.0
    log_r = _half_exponent(params) * (
        math.log(params.gamma0 + q_old) - math.log(params.gamma0 + q_new)
    ) - math.log1p(params.delta2)
    if params.ratio_variant == "erroneous":
        log_r -= math.log(len(state) + 1)
    return math.exp(log_r)


def spectral_weights(y, params: SinusoidParams):
    """Periodogram bin centers and probabilities for the independence move.

    The zero-padded DFT bins j = 1..n_pad/2 - 1 tile (0, pi) with width
    2 pi / n_pad; weights are the squared magnitudes.
    """
    spec = np.fft.rfft(np.asarray(y, dtype=np.float64), n=params.n_pad)
    mag2 = np.abs(spec[1 : params.n_pad // 2]) ** 2
    total = float(mag2.sum())
    if total <= 0.0:
        # flat fallback keeps the proposal proper for degenerate data
        mag2 = np.ones_like(mag2)
        total = float(mag2.sum())
    centers = (2.0 * _PI / params.n_pad) * np.arange(1, params.n_pad // 2)
    return centers, mag2 / total


_SPECTRAL_MASS = 0.9


def spectral_log_density(wl: float, probs, params: SinusoidParams) -> float:
    """Density of the independence proposal: periodogram mixture plus a
    uniform floor, so every frequency in (0, pi) stays reachable."""
    if not 0.0 < wl < _PI:
        return -math.inf
    dens = (1.0 - _SPECTRAL_MASS) / _PI
    j = int(math.floor(wl * params.n_pad / (2.0 * _PI) + 0.5))
    if 1 <= j <= params.n_pad // 2 - 1:
        dens += _SPECTRAL_MASS * float(probs[j - 1]) * params.n_pad / (2.0 * _PI)
    return math.log(dens)


def _draw_spectral(rng: RngStream, centers, probs, params: SinusoidParams) -> float:
    if rng.random() < _SPECTRAL_MASS:
        j = sample_categorical(rng, probs)
        width = 2.0 * _PI / params.n_pad
        return float(centers[j]) + (rng.random() - 0.5) * width
    return _PI * rng.random()


def lfk_step(rng: RngStream, y, state, params: SinusoidParams):
    """Random-walk update of one uniformly chosen frequency.

    Proposals outside (0, pi) are rejected before any accept draw; inside,
    plain Metropolis on the fixed-k target.
    """
    k = len(state)
    if k < 1:
        raise ValueError("lfk_step requires at least one component")
    i = rng.randint(k)
    w_new = state[i] + params.sigma_rw * rng.normal()
    if not 0.0 < w_new < _PI:
        return state
    new_state = state[:i] + (w_new,) + state[i + 1 :]
    delta = _state_log_density(y, new_state, params) - _state_log_density(y, state, params)
    if math.log(rng.unit_open()) <= delta:
        return new_state
    return state


def gfk_step(rng: RngStream, y, state, params: SinusoidParams):
    """Independence update of one frequency from the periodogram proposal.

    The acceptance uses the full proposal-density ratio, so invariance
    holds whatever the proposal's fidelity to the data's spectrum.
    """
    k = len(state)
    if k < 1:
        raise ValueError("gfk_step requires at least one component")
    i = rng.randint(k)
    centers, probs = spectral_weights(y, params)
    w_new = _draw_spectral(rng, centers, probs, params)
    new_state = state[:i] + (w_new,) + state[i + 1 :]
    delta = _state_log_density(y, new_state, params) - _state_log_density(y, state, params)
    delta += spectral_log_density(state[i], probs, params) - spectral_log_density(
        w_new, probs, params
    )
    if math.log(rng.unit_open()) <= delta:
        return new_state
    return state


def rj_step(rng: RngStream, y, state, params: SinusoidParams):
    """One random-scan move: birth / death / coin-chosen fixed-k update.

    Move probabilities come from the truncated Poisson ratios with ceiling
    0.25; at k = 0 the fixed-k branch is a no-op, at k_max birth has
    probability 0.
    """
    k = len(state)
    pmf = truncated_poisson_pmf(params.rate, params.k_max)
    birth, death = move_probabilities(pmf)
    u = rng.random()
    if u < birth[k]:
        w_new = _PI * rng.random()
        pos = rng.randint(k + 1)
        r = birth_ratio(y, state, w_new, params)
        if rng.random() < r:
            return state[:pos] + (w_new,) + state[pos:]
        return state
    if u < birth[k] + death[k]:
        pos = rng.randint(k)
        new_state = state[:pos] + state[pos + 1 :]
        r_rev = birth_ratio(y, new_state, state[pos], params)
        accept = math.inf if r_rev == 0.0 else 1.0 / r_rev
        if rng.random() < accept:
            return new_state
        return state
    if k == 0:
        return state
    if rng.random() < 0.5:
        return lfk_step(rng, y, state, params)
    return gfk_step(rng, y, state, params)


def sinusoid_model(params: SinusoidParams) -> GenerativeModel:
    """Generative model over (state, y) using params' prior variant."""
    pmf = prior_pmf(params)

    def sample_prior(rng):
        k = sample_categorical(rng, pmf)
        while True:
            state = tuple(_PI * rng.random() for _ in range(k))
            if k == 0 or design_workspace(np.zeros(params.n_obs), state, params) is not None:
                return state
            # singular design has probability zero; redraw the frequencies

    def sample_data(rng, state):
        sigma2 = sample_inverse_gamma(rng, params.v0 / 2.0, params.gamma0 / 2.0)
        sigma = math.sqrt(sigma2)
        k = len(state)
        mean = np.zeros(params.n_obs)
        if k:
            d = design_matrix(state, params.n_obs)
            chol = np.linalg.cholesky(d.T @ d)
            z = np.array([rng.normal() for _ in range(2 * k)])
            amps = math.sqrt(params.delta2) * sigma * np.linalg.solve(chol.T, z)
            mean = d @ amps
        noise = np.array([rng.normal() for _ in range(params.n_obs)])
        return mean + sigma * noise

    return GenerativeModel(
        sample_prior=sample_prior,
        sample_data=sample_data,
        space=ParamSpace(dimension=None, continuous=True, discrete=True),
        meta=params,
    )


def rj_kernel(params: SinusoidParams) -> KernelFamily:
    """The full trans-dimensional sampler as a kernel family.

    The kernel never reads params.prior_variant: its move probabilities
    always follow the truncated Poisson ratios, and which prior it is exact
    for is decided entirely by params.ratio_variant.
    """

    def step(rng, y, state):
        return rj_step(rng, y, state, params)

    return KernelFamily(
        step=step,
        declared_reversible=True,
        name=f"rj-{params.ratio_variant}",
        meta=params,
    )


def default_test_functions():
    """The number of components, compared as a discrete statistic."""
    return (
        TestFunction("k", lambda th, y: float(len(th)), value_kind="discrete"),
    )


def default_rankings():
    """Ranking by k; the tie-broken rank construction absorbs the heavy ties."""
    return (OrdinalRanking("k", lambda th, y: float(len(th))),)
