"""Deterministic, splittable random streams.

Every random draw in this package flows through :class:`RngStream`: a
xoshiro256++ generator whose 256-bit state is derived from a ``(seed, index)``
pair by a splitmix64-style finalizer.  Streams form a tree -- ``substream(j)``
derives an independent child from the parent's 64-bit identity key -- so a
replication driver can hand each replication its own stream and results stay
identical under any execution order or worker count.

The derivation below is a package contract, not an implementation detail: the
compiled kernels in ``mcverify.gaussian._core`` re-implement it verbatim and
the test suite checks bit-exact agreement between the two.

Derivation, in full:

* ``mix64(x)`` is the splitmix64 output finalizer applied to ``x + GOLD``
  where ``GOLD = 0x9E3779B97F4A7C15``.
* key of ``(seed, index)``: ``mix64(seed ^ mix64(index))``.
* state words: ``s_i = mix64(key ^ SALT_i)`` with the four SALT constants
  below; if all four come out zero (never observed; the guard exists because
  the all-zero state is xoshiro's fixed point) ``s_0`` is set to ``GOLD``.
* ``substream(j)`` applies the same derivation to ``(key, j)``.

Doubles use the top 53 bits of one 64-bit output.  Normals use Box-Muller
with exactly two uniforms per call and no caching, so consumption stays
predictable across back ends.
"""

from __future__ import annotations

import math

__all__ = [
    "GOLD",
    "RngStream",
    "derive_substream",
    "mix64",
    "sample_categorical",
    "sample_gamma",
    "sample_inverse_gamma",
    "sample_normal",
    "sample_truncated_poisson",
]

_MASK64 = (1 << 64) - 1

GOLD = 0x9E3779B97F4A7C15

# fractional hex digits of pi; any fixed nothing-up-my-sleeve constants do
_SALT0 = 0x243F6A8885A308D3
_SALT1 = 0x13198A2E03707344
_SALT2 = 0xA4093822299F31D0
_SALT3 = 0x082EFA98EC4E6C89

_TWO_PI = 6.283185307179586
_INV_2_53 = 2.0 ** -53


def mix64(x: int) -> int:
    """splitmix64 finalizer of ``x + GOLD``; a bijection on 64-bit words."""
    z = (x + GOLD) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def _stream_key(seed: int, index: int) -> int:
    return mix64((seed & _MASK64) ^ mix64(index & _MASK64))


class RngStream:
    """One node of the deterministic stream tree.

    Parameters
    ----------
    seed : int
        Parent identity (a user seed at the root, a parent key internally).
    index : int
        Position of this stream under the parent.
    """

    __slots__ = ("key", "_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int, index: int = 0):
        key = _stream_key(seed, index)
        self.key = key
        self._s0 = mix64(key ^ _SALT0)
        self._s1 = mix64(key ^ _SALT1)
        self._s2 = mix64(key ^ _SALT2)
        self._s3 = mix64(key ^ _SALT3)
        if self._s0 == 0 and self._s1 == 0 and self._s2 == 0 and self._s3 == 0:
            self._s0 = GOLD

    def __repr__(self) -> str:
        return f"RngStream(key=0x{self.key:016x})"

    def substream(self, index: int) -> "RngStream":
        """Independent child stream; deterministic in (self.key, index)."""
        return RngStream(self.key, index)

    def next_u64(self) -> int:
        """Next raw 64-bit word (xoshiro256++)."""
        s0 = self._s0
        s1 = self._s1
        s2 = self._s2
        s3 = self._s3
        x = (s0 + s3) & _MASK64
        result = (((x << 23) | (x >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self._s0 = s0
        self._s1 = s1
        self._s2 = s2
        self._s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        return result

    def random(self) -> float:
        """Uniform double in [0, 1), 53-bit resolution."""
        return (self.next_u64() >> 11) * _INV_2_53

    def unit_open(self) -> float:
        """Uniform double in (0, 1]; safe as a log() argument."""
        return ((self.next_u64() >> 11) + 1) * _INV_2_53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def normal(self, mean: float = 0.0, sd: float = 1.0) -> float:
        """Box-Muller normal.  Exactly two uniforms, no caching."""
        u1 = self.unit_open()
        u2 = self.random()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
        return mean + sd * z

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by bitmask rejection (unbiased)."""
        if n <= 0:
            raise ValueError(f"randint needs n >= 1, got {n}")
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            r = self.next_u64() & mask
            if r < n:
                return r

    def permutation(self, n: int) -> list:
        """Fisher-Yates shuffle of range(n)."""
        if n < 0:
            raise ValueError(f"permutation needs n >= 0, got {n}")
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def derive_substream(master: RngStream | int, index: int) -> RngStream:
    """Child stream of `master` (an RngStream or a raw seed) at `index`."""
    if isinstance(master, RngStream):
        return master.substream(index)
    return RngStream(master, index)


def sample_normal(rng: RngStream, mean: float, sd: float) -> float:
    if not sd > 0.0:
        raise ValueError(f"sd must be positive, got {sd}")
    return rng.normal(mean, sd)


def _standard_gamma(rng: RngStream, shape: float) -> float:
    # Marsaglia-Tsang squeeze; shape < 1 boosted through G(a) = G(a+1) U^(1/a)
    if shape < 1.0:
        u = rng.unit_open()
        return _standard_gamma(rng, shape + 1.0) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.unit_open()
        if u < 1.0 - 0.0331 * (x * x) * (x * x):
            return d * v
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def sample_gamma(rng: RngStream, shape: float, scale: float) -> float:
    if not shape > 0.0 or not scale > 0.0:
        raise ValueError(f"gamma needs shape > 0 and scale > 0, got {shape}, {scale}")
    return scale * _standard_gamma(rng, shape)


def sample_inverse_gamma(rng: RngStream, shape: float, scale: float) -> float:
    """Inverse-gamma draw: scale / Gamma(shape, 1).  Mean scale/(shape-1)."""
    if not shape > 0.0 or not scale > 0.0:
        raise ValueError(
            f"inverse gamma needs shape > 0 and scale > 0, got {shape}, {scale}"
        )
    return scale / _standard_gamma(rng, shape)


def sample_categorical(rng: RngStream, weights) -> int:
    """Index draw proportional to `weights` (nonnegative, positive sum)."""
    total = 0.0
    for w in weights:
        if w < 0.0 or not math.isfinite(w):
            raise ValueError(f"weights must be finite and nonnegative, got {w}")
        total += w
    if not total > 0.0:
        raise ValueError("weights must have a positive sum")
    u = rng.random() * total
    acc = 0.0
    last = 0
    for i, w in enumerate(weights):
        acc += w
        last = i
        if u < acc:
            return i
    return last  # u == total can slip past on rounding


def sample_truncated_poisson(rng: RngStream, rate: float, k_max: int) -> int:
    """Poisson(rate) conditioned on {0, ..., k_max}."""
    if not rate > 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    log_rate = math.log(rate)
    logs = [k * log_rate - math.lgamma(k + 1.0) for k in range(k_max + 1)]
    top = max(logs)
    weights = [math.exp(v - top) for v in logs]
    return sample_categorical(rng, weights)
