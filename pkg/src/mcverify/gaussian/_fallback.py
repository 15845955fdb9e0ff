"""Pure-Python batch kernels for the Gaussian benchmark model.

This module is the reference implementation of the hot loops; the compiled
extension `_core` mirrors it expression for expression and the test suite
checks bit-exact agreement between the two.  Because of that contract, keep
every arithmetic expression here textually identical to its `_core`
counterpart, stick to scalar `math` calls (never numpy transcendentals,
whose vectorized code paths round differently), and route every draw through
the inlined xoshiro256++ stream below, which reproduces
`mcverify.rng.RngStream` word for word.

Replication i of a batch with base key K uses the stream tree
(K, i) -> roles {0: pivot seat, 1: ties, 2: prior, 3: data, 4: chain},
exactly as the generic engine in `mcverify.exact` does.

Bug codes: 0 none, 1 wrong expectation, 2 wrong variance, 3 truncated.
Scan codes: 0 random coordinate, 1 systematic sweep.
"""

import math
import struct

BACKEND = "python"

_MASK64 = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_SALT0 = 0x243F6A8885A308D3
_SALT1 = 0x13198A2E03707344
_SALT2 = 0xA4093822299F31D0
_SALT3 = 0x082EFA98EC4E6C89
_TRUNC_SALT = (0xD1B54A32D192ED03, 0x8CB92BA72F3D8DD7)

_TWO_PI = 6.283185307179586
_INV_2_53 = 2.0**-53

_ROLE_M = 0
_ROLE_PRIOR = 2
_ROLE_DATA = 3
_ROLE_CHAIN = 4


def _mix64(x):
    z = (x + _GOLD) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


class _Stream:
    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed, index):
        key = _mix64((seed & _MASK64) ^ _mix64(index & _MASK64))
        self.s0 = _mix64(key ^ _SALT0)
        self.s1 = _mix64(key ^ _SALT1)
        self.s2 = _mix64(key ^ _SALT2)
        self.s3 = _mix64(key ^ _SALT3)
        if self.s0 == 0 and self.s1 == 0 and self.s2 == 0 and self.s3 == 0:
            self.s0 = _GOLD

    def next_u64(self):
        s0 = self.s0
        s1 = self.s1
        s2 = self.s2
        s3 = self.s3
        x = (s0 + s3) & _MASK64
        result = (((x << 23) | (x >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self.s0 = s0
        self.s1 = s1
        self.s2 = s2
        self.s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        return result

    def random(self):
        return (self.next_u64() >> 11) * _INV_2_53

    def unit_open(self):
        return ((self.next_u64() >> 11) + 1) * _INV_2_53

    def normal(self):
        u1 = self.unit_open()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)

    def randint(self, n):
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            r = self.next_u64() & mask
            if r < n:
                return r


def _trunc_side(y, coord):
    bits = struct.unpack("=Q", struct.pack("=d", y))[0]
    return _mix64(bits ^ _TRUNC_SALT[coord]) & 1


def _update_coord(chain, y, th, coord, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd, bug):
    other = th[1 - coord]
    if bug == 1:
        mean = cond_var * ((y + other) / se2_a + (mu_a + rho_a * (other - mu_a)) / pvar_a)
    else:
        mean = cond_var * ((y - other) / se2_a + (mu_a + rho_a * (other - mu_a)) / pvar_a)
    z = chain.normal()
    if bug == 3:
        if _trunc_side(y, coord):
            th[coord] = mean + samp_sd * math.fabs(z)
        else:
            th[coord] = mean - samp_sd * math.fabs(z)
    else:
        th[coord] = mean + samp_sd * z


def _kernel_step(chain, y, th, scan, bug, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd):
    if scan == 0:
        coord = chain.next_u64() & 1  # randint(2): mask 1, never rejects
        _update_coord(chain, y, th, coord, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd, bug)
    else:
        _update_coord(chain, y, th, 0, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd, bug)
        _update_coord(chain, y, th, 1, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd, bug)


def _derived(mu_a, sigma_a, rho_a, se2_a, bug):
    pvar_a = (sigma_a * sigma_a) * (1.0 - rho_a * rho_a)
    cond_var = 1.0 / (1.0 / se2_a + 1.0 / pvar_a)
    if bug == 2:
        samp_sd = math.sqrt(math.sqrt(cond_var))
    else:
        samp_sd = math.sqrt(cond_var)
    return pvar_a, cond_var, samp_sd


def two_sample_fitted_chunk(
    key, start, end, L, gibbs, mu_g, sigma_g, rho_g, se2_g,
    mu_a, sigma_a, rho_a, se2_a, bug, scan, out,
):
    """Chain replications [start, end): exact joint start, L kernel steps."""
    sig_term_g = math.sqrt(1.0 - rho_g * rho_g)
    eps_sd_g = math.sqrt(se2_g)
    pvar_a, cond_var, samp_sd = _derived(mu_a, sigma_a, rho_a, se2_a, bug)
    th = [0.0, 0.0]
    for i in range(start, end):
        rep_key = _mix64(key ^ _mix64(i))
        prior = _Stream(rep_key, _ROLE_PRIOR)
        data = _Stream(rep_key, _ROLE_DATA)
        chain = _Stream(rep_key, _ROLE_CHAIN)
        z1 = prior.normal()
        z2 = prior.normal()
        th[0] = mu_g + sigma_g * z1
        th[1] = mu_g + sigma_g * (rho_g * z1 + sig_term_g * z2)
        y = th[0] + th[1] + eps_sd_g * data.normal()
        for _ in range(L):
            _kernel_step(chain, y, th, scan, bug, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd)
            if gibbs:
                y = th[0] + th[1] + eps_sd_g * chain.normal()
        out[i, 0] = th[0]
        out[i, 1] = th[1]
        out[i, 2] = y


def two_sample_direct_chunk(key, start, end, mu_g, sigma_g, rho_g, se2_g, out):
    """Direct joint draws [start, end)."""
    sig_term_g = math.sqrt(1.0 - rho_g * rho_g)
    eps_sd_g = math.sqrt(se2_g)
    for i in range(start, end):
        rep_key = _mix64(key ^ _mix64(i))
        prior = _Stream(rep_key, _ROLE_PRIOR)
        data = _Stream(rep_key, _ROLE_DATA)
        z1 = prior.normal()
        z2 = prior.normal()
        th1 = mu_g + sigma_g * z1
        th2 = mu_g + sigma_g * (rho_g * z1 + sig_term_g * z2)
        y = th1 + th2 + eps_sd_g * data.normal()
        out[i, 0] = th1
        out[i, 1] = th2
        out[i, 2] = y


def rank_chunk(
    key, start, end, L, thinning, joint_prob, mu_g, sigma_g, rho_g, se2_g,
    mu_a, sigma_a, rho_a, se2_a, bug, scan, out_states, out_m,
):
    """Rank-test replications [start, end): pivot at an exact joint draw,
    backward then forward evolution via the forward kernel."""
    sig_term_g = math.sqrt(1.0 - rho_g * rho_g)
    eps_sd_g = math.sqrt(se2_g)
    pvar_a, cond_var, samp_sd = _derived(mu_a, sigma_a, rho_a, se2_a, bug)
    cur = [0.0, 0.0]
    for i in range(start, end):
        rep_key = _mix64(key ^ _mix64(i))
        m = 1 + _Stream(rep_key, _ROLE_M).randint(L)
        prior = _Stream(rep_key, _ROLE_PRIOR)
        data = _Stream(rep_key, _ROLE_DATA)
        z1 = prior.normal()
        z2 = prior.normal()
        th1 = mu_g + sigma_g * z1
        th2 = mu_g + sigma_g * (rho_g * z1 + sig_term_g * z2)
        y0 = th1 + th2 + eps_sd_g * data.normal()
        out_m[i] = m
        out_states[i, m - 1, 0] = th1
        out_states[i, m - 1, 1] = th2
        out_states[i, m - 1, 2] = y0
        chain = _Stream(rep_key, _ROLE_CHAIN)
        cur[0] = th1
        cur[1] = th2
        y = y0
        for pos in range(m - 1, 0, -1):
            for _ in range(thinning):
                if joint_prob > 0.0 and chain.random() < joint_prob:
                    y = cur[0] + cur[1] + eps_sd_g * chain.normal()
                else:
                    _kernel_step(chain, y, cur, scan, bug, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd)
            out_states[i, pos - 1, 0] = cur[0]
            out_states[i, pos - 1, 1] = cur[1]
            out_states[i, pos - 1, 2] = y
        cur[0] = th1
        cur[1] = th2
        y = y0
        for pos in range(m + 1, L + 1):
            for _ in range(thinning):
                if joint_prob > 0.0 and chain.random() < joint_prob:
                    y = cur[0] + cur[1] + eps_sd_g * chain.normal()
                else:
                    _kernel_step(chain, y, cur, scan, bug, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd)
            out_states[i, pos - 1, 0] = cur[0]
            out_states[i, pos - 1, 1] = cur[1]
            out_states[i, pos - 1, 2] = y


def fill_normals(seed, index, n, loc, scale, out):
    """n sequential N(loc, scale^2) draws from stream (seed, index)."""
    st = _Stream(seed, index)
    for i in range(n):
        out[i] = loc + scale * st.normal()


def stream_doubles(seed, index, n, out):
    """n sequential U[0,1) doubles from stream (seed, index); self-test hook."""
    st = _Stream(seed, index)
    for i in range(n):
        out[i] = st.random()
