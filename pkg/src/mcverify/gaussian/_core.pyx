# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels for the Gaussian benchmark model.

Expression-for-expression mirror of `_fallback`; see that module's docstring
for the stream-tree and bit-identity contract.  Any change here must be made
in `_fallback` as well, and vice versa -- the test suite diffs their outputs
bitwise.  The extension is compiled with FP contraction off so `a + b * c`
rounds the same way CPython rounds it.
"""

from libc.math cimport cos, fabs, log, sqrt
from libc.stdint cimport int64_t, uint64_t
from libc.string cimport memcpy

BACKEND = "c"

cdef uint64_t GOLD = <uint64_t>0x9E3779B97F4A7C15
cdef uint64_t SALT0 = <uint64_t>0x243F6A8885A308D3
cdef uint64_t SALT1 = <uint64_t>0x13198A2E03707344
cdef uint64_t SALT2 = <uint64_t>0xA4093822299F31D0
cdef uint64_t SALT3 = <uint64_t>0x082EFA98EC4E6C89
cdef uint64_t TRUNC_SALT0 = <uint64_t>0xD1B54A32D192ED03
cdef uint64_t TRUNC_SALT1 = <uint64_t>0x8CB92BA72F3D8DD7

cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0

DEF ROLE_M = 0
DEF ROLE_PRIOR = 2
DEF ROLE_DATA = 3
DEF ROLE_CHAIN = 4


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + GOLD
    z ^= z >> 30
    z = z * <uint64_t>0xBF58476D1CE4E5B9
    z ^= z >> 27
    z = z * <uint64_t>0x94D049BB133111EB
    z ^= z >> 31
    return z


cdef struct Xo:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline void stream_init(Xo* st, uint64_t seed, uint64_t index) noexcept nogil:
    cdef uint64_t key = mix64(seed ^ mix64(index))
    st.s0 = mix64(key ^ SALT0)
    st.s1 = mix64(key ^ SALT1)
    st.s2 = mix64(key ^ SALT2)
    st.s3 = mix64(key ^ SALT3)
    if st.s0 == 0 and st.s1 == 0 and st.s2 == 0 and st.s3 == 0:
        st.s0 = GOLD


cdef inline uint64_t rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t next_u64(Xo* st) noexcept nogil:
    cdef uint64_t x = st.s0 + st.s3
    cdef uint64_t result = rotl(x, 23) + st.s0
    cdef uint64_t t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = rotl(st.s3, 45)
    return result


cdef inline double rng_random(Xo* st) noexcept nogil:
    return (next_u64(st) >> 11) * INV_2_53


cdef inline double rng_unit_open(Xo* st) noexcept nogil:
    return ((next_u64(st) >> 11) + 1) * INV_2_53


cdef inline double rng_normal(Xo* st) noexcept nogil:
    cdef double u1 = rng_unit_open(st)
    cdef double u2 = rng_random(st)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef inline uint64_t rng_randint(Xo* st, uint64_t n) noexcept nogil:
    cdef uint64_t m = n - 1
    cdef int bits = 0
    cdef uint64_t mask
    cdef uint64_t r
    while m > 0:
        m >>= 1
        bits += 1
    mask = (<uint64_t>1 << bits) - 1
    while True:
        r = next_u64(st) & mask
        if r < n:
            return r


cdef inline int trunc_side(double y, int coord) noexcept nogil:
    cdef uint64_t bits
    memcpy(&bits, &y, 8)
    if coord == 0:
        return <int>(mix64(bits ^ TRUNC_SALT0) & 1)
    return <int>(mix64(bits ^ TRUNC_SALT1) & 1)


cdef inline void update_coord(
    Xo* chain, double y, double* th, int coord,
    double mu_a, double pvar_a, double se2_a, double rho_a,
    double cond_var, double samp_sd, int bug,
) noexcept nogil:
    cdef double other = th[1 - coord]
    cdef double mean
    cdef double z
    if bug == 1:
        mean = cond_var * ((y + other) / se2_a + (mu_a + rho_a * (other - mu_a)) / pvar_a)
    else:
        mean = cond_var * ((y - other) / se2_a + (mu_a + rho_a * (other - mu_a)) / pvar_a)
    z = rng_normal(chain)
    if bug == 3:
        if trunc_side(y, coord):
            th[coord] = mean + samp_sd * fabs(z)
        else:
            th[coord] = mean - samp_sd * fabs(z)
    else:
        th[coord] = mean + samp_sd * z


cdef inline void kernel_step(
    Xo* chain, double y, double* th, int scan, int bug,
    double mu_a, double pvar_a, double se2_a, double rho_a,
    double cond_var, double samp_sd,
) noexcept nogil:
    cdef int coord
    if scan == 0:
        coord = <int>(next_u64(chain) & 1)  # randint(2): mask 1, never rejects
        update_coord(chain, y, th, coord, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd, bug)
    else:
        update_coord(chain, y, th, 0, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd, bug)
        update_coord(chain, y, th, 1, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd, bug)


def two_sample_fitted_chunk(
    uint64_t key, int64_t start, int64_t end, int64_t L, bint gibbs,
    double mu_g, double sigma_g, double rho_g, double se2_g,
    double mu_a, double sigma_a, double rho_a, double se2_a,
    int bug, int scan, double[:, ::1] out,
):
    """Chain replications [start, end): exact joint start, L kernel steps."""
    cdef double sig_term_g = sqrt(1.0 - rho_g * rho_g)
    cdef double eps_sd_g = sqrt(se2_g)
    cdef double pvar_a = (sigma_a * sigma_a) * (1.0 - rho_a * rho_a)
    cdef double cond_var = 1.0 / (1.0 / se2_a + 1.0 / pvar_a)
    cdef double samp_sd
    cdef double th[2]
    cdef double y, z1, z2
    cdef uint64_t rep_key
    cdef Xo prior, data, chain
    cdef int64_t i, l
    if bug == 2:
        samp_sd = sqrt(sqrt(cond_var))
    else:
        samp_sd = sqrt(cond_var)
    with nogil:
        for i in range(start, end):
            rep_key = mix64(key ^ mix64(<uint64_t>i))
            stream_init(&prior, rep_key, ROLE_PRIOR)
            stream_init(&data, rep_key, ROLE_DATA)
            stream_init(&chain, rep_key, ROLE_CHAIN)
            z1 = rng_normal(&prior)
            z2 = rng_normal(&prior)
            th[0] = mu_g + sigma_g * z1
            th[1] = mu_g + sigma_g * (rho_g * z1 + sig_term_g * z2)
            y = th[0] + th[1] + eps_sd_g * rng_normal(&data)
            for l in range(L):
                kernel_step(&chain, y, th, scan, bug, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd)
                if gibbs:
                    y = th[0] + th[1] + eps_sd_g * rng_normal(&chain)
            out[i, 0] = th[0]
            out[i, 1] = th[1]
            out[i, 2] = y


def two_sample_direct_chunk(
    uint64_t key, int64_t start, int64_t end,
    double mu_g, double sigma_g, double rho_g, double se2_g,
    double[:, ::1] out,
):
    """Direct joint draws [start, end)."""
    cdef double sig_term_g = sqrt(1.0 - rho_g * rho_g)
    cdef double eps_sd_g = sqrt(se2_g)
    cdef double th1, th2, y, z1, z2
    cdef uint64_t rep_key
    cdef Xo prior, data
    cdef int64_t i
    with nogil:
        for i in range(start, end):
            rep_key = mix64(key ^ mix64(<uint64_t>i))
            stream_init(&prior, rep_key, ROLE_PRIOR)
            stream_init(&data, rep_key, ROLE_DATA)
            z1 = rng_normal(&prior)
            z2 = rng_normal(&prior)
            th1 = mu_g + sigma_g * z1
            th2 = mu_g + sigma_g * (rho_g * z1 + sig_term_g * z2)
            y = th1 + th2 + eps_sd_g * rng_normal(&data)
            out[i, 0] = th1
            out[i, 1] = th2
            out[i, 2] = y


def rank_chunk(
    uint64_t key, int64_t start, int64_t end, int64_t L, int64_t thinning,
    double joint_prob,
    double mu_g, double sigma_g, double rho_g, double se2_g,
    double mu_a, double sigma_a, double rho_a, double se2_a,
    int bug, int scan, double[:, :, ::1] out_states, int64_t[::1] out_m,
):
    """Rank-test replications [start, end): pivot at an exact joint draw,
    backward then forward evolution via the forward kernel."""
    cdef double sig_term_g = sqrt(1.0 - rho_g * rho_g)
    cdef double eps_sd_g = sqrt(se2_g)
    cdef double pvar_a = (sigma_a * sigma_a) * (1.0 - rho_a * rho_a)
    cdef double cond_var = 1.0 / (1.0 / se2_a + 1.0 / pvar_a)
    cdef double samp_sd
    cdef double cur[2]
    cdef double th1, th2, y0, y, z1, z2
    cdef uint64_t rep_key
    cdef int64_t i, m, pos, t
    cdef Xo mstream, prior, data, chain
    if bug == 2:
        samp_sd = sqrt(sqrt(cond_var))
    else:
        samp_sd = sqrt(cond_var)
    with nogil:
        for i in range(start, end):
            rep_key = mix64(key ^ mix64(<uint64_t>i))
            stream_init(&mstream, rep_key, ROLE_M)
            m = 1 + <int64_t>rng_randint(&mstream, <uint64_t>L)
            stream_init(&prior, rep_key, ROLE_PRIOR)
            stream_init(&data, rep_key, ROLE_DATA)
            z1 = rng_normal(&prior)
            z2 = rng_normal(&prior)
            th1 = mu_g + sigma_g * z1
            th2 = mu_g + sigma_g * (rho_g * z1 + sig_term_g * z2)
            y0 = th1 + th2 + eps_sd_g * rng_normal(&data)
            out_m[i] = m
            out_states[i, m - 1, 0] = th1
            out_states[i, m - 1, 1] = th2
            out_states[i, m - 1, 2] = y0
            stream_init(&chain, rep_key, ROLE_CHAIN)
            cur[0] = th1
            cur[1] = th2
            y = y0
            for pos in range(m - 1, 0, -1):
                for t in range(thinning):
                    if joint_prob > 0.0 and rng_random(&chain) < joint_prob:
                        y = cur[0] + cur[1] + eps_sd_g * rng_normal(&chain)
                    else:
                        kernel_step(&chain, y, cur, scan, bug, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd)
                out_states[i, pos - 1, 0] = cur[0]
                out_states[i, pos - 1, 1] = cur[1]
                out_states[i, pos - 1, 2] = y
            cur[0] = th1
            cur[1] = th2
            y = y0
            for pos in range(m + 1, L + 1):
                for t in range(thinning):
                    if joint_prob > 0.0 and rng_random(&chain) < joint_prob:
                        y = cur[0] + cur[1] + eps_sd_g * rng_normal(&chain)
                    else:
                        kernel_step(&chain, y, cur, scan, bug, mu_a, pvar_a, se2_a, rho_a, cond_var, samp_sd)
                out_states[i, pos - 1, 0] = cur[0]
                out_states[i, pos - 1, 1] = cur[1]
                out_states[i, pos - 1, 2] = y


def fill_normals(
    uint64_t seed, uint64_t index, int64_t n, double loc, double scale,
    double[::1] out,
):
    """n sequential N(loc, scale^2) draws from stream (seed, index)."""
    cdef Xo st
    cdef int64_t i
    stream_init(&st, seed, index)
    with nogil:
        for i in range(n):
            out[i] = loc + scale * rng_normal(&st)


def stream_doubles(uint64_t seed, uint64_t index, int64_t n, double[::1] out):
    """n sequential U[0,1) doubles from stream (seed, index); self-test hook."""
    cdef Xo st
    cdef int64_t i
    stream_init(&st, seed, index)
    with nogil:
        for i in range(n):
            out[i] = rng_random(&st)
