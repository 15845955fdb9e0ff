"""Independent reference implementations used to pin expected test values.

Everything here is deliberately written from textbook formulas, without
importing mcverify, so the package tests compare against a second derivation
rather than against themselves.  Keep these slow and obvious.
"""

import math


def kolmogorov_sf_oracle(lam, terms=200):
    """Q(lam) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lam^2), fixed term count."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for j in range(1, terms + 1):
        total += (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
    return min(1.0, max(0.0, 2.0 * total))


def _gamma_p_series(a, x, eps=1e-16, itmax=10000):
    # lower regularized incomplete gamma by series expansion
    ap = a
    s = 1.0 / a
    term = s
    for _ in range(itmax):
        ap += 1.0
        term *= x / ap
        s += term
        if abs(term) < abs(s) * eps:
            break
    return s * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a, x, eps=1e-16, itmax=10000):
    # upper regularized incomplete gamma by Lentz continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, itmax + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))

def gamma_q_oracle(a, x):
    """Upper regularized incomplete gamma Q(a, x), Numerical-Recipes style."""
    if x < 0.0 or a <= 0.0:
        raise ValueError("need x >= 0 and a > 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi2_sf_oracle(stat, df):
    """Chi-square survival function via the incomplete gamma oracle."""
    return gamma_q_oracle(df / 2.0, stat / 2.0)


def ks_two_sample_stat_oracle(x, y):
    """Brute-force sup |F1 - F2| over every pooled point (O(n m))."""
    d = 0.0
    for v in list(x) + list(y):
        f1 = sum(1 for t in x if t <= v) / len(x)
        f2 = sum(1 for t in y if t <= v) / len(y)
        d = max(d, abs(f1 - f2))
    return d


def ks_one_sample_uniform_stat_oracle(x):
    """Brute-force sup |F_n - t| for U(0,1), checked on a fine grid + jumps."""
    n = len(x)
    xs = sorted(x)
    d = 0.0
    for i, v in enumerate(xs):
        d = max(d, abs((i + 1) / n - v), abs(i / n - v))
    return d


def normal_cdf_oracle(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
