"""Independent reference implementations used to freeze expected values.

Everything here is deliberately written from first principles — exact
rational arithmetic for the regression/correlation oracle, explicit loops
for the convolution and percentile oracles — so the library under test
never validates itself against its own code paths.
"""

from fractions import Fraction
from itertools import permutations
import math

import numpy as np


def _frac(values):
    return [Fraction(float(v)) for v in values]


def _residuals_exact(x, c):
    """OLS residuals of x on c with intercept, solved by exact normal equations."""
    x = _frac(x)
    c = _frac(c)
    n = len(x)
    sx, sc = sum(x), sum(c)
    scc = sum(v * v for v in c)
    sxc = sum(a * b for a, b in zip(x, c))
    det = Fraction(n) * scc - sc * sc
    if det == 0:
        mean = sx / n
        return [v - mean for v in x]
    slope = (Fraction(n) * sxc - sx * sc) / det
    intercept = (sx - slope * sc) / n
    return [a - (intercept + slope * b) for a, b in zip(x, c)]


def _pearson_exact(u, v):
    """Textbook Pearson; exact rationals up to a single final square root."""
    u = [Fraction(a) for a in u]
    v = [Fraction(b) for b in v]
    n = len(u)
    mu = sum(u) / n
    mv = sum(v) / n
    du = [a - mu for a in u]
    dv = [b - mv for b in v]
    num = sum(a * b for a, b in zip(du, dv))
    vu = sum(a * a for a in du)
    vv = sum(b * b for b in dv)
    if vu == 0 or vv == 0:
        raise ZeroDivisionError("constant input")
    sign = -1.0 if num < 0 else 1.0
    ratio = (num * num) / (vu * vv)
    return sign * math.sqrt(float(ratio))


def oracle_pairwise(a, b):
    return _pearson_exact(_frac(a), _frac(b))


def oracle_partial(a, b, c):
    return _pearson_exact(_residuals_exact(a, c), _residuals_exact(b, c))


def oracle_deviation(a, b, c):
    return _pearson_exact(_residuals_exact(a, c), _frac(b))


def oracle_permutation_p(a, b, c, kind, stat_fn, tol=1e-12):
    """Exact two-sided p over all |b|! permutations of b."""
    obs = abs(stat_fn(a, b, c))
    total = 0
    extreme = 0
    for perm in permutations(range(len(b))):
        total += 1
        try:
            rho = stat_fn(a, np.asarray(b)[list(perm)], c)
        except Exception:
            extreme += 1
            continue
        if abs(rho) >= obs - tol:
            extreme += 1
    return extreme / total


def oracle_percentile(values, q):
    """Linear interpolation between closest order statistics (the default
    convention of most numerics libraries): h = (n-1)q/100."""
    xs = sorted(float(v) for v in values)
    n = len(xs)
    h = (n - 1) * q / 100.0
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


_SOBEL_1D = {-1: 1.0, 0: 2.0, 1: 1.0}
_DERIV_1D = {-1: -1.0, 0: 0.0, 1: 1.0}


def _reflect(i, n):
    """scipy-style 'reflect' boundary: (d c b a | a b c d | d c b a)."""
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        else:
            i = 2 * n - i - 1
    return i


def oracle_sobel_magnitude(image):
    """Gradient magnitude from two hand-rolled 3x3 Sobel passes."""
    image = np.asarray(image, dtype=float)
    h, w = image.shape
    gy = np.zeros((h, w))
    gx = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    pix = image[_reflect(i + di, h), _reflect(j + dj, w)]
                    gy[i, j] += _DERIV_1D[di] * _SOBEL_1D[dj] * pix
                    gx[i, j] += _SOBEL_1D[di] * _DERIV_1D[dj] * pix
    return np.hypot(gy, gx)


def oracle_rank_descending(scores):
    """Fractional ranks, 1 = largest, ties averaged; explicit O(n^2) loop."""
    scores = [float(s) for s in scores]
    ranks = []
    for s in scores:
        greater = sum(1 for t in scores if t > s)
        equal = sum(1 for t in scores if t == s)
        ranks.append(greater + (equal + 1) / 2.0)
    return np.array(ranks)
