"""Brute-force reference computations, independent of the package's vectorized paths."""

import math

import numpy as np


def ecdf_count(values, t):
    return sum(1 for v in values if v <= t) / len(values)


def quantile_bruteforce(values, p):
    """inf{t in sample : ecdf(t) >= p}, scanning sorted values."""
    for t in sorted(values):
        if ecdf_count(values, t) >= p:
            return t
    raise AssertionError("unreachable for p <= 1")


def nw_loop(x0, xs, ys, g):
    """Gaussian Nadaraya-Watson mean by explicit summation."""
    w = [math.exp(-0.5 * ((x0 - xi) / g) ** 2) for xi in xs]
    s = sum(w)
    return sum(wi * yi for wi, yi in zip(w, ys)) / s


def aroc_double_loop(z_f, eps_g, grid):
    """(1/n_F) sum_i I(#{j : eps_j <= z_i} / n_G > 1 - p), with explicit loops."""
    n_f, n_g = len(z_f), len(eps_g)
    out = []
    for p in grid:
        hits = 0
        for z in z_f:
            count = 0
            for e in eps_g:
                if e <= z:
                    count += 1
            if count / n_g > 1.0 - p:
                hits += 1
        out.append(hits / n_f)
    return np.array(out)


def mann_whitney(y_f, y_g):
    """(1/(n_F n_G)) sum_ij I(Y_F_i > Y_G_j)."""
    return sum(1 for a in y_f for b in y_g if a > b) / (len(y_f) * len(y_g))


def binormal_roc(p, mu_f, sd_f, mu_g, sd_g):
    from scipy.stats import norm

    return 1.0 - norm.cdf((mu_g + sd_g * norm.ppf(1.0 - p) - mu_f) / sd_f)


def loo_cv_loop(xs, ys, g):
    """Leave-one-out CV score of the Gaussian NW mean by explicit loops."""
    n = len(xs)
    total = 0.0
    for i in range(n):
        others_x = [xs[j] for j in range(n) if j != i]
        others_y = [ys[j] for j in range(n) if j != i]
        total += (ys[i] - nw_loop(xs[i], others_x, others_y, g)) ** 2
    return total / n


def ks_from_uniform(sample):
    """sup_t |F_n(t) - t| for a sample in [0, 1] (ties allowed)."""
    s = np.sort(np.asarray(sample))
    n = s.size
    upper = np.arange(1, n + 1) / n - s
    lower = s - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))
