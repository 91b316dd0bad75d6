"""Slow, independent reference computations used to check the package."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def normal_equations(X, y) -> list[Fraction]:
    """Solve X'X b = X'y exactly over the rationals (Gauss-Jordan)."""
    Xf = [[Fraction(float(v)) for v in row] for row in np.asarray(X)]
    yf = [Fraction(float(v)) for v in np.asarray(y)]
    k = len(Xf[0])
    A = [[sum(r[i] * r[j] for r in Xf) for j in range(k)] for i in range(k)]
    b = [sum(r[i] * yi for r, yi in zip(Xf, yf)) for i in range(k)]
    M = [A[i] + [b[i]] for i in range(k)]
    for c in range(k):
        piv = next(r for r in range(c, k) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        M[c] = [v / M[c][c] for v in M[c]]
        for r in range(k):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * bb for a, bb in zip(M[r], M[c])]
    return [M[i][k] for i in range(k)]


def r_squared_exact(X, y) -> Fraction:
    beta = normal_equations(X, y)
    yf = [Fraction(float(v)) for v in np.asarray(y)]
    fitted = [sum(Fraction(float(v)) * b for v, b in zip(row, beta)) for row in np.asarray(X)]
    ybar = sum(yf) / len(yf)
    ssr = sum((a - f) ** 2 for a, f in zip(yf, fitted))
    sst = sum((a - ybar) ** 2 for a in yf)
    return 1 - ssr / sst


def logistic_loglik(beta, X, y) -> float:
    eta = np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    return float(np.sum(np.asarray(y) * eta - np.logaddexp(0.0, eta)))


def grid_search_mle(X, y, lo=-10.0, hi=10.0, points=41, rounds=14) -> np.ndarray:
    """Coarse-to-fine grid search of the logistic likelihood.

    Each round evaluates a full product grid around the current best point,
    then shrinks the window to two grid steps either side.
    """
    X = np.asarray(X, dtype=float)
    k = X.shape[1]
    centre = np.zeros(k)
    half = np.full(k, (hi - lo) / 2)
    centre[:] = (hi + lo) / 2
    for _ in range(rounds):
        axes = [np.linspace(c - h, c + h, points) for c, h in zip(centre, half)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        eta = mesh @ X.T
        ll = (eta * np.asarray(y)[None, :] - np.logaddexp(0.0, eta)).sum(axis=1)
        centre = mesh[int(np.argmax(ll))]
        half = 2 * half * 2 / (points - 1)
    return centre


def hypergeom_prob(a: int, b: int, c: int, d: int) -> Fraction:
    """Probability of the 2x2 table [[a, b], [c, d]] given its margins, from factorials."""
    f = math.factorial
    n = a + b + c + d
    num = f(a + b) * f(c + d) * f(a + c) * f(b + d)
    den = f(n) * f(a) * f(b) * f(c) * f(d)
    return Fraction(num, den)


def fisher_enumerate(table) -> Fraction:
    """Two-sided Fisher p: sum of probabilities of all tables no more likely than the observed one."""
    (a, b), (c, d) = table
    r1, c1, n = a + b, a + c, a + b + c + d
    observed = hypergeom_prob(a, b, c, d)
    total = Fraction(0)
    for x in range(max(0, r1 + c1 - n), min(r1, c1) + 1):
        p = hypergeom_prob(x, r1 - x, c1 - x, n - r1 - c1 + x)
        if p <= observed:
            total += p
    return total


def majority_map_rate(a, b) -> float:
    """Row-weighted accuracy of predicting b from the most common b within each a value."""
    counts: dict = {}
    for x, y in zip(a, b):
        counts.setdefault(x, {}).setdefault(y, 0)
        counts[x][y] += 1
    return sum(max(c.values()) for c in counts.values()) / len(a)


def pearson_exact(x, y) -> float:
    xf = [Fraction(v) for v in x]
    yf = [Fraction(v) for v in y]
    n = len(xf)
    mx, my = sum(xf) / n, sum(yf) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(xf, yf))
    sxx = sum((a - mx) ** 2 for a in xf)
    syy = sum((b - my) ** 2 for b in yf)
    return float(sxy) / math.sqrt(float(sxx * syy))


def chi_square_exact(table) -> Fraction:
    t = [[Fraction(v) for v in row] for row in table]
    n = sum(sum(r) for r in t)
    rows = [sum(r) for r in t]
    cols = [sum(col) for col in zip(*t)]
    return sum((t[i][j] - rows[i] * cols[j] / n) ** 2 / (rows[i] * cols[j] / n) for i in range(len(t)) for j in range(len(t[0])))


def eta_exact(groups, y) -> float:
    yf = [Fraction(v) for v in y]
    mean = sum(yf) / len(yf)
    sst = sum((v - mean) ** 2 for v in yf)
    ssb = Fraction(0)
    for g in set(groups):
        vals = [v for gg, v in zip(groups, yf) if gg == g]
        m = sum(vals) / len(vals)
        ssb += len(vals) * (m - mean) ** 2
    return math.sqrt(float(ssb / sst))


def welch_t_exact(x, y) -> float:
    xf, yf = [Fraction(v) for v in x], [Fraction(v) for v in y]
    mx, my = sum(xf) / len(xf), sum(yf) / len(yf)
    vx = sum((v - mx) ** 2 for v in xf) / (len(xf) - 1)
    vy = sum((v - my) ** 2 for v in yf) / (len(yf) - 1)
    return float(mx - my) / math.sqrt(float(vx / len(xf) + vy / len(yf)))
