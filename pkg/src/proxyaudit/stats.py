"""Association and adverse-impact statistics.

The association measure is picked by variable kind: Pearson for two continuous
columns, Cramér's V for two categorical/binary columns, the correlation ratio
(eta, with a one-way ANOVA) when one side is continuous and the other is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .data import Dataset
from .errors import StatsError


@dataclass(frozen=True)
class AssociationResult:
    measure: str  # pearson | cramers_v | correlation_ratio
    value: float
    test: str  # t | chi_square | anova | fisher_exact | none
    statistic: float
    p_value: float
    n: int
    df: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "value": self.value,
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "df": list(self.df),
        }


@dataclass(frozen=True)
class ContingencyTable:
    row_labels: tuple
    col_labels: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] < 2 or counts.shape[1] < 2:
            raise StatsError(f"contingency table must be at least 2x2, got shape {counts.shape}")
        if (counts < 0).any():
            raise StatsError("contingency counts must be non-negative")
        if counts.shape != (len(self.row_labels), len(self.col_labels)):
            raise StatsError("label lengths do not match table shape")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_counts(cls, counts) -> "ContingencyTable":
        counts = np.asarray(counts)
        return cls(tuple(range(counts.shape[0])), tuple(range(counts.shape[1])), counts)

    @classmethod
    def crosstab(cls, a: Sequence, b: Sequence) -> "ContingencyTable":
        """Cross-tabulate two label series over their observed levels."""
        a = np.asarray(a)
        b = np.asarray(b)
        if len(a) != len(b):
            raise StatsError("series lengths differ")
        ra, ia = np.unique(a, return_inverse=True)
        rb, ib = np.unique(b, return_inverse=True)
        if len(ra) < 2 or len(rb) < 2:
            raise StatsError("degenerate table: a series has a single observed level")
        counts = np.zeros((len(ra), len(rb)), dtype=np.int64)
        np.add.at(counts, (ia, ib), 1)
        return cls(tuple(ra.tolist()), tuple(rb.tolist()), counts)


def _as_float(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise StatsError(f"{name} must be one-dimensional")
    return arr


def pearson_r(x, y) -> AssociationResult:
    x = _as_float(x, "x")
    y = _as_float(y, "y")
    if len(x) != len(y):
        raise StatsError("series lengths differ")
    n = len(x)
    if n < 3:
        raise StatsError("pearson_r needs at least 3 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("undefined correlation: constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = min(1.0, max(-1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        t, p = math.copysign(math.inf, r), 0.0
    else:
        t = r * math.sqrt(df / (1.0 - r * r))
        p = float(2.0 * sps.t.sf(abs(t), df))
    return AssociationResult("pearson", r, "t", t, p, n, (df,))


def chi_square(t: ContingencyTable) -> tuple[float, float, int]:
    """Pearson chi-square without continuity correction: (statistic, p, df)."""
    obs = t.counts.astype(float)
    rows = obs.sum(axis=1)
    cols = obs.sum(axis=0)
    if t.total < 1:
        raise StatsError("empty contingency table")
    if (rows == 0).any() or (cols == 0).any():
        raise StatsError("degenerate table: a row or column marginal is zero")
    expected = np.outer(rows, cols) / t.total
    chi2 = float(((obs - expected) ** 2 / expected).sum())
    df = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    return chi2, float(sps.chi2.sf(chi2, df)), df


def cramers_v(t: ContingencyTable) -> AssociationResult:
    chi2, p, df = chi_square(t)
    k = min(t.counts.shape) - 1
    v = math.sqrt(chi2 / (t.total * k))
    return AssociationResult("cramers_v", min(v, 1.0), "chi_square", chi2, p, t.total, (df,))


def correlation_ratio(groups, y) -> AssociationResult:
    """Eta: sqrt(between-group SS / total SS), tested with a one-way ANOVA F."""
    groups = np.asarray(groups)
    y = _as_float(y, "y")
    if len(groups) != len(y):
        raise StatsError("series lengths differ")
    levels, inv = np.unique(groups, return_inverse=True)
    k = len(levels)
    if k < 2:
        raise StatsError("correlation_ratio needs at least 2 groups")
    n = len(y)
    mean = y.mean()
    sst = float(((y - mean) ** 2).sum())
    if sst == 0.0:
        raise StatsError("constant y: correlation ratio undefined")
    sizes = np.bincount(inv, minlength=k).astype(float)
    means = np.bincount(inv, weights=y, minlength=k) / sizes
    ssb = float((sizes * (means - mean) ** 2).sum())
    ssw = max(sst - ssb, 0.0)
    eta = math.sqrt(min(ssb / sst, 1.0))
    df1, df2 = k - 1, n - k
    if df2 <= 0:
        f, p = math.nan, math.nan
    elif ssw == 0.0:
        f, p = math.inf, 0.0
    else:
        f = (ssb / df1) / (ssw / df2)
        p = float(sps.f.sf(f, df1, df2))
    return AssociationResult("correlation_ratio", eta, "anova", f, p, n, (df1, df2))


def assoc_auto(d: Dataset, a: str, b: str) -> AssociationResult:
    """Association between two columns, with the measure chosen by their kinds."""
    ka = d.spec(a).kind
    kb = d.spec(b).kind
    if ka == "continuous" and kb == "continuous":
        return pearson_r(d[a], d[b])
    if ka != "continuous" and kb != "continuous":
        return cramers_v(ContingencyTable.crosstab(d.labels(a), d.labels(b)))
    if ka == "continuous":
        return correlation_ratio(d.labels(b), d[a])
    return correlation_ratio(d.labels(a), d[b])


def fisher_exact_p(counts) -> Fraction:
    """Exact two-sided Fisher p for a 2x2 table, as a rational number.

    Every table with the observed marginals is enumerated; tables whose
    hypergeometric probability does not exceed the observed one are summed.
    Probabilities share the denominator C(n, c1), so comparisons are on integers.
    """
    (a, b), (c, d) = [[int(v) for v in row] for row in counts]
    r1, r2 = a + b, c + d
    c1 = a + c
    n = r1 + r2
    denom = math.comb(n, c1)
    observed = math.comb(r1, a) * math.comb(r2, c)
    total = 0
    for x in range(max(0, c1 - r2), min(r1, c1) + 1):
        w = math.comb(r1, x) * math.comb(r2, c1 - x)
        if w <= observed:
            total += w
    return Fraction(total, denom)


def fisher_exact_2x2(t: ContingencyTable) -> AssociationResult:
    if t.counts.shape != (2, 2):
        raise StatsError(f"fisher_exact_2x2 needs a 2x2 table, got {t.counts.shape}")
    if t.total < 1:
        raise StatsError("empty contingency table")
    (a, b), (c, d) = t.counts.tolist()
    odds = math.inf if b * c == 0 and a * d > 0 else (a * d) / (b * c) if b * c else math.nan
    p = float(min(fisher_exact_p(t.counts), Fraction(1)))
    return AssociationResult("odds_ratio", odds, "fisher_exact", odds, p, t.total)


def two_sample_t(x, y) -> AssociationResult:
    """Welch's unequal-variance t test (two-sided). ``value`` is the mean difference."""
    x = _as_float(x, "x")
    y = _as_float(y, "y")
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise StatsError("two_sample_t needs at least 2 observations per sample")
    vx = x.var(ddof=1) / nx
    vy = y.var(ddof=1) / ny
    se2 = vx + vy
    if se2 <= 0.0:
        raise StatsError("degenerate variance: both samples are constant")
    diff = float(x.mean() - y.mean())
    t = diff / math.sqrt(se2)
    df = se2**2 / (vx**2 / (nx - 1) + vy**2 / (ny - 1))
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return AssociationResult("mean_difference", diff, "t", t, p, nx + ny, (df,))


def selection_rates(selected, group) -> dict:
    """Selection rate per group label, keyed by label."""
    selected = np.asarray(selected, dtype=float)
    group = np.asarray(group)
    if len(selected) != len(group):
        raise StatsError("series lengths differ")
    levels = np.unique(group)
    if len(levels) != 2:
        raise StatsError(f"group must have exactly 2 observed levels, got {len(levels)}")
    return {lvl.item() if hasattr(lvl, "item") else lvl: float(selected[group == lvl].mean()) for lvl in levels}


def selection_rate_ratio(selected, group) -> float:
    """Lower group selection rate over the higher one (the four-fifths ratio).

    Normalising to the lower-rate group makes the result independent of which
    group is labelled 1. Two zero rates count as parity (1.0).
    """
    selected = np.asarray(selected, dtype=float)
    group = np.asarray(group)
    if len(selected) != len(group):
        raise StatsError("series lengths differ")
    levels = np.unique(group)
    if len(levels) > 2:
        raise StatsError("group must be binary")
    if len(levels) < 2:
        raise StatsError("group with zero members")
    r0 = selected[group == levels[0]].mean()
    r1 = selected[group == levels[1]].mean()
    lo, hi = min(r0, r1), max(r0, r1)
    if hi == 0.0:
        return 1.0
    return float(lo / hi)
