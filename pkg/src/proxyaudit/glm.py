"""Ordinary least squares and logistic regression, fitted from scratch.

Both fits go through the same Householder QR. Columns are processed left to
right and a column whose remaining norm (after projecting out the columns kept
so far) is at most ``COLLINEAR_TOL`` times its own norm is dropped, so the
earliest of a set of collinear columns survives.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .data import INTERCEPT, DataError, Dataset, Term, encode_design
from .errors import ConvergenceError, FitError, SeparationError

log = logging.getLogger(__name__)

FAMILIES = ("ols", "logistic")
COLLINEAR_TOL = 1e-10
SCORE_TOL = 1e-8
LL_REL_TOL = 1e-10
STEP_TOL = 1e-6
MAX_ITER = 100
SEPARATION_LIMIT = 15.0


@dataclass(frozen=True)
class ModelSpec:
    id: str
    family: str
    outcome: str
    predictors: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if not self.id:
            raise DataError("model id must be non-empty")
        if self.family not in FAMILIES:
            raise DataError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.outcome in self.predictors:
            raise DataError("outcome listed among predictors", column=self.outcome)
        if len(set(self.predictors)) != len(self.predictors):
            raise DataError(f"duplicate predictors in model {self.id!r}")

    def with_predictors(self, predictors: Sequence[str], suffix: str = "") -> "ModelSpec":
        return replace(self, predictors=tuple(predictors), id=self.id + suffix)

    def to_dict(self) -> dict:
        return {"id": self.id, "family": self.family, "outcome": self.outcome, "predictors": list(self.predictors)}

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelSpec":
        try:
            return cls(str(raw["id"]), raw["family"], raw["outcome"], tuple(raw.get("predictors", ())))
        except KeyError as exc:
            raise DataError(f"model spec missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed model JSON: {exc}") from exc
        return cls.from_dict(raw)


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    terms: tuple[Term, ...]
    coefficients: dict
    intercept: float
    n: int
    r_squared: float | None = None
    mcfadden_r2: float | None = None
    log_likelihood: float | None = None
    null_log_likelihood: float | None = None
    iterations: int = 0
    converged: bool = True
    dropped: tuple[str, ...] = ()
    excluded: tuple[tuple[str, str], ...] = ()
    stale: bool = False

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def fit_statistic(self) -> float | None:
        return self.r_squared if self.family == "ols" else self.mcfadden_r2

    @property
    def design_columns(self) -> list[str]:
        return [t.name for t in self.terms if t.source != INTERCEPT]

    def beta(self) -> np.ndarray:
        return np.array([self.intercept if t.source == INTERCEPT else self.coefficients[t.name] for t in self.terms])

    def to_dict(self) -> dict:
        return {
            "model_id": self.spec.id,
            "family": self.family,
            "n": self.n,
            "intercept": self.intercept,
            "coefficients": dict(self.coefficients),
            "r_squared": self.r_squared,
            "mcfadden_r2": self.mcfadden_r2,
            "log_likelihood": self.log_likelihood,
            "null_log_likelihood": self.null_log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "dropped_collinear": list(self.dropped),
            "excluded": [list(e) for e in self.excluded],
            "stale": self.stale,
        }


@dataclass(frozen=True)
class Accuracy:
    """Mean accuracy with its direction: MAE (lower is better) or hit rate (higher is better)."""

    value: float
    metric: str  # "mae" | "accuracy"

    @property
    def higher_is_better(self) -> bool:
        return self.metric == "accuracy"

    def to_dict(self) -> dict:
        return {"value": self.value, "metric": self.metric, "higher_is_better": self.higher_is_better}


# --------------------------------------------------------------------------- QR core


@dataclass
class _LstsqResult:
    beta: np.ndarray  # full length, zeros at dropped columns
    kept: list[int]
    dropped: list[int] = field(default_factory=list)


def householder_lstsq(X: np.ndarray, y: np.ndarray, tol: float = COLLINEAR_TOL) -> _LstsqResult:
    """Least squares via Householder QR with in-order rank detection."""
    A = np.array(X, dtype=float, copy=True)
    b = np.array(y, dtype=float, copy=True)
    n, p = A.shape
    norms = np.linalg.norm(A, axis=0)
    kept: list[int] = []
    dropped: list[int] = []
    k = 0
    for j in range(p):
        if k >= n:
            dropped.append(j)
            continue
        tail = A[k:, j]
        rn = float(np.linalg.norm(tail))
        if norms[j] == 0.0 or rn <= tol * norms[j]:
            dropped.append(j)
            continue
        alpha = -math.copysign(rn, tail[0]) if tail[0] != 0 else -rn
        v = tail.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        block = A[k:, j:]
        block -= 2.0 * np.outer(v, v @ block)
        b[k:] -= 2.0 * v * (v @ b[k:])
        kept.append(j)
        k += 1
    beta = np.zeros(p)
    if kept:
        R = A[:k, kept]
        beta[kept] = solve_triangular(np.triu(R), b[:k])
    return _LstsqResult(beta, kept, dropped)


# --------------------------------------------------------------------------- fitting


def _outcome(d: Dataset, spec: ModelSpec) -> np.ndarray:
    col = d.spec(spec.outcome)
    if col.kind == "categorical":
        raise DataError("outcome must be continuous or binary-coded", column=spec.outcome)
    if spec.family == "logistic" and col.kind != "binary":
        y = d[spec.outcome]
        if not np.all((y == 0) | (y == 1)):
            raise DataError("logistic outcome must be binary", column=spec.outcome)
    return np.asarray(d[spec.outcome], dtype=float)


def fit(d: Dataset, spec: ModelSpec) -> FittedModel:
    """Fit ``spec`` on ``d`` with the estimator its family names."""
    if spec.family == "ols":
        return fit_ols(d, spec)
    return fit_logistic(d, spec)


def _coefficients(terms, beta) -> tuple[float, dict]:
    intercept = 0.0
    coefs = {}
    for t, b in zip(terms, beta):
        if t.source == INTERCEPT:
            intercept = float(b)
        else:
            coefs[t.name] = float(b)
    return intercept, coefs


def fit_ols(d: Dataset, spec: ModelSpec) -> FittedModel:
    if spec.family != "ols":
        raise DataError(f"fit_ols called with family {spec.family!r}")
    y = _outcome(d, spec)
    design = encode_design(d, spec.predictors)
    X = design.X
    if d.n <= X.shape[1]:
        raise FitError(f"need more rows than design columns ({d.n} <= {X.shape[1]})")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise FitError("outcome is constant (SST = 0)")
    res = householder_lstsq(X, y)
    dropped = tuple(design.terms[j].name for j in res.dropped)
    if dropped:
        log.warning("model %s: dropped collinear columns %s", spec.id, list(dropped))
    resid = y - X @ res.beta
    r2 = 1.0 - float(resid @ resid) / sst
    intercept, coefs = _coefficients(design.terms, res.beta)
    return FittedModel(
        spec, design.terms, coefs, intercept, d.n, r_squared=r2, dropped=dropped, excluded=design.excluded
    )


def _loglik(y: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def null_loglik(y: np.ndarray) -> float:
    ybar = float(np.mean(y))
    if ybar in (0.0, 1.0):
        return 0.0
    return float(len(y) * (ybar * math.log(ybar) + (1 - ybar) * math.log(1 - ybar)))


def fit_logistic(d: Dataset, spec: ModelSpec) -> FittedModel:
    """Maximum likelihood by iteratively reweighted least squares.

    Converged when (max |score| < 1e-8 or relative log-likelihood change
    < 1e-10) and the standardized Newton step is below 1e-6. A standardized
    slope above 15 in absolute value is reported as separation.
    """
    if spec.family != "logistic":
        raise DataError(f"fit_logistic called with family {spec.family!r}")
    y = _outcome(d, spec)
    if y.min() == y.max():
        raise FitError(f"outcome {spec.outcome!r} has a single class")
    design = encode_design(d, spec.predictors)
    Xfull = design.X
    if d.n <= Xfull.shape[1]:
        raise FitError(f"need more rows than design columns ({d.n} <= {Xfull.shape[1]})")
    # rank is settled once on the unweighted design
    rank = householder_lstsq(Xfull, y)
    kept = rank.kept
    dropped = tuple(design.terms[j].name for j in rank.dropped)
    if dropped:
        log.warning("model %s: dropped collinear columns %s", spec.id, list(dropped))
    X = Xfull[:, kept]
    scale = X.std(axis=0)
    slope = scale > 0

    # standard GLM start: mu = (y + 1/2) / 2, first step from the working response
    eta = np.log((y + 0.5) / (1.5 - y))
    beta = None
    ll = -math.inf
    ll0 = null_loglik(y)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        p = expit(eta)
        w = np.clip(p * (1 - p), 1e-300, None)
        z = eta + (y - p) / w
        sw = np.sqrt(w)
        step = householder_lstsq(X * sw[:, None], z * sw)
        if len(step.kept) < X.shape[1]:
            raise SeparationError(f"model {spec.id}: weighted design lost rank; outcome separated")
        new_beta = step.beta
        if beta is not None:
            # step halving guards against Newton overshoot
            for _ in range(30):
                if _loglik(y, X @ new_beta) >= ll - 1e-12 * abs(ll):
                    break
                new_beta = beta + 0.5 * (new_beta - beta)
        else:
            beta = np.zeros(X.shape[1])
        if np.any(np.abs(new_beta[slope] * scale[slope]) > SEPARATION_LIMIT):
            raise SeparationError(
                f"model {spec.id}: standardized coefficient exceeds {SEPARATION_LIMIT}; "
                "complete or quasi-complete separation"
            )
        delta = np.max(np.abs((new_beta - beta) * np.where(slope, scale, 1.0)))
        beta = new_beta
        eta = X @ beta
        new_ll = _loglik(y, eta)
        score = X.T @ (y - expit(eta))
        small = np.max(np.abs(score)) < SCORE_TOL or abs(new_ll - ll) <= LL_REL_TOL * abs(ll)
        ll = new_ll
        if small and delta < STEP_TOL:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"model {spec.id}: IRLS did not converge in {MAX_ITER} iterations")
    if np.max(np.abs(y - expit(eta))) < 1e-6:
        raise SeparationError(f"model {spec.id}: fitted probabilities are all 0 or 1; outcome separated")
    full_beta = np.zeros(Xfull.shape[1])
    full_beta[kept] = beta
    intercept, coefs = _coefficients(design.terms, full_beta)
    mcf = 0.0 if ll0 == 0.0 else 1.0 - ll / ll0
    return FittedModel(
        spec,
        design.terms,
        coefs,
        intercept,
        d.n,
        mcfadden_r2=mcf,
        log_likelihood=ll,
        null_log_likelihood=ll0,
        iterations=it,
        converged=True,
        dropped=dropped,
        excluded=design.excluded,
    )


# --------------------------------------------------------------------------- using fits


def _check_levels(m: FittedModel, d: Dataset) -> None:
    for source in m.spec.predictors:
        if d.spec(source).kind != "categorical":
            continue
        # levels whose indicator was constant in training were never observed there
        unseen = [name[len(source) + 1 : -1] for name, _ in m.excluded if name.startswith(source + "[")]
        if not unseen:
            continue
        bad = np.isin(d[source], unseen)
        if bad.any():
            i = int(np.argmax(bad))
            raise DataError(f"unseen category level {d[source][i]!r}", row=i + 1, column=source)


def linear_predictor(m: FittedModel, d: Dataset) -> np.ndarray:
    for name in m.spec.predictors:
        d.spec(name)
    _check_levels(m, d)
    X = encode_design(d, (), terms=m.terms).X
    return X @ m.beta()


def predict(m: FittedModel, d: Dataset) -> np.ndarray:
    """Linear predictions (ols) or probabilities (logistic) on ``d``."""
    eta = linear_predictor(m, d)
    return eta if m.family == "ols" else expit(eta)


def goodness_of_fit(m: FittedModel, d: Dataset) -> float:
    """R² (ols) or McFadden's pseudo-R² (logistic) of ``m`` evaluated on ``d``."""
    y = _outcome(d, m.spec)
    if m.family == "ols":
        sst = float(((y - y.mean()) ** 2).sum())
        if sst == 0.0:
            raise FitError("outcome is constant on evaluation data (SST = 0)")
        resid = y - predict(m, d)
        return 1.0 - float(resid @ resid) / sst
    ll0 = null_loglik(y)
    if ll0 == 0.0:
        raise FitError("outcome has a single class on evaluation data")
    return 1.0 - _loglik(y, linear_predictor(m, d)) / ll0


def residual_summary(m: FittedModel, d: Dataset) -> dict:
    """Descriptive summary of response residuals on ``d``. Purely informational; no verdict."""
    y = _outcome(d, m.spec)
    yhat = predict(m, d)
    r = y - yhat
    q = np.quantile(r, [0.0, 0.25, 0.5, 0.75, 1.0])
    corr = None
    if np.std(r) > 0 and np.std(yhat) > 0:
        corr = float(np.corrcoef(r, yhat ** 2)[0, 1])
    return {
        "n": int(len(r)),
        "mean": float(r.mean()),
        "sd": float(r.std(ddof=1)) if len(r) > 1 else 0.0,
        "quantiles": {k: float(v) for k, v in zip(("min", "q25", "median", "q75", "max"), q)},
        "corr_with_fitted_squared": corr,
    }


def mean_accuracy(m: FittedModel, test: Dataset) -> Accuracy:
    """Mean absolute error (ols) or classification accuracy at 0.5 (logistic)."""
    if test.n == 0:
        raise DataError("empty test set")
    y = _outcome(test, m.spec)
    yhat = predict(m, test)
    if m.family == "ols":
        return Accuracy(float(np.mean(np.abs(y - yhat))), "mae")
    return Accuracy(float(np.mean((yhat >= 0.5) == (y == 1))), "accuracy")


def zero_coefficients(m: FittedModel, victims: Sequence[str]) -> FittedModel:
    """Copy of ``m`` with the named coefficients set to zero.

    A victim may be a design column (``"race[black]"``) or a source column, in
    which case all of its indicator columns are zeroed. Fit statistics are
    cleared and the copy is marked stale.
    """
    coefs = dict(m.coefficients)
    for v in victims:
        names = [t.name for t in m.terms if t.name == v or (t.source == v and t.source != INTERCEPT)]
        if not names:
            raise DataError(f"unknown coefficient {v!r} in model {m.spec.id!r}")
        for name in names:
            coefs[name] = 0.0
    return replace(
        m,
        coefficients=coefs,
        r_squared=None,
        mcfadden_r2=None,
        log_likelihood=None,
        null_log_likelihood=None,
        stale=True,
    )
