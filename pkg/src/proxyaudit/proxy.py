"""Proxy-power measures.

The headline number is the semi-partial R²: how much the fit statistic rises
when the protected attributes are added to a model. The product of association
and importance is kept as a secondary diagnostic only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, LockBoxSplit
from .errors import DataError, SeparationError, StatsError
from .glm import ModelSpec, fit, goodness_of_fit, predict, residual_summary, zero_coefficients
from .stats import assoc_auto

NEGATIVE_TOL = 1e-9


def _fit_statistic(train: Dataset, spec: ModelSpec, evaluate: Dataset | None) -> float:
    m = fit(train, spec)
    if evaluate is None:
        return float(m.fit_statistic)
    return goodness_of_fit(m, evaluate)


def variable_importance(d: Dataset, spec: ModelSpec, v: str, evaluate: Dataset | None = None) -> float:
    """Drop in R² (or McFadden R²) when ``v`` is removed from the full model."""
    if v not in spec.predictors:
        raise DataError(f"{v!r} is not a predictor of model {spec.id!r}", column=v)
    full = _fit_statistic(d, spec, evaluate)
    reduced = spec.with_predictors([p for p in spec.predictors if p != v], suffix=f"-{v}")
    return full - _fit_statistic(d, reduced, evaluate)


def semi_partial_r2(
    d: Dataset, spec: ModelSpec, protected: Sequence[str], evaluate: Dataset | None = None
) -> float:
    """Rise in R² (or McFadden R²) when ``protected`` joins the model's predictors."""
    protected = list(protected)
    if not protected:
        raise DataError("semi_partial_r2 needs at least one protected column")
    overlap = sorted(set(protected) & set(spec.predictors))
    if overlap:
        raise DataError(f"protected columns {overlap} are already predictors of {spec.id!r}")
    base = _fit_statistic(d, spec, evaluate)
    augmented = spec.with_predictors(list(spec.predictors) + protected, suffix="+protected")
    try:
        aug = _fit_statistic(d, augmented, evaluate)
    except SeparationError as exc:
        raise SeparationError(f"protected attribute separates outcome: {exc}") from exc
    return aug - base


def _association(d: Dataset, v: str, p: str) -> float | None:
    try:
        return abs(assoc_auto(d, v, p).value)
    except StatsError:
        return None


def intuitive_total_proxy_power(
    d: Dataset, spec: ModelSpec, protected: Sequence[str], evaluate: Dataset | None = None
) -> dict:
    """Per protected attribute: sum over predictors of |association| x importance.

    Diagnostic only; an undefined association counts as zero.
    """
    source = evaluate if evaluate is not None else d
    importances = {v: variable_importance(d, spec, v, evaluate) for v in spec.predictors}
    return {
        p: float(sum((_association(source, v, p) or 0.0) * importances[v] for v in spec.predictors))
        for p in protected
    }


def average_proxy_power(report, weights: Mapping[str, float] | None = None) -> float:
    """Mean semi-partial R² across protected attributes, optionally weighted."""
    values = report.semi_partial if isinstance(report, ProxyPowerReport) else dict(report)
    if not values:
        raise DataError("no protected attributes measured")
    if weights is None:
        return float(np.mean(list(values.values())))
    missing = sorted(set(values) - set(weights))
    if missing:
        raise DataError(f"weights missing for {missing}")
    w = np.array([float(weights[k]) for k in values])
    if (w < 0).any() or w.sum() <= 0:
        raise DataError("weights must be non-negative with a positive sum")
    return float(np.dot(w, list(values.values())) / w.sum())


# --------------------------------------------------------------------------- substitutes


@dataclass(frozen=True)
class SubstituteFinding:
    variable: str
    protected: str
    forward_rate: float
    reverse_rate: float
    symmetric: bool
    near_perfect: bool
    affected_fraction: float
    threshold: float
    binned: bool = False

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "protected": self.protected,
            "forward_rate": self.forward_rate,
            "reverse_rate": self.reverse_rate,
            "symmetric": self.symmetric,
            "near_perfect": self.near_perfect,
            "affected_fraction": self.affected_fraction,
            "threshold": self.threshold,
            "binned": self.binned,
        }


def decile_bins(x: np.ndarray) -> np.ndarray:
    """Decile index of each value (ties share a bin)."""
    edges = np.unique(np.quantile(x, np.linspace(0.1, 0.9, 9)))
    return np.searchsorted(edges, x, side="right")


def _labels_for_mapping(d: Dataset, name: str) -> tuple[np.ndarray, bool]:
    if d.spec(name).kind == "continuous":
        return decile_bins(np.asarray(d[name])), True
    return d.labels(name), False


def _majority_rate(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Row-weighted accuracy of the majority map a -> b, and share of rows in pure a-values."""
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(counts, (ia, ib), 1)
    n = len(a)
    rate = counts.max(axis=1).sum() / n
    pure = (counts > 0).sum(axis=1) == 1
    return float(rate), float(counts.sum(axis=1)[pure].sum() / n)


def detect_substitute(d: Dataset, v: str, p: str, threshold: float = 0.95) -> SubstituteFinding:
    """How nearly ``v`` determines ``p`` and vice versa.

    ``forward_rate`` is the accuracy of guessing ``p`` from the majority class
    seen for each value of ``v``; ``reverse_rate`` swaps the roles.
    ``affected_fraction`` is the share of rows whose ``v`` value occurs with a
    single ``p`` value. Continuous ``v`` is binned into deciles first.
    """
    if d.spec(p).kind == "continuous":
        raise DataError("protected column must be categorical or binary", column=p)
    if d.n == 0:
        raise DataError("empty column", column=v)
    va, binned = _labels_for_mapping(d, v)
    pa = d.labels(p)
    forward, affected = _majority_rate(va, pa)
    reverse, _ = _majority_rate(pa, va)
    return SubstituteFinding(
        variable=v,
        protected=p,
        forward_rate=forward,
        reverse_rate=reverse,
        symmetric=forward >= threshold and reverse >= threshold,
        near_perfect=max(forward, reverse) >= threshold,
        affected_fraction=affected,
        threshold=threshold,
        binned=binned,
    )


# --------------------------------------------------------------------------- Pope-Sydnor


@dataclass(frozen=True)
class PopeSydnorResult:
    full_predictions: np.ndarray
    zeroed_predictions: np.ndarray
    omitted_predictions: np.ndarray
    indirect_gap: float

    def to_dict(self) -> dict:
        return {"indirect_gap": self.indirect_gap, "n": int(len(self.full_predictions))}


def pope_sydnor_decomposition(d: Dataset, spec: ModelSpec, protected: Sequence[str]) -> PopeSydnorResult:
    """Compare zeroing protected coefficients against leaving them out entirely.

    ``indirect_gap`` is the mean absolute difference between predictions of the
    full fit with protected coefficients zeroed and predictions of the fit
    without protected columns; a large gap means the remaining predictors pick
    up the protected signal once it is omitted.
    """
    protected = list(protected)
    full = fit(d, spec.with_predictors(list(spec.predictors) + protected, suffix="+protected"))
    zeroed = zero_coefficients(full, protected)
    omitted = fit(d, spec)
    full_p = predict(full, d)
    zero_p = predict(zeroed, d)
    omit_p = predict(omitted, d)
    return PopeSydnorResult(full_p, zero_p, omit_p, float(np.mean(np.abs(zero_p - omit_p))))


# --------------------------------------------------------------------------- report


@dataclass
class VariableProxy:
    variable: str
    association_to_protected: dict
    importance: float
    intuitive_product: dict

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "association_to_protected": self.association_to_protected,
            "importance": self.importance,
            "intuitive_product": self.intuitive_product,
        }


@dataclass
class ProxyPowerReport:
    model_id: str
    family: str
    predictor_count: int
    fit_statistic: float
    per_variable: list[VariableProxy]
    semi_partial: dict
    semi_partial_raw: dict
    total_intuitive: dict
    average_proxy_power: float
    evaluation_set: str
    weights: dict | None = None
    warnings: list[str] = field(default_factory=list)
    residuals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "family": self.family,
            "predictor_count": self.predictor_count,
            "fit_statistic": self.fit_statistic,
            "per_variable": [v.to_dict() for v in self.per_variable],
            "semi_partial": self.semi_partial,
            "semi_partial_raw": self.semi_partial_raw,
            "total_intuitive": self.total_intuitive,
            "average_proxy_power": self.average_proxy_power,
            "evaluation_set": self.evaluation_set,
            "weights": self.weights,
            "warnings": list(self.warnings),
            "residuals": self.residuals,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def proxy_power_report(
    d: Dataset,
    spec: ModelSpec,
    protected: Sequence[str],
    weights: Mapping[str, float] | None = None,
    split: LockBoxSplit | None = None,
) -> ProxyPowerReport:
    """Full proxy-power breakdown of one model.

    With a lock-box split, models are fitted on the training rows and every
    fit statistic is evaluated on the held-out rows.
    """
    protected = list(protected)
    if not protected:
        raise DataError("at least one protected column is required")
    if split is not None:
        train, evaluate, where = d.take(split.train_indices), d.take(split.test_indices), "lockbox"
    else:
        train, evaluate, where = d, None, "train"
    source = evaluate if evaluate is not None else train
    warnings: list[str] = []

    fit_stat = _fit_statistic(train, spec, evaluate)
    per_variable = []
    for v in spec.predictors:
        imp = variable_importance(train, spec, v, evaluate)
        assoc = {}
        for p in protected:
            a = _association(source, v, p)
            if a is None:
                warnings.append(f"association {v}~{p} undefined on {where} data")
            assoc[p] = a
        per_variable.append(
            VariableProxy(v, assoc, imp, {p: (assoc[p] or 0.0) * imp for p in protected})
        )
    raw = {p: semi_partial_r2(train, spec, [p], evaluate) for p in protected}
    for p, val in raw.items():
        if val < -NEGATIVE_TOL:
            warnings.append(f"semi-partial R2 for {p} is negative on {where} data ({val:.3g}); reported as 0")
    clamped = {p: max(val, 0.0) for p, val in raw.items()}
    totals = {p: float(sum(v.intuitive_product[p] for v in per_variable)) for p in protected}
    return ProxyPowerReport(
        model_id=spec.id,
        family=spec.family,
        predictor_count=len(spec.predictors),
        fit_statistic=fit_stat,
        per_variable=per_variable,
        semi_partial=clamped,
        semi_partial_raw=raw,
        total_intuitive=totals,
        average_proxy_power=average_proxy_power(clamped, weights),
        evaluation_set=where,
        weights=dict(weights) if weights is not None else None,
        warnings=warnings,
        residuals=residual_summary(fit(train, spec), source),
    )
