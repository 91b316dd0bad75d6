"""Verdict engine for model comparisons.

Rankings are built from tiers rather than pairwise band checks. Pairwise
"within band" is not transitive (0.950 ~ 0.954 ~ 0.958, yet 0.950 and 0.958
differ by more than 0.005), so models are grouped greedily: the best remaining
accuracy anchors a tier holding every remaining model within the band of it.
Proxy power is tiered the same way with a 1e-6 tolerance. The resulting key
``(accuracy tier, proxy tier, predictor count, model id, party)`` is a total
order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import Dataset, LockBoxSplit, lockbox_split
from .errors import DataError
from .glm import Accuracy, ModelSpec, fit, mean_accuracy
from .proxy import average_proxy_power, detect_substitute, semi_partial_r2, variable_importance
from .stats import ContingencyTable, chi_square, fisher_exact_2x2, selection_rate_ratio

PROXY_TOL = 1e-6
IMPORTANCE_TOL = 1e-6
FOUR_FIFTHS = 0.8
DEFAULT_CAP = 0.05
DEFAULT_BAND = 0.005
RULES = ("no_proxy", "min_proxy", "capped", "lexicographic")
FOUR_FIFTHS_CAVEAT = (
    "The four-fifths ratio is a rule of thumb with no statistical basis; "
    "treat a flag as a prompt for further analysis, not a finding."
)


def _within(gap: float, tol: float) -> bool:
    # inclusive, with slack for binary floating point (0.955 - 0.95 > 0.005)
    return gap <= tol * (1 + 1e-9) + 1e-12


@dataclass(frozen=True)
class Policy:
    band: float = DEFAULT_BAND
    cap: float | None = None
    substitute_threshold: float = 0.95
    protected: tuple[str, ...] = ()
    weights: dict | None = None
    rule: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "protected", tuple(self.protected))
        if self.band < 0:
            raise DataError(f"equivalence band must be >= 0, got {self.band}")
        if self.cap is not None and not 0.0 < self.cap <= 1.0:
            raise DataError(f"cap must lie in (0, 1], got {self.cap}")
        if not 0.0 < self.substitute_threshold <= 1.0:
            raise DataError("substitute_threshold must lie in (0, 1]")
        if self.rule is not None and self.rule not in RULES:
            raise DataError(f"unknown rule {self.rule!r}")

    @property
    def comparison_rule(self) -> str:
        if self.rule is not None:
            return self.rule
        return "capped" if self.cap is not None else "min_proxy"

    @property
    def effective_cap(self) -> float:
        return DEFAULT_CAP if self.cap is None else self.cap

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "cap": self.cap,
            "substitute_threshold": self.substitute_threshold,
            "protected": list(self.protected),
            "weights": self.weights,
            "rule": self.rule,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Policy":
        return cls(
            band=float(raw.get("band", DEFAULT_BAND)),
            cap=None if raw.get("cap") is None else float(raw["cap"]),
            substitute_threshold=float(raw.get("substitute_threshold", 0.95)),
            protected=tuple(raw.get("protected") or ()),
            weights=raw.get("weights"),
            rule=raw.get("rule"),
        )

    @classmethod
    def from_json(cls, text: str) -> "Policy":
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise DataError(f"malformed policy JSON: {exc}") from exc


@dataclass
class Verdict:
    rule: str
    winner: str
    margins: dict
    trail: list[dict]
    violations: list[dict] = field(default_factory=list)
    ranking: list[str] = field(default_factory=list)
    compliance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def flagged(self) -> bool:
        return bool(self.violations) or (bool(self.compliance) and not all(self.compliance.values()))


@dataclass(frozen=True)
class ScoredModel:
    model_id: str
    accuracy: Accuracy
    proxy_power: float
    predictor_count: int
    party: str = ""

    @property
    def key(self) -> tuple[str, str]:
        return (self.model_id, self.party)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "party": self.party,
            "accuracy": self.accuracy.to_dict(),
            "proxy_power": self.proxy_power,
            "predictor_count": self.predictor_count,
        }


# --------------------------------------------------------------------------- ranking


def _greedy_tiers(items: list, value, tol: float, better_high: bool) -> dict:
    ordered = sorted(items, key=lambda s: ((-value(s) if better_high else value(s)), s.key))
    tiers = {}
    tier = -1
    anchor = None
    for s in ordered:
        if anchor is None or not _within(abs(value(s) - anchor), tol):
            tier += 1
            anchor = value(s)
        tiers[s.key] = tier
    return tiers


def _check_orientation(scored: Sequence[ScoredModel]) -> None:
    metrics = {s.accuracy.metric for s in scored}
    if len(metrics) > 1:
        raise DataError(f"cannot compare models scored with different accuracy metrics: {sorted(metrics)}")


def ranking_keys(scored: Sequence[ScoredModel], band: float) -> dict:
    """Total-order sort key per ``(model_id, party)``."""
    scored = list(scored)
    _check_orientation(scored)
    ids = [s.key for s in scored]
    if len(set(ids)) != len(ids):
        raise DataError("model ids must be distinct")
    if not scored:
        return {}
    hi = scored[0].accuracy.higher_is_better
    acc_tier = _greedy_tiers(scored, lambda s: s.accuracy.value, band, hi)
    keys = {}
    for t in set(acc_tier.values()):
        members = [s for s in scored if acc_tier[s.key] == t]
        proxy_tier = _greedy_tiers(members, lambda s: s.proxy_power, PROXY_TOL, False)
        for s in members:
            keys[s.key] = (t, proxy_tier[s.key], s.predictor_count, s.model_id, s.party)
    return keys


_STEPS = ("accuracy", "proxy_power", "predictor_count", "model_id", "party")


@dataclass(frozen=True)
class Comparison:
    winner: str
    loser: str
    decided_by: str
    trail: tuple
    winner_party: str = ""
    loser_party: str = ""

    def to_dict(self) -> dict:
        out = {"winner": self.winner, "loser": self.loser, "decided_by": self.decided_by, "trail": list(self.trail)}
        if self.winner_party or self.loser_party:
            out["winner_party"] = self.winner_party
            out["loser_party"] = self.loser_party
        return out


def _compare_keys(a: ScoredModel, b: ScoredModel, ka: tuple, kb: tuple, band: float) -> Comparison:
    trail = []
    for i, step in enumerate(_STEPS):
        if ka[i] != kb[i]:
            win, lose = (a, b) if ka[i] < kb[i] else (b, a)
            trail.append(_step_record(step, a, b, band, decisive=True))
            return Comparison(win.model_id, lose.model_id, step, tuple(trail), win.party, lose.party)
        trail.append(_step_record(step, a, b, band, decisive=False))
    return Comparison(a.model_id, b.model_id, "identical", tuple(trail), a.party, b.party)


def _step_record(step: str, a: ScoredModel, b: ScoredModel, band: float, decisive: bool) -> dict:
    if step == "accuracy":
        gap = abs(a.accuracy.value - b.accuracy.value)
        detail = "outside equivalence band" if not _within(gap, band) else "within equivalence band"
        return {"step": step, "criterion": f"|accuracy gap| <= band {band}", "gap": gap, "result": detail, "decisive": decisive}
    if step == "proxy_power":
        gap = abs(a.proxy_power - b.proxy_power)
        return {"step": step, "criterion": f"proxy gap > {PROXY_TOL}", "gap": gap, "decisive": decisive}
    if step == "predictor_count":
        gap = abs(a.predictor_count - b.predictor_count)
        return {"step": step, "criterion": "fewer predictors wins", "gap": gap, "decisive": decisive}
    if step == "model_id":
        return {"step": step, "criterion": "lexicographically smaller id wins (tie-break)", "decisive": decisive}
    return {"step": step, "criterion": "lexicographically smaller party wins (tie-break)", "decisive": decisive}


def lexicographic_compare(
    a: ScoredModel, b: ScoredModel, policy: Policy, context: Sequence[ScoredModel] | None = None
) -> Comparison:
    """Order two models scored on the same lock-box rows.

    Accuracy outside the band decides first, then lower proxy power, then fewer
    predictors, then the smaller model id. Band membership is a tier anchored
    at the best accuracy of ``context`` (the set being ranked; default just the
    pair), so comparisons sharing a context are transitive.
    """
    pool = {s.key: s for s in (context or ())}
    pool.setdefault(a.key, a)
    pool.setdefault(b.key, b)
    keys = ranking_keys(list(pool.values()), policy.band)
    return _compare_keys(a, b, keys[a.key], keys[b.key], policy.band)


def rank_models(scored: Sequence[ScoredModel], policy: Policy) -> tuple[list[ScoredModel], list[Comparison]]:
    """Models best-first, with the comparison record between each adjacent pair."""
    keys = ranking_keys(scored, policy.band)
    ordered = sorted(scored, key=lambda s: keys[s.key])
    comparisons = [_compare_keys(x, y, keys[x.key], keys[y.key], policy.band) for x, y in zip(ordered, ordered[1:])]
    return ordered, comparisons


def _margins(a: ScoredModel, b: ScoredModel | None) -> dict:
    if b is None:
        return {"accuracy_gap": 0.0, "proxy_gap": 0.0, "variable_count_gap": 0}
    return {
        "accuracy_gap": abs(a.accuracy.value - b.accuracy.value),
        "proxy_gap": b.proxy_power - a.proxy_power,
        "variable_count_gap": b.predictor_count - a.predictor_count,
    }


def select_min_proxy(scored: Sequence[ScoredModel], policy: Policy, rule: str = "min_proxy") -> Verdict:
    """Least-discriminatory choice among already-scored models.

    The winner is "tie" when only the id tie-break separates the top two.
    """
    scored = list(scored)
    if len(scored) < 2:
        raise DataError("need at least two models to compare")
    ordered, comps = rank_models(scored, policy)
    best = ordered[0]
    trail: list[dict] = []
    for s in sorted(scored, key=lambda s: s.model_id):
        gap = abs(s.accuracy.value - best.accuracy.value)
        trail.append(
            {
                "step": "equivalence_band",
                "model_id": s.model_id,
                "accuracy": s.accuracy.value,
                "gap_to_best": gap,
                "result": "within equivalence band" if _within(gap, policy.band) else "outside equivalence band",
            }
        )
    for c in comps:
        trail.append({"step": "pairwise", **c.to_dict()})
    winner = best.model_id
    if comps and comps[0].decided_by in ("model_id", "party", "identical"):
        winner = "tie"
        trail.append({"step": "tie", "criterion": "top models differ only by id", "tied": [comps[0].winner, comps[0].loser]})
    return Verdict(
        rule=rule,
        winner=winner,
        margins=_margins(best, ordered[1]),
        trail=trail,
        ranking=[s.model_id for s in ordered],
    )


# --------------------------------------------------------------------------- data-driven rules


def _check_family(specs: Sequence[ModelSpec]) -> None:
    if len({s.outcome for s in specs}) > 1:
        raise DataError("models predict different outcomes")
    if len({s.family for s in specs}) > 1:
        raise DataError("models use different families")
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise DataError("model ids must be distinct")


def score_model(d: Dataset, spec: ModelSpec, split: LockBoxSplit, policy: Policy) -> ScoredModel:
    """Fit on the training rows; accuracy and proxy power on the lock-box rows."""
    if not policy.protected:
        raise DataError("policy lists no protected columns")
    train = d.take(split.train_indices)
    test = d.take(split.test_indices)
    model = fit(train, spec)
    acc = mean_accuracy(model, test)
    sp = {p: max(semi_partial_r2(train, spec, [p], test), 0.0) for p in policy.protected}
    return ScoredModel(spec.id, acc, average_proxy_power(sp, policy.weights), len(spec.predictors))


def compare_min_proxy_power(
    d: Dataset, specs: Sequence[ModelSpec], policy: Policy, split: LockBoxSplit | None = None
) -> Verdict:
    """Among models with practically equivalent lock-box accuracy, pick the lowest proxy power."""
    specs = list(specs)
    if len(specs) < 2:
        raise DataError("need at least two models to compare")
    _check_family(specs)
    split = split or lockbox_split(d)
    scored = [score_model(d, s, split, policy) for s in specs]
    verdict = select_min_proxy(scored, policy)
    verdict.trail.insert(0, {"step": "scores", "models": [s.to_dict() for s in sorted(scored, key=lambda s: s.model_id)]})
    return verdict


def no_proxy_rule_check(d: Dataset, spec: ModelSpec, policy: Policy) -> Verdict:
    """Flag superfluous predictors and (near-)perfect substitutes that carry weight.

    A predictor is prohibited when it is a near-perfect substitute for a
    protected column (either mapping rate at or above the threshold) or is a
    perfect substitute for some sub-population (affected fraction > 0), and its
    importance exceeds 1e-6. A predictor whose importance is at most 1e-6 is
    superfluous.
    """
    if not policy.protected:
        raise DataError("policy lists no protected columns")
    fit(d, spec)
    trail = []
    violations = []
    for v in spec.predictors:
        if v in policy.protected:
            violations.append({"variable": v, "kind": "protected", "reason": "protected attribute used directly"})
            continue
        imp = variable_importance(d, spec, v)
        record = {"step": "variable", "variable": v, "importance": imp, "substitutes": []}
        if imp <= IMPORTANCE_TOL:
            violations.append(
                {"variable": v, "kind": "superfluous", "importance": imp, "reason": "superfluous: no decision influence, remove"}
            )
        for p in policy.protected:
            finding = detect_substitute(d, v, p, policy.substitute_threshold)
            record["substitutes"].append(finding.to_dict())
            if imp > IMPORTANCE_TOL and (finding.near_perfect or finding.affected_fraction > 0):
                what = "near-perfect substitute" if finding.near_perfect else (
                    f"perfect substitute for {finding.affected_fraction:.2%} of rows"
                )
                violations.append(
                    {
                        "variable": v,
                        "protected": p,
                        "kind": "prohibited",
                        "importance": imp,
                        "forward_rate": finding.forward_rate,
                        "reverse_rate": finding.reverse_rate,
                        "affected_fraction": finding.affected_fraction,
                        "reason": f"prohibited: {what} with decision influence",
                    }
                )
        trail.append(record)
    if not trail:
        trail.append({"step": "variable", "note": "model has no predictors"})
    return Verdict(rule="no_proxy", winner="tie", margins=_margins_empty(), trail=trail, violations=violations)


def _margins_empty() -> dict:
    return {"accuracy_gap": 0.0, "proxy_gap": 0.0, "variable_count_gap": 0}


def capped_rule(measurements: Iterable, policy: Policy) -> Verdict:
    """Cap rule: proxy-power differences at or below the cap are ignored.

    All models at or under the cap are compliant and tied with one another. If
    exactly one model is compliant it wins; if none is, the lowest semi-partial
    R² wins. Every over-cap model is flagged.
    """
    items = []
    for m in measurements:
        if isinstance(m, Mapping):
            items.append((str(m["model_id"]), float(m["semi_partial"])))
        else:
            items.append((str(m[0]), float(m[1])))
    if not items:
        raise DataError("capped_rule needs at least one measurement")
    cap = policy.effective_cap
    trail = []
    compliance = {}
    violations = []
    for mid, sp in sorted(items):
        ok = sp <= cap
        compliance[mid] = ok
        trail.append({"step": "cap", "model_id": mid, "semi_partial": sp, "cap": cap, "result": "compliant" if ok else "over cap"})
        if not ok:
            violations.append(
                {"model_id": mid, "kind": "over_cap", "semi_partial": sp, "cap": cap, "reason": f"semi-partial R2 {sp:.4g} above cap {cap:.4g}"}
            )
    ranked = sorted(items, key=lambda t: (t[1], t[0]))
    compliant = [mid for mid, _ in ranked if compliance[mid]]
    if len(compliant) > 1:
        winner = "tie"
        trail.append({"step": "tie", "criterion": "all compliant models are mutually tied", "tied": compliant})
    elif len(compliant) == 1:
        winner = compliant[0]
    else:
        winner = ranked[0][0]
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            winner = "tie"
        trail.append({"step": "lowest", "criterion": "no model under cap; lowest semi-partial R2 wins"})
    sp_of = dict(items)
    margins = _margins_empty()
    if len(ranked) > 1:
        margins["proxy_gap"] = ranked[1][1] - ranked[0][1]
    return Verdict(
        rule="capped",
        winner=winner,
        margins=margins,
        trail=trail,
        violations=violations,
        ranking=[mid for mid, _ in ranked],
        compliance={k: compliance[k] for k in sorted(sp_of)},
    )


# --------------------------------------------------------------------------- screening


def disparate_impact_screen(predictions, group, policy: Policy | None = None) -> dict:
    """Four-fifths ratio plus an independence test on selection x group.

    The test is Pearson chi-square, or Fisher's exact test when any expected
    cell count is below 5.
    """
    selected = np.asarray(predictions, dtype=float)
    group = np.asarray(group)
    if len(selected) != len(group):
        raise DataError("predictions and group differ in length")
    if not np.all((selected == 0) | (selected == 1)):
        raise DataError("predictions must be binary selections")
    levels = np.unique(group)
    if len(levels) != 2:
        raise DataError(f"group must have exactly two non-empty levels, got {len(levels)}")
    rates = {str(lvl): float(selected[group == lvl].mean()) for lvl in levels}
    counts = {str(lvl): int((group == lvl).sum()) for lvl in levels}
    ratio = selection_rate_ratio(selected, group)
    table = np.array([[int(((group == lvl) & (selected == s)).sum()) for s in (1, 0)] for lvl in levels])
    notes = []
    if (table.sum(axis=0) == 0).any():
        test, stat, p = "none", float("nan"), 1.0
        notes.append("no variation in selections; independence test skipped")
    else:
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
        ct = ContingencyTable(tuple(str(l) for l in levels), ("selected", "rejected"), table)
        if (expected < 5).any():
            res = fisher_exact_2x2(ct)
            test, stat, p = "fisher_exact", res.statistic, res.p_value
            notes.append("expected cell count below 5: Fisher exact test used")
        else:
            stat, p, _ = chi_square(ct)
            test = "chi_square"
    return {
        "selection_rates": rates,
        "group_sizes": counts,
        "ratio": ratio,
        "threshold": FOUR_FIFTHS,
        "flagged": ratio < FOUR_FIFTHS,
        "test": test,
        "statistic": None if stat != stat else stat,
        "p_value": p,
        "table": table.tolist(),
        "notes": notes,
        "caveat": FOUR_FIFTHS_CAVEAT,
    }
