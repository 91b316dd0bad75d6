"""Lock-box model competitions with SHA-256 pre-commitments."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, LockBoxSplit, verify_split
from .errors import CommitmentError, DataError, FitError, LockboxError
from .glm import Accuracy, ModelSpec, fit
from .rules import Policy, ScoredModel, disparate_impact_screen, rank_models, score_model

HASH_NAME = "sha256"


def canonical_spec_json(spec: ModelSpec) -> str:
    """Sorted keys, sorted predictors, no whitespace."""
    payload = {
        "family": spec.family,
        "id": spec.id,
        "outcome": spec.outcome,
        "predictors": sorted(spec.predictors),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def spec_digest(spec: ModelSpec) -> str:
    return hashlib.sha256(canonical_spec_json(spec).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Commitment:
    model_id: str
    digest: str
    timestamp: str

    def __post_init__(self):
        if len(self.digest) != 64:
            raise CommitmentError(f"digest must be 64 hex characters, got {len(self.digest)}")

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "digest": self.digest, "timestamp": self.timestamp, "hash": HASH_NAME}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Commitment":
        return cls(str(raw["model_id"]), str(raw["digest"]), str(raw.get("timestamp", "")))


def commit_model(spec: ModelSpec, timestamp: str | None = None) -> Commitment:
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return Commitment(spec.id, spec_digest(spec), timestamp)


def verify_commitment(spec: ModelSpec, c: Commitment) -> bool:
    return spec_digest(spec) == c.digest


@dataclass(frozen=True)
class Submission:
    party: str
    spec: ModelSpec
    commitment: Commitment | None = None


@dataclass
class CompetitionResult:
    lockbox_digest: str
    ranked: list[dict]
    winner: str
    trail: list[dict]
    disqualified: list[dict] = field(default_factory=list)
    coefficients: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lockbox_digest": self.lockbox_digest,
            "ranked": self.ranked,
            "winner": self.winner,
            "trail": self.trail,
            "disqualified": self.disqualified,
            "coefficients": self.coefficients,
        }


def run_competition(
    data: Dataset, split: LockBoxSplit, submissions: Sequence[Submission], policy: Policy
) -> CompetitionResult:
    """Fit every submission on the training rows and rank them on the lock-box rows.

    Ranking is the lexicographic order of accuracy tier, proxy power, predictor
    count, model id and finally party name. Submissions that fail their
    commitment or fail to fit are disqualified, with the reason recorded.
    """
    if len(submissions) < 2:
        raise DataError("a competition needs at least two submissions")
    if not verify_split(data, split):
        raise LockboxError("lock-box tampered: test rows do not match the recorded digest")
    keys = [(s.party, s.spec.id) for s in submissions]
    if len(set(keys)) != len(keys):
        raise DataError("duplicate (party, model id) submissions")
    specs = [s.spec for s in submissions]
    if len({s.outcome for s in specs}) > 1 or len({s.family for s in specs}) > 1:
        raise DataError("submissions must share outcome and family")

    scored: list[ScoredModel] = []
    disqualified = []
    coefficients = {}
    train = data.take(split.train_indices)
    for sub in sorted(submissions, key=lambda s: (s.party, s.spec.id)):
        if sub.commitment is not None and not verify_commitment(sub.spec, sub.commitment):
            disqualified.append(
                {"party": sub.party, "model_id": sub.spec.id, "reason": "retrofit suspected: commitment mismatch"}
            )
            continue
        try:
            s = score_model(data, sub.spec, split, policy)
            coefficients[sub.party] = fit(train, sub.spec).coefficients
        except (FitError, DataError) as exc:
            disqualified.append({"party": sub.party, "model_id": sub.spec.id, "reason": f"fit failure: {exc}"})
            continue
        scored.append(ScoredModel(s.model_id, s.accuracy, s.proxy_power, s.predictor_count, party=sub.party))

    if not scored:
        raise DataError("every submission was disqualified")
    ordered, comps = rank_models(scored, policy)
    ranked = [
        {
            "party": s.party,
            "model_id": s.model_id,
            "accuracy": s.accuracy.value,
            "accuracy_metric": s.accuracy.metric,
            "average_proxy_power": s.proxy_power,
            "predictor_count": s.predictor_count,
        }
        for s in ordered
    ]
    trail = [c.to_dict() for c in comps]
    return CompetitionResult(split.digest, ranked, ordered[0].party, trail, disqualified, coefficients)


def run_opaque_competition(
    test: Dataset,
    predictions: Mapping[str, Sequence[float]],
    group: str,
    policy: Policy,
    select_top: int | None = None,
) -> dict:
    """Accuracy-only comparison of opaque prediction vectors.

    Proxy power cannot be measured without a model, so it is reported as
    "unmeasurable". Models are ranked by accuracy tier, then by the four-fifths
    ratio of their selections on ``group`` (closer to 1 first), then by party.
    Continuous predictions need ``select_top`` to turn them into selections.
    """
    if len(predictions) < 2:
        raise DataError("a competition needs at least two prediction sets")
    y = np.asarray(test[test.outcome], dtype=float)
    binary = test.spec(test.outcome).kind == "binary"
    g = test.labels(group)
    rows = []
    for party in sorted(predictions):
        yhat = np.asarray(predictions[party], dtype=float)
        if len(yhat) != test.n:
            raise DataError(f"party {party!r}: {len(yhat)} predictions for {test.n} rows")
        if binary:
            acc = Accuracy(float(np.mean((yhat >= 0.5) == (y == 1))), "accuracy")
            selected = (yhat >= 0.5).astype(float)
        else:
            acc = Accuracy(float(np.mean(np.abs(y - yhat))), "mae")
            if select_top is None:
                raise DataError("continuous predictions need select_top for screening")
            selected = np.zeros(test.n)
            selected[np.argsort(-yhat, kind="stable")[:select_top]] = 1.0
        screen = disparate_impact_screen(selected, g, policy)
        rows.append((party, acc, screen))
    # reuse the ranking machinery with (1 - ratio) standing in for proxy power
    scored = [ScoredModel(party, acc, 1.0 - screen["ratio"], 0, party=party) for party, acc, screen in rows]
    ordered, comps = rank_models(scored, policy)
    screens = {party: screen for party, _, screen in rows}
    return {
        "mode": "opaque",
        "proxy_power": "unmeasurable",
        "ranked": [
            {
                "party": s.party,
                "accuracy": s.accuracy.value,
                "accuracy_metric": s.accuracy.metric,
                "selection_ratio": screens[s.party]["ratio"],
                "screen": screens[s.party],
            }
            for s in ordered
        ],
        "winner": ordered[0].party,
        "trail": [c.to_dict() for c in comps],
    }
