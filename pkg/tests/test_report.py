from __future__ import annotations

import json
import math

import numpy as np
import pytest

from proxyaudit.report import AuditReport, canonical_json, render_markdown, to_jsonable


def test_to_jsonable_handles_numpy_and_nonfinite():
    out = to_jsonable({"a": np.float64(1.5), "b": np.int64(2), "c": [math.nan, math.inf], "d": np.array([1, 2]), "e": np.bool_(True)})
    assert out == {"a": 1.5, "b": 2, "c": [None, None], "d": [1, 2], "e": True}
    with pytest.raises(TypeError):
        to_jsonable(object())


def test_canonical_json_sorted():
    text = canonical_json({"b": 1, "a": {"d": 2, "c": 3}})
    assert text.index('"a"') < text.index('"b"') and text.index('"c"') < text.index('"d"')


def test_envelope_keeps_report_stable():
    r = AuditReport("audit", {"data": "00"}, warnings=["w"])
    e1 = json.loads(r.envelope_json("2020-01-01T00:00:00+00:00"))
    e2 = json.loads(r.envelope_json("2021-01-01T00:00:00+00:00"))
    assert e1["report"] == e2["report"] == json.loads(r.to_json())


def test_markdown_is_derived_from_json():
    r = AuditReport(
        "compare",
        {"policy": "ab"},
        verdicts=[{"rule": "capped", "winner": "m1", "ranking": ["m1", "m2"], "compliance": {"m1": True, "m2": False}, "violations": [{"model_id": "m2", "kind": "over_cap", "reason": "above cap"}], "margins": {}, "trail": []}],
    )
    md = r.to_markdown()
    assert md == render_markdown(json.loads(r.to_json()))
    assert "Winner: **m1**" in md and "`m2` (over_cap): above cap" in md
