"""Audit report container, canonical JSON and a Markdown view of it."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def to_jsonable(obj):
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


@dataclass
class AuditReport:
    command: str
    inputs: dict
    proxy_reports: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    screening: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "tool_version": self.tool_version,
                "command": self.command,
                "inputs": self.inputs,
                "proxy_reports": self.proxy_reports,
                "verdicts": self.verdicts,
                "screening": self.screening,
                "warnings": self.warnings,
                "results": self.results,
            }
        )

    def to_json(self) -> str:
        """Deterministic: identical inputs give identical bytes."""
        return canonical_json(self.to_dict())

    def envelope_json(self, timestamp: str | None = None) -> str:
        """The report wrapped with a generation timestamp kept outside it."""
        if timestamp is None:
            timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return canonical_json({"generated_at": timestamp, "report": self.to_dict()})

    def to_markdown(self) -> str:
        return render_markdown(json.loads(self.to_json()))


# --------------------------------------------------------------------------- markdown


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return f"{x:.4g}"
    return str(x)


def _table(headers: list[str], rows: list[list]) -> list[str]:
    out = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    out += ["| " + " | ".join(_fmt(c) for c in r) + " |" for r in rows]
    return out


def render_markdown(report: dict) -> str:
    """Render a report dict (as produced by ``AuditReport.to_dict``). Computes nothing."""
    lines = [f"# proxyaudit {report['command']} report", "", f"Tool version {report['tool_version']}.", ""]
    lines += ["## Inputs", ""]
    lines += _table(["input", "sha256"], [[k, v] for k, v in sorted(report["inputs"].items())])
    lines.append("")

    for pr in report["proxy_reports"]:
        lines += [f"## Proxy power: {pr['model_id']}", ""]
        lines.append(
            f"Family {pr['family']}, {pr['predictor_count']} predictors, fit statistic "
            f"{_fmt(pr['fit_statistic'])} on {pr['evaluation_set']} rows. "
            f"Average proxy power {_fmt(pr['average_proxy_power'])}."
        )
        lines.append("")
        lines += _table(
            ["protected", "semi-partial R2", "raw", "intuitive total (diagnostic)"],
            [[p, pr["semi_partial"][p], pr["semi_partial_raw"][p], pr["total_intuitive"][p]] for p in sorted(pr["semi_partial"])],
        )
        lines.append("")
        res = pr.get("residuals") or {}
        if res:
            q = res["quantiles"]
            lines.append(
                f"Residuals: mean {_fmt(res['mean'])}, sd {_fmt(res['sd'])}, median {_fmt(q['median'])}, "
                f"range [{_fmt(q['min'])}, {_fmt(q['max'])}], corr with fitted squared {_fmt(res['corr_with_fitted_squared'])}."
            )
            lines.append("")
        rows = []
        for v in pr["per_variable"]:
            for p in sorted(v["association_to_protected"]):
                rows.append([v["variable"], p, v["association_to_protected"][p], v["importance"]])
        if rows:
            lines += _table(["variable", "protected", "|association|", "importance"], rows)
            lines.append("")

    for v in report["verdicts"]:
        lines += [f"## Verdict: {v['rule']}", "", f"Winner: **{v['winner']}**.", ""]
        if v.get("ranking"):
            lines += ["Ranking: " + ", ".join(v["ranking"]), ""]
        if v.get("compliance"):
            lines += _table(["model", "compliant"], [[k, c] for k, c in v["compliance"].items()])
            lines.append("")
        if v["violations"]:
            lines += ["Violations:", ""]
            for viol in v["violations"]:
                who = viol.get("variable") or viol.get("model_id")
                lines.append(f"- `{who}` ({viol['kind']}): {viol.get('reason', '')}".rstrip(": "))
            lines.append("")

    for s in report["screening"]:
        lines += [f"## Screening: {s.get('model_id', '')} by {s.get('group', '')}", ""]
        lines += _table(["group", "selection rate", "size"], [[g, s["selection_rates"][g], s["group_sizes"][g]] for g in sorted(s["selection_rates"])])
        lines.append("")
        lines.append(
            f"Ratio {_fmt(s['ratio'])} (threshold {_fmt(s['threshold'])}), flagged: {_fmt(s['flagged'])}. "
            f"Test {s['test']}, statistic {_fmt(s['statistic'])}, p {_fmt(s['p_value'])}."
        )
        lines += ["", f"_{s['caveat']}_", ""]

    res = report.get("results") or {}
    if "ranked" in res:
        lines += ["## Competition", ""]
        if res.get("lockbox_digest"):
            lines += [f"Lock-box digest `{res['lockbox_digest']}`.", ""]
        lines += [f"Winner: **{res['winner']}**.", ""]
        headers = [k for k in ("party", "model_id", "accuracy", "average_proxy_power", "selection_ratio", "predictor_count") if k in res["ranked"][0]]
        lines += _table(headers, [[r[k] for k in headers] for r in res["ranked"]])
        lines.append("")
        for dq in res.get("disqualified", []):
            lines.append(f"- disqualified `{dq['party']}/{dq['model_id']}`: {dq['reason']}")
        if res.get("disqualified"):
            lines.append("")

    if report["warnings"]:
        lines += ["## Warnings", ""] + [f"- {w}" for w in report["warnings"]] + [""]
    return "\n".join(lines)
