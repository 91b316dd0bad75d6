"""Command-line entry point.

Exit codes: 0 clean, 1 violations or flags found, 2 input error, 3 numerical
failure (non-convergence, separation).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .competition import Commitment, Submission, commit_model, run_competition
from .data import Dataset, dump_csv, load_dataset, load_schema, lockbox_split, schema_to_json
from .errors import CommitmentError, DataError, FitError, LockboxError, StatsError
from .glm import ModelSpec, fit, predict
from .proxy import proxy_power_report
from .report import AuditReport, canonical_json, sha256_hex
from .rules import Policy, capped_rule, disparate_impact_screen, no_proxy_rule_check, score_model, select_min_proxy
from .scenarios import SCENARIOS, ScenarioConfig, generate

EXIT_CLEAN, EXIT_FLAGGED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "PROXYAUDIT_SEED"


class _Collector(logging.Handler):
    """Keeps library warnings so they can go into the report."""

    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        msg = record.getMessage()
        if msg not in self.messages:
            self.messages.append(msg)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        value = int(raw)
    except ValueError as exc:
        raise DataError(f"{SEED_ENV} must be a non-negative integer, got {raw!r}") from exc
    if value < 0:
        raise DataError(f"{SEED_ENV} must be a non-negative integer, got {raw!r}")
    return value


def _load_data(args) -> tuple[Dataset, dict]:
    if not args.data or not args.schema:
        raise DataError("--data and --schema are required")
    schema_text = _read(args.schema)
    data_text = _read(args.data)
    d = load_dataset(data_text, load_schema(schema_text))
    return d, {"data": sha256_hex(data_text), "schema": sha256_hex(schema_text)}


def _load_policy(args, d: Dataset) -> tuple[Policy, dict]:
    inputs = {}
    raw: dict = {}
    if args.policy:
        text = _read(args.policy)
        inputs["policy"] = sha256_hex(text)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed policy JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError("policy JSON must be an object")
    protected = [p for group in (args.protected or []) for p in group.split(",") if p]
    if protected:
        raw = {**raw, "protected": protected}
    if not raw.get("protected"):
        raw = {**raw, "protected": d.by_role("protected")}
    policy = Policy.from_dict(raw)
    if not policy.protected:
        raise DataError("no protected columns: pass --protected or mark columns protected in the schema")
    for p in policy.protected:
        d.spec(p)
    inputs["policy_effective"] = sha256_hex(canonical_json(policy.to_dict()))
    return policy, inputs


def _load_models(paths) -> tuple[list[ModelSpec], dict]:
    specs, inputs = [], {}
    for path in paths or []:
        text = _read(path)
        spec = ModelSpec.from_json(text)
        specs.append(spec)
        inputs[f"model:{spec.id}"] = sha256_hex(text)
    return specs, inputs


def _selections(model, test: Dataset) -> tuple[np.ndarray, str]:
    scores = predict(model, test)
    if model.family == "logistic":
        return (scores >= 0.5).astype(float), "predicted probability >= 0.5"
    return (scores > np.median(scores)).astype(float), "prediction above the lock-box median"


def _screen(model, test: Dataset, policy: Policy, warnings: list[str]) -> list[dict]:
    selected, rule = _selections(model, test)
    out = []
    for p in policy.protected:
        levels = np.unique(test.labels(p))
        if len(levels) != 2:
            warnings.append(f"screening skipped for {p}: {len(levels)} levels, four-fifths screen needs two")
            continue
        res = disparate_impact_screen(selected, test.labels(p), policy)
        out.append({"model_id": model.spec.id, "group": p, "selection_rule": rule, **res})
    return out


# --------------------------------------------------------------------------- subcommands


def cmd_audit(args) -> tuple[AuditReport | None, int]:
    d, inputs = _load_data(args)
    specs, model_inputs = _load_models(args.model)
    if len(specs) != 1:
        raise DataError("audit takes exactly one --model")
    spec = specs[0]
    policy, policy_inputs = _load_policy(args, d)
    inputs.update(model_inputs, **policy_inputs)
    split = lockbox_split(d, args.lockbox_fraction, _seed(args))
    warnings: list[str] = []

    verdict = no_proxy_rule_check(d, spec, policy)
    report = proxy_power_report(d, spec, policy.protected, policy.weights, split=split)
    warnings += report.warnings
    model = fit(d.take(split.train_indices), spec)
    screening = _screen(model, d.take(split.test_indices), policy, warnings)
    flagged = verdict.flagged or any(s["flagged"] for s in screening)
    out = AuditReport(
        "audit",
        inputs,
        proxy_reports=[report.to_dict()],
        verdicts=[verdict.to_dict()],
        screening=screening,
        warnings=warnings,
        results={"lockbox": split.to_dict(), "model": model.to_dict()},
    )
    return out, EXIT_FLAGGED if flagged else EXIT_CLEAN


def _load_measurements(paths) -> tuple[list[dict], dict]:
    items, inputs = [], {}
    for path in paths:
        text = _read(path)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed measurement JSON in {path}: {exc}") from exc
        entries = raw if isinstance(raw, list) else [raw]
        for e in entries:
            if not isinstance(e, dict) or "model_id" not in e or "semi_partial" not in e:
                raise DataError(f"{path}: measurement needs model_id and semi_partial")
            items.append({"model_id": str(e["model_id"]), "semi_partial": float(e["semi_partial"])})
            inputs[f"measurement:{e['model_id']}"] = sha256_hex(text)
    return items, inputs


def cmd_compare(args) -> tuple[AuditReport | None, int]:
    if args.measurements:
        if args.model:
            raise DataError("pass either --model or --measurements, not both")
        items, inputs = _load_measurements(args.measurements)
        policy = Policy()
        if args.policy:
            text = _read(args.policy)
            inputs["policy"] = sha256_hex(text)
            policy = Policy.from_json(text)
        verdict = capped_rule(items, policy)
        out = AuditReport("compare", inputs, verdicts=[verdict.to_dict()], results={"measurements": items})
        return out, EXIT_FLAGGED if verdict.flagged else EXIT_CLEAN

    d, inputs = _load_data(args)
    specs, model_inputs = _load_models(args.model)
    if len(specs) < 2:
        raise DataError("compare needs at least two --model files")
    policy, policy_inputs = _load_policy(args, d)
    inputs.update(model_inputs, **policy_inputs)
    split = lockbox_split(d, args.lockbox_fraction, _seed(args))
    reports = [proxy_power_report(d, s, policy.protected, policy.weights, split=split) for s in specs]
    warnings = [w for r in reports for w in r.warnings]
    scored = [score_model(d, s, split, policy) for s in specs]
    rule = policy.comparison_rule
    if rule == "capped":
        verdict = capped_rule([(s.model_id, s.proxy_power) for s in scored], policy)
    elif rule == "no_proxy":
        raise DataError("rule no_proxy applies to a single model; use audit")
    else:
        verdict = select_min_proxy(scored, policy, rule)
    out = AuditReport(
        "compare",
        inputs,
        proxy_reports=[r.to_dict() for r in reports],
        verdicts=[verdict.to_dict()],
        warnings=warnings,
        results={"lockbox": split.to_dict(), "scores": [s.to_dict() for s in scored]},
    )
    return out, EXIT_FLAGGED if verdict.flagged else EXIT_CLEAN


def _load_submissions(directory: str, warnings: list[str]) -> tuple[list[Submission], dict]:
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"submissions directory {directory} not found")
    subs, inputs = [], {}
    for path in sorted(root.glob("*.json")):
        text = path.read_text(encoding="utf-8")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed submission {path.name}: {exc}") from exc
        party = str(raw.pop("party", path.stem))
        spec = ModelSpec.from_dict(raw)
        sidecar = root / f"{spec.id}.commit"
        commitment = None
        if sidecar.exists():
            try:
                commitment = Commitment.from_dict(json.loads(sidecar.read_text(encoding="utf-8")))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"malformed commitment {sidecar.name}: {exc}") from exc
        else:
            warnings.append(f"submission {party}/{spec.id} has no commitment file")
        subs.append(Submission(party, spec, commitment))
        inputs[f"submission:{party}/{spec.id}"] = sha256_hex(text)
    if not subs:
        raise DataError(f"no *.json submissions in {directory}")
    return subs, inputs


def cmd_compete(args) -> tuple[AuditReport | None, int]:
    d, inputs = _load_data(args)
    if not args.submissions:
        raise DataError("compete needs --submissions")
    warnings: list[str] = []
    subs, sub_inputs = _load_submissions(args.submissions, warnings)
    policy, policy_inputs = _load_policy(args, d)
    inputs.update(sub_inputs, **policy_inputs)
    split = lockbox_split(d, args.lockbox_fraction, _seed(args))
    result = run_competition(d, split, subs, policy)
    out = AuditReport("compete", inputs, warnings=warnings, results=result.to_dict())
    return out, EXIT_FLAGGED if result.disqualified else EXIT_CLEAN


def cmd_simulate(args) -> tuple[AuditReport | None, int]:
    if not args.scenario:
        raise DataError("simulate needs --scenario")
    params = {}
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise DataError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = float(value)
        except ValueError as exc:
            raise DataError(f"--param {key}: not a number") from exc
    cfg = ScenarioConfig(args.scenario, args.n, _seed(args), args.noise, params)
    d = generate(cfg)
    csv_path = Path(args.out or f"{args.scenario}.csv")
    schema_path = csv_path.with_name(csv_path.stem + ".schema.json")
    try:
        csv_path.write_text(dump_csv(d), encoding="utf-8", newline="")
        schema_path.write_text(schema_to_json(d.schema) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write output: {exc}") from exc
    print(f"wrote {csv_path} ({d.n} rows) and {schema_path}")
    return None, EXIT_CLEAN


def cmd_commit(args) -> tuple[AuditReport | None, int]:
    specs, _ = _load_models(args.model)
    if len(specs) != 1:
        raise DataError("commit takes exactly one --model")
    c = commit_model(specs[0])
    print(c.digest)
    if args.out:
        try:
            Path(args.out).write_text(json.dumps(c.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc}") from exc
    return None, EXIT_CLEAN


COMMANDS = {
    "audit": cmd_audit,
    "compare": cmd_compare,
    "compete": cmd_compete,
    "simulate": cmd_simulate,
    "commit": cmd_commit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxyaudit", description="Audit decision models for proxy discrimination.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", help="CSV file")
            p.add_argument("--schema", help="schema JSON file")
            p.add_argument("--policy", help="policy JSON file")
            p.add_argument("--protected", action="append", help="protected column(s), comma separated; repeatable")
            p.add_argument("--lockbox-fraction", type=float, default=0.3)
        p.add_argument("--seed", type=int, default=None, help=f"overrides ${SEED_ENV}")
        p.add_argument("--out", help="output path")
        p.add_argument("--format", choices=("json", "md"), default="json")

    p = sub.add_parser("audit", help="no-proxy check, proxy-power report and screening for one model")
    common(p)
    p.add_argument("--model", action="append", help="model spec JSON")
    p = sub.add_parser("compare", help="rank two or more models under the policy's rule")
    common(p)
    p.add_argument("--model", action="append", help="model spec JSON; repeat for each model")
    p.add_argument("--measurements", action="append", help="JSON {model_id, semi_partial} for the capped rule")
    p = sub.add_parser("compete", help="lock-box competition over a submissions directory")
    common(p)
    p.add_argument("--submissions", help="directory of spec JSON files with optional <model_id>.commit sidecars")
    p = sub.add_parser("simulate", help="write a synthetic scenario CSV and schema")
    common(p, data=False)
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--param", action="append", help="scenario parameter key=value")
    p = sub.add_parser("commit", help="print the SHA-256 commitment of a model spec")
    common(p, data=False)
    p.add_argument("--model", action="append", help="model spec JSON")
    return parser


def _emit(report: AuditReport, args) -> None:
    text = report.to_markdown() if args.format == "md" else report.to_json()
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if args.out:
        out = Path(args.out)
        out.write_text(report.envelope_json(), encoding="utf-8")
        if args.format == "md":
            out.with_suffix(".md").write_text(report.to_markdown(), encoding="utf-8")


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CLEAN if exc.code == 0 else EXIT_INPUT
    collector = _Collector()
    pkg_log = logging.getLogger("proxyaudit")
    pkg_log.addHandler(collector)
    pkg_log.propagate = False
    try:
        report, code = COMMANDS[args.command](args)
        if report is not None:
            report.warnings = list(report.warnings) + [m for m in collector.messages if m not in report.warnings]
            _emit(report, args)
        return code
    except (DataError, CommitmentError, LockboxError, OSError, json.JSONDecodeError) as exc:
        print(f"proxyaudit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, StatsError) as exc:
        print(f"proxyaudit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        pkg_log.removeHandler(collector)
        pkg_log.propagate = True


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
