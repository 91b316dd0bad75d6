"""Proxy-power auditing for statistical decision models."""

from __future__ import annotations

__version__ = "0.1.0"

from .competition import Commitment, Submission, commit_model, run_competition, run_opaque_competition, spec_digest
from .data import ColumnSchema, Dataset, LockBoxSplit, dump_csv, load_dataset, load_schema, lockbox_split, verify_split
from .errors import (
    CommitmentError,
    ConvergenceError,
    DataError,
    FitError,
    LockboxError,
    ProxyAuditError,
    SeparationError,
    StatsError,
)
from .glm import Accuracy, FittedModel, ModelSpec, fit, mean_accuracy, predict
from .proxy import (
    average_proxy_power,
    detect_substitute,
    intuitive_total_proxy_power,
    pope_sydnor_decomposition,
    proxy_power_report,
    semi_partial_r2,
    variable_importance,
)
from .report import AuditReport
from .rules import (
    Policy,
    Verdict,
    capped_rule,
    compare_min_proxy_power,
    disparate_impact_screen,
    lexicographic_compare,
    no_proxy_rule_check,
)
from .scenarios import ScenarioConfig, generate

__all__ = [
    "Accuracy",
    "AuditReport",
    "ColumnSchema",
    "Commitment",
    "CommitmentError",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "FitError",
    "FittedModel",
    "LockBoxSplit",
    "LockboxError",
    "ModelSpec",
    "Policy",
    "ProxyAuditError",
    "ScenarioConfig",
    "SeparationError",
    "StatsError",
    "Submission",
    "Verdict",
    "average_proxy_power",
    "capped_rule",
    "commit_model",
    "compare_min_proxy_power",
    "detect_substitute",
    "disparate_impact_screen",
    "dump_csv",
    "fit",
    "generate",
    "intuitive_total_proxy_power",
    "lexicographic_compare",
    "load_dataset",
    "load_schema",
    "lockbox_split",
    "mean_accuracy",
    "no_proxy_rule_check",
    "pope_sydnor_decomposition",
    "predict",
    "proxy_power_report",
    "run_competition",
    "run_opaque_competition",
    "semi_partial_r2",
    "spec_digest",
    "variable_importance",
    "verify_split",
]
