"""Typed tabular datasets, design matrices and lock-box splits."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .prng import Stream

KINDS = ("continuous", "binary", "categorical")
ROLES = ("outcome", "predictor", "protected", "ignored")
INTERCEPT = "(intercept)"


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    role: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise DataError("column name must be a non-empty string")
        if self.kind not in KINDS:
            raise DataError(f"unknown kind {self.kind!r}", column=self.name)
        if self.role not in ROLES:
            raise DataError(f"unknown role {self.role!r}", column=self.name)
        cats = tuple(str(c) for c in self.categories)
        if self.kind == "binary" and not cats:
            cats = ("0", "1")
        object.__setattr__(self, "categories", cats)
        if len(set(cats)) != len(cats):
            raise DataError("duplicate category labels", column=self.name)
        if self.kind == "categorical" and len(cats) < 2:
            raise DataError("categorical column needs at least 2 categories", column=self.name)
        if self.kind == "binary" and len(cats) != 2:
            raise DataError("binary column needs exactly 2 categories", column=self.name)
        if self.kind == "continuous" and cats:
            raise DataError("continuous column cannot list categories", column=self.name)

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "role": self.role}
        if self.kind != "continuous":
            out["categories"] = list(self.categories)
        return out


def validate_schema(schema: Iterable[ColumnSchema]) -> tuple[ColumnSchema, ...]:
    schema = tuple(schema)
    names = [c.name for c in schema]
    dupes = sorted(n for n, k in Counter(names).items() if k > 1)
    if dupes:
        raise DataError(f"duplicate column names in schema: {dupes}")
    outcomes = [c.name for c in schema if c.role == "outcome"]
    if len(outcomes) != 1:
        raise DataError(f"schema needs exactly one outcome column, found {len(outcomes)}")
    return schema


def load_schema(text: str) -> tuple[ColumnSchema, ...]:
    """Parse the schema sidecar ``{"columns": [{"name", "kind", "role", "categories"}]}``."""
    try:
        raw = json.loads(text)
        cols = raw["columns"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed schema JSON: {exc}") from exc
    schema = []
    for c in cols:
        try:
            schema.append(ColumnSchema(c["name"], c["kind"], c["role"], tuple(c.get("categories") or ())))
        except KeyError as exc:
            raise DataError(f"schema entry missing field {exc}") from exc
    return validate_schema(schema)


def schema_to_json(schema: Sequence[ColumnSchema]) -> str:
    return json.dumps({"columns": [c.to_dict() for c in schema]}, indent=2) + "\n"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column-oriented table.

    Continuous and binary columns hold float arrays (binary as 0/1, indexing the
    schema's two category labels); categorical columns hold string arrays.
    """

    schema: tuple[ColumnSchema, ...]
    columns: dict

    def __post_init__(self):
        schema = validate_schema(self.schema)
        object.__setattr__(self, "schema", schema)
        cols = {}
        n = None
        for spec in schema:
            if spec.name not in self.columns:
                raise DataError("missing column", column=spec.name)
            arr = np.asarray(self.columns[spec.name])
            if spec.kind == "categorical":
                arr = arr.astype(str)
                bad = ~np.isin(arr, spec.categories)
                if bad.any():
                    i = int(np.argmax(bad))
                    raise DataError(f"unknown category label {arr[i]!r}", row=i + 1, column=spec.name)
            else:
                arr = arr.astype(float)
                if not np.all(np.isfinite(arr)):
                    i = int(np.argmax(~np.isfinite(arr)))
                    raise DataError("non-finite value", row=i + 1, column=spec.name)
                if spec.kind == "binary" and not np.all((arr == 0) | (arr == 1)):
                    i = int(np.argmax((arr != 0) & (arr != 1)))
                    raise DataError("binary value must be 0 or 1", row=i + 1, column=spec.name)
            if arr.ndim != 1:
                raise DataError("column must be one-dimensional", column=spec.name)
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise DataError("ragged columns", column=spec.name)
            arr = arr.copy()
            arr.setflags(write=False)
            cols[spec.name] = arr
        if n is None or n < 2:
            raise DataError("dataset needs at least 2 rows")
        object.__setattr__(self, "columns", cols)

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    @property
    def outcome(self) -> str:
        return next(c.name for c in self.schema if c.role == "outcome")

    def by_role(self, role: str) -> list[str]:
        return [c.name for c in self.schema if c.role == role]

    def spec(self, name: str) -> ColumnSchema:
        for c in self.schema:
            if c.name == name:
                return c
        raise DataError("unknown column", column=name)

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError("unknown column", column=name)
        return self.columns[name]

    def labels(self, name: str) -> np.ndarray:
        """Column values as category labels (binary 0/1 mapped through the schema)."""
        spec = self.spec(name)
        col = self[name]
        if spec.kind == "binary":
            return np.where(col == 1, spec.categories[1], spec.categories[0])
        return col

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, {k: v[idx] for k, v in self.columns.items()})

    def with_roles(self, **roles: str) -> "Dataset":
        """Copy with some column roles replaced, e.g. ``with_roles(origin="outcome", y="ignored")``."""
        schema = tuple(
            ColumnSchema(c.name, c.kind, roles.get(c.name, c.role), c.categories) for c in self.schema
        )
        return Dataset(schema, dict(self.columns))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset) or self.schema != other.schema:
            return False
        return all(np.array_equal(self.columns[k], other.columns[k]) for k in self.columns)

    __hash__ = None


def _format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 2**53:
        return str(int(x))
    return format(float(x), ".17g")


def dump_csv(d: Dataset, indices: Iterable[int] | None = None) -> str:
    """Canonical CSV: header, rows in the given (or natural) order, 17 significant digits, LF."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(d.names)
    idx = range(d.n) if indices is None else indices
    cols = [(c.kind, d[c.name]) for c in d.schema]
    for i in idx:
        w.writerow([str(col[i]) if kind == "categorical" else _format_number(col[i]) for kind, col in cols])
    return buf.getvalue()


def load_dataset(csv_text: str, schema: Sequence[ColumnSchema]) -> Dataset:
    """Parse CSV text against ``schema``; columns come back in schema order.

    Row numbers in errors count data rows from 1 (the header is row 0).
    """
    schema = validate_schema(schema)
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty CSV") from None
    dupes = sorted(n for n, k in Counter(header).items() if k > 1)
    if dupes:
        raise DataError(f"duplicate header {dupes}", row=0)
    names = [c.name for c in schema]
    for name in names:
        if name not in header:
            raise DataError("missing column", row=0, column=name)
    extra = [h for h in header if h not in names]
    if extra:
        raise DataError(f"columns not in schema: {extra}", row=0)
    pos = {h: i for i, h in enumerate(header)}
    raw: dict[str, list] = {n: [] for n in names}
    for r, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, got {len(row)}", row=r)
        for spec in schema:
            cell = row[pos[spec.name]].strip()
            if cell == "":
                raise DataError("missing value", row=r, column=spec.name)
            raw[spec.name].append(_parse_cell(cell, spec, r))
    if not raw[names[0]]:
        raise DataError("no data rows")
    return Dataset(schema, raw)


def _parse_cell(cell: str, spec: ColumnSchema, row: int):
    if spec.kind == "categorical":
        if cell not in spec.categories:
            raise DataError(f"unknown category label {cell!r}", row=row, column=spec.name)
        return cell
    if spec.kind == "binary" and cell in spec.categories:
        return float(spec.categories.index(cell))
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r}", row=row, column=spec.name) from None
    if not np.isfinite(value):
        raise DataError(f"non-finite value {cell!r}", row=row, column=spec.name)
    if spec.kind == "binary" and value not in (0.0, 1.0):
        raise DataError(f"binary value must be 0, 1 or a category label, got {cell!r}", row=row, column=spec.name)
    return value


# --------------------------------------------------------------------------- design


@dataclass(frozen=True)
class Term:
    """One design column: a numeric source column or one indicator level."""

    name: str
    source: str
    level: str | None = None


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    terms: tuple[Term, ...]
    excluded: tuple[tuple[str, str], ...] = ()
    references: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return [t.name for t in self.terms]

    def sources(self) -> list[str]:
        return list(dict.fromkeys(t.source for t in self.terms if t.source != INTERCEPT))


def reference_level(values: np.ndarray, categories: Sequence[str]) -> str:
    """Most frequent level; ties go to the alphabetically smallest label."""
    counts = Counter(values.tolist())
    return min(categories, key=lambda c: (-counts.get(c, 0), c))


def _term_column(d: Dataset, term: Term) -> np.ndarray:
    if term.source == INTERCEPT:
        return np.ones(d.n)
    if term.level is None:
        return np.asarray(d[term.source], dtype=float)
    return (d.labels(term.source) == term.level).astype(float)


def encode_design(d: Dataset, predictors: Sequence[str], terms: Sequence[Term] | None = None) -> DesignMatrix:
    """Intercept plus one column per numeric predictor and per non-reference level.

    With ``terms`` (taken from a fitted model) the same columns are rebuilt on
    new data and nothing is excluded.
    """
    if terms is not None:
        X = np.column_stack([_term_column(d, t) for t in terms])
        return DesignMatrix(X, tuple(terms))
    seen = set()
    for name in predictors:
        spec = d.spec(name)
        if spec.role not in ("predictor", "protected"):
            raise DataError(f"column has role {spec.role!r}, not predictor/protected", column=name)
        if name in seen:
            raise DataError("predictor listed twice", column=name)
        seen.add(name)
    order = [c.name for c in d.schema if c.name in seen]
    out_terms = [Term(INTERCEPT, INTERCEPT)]
    cols = [np.ones(d.n)]
    excluded = []
    refs = {}
    for name in order:
        spec = d.spec(name)
        if spec.kind == "categorical":
            labels = d[name]
            ref = reference_level(labels, spec.categories)
            refs[name] = ref
            candidates = [Term(f"{name}[{lvl}]", name, lvl) for lvl in spec.categories if lvl != ref]
        else:
            candidates = [Term(name, name)]
        for t in candidates:
            col = _term_column(d, t)
            if np.ptp(col) == 0.0:
                excluded.append((t.name, "constant column"))
                continue
            out_terms.append(t)
            cols.append(col)
    return DesignMatrix(np.column_stack(cols), tuple(out_terms), tuple(excluded), refs)


# --------------------------------------------------------------------------- lock-box


@dataclass(frozen=True)
class LockBoxSplit:
    seed: int
    test_fraction: float
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    digest: str

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "train_indices": list(self.train_indices),
            "test_indices": list(self.test_indices),
            "digest": self.digest,
        }


def rows_digest(d: Dataset, indices: Iterable[int]) -> str:
    """SHA-256 of the canonical CSV of the given rows, in ascending index order."""
    text = dump_csv(d, sorted(int(i) for i in indices))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def lockbox_size(n: int, test_fraction: float) -> int:
    k = int(np.floor(n * test_fraction + 0.5))
    return min(max(k, 1), n - 1)


def lockbox_split(d: Dataset, test_fraction: float = 0.3, seed: int = 0) -> LockBoxSplit:
    """Seeded partition of rows into train and hidden test sets.

    Rows are ordered by SplitMix64 draws from the ``"lockbox"`` substream; the
    first ``round(n * test_fraction)`` (half-up, clamped to [1, n-1]) are test.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if d.n < 2:
        raise DataError("need at least 2 rows to split")
    perm = Stream(seed, "lockbox").permutation(d.n)
    k = lockbox_size(d.n, test_fraction)
    test = tuple(sorted(int(i) for i in perm[:k]))
    train = tuple(sorted(int(i) for i in perm[k:]))
    return LockBoxSplit(int(seed), float(test_fraction), train, test, rows_digest(d, test))


def verify_split(d: Dataset, split: LockBoxSplit) -> bool:
    return rows_digest(d, split.test_indices) == split.digest
