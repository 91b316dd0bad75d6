from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from proxyaudit.data import ColumnSchema, Dataset


def make_dataset(*cols) -> Dataset:
    """``cols`` are ``(name, kind, role, values)`` or ``(name, kind, role, values, categories)``."""
    schema, data = [], {}
    for c in cols:
        name, kind, role, values = c[:4]
        cats = c[4] if len(c) > 4 else ()
        if kind == "categorical" and not cats:
            cats = tuple(sorted(set(map(str, values))))
        schema.append(ColumnSchema(name, kind, role, tuple(cats)))
        data[name] = np.asarray(values)
    return Dataset(tuple(schema), data)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
