"""Constructed datasets shared by several test modules."""

from __future__ import annotations

import numpy as np
from conftest import make_dataset


def orthonormal_columns(n: int, k: int, seed: int = 0) -> np.ndarray:
    """k centred, unit-norm, mutually orthogonal columns."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), rng.normal(size=(n, k))]))
    return q[:, 1:]


def cumulative_r2_fixture(n: int = 40):
    """y = sqrt(.65) x + sqrt(.05) r + sqrt(.30) e: R² 0.65 on x alone, 0.70 with r."""
    x, r, e = orthonormal_columns(n, 3).T
    y = np.sqrt(0.65) * x + np.sqrt(0.05) * r + np.sqrt(0.30) * e
    return make_dataset(
        ("x", "continuous", "predictor", x),
        ("race", "continuous", "protected", r),
        ("y", "continuous", "outcome", y),
    )
