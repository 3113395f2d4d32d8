"""Seeded synthetic point clouds so every experiment runs without external data."""

from __future__ import annotations

import numpy as np

from .cloud import PointCloud
from .errors import ValidationError

KINDS = ("cube", "sphere", "blobs")

_BLOB_COUNT = 4
_BLOB_STD = 0.15


def synthetic_cloud(kind: str, n: int, seed: int | np.random.SeedSequence) -> PointCloud:
    """One cloud of ``n`` points: uniform unit cube, unit-sphere surface, or Gaussian blobs."""
    if n < 1:
        raise ValidationError("synthetic cloud needs n >= 1")
    if isinstance(seed, int) and seed < 0:
        raise ValidationError("seed must be non-negative")
    rng = np.random.default_rng(seed)
    if kind == "cube":
        pts = rng.uniform(0.0, 1.0, size=(n, 3))
    elif kind == "sphere":
        v = rng.normal(size=(n, 3))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        pts = v / norms
    elif kind == "blobs":
        centers = rng.uniform(0.2, 0.8, size=(_BLOB_COUNT, 3))
        which = rng.integers(_BLOB_COUNT, size=n)
        pts = centers[which] + rng.normal(0.0, _BLOB_STD, size=(n, 3))
    else:
        raise ValidationError(f"unknown synthetic kind {kind!r}; expected one of {KINDS}")
    return PointCloud(pts)


def synthetic_batch(kind: str, n: int, count: int, seed: int) -> list[PointCloud]:
    """``count`` independent clouds; cloud i is seeded with (seed, i)."""
    if count < 1:
        raise ValidationError("synthetic batch needs count >= 1")
    return [
        synthetic_cloud(kind, n, np.random.SeedSequence([seed, i])) for i in range(count)
    ]
