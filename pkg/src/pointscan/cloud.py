"""Point-cloud container, preprocessing, sampling, grouping, and token encoding.

The processing chain implemented here turns a raw cloud into patch tokens:
center the cloud and scale it into the unit sphere, pick patch centers with
farthest point sampling, gather each center's k-nearest neighborhood, and run
a small shared per-point MLP with max-pooling over every patch to produce one
feature vector per patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# All-equal clouds collapse to a bounding radius of exactly zero only when the
# centroid subtraction is exact; FP dust below this (relative) radius is
# treated as degenerate as well.
_DEGENERATE_RADIUS = 1e-12


@dataclass(frozen=True)
class PointCloud:
    """An ordered list of 3D points, shape (N, 3), float64, all finite, N >= 1."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"points must have shape (N, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise ValidationError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point cloud contains non-finite coordinates")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass
class TokenGroup:
    """One patch: a center index, its k-neighborhood, and (once encoded) a feature."""

    center_index: int
    neighbor_indices: np.ndarray
    feature: np.ndarray | None = None


@dataclass(frozen=True)
class EncoderWeights:
    """Weights of the shared per-point MLP used for patch encoding.

    ``layers`` is a sequence of (weight, bias) pairs; weight has shape
    (out_dim, in_dim) and bias (out_dim,). The first layer consumes 3D
    center-relative coordinates and a ReLU sits between layers (none after
    the last). Patch aggregation is a coordinate-wise max over the patch.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...] = field(default=())

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("encoder needs at least one layer")
        frozen = []
        in_dim = 3
        for i, (w, b) in enumerate(self.layers):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValidationError(f"encoder layer {i} has inconsistent shapes")
            if w.shape[1] != in_dim:
                raise ValidationError(
                    f"encoder layer {i} expects input dim {w.shape[1]}, previous layer outputs {in_dim}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValidationError(f"encoder layer {i} has non-finite parameters")
            in_dim = w.shape[0]
            frozen.append((w, b))
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def channels(self) -> int:
        return self.layers[-1][0].shape[0]

    @classmethod
    def seeded(cls, seed: int, hidden: int = 32, channels: int = 16) -> "EncoderWeights":
        """Random 3 -> hidden -> channels MLP with He-scaled weights."""
        rng = np.random.default_rng(seed)
        sizes = (3, hidden, channels)
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
            b = np.zeros(fan_out)
            layers.append((w, b))
        return cls(layers=tuple(layers))


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center the cloud at the origin and scale the farthest point to norm 1.

    A cloud of identical points maps to all zeros.
    """
    pts = cloud.points
    centered = pts - pts.mean(axis=0)
    radius = float(np.linalg.norm(centered, axis=1).max())
    if radius <= _DEGENERATE_RADIUS * max(1.0, float(np.abs(pts).max())):
        return PointCloud(np.zeros_like(pts))
    return PointCloud(centered / radius)


def farthest_point_sampling(cloud: PointCloud, count: int, seed: int) -> np.ndarray:
    """Select ``count`` spread-out point indices.

    The first index is drawn uniformly from a generator seeded with ``seed``;
    every following pick maximizes the minimum squared distance to the points
    already selected, ties going to the lowest index.
    """
    n = len(cloud)
    if not 1 <= count <= n:
        raise ValidationError(f"sample count must be in [1, {n}], got {count}")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    selected = np.empty(count, dtype=np.int64)
    selected[0] = first
    pts = cloud.points
    min_d2 = np.sum((pts - pts[first]) ** 2, axis=1)
    min_d2[first] = -1.0  # never re-pick
    for i in range(1, count):
        nxt = int(np.argmax(min_d2))
        selected[i] = nxt
        d2 = np.sum((pts - pts[nxt]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2)
        min_d2[nxt] = -1.0
    return selected


def knn_group(cloud: PointCloud, centers: np.ndarray | list[int], k: int) -> list[TokenGroup]:
    """Gather the k-nearest neighborhood of every center (features left unset).

    The center itself always belongs to its group; the remaining k - 1 slots
    are filled by squared Euclidean distance, ties broken by lowest index.
    Neighborhoods of different centers may overlap.
    """
    n = len(cloud)
    centers = np.asarray(centers, dtype=np.int64)
    if centers.size == 0:
        raise ValidationError("centers must be non-empty")
    if centers.min() < 0 or centers.max() >= n:
        raise ValidationError("center index out of range")
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    pts = cloud.points
    idx = np.arange(n)
    groups = []
    for c in centers:
        d2 = np.sum((pts - pts[c]) ** 2, axis=1)
        order = np.lexsort((idx, d2))
        nearest = order[order != c][: k - 1]
        neighbors = np.concatenate(([c], nearest))
        groups.append(TokenGroup(center_index=int(c), neighbor_indices=neighbors))
    return groups


def encode_tokens(
    cloud: PointCloud, groups: list[TokenGroup], weights: EncoderWeights
) -> list[TokenGroup]:
    """Encode every group: shared MLP on center-relative coordinates, max-pooled.

    Returns new TokenGroup objects with ``feature`` set; deterministic, and
    unchanged under any global translation of the cloud because only offsets
    from the center enter the MLP.
    """
    pts = cloud.points
    out = []
    for g in groups:
        rel = pts[g.neighbor_indices] - pts[g.center_index]
        h = rel
        last = len(weights.layers) - 1
        for i, (w, b) in enumerate(weights.layers):
            h = h @ w.T + b
            if i != last:
                np.maximum(h, 0.0, out=h)
        feature = h.max(axis=0)
        out.append(
            TokenGroup(
                center_index=g.center_index,
                neighbor_indices=g.neighbor_indices,
                feature=feature,
            )
        )
    return out


def token_features(groups: list[TokenGroup]) -> np.ndarray:
    """Stack encoded group features into a (G, C) matrix."""
    feats = []
    for i, g in enumerate(groups):
        if g.feature is None:
            raise ValidationError(f"group {i} has no feature; run encode_tokens first")
        feats.append(g.feature)
    return np.stack(feats)
