"""Serialization scans over 3D point clouds.

The zigzag scan turns an unordered cloud into a spatially continuous
traversal: the cloud is layered along one axis by sorted rank, each layer is
swept along a second axis, and the sweep is chopped into segments whose third
axis alternates between ascending and descending order, producing a
boustrophedon path per layer. One such scan exists per coordinate plane:

* ``xy``: layers along Z, sweep by X, alternate by Y
* ``xz``: layers along Y, sweep by X, alternate by Z
* ``yz``: layers along X, sweep by Y, alternate by Z

A shared ``layer_budget`` M is split across the planes as
ceil(M/3) / floor(M/3) + (1 if M mod 3 >= 1) / floor(M/3) layers for
xy / xz / yz respectively.

Baseline space-filling curves (Morton a.k.a. z-order, 3D Hilbert, their
axis-transposed variants, and a seeded random shuffle) are provided for
locality comparisons, plus step-distance metrics to quantify how well an
ordering preserves spatial proximity.

All orderings are deterministic: coordinate ties are everywhere broken by the
lower original index, and every randomized choice takes an explicit seed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import ValidationError

PLANES = ("xy", "xz", "yz")
BASELINE_CURVES = ("hilbert", "trans_hilbert", "z_order", "trans_z_order", "random")
CURVE_TAGS = (
    "zigzag_xy",
    "zigzag_xz",
    "zigzag_yz",
    "hilbert",
    "trans_hilbert",
    "z_order",
    "trans_z_order",
    "random",
)

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
# plane -> (layering axis, in-layer sweep axis, alternating axis)
_PLANE_AXES = {"xy": ("z", "x", "y"), "xz": ("y", "x", "z"), "yz": ("x", "y", "z")}

MAX_QUANTIZATION_BITS = 21  # 3 * 21 = 63 interleaved bits fit in uint64


@dataclass(frozen=True)
class ScanParams:
    """Zigzag parameters: total layer budget, target segment size, segment cap."""

    layer_budget: int = 12
    segment_size: int = 16
    max_segments: int = 64

    def __post_init__(self):
        if self.layer_budget < 3:
            raise ValidationError("layer_budget must be >= 3 (one layer per plane)")
        if self.segment_size < 1:
            raise ValidationError("segment_size must be >= 1")
        if self.max_segments < 1:
            raise ValidationError("max_segments must be >= 1")

    def layers_for(self, plane: str) -> int:
        m = self.layer_budget
        if plane == "xy":
            return math.ceil(m / 3)
        if plane == "xz":
            return m // 3 + (1 if m % 3 >= 1 else 0)
        if plane == "yz":
            return m // 3
        raise ValidationError(f"unknown plane {plane!r}; expected one of {PLANES}")


@dataclass(frozen=True)
class ScanOrder:
    """A visiting order over a cloud: a permutation of 0..N-1 plus its curve tag."""

    permutation: np.ndarray
    curve_tag: str

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.int64)
        if perm.ndim != 1 or perm.size < 1:
            raise ValidationError("permutation must be a non-empty 1D index array")
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValidationError("permutation is not a bijection on 0..N-1")
        perm = perm.copy()
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)

    @property
    def n(self) -> int:
        return self.permutation.size

    def to_json_dict(self) -> dict:
        return {
            "curve_tag": self.curve_tag,
            "n": self.n,
            "permutation": [int(i) for i in self.permutation],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ScanOrder":
        perm = np.asarray(data["permutation"], dtype=np.int64)
        if perm.size != int(data["n"]):
            raise ValidationError("permutation length does not match declared n")
        return cls(permutation=perm, curve_tag=str(data["curve_tag"]))

    def to_bytes(self) -> bytes:
        """Compact binary form: u32-le count followed by u32-le indices."""
        if self.n >= 2**32:
            raise ValidationError("permutation too large for u32 encoding")
        return struct.pack(f"<I{self.n}I", self.n, *self.permutation.tolist())

    @classmethod
    def from_bytes(cls, blob: bytes, curve_tag: str = "unknown") -> "ScanOrder":
        if len(blob) < 4:
            raise ValidationError("binary scan order truncated")
        (n,) = struct.unpack_from("<I", blob)
        if len(blob) != 4 + 4 * n:
            raise ValidationError(f"binary scan order has wrong length for n={n}")
        perm = np.frombuffer(blob, dtype="<u4", offset=4).astype(np.int64)
        return cls(permutation=perm, curve_tag=curve_tag)


@dataclass(frozen=True)
class LocalityMetrics:
    """Step-distance statistics of a visiting order."""

    mean_step: float
    max_step: float
    total_path_length: float

    def to_dict(self) -> dict:
        return {
            "mean_step": self.mean_step,
            "max_step": self.max_step,
            "total_path_length": self.total_path_length,
        }


def _ascending(coords: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Indices reordered by ascending coordinate, ties by lower index."""
    return indices[np.lexsort((indices, coords))]


def _descending(coords: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Indices reordered by descending coordinate, ties by lower index."""
    return indices[np.lexsort((indices, -coords))]


def _even_split_sizes(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


def layer_partition(cloud: PointCloud, axis: str, num_layers: int) -> list[np.ndarray]:
    """Split the cloud into contiguous rank slices along one axis.

    Points are sorted ascending by the axis coordinate (ties by lower index)
    and cut into ``num_layers`` near-equal slices; the first ``N mod
    num_layers`` layers receive one extra point.
    """
    if axis not in _AXIS_INDEX:
        raise ValidationError(f"unknown axis {axis!r}; expected x, y, or z")
    n = len(cloud)
    if not 1 <= num_layers <= n:
        raise ValidationError(f"num_layers must be in [1, {n}], got {num_layers}")
    coords = cloud.points[:, _AXIS_INDEX[axis]]
    order = _ascending(coords, np.arange(n))
    layers = []
    start = 0
    for size in _even_split_sizes(n, num_layers):
        layers.append(order[start : start + size])
        start += size
    return layers


def zigzag_plane_scan(cloud: PointCloud, plane: str, params: ScanParams) -> ScanOrder:
    """Zigzag traversal on one coordinate plane.

    Layers (count from ``params.layers_for(plane)``, clamped to N) are taken
    along the plane's layering axis, each layer is sorted by the sweep axis,
    cut into S = clamp(floor(|layer| / segment_size), 1, max_segments)
    near-equal segments (first segments larger), and segment s is ordered by
    the alternating axis ascending for even s and descending for odd s.
    Segments then layers are concatenated in order.
    """
    if plane not in _PLANE_AXES:
        raise ValidationError(f"unknown plane {plane!r}; expected one of {PLANES}")
    layer_axis, sweep_axis, alt_axis = _PLANE_AXES[plane]
    n = len(cloud)
    num_layers = min(params.layers_for(plane), n)
    sweep = cloud.points[:, _AXIS_INDEX[sweep_axis]]
    alt = cloud.points[:, _AXIS_INDEX[alt_axis]]

    path = np.empty(n, dtype=np.int64)
    pos = 0
    for layer in layer_partition(cloud, layer_axis, num_layers):
        ordered = _ascending(sweep[layer], layer)
        n_segments = max(1, min(len(ordered) // params.segment_size, params.max_segments))
        start = 0
        for s, size in enumerate(_even_split_sizes(len(ordered), n_segments)):
            segment = ordered[start : start + size]
            start += size
            if s % 2 == 0:
                segment = _ascending(alt[segment], segment)
            else:
                segment = _descending(alt[segment], segment)
            path[pos : pos + size] = segment
            pos += size
    return ScanOrder(permutation=path, curve_tag=f"zigzag_{plane}")


def zigzag_scan_3d(
    cloud: PointCloud,
    params: ScanParams,
    plane: str = "xy",
    seed: int | None = None,
) -> ScanOrder:
    """Zigzag scan with plane selection; ``plane="random"`` draws one uniformly.

    The chosen plane is recorded in the returned order's ``curve_tag``.
    """
    if plane == "random":
        if seed is None:
            raise ValidationError("plane='random' requires a seed")
        rng = np.random.default_rng(seed)
        plane = PLANES[int(rng.integers(len(PLANES)))]
    return zigzag_plane_scan(cloud, plane, params)


def quantize_to_grid(points: np.ndarray, bits: int) -> np.ndarray:
    """Map points onto an integer 2^bits grid per axis over their bounding box."""
    if not 1 <= bits <= MAX_QUANTIZATION_BITS:
        raise ValidationError(f"quantization bits must be in [1, {MAX_QUANTIZATION_BITS}]")
    lo = points.min(axis=0)
    span = points.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    cells = np.floor((points - lo) / span * (1 << bits)).astype(np.int64)
    return np.clip(cells, 0, (1 << bits) - 1).astype(np.uint64)


def _spread_bits(v: np.ndarray) -> np.ndarray:
    """Space the low 21 bits of each value three apart (bit i -> bit 3i)."""
    v = v & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def morton_code(cells: np.ndarray) -> np.ndarray:
    """Interleave (x, y, z) grid coordinates bitwise, x contributing the MSB."""
    cells = np.asarray(cells, dtype=np.uint64)
    x, y, z = cells[:, 0], cells[:, 1], cells[:, 2]
    return (_spread_bits(x) << np.uint64(2)) | (_spread_bits(y) << np.uint64(1)) | _spread_bits(z)


def hilbert_index(cells: np.ndarray, bits: int) -> np.ndarray:
    """Position of each (x, y, z) grid cell along the 3D Hilbert curve.

    Skilling's transform: walk the bit planes from the top, exchanging and
    inverting axis bits so that a plain Gray-code interleave of the result
    equals the Hilbert index.
    """
    cells = np.asarray(cells, dtype=np.uint64)
    x = [cells[:, 0].copy(), cells[:, 1].copy(), cells[:, 2].copy()]
    q = np.uint64(1) << np.uint64(bits - 1)
    one = np.uint64(1)
    while q > one:
        p = q - one
        for i in range(3):
            high = (x[i] & q) != 0
            # invert x[0] where this axis bit is set, else swap low bits of x[0]/x[i]
            x[0] = np.where(high, x[0] ^ p, x[0])
            t = np.where(high, np.uint64(0), (x[0] ^ x[i]) & p)
            x[0] ^= t
            x[i] ^= t
        q >>= one
    x[1] ^= x[0]
    x[2] ^= x[1]
    t = np.zeros_like(x[2])
    q = np.uint64(1) << np.uint64(bits - 1)
    while q > one:
        t ^= np.where((x[2] & q) != 0, q - one, np.uint64(0))
        q >>= one
    for i in range(3):
        x[i] ^= t
    return (_spread_bits(x[0]) << np.uint64(2)) | (_spread_bits(x[1]) << np.uint64(1)) | _spread_bits(x[2])


def baseline_scan(
    cloud: PointCloud,
    curve: str,
    quantization_bits: int = 10,
    seed: int | None = None,
) -> ScanOrder:
    """Order the cloud along a baseline curve.

    ``z_order`` sorts by Morton code, ``hilbert`` by 3D Hilbert index, both on
    coordinates quantized to the cloud's bounding box; ``trans_`` variants
    rotate the axis roles (x, y, z) -> (y, z, x) before encoding. ``random``
    is a seeded shuffle. Equal codes fall back to the lower original index.
    """
    n = len(cloud)
    if curve == "random":
        if seed is None:
            raise ValidationError("curve='random' requires a seed")
        perm = np.random.default_rng(seed).permutation(n).astype(np.int64)
        return ScanOrder(permutation=perm, curve_tag="random")
    if curve not in BASELINE_CURVES:
        raise ValidationError(f"unknown curve {curve!r}; expected one of {BASELINE_CURVES}")
    cells = quantize_to_grid(cloud.points, quantization_bits)
    if curve.startswith("trans_"):
        cells = cells[:, [1, 2, 0]]
    if curve.endswith("hilbert"):
        code = hilbert_index(cells, quantization_bits)
    else:
        code = morton_code(cells)
    perm = np.lexsort((np.arange(n), code)).astype(np.int64)
    return ScanOrder(permutation=perm, curve_tag=curve)


def locality_metrics(cloud: PointCloud, order: ScanOrder) -> LocalityMetrics:
    """Mean, max, and total Euclidean step length between consecutive points."""
    if order.n != len(cloud):
        raise ValidationError(f"order covers {order.n} points, cloud has {len(cloud)}")
    if order.n == 1:
        return LocalityMetrics(0.0, 0.0, 0.0)
    walked = cloud.points[order.permutation]
    steps = np.linalg.norm(np.diff(walked, axis=0), axis=1)
    return LocalityMetrics(
        mean_step=float(steps.mean()),
        max_step=float(steps.max()),
        total_path_length=float(steps.sum()),
    )
