"""Point-cloud file readers.

Three formats are supported:

* ``xyz_text``   -- one point per line, three whitespace-separated reals;
                    ``#``-prefixed comment lines and blank lines are ignored.
* ``ply_ascii``  -- minimal ASCII PLY: an ``element vertex n`` declaration with
                    float ``x``/``y``/``z`` properties; other vertex properties
                    are ignored, other elements (faces etc.) are never read.
* ``f32le_bin``  -- raw little-endian 32-bit floats, (x, y, z) triples back to
                    back; the byte length must be a multiple of 12.
"""

from __future__ import annotations

import os

import numpy as np

from .cloud import PointCloud
from .errors import EmptyInputError, ParseError

FORMATS = ("xyz_text", "ply_ascii", "f32le_bin")


def load_pointcloud(path: str | os.PathLike, fmt: str) -> PointCloud:
    """Read ``path`` in the declared format, preserving point order exactly."""
    path = os.fspath(path)
    if fmt == "xyz_text":
        return _load_xyz(path)
    if fmt == "ply_ascii":
        return _load_ply(path)
    if fmt == "f32le_bin":
        return _load_bin(path)
    raise ParseError(f"unknown format {fmt!r}; expected one of {FORMATS}", path=path)


def _load_xyz(path: str) -> PointCloud:
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 coordinates, got {len(parts)}", path=path, line=lineno
                )
            try:
                points.append([float(p) for p in parts])
            except ValueError:
                raise ParseError(f"invalid number in {line!r}", path=path, line=lineno) from None
    if not points:
        raise EmptyInputError("file contains no points", path=path)
    return PointCloud(np.array(points, dtype=np.float64))


def _load_ply(path: str) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic line", path=path, line=1)

    vertex_count = None
    vertex_props: list[str] = []
    in_vertex_element = False
    data_start = None
    for i, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError("only 'format ascii' is supported", path=path, line=i)
        elif tokens[0] == "element":
            if len(tokens) == 3 and tokens[1] == "vertex":
                try:
                    vertex_count = int(tokens[2])
                except ValueError:
                    raise ParseError("invalid vertex count", path=path, line=i) from None
                in_vertex_element = True
            else:
                in_vertex_element = False
        elif tokens[0] == "property" and in_vertex_element:
            vertex_props.append(tokens[-1])
        elif tokens[0] == "end_header":
            data_start = i
            break
    if data_start is None:
        raise ParseError("missing 'end_header'", path=path)
    if vertex_count is None:
        raise ParseError("missing 'element vertex' declaration", path=path)
    if vertex_count == 0:
        raise EmptyInputError("file declares zero vertices", path=path)
    try:
        cols = [vertex_props.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise ParseError("vertex element lacks x/y/z properties", path=path) from None

    points = np.empty((vertex_count, 3), dtype=np.float64)
    for row in range(vertex_count):
        lineno = data_start + 1 + row
        if lineno > len(lines):
            raise ParseError(
                f"expected {vertex_count} vertex lines, file ends after {row}", path=path
            )
        parts = lines[lineno - 1].split()
        if len(parts) < len(vertex_props):
            raise ParseError(
                f"vertex line has {len(parts)} values, header declares {len(vertex_props)}",
                path=path,
                line=lineno,
            )
        try:
            points[row] = [float(parts[c]) for c in cols]
        except ValueError:
            raise ParseError("invalid number in vertex line", path=path, line=lineno) from None
    return PointCloud(points)


def _load_bin(path: str) -> PointCloud:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) == 0:
        raise EmptyInputError("file is empty", path=path)
    if len(blob) % 12 != 0:
        raise ParseError(
            f"byte length {len(blob)} is not a multiple of 12 (three little-endian f32 per point)",
            path=path,
        )
    flat = np.frombuffer(blob, dtype="<f4")
    return PointCloud(flat.reshape(-1, 3).astype(np.float64))
