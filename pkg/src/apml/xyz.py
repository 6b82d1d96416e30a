"""Plain-text XYZ point files: one point per line, whitespace-separated reals.

Blank lines and lines starting with ``#`` are ignored. The dimension is
taken from the first data line and every other line must match it.
"""

from __future__ import annotations

import numpy as np

from .types import ApmlError, PointCloud


class XyzFormatError(ApmlError):
    pass


def parse_xyz(text: str) -> PointCloud:
    rows = []
    d = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if d is None:
            d = len(fields)
        elif len(fields) != d:
            raise XyzFormatError(f"line {lineno}: expected {d} values, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise XyzFormatError(f"line {lineno}: {exc}") from None
    if not rows:
        raise XyzFormatError("no points found")
    return PointCloud(np.array(rows))


def read_xyz(path) -> PointCloud:
    with open(path, encoding="utf-8") as fh:
        return parse_xyz(fh.read())


def format_xyz(cloud: PointCloud) -> str:
    return "".join(" ".join(f"{v:.17g}" for v in p) + "\n" for p in cloud.points)


def write_xyz(cloud: PointCloud, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_xyz(cloud))
