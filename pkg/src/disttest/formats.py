"""Plain-text file formats for distributions and recorded samples.

Distribution files:
    line 1: ``n``                      (domain size)
    lines 2..n+1: one probability per line

Joint distribution files:
    line 1: ``d n_1 ... n_d``          (axis count, then axis sizes)
    following lines: probabilities in row-major order, one per line

Probabilities are written with 17 significant digits so that write/read
round-trips are bit-exact for float64.

Sample files hold one observation per line, with 1-based bin indices:
``i`` for a flat domain, ``i j`` for a 2-d joint domain (or d columns for
d axes), and ``dist_index bin`` for collections.  Blank lines and ``#``
comments are ignored everywhere.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Sequence, TextIO, Union

import numpy as np

from .core import ExplicitDistribution, JointDistribution

__all__ = [
    "FormatError",
    "write_distribution",
    "read_distribution",
    "write_joint",
    "read_joint",
    "read_samples",
    "write_samples",
    "read_joint_samples",
    "read_collection_samples",
]

PathOrFile = Union[str, Path, TextIO]


class FormatError(ValueError):
    """Malformed distribution or sample file."""


def _open(f: PathOrFile, mode: str):
    if isinstance(f, (str, Path)):
        return open(f, mode), True
    return f, False


def _data_lines(fh: TextIO) -> List[str]:
    out = []
    for raw in fh:
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def write_distribution(f: PathOrFile, dist) -> None:
    probs = getattr(dist, "probs", None)
    if probs is None:
        probs = np.asarray(dist, dtype=np.float64)
    fh, close = _open(f, "w")
    try:
        fh.write(f"{probs.size}\n")
        for v in probs:
            fh.write(f"{v:.17g}\n")
    finally:
        if close:
            fh.close()


def read_distribution(f: PathOrFile) -> ExplicitDistribution:
    fh, close = _open(f, "r")
    try:
        lines = _data_lines(fh)
    finally:
        if close:
            fh.close()
    if not lines:
        raise FormatError("empty distribution file")
    try:
        n = int(lines[0])
    except ValueError as e:
        raise FormatError(f"bad header line {lines[0]!r}") from e
    if len(lines) != n + 1:
        raise FormatError(f"expected {n} probabilities, found {len(lines) - 1}")
    try:
        probs = np.array([float(s) for s in lines[1:]], dtype=np.float64)
    except ValueError as e:
        raise FormatError("non-numeric probability line") from e
    try:
        return ExplicitDistribution(probs)
    except ValueError as e:
        raise FormatError(str(e)) from e


def write_joint(f: PathOrFile, joint: JointDistribution) -> None:
    fh, close = _open(f, "w")
    try:
        dims = " ".join(str(d) for d in joint.dims)
        fh.write(f"{len(joint.dims)} {dims}\n")
        for v in joint.probs.reshape(-1):
            fh.write(f"{v:.17g}\n")
    finally:
        if close:
            fh.close()


def read_joint(f: PathOrFile) -> JointDistribution:
    fh, close = _open(f, "r")
    try:
        lines = _data_lines(fh)
    finally:
        if close:
            fh.close()
    if not lines:
        raise FormatError("empty joint distribution file")
    head = lines[0].split()
    try:
        d = int(head[0])
        dims = [int(x) for x in head[1:]]
    except (ValueError, IndexError) as e:
        raise FormatError(f"bad joint header {lines[0]!r}") from e
    if len(dims) != d or d < 2:
        raise FormatError(f"joint header announces {d} axes but lists {len(dims)}")
    size = int(np.prod(dims))
    if len(lines) != size + 1:
        raise FormatError(f"expected {size} probabilities, found {len(lines) - 1}")
    try:
        flat = np.array([float(s) for s in lines[1:]], dtype=np.float64)
    except ValueError as e:
        raise FormatError("non-numeric probability line") from e
    try:
        return JointDistribution(flat.reshape(dims))
    except ValueError as e:
        raise FormatError(str(e)) from e


def _read_columns(f: PathOrFile, ncols: int, what: str) -> np.ndarray:
    fh, close = _open(f, "r")
    try:
        lines = _data_lines(fh)
    finally:
        if close:
            fh.close()
    rows = []
    for line in lines:
        parts = line.split()
        if len(parts) != ncols:
            raise FormatError(
                f"{what}: expected {ncols} column(s), got {len(parts)}: {line!r}"
            )
        try:
            rows.append([int(p) for p in parts])
        except ValueError as e:
            raise FormatError(f"{what}: non-integer entry in {line!r}") from e
    arr = np.asarray(rows, dtype=np.int64).reshape(len(rows), ncols)
    if np.any(arr < 1):
        raise FormatError(f"{what}: indices are 1-based and must be positive")
    return arr


def read_samples(f: PathOrFile, n: int) -> np.ndarray:
    """Flat-domain samples, converted to 0-based indices."""
    arr = _read_columns(f, 1, "sample file")[:, 0] - 1
    if arr.size and arr.max() >= n:
        raise FormatError(f"sample index {arr.max() + 1} exceeds domain size {n}")
    return arr


def write_samples(f: PathOrFile, samples: Sequence[int]) -> None:
    fh, close = _open(f, "w")
    try:
        for s in samples:
            fh.write(f"{int(s) + 1}\n")
    finally:
        if close:
            fh.close()


def read_joint_samples(f: PathOrFile, dims: Sequence[int]) -> np.ndarray:
    """Multi-column samples over a product domain, flattened row-major."""
    dims = [int(d) for d in dims]
    arr = _read_columns(f, len(dims), "joint sample file") - 1
    for axis, size in enumerate(dims):
        if arr.size and arr[:, axis].max() >= size:
            raise FormatError(
                f"axis {axis + 1} index {arr[:, axis].max() + 1} exceeds size {size}"
            )
    flat = np.zeros(arr.shape[0], dtype=np.int64)
    for axis, size in enumerate(dims):
        flat = flat * size + arr[:, axis]
    return flat


def read_collection_samples(f: PathOrFile, m: int, n: int) -> List[np.ndarray]:
    """``dist_index bin`` pairs split into per-member sample arrays.

    Returns a list of ``m`` arrays preserving the file order within each
    member.
    """
    arr = _read_columns(f, 2, "collection sample file") - 1
    if arr.size:
        if arr[:, 0].max() >= m:
            raise FormatError(f"distribution index {arr[:, 0].max() + 1} exceeds {m}")
        if arr[:, 1].max() >= n:
            raise FormatError(f"bin index {arr[:, 1].max() + 1} exceeds {n}")
    return [arr[arr[:, 0] == i, 1] for i in range(m)]
