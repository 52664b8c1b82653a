"""Loaders and writers for the on-disk dataset formats.

Formats:
  * edge list  -- UTF-8 text, ``u v`` per line, ``#`` comments, optional
    ``%N <count>`` header declaring the node count (allows trailing
    isolated nodes).
  * features   -- CSV of reals, or binary: magic ``GBFM``, little-endian
    u32 rows, u32 cols, then rows*cols little-endian float32, row-major.
  * labels     -- one base-10 integer per line.
  * roles      -- one of ``0|1|2`` per line (train/val/test).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph

__all__ = [
    "TRAIN", "VAL", "TEST", "DatasetError", "Labels",
    "load_edge_list", "write_edge_list",
    "load_features", "write_features",
    "load_labels", "write_labels",
    "load_roles", "write_roles", "random_roles",
]

TRAIN, VAL, TEST = 0, 1, 2

_FEATURE_MAGIC = b"GBFM"


class DatasetError(ValueError):
    """Malformed dataset file; the message carries the offending location."""


@dataclass(frozen=True)
class Labels:
    """Integer node labels with the class count (1 + max label)."""

    labels: np.ndarray
    num_classes: int


def load_edge_list(path) -> Graph:
    """Parse an edge-list file into a Graph.

    Self-loops are dropped and duplicate edges deduplicated; symmetry is
    enforced by construction. Node count is 1 + max id unless a
    ``%N <count>`` header declares a larger count.
    """
    path = Path(path)
    declared_n = None
    us: list[int] = []
    vs: list[int] = []
    max_id = -1
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("%N"):
                parts = line.split()
                if len(parts) != 2 or not parts[1].isdigit():
                    raise DatasetError(f"{path}:{lineno}: malformed %N header: {line!r}")
                declared_n = int(parts[1])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise DatasetError(f"{path}:{lineno}: negative node id in {line!r}")
            if u >= 2**62 or v >= 2**62:
                raise DatasetError(f"{path}:{lineno}: node id overflow in {line!r}")
            us.append(u)
            vs.append(v)
            if u > max_id:
                max_id = u
            if v > max_id:
                max_id = v
    num_nodes = max_id + 1
    if declared_n is not None:
        if declared_n < num_nodes:
            raise DatasetError(f"{path}: header %N {declared_n} smaller than max id {max_id}")
        num_nodes = declared_n
    if num_nodes <= 0:
        raise DatasetError(f"{path}: empty graph")
    edges = np.column_stack([np.asarray(us, dtype=np.int64),
                             np.asarray(vs, dtype=np.int64)]) if us else np.empty((0, 2), np.int64)
    return Graph.from_edges(num_nodes, edges)


def write_edge_list(path, g: Graph, header: bool = True) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if header:
            fh.write(f"%N {g.num_nodes}\n")
        for u, v in g.edge_array():
            fh.write(f"{u} {v}\n")


def load_features(path, expected_rows: int) -> np.ndarray:
    """Load a feature matrix (CSV or GBFM binary) as float64.

    Raises on row-count mismatch, ragged rows, or non-finite values.
    """
    path = Path(path)
    if expected_rows <= 0:
        raise DatasetError(f"{path}: expected_rows must be positive (empty graph forbidden)")
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == _FEATURE_MAGIC:
        x = _load_features_binary(path)
    else:
        x = _load_features_csv(path)
    if x.shape[0] != expected_rows:
        raise DatasetError(f"{path}: expected {expected_rows} rows, found {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.isfinite(x))[0]
        raise DatasetError(f"{path}: non-finite value at row {bad[0]}, col {bad[1]}")
    return x


def _load_features_csv(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric value") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(
                    f"{path}:{lineno}: ragged row ({len(row)} columns, expected {width})")
            rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: no feature rows")
    return np.asarray(rows, dtype=np.float64)


def _load_features_binary(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < 12:
        raise DatasetError(f"{path}: truncated binary feature file")
    n, f = struct.unpack("<II", data[4:12])
    want = 12 + 4 * n * f
    if len(data) != want:
        raise DatasetError(f"{path}: binary payload is {len(data)} bytes, expected {want}")
    x = np.frombuffer(data, dtype="<f4", count=n * f, offset=12)
    return x.reshape(n, f).astype(np.float64)


def write_features(path, x: np.ndarray, binary: bool = False) -> None:
    path = Path(path)
    x = np.asarray(x, dtype=np.float64)
    if binary:
        n, f = x.shape
        with path.open("wb") as fh:
            fh.write(_FEATURE_MAGIC)
            fh.write(struct.pack("<II", n, f))
            fh.write(x.astype("<f4").tobytes())
    else:
        with path.open("w", encoding="utf-8") as fh:
            for row in x:
                fh.write(",".join(repr(float(t)) for t in row))
                fh.write("\n")


def _load_int_lines(path: Path, expected_rows: int, what: str) -> np.ndarray:
    vals: list[int] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                vals.append(int(line))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer {what}") from None
    if len(vals) != expected_rows:
        raise DatasetError(f"{path}: expected {expected_rows} {what} lines, found {len(vals)}")
    return np.asarray(vals, dtype=np.int64)


def load_labels(path, expected_rows: int) -> Labels:
    """Load one label per line; num_classes = 1 + max label.

    Every class in [0, num_classes) must occur at least once.
    """
    path = Path(path)
    labels = _load_int_lines(path, expected_rows, "label")
    if labels.min() < 0:
        raise DatasetError(f"{path}: negative label")
    num_classes = int(labels.max()) + 1
    present = np.bincount(labels, minlength=num_classes)
    if np.any(present == 0):
        missing = int(np.argmin(present))
        raise DatasetError(f"{path}: class {missing} has no nodes")
    return Labels(labels=labels, num_classes=num_classes)


def write_labels(path, labels: np.ndarray) -> None:
    Path(path).write_text("\n".join(str(int(t)) for t in labels) + "\n", encoding="utf-8")


def load_roles(path, expected_rows: int) -> np.ndarray:
    """Load the train/val/test role mask (one of 0|1|2 per line)."""
    path = Path(path)
    roles = _load_int_lines(path, expected_rows, "role")
    if roles.min() < 0 or roles.max() > 2:
        raise DatasetError(f"{path}: role values must be 0, 1, or 2")
    if not np.any(roles == TRAIN):
        raise DatasetError(f"{path}: no TRAIN nodes")
    return roles.astype(np.int8)


def write_roles(path, roles: np.ndarray) -> None:
    Path(path).write_text("\n".join(str(int(t)) for t in roles) + "\n", encoding="utf-8")


def random_roles(num_nodes: int, rng: np.random.Generator,
                 fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)) -> np.ndarray:
    """Random train/val/test split with the given fractions."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    perm = rng.permutation(num_nodes)
    n_train = max(1, int(round(fractions[0] * num_nodes)))
    n_val = int(round(fractions[1] * num_nodes))
    roles = np.full(num_nodes, TEST, dtype=np.int8)
    roles[perm[:n_train]] = TRAIN
    roles[perm[n_train:n_train + n_val]] = VAL
    return roles
