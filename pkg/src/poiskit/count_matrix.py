"""Count-matrix data model, labeled datasets, partitions, and TSV I/O.

The canonical orientation is samples-as-rows: an n x p matrix holds n
samples measured on p features. Counts are stored as float64 because the
power transform produces non-integer values that the rest of the toolkit
continues to treat as counts.

TSV format: UTF-8, tab-delimited, one header row whose first cell is the
literal ``id`` followed by the p feature ids; each data row starts with the
sample id. Files laid out the other way around (features as rows, the usual
genomics convention) are read with ``orientation="features"`` and transposed
into canonical form. Labels and partition files are two tab-separated
columns (id, name) without a header.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError


def format_number(x: float) -> str:
    """Format a value with enough digits for an exact float64 round trip.

    Integer-valued entries are written without a decimal point, so files of
    raw counts look like integer tables.
    """
    return "%.17g" % x


def _check_unique(ids: tuple[str, ...], axis: str) -> None:
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        for name in ids:
            if name in seen:
                raise ValidationError(f"duplicate {axis} id: '{name}'")
            seen.add(name)


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Immutable n x p matrix of nonnegative counts with axis identifiers.

    Row sums, column sums, and the grand total are computed once at
    construction and cached; the value array is marked read-only so the
    caches can never go stale. Instances are safe to share across threads.
    """

    values: np.ndarray
    sample_ids: tuple[str, ...]
    feature_ids: tuple[str, ...]
    row_sums: np.ndarray = field(init=False, repr=False)
    col_sums: np.ndarray = field(init=False, repr=False)
    grand_total: float = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("count matrix must be two-dimensional")
        n, p = values.shape
        if n < 1 or p < 1:
            raise ValidationError("count matrix must have at least one sample and one feature")
        sample_ids = tuple(str(s) for s in self.sample_ids)
        feature_ids = tuple(str(f) for f in self.feature_ids)
        if len(sample_ids) != n:
            raise ValidationError(f"expected {n} sample ids, got {len(sample_ids)}")
        if len(feature_ids) != p:
            raise ValidationError(f"expected {p} feature ids, got {len(feature_ids)}")
        _check_unique(sample_ids, "sample")
        _check_unique(feature_ids, "feature")
        bad = ~np.isfinite(values)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValidationError(
                f"non-finite value at sample '{sample_ids[i]}', feature '{feature_ids[j]}'"
            )
        neg = values < 0
        if neg.any():
            i, j = np.argwhere(neg)[0]
            raise ValidationError(
                f"negative value {values[i, j]} at sample '{sample_ids[i]}', "
                f"feature '{feature_ids[j]}'"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", sample_ids)
        object.__setattr__(self, "feature_ids", feature_ids)
        row_sums = values.sum(axis=1)
        col_sums = values.sum(axis=0)
        row_sums.flags.writeable = False
        col_sums.flags.writeable = False
        object.__setattr__(self, "row_sums", row_sums)
        object.__setattr__(self, "col_sums", col_sums)
        object.__setattr__(self, "grand_total", float(values.sum()))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def transpose(self) -> "CountMatrix":
        """Swap the roles of samples and features."""
        return CountMatrix(self.values.T, self.feature_ids, self.sample_ids)

    def equals(self, other: "CountMatrix") -> bool:
        """Exact equality of values and identifiers."""
        return (
            self.sample_ids == other.sample_ids
            and self.feature_ids == other.feature_ids
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """A count matrix paired with class labels in 1..K.

    ``class_names`` maps class index k to a display name; it defaults to
    "1".."K" when labels were supplied as bare indices.
    """

    matrix: CountMatrix
    labels: np.ndarray
    K: int
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (self.matrix.n,):
            raise ValidationError(
                f"labels length {labels.size} does not match sample count {self.matrix.n}"
            )
        if self.K < 1:
            raise ValidationError("K must be at least 1")
        present = np.unique(labels)
        if present.min() < 1 or present.max() > self.K:
            raise ValidationError(f"labels must lie in 1..{self.K}")
        if present.size != self.K:
            missing = sorted(set(range(1, self.K + 1)) - set(present.tolist()))
            raise ValidationError(f"classes with no members: {missing}")
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        names = tuple(self.class_names) or tuple(str(k) for k in range(1, self.K + 1))
        if len(names) != self.K:
            raise ValidationError(f"expected {self.K} class names, got {len(names)}")
        object.__setattr__(self, "class_names", names)

    def class_indices(self, k: int) -> np.ndarray:
        """Row indices of the samples in class k."""
        return np.flatnonzero(self.labels == k)


@dataclass(frozen=True, eq=False)
class Partition:
    """Cluster assignments for n items, clusters numbered 1..num_clusters."""

    assignments: np.ndarray
    num_clusters: int

    def __post_init__(self):
        assignments = np.asarray(self.assignments, dtype=np.int64)
        if assignments.ndim != 1 or assignments.size < 1:
            raise ValidationError("partition must assign at least one item")
        present = np.unique(assignments)
        expected = np.arange(1, self.num_clusters + 1)
        if not np.array_equal(present, expected):
            raise ValidationError(
                f"cluster indices must cover 1..{self.num_clusters} with no gaps"
            )
        assignments = assignments.copy()
        assignments.flags.writeable = False
        object.__setattr__(self, "assignments", assignments)

    @property
    def n(self) -> int:
        return self.assignments.size


def _split_line(line: str) -> list[str]:
    return line.rstrip("\n").rstrip("\r").split("\t")


def read_count_matrix(path: str | Path, orientation: str = "samples") -> CountMatrix:
    """Read a count TSV into canonical samples-as-rows form.

    Parameters
    ----------
    path:
        TSV file with an ``id`` header row.
    orientation:
        "samples" when file rows are samples (canonical), "features" when
        file rows are features; the latter is transposed on load.
    """
    if orientation not in ("samples", "features"):
        raise ValidationError(f"unknown orientation '{orientation}'")
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ParseError("empty file", line=1)
    header = _split_line(lines[0])
    if header[0] != "id":
        raise ParseError(f"first header cell must be 'id', got '{header[0]}'", line=1)
    col_ids = header[1:]
    if not col_ids:
        raise ParseError("header defines no data columns", line=1)
    row_ids: list[str] = []
    rows: list[np.ndarray] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue  # tolerate a trailing blank line
        cells = _split_line(raw)
        if len(cells) != len(col_ids) + 1:
            raise ParseError(
                f"expected {len(col_ids) + 1} columns, got {len(cells)}", line=lineno
            )
        row_ids.append(cells[0])
        try:
            rows.append(np.array([float(c) for c in cells[1:]], dtype=np.float64))
        except ValueError as exc:
            raise ParseError(f"non-numeric cell in row '{cells[0]}': {exc}", line=lineno)
    if not rows:
        raise ParseError("file contains no data rows", line=2)
    values = np.vstack(rows)
    if orientation == "features":
        return CountMatrix(values.T, col_ids, row_ids)
    return CountMatrix(values, row_ids, col_ids)


def write_count_matrix(matrix: CountMatrix, path: str | Path) -> None:
    """Write a count matrix as TSV; re-reading reproduces it exactly."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("id\t" + "\t".join(matrix.feature_ids) + "\n")
        for i, sid in enumerate(matrix.sample_ids):
            cells = "\t".join(format_number(v) for v in matrix.values[i])
            handle.write(f"{sid}\t{cells}\n")


def column_totals(matrix: CountMatrix) -> np.ndarray:
    """Per-feature totals over all samples (the feature baseline estimate)."""
    return matrix.col_sums.copy()


def read_two_column_tsv(path: str | Path) -> list[tuple[str, str]]:
    """Read an (id, name) file, preserving order; rejects malformed rows."""
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    pairs: list[tuple[str, str]] = []
    for lineno, raw in enumerate(lines, start=1):
        if raw == "":
            continue
        cells = _split_line(raw)
        if len(cells) != 2:
            raise ParseError(f"expected 2 columns, got {len(cells)}", line=lineno)
        pairs.append((cells[0], cells[1]))
    if not pairs:
        raise ParseError("file contains no rows", line=1)
    return pairs


def write_two_column_tsv(path: str | Path, pairs) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for left, right in pairs:
            handle.write(f"{left}\t{right}\n")


def read_labels(path: str | Path, matrix: CountMatrix) -> LabeledDataset:
    """Attach a labels file to a matrix.

    Class names map to indices 1..K in order of first appearance in the
    file. Every sample in the matrix must be labeled exactly once.
    """
    pairs = read_two_column_tsv(path)
    by_id: dict[str, str] = {}
    order: list[str] = []
    for sid, cname in pairs:
        if sid in by_id:
            raise ValidationError(f"sample '{sid}' labeled more than once")
        by_id[sid] = cname
        if cname not in order:
            order.append(cname)
    index_of = {name: k + 1 for k, name in enumerate(order)}
    labels = np.empty(matrix.n, dtype=np.int64)
    for i, sid in enumerate(matrix.sample_ids):
        if sid not in by_id:
            raise ValidationError(f"no label for sample '{sid}'")
        labels[i] = index_of[by_id[sid]]
    return LabeledDataset(matrix, labels, K=len(order), class_names=tuple(order))


def write_labels(path: str | Path, dataset: LabeledDataset) -> None:
    pairs = [
        (sid, dataset.class_names[dataset.labels[i] - 1])
        for i, sid in enumerate(dataset.matrix.sample_ids)
    ]
    write_two_column_tsv(path, pairs)


def read_partition(path: str | Path) -> tuple[list[str], Partition]:
    """Read an (id, cluster) file; cluster names index by first appearance."""
    pairs = read_two_column_tsv(path)
    ids = [sid for sid, _ in pairs]
    _check_unique(tuple(ids), "sample")
    order: list[str] = []
    for _, cname in pairs:
        if cname not in order:
            order.append(cname)
    index_of = {name: k + 1 for k, name in enumerate(order)}
    assignments = np.array([index_of[cname] for _, cname in pairs], dtype=np.int64)
    return ids, Partition(assignments, num_clusters=len(order))


def write_partition(path: str | Path, ids, partition: Partition) -> None:
    pairs = [(sid, str(int(c))) for sid, c in zip(ids, partition.assignments)]
    write_two_column_tsv(path, pairs)
