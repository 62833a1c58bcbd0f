"""Pairwise dissimilarities for count data under a Poisson working model.

For each pair of observations the rank-one Poisson model is fitted to the
two rows alone (pair-restricted size factors and column totals), per-row
rate ratios are smoothed by a Gamma(beta, beta) prior, and the modified
log likelihood ratio against the shared-rates null is the dissimilarity.
It is zero exactly on identical observations and nonnegative everywhere.

Squared Euclidean distance after size-factor scaling is provided as the
Gaussian-model baseline, and any measure can be applied to features by
transposing the matrix. A ``beta=0`` path plugs in maximum-likelihood rate
ratios instead of posterior means; it exists for validation against the
multinomial likelihood-ratio statistic and is not meant for analysis.

The n x n matrix is stored condensed: entry (i, j) with i < j lives at
linear index n*i - i*(i+1)/2 + (j - i - 1), the diagonal is implicitly
zero, and each pair is computed exactly once, so symmetry is structural.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .count_matrix import CountMatrix, format_number
from .errors import ParseError, ValidationError
from .size_factors import canonical_method, estimate_size_factors
from .transform import find_alpha

MEASURES = ("poisson", "sq-euclidean")


def condensed_index(i: int, j: int, n: int) -> int:
    """Linear index of pair (i, j), i < j, in condensed storage."""
    if not 0 <= i < j < n:
        raise ValidationError(f"invalid pair ({i}, {j}) for n={n}")
    return n * i - (i * (i + 1)) // 2 + (j - i - 1)


@dataclass(frozen=True, eq=False)
class DissimilarityMatrix:
    """Symmetric nonnegative dissimilarities with zero diagonal."""

    condensed: np.ndarray
    ids: tuple[str, ...]
    measure: str
    method: str

    def __post_init__(self):
        condensed = np.asarray(self.condensed, dtype=np.float64)
        n = len(self.ids)
        if n < 1 or condensed.shape != (n * (n - 1) // 2,):
            raise ValidationError("condensed length does not match id count")
        if len(set(self.ids)) != n:
            raise ValidationError("ids must be unique")
        if condensed.size and (not np.all(np.isfinite(condensed)) or condensed.min() < 0):
            raise ValidationError("dissimilarities must be finite and nonnegative")
        condensed = condensed.copy()
        condensed.flags.writeable = False
        object.__setattr__(self, "condensed", condensed)
        object.__setattr__(self, "ids", tuple(str(s) for s in self.ids))

    @property
    def n(self) -> int:
        return len(self.ids)

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i > j:
            i, j = j, i
        return float(self.condensed[condensed_index(i, j, self.n)])

    def full(self) -> np.ndarray:
        """Materialize the symmetric n x n matrix."""
        n = self.n
        out = np.zeros((n, n))
        k = 0
        for i in range(n - 1):
            m = n - 1 - i
            out[i, i + 1 :] = self.condensed[k : k + m]
            k += m
        return out + out.T

    @staticmethod
    def from_full(values: np.ndarray, ids, measure: str, method: str) -> "DissimilarityMatrix":
        """Validate and condense a full square matrix."""
        values = np.asarray(values, dtype=np.float64)
        n = len(ids)
        if values.shape != (n, n):
            raise ValidationError("dissimilarity matrix must be square and match ids")
        if not np.array_equal(values, values.T):
            raise ValidationError("dissimilarity matrix is not symmetric")
        if np.any(np.diag(values) != 0):
            raise ValidationError("dissimilarity matrix diagonal must be zero")
        condensed = np.concatenate(
            [values[i, i + 1 :] for i in range(n - 1)]
        ) if n > 1 else np.empty(0)
        return DissimilarityMatrix(condensed, tuple(ids), measure, method)


def _pair_size_factors(x1: np.ndarray, x2: np.ndarray, method: str) -> tuple[float, float]:
    if method == "total-count":
        t1, t2 = float(x1.sum()), float(x2.sum())
        if t1 <= 0 or t2 <= 0:
            raise ValidationError("zero total count in pair")
        total = t1 + t2
        return t1 / total, t2 / total
    if method == "quantile":
        q1 = float(np.percentile(x1, 75))
        q2 = float(np.percentile(x2, 75))
        if q1 <= 0 or q2 <= 0:
            raise ValidationError("zero 75th percentile in pair")
        total = q1 + q2
        return q1 / total, q2 / total
    usable = (x1 > 0) & (x2 > 0)
    if not usable.any():
        raise ValidationError(
            "no feature is positive in both observations; "
            "median-ratio is undefined for this pair"
        )
    gm = np.exp(0.5 * (np.log(x1[usable]) + np.log(x2[usable])))
    m1 = float(np.median(x1[usable] / gm))
    m2 = float(np.median(x2[usable] / gm))
    if m1 <= 0 or m2 <= 0:
        raise ValidationError("zero median ratio in pair")
    total = m1 + m2
    return m1 / total, m2 / total


def _xlog_ratio(x: np.ndarray, n_hat: np.ndarray) -> np.ndarray:
    """x * log(x / n_hat) with the 0 log 0 := 0 convention."""
    out = np.zeros_like(x)
    mask = x > 0
    out[mask] = x[mask] * np.log(x[mask] / n_hat[mask])
    return out


def poisson_pair_dissimilarity(
    x_i, x_iprime, method: str = "total-count", beta: float = 1.0
) -> float:
    """Modified log likelihood ratio between two count vectors.

    The model is fitted to the pair alone. ``beta`` smooths the per-row
    rate ratios; ``beta=0`` selects the maximum-likelihood plug-in path
    (validation only). The result is symmetric in its arguments bitwise.
    """
    x1 = np.asarray(x_i, dtype=np.float64)
    x2 = np.asarray(x_iprime, dtype=np.float64)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValidationError("pair must be two vectors of equal length")
    if np.any(x1 < 0) or np.any(x2 < 0) or not (
        np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))
    ):
        raise ValidationError("count vectors must be finite and nonnegative")
    if beta < 0:
        raise ValidationError("beta must be nonnegative")
    method = canonical_method(method)
    s1, s2 = _pair_size_factors(x1, x2, method)
    g = x1 + x2
    n1 = s1 * g
    n2 = s2 * g
    if beta == 0.0:
        terms = (n1 + n2) - (x1 + x2) + (_xlog_ratio(x1, n1) + _xlog_ratio(x2, n2))
    else:
        d1 = (x1 + beta) / (n1 + beta)
        d2 = (x2 + beta) / (n2 + beta)
        terms = (n1 + n2) - (n1 * d1 + n2 * d2) + (x1 * np.log(d1) + x2 * np.log(d2))
    total = float(terms.sum())
    # nonnegative up to rounding; snap accumulated round-off to zero
    return total if total > 0.0 else 0.0


def multinomial_lrt(x_i, x_iprime) -> float:
    """Log likelihood ratio for equal multinomial cell probabilities.

    Conditional on the two totals, the pair of count vectors is multinomial;
    this statistic tests whether both share one probability vector. It
    coincides with the Poisson pair dissimilarity under total-count factors
    and maximum-likelihood plug-ins, which is what the test suite checks.
    """
    x1 = np.asarray(x_i, dtype=np.float64)
    x2 = np.asarray(x_iprime, dtype=np.float64)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValidationError("pair must be two vectors of equal length")
    t1, t2 = float(x1.sum()), float(x2.sum())
    if t1 <= 0 or t2 <= 0:
        raise ValidationError("zero total count in pair")

    def xlx(v: np.ndarray) -> float:
        mask = v > 0
        return float((v[mask] * np.log(v[mask])).sum())

    return (
        xlx(x1)
        + xlx(x2)
        - xlx(x1 + x2)
        + (t1 + t2) * np.log(t1 + t2)
        - t1 * np.log(t1)
        - t2 * np.log(t2)
    )


def _pairwise(values: np.ndarray, ids, pair_fn, threads: int | None) -> np.ndarray:
    n = values.shape[0]
    condensed = np.empty(n * (n - 1) // 2)
    pairs = [(i, j) for i in range(n - 1) for j in range(i + 1, n)]

    def run(span):
        for i, j in span:
            try:
                condensed[condensed_index(i, j, n)] = pair_fn(values[i], values[j])
            except ValidationError as exc:
                raise ValidationError(f"pair ('{ids[i]}', '{ids[j]}'): {exc}") from exc

    if threads is None or threads <= 1 or len(pairs) < 2:
        run(pairs)
    else:
        workers = min(threads, len(pairs))
        chunks = [pairs[w::workers] for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for future in [pool.submit(run, chunk) for chunk in chunks]:
                future.result()
    return condensed


def poisson_dissimilarity_matrix(
    matrix: CountMatrix,
    method: str = "total-count",
    beta: float = 1.0,
    transform: bool = True,
    threads: int | None = None,
) -> DissimilarityMatrix:
    """All pairwise Poisson dissimilarities between samples.

    With ``transform`` on, the calibration exponent is estimated once on
    the whole matrix and applied before any pair is touched. Pairs are
    independent; ``threads`` workers may compute them concurrently, writing
    disjoint slots, so parallel output is bit-identical to serial.
    """
    if matrix.n < 2:
        raise ValidationError("dissimilarity needs at least 2 observations")
    method = canonical_method(method)
    if transform:
        matrix = find_alpha(matrix).matrix
    condensed = _pairwise(
        matrix.values,
        matrix.sample_ids,
        lambda a, b: poisson_pair_dissimilarity(a, b, method, beta),
        threads,
    )
    return DissimilarityMatrix(condensed, matrix.sample_ids, "poisson", method)


def sq_euclidean_dissimilarity_matrix(
    matrix: CountMatrix, method: str = "total-count"
) -> DissimilarityMatrix:
    """Squared Euclidean distances after scaling each sample by its size factor."""
    if matrix.n < 2:
        raise ValidationError("dissimilarity needs at least 2 observations")
    method = canonical_method(method)
    factors = estimate_size_factors(matrix, method)
    scaled = matrix.values / factors.values[:, None]
    condensed = _pairwise(
        scaled,
        matrix.sample_ids,
        lambda a, b: float(((a - b) ** 2).sum()),
        threads=None,
    )
    return DissimilarityMatrix(condensed, matrix.sample_ids, "sq-euclidean", method)


def feature_dissimilarity_matrix(
    matrix: CountMatrix,
    measure: str = "poisson",
    method: str = "total-count",
    beta: float = 1.0,
    transform: bool = True,
    threads: int | None = None,
) -> DissimilarityMatrix:
    """The chosen measure applied to features: the transposed computation."""
    if measure not in MEASURES:
        raise ValidationError(f"unknown measure '{measure}' (choose from {MEASURES})")
    flipped = matrix.transpose()
    if measure == "poisson":
        return poisson_dissimilarity_matrix(flipped, method, beta, transform, threads)
    return sq_euclidean_dissimilarity_matrix(flipped, method)


def write_dissimilarity(dm: DissimilarityMatrix, path) -> None:
    """Full symmetric TSV plus a JSON sidecar recording measure and method."""
    path = Path(path)
    full = dm.full()
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("id\t" + "\t".join(dm.ids) + "\n")
        for i, sid in enumerate(dm.ids):
            handle.write(sid + "\t" + "\t".join(format_number(v) for v in full[i]) + "\n")
    sidecar = {"measure": dm.measure, "method": dm.method, "n": dm.n}
    with open(str(path) + ".json", "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle)
        handle.write("\n")


def read_dissimilarity(path) -> DissimilarityMatrix:
    """Read a full symmetric TSV written by :func:`write_dissimilarity`.

    The sidecar is consulted when present; otherwise measure and method are
    recorded as "unknown".
    """
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ParseError("empty file", line=1)
    header = lines[0].split("\t")
    if header[0] != "id":
        raise ParseError("first header cell must be 'id'", line=1)
    ids = header[1:]
    rows = []
    row_ids = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue
        cells = raw.split("\t")
        if len(cells) != len(ids) + 1:
            raise ParseError(f"expected {len(ids) + 1} columns, got {len(cells)}", line=lineno)
        row_ids.append(cells[0])
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno)
    if row_ids != ids:
        raise ValidationError("row ids do not match column ids")
    measure, method = "unknown", "unknown"
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        with open(sidecar, encoding="utf-8") as handle:
            meta = json.load(handle)
        measure = meta.get("measure", measure)
        method = meta.get("method", method)
    return DissimilarityMatrix.from_full(np.asarray(rows), ids, measure, method)
