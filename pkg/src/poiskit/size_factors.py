"""Per-sample size factor estimation.

Three estimators are provided, all normalized to sum to one across the
training samples:

* total-count: row total divided by the grand total.
* median-ratio: median over features of the count divided by the feature's
  geometric mean across samples; features with any zero count are excluded
  because their geometric mean vanishes.
* quantile: the 75th percentile of each sample's counts (linear
  interpolation at rank 1 + (p-1)*0.75, the numpy default).

Each estimator records the training statistics needed to extend itself to a
new observation without revisiting the training matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .count_matrix import CountMatrix, format_number
from .errors import ValidationError

METHODS = ("total-count", "quantile", "median-ratio")

_ALIASES = {"total": "total-count", "tc": "total-count", "mr": "median-ratio", "q": "quantile"}


def canonical_method(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in METHODS:
        raise ValidationError(f"unknown size-factor method '{name}' (choose from {METHODS})")
    return name


@dataclass(frozen=True, eq=False)
class SizeFactors:
    """Normalized per-sample scale estimates plus extension statistics.

    ``aux`` holds what `estimate_test_size_factor` needs per method:
    the training grand total (total-count), per-sample quantiles and their
    sum (quantile), or per-feature geometric means, the usable-feature mask,
    and per-sample medians with their sum (median-ratio). All methods also
    record ``p``, the feature count, for input validation.
    """

    values: np.ndarray
    method: str
    aux: dict[str, Any]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValidationError("size factors must be a nonempty vector")
        if not np.all(values > 0):
            raise ValidationError("size factors must be strictly positive")
        if abs(values.sum() - 1.0) > 1e-12:
            raise ValidationError("size factors must sum to 1")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.method not in METHODS:
            raise ValidationError(f"unknown size-factor method '{self.method}'")

    def to_json(self) -> dict[str, Any]:
        aux = {
            key: (val.tolist() if isinstance(val, np.ndarray) else val)
            for key, val in self.aux.items()
        }
        return {"values": self.values.tolist(), "method": self.method, "aux": aux}

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "SizeFactors":
        aux = dict(obj["aux"])
        for key in ("geometric_means", "m", "q"):
            if key in aux:
                aux[key] = np.asarray(aux[key], dtype=np.float64)
        if "usable" in aux:
            aux["usable"] = np.asarray(aux["usable"], dtype=bool)
        return SizeFactors(np.asarray(obj["values"]), obj["method"], aux)


def estimate_total_count(matrix: CountMatrix) -> SizeFactors:
    """Row totals over the grand total."""
    sums = matrix.row_sums
    zero = np.flatnonzero(sums <= 0)
    if zero.size:
        raise ValidationError(
            f"sample '{matrix.sample_ids[zero[0]]}' has zero total count"
        )
    return SizeFactors(
        sums / matrix.grand_total,
        "total-count",
        {"grand_total": matrix.grand_total, "p": matrix.p},
    )


def estimate_median_ratio(matrix: CountMatrix) -> SizeFactors:
    """Median ratio to per-feature geometric means, zero-containing features excluded."""
    values = matrix.values
    usable = np.all(values > 0, axis=0)
    if not usable.any():
        raise ValidationError(
            "no feature has positive counts in every sample; "
            "median-ratio factors are undefined, try total-count or quantile"
        )
    # geometric means in log space to avoid overflow at large p
    log_gm = np.mean(np.log(values[:, usable]), axis=0)
    gm = np.exp(log_gm)
    geometric_means = np.zeros(matrix.p)
    geometric_means[usable] = gm
    m = np.median(values[:, usable] / gm, axis=1)
    zero = np.flatnonzero(m <= 0)
    if zero.size:
        raise ValidationError(
            f"sample '{matrix.sample_ids[zero[0]]}' has zero median ratio"
        )
    m_sum = float(m.sum())
    return SizeFactors(
        m / m_sum,
        "median-ratio",
        {
            "geometric_means": geometric_means,
            "usable": usable,
            "m": m,
            "m_sum": m_sum,
            "p": matrix.p,
        },
    )


def estimate_quantile(matrix: CountMatrix) -> SizeFactors:
    """75th percentile of each sample's counts, normalized."""
    q = np.percentile(matrix.values, 75, axis=1)
    zero = np.flatnonzero(q <= 0)
    if zero.size:
        raise ValidationError(
            f"sample '{matrix.sample_ids[zero[0]]}' has zero 75th percentile"
        )
    q_sum = float(q.sum())
    return SizeFactors(q / q_sum, "quantile", {"q": q, "q_sum": q_sum, "p": matrix.p})


_ESTIMATORS = {
    "total-count": estimate_total_count,
    "median-ratio": estimate_median_ratio,
    "quantile": estimate_quantile,
}


def estimate_size_factors(matrix: CountMatrix, method: str) -> SizeFactors:
    """Dispatch to the named estimator."""
    return _ESTIMATORS[canonical_method(method)](matrix)


def estimate_test_size_factor(factors: SizeFactors, x_star: np.ndarray) -> float:
    """Extend training size factors to a new observation.

    Applies the training estimator's defining statistic to ``x_star`` and
    scales it by the training normalizer, so a test observation equal to
    training row i receives that row's (unnormalized-consistent) factor.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.ndim != 1 or x_star.size != factors.aux["p"]:
        raise ValidationError(
            f"test observation has {x_star.size} features, expected {factors.aux['p']}"
        )
    if not np.all(np.isfinite(x_star)) or np.any(x_star < 0):
        raise ValidationError("test observation must be finite and nonnegative")
    if factors.method == "total-count":
        total = float(x_star.sum())
        if total <= 0:
            raise ValidationError("test observation has zero total count")
        return total / factors.aux["grand_total"]
    if factors.method == "quantile":
        q_star = float(np.percentile(x_star, 75))
        if q_star <= 0:
            raise ValidationError("test observation has zero 75th percentile")
        return q_star / factors.aux["q_sum"]
    usable = factors.aux["usable"]
    gm = factors.aux["geometric_means"][usable]
    m_star = float(np.median(x_star[usable] / gm))
    if m_star <= 0:
        raise ValidationError("test observation has zero median ratio")
    return m_star / factors.aux["m_sum"]


def write_size_factors(path, sample_ids, factors: SizeFactors) -> None:
    """Two-column TSV: sample id, normalized factor."""
    with open(path, "w", encoding="utf-8") as handle:
        for sid, value in zip(sample_ids, factors.values):
            handle.write(f"{sid}\t{format_number(value)}\n")
