"""Labeled negative-binomial count data generator.

Samples get scales uniform on (0.2, 2.2), features get exponential
baselines with mean 25, and class labels go round-robin so classes stay
balanced. Each feature is differentially expressed with probability
``de_prob``; DE features receive independent lognormal rate ratios per
class (log ratios normal with standard deviation ``sigma``), others keep
ratio 1 in every class. Counts are negative binomial with mean mu and
variance mu + mu^2 * phi, realized as a gamma-Poisson mixture that
degrades to pure Poisson at phi = 0. Everything is reproducible from the
seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .count_matrix import CountMatrix, LabeledDataset
from .errors import ValidationError


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    phi: float
    sigma: float
    p: int = 10_000
    K: int = 3
    de_prob: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.K < 1:
            raise ValidationError("n, p, and K must be positive")
        if self.n < self.K:
            raise ValidationError("need at least one sample per class (n >= K)")
        if self.phi < 0:
            raise ValidationError("dispersion phi must be nonnegative")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if not 0 <= self.de_prob <= 1:
            raise ValidationError("de_prob must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class SimulationTruth:
    """Ground-truth parameters: per-sample scales, baselines, rate ratios."""

    s: np.ndarray
    g: np.ndarray
    d: np.ndarray
    de_mask: np.ndarray


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    data: LabeledDataset
    truth: SimulationTruth
    config: SimulationConfig


def draw_negative_binomial(rng: np.random.Generator, mean, dispersion: float):
    """Counts with the stated mean and variance mean + mean^2 * dispersion."""
    mean = np.asarray(mean, dtype=np.float64)
    if dispersion < 0:
        raise ValidationError("dispersion must be nonnegative")
    if dispersion == 0:
        return rng.poisson(mean)
    lam = rng.gamma(shape=1.0 / dispersion, scale=mean * dispersion)
    return rng.poisson(lam)


def _round_robin_labels(n: int, K: int) -> np.ndarray:
    return (np.arange(n) % K) + 1


def _draw_counts(
    rng: np.random.Generator, s: np.ndarray, truth: SimulationTruth, labels: np.ndarray, phi: float
) -> np.ndarray:
    mu = s[:, None] * truth.g[None, :] * truth.d[labels - 1]
    return draw_negative_binomial(rng, mu, phi).astype(np.float64)


def _package(
    counts: np.ndarray,
    labels: np.ndarray,
    truth: SimulationTruth,
    config: SimulationConfig,
    prefix: str,
) -> SimulatedDataset:
    matrix = CountMatrix(
        counts,
        tuple(f"{prefix}{i + 1}" for i in range(config.n)),
        tuple(f"f{j + 1}" for j in range(config.p)),
    )
    data = LabeledDataset(
        matrix, labels, config.K, tuple(f"c{k}" for k in range(1, config.K + 1))
    )
    return SimulatedDataset(data, truth, config)


def simulate(config: SimulationConfig) -> SimulatedDataset:
    """Generate one labeled dataset along with its generating parameters."""
    rng = np.random.default_rng(config.seed)
    s = rng.uniform(0.2, 2.2, config.n)
    g = rng.exponential(25.0, config.p)
    de_mask = rng.random(config.p) < config.de_prob
    z = rng.normal(0.0, config.sigma, (config.K, config.p))
    d = np.ones((config.K, config.p))
    d[:, de_mask] = np.exp(z[:, de_mask])
    truth = SimulationTruth(s=s, g=g, d=d, de_mask=de_mask)
    labels = _round_robin_labels(config.n, config.K)
    counts = _draw_counts(rng, s, truth, labels, config.phi)
    return _package(counts, labels, truth, config, "s")


def split_train_test(
    dataset: SimulatedDataset, seed: int
) -> tuple[SimulatedDataset, SimulatedDataset]:
    """Pair a dataset with an independent test draw from the same population.

    The population parameters (baselines, rate ratios, DE mask) are shared;
    per-sample scales and counts are redrawn, and the class balance is
    preserved. Returns (the input dataset, the fresh test set).
    """
    config = dataset.config
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.2, 2.2, config.n)
    truth = SimulationTruth(
        s=s, g=dataset.truth.g, d=dataset.truth.d, de_mask=dataset.truth.de_mask
    )
    labels = _round_robin_labels(config.n, config.K)
    counts = _draw_counts(rng, s, truth, labels, config.phi)
    return dataset, _package(counts, labels, truth, config, "t")


def write_truth(path, dataset: SimulatedDataset) -> None:
    """Ground-truth JSON: s, g, d, de_mask, and the configuration echo."""
    truth = dataset.truth
    payload = {
        "s": truth.s.tolist(),
        "g": truth.g.tolist(),
        "d": truth.d.tolist(),
        "de_mask": truth.de_mask.astype(bool).tolist(),
        "config": asdict(dataset.config),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")
