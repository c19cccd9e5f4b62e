"""Farms, gateways and the response-class frequency tables they report.

Each farm has one gateway (transaction node) wired to ``K`` nano-sensors. A
sweep reads every sensor once; per-sensor concentrations are Gaussian around
the farm level and truncated at zero. Counts of response classes per gateway
form a 5 x N frequency table.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kinetics import CLASS_LABELS, SensorParams, classify_array, response_factor_array

N_CLASSES = 5


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``keys`` under ``seed``.

    Streams are addressed rather than drawn in sequence, so a farm's draws do
    not depend on how many other farms were sampled before it.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(keys)))


@dataclass(frozen=True)
class FarmConfig:
    farm_id: str
    mean_conc: float
    intra_sigma: float = 1.0
    sensors_per_gateway: int = 100

    def __post_init__(self):
        if self.mean_conc < 0:
            raise ValueError("mean_conc must be >= 0")
        if self.intra_sigma < 0:
            raise ValueError("intra_sigma must be >= 0")
        if self.sensors_per_gateway < 1:
            raise ValueError("sensors_per_gateway must be >= 1")


@dataclass(frozen=True)
class FrequencyTable:
    """Class counts, rows A..E and one column per gateway."""

    counts: np.ndarray
    window: int = 1
    farm_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != N_CLASSES:
            raise ValueError(f"counts must have shape (5, N), got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        if not self.farm_ids:
            object.__setattr__(self, "farm_ids", tuple(f"F{i:02d}" for i in range(counts.shape[1])))
        elif len(self.farm_ids) != counts.shape[1]:
            raise ValueError("farm_ids length does not match the number of columns")

    @property
    def n_farms(self) -> int:
        return self.counts.shape[1]

    def to_csv(self, path) -> None:
        _write_matrix_csv(path, self.counts, self.farm_ids)


@dataclass(frozen=True)
class ConditionalMatrix:
    """Per-class probabilities across gateways, shape (5, N)."""

    probs: np.ndarray
    farm_ids: tuple[str, ...] = ()

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != N_CLASSES:
            raise ValueError(f"probs must have shape (5, N), got {probs.shape}")
        object.__setattr__(self, "probs", probs)

    def to_csv(self, path) -> None:
        _write_matrix_csv(path, self.probs, self.farm_ids)


def _write_matrix_csv(path, matrix, farm_ids):
    if not farm_ids:
        farm_ids = tuple(f"F{i:02d}" for i in range(matrix.shape[1]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", *farm_ids])
        for label, row in zip(CLASS_LABELS, matrix):
            writer.writerow([label, *row.tolist()])


def generate_farm_concentrations(
    seed: int,
    n_farms: int,
    inter_range: tuple[float, float] = (0.0, 50.0),
    intra_sigma: float | tuple[float, float] = 1.0,
    sensors_per_gateway: int = 100,
) -> list[FarmConfig]:
    """Draw farm mean levels uniformly from ``inter_range``.

    ``intra_sigma`` is either a fixed spread or a ``(lo, hi)`` interval from
    which each farm's spread is drawn uniformly.
    """
    lo, hi = inter_range
    if hi < lo:
        raise ValueError("inter_range is empty")
    if n_farms < 1:
        raise ValueError("n_farms must be >= 1")
    rng = rng_stream(seed, 0)
    means = rng.uniform(lo, hi, n_farms) if hi > lo else np.full(n_farms, float(lo))
    if isinstance(intra_sigma, tuple):
        sigmas = rng.uniform(intra_sigma[0], intra_sigma[1], n_farms)
    else:
        sigmas = np.full(n_farms, float(intra_sigma))
    width = max(2, len(str(n_farms - 1)))
    return [
        FarmConfig(f"F{i:0{width}d}", float(m), float(s), sensors_per_gateway)
        for i, (m, s) in enumerate(zip(means, sigmas))
    ]


def sample_sweeps(
    farm: FarmConfig,
    params: SensorParams,
    rng: np.random.Generator,
    sweeps: int = 1,
    level: float | None = None,
) -> np.ndarray:
    """Class counts for ``sweeps`` consecutive sweeps of one gateway, shape (sweeps, 5)."""
    level = farm.mean_conc if level is None else level
    k = farm.sensors_per_gateway
    conc = rng.normal(level, farm.intra_sigma, size=(sweeps, k)) if farm.intra_sigma > 0 \
        else np.full((sweeps, k), float(level))
    np.maximum(conc, 0.0, out=conc)
    labels = classify_array(response_factor_array(params, conc))
    out = np.zeros((sweeps, N_CLASSES), dtype=np.int64)
    for cls in range(N_CLASSES):
        out[:, cls] = np.count_nonzero(labels == cls, axis=1)
    return out


def sample_frequency_table(
    farms: Sequence[FarmConfig],
    params: SensorParams,
    seed: int,
    sweeps: int = 1,
    levels: Sequence[float] | None = None,
    keys: tuple[int, ...] = (),
) -> FrequencyTable:
    """One frequency table aggregating ``sweeps`` sweeps of every gateway.

    Gateway ``i`` draws from ``rng_stream(seed, *keys, i)``.
    """
    if not farms:
        raise ValueError("farms must be non-empty")
    counts = np.empty((N_CLASSES, len(farms)), dtype=np.int64)
    for i, farm in enumerate(farms):
        level = None if levels is None else levels[i]
        counts[:, i] = sample_sweeps(farm, params, rng_stream(seed, *keys, i), sweeps, level).sum(axis=0)
    return FrequencyTable(counts, sweeps, tuple(f.farm_id for f in farms))


def relative_frequency(table: FrequencyTable) -> ConditionalMatrix:
    """Divide each class row by its total over gateways; empty rows stay zero."""
    counts = table.counts.astype(float)
    totals = counts.sum(axis=1, keepdims=True)
    probs = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return ConditionalMatrix(probs, table.farm_ids)


def class_marginal(table: FrequencyTable) -> np.ndarray:
    """Share of all readings falling in each class, shape (5,)."""
    counts = table.counts.sum(axis=1).astype(float)
    total = counts.sum()
    return counts / total if total > 0 else np.zeros(N_CLASSES)


def gateway_likelihood(table: FrequencyTable, mode: str = "class-marginal") -> ConditionalMatrix:
    """Likelihood matrix handed to the Bayesian update.

    ``"row"`` is the plain row-normalised table. ``"class-marginal"`` multiplies
    each row back by its class share, giving the joint frequency of (gateway,
    class); per gateway this is proportional to the gateway's own class mix and
    removes the pull toward globally rare classes that the row form carries.
    """
    rel = relative_frequency(table)
    if mode == "row":
        return rel
    if mode == "class-marginal":
        return ConditionalMatrix(rel.probs * class_marginal(table)[:, None], table.farm_ids)
    raise ValueError(f"unknown likelihood mode {mode!r}")
