"""Sequential Bayesian updating of per-farm response-class probabilities."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ShapeMismatchError
from .field import N_CLASSES, ConditionalMatrix
from .kinetics import CLASS_LABELS, ResponseClass

UNIFORM_PRIOR = 1.0 / N_CLASSES


@dataclass(frozen=True)
class PriorMatrix:
    probs: np.ndarray
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_matrix(self.probs))

    @classmethod
    def uniform(cls, n_farms: int) -> "PriorMatrix":
        return cls(np.full((N_CLASSES, n_farms), UNIFORM_PRIOR), 0)


@dataclass(frozen=True)
class PosteriorMatrix:
    """P(class | farm); columns sum to one, or are all zero when the
    likelihood and prior share no support."""

    probs: np.ndarray
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_matrix(self.probs))

    @property
    def zero_columns(self) -> np.ndarray:
        return np.flatnonzero(self.probs.sum(axis=0) == 0)

    def argmax_classes(self) -> np.ndarray:
        """Most probable class index per farm; ties go to the lower class."""
        return self.probs.argmax(axis=0)

    def to_csv(self, path, farm_ids=None) -> None:
        _write(path, self.probs, farm_ids)


def _as_matrix(probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[0] != N_CLASSES:
        raise ShapeMismatchError(f"expected shape (5, N), got {probs.shape}")
    return probs


def _write(path, probs, farm_ids):
    farm_ids = farm_ids or [f"F{i:02d}" for i in range(probs.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", *farm_ids])
        for label, row in zip(CLASS_LABELS, probs):
            writer.writerow([label, *row.tolist()])


def _likelihood_array(likelihood) -> np.ndarray:
    if isinstance(likelihood, ConditionalMatrix):
        return likelihood.probs
    return np.asarray(likelihood, dtype=float)


def sbu_step(prior: PriorMatrix, likelihood) -> tuple[PosteriorMatrix, PriorMatrix]:
    """One Bayesian update for every farm.

    Posterior column i is the normalised product of the likelihood and prior
    columns (all zeros when that product vanishes). The carried prior is the
    posterior with every class that went unobserved this step (zero
    likelihood) restored to its previous prior value, then renormalised, so a
    missing reading never erases a class permanently.
    """
    f = _likelihood_array(likelihood)
    p = prior.probs
    if f.shape != p.shape:
        raise ShapeMismatchError(f"likelihood {f.shape} and prior {p.shape} differ")

    joint = f * p
    mass = joint.sum(axis=0)
    posterior = np.divide(joint, mass, out=np.zeros_like(joint), where=mass > 0)

    carried = np.where(f == 0, p, posterior)
    total = carried.sum(axis=0)
    carried = np.divide(carried, total, out=np.zeros_like(carried), where=total > 0)

    step = prior.step + 1
    return PosteriorMatrix(posterior, step), PriorMatrix(carried, step)


@dataclass
class SBUResult:
    posterior: PosteriorMatrix
    steps: int
    next_prior: PriorMatrix
    distances: list[float] = field(default_factory=list)

    def __iter__(self):
        # allows ``posterior, steps = run_sbu(...)``
        yield self.posterior
        yield self.steps


def run_sbu(prior0: PriorMatrix, stream: Iterable, epsilon: float = 1e-5) -> SBUResult:
    """Fold :func:`sbu_step` over ``stream`` until the posterior settles.

    Stops once the L1 change between successive posteriors (all entries summed)
    is at most ``epsilon``, or when the stream runs out. The first step is
    measured against the starting prior.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    prior = prior0
    previous = prior0.probs
    posterior = None
    distances: list[float] = []
    for likelihood in stream:
        posterior, prior = sbu_step(prior, likelihood)
        d = float(np.abs(posterior.probs - previous).sum())
        distances.append(d)
        previous = posterior.probs
        if d <= epsilon:
            break
    if posterior is None:
        raise ValueError("stream must be non-empty")
    return SBUResult(posterior, len(distances), prior, distances)


def deviation_from_class(posterior: PosteriorMatrix, target: ResponseClass = ResponseClass.C) -> np.ndarray:
    """Probability of *not* being in ``target`` for every farm.

    An all-zero posterior column carries no belief in ``target`` and so reports
    the maximal deviation 1.
    """
    return 1.0 - posterior.probs[target.index]


def write_convergence_csv(path, distances: Iterable[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "d"])
        for i, d in enumerate(distances, start=1):
            writer.writerow([i, d])
