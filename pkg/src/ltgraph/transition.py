"""Label-transition statistics: Dirichlet prior, confusion counts, Gibbs step.

The transition matrix phi is K x K and row-stochastic; row k is the
distribution of the observed (noisy) label given that the inferred label
is k.  The warm-up estimate phi' is the Dirichlet posterior mean of the
train-graph confusion between classifier predictions and noisy labels.
During inference the matrix is never materialized per step: the Gibbs
factor is computed from leave-one-out confusion counts, with the
transition rows integrated out by Dirichlet-multinomial conjugacy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DirichletPrior:
    """Per-column pseudo-counts of the transition rows; all entries positive."""

    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.float64))
        if self.alpha.ndim != 1 or len(self.alpha) < 2:
            raise ValueError("alpha must be a vector of length >= 2")
        if np.any(self.alpha <= 0):
            raise ValueError("alpha entries must be positive")

    @classmethod
    def symmetric(cls, k: int, value: float = 1.0) -> "DirichletPrior":
        return cls(np.full(k, float(value)))

    @property
    def total(self) -> float:
        return float(self.alpha.sum())


def row_normalized(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    return matrix / matrix.sum(axis=1, keepdims=True)


def check_transition_matrix(phi: np.ndarray) -> None:
    """Validate row-stochasticity (1e-9) and strict positivity."""
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValueError(f"transition matrix must be square, got {phi.shape}")
    if np.any(phi <= 0):
        raise ValueError("transition matrix entries must be positive")
    if np.max(np.abs(phi.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("transition matrix rows must sum to 1")


@dataclass
class ConfusionCounts:
    """K x K co-occurrence counts of (inferred label z, noisy label y).

    Maintains per-row totals so the Gibbs denominator is O(K); `remove`
    before computing a node's leave-one-out factor, `add` after
    resampling it.
    """

    counts: np.ndarray
    row_totals: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("negative confusion count")
        self.row_totals = self.counts.sum(axis=1)

    @classmethod
    def from_assignments(cls, z: np.ndarray, y: np.ndarray, k: int) -> "ConfusionCounts":
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (z, y), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.row_totals.sum())

    def remove(self, z: int, y: int) -> None:
        if self.counts[z, y] < 1:
            raise ValueError(f"count underflow at ({z}, {y}): sampler bookkeeping bug")
        self.counts[z, y] -= 1
        self.row_totals[z] -= 1

    def add(self, z: int, y: int) -> None:
        self.counts[z, y] += 1
        self.row_totals[z] += 1

    def remove_add(self, old_z: int, new_z: int, y: int) -> None:
        """Move one (z, y) observation from old_z to new_z; total is preserved."""
        self.remove(old_z, y)
        self.add(new_z, y)

    def posterior_mean(self, prior: DirichletPrior) -> np.ndarray:
        """Row-normalized counts + alpha: the transition matrix these counts imply."""
        return row_normalized(self.counts + prior.alpha[None, :])


def warmup_transition(
    train_dist: np.ndarray,
    train_noisy: np.ndarray,
    prior: DirichletPrior,
) -> np.ndarray:
    """Warm-up transition matrix phi' from train-graph predictions.

    C[k, k'] counts train nodes whose argmax prediction is k and whose
    noisy label is k'; phi' is the posterior mean (C + alpha) row-normalized.
    Rows with no predictions fall back to the normalized prior.
    """
    train_dist = np.asarray(train_dist, dtype=np.float64)
    if len(train_dist) == 0:
        raise ValueError("empty train set")
    k = train_dist.shape[1]
    preds = train_dist.argmax(axis=1)
    counts = ConfusionCounts.from_assignments(preds, np.asarray(train_noisy), k)
    phi = counts.posterior_mean(prior)
    check_transition_matrix(phi)
    return phi


def _posterior(node_dist: np.ndarray, factor: np.ndarray) -> np.ndarray:
    # scaling by 1/max keeps a constant factor exactly neutral
    w = node_dist * (factor / factor.max())
    return w / w.sum()


def gibbs_step_distribution(
    node_dist: np.ndarray,
    noisy_label: int,
    phi: np.ndarray | None = None,
    counts: ConfusionCounts | np.ndarray | None = None,
    prior: DirichletPrior | None = None,
) -> np.ndarray:
    """Conditional distribution of one node's inferred label.

    Warm-up phase (`phi` given):      p(k) ~ node_dist[k] * phi[k, y]
    Dynamic phase (`counts`, `prior`): p(k) ~ node_dist[k] *
        (alpha[y] + C[k, y]) / sum_k' (alpha[k'] + C[k, k'])
    where C must already exclude the node's own current assignment.
    """
    node_dist = np.asarray(node_dist, dtype=np.float64)
    if phi is not None:
        if counts is not None:
            raise ValueError("pass either phi (warm-up) or counts+prior (dynamic)")
        factor = phi[:, noisy_label]
    else:
        if counts is None or prior is None:
            raise ValueError("dynamic phase needs counts and prior")
        c = counts.counts if isinstance(counts, ConfusionCounts) else np.asarray(counts)
        row_totals = (
            counts.row_totals if isinstance(counts, ConfusionCounts) else c.sum(axis=1)
        )
        factor = (prior.alpha[noisy_label] + c[:, noisy_label]) / (prior.total + row_totals)
    return _posterior(node_dist, factor)
