"""Incremental prototype learner (XuILVQ-family).

A model is an insertion-ordered buffer of labeled prototypes.  Streaming
samples either seed the buffer (first three), insert a new prototype (novel
class, or outside both nearest acceptance radii), or pull the nearest
prototype toward / push it away from the sample with a win-count-decayed
learning rate.

The buffer lives in flat numpy arrays so the nearest-neighbour scans run in
the compiled kernels; the ``Prototype`` dataclass is the copy-out view used
by serialization and by prototype exchange.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ArgumentError, DimensionError, EmptyModelError


@dataclass
class Sample:
    """A feature vector with its class label."""

    x: np.ndarray
    y: int


@dataclass
class Prototype:
    """A labeled representative vector with win count and acceptance radius."""

    vector: np.ndarray
    label: int
    wins: int = 1
    threshold: float = math.inf


class TrainOutcome(Enum):
    SEEDED = "seeded"
    INSERTED = "inserted"
    UPDATED = "updated"


def _as_vector(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != dim:
        raise DimensionError(f"expected a vector of dim {dim}, got shape {v.shape}")
    return v


class IlvqModel:
    """Streaming nearest-prototype classifier.

    Single-writer: call ``train_step``/``absorb_prototypes`` from one context;
    reads between steps are safe.
    """

    def __init__(
        self,
        dim: int,
        alpha_winner: float = 0.9,
        alpha_runner: float = 0.1,
        recompute_all_thresholds: bool = False,
    ):
        if dim < 1:
            raise ArgumentError(f"dim must be >= 1, got {dim}")
        if not (0.0 <= alpha_winner <= 1.0) or not (0.0 <= alpha_runner <= 1.0):
            raise ArgumentError("learning rates must lie in [0, 1]")
        self.dim = dim
        self.alpha_winner = alpha_winner
        self.alpha_runner = alpha_runner
        self.recompute_all_thresholds = recompute_all_thresholds
        cap = 8
        self._vectors = np.zeros((cap, dim), dtype=np.float64)
        self._labels = np.zeros(cap, dtype=np.int64)
        self._wins = np.zeros(cap, dtype=np.int64)
        self._thresholds = np.zeros(cap, dtype=np.float64)
        self._size = 0
        self._seen_labels: set[int] = set()

    def __len__(self) -> int:
        return self._size

    # -- live views over the filled part of the buffer -------------------

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors[: self._size]

    @property
    def labels(self) -> np.ndarray:
        return self._labels[: self._size]

    @property
    def wins(self) -> np.ndarray:
        return self._wins[: self._size]

    @property
    def thresholds(self) -> np.ndarray:
        return self._thresholds[: self._size]

    def prototypes(self) -> list[Prototype]:
        """Copy-out snapshot in insertion order (the serialization order)."""
        return [
            Prototype(
                vector=self._vectors[i].copy(),
                label=int(self._labels[i]),
                wins=int(self._wins[i]),
                threshold=float(self._thresholds[i]),
            )
            for i in range(self._size)
        ]

    # -- core operations --------------------------------------------------

    def f_nearest(self, x, n: int) -> list[tuple[int, float]]:
        """The min(n, len) nearest prototypes to x as (index, distance),
        sorted by ascending Euclidean distance, ties toward lower index."""
        if self._size == 0:
            raise EmptyModelError("no prototypes in buffer")
        v = _as_vector(x, self.dim)
        d = kernels.sq_dists(self.vectors, v)
        order = np.argsort(d, kind="stable")[: max(0, n)]
        return [(int(i), float(math.sqrt(d[i]))) for i in order]

    def compute_threshold(self, idx: int) -> float:
        """Distance to the nearest different-class prototype, falling back to
        the nearest same-class neighbour; +inf for a buffer of one."""
        if not (0 <= idx < self._size):
            raise ArgumentError(f"prototype index {idx} out of range")
        return float(kernels.threshold_dist(self.vectors, self.labels, idx))

    def _append(self, v: np.ndarray, y: int) -> int:
        if self._size == self._vectors.shape[0]:
            cap = self._vectors.shape[0] * 2
            self._vectors = np.vstack([self._vectors, np.zeros_like(self._vectors)])
            self._labels = np.concatenate([self._labels, np.zeros(cap // 2, np.int64)])
            self._wins = np.concatenate([self._wins, np.zeros(cap // 2, np.int64)])
            self._thresholds = np.concatenate(
                [self._thresholds, np.zeros(cap // 2, np.float64)]
            )
        i = self._size
        self._vectors[i] = v
        self._labels[i] = y
        self._wins[i] = 1
        self._thresholds[i] = math.inf
        self._size += 1
        self._seen_labels.add(int(y))
        return i

    def _refresh_thresholds(self, touched: Iterable[int]) -> None:
        idxs = range(self._size) if self.recompute_all_thresholds else touched
        for i in set(idxs):
            self._thresholds[i] = kernels.threshold_dist(
                self.vectors, self.labels, i
            )

    def train_step(self, s: Sample) -> TrainOutcome:
        """Ingest one sample; returns how the buffer changed."""
        v = _as_vector(s.x, self.dim)
        y = int(s.y)

        if self._size < 3:
            self._append(v, y)
            self._refresh_thresholds(range(self._size))
            return TrainOutcome.SEEDED

        i1, d1, i2, d2 = kernels.two_nearest(self.vectors, v)
        if (
            y not in self._seen_labels
            or d1 > self._thresholds[i1]
            or d2 > self._thresholds[i2]
        ):
            new = self._append(v, y)
            self._refresh_thresholds((new, i1, i2))
            return TrainOutcome.INSERTED

        self._update_winner(i1, i2, v, y)
        self._refresh_thresholds((i1, i2))
        return TrainOutcome.UPDATED

    def _update_winner(self, i1: int, i2: int, v: np.ndarray, y: int) -> None:
        # winner attraction decays with its win count; a wrong-class winner is
        # repelled and the runner-up attracts instead when it matches the class
        if self._labels[i1] == y:
            self._vectors[i1] += (self.alpha_winner / self._wins[i1]) * (
                v - self._vectors[i1]
            )
            self._wins[i1] += 1
        else:
            self._vectors[i1] -= self.alpha_runner * (v - self._vectors[i1])
            if self._labels[i2] == y:
                self._vectors[i2] += self.alpha_runner * (v - self._vectors[i2])

    def predict(self, x) -> int:
        """Label of the nearest prototype (ties toward lower index)."""
        if self._size == 0:
            raise EmptyModelError("no prototypes in buffer")
        v = _as_vector(x, self.dim)
        if self._size == 1:
            return int(self._labels[0])
        i1, _, _, _ = kernels.two_nearest(self.vectors, v)
        return int(self._labels[i1])

    def evaluate(self, samples: Sequence[Sample]) -> float:
        """Fraction of samples whose label the model predicts correctly."""
        if len(samples) == 0:
            raise ArgumentError("evaluate needs at least one sample")
        correct = sum(1 for s in samples if self.predict(s.x) == int(s.y))
        return correct / len(samples)

    def absorb_prototypes(self, externals: Sequence[Prototype]) -> None:
        """Replay received prototypes as training samples, in list order."""
        for p in externals:
            self.train_step(Sample(x=p.vector, y=p.label))
