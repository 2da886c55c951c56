"""Dataset containers and tabular CSV loading.

The tabular CSV schema is: UTF-8, comma-separated, one header row, float
feature columns followed by a single trailing integer class-label column.
Ragged rows are rejected.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["BanditDataset", "TabularTask", "load_tabular_csv",
           "make_separable_task"]


@dataclass
class BanditDataset:
    """Historical (context, arm, reward, interval) rows for warm-starting."""

    contexts: np.ndarray   # (n, d_context), d_context may be 0
    arms: np.ndarray       # (n, d_arm)
    rewards: np.ndarray    # (n,) values in {0, 1}
    intervals: np.ndarray  # (n,) int interval labels

    def __post_init__(self):
        n = self.rewards.shape[0]
        if not (self.contexts.shape[0] == self.arms.shape[0]
                == self.intervals.shape[0] == n):
            raise ValueError("dataset arrays must share length")

    def __len__(self) -> int:
        return self.rewards.shape[0]

    @property
    def inputs(self) -> np.ndarray:
        """Concatenated (context, arm) model inputs, shape (n, dc + da)."""
        return np.hstack([self.contexts, self.arms])


@dataclass
class TabularTask:
    """Classification dataset viewed as a bandit: arms are one-hot classes
    and the reward is the indicator of choosing the true label."""

    contexts: np.ndarray      # (n, d) float features
    labels: np.ndarray        # (n,) int class indices
    n_classes: int
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError("labels out of range for class count")
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test splits overlap")

    @property
    def arm_vectors(self) -> np.ndarray:
        return np.eye(self.n_classes)

    def split(self, n_train, n_test, rng: np.random.Generator) -> "TabularTask":
        """Reshuffled disjoint splits of the requested sizes."""
        if n_train + n_test > self.contexts.shape[0]:
            raise ValueError("not enough rows for the requested split")
        perm = rng.permutation(self.contexts.shape[0])
        return TabularTask(self.contexts, self.labels, self.n_classes,
                           train_idx=perm[:n_train],
                           test_idx=perm[n_train:n_train + n_test])


def load_tabular_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read (features, labels) from the documented CSV schema."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        width = len(header)
        if width < 2:
            raise ValueError(f"{path}: need at least one feature and a label column")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ValueError(f"{path}:{lineno}: ragged row "
                                 f"({len(row)} fields, expected {width})")
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    features = data[:, :-1].astype(np.float64)
    raw_labels = data[:, -1].astype(np.float64)
    labels = raw_labels.astype(np.int64)
    if not np.array_equal(raw_labels, labels):
        raise ValueError(f"{path}: label column must hold integers")
    return features, labels


def task_from_csv(path, n_train, n_test, rng: np.random.Generator) -> TabularTask:
    features, labels = load_tabular_csv(path)
    n_classes = int(labels.max()) + 1
    base = TabularTask(features, labels, n_classes,
                       train_idx=np.arange(0), test_idx=np.arange(0))
    return base.split(n_train, n_test, rng)


def make_separable_task(rng: np.random.Generator, n_classes=4, dim=2,
                        n_train=4000, n_test=1000,
                        priors=(0.4, 0.3, 0.2, 0.1), spread=0.6,
                        scale=2.5) -> TabularTask:
    """Linearly separable Gaussian-blob classification task.

    Class priors are deliberately imbalanced so that context-free
    strategies (a fixed best arm) beat uniform play. Cluster centers sit on
    a circle of radius ``scale``; ``spread`` is the within-class standard
    deviation.
    """
    priors = np.asarray(priors, dtype=np.float64)
    if priors.size != n_classes:
        raise ValueError("need one prior per class")
    priors = priors / priors.sum()
    n = n_train + n_test
    labels = rng.choice(n_classes, size=n, p=priors)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = np.zeros((n_classes, dim))
    centers[:, 0] = scale * np.cos(angles)
    centers[:, 1 % dim] = scale * np.sin(angles)
    contexts = centers[labels] + rng.normal(0.0, spread, size=(n, dim))
    task = TabularTask(contexts, labels, n_classes,
                       train_idx=np.arange(0), test_idx=np.arange(0))
    return task.split(n_train, n_test, rng)
