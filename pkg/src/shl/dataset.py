from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = ["LabeledDataset", "UNLABELED"]

UNLABELED = -1


@dataclass
class LabeledDataset:
    """Feature matrix with per-row integer labels; ``-1`` marks unlabeled rows."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise InputError("features must be a 2-d array")
        n = self.features.shape[0]
        if self.labels is None:
            self.labels = np.full(n, UNLABELED, dtype=np.int64)
        else:
            lab = np.asarray(self.labels)
            if lab.shape != (n,):
                raise InputError(f"expected {n} labels, got shape {lab.shape}")
            if lab.dtype.kind == "f":
                if not np.all(lab == np.round(lab)):
                    raise InputError("labels must be integers")
            self.labels = lab.astype(np.int64)
        if np.any(self.labels < UNLABELED):
            raise InputError("labels must be -1 (unlabeled) or nonnegative")
        if not np.all(np.isfinite(self.features)):
            raise InputError("features contain NaN or infinite values")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_index(self) -> np.ndarray:
        return np.flatnonzero(self.labels != UNLABELED)

    @property
    def unlabeled_index(self) -> np.ndarray:
        return np.flatnonzero(self.labels == UNLABELED)

    @property
    def n_classes(self) -> int:
        """One more than the largest label (0 when nothing is labeled)."""
        return int(self.labels.max()) + 1 if len(self) and self.labels.max() >= 0 else 0

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index)
        return LabeledDataset(self.features[index], self.labels[index])
