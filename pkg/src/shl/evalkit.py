"""Hamming-ranking retrieval metrics and a random-projection LSH baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import quantize
from .errors import InputError

__all__ = [
    "CodeDatabase",
    "PrPoint",
    "LshModel",
    "hamming",
    "hamming_matrix",
    "topk_precision",
    "pr_curve",
    "accuracy",
    "lsh_train",
    "lsh_fit",
    "lsh_encode",
]


@dataclass
class CodeDatabase:
    """Codes in ``{-1, +1}`` with integer labels and optional identity tags.

    Identity tags are only used to drop self-matches when a query set is
    ranked against a database that contains the same items.
    """

    codes: np.ndarray
    labels: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=float)
        if self.codes.ndim == 1:
            self.codes = self.codes[None, :]
        self.labels = np.asarray(self.labels).astype(np.int64).ravel()
        if self.codes.shape[0] != self.labels.shape[0]:
            raise InputError("codes and labels differ in length")
        if not np.all(np.isin(self.codes, (-1.0, 1.0))):
            raise InputError("codes must contain only -1 and +1")
        if self.ids is not None:
            self.ids = np.asarray(self.ids).ravel()
            if self.ids.shape[0] != self.labels.shape[0]:
                raise InputError("ids and labels differ in length")

    def __len__(self):
        return self.codes.shape[0]

    @property
    def n_bits(self) -> int:
        return self.codes.shape[1]


@dataclass(frozen=True)
class PrPoint:
    radius: int
    precision: float  # NaN when no query retrieves anything at this radius
    recall: float


def hamming(a, b) -> int:
    """Number of positions where two codes differ."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return int(np.count_nonzero(a != b))


def hamming_matrix(A, B) -> np.ndarray:
    """Pairwise Hamming distances between two sets of +-1 codes."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[1]:
        raise InputError("code lengths differ")
    return np.rint((A.shape[1] - A @ B.T) / 2).astype(np.int64)


def _self_mask(queries: CodeDatabase, db: CodeDatabase, exclude_self: bool):
    if not exclude_self or queries.ids is None or db.ids is None:
        return None
    return queries.ids[:, None] == db.ids[None, :]


def topk_precision(queries: CodeDatabase, db: CodeDatabase, k: int, exclude_self: bool = True) -> float:
    """Mean fraction of same-label items among the ``k`` Hamming-nearest database codes.

    Ties in distance are broken by ascending database index.
    """
    if len(db) == 0:
        raise InputError("empty database")
    if len(queries) == 0:
        raise InputError("empty query set")
    if queries.n_bits != db.n_bits:
        raise InputError("query and database code lengths differ")
    k = int(k)
    mask = _self_mask(queries, db, exclude_self)
    available = len(db) - (int(mask.sum(axis=1).max()) if mask is not None else 0)
    if k < 1 or k > available:
        raise InputError(f"k must lie in [1, {available}], got {k}")
    D = hamming_matrix(queries.codes, db.codes)
    if mask is not None:
        D = np.where(mask, db.n_bits + 1, D)
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    hits = db.labels[order] == queries.labels[:, None]
    return float(hits.mean())


def pr_curve(
    queries: CodeDatabase, db: CodeDatabase, exclude_self: bool = True, on_missing: str = "raise"
) -> list[PrPoint]:
    """Precision and recall of the retrieval set ``{d <= r}`` for ``r = 0..B``.

    Precision at a radius is averaged over queries that retrieve at least one
    item; it is NaN if none does. Recall is averaged over queries that have at
    least one relevant database item. A query without any is an error unless
    ``on_missing="skip"``, which leaves it out of the recall average (recall is
    NaN if no query has a relevant item).
    """
    if on_missing not in ("raise", "skip"):
        raise InputError("on_missing must be 'raise' or 'skip'")
    if len(db) == 0:
        raise InputError("empty database")
    if queries.n_bits != db.n_bits:
        raise InputError("query and database code lengths differ")
    B = db.n_bits
    D = hamming_matrix(queries.codes, db.codes)
    same = queries.labels[:, None] == db.labels[None, :]
    mask = _self_mask(queries, db, exclude_self)
    if mask is not None:
        D = np.where(mask, B + 1, D)
        same = same & ~mask
    relevant = same.sum(axis=1)
    has_rel = relevant > 0
    if on_missing == "raise" and not has_rel.all():
        missing = np.unique(queries.labels[relevant == 0])
        raise InputError(f"query labels {missing.tolist()} have no match in the database; recall undefined")

    points = []
    for r in range(B + 1):
        within = D <= r
        retrieved = within.sum(axis=1)
        tp = (within & same).sum(axis=1)
        recall = float(np.mean(tp[has_rel] / relevant[has_rel])) if has_rel.any() else float("nan")
        ok = retrieved > 0
        precision = float(np.mean(tp[ok] / retrieved[ok])) if ok.any() else float("nan")
        points.append(PrPoint(r, precision, recall))
    return points


def accuracy(predicted, truth) -> float:
    predicted = np.asarray(predicted).ravel()
    truth = np.asarray(truth).ravel()
    if predicted.shape != truth.shape:
        raise InputError("prediction and truth lengths differ")
    return float(np.mean(predicted == truth))


@dataclass
class LshModel:
    """Random hyperplanes ``W`` (B x d) thresholded at ``W @ center``."""

    projection: np.ndarray
    center: np.ndarray

    @property
    def thresholds(self) -> np.ndarray:
        return self.projection @ self.center

    @property
    def n_bits(self) -> int:
        return self.projection.shape[0]

    @property
    def dim(self) -> int:
        return self.projection.shape[1]


def lsh_train(d: int, n_bits: int, seed: int = 0, mean=None) -> LshModel:
    """Draw Gaussian hyperplanes; thresholds center them at ``mean`` (zero if omitted)."""
    if int(d) < 1 or int(n_bits) < 1:
        raise InputError("d and n_bits must be >= 1")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((int(n_bits), int(d)))
    mean = np.zeros(int(d)) if mean is None else np.asarray(mean, dtype=float).ravel()
    if mean.shape != (int(d),):
        raise InputError(f"mean must have length {d}")
    return LshModel(W, mean)


def lsh_fit(X, n_bits: int, seed: int = 0) -> LshModel:
    """:func:`lsh_train` with thresholds at the mean of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("X must be a non-empty 2-d array")
    return lsh_train(X.shape[1], n_bits, seed, mean=X.mean(axis=0))


def lsh_encode(model: LshModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.dim:
        raise InputError(f"expected dimension {model.dim}, got {X.shape[1]}")
    # subtract the center first so x == center maps exactly to 0
    codes = quantize((X - model.center) @ model.projection.T)
    return codes[0] if single else codes
