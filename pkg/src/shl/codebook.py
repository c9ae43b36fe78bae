"""Class codewords: assignment, surrogate distortion and codeword optimization.

Codewords are held in relaxed (continuous) form ``mu`` of shape ``(C, S, B)``.
Everything that needs Hamming-cube codewords (assignment, SVM labels, the
surrogate loss, retrieval) uses the sign-quantized view, with ``sign(0) = +1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InputError

__all__ = [
    "Codebook",
    "Assignment",
    "quantize",
    "init_codebook",
    "dbar",
    "dbar_table",
    "assign",
    "surrogate_loss",
    "codeword_objective",
    "prox_pair",
    "aggregated_prox",
    "hinge_subgradient",
    "optimize_codewords",
    "optimize_codewords_single",
    "within_class_distances",
    "pair_penalty",
]


def quantize(values) -> np.ndarray:
    """Elementwise sign with ``sign(0) = +1``."""
    return np.where(np.asarray(values, dtype=float) >= 0, 1.0, -1.0)


@dataclass
class Codebook:
    mu: np.ndarray  # (C, S, B)

    def __post_init__(self):
        self.mu = np.array(self.mu, dtype=float)
        if self.mu.ndim != 3:
            raise InputError("codebook array must have shape (C, S, B)")
        if not np.all(np.isfinite(self.mu)):
            raise InputError("codebook entries must be finite")

    @property
    def n_classes(self) -> int:
        return self.mu.shape[0]

    @property
    def n_slots(self) -> int:
        return self.mu.shape[1]

    @property
    def n_bits(self) -> int:
        return self.mu.shape[2]

    @property
    def quantized(self) -> np.ndarray:
        return quantize(self.mu)

    def copy(self) -> "Codebook":
        return Codebook(self.mu.copy())


@dataclass
class Assignment:
    """Selected ``(class, slot)`` per training sample (0-based)."""

    cls: np.ndarray
    slot: np.ndarray

    def __post_init__(self):
        self.cls = np.asarray(self.cls, dtype=np.int64).ravel()
        self.slot = np.asarray(self.slot, dtype=np.int64).ravel()
        if self.cls.shape != self.slot.shape:
            raise InputError("class and slot arrays differ in length")

    def __len__(self):
        return self.cls.shape[0]


def init_codebook(n_classes: int, n_slots: int, n_bits: int, rng) -> Codebook:
    """Random +-1 codewords whose quantized forms differ across classes.

    Codewords colliding with another class are resampled; if that keeps
    failing (``2**B`` too small) the colliding codeword gets its bits flipped
    in a fixed order until it is distinct or the options run out.
    """
    if min(n_classes, n_slots, n_bits) < 1:
        raise InputError("n_classes, n_slots and n_bits must be >= 1")
    rng = np.random.default_rng(rng)
    C, S, B = n_classes, n_slots, n_bits
    mu = rng.choice([-1.0, 1.0], size=(C, S, B))

    def collides(c, s):
        others = np.delete(mu, c, axis=0).reshape(-1, B)
        return bool(np.any(np.all(others == mu[c, s], axis=1)))

    budget = 100 * C * S
    for c in range(C):
        for s in range(S):
            while budget > 0 and collides(c, s):
                mu[c, s] = rng.choice([-1.0, 1.0], size=B)
                budget -= 1
    for c in range(C):
        for s in range(S):
            flip = 0
            while collides(c, s) and flip < 2**B:
                bits = (flip >> np.arange(B)) & 1
                mu[c, s] = np.where(bits == 1, -mu[c, s], mu[c, s])
                flip += 1
    return Codebook(mu)


def dbar(f, mu) -> float:
    """Hinge surrogate of the Hamming distance, ``sum_b [1 - mu_b f_b]_+``."""
    f = np.asarray(f, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    if f.shape != mu.shape:
        raise InputError(f"length mismatch: {f.shape[0]} vs {mu.shape[0]}")
    return float(np.maximum(0.0, 1.0 - mu * f).sum())


def dbar_table(F, codewords) -> np.ndarray:
    """``D[n, c, s] = dbar(F[n], codewords[c, s])``."""
    F = np.asarray(F, dtype=float)
    W = np.asarray(codewords, dtype=float)
    C, S, B = W.shape
    if F.ndim != 2 or F.shape[1] != B:
        raise InputError(f"decision matrix must have {B} columns")
    flat = W.reshape(C * S, B)
    out = np.empty((F.shape[0], C * S))
    step = max(1, 2**22 // max(1, C * S * B))
    for lo in range(0, F.shape[0], step):
        block = F[lo : lo + step]
        out[lo : lo + step] = np.maximum(0.0, 1.0 - block[:, None, :] * flat[None]).sum(-1)
    return out.reshape(F.shape[0], C, S)


def _labels_array(labels, n):
    if labels is None:
        return np.full(n, -1, dtype=np.int64)
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InputError(f"labels must have length {n}")
    return labels.astype(np.int64)


def assign(F, codebook: Codebook, labels=None) -> Assignment:
    """Nearest codeword per sample under ``dbar``.

    Labeled samples (label >= 0) pick the best slot of their own class;
    unlabeled samples (label -1) pick the best ``(class, slot)`` overall.
    Ties go to the smallest index in lexicographic order.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    labels = _labels_array(labels, n)
    C, S = codebook.n_classes, codebook.n_slots
    if np.any((labels < -1) | (labels >= C)):
        raise InputError(f"labels must be -1 (unlabeled) or in [0, {C})")
    D = dbar_table(F, codebook.quantized)
    cls = np.empty(n, dtype=np.int64)
    slot = np.empty(n, dtype=np.int64)

    lab = labels >= 0
    if lab.any():
        rows = np.flatnonzero(lab)
        cls[rows] = labels[rows]
        slot[rows] = np.argmin(D[rows, labels[rows], :], axis=1)
    if (~lab).any():
        rows = np.flatnonzero(~lab)
        flat = np.argmin(D[rows].reshape(rows.size, C * S), axis=1)
        cls[rows], slot[rows] = np.divmod(flat, S)
    return Assignment(cls, slot)


def _check_assignment(F, codebook, assignment):
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] != codebook.n_bits:
        raise InputError(f"decision matrix must have {codebook.n_bits} columns")
    if len(assignment) != F.shape[0]:
        raise InputError("assignment length differs from the number of samples")
    if np.any((assignment.cls < 0) | (assignment.cls >= codebook.n_classes)) or np.any(
        (assignment.slot < 0) | (assignment.slot >= codebook.n_slots)
    ):
        raise InputError("assignment refers to a codeword outside the codebook")
    return F


def surrogate_loss(F, codebook: Codebook, assignment: Assignment) -> float:
    """Sum over samples of ``dbar`` at the assigned quantized codeword."""
    F = _check_assignment(F, codebook, assignment)
    targets = codebook.quantized[assignment.cls, assignment.slot]
    return float(np.maximum(0.0, 1.0 - targets * F).sum())


def pair_penalty(mu: np.ndarray) -> float:
    S = mu.shape[1]
    total = 0.0
    for i, j in combinations(range(S), 2):
        total += np.linalg.norm(mu[:, i] - mu[:, j], axis=1).sum()
    return float(total)


def codeword_objective(F, assignment: Assignment, mu, lambda2: float) -> float:
    """Relaxed codeword cost: hinge term at continuous ``mu`` plus the pairwise penalty."""
    mu = np.asarray(mu, dtype=float)
    targets = mu[assignment.cls, assignment.slot]
    hinge = np.maximum(0.0, 1.0 - targets * np.asarray(F, dtype=float)).sum()
    return float(hinge + lambda2 * pair_penalty(mu))


def prox_pair(v_i, v_j, eta: float):
    """Proximal map of ``eta * ||mu_i - mu_j||_2`` for one codeword pair.

    Each vector moves toward the other by ``eta`` along their difference;
    once ``eta >= ||v_i - v_j|| / 2`` both land on the midpoint.
    """
    if not eta > 0:
        raise InputError("eta must be positive")
    v_i = np.asarray(v_i, dtype=float)
    v_j = np.asarray(v_j, dtype=float)
    if v_i.shape != v_j.shape:
        raise InputError("v_i and v_j must have the same shape")
    dist = float(np.linalg.norm(v_i - v_j))
    a2 = 0.5 if dist <= 2.0 * eta else eta / dist
    a1 = 1.0 - a2
    return a1 * v_i + a2 * v_j, a2 * v_i + a1 * v_j


def aggregated_prox(v, eta: float) -> np.ndarray:
    """Average of the pairwise proximal maps over every within-class pair.

    ``v`` has shape ``(C, S, B)``. For each class, every unordered slot pair
    ``(i, j)`` yields a full copy of the class block with only ``i`` and ``j``
    replaced; the result is the mean of those copies.
    """
    v = np.asarray(v, dtype=float)
    S = v.shape[1]
    if S < 2:
        return v.copy()
    pairs = list(combinations(range(S), 2))
    out = np.empty_like(v)
    for c in range(v.shape[0]):
        acc = np.zeros((S, v.shape[2]))
        touched = np.zeros(S)
        for i, j in pairs:
            mi, mj = prox_pair(v[c, i], v[c, j], eta)
            acc[i] += mi
            acc[j] += mj
            touched[i] += 1
            touched[j] += 1
        acc += (len(pairs) - touched)[:, None] * v[c]
        out[c] = acc / len(pairs)
    return out


def hinge_subgradient(F, assignment: Assignment, codebook: Codebook | np.ndarray) -> np.ndarray:
    """Subgradient of the relaxed hinge term with respect to continuous codewords.

    Entry ``[c, s, b]`` is ``-sum f_b(x_n) [1 - mu f_b(x_n) > 0]`` over samples
    assigned to ``(c, s)``; kinks contribute 0.
    """
    mu = codebook.mu if isinstance(codebook, Codebook) else np.asarray(codebook, dtype=float)
    F = np.asarray(F, dtype=float)
    C, S, B = mu.shape
    targets = mu[assignment.cls, assignment.slot]
    active = (1.0 - targets * F) > 0
    contrib = np.where(active, -F, 0.0)
    grad = np.zeros(C * S * B).reshape(C * S, B)
    np.add.at(grad, assignment.cls * S + assignment.slot, contrib)
    return grad.reshape(C, S, B)


def _psd_run(F, assignment, mu0, lambda2, eta, iters, active):
    """Accelerated proximal subgradient descent; returns the best iterate seen."""
    mu = mu0.copy()
    y_prev = mu0.copy()
    best = mu0.copy()
    best_obj = codeword_objective(F, assignment, mu0, lambda2)
    thresh = eta * lambda2
    for k in range(1, iters + 1):
        z = mu - eta * hinge_subgradient(F, assignment, mu)
        y = aggregated_prox(z, thresh) if thresh > 0 else z
        y[~active] = mu0[~active]
        obj = codeword_objective(F, assignment, y, lambda2)
        if obj < best_obj:
            best, best_obj = y.copy(), obj
        mu = y + (k - 1.0) / (k + 2.0) * (y - y_prev)
        y_prev = y
    return best, best_obj


def optimize_codewords(
    F,
    assignment: Assignment,
    codebook: Codebook,
    lambda2: float,
    eta: float = 0.1,
    iters: int = 50,
    active=None,
    max_halvings: int = 5,
):
    """Proximal subgradient descent with momentum on the relaxed codewords.

    Classes where ``active`` is False are left untouched. If no iterate
    improves the relaxed objective, the step length is halved (up to
    ``max_halvings`` times) before giving up and keeping the incumbent.

    Returns
    -------
    (Codebook, dict)
        The new codebook and a small report with keys ``objective_before``,
        ``objective_after``, ``eta`` and ``status``.
    """
    if lambda2 < 0:
        raise InputError("lambda2 must be nonnegative")
    if not eta > 0:
        raise InputError("eta must be positive")
    if iters < 1:
        raise InputError("iters must be >= 1")
    F = _check_assignment(F, codebook, assignment)
    C = codebook.n_classes
    active = np.ones(C, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    mu0 = codebook.mu
    before = codeword_objective(F, assignment, mu0, lambda2)
    step = float(eta)
    for _ in range(max_halvings + 1):
        mu, after = _psd_run(F, assignment, mu0, lambda2, step, iters, active)
        if after <= before + 1e-8 * max(1.0, abs(before)):
            return Codebook(mu), {
                "objective_before": before,
                "objective_after": after,
                "eta": step,
                "status": "ok",
            }
        step *= 0.5
    return codebook.copy(), {
        "objective_before": before,
        "objective_after": before,
        "eta": step,
        "status": "kept-incumbent",
    }


def optimize_codewords_single(F, assignment: Assignment, n_classes: int, n_bits: int):
    """Exact +-1 codewords for one codeword per class.

    Each ``(class, bit)`` entry independently takes the value in ``{-1, +1}``
    with the smaller summed hinge loss over the samples assigned to that
    class; ties go to +1. Classes with no samples get the all +1 codeword.

    Returns
    -------
    (Codebook, numpy.ndarray)
        Codebook with ``S = 1`` and a boolean flag per class marking empty classes.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] != n_bits:
        raise InputError(f"decision matrix must have {n_bits} columns")
    if len(assignment) != F.shape[0]:
        raise InputError("assignment length differs from the number of samples")
    if np.any(assignment.slot != 0):
        raise InputError("single-codeword update requires every slot to be 0")
    if np.any((assignment.cls < 0) | (assignment.cls >= n_classes)):
        raise InputError("assignment refers to a class outside the codebook")
    loss_pos = np.zeros((n_classes, n_bits))
    loss_neg = np.zeros((n_classes, n_bits))
    np.add.at(loss_pos, assignment.cls, np.maximum(0.0, 1.0 - F))
    np.add.at(loss_neg, assignment.cls, np.maximum(0.0, 1.0 + F))
    mu = np.where(loss_neg < loss_pos, -1.0, 1.0)
    empty = np.bincount(assignment.cls, minlength=n_classes) == 0
    mu[empty] = 1.0
    return Codebook(mu[:, None, :]), empty


def within_class_distances(codebook: Codebook) -> np.ndarray:
    """Hamming distances between quantized slot pairs, shape ``(C, S(S-1)/2)``."""
    q = codebook.quantized
    S = codebook.n_slots
    pairs = list(combinations(range(S), 2))
    out = np.zeros((codebook.n_classes, len(pairs)), dtype=np.int64)
    for k, (i, j) in enumerate(pairs):
        out[:, k] = np.sum(q[:, i] != q[:, j], axis=1)
    return out
