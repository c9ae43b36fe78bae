"""Majorization-minimization training of kernel hash functions.

One outer iteration:

1. reassign every sample to its nearest codeword (``codebook.assign``);
2. for each bit independently, solve the SVM whose labels are the assigned
   codeword bits, then move that bit's kernel weights with the MKL update;
3. refit the codewords (exactly when ``S = 1``, proximal subgradient descent
   otherwise).

The surrogate distortion after every accepted iteration is recorded in
``HashModel.loss_trace``.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import codebook as cb
from .dataset import UNLABELED, LabeledDataset
from .errors import InputError, NumericalError
from .kernels import KernelSpec, build_bank, combined_kernel, cross_gram, default_specs
from .mkl import rkhs_norms, uniform_theta, update_theta
from .svm import SvmProblem, solve

__all__ = [
    "TrainConfig",
    "HashModel",
    "train",
    "transductive_train",
    "decision_function",
    "encode",
    "classify",
    "resolve_threads",
]

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Hyperparameters for :func:`train`.

    ``n_classes`` may be left as ``None`` when the training data carries
    labels; it is then inferred as ``max(label) + 1``.
    """

    n_bits: int = 8
    n_slots: int = 1
    n_classes: int | None = None
    lambda1: float = 1000.0
    lambda2: float = 2000.0
    p: float = 2.0
    kernels: list[KernelSpec] = field(default_factory=default_specs)
    max_outer: int = 20
    outer_tol: float = 1e-4
    svm_tol: float = 1e-3
    svm_max_passes: int = 1000
    psd_eta: float = 0.1
    psd_iters: int = 50
    standardize: bool = False
    monotone_guard: bool = True
    seed: int = 0
    threads: int = 1

    def validate(self) -> None:
        if int(self.n_bits) < 1:
            raise InputError("n_bits must be >= 1")
        if int(self.n_slots) < 1:
            raise InputError("n_slots must be >= 1")
        if self.n_classes is not None and int(self.n_classes) < 1:
            raise InputError("n_classes must be >= 1")
        if not self.lambda1 > 0:
            raise InputError("lambda1 must be positive")
        if self.lambda2 < 0:
            raise InputError("lambda2 must be nonnegative")
        if not self.p > 1:
            raise InputError("p must be > 1")
        if not self.kernels:
            raise InputError("at least one kernel is required")
        if int(self.max_outer) < 1:
            raise InputError("max_outer must be >= 1")
        if self.outer_tol < 0 or not self.svm_tol > 0:
            raise InputError("tolerances must be positive")
        if not self.psd_eta > 0 or int(self.psd_iters) < 1:
            raise InputError("psd_eta must be positive and psd_iters >= 1")

    def to_dict(self) -> dict:
        return {
            "n_bits": int(self.n_bits),
            "n_slots": int(self.n_slots),
            "n_classes": None if self.n_classes is None else int(self.n_classes),
            "lambda1": float(self.lambda1),
            "lambda2": float(self.lambda2),
            "p": float(self.p),
            "kernels": [k.to_string() for k in self.kernels],
            "max_outer": int(self.max_outer),
            "outer_tol": float(self.outer_tol),
            "svm_tol": float(self.svm_tol),
            "svm_max_passes": int(self.svm_max_passes),
            "psd_eta": float(self.psd_eta),
            "psd_iters": int(self.psd_iters),
            "standardize": bool(self.standardize),
            "monotone_guard": bool(self.monotone_guard),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["kernels"] = [KernelSpec.from_string(s) for s in d["kernels"]]
        return cls(**d)


@dataclass
class HashModel:
    """Everything needed to hash new points.

    Bit ``b`` computes ``f_b(x) = sum_i coef[b, i] k_b(support[i], x) + beta[b]``
    with ``k_b = sum_m theta[b, m] k_m``. ``theta`` holds the weights the duals
    were solved against; ``theta_next`` the MKL update that would seed a
    further iteration.
    """

    config: TrainConfig
    specs: tuple[KernelSpec, ...]
    support: np.ndarray
    coef: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    theta_next: np.ndarray
    codebook: cb.Codebook
    loss_trace: list[float]
    objective_trace: list[float] = field(default_factory=list)
    feature_shift: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    train_decision: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def n_bits(self) -> int:
        return self.coef.shape[0]

    @property
    def dim(self) -> int:
        return self.support.shape[1]


def resolve_threads(threads: int | None) -> int:
    """Thread count, with the ``SHL_THREADS`` environment variable taking precedence."""
    env = os.environ.get("SHL_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise InputError(f"SHL_THREADS must be an integer, got {env!r}") from None
    threads = 1 if threads is None else int(threads)
    if threads < 1:
        raise InputError("thread count must be >= 1")
    return threads


def _standardizer(X, enabled):
    if not enabled:
        return None, None
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return shift, scale


def _initial_assignment(labels, n_classes, rng) -> cb.Assignment:
    cls = labels.copy()
    unl = labels == UNLABELED
    cls[unl] = rng.integers(0, n_classes, size=int(unl.sum()))
    return cb.Assignment(cls, np.zeros(labels.shape[0], dtype=np.int64))


def _fit_bit(bank, y, theta, config, cost):
    K = combined_kernel(bank, theta)
    sol = solve(SvmProblem(K, y, cost), tol=config.svm_tol, max_passes=config.svm_max_passes)
    ay = sol.alpha * y
    f = K @ ay + sol.beta
    norms = rkhs_norms(sol.alpha, y, theta, bank)
    nxt = update_theta(norms, config.p)
    reg = 0.5 * float(ay @ K @ ay)
    return sol, f, nxt.theta, reg


def _update_codebook(F, assignment, book, config, n_classes):
    counts = np.bincount(assignment.cls, minlength=n_classes)
    active = counts > 0
    if book.n_slots == 1:
        new, empty = cb.optimize_codewords_single(F, assignment, n_classes, book.n_bits)
        mu = np.where(empty[:, None, None], book.mu, new.mu)
        return cb.Codebook(mu), {"status": "exact", "empty_classes": int(empty.sum())}
    new, report = cb.optimize_codewords(
        F,
        assignment,
        book,
        config.lambda2,
        eta=config.psd_eta,
        iters=config.psd_iters,
        active=active,
    )
    report["empty_classes"] = int((~active).sum())
    return new, report


def train(config: TrainConfig, data: LabeledDataset) -> HashModel:
    """Learn hash functions and codewords from labeled and/or unlabeled data."""
    config.validate()
    if len(data) == 0:
        raise InputError("training set is empty")
    labels = data.labels
    n_classes = config.n_classes if config.n_classes is not None else data.n_classes
    if n_classes < 1:
        raise InputError("n_classes must be given when the data has no labels")
    if labels.max() >= n_classes:
        raise InputError(f"labels must lie in [0, {n_classes})")
    if (labels >= 0).any() and len(data) < n_classes:
        raise InputError("need at least as many samples as classes")

    B, S = int(config.n_bits), int(config.n_slots)
    threads = resolve_threads(config.threads)
    X = data.features
    shift, scale = _standardizer(X, config.standardize)
    Xs = X if shift is None else (X - shift) / scale

    specs = tuple(config.kernels)
    bank = build_bank(specs, Xs)
    rng = np.random.default_rng(config.seed)
    book = cb.init_codebook(n_classes, S, B, rng)
    theta = np.tile(uniform_theta(bank.m, config.p), (B, 1))
    assignment = _initial_assignment(labels, n_classes, rng)

    n = len(data)
    F = np.zeros((n, B))
    loss = cb.surrogate_loss(F, book, assignment)
    trace = [loss]
    objective_trace: list[float] = []
    state = None  # (solutions, theta_used, theta_next, F)
    info = {"iterations": 0, "stop": "max_outer", "svm_status": [], "codebook": []}

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for outer in range(int(config.max_outer)):
            if outer > 0:
                assignment = cb.assign(F, book, labels)
                part = np.ones(n, dtype=bool)
            else:
                # no decision values exist yet to place unlabeled samples, so
                # the first pass fits the labeled ones alone when there are any
                part = labels != UNLABELED if (labels != UNLABELED).any() else np.ones(n, dtype=bool)
            targets = book.quantized[assignment.cls, assignment.slot]  # (n, B)
            cost = np.where(part, float(config.lambda1), 0.0)

            def job(b, targets=targets, cost=cost):
                return _fit_bit(bank, targets[:, b], theta[b], config, cost)

            results = list(pool.map(job, range(B))) if pool else [job(b) for b in range(B)]
            F_new = np.column_stack([r[1] for r in results])
            if not np.all(np.isfinite(F_new)):
                raise NumericalError("non-finite decision values during training")
            theta_new = np.vstack([r[2] for r in results])
            reg = sum(r[3] for r in results)

            sub = cb.Assignment(assignment.cls[part], assignment.slot[part])
            book_new, book_report = _update_codebook(F_new[part], sub, book, config, n_classes)
            assignment_new = cb.assign(F_new, book_new, labels)
            loss_new = cb.surrogate_loss(F_new, book_new, assignment_new)

            if config.monotone_guard and loss_new > loss + 1e-12 * max(1.0, loss):
                log.info("outer %d rejected: loss %.10g -> %.10g", outer, loss, loss_new)
                info["stop"] = "guard"
                info["rejected_loss"] = loss_new
                break

            penalty = cb.pair_penalty(book_new.mu) if S > 1 else 0.0
            objective_trace.append(config.lambda1 * loss_new + reg + config.lambda2 * penalty)
            state = ([r[0] for r in results], theta, theta_new, F_new, targets)
            info["svm_status"].append([r[0].status for r in results])
            info["codebook"].append(book_report)
            info["iterations"] = outer + 1
            F, book, theta = F_new, book_new, theta_new
            rel = (loss - loss_new) / max(loss, 1.0)
            loss = loss_new
            trace.append(loss)
            log.debug("outer %d: loss %.6g", outer, loss)
            if rel < config.outer_tol:
                info["stop"] = "converged"
                break
    finally:
        if pool:
            pool.shutdown()

    if state is None:
        raise NumericalError("the first training iteration did not decrease the surrogate loss")
    sols, theta_used, theta_next, F, targets = state
    coef_full = np.vstack([s.alpha * targets[:, b] for b, s in enumerate(sols)])
    sv = np.flatnonzero(np.any(coef_full != 0, axis=0))
    return HashModel(
        config=replace(config, n_classes=n_classes),
        specs=specs,
        support=Xs[sv].copy() if shift is None else X[sv].copy(),
        coef=coef_full[:, sv],
        beta=np.array([s.beta for s in sols]),
        theta=theta_used.copy(),
        theta_next=theta_next.copy(),
        codebook=book,
        loss_trace=trace,
        objective_trace=objective_trace,
        feature_shift=shift,
        feature_scale=scale,
        train_decision=F,
        info=info,
    )


def transductive_train(config: TrainConfig, labeled: LabeledDataset, unlabeled_features) -> HashModel:
    """Train with the (unlabeled) test features included in the training set."""
    U = np.asarray(unlabeled_features, dtype=float)
    if U.size == 0:
        return train(config, labeled)
    if U.ndim != 2 or U.shape[1] != labeled.dim:
        raise InputError(f"unlabeled features must have {labeled.dim} columns")
    n_classes = config.n_classes if config.n_classes is not None else labeled.n_classes
    union = LabeledDataset(
        np.vstack([labeled.features, U]),
        np.concatenate([labeled.labels, np.full(U.shape[0], UNLABELED, dtype=np.int64)]),
    )
    return train(replace(config, n_classes=n_classes), union)


def decision_function(model: HashModel, X, chunk: int = 4096) -> np.ndarray:
    """Real-valued outputs ``f(x)`` of every bit, shape ``(n, B)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise InputError(f"expected features of dimension {model.dim}")
    if not np.all(np.isfinite(X)):
        raise InputError("features contain NaN or infinite values")
    S = model.support
    if model.feature_shift is not None:
        X = (X - model.feature_shift) / model.feature_scale
        S = (S - model.feature_shift) / model.feature_scale
    out = np.empty((X.shape[0], model.n_bits))
    for lo in range(0, X.shape[0], chunk):
        Xc = X[lo : lo + chunk]
        acc = np.zeros((model.n_bits, Xc.shape[0]))
        for m, spec in enumerate(model.specs):
            proj = model.coef @ cross_gram(spec, S, Xc)
            acc += model.theta[:, m : m + 1] * proj
        out[lo : lo + chunk] = (acc + model.beta[:, None]).T
    return out


def encode(model: HashModel, X) -> np.ndarray:
    """Hash codes in ``{-1, +1}``; one row per input (a single vector gives one row)."""
    return cb.quantize(decision_function(model, X))


def classify(model: HashModel, X) -> np.ndarray:
    """Class of the Hamming-nearest quantized codeword (ties: smallest class, slot)."""
    codes = encode(model, X)
    q = model.codebook.quantized
    C, S, B = q.shape
    dist = (B - codes @ q.reshape(C * S, B).T) / 2
    return np.argmin(dist, axis=1) // S
