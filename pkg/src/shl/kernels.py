"""Kernel functions, cached Gram matrices and per-bit kernel combinations.

Three kernel families are supported:

* ``linear``   -- normalized linear (cosine similarity),
* ``poly``     -- normalized polynomial on unit-normalized inputs,
* ``gauss``    -- Gaussian RBF ``exp(-||x - y||^2 / (2 sigma^2))``.

All three have a unit diagonal, which keeps them on a comparable scale when
they are mixed with multiple kernel learning weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "KernelSpec",
    "KernelBank",
    "DEFAULT_BANDWIDTHS",
    "default_specs",
    "parse_specs",
    "kernel_eval",
    "cross_gram",
    "build_bank",
    "combined_kernel",
]

KINDS = ("linear", "poly", "gauss")

DEFAULT_BANDWIDTHS = (2.0**-7, 2.0**-5, 2.0**-3, 2.0**-1, 1.0, 2.0, 2.0**3, 2.0**5, 2.0**7)


@dataclass(frozen=True)
class KernelSpec:
    """Description of a single base kernel.

    Parameters
    ----------
    kind : {'linear', 'poly', 'gauss'}
    degree : int
        Polynomial degree (``poly`` only).
    bias : float
        Polynomial bias (``poly`` only).
    bandwidth : float
        Gaussian width sigma (``gauss`` only).
    """

    kind: str
    degree: int = 2
    bias: float = 1.0
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "poly" and (int(self.degree) != self.degree or self.degree < 1):
            raise InputError("polynomial degree must be a positive integer")
        if self.kind == "gauss" and not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InputError("gaussian bandwidth must be positive")
        if not np.isfinite(self.bias):
            raise InputError("polynomial bias must be finite")

    def to_string(self) -> str:
        if self.kind == "linear":
            return "linear"
        if self.kind == "poly":
            return f"poly:{int(self.degree)}:{self.bias!r}"
        return f"gauss:{self.bandwidth!r}"

    @classmethod
    def from_string(cls, text: str) -> "KernelSpec":
        parts = text.strip().split(":")
        kind = parts[0].lower()
        try:
            if kind == "linear" and len(parts) == 1:
                return cls("linear")
            if kind == "poly" and len(parts) in (1, 2, 3):
                degree = int(parts[1]) if len(parts) > 1 else 2
                bias = float(parts[2]) if len(parts) > 2 else 1.0
                return cls("poly", degree=degree, bias=bias)
            if kind == "gauss" and len(parts) == 2:
                return cls("gauss", bandwidth=float(parts[1]))
        except ValueError as exc:
            raise InputError(f"bad kernel spec {text!r}: {exc}") from None
        raise InputError(f"bad kernel spec {text!r}")


def default_specs() -> list[KernelSpec]:
    """The 11-kernel bank: one linear, one degree-2 polynomial, nine Gaussians."""
    specs = [KernelSpec("linear"), KernelSpec("poly", degree=2, bias=1.0)]
    specs += [KernelSpec("gauss", bandwidth=s) for s in DEFAULT_BANDWIDTHS]
    return specs


def parse_specs(text: str) -> list[KernelSpec]:
    """Parse a comma separated kernel list such as ``"linear,poly:2:1,gauss:0.5"``.

    The word ``default`` expands to :func:`default_specs`.
    """
    specs: list[KernelSpec] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token.lower() == "default":
            specs.extend(default_specs())
        else:
            specs.append(KernelSpec.from_string(token))
    if not specs:
        raise InputError("empty kernel list")
    return specs


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise InputError(f"{name} must be a vector or a 2-d array")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains NaN or infinite values")
    return a


def _unit_rows(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    return np.divide(a, norms, out=np.zeros_like(a), where=norms > 0)


def cross_gram(spec: KernelSpec, X, Y) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(X[i], Y[j])``."""
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")

    if spec.kind == "linear":
        return _unit_rows(X) @ _unit_rows(Y).T

    if spec.kind == "poly":
        Xu, Yu = _unit_rows(X), _unit_rows(Y)
        deg = int(spec.degree)
        raw = (Xu @ Yu.T + spec.bias) ** deg
        dx = (np.einsum("ij,ij->i", Xu, Xu) + spec.bias) ** deg
        dy = (np.einsum("ij,ij->i", Yu, Yu) + spec.bias) ** deg
        scale = np.sqrt(np.outer(dx, dy))
        return np.divide(raw, scale, out=np.zeros_like(raw), where=scale > 0)

    sq = (
        np.einsum("ij,ij->i", X, X)[:, None]
        + np.einsum("ij,ij->i", Y, Y)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.bandwidth**2))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate ``k(x, y)`` for two feature vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise InputError("kernel_eval expects two 1-d vectors")
    if x.shape != y.shape:
        raise InputError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if spec.kind == "gauss":
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InputError("features contain NaN or infinite values")
        # direct difference is more accurate than the expanded form used for matrices
        d = x - y
        return float(np.exp(-np.dot(d, d) / (2.0 * spec.bandwidth**2)))
    return float(cross_gram(spec, x, y)[0, 0])


@dataclass(frozen=True, eq=False)
class KernelBank:
    """``M`` kernel specs with their dense Gram matrices over ``n`` samples."""

    specs: tuple[KernelSpec, ...]
    gram: np.ndarray  # (M, n, n)

    @property
    def n(self) -> int:
        return self.gram.shape[1]

    @property
    def m(self) -> int:
        return self.gram.shape[0]


def build_bank(specs: Sequence[KernelSpec], features) -> KernelBank:
    """Compute and cache every Gram matrix of ``specs`` over ``features``."""
    specs = tuple(specs)
    if not specs:
        raise InputError("at least one kernel spec is required")
    X = _as_matrix(features, "features")
    if X.shape[0] == 0:
        raise InputError("empty feature matrix")
    n = X.shape[0]
    gram = np.empty((len(specs), n, n))
    for m, spec in enumerate(specs):
        K = cross_gram(spec, X, X)
        K = 0.5 * (K + K.T)
        if spec.kind == "gauss":
            np.fill_diagonal(K, 1.0)
        gram[m] = K
    gram.flags.writeable = False
    return KernelBank(specs, gram)


def combined_kernel(bank: KernelBank, theta) -> np.ndarray:
    """Weighted sum ``sum_m theta[m] * K_m``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (bank.m,):
        raise InputError(f"theta must have length {bank.m}, got shape {theta.shape}")
    if np.any(theta < 0) or not np.all(np.isfinite(theta)):
        raise InputError("theta entries must be finite and nonnegative")
    return np.tensordot(theta, bank.gram, axes=1)
