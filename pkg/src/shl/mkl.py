"""Closed-form lp-norm multiple kernel learning weight update."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import KernelBank

__all__ = ["MklWeights", "uniform_theta", "rkhs_norms", "update_theta"]


@dataclass
class MklWeights:
    theta: np.ndarray
    p: float
    status: str = "ok"


def _check_p(p: float) -> float:
    p = float(p)
    if not p > 1:
        raise InputError(f"MKL norm p must be > 1, got {p}")
    return p


def uniform_theta(m: int, p: float) -> np.ndarray:
    """The symmetric point ``M**(-1/p)`` on the unit lp sphere."""
    p = _check_p(p)
    return np.full(m, float(m) ** (-1.0 / p))


def rkhs_norms(alpha, labels, theta, bank: KernelBank) -> np.ndarray:
    """Squared RKHS norm of every per-kernel component of a trained bit.

    With ``v = alpha * labels`` the m-th component is ``theta_m * sum_n v_n phi_m(x_n)``
    so its squared norm is ``theta_m**2 * v^T K_m v``.
    """
    if isinstance(theta, MklWeights):
        theta = theta.theta
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(alpha, dtype=float) * np.asarray(labels, dtype=float)
    if theta.shape != (bank.m,) or v.shape != (bank.n,):
        raise InputError(
            f"shape mismatch: theta {theta.shape}, alpha*labels {v.shape}, "
            f"bank has M={bank.m}, n={bank.n}"
        )
    sv = np.flatnonzero(v)
    if sv.size == 0:
        return np.zeros(bank.m)
    vs = v[sv]
    sub = bank.gram[:, sv][:, :, sv]
    quad = np.einsum("i,mij,j->m", vs, sub, vs)
    # Gram matrices are PSD; clip rounding noise
    return theta**2 * np.maximum(quad, 0.0)


def update_theta(norms_squared, p: float) -> MklWeights:
    """Minimize ``sum_m ||w_m||^2 / theta_m`` over ``theta >= 0, ||theta||_p <= 1``.

    The minimizer is ``theta_m = ||w_m||**(2/(p+1)) / (sum_m' ||w_m'||**(2p/(p+1)))**(1/p)``.
    If every norm is zero the ratio is undefined; the uniform point is returned
    with ``status="all-zero"``.
    """
    p = _check_p(p)
    a = np.asarray(norms_squared, dtype=float).ravel()
    if a.size == 0:
        raise InputError("norms_squared must be non-empty")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InputError("norms_squared must be finite and nonnegative")
    if not np.any(a > 0):
        return MklWeights(uniform_theta(a.size, p), p, status="all-zero")
    # rescaling leaves the argmin unchanged and keeps powers in range
    a = a / a.max()
    num = a ** (1.0 / (p + 1.0))
    den = np.sum(a ** (p / (p + 1.0))) ** (1.0 / p)
    return MklWeights(num / den, p)
