"""Weighted binary kernel SVM dual solved by sequential minimal optimization.

The problem solved is

    max_a  sum(a) - 1/2 (a*y)^T K (a*y)
    s.t.   0 <= a_n <= cost_n,   sum(a * y) = 0

using the second-order working set selection of Fan, Chen and Lin (2005).
Per-bit hash training reduces to exactly this problem: every sample is
paired with the bit of its assigned codeword, which becomes its label.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = ["SvmProblem", "SvmSolution", "solve", "decision_values", "primal_objective"]

TAU = 1e-12


@dataclass
class SvmProblem:
    gram: np.ndarray
    labels: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        self.gram = np.asarray(self.gram, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        n = self.labels.shape[0]
        cost = np.asarray(self.cost, dtype=float)
        self.cost = np.full(n, float(cost)) if cost.ndim == 0 else cost.ravel()
        if self.gram.shape != (n, n):
            raise InputError(f"gram must be {n}x{n}, got {self.gram.shape}")
        if self.cost.shape != (n,):
            raise InputError("cost must be a scalar or have one entry per sample")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise InputError("labels must be -1 or +1")
        if np.any(self.cost < 0) or not np.all(np.isfinite(self.cost)):
            raise InputError("cost entries must be finite and nonnegative")
        if not np.all(np.isfinite(self.gram)):
            raise InputError("gram matrix contains non-finite entries")


@dataclass
class SvmSolution:
    alpha: np.ndarray
    beta: float
    dual_objective: float
    status: str = "optimal"
    iterations: int = 0
    support_indices: np.ndarray = field(init=False)

    def __post_init__(self):
        self.support_indices = np.flatnonzero(self.alpha > 0)


def _dual_objective(alpha, y, K) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _degenerate(n, y, keep) -> SvmSolution:
    if keep.any():
        sign = 1.0 if y[keep].sum() >= 0 else -1.0
    else:
        sign = 1.0
    return SvmSolution(np.zeros(n), sign, 0.0, status="degenerate")


def _offset(alpha, y, G, cost, eps) -> float:
    # -y_n G_n is the offset that would put sample n exactly on the margin
    yg = -y * G
    free = (alpha > eps) & (alpha < cost - eps)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= cost - eps
    # KKT: samples at a bound constrain the offset from one side
    lower_mask = ((y > 0) & ~at_upper) | ((y < 0) & at_upper)
    upper_mask = ((y > 0) & at_upper) | ((y < 0) & ~at_upper)
    lb = yg[lower_mask].max() if lower_mask.any() else None
    ub = yg[upper_mask].min() if upper_mask.any() else None
    if lb is None and ub is None:
        return 0.0
    if lb is None:
        return float(ub)
    if ub is None:
        return float(lb)
    return float(0.5 * (lb + ub))


def solve(problem: SvmProblem, tol: float = 1e-3, max_passes: int = 1000) -> SvmSolution:
    """Solve the SVM dual with SMO.

    Parameters
    ----------
    problem : SvmProblem
    tol : float
        Stop once the maximal KKT violation ``m(a) - M(a)`` drops below ``tol``.
    max_passes : int
        Iteration budget in units of the sample count.

    Returns
    -------
    SvmSolution
        ``status`` is ``"optimal"``, ``"max_iter"`` or ``"degenerate"`` (one
        label class only; alpha is zero and beta reproduces that class).
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    y_all = problem.labels
    n_all = y_all.shape[0]
    keep = problem.cost > 0
    if not (np.any(y_all[keep] > 0) and np.any(y_all[keep] < 0)):
        return _degenerate(n_all, y_all, keep)

    idx = np.flatnonzero(keep)
    y = y_all[idx]
    C = problem.cost[idx]
    K = problem.gram[np.ix_(idx, idx)]
    n = idx.size
    Q = K * np.outer(y, y)
    QD = np.diag(Q).copy()

    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a^T Q a - sum(a)
    pos = y > 0
    eps = 1e-12 * max(1.0, C.max())
    max_iter = max(1, int(max_passes)) * max(n, 10)
    status = "max_iter"
    it = 0
    for it in range(max_iter):
        below = alpha < C
        above = alpha > 0
        up = np.where(pos, below, above)
        low = np.where(pos, above, below)
        yg = -y * G
        if not up.any() or not low.any():
            status = "optimal"
            break
        cand = np.where(up, yg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmin = np.min(np.where(low, yg, np.inf))
        if gmax - gmin < tol:
            status = "optimal"
            break

        # second order choice of j among violating members of I_low
        b = gmax - yg
        viol = low & (b > 0)
        a = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, TAU)
        score = np.where(viol, -(b * b) / a, np.inf)
        j = int(np.argmin(score))

        Ci, Cj = C[i], C[j]
        ai_old, aj_old = alpha[i], alpha[j]
        ai, aj = ai_old, aj_old
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai, aj = Ci, Ci - diff
            else:
                if aj > Cj:
                    aj, ai = Cj, Cj + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > Ci:
                if ai > Ci:
                    ai, aj = Ci, total - Ci
            else:
                if aj < 0:
                    aj, ai = 0.0, total
            if total > Cj:
                if aj > Cj:
                    aj, ai = Cj, total - Cj
            else:
                if ai < 0:
                    ai, aj = 0.0, total

        alpha[i], alpha[j] = ai, aj
        G += Q[i] * (ai - ai_old) + Q[j] * (aj - aj_old)
    else:
        it = max_iter

    beta = _offset(alpha, y, G, C, eps)
    full = np.zeros(n_all)
    full[idx] = alpha
    return SvmSolution(
        alpha=full,
        beta=beta,
        dual_objective=_dual_objective(alpha, y, K),
        status=status,
        iterations=it,
    )


def decision_values(solution: SvmSolution, labels, kernel_rows) -> np.ndarray:
    """``f(q) = sum_n alpha_n y_n k(x_n, q) + beta`` for each query column.

    ``kernel_rows`` has one row per training sample and one column per query.
    """
    y = np.asarray(labels, dtype=float).ravel()
    Kq = np.asarray(kernel_rows, dtype=float)
    if Kq.ndim == 1:
        Kq = Kq[:, None]
    if Kq.shape[0] != y.shape[0] or y.shape[0] != solution.alpha.shape[0]:
        raise InputError(
            f"kernel_rows must have {solution.alpha.shape[0]} rows, got {Kq.shape[0]}"
        )
    return Kq.T @ (solution.alpha * y) + solution.beta


def primal_objective(solution: SvmSolution, problem: SvmProblem) -> float:
    """``1/2 ||w||^2 + sum_n cost_n [1 - y_n f(x_n)]_+`` at the recovered primal point."""
    ay = solution.alpha * problem.labels
    f = problem.gram @ ay + solution.beta
    hinge = np.maximum(0.0, 1.0 - problem.labels * f)
    return float(0.5 * ay @ problem.gram @ ay + problem.cost @ hinge)
