"""Slow, independent reference solvers used to check the fast code paths."""
import itertools

import numpy as np


def project_box_hyperplane(v, y, upper):
    """Euclidean projection of ``v`` onto ``{0 <= a <= upper, y @ a = 0}``.

    ``g(nu) = sum_i y_i clip(v_i - nu y_i, 0, upper_i)`` is piecewise linear and
    non-increasing in ``nu``; its root is located exactly between breakpoints.
    """
    def g(nu):
        return np.sum(y * np.clip(v[None, :] - np.atleast_1d(nu)[:, None] * y[None, :], 0, upper[None, :]), axis=1)

    bps = np.unique(np.concatenate([v * y, (v - upper) * y]))
    vals = g(bps)
    if np.any(vals == 0):
        nu = bps[np.flatnonzero(vals == 0)[0]]
    else:
        k = np.flatnonzero(vals < 0)[0]  # first breakpoint where g turned negative
        lo, hi = bps[k - 1], bps[k]
        glo, ghi = vals[k - 1], vals[k]
        nu = lo + (hi - lo) * glo / (glo - ghi)
    return np.clip(v - nu * y, 0, upper)


def svm_dual_oracle(K, y, cost, tol=1e-10, max_iter=200_000):
    """Accelerated projected gradient ascent on the SVM dual with adaptive restart.

    Stops once the gradient mapping ``L * ||P(a + grad/L) - a||`` drops below ``tol``.
    """
    y = np.asarray(y, float)
    upper = np.broadcast_to(np.asarray(cost, float), y.shape).copy()
    Q = K * np.outer(y, y)
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    obj = lambda a: a.sum() - 0.5 * a @ Q @ a  # noqa: E731
    step = lambda a: project_box_hyperplane(a + (1.0 - Q @ a) / L, y, upper)  # noqa: E731
    a = np.zeros_like(y)
    z = a.copy()
    t = 1.0
    for _ in range(max_iter):
        a_new = step(z)
        if obj(a_new) < obj(a):  # momentum overshot: restart from a plain step
            t = 1.0
            a_new = step(a)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = a_new + (t - 1) / t_new * (a_new - a)
        a, t = a_new, t_new
        if L * np.linalg.norm(step(a) - a) < tol:
            break
    return a, obj(a)


def svm_offset(alpha, y, K, cost, eps=1e-7):
    """Offset from the margin conditions of a (near) optimal dual point."""
    f0 = K @ (alpha * y)
    free = (alpha > eps) & (alpha < cost - eps)
    if free.any():
        return float(np.mean(y[free] - f0[free]))
    cand = y - f0
    at_c = alpha >= cost - eps
    lower = ((y > 0) & ~at_c) | ((y < 0) & at_c)
    upper = ((y > 0) & at_c) | ((y < 0) & ~at_c)
    return float(0.5 * (cand[lower].max() + cand[upper].min()))


def prox_oracle(v_i, v_j, eta):
    """Minimize eta*||a - b|| + 1/2||v_i - a||^2 + 1/2||v_j - b||^2 with an interior-point solver."""
    import cvxpy as cp

    a = cp.Variable(len(v_i))
    b = cp.Variable(len(v_j))
    objective = eta * cp.norm(a - b, 2) + 0.5 * cp.sum_squares(v_i - a) + 0.5 * cp.sum_squares(v_j - b)
    problem = cp.Problem(cp.Minimize(objective))
    problem.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return a.value, b.value


def prox_objective(m_i, m_j, v_i, v_j, eta):
    return eta * np.linalg.norm(m_i - m_j) + 0.5 * np.sum((v_i - m_i) ** 2) + 0.5 * np.sum((v_j - m_j) ** 2)


def single_codeword_bruteforce(F, cls, n_classes):
    """Enumerate every +-1 codebook of shape (C, B); return (best value, all minimizers)."""
    F = np.asarray(F, float)
    B = F.shape[1]
    best, argbest = np.inf, []
    for bits in itertools.product((-1.0, 1.0), repeat=n_classes * B):
        mu = np.array(bits).reshape(n_classes, B)
        val = np.maximum(0.0, 1.0 - mu[cls] * F).sum()
        if val < best - 1e-12:
            best, argbest = val, [mu]
        elif abs(val - best) <= 1e-12:
            argbest.append(mu)
    return best, argbest


def theta_objective(norms_sq, theta):
    return np.sum(norms_sq / theta, axis=-1)


def random_feasible_thetas(m, p, count, rng):
    """Random points of ``{theta > 0, ||theta||_p <= 1}``, mostly on the boundary."""
    raw = rng.random((count, m)) ** rng.uniform(0.2, 5.0, size=(count, 1)) + 1e-12
    raw /= np.linalg.norm(raw, ord=p, axis=1, keepdims=True)
    shrink = np.where(rng.random((count, 1)) < 0.1, rng.random((count, 1)), 1.0)
    return raw * shrink
