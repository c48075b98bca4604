"""Epsilon-SVR with an RBF kernel, trained by sequential minimal optimization.

The dual is solved in the paired form with ``2n`` variables
``beta = [alpha, alpha*]``::

    min  0.5 beta' Q beta + p' beta
    s.t. z' beta = 0,  0 <= beta <= C

with ``z = [+1.., -1..]``, ``Q_ij = z_i z_j K_ij`` and
``p = [eps - y, eps + y]``.  Working pairs are picked with second-order
information (Fan, Chen & Lin, JMLR 2005).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

TAU = 1e-12


class SvrConvergenceError(RuntimeError):
    pass


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SvrModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    c: float
    epsilon: float
    dual_objective: float = float("nan")
    iterations: int = 0

    def decision(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(
                f"dimension mismatch: model has {self.support_vectors.shape[1]} features, "
                f"got {x.shape[1]}"
            )
        if len(self.dual_coef) == 0:
            return np.full(len(x), self.bias)
        return rbf_kernel(x, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def to_dict(self) -> dict:
        return {
            "kernel": "rbf",
            "gamma": self.gamma,
            "c": self.c,
            "epsilon": self.epsilon,
            "bias": self.bias,
            "dual_coef": self.dual_coef.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_objective": self.dual_objective,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SvrModel:
        sv = np.asarray(d["support_vectors"], dtype=float)
        return cls(
            support_vectors=sv.reshape(len(d["dual_coef"]), -1) if sv.size else sv.reshape(0, 0),
            dual_coef=np.asarray(d["dual_coef"], dtype=float),
            bias=float(d["bias"]),
            gamma=float(d["gamma"]),
            c=float(d["c"]),
            epsilon=float(d["epsilon"]),
            dual_objective=float(d.get("dual_objective", "nan")),
            iterations=int(d.get("iterations", 0)),
        )


def predict(model: SvrModel, x) -> np.ndarray | float:
    """Kernel expansion ``sum_i coef_i K(sv_i, x) + bias``; scalar for one sample."""
    x = np.asarray(x, dtype=float)
    out = model.decision(x)
    return float(out[0]) if x.ndim == 1 else out


def solve_dual(kernel: np.ndarray, y: np.ndarray, c: float, epsilon: float,
               tol: float = 1e-6, max_iter: int | None = None):
    """SMO on the paired dual; returns ``(beta, rho, objective, iterations)``."""
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    idx = np.concatenate([np.arange(n), np.arange(n)])
    q = z[:, None] * z[None, :] * kernel[np.ix_(idx, idx)]
    qd = np.diag(q).copy()
    p = np.concatenate([epsilon - y, epsilon + y])
    beta = np.zeros(2 * n)
    grad = p.copy()
    max_iter = max_iter or max(10_000_000, 100 * 2 * n)

    it = 0
    while True:
        at_upper = beta >= c
        at_lower = beta <= 0
        up = np.where(z > 0, ~at_upper, ~at_lower)
        low = np.where(z > 0, ~at_lower, ~at_upper)
        score = -z * grad
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        g_max = score[i]
        g_min = score[low].min()
        if g_max - g_min < tol:
            break
        if it >= max_iter:
            raise SvrConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT gap {g_max - g_min:.3g})"
            )
        # second-order choice of j among violating partners
        cand = low & (score < g_max)
        b = g_max - score[cand]
        a = qd[i] + qd[cand] - 2.0 * z[i] * z[cand] * q[i, cand]
        a = np.where(a > 0, a, TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / a)])

        old_i, old_j = beta[i], beta[j]
        if z[i] != z[j]:
            quad = max(qd[i] + qd[j] + 2.0 * q[i, j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j], beta[i] = 0.0, diff
            elif beta[i] < 0:
                beta[i], beta[j] = 0.0, -diff
            if diff > 0:
                if beta[i] > c:
                    beta[i], beta[j] = c, c - diff
            elif beta[j] > c:
                beta[j], beta[i] = c, c + diff
        else:
            quad = max(qd[i] + qd[j] - 2.0 * q[i, j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if total > c:
                if beta[i] > c:
                    beta[i], beta[j] = c, total - c
            elif beta[j] < 0:
                beta[j], beta[i] = 0.0, total
            if total > c:
                if beta[j] > c:
                    beta[j], beta[i] = c, total - c
            elif beta[i] < 0:
                beta[i], beta[j] = 0.0, total
        grad += q[:, i] * (beta[i] - old_i) + q[:, j] * (beta[j] - old_j)
        it += 1

    rho = _rho(beta, grad, z, c)
    objective = 0.5 * beta @ q @ beta + p @ beta
    return beta, rho, float(objective), it


def _rho(beta, grad, z, c) -> float:
    zg = z * grad
    free = (beta > 0) & (beta < c)
    if free.any():
        return float(zg[free].mean())
    at_upper = beta >= c
    ub_mask = np.where(z > 0, ~at_upper, at_upper)
    lb_mask = ~ub_mask
    ub = zg[ub_mask].min() if ub_mask.any() else np.inf
    lb = zg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


def train_svr(x, y, c: float = 10.0, epsilon: float = 0.01, gamma: float | None = None,
              seed: int = 0, tol: float = 1e-6) -> SvrModel:
    """Fit an RBF epsilon-SVR; ``gamma`` defaults to ``1 / n_features``.

    The solver itself is deterministic; ``seed`` is accepted so callers can
    thread one seed through every fitting routine.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(x) != len(y):
        raise ValueError("input and target counts differ")
    gamma = 1.0 / x.shape[1] if gamma is None else gamma
    kernel = rbf_kernel(x, x, gamma)
    beta, rho, obj, it = solve_dual(kernel, y, c, epsilon, tol=tol)
    n = len(y)
    coef = beta[:n] - beta[n:]
    keep = coef != 0
    return SvrModel(
        support_vectors=x[keep].copy(),
        dual_coef=coef[keep].copy(),
        bias=-rho,
        gamma=float(gamma),
        c=float(c),
        epsilon=float(epsilon),
        dual_objective=obj,
        iterations=it,
    )


GRID_C = (1.0, 10.0, 100.0)
GRID_EPSILON = (0.005, 0.01, 0.05)
GRID_GAMMA_SCALE = (0.5, 1.0, 2.0)


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    return [order[(i * n) // k:((i + 1) * n) // k] for i in range(k)]


def grid_search_svr(x, y, seed: int = 0, folds: int = 5):
    """Pick ``(c, epsilon, gamma)`` from the 3x3x3 grid by k-fold CV MSE.

    Returns ``(model refit on all rows, params dict, cv table)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    dim = x.shape[1]
    parts = kfold_indices(len(y), folds, seed)
    table = []
    best = None
    for c, eps, gs in product(GRID_C, GRID_EPSILON, GRID_GAMMA_SCALE):
        gamma = gs / dim
        errs = []
        for hold in parts:
            mask = np.ones(len(y), bool)
            mask[hold] = False
            m = train_svr(x[mask], y[mask], c, eps, gamma, seed)
            errs.append((m.decision(x[hold]) - y[hold]) ** 2)
        cv = float(np.mean(np.concatenate(errs)))
        table.append({"c": c, "epsilon": eps, "gamma": gamma, "cv_mse": cv})
        if best is None or cv < best["cv_mse"]:
            best = table[-1]
    model = train_svr(x, y, best["c"], best["epsilon"], best["gamma"], seed)
    return model, dict(best), table
