"""Batch trainers for :class:`CascadeNet` on a mean-squared-error objective.

``lm``   Levenberg-Marquardt (damped Gauss-Newton, adaptive mu)
``cgb``  Polak-Ribiere conjugate gradient with Powell-Beale restarts
``scg``  Moller's scaled conjugate gradient (no line search)
``oss``  one-step secant
``gdx``  gradient descent with momentum and adaptive learning rate
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from rxfault.neuralnet.net import CascadeNet, _as_batch, _backward, _run, jacobian

logger = logging.getLogger(__name__)

ALGORITHMS = ("lm", "cgb", "scg", "oss", "gdx")

# dense JJ^T / J^T J solves stay cheap below this many weights
LM_MAX_WEIGHTS = 10_000


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "lm"
    max_epochs: int = 1000
    learning_rate: float = 0.9
    goal_mse: float = 0.0
    seed: int = 0
    lm_mu0: float = 1e-3
    lm_mu_inc: float = 10.0
    lm_mu_dec: float = 0.1
    lm_mu_max: float = 1e10
    min_grad: float = 1e-12

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown training algorithm {self.algorithm!r}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainLog:
    mse: list[float] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def epochs(self) -> int:
        return len(self.mse) - 1

    @property
    def final_mse(self) -> float:
        return self.mse[-1]


class _Objective:
    """MSE and its gradient as functions of a flat parameter vector."""

    def __init__(self, net: CascadeNet, x, y):
        self.net = net
        self.x, _ = _as_batch(net, x)
        self.y = np.asarray(y, dtype=float).reshape(-1)
        if len(self.y) != len(self.x):
            raise ValueError("input and target counts differ")
        self.n = len(self.y)

    def value(self, w) -> float:
        out = _run(self.net, self.x, w)[0][-1][:, 0]
        r = out - self.y
        return _finite(float(np.mean(r * r)))

    def value_grad(self, w) -> tuple[float, np.ndarray]:
        saved = self.net.params
        self.net.params = w
        try:
            outs, stacks = _run(self.net, self.x)
            r = outs[-1][:, 0] - self.y
            grads = _backward(self.net, outs, stacks, r[:, None], per_sample=False)
        finally:
            self.net.params = saved
        g = np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])
        return _finite(float(np.mean(r * r))), (2.0 / self.n) * g


def _finite(v: float) -> float:
    if not math.isfinite(v):
        raise TrainingError(f"non-finite loss encountered ({v})")
    return v


def lm_step(jac: np.ndarray, r: np.ndarray, mu: float) -> np.ndarray:
    """Solve ``(J^T J + mu I) dw = -J^T r``.

    With fewer samples than weights the identical step is obtained from the
    small system ``J^T (J J^T + mu I)^-1 r``.
    """
    n, p = jac.shape
    if n < p:
        a = jac @ jac.T
        a[np.diag_indices(n)] += mu
        return -jac.T @ np.linalg.solve(a, r)
    a = jac.T @ jac
    a[np.diag_indices(p)] += mu
    return -np.linalg.solve(a, jac.T @ r)


def _check_lm_size(net: CascadeNet) -> None:
    p = net.topology.n_params
    if p > LM_MAX_WEIGHTS:
        raise MemoryError(
            f"Levenberg-Marquardt is limited to {LM_MAX_WEIGHTS} weights; this net has {p}. "
            "Use a smaller feature layout (e.g. block8) or a conjugate-gradient trainer."
        )


def _train_lm(net, obj, cfg, log):
    _check_lm_size(net)
    w = net.params.copy()
    mu = cfg.lm_mu0
    f = obj.value(w)
    log.mse.append(f)
    for epoch in range(cfg.max_epochs):
        if f <= cfg.goal_mse:
            log.stop_reason = "goal"
            break
        net.params = w
        jac = jacobian(net, obj.x)
        r = _run(net, obj.x)[0][-1][:, 0] - obj.y
        if np.linalg.norm(jac.T @ r) * 2 / obj.n < cfg.min_grad:
            log.stop_reason = "min_grad"
            break
        accepted = False
        while mu <= cfg.lm_mu_max:
            try:
                dw = lm_step(jac, r, mu)
            except np.linalg.LinAlgError:
                mu *= cfg.lm_mu_inc
                continue
            f_new = obj.value(w + dw)
            if f_new < f:
                w, f = w + dw, f_new
                mu = max(mu * cfg.lm_mu_dec, 1e-20)
                accepted = True
                break
            mu *= cfg.lm_mu_inc
        if not accepted:
            log.stop_reason = "mu_max"
            break
        log.mse.append(f)
    else:
        log.stop_reason = "max_epochs"
    if not log.stop_reason:
        log.stop_reason = "max_epochs"
    net.params = w


def wolfe_search(obj, w, d, f0, g0, alpha0, c1=1e-4, c2=0.1, max_iter=25):
    """Strong-Wolfe line search along ``d``; returns ``(alpha, f, g)``.

    Returns ``alpha = 0`` with the starting point when no decrease is found.
    """
    dphi0 = float(g0 @ d)
    if dphi0 >= 0:
        return 0.0, f0, g0

    def phi(a):
        f, g = obj.value_grad(w + a * d)
        return f, g, float(g @ d)

    def zoom(lo, hi):
        a_lo, f_lo, g_lo, dp_lo = lo
        a_hi, f_hi, _, dp_hi = hi
        for _ in range(max_iter):
            a = _cubic_min(a_lo, f_lo, dp_lo, a_hi, f_hi, dp_hi)
            f, g, dp = phi(a)
            if f > f0 + c1 * a * dphi0 or f >= f_lo:
                a_hi, f_hi, dp_hi = a, f, dp
            else:
                if abs(dp) <= -c2 * dphi0:
                    return a, f, g
                if dp * (a_hi - a_lo) >= 0:
                    a_hi, f_hi, dp_hi = a_lo, f_lo, dp_lo
                a_lo, f_lo, g_lo, dp_lo = a, f, g, dp
        return a_lo, f_lo, g_lo

    prev = (0.0, f0, g0, dphi0)
    a = alpha0
    best = (0.0, f0, g0)
    for i in range(max_iter):
        f, g, dp = phi(a)
        if f < best[1]:
            best = (a, f, g)
        if f > f0 + c1 * a * dphi0 or (i > 0 and f >= prev[1]):
            res = zoom(prev, (a, f, g, dp))
            break
        if abs(dp) <= -c2 * dphi0:
            res = (a, f, g)
            break
        if dp >= 0:
            res = zoom((a, f, g, dp), prev)
            break
        prev = (a, f, g, dp)
        a *= 2.0
    else:
        res = best
    return res if res[1] <= best[1] else best


def _cubic_min(a0, f0, d0, a1, f1, d1):
    """Minimizer of the cubic interpolant, safeguarded to the inner 80% of the bracket."""
    lo, hi = min(a0, a1), max(a0, a1)
    margin = 0.1 * (hi - lo)
    try:
        d_1 = d0 + d1 - 3 * (f0 - f1) / (a0 - a1)
        rad = d_1 * d_1 - d0 * d1
        if rad >= 0:
            d_2 = math.copysign(math.sqrt(rad), a1 - a0)
            a = a1 - (a1 - a0) * (d1 + d_2 - d_1) / (d1 - d0 + 2 * d_2)
            if math.isfinite(a) and lo + margin <= a <= hi - margin:
                return a
    except ZeroDivisionError:
        pass
    return 0.5 * (lo + hi)


def _train_cg(net, obj, cfg, log, secant: bool):
    w = net.params.copy()
    f, g = obj.value_grad(w)
    log.mse.append(f)
    p = len(w)
    g_prev = s_prev = d = None
    alpha, slope_prev = 1.0 / max(np.linalg.norm(g), 1e-12), None
    since_restart = 0
    for epoch in range(cfg.max_epochs):
        if f <= cfg.goal_mse:
            log.stop_reason = "goal"
            break
        if np.linalg.norm(g) < cfg.min_grad:
            log.stop_reason = "min_grad"
            break
        d_new = -g
        if g_prev is not None and d is not None:
            y = g - g_prev
            if secant:
                sy = float(s_prev @ y)
                if sy > 1e-300:
                    b_c = float(s_prev @ g) / sy
                    a_c = -(1.0 + float(y @ y) / sy) * b_c + float(y @ g) / sy
                    d_new = -g + a_c * s_prev + b_c * y
            elif abs(float(g @ g_prev)) < 0.2 * float(g @ g) and since_restart < p:
                # Powell-Beale: keep conjugacy while successive gradients stay near-orthogonal
                beta = max(0.0, float(g @ y) / float(g_prev @ g_prev))
                d_new = -g + beta * d
        if float(g @ d_new) >= 0:
            d_new = -g
        if d_new is not None and np.array_equal(d_new, -g):
            since_restart = 0
        d = d_new
        slope = float(g @ d)
        alpha0 = alpha if slope_prev is None else alpha * slope_prev / slope
        alpha0 = min(max(alpha0, 1e-12), 1e6)
        alpha_new, f_new, g_new = wolfe_search(obj, w, d, f, g, alpha0)
        if alpha_new == 0.0:
            if since_restart == 0:
                log.stop_reason = "line_search"
                break
            # lost descent along a conjugate direction: restart from steepest descent
            g_prev, d, slope_prev = None, None, None
            alpha = 1.0 / max(np.linalg.norm(g), 1e-12)
            log.mse.append(f)
            continue
        alpha, slope_prev = alpha_new, slope
        s_prev = alpha * d
        w = w + s_prev
        g_prev, g, f = g, g_new, f_new
        since_restart += 1
        log.mse.append(f)
    else:
        log.stop_reason = "max_epochs"
    if not log.stop_reason:
        log.stop_reason = "max_epochs"
    net.params = w


def _train_scg(net, obj, cfg, log):
    """Moller (1993) scaled conjugate gradient."""
    w = net.params.copy()
    sigma0 = 5e-5
    lam, lam_bar = 5e-7, 0.0
    f, g = obj.value_grad(w)
    log.mse.append(f)
    r = -g
    p = r.copy()
    success = True
    n_w = len(w)
    k = 0
    delta = 0.0
    for epoch in range(cfg.max_epochs):
        if f <= cfg.goal_mse:
            log.stop_reason = "goal"
            break
        p2 = float(p @ p)
        if math.sqrt(p2) < cfg.min_grad or np.linalg.norm(r) < cfg.min_grad:
            log.stop_reason = "min_grad"
            break
        if success:
            sigma = sigma0 / math.sqrt(p2)
            _, g_s = obj.value_grad(w + sigma * p)
            s = (g_s - g) / sigma
            delta = float(p @ s)
        delta_k = delta + (lam - lam_bar) * p2
        if delta_k <= 0:
            lam_bar = 2 * (lam - delta_k / p2)
            delta_k = -delta_k + lam * p2
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta_k
        w_new = w + alpha * p
        f_new, g_new = obj.value_grad(w_new)
        big_delta = 2 * delta_k * (f - f_new) / (mu * mu)
        if big_delta >= 0:
            w, f, g_old, g = w_new, f_new, g, g_new
            r_new = -g
            lam_bar = 0.0
            success = True
            k += 1
            if k % n_w == 0:
                p = r_new
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            r = r_new
            if big_delta >= 0.75:
                lam *= 0.25
        else:
            lam_bar = lam
            success = False
        if big_delta < 0.25:
            lam += delta_k * (1 - big_delta) / p2
        lam = min(max(lam, 1e-15), 1e100)
        log.mse.append(f)
    else:
        log.stop_reason = "max_epochs"
    if not log.stop_reason:
        log.stop_reason = "max_epochs"
    net.params = w


def _train_gdx(net, obj, cfg, log):
    w = net.params.copy()
    lr = cfg.learning_rate
    mc, lr_inc, lr_dec, max_perf_inc = 0.9, 1.05, 0.7, 1.04
    f, g = obj.value_grad(w)
    log.mse.append(f)
    dw = -lr * g
    for epoch in range(cfg.max_epochs):
        if f <= cfg.goal_mse:
            log.stop_reason = "goal"
            break
        if np.linalg.norm(g) < cfg.min_grad:
            log.stop_reason = "min_grad"
            break
        dw = mc * dw - (1 - mc) * lr * g
        f_new, g_new = obj.value_grad(w + dw)
        if f_new > f * max_perf_inc:
            lr *= lr_dec
            dw = np.zeros_like(w)
        else:
            if f_new < f:
                lr *= lr_inc
            w, f, g = w + dw, f_new, g_new
        log.mse.append(f)
    else:
        log.stop_reason = "max_epochs"
    if not log.stop_reason:
        log.stop_reason = "max_epochs"
    net.params = w


def train(net: CascadeNet, x, y, cfg: TrainConfig) -> tuple[CascadeNet, TrainLog]:
    """Train a copy of ``net`` on normalized targets ``y``; returns ``(net, log)``."""
    if net.topology.output_dim != 1:
        raise ValueError("trainers support a single output")
    net = net.copy()
    obj = _Objective(net, x, y)
    log = TrainLog()
    if cfg.algorithm == "lm":
        _train_lm(net, obj, cfg, log)
    elif cfg.algorithm == "cgb":
        _train_cg(net, obj, cfg, log, secant=False)
    elif cfg.algorithm == "oss":
        _train_cg(net, obj, cfg, log, secant=True)
    elif cfg.algorithm == "scg":
        _train_scg(net, obj, cfg, log)
    else:
        _train_gdx(net, obj, cfg, log)
    logger.debug(
        "%s stopped after %d epochs (%s), mse=%.3g",
        cfg.algorithm, log.epochs, log.stop_reason, log.final_mse,
    )
    return net, log
