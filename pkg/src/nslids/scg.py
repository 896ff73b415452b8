"""Scaled conjugate gradient (Møller, 1993) for full-batch training.

SCG replaces the line search of classic conjugate gradient by a
Levenberg-Marquardt style trust parameter ``lam``: the curvature along the
search direction is estimated from a finite difference of gradients, and
``lam`` is raised whenever the local quadratic model predicts the actual
loss change poorly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import TrainingError

logger = logging.getLogger(__name__)

SIGMA = 5e-5
LAMBDA_INIT = 5e-7


@dataclass
class TrainConfig:
    max_iterations: int = 100
    seed: int = 0
    objective: str = "mse"
    tol: float = 1e-7  # relative loss decrease counted as "no progress"
    patience: int = 10  # consecutive no-progress successful steps before stopping
    grad_tol: float = 1e-12
    sigma: float = SIGMA
    lambda_init: float = LAMBDA_INIT

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class ScgState:
    theta: np.ndarray
    p: np.ndarray  # search direction
    r: np.ndarray  # negative gradient at theta
    loss: float
    sigma: float = SIGMA
    lam: float = LAMBDA_INIT
    lam_bar: float = 0.0
    delta: float = 0.0
    success: bool = True
    iteration: int = 0
    since_restart: int = 0


@dataclass
class ScgResult:
    theta: np.ndarray
    trace: list[float]  # trace[0] is the starting loss, then one entry per iteration
    iterations: int
    successes: int
    stop_reason: str
    success_flags: list[bool] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.trace[-1]


def _finite(value, what: str, iteration: int):
    if not np.all(np.isfinite(value)):
        raise TrainingError(f"non-finite {what}", iteration)
    return value


def scg_minimize(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    theta0: np.ndarray,
    cfg: TrainConfig,
    callback: Callable[[ScgState], None] | None = None,
) -> ScgResult:
    """Minimise ``fun`` starting at ``theta0``.

    Every pass through the main loop counts as one iteration, whether or not
    its step is accepted. Only accepted steps move the parameters, and they are
    accepted only when the loss does not increase, so the returned parameters
    are the best seen.

    Stops on ``cfg.max_iterations``, on a vanishing gradient, or once
    ``cfg.patience`` consecutive accepted steps each reduce the loss by less
    than ``cfg.tol`` relative.
    """
    theta = np.array(theta0, dtype=np.float64, copy=True)
    loss = float(_finite(fun(theta), "loss", 0))
    r = -_finite(grad(theta), "gradient", 0)
    st = ScgState(theta=theta, p=r.copy(), r=r, loss=loss,
                  sigma=cfg.sigma, lam=cfg.lambda_init)
    n = theta.size
    trace = [loss]
    flags: list[bool] = []
    successes = 0
    stall = 0

    if np.linalg.norm(st.r) <= cfg.grad_tol:
        return ScgResult(st.theta, trace, 0, 0, "gradient", flags)

    stop = "max_iterations"
    while st.iteration < cfg.max_iterations:
        st.iteration += 1
        k = st.iteration
        p2 = float(st.p @ st.p)

        if st.success:
            sigma_k = st.sigma / np.sqrt(p2)
            g_probe = _finite(grad(st.theta + sigma_k * st.p), "gradient", k)
            s = (g_probe + st.r) / sigma_k
            st.delta = float(st.p @ s)

        # scale, then force positive definiteness of the local model
        st.delta += (st.lam - st.lam_bar) * p2
        if st.delta <= 0:
            st.lam_bar = 2.0 * (st.lam - st.delta / p2)
            st.delta = -st.delta + st.lam * p2
            st.lam = st.lam_bar

        mu = float(st.p @ st.r)
        alpha = mu / st.delta
        trial = st.theta + alpha * st.p
        trial_loss = float(_finite(fun(trial), "loss", k))
        comparison = 2.0 * st.delta * (st.loss - trial_loss) / mu**2

        if comparison >= 0:
            rel = (st.loss - trial_loss) / max(abs(st.loss), np.finfo(float).tiny)
            stall = stall + 1 if rel < cfg.tol else 0
            st.theta = trial
            st.loss = trial_loss
            r_new = -_finite(grad(trial), "gradient", k)
            st.lam_bar = 0.0
            st.success = True
            successes += 1
            st.since_restart += 1
            if st.since_restart >= n:
                p_new = r_new.copy()
                st.since_restart = 0
            else:
                beta = (float(r_new @ r_new) - float(r_new @ st.r)) / mu
                p_new = r_new + beta * st.p
                if p_new @ r_new <= 0:
                    # lost descent: restart along steepest descent
                    p_new = r_new.copy()
                    st.since_restart = 0
            st.p = p_new
            st.r = r_new
            if comparison >= 0.75:
                st.lam *= 0.25
        else:
            st.lam_bar = st.lam
            st.success = False

        if comparison < 0.25:
            st.lam += st.delta * (1.0 - comparison) / p2

        trace.append(st.loss)
        flags.append(st.success)
        if callback is not None:
            callback(st)
        if np.linalg.norm(st.r) <= cfg.grad_tol:
            stop = "gradient"
            break
        if stall >= cfg.patience:
            stop = "saturated"
            break

    logger.debug("scg stopped after %d iterations (%s), loss %.6g", st.iteration, stop, st.loss)
    return ScgResult(st.theta, trace, st.iteration, successes, stop, flags)
