"""Conditional expectations, martingale defects and the adaptive drift-shift loop.

The tested process is the discounted price ``Y_i = exp(-r t_i) X_i``
(``r = 0`` reproduces the undiscounted test). Its defect at grid index ``i``
is the cross-sectional mean of ``|E[Y_{i+1} | F_i] - Y_i|`` divided by
``x0``. Only adjacent pairs are measured: by the tower property they vanish
exactly when every pair ``m > n`` does.

:func:`adaptive_optimize` deforms the drift to ``mu - sqrt(alpha) * theta``
and repeats

    simulate -> measure defect -> theta += damping * excess_drift / sqrt(alpha)

until the largest defect falls below ``epsilon``. The Brownian paths are
drawn once and reused for every iterate (common random numbers), so the run
is deterministic and the fixed point sits at ``theta* = (mu - r) / sqrt(alpha)``
up to Monte-Carlo error.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from . import rng
from .errors import DegenerateDiffusionError, DomainError, UsageError
from .stochastic import MarketParams, PathEnsemble, TimeGrid, sample_brownian, simulate_gbm_exact
from .strategy import TradingStrategy

logger = logging.getLogger(__name__)

_NESTED_CHUNK = 4096


@dataclass(frozen=True)
class CondExpEstimator:
    """How ``E[Y_m | F_n]`` is estimated.

    ``regression`` fits a polynomial of ``basis_degree`` in the price at ``n``
    across paths (plus linear terms in the holdings when
    ``condition_on_strategy`` is set). ``nested_mc`` resimulates ``n_inner``
    sub-paths per path from the state at ``n``.
    """

    method: Literal["regression", "nested_mc"] = "regression"
    basis_degree: int = 3
    n_inner: int = 256
    condition_on_strategy: bool = False

    def __post_init__(self):
        if self.method not in ("regression", "nested_mc"):
            raise DomainError(f"unknown estimator method {self.method!r}")
        if not 0 <= self.basis_degree <= 10:
            raise DomainError(f"basis_degree must be in [0, 10], got {self.basis_degree}")
        if self.n_inner < 16:
            raise DomainError(f"n_inner must be >= 16, got {self.n_inner}")


@dataclass
class MartingaleReport:
    defect_by_index: list[float]
    max_defect: float
    epsilon: float
    converged: bool
    theta_history: list[float] = field(default_factory=list)
    iterations: int = 0
    # max_defect of every iterate, aligned with theta_history
    defect_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "converged": self.converged,
            "iterations": self.iterations,
            "max_defect": self.max_defect,
            "defect_by_index": list(self.defect_by_index),
            "theta_history": list(self.theta_history),
            "defect_history": list(self.defect_history),
        }


def _discounted(ensemble: PathEnsemble, rate: float) -> np.ndarray:
    if rate == 0.0:
        return ensemble.values
    return ensemble.values * np.exp(-rate * ensemble.grid.times)[None, :]


def _regress(y: np.ndarray, state: np.ndarray, extra: list[np.ndarray], degree: int) -> np.ndarray:
    spread = np.std(state)
    if spread == 0.0:
        # constant conditioning state carries no information
        degree = 0
        z = np.zeros_like(state)
    else:
        z = (state - np.mean(state)) / spread
    extra = [e for e in extra if np.ptp(e) > 0]
    while True:
        cols = [z**k for k in range(degree + 1)] + extra
        design = np.column_stack(cols)
        coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank == design.shape[1] or (degree == 0 and not extra):
            return design @ coef
        if degree == 0:
            extra = []
        else:
            degree -= 1
        warnings.warn(
            f"rank-deficient regression basis; falling back to degree {degree}",
            RuntimeWarning,
            stacklevel=3,
        )


def _nested(ensemble: PathEnsemble, n_idx: int, m_idx: int, n_inner: int, rate: float) -> np.ndarray:
    params = ensemble.params
    if params is None:
        raise UsageError("nested_mc needs an ensemble simulated from MarketParams")
    t = ensemble.grid.times
    dt = t[m_idx] - t[n_idx]
    x_n = ensemble.values[:, n_idx]
    offset = (n_idx * len(t) + m_idx) * n_inner
    drift = params.velocity * dt
    vol = math.sqrt(params.alpha * dt)
    out = np.empty_like(x_n)
    for start in range(0, x_n.size, _NESTED_CHUNK):
        paths = np.arange(start, min(start + _NESTED_CHUNK, x_n.size))
        z = rng.normals(ensemble.seed, rng.STREAM_NESTED, paths, n_inner, offset)
        out[paths] = x_n[paths] * np.mean(np.exp(drift + vol * z), axis=1)
    return out * math.exp(-rate * t[m_idx])


def conditional_expectation(
    ensemble: PathEnsemble,
    n_idx: int,
    m_idx: int,
    est: CondExpEstimator = CondExpEstimator(),
    discount_rate: float = 0.0,
    strategy: TradingStrategy | None = None,
) -> np.ndarray:
    """Per-path estimate of ``E[Y_m | F_n]`` with ``Y_i = exp(-discount_rate t_i) X_i``."""
    last = len(ensemble.grid) - 1
    if not (0 <= n_idx <= last and 0 <= m_idx <= last):
        raise UsageError(f"indices ({n_idx}, {m_idx}) outside grid of {last} steps")
    if n_idx > m_idx:
        raise UsageError(f"conditioning index {n_idx} must not exceed target index {m_idx}")
    y = _discounted(ensemble, discount_rate)
    if m_idx == n_idx:
        return y[:, n_idx].copy()
    y_m = y[:, m_idx]
    if np.ptp(y_m) == 0.0:
        return y_m.copy()
    if est.method == "nested_mc":
        return _nested(ensemble, n_idx, m_idx, est.n_inner, discount_rate)
    extra = []
    if est.condition_on_strategy:
        if strategy is None:
            raise UsageError("condition_on_strategy is set but no strategy was given")
        extra = [strategy.a[:, n_idx], strategy.b[:, n_idx]]
    return _regress(y_m, ensemble.values[:, n_idx], extra, est.basis_degree)


def _profile(
    ensemble: PathEnsemble,
    rate: float,
    est: CondExpEstimator,
    strategy: TradingStrategy | None,
) -> tuple[np.ndarray, float]:
    """Adjacent defects and the excess drift implied by the conditional estimates."""
    y = _discounted(ensemble, rate)
    scale = ensemble.params.x0 if ensemble.params is not None else float(np.mean(np.abs(y[:, 0])))
    n = len(ensemble.grid) - 1
    defects = np.empty(n)
    log_ratio = 0.0
    for i in range(n):
        cond = conditional_expectation(ensemble, i, i + 1, est, rate, strategy)
        defects[i] = np.mean(np.abs(cond - y[:, i])) / scale
        log_ratio += math.log(np.mean(cond) / np.mean(y[:, i]))
    return defects, log_ratio / ensemble.grid.horizon


def martingale_defect(
    ensemble: PathEnsemble,
    discount_rate: float,
    est: CondExpEstimator = CondExpEstimator(),
    epsilon: float = 0.005,
    strategy: TradingStrategy | None = None,
) -> MartingaleReport:
    if ensemble.kind != "price":
        raise UsageError(f"martingale defect is measured on prices, got {ensemble.kind!r}")
    if len(ensemble.grid) < 2:
        raise UsageError("martingale defect needs at least two time points")
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon!r}")
    defects, _ = _profile(ensemble, discount_rate, est, strategy)
    worst = float(np.max(defects))
    return MartingaleReport(
        defect_by_index=defects.tolist(),
        max_defect=worst,
        epsilon=epsilon,
        converged=worst < epsilon,
    )


def adaptive_optimize(
    params: MarketParams,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    est: CondExpEstimator = CondExpEstimator(),
    epsilon: float = 0.005,
    max_iter: int = 15,
    damping: float = 0.8,
    raw: bool = False,
    threads: int = 1,
) -> MartingaleReport:
    """Drive the martingale defect below ``epsilon`` by shifting the drift.

    With ``raw`` the undiscounted price is tested, so the target drift is 0
    instead of ``r``. Exhausting ``max_iter`` returns a report with
    ``converged = False``.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon!r}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    if not 0 < damping <= 1:
        raise DomainError(f"damping must be in (0, 1], got {damping!r}")
    if len(grid) < 2:
        raise UsageError("adaptive optimization needs at least two time points")
    rate = 0.0 if raw else params.r
    vol = math.sqrt(params.alpha)
    if vol == 0.0 and params.mu != rate:
        raise DegenerateDiffusionError(
            "no drift shift can restore the martingale property: alpha = 0 "
            f"and mu = {params.mu!r} differs from the target rate {rate!r}"
        )

    # defects are normalised by x0, so work in units of x0
    unit = replace(params, x0=1.0)
    brownian = sample_brownian(grid, n_paths, seed, threads)
    theta = 0.0
    thetas: list[float] = []
    worst_by_iter: list[float] = []
    defects = np.zeros(grid.n_steps)
    converged = False
    for k in range(max_iter):
        shifted = replace(unit, mu=unit.mu - vol * theta)
        prices = simulate_gbm_exact(shifted, brownian)
        defects, excess = _profile(prices, rate, est, None)
        worst = float(np.max(defects))
        thetas.append(theta)
        worst_by_iter.append(worst)
        logger.debug("iter %d theta=%.6f max_defect=%.3e excess=%.3e", k, theta, worst, excess)
        if worst < epsilon:
            converged = True
            break
        if vol == 0.0:
            break
        theta = theta + damping * excess / vol

    return MartingaleReport(
        defect_by_index=defects.tolist(),
        max_defect=worst_by_iter[-1],
        epsilon=epsilon,
        converged=converged,
        theta_history=thetas,
        iterations=len(thetas),
        defect_history=worst_by_iter,
    )
