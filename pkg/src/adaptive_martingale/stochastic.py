"""Brownian paths, Gaussian densities and geometric Brownian motion.

Volatility is carried as a variance rate ``alpha``: the diffusion coefficient
of the price is ``sqrt(alpha)``, so the usual ``sigma`` is ``sqrt(alpha)``.
The exact solution used throughout is

    X_t = x0 * exp((mu - alpha / 2) * t + sqrt(alpha) * B_t),

i.e. log-price velocity ``c = mu - alpha / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import rng
from .errors import DomainError, EulerPositivityError, UsageError

EnsembleKind = Literal["brownian", "price", "portfolio", "gain"]
KINDS = ("brownian", "price", "portfolio", "gain")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Simulation times ``0 = t_0 < t_1 < ... < t_N``."""

    times: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        if t.ndim != 1 or t.size < 1:
            raise DomainError("time grid must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(t)):
            raise DomainError("time grid contains non-finite times")
        if t[0] != 0.0:
            raise DomainError(f"time grid must start at 0, got {t[0]!r}")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise DomainError("time grid must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, horizon: float, n_steps: int) -> "TimeGrid":
        if not horizon > 0 or not math.isfinite(horizon):
            raise DomainError(f"horizon must be positive and finite, got {horizon!r}")
        if n_steps < 1:
            raise DomainError(f"n_steps must be >= 1, got {n_steps}")
        return cls(np.linspace(0.0, horizon, n_steps + 1))

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    def step(self, i: int) -> float:
        return float(self.times[i + 1] - self.times[i])

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class MarketParams:
    """Initial price, mean income rate, variance-rate volatility and interest rate."""

    x0: float
    mu: float
    alpha: float
    r: float = 0.0

    def __post_init__(self):
        for name in ("x0", "mu", "alpha", "r"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.x0 > 0:
            raise DomainError(f"x0 must be > 0, got {self.x0!r}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha!r}")
        if self.r < 0:
            raise DomainError(f"r must be >= 0, got {self.r!r}")

    @property
    def velocity(self) -> float:
        """Drift of the log-price, ``mu - alpha / 2``."""
        return self.mu - 0.5 * self.alpha


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Matrix of per-path values on a grid, plus the seed that produced it.

    ``params`` records the market that generated a price ensemble; it is
    ``None`` for anything not simulated directly from a market.
    """

    values: np.ndarray
    grid: TimeGrid
    seed: int
    kind: EnsembleKind
    params: MarketParams | None = field(default=None)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[1] != len(self.grid):
            raise UsageError(
                f"values shape {v.shape} does not match grid of {len(self.grid)} times"
            )
        if v.shape[0] < 1:
            raise DomainError("ensemble needs at least one path")
        if self.kind not in KINDS:
            raise UsageError(f"unknown ensemble kind {self.kind!r}")
        object.__setattr__(self, "values", v)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[:, -1]

    def subsample(self, stride: int) -> "PathEnsemble":
        """Keep every ``stride``-th time; Brownian values stay exact on the coarse grid."""
        if stride < 1 or self.grid.n_steps % stride:
            raise UsageError(f"stride {stride} does not divide {self.grid.n_steps} steps")
        return PathEnsemble(
            self.values[:, ::stride],
            TimeGrid(self.grid.times[::stride]),
            self.seed,
            self.kind,
            self.params,
        )


def heat_kernel(x, t: float):
    """Gaussian heat kernel ``exp(-x**2 / (2 t)) / sqrt(2 pi t)``."""
    if not t > 0:
        raise DomainError(f"heat kernel needs t > 0, got {t!r}")
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(-(x * x) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    return float(out) if out.ndim == 0 else out


def drifted_density(x, t: float, c: float):
    """Density of ``c t + B_t``: the heat kernel centred at ``c t``."""
    if not t > 0:
        raise DomainError(f"drifted density needs t > 0, got {t!r}")
    return heat_kernel(np.asarray(x, dtype=np.float64) - c * t, t)


def sample_brownian(grid: TimeGrid, n_paths: int, seed: int, threads: int = 1) -> PathEnsemble:
    """Standard Brownian motion sampled on ``grid``.

    Path ``p`` uses substream ``(seed, p)`` and its ``i``-th increment is the
    ``i``-th draw of that stream, so results do not depend on ``threads``.
    """
    if not isinstance(grid, TimeGrid):
        raise DomainError("grid must be a TimeGrid")
    if n_paths < 1:
        raise DomainError(f"n_paths must be >= 1, got {n_paths}")
    z = rng.normals(seed, rng.STREAM_BROWNIAN, np.arange(n_paths), grid.n_steps, threads=threads)
    values = np.zeros((n_paths, len(grid)))
    np.cumsum(z * np.sqrt(grid.steps), axis=1, out=values[:, 1:])
    return PathEnsemble(values, grid, seed, "brownian")


def _require_brownian(brownian: PathEnsemble) -> None:
    if brownian.kind != "brownian":
        raise UsageError(f"expected a brownian ensemble, got kind {brownian.kind!r}")


def simulate_gbm_exact(params: MarketParams, brownian: PathEnsemble) -> PathEnsemble:
    _require_brownian(brownian)
    t = brownian.grid.times
    log_ret = params.velocity * t[None, :] + math.sqrt(params.alpha) * brownian.values
    return PathEnsemble(
        params.x0 * np.exp(log_ret), brownian.grid, brownian.seed, "price", params
    )


def simulate_gbm_euler(params: MarketParams, brownian: PathEnsemble) -> PathEnsemble:
    """Euler-Maruyama for ``dX = mu X dt + sqrt(alpha) X dB``.

    Raises EulerPositivityError at the first step where any path hits zero
    or below; no clamping.
    """
    _require_brownian(brownian)
    dt = brownian.grid.steps
    db = np.diff(brownian.values, axis=1)
    vol = math.sqrt(params.alpha)
    x = np.empty_like(brownian.values)
    x[:, 0] = params.x0
    for i in range(dt.size):
        x[:, i + 1] = x[:, i] * (1.0 + params.mu * dt[i] + vol * db[:, i])
        bad = np.flatnonzero(x[:, i + 1] <= 0.0)
        if bad.size:
            p = int(bad[0])
            raise EulerPositivityError(p, i, float(dt[i]), float(x[p, i + 1]))
    return PathEnsemble(x, brownian.grid, brownian.seed, "price", params)


def strong_convergence_study(
    params: MarketParams, fine: PathEnsemble, step_counts
) -> tuple[np.ndarray, np.ndarray, float]:
    """Strong error of Euler against the exact solution on shared Brownian paths.

    ``fine`` must carry a uniform grid whose step count is a multiple of every
    entry of ``step_counts``. Returns ``(dts, errors, order)`` with
    ``errors[k] = mean |X_T^euler - X_T^exact|`` and ``order`` the
    least-squares slope of ``log error`` against ``log dt``.
    """
    _require_brownian(fine)
    dts, errs = [], []
    for n in step_counts:
        coarse = fine.subsample(fine.grid.n_steps // n)
        exact = simulate_gbm_exact(params, coarse).terminal
        euler = simulate_gbm_euler(params, coarse).terminal
        dts.append(coarse.grid.horizon / n)
        errs.append(np.mean(np.abs(euler - exact)))
    dts, errs = np.array(dts), np.array(errs)
    order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return dts, errs, order
