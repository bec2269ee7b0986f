"""Trading strategies, bond curve, portfolio value and the discrete gain process.

A strategy holds ``a`` units of stock and ``b`` units of the bond
``beta(t) = exp(r t)``. Portfolio value is ``V = a X + b beta``; the gain is
the left-point sum of ``a dX + b dbeta``. Self-financing is *measured*, not
imposed: :func:`self_financing_defect` reports how far ``V - V_0`` strays
from the gain.

Policies see the time prefix ``times[:i + 1]`` and the price prefix
``prices[:, :i + 1]`` for all paths at once and return ``(a, b)``, each
broadcastable to ``(n_paths,)``. Since a policy never sees later prices,
strategies built by :func:`make_strategy` are adapted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, StrategyError, UsageError
from .stochastic import PathEnsemble, TimeGrid

Policy = Callable[[np.ndarray, np.ndarray], tuple]

DEFAULT_MAGNITUDE_CAP = 1e9


@dataclass(frozen=True, eq=False)
class TradingStrategy:
    a: np.ndarray
    b: np.ndarray
    grid: TimeGrid
    # False when built from raw matrices: nothing guarantees adaptedness then
    adapted: bool = True

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 2 or a.shape[1] != len(self.grid):
            raise UsageError(f"holding shapes {a.shape} and {b.shape} do not match the grid")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def unchecked(cls, a, b, grid: TimeGrid) -> "TradingStrategy":
        """Wrap raw holding matrices; adaptedness is the caller's responsibility."""
        return cls(a, b, grid, adapted=False)

    @property
    def n_paths(self) -> int:
        return self.a.shape[0]

    def __add__(self, other: "TradingStrategy") -> "TradingStrategy":
        return TradingStrategy(
            self.a + other.a, self.b + other.b, self.grid, self.adapted and other.adapted
        )

    def scaled(self, lam: float) -> "TradingStrategy":
        return TradingStrategy(lam * self.a, lam * self.b, self.grid, self.adapted)


@dataclass(frozen=True, eq=False)
class BondCurve:
    r: float
    values: np.ndarray

    @classmethod
    def on_grid(cls, r: float, grid: TimeGrid) -> "BondCurve":
        return cls(r, np.exp(r * grid.times))


def bond_price(r: float, t: float) -> float:
    if t < 0:
        raise DomainError(f"bond price needs t >= 0, got {t!r}")
    return math.exp(r * t)


def make_strategy(
    policy: Policy, prices: PathEnsemble, magnitude_cap: float = DEFAULT_MAGNITUDE_CAP
) -> TradingStrategy:
    if prices.kind != "price":
        raise UsageError(f"strategies are built on price ensembles, got {prices.kind!r}")
    times, x = prices.grid.times, prices.values
    n, m = x.shape
    a = np.empty((n, m))
    b = np.empty((n, m))
    for i in range(m):
        ai, bi = policy(times[: i + 1], x[:, : i + 1])
        a[:, i] = np.broadcast_to(np.asarray(ai, dtype=np.float64), (n,))
        b[:, i] = np.broadcast_to(np.asarray(bi, dtype=np.float64), (n,))
        for name, col in (("a", a[:, i]), ("b", b[:, i])):
            bad = np.flatnonzero(~np.isfinite(col))
            if bad.size:
                raise StrategyError(
                    f"policy returned non-finite {name} on path {int(bad[0])} "
                    f"at time index {i} (t={times[i]:.6g})"
                )
    peak = max(np.max(np.abs(a)), np.max(np.abs(b)))
    if peak > magnitude_cap:
        warnings.warn(
            f"strategy holdings reach {peak:.3g}, above the cap {magnitude_cap:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return TradingStrategy(a, b, prices.grid)


def _check_dims(strategy: TradingStrategy, prices: PathEnsemble, bond: BondCurve) -> None:
    if strategy.a.shape != prices.values.shape:
        raise UsageError(
            f"strategy shape {strategy.a.shape} does not match prices {prices.values.shape}"
        )
    if strategy.grid != prices.grid:
        raise UsageError("strategy and prices live on different grids")
    if np.shape(bond.values) != (len(prices.grid),):
        raise UsageError("bond curve does not match the price grid")


def portfolio_value(
    strategy: TradingStrategy, prices: PathEnsemble, bond: BondCurve
) -> PathEnsemble:
    _check_dims(strategy, prices, bond)
    v = strategy.a * prices.values + strategy.b * bond.values[None, :]
    return PathEnsemble(v, prices.grid, prices.seed, "portfolio")


def gain_process(strategy: TradingStrategy, prices: PathEnsemble, bond: BondCurve) -> PathEnsemble:
    """Left-point sum ``G_i = sum_{j<i} a_j (X_{j+1} - X_j) + b_j (beta_{j+1} - beta_j)``."""
    _check_dims(strategy, prices, bond)
    dx = np.diff(prices.values, axis=1)
    dbeta = np.diff(bond.values)[None, :]
    incr = strategy.a[:, :-1] * dx + strategy.b[:, :-1] * dbeta
    g = np.zeros_like(prices.values)
    np.cumsum(incr, axis=1, out=g[:, 1:])
    return PathEnsemble(g, prices.grid, prices.seed, "gain")


def self_financing_defect(
    strategy: TradingStrategy, prices: PathEnsemble, bond: BondCurve
) -> np.ndarray:
    """Per-path ``max_i |V_i - V_0 - G_i|``; zero exactly when the path is self-financed."""
    v = portfolio_value(strategy, prices, bond).values
    g = gain_process(strategy, prices, bond).values
    return np.max(np.abs(v - v[:, :1] - g), axis=1)


# Named policies ---------------------------------------------------------------


def buy_and_hold(times, prefix):
    return 1.0, 0.0


def bond_only(times, prefix):
    return 0.0, 1.0


def threshold(level: float) -> Policy:
    """One share while the current price is above ``level``, none otherwise."""

    def policy(times, prefix):
        return (prefix[:, -1] > level).astype(np.float64), 0.0

    return policy


def constant_mix(w: float, r: float = 0.0) -> Policy:
    """Fraction ``w`` of the initial wealth ``x0`` in stock, the rest in bonds, reset every step.

    Holdings are ``a = w x0 / X_t`` and ``b = (1 - w) x0 / beta_t``, so the
    value stays at ``x0``; this rebalancing is not self-financing.
    """

    def policy(times, prefix):
        x0 = prefix[:, 0]
        return w * x0 / prefix[:, -1], (1.0 - w) * x0 / math.exp(r * times[-1])

    return policy


def named_policy(text: str, r: float = 0.0) -> Policy:
    """Parse ``buy_and_hold``, ``bond_only``, ``threshold(level)`` or ``constant_mix(w)``."""
    s = text.strip().replace(" ", "")
    if s == "buy_and_hold":
        return buy_and_hold
    if s == "bond_only":
        return bond_only
    for name, factory in (("threshold", threshold), ("constant_mix", lambda w: constant_mix(w, r))):
        if s.startswith(name + "(") and s.endswith(")"):
            try:
                arg = float(s[len(name) + 1 : -1])
            except ValueError:
                raise UsageError(f"bad argument in policy {text!r}") from None
            return factory(arg)
    raise UsageError(
        f"unknown policy {text!r}; expected buy_and_hold, bond_only, threshold(level) or constant_mix(w)"
    )
