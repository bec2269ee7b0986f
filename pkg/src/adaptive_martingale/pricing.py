"""European call valuation: closed form and risk-neutral Monte Carlo.

The closed form is the standard call-price formula with ``sigma = sqrt(alpha)``.
It is distinct from the GBM path solution in :mod:`.stochastic`, which gives
the price process rather than the value of a claim on it.

The normal CDF uses ``Phi(x) = erfc(-x / sqrt(2)) / 2`` from :mod:`math`,
accurate to well below 1e-12 absolute over the whole real line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .stochastic import MarketParams, TimeGrid, sample_brownian, simulate_gbm_exact


@dataclass(frozen=True)
class CallContract:
    strike: float
    maturity: float

    def __post_init__(self):
        if not (math.isfinite(self.strike) and self.strike >= 0):
            raise DomainError(f"strike must be >= 0, got {self.strike!r}")
        if not (math.isfinite(self.maturity) and self.maturity > 0):
            raise DomainError(f"maturity must be > 0, got {self.maturity!r}")


@dataclass(frozen=True)
class PriceQuote:
    price: float
    std_error: float = 0.0
    n_paths: int = 0
    method: str = "closed"

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "method": self.method,
        }


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bs_call_price(params: MarketParams, contract: CallContract) -> PriceQuote:
    s, k, t, r = params.x0, contract.strike, contract.maturity, params.r
    disc = math.exp(-r * t)
    if k == 0.0:
        return PriceQuote(s)
    vol_t = math.sqrt(params.alpha * t)
    if vol_t == 0.0:
        return PriceQuote(disc * max(s * math.exp(r * t) - k, 0.0))
    d1 = (math.log(s / k) + (r + 0.5 * params.alpha) * t) / vol_t
    d2 = d1 - vol_t
    price = s * norm_cdf(d1) - k * disc * norm_cdf(d2)
    # cancellation deep out of the money can leave a tiny negative
    return PriceQuote(max(price, 0.0))


def mc_call_price(
    params: MarketParams,
    contract: CallContract,
    n_paths: int,
    seed: int,
    threads: int = 1,
) -> PriceQuote:
    """Discounted mean payoff of terminal prices simulated with drift ``r``."""
    if n_paths < 2:
        raise DomainError(f"Monte Carlo pricing needs n_paths >= 2, got {n_paths}")
    rn = replace(params, mu=params.r)
    grid = TimeGrid.uniform(contract.maturity, 1)
    x_t = simulate_gbm_exact(rn, sample_brownian(grid, n_paths, seed, threads)).terminal
    payoff = np.maximum(x_t - contract.strike, 0.0)
    disc = math.exp(-params.r * contract.maturity)
    if np.all(payoff == payoff[0]):
        return PriceQuote(disc * float(payoff[0]), 0.0, n_paths, "mc")
    # numpy's pairwise summation has a fixed order for a given array
    price = disc * float(np.mean(payoff))
    std_error = disc * float(np.std(payoff, ddof=1)) / math.sqrt(n_paths)
    return PriceQuote(price, std_error, n_paths, "mc")
