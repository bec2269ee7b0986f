"""Brownian/GBM simulation, European call pricing, trading-strategy accounting
and an adaptive drift-shift optimizer that restores the martingale property."""

from .errors import (
    AdaptiveMartingaleError,
    DegenerateDiffusionError,
    DomainError,
    EulerPositivityError,
    StrategyError,
    UsageError,
)
from .martingale import (
    CondExpEstimator,
    MartingaleReport,
    adaptive_optimize,
    conditional_expectation,
    martingale_defect,
)
from .pricing import CallContract, PriceQuote, bs_call_price, mc_call_price
from .stochastic import (
    MarketParams,
    PathEnsemble,
    TimeGrid,
    drifted_density,
    heat_kernel,
    sample_brownian,
    simulate_gbm_euler,
    simulate_gbm_exact,
    strong_convergence_study,
)
from .strategy import (
    BondCurve,
    TradingStrategy,
    bond_price,
    gain_process,
    make_strategy,
    portfolio_value,
    self_financing_defect,
)

__version__ = "0.1.0"
