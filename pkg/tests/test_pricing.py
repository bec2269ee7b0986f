import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_martingale import (
    CallContract,
    DomainError,
    MarketParams,
    bs_call_price,
    mc_call_price,
)
from adaptive_martingale.pricing import norm_cdf

# 10**6-path risk-neutral Monte Carlo with numpy's PCG64 (seed 20261018), run
# once before the pricer existed: mean and standard error of the discounted payoff
MC_ORACLE_ATM = 10.45664518837101
MC_ORACLE_ATM_SE = 0.01474322546819862

ATM = MarketParams(x0=100.0, mu=0.08, alpha=0.04, r=0.05)
ATM_CONTRACT = CallContract(strike=100.0, maturity=1.0)


def test_closed_form_against_mc_oracle():
    price = bs_call_price(ATM, ATM_CONTRACT).price
    assert abs(price - MC_ORACLE_ATM) < 3 * MC_ORACLE_ATM_SE


def test_norm_cdf_against_scipy():
    from scipy.stats import norm

    xs = np.linspace(-38, 9, 4001)
    worst = max(abs(norm_cdf(x) - norm.cdf(x)) for x in xs)
    assert worst <= 1e-12
    assert norm_cdf(0.0) == 0.5


class TestClosedForm:
    def test_zero_strike_is_asset(self):
        q = bs_call_price(ATM, CallContract(0.0, 2.0))
        assert q.price == ATM.x0
        assert q.std_error == 0.0 and q.n_paths == 0

    def test_zero_vol_forward(self):
        q = bs_call_price(MarketParams(1.0, 0.3, 0.0, 0.05), CallContract(1.0, 1.0))
        assert q.price == pytest.approx(1 - math.exp(-0.05), rel=1e-14)
        assert q.price == pytest.approx(math.exp(-0.05) * (math.exp(0.05) - 1), rel=1e-14)

    def test_zero_vol_out_of_money(self):
        q = bs_call_price(MarketParams(1.0, 0.0, 0.0, 0.05), CallContract(2.0, 1.0))
        assert q.price == 0.0

    def test_mu_does_not_enter(self):
        a = bs_call_price(MarketParams(100, 0.0, 0.04, 0.05), ATM_CONTRACT).price
        b = bs_call_price(MarketParams(100, 0.3, 0.04, 0.05), ATM_CONTRACT).price
        assert a == b

    @pytest.mark.parametrize("kw", [dict(strike=-1.0, maturity=1.0), dict(strike=1.0, maturity=0.0)])
    def test_contract_invalid(self, kw):
        with pytest.raises(DomainError):
            CallContract(**kw)


params_st = st.builds(
    MarketParams,
    x0=st.floats(1.0, 500.0),
    mu=st.just(0.0),
    alpha=st.floats(0.0, 1.0),
    r=st.floats(0.0, 0.2),
)


@settings(max_examples=200, deadline=None)
@given(params_st, st.floats(0.0, 1000.0), st.floats(0.01, 10.0))
def test_no_arbitrage_bounds(p, k, t):
    price = bs_call_price(p, CallContract(k, t)).price
    lower = max(p.x0 - k * math.exp(-p.r * t), 0.0)
    assert lower - 1e-9 * p.x0 <= price <= p.x0 * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(params_st, st.floats(0.05, 5.0))
def test_monotone_in_strike_and_spot(p, t):
    ladder = np.linspace(0.0, 3 * p.x0, 25)
    prices = [bs_call_price(p, CallContract(k, t)).price for k in ladder]
    assert all(b <= a + 1e-12 * p.x0 for a, b in zip(prices, prices[1:]))
    spots = np.linspace(0.5, 2.0, 13) * p.x0
    k = CallContract(p.x0, t)
    by_spot = [bs_call_price(MarketParams(s, p.mu, p.alpha, p.r), k).price for s in spots]
    assert all(b >= a - 1e-12 * p.x0 for a, b in zip(by_spot, by_spot[1:]))


class TestMonteCarlo:
    def test_agrees_with_closed_form(self):
        q = mc_call_price(ATM, ATM_CONTRACT, 100_000, 42)
        assert q.n_paths == 100_000 and q.method == "mc"
        assert abs(q.price - bs_call_price(ATM, ATM_CONTRACT).price) <= 3 * q.std_error

    def test_zero_strike_martingale(self):
        q = mc_call_price(ATM, CallContract(0.0, 1.0), 100_000, 3)
        assert abs(q.price - ATM.x0) <= 3 * q.std_error

    def test_zero_vol_exact(self):
        p = MarketParams(1.0, 0.2, 0.0, 0.05)
        c = CallContract(1.0, 1.0)
        q = mc_call_price(p, c, 1000, 5)
        assert q.std_error == 0.0
        assert q.price == bs_call_price(p, c).price

    def test_deterministic(self):
        a = mc_call_price(ATM, ATM_CONTRACT, 5000, 9)
        b = mc_call_price(ATM, ATM_CONTRACT, 5000, 9, threads=2)
        assert a == b

    def test_std_error_formula(self):
        q = mc_call_price(ATM, ATM_CONTRACT, 2, 1)
        assert q.std_error >= 0.0

    @pytest.mark.parametrize("n", [0, 1])
    def test_needs_two_paths(self, n):
        with pytest.raises(DomainError):
            mc_call_price(ATM, ATM_CONTRACT, n, 1)
