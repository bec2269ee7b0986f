import numpy as np
import pytest

from adaptive_martingale import MarketParams, PathEnsemble, TimeGrid

_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def market():
    return MarketParams(x0=100.0, mu=0.08, alpha=0.04, r=0.05)


@pytest.fixture
def small_grid():
    return TimeGrid.uniform(1.0, 4)


def price_ensemble(values, times, seed=0):
    """Price ensemble from explicit numbers, for hand-checked small cases."""
    return PathEnsemble(np.asarray(values, dtype=float), TimeGrid(times), seed, "price")
