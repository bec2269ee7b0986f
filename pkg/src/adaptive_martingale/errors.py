"""Exception hierarchy shared by the library and the CLI."""


class AdaptiveMartingaleError(Exception):
    """Base class for all library errors."""


class DomainError(AdaptiveMartingaleError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(AdaptiveMartingaleError, ValueError):
    """Arguments are individually valid but do not fit together."""


class EulerPositivityError(AdaptiveMartingaleError):
    """The Euler scheme produced a non-positive price."""

    def __init__(self, path: int, step: int, dt: float, value: float):
        self.path = path
        self.step = step
        self.dt = dt
        self.value = value
        super().__init__(
            f"Euler step produced non-positive price {value:.6g} on path {path} "
            f"at step {step} (dt={dt:.6g}); refine the grid or use the exact scheme"
        )


class StrategyError(AdaptiveMartingaleError, ValueError):
    """A trading policy returned an unusable holding."""


class DegenerateDiffusionError(AdaptiveMartingaleError):
    """Zero volatility leaves no drift shift able to fix a drift mismatch."""
