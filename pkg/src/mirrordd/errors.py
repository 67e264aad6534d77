"""Exception types raised by mirrordd."""

from __future__ import annotations


class MirrorConstraintError(ValueError):
    """A mirror description violates one of its defining relations."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class UnphysicalRateError(ValueError):
    """A collective decay rate would be zero or negative."""


class NoCrossingError(ValueError):
    """The emission-rate ratio never returns to one."""


class ConvergenceError(RuntimeError):
    """Adaptive quadrature ran out of budget before reaching the tolerance."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")
        self.estimate = estimate


class IntegrationError(RuntimeError):
    """Time propagation failed."""
