"""Exception types raised by the laboratory.

All of them subclass a builtin so callers can keep catching ``ValueError`` or
``RuntimeError`` as usual.
"""

from __future__ import annotations


class ParameterWindowError(ValueError):
    """A parameter combination falls outside the admissible window.

    ``inequality`` holds the violated condition in readable form, e.g.
    ``"alpha - beta > -1/2"``.
    """

    def __init__(self, inequality: str, detail: str = "") -> None:
        self.inequality = inequality
        message = f"parameter window violated: {inequality}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class DivergentInversionError(ValueError):
    """Fourier inversion requested for a symbol whose amplitude does not decay."""


class ScalingViolationError(ValueError):
    """Strict scaling verification failed on a pair (r, R)."""

    def __init__(self, r: float, R: float, bound: str) -> None:
        self.r = r
        self.R = R
        super().__init__(f"{bound} violated at r={r:.6g}, R={R:.6g}")


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class PicardDivergenceError(RuntimeError):
    """Picard difference norms kept growing."""
