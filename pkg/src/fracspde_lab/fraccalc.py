"""Fractional calculus on uniform time grids.

Riemann-Liouville integrals use the product trapezoidal rule: f is replaced by
its piecewise-linear interpolant and the weight (t - s)^(alpha - 1) is
integrated exactly on every cell, so the singularity at s = t costs nothing.
Derivatives differentiate the integrated path with second-order stencils.

The module also carries the quadrature helpers shared by the kernel and
simulation code: a checked wrapper around QUADPACK and per-cell integrals of
tau^e * fn(tau) with the power absorbed by Gauss-Jacobi on the first cell.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, special

from fracspde_lab.errors import QuadratureError
from fracspde_lab.reports import EstimateReport, ratio_report

logger = logging.getLogger(__name__)

MIN_RESOLVED_STEPS = 64
# dyadic splits of the first cell before the Gauss-Jacobi core
FIRST_CELL_LEVELS = 24


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")

    @property
    def h(self) -> float:
        return self.t_end / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.h

    def refined(self) -> TimeGrid:
        return TimeGrid(self.t_end, 2 * self.n_steps)


@dataclass(frozen=True)
class SampledPath:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.shape[0] != self.grid.n_steps + 1:
            raise ValueError(
                f"path has {values.shape[0]} values, grid has {self.grid.n_steps + 1} nodes"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn: Callable[[np.ndarray], Any]) -> SampledPath:
        return cls(grid, np.asarray(fn(grid.nodes)))

    def __sub__(self, other: SampledPath) -> SampledPath:
        return SampledPath(self.grid, self.values - other.values)


def _trapezoid_weights(alpha: float, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Convolution weights c_m and start weights a_n of the product trapezoid rule."""
    a1 = alpha + 1.0
    m = np.arange(n_steps + 1, dtype=float)
    c = np.empty(n_steps + 1)
    c[0] = 1.0
    c[1:] = (m[1:] + 1) ** a1 - 2 * m[1:] ** a1 + (m[1:] - 1) ** a1
    a = np.zeros(n_steps + 1)
    a[1:] = (m[1:] - 1) ** a1 - (m[1:] - a1) * m[1:] ** alpha
    return c, a


def rl_integral(f: SampledPath, alpha: float) -> SampledPath:
    """Riemann-Liouville integral I^alpha f on the grid of ``f``.

    Time is axis 0 of ``f.values``; trailing axes are integrated independently.
    """
    if alpha < 0:
        raise ValueError(f"rl_integral needs alpha >= 0, got {alpha}; use rl_derivative")
    if alpha == 0:
        return SampledPath(f.grid, f.values.copy())
    n = f.grid.n_steps
    c, a = _trapezoid_weights(alpha, n)
    values = f.values
    tail = values.copy()
    tail[0] = 0
    flat = tail.reshape(n + 1, -1)
    conv = np.stack(
        [np.convolve(c, flat[:, j])[: n + 1] for j in range(flat.shape[1])], axis=1
    ).reshape(values.shape)
    start = a.reshape((n + 1,) + (1,) * (values.ndim - 1)) * values[0]
    out = f.grid.h**alpha / special.gamma(alpha + 2.0) * (start + conv)
    out[0] = 0
    return SampledPath(f.grid, out)


def rl_derivative(f: SampledPath, alpha: float) -> SampledPath:
    """D^alpha f = d/dt I^(1-alpha) f for alpha in (0, 1).

    Second-order centered differences inside, one-sided at the ends. The
    one-sided start stencil dominates the error.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"rl_derivative needs alpha in (0, 1), got {alpha}")
    if f.grid.n_steps < MIN_RESOLVED_STEPS:
        logger.warning(
            "rl_derivative on %d steps is under-resolved (< %d)", f.grid.n_steps,
            MIN_RESOLVED_STEPS,
        )
    integrated = rl_integral(f, 1.0 - alpha)
    return SampledPath(f.grid, np.gradient(integrated.values, f.grid.h, axis=0, edge_order=2))


def caputo_derivative(f: SampledPath, alpha: float) -> SampledPath:
    """Caputo derivative: D^alpha (f - f(0))."""
    return rl_derivative(SampledPath(f.grid, f.values - f.values[0]), alpha)


def lp_norm(values: np.ndarray, h: float, p: float) -> float:
    return float((h * np.sum(np.abs(values) ** p)) ** (1.0 / p))


def verify_lp_boundedness(
    f: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    p: float,
    t_end: float = 1.0,
    n_steps: int = 256,
    *,
    levels: int = 3,
    threshold: float = 0.10,
) -> EstimateReport:
    """||I^alpha f||_p / ||f||_p on n, 2n, 4n, ... steps; the constant must not drift."""

    def ratio(n: int) -> float:
        path = SampledPath.from_function(TimeGrid(t_end, n), f)
        integrated = rl_integral(path, alpha)
        return lp_norm(integrated.values, path.grid.h, p) / lp_norm(path.values, path.grid.h, p)

    ratios = [ratio(n_steps * 2**k) for k in range(levels + 1)]
    return ratio_report(
        "||I^alpha f||_p <= C ||f||_p",
        ratios[:-1],
        ratios[1:],
        threshold=threshold,
        parameters={"alpha": alpha, "p": p, "t_end": t_end, "n_steps": n_steps},
    )


def adaptive_quad(
    fn: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: float = 1e-14,
    epsrel: float = 1e-10,
    limit: int = 200,
    weight: str | None = None,
    wvar: float | None = None,
    points: list[float] | None = None,
    what: str = "integral",
    strict: bool = True,
) -> tuple[float, float]:
    """QUADPACK with a convergence check. Returns (value, abserr).

    A QUADPACK warning is tolerated when the error estimate still meets the
    requested tolerance up to a factor 100; otherwise QuadratureError is
    raised (or logged when ``strict`` is false).
    """
    kwargs: dict[str, Any] = {"limit": limit, "full_output": 1}
    if weight is not None:
        kwargs["weight"] = weight
        kwargs["wvar"] = wvar
        if np.isinf(b):
            kwargs["limlst"] = 200
    if points is not None:
        kwargs["points"] = points
    result = integrate.quad(fn, a, b, epsabs=epsabs, epsrel=epsrel, **kwargs)
    value, abserr = float(result[0]), float(result[1])
    if len(result) > 3:
        allowed = 100.0 * max(epsabs, epsrel * abs(value))
        if not math.isfinite(value) or abserr > allowed:
            message = (
                f"{what} on [{a:g}, {b:g}] did not converge: {result[3]!s:.120} "
                f"(value={value:.6g}, abserr={abserr:.3g})"
            )
            if strict:
                raise QuadratureError(message)
            logger.debug(message)
    return value, abserr


def singular_cell_integrals(
    fn: Callable[[np.ndarray], np.ndarray],
    exponent: float,
    h: float,
    n_cells: int,
    order: int = 16,
) -> np.ndarray:
    """Per-cell integrals of tau^exponent * fn(tau) over [j h, (j+1) h].

    ``fn`` maps a 1-D array of tau to an array with tau on axis 0 and any
    trailing axes (e.g. one per eigenvalue); the result has shape
    (n_cells, *trailing). The first cell is split dyadically towards 0 and
    its innermost piece integrated with Gauss-Jacobi weight tau^exponent.
    """
    if exponent <= -1.0:
        raise ValueError(f"tau^{exponent} is not integrable at 0")
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    xj, wj = special.roots_jacobi(order, 0.0, exponent)
    xl, wl = special.roots_legendre(order)

    # innermost piece [0, h 2^-L]: Jacobi absorbs the power exactly
    inner = h * 2.0**-FIRST_CELL_LEVELS
    tau_in = inner * (1 + xj) / 2
    w_in = (inner / 2) ** (exponent + 1) * wj

    # dyadic pieces [h 2^-(k+1), h 2^-k] of the first cell
    lo = h * 2.0 ** -np.arange(1, FIRST_CELL_LEVELS + 1)[:, None]
    tau_dy = lo + lo * (1 + xl) / 2
    w_dy = (lo / 2) * wl * tau_dy**exponent
    tau_first = np.concatenate([tau_in, tau_dy.ravel()])
    w_first = np.concatenate([w_in, w_dy.ravel()])

    cells = np.arange(1, n_cells)[:, None]
    tau_rest = h * (cells + (1 + xl) / 2)
    w_rest = (h / 2) * wl * tau_rest**exponent

    values_first = np.asarray(fn(tau_first))
    first = np.tensordot(w_first, values_first, axes=(0, 0))
    if n_cells == 1:
        return first[None, ...]
    values_rest = np.asarray(fn(tau_rest.ravel()))
    values_rest = values_rest.reshape((n_cells - 1, order) + values_rest.shape[1:])
    rest = np.einsum("co,co...->c...", w_rest, values_rest)
    return np.concatenate([first[None, ...], rest], axis=0)


def power_cell_integrals(exponent: float, h: float, n_cells: int) -> np.ndarray:
    """Closed-form integrals of tau^exponent over the cells [j h, (j+1) h]."""
    if exponent <= -1.0:
        raise ValueError(f"tau^{exponent} is not integrable at 0")
    edges = h * np.arange(n_cells + 1, dtype=float)
    e1 = exponent + 1.0
    return np.diff(edges**e1) / e1
