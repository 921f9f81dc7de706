"""Periodic lattices, phi-multipliers and the real trigonometric basis."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np

from fracspde_lab.bernstein import BernsteinSpec

logger = logging.getLogger(__name__)


class MultiplierKind(StrEnum):
    PHI_POWER = "phi_power"
    BESSEL_PHI_POWER = "bessel_phi_power"


@dataclass
class SpectralGrid:
    """Periodic lattice [0, L)^dim with N points per axis and its frequency set.

    Frequencies follow FFT order: xi_k = 2 pi k / L, k in [-N/2, N/2).
    Multiplier tables are cached per (kind, phi, gamma).
    """

    dim: int
    box_length: float
    points: int
    _tables: dict[tuple[Any, ...], np.ndarray] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.points < 2 or self.points & (self.points - 1):
            raise ValueError(f"points must be a power of two, got {self.points}")
        if self.box_length <= 0:
            raise ValueError("box_length must be positive")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def coords(self) -> np.ndarray:
        """Axis coordinates j * dx, j = 0..N-1."""
        return np.arange(self.points) * self.spacing

    @property
    def centered_coords(self) -> np.ndarray:
        """Signed axis coordinates in FFT order: 0, dx, ..., -dx."""
        return np.fft.fftfreq(self.points, d=1.0 / self.box_length)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    @property
    def xi_sq(self) -> np.ndarray:
        key = ("xi_sq",)
        if key not in self._tables:
            axes = np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij")
            self._tables[key] = sum(a**2 for a in axes)
        return self._tables[key]

    @property
    def max_xi_sq(self) -> float:
        return self.dim * (math.pi * self.points / self.box_length) ** 2

    def refined(self) -> SpectralGrid:
        """Same box, twice the points per axis."""
        return SpectralGrid(self.dim, self.box_length, 2 * self.points)

    def enlarged(self) -> SpectralGrid:
        """Twice the box at the same spacing."""
        return SpectralGrid(self.dim, 2.0 * self.box_length, 2 * self.points)

    def phi_table(self, phi: BernsteinSpec) -> np.ndarray:
        key = ("phi", phi.name, tuple(sorted(phi.params.items())))
        if key not in self._tables:
            self._tables[key] = phi.symbol(self.xi_sq)
        return self._tables[key]

    def multiplier(
        self, phi: BernsteinSpec, kind: MultiplierKind | str, gamma: float
    ) -> np.ndarray:
        """phi(|xi|^2)^(gamma/2) or (1 + phi(|xi|^2))^(gamma/2) on the frequency set."""
        kind = MultiplierKind(kind)
        key = (kind.value, phi.name, tuple(sorted(phi.params.items())), gamma)
        if key not in self._tables:
            values = self.phi_table(phi)
            if kind is MultiplierKind.BESSEL_PHI_POWER:
                table = (1.0 + values) ** (gamma / 2.0)
            elif gamma == 0:
                table = np.ones_like(values)
            else:
                if gamma < 0:
                    raise ValueError("phi_power with gamma < 0 is singular at xi = 0")
                table = values ** (gamma / 2.0)
                table[values == 0] = 0.0
            self._tables[key] = table
        return self._tables[key]

    def integrate(self, field_values: np.ndarray) -> Any:
        """Discrete integral over the box along the trailing ``dim`` axes."""
        axes = tuple(range(-self.dim, 0))
        return np.sum(field_values, axis=axes) * self.cell_volume

    def lp_norm(self, field_values: np.ndarray, p: float) -> Any:
        return self.integrate(np.abs(field_values) ** p) ** (1.0 / p)


def apply_multiplier(
    u: np.ndarray,
    grid: SpectralGrid,
    phi: BernsteinSpec,
    kind: MultiplierKind | str,
    gamma: float,
) -> np.ndarray:
    """Apply phi(Delta)^(gamma/2)-type multipliers to a lattice field (trailing axes)."""
    values = np.asarray(u)
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains NaN or inf")
    if values.shape[-grid.dim :] != grid.shape:
        raise ValueError(f"field shape {values.shape} does not end with grid shape {grid.shape}")
    axes = tuple(range(-grid.dim, 0))
    spectrum = np.fft.fftn(values, axes=axes) * grid.multiplier(phi, kind, gamma)
    out = np.fft.ifftn(spectrum, axes=axes)
    if np.isrealobj(values):
        return out.real
    return out


@dataclass(frozen=True)
class TrigMode:
    """One real basis function: 'const', 'cos' or 'sin' of k . x (2 pi / L units)."""

    kind: str
    wavevector: tuple[int, ...]

    def xi_sq(self, box_length: float) -> float:
        return (2.0 * math.pi / box_length) ** 2 * sum(k * k for k in self.wavevector)

    def evaluate(self, grid: SpectralGrid) -> np.ndarray:
        volume = grid.box_length**grid.dim
        if self.kind == "const":
            return np.full(grid.shape, 1.0 / math.sqrt(volume))
        axes = np.meshgrid(*([grid.coords] * grid.dim), indexing="ij")
        phase = sum(
            2.0 * math.pi * k * a / grid.box_length
            for k, a in zip(self.wavevector, axes, strict=True)
        )
        wave = np.cos(phase) if self.kind == "cos" else np.sin(phase)
        return math.sqrt(2.0 / volume) * np.asarray(wave)


@dataclass(frozen=True)
class TrigBasis:
    modes: tuple[TrigMode, ...]
    functions: np.ndarray = field(repr=False)
    xi_sq: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.modes)


def trig_modes(dim: int, count: int, points: int | None = None) -> tuple[TrigMode, ...]:
    """First ``count`` real trigonometric modes ordered by |k|^2.

    Each +/- pair contributes cos then sin. Wavevectors stay below the
    Nyquist frequency of a ``points``-lattice, where sin and cos are not
    both orthonormal.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    limit = None if points is None else points // 2 - 1
    reach = 1
    while True:
        if limit is not None:
            reach = min(reach, limit)
        vectors = [
            v
            for v in itertools.product(range(-reach, reach + 1), repeat=dim)
            if v > (0,) * dim and sum(k * k for k in v) <= reach * reach
        ]
        if 1 + 2 * len(vectors) >= count:
            break
        if limit is not None and reach >= limit:
            raise ValueError(f"lattice with {points} points cannot carry {count} modes")
        reach += 1
    vectors.sort(key=lambda v: (sum(k * k for k in v), tuple(-k for k in v)))
    modes = [TrigMode("const", (0,) * dim)]
    for v in vectors:
        modes.extend((TrigMode("cos", v), TrigMode("sin", v)))
    return tuple(modes[:count])


def trig_basis(grid: SpectralGrid, count: int) -> TrigBasis:
    """Real orthonormal trigonometric basis on the lattice (discrete inner product)."""
    if count > grid.points**grid.dim:
        raise ValueError(f"at most {grid.points ** grid.dim} modes fit on this lattice")
    modes = trig_modes(grid.dim, count, grid.points)
    functions = np.stack([m.evaluate(grid) for m in modes])
    xi_sq = np.array([m.xi_sq(grid.box_length) for m in modes])
    return TrigBasis(modes=modes, functions=functions, xi_sq=xi_sq)
