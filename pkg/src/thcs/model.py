"""Parameter and state containers shared by dynamics, diagnostics and I/O."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .spectral import GridMismatchError, SpectralField, WaveGrid, inverse_laplacian


@dataclass(frozen=True)
class ModelParams:
    nu: float
    prandtl: float
    n_squared: float
    grid: WaveGrid

    def __post_init__(self):
        for name in ("nu", "prandtl", "n_squared"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")

    @property
    def kappa(self) -> float:
        """Density diffusivity nu / Pr."""
        return self.nu / self.prandtl


@dataclass(frozen=True)
class State:
    """Vorticity and density fluctuation at one instant.

    The stream function is never stored; ``psi`` recovers it as
    the inverse Laplacian of ``omega``.
    """

    omega: SpectralField
    rho: SpectralField
    time: float = 0.0

    def __post_init__(self):
        if self.omega.grid != self.rho.grid:
            raise GridMismatchError("omega and rho live on different grids")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    @property
    def grid(self) -> WaveGrid:
        return self.omega.grid

    @property
    def psi(self) -> SpectralField:
        return inverse_laplacian(self.omega)

    @classmethod
    def zeros(cls, grid: WaveGrid, time: float = 0.0) -> "State":
        z = SpectralField.zeros(grid)
        return cls(z, z, time)

    def at(self, time: float) -> "State":
        return replace(self, time=float(time))

    def check_grid(self, params: ModelParams) -> None:
        if self.grid != params.grid:
            raise GridMismatchError(
                f"state grid N={self.grid.n} differs from params grid N={params.grid.n}"
            )
