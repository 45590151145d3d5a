"""Truncated Fourier calculus on the doubly periodic unit square.

Fields are stored as full complex coefficient arrays ``c[jz, jx]`` in FFT
ordering, normalised so that

    u(x, z) = sum_k c_k exp(2 pi i (k_x x + k_z z)).

Collocation values follow the same layout: ``values[iz, ix]`` is the sample
at ``(x, z) = (ix / N, iz / N)``, so a row-major flattening is x-fastest.

Every field is zero-mean and truncated to ``max(|k_x|, |k_z|) <= N // 3``,
which keeps quadratic products free of aliasing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
LAMBDA1 = 4.0 * np.pi**2


class GridMismatchError(ValueError):
    pass


class HermitianSymmetryError(ValueError):
    pass


def fft2(values: np.ndarray) -> np.ndarray:
    return sfft.fft2(values, norm="forward")


def ifft2(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifft2(coeffs, norm="forward")


@dataclass(frozen=True)
class WaveGrid:
    """Collocation grid and integer wavevectors for an ``N x N`` periodic box."""

    resolution: int

    def __post_init__(self):
        n = self.resolution
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError("resolution must be an integer")
        if n < 16 or n % 2:
            raise ValueError(f"resolution must be even and >= 16, got {n}")
        if n & (n - 1):
            raise ValueError(f"resolution must be a power of two, got {n}")

    @property
    def n(self) -> int:
        return self.resolution

    @property
    def domain_period(self) -> float:
        return 1.0

    @property
    def dealias_cutoff(self) -> int:
        return self.resolution // 3

    @property
    def spacing(self) -> float:
        return 1.0 / self.resolution

    # The arrays below are shared between threads and never written.
    @cached_property
    def kx(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n).astype(int)
        return _frozen(np.broadcast_to(k[None, :], (self.n, self.n)).copy())

    @cached_property
    def kz(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n).astype(int)
        return _frozen(np.broadcast_to(k[:, None], (self.n, self.n)).copy())

    @cached_property
    def k_squared(self) -> np.ndarray:
        return _frozen((self.kx**2 + self.kz**2).astype(float))

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """-4 pi^2 |k|^2, the eigenvalue of the Laplacian per mode."""
        return _frozen(-LAMBDA1 * self.k_squared)

    @cached_property
    def inverse_laplacian_symbol(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        nz = self.k_squared > 0
        out[nz] = -1.0 / (LAMBDA1 * self.k_squared[nz])
        return _frozen(out)

    @cached_property
    def ikx(self) -> np.ndarray:
        return _frozen(1j * TWO_PI * self.kx)

    @cached_property
    def ikz(self) -> np.ndarray:
        return _frozen(1j * TWO_PI * self.kz)

    @cached_property
    def mask(self) -> np.ndarray:
        """Retained modes: the two-thirds rule with the mean removed."""
        m = np.maximum(np.abs(self.kx), np.abs(self.kz)) <= self.dealias_cutoff
        m = m.copy()
        m[0, 0] = False
        return _frozen(m)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Collocation coordinates ``(x, z)`` as ``N x N`` arrays."""
        s = np.arange(self.n) / self.n
        x, z = np.meshgrid(s, s, indexing="xy")
        return _frozen(x), _frozen(z)

    @property
    def lambda1(self) -> float:
        return LAMBDA1

    def project(self, coeffs: np.ndarray) -> np.ndarray:
        """Zero every mode outside the mask, including the mean."""
        return np.where(self.mask, coeffs, 0.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Zero-mean, dealiased, real field held by its Fourier coefficients."""

    grid: WaveGrid
    coefficients: np.ndarray
    # Collocation values known to represent this field (e.g. read from disk).
    _values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        n = self.grid.n
        if c.shape != (n, n):
            raise ValueError(f"coefficients must have shape {(n, n)}, got {c.shape}")
        c = self.grid.project(c)
        object.__setattr__(self, "coefficients", _frozen(c))

    @classmethod
    def zeros(cls, grid: WaveGrid) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    def _like(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self._like(self.coefficients + other.coefficients)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self._like(self.coefficients - other.coefficients)

    def __neg__(self) -> "SpectralField":
        return self._like(-self.coefficients)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self._like(self.coefficients * float(scalar))

    __rmul__ = __mul__

    def allclose(self, other: "SpectralField", atol: float = 1e-12) -> bool:
        _check_same_grid(self, other)
        return bool(np.allclose(self.coefficients, other.coefficients, rtol=0.0, atol=atol))

    def inner(self, other: "SpectralField") -> float:
        """L^2 pairing over the unit square."""
        _check_same_grid(self, other)
        return inner_coeffs(self.coefficients, other.coefficients)

    @property
    def hermitian_defect(self) -> float:
        c = self.coefficients
        flipped = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
        return float(np.max(np.abs(c - flipped)))


@dataclass(frozen=True, eq=False)
class PhysicalField:
    grid: WaveGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if v.shape == (n * n,):
            v = v.reshape(n, n)
        if v.shape != (n, n):
            raise ValueError(f"values must have shape {(n, n)}, got {v.shape}")
        object.__setattr__(self, "values", _frozen(v.copy()))

    @classmethod
    def from_function(cls, grid: WaveGrid, fn) -> "PhysicalField":
        x, z = grid.coordinates
        return cls(grid, fn(x, z))


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: N={a.grid.n} vs N={b.grid.n}")


def inner_coeffs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(b, a)))


def forward_transform(p: PhysicalField) -> SpectralField:
    coeffs = fft2(p.values)
    mean = coeffs[0, 0].real
    if mean != 0.0:
        logger.debug("forward_transform: projected out mean %.3e", mean)
    return SpectralField(p.grid, coeffs)


def inverse_transform(s: SpectralField) -> PhysicalField:
    if s._values is not None:
        return PhysicalField(s.grid, s._values)
    values = ifft2(s.coefficients)
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > 1e-9 * max(1.0, float(np.max(np.abs(values.real)))):
        raise HermitianSymmetryError(
            f"imaginary residue {residue:.3e}: coefficients are not Hermitian-symmetric"
        )
    return PhysicalField(s.grid, values.real)


def partial_derivative(s: SpectralField, axis: str, order: int = 1) -> SpectralField:
    if axis not in ("x", "z"):
        raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")
    if int(order) != order or order < 1:
        raise ValueError(f"order must be a positive integer, got {order}")
    symbol = s.grid.ikx if axis == "x" else s.grid.ikz
    return SpectralField(s.grid, s.coefficients * symbol**int(order))


def laplacian(s: SpectralField) -> SpectralField:
    return SpectralField(s.grid, s.coefficients * s.grid.laplacian_symbol)


def inverse_laplacian(s: SpectralField) -> SpectralField:
    return SpectralField(s.grid, s.coefficients * s.grid.inverse_laplacian_symbol)


def jacobian_coeffs(grid: WaveGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dealiased coefficients of J(a, b) = a_x b_z - a_z b_x."""
    derivs = np.stack([grid.ikx * a, grid.ikz * a, grid.ikx * b, grid.ikz * b])
    ax, az, bx, bz = ifft2(derivs).real
    return grid.project(fft2(ax * bz - az * bx))


def jacobian(a: SpectralField, b: SpectralField) -> SpectralField:
    _check_same_grid(a, b)
    return SpectralField(a.grid, jacobian_coeffs(a.grid, a.coefficients, b.coefficients))


def sobolev_norm_coeffs(grid: WaveGrid, coeffs: np.ndarray, order: float) -> float:
    weight = (LAMBDA1 * grid.k_squared) ** order if order else 1.0
    return float(np.sqrt(np.sum(weight * np.abs(coeffs) ** 2)))


def sobolev_norm(s: SpectralField, order: float) -> float:
    """Homogeneous Sobolev seminorm; order 0, 1, 2, 3 give ||u||, ||grad u||,
    ||lap u|| and ||grad lap u||."""
    if order < 0:
        raise ValueError(f"order must be nonnegative, got {order}")
    return sobolev_norm_coeffs(s.grid, s.coefficients, order)


def h1_norm(s: SpectralField) -> float:
    return float(np.hypot(sobolev_norm(s, 0), sobolev_norm(s, 1)))


def h2_norm(s: SpectralField) -> float:
    """Full H^2 norm, (||u||^2 + ||grad u||^2 + ||lap u||^2)^(1/2)."""
    return float(np.sqrt(sum(sobolev_norm(s, r) ** 2 for r in (0, 1, 2))))


def lp_norm(s: SpectralField, p: int) -> float:
    """L^p norm by collocation quadrature, exact for band-limited fields.

    For p=4 the field is resampled on a 2N grid so that u^4 is resolved.
    """
    if p == 2:
        v = inverse_transform(s).values
        return float(np.sqrt(np.mean(v**2)))
    if p == 4:
        v = _upsample(s.coefficients, 2 * s.grid.n)
        return float(np.mean(v**4) ** 0.25)
    raise ValueError(f"unsupported p={p}; only 2 and 4 are available")


def _upsample(coeffs: np.ndarray, m: int) -> np.ndarray:
    n = coeffs.shape[0]
    padded = np.zeros((m, m), dtype=complex)
    k = np.fft.fftfreq(n, 1.0 / n).astype(int)
    padded[np.ix_(k % m, k % m)] = coeffs
    return ifft2(padded).real


def fractional_operator_norm(s: SpectralField, gamma: float, nu: float) -> float:
    """||A^gamma u|| for A = -nu * Laplacian."""
    if not 0.0 <= gamma <= 1.5:
        raise ValueError(f"gamma must lie in [0, 3/2], got {gamma}")
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return fractional_norm_coeffs(s.grid, s.coefficients, gamma, nu)


def fractional_norm_coeffs(grid: WaveGrid, coeffs: np.ndarray, gamma: float, nu: float) -> float:
    weight = (nu * LAMBDA1 * grid.k_squared) ** (2.0 * gamma) if gamma else 1.0
    return float(np.sqrt(np.sum(weight * np.abs(coeffs) ** 2)))


@lru_cache(maxsize=None)
def grid_for(resolution: int) -> WaveGrid:
    return WaveGrid(int(resolution))


def random_field(
    grid: WaveGrid,
    rng: np.random.Generator,
    band: int | None = None,
    slope: float = 0.0,
) -> SpectralField:
    """Random real field with modes ``1 <= max(|k_x|, |k_z|) <= band`` and an
    amplitude spectrum falling like ``|k|^-slope``."""
    band = grid.dealias_cutoff if band is None else min(int(band), grid.dealias_cutoff)
    if band < 1:
        raise ValueError("band must be at least 1")
    noise = fft2(rng.standard_normal((grid.n, grid.n)))
    kinf = np.maximum(np.abs(grid.kx), np.abs(grid.kz))
    filt = np.where(kinf <= band, 1.0, 0.0)
    with np.errstate(divide="ignore"):
        filt = filt * np.where(grid.k_squared > 0, grid.k_squared ** (-slope / 2.0), 0.0)
    return SpectralField(grid, noise * filt)


def single_mode(grid: WaveGrid, kx: int, kz: int, amplitude: float = 1.0,
                parity: tuple[str, str] = ("sine", "sine")) -> SpectralField:
    """``amplitude * P(2 pi kx x) * Q(2 pi kz z)`` with P, Q in {sin, cos}."""
    funcs = {"sine": np.sin, "cosine": np.cos}
    try:
        px, pz = funcs[parity[0]], funcs[parity[1]]
    except KeyError as exc:
        raise ValueError(f"parity must be 'sine' or 'cosine', got {parity}") from exc
    x, z = grid.coordinates
    values = amplitude * px(TWO_PI * kx * x) * pz(TWO_PI * kz * z)
    return forward_transform(PhysicalField(grid, values))
