"""Periodic grids and the spectral helpers shared by every solver.

All fields are stored in *centered* order: along each axis sample ``j``
sits at ``-L/2 + j*spacing``, so the origin is sample ``N//2`` and the
reflection ``s -> -s`` maps index ``j`` to ``(N - j) % N``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class MicroGrid:
    """Relative-coordinate grid on the unit (pair-size) scale."""

    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not _is_power_of_two(self.N):
            raise ValueError(f"N must be a power of two, got {self.N}")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def cell(self) -> float:
        return self.spacing ** self.d

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    def axis(self) -> np.ndarray:
        return centered_axis(self.N, self.L)

    def coords(self) -> list:
        """Coordinate arrays, one per axis, broadcast to the full shape."""
        return np.meshgrid(*([self.axis()] * self.d), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c ** 2 for c in self.coords()))

    def k_squared(self) -> np.ndarray:
        """|k|^2 on the FFT (unshifted) frequency layout."""
        k = wavenumbers(self.N, self.L)
        ks = np.meshgrid(*([k] * self.d), indexing="ij")
        return sum(c ** 2 for c in ks)

    def boundary_mask(self) -> np.ndarray:
        """True on samples that touch the faces of the periodic box."""
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.d):
            sl = [slice(None)] * self.d
            sl[ax] = 0
            mask[tuple(sl)] = True
        return mask

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "N": self.N}


@dataclass(frozen=True)
class MacroGrid:
    """Product grid for the one-body coordinates x and y.

    ``h`` is the pair size in macroscopic units; ``rho_min`` is the minimal
    number of samples per pair size.
    """

    d: int
    L: float
    N: int
    h: float
    rho_min: float = 8.0

    def __post_init__(self):
        if not _is_power_of_two(self.N):
            raise ValueError(f"N must be a power of two, got {self.N}")
        if not 0 < self.h < 1:
            raise ValueError(f"h must lie in (0, 1), got {self.h}")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def cell(self) -> float:
        return self.spacing ** self.d

    @property
    def points_per_pair(self) -> float:
        return self.h / self.spacing

    def check_resolution(self):
        if self.spacing > self.h / self.rho_min * (1 + 1e-12):
            raise ResolutionError(
                f"grid spacing {self.spacing:.4g} exceeds h/rho_min = "
                f"{self.h / self.rho_min:.4g}; increase N or h")

    def axis(self) -> np.ndarray:
        return centered_axis(self.N, self.L)

    def half_axis(self) -> np.ndarray:
        """Center-of-mass lattice with spacing/2 (2N points)."""
        return centered_axis(2 * self.N, self.L)

    def wavenumbers(self) -> np.ndarray:
        return wavenumbers(self.N, self.L)

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "N": self.N, "h": self.h}


def centered_axis(n: int, length: float) -> np.ndarray:
    return (np.arange(n) - n // 2) * (length / n)


def wavenumbers(n: int, length: float) -> np.ndarray:
    """Angular wavenumbers in FFT order."""
    return 2 * np.pi * np.fft.fftfreq(n, d=length / n)


def to_fft_order(f: np.ndarray, axes=None) -> np.ndarray:
    return np.fft.ifftshift(f, axes=axes)


def from_fft_order(f: np.ndarray, axes=None) -> np.ndarray:
    return np.fft.fftshift(f, axes=axes)


def spectral_gradient(f: np.ndarray, length: float) -> list:
    """Spectral partial derivatives of a centered periodic field."""
    out = []
    for ax in range(f.ndim):
        k = wavenumbers(f.shape[ax], length)
        shape = [1] * f.ndim
        shape[ax] = -1
        fh = np.fft.fft(to_fft_order(f, axes=ax), axis=ax)
        out.append(from_fft_order(np.fft.ifft(1j * k.reshape(shape) * fh, axis=ax), axes=ax))
    return out


def spectral_interpolate(values: np.ndarray, length: float, targets: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of 1D centered samples.

    The Nyquist coefficient is split evenly between +k and -k so real
    data stays real and even data stays even.
    """
    n = values.shape[0]
    coeffs = np.fft.fft(to_fft_order(values)) / n
    k = wavenumbers(n, length)
    weights = np.ones(n)
    weights[n // 2] = 0.5
    targets = np.asarray(targets, dtype=float)
    # samples sit at r_j = -L/2 + j*dx, so shift the origin to r = 0 (index n//2)
    phase = np.exp(1j * np.outer(targets.ravel(), k))
    cos_part = np.cos(k[n // 2] * targets.ravel())
    out = phase[:, : n // 2] @ coeffs[: n // 2] + phase[:, n // 2 + 1:] @ coeffs[n // 2 + 1:]
    out = out + coeffs[n // 2] * cos_part
    out = out.reshape(targets.shape)
    if np.isrealobj(values):
        out = out.real
    return out


def spectral_upsample(f: np.ndarray, factor: int = 2) -> np.ndarray:
    """Zero-pad the spectrum of a centered 1D periodic field."""
    n = f.shape[0]
    m = n * factor
    fh = np.fft.fft(to_fft_order(f))
    gh = np.zeros(m, dtype=complex)
    gh[: n // 2] = fh[: n // 2]
    gh[m - n // 2 + 1:] = fh[n // 2 + 1:]
    gh[n // 2] = 0.5 * fh[n // 2]
    gh[m - n // 2] = 0.5 * fh[n // 2]
    out = from_fft_order(np.fft.ifft(gh)) * factor
    return out.real if np.isrealobj(f) else out
