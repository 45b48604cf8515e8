"""Split-step solver for i dphi/dt = -1/2 Laplacian phi + 2 W phi + 2 g |phi|^2 phi."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteField
from .grids import from_fft_order, spectral_gradient, to_fft_order, wavenumbers

GP_DT = 5e-5


@dataclass
class GPField:
    """Periodic field phi on a box of side L (centered sample order)."""

    phi: np.ndarray
    L: float

    @property
    def cell(self) -> float:
        return float(np.prod([self.L / n for n in self.phi.shape]))

    @property
    def mass(self) -> float:
        return float(np.sum(np.abs(self.phi) ** 2) * self.cell)

    def copy(self) -> "GPField":
        return GPField(self.phi.copy(), self.L)


def _k_squared(shape, length):
    ks = np.meshgrid(*[wavenumbers(n, length) for n in shape], indexing="ij")
    return sum(k ** 2 for k in ks)


def _as_array(W, phi: GPField) -> np.ndarray:
    if W is None:
        return np.zeros(phi.phi.shape)
    W = np.asarray(W, dtype=float)
    return np.broadcast_to(W, phi.phi.shape)


class GPPropagator:
    """Cached Strang step for a fixed (W, g, dt)."""

    def __init__(self, shape, L: float, W, g: float, dt: float):
        self.dt = dt
        self.g = g
        self.W = np.zeros(shape) if W is None else np.broadcast_to(np.asarray(W, dtype=float), shape)
        k2 = _k_squared(shape, L)
        self.half_kinetic = np.exp(-0.5j * dt * 0.5 * k2)
        self.full_kinetic = np.exp(-1j * dt * 0.5 * k2)

    def kinetic(self, phi: np.ndarray) -> np.ndarray:
        return from_fft_order(np.fft.ifftn(self.half_kinetic * np.fft.fftn(to_fft_order(phi))))

    def phase(self, phi: np.ndarray) -> np.ndarray:
        return phi * np.exp(-1j * self.dt * (2 * self.W + 2 * self.g * np.abs(phi) ** 2))

    def __call__(self, phi: np.ndarray) -> np.ndarray:
        return self.kinetic(self.phase(self.kinetic(phi)))

    def iterate(self, phi: np.ndarray, n_steps: int, wanted):
        """Yield (k, phi_k) after each step k with ``wanted(k)`` true.

        Adjacent kinetic half steps are merged into one full step, which
        halves the FFT count and with it the accumulated round-off in the mass.
        """
        spec = self.half_kinetic * np.fft.fftn(to_fft_order(phi))
        for k in range(1, n_steps + 1):
            spec = np.fft.fftn(to_fft_order(self.phase(from_fft_order(np.fft.ifftn(spec)))))
            if wanted(k):
                yield k, from_fft_order(np.fft.ifftn(self.half_kinetic * spec))
            spec *= self.full_kinetic


def gp_step(phi: GPField, W, g: float, dt: float) -> GPField:
    """One Strang step: half kinetic, exact potential and nonlinear phase, half kinetic."""
    prop = GPPropagator(phi.phi.shape, phi.L, W, g, dt)
    return GPField(prop(phi.phi), phi.L)


def gp_energy(phi: GPField, W, g: float) -> float:
    """sum (1/2 |grad phi|^2 + 2 W |phi|^2 + g |phi|^4) cell."""
    grads = spectral_gradient(phi.phi, phi.L)
    dens = np.abs(phi.phi) ** 2
    w = _as_array(W, phi)
    integrand = 0.5 * sum(np.abs(gr) ** 2 for gr in grads) + 2 * w * dens + g * dens ** 2
    return float(np.sum(integrand) * phi.cell)


def gp_h1_norm(phi: GPField) -> float:
    grads = spectral_gradient(phi.phi, phi.L)
    return float(np.sqrt((np.sum(np.abs(phi.phi) ** 2) + sum(np.sum(np.abs(gr) ** 2) for gr in grads)) * phi.cell))


@dataclass
class GPTrajectory:
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    h1_norm: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)
    final: GPField | None = None

    def rows(self):
        for i, t in enumerate(self.times):
            yield {"t": t, "mass": self.mass[i], "energy": self.energy[i], "h1_norm": self.h1_norm[i]}


def gp_evolve(phi0: GPField, W, g: float, T: float, dt: float = GP_DT, checkpoints=(),
              diag_stride: int = 1) -> GPTrajectory:
    """Iterate gp_step to time T with diagnostics and checkpoints.

    The step count is round(T/dt); the step is shrunk so it divides T.
    """
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    n_steps = int(round(T / dt)) if T > 0 else 0
    dt_eff = T / n_steps if n_steps else dt
    prop = GPPropagator(phi0.phi.shape, phi0.L, W, g, dt_eff)
    check_steps = {0: 0.0, n_steps: T}
    for tc in checkpoints:
        if tc > T + 1e-12:
            raise ValueError(f"checkpoint {tc} beyond T = {T}")
        check_steps[int(round(tc / dt_eff)) if n_steps else 0] = tc
    traj = GPTrajectory()

    def record(t, f):
        traj.times.append(t)
        traj.mass.append(f.mass)
        traj.energy.append(gp_energy(f, W, g))
        traj.h1_norm.append(gp_h1_norm(f))

    phi = phi0.phi.astype(complex)
    current = GPField(phi, phi0.L)
    record(0.0, current)
    traj.checkpoints[0.0] = current.copy()
    recorded = lambda k: k % diag_stride == 0 or k == n_steps
    for k, phi in prop.iterate(phi, n_steps, lambda k: recorded(k) or k in check_steps):
        current = GPField(phi, phi0.L)
        if not np.all(np.isfinite(phi)):
            raise NonFiniteField(f"GP field became non-finite at step {k}; reduce dt")
        if recorded(k):
            record(k * dt_eff, current)
        if k in check_steps:
            traj.checkpoints[check_steps[k]] = current.copy()
    if not np.all(np.isfinite(phi)):
        raise NonFiniteField("GP field became non-finite; reduce dt")
    traj.final = GPField(phi, phi0.L)
    return traj


def free_gaussian(x: np.ndarray, t: float, width: float, L: float, images: int = 4) -> np.ndarray:
    """Exact free evolution of a normalized Gaussian under -1/2 Laplacian, periodized."""
    s = 1 + 1j * t / width ** 2
    out = np.zeros_like(x, dtype=complex)
    for n in range(-images, images + 1):
        y = x + n * L
        out += np.exp(-y ** 2 / (2 * width ** 2 * s))
    return (np.pi * width ** 2) ** -0.25 * out / np.sqrt(s)
