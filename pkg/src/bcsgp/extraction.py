"""Macroscopic pair wavefunction psi_t and the residual xi_t of a pairing kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch
from .grids import MacroGrid, spectral_gradient
from .state import TAIL_TOL, com_remap, inverse_com_remap, pair_exponent, resample_bound_state
from .twobody import GroundState


def l2_norm(field: np.ndarray, length: float) -> float:
    """Discrete L2 norm on a periodic box of side ``length``."""
    cell = np.prod([length / n for n in field.shape])
    return float(np.sqrt(np.sum(np.abs(field) ** 2) * cell))


def h1_norm(field: np.ndarray, length: float) -> float:
    """sqrt(||f||^2 + ||grad f||^2) with spectral derivatives."""
    grads = spectral_gradient(field, length)
    total = l2_norm(field, length) ** 2 + sum(l2_norm(g, length) ** 2 for g in grads)
    return float(np.sqrt(total))


@dataclass
class ExtractionResult:
    """psi_t on the 2N half-grid together with residual norms.

    ``xi`` holds e^{-i t E_b/h^2} alpha~_t - h^-(d-1) psi_t alpha0(r/h) on
    the (X, r) lattice (zero off-lattice). ``mode_norm_sq`` is the discrete
    norm of alpha0(./h) on each parity class of the half-grid.
    """

    psi: np.ndarray
    xi: np.ndarray
    xi_l2_sq: float
    xi_h1_sq: float
    psi_l2: float
    psi_h1: float
    phase_reference: float
    mode_norm_sq: np.ndarray
    resampling_residual: float
    grid: MacroGrid
    t: float

    def row(self) -> dict:
        return {"t": self.t, "h": self.grid.h, "psi_l2": self.psi_l2, "psi_h1": self.psi_h1,
                "xi_l2_sq": self.xi_l2_sq, "xi_h1_sq": self.xi_h1_sq}


_MODE_CACHE: dict = {}


def bound_state_on_grid(gs: GroundState, grid: MacroGrid, tail_tol: float = TAIL_TOL) -> np.ndarray:
    key = (id(gs), grid, tail_tol)
    if key not in _MODE_CACHE:
        if len(_MODE_CACHE) > 16:
            _MODE_CACHE.clear()
        _MODE_CACHE[key] = resample_bound_state(gs, grid, tail_tol)
    return _MODE_CACHE[key]


def _parity_masks(n: int):
    offsets = np.arange(n) - n // 2
    return offsets % 2 == 0, offsets % 2 == 1


def extract_psi(alpha: np.ndarray, gs: GroundState, h: float, t: float, grid: MacroGrid,
                tail_tol: float = TAIL_TOL) -> ExtractionResult:
    """Project the pairing onto the bound-state mode at every center of mass.

    psi_t(X) = e^{-i t E_b/h^2} h^(d-1) <a, alpha~_t(X, .)> / <a, a>, where
    a = alpha0(./h) restricted to the lattice offsets that share the parity
    of X. This is the orthogonal projection, so xi is exactly orthogonal to
    a and the norm split is exact. The bound-state mode rotates as
    e^{+i t E_b/h^2} under the pair evolution, so the prefactor removes the
    fast phase; ``phase_reference`` records t E_b/h^2.
    """
    grid.check_resolution()
    n = grid.N
    a = bound_state_on_grid(gs, grid, tail_tol)
    field = com_remap(alpha / grid.cell, grid)
    even, odd = _parity_masks(n)
    theta = t * gs.E_b / h ** 2
    phase = np.exp(-1j * theta)
    p = pair_exponent(grid.d)

    vals = field.values * phase
    psi = np.empty(2 * n, dtype=complex)
    mode_norm_sq = np.empty(2)
    for parity, sel in ((0, even), (1, odd)):
        aa = a[sel]
        norm_sq = float(aa @ aa)
        rows = slice(parity, None, 2)
        psi[rows] = (vals[rows][:, sel] @ aa) / norm_sq * h ** p
        mode_norm_sq[parity] = norm_sq * 2 * grid.spacing
    xi = np.where(field.mask, vals - h ** (-p) * np.outer(psi, a), 0.0)

    cell = grid.spacing ** 2
    xi_l2_sq = float(np.sum(np.abs(xi) ** 2) * cell)
    xi_kernel = inverse_com_remap(type(field)(xi, field.mask, grid))
    dx, dy = spectral_gradient(xi_kernel, grid.L)
    grad_X = dx + dy
    grad_r = 0.5 * (dx - dy)
    xi_h1_sq = xi_l2_sq + float(np.sum(np.abs(grad_X) ** 2 + np.abs(grad_r) ** 2) * cell)

    return ExtractionResult(
        psi=psi, xi=xi, xi_l2_sq=xi_l2_sq, xi_h1_sq=xi_h1_sq,
        psi_l2=l2_norm(psi, grid.L), psi_h1=h1_norm(psi, grid.L),
        phase_reference=theta, mode_norm_sq=mode_norm_sq,
        resampling_residual=float(np.max(np.abs(mode_norm_sq / h - 1))),
        grid=grid, t=t)


def lattice_mask(grid: MacroGrid) -> np.ndarray:
    """True where (X_n, r_c) is a point of the product-grid lattice."""
    n = np.arange(2 * grid.N)[:, None]
    c = np.arange(grid.N)[None, :] - grid.N // 2
    return (n - c) % 2 == 0


def reassemble(result: ExtractionResult, gs: GroundState, tail_tol: float = TAIL_TOL) -> np.ndarray:
    """alpha~_t rebuilt from psi_t and xi_t (kernel values on the lattice)."""
    grid = result.grid
    a = bound_state_on_grid(gs, grid, tail_tol)
    body = grid.h ** (-pair_exponent(grid.d)) * np.outer(result.psi, a) + result.xi
    return np.where(lattice_mask(grid), body, 0.0) * np.exp(1j * result.phase_reference)


def compare_to_gp(result: ExtractionResult, phi, phi_length: float | None = None) -> float:
    """||psi_t - phi_t||_2 on the grid of ``phi``.

    A GP field on the N-point grid is compared with psi_t decimated to the
    even half-grid points, which are exactly the N-point grid; a field on
    the 2N half-grid is compared pointwise.
    """
    from .gp import GPField

    if isinstance(phi, GPField):
        values, length = phi.phi, phi.L
    else:
        values, length = np.asarray(phi), phi_length if phi_length is not None else result.grid.L
    if abs(length - result.grid.L) > 1e-12 * result.grid.L:
        raise GridMismatch(f"box lengths differ: {length} vs {result.grid.L}")
    if values.shape[0] == result.psi.shape[0]:
        psi = result.psi
    elif 2 * values.shape[0] == result.psi.shape[0]:
        psi = result.psi[::2]
    else:
        raise GridMismatch(f"cannot align {values.shape[0]} samples with {result.psi.shape[0]}")
    return l2_norm(psi - values, result.grid.L)
