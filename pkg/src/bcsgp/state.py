"""Discretized BCS states on a periodic macroscopic grid (d = 1 kernels).

Kernels are stored as *operator matrices*: the kernel value times the
cell volume. Operator composition is then a plain matrix product, traces
are matrix traces and Hilbert-Schmidt norms are Frobenius norms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import InsufficientDilution, MicroTailError, PurityFailure
from .grids import MacroGrid, spectral_interpolate, spectral_upsample
from .potentials import ExternalPotential, PotentialSpec
from .twobody import GroundState

OP_MARGIN = 0.05
PURITY_TOL = 1e-8
TAIL_TOL = 1e-8


@dataclass
class BCSState:
    """One-body density ``gamma`` and pairing ``alpha`` as operator matrices."""

    gamma: np.ndarray
    alpha: np.ndarray
    grid: MacroGrid

    def copy(self) -> "BCSState":
        return BCSState(self.gamma.copy(), self.alpha.copy(), self.grid)

    def trace(self) -> float:
        return float(np.trace(self.gamma).real)

    def gamma_kernel(self) -> np.ndarray:
        return self.gamma / self.grid.cell

    def alpha_kernel(self) -> np.ndarray:
        return self.alpha / self.grid.cell

    def symmetry_defect(self) -> float:
        """Largest of the alpha-symmetry and gamma-Hermiticity defects, relative."""
        a = np.max(np.abs(self.alpha - self.alpha.T)) / max(np.max(np.abs(self.alpha)), 1e-300)
        g = np.max(np.abs(self.gamma - self.gamma.conj().T)) / max(np.max(np.abs(self.gamma)), 1e-300)
        return float(max(a, g)) if np.any(self.alpha) or np.any(self.gamma) else 0.0

    def enforce_symmetry(self) -> "BCSState":
        return BCSState(0.5 * (self.gamma + self.gamma.conj().T), 0.5 * (self.alpha + self.alpha.T), self.grid)

    def purity_defect(self) -> float:
        """||Gamma^2 - Gamma||_HS / ||Gamma||_HS from the 2x2 block structure."""
        g, a = self.gamma, self.alpha
        n = g.shape[0]
        top_left = g @ g + a @ a.conj() - g
        top_right = g @ a - a @ g.conj()
        defect_sq = 2 * np.linalg.norm(top_left) ** 2 + 2 * np.linalg.norm(top_right) ** 2
        norm_sq = (np.linalg.norm(g) ** 2 + 2 * np.linalg.norm(a) ** 2
                   + np.linalg.norm(np.eye(n) - g.conj()) ** 2)
        return float(np.sqrt(defect_sq / norm_sq))

    def block_matrix(self) -> np.ndarray:
        """The 2N x 2N operator Gamma = [[gamma, alpha], [conj(alpha), 1 - conj(gamma)]]."""
        n = self.gamma.shape[0]
        return np.block([[self.gamma, self.alpha],
                         [self.alpha.conj(), np.eye(n) - self.gamma.conj()]])


def signed_offsets(n: int) -> np.ndarray:
    """Index offsets m in [-n/2, n/2) in ascending order."""
    return np.arange(n) - n // 2


def relative_index_matrix(n: int) -> np.ndarray:
    """Signed offset (j - l) wrapped into [-n/2, n/2) for every pair (j, l)."""
    j = np.arange(n)
    return (j[:, None] - j[None, :] + n // 2) % n - n // 2


def interaction_matrix(V: PotentialSpec, grid: MacroGrid) -> np.ndarray:
    """V((x - y)/h) on the periodic product grid."""
    m = relative_index_matrix(grid.N)
    values = V.profile(signed_offsets(grid.N) * grid.spacing / grid.h)
    # cut the tail at machine precision: products of a far tail with alpha
    # underflow to subnormals, which slow every BLAS product down several times
    values = np.where(np.abs(values) < np.finfo(float).eps * np.max(np.abs(values), initial=0.0), 0.0, values)
    return values[m + grid.N // 2]


@dataclass
class PairField:
    """Pair kernel in center-of-mass and relative coordinates.

    ``values[n, c]`` holds alpha(X_n + r_c/2, X_n - r_c/2) with X_n on the
    2N-point half-grid and r_c = (c - N/2) * spacing. Only entries where n
    and the offset index share parity are lattice points (``mask``); the
    others are zero.
    """

    values: np.ndarray
    mask: np.ndarray
    grid: MacroGrid

    @property
    def X(self) -> np.ndarray:
        return self.grid.half_axis()

    @property
    def r(self) -> np.ndarray:
        return signed_offsets(self.grid.N) * self.grid.spacing


def _remap_indices(n: int):
    j = np.arange(n)[:, None]
    m = signed_offsets(n)[None, :]
    rows = np.broadcast_to(j, (n, n))
    cols = (j - m) % n
    X_index = (2 * j - m) % (2 * n)
    c_index = np.broadcast_to(m + n // 2, (n, n))
    return rows, cols, X_index, c_index


def com_remap(kernel: np.ndarray, grid: MacroGrid) -> PairField:
    """Exact index remap of a kernel alpha(x, y) to alpha~(X, r)."""
    n = grid.N
    rows, cols, X_index, c_index = _remap_indices(n)
    values = np.zeros((2 * n, n), dtype=complex)
    mask = np.zeros((2 * n, n), dtype=bool)
    values[X_index, c_index] = kernel[rows, cols]
    mask[X_index, c_index] = True
    return PairField(values, mask, grid)


def inverse_com_remap(field: PairField) -> np.ndarray:
    n = field.grid.N
    rows, cols, X_index, c_index = _remap_indices(n)
    kernel = np.zeros((n, n), dtype=complex)
    kernel[rows, cols] = field.values[X_index, c_index]
    return kernel


def resample_bound_state(gs: GroundState, grid: MacroGrid, tail_tol: float = TAIL_TOL) -> np.ndarray:
    """alpha0(r/h) on the signed relative offsets of the macroscopic grid.

    Beyond the microscopic box the bound state is taken to be zero; the
    microscopic tail check guarantees it is below tail_tol there.
    """
    if gs.grid.d != 1:
        raise NotImplementedError("kernel dynamics is implemented for d = 1")
    s = signed_offsets(grid.N) * grid.spacing / grid.h
    inside = np.abs(s) < gs.grid.L / 2
    out = np.zeros_like(s)
    out[inside] = spectral_interpolate(gs.alpha0, gs.grid.L, s[inside])
    # the sample at r = -L/2 is the periodic image of +L/2, where the tail must be small
    edge = abs(out[0])
    if edge > tail_tol:
        raise MicroTailError(
            f"alpha0(r/h) is {edge:.2e} at the edge of the macroscopic box (tail_tol {tail_tol:.1e}); "
            "enlarge L_X or decrease h")
    return out


def pair_exponent(d: int) -> int:
    """Power p in alpha = h^-p psi(X) alpha0(r/h); p = d - 1 keeps the GP limit."""
    return d - 1


def half_grid_values(psi0: np.ndarray, grid: MacroGrid) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape == (2 * grid.N,):
        return psi0
    if psi0.shape == (grid.N,):
        return spectral_upsample(psi0, 2)
    raise ValueError(f"psi0 must have N or 2N samples, got shape {psi0.shape}")


def build_pairing(psi0: np.ndarray, gs: GroundState, h: float, grid: MacroGrid,
                  tail_tol: float = TAIL_TOL) -> np.ndarray:
    """Pairing operator for alpha(x,y) = h^-(d-1) psi0((x+y)/2) alpha0((x-y)/h).

    ``psi0`` is given on the 2N half-grid, or on the N-point grid in which
    case it is spectrally upsampled. Returns the operator matrix.
    """
    if abs(h - grid.h) > 1e-14:
        raise ValueError("h does not match the grid")
    grid.check_resolution()
    psi_half = half_grid_values(psi0, grid)
    a = resample_bound_state(gs, grid, tail_tol)
    n = grid.N
    rows, cols, X_index, c_index = _remap_indices(n)
    kernel = np.zeros((n, n), dtype=complex)
    kernel[rows, cols] = h ** (-pair_exponent(grid.d)) * psi_half[X_index] * a[c_index]
    kernel = 0.5 * (kernel + kernel.T)
    return kernel * grid.cell


def closure_function(x: np.ndarray) -> np.ndarray:
    """(1 - sqrt(1 - 4x))/2 written without cancellation."""
    x = np.clip(x, 0.0, 0.25)
    return 2 * x / (1 + np.sqrt(1 - 4 * x))


def pure_state_from_pairing(alpha: np.ndarray, grid: MacroGrid, op_margin: float = OP_MARGIN,
                            purity_tol: float = PURITY_TOL) -> BCSState:
    """Pure quasi-free state with pairing ``alpha`` (operator matrix).

    gamma = (1 - sqrt(1 - 4 alpha conj(alpha)))/2 through a Hermitian
    eigendecomposition; this saturates gamma(1 - gamma) = alpha conj(alpha).
    """
    x = alpha @ alpha.conj()
    x = 0.5 * (x + x.conj().T)
    mu, vecs = np.linalg.eigh(x)
    op_norm = float(np.sqrt(max(mu[-1], 0.0)))
    if op_norm > 0.5 - op_margin:
        raise InsufficientDilution(
            f"||alpha||_op = {op_norm:.4f} exceeds {0.5 - op_margin:.4f}; shrink psi0 or h")
    gamma = (vecs * closure_function(mu)) @ vecs.conj().T
    gamma = 0.5 * (gamma + gamma.conj().T)
    state = BCSState(gamma, alpha.copy(), grid)
    defect = state.purity_defect()
    if defect > purity_tol:
        raise PurityFailure(f"purity defect {defect:.2e} exceeds {purity_tol:.1e}")
    return state


def closure_fixed_point(x: np.ndarray, gamma: np.ndarray | None = None, tol: float = 1e-15,
                        max_iter: int = 60) -> np.ndarray:
    """Solve gamma = x + gamma^2 by iteration, optionally warm-started.

    Converges geometrically with rate 2||gamma||_op, which is small for
    dilute states; much cheaper than an eigendecomposition per call.
    """
    g = x.copy() if gamma is None else gamma
    scale = max(np.linalg.norm(x), 1e-300)
    for _ in range(max_iter):
        new = x + g @ g
        change = np.linalg.norm(new - g)
        g = new
        if change <= tol * scale:
            break
    return 0.5 * (g + g.conj().T)


def kinetic_trace(gamma: np.ndarray, grid: MacroGrid) -> float:
    """Tr(-Laplacian gamma), evaluated in the plane-wave basis."""
    k2 = grid.wavenumbers() ** 2
    # (F gamma F^dagger)_pp with unitary F
    g_hat = np.fft.fft(np.fft.ifft(gamma, axis=1, norm="ortho"), axis=0, norm="ortho")
    return float(np.sum(k2 * np.diag(g_hat).real))


def spectral_trace(gamma: np.ndarray) -> float:
    g_hat = np.fft.fft(np.fft.ifft(gamma, axis=1, norm="ortho"), axis=0, norm="ortho")
    return float(np.trace(g_hat).real)


def sample_external(W, grid: MacroGrid) -> np.ndarray:
    if W is None:
        return np.zeros(grid.N)
    if isinstance(W, ExternalPotential):
        return W.sample(grid.axis(), grid.L)
    W = np.asarray(W, dtype=float)
    if W.shape != (grid.N,):
        raise ValueError("W must be sampled on the N-point macroscopic axis")
    return W


def bcs_energy(state: BCSState, V: PotentialSpec, W, h: float,
               V_matrix: np.ndarray | None = None) -> float:
    """Tr((-h^2 Laplacian + h^2 W) gamma) + 1/2 sum V((x-y)/h) |alpha(x,y)|^2 cell^2."""
    grid = state.grid
    w = sample_external(W, grid)
    Vm = interaction_matrix(V, grid) if V_matrix is None else V_matrix
    one_body = h * h * (kinetic_trace(state.gamma, grid) + float(np.sum(w * np.diag(state.gamma).real)))
    pair = 0.5 * float(np.sum(Vm * np.abs(state.alpha) ** 2))
    return one_body + pair


@dataclass
class AdmissibilityReport:
    gamma_block_min: float
    gamma_block_max: float
    constraint_min: float
    mode: str

    def admissible(self, tol: float = 1e-8) -> bool:
        return (self.gamma_block_min >= -tol and self.gamma_block_max <= 1 + tol
                and self.constraint_min >= -tol)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_admissibility(state: BCSState, mode: str = "exact") -> AdmissibilityReport:
    """Extremal eigenvalues of Gamma and of gamma(1-gamma) - alpha conj(alpha).

    ``exact`` diagonalizes the assembled 2N x 2N block (N <= 512);
    ``extremal`` runs Lanczos on matrix-free products.
    """
    g, a = state.gamma, state.alpha
    n = g.shape[0]
    constraint = g - g @ g - a @ a.conj()
    constraint = 0.5 * (constraint + constraint.conj().T)
    if mode == "exact":
        if n > 512:
            raise ValueError("exact mode is limited to N <= 512")
        block = state.block_matrix()
        ev = np.linalg.eigvalsh(0.5 * (block + block.conj().T))
        cmin = float(np.linalg.eigvalsh(constraint)[0])
        return AdmissibilityReport(float(ev[0]), float(ev[-1]), cmin, mode)
    if mode != "extremal":
        raise ValueError(f"unknown mode {mode!r}")

    def block_apply(v):
        top, bottom = v[:n], v[n:]
        return np.concatenate([g @ top + a @ bottom,
                               a.conj() @ top + bottom - g.conj() @ bottom])

    op = LinearOperator((2 * n, 2 * n), matvec=block_apply, dtype=complex)
    lo = eigsh(op, k=1, which="SA", tol=1e-12, return_eigenvectors=False)[0]
    hi = eigsh(op, k=1, which="LA", tol=1e-12, return_eigenvectors=False)[0]
    cop = LinearOperator((n, n), matvec=lambda v: constraint @ v, dtype=complex)
    cmin = eigsh(cop, k=1, which="SA", tol=1e-12, return_eigenvectors=False)[0]
    return AdmissibilityReport(float(lo), float(hi), float(cmin), mode)
