"""Two-body bound state of -2*Laplacian + V and the GP coupling constant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, eigsh

from .errors import DegenerateGroundState, FormulaMismatch, NoBoundState, TailNotResolved
from .grids import MicroGrid, from_fft_order, to_fft_order
from .potentials import PotentialSpec

EIG_TOL = 1e-10
GAP_TOL = 1e-8
TAIL_TOL = 1e-8
CROSS_TOL = 1e-8
DENSE_MAX = 4096


@dataclass
class GroundState:
    """Normalized non-negative bound state on a MicroGrid.

    ``alpha0`` is stored in centered order with unit discrete L2 norm.
    ``kappa`` is the gap of -Laplacian + V/2, i.e. half the gap of the
    operator whose ground state this is.
    """

    alpha0: np.ndarray
    E_b: float
    kappa: float
    g: float
    grid: MicroGrid
    residual: float
    representation: str

    def fourier(self) -> np.ndarray:
        """Continuum-normalized transform sum_r alpha0(r) e^{-iqr} cell, FFT order."""
        return np.fft.fftn(to_fft_order(self.alpha0)) * self.grid.cell


class TwoBodyOperator:
    """Matrix-free -2*Laplacian + V on a periodic MicroGrid.

    Smooth interactions are applied by collocation (pointwise samples).
    Discontinuous wells use a Galerkin representation in the plane-wave
    basis, where V acts through its exact Fourier coefficients and Nyquist
    modes are decoupled; this removes the O(spacing) error that sampling
    a jump would cause.
    """

    def __init__(self, potential: PotentialSpec, grid: MicroGrid, representation: str | None = None):
        self.potential = potential
        self.grid = grid
        self.representation = representation or potential.representation
        self.kinetic = 2.0 * grid.k_squared()
        if self.representation == "collocation":
            self.v_samples = potential.sample(grid)
        elif self.representation == "galerkin":
            self._setup_galerkin()
        else:
            raise ValueError(f"unknown representation {self.representation!r}")

    def _setup_galerkin(self):
        grid = self.grid
        n, d = grid.N, grid.d
        m = 2 * n
        kpad = 2 * np.pi * np.fft.fftfreq(m, d=grid.L / m)
        kk = np.meshgrid(*([kpad] * d), indexing="ij")
        vhat = self.potential.fourier(np.sqrt(sum(c ** 2 for c in kk)), d)
        if vhat is None:
            raise ValueError(f"no closed-form transform for {self.potential.kind}")
        # Fourier coefficients of V on the 2N-padded box; the product of a
        # padded field with this kernel reproduces the exact convolution.
        self._v_padded = np.fft.ifftn(vhat / grid.L ** d) * m ** d
        nyq = np.zeros(grid.shape, dtype=bool)
        for ax in range(d):
            sl = [slice(None)] * d
            sl[ax] = n // 2
            nyq[tuple(sl)] = True
        self._nyquist = nyq

    def _pad(self, fh):
        n, d = self.grid.N, self.grid.d
        m = 2 * n
        out = np.zeros((m,) * d, dtype=complex)
        half = n // 2
        idx = np.r_[0:half, m - half:m]
        src = np.r_[0:half, n - half:n]
        out[np.ix_(*([idx] * d))] = fh[np.ix_(*([src] * d))]
        return out

    def _unpad(self, gh):
        n, d = self.grid.N, self.grid.d
        m = 2 * n
        half = n // 2
        out = np.zeros((n,) * d, dtype=complex)
        idx = np.r_[0:half, m - half:m]
        src = np.r_[0:half, n - half:n]
        out[np.ix_(*([src] * d))] = gh[np.ix_(*([idx] * d))]
        return out

    def apply_potential(self, f: np.ndarray) -> np.ndarray:
        """V applied to a centered field in the active representation."""
        if self.representation == "collocation":
            return self.v_samples * f
        fh = np.fft.fftn(to_fft_order(f))
        fh[self._nyquist] = 0.0
        g = np.fft.ifftn(self._pad(fh))
        gh = self._unpad(np.fft.fftn(g * self._v_padded))
        gh[self._nyquist] = 0.0
        out = from_fft_order(np.fft.ifftn(gh))
        return out.real if np.isrealobj(f) else out

    def apply_kinetic(self, f: np.ndarray) -> np.ndarray:
        out = from_fft_order(np.fft.ifftn(self.kinetic * np.fft.fftn(to_fft_order(f))))
        return out.real if np.isrealobj(f) else out

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.apply_kinetic(f) + self.apply_potential(f)

    def matvec_flat(self, x: np.ndarray) -> np.ndarray:
        shape = self.grid.shape
        if x.ndim == 1:
            return self.apply(x.reshape(shape)).ravel()
        cols = [self.apply(x[:, j].reshape(shape)).ravel() for j in range(x.shape[1])]
        return np.stack(cols, axis=1)

    def dense(self) -> np.ndarray:
        size = self.grid.N ** self.grid.d
        if size > DENSE_MAX:
            raise ValueError(f"dense operator limited to {DENSE_MAX} unknowns")
        return self.matvec_flat(np.eye(size))


def _lowest_pair_dense(op: TwoBodyOperator):
    H = op.dense()
    H = 0.5 * (H + H.T)
    w, v = np.linalg.eigh(H)
    return w[:2], v[:, 0]


def _lowest_pair_iterative(op: TwoBodyOperator, tol: float):
    """Lanczos on (H - sigma)^-1 with sigma below the spectrum.

    Each inverse application is a conjugate-gradient solve preconditioned
    by the kinetic symbol, so the operator is never assembled.
    """
    grid = op.grid
    size = grid.N ** grid.d
    if op.representation == "collocation":
        vmax = float(np.max(np.abs(op.v_samples)))
    else:
        vmax = float(np.max(np.abs(op._v_padded)))
    sigma = -vmax - 1.0
    precond_symbol = 1.0 / (op.kinetic - sigma)

    def shifted(x):
        return op.matvec_flat(x) - sigma * x

    def precond(x):
        fh = np.fft.fftn(to_fft_order(x.reshape(grid.shape))) * precond_symbol
        return from_fft_order(np.fft.ifftn(fh)).real.ravel()

    A = LinearOperator((size, size), matvec=shifted, dtype=float)
    M = LinearOperator((size, size), matvec=precond, dtype=float)

    def inverse(b):
        x, info = cg(A, b, M=M, rtol=1e-15, atol=0.0, maxiter=10 * size)
        return x

    OP = LinearOperator((size, size), matvec=inverse, dtype=float)
    v0 = np.exp(-grid.radius().ravel() ** 2 / 4)
    mu, vecs = eigsh(OP, k=2, which="LA", v0=v0, tol=1e-14)
    order = np.argsort(mu)[::-1]
    evals = sigma + 1.0 / mu[order]
    vec = vecs[:, order[0]]
    evals[0] = vec @ op.matvec_flat(vec) / (vec @ vec)
    return evals, vec


def solve_ground_state(V: PotentialSpec, grid: MicroGrid, eig_tol: float = EIG_TOL,
                       gap_tol: float = GAP_TOL, tail_tol: float = TAIL_TOL,
                       method: str = "iterative", representation: str | None = None) -> GroundState:
    """Lowest eigenpair of -2*Laplacian + V on ``grid``.

    ``method`` is ``iterative`` (shift-invert Lanczos with preconditioned
    conjugate-gradient inner solves) or ``dense`` (full
    diagonalization, limited to 4096 unknowns and used as the oracle).
    """
    op = TwoBodyOperator(V, grid, representation)
    if method == "dense":
        evals, vec = _lowest_pair_dense(op)
    elif method == "iterative":
        evals, vec = _lowest_pair_iterative(op, tol=eig_tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    lam0, lam1 = float(evals[0]), float(evals[1])
    if lam0 >= 0:
        raise NoBoundState(f"lowest eigenvalue {lam0:.3e} is not negative")

    alpha = vec.reshape(grid.shape)
    peak = alpha.ravel()[np.argmax(np.abs(alpha))]
    alpha = alpha * np.sign(peak)
    # normalize before the sign test so tail_tol is an absolute amplitude
    alpha = alpha / np.sqrt(np.sum(alpha ** 2) * grid.cell)
    edge = float(np.max(np.abs(alpha[grid.boundary_mask()])))
    if edge > tail_tol:
        raise TailNotResolved(f"bound state is {edge:.2e} at the box edge (tail_tol {tail_tol:.1e}); enlarge L or refine N")
    # negative ripples below tail_tol are truncation noise far in the tail
    floor = max(1e-10 * np.max(alpha), tail_tol)
    if alpha.min() < -floor:
        raise DegenerateGroundState("ground state changes sign; it is not the isolated bound state")
    alpha = 0.5 * (alpha + _reflect(alpha))
    alpha /= np.sqrt(np.sum(alpha ** 2) * grid.cell)

    Halpha = op.apply(alpha)
    E_b = -float(np.sum(alpha * Halpha) * grid.cell)
    residual = float(np.sqrt(np.sum((Halpha + E_b * alpha) ** 2) * grid.cell))

    kappa = 0.5 * (lam1 - lam0)
    if kappa <= gap_tol:
        raise DegenerateGroundState(f"spectral gap {kappa:.3e} below {gap_tol:.1e}")

    gs = GroundState(alpha0=alpha, E_b=E_b, kappa=kappa, g=np.nan, grid=grid,
                     residual=residual, representation=op.representation)
    gs.g = coupling_constant_fourier(gs, grid)
    return gs


def _reflect(f: np.ndarray) -> np.ndarray:
    """f(-r) for a centered periodic field."""
    out = f
    for ax in range(f.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def coupling_constant_fourier(gs: GroundState, grid: MicroGrid) -> float:
    """g = (2 pi)^-d sum_q |alpha0_hat(q)|^4 (2 q^2 + E_b) (2 pi / L)^d."""
    ahat = np.fft.fftn(to_fft_order(gs.alpha0)) * grid.cell
    integrand = np.abs(ahat) ** 4 * (2 * grid.k_squared() + gs.E_b)
    return float(np.sum(integrand) / grid.L ** grid.d)


def coupling_constant_convolution(gs: GroundState, V: PotentialSpec, grid: MicroGrid,
                                  cross_tol: float = CROSS_TOL, g_reference: float | None = None) -> float:
    """g = -sum_z (alpha0 * alpha0 * alpha0)(z) (V alpha0)(z) cell.

    The triple convolution is cyclic and evaluated spectrally; V acts in
    the same representation that produced ``gs``. Raises FormulaMismatch
    when the result disagrees with the Fourier formula beyond ``cross_tol``.
    """
    a = gs.alpha0
    ahat = np.fft.fftn(to_fft_order(a)) * grid.cell
    triple = from_fft_order(np.fft.ifftn(ahat ** 3)).real / grid.cell
    op = TwoBodyOperator(V, grid, gs.representation)
    g_conv = -float(np.sum(triple * op.apply_potential(a)) * grid.cell)
    g_ref = coupling_constant_fourier(gs, grid) if g_reference is None else g_reference
    if abs(g_conv - g_ref) > cross_tol * abs(g_ref):
        raise FormulaMismatch(f"g_conv = {g_conv:.12g} but g_fourier = {g_ref:.12g}")
    return g_conv


@dataclass
class BoundStateReport:
    l1_norm: float
    linf_norm: float
    symmetry_residual: float
    E_b: float
    kappa: float
    tail_moment: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_isolated_bound_state(V: PotentialSpec, gs: GroundState) -> BoundStateReport:
    """Discrete norms and symmetry of V plus decay data for the bound state."""
    grid = gs.grid
    v = V.sample(grid)
    r = grid.radius()
    return BoundStateReport(
        l1_norm=float(np.sum(np.abs(v)) * grid.cell),
        linf_norm=float(np.max(np.abs(v))),
        symmetry_residual=float(np.max(np.abs(v - _reflect(v)))),
        E_b=gs.E_b,
        kappa=gs.kappa,
        tail_moment=float(np.max(r ** 6 * np.abs(gs.alpha0))),
    )


def square_well_binding_energy(depth: float, radius: float) -> float:
    """Root of sqrt((V0-E)/2) tan(a sqrt((V0-E)/2)) = sqrt(E/2) for the 1D well."""
    from scipy.optimize import brentq

    def f(E):
        q = np.sqrt((depth - E) / 2)
        return q * np.tan(radius * q) - np.sqrt(E / 2)

    # the even ground state has radius*q < pi/2
    e_low = max(depth - 2 * (np.pi / (2 * radius)) ** 2, 0.0)
    return brentq(f, e_low + 1e-14, depth - 1e-14, xtol=1e-15, rtol=1e-15)
