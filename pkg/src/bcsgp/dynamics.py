"""Time evolution of (gamma_t, alpha_t) in rescaled time (d = 1).

The equations, with operator matrices M = alpha and B = V_h o M,
V_h(x, y) = V((x - y)/h), K = -Laplacian:

    d gamma/dt = -i [K + W, gamma] + h^-2 G,   G = i (M B^+ - B M^+)
    d M/dt     = -i ((K + W) M + M (K + W) + h^-2 B) + i h^-2 (gamma B + B conj(gamma))

Three integrators are provided:

``strang_rk2``
    Exact kinetic and local-potential sub-flows in Strang order around an
    explicit midpoint update of the nonlocal coupling. Accurate only for
    dt well below h^2 because the potential h^-2 V is split from the
    relative kinetic energy.
``rk4``
    Classical Runge-Kutta on the full right-hand side (reference, small N).
``etd2``, ``etd4``
    Exponential time differencing. The stiff pair operator
    K_x + K_y + h^-2 V_h is diagonalized exactly (center-of-mass plane
    waves times relative-coordinate eigenvectors), the step runs in the
    frame co-rotating with the bound state, and only the slow terms are
    treated by the ETD quadrature (second or fourth order).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteField, StepRejected
from .grids import MacroGrid
from .potentials import PotentialSpec
from .state import BCSState, bcs_energy, interaction_matrix, sample_external

SCHEMES = ("strang_rk2", "rk4", "etd2", "etd4")


def g_alpha(alpha: np.ndarray, V_matrix: np.ndarray) -> np.ndarray:
    """G_alpha = i (M B^+ - B M^+) with B = V_h o M, as an operator matrix.

    ``V_matrix`` holds V((x - y)/h). Since B M^+ = (M B^+)^+, one product
    suffices and G is Hermitian by construction.
    """
    B = V_matrix * alpha
    X = alpha @ B.conj().T
    return 1j * (X - X.conj().T)


def _fourier2(gamma: np.ndarray) -> np.ndarray:
    """F gamma F^+ with the unitary DFT F."""
    return np.fft.fft(np.fft.ifft(gamma, axis=1, norm="ortho"), axis=0, norm="ortho")


def _inverse_fourier2(g_hat: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(g_hat, axis=1, norm="ortho"), axis=0, norm="ortho")


def _apply_kinetic(f: np.ndarray, k2: np.ndarray, axis: int) -> np.ndarray:
    shape = [1, 1]
    shape[axis] = -1
    return np.fft.ifft(k2.reshape(shape) * np.fft.fft(f, axis=axis), axis=axis)


class Problem:
    """Static data of one BCS evolution: grid, V_h, W, h and cached spectra."""

    def __init__(self, grid: MacroGrid, V: PotentialSpec, W=None):
        self.grid = grid
        self.V = V
        self.h = grid.h
        self.w = sample_external(W, grid)
        self.W_spec = W
        self.V_matrix = interaction_matrix(V, grid)
        self.k2 = grid.wavenumbers() ** 2

    def rhs(self, gamma: np.ndarray, alpha: np.ndarray):
        """Right-hand sides (d gamma/dt, d alpha/dt) in rescaled time."""
        h2 = self.h ** 2
        w = self.w
        B = self.V_matrix * alpha
        K_gamma = _apply_kinetic(gamma, self.k2, 0)
        gamma_K = _apply_kinetic(gamma, self.k2, 1)
        d_gamma = (-1j * (K_gamma - gamma_K + w[:, None] * gamma - gamma * w[None, :])
                   + g_alpha(alpha, self.V_matrix) / h2)
        one_body = (_apply_kinetic(alpha, self.k2, 0) + _apply_kinetic(alpha, self.k2, 1)
                    + w[:, None] * alpha + alpha * w[None, :])
        d_alpha = -1j * (one_body + B / h2) + 1j * (gamma @ B + B @ gamma.conj()) / h2
        return d_gamma, d_alpha

    def energy(self, state: BCSState) -> float:
        return bcs_energy(state, self.V, self.w, self.h, V_matrix=self.V_matrix)


def rhs(state: BCSState, V: PotentialSpec, W, h: float):
    """Rescaled-time right-hand sides for ``state``."""
    if abs(h - state.grid.h) > 1e-14:
        raise ValueError("h does not match the state grid")
    return Problem(state.grid, V, W).rhs(state.gamma, state.alpha)


# ---------------------------------------------------------------------------
# Exact pair propagator


class PairBasis:
    """Eigenbasis of K_x + K_y + h^-2 V_h on the periodic product grid.

    A kernel M(x_j, x_l) is sheared to S[j, m] = M[j, j - m], transformed
    along j to center-of-mass momentum P, and twisted by e^{i k_P r_m / 2}.
    For each P the result is a periodic (P even) or antiperiodic (P odd)
    function of the relative offset r_m = m * spacing, on which the pair
    operator acts as k_P^2/2 - 2 d^2/dr^2 + h^-2 V(r/h). That operator is
    diagonalized once per parity. The full transform is unitary.

    Modes with |k_x + k_y| beyond the Nyquist wavenumber are aliased in P,
    so the kinetic part agrees with the double Fourier form of K_x + K_y
    only on kernels with no content there (resolved pairings).
    """

    def __init__(self, grid: MacroGrid, V: PotentialSpec):
        n, L, h = grid.N, grid.L, grid.h
        dx = grid.spacing
        self.grid = grid
        m = np.arange(n)
        signed = (m + n // 2) % n - n // 2
        v = V.profile(signed * dx / h) / h ** 2
        offsets = np.arange(-(n - 1), n) * dx
        self.evals = {}
        self.evecs = {}
        for parity in (0, 1):
            k = 2 * np.pi / L * (np.arange(n) - n // 2 + 0.5 * parity)
            # kinetic matrix depends on m - m' only
            row = (2 * k ** 2) @ np.cos(np.outer(k, offsets)) / n
            T = row[m[:, None] - m[None, :] + n - 1]
            lam, Q = np.linalg.eigh(T + np.diag(v))
            self.evals[parity] = lam
            self.evecs[parity] = np.ascontiguousarray(Q)
        self.kappa = grid.wavenumbers()
        self.parity = np.arange(n) % 2
        self.twist = np.exp(0.5j * np.outer(self.kappa, m * dx))
        self.freq = np.empty((n, n))
        for parity in (0, 1):
            sel = self.parity == parity
            self.freq[sel] = 0.5 * self.kappa[sel, None] ** 2 + self.evals[parity][None, :]
        self._rows = np.broadcast_to(m[:, None], (n, n))
        self._cols = (m[:, None] - m[None, :]) % n
        self._even = self.parity == 0
        self._odd = ~self._even

    @property
    def ground_frequency(self) -> float:
        """Lowest pair eigenvalue at zero center-of-mass momentum (about -E_b/h^2)."""
        return float(self.evals[0][0])

    def forward(self, M: np.ndarray) -> np.ndarray:
        S = M[self._rows, self._cols]
        c = np.fft.fft(S, axis=0, norm="ortho") * self.twist
        out = np.empty_like(c)
        for sel, parity in ((self._even, 0), (self._odd, 1)):
            out[sel] = _real_matmul(c[sel], self.evecs[parity])
        return out

    def inverse(self, C: np.ndarray) -> np.ndarray:
        c = np.empty_like(C)
        for sel, parity in ((self._even, 0), (self._odd, 1)):
            c[sel] = _real_matmul(C[sel], self.evecs[parity].T)
        S = np.fft.ifft(c * self.twist.conj(), axis=0, norm="ortho")
        M = np.empty_like(S)
        M[self._rows, self._cols] = S
        return M


def _real_matmul(block: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """block @ Q for complex block and real Q as one real BLAS product."""
    rows = block.shape[0]
    stacked = np.concatenate([block.real, block.imag]) @ Q
    return stacked[:rows] + 1j * stacked[rows:]


def phi_functions(z: np.ndarray, order: int) -> list:
    """[phi_0, ..., phi_order](z) with phi_0 = e^z, stable near z = 0."""
    z = np.asarray(z, dtype=complex)
    out = [np.exp(z)]
    small = np.abs(z) < 0.5
    safe = np.where(small, 1.0, z)
    inv_fact = 1.0
    for k in range(1, order + 1):
        direct = (out[-1] - inv_fact) / safe
        inv_fact /= k
        # phi_k(z) = sum_j z^j / (j + k)!
        series = np.zeros_like(z)
        term = np.full_like(z, inv_fact)
        for j in range(25):
            series = series + term
            term = term * z / (j + k + 1)
        out.append(np.where(small, series, direct))
    return out


@dataclass
class _ETDCoefficients:
    full: list
    half: list | None


class ETDIntegrator:
    """Exponential integrator in the co-rotating frame of the bound state."""

    def __init__(self, problem: Problem, dt: float, order: int = 2, basis: PairBasis | None = None):
        if order not in (2, 4):
            raise ValueError("ETD order must be 2 or 4")
        self.problem = problem
        self.dt = dt
        self.order = order
        self.basis = basis or PairBasis(problem.grid, problem.V)
        self.rotation = self.basis.ground_frequency
        k2 = problem.k2
        self.omega_gamma = k2[:, None] - k2[None, :]
        self.omega_alpha = self.basis.freq - self.rotation
        self._coeffs = {}
        for name, omega in (("gamma", self.omega_gamma), ("alpha", self.omega_alpha)):
            z = -1j * omega * dt
            full = phi_functions(z, 3 if order == 4 else 2)
            half = phi_functions(z / 2, 1) if order == 4 else None
            if order == 4:
                e, p1, p2, p3 = full
                # Cox-Matthews weights for n0, (na + nb) and nc
                full = [e, dt * (p1 - 3 * p2 + 4 * p3), 2 * dt * (p2 - 2 * p3), dt * (4 * p3 - p2)]
            self._coeffs[name] = _ETDCoefficients(full, half)

    def _nonlinear(self, gamma: np.ndarray, alpha: np.ndarray):
        p = self.problem
        h2 = p.h ** 2
        w = p.w
        B = p.V_matrix * alpha
        n_gamma = -1j * (w[:, None] * gamma - gamma * w[None, :]) + g_alpha(alpha, p.V_matrix) / h2
        # stages keep alpha symmetric, so B conj(gamma) = (gamma B)^T
        Y = gamma @ B
        n_alpha = -1j * (w[:, None] * alpha + alpha * w[None, :]) + (1j / h2) * (Y + Y.T)
        return _fourier2(n_gamma), self.basis.forward(n_alpha)

    def _to_physical(self, g_hat, a_hat):
        return _inverse_fourier2(g_hat), self.basis.inverse(a_hat)

    def step(self, gamma: np.ndarray, alpha: np.ndarray):
        dt = self.dt
        cg, ca = self._coeffs["gamma"], self._coeffs["alpha"]
        u_g, u_a = _fourier2(gamma), self.basis.forward(alpha)
        n_g, n_a = self._nonlinear(gamma, alpha)
        if self.order == 2:
            a_g = cg.full[0] * u_g + dt * cg.full[1] * n_g
            a_a = ca.full[0] * u_a + dt * ca.full[1] * n_a
            m_g, m_a = self._nonlinear(*self._to_physical(a_g, a_a))
            new_g = a_g + dt * cg.full[2] * (m_g - n_g)
            new_a = a_a + dt * ca.full[2] * (m_a - n_a)
        else:
            e2g, p1g = cg.half
            e2a, p1a = ca.half
            a_g = e2g * u_g + 0.5 * dt * p1g * n_g
            a_a = e2a * u_a + 0.5 * dt * p1a * n_a
            na_g, na_a = self._nonlinear(*self._to_physical(a_g, a_a))
            b_g = e2g * u_g + 0.5 * dt * p1g * na_g
            b_a = e2a * u_a + 0.5 * dt * p1a * na_a
            nb_g, nb_a = self._nonlinear(*self._to_physical(b_g, b_a))
            c_g = e2g * a_g + 0.5 * dt * p1g * (2 * nb_g - n_g)
            c_a = e2a * a_a + 0.5 * dt * p1a * (2 * nb_a - n_a)
            nc_g, nc_a = self._nonlinear(*self._to_physical(c_g, c_a))
            new_g = self._combine4(cg.full, u_g, n_g, na_g, nb_g, nc_g)
            new_a = self._combine4(ca.full, u_a, n_a, na_a, nb_a, nc_a)
        gamma_new, alpha_new = self._to_physical(new_g, new_a)
        return gamma_new, alpha_new * np.exp(-1j * self.rotation * dt)

    @staticmethod
    def _combine4(weights, u, n0, na, nb, nc):
        e, w0, w_mid, w_end = weights
        return e * u + w0 * n0 + w_mid * (na + nb) + w_end * nc


@dataclass
class PropagatorCache:
    """Unit-modulus multipliers for the exact sub-flows of ``strang_rk2``.

    ``kinetic_alpha`` acts on the double Fourier transform of alpha,
    ``kinetic_gamma`` on F gamma F^+, ``potential_alpha`` and
    ``potential_gamma`` pointwise in position space. All are built for a
    half step dt/2, the length each of them is applied for.
    """

    dt: float
    kinetic_alpha: np.ndarray
    kinetic_gamma: np.ndarray
    potential_alpha: np.ndarray
    potential_gamma: np.ndarray

    @classmethod
    def build(cls, problem: Problem, dt: float) -> "PropagatorCache":
        k2 = problem.k2
        tau = 0.5 * dt
        w = problem.w
        h2 = problem.h ** 2
        return cls(
            dt=dt,
            kinetic_alpha=np.exp(-1j * tau * (k2[:, None] + k2[None, :])),
            kinetic_gamma=np.exp(-1j * tau * (k2[:, None] - k2[None, :])),
            potential_alpha=np.exp(-1j * tau * (problem.V_matrix / h2 + w[:, None] + w[None, :])),
            potential_gamma=np.exp(-1j * tau * (w[:, None] - w[None, :])),
        )


def _strang_rk2_step(problem: Problem, cache: PropagatorCache, gamma, alpha):
    dt = cache.dt
    h2 = problem.h ** 2
    Vm = problem.V_matrix

    def kinetic(g, a):
        a = np.fft.ifft2(cache.kinetic_alpha * np.fft.fft2(a))
        g = _inverse_fourier2(cache.kinetic_gamma * _fourier2(g))
        return g, a

    def potential(g, a):
        return cache.potential_gamma * g, cache.potential_alpha * a

    def coupling(g, a):
        B = Vm * a
        return g_alpha(a, Vm) / h2, 1j * (g @ B + B @ g.conj()) / h2

    gamma, alpha = kinetic(gamma, alpha)
    gamma, alpha = potential(gamma, alpha)
    dg, da = coupling(gamma, alpha)
    dg, da = coupling(gamma + 0.5 * dt * dg, alpha + 0.5 * dt * da)
    gamma, alpha = gamma + dt * dg, alpha + dt * da
    gamma, alpha = potential(gamma, alpha)
    return kinetic(gamma, alpha)


def _rk4_step(problem: Problem, dt: float, gamma, alpha):
    k1 = problem.rhs(gamma, alpha)
    k2 = problem.rhs(gamma + 0.5 * dt * k1[0], alpha + 0.5 * dt * k1[1])
    k3 = problem.rhs(gamma + 0.5 * dt * k2[0], alpha + 0.5 * dt * k2[1])
    k4 = problem.rhs(gamma + dt * k3[0], alpha + dt * k3[1])
    return (gamma + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            alpha + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


class Stepper:
    """One fixed-size step of a chosen scheme, with structural bookkeeping."""

    def __init__(self, problem: Problem, dt: float, scheme: str = "etd2", basis: PairBasis | None = None):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        self.problem = problem
        self.dt = dt
        self.scheme = scheme
        self._basis = basis
        self._impl = self._make(dt)

    def _make(self, dt):
        if self.scheme == "strang_rk2":
            cache = PropagatorCache.build(self.problem, dt)
            return lambda g, a: _strang_rk2_step(self.problem, cache, g, a)
        if self.scheme == "rk4":
            return lambda g, a: _rk4_step(self.problem, dt, g, a)
        order = 2 if self.scheme == "etd2" else 4
        if self._basis is None:
            self._basis = PairBasis(self.problem.grid, self.problem.V)
        integ = ETDIntegrator(self.problem, dt, order, self._basis)
        return integ.step

    def raw_step(self, gamma, alpha):
        return self._impl(gamma, alpha)

    def halved(self, level: int) -> "Stepper":
        return Stepper(self.problem, self.dt / 2 ** level, self.scheme, self._basis)


def step(state: BCSState, stepper: Stepper, step_tol: float = np.inf, max_halvings: int = 0):
    """Advance one step; returns (new state, pre-enforcement defect, halvings used).

    A step whose relative trace drift exceeds ``step_tol`` is retried with
    2, 4, ... substeps, up to ``max_halvings`` times, then StepRejected.
    """
    tr0 = state.trace()
    for level in range(max_halvings + 1):
        sub = stepper if level == 0 else stepper.halved(level)
        gamma, alpha = state.gamma, state.alpha
        for _ in range(2 ** level):
            gamma, alpha = sub.raw_step(gamma, alpha)
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(gamma))):
            raise NonFiniteField("state became non-finite")
        new = BCSState(gamma, alpha, state.grid)
        defect = new.symmetry_defect()
        new = new.enforce_symmetry()
        drift = abs(new.trace() - tr0) / max(abs(tr0), 1e-300)
        if drift <= step_tol:
            return new, defect, level
    raise StepRejected(f"trace drift {drift:.2e} exceeds step_tol {step_tol:.1e} after {max_halvings} halvings")


@dataclass
class Trajectory:
    """Checkpoints and per-record diagnostics of one evolution."""

    times: list = field(default_factory=list)
    tr_gamma: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    purity_defect: list = field(default_factory=list)
    symmetry_defect: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)
    observations: dict = field(default_factory=dict)
    steps: int = 0
    runtime: float = 0.0
    completed: bool = True
    error: str | None = None

    def record(self, t, state: BCSState, problem: Problem, defect: float, with_purity: bool = True):
        self.times.append(t)
        self.tr_gamma.append(state.trace())
        self.energy.append(problem.energy(state))
        self.purity_defect.append(state.purity_defect() if with_purity else np.nan)
        self.symmetry_defect.append(defect)

    def rows(self):
        for i, t in enumerate(self.times):
            yield {"t": t, "tr_gamma": self.tr_gamma[i], "energy": self.energy[i],
                   "purity_defect": self.purity_defect[i], "symmetry_defect": self.symmetry_defect[i]}

    def drift(self) -> dict:
        tr, en = np.asarray(self.tr_gamma), np.asarray(self.energy)
        purity = np.asarray(self.purity_defect, dtype=float)
        return {
            "trace": float(np.max(np.abs(tr - tr[0])) / abs(tr[0])) if tr[0] else 0.0,
            "energy": float(np.max(np.abs(en - en[0])) / abs(en[0])) if en[0] else 0.0,
            "purity": float(np.nanmax(purity)) if np.any(np.isfinite(purity)) else float("nan"),
            "symmetry": float(np.max(self.symmetry_defect)),
        }


def evolve(state0: BCSState, T: float, dt: float, V: PotentialSpec, W=None, scheme: str = "etd2",
           observers: dict | None = None, checkpoints=(), diag_stride: int = 1, keep_states: bool = True,
           step_tol: float = np.inf, max_halvings: int = 0, stepper: Stepper | None = None,
           purity_diagnostics: bool = True) -> Trajectory:
    """Integrate from 0 to T with fixed steps of about ``dt``.

    ``observers`` maps names to callables f(t, state) evaluated at every
    checkpoint (the initial and final states are always checkpoints).
    Diagnostics are recorded every ``diag_stride`` steps and at the end.
    On StepRejected the partial trajectory is attached to the exception.
    """
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    grid = state0.grid
    problem = stepper.problem if stepper is not None else Problem(grid, V, W)
    n_steps = int(round(T / dt)) if T > 0 else 0
    dt_eff = T / n_steps if n_steps else dt
    if stepper is None and n_steps:
        stepper = Stepper(problem, dt_eff, scheme)
    check_steps = {0: 0.0, n_steps: T}
    for tc in checkpoints:
        if tc > T + 1e-12:
            raise ValueError(f"checkpoint {tc} beyond T = {T}")
        check_steps[int(round(tc / dt_eff)) if n_steps else 0] = tc
    observers = observers or {}
    traj = Trajectory()
    t_start = time.perf_counter()

    def checkpoint(k, state):
        tc = check_steps[k]
        if keep_states:
            traj.checkpoints[tc] = state.copy()
        for name, fn in observers.items():
            traj.observations.setdefault(name, {})[tc] = fn(k * dt_eff, state)

    state = state0.enforce_symmetry()
    traj.record(0.0, state, problem, state0.symmetry_defect(), purity_diagnostics)
    checkpoint(0, state)
    try:
        for k in range(1, n_steps + 1):
            state, defect, _ = step(state, stepper, step_tol, max_halvings)
            traj.steps = k
            if k % diag_stride == 0 or k == n_steps:
                traj.record(k * dt_eff, state, problem, defect, purity_diagnostics)
            if k in check_steps:
                checkpoint(k, state)
    except StepRejected as exc:
        traj.completed = False
        traj.error = str(exc)
        traj.runtime = time.perf_counter() - t_start
        exc.trajectory = traj
        raise
    traj.runtime = time.perf_counter() - t_start
    traj.final = state
    return traj
