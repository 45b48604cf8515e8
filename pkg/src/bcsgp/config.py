"""Run configuration: JSON in, dataclasses out."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .grids import MacroGrid, MicroGrid
from .potentials import ExternalPotential, PotentialSpec, catalog


@dataclass
class MicroConfig:
    L: float = 40.0
    N: int = 512
    method: str = "iterative"


@dataclass
class Tolerances:
    tail_tol: float = 1e-8
    op_margin: float = 0.05
    purity_tol: float = 1e-8
    step_tol: float = math.inf
    max_halvings: int = 0


@dataclass
class RunConfig:
    """Everything needed to reproduce one sweep.

    ``potential`` is either a catalog name or a PotentialSpec document.
    ``N`` lists the macroscopic grid size per entry of ``h``; when empty
    each N is the smallest power of two with ``rho`` points per pair.
    ``dt`` is one BCS time step for every h or a list with one per h.
    ``g_override`` replaces the computed coupling on the GP side.
    """

    d: int = 1
    potential: str | dict = "gaussian_well"
    W: dict = field(default_factory=lambda: {"kind": "cosine", "amplitude": 1.0})
    psi0: dict = field(default_factory=lambda: {"kind": "gaussian", "center": 0.0, "width": 1.0, "amplitude": 1.0})
    h: list = field(default_factory=lambda: [0.25, 0.125, 0.0625])
    L_X: float = 8.0
    N: list = field(default_factory=list)
    rho: float = 8.0
    micro: MicroConfig = field(default_factory=MicroConfig)
    T: float = 1.0
    dt: float | list = 0.005
    gp_dt: float = 5e-5
    checkpoints: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    scheme: str = "etd4"
    tolerances: Tolerances = field(default_factory=Tolerances)
    g_override: float | None = None
    save_fields: bool = False
    out: str = "out"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.micro, dict):
            self.micro = MicroConfig(**self.micro)
        if isinstance(self.tolerances, dict):
            self.tolerances = Tolerances(**self.tolerances)
        if self.tolerances.step_tol is None:
            self.tolerances.step_tol = math.inf
        self.h = [float(h) for h in self.h]
        self.checkpoints = sorted(float(t) for t in self.checkpoints)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(out["tolerances"]["step_tol"]):
            out["tolerances"]["step_tol"] = None
        return out

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def interaction(self) -> PotentialSpec:
        if isinstance(self.potential, str):
            stock = catalog()
            if self.potential not in stock:
                raise ValueError(f"unknown catalog potential {self.potential!r}; choose from {sorted(stock)}")
            return stock[self.potential]
        return PotentialSpec.from_dict(self.potential)

    def external(self) -> ExternalPotential:
        return ExternalPotential.from_dict(self.W or {"kind": "zero"})

    def micro_grid(self) -> MicroGrid:
        return MicroGrid(self.d, self.micro.L, self.micro.N)

    def grid_size(self, h: float) -> int:
        if self.N:
            if len(self.N) != len(self.h):
                raise ValueError("N must list one size per h")
            return int(self.N[self.h.index(h)])
        need = self.rho * self.L_X / h
        return int(2 ** math.ceil(math.log2(need - 1e-9)))

    def time_step(self, h: float) -> float:
        if isinstance(self.dt, list):
            if len(self.dt) != len(self.h):
                raise ValueError("dt must list one step per h")
            return float(self.dt[self.h.index(h)])
        return float(self.dt)

    def macro_grid(self, h: float) -> MacroGrid:
        return MacroGrid(self.d, self.L_X, self.grid_size(h), h, rho_min=self.rho)

    def validate(self):
        """Raise ValueError or ResolutionError on inconsistent settings."""
        if self.scheme not in ("strang_rk2", "rk4", "etd2", "etd4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.T < 0 or self.gp_dt <= 0 or any(self.time_step(h) <= 0 for h in self.h):
            raise ValueError("need T >= 0 and positive time steps")
        if any(t < 0 or t > self.T + 1e-12 for t in self.checkpoints):
            raise ValueError("checkpoint times must lie in [0, T]")
        for h in self.h:
            self.macro_grid(h).check_resolution()
        self.interaction()
        self.external()
        initial_profile(self.psi0, np.zeros(1), self.L_X)


def initial_profile(spec: dict, x: np.ndarray, length: float) -> np.ndarray:
    """psi0 sampled at ``x``; ``amplitude`` is the L2 norm for the Gaussian kinds."""
    kind = spec.get("kind", "gaussian")
    amp = spec.get("amplitude", 1.0)
    if kind == "zero":
        return np.zeros_like(x, dtype=complex)
    if kind == "gaussian":
        w, c = spec.get("width", 1.0), spec.get("center", 0.0)
        return amp * (np.pi * w * w) ** -0.25 * np.exp(-0.5 * ((x - c) / w) ** 2) + 0j
    if kind == "two_bump":
        w = spec.get("width", 0.7)
        centers = spec.get("centers", [-1.5, 1.5])
        bump = sum(np.exp(-0.5 * ((x - c) / w) ** 2) for c in centers)
        gram = sum(np.exp(-((a - b) / (2 * w)) ** 2) for a in centers for b in centers)
        return amp * bump / np.sqrt(gram * w * np.sqrt(np.pi)) + 0j
    if kind == "plane_wave":
        k = 2 * np.pi * spec.get("mode", 1) / length
        return amp * np.exp(1j * k * x) / np.sqrt(length)
    if kind == "tabulated":
        from .grids import spectral_interpolate
        values = np.asarray(spec["real"], dtype=float) + 1j * np.asarray(spec.get("imag", np.zeros(len(spec["real"]))))
        return spectral_interpolate(values, length, x)
    raise ValueError(f"unknown psi0 kind {kind!r}")
