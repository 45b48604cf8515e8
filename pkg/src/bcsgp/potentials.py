"""Catalog of pair interactions V and external potentials W.

Interactions are radial, ``V(r) = v(|r|)``, and are built from small JSON
documents such as ``{"kind": "square_well", "depth": 2.0, "radius": 1.0}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import j1

from .grids import MicroGrid, spectral_interpolate


@dataclass
class PotentialSpec:
    """Pair interaction V plus an optional external potential W.

    ``kind`` is one of ``square_well``, ``gaussian_well``, ``tabulated``
    or ``sampled``. The last one wraps explicit samples on a MicroGrid
    and is mostly useful for diagnostics.
    """

    kind: str
    params: dict = field(default_factory=dict)
    W: "ExternalPotential | None" = None
    samples: np.ndarray | None = None
    sample_grid: MicroGrid | None = None

    def __post_init__(self):
        if self.kind not in ("square_well", "gaussian_well", "tabulated", "sampled"):
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.kind == "tabulated":
            r = np.asarray(self.params["r"], dtype=float)
            v = np.asarray(self.params["V"], dtype=float)
            if r[0] != 0 or np.any(np.diff(r) <= 0):
                raise ValueError("tabulated r must start at 0 and increase")
            # zero slope at the origin keeps the radial profile smooth
            self._spline = CubicSpline(r, v, bc_type=((1, 0.0), (1, 0.0)))
            self._r_max = r[-1]
        if self.kind == "sampled" and (self.samples is None or self.sample_grid is None):
            raise ValueError("sampled interaction needs samples and sample_grid")

    @classmethod
    def from_dict(cls, doc: dict) -> "PotentialSpec":
        doc = dict(doc)
        kind = doc.pop("kind")
        w_doc = doc.pop("W", None)
        W = ExternalPotential.from_dict(w_doc) if w_doc is not None else None
        return cls(kind=kind, params=doc, W=W)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **{k: v for k, v in self.params.items()}}
        if self.W is not None:
            out["W"] = self.W.to_dict()
        return out

    @classmethod
    def from_samples(cls, grid: MicroGrid, values: np.ndarray) -> "PotentialSpec":
        return cls(kind="sampled", samples=np.asarray(values, dtype=float), sample_grid=grid)

    @property
    def representation(self) -> str:
        """``galerkin`` for discontinuous wells, ``collocation`` otherwise."""
        return "galerkin" if self.kind == "square_well" else "collocation"

    def profile(self, s) -> np.ndarray:
        """V at distance ``s`` (continuous in s for every kind but ``sampled``)."""
        s = np.abs(np.asarray(s, dtype=float))
        p = self.params
        if self.kind == "square_well":
            out = np.where(s < p["radius"], -p["depth"], 0.0)
            # the midpoint value on the jump keeps collocation second order
            return np.where(s == p["radius"], -0.5 * p["depth"], out)
        if self.kind == "gaussian_well":
            return -p["depth"] * np.exp(-0.5 * (s / p["width"]) ** 2)
        if self.kind == "tabulated":
            inside = s <= self._r_max
            return np.where(inside, self._spline(np.minimum(s, self._r_max)), 0.0)
        grid = self.sample_grid
        if grid.d != 1:
            raise NotImplementedError("resampling explicit samples is 1D only")
        if np.any(s > grid.L / 2):
            raise ValueError("sampled interaction queried outside its box")
        return spectral_interpolate(self.samples, grid.L, s)

    def fourier(self, k: np.ndarray, d: int) -> np.ndarray | None:
        """Continuum Fourier transform of V at |k|, when known in closed form."""
        k = np.abs(np.asarray(k, dtype=float))
        p = self.params
        if self.kind == "square_well":
            a, v0 = p["radius"], p["depth"]
            ka = k * a
            small = ka < 1e-4
            safe = np.where(small, 1.0, k)
            if d == 1:
                val = 2 * np.sin(ka) / safe
                lim = 2 * a * (1 - ka ** 2 / 6)
            elif d == 2:
                val = 2 * np.pi * a * j1(ka) / safe
                lim = np.pi * a ** 2 * (1 - ka ** 2 / 8)
            else:
                val = 4 * np.pi * (np.sin(ka) - ka * np.cos(ka)) / safe ** 3
                lim = 4 * np.pi * a ** 3 / 3 * (1 - ka ** 2 / 10)
            return -v0 * np.where(small, lim, val)
        if self.kind == "gaussian_well":
            w = p["width"]
            return -p["depth"] * (2 * np.pi * w * w) ** (d / 2) * np.exp(-0.5 * (k * w) ** 2)
        return None

    def sample(self, grid: MicroGrid) -> np.ndarray:
        if self.kind == "sampled":
            if grid != self.sample_grid:
                raise ValueError("sampled interaction lives on a different grid")
            return self.samples
        return self.profile(grid.radius())


@dataclass
class ExternalPotential:
    """Macroscopic trap W(X) on the periodic box.

    Kinds: ``zero``, ``cosine`` (``amplitude*(1 - cos(2 pi X / L))/2``,
    a smooth confining bump with minimum at the center), ``gaussian_bump``
    and ``tabulated`` (values on the N-point macroscopic axis).
    """

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExternalPotential":
        doc = dict(doc)
        return cls(kind=doc.pop("kind"), params=doc)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def sample(self, x: np.ndarray, length: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "cosine":
            # centered axis: X = 0 is the trap minimum
            return 0.5 * p.get("amplitude", 1.0) * (1 - np.cos(2 * np.pi * x / length))
        if self.kind == "gaussian_bump":
            c = p.get("center", 0.0)
            return p["amplitude"] * np.exp(-0.5 * ((x - c) / p["width"]) ** 2)
        if self.kind == "tabulated":
            values = np.asarray(p["values"], dtype=float)
            return spectral_interpolate(values, length, x)
        raise ValueError(f"unknown external potential kind {self.kind!r}")


def catalog() -> dict:
    """The stock interactions used in tests and demos."""
    return {
        "square_well": PotentialSpec("square_well", {"depth": 2.0, "radius": 1.0}),
        "gaussian_well": PotentialSpec("gaussian_well", {"depth": 6.0, "width": 1.0}),
        "shallow_gaussian": PotentialSpec("gaussian_well", {"depth": 3.0, "width": 1.5}),
        "tabulated_dip": _tabulated_dip(),
    }


def _tabulated_dip(depth: float = 6.0, reach: float = 4.0, points: int = 41) -> PotentialSpec:
    r = np.linspace(0.0, reach, points)
    v = -depth * np.exp(-r ** 2) * (1 - (r / reach) ** 2) ** 2
    return PotentialSpec("tabulated", {"r": r.tolist(), "V": v.tolist()})
