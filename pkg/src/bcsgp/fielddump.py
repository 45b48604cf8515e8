"""Binary field dumps: raw little-endian complex128 plus a JSON sidecar."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_field(path, values: np.ndarray, grid: dict, role: str, t: float | None = None,
                h: float | None = None, extra: dict | None = None) -> Path:
    """Write ``values`` row-major as interleaved LE f64 pairs; returns the data path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(values, dtype="<c16")
    arr.tofile(path)
    meta = {"shape": list(arr.shape), "dtype": "c128", "byte_order": "LE",
            "grid": grid, "role": role, "t": t, "h": h}
    if extra:
        meta["extra"] = extra
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_field(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    if meta.get("dtype") != "c128" or meta.get("byte_order") != "LE":
        raise ValueError(f"unsupported dump encoding in {path}")
    values = np.fromfile(path, dtype="<c16")
    shape = tuple(meta["shape"])
    if values.size != int(np.prod(shape)):
        raise ValueError(f"{path}: {values.size} values for shape {shape}")
    return values.reshape(shape).astype(complex), meta
