"""Paired BCS/GP runs, h-sweeps and convergence reports."""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .config import RunConfig, initial_profile
from .dynamics import evolve
from .errors import BCSGPError, InsufficientData, StepRejected
from .extraction import ExtractionResult, compare_to_gp, extract_psi, l2_norm
from .fielddump import write_field
from .gp import GPField, gp_evolve
from .state import BCSState, bcs_energy, build_pairing, pure_state_from_pairing, sample_external
from .twobody import GroundState, coupling_constant_fourier, solve_ground_state

ZERO_ERR = 1e-12
CSV_COLUMNS = ("h", "t", "status", "err", "err_rel", "xi_l2_sq", "xi_l2_sq_over_h", "xi_h1_sq_times_h",
               "psi_l2", "psi_h1", "energy_condition_ratio", "tr_gamma", "tr_gamma_drift",
               "energy_drift", "purity_defect")


@dataclass
class InitialData:
    state: BCSState
    phi: GPField
    extraction: ExtractionResult
    energy_report: dict
    ground_state: GroundState
    g: float


def solve_two_body(config: RunConfig) -> GroundState:
    return solve_ground_state(config.interaction(), config.micro_grid(), tail_tol=config.tolerances.tail_tol,
                              method=config.micro.method)


def coupling_for(config: RunConfig, gs: GroundState) -> float:
    if config.g_override is not None:
        return float(config.g_override)
    return coupling_constant_fourier(gs, config.micro_grid())


def build_initial(config: RunConfig, h: float, gs: GroundState | None = None) -> InitialData:
    """Pure BCS state with pairing built from psi0 and the matching GP field.

    The energy report holds (E_BCS + E_b/2 Tr gamma)/h, the same remainder
    over h^3, and Tr(gamma) h.
    """
    gs = gs if gs is not None else solve_two_body(config)
    grid = config.macro_grid(h)
    grid.check_resolution()
    psi0 = initial_profile(config.psi0, grid.half_axis(), grid.L)
    tol = config.tolerances
    alpha = build_pairing(psi0, gs, h, grid, tail_tol=tol.tail_tol)
    state = pure_state_from_pairing(alpha, grid, op_margin=tol.op_margin, purity_tol=tol.purity_tol)
    extraction = extract_psi(state.alpha, gs, h, 0.0, grid, tail_tol=tol.tail_tol)
    phi = GPField(extraction.psi[::2].copy(), grid.L)
    energy = bcs_energy(state, config.interaction(), config.external(), h)
    tr = state.trace()
    remainder = energy + 0.5 * gs.E_b * tr
    report = {
        "energy_bcs": energy,
        "tr_gamma": tr,
        "tr_gamma_times_h": tr * h,
        "energy_condition_ratio": remainder / h,
        "energy_remainder_over_h3": remainder / h ** 3,
        "alpha_op_norm": float(np.linalg.norm(state.alpha, 2)) if tr > 0 else 0.0,
    }
    return InitialData(state, phi, extraction, report, gs, coupling_for(config, gs))


@dataclass
class PairResult:
    h: float
    rows: list
    energy_report: dict
    drift: dict
    runtime: float
    error: str | None = None


def _gp_stride(dt: float) -> int:
    """GP diagnostics every 0.01 time units."""
    return max(1, int(round(0.01 / dt)))


def _row(h, t, status, **values):
    row = {c: None for c in CSV_COLUMNS}
    row.update(h=h, t=t, status=status, **values)
    return row


def run_pair(config: RunConfig, h: float, gs: GroundState | None = None, out_dir=None,
             mode: str = "bcs") -> PairResult:
    """Evolve both sides to every checkpoint and compare psi_t with phi_t.

    ``mode="gp_self"`` replaces the BCS side by a second GP run, which must
    give err = 0 exactly. Failures mark the remaining rows as failed.
    """
    start = time.perf_counter()
    init = build_initial(config, h, gs)
    grid = config.macro_grid(h)
    W_field = sample_external(config.external(), grid)
    times = sorted(set(config.checkpoints) | {0.0})
    T = max(times)

    stride = _gp_stride(config.gp_dt)
    gp = gp_evolve(init.phi, W_field, init.g, T, config.gp_dt, checkpoints=times, diag_stride=stride)
    rows, error, drift = [], None, {}
    if mode == "gp_self":
        twin = gp_evolve(init.phi, W_field, init.g, T, config.gp_dt, checkpoints=times, diag_stride=stride)
        for t in times:
            err = l2_norm(twin.checkpoints[t].phi - gp.checkpoints[t].phi, grid.L)
            rows.append(_row(h, t, "ok", err=err, err_rel=err / max(gp.checkpoints[t].mass ** 0.5, 1e-300),
                             psi_l2=twin.checkpoints[t].mass ** 0.5,
                             energy_condition_ratio=init.energy_report["energy_condition_ratio"]))
        return PairResult(h, rows, init.energy_report, {}, time.perf_counter() - start)

    gs_used = init.ground_state
    tail_tol = config.tolerances.tail_tol
    observers = {"extract": lambda t, s: extract_psi(s.alpha, gs_used, h, t, grid, tail_tol=tail_tol),
                 "tr_gamma": lambda t, s: s.trace(),
                 "purity": lambda t, s: s.purity_defect()}
    traj = None
    try:
        dt = config.time_step(h)
        traj = evolve(init.state, T, dt, config.interaction(), config.external(), scheme=config.scheme,
                      observers=observers, checkpoints=times, keep_states=False,
                      step_tol=config.tolerances.step_tol, max_halvings=config.tolerances.max_halvings,
                      diag_stride=max(1, int(round(0.1 / dt))), purity_diagnostics=False)
    except StepRejected as exc:
        traj, error = exc.trajectory, f"StepRejected: {exc}"
    except BCSGPError as exc:
        error = f"{type(exc).__name__}: {exc}"

    obs = traj.observations if traj is not None else {}
    tr0 = init.state.trace()
    if traj is not None and traj.energy:
        drift = traj.drift()
        drift.pop("purity", None)
    for t in times:
        res = obs.get("extract", {}).get(t)
        if res is None:
            rows.append(_row(h, t, f"failed: {error}" if error else "failed"))
            continue
        phi_t = gp.checkpoints[t]
        err = compare_to_gp(res, phi_t)
        tr = obs["tr_gamma"][t]
        rows.append(_row(
            h, t, "ok", err=err, err_rel=err / max(res.psi_l2, 1e-300),
            xi_l2_sq=res.xi_l2_sq, xi_l2_sq_over_h=res.xi_l2_sq / h, xi_h1_sq_times_h=res.xi_h1_sq * h,
            psi_l2=res.psi_l2, psi_h1=res.psi_h1,
            energy_condition_ratio=init.energy_report["energy_condition_ratio"],
            tr_gamma=tr, tr_gamma_drift=abs(tr - tr0) / tr0 if tr0 else 0.0,
            energy_drift=drift.get("energy"), purity_defect=obs["purity"][t]))
        if out_dir is not None and config.save_fields:
            tag = f"h{h:g}_t{t:g}"
            meta = grid.to_dict()
            write_field(Path(out_dir) / "fields" / f"psi_{tag}.c128", res.psi, meta, "psi", t, h)
            write_field(Path(out_dir) / "fields" / f"phi_{tag}.c128", phi_t.phi, meta, "phi", t, h)
    return PairResult(h, rows, init.energy_report, drift, time.perf_counter() - start, error)


def fit_slope(hs, errs, confidence: float = 0.95):
    """Least-squares slope of log err against log h and its confidence half-width."""
    x, y = np.log(np.asarray(hs, float)), np.log(np.asarray(errs, float))
    fit = stats.linregress(x, y)
    dof = len(x) - 2
    half = float(stats.t.ppf(0.5 + confidence / 2, dof) * fit.stderr) if dof > 0 else float("nan")
    return float(fit.slope), half


@dataclass
class ConvergenceReport:
    rows: list
    slopes: dict = field(default_factory=dict)
    energy_reports: dict = field(default_factory=dict)
    drift: dict = field(default_factory=dict)
    runtimes: dict = field(default_factory=dict)
    trivial: bool = False
    acceptance: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.acceptance.values())

    def to_dict(self) -> dict:
        return {"config": self.config, "slopes": {f"{t:g}": v for t, v in self.slopes.items()},
                "slope": self.slopes.get(max(self.slopes), {}).get("slope") if self.slopes else None,
                "trivial": self.trivial, "energy_condition_band": energy_condition_band(self),
                "energy_reports": {f"{h:g}": v for h, v in self.energy_reports.items()},
                "drift": {f"{h:g}": v for h, v in self.drift.items()},
                "runtime_s": {f"{h:g}": v for h, v in self.runtimes.items()},
                "acceptance": self.acceptance, "passed": self.passed, "rows": self.rows}

    def write(self, out_dir) -> Path:
        """report.json, report.csv and plot-ready CSVs under ``out_dir``."""
        out = Path(out_dir)
        (out / "plots").mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2, default=_jsonable) + "\n")
        _write_csv(out / "report.csv", self.rows, CSV_COLUMNS)
        ok = [r for r in self.rows if r["status"] == "ok"]
        _write_csv(out / "plots" / "err_vs_h.csv", ok, ("t", "h", "err", "err_rel"))
        _write_csv(out / "plots" / "residual_vs_t.csv", ok, ("h", "t", "xi_l2_sq_over_h", "xi_h1_sq_times_h", "psi_h1"))
        slope_rows = [{"t": t, **v} for t, v in sorted(self.slopes.items())]
        _write_csv(out / "plots" / "slope_vs_t.csv", slope_rows, ("t", "slope", "half_width", "n"))
        return out


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def _run_member(args):
    doc, h, mode = args
    config = RunConfig.from_dict(doc)
    try:
        return run_pair(config, h, mode=mode)
    except BCSGPError as exc:
        return PairResult(h, [_row(h, t, f"failed: {type(exc).__name__}: {exc}") for t in sorted(set(config.checkpoints) | {0.0})],
                          {}, {}, 0.0, str(exc))


def convergence_study(config: RunConfig, workers: int = 1, mode: str = "bcs", out_dir=None) -> ConvergenceReport:
    """run_pair for every h, then a slope fit per checkpoint time.

    Members run in separate processes when ``workers > 1``; the report is
    assembled after all of them finish, in h order.
    """
    if len(config.h) < 3:
        raise InsufficientData(f"need at least 3 h values, got {len(config.h)}")
    config.validate()
    doc = config.to_dict()
    jobs = [(doc, h, mode) for h in config.h]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_member, jobs))
    else:
        results = [_run_member(job) for job in jobs]

    rows = [r for res in sorted(results, key=lambda res: -res.h) for r in res.rows]
    report = ConvergenceReport(rows=rows, config=config.to_dict(),
                               energy_reports={res.h: res.energy_report for res in results},
                               drift={res.h: res.drift for res in results},
                               runtimes={res.h: res.runtime for res in results})
    fitted = []
    for t in sorted({r["t"] for r in rows}):
        ok = [r for r in rows if r["t"] == t and r["status"] == "ok"]
        if len(ok) < 3:
            raise InsufficientData(f"only {len(ok)} successful h rows at t = {t:g}")
        errs = [r["err"] for r in ok]
        if max(errs) <= ZERO_ERR:
            report.slopes[t] = {"slope": None, "half_width": None, "n": len(ok)}
            continue
        s, half = fit_slope([r["h"] for r in ok], errs)
        report.slopes[t] = {"slope": s, "half_width": half, "n": len(ok)}
        fitted.append(t)
    report.trivial = not fitted
    report.acceptance = acceptance_checks(report, mode)
    if out_dir is not None:
        report.write(out_dir)
    return report


def acceptance_checks(report: ConvergenceReport, mode: str = "bcs") -> dict:
    """Slope, residual band and H1 stability of one sweep."""
    checks = {}
    if report.trivial:
        checks["trivial_run"] = {"pass": mode == "gp_self", "value": 0.0}
        return checks
    t_last = max(t for t, v in report.slopes.items() if v["slope"] is not None)
    s = report.slopes[t_last]["slope"]
    checks["slope"] = {"pass": s >= 0.4, "value": s, "t": t_last, "threshold": 0.4}
    ok = [r for r in report.rows if r["status"] == "ok"]
    # xi vanishes identically at t = 0 for built initial data, so t = 0 is left out
    ratios = [r["xi_l2_sq_over_h"] for r in ok if r["t"] > 0 and r["xi_l2_sq_over_h"]]
    if ratios:
        band = max(ratios) / min(ratios)
        checks["xi_band"] = {"pass": band <= 3.0, "value": band, "threshold": 3.0,
                             "max_over_h": max(ratios)}
    h1_growth = []
    for h in {r["h"] for r in ok}:
        series = {r["t"]: r["psi_h1"] for r in ok if r["h"] == h}
        if 0.0 in series and series[0.0]:
            h1_growth.append(max(series.values()) / series[0.0])
    if h1_growth:
        checks["psi_h1_growth"] = {"pass": max(h1_growth) <= 2.0, "value": max(h1_growth), "threshold": 2.0}
    return checks


def energy_condition_band(report: ConvergenceReport) -> float | None:
    """max/min of (E_BCS + E_b/2 Tr gamma)/h across the sweep."""
    ecr = [abs(v["energy_condition_ratio"]) for v in report.energy_reports.values() if v]
    if not ecr or min(ecr) == 0:
        return None
    return max(ecr) / min(ecr)
