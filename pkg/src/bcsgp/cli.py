"""Command line entry point: ``bcsgp <subcommand> [options]``.

Exit codes: 0 pass, 2 acceptance failure, 1 error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="RunConfig JSON document")
    common.add_argument("--out", type=Path, help="output directory (default $BCSGP_OUT or config.out)")
    common.add_argument("--threads", type=int, help="BLAS/FFT threads (default $BCSGP_THREADS)")
    common.add_argument("--dim", type=int, choices=(1, 2), help="override the dimension in the config")
    common.add_argument("--dry-run", action="store_true", help="validate the config and print the plan")

    parser = argparse.ArgumentParser(prog="bcsgp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ground-state", parents=[common], help="solve the two-body problem and report its data")
    sub.add_parser("coupling", parents=[common], help="coupling constant by both formulas")
    p = sub.add_parser("evolve-bcs", parents=[common], help="evolve the BCS state for one h")
    p.add_argument("--h", type=float, help="dilution parameter (default: first h in the config)")
    sub.add_parser("evolve-gp", parents=[common], help="evolve the GP equation")
    p = sub.add_parser("compare", parents=[common], help="paired BCS/GP run for one h")
    p.add_argument("--h", type=float, help="dilution parameter (default: first h in the config)")
    p = sub.add_parser("sweep", parents=[common], help="convergence study over the h list")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep members")
    p.add_argument("--mode", choices=("bcs", "gp_self"), default="bcs")
    sub.add_parser("validate", parents=[common], help="run the fast invariant suite")
    return parser


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("BCSGP_THREADS")
    return int(env) if env else None


def _load_config(args):
    from .config import RunConfig

    config = RunConfig.load(args.config) if args.config else RunConfig()
    if args.dim is not None:
        config.d = args.dim
    out = args.out or os.environ.get("BCSGP_OUT") or config.out
    config.out = str(out)
    return config


def _emit(payload: dict):
    print(json.dumps(payload, indent=2, default=float))


def _require_1d(config, what: str):
    if config.d != 1:
        raise ValueError(f"{what} is implemented for d = 1 only")


def _plan(config) -> dict:
    def steps(h):
        return int(round(config.T / config.time_step(h))) if config.T else 0

    return {"d": config.d, "potential": config.potential, "scheme": config.scheme, "T": config.T,
            "checkpoints": config.checkpoints, "out": config.out,
            "grids": [{"h": h, "N": config.grid_size(h), "L": config.L_X, "dt": config.time_step(h),
                       "steps": steps(h)} for h in config.h]}


def cmd_ground_state(args, config) -> int:
    from .fielddump import write_field
    from .harness import solve_two_body
    from .twobody import check_isolated_bound_state

    gs = solve_two_body(config)
    report = check_isolated_bound_state(config.interaction(), gs).to_dict()
    report.update(g=gs.g, residual=gs.residual, representation=gs.representation)
    out = Path(config.out)
    write_field(out / "alpha0.c128", gs.alpha0, gs.grid.to_dict(), "alpha0",
                extra={"E_b": gs.E_b, "kappa": gs.kappa, "g": gs.g})
    _emit(report)
    return EXIT_PASS


def cmd_coupling(args, config) -> int:
    import numpy as np

    from .harness import solve_two_body
    from .twobody import coupling_constant_convolution, coupling_constant_fourier

    gs = solve_two_body(config)
    grid = config.micro_grid()
    g_f = coupling_constant_fourier(gs, grid)
    g_c = coupling_constant_convolution(gs, config.interaction(), grid, cross_tol=np.inf)
    rel = abs(g_c - g_f) / abs(g_f)
    print(f"g_fourier = {g_f:.15g}")
    print(f"g_conv    = {g_c:.15g}")
    print(f"|diff|/g  = {rel:.3e}")
    return EXIT_PASS if rel <= 1e-8 else EXIT_FAIL


def _pick_h(args, config) -> float:
    return args.h if getattr(args, "h", None) is not None else config.h[0]


def cmd_evolve_bcs(args, config) -> int:
    from .dynamics import evolve
    from .fielddump import write_field
    from .harness import _write_csv, build_initial

    _require_1d(config, "BCS dynamics")
    h = _pick_h(args, config)
    init = build_initial(config, h)
    dt = config.time_step(h)
    traj = evolve(init.state, config.T, dt, config.interaction(), config.external(), scheme=config.scheme,
                  checkpoints=config.checkpoints, diag_stride=max(1, int(round(0.1 / dt))),
                  step_tol=config.tolerances.step_tol, max_halvings=config.tolerances.max_halvings)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / f"bcs_h{h:g}.csv", list(traj.rows()),
               ("t", "tr_gamma", "energy", "purity_defect", "symmetry_defect"))
    if config.save_fields:
        for t, state in traj.checkpoints.items():
            meta = init.state.grid.to_dict()
            write_field(out / "fields" / f"alpha_h{h:g}_t{t:g}.c128", state.alpha, meta, "alpha", t, h)
            write_field(out / "fields" / f"gamma_h{h:g}_t{t:g}.c128", state.gamma, meta, "gamma", t, h)
    _emit({"h": h, "drift": traj.drift(), "steps": traj.steps, "runtime_s": traj.runtime})
    return EXIT_PASS


def cmd_evolve_gp(args, config) -> int:
    import numpy as np

    from .config import initial_profile
    from .gp import GPField, gp_evolve
    from .grids import centered_axis
    from .harness import _gp_stride, _write_csv, coupling_for, solve_two_body

    gs = solve_two_body(config)
    g = coupling_for(config, gs)
    n = config.grid_size(config.h[0])
    x = centered_axis(n, config.L_X)
    if config.d == 1:
        phi0 = initial_profile(config.psi0, x, config.L_X)
        W = config.external().sample(x, config.L_X)
    else:
        grids = np.meshgrid(*([x] * config.d), indexing="ij")
        # product data keeps the profile normalized in every dimension
        phi0 = np.prod([initial_profile(config.psi0, c, config.L_X) for c in grids], axis=0)
        W = sum(config.external().sample(c, config.L_X) for c in grids)
    traj = gp_evolve(GPField(phi0, config.L_X), W, g, config.T, config.gp_dt, checkpoints=config.checkpoints,
                     diag_stride=_gp_stride(config.gp_dt))
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "gp.csv", list(traj.rows()), ("t", "mass", "energy", "h1_norm"))
    e = np.asarray(traj.energy)
    _emit({"g": g, "N": n, "mass_drift": float(np.ptp(traj.mass) / traj.mass[0]),
           "energy_drift": float(np.max(np.abs(e - e[0])) / abs(e[0])) if e[0] else 0.0})
    return EXIT_PASS


def cmd_compare(args, config) -> int:
    from .harness import _write_csv, CSV_COLUMNS, run_pair

    _require_1d(config, "the paired comparison")
    h = _pick_h(args, config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_pair(config, h, out_dir=out)
    _write_csv(out / f"compare_h{h:g}.csv", result.rows, CSV_COLUMNS)
    _emit({"h": h, "rows": result.rows, "energy_report": result.energy_report, "drift": result.drift,
           "runtime_s": result.runtime, "error": result.error})
    return EXIT_PASS if result.error is None else EXIT_ERROR


def cmd_sweep(args, config) -> int:
    from .harness import convergence_study

    _require_1d(config, "the convergence sweep")
    report = convergence_study(config, workers=args.workers, mode=args.mode, out_dir=config.out)
    for name, check in report.acceptance.items():
        print(f"{'PASS' if check['pass'] else 'FAIL'} {name}: {check['value']}")
    print(f"report written to {Path(config.out) / 'report.json'}")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_validate(args, config) -> int:
    from .validation import run_checks

    checks = run_checks()
    for check in checks:
        print(check.line())
    return EXIT_PASS if all(c.passed for c in checks) else EXIT_FAIL


COMMANDS = {"ground-state": cmd_ground_state, "coupling": cmd_coupling, "evolve-bcs": cmd_evolve_bcs,
            "evolve-gp": cmd_evolve_gp, "compare": cmd_compare, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = _threads(args)
    try:
        config = _load_config(args)
        config.validate()
        if args.dry_run:
            _emit(_plan(config))
            return EXIT_PASS
        if threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=threads):
                return COMMANDS[args.command](args, config)
        return COMMANDS[args.command](args, config)
    except Exception as exc:  # noqa: BLE001, reported as exit code 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
