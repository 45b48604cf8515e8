"""Run the flagship sweep and optionally pin its errors as regression goldens.

    python scripts/pilot_sweep.py --config configs/default_1d.json --out out/pilot --pin
"""
import argparse
import json
from pathlib import Path

from bcsgp.config import RunConfig
from bcsgp.harness import convergence_study

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden" / "pilot.json"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=Path("configs/default_1d.json"))
    parser.add_argument("--out", type=Path, default=Path("out/pilot"))
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--pin", action="store_true", help=f"write {GOLDEN.name} from this run")
    args = parser.parse_args()

    config = RunConfig.load(args.config)
    report = convergence_study(config, workers=args.workers, out_dir=args.out)
    for name, check in report.acceptance.items():
        print(f"{'PASS' if check['pass'] else 'FAIL'} {name}: {check['value']}")
    for h, seconds in sorted(report.runtimes.items()):
        print(f"h = {h:g}: {seconds:.0f} s")
    if args.pin:
        errs = {}
        for row in report.rows:
            if row["status"] == "ok":
                errs.setdefault(f"{row['h']:g}", {})[f"{row['t']:g}"] = row["err"]
        golden = {"config": str(args.config), "err": errs,
                  "slope": report.acceptance["slope"]["value"],
                  "xi_band": report.acceptance.get("xi_band", {}).get("value"),
                  "psi_h1_growth": report.acceptance.get("psi_h1_growth", {}).get("value"),
                  "energy_condition_band": report.to_dict()["energy_condition_band"]}
        GOLDEN.parent.mkdir(parents=True, exist_ok=True)
        GOLDEN.write_text(json.dumps(golden, indent=2) + "\n")
        print(f"pinned {GOLDEN}")


if __name__ == "__main__":
    main()
