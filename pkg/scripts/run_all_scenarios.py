"""Run a subcommand over every shipped PDE scenario and print one line each.

    python3 scripts/run_all_scenarios.py --out runs/ [--subcommand equivariance] [--threads 1]
"""

import argparse
import json
import time
from pathlib import Path

from topobohm import cli
from topobohm.config import load_config, shipped_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--subcommand", default="equivariance", choices=["spectrum", "evolve", "trajectories", "equivariance"])
    ap.add_argument("--threads", default="1")
    args = ap.parse_args()
    names = [n for n in shipped_scenarios() if load_config(n).geometry is not None]
    worst = 0
    for name in names:
        t0 = time.perf_counter()
        code = cli.main([args.subcommand, "--config", name, "--out", str(args.out / name), "--threads", args.threads])
        report = json.loads((args.out / name / "report.json").read_text()) if code != 2 else {"checks": []}
        checks = " ".join(f"{c['name']}={c['value']:.3g}" for c in report["checks"] if isinstance(c["value"], float))
        print(f"{name:26s} exit={code} {time.perf_counter() - t0:6.1f}s {checks}")
        worst = max(worst, code)
    raise SystemExit(worst)


if __name__ == "__main__":
    main()
