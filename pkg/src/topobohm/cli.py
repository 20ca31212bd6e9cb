"""Command line entry point: ``topobohm <subcommand> --config F --out DIR``.

Every run writes its artifacts plus ``report.json`` into DIR and exits 0 iff
all of its checks pass.  Failures are also printed to stderr as one JSON
object.  Set TOPOBOHM_LOG (DEBUG, INFO, WARNING, ...) for log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bohm import Status, check_projectability, iter_ensemble
from .checks import run_algebra_checks
from .config import ConfigError, ScenarioConfig, describe_factor, load_config, shipped_scenarios
from .equivariance import DROP_BUDGET, equivariance_test, sample_initial
from .evolution import InadmissibleError, check_periodicity_preserved, evolve, ring_levels, spectrum
from .formats import TrajectoryWriter, fmt, write_checkpoint, write_json, write_keyvalue, write_wave_csv
from .geometry import Kind

log = logging.getLogger("topobohm")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
PERIODICITY_STEPS = 100
# relative error is undefined for a zero exact level; it gets an absolute bound
ZERO_LEVEL_TOL = 1e-10


@dataclass
class RunReport:
    subcommand: str
    scenario: dict
    seed: int
    threads: int
    versions: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def check(self, name: str, value, threshold, passed, kind: str = "max") -> None:
        self.checks.append({"name": name, "value": value, "threshold": threshold, "pass": passed, "kind": kind})

    def failures(self) -> list[dict]:
        return [c for c in self.checks if c["pass"] is False]

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "scenario": self.scenario,
            "seed": self.seed,
            "threads": self.threads,
            "versions": self.versions,
            "timings": self.timings,
            "checks": self.checks,
            "results": self.results,
            "warnings": self.warnings,
            "pass": not self.failures(),
        }


class _Timer:
    def __init__(self, report: RunReport, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.report.timings[self.name] = time.perf_counter() - self.t0


def versions() -> dict:
    return {"topobohm": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _max_check(report: RunReport, name: str, value: float, threshold: float) -> None:
    report.check(name, float(value), threshold, bool(value < threshold))


def _need_geometry(cfg: ScenarioConfig, sub: str) -> None:
    if cfg.geometry is None:
        raise ConfigError(f"'{sub}' needs a [geometry] block; {cfg.name} has only [algebra]")


# -- subcommands -----------------------------------------------------------------------


def run_spectrum(cfg: ScenarioConfig, out: Path, report: RunReport, args) -> None:
    _need_geometry(cfg, "spectrum")
    with _Timer(report, "assemble"):
        h = cfg.hamiltonian()
    _max_check(report, "hermiticity_residual", h.hermiticity_residual(), 1e-12)
    k = cfg.numerics.spectrum_count
    with _Timer(report, "spectrum"):
        pairs = spectrum(h, k)
    energies = [e for e, _ in pairs]
    geo = h.grid.geometry
    exact = None
    if geo.kind is Kind.RING and cfg.factor.kind == "character" and cfg.potential.kind == "none":
        exact = ring_levels(cfg.factor.beta, k, geo.radius, geo.mass, geo.hbar)
    lines = ["index,energy" + (",exact,error" if exact is not None else "")]
    for j, e in enumerate(energies):
        if exact is None:
            lines.append(f"{j},{fmt(e)}")
        else:
            lines.append(f"{j},{fmt(e)},{fmt(exact[j])},{fmt(abs(e - exact[j]))}")
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n")
    write_wave_csv(out / "ground_state.csv", pairs[0][1], describe_factor(cfg))
    report.results["energies"] = energies
    report.results["lowest_energy"] = energies[0]
    if exact is not None:
        report.results["exact"] = list(map(float, exact))
        rel = [abs(e - x) / abs(x) for e, x in zip(energies, exact) if x != 0]
        zero = [abs(e) for e, x in zip(energies, exact) if x == 0]
        if rel:
            _max_check(report, "ring_level_relative_error", max(rel), 1e-3)
        if zero:
            _max_check(report, "ring_zero_level_abs_error", max(zero), ZERO_LEVEL_TOL)
    elif geo.kind is not Kind.RING and cfg.potential.kind == "none":
        report.check("dirichlet_positive", energies[0], 0.0, bool(energies[0] > 0), kind="min")


def run_evolve(cfg: ScenarioConfig, out: Path, report: RunReport, args) -> None:
    _need_geometry(cfg, "evolve")
    nb = cfg.numerics
    t_final = args.t_final if args.t_final is not None else nb.t_final
    with _Timer(report, "assemble"):
        h = cfg.hamiltonian()
        psi0 = cfg.initial_wave(h)
    _max_check(report, "hermiticity_residual", h.hermiticity_residual(), 1e-12)
    steps = int(round(t_final / nb.dt))
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    factor = describe_factor(cfg)
    check_at = min(steps, PERIODICITY_STEPS)
    psi_check = psi0
    n0 = psi0.norm()
    worst_step = 0.0
    prev = n0
    with _Timer(report, "evolve"):
        for k, psi in enumerate(evolve(psi0, h, nb.dt, steps, solver=nb.solver, tol=nb.tol, maxiter=nb.maxiter)):
            n = psi.norm()
            worst_step = max(worst_step, abs(n - prev))
            prev = n
            if k == check_at:
                psi_check = psi
            if k % nb.record_every == 0 or k == steps:
                write_wave_csv(snaps / f"wave_{k:07d}.csv", psi, factor)
    final = psi
    write_checkpoint(out / "final.cwave", final)
    drift = abs(final.norm() - n0)
    _max_check(report, "norm_drift_per_step", worst_step, 1e-10)
    _max_check(report, "norm_drift_total", drift, 1e-7)
    with _Timer(report, "periodicity_oracle"):
        resid = check_periodicity_preserved(psi_check, psi0, cfg.potential_field(h.grid), nb.dt, check_at)
    _max_check(report, f"periodicity_residual_{check_at}_steps", resid, 1e-8)
    report.results.update({"steps": steps, "final_time": final.time, "final_norm": final.norm()})


def run_trajectories(cfg: ScenarioConfig, out: Path, report: RunReport, args) -> None:
    _need_geometry(cfg, "trajectories")
    nb = cfg.numerics
    n = args.n if args.n is not None else nb.n
    t_final = args.t_final if args.t_final is not None else nb.t_final
    with _Timer(report, "assemble"):
        h = cfg.hamiltonian()
        psi0 = cfg.initial_wave(h)
    _max_check(report, "projectability_residual", check_projectability(psi0), 1e-10)
    q0 = sample_initial(psi0, n, report.seed)
    steps = int(round(t_final / nb.dt))
    waves = evolve(psi0, h, nb.dt, steps, solver=nb.solver, tol=nb.tol, maxiter=nb.maxiter)
    ids = np.arange(n)
    with _Timer(report, "integrate"), TrajectoryWriter(out / "trajectories.csv") as writer:
        state = None
        was_running = np.ones(n, dtype=bool)
        for k, state in enumerate(iter_ensemble(q0, waves, t_final, threads=report.threads)):
            running = state.status == Status.RUNNING
            stopped = was_running & ~running
            if stopped.any():
                idx = ids[stopped]
                writer.write(idx, state.time, state.positions[idx], state.windings[idx], [Status(c).label for c in state.status[idx]])
            last = k == steps
            if k % nb.record_every == 0 and not last:
                idx = ids[running]
                writer.write(idx, state.time, state.positions[idx], state.windings[idx], [Status.RUNNING.label] * idx.size)
            was_running = running
        idx = ids[was_running]
        writer.write(idx, state.time, state.positions[idx], state.windings[idx], [Status.FINISHED.label] * idx.size)
    codes = state.status
    reasons = {s.label: int(np.sum(codes == s)) for s in (Status.NODAL, Status.LEFT)}
    dropped = sum(reasons.values())
    report.results.update({"n": n, "t_final": t_final, "finished": int(was_running.sum()), "dropped": dropped, "drop_reasons": reasons})
    _max_check(report, "drop_fraction", dropped / n, DROP_BUDGET + 1e-15)


def run_equivariance(cfg: ScenarioConfig, out: Path, report: RunReport, args) -> None:
    _need_geometry(cfg, "equivariance")
    nb = cfg.numerics
    n = args.n if args.n is not None else nb.n
    with _Timer(report, "assemble"):
        h = cfg.hamiltonian()
        psi0 = cfg.initial_wave(h)
    with _Timer(report, "equivariance"), warnings.catch_warnings():
        # small-n warnings are carried in the report and logged once below
        warnings.simplefilter("ignore")
        comp = equivariance_test(
            psi0, h, nb.dt, n, nb.times, report.seed, velocity_scale=args.velocity_scale, threads=report.threads, raise_on_drops=False
        )
    report.warnings += comp.warnings
    write_json(out / "equivariance.json", comp.to_dict())
    lines = ["time,bin,empirical,target"]
    lines += [f"{fmt(t)},{b},{fmt(e)},{fmt(p)}" for t, b, e, p in comp.histograms]
    (out / "histograms.csv").write_text("\n".join(lines) + "\n")
    state = comp.ensemble
    keep = np.flatnonzero(state.status == Status.FINISHED)
    with TrajectoryWriter(out / "ensemble.csv") as writer:
        writer.write(keep, state.time, state.positions[keep], state.windings[keep], [Status.FINISHED.label] * keep.size)
    for t, s, c, p in zip(comp.times, comp.statistics, comp.thresholds, comp.passed):
        report.check(f"{comp.kind}_t={t:g}", s, c, bool(p))
    _max_check(report, "drop_fraction", comp.dropped / n, DROP_BUDGET + 1e-15)
    report.results.update(comp.to_dict())


def run_algebra(cfg: ScenarioConfig, out: Path, report: RunReport, args) -> None:
    if cfg.algebra is None:
        raise ConfigError(f"'algebra-check' needs an [algebra] block; {cfg.name} has none")
    with _Timer(report, "algebra"):
        rows = run_algebra_checks(cfg.algebra, report.seed)
    write_keyvalue(out / "algebra.txt", rows)
    for row in rows:
        report.check(row["name"], row["value"], row["threshold"], row["pass"], kind="residual")
        report.results[row["name"]] = row["residual"]


COMMANDS = {
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "trajectories": run_trajectories,
    "equivariance": run_equivariance,
    "algebra-check": run_algebra,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topobohm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML file or shipped scenario name")
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=1)
        if name in ("trajectories", "equivariance"):
            p.add_argument("--n", type=int, default=None, help="ensemble size")
        if name in ("trajectories", "evolve"):
            p.add_argument("--t-final", type=float, default=None)
        if name == "equivariance":
            p.add_argument("--velocity-scale", type=float, default=1.0, help="negative control: scale the velocity")
    sub.add_parser("scenarios", help="list the shipped scenarios")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("TOPOBOHM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        print("\n".join(shipped_scenarios()))
        return EXIT_OK
    if args.threads < 1:
        print(json.dumps({"error": "--threads must be >= 1"}), file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    seed = cfg.seed if args.seed is None else args.seed
    report = RunReport(args.command, {"name": cfg.name, **cfg.echo()}, seed, args.threads, versions())
    args.out.mkdir(parents=True, exist_ok=True)
    log.info("%s on %s -> %s", args.command, cfg.name, args.out)
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](cfg, args.out, report, args)
    except (ConfigError, InadmissibleError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    report.timings["total"] = time.perf_counter() - t0
    for w in report.warnings:
        log.warning(w)
    write_json(args.out / "report.json", report.to_dict())
    failures = report.failures()
    if failures:
        print(json.dumps({"failures": failures}, default=float), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
