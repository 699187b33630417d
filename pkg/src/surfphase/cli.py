"""Command-line batch runner.

    surfphase run --config sweep.json --out results/ [--jobs N] [--seed S] [--strict]
    surfphase export-plotdata results/phi_curve.csv --kind phi [--out phi.csv]

Exit codes: 0 success, 1 invalid input, 2 solver flags raised under --strict.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .cellproblem import (
    PhiCurve,
    SolverOptions,
    cell_energy_breakdown,
    phi_point,
    solve_profile_1d,
    solve_profile_nd,
    sweep_phi,
)
from .fields import Grid
from .potential import PotentialSpec, check_assumptions
from .recovery import RecoveryConfig, covers_partially, probe_liminf, validate_limsup
from .sharpinterface import Laminate, SurfactantMeasure

log = logging.getLogger("surfphase")

TASKS = ("check-potential", "phi-1d", "phi-2d", "sweep", "recovery", "liminf-probe")
TOP_KEYS = {"task", "potential", "seed", "output", "solver", "gamma", "gammas", "n", "resolution", "grid",
            "samples", "recovery", "liminf", "warm_start", "perturb"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str
    potential: PotentialSpec
    raw: dict
    seed: int = 0
    output: str | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def resolved(self) -> dict:
        out = dict(self.raw)
        out["potential"] = self.potential.to_dict()
        out["solver"] = self.solver.to_dict()
        out["seed"] = self.seed
        return out


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(raw, seed)


def parse_config(raw: dict, seed: int | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    if "task" not in raw:
        raise ConfigError("missing field: task")
    if raw["task"] not in TASKS:
        raise ConfigError(f"field task: expected one of {', '.join(TASKS)}, got {raw['task']!r}")
    if "potential" not in raw:
        raise ConfigError("missing field: potential")
    try:
        pot = PotentialSpec.from_dict(raw["potential"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"field potential: {exc}") from None
    solver_raw = dict(raw.get("solver", {}))
    names = {f.name for f in fields(SolverOptions)}
    bad = sorted(set(solver_raw) - names)
    if bad:
        raise ConfigError(f"unknown solver field(s): {', '.join(bad)}")
    if "L_bracket" in solver_raw:
        solver_raw["L_bracket"] = tuple(solver_raw["L_bracket"])
    s = int(raw.get("seed", 0) if seed is None else seed)
    solver = replace(SolverOptions(**solver_raw), seed=s)
    if "perturb" in raw:
        solver = replace(solver, perturb=float(raw["perturb"]))
    cfg = RunConfig(raw["task"], pot, raw, s, raw.get("output"), solver)
    _check_task_fields(cfg)
    return cfg


def _require(raw: dict, key: str, where: str = ""):
    if key not in raw:
        raise ConfigError(f"missing field: {where}{key}")
    return raw[key]


def _check_task_fields(cfg: RunConfig) -> None:
    raw = cfg.raw
    if cfg.task in ("phi-1d", "phi-2d"):
        g = _require(raw, "gamma")
        if not isinstance(g, (int, float)) or g < 0:
            raise ConfigError("field gamma: expected a nonnegative number")
    if cfg.task == "phi-2d":
        grid = _require(raw, "grid")
        for k in ("n_prime", "n_last"):
            _require(grid, k, "grid.")
    if cfg.task == "sweep":
        gs = _require(raw, "gammas")
        if not isinstance(gs, list) or not gs:
            raise ConfigError("field gammas: expected a nonempty list")
        if any(b <= a for a, b in zip(gs, gs[1:])):
            raise ConfigError("field gammas: values must be strictly increasing")
    if cfg.task in ("recovery", "liminf-probe"):
        rec = _require(raw, "recovery")
        for k in ("epsilons", "laminate", "measure"):
            _require(rec, k, "recovery.")


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def _finite_row(row) -> list:
    for v in row:
        if isinstance(v, float) and not math.isfinite(v):
            raise RuntimeError(f"non-finite value {v} in an output row")
    return list(row)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(_finite_row(r))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    return str(o)


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def _task_check_potential(cfg: RunConfig, out: Path, jobs: int) -> tuple[list[str], list[str]]:
    rep = check_assumptions(cfg.potential, samples=int(cfg.raw.get("samples", 2000)), seed=cfg.seed)
    _write_csv(out / "assumptions.csv", ("hypothesis", "passed", "detail"),
               [(k, int(v), rep.details.get(k, "")) for k, v in rep.passed.items()])
    _write_json(out / "assumptions.json", rep.to_dict())
    flags = [f"hypothesis {k} failed" for k, v in rep.passed.items() if not v]
    return ["assumptions.csv", "assumptions.json"], flags


def _solution_rows(sols):
    for s in sols:
        d = s.summary()
        yield (repr(d["gamma"]), repr(d["phi"]), repr(d["lambda"]), repr(d["L"]), d["iterations"],
               repr(d["grad_norm"]))


CURVE_HEADER = ("gamma", "phi", "lambda", "L", "iterations", "grad_norm")


def _task_phi(cfg: RunConfig, out: Path, jobs: int, nd: bool) -> tuple[list[str], list[str]]:
    gamma = float(cfg.raw["gamma"])
    n = int(cfg.raw.get("n", 1024))
    sol1 = solve_profile_1d(cfg.potential, gamma, n, cfg.solver)
    sols = [sol1]
    files = ["phi.csv", "cell_solution.json", "profile.csv"]
    report = {"solution_1d": sol1.summary(), "energy_1d": cell_energy_breakdown(sol1, cfg.potential).to_dict()}
    if nd:
        g = cfg.raw["grid"]
        grid = Grid(2, cfg.potential.d, int(g["n_prime"]), int(g["n_last"]), int(g.get("band", 2)))
        base = sol1 if grid.n_last == n else solve_profile_1d(cfg.potential, gamma, grid.n_last, cfg.solver)
        sol = solve_profile_nd(cfg.potential, gamma, grid, cfg.solver, profile_1d=base)
        sols = [sol]
        report["solution_2d"] = sol.summary()
        report["x_prime_variance"] = sol.diagnostics["x_prime_variance"]
        report["value_1d_same_grid"] = base.value
        sol.profile.to_csv(out / "profile.csv")
    else:
        sol1.profile.to_csv(out / "profile.csv")
    _write_csv(out / "phi.csv", CURVE_HEADER, _solution_rows(sols))
    report["diagnostics"] = {k: v for k, v in sols[0].diagnostics.items() if k != "sweep_history"}
    _write_json(out / "cell_solution.json", report)
    flags = [f"gamma={s.gamma:g} not converged" for s in sols if not s.converged]
    return files, flags


def _solve_point(args):
    spec, gamma, n, opts = args
    return solve_profile_1d(spec, gamma, n, opts)


def _task_sweep(cfg: RunConfig, out: Path, jobs: int) -> tuple[list[str], list[str]]:
    gammas = [float(g) for g in cfg.raw["gammas"]]
    resolution = cfg.raw.get("resolution", cfg.raw.get("n", 1024))
    warm = bool(cfg.raw.get("warm_start", True))
    if jobs > 1 and not warm and isinstance(resolution, int):
        with ProcessPoolExecutor(jobs) as ex:
            sols = list(ex.map(_solve_point, [(cfg.potential, g, resolution, cfg.solver) for g in gammas]))
        curve = PhiCurve([phi_point(s) for s in sols], {
            "potential": cfg.potential.to_dict(), "resolution": [resolution], "solver": cfg.solver.to_dict(),
            "failures": [s.gamma for s in sols if not s.converged], "warm_start": False})
    else:
        curve = sweep_phi(cfg.potential, gammas, resolution, cfg.solver, warm_start=warm)
    curve.to_csv(out / "phi_curve.csv")
    _write_json(out / "phi_curve.json", curve.to_dict())
    flags = [f"gamma={g:g} not converged" for g in curve.metadata.get("failures", [])]
    return ["phi_curve.csv", "phi_curve.json"], flags


def _recovery_config(cfg: RunConfig) -> RecoveryConfig:
    rec = cfg.raw["recovery"]
    try:
        lam = Laminate.from_dict(rec["laminate"])
        mu = SurfactantMeasure.from_dict(rec["measure"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"field recovery: {exc}") from None
    n_cell = int(rec.get("n_cell", 128))
    gamma = mu.patches[0].density if mu.patches else 0.0
    cell = solve_profile_1d(cfg.potential, gamma, n_cell, cfg.solver)
    cell_zero = solve_profile_1d(cfg.potential, 0.0, n_cell, cfg.solver) if covers_partially(mu) else None
    return RecoveryConfig(
        epsilons=list(rec["epsilons"]),
        delta=float(rec.get("delta", 0.4)),
        tilde_delta=float(rec.get("tilde_delta", 1.0)),
        cell=cell,
        laminate=lam,
        measure=mu,
        spec=cfg.potential,
        cell_zero=cell_zero,
        n_prime=int(rec.get("n_prime", 4)),
        n_last_min=int(rec.get("n_last_min", 512)),
        match_resolution=bool(rec.get("match_resolution", True)),
        seed=cfg.seed,
        delta_prime=float(rec["delta_prime"]) if "delta_prime" in rec else None,
    )


def _task_recovery(cfg: RunConfig, out: Path, jobs: int) -> tuple[list[str], list[str]]:
    rc = _recovery_config(cfg)
    rep = validate_limsup(rc, jobs=jobs)
    rep.to_csv(out / "recovery_table.csv")
    _write_json(out / "recovery_report.json", {"config": rc.to_dict(), "report": rep.to_dict()})
    flags = [f for f in rep.flags if not f.startswith("pre-asymptotic")]
    if not rc.cell.converged:
        flags.append("cell solution not converged")
    return ["recovery_table.csv", "recovery_report.json"], flags


def _task_liminf(cfg: RunConfig, out: Path, jobs: int) -> tuple[list[str], list[str]]:
    rc = _recovery_config(cfg)
    opts = cfg.raw.get("liminf", {})
    rep = probe_liminf(rc, trials=int(opts.get("trials", 200)), seed=cfg.seed,
                       threshold=float(opts.get("threshold", 0.98)))
    rep.to_csv(out / "liminf_trials.csv")
    _write_json(out / "liminf_report.json", {"config": rc.to_dict(), "report": rep.to_dict()})
    flags = [f"{len(rep.violations)} trial(s) below threshold"] if rep.violations else []
    return ["liminf_trials.csv", "liminf_report.json"], flags


def run(config_path, out_dir=None, jobs: int = 1, seed: int | None = None, strict: bool = False) -> int:
    try:
        cfg = load_config(config_path, seed)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(out_dir or cfg.output or "results")
    out.mkdir(parents=True, exist_ok=True)
    tasks = {
        "check-potential": _task_check_potential,
        "phi-1d": lambda c, o, j: _task_phi(c, o, j, nd=False),
        "phi-2d": lambda c, o, j: _task_phi(c, o, j, nd=True),
        "sweep": _task_sweep,
        "recovery": _task_recovery,
        "liminf-probe": _task_liminf,
    }
    try:
        files, flags = tasks[cfg.task](cfg, out, max(1, int(jobs)))
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "tool": "surfphase",
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": cfg.resolved(),
        "jobs": jobs,
        "strict": strict,
        "outputs": files,
        "flags": flags,
    }
    _write_json(out / "manifest.json", manifest)
    for f in flags:
        log.warning("%s", f)
    if strict and flags:
        return 2
    return 0


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

PLOT_KINDS = {
    "phi": ("gamma", "phi"),
    "recovery": ("epsilon", "energy", "target"),
    "liminf": ("trial", "energy", "ratio"),
    "mass": ("epsilon", "mass", "mass_error"),
}


def export_plotdata(artifact, kind: str, out=None) -> int:
    if kind not in PLOT_KINDS:
        print(f"error: unknown kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}", file=sys.stderr)
        return 1
    cols = PLOT_KINDS[kind]
    try:
        with open(artifact, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if rows and any(c not in rows[0] for c in cols):
        print(f"error: {artifact} lacks column(s) {', '.join(c for c in cols if c not in rows[0])}", file=sys.stderr)
        return 1
    rows.sort(key=lambda r: float(r[cols[0]]))
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] for c in cols])
    finally:
        if out:
            fh.close()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="surfphase", description="Surface tension and recovery experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a JSON experiment config")
    p_run.add_argument("config_pos", nargs="?", metavar="CONFIG")
    p_run.add_argument("--config", dest="config")
    p_run.add_argument("--out")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--strict", action="store_true")
    p_exp = sub.add_parser("export-plotdata", help="flatten an artifact CSV for plotting")
    p_exp.add_argument("artifact")
    p_exp.add_argument("--kind", required=True)
    p_exp.add_argument("--out")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        path = args.config or args.config_pos
        if not path:
            parser.error("run needs --config PATH")
        return run(path, args.out, args.jobs, args.seed, args.strict)
    return export_plotdata(args.artifact, args.kind, args.out)


if __name__ == "__main__":
    sys.exit(main())
