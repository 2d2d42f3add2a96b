"""Command-line front end.

    wavetemp run box [--n N] [--a A] [--grid P] [--out DIR]
    wavetemp run gaussian-free [--t 0,0.25,1] [--a A] [--grid P] [--out DIR]
    wavetemp run path/to/config.json [--out DIR] [--seed S]
    wavetemp validate path/to/config.json
    wavetemp version

Exit codes: 0 success, 2 config error, 3 invariant violation,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (BoxParams, GaussianPacketParams, analytic_temperature, box_eigenstate,
                       gaussian_packet)
from .config import BoxState, SimulationConfig, load_config, parse_config
from .errors import ConfigError, InvariantViolation, NumericalFailure
from .evolve import bohmian_trajectories, crank_nicolson_evolve, sample_positions, split_step_evolve
from .fields import PhysicalConstants, ScalarField, make_grid, sample
from .information import info_report
from .madelung import polar_decompose, quantum_potential, velocity_field
from .thermo import (ledger_sweep, pointwise_energy, product_additivity_report, temperature_field,
                     tilt_direction)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 2, 3, 4
ORACLE_RTOL = 1e-6
EXAMPLES = ("box", "gaussian-free")

COLUMNS = ("x", "p", "S", "v", "Q", "E", "T_numeric", "T_analytic", "masked")
UNITS = {"x": "length", "p": "1/length", "S": "action", "v": "length/time", "Q": "energy",
         "E": "energy", "T_numeric": "temperature", "T_analytic": "temperature",
         "masked": "flag"}


@dataclass
class Artifacts:
    csv: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    ledger: dict | None = None
    additivity: dict | None = None
    resolved: list = field(default_factory=list)

    def merge(self, other: "Artifacts") -> None:
        self.csv.update(other.csv)
        self.info.update(other.info)
        self.oracle.update(other.oracle)
        self.ledger = other.ledger or self.ledger
        self.additivity = other.additivity or self.additivity
        self.resolved.extend(other.resolved)


def _fmt(v) -> str:
    return "nan" if not np.isfinite(v) else format(float(v), ".17g")


def fields_csv(columns: dict, t: float | None = None) -> str:
    names = [c for c in COLUMNS if c in columns]
    buf = io.StringIO()
    stamp = "" if t is None else f" t={_fmt(t)}"
    buf.write("# units: " + " ".join(f"{c}={UNITS[c]}" for c in names) + stamp + "\n")
    buf.write(",".join(names) + "\n")
    n = len(columns["x"])
    for i in range(n):
        row = []
        for c in names:
            v = columns[c][i]
            row.append(str(int(v)) if c == "masked" else _fmt(v))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _constants(cfg: SimulationConfig) -> PhysicalConstants:
    return PhysicalConstants(**cfg.constants.model_dump())


def _oracle_params(cfg, constants):
    s = cfg.initial_state
    if isinstance(s, BoxState):
        return "box", BoxParams(a=s.a, n=s.n, constants=constants)
    return "gaussian", GaussianPacketParams(a=s.a, constants=constants)


def _initial_state(cfg, grid, params):
    if isinstance(params, BoxParams):
        return sample(grid, box_eigenstate(params))
    return sample(grid, gaussian_packet(params, 0.0))


def _field_columns(psi, t, kind, params, constants):
    grid = psi.grid
    x = grid.axes()[0]
    pair = polar_decompose(psi, constants)
    mask = pair.mask
    v = velocity_field(pair, constants).components[0]
    Q = quantum_potential(psi, constants).values
    E = pointwise_energy(pair.density, constants).values
    T = temperature_field(psi, constants).values
    Ta = np.full_like(x, np.nan)
    keep = ~mask
    if kind == "box":
        keep &= np.abs(np.sin(params.n * np.pi * x / params.a)) >= 1e-12
    Ta[keep] = analytic_temperature(kind, params, x[keep], t)
    cols = {"x": x, "p": pair.density.values, "S": np.where(mask, np.nan, pair.phase.values),
            "v": v, "Q": Q, "E": E, "T_numeric": T, "T_analytic": Ta,
            "masked": mask.astype(int)}
    ok = keep & np.isfinite(T)
    floor = 1e-12 * np.max(np.abs(Ta[ok])) if ok.any() else 0.0
    denom = np.maximum(np.abs(Ta[ok]), floor)
    err = float(np.max(np.abs(T[ok] - Ta[ok]) / denom)) if ok.any() else 0.0
    return cols, err


def _has_oracle(cfg) -> bool:
    if isinstance(cfg.initial_state, BoxState):
        return True
    return cfg.potential.kind == "zero" and cfg.grid.boundary == "periodic"


def execute(cfg: SimulationConfig, seed: int | None = None) -> Artifacts:
    """Run the configured pipeline and collect the outputs in memory."""
    constants = _constants(cfg)
    g = cfg.grid
    grid = make_grid(g.dim, g.extents, g.points, g.boundary)
    kind, params = _oracle_params(cfg, constants)
    psi0 = _initial_state(cfg, grid, params)
    V = ScalarField(grid, np.zeros(grid.shape))
    times = list(cfg.outputs.probe_times)
    art = Artifacts()

    result = None
    if cfg.solver is not None:
        steps = cfg.total_steps()
        every = cfg.snapshot_every()
        evolve = split_step_evolve if cfg.solver.scheme == "split_step" else crank_nicolson_evolve
        result = evolve(psi0, V, cfg.solver.dt, steps, every, constants)
        for nrm in result.norms:
            if abs(nrm - result.norms[0]) > 1e-6:
                raise InvariantViolation("EvolutionResult: norm conserved", f"drift {nrm - result.norms[0]:.3e}")
        states = {t: result.at(t) for t in times}
    else:
        states = {0.0: psi0}

    static = cfg.solver is None and times == [0.0]
    oracle = _has_oracle(cfg)
    for t in times:
        psi = states[t]
        label = cfg.name if static else f"{cfg.name}_t{t:g}"
        if cfg.outputs.fields:
            cols, err = _field_columns(psi, t, kind, params, constants)
            if not oracle:
                cols.pop("T_analytic")
            else:
                art.oracle[f"{label}.csv"] = err
                if err > ORACLE_RTOL:
                    raise InvariantViolation("T_numeric matches T_analytic within 1e-6",
                                             f"{label}: max relative error {err:.3e}")
            art.csv[f"{label}.csv"] = fields_csv(cols, None if static else t)
        if cfg.outputs.info_report:
            art.info[label] = info_report(psi.density(), constants).as_dict()

    led = cfg.outputs.ledger
    if led is not None:
        p = states[led.probe_time].density()
        d = tilt_direction(p) if led.perturbation == "tilt" else p.values
        sweep = ledger_sweep(p, d, led.eps, constants, mass_preserving=led.perturbation == "tilt")
        art.ledger = {"run": cfg.name, "perturbation": led.perturbation, **sweep}

    add = cfg.outputs.additivity
    if add is not None:
        ps, dps = [], []
        for a in (add.a1, add.a2):
            p = sample(grid, gaussian_packet(GaussianPacketParams(a=a, constants=constants))).density()
            x = grid.axes()[0]
            d = x * p.values if add.perturbation == "shift" else p.values
            ps.append(p)
            dps.append(add.eps * d)
        rep = product_additivity_report(ps[0], ps[1], dps[0], dps[1], constants, probe=add.probe)
        art.additivity = {"run": cfg.name, "perturbation": add.perturbation, **rep.as_dict()}

    tr = cfg.outputs.trajectories
    if tr is not None:
        if tr.positions is not None:
            seeds = np.asarray(tr.positions, dtype=float)
        else:
            seeds = sample_positions(psi0.density(), tr.count, tr.seed if seed is None else seed)
        traj = bohmian_trajectories(result, seeds[:, None], constants, tr.step)
        buf = io.StringIO()
        buf.write("t," + ",".join(f"x{i}" for i in range(len(seeds))) + "\n")
        for ti, row in zip(traj.times, traj.paths[:, :, 0]):
            buf.write(_fmt(ti) + "," + ",".join(_fmt(v) for v in row) + "\n")
        art.csv[f"{cfg.name}_trajectories.csv"] = buf.getvalue()

    resolved = cfg.model_dump(mode="json")
    if cfg.solver is not None:
        resolved["solver"]["steps"] = cfg.total_steps()
        resolved["solver"]["snapshot_every"] = cfg.snapshot_every()
    resolved["version"] = __version__
    art.resolved.append(resolved)
    return art


def write_artifacts(art: Artifacts, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in art.csv.items():
        (out / name).write_text(text)

    def dump(name, obj):
        (out / name).write_text(json.dumps(obj, indent=2) + "\n")

    dump("resolved_config.json", art.resolved[0] if len(art.resolved) == 1 else {"runs": art.resolved})
    if art.info:
        dump("info_report.json", art.info)
    if art.oracle:
        dump("oracle_summary.json", {"max_relative_error_T": art.oracle})
    if art.ledger is not None:
        dump("ledger_summary.json", art.ledger)
    if art.additivity is not None:
        dump("additivity_report.json", art.additivity)


def _parse_times(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--t: expected a comma-separated list of numbers, got {text!r}") from None


def example_configs(name: str, overrides: dict | None = None) -> list:
    """Configs for the built-in examples.

    ``overrides`` may carry ``t`` (comma-separated string or list), ``n``,
    ``a``, ``grid`` and ``out``.
    """
    o = {k: v for k, v in (overrides or {}).items() if v is not None}
    out = str(o.get("out", name))
    a = float(o.get("a", 1.0))
    if name == "box":
        ns = [o["n"]] if "n" in o else [1, 2]
        points = o.get("grid", 256)
        cfgs = []
        for n in ns:
            try:
                BoxParams(a=a, n=n)
            except InvariantViolation as err:
                raise ConfigError(f"--n/--a: {err}") from None
            cfgs.append(parse_config({
                "name": f"box_n{n}",
                "grid": {"extents": [[0.0, a]], "points": [points], "boundary": "dirichlet-zero"},
                "initial_state": {"kind": "box", "n": n, "a": a},
                "potential": {"kind": "box"},
                "outputs": {"fields": True, "probe_times": [0.0], "info_report": True},
                "output_dir": out}))
        return cfgs
    if name == "gaussian-free":
        if "n" in o:
            raise ConfigError("--n applies to the box example only")
        t = o.get("t", [0.0, 0.25, 1.0])
        times = _parse_times(t) if isinstance(t, str) else [float(v) for v in t]
        points = o.get("grid", 512)
        L = 16.0 * a
        return [parse_config({
            "name": "gaussian",
            "grid": {"extents": [[-L, L]], "points": [points], "boundary": "periodic"},
            "initial_state": {"kind": "gaussian", "a": a},
            "solver": {"scheme": "split_step", "dt": 1e-3},
            "outputs": {"fields": True, "probe_times": times, "info_report": True},
            "output_dir": out})]
    raise ConfigError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")


def _report(fn):
    """Run ``fn`` and map the package's exceptions onto exit codes."""
    try:
        fn()
        return EXIT_OK
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


def run_example(name: str, overrides: dict | None = None) -> int:
    """Run a built-in example, write its files and return the exit status."""
    def go():
        cfgs = example_configs(name, overrides)
        art = Artifacts()
        for cfg in cfgs:
            art.merge(execute(cfg, (overrides or {}).get("seed")))
        out = Path(cfgs[0].output_dir)
        write_artifacts(art, out)
        print(f"wrote {len(art.csv)} CSV files to {out}")
    return _report(go)


def run_config(path, out=None, seed: int | None = None) -> int:
    """Validate and run a JSON config, write its files and return the exit status."""
    def go():
        cfg = load_config(path)
        art = execute(cfg, seed)
        target = Path(out or cfg.output_dir)
        write_artifacts(art, target)
        print(f"wrote {len(art.csv)} CSV files to {target}")
    return _report(go)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavetemp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a built-in example or a config file")
    run.add_argument("target", help="box | gaussian-free | path to a JSON config")
    run.add_argument("--out", help="output directory")
    run.add_argument("--t", help="comma-separated probe times (gaussian-free)")
    run.add_argument("--n", type=int, help="box quantum number")
    run.add_argument("--a", type=float, help="box size or Gaussian width")
    run.add_argument("--grid", type=int, help="grid points")
    run.add_argument("--seed", type=int, help="trajectory sampling seed")
    val = sub.add_parser("validate", help="validate a config file")
    val.add_argument("config")
    sub.add_parser("version", help="print the package version")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "validate":
        def check():
            load_config(args.config)
            print(f"{args.config}: ok")
        return _report(check)
    if args.target in EXAMPLES:
        overrides = {k: getattr(args, k) for k in ("out", "t", "n", "a", "grid", "seed")}
        return run_example(args.target, overrides)
    if any(getattr(args, k) is not None for k in ("t", "n", "a", "grid")):
        print("config error: --t/--n/--a/--grid apply to the built-in examples only",
              file=sys.stderr)
        return EXIT_CONFIG
    return run_config(args.target, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
