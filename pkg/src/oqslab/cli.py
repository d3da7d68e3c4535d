"""
Batch experiment runner.

A run is described by a JSON config::

    {
      "command": "divisibility",
      "model": {"random": {"d_S": 2, "d_E": 2, "coupling": 1.0}},
      "time_grid": {"t0": 0.0, "t1": 1.0, "steps": 8},
      "seeds": [0, 1, 2],
      "tolerances": {"verdict": 1e-8},
      "output": "out/div",
      "options": {"commuting": [false, true]}
    }

and produces ``{output}.csv`` plus ``{output}.meta.json``. ``model`` is
either a path to a model file, an inline model dictionary, a
``{"random": {...}}`` generator seeded per run, or (``spinboson``) the
model parameters. Exit status: 0 success, 2 config error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _kernels, diagnostics, divisibility, dynmap, linalg, projection
from . import spinboson, stochastic
from .errors import OQSError
from .linalg import ToleranceConfig
from .model import InitialState, SystemSpec, load_model, random_model, spec_from_dict

COMMANDS = ("simulate", "divisibility", "spinboson", "markov-test", "diagnostics",
            "nz-projection")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(Exception):
    pass


class RunFailure(Exception):
    def __init__(self, operation: str, exc: Exception):
        super().__init__(f"{operation}: {type(exc).__name__}: {exc}")
        self.operation = operation
        self.exc = exc


# -- validation ----------------------------------------------------------------

def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def _validate_grid(grid, out: list) -> None:
    if not isinstance(grid, dict):
        out.append("time_grid: must be an object with t0, t1, steps")
        return
    t0, t1, steps = grid.get("t0", 0.0), grid.get("t1"), grid.get("steps")
    if not _is_number(t0):
        out.append("time_grid.t0: must be a number")
    if not _is_number(t1):
        out.append("time_grid.t1: must be a number")
    elif _is_number(t0) and t1 <= t0:
        out.append(f"time_grid: t1 ({t1}) must exceed t0 ({t0})")
    if not isinstance(steps, int) or isinstance(steps, bool) or steps < 2:
        out.append("time_grid.steps: must be an integer >= 2")


def _validate_model(command: str, model, out: list) -> None:
    cap = linalg.max_dim()
    if command == "markov-test":
        return
    if model is None:
        out.append("model: missing")
        return
    if command == "spinboson":
        if not isinstance(model, dict):
            out.append("model: spinboson needs an object with omega, beta, eta, multiplets, n_max")
            return
        try:
            params = spinboson.SpinBosonParams.from_dict(model)
        except (KeyError, TypeError, ValueError) as exc:
            out.append(f"model: invalid spin-boson parameters ({exc})")
            return
        dim = params.system_dim * (params.n_max + 1 + spinboson.CUTOFF_STEP)
        if dim > cap:
            out.append(f"model: SizeLimit: total dimension {dim} exceeds cap {cap}")
        return
    if isinstance(model, str):
        if not Path(model).is_file():
            out.append(f"model: file {model!r} not found")
            return
        try:
            spec, _ = load_model(model)
        except Exception as exc:            # noqa: BLE001 - reported as a diagnostic
            out.append(f"model: cannot load {model!r} ({exc})")
            return
        dim = spec.dim
    elif isinstance(model, dict) and "random" in model:
        r = model["random"]
        d_S, d_E = r.get("d_S"), r.get("d_E")
        if not (isinstance(d_S, int) and isinstance(d_E, int) and d_S >= 1 and d_E >= 1):
            out.append("model.random: d_S and d_E must be positive integers")
            return
        if "coupling" in r and not _is_number(r["coupling"]):
            out.append("model.random.coupling: must be a number")
        dim = d_S * d_E
    elif isinstance(model, dict):
        try:
            spec, _ = spec_from_dict(model)
        except Exception as exc:            # noqa: BLE001
            out.append(f"model: invalid inline model ({exc})")
            return
        dim = spec.dim
    else:
        out.append("model: must be a path, an inline model or a random generator")
        return
    if dim > cap:
        out.append(f"model: SizeLimit: total dimension {dim} exceeds cap {cap}")
    if command == "nz-projection" and dim > projection.MAX_NZ_DIM:
        out.append(f"model: SizeLimit: nz-projection needs d_S*d_E <= {projection.MAX_NZ_DIM}, "
                   f"got {dim}")


def validate(config) -> list[str]:
    """Every problem with ``config``; an empty list means it is runnable."""
    out: list[str] = []
    if not isinstance(config, dict):
        return ["config: must be a JSON object"]
    command = config.get("command")
    if command not in COMMANDS:
        out.append(f"command: must be one of {', '.join(COMMANDS)}, got {command!r}")
    seeds = config.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        out.append("seeds: must be a nonempty list of integers")
    elif not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        out.append("seeds: entries must be non-negative integers")
    _validate_grid(config.get("time_grid"), out)
    output = config.get("output")
    if not isinstance(output, str) or not output:
        out.append("output: must be a nonempty path prefix")
    else:
        parent = Path(output).parent
        probe = parent
        while not probe.exists() and probe != probe.parent:
            probe = probe.parent
        if not os.access(probe, os.W_OK):
            out.append(f"output: directory {str(parent)!r} is not writable")
    tols = config.get("tolerances", {})
    names = {f.name for f in dataclasses.fields(ToleranceConfig)}
    if not isinstance(tols, dict):
        out.append("tolerances: must be an object")
    else:
        for k, v in tols.items():
            if k not in names:
                out.append(f"tolerances.{k}: unknown tolerance")
            elif not _is_number(v) or (k != "psd_floor" and v <= 0):
                out.append(f"tolerances.{k}: must be a positive number")
    options = config.get("options", {})
    if not isinstance(options, dict):
        out.append("options: must be an object")
    if command in COMMANDS:
        _validate_model(command, config.get("model"), out)
    return out


# -- model helpers -------------------------------------------------------------

def _model_for_seed(model, seed: int) -> tuple[SystemSpec, InitialState | None]:
    if isinstance(model, str):
        return load_model(model)
    if "random" in model:
        r = model["random"]
        spec = random_model(seed, r["d_S"], r["d_E"], float(r.get("coupling", 1.0)),
                            bool(r.get("commuting", False)), bool(r.get("diagonal_env", False)))
        return spec, None
    return spec_from_dict(model)


def _default_state(spec: SystemSpec) -> InitialState:
    c = np.zeros(spec.d_S, dtype=complex)
    c[0] = 1.0
    return InitialState.product(c=c, d=divisibility.ground_state_weights(spec))


def _times(grid) -> np.ndarray:
    return np.linspace(float(grid.get("t0", 0.0)), float(grid["t1"]), int(grid["steps"]))


# -- commands ------------------------------------------------------------------

def _simulate(config, seed, tol):
    spec, state = _model_for_seed(config["model"], seed)
    state = state or _default_state(spec)
    times = _times(config["time_grid"])
    prop = dynmap.total_propagator(spec)
    rows = []
    for t in times:
        if state.is_product:
            C = dynmap.compute_supermatrix(spec, state.d, times[0], t, propagator=prop)
            rho = dynmap.apply_map(C, state.system_density())
        else:
            rho = dynmap.entangled_reduced_density(spec, state.a, times[0], t, prop)
        for i in range(spec.d_S):
            for j in range(spec.d_S):
                rows.append({"seed": seed, "t": float(t), "i": i, "j": j,
                             "re": float(rho[i, j].real), "im": float(rho[i, j].imag)})
    return rows, None


def _divisibility(config, seed, tol):
    grid = config["time_grid"]
    t0, t1 = float(grid.get("t0", 0.0)), float(grid["t1"])
    options = config.get("options", {})
    model = config["model"]
    if not (isinstance(model, dict) and "random" in model):
        spec, state = _model_for_seed(model, seed)
        weights = (state.environment_weights() if state is not None
                   else divisibility.ground_state_weights(spec))
        rep = divisibility.composition_residual(spec, weights, t0, 0.5 * (t0 + t1), t1, tol=tol)
        flag = int(divisibility.commutation_certificate(spec, tol)[0])
        return [{"seed": seed, "d_S": spec.d_S, "d_E": spec.d_E, "coupling": linalg.op_norm_estimate(spec.H_SE),
                 "commuting_flag": flag, "t0": rep.t0, "ts": rep.ts, "t": rep.t,
                 "residual": rep.residual, "verdict": rep.verdict}], None
    r = model["random"]
    flags = options.get("commuting", [bool(r.get("commuting", False))])
    rows = []
    for flag in flags:
        rows += divisibility.sweep_rows(seed, r["d_S"], r["d_E"], float(r.get("coupling", 1.0)),
                                        bool(flag), tol=tol,
                                        triples=[(t0, 0.5 * (t0 + t1), t1)])
    return rows, None


def _spinboson(config, seed, tol):
    params = spinboson.SpinBosonParams.from_dict(config["model"])
    options = config.get("options", {})
    report = None
    if options.get("periodicity", False):
        try:
            rep = spinboson.periodicity_semigroup_check(params, float(options.get("tol", 1e-8)))
        except OQSError as exc:
            raise RunFailure("spinboson.periodicity_semigroup_check", exc) from exc
        report = {"T": rep.T, "semigroup_residual": rep.semigroup_residual,
                  "periodic_residual": rep.periodic_residual, "passed": rep.passed}
    rows = spinboson.spinboson_rows(params, _times(config["time_grid"]))
    return [dict(seed=seed, **r) for r in rows], report


def _markov_test(config, seed, tol):
    options = config.get("options", {})
    mode = options.get("mode", "causal-break")
    if mode == "chain":
        P = np.asarray(options["transition"], dtype=float)
        order = int(options.get("order", 1))
        chain = stochastic.ChainSpec(P.shape[0], P, order, seed)
        traj = stochastic.simulate_chain(chain, int(options.get("length", 100_000)))
        res = stochastic.test_markov_order1(traj, float(options.get("alpha", 0.05)))
        return [{"seed": seed, "order": order, "max_tv": res.max_tv,
                 "is_markov": int(res.is_markov)}], None
    build = {"dilated": stochastic.dilated_family,
             "memoryless": stochastic.memoryless_family}[options.get("family", "dilated")]
    k, post = int(options.get("k", 2)), int(options.get("post", 2))
    family, controls = build(seed, k=k, post=post, n_controls=int(options.get("controls", 3)))
    res = stochastic.causal_break_markov_test(family, k, k + post, controls,
                                              float(options.get("tol", 1e-10)))
    rows = [{"seed": seed, **r, "markovian": int(res.markovian)} for r in res.rows]
    return rows, None


def _diagnostics(config, seed, tol):
    spec, state = _model_for_seed(config["model"], seed)
    state = state or _default_state(spec)
    taus = _times(config["time_grid"])
    rows, report = diagnostics.run_diagnostics(spec, state, taus,
                                               float(config.get("options", {}).get("c", 2.0)))
    return [{"seed": seed, **r} for r in rows], report


def _nz_projection(config, seed, tol):
    spec, state = _model_for_seed(config["model"], seed)
    state = state or _default_state(spec)
    grid = config["time_grid"]
    n_P = int(config.get("options", {}).get("n_P", 1))
    pair = projection.ProjectorPair.first(n_P, spec.d_E)
    rows = projection.nz_rows(spec, pair, state, float(grid["t1"]), int(grid["steps"]))
    return [{"seed": seed, **r} for r in rows], None


HANDLERS = {
    "simulate": (_simulate, "dynmap.compute_supermatrix",
                 ["seed", "t", "i", "j", "re", "im"]),
    "divisibility": (_divisibility, "divisibility.composition_residual",
                     ["seed", "d_S", "d_E", "coupling", "commuting_flag", "t0", "ts", "t",
                      "residual", "verdict"]),
    "spinboson": (_spinboson, "spinboson.spinboson_rows",
                  ["seed"] + spinboson.CSV_COLUMNS),
    "markov-test": (_markov_test, "stochastic.causal_break_markov_test", None),
    "diagnostics": (_diagnostics, "diagnostics.run_diagnostics", ["seed", "tau", "abs_C"]),
    "nz-projection": (_nz_projection, "projection.nz_rows",
                      ["seed", "t", "pq_norm", "qp_norm", "reconstruction_error"]),
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path, columns, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def run(config: dict, threads: int = 1) -> dict:
    """Execute a validated config; returns the meta dictionary written alongside."""
    problems = validate(config)
    if problems:
        raise ConfigError("; ".join(problems))
    command = config["command"]
    handler, operation, columns = HANDLERS[command]
    tol = ToleranceConfig(**config.get("tolerances", {}))
    start = time.perf_counter()

    def task(seed):
        try:
            return handler(config, seed, tol)
        except (OQSError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise RunFailure(operation, exc) from exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(task, config["seeds"]))
    rows = [r for chunk, _ in results for r in chunk]
    reports = [rep for _, rep in results]
    if columns is None:
        columns = list(rows[0].keys()) if rows else ["seed"]
    prefix = Path(config["output"])
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_csv(f"{prefix}.csv", columns, rows)
    meta = {"config": config, "version": __version__, "backend": _kernels.BACKEND,
            "rows": len(rows), "wall_time_s": time.perf_counter() - start}
    if any(rep is not None for rep in reports):
        meta["reports"] = [{"seed": s, **(rep or {})} for s, rep in zip(config["seeds"], reports)]
    Path(f"{prefix}.meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")
    return meta


# -- entry point ---------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oqslab", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="overrides the config's command")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", help="output path prefix (overrides config)")
    p.add_argument("--seeds", help="comma-separated seeds (overrides config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--validate-only", action="store_true",
                   help="print config diagnostics and exit")
    return p


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path!r} ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if not isinstance(config, dict):
            raise ConfigError("config: must be a JSON object")
        if args.command:
            config["command"] = args.command
        if args.out:
            config["output"] = args.out
        if args.seeds is not None:
            try:
                config["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
            except ValueError as exc:
                raise ConfigError(f"--seeds: {exc}") from exc
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG

    problems = validate(config)
    if args.validate_only:
        for line in problems:
            print(line)
        return EXIT_CONFIG if problems else EXIT_OK
    if problems:
        for line in problems:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        meta = run(config, args.threads)
    except RunFailure as exc:
        print(f"numerical failure in {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {meta['rows']} rows to {config['output']}.csv")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
