"""Configuration-driven scenario runner.

Scenarios are described by a strict YAML file (every key validated, no
unknowns tolerated) and emit CSV result tables with a sibling metadata
JSON carrying the config hash, the numeric settings actually used and
the wall time.  Floats are serialized with 17 significant digits so a
rerun with the same config and seed is byte-identical.

Exit codes: 0 success, 2 config error, 3 numerical failure
(non-convergence or truncation breach), 4 output I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .autonomous import (
    AutonomousParams,
    build_generator,
    evolve,
    initial_state,
    steady_state_sweep,
)
from .classical import ClassicalInit, ClassicalParams, run_ensemble
from .driven import DrivenParams, limit_cycle, phase_diagram
from .operators import RotorBasis, von_mises_state

SCENARIOS = (
    "driven-sweep",
    "driven-phase-diagram",
    "autonomous-transient",
    "load-sweep",
    "classical-compare",
)


class ConfigError(Exception):
    """Schema violation in the run configuration."""


class NumericalFailure(Exception):
    """The computation ran but did not meet its convergence contract."""


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return "" if x is None else str(x)


# ---------------------------------------------------------------------------
# config schema
#
# Each section lists (type, default); required keys use _REQUIRED as
# the default sentinel. Validation is strict: keys outside the schema
# of the chosen scenario are rejected with the offending path.

_REQUIRED = object()
_NUM = (int, float)


def _section(cfg: dict, name: str, schema: dict, where: str) -> dict:
    raw = cfg.get(name, {})
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"'{where}{name}' must be a mapping")
    for key in raw:
        if key not in schema:
            raise ConfigError(f"unknown key '{where}{name}.{key}'")
    out = {}
    for key, (types, default) in schema.items():
        if key in raw:
            val = raw[key]
            if types is bool:
                if not isinstance(val, bool):
                    raise ConfigError(f"'{where}{name}.{key}' must be a boolean")
            elif not isinstance(val, types) or isinstance(val, bool):
                raise ConfigError(f"'{where}{name}.{key}' has the wrong type")
            out[key] = val
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key '{where}{name}.{key}'")
        else:
            out[key] = default
    return out


_TOP_KEYS = {
    "scenario", "seed", "output", "threads", "solver_tol",
    "params", "basis", "init", "t_span", "n_out", "rate_dt", "edge_tol",
    "sweep", "steady_state", "n_traj", "t_grid", "models", "dt",
}

_KEYS_BY_SCENARIO = {
    "driven-sweep": {"scenario", "seed", "output", "threads", "params", "sweep"},
    "driven-phase-diagram": {"scenario", "seed", "output", "threads", "params"},
    "autonomous-transient": {
        "scenario", "seed", "output", "threads", "solver_tol",
        "params", "basis", "init", "t_span", "n_out", "rate_dt", "edge_tol",
    },
    "load-sweep": {
        "scenario", "seed", "output", "threads", "solver_tol",
        "params", "basis", "sweep", "steady_state",
    },
    "classical-compare": {
        "scenario", "seed", "output", "threads",
        "params", "init", "n_traj", "t_grid", "models", "dt",
    },
}

_BATH_PARAMS = {
    "g": (_NUM, 10.0),
    "kappa": (_NUM, 1.0),
    "n_h": (_NUM, 1.0),
    "n_c": (_NUM, 0.1),
}
_DRIVEN_POINT_PARAMS = {**_BATH_PARAMS, "omega": (_NUM, 1.0)}
_AUTONOMOUS_PARAMS = {
    **_BATH_PARAMS,
    "inertia": (_NUM, 10.0),
    "gamma": (_NUM, 0.0),
    "kT_load": (_NUM, None),
}
# the sweep grid owns gamma in a load sweep
_LOAD_PARAMS = {**_BATH_PARAMS, "inertia": (_NUM, 10.0), "kT_load": (_NUM, None)}
_CLASSICAL_PARAMS = {**_BATH_PARAMS, "inertia": (_NUM, 10.0)}


def validate_config(raw) -> dict:
    """Normalize a parsed YAML document into a fully defaulted config."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"'scenario' must be one of {', '.join(SCENARIOS)}")
    allowed = _KEYS_BY_SCENARIO[scenario]
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown key '{key}'")
        if key not in allowed:
            raise ConfigError(f"key '{key}' does not apply to scenario {scenario}")

    cfg = {"scenario": scenario}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("'seed' must be an integer in [0, 2^64)")
    cfg["seed"] = seed
    output = raw.get("output", scenario)
    if not isinstance(output, str) or not output or "/" in output:
        raise ConfigError("'output' must be a plain file base name")
    cfg["output"] = output
    threads = raw.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        raise ConfigError("'threads' must be a positive integer")
    cfg["threads"] = threads

    if scenario in ("autonomous-transient", "load-sweep"):
        tol = raw.get("solver_tol", 1e-8)
        if not isinstance(tol, _NUM) or not 0 < tol <= 1e-4:
            raise ConfigError("'solver_tol' must lie in (0, 1e-4]")
        cfg["solver_tol"] = float(tol)
        basis = _section(raw, "basis", {"l_min": (int, -40), "l_max": (int, 120)}, "")
        if basis["l_min"] >= basis["l_max"]:
            raise ConfigError("'basis.l_min' must be below 'basis.l_max'")
        cfg["basis"] = basis

    schema = {
        "driven-sweep": _BATH_PARAMS,
        "driven-phase-diagram": _DRIVEN_POINT_PARAMS,
        "autonomous-transient": _AUTONOMOUS_PARAMS,
        "load-sweep": _LOAD_PARAMS,
        "classical-compare": _CLASSICAL_PARAMS,
    }[scenario]
    cfg["params"] = _section(raw, "params", schema, "")

    try:
        if scenario == "driven-sweep":
            DrivenParams(omega=1.0, **cfg["params"])
        elif scenario == "driven-phase-diagram":
            DrivenParams(**cfg["params"])
        elif scenario == "classical-compare":
            ClassicalParams(**cfg["params"])
        elif scenario == "load-sweep":
            basis = RotorBasis(cfg["basis"]["l_min"], cfg["basis"]["l_max"])
            AutonomousParams(basis=basis, gamma=1.0, **cfg["params"])
        else:
            basis = RotorBasis(cfg["basis"]["l_min"], cfg["basis"]["l_max"])
            AutonomousParams(basis=basis, **cfg["params"])
    except ValueError as exc:
        raise ConfigError(f"invalid 'params': {exc}") from exc

    if scenario in ("driven-sweep", "load-sweep"):
        sweep = _section(
            raw, "sweep",
            {
                "start": (_NUM, _REQUIRED),
                "stop": (_NUM, _REQUIRED),
                "points": (int, _REQUIRED),
                "log": (bool, True),
            },
            "",
        )
        if not 0 < sweep["start"] < sweep["stop"]:
            raise ConfigError("'sweep' needs 0 < start < stop")
        if sweep["points"] < 2:
            raise ConfigError("'sweep.points' must be at least 2")
        cfg["sweep"] = sweep

    if scenario == "autonomous-transient":
        init = _section(
            raw, "init",
            {
                "kind": (str, "momentum"),
                "l0": (int, 0),
                "mu_phi": (_NUM, math.pi / 2),
                "var_phi": (_NUM, 0.1),
                "excited": (bool, True),
            },
            "",
        )
        if init["kind"] not in ("momentum", "packet"):
            raise ConfigError("'init.kind' must be 'momentum' or 'packet'")
        if init["var_phi"] <= 0:
            raise ConfigError("'init.var_phi' must be positive")
        cfg["init"] = init
        span = raw.get("t_span", [0.0, 130.0])
        if (not isinstance(span, (list, tuple)) or len(span) != 2
                or not all(isinstance(x, _NUM) for x in span) or span[0] >= span[1]):
            raise ConfigError("'t_span' must be [t0, t1] with t0 < t1")
        cfg["t_span"] = (float(span[0]), float(span[1]))
        n_out = raw.get("n_out", 201)
        if not isinstance(n_out, int) or n_out < 2:
            raise ConfigError("'n_out' must be an integer >= 2")
        cfg["n_out"] = n_out
        rate_dt = raw.get("rate_dt")
        if rate_dt is not None and (not isinstance(rate_dt, _NUM) or rate_dt <= 0):
            raise ConfigError("'rate_dt' must be positive")
        cfg["rate_dt"] = rate_dt
        edge_tol = raw.get("edge_tol", 1e-6)
        if not isinstance(edge_tol, _NUM) or not 0 < edge_tol <= 1:
            raise ConfigError("'edge_tol' must lie in (0, 1]")
        cfg["edge_tol"] = float(edge_tol)

    if scenario == "load-sweep":
        cfg["steady_state"] = _section(
            raw, "steady_state",
            {
                "method": (str, "auto"),
                "drift_tol": (_NUM, 1e-4),
                "window": (_NUM, 10.0),
                "max_windows": (int, 120),
            },
            "",
        )
        if cfg["steady_state"]["method"] not in ("auto", "direct", "propagate"):
            raise ConfigError("'steady_state.method' must be auto, direct or propagate")

    if scenario == "classical-compare":
        n_traj = raw.get("n_traj", 10_000)
        if not isinstance(n_traj, int) or n_traj < 1000:
            raise ConfigError("'n_traj' must be an integer >= 1000")
        cfg["n_traj"] = n_traj
        grid = _section(
            raw, "t_grid",
            {"start": (_NUM, 0.0), "stop": (_NUM, _REQUIRED), "points": (int, _REQUIRED)},
            "",
        )
        if not grid["start"] < grid["stop"] or grid["points"] < 2:
            raise ConfigError("'t_grid' needs start < stop and points >= 2")
        cfg["t_grid"] = grid
        models = raw.get("models", ["coin", "magnet"])
        if (not isinstance(models, list) or not models
                or any(m not in ("coin", "magnet") for m in models)
                or len(set(models)) != len(models)):
            raise ConfigError("'models' must be a non-empty subset of [coin, magnet]")
        cfg["models"] = models
        init = _section(
            raw, "init",
            {
                "mu_phi": (_NUM, math.pi / 2),
                "var_phi": (_NUM, 0.1),
                "mu_ell": (_NUM, 0.0),
                "var_ell": (_NUM, 10.0),
            },
            "",
        )
        if init["var_phi"] <= 0 or init["var_ell"] <= 0:
            raise ConfigError("'init' variances must be positive")
        cfg["init"] = init
        dt = raw.get("dt")
        if dt is not None and (not isinstance(dt, _NUM) or dt <= 0):
            raise ConfigError("'dt' must be positive")
        cfg["dt"] = dt

    return cfg


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    cfg = validate_config(raw)
    cfg["_sha256"] = hashlib.sha256(text).hexdigest()
    return cfg


# ---------------------------------------------------------------------------
# emission


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def emit_timeline(timeline, path) -> None:
    """Fixed-order CSV of an observable timeline, 17 significant digits."""
    cols = [
        "t_kappa", "mean_L_hbar", "std_L_hbar", "W_int", "W_kin", "W_net",
        "Q_BA", "W_erg", "W_erg_rate", "S_sys_rate", "S_h_rate", "S_c_rate",
        "S_net_rate", "trace_err", "edge_pop",
    ]
    data = [np.atleast_1d(getattr(timeline, c)) for c in cols]
    _write_csv(Path(path), cols, zip(*data) if len(timeline) else ())


def _write_metadata(result_path: Path, cfg: dict, details: dict, wall: float) -> None:
    meta = {
        "code_version": __version__,
        "config_sha256": cfg.get("_sha256", ""),
        "scenario": cfg["scenario"],
        "seed": cfg["seed"],
        "threads": cfg["threads"],
        "result": result_path.name,
        "wall_time_s": round(wall, 3),
    }
    meta.update(details)
    meta_path = result_path.parent / (result_path.stem + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# scenario runners; each returns a list of (path, details) it wrote


def _run_driven_sweep(cfg: dict, out_dir: Path):
    p = cfg["params"]
    sw = cfg["sweep"]
    if sw["log"]:
        omegas = np.geomspace(sw["start"], sw["stop"], sw["points"])
    else:
        omegas = np.linspace(sw["start"], sw["stop"], sw["points"])
    rows = []
    for om in omegas:
        rep = limit_cycle(DrivenParams(g=p["g"], omega=float(om), kappa=p["kappa"],
                                       n_h=p["n_h"], n_c=p["n_c"]))
        if not rep.converged:
            raise NumericalFailure(f"limit cycle did not converge at omega = {om:g}")
        rows.append((om / p["kappa"], rep.W_cyc, rep.Q_h_cyc, rep.eta_normalized))
    path = out_dir / f"{cfg['output']}.csv"
    _write_csv(path, ["omega_over_kappa", "W_cyc_over_hg", "Qh_cyc_over_hw0",
                      "eta_normalized"], rows)
    return [(path, {"sweep": sw, "params": p})]


def _run_driven_phase_diagram(cfg: dict, out_dir: Path):
    p = cfg["params"]
    rep = limit_cycle(DrivenParams(**p))
    if not rep.converged:
        raise NumericalFailure("limit cycle did not converge")
    x, y, area = phase_diagram(DrivenParams(**p), rep)
    path = out_dir / f"{cfg['output']}.csv"
    _write_csv(path, ["cos_phi", "p_e"], zip(x, y))
    details = {"params": p, "signed_area_over_hg": float(area),
               "n_cycles": int(rep.n_cycles)}
    return [(path, details)]


def _transient_initial_state(cfg: dict, basis: RotorBasis):
    init = cfg["init"]
    if init["kind"] == "momentum":
        amps = np.zeros(basis.dim, dtype=complex)
        try:
            amps[basis.index_of(init["l0"])] = 1.0
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"'init.l0' outside the basis window: {exc}") from exc
    else:
        amps, _ = von_mises_state(init["mu_phi"], init["var_phi"], basis)
    return initial_state(basis, excited=init["excited"], rotor_amps=amps)


def _run_autonomous_transient(cfg: dict, out_dir: Path):
    basis = RotorBasis(cfg["basis"]["l_min"], cfg["basis"]["l_max"])
    pars = AutonomousParams(basis=basis, **cfg["params"])
    gen = build_generator(pars, include_load=pars.gamma > 0)
    rho0 = _transient_initial_state(cfg, basis)
    tl = evolve(rho0, gen, cfg["t_span"], n_out=cfg["n_out"],
                solver_tol=cfg["solver_tol"], rate_dt=cfg["rate_dt"])
    path = out_dir / f"{cfg['output']}.csv"
    emit_timeline(tl, path)
    worst = float(tl.edge_pop.max()) if len(tl) else 0.0
    details = {
        "params": cfg["params"],
        "truncation_window": [basis.l_min, basis.l_max],
        "t_span": list(cfg["t_span"]),
        "n_out": cfg["n_out"],
        "solver_tol": cfg["solver_tol"],
        "rate_dt": cfg["rate_dt"],
        "edge_tol": cfg["edge_tol"],
        "max_edge_pop": worst,
        "init": cfg["init"],
    }
    failure = None
    if worst >= cfg["edge_tol"]:
        failure = NumericalFailure(
            f"edge population {worst:.3e} breached edge_tol {cfg['edge_tol']:.3e}; "
            "results written but the truncation window is too small"
        )
    return [(path, details)], failure


def _run_load_sweep(cfg: dict, out_dir: Path):
    basis = RotorBasis(cfg["basis"]["l_min"], cfg["basis"]["l_max"])
    pars = AutonomousParams(basis=basis, gamma=1.0, **cfg["params"])
    sw = cfg["sweep"]
    ss = cfg["steady_state"]
    if sw["log"]:
        gammas = np.geomspace(sw["start"], sw["stop"], sw["points"])
    else:
        gammas = np.linspace(sw["start"], sw["stop"], sw["points"])
    try:
        points = steady_state_sweep(
            pars, gammas, method=ss["method"], drift_tol=ss["drift_tol"],
            window=ss["window"], max_windows=ss["max_windows"],
            solver_tol=cfg["solver_tol"],
        )
    except RuntimeError as exc:
        raise NumericalFailure(str(exc)) from exc
    rows = []
    for gamma, _state, rep, info in points:
        # the null solve reports a residual, the propagated branch a
        # drift over the last window; either one is the convergence figure
        rows.append((
            gamma / pars.kappa, rep.W_load_rate, rep.W_int_rate, rep.Q_BA_rate,
            rep.W_kin_rate, rep.S_net_rate, rep.mean_L, rep.std_L,
            info["method"], info.get("windows", 0),
            info.get("drift", info.get("residual")),
        ))
    path = out_dir / f"{cfg['output']}.csv"
    _write_csv(path, ["gamma_over_kappa", "W_load", "W_int", "Q_BA", "W_kin",
                      "S_net_rate", "mean_L_hbar", "std_L_hbar",
                      "method", "windows", "convergence"], rows)
    details = {
        "params": cfg["params"],
        "truncation_window": [basis.l_min, basis.l_max],
        "sweep": sw,
        "steady_state": ss,
        "solver_tol": cfg["solver_tol"],
    }
    return [(path, details)]


def _run_classical_compare(cfg: dict, out_dir: Path):
    pars = ClassicalParams(**cfg["params"])
    init = ClassicalInit(**cfg["init"])
    grid_cfg = cfg["t_grid"]
    t_grid = np.linspace(grid_cfg["start"], grid_cfg["stop"], grid_cfg["points"])
    written = []
    for model in cfg["models"]:
        stats = run_ensemble(model, pars, init, cfg["n_traj"], t_grid, cfg["seed"],
                             dt=cfg["dt"], threads=cfg["threads"])
        spin = "mean_C" if model == "coin" else "mean_mz"
        rows = zip(stats.t, stats.mean_L, stats.var_L, stats.sem_L,
                   stats.mean_spin, stats.sem_spin)
        path = out_dir / f"{cfg['output']}_{model}.csv"
        _write_csv(path, ["t_kappa", "mean_L_hbar", "var_L_hbar2", "sem_L_hbar",
                          spin, "sem_spin"], rows)
        details = {
            "params": cfg["params"],
            "init": cfg["init"],
            "model": model,
            "n_traj": stats.n_traj,
            "dt": stats.dt,
            "flip_counts": list(stats.flip_counts),
            "clamp_fraction": stats.clamp_fraction,
        }
        written.append((path, details))
    return written


def run(config_path: str, *, output_dir: str = ".", seed: int | None = None,
        threads: int | None = None) -> int:
    """Execute the scenario in config_path; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        if seed is not None:
            if not 0 <= seed < 2**64:
                raise ConfigError("'--seed' must be in [0, 2^64)")
            cfg["seed"] = seed
        if threads is not None:
            if threads < 1:
                raise ConfigError("'--threads' must be positive")
            cfg["threads"] = threads
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    t0 = time.perf_counter()
    failure = None
    try:
        out_dir = Path(output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        scenario = cfg["scenario"]
        if scenario == "driven-sweep":
            written = _run_driven_sweep(cfg, out_dir)
        elif scenario == "driven-phase-diagram":
            written = _run_driven_phase_diagram(cfg, out_dir)
        elif scenario == "autonomous-transient":
            written, failure = _run_autonomous_transient(cfg, out_dir)
        elif scenario == "load-sweep":
            written = _run_load_sweep(cfg, out_dir)
        else:
            written = _run_classical_compare(cfg, out_dir)
        wall = time.perf_counter() - t0
        for path, details in written:
            _write_metadata(path, cfg, details, wall)
    except (ConfigError, ValueError) as exc:
        # parameter problems surfacing from the library layer are still
        # configuration mistakes (bad dt, window too small, ...)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4

    for path, _ in written:
        print(path)
    if failure is not None:
        print(f"numerical failure: {failure}", file=sys.stderr)
        return 3
    return 0


def validate(config_path: str) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(f"config ok: scenario={cfg['scenario']} seed={cfg['seed']} "
          f"output={cfg['output']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rotorengine",
        description="Simulate the rotor piston engine scenarios described "
                    "by a YAML config.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=".")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, output_dir=args.output_dir, seed=args.seed,
                   threads=args.threads)
    return validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
