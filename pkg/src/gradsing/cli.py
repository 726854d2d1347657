"""Command-line front end: one task per invocation, JSON report plus CSV data.

Exit status: 0 when every verdict passes, 3 when a run finishes but a verdict
fails, 2 on solver divergence, 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DivergenceError, GradSingError
from .params import new_ball_params, new_exterior_params

TASKS = ("profile", "modes", "linsolve", "solve-ball", "solve-bounded", "solve-exterior", "oracle", "sweep-t")
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_FAILED = 0, 1, 2, 3
TOP_KEYS = {"task", "params", "solver", "output", "seed"}
PARAM_KEYS = {"N", "p", "regime", "eps_weight"}
OUTPUT_KEYS = {"dir"}


def _solver_defaults(task: str) -> dict:
    from .exterior import ExteriorConfig
    from .gluing import BoundedConfig
    from .nonlinear_ball import SolverConfig

    if task == "profile":
        return {"t": 10.0, "r_min": None, "r_max": None, "points": 401}
    if task == "modes":
        return {"t": 10.0, "K": 4}
    if task == "linsolve":
        return {"t": 1e3, "K_max": 2, "angular_amplitude": 0.5, "tol": 1e-5}
    if task == "solve-ball":
        d = {f.name: f.default for f in dc_fields(SolverConfig)}
        d.update({"g_kind": "power_radial", "g_amplitude": 0.0, "g_exponent": 1.0})
        return d
    if task == "solve-bounded":
        d = {f.name: f.default for f in dc_fields(BoundedConfig)}
        d.update({"glue_check": True})
        return d
    if task == "solve-exterior":
        d = {f.name: f.default for f in dc_fields(ExteriorConfig)}
        d["R_truncations"] = list(d["R_truncations"])
        return d
    if task == "oracle":
        return {"ineq": "I1", "p": 1.75, "dim": 3, "n": 100000}
    if task == "sweep-t":
        return {"t_values": [1e2, 1e3, 1e4], "s0": 0.02, "rho": 0.9, "eps_weight": 0.1}
    raise ConfigError(f"unknown task {task!r}")


def _reject_unknown(block: dict, allowed, where: str):
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def resolve_config(raw: dict) -> dict:
    """Validate a raw config document and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, TOP_KEYS, "config")
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}")
    params = dict(raw.get("params") or {})
    _reject_unknown(params, PARAM_KEYS, "params")
    params.setdefault("N", 3)
    params.setdefault("p", "7/4")
    params.setdefault("regime", "exterior" if task == "solve-exterior" else "ball")
    if params["regime"] not in ("ball", "exterior"):
        raise ConfigError("params.regime must be 'ball' or 'exterior'")
    if params["regime"] == "exterior":
        params.setdefault("eps_weight", 0.1)
    solver = _solver_defaults(task)
    given = dict(raw.get("solver") or {})
    _reject_unknown(given, solver, f"solver ({task})")
    solver.update(given)
    output = dict(raw.get("output") or {})
    _reject_unknown(output, OUTPUT_KEYS, "output")
    output.setdefault("dir", ".")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    return {"task": task, "params": params, "solver": solver, "output": output, "seed": seed}


def _make_params(block: dict):
    if block["regime"] == "exterior":
        return new_exterior_params(block["N"], block["p"], block["eps_weight"])
    return new_ball_params(block["N"], block["p"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])


# ---------------------------------------------------------------------------
# tasks: each returns (report dict, verdict, csv header, csv rows)


def _task_profile(P, S, seed):
    from . import profiles

    t = float(S["t"])
    if P.is_ball:
        lo, hi = S["r_min"] or 1e-5, S["r_max"] or 1 - 1e-5
        r = np.geomspace(lo, hi, int(S["points"]))
        u, du, d2u = profiles.u_ball(P, t, r), profiles.du_ball(P, t, r), profiles.d2u_ball(P, t, r)
        res = np.abs(profiles.ball_residual(P, t, r))
        asym = profiles.asymp_check(P, t, r).to_dict()
    else:
        lo, hi = S["r_min"] or 1.1, S["r_max"] or 100.0
        r = np.geomspace(lo, hi, int(S["points"]))
        u, du, d2u = profiles.u_exterior(P, t, r), profiles.du_exterior(P, t, r), profiles.d2u_exterior(P, t, r)
        res = r ** (P.sigma + 2) * np.abs(profiles.exterior_residual(P, t, r))
        asym = None
    report = {"t": t, "max_weighted_residual": float(res.max()), "asymptotics": asym}
    ok = bool(res.max() <= 1e-10 and (asym is None or asym["passed"]))
    rows = zip(r, u, du, d2u, res)
    return report, ok, ("r", "u", "du", "d2u", "weighted_residual"), rows


def _task_modes(P, S, seed):
    from .linear_ball import ball_grid
    from .modes import Operator, euler_roots, kernel_decay_diagnostic, root_table

    t = float(S["t"])
    table = root_table(P, int(S["K"]))
    lap = [euler_roots(P, k, Operator.LAPLACE) for k in range(int(S["K"]) + 1)]
    grid = ball_grid(P, t)
    kern = [kernel_decay_diagnostic(P, t, k, grid).to_dict() for k in range(1, int(S["K"]) + 1)]
    ok = all(k["kernel_trivial"] for k in kern)
    rows = [(row["k"], row["gamma_minus"], row["gamma_plus"], l.gamma_minus, l.gamma_plus) for row, l in zip(table, lap)]
    return {"t": t, "roots": table, "kernel": kern}, ok, ("k", "gamma_minus", "gamma_plus", "laplace_gamma_minus", "laplace_gamma_plus"), rows


def _task_linsolve(P, S, seed):
    from .fields import decompose_N3
    from .linear_ball import ball_grid, solve_Lt

    t = float(S["t"])
    grid = ball_grid(P, t)
    amp = float(S["angular_amplitude"])
    f = decompose_N3(lambda r, d: r ** (-P.sigma - 2.0) * (1.0 + amp * d[..., 2]), grid, P, int(S["K_max"]))
    rep = solve_Lt(P, t, f, tol=float(S["tol"]))
    rows = [(r, *rep.phi.coeffs[:, i]) for i, r in enumerate(grid.r)]
    header = ("r", *[f"a_{k}_{m}" for k, m in rep.phi.labels])
    return rep.to_dict(), rep.ok, header, rows


def _task_solve_ball(P, S, seed):
    from .nonlinear_ball import PerturbationG, SolverConfig, picard_solve

    g = PerturbationG(S["g_kind"], float(S["g_amplitude"]), float(S["g_exponent"]))
    cfg = SolverConfig(**{k: S[k] for k in (f.name for f in dc_fields(SolverConfig))})
    rep = picard_solve(P, g, cfg)
    r = rep.phi.grid.r
    return rep.to_dict(), rep.ok, ("r", "u"), zip(r, rep.u_profile)


def _task_solve_bounded(P, S, seed):
    from .fields import decompose_N3
    from .gluing import BoundedConfig, CutoffPair, GlueSolver, solve_bounded_domain

    cfg = BoundedConfig(**{k: S[k] for k in (f.name for f in dc_fields(BoundedConfig))})
    rep = solve_bounded_domain(P, cfg)
    out = {"solve": rep.to_dict()}
    ok = rep.ok and rep.extra.get("boundary_max_abs", 0.0) <= 1e-10
    if S["glue_check"] and not cfg.eta_identity:
        gs = GlueSolver(P, cfg.t, cfg.rho, CutoffPair(cfg.s0), cfg.r_min, cfg.points_per_decade)
        f = decompose_N3(lambda r, d: r ** (-P.sigma - 2.0) * (1.0 + 0.5 * d[..., 2]), gs.inner, P, 2)
        glue = gs.solve(f)
        out["glue"] = glue.to_dict()
        ok = ok and glue.converged and glue.residual <= 1e-5
    r = rep.phi.grid.r
    return out, ok, ("r", "u"), zip(r, rep.u_profile)


def _task_solve_exterior(P, S, seed):
    from .exterior import ExteriorConfig, solve_exterior_problem

    kw = {k: S[k] for k in (f.name for f in dc_fields(ExteriorConfig))}
    if kw["eps_weight"] != P.eps_weight:
        P = new_exterior_params(P.N, P.p_exact if P.p_exact is not None else P.p, kw["eps_weight"])
    rep = solve_exterior_problem(P, ExteriorConfig(**kw))
    ok = rep.ok and rep.far_field.rel_deviation_at_check <= 0.01 and rep.truncation["stable"]
    return rep.to_dict(), ok, ("r", "flux", "target"), rep.far_field.rows()


def _task_oracle(P, S, seed):
    from .oracle import check_ineq

    rep = check_ineq(S["ineq"], float(S["p"]), int(S["dim"]), int(S["n"]), seed)
    d = rep.to_dict()
    return d, rep.ok, ("ineq", "p", "dim", "n_samples", "violations", "C_est"), [(rep.ineq, rep.p, rep.dim, rep.n_samples, rep.violations, rep.C_est)]


def _task_sweep(P, S, seed):
    from .exterior import exterior_eps
    from .gluing import CutoffPair, delta_t, eps_t

    ts = [float(t) for t in S["t_values"]]
    Pe = new_exterior_params(P.N, P.p_exact if P.p_exact is not None else P.p, float(S["eps_weight"]))
    rows = []
    for t in ts:
        e = eps_t(P, t, CutoffPair(float(S["s0"])), float(S["rho"]))
        ee, eh = exterior_eps(Pe, t)
        rows.append((t, e, delta_t(P, t, float(S["rho"])), ee, eh))
    col = [row[1] for row in rows]
    ok = all(b < a for a, b in zip(col, col[1:]))
    report = {"rows": [dict(zip(("t", "eps_t", "delta_t", "eps_t_exterior", "eps_hat_t_exterior"), row)) for row in rows], "eps_t_decreasing": ok}
    return report, ok, ("t", "eps_t", "delta_t", "eps_t_exterior", "eps_hat_t_exterior"), rows


_RUNNERS = {
    "profile": _task_profile,
    "modes": _task_modes,
    "linsolve": _task_linsolve,
    "solve-ball": _task_solve_ball,
    "solve-bounded": _task_solve_bounded,
    "solve-exterior": _task_solve_exterior,
    "oracle": _task_oracle,
    "sweep-t": _task_sweep,
}


def run(config: dict) -> tuple[int, dict]:
    """Execute one resolved config; writes ``<task>.json`` and ``<task>.csv`` into the output dir."""
    cfg = resolve_config(config)
    P = _make_params(cfg["params"])
    report, ok, header, rows = _RUNNERS[cfg["task"]](P, cfg["solver"], cfg["seed"])
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg["task"]
    doc = {"config": cfg, "version": __version__, "ok": bool(ok), "report": report}
    doc = _jsonable(doc)
    (out / f"{stem}.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    _write_csv(out / f"{stem}.csv", header, rows)
    return (EXIT_OK if ok else EXIT_FAILED), doc


# ---------------------------------------------------------------------------
# argument parsing

_FLAG_MAP = {
    "profile": ["t", "r_min", "r_max", "points"],
    "modes": ["t", "K"],
    "linsolve": ["t", "K_max", "angular_amplitude"],
    "solve-ball": ["t", "R", "delta", "K_max", "g_kind", "g_amplitude", "g_exponent", "max_iter"],
    "solve-bounded": ["t", "rho", "s0", "R", "K_max"],
    "solve-exterior": ["t", "eps_weight", "R", "R_max"],
    "oracle": ["ineq", "p", "dim", "n"],
    "sweep-t": ["t_values", "s0", "rho"],
}
_FLAG_ALIASES = {"eps_weight": "--eps", "R_max": "--Rmax", "t_values": "--t-values"}
_FLOAT_FLAGS = {"t", "r_min", "r_max", "R", "delta", "g_amplitude", "g_exponent", "rho", "s0", "eps_weight", "R_max", "angular_amplitude"}
_INT_FLAGS = {"points", "K", "K_max", "dim", "n", "max_iter"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gradsing", description="Singular and exterior solutions of -Lap u = (1+g)|grad u|^p.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--N", type=int, dest="param_N")
    common.add_argument("--power", dest="param_p", help="exponent p, e.g. 7/4")
    sub.add_parser("run", parents=[common], help="run the task named in --config")
    for task, keys in _FLAG_MAP.items():
        sp = sub.add_parser(task, parents=[common])
        for key in keys:
            flag = _FLAG_ALIASES.get(key, f"--{key.replace('_', '-')}")
            if key == "t_values":
                sp.add_argument(flag, dest=f"opt_{key}", type=float, nargs="+")
            elif key in _FLOAT_FLAGS:
                sp.add_argument(flag, dest=f"opt_{key}", type=float)
            elif key in _INT_FLAGS:
                sp.add_argument(flag, dest=f"opt_{key}", type=int)
            else:
                sp.add_argument(flag, dest=f"opt_{key}")
    return ap


def config_from_args(ns: argparse.Namespace) -> dict:
    raw: dict = {}
    if ns.config is not None:
        try:
            raw = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    if ns.command != "run":
        if raw.get("task", ns.command) != ns.command:
            raise ConfigError(f"config task {raw.get('task')!r} does not match subcommand {ns.command!r}")
        raw["task"] = ns.command
    elif "task" not in raw:
        raise ConfigError("run needs --config with a task")
    solver = dict(raw.get("solver") or {})
    for key, val in vars(ns).items():
        if key.startswith("opt_") and val is not None:
            name = key[4:]
            if name == "R_max":
                solver["R_truncations"] = [val / 16, val / 8, val / 4, val / 2, val]
            else:
                solver[name] = val
    if solver:
        raw["solver"] = solver
    params = dict(raw.get("params") or {})
    if ns.param_N is not None:
        params["N"] = ns.param_N
    if ns.param_p is not None:
        params["p"] = ns.param_p
    if params:
        raw["params"] = params
    if ns.out is not None:
        raw.setdefault("output", {})["dir"] = str(ns.out)
    if ns.seed is not None:
        raw["seed"] = ns.seed
    return raw


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        code, doc = run(config_from_args(ns))
    except DivergenceError as exc:
        _err(exc, history=getattr(exc, "history", None))
        return EXIT_DIVERGED
    except (GradSingError, ValueError, TypeError) as exc:
        _err(exc)
        return EXIT_CONFIG
    print(f"{doc['config']['task']}: {'pass' if doc['ok'] else 'FAIL'}")
    return code


def _err(exc: Exception, **extra):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    payload.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(_jsonable(payload), sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
