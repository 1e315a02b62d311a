"""Command-line entry point.

Exit codes: 0 when the run is accepted or every check passes, 2 when the
method reports infeasibility or a failed check, 1 on any other error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .applications import App1Params, App2Params, run_application
from .errors import GradientBoundError, InfeasibleError, KirchhoffLabError, OrderingError
from .grid import Grid, ScalarField, build_grid, field_norms, read_field_csv, write_field_csv
from .linalg import principal_eigenpair, solve_poisson_unit
from .nonlinearity import BarrierPair, KirchhoffTerm, app1_reaction, app2_reaction, constant_reaction
from .ordering import check_order, probe_operator_properties, verify_subsolution, verify_supersolution
from .solver import SolverConfig, solve_P

log = logging.getLogger("kirchhoff_lab")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, tuples to lists, non-finite to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(payload: dict, path=None) -> str:
    text = json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _grid_from(domain: str, n: int, extent: float) -> Grid:
    if domain == "interval":
        return build_grid(1, [extent], [n])
    if domain == "square":
        return build_grid(2, [extent, extent], [n, n])
    raise KirchhoffLabError(f"unknown domain {domain!r}")


def _kirchhoff_from(cfg: dict) -> KirchhoffTerm:
    if "M_ts" in cfg:
        return KirchhoffTerm.tabulated(cfg["M_ts"], cfg["M_values"], cfg.get("m"))
    return KirchhoffTerm.affine(cfg.get("a", 1.0), cfg.get("b", 0.0), cfg.get("m"))


def _reaction_from(cfg: dict):
    kind = cfg.get("reaction")
    if kind == "app1":
        return app1_reaction(cfg["lambda"], cfg["mu"], cfg["q"], cfg["p"])
    if kind == "app2":
        return app2_reaction(cfg["A"], cfg["B"], cfg["q"], cfg["eta"])
    if kind == "constant":
        return constant_reaction(cfg.get("value", 1.0))
    raise KirchhoffLabError(f"unknown reaction {kind!r}; expected app1, app2 or constant")


def _barrier_from(source, cfg: dict, grid: Grid, side: str, base: Path) -> ScalarField:
    """Barrier by name (``zero``, ``eigen``, ``poisson``, ``constant``) or CSV path."""
    if source == "zero":
        return grid.zeros()
    if source == "eigen":
        phi = principal_eigenpair(grid).phi1
        return phi.with_values(cfg.get("delta", 1.0) * phi.values)
    if source == "poisson":
        e = solve_poisson_unit(grid)
        return e.with_values(cfg.get("S", 1.0) * e.values)
    if source == "constant":
        value = cfg.get(f"{side}_value", 0.0)
        return grid.field(np.full(grid.shape, value), boundary=value)
    path = Path(source)
    if not path.is_absolute():
        path = base / path
    field = read_field_csv(path, boundary=cfg.get(f"{side}_boundary", 0.0))
    if field.grid != grid:
        raise KirchhoffLabError(f"{path} does not match the configured grid")
    return field


def _load_config(path) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise KirchhoffLabError(f"malformed config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise KirchhoffLabError(f"config {path} must be a JSON object")
    return cfg


def _config_grid(cfg: dict) -> Grid:
    return _grid_from(cfg.get("domain", "interval"), int(cfg.get("n", 99)), float(cfg.get("extent", 1.0)))


def _json_path_for(out: Path) -> Path:
    return out.with_suffix(".json") if out.suffix != ".json" else out.with_name(out.stem + ".report.json")


def cmd_poisson(args) -> int:
    grid = _grid_from(args.domain, args.n, args.extent)
    e = solve_poisson_unit(grid)
    norms = field_norms(e)
    out = Path(args.out)
    write_field_csv(e, out)
    payload = {
        "command": "poisson",
        "config": {"domain": args.domain, "n": args.n, "extent": args.extent, "out": str(out)},
        "sup_norm": norms.sup_norm,
        "grad_sup_norm": norms.grad_sup_norm,
        "h1_seminorm_sq": norms.h1_seminorm_sq,
        "l1_norm": norms.l1_norm,
        "center_value": e.values[grid.center_index()],
    }
    sys.stdout.write(dump_json(payload, _json_path_for(out)))
    return EXIT_OK


def cmd_eigen(args) -> int:
    grid = _grid_from(args.domain, args.n, args.extent)
    eig = principal_eigenpair(grid, args.tol)
    out = Path(args.out)
    write_field_csv(eig.phi1, out)
    payload = {
        "command": "eigen",
        "config": {"domain": args.domain, "n": args.n, "extent": args.extent, "tol": args.tol, "out": str(out)},
        "lambda1": eig.lambda1,
        "residual_rel": eig.residual,
        "iterations": eig.iterations,
        "phi1_min": float(np.min(eig.phi1.values)),
        "phi1_sup": float(np.max(eig.phi1.values)),
    }
    sys.stdout.write(dump_json(payload, _json_path_for(out)))
    return EXIT_OK


def _write_run(out_dir: Path, payload: dict, fields: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, fld in fields.items():
        write_field_csv(fld, out_dir / f"{name}.csv")
    sys.stdout.write(dump_json(payload, out_dir / "report.json"))


def _failure(out_dir: Path | None, command: str, config: dict, exc: Exception) -> int:
    payload = {"command": command, "config": config, "accepted": False, "reason": str(exc)}
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        dump_json(payload, out_dir / "report.json")
    sys.stderr.write(f"{command}: {exc}\n")
    return EXIT_FAIL


def _run_app(which: str, args, params, config: dict) -> int:
    grid = _grid_from(args.domain, args.n, args.extent)
    cfg = SolverConfig(l=args.l)
    out_dir = Path(args.out)
    try:
        report, build = run_application(which, grid, params, cfg)
    except (InfeasibleError, OrderingError, GradientBoundError) as exc:
        return _failure(out_dir, which, config, exc)
    payload = {"command": which, "config": config, "solver": cfg.to_dict(), **report.to_dict()}
    _write_run(out_dir, payload, {"u": report.u, "lower": build.barriers.lower, "upper": build.barriers.upper})
    return EXIT_OK


def cmd_app1(args) -> int:
    M = KirchhoffTerm.affine(args.a, args.b)
    params = App1Params(args.lam, args.mu, args.q, args.p, M)
    config = {"lambda": args.lam, "mu": args.mu, "q": args.q, "p": args.p, "a": args.a, "b": args.b,
              "n": args.n, "domain": args.domain, "extent": args.extent, "l": args.l}
    return _run_app("app1", args, params, config)


def cmd_app2(args) -> int:
    M = KirchhoffTerm.affine(args.a, args.b)
    params = App2Params(args.A, args.B, args.q, args.eta, M)
    config = {"A": args.A, "B": args.B, "q": args.q, "eta": args.eta, "a": args.a, "b": args.b,
              "n": args.n, "domain": args.domain, "extent": args.extent, "l": args.l}
    return _run_app("app2", args, params, config)


def _warn_barriers(barriers: BarrierPair, f, M: KirchhoffTerm) -> None:
    """Barriers that fail their inequalities usually make the penalised iteration stall."""
    sub = verify_subsolution(barriers.lower, f, M.max_on(0.0, 1.0))
    sup = verify_supersolution(barriers.upper, f, M.m)
    for name, rep in (("lower barrier is not a subsolution", sub), ("upper barrier is not a supersolution", sup)):
        if not rep.passed:
            sys.stderr.write(f"solve: warning: {name} (margin {rep.worst_margin:.3e} at node {list(rep.worst_node)})\n")


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).resolve().parent
    grid = _config_grid(cfg)
    M = _kirchhoff_from(cfg)
    f = _reaction_from(cfg)
    solver_cfg = SolverConfig.from_dict(cfg)
    out_dir = Path(args.out or cfg.get("out", "solve_out"))
    try:
        lower = _barrier_from(cfg.get("lower", "zero"), cfg, grid, "lower", base)
        upper = _barrier_from(cfg.get("upper", "poisson"), cfg, grid, "upper", base)
        barriers = BarrierPair(lower, upper)
        _warn_barriers(barriers, f, M)
        report = solve_P(grid, M, f, solver_cfg, barriers)
    except (InfeasibleError, OrderingError, GradientBoundError) as exc:
        return _failure(out_dir, "solve", cfg, exc)
    payload = {"command": "solve", "config": cfg, "solver": solver_cfg.to_dict(), **report.to_dict()}
    _write_run(out_dir, payload, {"u": report.u})
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    base = Path(args.config).resolve().parent
    grid = _config_grid(cfg)
    f = _reaction_from(cfg)
    M = _kirchhoff_from(cfg)
    tol = float(cfg.get("tol", 0.0))
    alpha = float(cfg.get("alpha", M.max_on(0.0, 1.0)))
    checks = {}
    lower = upper = None
    if "lower" in cfg:
        lower = _barrier_from(cfg["lower"], cfg, grid, "lower", base)
        checks["subsolution"] = verify_subsolution(lower, f, alpha, tol).to_dict()
    if "upper" in cfg:
        upper = _barrier_from(cfg["upper"], cfg, grid, "upper", base)
        checks["supersolution"] = verify_supersolution(upper, f, M.m, tol).to_dict()
    if lower is not None and upper is not None:
        checks["order"] = check_order(lower, upper, tol).to_dict()
    if "solution" in cfg:
        u = _barrier_from(cfg["solution"], cfg, grid, "solution", base)
        if lower is not None:
            checks["order_lower"] = check_order(lower, u, tol).to_dict()
        if upper is not None:
            checks["order_upper"] = check_order(u, upper, tol).to_dict()
    if not checks:
        raise KirchhoffLabError("verify needs at least one of lower, upper")
    passed = all(c["pass"] for c in checks.values())
    payload = {"command": "verify", "config": cfg, "alpha": alpha, "m": M.m, "checks": checks, "pass": passed}
    text = dump_json(payload, args.out)
    sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_probe(args) -> int:
    grid = _grid_from(args.domain, args.n, args.extent)
    M = KirchhoffTerm.affine(args.a, args.b)
    report = probe_operator_properties(grid, M, args.trials, args.seed)
    config = {"trials": args.trials, "seed": args.seed, "a": args.a, "b": args.b, "n": args.n,
              "domain": args.domain, "extent": args.extent}
    payload = {"command": "probe", "config": config, **report.to_dict()}
    sys.stdout.write(dump_json(payload, args.out))
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kirchhoff-lab", description="Finite-difference laboratory for nonlocal Kirchhoff problems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def domain_args(p, n_default=None):
        p.add_argument("--domain", choices=["interval", "square"], default="interval")
        p.add_argument("--n", type=int, required=n_default is None, default=n_default, help="interior nodes per axis")
        p.add_argument("--extent", type=float, default=1.0)

    p = sub.add_parser("poisson", help="solve -Lap e = 1")
    domain_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("eigen", help="principal Dirichlet eigenpair")
    domain_args(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("solve", help="solve a problem described by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("app1", help="concave-convex model with gradient term")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--l", type=float, default=0.5)
    domain_args(p, 199)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_app1)

    p = sub.add_parser("app2", help="logistic-type model with gradient term")
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--l", type=float, default=0.5)
    domain_args(p, 199)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_app2)

    p = sub.add_parser("verify", help="check barrier inequalities and ordering for supplied fields")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("probe", help="sample monotonicity, convexity and coercivity")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    domain_args(p, 63)
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)
    return parser


def execute(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"kirchhoff-lab: {exc}\n")
        return EXIT_ERROR
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        sys.stderr.write(f"{args.command}: {exc}\n")
        return EXIT_FAIL
    except (KirchhoffLabError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"{args.command}: error: {exc}\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(execute())
