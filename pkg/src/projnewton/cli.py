"""Command-line benchmark harness.

Subcommands: ``gen-data``, ``nmf-bench``, ``saddle`` and ``solve``. Every run
writes CSV artifacts plus a ``config.json`` snapshot into the output
directory (``--out``, else ``$PROJNEWTON_OUT``, else ``./out``).

Exit codes: 0 success, 2 usage, 3 solver failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import geometry as geo
from .csvio import (
    SUMMARY_COLUMNS,
    CsvParseError,
    ensure_dir,
    read_matrix,
    write_matrix,
    write_rows,
    write_trace,
)
from .nmf import NmfProblem, Rank1SolveFailed, build_saddle, gen_synthetic, initial_point, nmf_oracle
from .pgrad import pgrad_solve
from .pncg import pncg_solve
from .problem import SolverConfig, SolverReport, Status, StepKind
from .quadratic import random_feasible_point, random_quadratic
from .two_metric import ScalingStrategy, two_metric_solve

log = logging.getLogger("projnewton")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
SOLVERS = ("pncg", "pgrad", "two-metric")
ENV_OUT = "PROJNEWTON_OUT"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config

def _coerce(name: str, raw: str):
    defaults = {f.name: f.default for f in dataclasses.fields(SolverConfig)}
    if name not in defaults:
        raise UsageError(f"unknown config key {name!r}")
    text = raw.strip()
    default = defaults[name]
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if default is None or isinstance(default, float):
            if text.lower() in ("none", ""):
                if default is None:
                    return None
                raise ValueError(text)
            return float(text)
    except ValueError:
        raise UsageError(f"bad value for {name}: {raw!r}") from None
    return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        try:
            out[key] = _coerce(key, val)
        except UsageError as e:
            raise UsageError(f"{source}:{lineno}: {e}") from None
    return out


def build_config(args, base: Optional[SolverConfig] = None) -> SolverConfig:
    cfg = base or SolverConfig()
    changes = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise IOError(f"cannot read config file: {e}") from e
        changes.update(parse_config_text(text, args.config))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        changes[k.strip()] = _coerce(k.strip(), v)
    return cfg.replace(**changes)


def out_dir(args) -> Path:
    return ensure_dir(args.out or os.environ.get(ENV_OUT) or "out")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if hasattr(o, "value"):
        return o.value
    return str(o)


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


# ---------------------------------------------------------------- runs

def run_solver(name: str, oracle, bounds, x0, cfg: SolverConfig, pgrad_tol: float = 1e-4) -> SolverReport:
    if name == "pncg":
        return pncg_solve(oracle, bounds, x0, cfg)
    if name == "pgrad":
        return pgrad_solve(oracle, bounds, x0, beta=0.5, sigma=0.5, tol=pgrad_tol,
                           max_iters=cfg.max_outer_iters, max_seconds=cfg.max_wall_seconds, eps_r=cfg.eps_r)
    if name == "two-metric":
        return two_metric_solve(oracle, bounds, x0, cfg, ScalingStrategy())
    raise UsageError(f"unknown solver {name!r}")


def summary_row(scenario: str, trial, algorithm: str, rep: SolverReport) -> dict:
    return {
        "scenario": scenario, "trial": trial, "algorithm": algorithm,
        "outer_iters": rep.outer_iters, "time_s": rep.elapsed, "f_star": rep.f_final,
        "residual": rep.residual, "projnorm": rep.projnorm, "status": rep.status,
    }


def mean_rows(rows: list[dict], scenario: str, algorithms) -> list[dict]:
    out = []
    for alg in algorithms:
        mine = [r for r in rows if r["algorithm"] == alg]
        if not mine:
            continue
        row = {"scenario": scenario, "trial": "mean", "algorithm": alg}
        for col in ("outer_iters", "time_s", "f_star", "residual", "projnorm"):
            row[col] = float(np.mean([float(r[col]) for r in mine]))
        converged = sum(1 for r in mine if Status(r["status"]).converged)
        row["status"] = f"{converged}/{len(mine)} converged"
        out.append(row)
    return out


def _start_info(oracle, bounds, x0, eps_r):
    g0 = oracle.eval_grad(x0)
    return dict(f0=oracle.eval_f(x0), residual0=geo.residual(x0, g0, bounds, eps_r),
                projnorm0=geo.projnorm(x0, g0, bounds))


def parse_scenarios(text: str) -> list[tuple[int, int, int]]:
    out = []
    for part in text.replace(" ", "").split(";"):
        if not part:
            continue
        bits = part.strip("()").split(",")
        if len(bits) != 3:
            raise UsageError(f"scenario {part!r} must be m,n,r")
        try:
            m, n, r = (int(b) for b in bits)
        except ValueError:
            raise UsageError(f"scenario {part!r} must be integers") from None
        if min(m, n, r) < 1:
            raise UsageError(f"scenario {part!r} needs positive sizes")
        out.append((m, n, r))
    if not out:
        raise UsageError("no scenarios given")
    return out


def cmd_gen_data(args) -> int:
    data = gen_synthetic(args.m, args.n, args.r, args.seed)
    od = out_dir(args)
    write_matrix(od / "V.csv", data.problem.V)
    write_matrix(od / "W.csv", data.W_true)
    write_matrix(od / "Y.csv", data.Y_true)
    dump_json(od / "meta.json", data.meta)
    print(f"wrote V/W/Y to {od} (zero fraction W {data.zero_frac_W:.3f}, Y {data.zero_frac_Y:.3f})")
    return EXIT_OK


def cmd_nmf_bench(args) -> int:
    scenarios = parse_scenarios(args.scenarios)
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for s in solvers:
        if s not in SOLVERS:
            raise UsageError(f"unknown solver {s!r}; choose from {', '.join(SOLVERS)}")
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    cfg = build_config(args)
    od = out_dir(args)
    tdir = ensure_dir(od / "traces")
    fdir = ensure_dir(od / "final")
    dump_json(od / "config.json", {
        "command": "nmf-bench", "scenarios": scenarios, "trials": args.trials, "solvers": solvers,
        "seed": args.seed, "pgrad_tol": args.pgrad_tol, "solver_config": dataclasses.asdict(cfg),
        "initial_point": "half-normal, W0 and Y0 each rescaled to mean entry 1",
    })
    rows = []
    for (m, n, r) in scenarios:
        tag = f"{m}x{n}x{r}"
        data = gen_synthetic(m, n, r, args.seed)
        prob = data.problem
        bounds = prob.bounds()
        trial_rows = []
        for t in range(args.trials):
            W0, Y0 = initial_point(m, n, r, args.seed + 1000 * (t + 1))
            x0 = prob.pack(W0, Y0)
            for alg in solvers:
                oracle = nmf_oracle(prob)
                start = _start_info(oracle, bounds, x0, cfg.eps_r)
                rep = run_solver(alg, oracle, bounds, x0, cfg, args.pgrad_tol)
                name = f"{tag}_t{t}_{alg}"
                write_trace(tdir / f"{name}.csv", rep.trace, **start)
                W, Y = prob.unpack(rep.x_final)
                write_matrix(fdir / f"{name}_W.csv", W)
                write_matrix(fdir / f"{name}_Y.csv", Y)
                row = summary_row(tag, t, alg, rep)
                trial_rows.append(row)
                log.info("%s trial %d %s: %s f=%.6g iters=%d", tag, t, alg, rep.status.value,
                         rep.f_final, rep.outer_iters)
        rows.extend(trial_rows)
        rows.extend(mean_rows(trial_rows, tag, solvers))
    write_rows(od / "summary.csv", SUMMARY_COLUMNS, rows)
    for r in rows:
        if r["trial"] == "mean":
            print(f"{r['scenario']:>12} {r['algorithm']:>10} iters={r['outer_iters']:.1f} "
                  f"F*={r['f_star']:.4g} residual={r['residual']:.2e} projnorm={r['projnorm']:.2e}")
    return EXIT_OK


def cmd_saddle(args) -> int:
    base = SolverConfig(meo_enabled=True, max_wall_seconds=args.time_limit)
    cfg = build_config(args, base)
    od = out_dir(args)
    data = gen_synthetic(args.m, args.n, args.r_target, args.seed)
    prob = data.problem
    try:
        sad = build_saddle(args.m, args.n, args.seed, args.r_target, V=prob.V)
    except Rank1SolveFailed as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    x0 = prob.pack(sad.W0, sad.Y0)
    bounds = prob.bounds()
    dump_json(od / "config.json", {
        "command": "saddle", "m": args.m, "n": args.n, "seed": args.seed, "r_target": args.r_target,
        "rank1_projnorm": sad.rank1_projnorm, "saddle_projnorm": sad.projnorm,
        "pgrad_tol": args.pgrad_tol, "solver_config": dataclasses.asdict(cfg),
    })
    rows = []
    for alg in ("pncg", "pgrad"):
        oracle = nmf_oracle(prob)
        start = _start_info(oracle, bounds, x0, cfg.eps_r)
        rep = run_solver(alg, oracle, bounds, x0, cfg, args.pgrad_tol)
        write_trace(od / f"trace_{alg}.csv", rep.trace, **start)
        W, Y = prob.unpack(rep.x_final)
        write_matrix(od / f"{alg}_W.csv", W)
        write_matrix(od / f"{alg}_Y.csv", Y)
        rows.append(summary_row(f"saddle{args.m}x{args.n}", 0, alg, rep))
        msg = f"{alg}: F0={start['f0']:.6g} F*={rep.f_final:.6g} status={rep.status.value}"
        if alg == "pncg":
            meo_steps = [rec for rec in rep.trace if rec.step_type == StepKind.MEO_NC]
            first = f", first at k={meo_steps[0].k} t={meo_steps[0].elapsed:.2f}s" if meo_steps else ""
            msg += f" MeoNc steps={len(meo_steps)}{first}"
        print(msg)
    write_rows(od / "summary.csv", SUMMARY_COLUMNS, rows)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = build_config(args)
    od = out_dir(args)
    if args.problem == "quadratic":
        q = random_quadratic(args.n, args.seed, convex=not args.nonconvex, two_sided=not args.one_sided)
        oracle, bounds = q.oracle(), q.bounds
        x0 = random_feasible_point(q, args.seed)
        unpack = None
    else:
        if not args.V:
            raise UsageError("--V is required for --problem nmf")
        V = read_matrix(args.V)
        prob = NmfProblem(V, args.r)
        oracle, bounds = nmf_oracle(prob), prob.bounds()
        W0, Y0 = initial_point(prob.m, prob.n, args.r, args.seed)
        x0 = prob.pack(W0, Y0)
        unpack = prob.unpack
    start = _start_info(oracle, bounds, x0, cfg.eps_r)
    rep = run_solver(args.solver, oracle, bounds, x0, cfg, args.pgrad_tol)
    dump_json(od / "config.json", {
        "command": "solve", "problem": args.problem, "n": args.n, "seed": args.seed, "V": args.V,
        "r": args.r, "solver": args.solver, "solver_config": dataclasses.asdict(cfg),
    })
    write_trace(od / "trace.csv", rep.trace, **start)
    write_rows(od / "summary.csv", SUMMARY_COLUMNS, [summary_row(args.problem, 0, args.solver, rep)])
    if unpack is None:
        write_matrix(od / "x.csv", rep.x_final.reshape(1, -1))
    else:
        W, Y = unpack(rep.x_final)
        write_matrix(od / "W.csv", W)
        write_matrix(od / "Y.csv", Y)
    print(f"status={rep.status.value} iters={rep.outer_iters} f={rep.f_final:.10g} "
          f"residual={rep.residual:.3e} projnorm={rep.projnorm:.3e} time={rep.elapsed:.3f}s")
    if rep.message:
        print(rep.message)
    return EXIT_OK if rep.converged else EXIT_SOLVER


# ---------------------------------------------------------------- parser

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{v} must be positive")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{v} must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="projnewton", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./out)")
        sp.add_argument("--seed", type=int, default=0)
        if config:
            sp.add_argument("--config", help="key = value file with solver settings")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
            sp.add_argument("--pgrad-tol", type=_positive_float, default=1e-4)

    g = sub.add_parser("gen-data", help="generate a synthetic NMF instance")
    g.add_argument("--m", type=_positive_int, required=True)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--r", type=_positive_int, required=True)
    common(g, config=False)
    g.set_defaults(func=cmd_gen_data)

    b = sub.add_parser("nmf-bench", help="compare solvers on synthetic NMF scenarios")
    b.add_argument("--scenarios", default="150,100,15", help="semicolon-separated m,n,r triples")
    b.add_argument("--trials", type=int, default=5)
    b.add_argument("--solvers", default="pncg,pgrad")
    common(b)
    b.set_defaults(func=cmd_nmf_bench)

    s = sub.add_parser("saddle", help="start PNCG (with the eigenvalue oracle) and pgrad at a saddle point")
    s.add_argument("--m", type=_positive_int, default=300)
    s.add_argument("--n", type=_positive_int, default=200)
    s.add_argument("--r-target", type=_positive_int, default=10)
    s.add_argument("--time-limit", type=_positive_float, default=100.0)
    common(s)
    s.set_defaults(func=cmd_saddle)

    v = sub.add_parser("solve", help="run one solver on one problem")
    v.add_argument("--problem", choices=("quadratic", "nmf"), default="quadratic")
    v.add_argument("--solver", choices=SOLVERS, default="pncg")
    v.add_argument("--n", type=_positive_int, default=2, help="quadratic dimension")
    v.add_argument("--nonconvex", action="store_true")
    v.add_argument("--one-sided", action="store_true")
    v.add_argument("--V", help="CSV matrix for --problem nmf")
    v.add_argument("--r", type=_positive_int, default=5)
    common(v)
    v.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CsvParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
