"""Command-line interface: ``aosync {solve,thresholds,simulate,sweep,verify}``.

Exit status is 0 on success, 1 on a verification or convergence failure and
2 on usage or parse errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from .experiments import (DESK_HORIZON, DESK_REPLICATIONS, METHODS, FULL_HORIZON, parse_grid,
                          policy_path, solve, sweep, verify_policy_file)
from .model import ModelParams
from .persist import (SWEEP_COLUMNS, THRESHOLD_COLUMNS, output_dir, read_policy, threshold_rows,
                      write_csv, write_policy)
from .policies import SKIP_POLICY, SWITCH_POLICY, solve_aoi_baseline, threshold_policy
from .simulator import SimConfig, simulate
from .solver import DEFAULT_MAX_ITERS

OK, FAILED, USAGE = 0, 1, 2


def _rate(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < p <= 1.0:
        raise argparse.ArgumentTypeError("p must lie in (0, 1]")
    return p


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _grid(text: str):
    try:
        grid = parse_grid(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid: {text!r}") from None
    if not grid or any(not 0.0 < p <= 1.0 for p in grid):
        raise argparse.ArgumentTypeError("grid values must lie in (0, 1]")
    return grid


def _model_args(parser, p_required=True):
    parser.add_argument("--p", type=_rate, required=p_required, help="generation rate")
    parser.add_argument("--b", type=_positive, default=10, help="transmission time in slots")
    parser.add_argument("--dmax", type=_positive, default=400, help="truncation level of d")
    parser.add_argument("--alpha", type=float, default=0.9999, help="discount factor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aosync", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute the AoS-optimal threshold policy")
    _model_args(s)
    s.add_argument("--method", choices=METHODS, default="structured")
    s.add_argument("--epsilon", type=float, default=None,
                   help="stopping tolerance on the sup-norm residual")
    s.add_argument("--max-iters", type=_positive, default=DEFAULT_MAX_ITERS)
    s.add_argument("--out", type=Path, default=None, help="policy file to write")
    s.add_argument("--with-values", action="store_true", help="store the value table too")

    t = sub.add_parser("thresholds", help="emit threshold rows (p, d, l, tau) as CSV")
    t.add_argument("--policy", type=Path, nargs="+", required=True)
    t.add_argument("--out", type=Path, default=None)

    m = sub.add_parser("simulate", help="estimate average AoS and AoI of one policy")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--policy", type=Path, help="threshold policy file")
    src.add_argument("--kind", choices=("always_skip", "always_switch", "aoi_optimal"))
    _model_args(m, p_required=False)
    m.add_argument("--horizon", type=_positive, default=DESK_HORIZON)
    m.add_argument("--replications", type=_positive, default=DESK_REPLICATIONS)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--warmup", type=int, default=0)
    m.add_argument("--truncate", action="store_true", help="cap d at dmax like the solver")
    m.add_argument("--out", type=Path, default=None)

    w = sub.add_parser("sweep", help="simulate all four policies over a grid of p")
    w.add_argument("--grid", type=_grid, default=None, help="'0.1,0.5' or 'start:stop:step'")
    w.add_argument("--b", type=_positive, default=10)
    w.add_argument("--dmax", type=_positive, default=400)
    w.add_argument("--alpha", type=float, default=0.9999)
    w.add_argument("--method", choices=METHODS, default="structured")
    w.add_argument("--horizon", type=_positive, default=None)
    w.add_argument("--replications", type=_positive, default=None)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--paper-scale", action="store_true",
                   help=f"one replication of {FULL_HORIZON} slots per cell")
    w.add_argument("--policy-dir", type=Path, default=None, help="cache for solved policies")
    w.add_argument("--out", type=Path, default=None)

    v = sub.add_parser("verify", help="check structure and simulator identities of a policy")
    v.add_argument("--policy", type=Path, required=True)
    v.add_argument("--horizon", type=_positive, default=20_000, help="slots of the identity trace")
    v.add_argument("--seed", type=int, default=0)
    return parser


@contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _params(args) -> ModelParams:
    return ModelParams(p=args.p, b=args.b, d_max=args.dmax, alpha=args.alpha)


def cmd_solve(args) -> int:
    params = _params(args)
    sol = solve(params, args.method, args.epsilon, args.max_iters, keep_values=args.with_values)
    pf = sol.policy_file
    out = args.out or output_dir() / policy_path(".", params, args.method).name
    write_policy(pf, out)
    print(f"method        {pf.method}")
    print(f"iterations    {pf.iterations}")
    print(f"residual      {pf.residual:.3e} (epsilon {pf.epsilon:g})")
    print(f"wall time     {sol.seconds:.2f} s")
    if sol.minimizations == sol.minimizations:  # nan for relative VI
        print(f"minimizations {sol.minimizations:.1f} per iteration")
    if sol.gain is not None:
        print(f"gain          {sol.gain:.10g}")
    print(f"wrote         {out}")
    if not pf.converged:
        print(f"error: no convergence within {args.max_iters} iterations", file=sys.stderr)
        return FAILED
    return OK


def cmd_thresholds(args) -> int:
    files = [read_policy(path) for path in args.policy]
    with _sink(args.out) as fh:
        write_csv((row for pf in files for row in threshold_rows(pf.thresholds)),
                  THRESHOLD_COLUMNS, fh)
    return OK


def cmd_simulate(args) -> int:
    if args.policy is not None:
        pf = read_policy(args.policy)
        params, policy = pf.params, threshold_policy(pf.thresholds)
    else:
        if args.p is None:
            raise ValueError("--p is required with --kind")
        params = _params(args)
        policy = {"always_skip": SKIP_POLICY, "always_switch": SWITCH_POLICY}.get(args.kind)
        if policy is None:
            policy = solve_aoi_baseline(params)
    config = SimConfig(params, horizon=args.horizon, seed=args.seed,
                       replications=args.replications, warmup=args.warmup,
                       truncate=args.truncate)
    res = simulate(policy, config)
    row = {"p": params.p, "policy": res.policy, "avg_aos": res.avg_aos,
           "se_aos": res.std_err_aos, "avg_aoi": res.avg_aoi, "se_aoi": res.std_err_aoi,
           "horizon": res.horizon, "replications": res.replications, "error": ""}
    with _sink(args.out) as fh:
        write_csv([row], SWEEP_COLUMNS, fh)
    return OK


def cmd_sweep(args) -> int:
    if args.paper_scale:
        horizon, reps = FULL_HORIZON, 1
    else:
        horizon, reps = DESK_HORIZON, DESK_REPLICATIONS
    kwargs = {} if args.grid is None else {"grid": args.grid}
    rows = sweep(b=args.b, d_max=args.dmax, alpha=args.alpha, method=args.method,
                 horizon=args.horizon or horizon, replications=args.replications or reps,
                 seed=args.seed, policy_dir=args.policy_dir, **kwargs)
    with _sink(args.out) as fh:
        write_csv(rows, SWEEP_COLUMNS, fh)
    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"error: p={r['p']:g} {r['policy']}: {r['error']}", file=sys.stderr)
    return FAILED if failed else OK


def cmd_verify(args) -> int:
    pf = read_policy(args.policy)
    report = verify_policy_file(pf, sim_horizon=args.horizon, seed=args.seed)
    for line in report.lines():
        print(line)
    print("all checks passed" if report.passed
          else f"{len(report.failures())} check(s) failed")
    return OK if report.passed else FAILED


COMMANDS = {"solve": cmd_solve, "thresholds": cmd_thresholds, "simulate": cmd_simulate,
            "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, IsADirectoryError) as exc:  # incl. PolicyFileError
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
