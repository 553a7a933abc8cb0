"""Solve dispatch and the generation-rate sweep behind the CLI."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelParams
from .persist import PolicyFile, PolicyFileError, read_policy, write_policy
from .policies import SKIP_POLICY, SWITCH_POLICY, solve_aoi_baseline, threshold_policy
from .simulator import SimConfig, simulate
from .solver import (DEFAULT_MAX_ITERS, ConvergenceWarning, relative_value_iteration,
                     structured_value_iteration, value_iteration, extract_policy)

logger = logging.getLogger(__name__)

METHODS = ("plain", "structured", "relative")
SWEEP_POLICIES = ("optimal", "aoi_optimal", "always_skip", "always_switch")
DEFAULT_GRID = tuple(round(0.05 * k, 10) for k in range(1, 20))
DESK_HORIZON = 500_000
DESK_REPLICATIONS = 20
FULL_HORIZON = 10**7


def default_epsilon(method: str) -> float:
    return 1e-9 if method == "relative" else 1e-4


@dataclass
class Solution:
    policy_file: PolicyFile
    gain: float | None
    seconds: float
    minimizations: float  # mean per iteration


def solve(params: ModelParams, method: str = "structured", epsilon: float | None = None,
          max_iters: int = DEFAULT_MAX_ITERS, keep_values: bool = False) -> Solution:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    epsilon = default_epsilon(method) if epsilon is None else epsilon
    gain = None
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        if method == "plain":
            table, q = value_iteration(params, epsilon, max_iters)
            thresholds = extract_policy(q)
        elif method == "structured":
            table, thresholds = structured_value_iteration(params, epsilon, max_iters)
        else:
            table, thresholds, gain = relative_value_iteration(params, epsilon, max_iters)
    seconds = time.perf_counter() - start
    thresholds.method = method
    thresholds.iterations = table.iteration
    thresholds.residual = table.residual
    pf = PolicyFile(params=params, thresholds=thresholds, method=method,
                    iterations=table.iteration, residual=table.residual,
                    converged=table.converged, epsilon=epsilon,
                    values=table.values.copy() if keep_values else None)
    mins = float(table.minimizations.mean()) if table.minimizations is not None else float("nan")
    return Solution(policy_file=pf, gain=gain, seconds=seconds, minimizations=mins)


def policy_path(directory, params: ModelParams, method: str) -> Path:
    return Path(directory) / (f"policy_p{params.p:g}_b{params.b}_dmax{params.d_max}"
                              f"_alpha{params.alpha:g}_{method}.json")


def load_or_solve(params: ModelParams, method: str = "structured", epsilon: float | None = None,
                  max_iters: int = DEFAULT_MAX_ITERS, policy_dir=None) -> PolicyFile:
    """Reuse a cached policy file from ``policy_dir`` when its parameters match."""
    path = policy_path(policy_dir, params, method) if policy_dir is not None else None
    if path is not None and path.exists():
        try:
            pf = read_policy(path)
            if pf.params == params and pf.converged:
                return pf
        except PolicyFileError:
            logger.warning("ignoring unreadable cached policy %s", path)
    pf = solve(params, method, epsilon, max_iters).policy_file
    if path is not None and pf.converged:
        write_policy(pf, path)
    return pf


def sweep(grid=DEFAULT_GRID, b: int = 10, d_max: int = 400, alpha: float = 0.9999,
          horizon: int = DESK_HORIZON, replications: int = DESK_REPLICATIONS, seed: int = 0,
          method: str = "structured", epsilon: float | None = None,
          max_iters: int = DEFAULT_MAX_ITERS, policy_dir=None, solved=None) -> list[dict]:
    """Simulate the four policies at every generation rate in ``grid``.

    Rows come out in ``(p, policy)`` order.  A failing cell is recorded in the
    ``error`` column and the sweep goes on.  ``solved`` may map ``p`` to a
    ready ``PolicyFile`` to skip the AoS solve.
    """
    rows = []
    for i, p in enumerate(grid):
        params = ModelParams(p=float(p), b=b, d_max=d_max, alpha=alpha)
        config = SimConfig(params, horizon=horizon, seed=seed + i, replications=replications)
        policies = {"always_skip": SKIP_POLICY, "always_switch": SWITCH_POLICY}
        errors = {}
        try:
            pf = (solved or {}).get(p) or load_or_solve(params, method, epsilon, max_iters,
                                                        policy_dir)
            if not pf.converged:
                errors["optimal"] = f"solver did not converge (residual {pf.residual:.3g})"
            policies["optimal"] = threshold_policy(pf.thresholds)
        except Exception as exc:  # recorded per cell
            errors["optimal"] = f"{type(exc).__name__}: {exc}"
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                aoi = solve_aoi_baseline(params, default_epsilon("plain"), max_iters)
            if not aoi.aoi.converged:
                errors["aoi_optimal"] = "AoI solver did not converge"
            policies["aoi_optimal"] = aoi
        except Exception as exc:
            errors["aoi_optimal"] = f"{type(exc).__name__}: {exc}"
        for name in SWEEP_POLICIES:
            row = {"p": float(p), "policy": name, "horizon": horizon,
                   "replications": replications, "error": errors.get(name, "")}
            if name in policies:
                try:
                    res = simulate(policies[name], config)
                    row.update(avg_aos=res.avg_aos, se_aos=res.std_err_aos,
                               avg_aoi=res.avg_aoi, se_aoi=res.std_err_aoi)
                except Exception as exc:
                    row["error"] = f"{type(exc).__name__}: {exc}"
            if not row["error"]:
                logger.info("p=%g %-13s AoS %.4f AoI %.4f", p, name, row["avg_aos"],
                            row["avg_aoi"])
            rows.append(row)
    return rows


def parse_grid(text: str) -> tuple[float, ...]:
    """``"0.1,0.5"`` or ``"start:stop:step"`` (inclusive)."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 10) for k in range(n))
    return tuple(float(x) for x in text.split(",") if x.strip())


def verify_policy_file(pf: PolicyFile, sim_horizon: int = 20_000, seed: int = 0):
    """Structural checks on the solution behind ``pf`` plus simulator identities.

    Uses the stored value table when present, otherwise re-solves with the
    recorded method and tolerance.  The stored thresholds must match the ones
    re-derived from the values.
    """
    from .simulator import check_identities
    from .solver import ValueTable, q_table
    from .structure import PropertyCheck, verify_structure

    params = pf.params
    values = pf.values
    method = pf.method
    if values is None:
        values = solve(params, method, pf.epsilon, max(pf.iterations, 1) + 1000,
                       keep_values=True).policy_file.values
    discount = 1.0 if method == "relative" else params.alpha
    q = q_table(values, params, discount=discount)
    vt = ValueTable(values=values, iteration=pf.iterations, residual=pf.residual,
                    converged=pf.converged, params=params, method=method)
    report = verify_structure(vt, q, params, thresholds=pf.thresholds)
    match = PropertyCheck("stored_thresholds", "stored thresholds == thresholds of the values")
    match.checked = int(np.count_nonzero(pf.thresholds.tau >= 0))
    derived = extract_policy(q)
    diff = np.argwhere(derived.tau != pf.thresholds.tau)
    if len(diff):
        d, l = (int(x) for x in diff[0])
        match.fail((d, l), int(pf.thresholds.tau[d, l]), int(derived.tau[d, l]))
    report.checks.append(match)
    report.checks.extend(check_identities(threshold_policy(pf.thresholds), params,
                                          sim_horizon, seed))
    return report
