"""Value iteration solvers for the AoS MDP and threshold extraction."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import AosState, ModelParams, StateSpace, state_space

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 200_000
REFERENCE_STATE = AosState(0, 0, 0, 0)


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class ValueTable:
    """Values over the canonical state order of one solve."""

    values: np.ndarray
    iteration: int
    residual: float
    converged: bool
    params: ModelParams
    method: str = "plain"
    residuals: np.ndarray | None = field(default=None, repr=False)
    # per-iteration count of two-way minimizations actually evaluated
    minimizations: np.ndarray | None = field(default=None, repr=False)

    @property
    def space(self) -> StateSpace:
        return state_space(self.params.b, self.params.d_max)

    def __getitem__(self, state) -> float:
        return float(self.values[self.space.index(AosState(*state))])

    def __len__(self):
        return len(self.values)


@dataclass
class QTable:
    """State-action values; ``switch`` is ``inf`` where switching is not allowed."""

    skip: np.ndarray
    switch: np.ndarray
    params: ModelParams
    discount: float

    @property
    def space(self) -> StateSpace:
        return state_space(self.params.b, self.params.d_max)

    def __getitem__(self, key) -> float:
        state, w = key
        i = self.space.index(AosState(*state))
        return float(self.switch[i] if w else self.skip[i])

    def greedy(self) -> np.ndarray:
        # ties resolve to switch
        return (self.switch <= self.skip).astype(np.int8)


@dataclass
class ThresholdTable:
    """Thresholds on delta for every busy ``(d, l)`` block.

    ``tau[d, l]`` is the smallest delta at which switching is optimal, ``b``
    when skipping is optimal for the whole block, and ``-1`` where the block
    does not exist (``l == 0`` or ``d < b - l``).
    """

    tau: np.ndarray
    params: ModelParams
    method: str = "plain"
    iterations: int = 0
    residual: float = float("nan")
    step_violations: tuple = ()

    def __getitem__(self, key) -> int:
        d, l = key
        d = min(d, self.params.d_max)
        t = int(self.tau[d, l])
        if t < 0:
            raise KeyError(f"no threshold for (d={key[0]}, l={l})")
        return t

    def items(self):
        b = self.params.b
        for d in range(self.params.d_max + 1):
            for l in range(1, b):
                if d >= b - l:
                    yield (d, l), int(self.tau[d, l])

    def __eq__(self, other):
        return (
            isinstance(other, ThresholdTable)
            and self.params == other.params
            and np.array_equal(self.tau, other.tau)
        )


def _check_args(epsilon, max_iters):
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")


def _report(name, it, res, eps, converged):
    if converged:
        logger.info("%s converged after %d iterations (residual %.3g)", name, it, res)
    else:
        warnings.warn(
            f"{name} did not reach residual {eps:g} within {it} iterations "
            f"(residual {res:.3g})",
            ConvergenceWarning,
            stacklevel=3,
        )


def q_table(values: np.ndarray, params: ModelParams, discount: float | None = None) -> QTable:
    space = state_space(params.b, params.d_max)
    discount = params.alpha if discount is None else discount
    q0 = np.empty(len(space))
    q1 = np.empty(len(space))
    _kernels.q_values(np.asarray(values, dtype=np.float64), space.cost, space.succ_skip,
                      space.succ_switch, params.p, discount, q0, q1)
    return QTable(skip=q0, switch=q1, params=params, discount=discount)


def value_iteration(params: ModelParams, epsilon: float = 1e-4,
                    max_iters: int = DEFAULT_MAX_ITERS) -> tuple[ValueTable, QTable]:
    """Discounted value iteration from ``V_0 = 0`` until the sup-norm change
    drops below ``epsilon``."""
    _check_args(epsilon, max_iters)
    space = state_space(params.b, params.d_max)
    residuals = np.empty(max_iters)
    V, it, res = _kernels.value_iterate(
        np.zeros(len(space)), space.cost, space.succ_skip, space.succ_switch,
        params.p, params.alpha, epsilon, max_iters, residuals)
    converged = bool(res < epsilon)
    _report("value iteration", it, res, epsilon, converged)
    n_arrivals = int(np.count_nonzero(space.succ_switch >= 0))
    table = ValueTable(values=V, iteration=it, residual=float(res), converged=converged,
                       params=params, method="plain", residuals=residuals[:it],
                       minimizations=np.full(it, n_arrivals, dtype=np.int64))
    return table, q_table(V, params)


def _block_layout(space: StateSpace):
    b = space.b
    blk_d, blk_l, blk_start, blk_idx = [], [], [], []
    in_block = np.zeros(len(space), dtype=bool)
    # d ascending, l descending: (d-1, l) and (d, l+1) are always done first
    for d in range(space.d_max + 1):
        for l in range(b - 1, 0, -1):
            if d < b - l:
                continue
            idx = space.busy_index[d, l, : b - l, 1]
            blk_d.append(d)
            blk_l.append(l)
            blk_start.append(len(blk_idx))
            blk_idx.extend(idx.tolist())
            in_block[idx] = True
    plain = np.flatnonzero(~in_block)
    return (plain.astype(np.int64), np.array(blk_d, dtype=np.int64),
            np.array(blk_l, dtype=np.int64), np.array(blk_start, dtype=np.int64),
            np.array(blk_idx, dtype=np.int64))


def structured_value_iteration(params: ModelParams, epsilon: float = 1e-4,
                               max_iters: int = DEFAULT_MAX_ITERS
                               ) -> tuple[ValueTable, ThresholdTable]:
    """Value iteration that exploits the threshold structure.

    Within each busy ``(d, l)`` block the delta values are swept upwards; the
    two-way minimum is skipped below the thresholds already found for
    ``(d, l+1)`` and ``(d-1, l)`` in the same iteration, and above the first
    delta at which switching wins.  The returned thresholds are re-extracted
    from a full Q-table of the final values.
    """
    _check_args(epsilon, max_iters)
    b = params.b
    space = state_space(b, params.d_max)
    plain, blk_d, blk_l, blk_start, blk_idx = _block_layout(space)
    residuals = np.empty(max_iters)
    mins = np.zeros(max_iters, dtype=np.int64)
    tau = np.full((params.d_max + 1, b), b, dtype=np.int64)
    V, it, res = _kernels.structured_iterate(
        np.zeros(len(space)), space.cost, space.succ_skip, space.succ_switch,
        params.p, params.alpha, epsilon, max_iters, residuals, plain, blk_d, blk_l,
        blk_start, blk_idx, b, tau, mins)
    converged = bool(res < epsilon)
    _report("structured value iteration", it, res, epsilon, converged)
    table = ValueTable(values=V, iteration=it, residual=float(res), converged=converged,
                       params=params, method="structured", residuals=residuals[:it],
                       minimizations=mins[:it])
    thresholds = extract_policy(q_table(V, params))
    thresholds.method = "structured"
    thresholds.iterations = it
    thresholds.residual = float(res)
    return table, thresholds


def relative_value_iteration(params: ModelParams, epsilon: float = 1e-9,
                             max_iters: int = DEFAULT_MAX_ITERS, damping: float = 1.0
                             ) -> tuple[ValueTable, ThresholdTable, float]:
    """Average-cost relative value iteration anchored at ``(0, 0, 0, 0)``.

    ``damping`` below 1 applies the aperiodicity transform
    ``h <- (1 - damping) h + damping (T h - g)``; the gain is unaffected.
    Returns differential values, thresholds and the gain estimate.
    """
    _check_args(epsilon, max_iters)
    if not 0.0 < damping <= 1.0:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    space = state_space(params.b, params.d_max)
    ref = space.index(REFERENCE_STATE)
    residuals = np.empty(max_iters)
    h, gain, it, res = _kernels.relative_iterate(
        np.zeros(len(space)), space.cost, space.succ_skip, space.succ_switch,
        params.p, ref, damping, epsilon, max_iters, residuals)
    converged = bool(res < epsilon)
    _report("relative value iteration", it, res, epsilon, converged)
    table = ValueTable(values=h, iteration=it, residual=float(res), converged=converged,
                       params=params, method="relative", residuals=residuals[:it])
    thresholds = extract_policy(q_table(h, params, discount=1.0))
    thresholds.method = "relative"
    thresholds.iterations = it
    thresholds.residual = float(res)
    return table, thresholds, float(gain)


def _tol(x, y):
    return 1e-9 * (1.0 + max(abs(x), abs(y)))


def extract_policy(q: QTable) -> ThresholdTable:
    """Thresholds from a Q-table; non-step blocks land in ``step_violations``."""
    params = q.params
    b = params.b
    space = q.space
    tau = np.full((params.d_max + 1, b), -1, dtype=np.int64)
    violations = []
    for d, l, idx in space.blocks():
        q0 = q.skip[idx]
        q1 = q.switch[idx]
        switch = q1 <= q0
        t = int(np.argmax(switch)) if switch.any() else b
        tau[d, l] = t
        for delta in range(t + 1, len(idx)):
            if q0[delta] < q1[delta] - _tol(q0[delta], q1[delta]):
                violations.append((d, l, delta))
                break
    if violations:
        logger.warning("greedy policy is not a step in delta for %d blocks", len(violations))
    return ThresholdTable(tau=tau, params=params, step_violations=tuple(violations))
