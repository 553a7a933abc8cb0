"""Decision rules compared in the experiments.

Four kinds are supported: the AoS-optimal threshold policy, the two
baselines (always skip, always switch) and an AoI-optimal policy obtained by
solving an AoI-cost MDP built on the same no-buffer link model.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .model import Action, AosState, ModelParams
from .solver import DEFAULT_MAX_ITERS, ConvergenceWarning, ThresholdTable

KINDS = ("threshold", "always_skip", "always_switch", "aoi_threshold")


def always_skip(state: AosState) -> Action:
    if state.a == 1 and state.l == 0:
        return Action.SWITCH
    return Action.SKIP


def always_switch(state: AosState) -> Action:
    return Action.SWITCH if state.a == 1 else Action.SKIP


@dataclass(frozen=True, eq=False)
class Policy:
    """A deterministic Markov decision rule.

    AoS-based kinds look at ``(d, delta, l, a)`` only.  The AoI baseline also
    needs the destination AoI, which the caller (the simulator) tracks and
    passes as ``aoi``.
    """

    kind: str
    thresholds: ThresholdTable | None = None
    aoi: AoiSolution | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "threshold" and self.thresholds is None:
            raise ValueError("threshold policy needs a ThresholdTable")
        if self.kind == "aoi_threshold" and self.aoi is None:
            raise ValueError("AoI policy needs a solved AoI table")

    @property
    def name(self) -> str:
        return {"threshold": "optimal", "aoi_threshold": "aoi_optimal"}.get(self.kind, self.kind)

    def __call__(self, state: AosState, aoi: int | None = None) -> Action:
        if state.a == 0:
            return Action.SKIP
        if self.kind == "always_skip":
            return always_skip(state)
        if self.kind == "always_switch":
            return always_switch(state)
        if self.kind == "threshold":
            if state.l == 0:
                return Action.SWITCH
            return Action(int(state.delta >= self.thresholds[state.d, state.l]))
        if aoi is None:
            raise ValueError("the AoI policy needs the current AoI")
        return Action(int(self.aoi.switch_at(aoi, state.l)))

    def kernel_tables(self, b: int):
        """``(mode, tau, aoi_switch, aoi_lo)`` for the compiled simulator."""
        no_aoi = np.zeros((1, b), dtype=np.uint8)
        if self.kind == "always_skip":
            return 0, np.full((1, b), b, dtype=np.int64), no_aoi, 0
        if self.kind == "always_switch":
            return 0, np.zeros((1, b), dtype=np.int64), no_aoi, 0
        if self.kind == "threshold":
            table = self.thresholds
            if table.params.b != b:
                raise ValueError("threshold table was solved for a different b")
            # rows with no block hold -1; those states never occur
            return 0, np.ascontiguousarray(table.tau, dtype=np.int64), no_aoi, 0
        sol = self.aoi
        if sol.b != b:
            raise ValueError("AoI table was solved for a different b")
        dummy = np.zeros((1, b), dtype=np.int64)
        return 1, dummy, np.ascontiguousarray(sol.switch, dtype=np.uint8), sol.b


def threshold_policy(table: ThresholdTable) -> Policy:
    return Policy("threshold", thresholds=table)


SKIP_POLICY = Policy("always_skip")
SWITCH_POLICY = Policy("always_switch")


# AoI-cost MDP ---------------------------------------------------------------

class AoiState(NamedTuple):
    aoi: int
    l: int
    a: int


def aoi_advance(aoi: int, l: int, a: int, w: int, b: int, aoi_max: int | None = None):
    """Deterministic AoI dynamics: a delivered update is always ``b`` slots old."""
    if a == 1 and w == 1:
        nxt = (b, 0) if b == 1 else (aoi + 1, b - 1)
    elif l == 1:
        nxt = (b, 0)
    else:
        nxt = (aoi + 1, max(l - 1, 0))
    if aoi_max is not None and nxt[0] > aoi_max:
        nxt = (aoi_max, nxt[1])
    return nxt


def enumerate_aoi_states(b: int, aoi_max: int) -> list[AoiState]:
    return [AoiState(x, l, a) for x in range(b, aoi_max + 1) for l in range(b) for a in (0, 1)]


@dataclass(frozen=True, eq=False)
class AoiSolution:
    b: int
    aoi_max: int
    switch: np.ndarray  # [aoi - b, l] -> 1 when switching is greedy on an arrival
    values: np.ndarray
    iterations: int
    residual: float
    converged: bool

    def switch_at(self, aoi: int, l: int) -> bool:
        row = min(max(aoi, self.b), self.aoi_max) - self.b
        return bool(self.switch[row, l])


def solve_aoi_baseline(params: ModelParams, epsilon: float = 1e-4,
                       max_iters: int = DEFAULT_MAX_ITERS,
                       aoi_max: int | None = None) -> Policy:
    """Solve the discounted AoI-cost MDP and return its greedy policy."""
    b = params.b
    aoi_max = params.d_max + b if aoi_max is None else aoi_max
    if aoi_max < b:
        raise ValueError("aoi_max must be at least b")
    states = enumerate_aoi_states(b, aoi_max)
    rows = aoi_max - b + 1

    def index(aoi, l):
        return ((aoi - b) * b + l) * 2

    n = len(states)
    nxt0 = np.empty(n, dtype=np.int64)
    nxt1 = np.full(n, -1, dtype=np.int64)
    for i, (x, l, a) in enumerate(states):
        nxt0[i] = index(*aoi_advance(x, l, a, 0, b, aoi_max))
        if a == 1:
            nxt1[i] = index(*aoi_advance(x, l, a, 1, b, aoi_max))
    cost = np.array([s.aoi for s in states], dtype=np.float64)
    residuals = np.empty(max_iters)
    V, it, res = _kernels.value_iterate(np.zeros(n), cost, nxt0, nxt1, params.p,
                                        params.alpha, epsilon, max_iters, residuals)
    converged = bool(res < epsilon)
    if not converged:
        warnings.warn(f"AoI value iteration stopped at residual {res:.3g} after {it} "
                      "iterations", ConvergenceWarning, stacklevel=2)
    q0 = np.empty(n)
    q1 = np.empty(n)
    _kernels.q_values(V, cost, nxt0, nxt1, params.p, params.alpha, q0, q1)
    switch = (q1 <= q0).reshape(rows, b, 2)[:, :, 1].astype(np.uint8)
    sol = AoiSolution(b=b, aoi_max=aoi_max, switch=switch, values=V, iterations=it,
                      residual=float(res), converged=converged)
    return Policy("aoi_threshold", aoi=sol)

