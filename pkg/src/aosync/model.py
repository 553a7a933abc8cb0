"""State space, dynamics and cost of the Age-of-Synchronization MDP.

A state ``(d, delta, l, a)`` holds the AoS at the destination, the AoS at
the transmitter, the remaining transmission slots of the update in service
and the arrival flag of the current slot.  Busy states (``l > 0``) satisfy
``delta < b - l <= d``; idle states (``l == 0``) satisfy ``delta == d``.

The canonical order of the enumerated space is ``(d, l, delta, a)``
ascending, so the ``a = 1`` twin of any state sits right after its
``a = 0`` twin.  The solver kernels rely on that.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np


class Action(IntEnum):
    SKIP = 0
    SWITCH = 1


@dataclass(frozen=True)
class ModelParams:
    """Problem parameters.

    ``p`` is the per-slot probability of a status change, ``b`` the number of
    slots needed to send one update, ``d_max`` the truncation cap on the
    destination AoS and ``alpha`` the discount factor.
    """

    p: float
    b: int
    d_max: int
    alpha: float = 0.9999

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if int(self.b) != self.b or self.b < 1:
            raise ValueError(f"b must be an integer >= 1, got {self.b}")
        if int(self.d_max) != self.d_max or self.d_max < self.b:
            raise ValueError(f"d_max must be an integer >= b, got {self.d_max}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "b", int(self.b))
        object.__setattr__(self, "d_max", int(self.d_max))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "alpha", float(self.alpha))


class AosState(NamedTuple):
    d: int
    delta: int
    l: int
    a: int

    @property
    def busy(self) -> bool:
        return self.l > 0


class Outcome(NamedTuple):
    state: AosState
    prob: float


def is_valid(state: AosState, params: ModelParams) -> bool:
    d, delta, l, a = state
    if a not in (0, 1) or d < 0 or delta < 0 or d > params.d_max:
        return False
    if l == 0:
        return delta == d
    if not 0 < l < params.b:
        return False
    return delta < params.b - l <= d


def enumerate_states(params: ModelParams) -> list[AosState]:
    """All valid states with ``d <= d_max`` in canonical order."""
    b = params.b
    states = []
    for d in range(params.d_max + 1):
        for a in (0, 1):
            states.append(AosState(d, d, 0, a))
        for l in range(1, b):
            if b - l > d:
                continue
            for delta in range(b - l):
                for a in (0, 1):
                    states.append(AosState(d, delta, l, a))
    return states


def allowed_actions(state: AosState) -> frozenset[Action]:
    if state.a == 1:
        return frozenset((Action.SKIP, Action.SWITCH))
    return frozenset((Action.SKIP,))


def cost(state: AosState) -> int:
    return state.d


def advance(d: int, delta: int, l: int, a: int, w: int, b: int) -> tuple[int, int, int]:
    """Deterministic part of one slot, without truncation.

    Returns ``(d', delta', l')``.  A continued transmission that finishes this
    slot (``l == 1``) hands the transmitter AoS to the destination.  With
    ``b == 1`` a switch finishes within its own slot and leaves the system
    synchronized.
    """
    if a == 1 and w == 1:
        if b == 1:
            return 0, 0, 0
        return d + 1, 0, b - 1
    delta_next = delta + 1 if (delta > 0 or a == 1) else 0
    if l == 1:
        return delta_next, delta_next, 0
    d_next = d + 1 if (d > 0 or a == 1) else 0
    return d_next, delta_next, max(l - 1, 0)


def cap(d: int, delta: int, l: int, d_max: int) -> tuple[int, int, int]:
    if d <= d_max:
        return d, delta, l
    if l == 0:
        return d_max, d_max, 0
    # busy states keep delta < b <= d_max
    return d_max, delta, l


def transition(state: AosState, action: int, params: ModelParams) -> tuple[Outcome, ...]:
    """Successor distribution of ``state`` under ``action`` in the truncated MDP."""
    if not is_valid(state, params):
        raise ValueError(f"invalid state {state} for {params}")
    if action not in allowed_actions(state):
        raise ValueError(f"action {action} not allowed in state {state}")
    d, delta, l = cap(*advance(*state, int(action), params.b), params.d_max)
    p = params.p
    if p == 1.0:
        return (Outcome(AosState(d, delta, l, 1), 1.0),)
    return (
        Outcome(AosState(d, delta, l, 0), 1.0 - p),
        Outcome(AosState(d, delta, l, 1), p),
    )


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Dense indexing of the truncated state space plus successor tables.

    ``succ_skip[i]`` / ``succ_switch[i]`` hold the index of the ``a' = 0``
    successor of state ``i``; the ``a' = 1`` successor is the next index.
    ``succ_switch`` is ``-1`` where switching is not allowed.
    """

    b: int
    d_max: int
    states: tuple[AosState, ...]
    cost: np.ndarray
    succ_skip: np.ndarray
    succ_switch: np.ndarray
    idle_index: np.ndarray  # [d, a]
    busy_index: np.ndarray  # [d, l, delta, a], -1 where invalid

    def __len__(self):
        return len(self.states)

    def index(self, state: AosState) -> int:
        d, delta, l, a = state
        if l == 0:
            if delta != d:
                raise KeyError(state)
            return int(self.idle_index[d, a])
        i = int(self.busy_index[d, l, delta, a]) if delta < self.b else -1
        if i < 0:
            raise KeyError(state)
        return i

    def blocks(self):
        """Yield ``(d, l, indices)`` for every busy arrival block, ``indices``
        ordered by ascending delta."""
        b = self.b
        for d in range(self.d_max + 1):
            for l in range(1, b):
                if b - l <= d:
                    yield d, l, self.busy_index[d, l, : b - l, 1]


@functools.lru_cache(maxsize=16)
def state_space(b: int, d_max: int) -> StateSpace:
    # p and alpha do not shape the space; any admissible values will do
    params = ModelParams(p=0.5, b=b, d_max=d_max, alpha=0.5)
    states = enumerate_states(params)
    n = len(states)
    idle_index = np.full((d_max + 1, 2), -1, dtype=np.int64)
    busy_index = np.full((d_max + 1, max(b, 1), max(b, 1), 2), -1, dtype=np.int64)
    for i, (d, delta, l, a) in enumerate(states):
        if l == 0:
            idle_index[d, a] = i
        else:
            busy_index[d, l, delta, a] = i

    def lookup(d, delta, l):
        return int(idle_index[d, 0]) if l == 0 else int(busy_index[d, l, delta, 0])

    succ_skip = np.empty(n, dtype=np.int64)
    succ_switch = np.full(n, -1, dtype=np.int64)
    for i, s in enumerate(states):
        succ_skip[i] = lookup(*transition(s, Action.SKIP, params)[0].state[:3])
        if s.a == 1:
            succ_switch[i] = lookup(*transition(s, Action.SWITCH, params)[0].state[:3])
    for arr in (succ_skip, succ_switch, idle_index, busy_index):
        arr.setflags(write=False)
    costs = np.array([s.d for s in states], dtype=np.float64)
    costs.setflags(write=False)
    return StateSpace(
        b=b,
        d_max=d_max,
        states=tuple(states),
        cost=costs,
        succ_skip=succ_skip,
        succ_switch=succ_switch,
        idle_index=idle_index,
        busy_index=busy_index,
    )
