"""Reference computations that share no code path with the solvers.

Transition matrices are rebuilt densely from ``transition`` and every policy
is evaluated by an exact linear solve.
"""
from __future__ import annotations

import itertools

import numpy as np

from aosync.model import Action, AosState, enumerate_states, transition


class DenseModel:
    def __init__(self, params):
        self.params = params
        self.states = enumerate_states(params)
        self.index = {s: i for i, s in enumerate(self.states)}
        n = len(self.states)
        self.cost = np.array([s.d for s in self.states], dtype=np.float64)
        self.P = np.zeros((2, n, n))
        for i, s in enumerate(self.states):
            for w in (Action.SKIP, Action.SWITCH):
                if w == Action.SWITCH and s.a == 0:
                    continue
                for nxt, prob in transition(s, w, params):
                    self.P[w, i, self.index[nxt]] += prob
        self.choice = np.array([i for i, s in enumerate(self.states) if s.a == 1])

    def __len__(self):
        return len(self.states)

    def transition_matrix(self, actions):
        """Rows of the chain induced by a per-state action vector."""
        actions = np.asarray(actions)
        return np.where(actions[:, None] == 1, self.P[1], self.P[0])

    def evaluate(self, actions, alpha):
        n = len(self)
        return np.linalg.solve(np.eye(n) - alpha * self.transition_matrix(actions), self.cost)

    def q_values(self, V, alpha):
        q0 = self.cost + alpha * self.P[0] @ V
        q1 = self.cost + alpha * self.P[1] @ V
        q1[[s.a == 0 for s in self.states]] = np.inf
        return q0, q1

    def greedy(self, V, alpha, rtol=1e-9):
        q0, q1 = self.q_values(V, alpha)
        return (q1 <= q0 + rtol * (1 + np.abs(q0))).astype(np.int8)

    def actions_of(self, policy):
        return np.array([int(policy(s)) for s in self.states], dtype=np.int8)


def enumerate_optimal(model: DenseModel, alpha: float, batch: int = 1 << 15):
    """Exhaustive search over every deterministic Markov policy.

    Each policy differs from "always skip" only in the rows of arrival
    states, so its linear system is solved through the Woodbury identity
    around the all-skip system.  Returns the elementwise minimal value
    vector and asserts that a single policy attains it in every state.
    """
    n = len(model)
    k = len(model.choice)
    base_inv = np.linalg.inv(np.eye(n) - alpha * model.P[0])
    rows = -alpha * (model.P[1] - model.P[0])[model.choice]   # (k, n) row changes
    v_skip = base_inv @ model.cost
    G = base_inv[:, model.choice]                              # (n, k)
    M = rows @ G                                               # (k, k)
    r = rows @ v_skip
    eye = np.eye(k)
    best_v, best_sum = None, np.inf
    lowest = np.full(n, np.inf)
    for start in range(0, 2**k, batch):
        codes = np.arange(start, min(start + batch, 2**k))
        bits = ((codes[:, None] >> np.arange(k)) & 1).astype(np.float64)
        K = eye + bits[:, :, None] * M[None]
        y = np.linalg.solve(K, (bits * r)[..., None])[..., 0]
        V = v_skip - y @ G.T
        lowest = np.minimum(lowest, V.min(axis=0))
        sums = V.sum(axis=1)
        j = int(np.argmin(sums))
        if sums[j] < best_sum:
            best_sum, best_v = sums[j], V[j]
    assert np.allclose(best_v, lowest, rtol=1e-10, atol=1e-10), "no uniformly optimal policy"
    return best_v


def policy_iteration(model: DenseModel, alpha: float, max_rounds: int = 1000):
    """Howard policy iteration with exact evaluation; returns optimal values."""
    actions = np.zeros(len(model), dtype=np.int8)
    for _ in range(max_rounds):
        V = model.evaluate(actions, alpha)
        q0, q1 = model.q_values(V, alpha)
        # keep the current action unless the other one is strictly better
        with np.errstate(invalid="ignore"):
            better = np.where(actions == 1, q0 < q1 - 1e-12 * (1 + np.abs(q1)),
                              q1 < q0 - 1e-12 * (1 + np.abs(q0)))
        if not better.any():
            return V
        actions = np.where(better, 1 - actions, actions).astype(np.int8)
    raise RuntimeError("policy iteration did not terminate")


def stationary_average(model: DenseModel, actions) -> float:
    """Long-run average cost of a unichain policy from its stationary law."""
    P = model.transition_matrix(actions)
    n = len(model)
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return float(pi @ model.cost)


def deterministic_cycle(step, start):
    """Walk a deterministic map until a state repeats; return (prefix, cycle)."""
    seen = {}
    path = []
    s = start
    while s not in seen:
        seen[s] = len(path)
        path.append(s)
        s = step(s)
    k = seen[s]
    return path[:k], path[k:]


def all_tuples(params, d_hi=None):
    """Every 4-tuple in a box around the valid region, for filter-based oracles."""
    d_hi = params.d_max + 2 if d_hi is None else d_hi
    for d, delta, l, a in itertools.product(range(-1, d_hi + 1), range(-1, d_hi + 1),
                                            range(-1, params.b + 1), (0, 1, 2)):
        yield AosState(d, delta, l, a)
