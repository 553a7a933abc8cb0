"""Numerical checks of the monotonicity and threshold properties of converged tables."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, state_space
from .solver import QTable, ThresholdTable, ValueTable, extract_policy


@dataclass
class PropertyCheck:
    name: str
    description: str
    checked: int = 0
    counterexample: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.counterexample is None

    def fail(self, *detail):
        if self.counterexample is None:
            self.counterexample = detail


@dataclass
class StructureReport:
    checks: list[PropertyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[PropertyCheck]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"{status} {c.name:<22} {c.checked:>8} checked  {c.description}"
            if not c.passed:
                line += f"\n     counterexample: {c.counterexample}"
            out.append(line)
        return out


def _tol(x, y):
    return 1e-9 * (1.0 + max(abs(x), abs(y)))


def _le(x, y):
    return x <= y + _tol(x, y)


def verify_structure(v: ValueTable, q: QTable, params: ModelParams | None = None,
                     thresholds: ThresholdTable | None = None) -> StructureReport:
    """Check every structural property exhaustively over the valid states.

    Value comparisons use an absolute tolerance of ``1e-9 * (1 + |V|)``.  The
    threshold chains are checked on ``thresholds`` when given (e.g. a table
    read from disk), otherwise on the table extracted from ``q``.
    """
    params = params or v.params
    b, d_max, p = params.b, params.d_max, params.p
    space = state_space(b, d_max)
    if len(v.values) != len(space):
        raise ValueError("value table does not match the state space of params")
    V = v.values
    busy, idle = space.busy_index, space.idle_index

    def val(d, delta, l, a):
        return V[idle[d, a]] if l == 0 else V[busy[d, l, delta, a]]

    def ok(d, delta, l):
        if d < 0 or d > d_max or delta < 0:
            return False
        if l == 0:
            return delta == d
        return 0 < l < b and delta < b - l <= d

    exp = PropertyCheck("expectation", "pointwise ordering implies ordered expectations")

    def pair(check, x, y):
        """Record V(x, a) <= V(y, a) for both arrival flags."""
        both = True
        for a in (0, 1):
            check.checked += 1
            vx, vy = val(*x, a), val(*y, a)
            if not _le(vx, vy):
                check.fail((*x, a), vx, (*y, a), vy)
                both = False
        if both:
            exp.checked += 1
            ex = (1 - p) * val(*x, 0) + p * val(*x, 1)
            ey = (1 - p) * val(*y, 0) + p * val(*y, 1)
            if not _le(ex, ey):
                exp.fail(x, ex, y, ey)

    mono_d = PropertyCheck("busy_monotone_d", "busy V non-decreasing in d")
    mono_idle = PropertyCheck("idle_monotone_d", "idle V(d,d,0,a) non-decreasing in d")
    mono_delta = PropertyCheck("busy_monotone_delta", "busy V non-decreasing in delta")
    busy_le_idle = PropertyCheck("busy_le_idle", "V(d,delta,l,a) <= V(d,d,0,a)")
    completion = PropertyCheck("completion_dominance", "V(delta,delta,0,a) <= V(d,delta,1,a)")
    mono_l = PropertyCheck("busy_monotone_l", "V non-decreasing in l for l > 0")

    for d in range(d_max):
        pair(mono_idle, (d, d, 0), (d + 1, d + 1, 0))
    for d in range(d_max + 1):
        for l in range(1, b):
            for delta in range(b - l):
                s = (d, delta, l)
                if not ok(*s):
                    continue
                if ok(d + 1, delta, l):
                    pair(mono_d, s, (d + 1, delta, l))
                if ok(d, delta + 1, l):
                    pair(mono_delta, s, (d, delta + 1, l))
                pair(busy_le_idle, s, (d, d, 0))
                if l == 1:
                    pair(completion, (delta, delta, 0), s)
                if ok(d, delta, l + 1):
                    pair(mono_l, s, (d, delta, l + 1))

    q0, q1 = q.skip, q.switch
    switch_l = PropertyCheck("switch_persists_in_l", "switch at l implies switch at l' > l")
    skip_d = PropertyCheck("skip_persists_in_d", "skip at d implies skip at d' > d")
    for d in range(d_max + 1):
        for l in range(1, b):
            for delta in range(b - l):
                if not ok(d, delta, l):
                    continue
                i = busy[d, l, delta, 1]
                # premises need a clear margin; conclusions get the tolerance
                if q1[i] <= q0[i] - _tol(q0[i], q1[i]) and ok(d, delta, l + 1):
                    j = busy[d, l + 1, delta, 1]
                    switch_l.checked += 1
                    if not _le(q1[j], q0[j]):
                        switch_l.fail((d, delta, l, 1), (d, delta, l + 1, 1), q1[j] - q0[j])
                if q0[i] <= q1[i] - _tol(q0[i], q1[i]) and ok(d + 1, delta, l):
                    j = busy[d + 1, l, delta, 1]
                    skip_d.checked += 1
                    if not _le(q0[j], q1[j]):
                        skip_d.fail((d, delta, l, 1), (d + 1, delta, l, 1), q0[j] - q1[j])

    extracted = extract_policy(q)
    table = thresholds if thresholds is not None else extracted
    step = PropertyCheck("threshold_step", "greedy action is a single step in delta")
    step.checked = sum(1 for _ in space.blocks())
    if extracted.step_violations:
        step.fail(*extracted.step_violations[:1])

    chain_l = PropertyCheck("threshold_chain_l", "tau[d,l] non-increasing in l")
    chain_d = PropertyCheck("threshold_chain_d", "tau[d,l] non-decreasing in d")
    _threshold_chains(table, chain_l, chain_d)

    idle_switch = PropertyCheck("idle_arrival_switch", "switch is greedy at every (d,d,0,1)")
    for d in range(d_max + 1):
        i = idle[d, 1]
        idle_switch.checked += 1
        if not q1[i] <= q0[i]:
            idle_switch.fail((d, d, 0, 1), q1[i] - q0[i])

    return StructureReport([mono_d, mono_idle, mono_delta, busy_le_idle, completion,
                            mono_l, exp, switch_l, skip_d, step, chain_l, chain_d,
                            idle_switch])


def l_chain_holds(upper: int, lower: int, l: int, b: int) -> bool:
    """``tau[d, l] >= tau[d, l+1]`` restricted to deltas valid in both blocks.

    Block ``l + 1`` only holds ``delta <= b - l - 2``, so any threshold at or
    above ``b - l - 1`` (including the all-skip value ``b``) means the same
    thing there.
    """
    top = b - l - 1
    return min(upper, top) >= min(lower, top)


def _threshold_chains(table: ThresholdTable, chain_l: PropertyCheck, chain_d: PropertyCheck):
    tau = table.tau
    b, d_max = table.params.b, table.params.d_max
    for d in range(d_max + 1):
        for l in range(1, b - 1):
            if d < b - l:
                continue
            chain_l.checked += 1
            if not l_chain_holds(int(tau[d, l]), int(tau[d, l + 1]), l, b):
                chain_l.fail((d, l), int(tau[d, l]), (d, l + 1), int(tau[d, l + 1]))
    for l in range(1, b):
        for d in range(b - l, d_max):
            chain_d.checked += 1
            if tau[d, l] > tau[d + 1, l]:
                chain_d.fail((d, l), int(tau[d, l]), (d + 1, l), int(tau[d + 1, l]))


def threshold_chains(table: ThresholdTable) -> StructureReport:
    chain_l = PropertyCheck("threshold_chain_l", "tau[d,l] non-increasing in l")
    chain_d = PropertyCheck("threshold_chain_d", "tau[d,l] non-decreasing in d")
    _threshold_chains(table, chain_l, chain_d)
    return StructureReport([chain_l, chain_d])
