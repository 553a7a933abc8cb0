"""Slotted Monte Carlo estimation of average AoS and AoI.

The simulator runs the untruncated dynamics: states with ``d > d_max`` are
legal and threshold policies read the ``d_max`` row for them.  AoS and AoI
are sampled at the beginning of every slot; the AoI starts at ``b``, as if
an update had just been delivered.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import AosState, ModelParams, advance, cap, is_valid
from .policies import Policy

CHUNK = 1 << 20


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    horizon: int = 10**7
    seed: int = 0
    replications: int = 1
    warmup: int = 0
    # batch means used for the standard error of a single replication
    batches: int = 20
    # run the d_max-truncated chain the solver optimizes instead of the true one
    truncate: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= self.warmup < self.horizon:
            raise ValueError("warmup must lie in [0, horizon)")
        if self.batches < 2:
            raise ValueError("batches must be >= 2")


@dataclass
class SimResult:
    policy: str
    avg_aos: float
    avg_aoi: float
    std_err_aos: float
    std_err_aoi: float
    epoch_count: int
    replications: int
    horizon: int
    warmup: int
    seed: int
    aoi_init: int
    rep_aos: np.ndarray = field(repr=False)
    rep_aoi: np.ndarray = field(repr=False)


def replication_rngs(seed: int, replications: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(replications)]


def arrival_stream(rng: np.random.Generator, p: float, horizon: int, chunk: int = CHUNK):
    """Yield boolean arrival arrays covering ``horizon`` slots."""
    done = 0
    while done < horizon:
        n = min(chunk, horizon - done)
        yield rng.random(n) < p
        done += n


def _run_replication(policy_tables, b, p, horizon, warmup, rng, cuts, d_cap=-1):
    """Per-segment sums for one replication.

    ``cuts`` are the segment boundaries from ``warmup`` to ``horizon``; slots
    before ``warmup`` run but are not counted.
    """
    mode, tau, aoi_switch, aoi_lo = policy_tables
    state = np.array([0, 0, 0, b], dtype=np.int64)
    bounds = sorted({0, *cuts})
    n_seg = len(bounds) - 1
    sum_d = np.zeros(n_seg, dtype=np.int64)
    sum_aoi = np.zeros(n_seg, dtype=np.int64)
    counted = np.zeros(n_seg, dtype=np.int64)
    deliveries = 0
    t = 0
    seg = 0
    for arr in arrival_stream(rng, p, horizon):
        pos = 0
        while pos < len(arr):
            end = pos + min(len(arr) - pos, bounds[seg + 1] - t)
            sd, sa, dl, cn = _kernels.run_slots(arr[pos:end], state, b, mode, tau, aoi_switch,
                                               aoi_lo, t, warmup, d_cap)
            sum_d[seg] += sd
            sum_aoi[seg] += sa
            counted[seg] += cn
            deliveries += dl
            t += end - pos
            pos = end
            if t == bounds[seg + 1]:
                seg += 1
    keep = slice(1, None) if bounds[0] < cuts[0] else slice(None)
    return sum_d[keep], sum_aoi[keep], counted[keep], deliveries


def _std_err(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else float("nan")


def simulate(policy: Policy, config: SimConfig) -> SimResult:
    """Average AoS and AoI of ``policy`` over ``[warmup, horizon)``.

    Each replication draws its arrivals from its own child of
    ``SeedSequence(seed)``.  Standard errors come from the spread of the
    replication means, or from batch means when there is one replication.
    """
    params = config.params
    b = params.b
    tables = policy.kernel_tables(b)
    if config.replications == 1:
        span = config.horizon - config.warmup
        cuts = [config.warmup + (k * span) // config.batches for k in range(config.batches + 1)]
        cuts = sorted(set(cuts))
    else:
        cuts = [config.warmup, config.horizon]
    rep_aos, rep_aoi, epochs = [], [], 0
    batch_aos, batch_aoi = [], []
    for rng in replication_rngs(config.seed, config.replications):
        sd, sa, cn, dl = _run_replication(tables, b, params.p, config.horizon, config.warmup,
                                          rng, cuts, params.d_max if config.truncate else -1)
        total = cn.sum()
        rep_aos.append(sd.sum() / total)
        rep_aoi.append(sa.sum() / total)
        epochs += dl
        batch_aos = sd / np.maximum(cn, 1)
        batch_aoi = sa / np.maximum(cn, 1)
    rep_aos = np.array(rep_aos)
    rep_aoi = np.array(rep_aoi)
    if config.replications == 1:
        se_aos, se_aoi = _std_err(batch_aos), _std_err(batch_aoi)
    else:
        se_aos, se_aoi = _std_err(rep_aos), _std_err(rep_aoi)
    return SimResult(
        policy=policy.name,
        avg_aos=float(rep_aos.mean()),
        avg_aoi=float(rep_aoi.mean()),
        std_err_aos=se_aos,
        std_err_aoi=se_aoi,
        epoch_count=int(epochs),
        replications=config.replications,
        horizon=config.horizon,
        warmup=config.warmup,
        seed=config.seed,
        aoi_init=b,
        rep_aos=rep_aos,
        rep_aoi=rep_aoi,
    )


# Traces and epoch bookkeeping ----------------------------------------------

@dataclass
class Trace:
    """Per-slot record of one replication (state at the start of each slot)."""

    b: int
    d: np.ndarray
    delta: np.ndarray
    l: np.ndarray
    a: np.ndarray
    w: np.ndarray
    aoi: np.ndarray
    delivered: np.ndarray  # a transmission finished during the slot

    def __len__(self):
        return len(self.d)

    def states(self):
        for t in range(len(self)):
            yield AosState(int(self.d[t]), int(self.delta[t]), int(self.l[t]), int(self.a[t]))


def simulate_trace(policy: Policy, params: ModelParams, horizon: int, seed: int = 0,
                   replication: int = 0, truncate: bool = False) -> Trace:
    """Slot-by-slot reference run in plain Python.

    Uses the same arrival stream as replication ``replication`` of
    ``simulate`` with the same seed, so sums must agree exactly.
    """
    b = params.b
    rng = replication_rngs(seed, replication + 1)[replication]
    arrivals = np.concatenate(list(arrival_stream(rng, params.p, horizon)))
    cols = {k: np.zeros(horizon, dtype=np.int64)
            for k in ("d", "delta", "l", "a", "w", "aoi", "delivered")}
    d, delta, l, aoi = 0, 0, 0, b
    for t in range(horizon):
        a = int(arrivals[t])
        w = int(policy(AosState(d, delta, l, a), aoi=aoi))
        finished = (a == 1 and w == 1 and b == 1) or ((a == 0 or w == 0) and l == 1)
        for k, v in (("d", d), ("delta", delta), ("l", l), ("a", a), ("w", w), ("aoi", aoi),
                     ("delivered", int(finished))):
            cols[k][t] = v
        d, delta, l = advance(d, delta, l, a, w, b)
        if truncate:
            d, delta, l = cap(d, delta, l, params.d_max)
        aoi = b if finished else aoi + 1
    cols["delivered"] = cols["delivered"].astype(bool)
    return Trace(b=b, **cols)


def trace_valid(trace: Trace, params: ModelParams) -> AosState | None:
    """First visited state that is invalid for the untruncated model, if any."""
    wide = dataclasses.replace(params, d_max=max(params.b, int(trace.d.max(initial=0))))
    for s in trace.states():
        if not is_valid(s, wide):
            return s
    return None


@dataclass(frozen=True)
class EpochRecord:
    start: int  # S_{i-1}
    end: int  # S_i (exclusive)
    first_generation: int  # offset of the first arrival, == length if none
    start_aos: int
    area: int  # per-slot AoS summed over [start, end)

    @property
    def length(self) -> int:
        return self.end - self.start


def epoch_area_discrete(record: EpochRecord) -> int:
    """Closed-form AoS sum over one epoch under start-of-slot sampling."""
    n = record.length
    if record.start_aos > 0:
        return record.start_aos * n + n * (n - 1) // 2
    m = max(n - record.first_generation, 0)
    return m * (m - 1) // 2 if m > 0 else 0


def decompose_epochs(trace: Trace) -> tuple[list[EpochRecord], EpochRecord | None]:
    """Split a trace at delivery boundaries.

    Returns the completed epochs and the trailing partial epoch (``None`` when
    the trace ends exactly on a boundary).
    """
    horizon = len(trace)
    bounds = [0] + [int(t) + 1 for t in np.flatnonzero(trace.delivered)]
    if bounds[-1] != horizon:
        bounds.append(horizon)
        partial = True
    else:
        partial = False
    arrivals = np.flatnonzero(trace.a)
    records = []
    for s, e in zip(bounds[:-1], bounds[1:]):
        k = np.searchsorted(arrivals, s)
        first = int(arrivals[k]) - s if k < len(arrivals) and arrivals[k] < e else e - s
        records.append(EpochRecord(start=s, end=e, first_generation=first,
                                   start_aos=int(trace.d[s]), area=int(trace.d[s:e].sum())))
    if partial:
        return records[:-1], records[-1]
    return records, None


def check_identities(policy: Policy, params: ModelParams, horizon: int = 20_000,
                     seed: int = 0) -> list:
    """Trace-level identities that must hold exactly on any seeded run."""
    from .structure import PropertyCheck

    trace = simulate_trace(policy, params, horizon, seed)
    epochs, rest = decompose_epochs(trace)
    every = epochs + ([rest] if rest is not None else [])

    identity = PropertyCheck("epoch_identity", "sum of epoch areas + residual == sum of AoS")
    identity.checked = 1
    total = sum(e.area for e in every)
    if total != int(trace.d.sum()):
        identity.fail(total, int(trace.d.sum()))

    closed = PropertyCheck("epoch_closed_form", "closed-form epoch area == per-slot sum")
    for e in every:
        closed.checked += 1
        if epoch_area_discrete(e) != e.area:
            closed.fail(e, epoch_area_discrete(e))

    valid = PropertyCheck("trace_states_valid", "every visited state is valid")
    valid.checked = len(trace)
    bad = trace_valid(trace, params)
    if bad is not None:
        valid.fail(bad)

    floor = PropertyCheck("aoi_after_delivery", "AoI == b right after every delivery")
    for t in np.flatnonzero(trace.delivered[:-1]):
        floor.checked += 1
        if trace.aoi[t + 1] != params.b:
            floor.fail(int(t), int(trace.aoi[t + 1]))

    config = SimConfig(params, horizon=horizon, seed=seed)
    first, second = simulate(policy, config), simulate(policy, config)
    kernel = PropertyCheck("kernel_matches_trace", "compiled run == reference trace")
    kernel.checked = 1
    if (first.avg_aos != trace.d.sum() / horizon or first.avg_aoi != trace.aoi.sum() / horizon
            or first.epoch_count != int(trace.delivered.sum())):
        kernel.fail(first.avg_aos, trace.d.mean(), first.epoch_count, int(trace.delivered.sum()))
    repro = PropertyCheck("reproducible", "identical reruns from the same seed")
    repro.checked = 1
    if (first.avg_aos, first.avg_aoi, first.std_err_aos, first.epoch_count) != (
            second.avg_aos, second.avg_aoi, second.std_err_aos, second.epoch_count):
        repro.fail(first, second)
    return [identity, closed, valid, floor, kernel, repro]
