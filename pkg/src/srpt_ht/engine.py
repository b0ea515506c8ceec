"""Event-driven preemptive SRPT queue.

Conventions:

* An arrival preempts only when its size is strictly below the remaining
  time of the task in service.
* A completion and an arrival at the same instant: the completion is
  processed first.
* Equal remaining times are served in task-index order. Initial tasks carry
  indices ``1-n0, ..., 0`` and arrivals ``1, 2, ...``.
* Snapshots are right-continuous: events at a snapshot time are applied
  before it is recorded.

Frozen (not in service) tasks never change their remaining time, so they
live in a heap; only the task in service is updated between events. The
cutoff counts and workloads ``Q_a``, ``W_a`` over a fixed sorted grid are
kept as running per-threshold totals for the frozen tasks plus the in-service
task's contribution, which costs O(len(a_grid)) per event.

Path suprema over ``[0, t]`` are tracked online from event-level values,
left limits before events, and the instants where the in-service task's
remaining time crosses a cutoff level. They are exact, not grid-based.
"""

from __future__ import annotations

import dataclasses
import heapq
import io
import json
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import Law
from .errors import EventLogMissing, GridMismatch, OutOfHorizon
from .paths import PiecewiseLinearPath, skorokhod_map

ARRIVAL = "arrival"
COMPLETION = "completion"
SKIP = "truncated-skip"


def format_number(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True, eq=False)
class PrimitiveStream:
    """Arrival times, sizes and initial remaining times driving one run."""

    initial_tasks: np.ndarray
    arrival_times: np.ndarray
    sizes: np.ndarray
    horizon: float

    def __post_init__(self):
        init = np.asarray(self.initial_tasks, dtype=float).reshape(-1)
        at = np.asarray(self.arrival_times, dtype=float).reshape(-1)
        sz = np.asarray(self.sizes, dtype=float).reshape(-1)
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if at.shape != sz.shape:
            raise ValueError("arrival_times and sizes differ in length")
        if at.size and (at[0] <= 0 or np.any(np.diff(at) <= 0)):
            raise ValueError("arrival times must be positive and strictly increasing")
        if at.size and at[-1] > self.horizon:
            raise ValueError("arrival after the horizon")
        if np.any(sz <= 0) or np.any(init <= 0) or not np.all(np.isfinite(init)) or not np.all(np.isfinite(sz)):
            raise ValueError("task sizes must be positive and finite")
        for name, arr in (("initial_tasks", init), ("arrival_times", at), ("sizes", sz)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "horizon", float(self.horizon))

    def __eq__(self, other):
        if not isinstance(other, PrimitiveStream):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.initial_tasks, other.initial_tasks)
            and np.array_equal(self.arrival_times, other.arrival_times)
            and np.array_equal(self.sizes, other.sizes)
        )

    __hash__ = None

    @property
    def n_arrivals(self) -> int:
        return self.arrival_times.size

    def restrict(self, horizon: float) -> "PrimitiveStream":
        """Same stream observed on ``[0, horizon]``."""
        if horizon > self.horizon:
            raise OutOfHorizon(f"{horizon} > {self.horizon}")
        k = np.searchsorted(self.arrival_times, horizon, side="right")
        return PrimitiveStream(self.initial_tasks, self.arrival_times[:k], self.sizes[:k], horizon)

    def initial_workload(self, a: float = math.inf) -> float:
        init = self.initial_tasks
        return math.fsum(init[init <= a])

    def arrived_work(self, t: float, a: float = math.inf) -> float:
        """V_a(t): total size of arrivals in ``(0, t]`` with size at most ``a``."""
        k = np.searchsorted(self.arrival_times, t, side="right")
        s = self.sizes[:k]
        return math.fsum(s[s <= a])

    def to_json(self) -> dict:
        return {
            "initial_tasks": self.initial_tasks.tolist(),
            "arrival_times": self.arrival_times.tolist(),
            "sizes": self.sizes.tolist(),
            "horizon": self.horizon,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PrimitiveStream":
        extra = set(obj) - {"initial_tasks", "arrival_times", "sizes", "horizon"}
        if extra:
            raise ValueError(f"unknown primitive fields {sorted(extra)}")
        return cls(obj.get("initial_tasks", []), obj.get("arrival_times", []), obj.get("sizes", []), obj["horizon"])


@dataclass(frozen=True)
class InitialConditionSpec:
    """``empty``, or ``atom_near_one``: floor(w r / c) tasks of size c."""

    mode: str = "empty"
    w: float = 0.0
    r: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.mode == "empty":
            return
        if self.mode != "atom_near_one":
            raise ValueError(f"unknown initial condition mode {self.mode!r}")
        if self.w < 0 or self.r is None or self.c is None or not (self.r > 0 and self.c > 0):
            raise ValueError("atom_near_one needs w >= 0 and positive r, c")

    @classmethod
    def atom_near_one(cls, w: float, r: float, c: float) -> "InitialConditionSpec":
        return cls("atom_near_one", float(w), float(r), float(c))

    def tasks(self) -> np.ndarray:
        if self.mode == "empty":
            return np.zeros(0)
        return np.full(int(math.floor(self.w * self.r / self.c)), self.c)


def _renewal_times(law: Law, first: Law, horizon: float, rng_first, rng_inter) -> np.ndarray:
    t1 = first.sample(rng_first)
    if t1 > horizon:
        return np.zeros(0)
    mean = law.mean
    chunks = [np.array([t1])]
    last = t1
    while True:
        expected = (horizon - last) / mean if mean > 0 else 0.0
        n = int(expected * 1.05 + 5.0 * math.sqrt(expected + 1.0) + 16)
        gaps = law.sample_n(rng_inter, n)
        times = last + np.cumsum(gaps)
        chunks.append(times)
        last = float(times[-1])
        if last > horizon:
            break
    out = np.concatenate(chunks)
    return out[: np.searchsorted(out, horizon, side="right")]


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (list, tuple)):
        return np.random.SeedSequence([int(s) for s in seed])
    return np.random.SeedSequence(int(seed))


def generate_primitives(
    processing: Law,
    interarrival: Law,
    first_arrival: Law | None = None,
    initial: InitialConditionSpec | None = None,
    horizon: float = 1.0,
    seed=0,
) -> PrimitiveStream:
    """Delayed renewal arrivals with i.i.d. sizes on ``[0, horizon]``.

    ``seed`` is an int, a sequence of ints, or a ``SeedSequence``; the first
    interarrival, later interarrivals and sizes use three spawned streams, so
    sizes do not depend on how many gaps were drawn.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    first_arrival = interarrival if first_arrival is None else first_arrival
    initial = InitialConditionSpec() if initial is None else initial
    s_first, s_inter, s_size = _seed_sequence(seed).spawn(3)
    times = _renewal_times(
        interarrival, first_arrival, horizon, np.random.default_rng(s_first), np.random.default_rng(s_inter)
    )
    sizes = processing.sample_n(np.random.default_rng(s_size), times.size)
    return PrimitiveStream(initial.tasks(), times, sizes, horizon)


# ---------------------------------------------------------------------------
# state and trajectory


@dataclass(frozen=True)
class QueueState:
    """Tasks present at ``clock`` as ``(remaining, index)``, served task first."""

    tasks: tuple[tuple[float, int], ...]
    clock: float

    @property
    def count(self) -> int:
        return len(self.tasks)

    @property
    def workload(self) -> float:
        return math.fsum(r for r, _ in self.tasks)


@dataclass(frozen=True, eq=False)
class MeasureSnapshot:
    """Unit atoms at the remaining times of the tasks present."""

    atoms: np.ndarray
    weights: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, fn=None) -> float:
        """<fn, measure>; with ``fn=None`` this is the identity, i.e. workload."""
        vals = self.atoms if fn is None else np.asarray(fn(self.atoms), dtype=float)
        return math.fsum(vals * self.weights)

    def cutoff(self, a: float) -> tuple[float, float]:
        """(mass, workload) of atoms in ``[0, a]``."""
        keep = self.atoms <= a
        return float(self.weights[keep].sum()), math.fsum(self.atoms[keep] * self.weights[keep])


def measure_snapshot(state: QueueState) -> MeasureSnapshot:
    atoms = np.array(sorted(r for r, _ in state.tasks if r > 0), dtype=float)
    return MeasureSnapshot(atoms, np.ones(atoms.size))


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    task: int
    Q: int
    W: float

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "task": self.task})


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots plus running path suprema of one run.

    Arrays indexed ``[k]`` are per snapshot; ``[k, j]`` per snapshot and
    cutoff ``a_grid[j]``. ``sup_*`` arrays hold the supremum over ``[0, t_k]``.
    ``Z_a``/``Y_a`` (queue length/workload of the truncated queues) are only
    present on coupled runs.
    """

    times: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    a_grid: tuple[float, ...]
    Q_a: np.ndarray
    W_a: np.ndarray
    tau: np.ndarray
    W_a_at_tau: np.ndarray
    sup_Q: np.ndarray
    sup_W: np.ndarray
    sup_Q_a: np.ndarray
    sup_W_a: np.ndarray
    sup_W_tail: np.ndarray
    sup_Q_tail: np.ndarray
    sup_QmW: np.ndarray
    mass_factor: float
    truncation: float
    horizon: float
    initial_W: float
    initial_W_a: np.ndarray
    final_state: QueueState
    n_events: int
    events: tuple[Event, ...] | None = None
    Z_a: np.ndarray | None = None
    Y_a: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        for f in dataclasses.fields(self):
            x, y = getattr(self, f.name), getattr(other, f.name)
            if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
                if x is None or y is None or not np.array_equal(x, y):
                    return False
            elif x != y:
                return False
        return True

    __hash__ = None

    def grid_index(self, a: float) -> int:
        j = bisect_left(self.a_grid, a)
        if j == len(self.a_grid) or self.a_grid[j] != a:
            raise GridMismatch(f"cutoff {a!r} not in a_grid")
        return j

    def snapshot_index(self, t: float, rtol: float = 1e-12) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > rtol * max(1.0, abs(t)):
            raise GridMismatch(f"time {t!r} is not a snapshot time")
        return k

    @property
    def final_measure(self) -> MeasureSnapshot:
        return measure_snapshot(self.final_state)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["t", "Q", "W"]
        for prefix in ("Q_a", "W_a", "Z_a", "tau"):
            cols += [f"{prefix}@{format_number(a)}" for a in self.a_grid]
        buf.write(",".join(cols) + "\n")
        K = len(self.a_grid)
        for k, t in enumerate(self.times):
            row = [format_number(t), format_number(int(self.Q[k])), format_number(self.W[k])]
            row += [format_number(int(v)) for v in self.Q_a[k]]
            row += [format_number(v) for v in self.W_a[k]]
            row += [format_number(int(v)) for v in self.Z_a[k]] if self.Z_a is not None else [""] * K
            row += [format_number(v) for v in self.tau[k]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def events_jsonl(self) -> str:
        if self.events is None:
            raise EventLogMissing("trajectory was simulated without record_events")
        return "".join(e.to_json() + "\n" for e in self.events)


# ---------------------------------------------------------------------------
# simulation


def _snapshot_times(horizon: float, dt: float) -> list[float]:
    if not dt > 0:
        raise ValueError("snapshot_dt must be positive")
    n = int(math.floor(horizon / dt))
    out = [k * dt for k in range(n + 1) if k * dt < horizon * (1 - 1e-12)]
    out.append(horizon)
    return out


def simulate(
    primitives: PrimitiveStream,
    truncation: float = math.inf,
    a_grid: Sequence[float] = (),
    snapshot_dt: float | None = None,
    *,
    mass_factor: float = 1.0,
    record_events: bool = False,
) -> Trajectory:
    """Run preemptive SRPT over ``[0, horizon]``.

    Tasks whose original size exceeds ``truncation`` are discarded, both
    initially and at arrival. ``mass_factor`` m sets the tracked supremum of
    ``|m Q - W|``. ``snapshot_dt`` defaults to ``horizon / 200``.
    """
    agrid = [float(a) for a in a_grid]
    if any(b <= a for a, b in zip(agrid, agrid[1:])):
        raise ValueError("a_grid must be strictly increasing")
    if any(not a > 0 for a in agrid):
        raise ValueError("cutoffs must be positive")
    horizon = primitives.horizon
    snaps = _snapshot_times(horizon, horizon / 200 if snapshot_dt is None else snapshot_dt)
    K = len(agrid)
    m = float(mass_factor)
    inf = math.inf

    # frozen tasks: heap plus cumulative cutoff totals
    heap: list[tuple[float, int]] = []
    fQ = [0] * K
    fW = [0.0] * K
    fWtot = 0.0
    s_rem = inf  # in-service remaining (inf when idle)
    s_idx = 0
    busy = False
    nQ = 0
    t = 0.0

    # running suprema
    supQ = 0
    supW = 0.0
    supQa = [0] * K
    supWa = [0.0] * K
    supWt = [0.0] * K
    supQt = [0] * K
    supD = 0.0
    # W_a > 0 began at pos_since[j] with value pos_val[j]; None when W_a = 0
    pos_since: list[float | None] = [None] * K
    pos_val = [0.0] * K

    events: list[Event] | None = [] if record_events else None

    def freeze(rem, idx):
        nonlocal fWtot
        heapq.heappush(heap, (rem, idx))
        fWtot += rem
        for j in range(bisect_left(agrid, rem), K):
            fQ[j] += 1
            fW[j] += rem

    init = [float(x) for x in primitives.initial_tasks]
    n0 = len(init)
    for i, v in enumerate(init):
        if v <= truncation:
            freeze(v, i - n0 + 1)
            nQ += 1
    if heap:
        s_rem, s_idx = heapq.heappop(heap)
        busy = True
        fWtot = math.fsum(r for r, _ in heap)
        b = bisect_left(agrid, s_rem)
        for j in range(b, K):
            fQ[j] -= 1
            fW[j] -= s_rem
            if fQ[j] == 0:
                fW[j] = 0.0

    def cut(j):
        """(Q_a, W_a) for a_grid[j] at the current state."""
        if busy and s_rem <= agrid[j]:
            return fQ[j] + 1, fW[j] + s_rem
        return fQ[j], fW[j]

    W0 = fWtot + (s_rem if busy else 0.0)
    Wa0 = np.array([cut(j)[1] for j in range(K)])
    for j in range(K):
        if Wa0[j] > 0:
            pos_since[j] = 0.0
            pos_val[j] = Wa0[j]

    def refresh_all():
        nonlocal supQ, supW, supD
        W = fWtot + s_rem if busy else 0.0
        if nQ > supQ:
            supQ = nQ
        if W > supW:
            supW = W
        d = abs(m * nQ - W)
        if d > supD:
            supD = d
        for j in range(K):
            qa, wa = cut(j)
            if qa > supQa[j]:
                supQa[j] = qa
            if wa > supWa[j]:
                supWa[j] = wa
            if W - wa > supWt[j]:
                supWt[j] = W - wa
            if nQ - qa > supQt[j]:
                supQt[j] = nQ - qa

    refresh_all()

    arr_t = primitives.arrival_times.tolist()
    arr_v = primitives.sizes.tolist()
    n_arr = len(arr_t)
    ai = 0
    n_events = 0

    out_Q, out_W, out_Qa, out_Wa, out_tau, out_tauv = [], [], [], [], [], []
    out_sup = []

    def advance(t1):
        """Move the clock to t1 with no event in (t, t1)."""
        nonlocal t, s_rem, supD
        if busy:
            dt = t1 - t
            r0 = s_rem
            r1 = r0 - dt
            if r1 < 0.0:
                r1 = 0.0
            # left limit of |mQ - W| at t1
            d = abs(m * nQ - (fWtot + r1))
            if d > supD:
                supD = d
            # cutoff levels crossed by the served task: r1 <= a < r0
            lo = bisect_left(agrid, r1)
            hi = bisect_left(agrid, r0)
            for j in range(lo, hi):
                a = agrid[j]
                if supQa[j] < 1:
                    supQa[j] = 1
                if a > supWa[j]:
                    supWa[j] = a
                if pos_since[j] is None:
                    pos_since[j] = t + (r0 - a)
                    pos_val[j] = a
            s_rem = r1
        t = t1

    for ts in snaps:
        while True:
            ta = arr_t[ai] if ai < n_arr else inf
            tc = t + s_rem if busy else inf
            if tc <= ta and tc <= ts:
                # completion
                advance(tc)
                n_events += 1
                done = s_idx
                nQ -= 1
                if heap:
                    s_rem, s_idx = heapq.heappop(heap)
                    fWtot -= s_rem
                    for j in range(bisect_left(agrid, s_rem), K):
                        fQ[j] -= 1
                        fW[j] -= s_rem
                        if fQ[j] == 0:
                            fW[j] = 0.0
                    if not heap:
                        fWtot = 0.0
                else:
                    busy = False
                    s_rem = inf
                    fWtot = 0.0
                # |mQ - W| drops by m at a completion
                W = fWtot + s_rem if busy else 0.0
                d = abs(m * nQ - W)
                if d > supD:
                    supD = d
                for j in range(K):
                    if pos_since[j] is not None and fQ[j] == 0 and not (busy and s_rem <= agrid[j]):
                        pos_since[j] = None
                if events is not None:
                    events.append(Event(t, COMPLETION, done, nQ, W))
            elif ta <= ts:
                advance(ta)
                n_events += 1
                v = arr_v[ai]
                ai += 1
                idx = ai
                if v > truncation:
                    if events is not None:
                        events.append(Event(t, SKIP, idx, nQ, fWtot + s_rem if busy else 0.0))
                    continue
                if not busy:
                    busy = True
                    s_rem, s_idx = v, idx
                elif v < s_rem:
                    freeze(s_rem, s_idx)
                    s_rem, s_idx = v, idx
                else:
                    freeze(v, idx)
                nQ += 1
                W = fWtot + s_rem
                if nQ > supQ:
                    supQ = nQ
                if W > supW:
                    supW = W
                d = abs(m * nQ - W)
                if d > supD:
                    supD = d
                b = bisect_left(agrid, v)
                for j in range(b, K):
                    qa, wa = cut(j)
                    if qa > supQa[j]:
                        supQa[j] = qa
                    if wa > supWa[j]:
                        supWa[j] = wa
                    if pos_since[j] is None:
                        pos_since[j] = t
                        pos_val[j] = wa
                for j in range(b):
                    qa, wa = cut(j)
                    if W - wa > supWt[j]:
                        supWt[j] = W - wa
                    if nQ - qa > supQt[j]:
                        supQt[j] = nQ - qa
                if events is not None:
                    events.append(Event(t, ARRIVAL, idx, nQ, W))
            else:
                break
        advance(ts)
        W = fWtot + s_rem if busy else 0.0
        d = abs(m * nQ - W)
        if d > supD:
            supD = d
        out_Q.append(nQ)
        out_W.append(W)
        qa_row, wa_row, tau_row, tv_row = [], [], [], []
        for j in range(K):
            qa, wa = cut(j)
            qa_row.append(qa)
            wa_row.append(wa)
            if pos_since[j] is None:
                tau_row.append(ts)
                tv_row.append(0.0)
            else:
                tau_row.append(pos_since[j])
                tv_row.append(pos_val[j])
        out_Qa.append(qa_row)
        out_Wa.append(wa_row)
        out_tau.append(tau_row)
        out_tauv.append(tv_row)
        out_sup.append((supQ, supW, supD, list(supQa), list(supWa), list(supWt), list(supQt)))

    tasks = ([(s_rem, s_idx)] if busy else []) + sorted(heap)
    final = QueueState(tuple(tasks), t)
    n = len(snaps)

    def mat(rows, dtype):
        return np.array(rows, dtype=dtype).reshape(n, K)

    return Trajectory(
        times=np.array(snaps),
        Q=np.array(out_Q, dtype=np.int64),
        W=np.array(out_W),
        a_grid=tuple(agrid),
        Q_a=mat(out_Qa, np.int64),
        W_a=mat(out_Wa, float),
        tau=mat(out_tau, float),
        W_a_at_tau=mat(out_tauv, float),
        sup_Q=np.array([s[0] for s in out_sup], dtype=np.int64),
        sup_W=np.array([s[1] for s in out_sup]),
        sup_QmW=np.array([s[2] for s in out_sup]),
        sup_Q_a=mat([s[3] for s in out_sup], np.int64),
        sup_W_a=mat([s[4] for s in out_sup], float),
        sup_W_tail=mat([s[5] for s in out_sup], float),
        sup_Q_tail=mat([s[6] for s in out_sup], np.int64),
        mass_factor=m,
        truncation=float(truncation),
        horizon=horizon,
        initial_W=W0,
        initial_W_a=Wa0,
        final_state=final,
        n_events=n_events,
        events=tuple(events) if events is not None else None,
    )


def simulate_coupled(
    primitives: PrimitiveStream,
    a_grid: Sequence[float],
    snapshot_dt: float | None = None,
    *,
    mass_factor: float = 1.0,
    record_events: bool = False,
) -> Trajectory:
    """Full run plus one a-truncated run per cutoff, all on the same stream.

    The result carries ``Z_a`` and ``Y_a`` (queue length and workload of the
    truncated queues) next to the cutoff processes of the full queue.
    """
    full = simulate(
        primitives, math.inf, a_grid, snapshot_dt, mass_factor=mass_factor, record_events=record_events
    )
    Z = np.zeros_like(full.Q_a)
    Y = np.zeros_like(full.W_a)
    for j, a in enumerate(full.a_grid):
        tr = simulate(primitives, a, (), snapshot_dt)
        Z[:, j] = tr.Q
        Y[:, j] = tr.W
    return dataclasses.replace(full, Z_a=Z, Y_a=Y)


def state_at(primitives: PrimitiveStream, t: float, truncation: float = math.inf) -> QueueState:
    """Queue contents at time ``t`` (right-continuous)."""
    if t == 0:
        n0 = primitives.initial_tasks.size
        tasks = sorted((v, i - n0 + 1) for i, v in enumerate(primitives.initial_tasks.tolist()) if v <= truncation)
        return QueueState(tuple(tasks), 0.0)
    return simulate(primitives.restrict(t), truncation, (), t).final_state


# ---------------------------------------------------------------------------
# path-level views


def idle_time(traj: Trajectory, t):
    """Cumulative idle time I(t) from the event log; vectorized over ``t``."""
    if traj.events is None:
        raise EventLogMissing("idle_time needs a trajectory simulated with record_events=True")
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0) or np.any(ts > traj.horizon):
        raise OutOfHorizon("t outside [0, horizon]")
    # idle intervals [start, end) between events where Q == 0
    starts, ends = [], []
    q = int(traj.Q[0])  # snapshots include t = 0 and no event happens at t = 0
    last = 0.0
    for e in traj.events:
        if q == 0 and e.t > last:
            starts.append(last)
            ends.append(e.t)
        q = e.Q
        last = e.t
    if q == 0:
        starts.append(last)
        ends.append(traj.horizon)
    st = np.array(starts)
    en = np.array(ends)
    out = np.clip(ts[..., None] - st, 0.0, en - st).sum(axis=-1) if st.size else np.zeros_like(ts)
    return float(out) if out.ndim == 0 else out


def netput_path(primitives: PrimitiveStream, a: float = math.inf, w0: float | None = None) -> PiecewiseLinearPath:
    """X_a(t) = W_a(0) + V_a(t) - t, with jumps at arrivals of size <= a."""
    w0 = primitives.initial_workload(a) if w0 is None else float(w0)
    keep = primitives.sizes <= a
    return PiecewiseLinearPath.netput(
        w0, primitives.arrival_times[keep], primitives.sizes[keep], primitives.horizon
    )


def workload_from_reflection(
    primitives: PrimitiveStream, a: float = math.inf, w0: float | None = None
) -> PiecewiseLinearPath:
    """Gamma of the netput: the workload W for a = inf, Y_a otherwise."""
    return skorokhod_map(netput_path(primitives, a, w0))
