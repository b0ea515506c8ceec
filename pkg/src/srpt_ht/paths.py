"""Exact piecewise-linear càdlàg paths and the one-dimensional Skorokhod map.

A path is stored as knots ``times[k]`` with right-continuous values
``values[k]`` and slopes ``slopes[k]`` valid on ``[times[k], times[k+1])``.
The jump at knot ``k`` is ``values[k]`` minus the left limit there. All
operations are exact up to floating-point rounding: no grid is involved.

:class:`GridPath` is the sampled counterpart used for Brownian references.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NegativeInitialValue, OutOfHorizon

_HORIZON_SLACK = 1e-12


class PiecewiseLinearPath:
    """Right-continuous path, linear between knots, arbitrary jumps at knots.

    Parameters
    ----------
    times : array_like
        Knot times, ``times[0] == 0``, strictly increasing.
    values : array_like
        Right-continuous value at each knot (after any jump).
    slopes : array_like
        Slope on the segment starting at each knot.
    horizon : float
        End of the domain. A final knot may sit exactly at the horizon, which
        lets a jump land on the last instant.
    """

    __slots__ = ("times", "values", "slopes", "horizon")

    def __init__(self, times, values, slopes, horizon: float):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if times.ndim != 1 or times.size == 0 or not (times.shape == values.shape == slopes.shape):
            raise ValueError("times, values and slopes must be 1-d arrays of equal nonzero length")
        if times[0] != 0.0:
            raise ValueError("first knot must be at t=0")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("knot times must strictly increase")
        if not times[-1] <= horizon:
            raise ValueError("knots must lie within the horizon")
        self.times = times
        self.values = values
        self.slopes = slopes
        self.horizon = float(horizon)

    # -- construction ---------------------------------------------------

    @classmethod
    def from_segments(cls, initial_value: float, segments: Iterable[Sequence[float]]) -> "PiecewiseLinearPath":
        """Build from ``(start_time, jump_at_start, slope, duration)`` records.

        The first record must start at 0 and its jump is ignored (the path
        starts at ``initial_value``); durations must tile the domain.
        """
        segs = [tuple(map(float, s)) for s in segments]
        if not segs:
            raise ValueError("need at least one segment")
        times, values, slopes = [], [], []
        cur = float(initial_value)
        expected_start = 0.0
        for i, (start, jump, slope, duration) in enumerate(segs):
            if abs(start - expected_start) > 1e-12 * max(1.0, abs(start)):
                raise ValueError(f"segment {i} starts at {start}, expected {expected_start}")
            if duration < 0 or (duration == 0 and i != len(segs) - 1):
                raise ValueError("durations must be positive")
            if i > 0:
                cur += jump
            times.append(expected_start)
            values.append(cur)
            slopes.append(slope)
            cur += slope * duration
            expected_start = expected_start + duration
        return cls(times, values, slopes, expected_start)

    @classmethod
    def netput(cls, initial_value: float, jump_times, jump_sizes, horizon: float, slope: float = -1.0):
        """Slope ``slope`` path from ``initial_value`` with upward jumps at ``jump_times``."""
        jt = np.asarray(jump_times, dtype=float)
        js = np.asarray(jump_sizes, dtype=float)
        if jt.shape != js.shape:
            raise ValueError("jump_times and jump_sizes differ in length")
        if jt.size and (jt[0] <= 0 or jt[-1] > horizon or np.any(np.diff(jt) <= 0)):
            raise ValueError("jump times must be strictly increasing in (0, horizon]")
        times = np.concatenate(([0.0], jt))
        # value after the k-th jump: initial + cumulative jumps + slope * time
        values = initial_value + np.concatenate(([0.0], np.cumsum(js))) + slope * times
        return cls(times, values, np.full(times.size, float(slope)), horizon)

    @classmethod
    def constant(cls, value: float, horizon: float) -> "PiecewiseLinearPath":
        return cls([0.0], [value], [0.0], horizon)

    # -- inspection ------------------------------------------------------

    @property
    def initial_value(self) -> float:
        return float(self.values[0])

    def __len__(self):
        return self.times.size

    def __repr__(self):
        return f"PiecewiseLinearPath(knots={self.times.size}, horizon={self.horizon:g}, x0={self.initial_value:g})"

    def left_limits(self) -> np.ndarray:
        """Left limit at each knot ``k >= 1`` (end value of segment ``k-1``)."""
        return self.values[:-1] + self.slopes[:-1] * np.diff(self.times)

    def end_value(self) -> float:
        return float(self.values[-1] + self.slopes[-1] * (self.horizon - self.times[-1]))

    def jumps(self) -> np.ndarray:
        return self.values[1:] - self.left_limits()

    @property
    def segments(self) -> list[tuple[float, float, float, float]]:
        durations = np.diff(np.append(self.times, self.horizon))
        jumps = np.concatenate(([0.0], self.jumps()))
        return list(zip(self.times.tolist(), jumps.tolist(), self.slopes.tolist(), durations.tolist()))

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon * (1 + _HORIZON_SLACK) + _HORIZON_SLACK):
            raise OutOfHorizon(f"time outside [0, {self.horizon}]")
        return t

    def value_at(self, t):
        """Right-continuous evaluation; vectorized over arrays of times."""
        t = self._check_t(t)
        k = np.searchsorted(self.times, t, side="right") - 1
        out = self.values[k] + self.slopes[k] * (t - self.times[k])
        return float(out) if out.ndim == 0 else out

    def left_limit_at(self, t):
        t = self._check_t(t)
        k = np.maximum(np.searchsorted(self.times, t, side="left") - 1, 0)
        out = self.values[k] + self.slopes[k] * (t - self.times[k])
        return float(out) if out.ndim == 0 else out

    def infimum(self, T: float | None = None) -> float:
        """inf of the path over [0, T], left limits included."""
        p = self if T is None else self.restrict(T)
        return float(min(p.values.min(), p.left_limits().min(initial=np.inf), p.end_value()))

    def supremum(self, T: float | None = None) -> float:
        p = self if T is None else self.restrict(T)
        return float(max(p.values.max(), p.left_limits().max(initial=-np.inf), p.end_value()))

    # -- transformations ------------------------------------------------

    def restrict(self, T: float) -> "PiecewiseLinearPath":
        if T > self.horizon or T < 0:
            raise OutOfHorizon(f"cannot restrict to {T} beyond horizon {self.horizon}")
        # a knot exactly at T is kept together with its jump
        keep = np.searchsorted(self.times, T, side="right")
        return PiecewiseLinearPath(self.times[:keep], self.values[:keep], self.slopes[:keep], T)

    def shifted(self, s: float) -> "PiecewiseLinearPath":
        """The path ``t -> self(s + t)`` on ``[0, horizon - s]``."""
        if not 0 <= s < self.horizon:
            raise OutOfHorizon(f"shift {s} outside [0, {self.horizon})")
        k = np.searchsorted(self.times, s, side="right")
        times = np.concatenate(([0.0], self.times[k:] - s))
        values = np.concatenate(([self.value_at(s)], self.values[k:]))
        slopes = np.concatenate(([self.slopes[k - 1]], self.slopes[k:]))
        return PiecewiseLinearPath(times, values, slopes, self.horizon - s)

    def __add__(self, c: float) -> "PiecewiseLinearPath":
        if isinstance(c, PiecewiseLinearPath):
            return _combine(self, c, 1.0)
        return PiecewiseLinearPath(self.times, self.values + c, self.slopes, self.horizon)

    def __sub__(self, other) -> "PiecewiseLinearPath":
        if isinstance(other, PiecewiseLinearPath):
            return _combine(self, other, -1.0)
        return self + (-other)

    def __mul__(self, c: float) -> "PiecewiseLinearPath":
        return PiecewiseLinearPath(self.times, self.values * c, self.slopes * c, self.horizon)

    __rmul__ = __mul__

    # -- export ---------------------------------------------------------

    def to_json(self) -> str:
        records = [
            {"start": s, "jump": j, "slope": m, "duration": d}
            for s, j, m, d in self.segments
        ]
        return json.dumps({"initial_value": self.initial_value, "horizon": self.horizon, "segments": records})

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseLinearPath":
        obj = json.loads(text)
        segs = [(r["start"], r["jump"], r["slope"], r["duration"]) for r in obj["segments"]]
        return cls.from_segments(obj["initial_value"], segs)

    def to_csv(self, dt: float) -> str:
        n = int(np.floor(self.horizon / dt + 1e-9))
        ts = np.append(np.arange(n + 1) * dt, self.horizon) if n * dt < self.horizon else np.arange(n + 1) * dt
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(ts, self.value_at(np.minimum(ts, self.horizon))):
            buf.write(f"{t:.12g},{v:.12g}\n")
        return buf.getvalue()


def _combine(p: PiecewiseLinearPath, q: PiecewiseLinearPath, sign: float) -> PiecewiseLinearPath:
    horizon = min(p.horizon, q.horizon)
    times = np.union1d(p.times[p.times <= horizon], q.times[q.times <= horizon])
    kp = np.searchsorted(p.times, times, side="right") - 1
    kq = np.searchsorted(q.times, times, side="right") - 1
    values = p.values[kp] + p.slopes[kp] * (times - p.times[kp]) + sign * (
        q.values[kq] + q.slopes[kq] * (times - q.times[kq])
    )
    slopes = p.slopes[kp] + sign * q.slopes[kq]
    return PiecewiseLinearPath(times, values, slopes, horizon)


def skorokhod_map(p: PiecewiseLinearPath) -> PiecewiseLinearPath:
    """Γ[f](t) = f(t) - min(0, inf_{s<=t} f(s)), computed exactly.

    On each segment the running infimum is either constant or follows a
    decreasing segment, so every input segment yields at most two output
    pieces: one with the input slope and, after the path dips below its
    running minimum, one pinned at zero.
    """
    if p.initial_value < 0:
        raise NegativeInitialValue(f"Skorokhod map needs f(0) >= 0, got {p.initial_value}")
    t, v, s = p.times, p.values, p.slopes
    n = t.size
    ends = np.append(t[1:], p.horizon)
    # running min over right values and left limits up to and including knot k
    interleaved = np.empty(2 * n - 1)
    interleaved[0::2] = v
    interleaved[1::2] = p.left_limits()
    run = np.minimum.accumulate(np.minimum(interleaved, 0.0))
    m = run[0::2]

    gamma_start = v - m
    # where a decreasing segment reaches the running minimum
    dec = s < 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hit = np.where(dec, t + gamma_start / -s, np.inf)
    # already at the minimum (hit rounds onto the knot): pinned at zero
    pinned = dec & (hit <= t)
    splits = dec & (hit > t) & (hit < ends)
    lead_slope = np.where(pinned, 0.0, s)

    out_t = np.concatenate((t, hit[splits]))
    out_v = np.concatenate((gamma_start, np.zeros(splits.sum())))
    out_s = np.concatenate((lead_slope, np.zeros(splits.sum())))
    order = np.argsort(out_t, kind="stable")
    return PiecewiseLinearPath(out_t[order], out_v[order], out_s[order], p.horizon)


def sup_norm_diff(p1: PiecewiseLinearPath, p2: PiecewiseLinearPath, T: float) -> float:
    """sup_{0<=t<=T} |p1(t) - p2(t)|, exact.

    The difference is linear between merged knots, so |p1 - p2| peaks at a
    knot value, a left limit at a knot, or at T.
    """
    if p1.horizon < T or p2.horizon < T:
        raise OutOfHorizon(f"T={T} exceeds a path horizon")
    knots = np.union1d(p1.times[p1.times <= T], p2.times[p2.times <= T])
    right = np.abs(p1.value_at(knots) - p2.value_at(knots))
    inner = knots[knots > 0]
    left = np.abs(p1.left_limit_at(inner) - p2.left_limit_at(inner)) if inner.size else np.zeros(0)
    at_t = abs(p1.value_at(T) - p2.value_at(T))
    left_t = abs(p1.left_limit_at(T) - p2.left_limit_at(T)) if T > 0 else 0.0
    return float(max(right.max(), left.max(initial=0.0), at_t, left_t))


@dataclass(frozen=True)
class GridPath:
    """Samples ``values[k]`` of a path at ``t0 + k * dt``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("GridPath needs at least one sample")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def at(self, t: float) -> float:
        """Value at the grid point nearest ``t``."""
        k = int(round((t - self.t0) / self.dt))
        if not 0 <= k < self.values.size:
            raise OutOfHorizon(f"t={t} outside grid")
        return float(self.values[k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(self.times, self.values):
            buf.write(f"{t:.12g},{v:.12g}\n")
        return buf.getvalue()


def reflect_grid(g: GridPath) -> GridPath:
    """W_k = X_k - min(0, min_{j<=k} X_j)."""
    x = g.values
    if x[0] < 0:
        raise NegativeInitialValue(f"reflect_grid needs X_0 >= 0, got {x[0]}")
    return GridPath(g.t0, g.dt, reflect_array(x))


def reflect_array(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Discrete Skorokhod map along ``axis`` (paths stacked on other axes)."""
    run = np.minimum.accumulate(np.minimum(x, 0.0), axis=axis)
    return x - run


def random_path(
    rng: np.random.Generator,
    n_segments: int = 20,
    *,
    upward_jumps: bool = False,
    initial: float | None = None,
    max_slope: float = 2.0,
    max_jump: float = 2.0,
) -> PiecewiseLinearPath:
    """Random path for property checks: exponential durations, uniform slopes and jumps."""
    durations = rng.exponential(1.0, n_segments) + 1e-3
    times = np.concatenate(([0.0], np.cumsum(durations[:-1])))
    slopes = rng.uniform(-max_slope, max_slope, n_segments)
    lo = 0.0 if upward_jumps else -max_jump
    jumps = rng.uniform(lo, max_jump, n_segments)
    jumps[0] = rng.uniform(0.0, max_jump) if initial is None else initial
    values = np.cumsum(jumps) + np.concatenate(([0.0], np.cumsum(slopes[:-1] * durations[:-1])))
    return PiecewiseLinearPath(times, values, slopes, float(times[-1] + durations[-1]))
