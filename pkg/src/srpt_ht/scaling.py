"""Diffusion and distribution-dependent ("tilde") scaling.

For system ``r`` with ``c = S^-1(r)``, time is sped up by ``r**2``, each task
carries mass ``c / r`` and sits at location ``remaining / c``:

    W~(t)   = W(r^2 t) / r
    Q~(t)   = c Q(r^2 t) / r
    W~_a(t) = W_{a c}(r^2 t) / r,      Q~_a(t) = c Q_{a c}(r^2 t) / r
    theta~(t, a) = t - tau(r^2 t, a c) / r^2

The arrival rate of system ``r`` is ``(1 + kappa / r) / E[v]``, so that
``r (rho - 1) = kappa`` holds exactly.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import Law
from .engine import MeasureSnapshot, Trajectory, format_number
from .errors import GridMismatch, OutOfHorizon

DEFAULT_A_GRID = (0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 4.0)


@dataclass(frozen=True)
class ScalingParams:
    r: float
    c_r: float
    lambda_r: float
    kappa: float
    law: Law

    @property
    def rho(self) -> float:
        return self.lambda_r * self.law.mean

    @property
    def mass(self) -> float:
        """Weight c/r of one task under the tilde scaling."""
        return self.c_r / self.r

    def unscaled_cutoffs(self, a_scaled: Sequence[float]) -> tuple[float, ...]:
        return tuple(float(a) * self.c_r for a in a_scaled)

    def header(self) -> dict[str, float]:
        return {"r": self.r, "c_r": self.c_r, "lambda_r": self.lambda_r, "kappa": self.kappa}


def make_params(law: Law, r: float, kappa: float = 0.0) -> ScalingParams:
    if not r > 1.0 / law.mean:
        raise ValueError(f"need r > 1/E[v] = {1.0 / law.mean}")
    if not kappa > -r:
        raise ValueError("kappa <= -r gives a nonpositive arrival rate")
    return ScalingParams(float(r), law.s_inverse(r), (1.0 + kappa / r) / law.mean, float(kappa), law)


@dataclass(frozen=True, eq=False)
class ScaledMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, fn=None) -> float:
        vals = self.atoms if fn is None else np.asarray(fn(self.atoms), dtype=float)
        return math.fsum(vals * self.weights)


def dd_scale_measure(m: MeasureSnapshot, p: ScalingParams) -> ScaledMeasure:
    return ScaledMeasure(m.atoms / p.c_r, np.full(m.atoms.size, p.mass))


def concentration_ratio(m: ScaledMeasure, eps: float) -> float | None:
    """Share of mass in ``(1 - eps, 1 + eps]``; None for a (numerically) empty measure."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    total = m.mass
    if total < 1e-12:
        return None
    near = (m.atoms > 1 - eps) & (m.atoms <= 1 + eps)
    return float(m.weights[near].sum() / total)


def drift(p: ScalingParams, a: float) -> float:
    """r (rho_{a c} - 1) for the a-truncated system."""
    if not a > 0:
        raise ValueError("a must be positive")
    ratio = p.law.big_s(p.c_r) / p.law.big_s(a * p.c_r)  # exactly 1 at a = 1
    return p.kappa - p.lambda_r * ratio


def drift_limit(a: float, lam: float, kappa: float) -> float:
    if not a > 0:
        raise ValueError("a must be positive")
    if a < 1:
        return -math.inf
    if a == 1:
        return kappa - lam
    return kappa


@dataclass(frozen=True, eq=False)
class ScaledTrajectory:
    """Tilde-scaled snapshots on ``[0, T]`` and suprema over ``[0, T]``.

    Per-cutoff arrays are ``[k, j]`` for scaled cutoff ``a_grid[j]``;
    ``Z_a``/``Y_a`` are None unless the source run was coupled.
    ``sup_QmW`` is None when the run tracked ``|m Q - W|`` with m != c.
    """

    params: ScalingParams
    T: float
    times: np.ndarray
    W: np.ndarray
    Q: np.ndarray
    a_grid: tuple[float, ...]
    W_a: np.ndarray
    Q_a: np.ndarray
    theta: np.ndarray
    Z_a: np.ndarray | None
    Y_a: np.ndarray | None
    sup_W: float
    sup_Q: float
    sup_W_a: np.ndarray
    sup_Q_a: np.ndarray
    sup_W_tail: np.ndarray
    sup_QmW: float | None
    final: ScaledMeasure | None

    def index(self, a: float) -> int:
        for j, b in enumerate(self.a_grid):
            if b == a:
                return j
        raise GridMismatch(f"scaled cutoff {a!r} not available")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# scaled " + ",".join(f"{k}={format_number(v)}" for k, v in self.params.header().items()) + "\n")
        cols = ["t", "Q", "W"]
        for prefix in ("Q_a", "W_a", "Z_a", "theta"):
            cols += [f"{prefix}@{format_number(a)}" for a in self.a_grid]
        buf.write(",".join(cols) + "\n")
        K = len(self.a_grid)
        for k, t in enumerate(self.times):
            row = [format_number(t), format_number(self.Q[k]), format_number(self.W[k])]
            row += [format_number(v) for v in self.Q_a[k]]
            row += [format_number(v) for v in self.W_a[k]]
            row += [format_number(v) for v in self.Z_a[k]] if self.Z_a is not None else [""] * K
            row += [format_number(v) for v in self.theta[k]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _match_cutoffs(traj: Trajectory, p: ScalingParams, a_scaled) -> list[int]:
    out = []
    for a in a_scaled:
        target = a * p.c_r
        j = int(np.argmin(np.abs(np.asarray(traj.a_grid) - target))) if traj.a_grid else -1
        if j < 0 or abs(traj.a_grid[j] - target) > 1e-12 * max(1.0, target):
            raise GridMismatch(f"unscaled cutoff {target!r} (a={a!r}) missing from the run's a_grid")
        out.append(j)
    return out


def tilde_processes(
    traj: Trajectory, p: ScalingParams, T: float | None = None, a_scaled: Sequence[float] | None = None
) -> ScaledTrajectory:
    """Scale a trajectory of system ``r``; ``T`` defaults to horizon / r^2.

    The suprema need the unscaled time ``r^2 T`` to be a snapshot time.
    ``a_scaled`` defaults to the run's a_grid divided by ``c``.
    """
    r, c = p.r, p.c_r
    r2 = r * r
    T = traj.horizon / r2 if T is None else float(T)
    if r2 * T > traj.horizon * (1 + 1e-12):
        raise OutOfHorizon(f"r^2 T = {r2 * T} exceeds the run horizon {traj.horizon}")
    if a_scaled is None:
        a_scaled = tuple(a / c for a in traj.a_grid)
    a_scaled = tuple(float(a) for a in a_scaled)
    cols = _match_cutoffs(traj, p, a_scaled)
    kT = traj.snapshot_index(r2 * T)
    sl = slice(0, kT + 1)
    times = traj.times[sl] / r2
    mass = c / r

    def pick(arr):
        return None if arr is None else arr[sl][:, cols]

    Qa = pick(traj.Q_a)
    Wa = pick(traj.W_a)
    tau = pick(traj.tau)
    Z = pick(traj.Z_a)
    Y = pick(traj.Y_a)
    use_d = math.isclose(traj.mass_factor, c, rel_tol=1e-12)
    final = dd_scale_measure(traj.final_measure, p) if kT == traj.times.size - 1 else None
    return ScaledTrajectory(
        params=p,
        T=T,
        times=times,
        W=traj.W[sl] / r,
        Q=traj.Q[sl] * mass,
        a_grid=a_scaled,
        W_a=Wa / r,
        Q_a=Qa * mass,
        theta=times[:, None] - tau / r2,
        Z_a=None if Z is None else Z * mass,
        Y_a=None if Y is None else Y / r,
        sup_W=float(traj.sup_W[kT] / r),
        sup_Q=float(traj.sup_Q[kT] * mass),
        sup_W_a=traj.sup_W_a[kT, cols] / r,
        sup_Q_a=traj.sup_Q_a[kT, cols] * mass,
        sup_W_tail=traj.sup_W_tail[kT, cols] / r,
        sup_QmW=float(traj.sup_QmW[kT] / r) if use_d else None,
        final=final,
    )
