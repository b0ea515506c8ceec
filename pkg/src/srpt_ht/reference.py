"""Limit objects: reflected Brownian motion, the step-shaped limit field,
and the hitting probabilities of the 1/3-up, 2/3-down walk.

Brownian paths are Euler sums on a uniform grid, reflected with the discrete
Skorokhod map. Discrete monitoring misses the minimum between grid points,
so ``W*(T)`` is biased low by roughly ``0.58 sigma sqrt(dt)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .distributions import Law
from .errors import InvalidLevels
from .paths import GridPath, reflect_grid

DEFAULT_STEPS_PER_UNIT = 2**14
SUMMARY_QUANTILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def sigma_squared(lam: float, sigma_s: float, sigma_a: float) -> float:
    """lambda (sigma_S^2 + sigma_A^2)."""
    if not lam > 0 or sigma_s < 0 or sigma_a < 0:
        raise ValueError("need lam > 0 and nonnegative standard deviations")
    return lam * (sigma_s**2 + sigma_a**2)


@dataclass(frozen=True)
class LimitParams:
    """Parameters of X* = W*(0) + sigma B + kappa t.

    ``w0_kind`` is ``deterministic`` (W*(0) = w0) or ``exponential``
    (W*(0) exponential with mean w0).
    """

    sigma: float
    kappa: float
    lam: float
    w0: float = 0.0
    w0_kind: str = "deterministic"

    def __post_init__(self):
        if self.sigma < 0 or not self.lam > 0 or self.w0 < 0:
            raise ValueError("need sigma >= 0, lam > 0, w0 >= 0")
        if self.w0_kind not in ("deterministic", "exponential"):
            raise ValueError(f"unknown w0_kind {self.w0_kind!r}")

    @classmethod
    def from_laws(cls, processing: Law, interarrival: Law, kappa: float, w0: float = 0.0, w0_kind="deterministic"):
        """sigma from the size and interarrival laws, lambda = 1 / E[interarrival]."""
        lam = 1.0 / interarrival.mean
        return cls(math.sqrt(sigma_squared(lam, processing.std, interarrival.std)), kappa, lam, w0, w0_kind)

    def draw_w0(self, rng: np.random.Generator, n: int | None = None):
        if self.w0_kind == "deterministic":
            return self.w0 if n is None else np.full(n, self.w0)
        return rng.exponential(self.w0, size=n) if self.w0 > 0 else (0.0 if n is None else np.zeros(n))


def _field_drift(p: LimitParams, a: float | None) -> float | None:
    """Drift of the netput feeding the a-field; None for the zero field."""
    if a is None or a > 1:
        return p.kappa
    if a == 1:
        return p.kappa - p.lam
    return None


def _sample_path(p: LimitParams, T: float, n_steps: int, rng, a) -> GridPath:
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    dt = T / n_steps
    w0 = p.draw_w0(rng)
    xi = rng.standard_normal(n_steps)
    drift = _field_drift(p, a)
    if drift is None:
        return GridPath(0.0, dt, np.zeros(n_steps + 1))
    x = np.empty(n_steps + 1)
    x[0] = w0
    x[1:] = w0 + np.cumsum(p.sigma * math.sqrt(dt) * xi + drift * dt)
    return reflect_grid(GridPath(0.0, dt, x))


def rbm_sample(p: LimitParams, T: float, n_steps: int, rng: np.random.Generator) -> GridPath:
    """One Euler path of W* = Gamma[X*] on ``k T / n_steps``."""
    return _sample_path(p, T, n_steps, rng, None)


def limit_field_sample(p: LimitParams, a: float, T: float, n_steps: int, rng: np.random.Generator) -> GridPath:
    """W*_a: zero for a < 1, Gamma[X* - lam t] at a = 1, W* for a > 1.

    The same random numbers are consumed for every ``a``, so calls from equal
    generator states share the Brownian path.
    """
    if a < 0:
        raise ValueError("a must be nonnegative")
    return _sample_path(p, T, n_steps, rng, a)


def terminal_ensemble(
    p: LimitParams,
    T: float,
    n_steps: int,
    n_paths: int,
    rng: np.random.Generator,
    a: float | None = None,
    chunk: int = 256,
) -> np.ndarray:
    """Samples of W*_a(T) (W*(T) for ``a=None``) from independent Euler paths.

    Only the endpoint and the running minimum are kept, so memory stays at
    ``chunk * n_steps`` floats. Initial values are drawn first, then the
    increments path by path; the output does not depend on ``chunk``.
    """
    if n_steps < 1 or n_paths < 1:
        raise ValueError("n_steps and n_paths must be positive")
    w0 = np.asarray(p.draw_w0(rng, n_paths), dtype=float)
    drift = _field_drift(p, a)
    out = np.empty(n_paths)
    dt = T / n_steps
    sd = p.sigma * math.sqrt(dt)
    buf = np.empty((min(chunk, n_paths), n_steps))
    for lo in range(0, n_paths, chunk):
        m = min(chunk, n_paths - lo)
        b = buf[:m]
        rng.standard_normal(out=b)
        if drift is None:
            out[lo : lo + m] = 0.0
            continue
        if sd != 1.0:
            b *= sd
        if drift != 0.0:
            b += drift * dt
        np.cumsum(b, axis=1, out=b)
        x0 = w0[lo : lo + m]
        low = np.minimum(b.min(axis=1) + x0, 0.0)
        low = np.minimum(low, np.minimum(x0, 0.0))
        out[lo : lo + m] = b[:, -1] + x0 - low
    return out


def summarize(samples) -> dict:
    x = np.asarray(samples, dtype=float)
    q = np.quantile(x, SUMMARY_QUANTILES)
    return {
        "n": int(x.size),
        "mean": float(x.mean()),
        "var": float(x.var(ddof=1)) if x.size > 1 else 0.0,
        "quantiles": {f"{k:g}": float(v) for k, v in zip(SUMMARY_QUANTILES, q)},
    }


def summary_json(samples) -> str:
    return json.dumps(summarize(samples), sort_keys=True)


# -- biased walk -----------------------------------------------------------------


def _check_levels(j: int, l: int):
    if not (isinstance(j, (int, np.integer)) and isinstance(l, (int, np.integer))):
        raise InvalidLevels("levels must be integers")
    if not 1 <= j <= l or l < 2:
        raise InvalidLevels(f"need 1 <= j <= l and l >= 2, got j={j}, l={l}")


def biased_walk_hit(j: int, l: int) -> Fraction:
    """P(hit l before 1 | start at j) for steps +1 w.p. 1/3, -1 w.p. 2/3."""
    _check_levels(j, l)
    return Fraction(2**j - 2, 2**l - 2)


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    n: int

    def within(self, exact: float, k: float = 3.0) -> bool:
        if self.stderr == 0:
            return self.estimate == exact
        return abs(self.estimate - exact) <= k * self.stderr


def biased_walk_mc(j: int, l: int, n_paths: int, rng: np.random.Generator) -> McEstimate:
    _check_levels(j, l)
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    pos = np.full(n_paths, j, dtype=np.int64)
    active = np.flatnonzero((pos > 1) & (pos < l))
    while active.size:
        step = np.where(rng.random(active.size) < 1.0 / 3.0, 1, -1)
        pos[active] += step
        active = active[(pos[active] > 1) & (pos[active] < l)]
    hits = pos == l
    est = float(hits.mean())
    se = math.sqrt(est * (1 - est) / n_paths)
    return McEstimate(est, se, n_paths)
