"""Processing-time and interarrival laws.

A :class:`DistributionSpec` is the serializable description of a law; a
:class:`Law` wraps it with cached moments and the tail functionals used by
the scaling code:

    tail(x)       = P(v > x)
    tail_work(x)  = H(x) = E[v 1{v > x}]
    big_s(x)      = S(x) = 1 / H(x)
    s_inverse(r)  = inf{x >= 0 : S(x) > r}

Parameterizations (F̄ is the tail):

    exponential(rate)        F̄(x) = exp(-rate x)
    weibull(scale, shape)    F̄(x) = exp(-(scale x)^shape)   (scale is an inverse length)
    pareto(index, x_m)       F̄(x) = (x_m / x)^(index + 1),  x >= x_m
    uniform(lo, hi)
    deterministic(value)
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import (
    DivisionByZeroTail,
    QuadratureNotConverged,
    UnboundedSupportRequired,
)

KINDS = ("exponential", "weibull", "pareto", "uniform", "deterministic")

_PARAMS = {
    "exponential": ("rate",),
    "weibull": ("scale", "shape"),
    "pareto": ("index", "x_m"),
    "uniform": ("lo", "hi"),
    "deterministic": ("value",),
}

S_INVERSE_XTOL = 1e-12
S_INVERSE_MAX_ITER = 200


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    rate: float | None = None
    scale: float | None = None
    shape: float | None = None
    index: float | None = None
    x_m: float | None = None
    lo: float | None = None
    hi: float | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind not in _PARAMS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        wanted = _PARAMS[self.kind]
        for f in dataclasses.fields(self):
            if f.name == "kind":
                continue
            v = getattr(self, f.name)
            if f.name in wanted:
                if v is None:
                    raise ValueError(f"{self.kind} law needs parameter {f.name!r}")
                if not math.isfinite(v):
                    raise ValueError(f"{f.name} must be finite, got {v}")
                object.__setattr__(self, f.name, float(v))
            elif v is not None:
                raise ValueError(f"parameter {f.name!r} does not apply to a {self.kind} law")

        k = self.kind
        if k == "exponential" and self.rate <= 0:
            raise ValueError("rate must be > 0")
        if k == "weibull" and (self.scale <= 0 or self.shape <= 0):
            raise ValueError("weibull scale and shape must be > 0")
        if k == "pareto" and (self.index <= 1 or self.x_m <= 0):
            raise ValueError("pareto needs index > 1 and x_m > 0")
        if k == "uniform" and not (0 <= self.lo < self.hi):
            raise ValueError("uniform needs 0 <= lo < hi")
        if k == "deterministic" and self.value <= 0:
            raise ValueError("deterministic value must be > 0")

    def params(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in _PARAMS[self.kind]}

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "DistributionSpec":
        obj = dict(obj)
        try:
            kind = obj.pop("kind")
        except KeyError:
            raise ValueError("distribution object needs a 'kind' field") from None
        if kind not in _PARAMS:
            raise ValueError(f"unknown distribution kind {kind!r}")
        extra = set(obj) - set(_PARAMS[kind])
        if extra:
            raise ValueError(f"unexpected fields for {kind}: {sorted(extra)}")
        return cls(kind=kind, **obj)

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Parse the CLI shorthand ``kind:p1,p2`` (e.g. ``weibull:1,2``)."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        if kind not in _PARAMS:
            raise ValueError(f"unknown distribution kind {kind!r}")
        values = [float(v) for v in rest.split(",")] if rest.strip() else []
        names = _PARAMS[kind]
        if len(values) != len(names):
            raise ValueError(f"{kind} expects {len(names)} parameter(s) {names}, got {len(values)}")
        return cls(kind=kind, **dict(zip(names, values)))

    def with_mean(self, mean: float) -> "DistributionSpec":
        """Same family and shape, rescaled so the mean equals ``mean``."""
        if mean <= 0:
            raise ValueError("mean must be positive")
        factor = mean / Law(self).mean
        k = self.kind
        if k == "exponential":
            return DistributionSpec(k, rate=self.rate / factor)
        if k == "weibull":
            return DistributionSpec(k, scale=self.scale / factor, shape=self.shape)
        if k == "pareto":
            return DistributionSpec(k, index=self.index, x_m=self.x_m * factor)
        if k == "uniform":
            return DistributionSpec(k, lo=self.lo * factor, hi=self.hi * factor)
        return DistributionSpec(k, value=self.value * factor)


def exponential(rate: float) -> "Law":
    return Law(DistributionSpec("exponential", rate=rate))


def weibull(scale: float, shape: float) -> "Law":
    return Law(DistributionSpec("weibull", scale=scale, shape=shape))


def pareto(index: float, x_m: float) -> "Law":
    return Law(DistributionSpec("pareto", index=index, x_m=x_m))


def uniform(lo: float, hi: float) -> "Law":
    return Law(DistributionSpec("uniform", lo=lo, hi=hi))


def deterministic(value: float) -> "Law":
    return Law(DistributionSpec("deterministic", value=value))


class Law:
    """A processing-time or interarrival law with cached moments.

    Parameters
    ----------
    spec : DistributionSpec
    quadrature_tol : float
        Absolute error budget for numerically integrated tail work.

    Instances are immutable after construction and can be shared freely.
    Sampling always takes a caller-owned ``numpy.random.Generator``.
    """

    __slots__ = ("spec", "quadrature_tol", "mean", "variance")

    def __init__(self, spec: DistributionSpec, quadrature_tol: float = 1e-10):
        if isinstance(spec, dict):
            spec = DistributionSpec.from_json(spec)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "quadrature_tol", float(quadrature_tol))
        mean, second = _moments(spec)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", second - mean * mean if math.isfinite(second) else math.inf)

    def __setattr__(self, name, value):
        raise AttributeError("Law is immutable")

    def __repr__(self):
        args = ", ".join(f"{k}={v:g}" for k, v in self.spec.params().items())
        return f"Law({self.spec.kind}({args}))"

    def __eq__(self, other):
        return isinstance(other, Law) and self.spec == other.spec and self.quadrature_tol == other.quadrature_tol

    def __hash__(self):
        return hash((self.spec, self.quadrature_tol))

    def __reduce__(self):
        return (Law, (self.spec, self.quadrature_tol))

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def unbounded(self) -> bool:
        return self.kind in ("exponential", "weibull", "pareto")

    # -- tail ---------------------------------------------------------------

    def tail(self, x: float) -> float:
        """P(v > x) in closed form."""
        if x < 0:
            raise ValueError("x must be nonnegative")
        s = self.spec
        k = s.kind
        if k == "exponential":
            return math.exp(-s.rate * x)
        if k == "weibull":
            return math.exp(-((s.scale * x) ** s.shape))
        if k == "pareto":
            return 1.0 if x < s.x_m else (s.x_m / x) ** (s.index + 1.0)
        if k == "uniform":
            if x < s.lo:
                return 1.0
            if x >= s.hi:
                return 0.0
            return (s.hi - x) / (s.hi - s.lo)
        return 1.0 if x < s.value else 0.0

    def cdf(self, x: float) -> float:
        return 1.0 - self.tail(max(x, 0.0))

    # -- truncated work and the scale function ----------------------------

    def tail_work(self, x: float) -> float:
        """H(x) = E[v 1{v > x}]."""
        if x < 0:
            raise ValueError("x must be nonnegative")
        s = self.spec
        k = s.kind
        if k == "exponential":
            return (x + 1.0 / s.rate) * math.exp(-s.rate * x)
        if k == "weibull":
            if s.shape == 1.0:
                return (x + 1.0 / s.scale) * math.exp(-s.scale * x)
            return x * self.tail(x) + self._weibull_tail_integral(x)
        if k == "pareto":
            beta = s.index + 1.0
            if x < s.x_m:
                return self.mean
            return beta * s.x_m**beta * x ** (1.0 - beta) / (beta - 1.0)
        if k == "uniform":
            if x < s.lo:
                return self.mean
            if x >= s.hi:
                return 0.0
            return (s.hi * s.hi - x * x) / (2.0 * (s.hi - s.lo))
        return s.value if x < s.value else 0.0

    def _weibull_tail_integral(self, x: float) -> float:
        # int_x^inf exp(-(mu y)^alpha) dy, quadrature on [x, x + L] plus an analytic
        # bound on the remainder beyond x + L.
        mu, alpha = self.spec.scale, self.spec.shape
        tol = self.quadrature_tol
        length = 1.0 / mu
        for _ in range(200):
            if _weibull_remainder_bound(mu, alpha, x + length) < tol / 2:
                break
            length *= 2.0
        else:
            raise QuadratureNotConverged(f"no finite window reaches tolerance {tol} at x={x}")

        def integrand(y):
            return math.exp(-((mu * y) ** alpha))

        value, err = integrate.quad(integrand, x, x + length, epsabs=tol / 4, epsrel=1e-13, limit=500)
        if not err <= tol / 2:
            raise QuadratureNotConverged(f"quadrature error {err:.3g} exceeds {tol / 2:.3g} at x={x}")
        return value

    def tail_work_numeric(self, x: float) -> float:
        """H(x) = x F̄(x) + int_x^inf F̄, by generic quadrature (oracle path)."""
        if x < 0:
            raise ValueError("x must be nonnegative")
        tol = self.quadrature_tol
        # break the range at support edges so quad never straddles a kink
        edges = sorted({e for e in self._kinks() if e > x})
        total = 0.0
        lo = x
        for e in edges:
            v, _ = integrate.quad(self.tail, lo, e, epsabs=tol / 8, epsrel=1e-13, limit=500)
            total += v
            lo = e
        if self.unbounded:
            v, err = integrate.quad(self.tail, lo, math.inf, epsabs=tol / 8, epsrel=1e-13, limit=500)
            if not err <= tol:
                raise QuadratureNotConverged(f"tail integral error {err:.3g} at x={x}")
            total += v
        return x * self.tail(x) + total

    def _kinks(self):
        s = self.spec
        if s.kind == "pareto":
            return (s.x_m,)
        if s.kind == "uniform":
            return (s.lo, s.hi)
        if s.kind == "deterministic":
            return (s.value,)
        return ()

    def big_s(self, x: float) -> float:
        """S(x) = 1 / E[v 1{v > x}]; infinite once the tail work underflows."""
        self._require_unbounded()
        h = self.tail_work(x)
        return math.inf if h == 0.0 else 1.0 / h

    def s_inverse(self, r: float) -> float:
        """Right-continuous inverse inf{x >= 0 : S(x) > r}."""
        self._require_unbounded()
        if not r > 0:
            raise ValueError("r must be positive")
        if self.big_s(0.0) > r:
            return 0.0
        lo, hi = 0.0, 1.0
        while self.big_s(hi) <= r:
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                raise OverflowError(f"S never exceeds {r}")
        for _ in range(S_INVERSE_MAX_ITER):
            if hi - lo <= S_INVERSE_XTOL:
                break
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.big_s(mid) > r:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def _require_unbounded(self):
        if not self.unbounded:
            raise UnboundedSupportRequired(f"S is only defined here for unbounded laws, not {self.kind}")

    # -- variation diagnostics ------------------------------------------

    def ratio_tail(self, t: float, x: float) -> float:
        """F̄(t x) / F̄(x): tends to 0 for rapidly varying tails, t^-(p+1) for Pareto."""
        if not t > 1:
            raise ValueError("t must exceed 1")
        denom = self.tail(x)
        if denom == 0.0:
            raise DivisionByZeroTail(f"tail underflows at x={x}")
        return self.tail(t * x) / denom

    def ratio_s_inverse(self, t: float, r: float) -> float:
        """S^-1(t r) / S^-1(r); tends to 1 when S^-1 is slowly varying."""
        if not t > 0:
            raise ValueError("t must be positive")
        base = self.s_inverse(r)
        if base == 0.0:
            raise ValueError(f"S^-1({r}) = 0; choose r above S(0) = {self.big_s(0.0)}")
        return self.s_inverse(t * r) / base

    # -- sampling -------------------------------------------------------

    def quantile(self, u):
        """Inverse CDF; vectorized over numpy arrays."""
        s = self.spec
        k = s.kind
        u = np.asarray(u, dtype=float)
        if k == "exponential":
            out = -np.log1p(-u) / s.rate
        elif k == "weibull":
            out = (-np.log1p(-u)) ** (1.0 / s.shape) / s.scale
        elif k == "pareto":
            out = s.x_m * (1.0 - u) ** (-1.0 / (s.index + 1.0))
        elif k == "uniform":
            out = s.lo + u * (s.hi - s.lo)
        else:
            out = np.full_like(u, s.value)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "deterministic":
            return self.spec.value
        return self.quantile(rng.random())

    def sample_n(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "deterministic":
            return np.full(n, self.spec.value)
        return self.quantile(rng.random(n))


def _moments(spec: DistributionSpec) -> tuple[float, float]:
    """(E[v], E[v^2]) in closed form."""
    k = spec.kind
    if k == "exponential":
        return 1.0 / spec.rate, 2.0 / spec.rate**2
    if k == "weibull":
        a, mu = spec.shape, spec.scale
        return gamma_fn(1.0 + 1.0 / a) / mu, gamma_fn(1.0 + 2.0 / a) / mu**2
    if k == "pareto":
        beta, xm = spec.index + 1.0, spec.x_m
        second = beta * xm**2 / (beta - 2.0) if beta > 2.0 else math.inf
        return beta * xm / (beta - 1.0), second
    if k == "uniform":
        lo, hi = spec.lo, spec.hi
        return 0.5 * (lo + hi), (lo * lo + lo * hi + hi * hi) / 3.0
    return spec.value, spec.value**2


def _weibull_remainder_bound(mu: float, alpha: float, z: float) -> float:
    """Upper bound on int_z^inf exp(-(mu y)^alpha) dy."""
    if z <= 0:
        return math.inf
    big_x = (mu * z) ** alpha
    if alpha >= 1.0:
        # convexity of y -> (mu y)^alpha: tangent-line bound
        return math.exp(-big_x) / (alpha * mu * (mu * z) ** (alpha - 1.0))
    # substitution gives Gamma(s, X) / (mu alpha) with s = 1/alpha > 1, and
    # Gamma(s, X) <= X^(s-1) e^-X / (1 - (s-1)/X) once X > s - 1
    s = 1.0 / alpha
    if big_x <= 2.0 * (s - 1.0):
        return math.inf
    return big_x ** (s - 1.0) * math.exp(-big_x) / (1.0 - (s - 1.0) / big_x) / (mu * alpha)
