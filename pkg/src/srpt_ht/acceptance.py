"""Acceptance criteria 1-10 as functions returning pass/fail rows.

Each ``criterion_*`` returns a list of :class:`Verdict` (some criteria have
several parts). Tolerances, sample sizes and seeds are fixed here, so the
verdicts are deterministic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from .checks import run_checks
from .distributions import DistributionSpec, Law, exponential, pareto
from .harness import ExperimentConfig, fclt_check, run_ensemble, seed_for
from .reference import LimitParams, biased_walk_hit, biased_walk_mc, terminal_ensemble
from .scaling import drift, drift_limit, make_params

SEED = 20240601

TREND_CONFIG = {
    "law": {"kind": "exponential", "rate": 1.0},
    "interarrival": {"kind": "exponential", "rate": 1.0},
    "kappa": -0.5,
    "r_list": [20, 40, 80],
    "reps": 500,
    "T": 1.0,
    "a_grid": [0.5, 1.0, 2.0],
    "eps_list": [0.5],
    "seed": SEED,
    "functionals": ["WT", "supW_a", "supQ_a", "supQminusW", "supW_tail", "theta", "conc"],
    "n_snapshots": 200,
    "reference_paths": 10000,
    "reference_steps_per_unit": 16384,
}


@dataclass(frozen=True)
class Verdict:
    key: str
    title: str
    passed: bool
    detail: str
    values: dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key:<4} {self.title}: {self.detail}"


def _timed(fn):
    def wrapper(*a, **k):
        t0 = time.perf_counter()
        out = fn(*a, **k)
        dt = time.perf_counter() - t0
        return [Verdict(v.key, v.title, v.passed, v.detail, v.values, dt) for v in out]

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@lru_cache(maxsize=None)
def _sandwich_reports(reps_per_cell: int = 170, workers: int = 1):
    reports = []
    for k, spec in enumerate((DistributionSpec("exponential", rate=1.0), DistributionSpec("weibull", scale=1.0, shape=2.0))):
        cfg = ExperimentConfig(
            law=spec,
            kappa=-0.5,
            r_list=(10.0, 20.0, 40.0),
            reps=reps_per_cell,
            a_grid=(0.5, 1.0, 2.0),
            seed=SEED + k,
            functionals=("WT", "Z_sandwich"),
            n_snapshots=200,
            reference_paths=0,
        )
        reports.append(run_ensemble(cfg, workers=workers))
    return tuple(reports)


@_timed
def criterion_1(workers: int = 1) -> list[Verdict]:
    """Zero sandwich violations over >= 1000 coupled replications."""
    reports = _sandwich_reports(170, workers)
    n = sum(len(r.config.r_list) * r.config.reps for r in reports)
    tot = {k: sum(r.violations[k] for r in reports) for k in reports[0].violations}
    ok = n >= 1000 and tot["W_sandwich"] == 0 and tot["Q_sandwich"] == 0
    detail = f"{n} coupled replications; " + ", ".join(f"{k}={v}" for k, v in tot.items())
    return [Verdict("1", "exact sandwich suite", ok, detail, {"replications": n, **tot})]


def _from_check(key: str, title: str, name: str) -> Verdict:
    (res,) = run_checks(seed=SEED, scale=1.0, only=[name])
    return Verdict(key, title, res.passed, res.detail)


@_timed
def criterion_2() -> list[Verdict]:
    return [_from_check("2", "reflection identity W = Γ[X] (200 streams, 1e-9)", "engine.reflection_identity")]


@_timed
def criterion_3() -> list[Verdict]:
    return [
        _from_check("3a", "Skorokhod Lipschitz (500 trials)", "paths.lipschitz"),
        _from_check("3b", "Skorokhod monotonicity (500 trials)", "paths.monotonicity"),
        _from_check("3c", "Skorokhod shift (500 trials)", "paths.shift"),
    ]


@_timed
def criterion_4() -> list[Verdict]:
    rng = np.random.default_rng(seed_for(SEED, 4, 0, 0))
    law = exponential(1.0)
    out = []
    worst = 0.0
    for r in law.big_s(0.0) + 0.01 + 10.0 ** rng.uniform(0, 6, 100):
        worst = max(worst, abs(law.big_s(law.s_inverse(r)) - r) / r)
    out.append(Verdict("4a", "S(S^-1(r)) = r on 100 random r", worst <= 1e-9, f"max rel err {worst:.2e}"))

    worst = 0.0
    for lam in (0.5, 1.0, 2.0):
        lw = Law(exponential(lam).spec, quadrature_tol=1e-12)  # S ~ 1/H needs a tight absolute budget
        for x in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
            closed = lam * math.exp(lam * x) / (lam * x + 1)
            worst = max(worst, abs(1.0 / lw.tail_work_numeric(x) - closed) / closed)
    out.append(
        Verdict("4b", "exponential S closed form vs quadrature", worst <= 1e-8, f"max rel err {worst:.2e}")
    )

    rs = (1e2, 1e4, 1e6)
    ratios = [law.s_inverse(r) / math.log(r) for r in rs]
    out.append(
        Verdict(
            "4c",
            "c_r / log r within 15% of 1/λ at r = 1e6",
            abs(ratios[-1] - 1.0) <= 0.15,
            f"ratio {ratios[-1]:.4f} (|err| {abs(ratios[-1] - 1):.1%})",
            {"ratios": ratios},
        )
    )
    mono = all(abs(b - 1) < abs(a - 1) for a, b in zip(ratios, ratios[1:]))
    out.append(
        Verdict("4d", "c_r / log r monotone toward 1/λ", mono, "ratios " + ", ".join(f"{v:.4f}" for v in ratios))
    )
    return out


@_timed
def criterion_5() -> list[Verdict]:
    rng = np.random.default_rng(seed_for(SEED, 5, 0, 0))
    exact = True
    for _ in range(200):
        spec = (exponential(float(rng.uniform(0.5, 2))), pareto(float(rng.uniform(1.5, 4)), 1.0))[int(rng.integers(2))]
        p = make_params(spec, float(10 ** rng.uniform(0.5, 4)), float(rng.uniform(-2, 2)))
        exact &= drift(p, 1.0) == p.kappa - p.lambda_r
    out = [Verdict("5a", "drift(p, 1) = κ − λ_r exactly", exact, "200 random (law, r, κ)")]
    lam, kappa = 1.3, -0.4
    table = {a: drift_limit(a, lam, kappa) for a in (0.5, 1.0, 3.0)}
    ok = table[0.5] == -math.inf and table[1.0] == kappa - lam and table[3.0] == kappa
    out.append(Verdict("5b", "drift_limit table", ok, ", ".join(f"a={a:g}: {v:g}" for a, v in table.items())))
    vals = [drift(make_params(exponential(1.0), r, 0.0), 0.5) for r in (10.0, 1e2, 1e3)]
    ok = all(b < a for a, b in zip(vals, vals[1:]))
    out.append(
        Verdict("5c", "drift(p, 0.5) decreasing over r = 10, 1e2, 1e3", ok, ", ".join(f"{v:.4f}" for v in vals))
    )
    return out


@_timed
def criterion_6() -> list[Verdict]:
    from fractions import Fraction

    ok = biased_walk_hit(2, 3) == Fraction(1, 3) and biased_walk_hit(3, 4) == Fraction(3, 7)
    out = [Verdict("6a", "exact h_2^3 = 1/3, h_3^4 = 3/7", ok, f"{biased_walk_hit(2, 3)}, {biased_walk_hit(3, 4)}")]
    parts = []
    ok = True
    for k, (j, l) in enumerate(((2, 3), (3, 4), (2, 5))):
        exact = float(biased_walk_hit(j, l))
        est = biased_walk_mc(j, l, 100_000, np.random.default_rng(seed_for(SEED, 6, k, 0)))
        ok &= est.within(exact, 3.0)
        parts.append(f"({j},{l}) {est.estimate:.4f} vs {exact:.4f} ({(est.estimate - exact) / est.stderr:+.2f} se)")
    out.append(Verdict("6b", "Monte Carlo within 3 se (1e5 paths)", ok, "; ".join(parts)))
    return out


@_timed
def criterion_7() -> list[Verdict]:
    t0 = time.perf_counter()
    x = terminal_ensemble(LimitParams(1.0, 0.0, 1.0), 1.0, 2**14, 100_000, np.random.default_rng(seed_for(SEED, 7, 0, 1)))
    dt = time.perf_counter() - t0
    target = math.sqrt(2 / math.pi)
    rel = x.mean() / target - 1
    ok = abs(rel) <= 0.01 and dt <= 60
    return [
        Verdict(
            "7",
            "RBM mean W*(1) within 1% of sqrt(2/π)",
            ok,
            f"mean {x.mean():.5f} vs {target:.5f} ({rel:+.2%}), {dt:.1f} s",
            {"mean": float(x.mean()), "seconds": dt},
        )
    ]


@_timed
def criterion_8() -> list[Verdict]:
    cfg = ExperimentConfig(law=DistributionSpec("exponential", rate=1.0), kappa=0.0, r_list=(50.0,), reps=2000, seed=SEED)
    res = fclt_check(cfg, 50.0)
    row = next(r for r in res["rows"] if r["t"] == 1.0)
    ok = abs(row["rel_err_V"]) <= 0.10
    return [
        Verdict(
            "8",
            "Var V^(1) within 10% of σ² (r = 50, 2000 reps)",
            ok,
            f"{row['var_V']:.4f} vs σ² = {res['sigma2']:.4f} ({row['rel_err_V']:+.1%})",
            {"var_V": row["var_V"], "sigma2": res["sigma2"]},
        )
    ]


@lru_cache(maxsize=None)
def trend_report(workers: int = 1):
    return run_ensemble(ExperimentConfig.from_json(dict(TREND_CONFIG)), workers=workers)


@_timed
def criterion_9(workers: int = 1) -> list[Verdict]:
    rep = trend_report(workers)
    tr = rep.trends

    def fmt(vals):
        return ", ".join(f"{v:.4g}" for v in vals)

    out = []
    for key, label, title in (
        ("9a", "median_supQminusW", "median ‖Q~ − W~‖_T strictly decreasing"),
        ("9b", "median_supQ_a@0.5", "median ‖Q~_0.5‖_T strictly decreasing"),
        ("9c", "median_supW_tail@2", "median ‖W~ − W~_2‖_T strictly decreasing"),
        ("9d", "mean_conc@0.5", "mean concentration ratio (eps 0.5) nondecreasing"),
    ):
        t = tr[label]
        detail = fmt(t["values"])
        if key == "9c":
            means = [rep.stat(r, "supW_tail@2", "mean") for r in rep.config.r_list]
            detail += f" (means {fmt(means)})"
        out.append(Verdict(key, title, t["pass"], detail, {"values": t["values"]}))
    ks = tr["ks_WT"]["values"]
    ok = ks[-1] <= ks[0] and ks[-1] <= 0.15
    out.append(Verdict("9e", "KS(W~(1), W*(1)) at r=80 ≤ at r=20 and ≤ 0.15", ok, fmt(ks), {"values": ks}))
    viol = sum(rep.violations.values())
    out.append(Verdict("9f", "no coupling violations in the trend sweep", viol == 0, f"{viol} violations"))
    return out


@_timed
def criterion_10() -> list[Verdict]:
    law = pareto(2.0, 1.0)
    dev = max(abs(law.ratio_tail(2.0, x) - 2.0**-3) for x in (1.0, 1.5, 3.0, 10.0, 1e3))
    e = exponential(1.0).ratio_tail(2.0, 20.0)
    ok = dev <= 1e-12 and e < 1e-8
    return [Verdict("10", "heavy vs light tail ratio", ok, f"Pareto |ratio − 1/8| ≤ {dev:.1e}; exponential {e:.3e}")]


CRITERIA = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)


def run_all(workers: int = 1) -> list[Verdict]:
    out = []
    for fn in CRITERIA:
        out.extend(fn(workers) if fn in (criterion_1, criterion_9) else fn())
    return out
