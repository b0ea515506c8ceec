"""Coupled ensembles across a sequence of systems ``r``.

Seeding: every random draw derives from ``SeedSequence([seed, r_idx, rep,
stream])``. Stream 0 feeds the primitives of replication ``rep`` of system
``r_list[r_idx]``; stream 1 (with ``r_idx = rep = 0``) feeds the reference
Brownian ensemble; stream 2 feeds the arrival-process CLT check. Results are
assembled by key, so worker count never changes a report.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .distributions import DistributionSpec, Law
from .engine import InitialConditionSpec, generate_primitives, simulate, simulate_coupled
from .errors import ConfigInvalid, EmptySample, ReplicationFailed
from .reference import DEFAULT_STEPS_PER_UNIT, SUMMARY_QUANTILES, LimitParams, terminal_ensemble
from .scaling import DEFAULT_A_GRID, concentration_ratio, make_params, tilde_processes

FUNCTIONALS = ("WT", "supW_a", "supQ_a", "supQminusW", "supW_tail", "theta", "conc", "Z_sandwich")
STREAM_PRIMITIVES, STREAM_REFERENCE, STREAM_FCLT = 0, 1, 2
SANDWICH_TOL = 1e-9


def seed_for(seed: int, r_idx: int, rep: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(r_idx), int(rep), int(stream)])


def worker_count() -> int:
    env = os.environ.get("SRPT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigInvalid(f"SRPT_THREADS must be an integer, got {env!r}") from exc
        return max(1, n)
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep over ``r_list``.

    ``interarrival`` gives the interarrival family (and shape); it is rescaled
    to mean ``1 / lambda_r`` for each system. ``initial`` is ``"empty"`` or
    ``"atom_near_one"`` with scaled workload ``w0``.
    """

    law: DistributionSpec
    interarrival: DistributionSpec = field(default_factory=lambda: DistributionSpec("exponential", rate=1.0))
    kappa: float = 0.0
    r_list: tuple[float, ...] = (20.0, 40.0, 80.0)
    reps: int = 100
    T: float = 1.0
    a_grid: tuple[float, ...] = DEFAULT_A_GRID
    eps_list: tuple[float, ...] = (0.5,)
    seed: int = 0
    functionals: tuple[str, ...] = FUNCTIONALS
    initial: str = "empty"
    w0: float = 0.0
    n_snapshots: int = 200
    reference_paths: int = 10_000
    reference_steps_per_unit: int = DEFAULT_STEPS_PER_UNIT

    def __post_init__(self):
        for name in ("r_list", "a_grid", "eps_list", "functionals"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "r_list", tuple(float(r) for r in self.r_list))
        object.__setattr__(self, "a_grid", tuple(float(a) for a in self.a_grid))
        self.validate()

    def validate(self):
        law = Law(self.law)
        if not self.r_list or any(b <= a for a, b in zip(self.r_list, self.r_list[1:])):
            raise ConfigInvalid("r_list must be nonempty and strictly increasing")
        if any(not r > 1.0 / law.mean for r in self.r_list):
            raise ConfigInvalid(f"every r must exceed 1/E[v] = {1.0 / law.mean:g}")
        if any(not self.kappa > -r for r in self.r_list):
            raise ConfigInvalid("kappa must exceed -r for every r")
        if self.reps < 2:
            raise ConfigInvalid("reps must be at least 2")
        if not self.T > 0:
            raise ConfigInvalid("T must be positive")
        if not self.a_grid or any(b <= a for a, b in zip(self.a_grid, self.a_grid[1:])) or self.a_grid[0] <= 0:
            raise ConfigInvalid("a_grid must be positive and strictly increasing")
        if any(not 0 < e < 1 for e in self.eps_list):
            raise ConfigInvalid("eps values must lie in (0, 1)")
        bad = set(self.functionals) - set(FUNCTIONALS)
        if bad:
            raise ConfigInvalid(f"unknown functionals {sorted(bad)}; choose from {list(FUNCTIONALS)}")
        if self.initial not in ("empty", "atom_near_one"):
            raise ConfigInvalid("initial must be 'empty' or 'atom_near_one'")
        if self.w0 < 0:
            raise ConfigInvalid("w0 must be nonnegative")
        if self.n_snapshots < 1 or self.reference_paths < 0 or self.reference_steps_per_unit < 1:
            raise ConfigInvalid("n_snapshots, reference_steps_per_unit must be positive; reference_paths >= 0")
        if not law.unbounded:
            raise ConfigInvalid("the processing law must have unbounded support")
        Law(self.interarrival)

    def to_json(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, DistributionSpec):
                v = v.to_json()
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigInvalid("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(obj) - names
        if extra:
            raise ConfigInvalid(f"unknown config fields {sorted(extra)}")
        if "law" not in obj:
            raise ConfigInvalid("config needs a 'law'")
        kw = dict(obj)
        try:
            for key in ("law", "interarrival"):
                if key in kw:
                    v = kw[key]
                    kw[key] = DistributionSpec.parse(v) if isinstance(v, str) else DistributionSpec.from_json(v)
            return cls(**kw)
        except ConfigInvalid:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, seed=int(seed))


# ---------------------------------------------------------------------------
# one replication


def _label(name: str, x: float) -> str:
    return f"{name}@{x:g}"


def functional_names(cfg: ExperimentConfig) -> list[str]:
    fs = set(cfg.functionals)
    out = []
    if "WT" in fs:
        out.append("WT")
        out += [_label("W_aT", a) for a in cfg.a_grid]
    if "supW_a" in fs:
        out += [_label("supW_a", a) for a in cfg.a_grid]
    if "supQ_a" in fs:
        out += [_label("supQ_a", a) for a in cfg.a_grid if a < 1]
    if "supQminusW" in fs:
        out.append("supQminusW")
    if "supW_tail" in fs:
        out += [_label("supW_tail", a) for a in cfg.a_grid]
    if "theta" in fs:
        out += [_label("theta", a) for a in cfg.a_grid if a < 1]
    if "conc" in fs:
        out += [_label("conc", e) for e in cfg.eps_list]
    return out


VIOLATION_KEYS = ("W_sandwich", "Q_sandwich", "Z_monotone", "Z_two_sided", "tau_bound")


def run_replication(cfg: ExperimentConfig, r_idx: int, rep: int) -> tuple[dict[str, float | None], dict[str, int]]:
    """Functionals at T and sandwich-violation counts for one (r, rep)."""
    r = cfg.r_list[r_idx]
    law = Law(cfg.law)
    p = make_params(law, r, cfg.kappa)
    inter = Law(cfg.interarrival.with_mean(1.0 / p.lambda_r))
    initial = (
        InitialConditionSpec.atom_near_one(cfg.w0, r, p.c_r) if cfg.initial == "atom_near_one" else InitialConditionSpec()
    )
    horizon = r * r * cfg.T
    stream = generate_primitives(law, inter, inter, initial, horizon, seed_for(cfg.seed, r_idx, rep, STREAM_PRIMITIVES))
    cut = p.unscaled_cutoffs(cfg.a_grid)
    dt = horizon / cfg.n_snapshots
    coupled = "Z_sandwich" in cfg.functionals
    if coupled:
        traj = simulate_coupled(stream, cut, dt, mass_factor=p.c_r)
    else:
        traj = simulate(stream, float("inf"), cut, dt, mass_factor=p.c_r)
    sc = tilde_processes(traj, p, cfg.T, cfg.a_grid)

    fs = set(cfg.functionals)
    vals: dict[str, float | None] = {}
    if "WT" in fs:
        vals["WT"] = float(sc.W[-1])
        for j, a in enumerate(cfg.a_grid):
            vals[_label("W_aT", a)] = float(sc.W_a[-1, j])
    for j, a in enumerate(cfg.a_grid):
        if "supW_a" in fs:
            vals[_label("supW_a", a)] = float(sc.sup_W_a[j])
        if "supQ_a" in fs and a < 1:
            vals[_label("supQ_a", a)] = float(sc.sup_Q_a[j])
        if "supW_tail" in fs:
            vals[_label("supW_tail", a)] = float(sc.sup_W_tail[j])
        if "theta" in fs and a < 1:
            vals[_label("theta", a)] = float(sc.theta[-1, j])
    if "supQminusW" in fs:
        vals["supQminusW"] = sc.sup_QmW
    if "conc" in fs:
        for e in cfg.eps_list:
            vals[_label("conc", e)] = concentration_ratio(sc.final, e)

    viol = dict.fromkeys(VIOLATION_KEYS, 0)
    if coupled:
        for j, a in enumerate(cut):
            y, w = traj.Y_a[:, j], traj.W_a[:, j]
            z, q = traj.Z_a[:, j], traj.Q_a[:, j]
            viol["W_sandwich"] += int(np.sum((w < y - SANDWICH_TOL) | (w > y + a + SANDWICH_TOL)))
            viol["Q_sandwich"] += int(np.sum((q < z) | (q > z + 1)))
        for i, x in enumerate(cut):
            for j in range(i + 1, len(cut)):
                dz = traj.Z_a[:, j] - traj.Z_a[:, i]
                viol["Z_monotone"] += int(np.sum(dz < 0))
                viol["Z_two_sided"] += int(np.sum(dz > 1 + traj.Y_a[:, j] / x + SANDWICH_TOL))
    for j, a in enumerate(cut):
        viol["tau_bound"] += int(np.sum(traj.W_a_at_tau[:, j] > traj.initial_W_a[j] + a + SANDWICH_TOL))
    return vals, viol


def _run_block(cfg: ExperimentConfig, keys: list[tuple[int, int]]):
    out = []
    for r_idx, rep in keys:
        try:
            out.append(((r_idx, rep), run_replication(cfg, r_idx, rep)))
        except Exception as exc:  # report the failing seed, keep the cause
            raise ReplicationFailed(
                f"replication r={cfg.r_list[r_idx]:g} rep={rep} failed; seed triple "
                f"[{cfg.seed}, {r_idx}, {rep}, {STREAM_PRIMITIVES}]: {exc!r}"
            ) from exc
    return out


def _map_blocks(fn, cfg, keys, workers: int, block: int = 8):
    blocks = [keys[i : i + block] for i in range(0, len(keys), block)]
    results = []
    if workers <= 1 or len(blocks) <= 1:
        for b in blocks:
            results.extend(fn(cfg, b))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for res in ex.map(fn, [cfg] * len(blocks), blocks):
                results.extend(res)
    return dict(results)


# ---------------------------------------------------------------------------
# statistics


def ks_two_sample(x, y) -> float:
    """sup_t |F_x(t) - F_y(t)| over the pooled sample points."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise EmptySample("both samples must be nonempty")
    pts = np.concatenate((x, y))
    fx = np.searchsorted(x, pts, side="right") / x.size
    fy = np.searchsorted(y, pts, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def describe(samples) -> dict[str, Any]:
    """n, mean, var, stderr and deciles of the non-missing values."""
    vals = np.array([v for v in samples if v is not None], dtype=float)
    out: dict[str, Any] = {"n": int(vals.size), "missing": int(len(samples) - vals.size)}
    if vals.size == 0:
        return out
    out["mean"] = float(vals.mean())
    out["var"] = float(vals.var(ddof=1)) if vals.size > 1 else 0.0
    out["stderr"] = math.sqrt(out["var"] / vals.size)
    out["median"] = float(np.median(vals))
    for q, v in zip(SUMMARY_QUANTILES, np.quantile(vals, SUMMARY_QUANTILES)):
        out[f"q{q:g}"] = float(v)
    return out


def _strict_decrease(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def _nondecrease(xs):
    return all(b >= a for a, b in zip(xs, xs[1:]))


# ---------------------------------------------------------------------------
# report


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    per_r: list[dict[str, Any]]
    trends: dict[str, dict[str, Any]]
    violations: dict[str, int]
    samples: dict[tuple[float, str], np.ndarray] = field(repr=False, default_factory=dict)
    reference: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    @property
    def hard_fail(self) -> bool:
        return any(v > 0 for v in self.violations.values())

    def stat(self, r: float, name: str, key: str = "median"):
        for row in self.per_r:
            if row["r"] == r:
                return row["functionals"][name][key]
        raise KeyError(r)

    def ks(self, r: float, name: str) -> float:
        for row in self.per_r:
            if row["r"] == r:
                return row["ks"][name]
        raise KeyError(r)

    def to_json(self) -> str:
        obj = {
            "config": self.config.to_json(),
            "per_r": self.per_r,
            "trends": self.trends,
            "violations": self.violations,
            "hard_fail": self.hard_fail,
        }
        return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r,functional,statistic,value\n")
        for row in self.per_r:
            r = row["r"]
            for name, stats in row["functionals"].items():
                for key, v in stats.items():
                    buf.write(f"{r:g},{name},{key},{v!r}\n")
            for name, v in row["ks"].items():
                buf.write(f"{r:g},{name},ks,{v!r}\n")
        return buf.getvalue()


def reference_ensemble(cfg: ExperimentConfig) -> dict[str, np.ndarray]:
    """Terminal values of W* and W*_a at T on shared Brownian noise."""
    if cfg.reference_paths == 0:
        return {}
    law = Law(cfg.law)
    lp = LimitParams.from_laws(law, Law(cfg.interarrival.with_mean(law.mean)), cfg.kappa, cfg.w0)
    n_steps = max(1, int(round(cfg.reference_steps_per_unit * cfg.T)))
    ss = seed_for(cfg.seed, 0, 0, STREAM_REFERENCE)
    out = {"WT": terminal_ensemble(lp, cfg.T, n_steps, cfg.reference_paths, np.random.default_rng(ss))}
    field_at_one = None
    for a in cfg.a_grid:
        if a > 1:
            out[_label("W_aT", a)] = out["WT"]
        elif a < 1:
            out[_label("W_aT", a)] = np.zeros(cfg.reference_paths)
        else:
            if field_at_one is None:
                field_at_one = terminal_ensemble(lp, cfg.T, n_steps, cfg.reference_paths, np.random.default_rng(ss), a=1.0)
            out[_label("W_aT", a)] = field_at_one
    return out


def _trends(cfg: ExperimentConfig, per_r, samples) -> dict[str, dict[str, Any]]:
    rs = list(cfg.r_list)
    out: dict[str, dict[str, Any]] = {}

    def series(name, key):
        vals = []
        for row in per_r:
            st = row["functionals"].get(name)
            if st is None or key not in st:
                return None
            vals.append(st[key])
        return vals

    def add(label, name, key, rule):
        vals = series(name, key)
        if vals is None:
            return
        ok = _strict_decrease(vals) if rule == "strictly_decreasing" else _nondecrease(vals)
        out[label] = {"functional": name, "statistic": key, "rule": rule, "values": vals, "pass": bool(ok)}

    add("median_supQminusW", "supQminusW", "median", "strictly_decreasing")
    for a in cfg.a_grid:
        if a < 1:
            add(_label("median_supQ_a", a), _label("supQ_a", a), "median", "strictly_decreasing")
            add(_label("median_theta", a), _label("theta", a), "median", "strictly_decreasing")
        if a > 1:
            add(_label("median_supW_tail", a), _label("supW_tail", a), "median", "strictly_decreasing")
    for e in cfg.eps_list:
        add(_label("mean_conc", e), _label("conc", e), "mean", "nondecreasing")
    if len(rs) >= 2 and "WT" in cfg.functionals:
        ks = [row["ks"].get("WT") for row in per_r]
        if all(k is not None for k in ks):
            out["ks_WT"] = {
                "functional": "WT",
                "statistic": "ks",
                "rule": "last <= first",
                "values": ks,
                "pass": bool(ks[-1] <= ks[0]),
            }
        for a in cfg.a_grid:
            if a > 1:
                name = _label("W_aT", a)
                d = [ks_two_sample(samples[(r, name)], samples[(r, "WT")]) for r in rs]
                out[_label("ks_W_aT_vs_WT", a)] = {
                    "functional": name,
                    "statistic": "ks_vs_WT",
                    "rule": "last <= first",
                    "values": d,
                    "pass": bool(d[-1] <= d[0]),
                }
    return out


def run_ensemble(cfg: ExperimentConfig, workers: int | None = None) -> ConvergenceReport:
    workers = worker_count() if workers is None else max(1, int(workers))
    keys = [(i, rep) for i in range(len(cfg.r_list)) for rep in range(cfg.reps)]
    results = _map_blocks(_run_block, cfg, keys, workers)
    names = functional_names(cfg)
    ref = reference_ensemble(cfg)
    violations = dict.fromkeys(VIOLATION_KEYS, 0)
    samples: dict[tuple[float, str], np.ndarray] = {}
    per_r = []
    law = Law(cfg.law)
    for i, r in enumerate(cfg.r_list):
        p = make_params(law, r, cfg.kappa)
        row: dict[str, Any] = {"r": r, "c_r": p.c_r, "lambda_r": p.lambda_r, "functionals": {}, "ks": {}}
        for rep in range(cfg.reps):
            for k, v in results[(i, rep)][1].items():
                violations[k] += v
        for name in names:
            vals = [results[(i, rep)][0][name] for rep in range(cfg.reps)]
            row["functionals"][name] = describe(vals)
            arr = np.array([np.nan if v is None else v for v in vals], dtype=float)
            samples[(r, name)] = arr
            if name in ref:
                ok = arr[~np.isnan(arr)]
                row["ks"][name] = ks_two_sample(ok, ref[name]) if ok.size else None
        per_r.append(row)
    trends = _trends(cfg, per_r, samples)
    return ConvergenceReport(cfg, per_r, trends, violations, samples, ref)


# ---------------------------------------------------------------------------
# arrival-process CLT


def fclt_check(cfg: ExperimentConfig, r: float | None = None, t_list=(0.5, 1.0)) -> dict[str, Any]:
    """Arrival-process CLT check for the config's laws; see :func:`fclt_check_laws`."""
    return fclt_check_laws(Law(cfg.law), Law(cfg.interarrival), cfg, r, t_list)


def fclt_check_laws(
    processing: Law, interarrival: Law, cfg: ExperimentConfig, r: float | None = None, t_list=(0.5, 1.0)
) -> dict[str, Any]:
    """Variance of the centred, diffusion-scaled work and count processes.

    V^(t) = (V(r^2 t) - lambda_r E[v] r^2 t) / r and E^(t) = (E(r^2 t) - lambda_r r^2 t) / r
    are compared with sigma^2 t and lambda^3 sigma_A^2 t. Only ``cfg.seed``,
    ``cfg.reps``, ``cfg.kappa`` and ``cfg.r_list`` are read, and no cutoff is
    formed, so bounded size laws are allowed here.
    """
    r = cfg.r_list[-1] if r is None else float(r)
    law = processing
    if not cfg.kappa > -r:
        raise ConfigInvalid("kappa must exceed -r")
    lam_r = (1.0 + cfg.kappa / r) / law.mean
    inter = Law(interarrival.spec.with_mean(1.0 / lam_r))
    r_idx = cfg.r_list.index(r) if r in cfg.r_list else len(cfg.r_list)
    horizon = r * r * max(t_list)
    V = np.empty((cfg.reps, len(t_list)))
    E = np.empty_like(V)
    for rep in range(cfg.reps):
        s = generate_primitives(law, inter, inter, None, horizon, seed_for(cfg.seed, r_idx, rep, STREAM_FCLT))
        cs = np.concatenate(([0.0], np.cumsum(s.sizes)))
        for k, t in enumerate(t_list):
            n = int(np.searchsorted(s.arrival_times, r * r * t, side="right"))
            V[rep, k] = (cs[n] - lam_r * law.mean * r * r * t) / r
            E[rep, k] = (n - lam_r * r * r * t) / r
    sig2 = lam_r * (law.variance + inter.variance)
    rows = []
    for k, t in enumerate(t_list):
        var_v = float(V[:, k].var(ddof=1))
        var_e = float(E[:, k].var(ddof=1))
        target_e = lam_r**3 * inter.variance * t
        rows.append(
            {
                "t": t,
                "var_V": var_v,
                "target_V": sig2 * t,
                "rel_err_V": var_v / (sig2 * t) - 1.0,
                "mean_V": float(V[:, k].mean()),
                "stderr_mean_V": math.sqrt(var_v / cfg.reps),
                "var_E": var_e,
                "target_E": target_e,
                "rel_err_E": var_e / target_e - 1.0 if target_e > 0 else None,
            }
        )
    return {"r": r, "reps": cfg.reps, "lambda_r": lam_r, "sigma2": sig2, "rows": rows}
