"""Command-line entry point: ``srpt-ht <subcommand> ...``.

Subcommands
-----------
simulate  one trajectory (hand-specified primitives or a generated system r)
verify    every named property check, as a pass/fail table
sweep     coupled ensembles over r and the convergence report
rbm       terminal-value ensemble of reflected Brownian motion
walk      hitting probabilities of the 1/3-up, 2/3-down walk, exact vs Monte Carlo
dist      S, S^-1 and tail-ratio tables for one law

Exit codes: 0 success, 1 a hard check failed, 2 bad config or I/O error.
Outputs never contain timestamps, so identical invocations give identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .distributions import DistributionSpec, Law
from .engine import InitialConditionSpec, PrimitiveStream, format_number, generate_primitives, simulate, simulate_coupled
from .errors import ConfigInvalid, SrptError
from .harness import ExperimentConfig, fclt_check, run_ensemble, seed_for
from .reference import LimitParams, biased_walk_hit, biased_walk_mc, summarize, terminal_ensemble
from .scaling import drift, make_params, tilde_processes

EXIT_OK, EXIT_HARD_FAIL, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------------------
# config schemas


def _strict(cls, obj: Any, required: Sequence[str] = ()):
    if not isinstance(obj, dict):
        raise ConfigInvalid(f"{cls.__name__} config must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(obj) - names
    if extra:
        raise ConfigInvalid(f"unknown {cls.__name__} fields {sorted(extra)}; allowed {sorted(names)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigInvalid(f"{cls.__name__} config needs {missing}")
    return dict(obj)


def _law(v) -> DistributionSpec:
    try:
        return DistributionSpec.parse(v) if isinstance(v, str) else DistributionSpec.from_json(v)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad law {v!r}: {exc}") from exc


@dataclass(frozen=True)
class SimulateConfig:
    """Either ``primitives`` (a hand-written stream) or a generated system.

    Hand-written example::

        {"primitives": {"initial_tasks": [], "arrival_times": [1, 2.5],
                        "sizes": [2, 0.5], "horizon": 4},
         "a_grid": [1, 2], "snapshot_dt": 0.5, "coupled": true}

    Generated example (``a_grid`` is then in scaled units, cutoff ``a c_r``)::

        {"law": "exponential:1", "r": 20, "kappa": -0.5, "T": 1,
         "a_grid": [0.5, 1, 2], "seed": 1, "n_snapshots": 200}
    """

    primitives: PrimitiveStream | None = None
    law: DistributionSpec | None = None
    interarrival: DistributionSpec = field(default_factory=lambda: DistributionSpec("exponential", rate=1.0))
    r: float | None = None
    kappa: float = 0.0
    T: float = 1.0
    initial: str = "empty"
    w0: float = 0.0
    a_grid: tuple[float, ...] = ()
    truncation: float | None = None
    snapshot_dt: float | None = None
    n_snapshots: int = 200
    coupled: bool = False
    record_events: bool = False
    seed: int = 0

    @classmethod
    def from_json(cls, obj) -> "SimulateConfig":
        kw = _strict(cls, obj)
        if ("primitives" in kw) == ("law" in kw):
            raise ConfigInvalid("give exactly one of 'primitives' or 'law'")
        try:
            if "primitives" in kw:
                kw["primitives"] = PrimitiveStream.from_json(kw["primitives"])
                if "r" in kw:
                    raise ConfigInvalid("'r' only applies to generated systems")
            else:
                kw["law"] = _law(kw["law"])
                if "r" not in kw:
                    raise ConfigInvalid("a generated system needs 'r'")
                if "interarrival" in kw:
                    kw["interarrival"] = _law(kw["interarrival"])
            kw["a_grid"] = tuple(float(a) for a in kw.get("a_grid", ()))
            cfg = cls(**kw)
        except ConfigInvalid:
            raise
        except (TypeError, ValueError, SrptError) as exc:
            raise ConfigInvalid(str(exc)) from exc
        cfg.validate()
        return cfg

    def validate(self):
        if list(self.a_grid) != sorted(set(self.a_grid)) or any(a <= 0 for a in self.a_grid):
            raise ConfigInvalid("a_grid must be positive and strictly increasing")
        if self.snapshot_dt is not None and not self.snapshot_dt > 0:
            raise ConfigInvalid("snapshot_dt must be positive")
        if self.n_snapshots < 1:
            raise ConfigInvalid("n_snapshots must be positive")
        if self.truncation is not None and (self.coupled or not self.truncation > 0):
            raise ConfigInvalid("truncation must be positive and cannot be combined with coupled")
        if self.initial not in ("empty", "atom_near_one"):
            raise ConfigInvalid("initial must be 'empty' or 'atom_near_one'")
        if self.law is not None:
            law = Law(self.law)
            if not law.unbounded:
                raise ConfigInvalid("generated systems need an unbounded size law")
            if not (self.r > 1.0 / law.mean and self.kappa > -self.r and self.T > 0):
                raise ConfigInvalid("need r > 1/E[v], kappa > -r and T > 0")

    def with_seed(self, seed: int) -> "SimulateConfig":
        return dataclasses.replace(self, seed=int(seed))


@dataclass(frozen=True)
class RbmConfig:
    """W*(T) ensemble; sigma and lam come from the laws unless given directly.

    Example::

        {"sigma": 1, "kappa": 0, "T": 1, "n_steps": 16384, "n_paths": 100000, "seed": 1}
    """

    law: DistributionSpec | None = None
    interarrival: DistributionSpec = field(default_factory=lambda: DistributionSpec("exponential", rate=1.0))
    sigma: float | None = None
    lam: float = 1.0
    kappa: float = 0.0
    w0: float = 0.0
    w0_kind: str = "deterministic"
    a: float | None = None
    T: float = 1.0
    n_steps: int = 2**14
    n_paths: int = 10_000
    seed: int = 0

    @classmethod
    def from_json(cls, obj) -> "RbmConfig":
        kw = _strict(cls, obj)
        for key in ("law", "interarrival"):
            if key in kw:
                kw[key] = _law(kw[key])
        try:
            cfg = cls(**kw)
            cfg.params()
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc
        if (cfg.law is None) == (cfg.sigma is None):
            raise ConfigInvalid("give exactly one of 'sigma' or 'law'")
        if cfg.n_steps < 1 or cfg.n_paths < 1 or not cfg.T > 0:
            raise ConfigInvalid("n_steps, n_paths and T must be positive")
        return cfg

    def params(self) -> LimitParams:
        if self.law is not None:
            law = Law(self.law)
            inter = Law(self.interarrival.with_mean(law.mean))
            return LimitParams.from_laws(law, inter, self.kappa, self.w0, self.w0_kind)
        return LimitParams(self.sigma if self.sigma is not None else 0.0, self.kappa, self.lam, self.w0, self.w0_kind)

    def with_seed(self, seed: int) -> "RbmConfig":
        return dataclasses.replace(self, seed=int(seed))


def load_config(path: str | Path, cls):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: invalid JSON ({exc})") from exc
    return cls.from_json(obj)


# ---------------------------------------------------------------------------
# output helpers


class _Out:
    def __init__(self, out_dir: str | None, quiet: bool):
        self.dir = Path(out_dir) if out_dir else None
        self.quiet = quiet
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def say(self, text: str = ""):
        if not self.quiet:
            print(text)

    def write(self, name: str, text: str):
        if self.dir is not None:
            (self.dir / name).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _num(x) -> Any:
    if isinstance(x, (np.floating, float)) and not math.isfinite(x):
        return None
    return x.item() if isinstance(x, np.generic) else x


def _trajectory_json(tr, scaled=None) -> dict:
    obj = {
        "times": tr.times.tolist(),
        "Q": tr.Q.astype(int).tolist(),
        "W": tr.W.tolist(),
        "a_grid": list(tr.a_grid),
        "Q_a": tr.Q_a.astype(int).tolist(),
        "W_a": tr.W_a.tolist(),
        "tau": tr.tau.tolist(),
        "sup_Q": _num(tr.sup_Q[-1]),
        "sup_W": _num(tr.sup_W[-1]),
        "n_events": tr.n_events,
    }
    if tr.Z_a is not None:
        obj["Z_a"] = tr.Z_a.astype(int).tolist()
    if scaled is not None:
        sc = scaled
        obj["scaled"] = {
            **sc.params.header(),
            "T": sc.T,
            "a_grid": list(sc.a_grid),
            "times": sc.times.tolist(),
            "W": sc.W.tolist(),
            "Q": sc.Q.tolist(),
            "sup_W": sc.sup_W,
            "sup_Q": sc.sup_Q,
            "sup_QminusW": sc.sup_QmW,
            "sup_W_a": sc.sup_W_a.tolist(),
            "sup_Q_a": sc.sup_Q_a.tolist(),
            "sup_W_tail": sc.sup_W_tail.tolist(),
        }
    return obj


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, out: _Out) -> int:
    cfg = load_config(args.config, SimulateConfig)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    params = None
    if cfg.primitives is not None:
        prim = cfg.primitives
        cut = cfg.a_grid
        mass = 1.0
        dt = cfg.snapshot_dt or prim.horizon / cfg.n_snapshots
    else:
        law = Law(cfg.law)
        params = make_params(law, cfg.r, cfg.kappa)
        inter = Law(cfg.interarrival.with_mean(1.0 / params.lambda_r))
        init = (
            InitialConditionSpec.atom_near_one(cfg.w0, cfg.r, params.c_r)
            if cfg.initial == "atom_near_one"
            else InitialConditionSpec()
        )
        horizon = cfg.r * cfg.r * cfg.T
        prim = generate_primitives(law, inter, inter, init, horizon, seed_for(cfg.seed, 0, 0, 0))
        cut = params.unscaled_cutoffs(cfg.a_grid)
        mass = params.c_r
        dt = cfg.snapshot_dt * cfg.r * cfg.r if cfg.snapshot_dt else horizon / cfg.n_snapshots
    if cfg.coupled:
        tr = simulate_coupled(prim, cut, dt, mass_factor=mass, record_events=cfg.record_events)
    else:
        trunc = math.inf if cfg.truncation is None else cfg.truncation
        tr = simulate(prim, trunc, cut, dt, mass_factor=mass, record_events=cfg.record_events)
    scaled = tilde_processes(tr, params, cfg.T, cfg.a_grid) if params is not None else None

    if args.format == "csv":
        out.write("trajectory.csv", tr.to_csv())
        if scaled is not None:
            out.write("scaled.csv", scaled.to_csv())
    else:
        out.write("trajectory.json", _dumps(_trajectory_json(tr, scaled)))
    if cfg.record_events:
        out.write("events.jsonl", tr.events_jsonl())
    out.write("primitives.json", _dumps(prim.to_json()))

    out.say(f"horizon {format_number(prim.horizon)}, {prim.n_arrivals} arrivals, {tr.n_events} events")
    out.say(f"final Q {int(tr.Q[-1])}, W {tr.W[-1]:.6g}; sup Q {int(tr.sup_Q[-1])}, sup W {tr.sup_W[-1]:.6g}")
    if scaled is not None:
        p = scaled.params
        out.say(f"scaled: r={p.r:g} c_r={p.c_r:.6g} lambda_r={p.lambda_r:.6g}; W~(T)={scaled.W[-1]:.6g}")
    if out.dir is None and args.format == "csv":
        out.say(tr.to_csv().rstrip("\n"))
    return EXIT_OK


def cmd_verify(args, out: _Out) -> int:
    from .checks import check_names, run_checks

    if args.list:
        for name in check_names():
            print(name)
        return EXIT_OK
    only = args.only.split(",") if args.only else None
    seed = 0 if args.seed is None else args.seed
    results = run_checks(seed=seed, scale=args.scale, only=only, workers=args.workers)
    if not results:
        raise ConfigInvalid(f"no check matches {args.only!r}")
    for res in results:
        out.say(res.line())
    hard_fail = [r.name for r in results if r.hard and not r.passed]
    soft = sum(1 for r in results if not r.hard and not r.passed)
    out.say(f"{len(results)} checks: {len(hard_fail)} hard failures, {soft} soft warnings")
    rows = [
        {"name": r.name, "module": r.module, "hard": r.hard, "passed": r.passed, "detail": r.detail} for r in results
    ]
    if args.format == "json":
        out.write("verify.json", _dumps({"seed": seed, "scale": args.scale, "checks": rows}))
    else:
        lines = ["name,module,hard,passed,detail"]
        lines += [f"{r['name']},{r['module']},{r['hard']},{r['passed']},\"{r['detail']}\"" for r in rows]
        out.write("verify.csv", "\n".join(lines) + "\n")
    return EXIT_HARD_FAIL if hard_fail else EXIT_OK


def cmd_sweep(args, out: _Out) -> int:
    cfg = load_config(args.config, ExperimentConfig)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    rep = run_ensemble(cfg, workers=args.workers)
    if args.format == "json":
        out.write("report.json", rep.to_json())
    else:
        out.write("report.csv", rep.to_csv())
        out.write("trends.csv", _trends_csv(rep.trends))
    for row in rep.per_r:
        out.say(f"r={row['r']:g}  c_r={row['c_r']:.5g}  lambda_r={row['lambda_r']:.5g}")
        for name, st in row["functionals"].items():
            if "median" in st:
                ks = row["ks"].get(name)
                extra = f"  ks={ks:.4f}" if ks is not None else ""
                out.say(f"    {name:<18} median={st['median']:.5g}  mean={st['mean']:.5g}{extra}")
    for label, t in rep.trends.items():
        vals = ", ".join(f"{v:.4g}" for v in t["values"])
        out.say(f"{'PASS' if t['pass'] else 'FAIL'}  {label:<26} {t['rule']:<20} [{vals}]")
    out.say("violations: " + ", ".join(f"{k}={v}" for k, v in rep.violations.items()))
    if args.fclt:
        res = fclt_check(cfg)
        out.write("fclt.json", _dumps(res))
        for row in res["rows"]:
            out.say(f"fclt t={row['t']:g}: Var V^={row['var_V']:.4f} (target {row['target_V']:.4f})")
    return EXIT_HARD_FAIL if rep.hard_fail else EXIT_OK


def _trends_csv(trends) -> str:
    lines = ["trend,functional,statistic,rule,pass,values"]
    for label, t in trends.items():
        vals = ";".join(repr(v) for v in t["values"])
        lines.append(f"{label},{t['functional']},{t['statistic']},{t['rule']},{t['pass']},{vals}")
    return "\n".join(lines) + "\n"


def cmd_rbm(args, out: _Out) -> int:
    if args.config:
        cfg = load_config(args.config, RbmConfig)
    else:
        cfg = RbmConfig(sigma=args.sigma, kappa=args.kappa, T=args.T, n_steps=args.steps, n_paths=args.paths)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    p = cfg.params()
    rng = np.random.default_rng(seed_for(cfg.seed, 0, 0, 1))
    x = terminal_ensemble(p, cfg.T, cfg.n_steps, cfg.n_paths, rng, a=cfg.a)
    s = summarize(x)
    s["stderr"] = math.sqrt(s["var"] / s["n"])
    s["params"] = dataclasses.asdict(p)
    s["T"], s["n_steps"], s["a"] = cfg.T, cfg.n_steps, cfg.a
    if args.format == "json":
        out.write("rbm.json", _dumps(s))
    else:
        lines = ["statistic,value", f"n,{s['n']}", f"mean,{s['mean']!r}", f"var,{s['var']!r}", f"stderr,{s['stderr']!r}"]
        lines += [f"q{k},{v!r}" for k, v in s["quantiles"].items()]
        out.write("rbm.csv", "\n".join(lines) + "\n")
    out.say(f"sigma={p.sigma:.6g} kappa={p.kappa:g} T={cfg.T:g} steps={cfg.n_steps} paths={cfg.n_paths}")
    out.say(f"mean W*(T) = {s['mean']:.6f} +- {s['stderr']:.6f}; var = {s['var']:.6f}")
    if p.kappa == 0 and p.w0 == 0 and cfg.a is None:
        out.say(f"reference sigma sqrt(2T/pi) = {p.sigma * math.sqrt(2 * cfg.T / math.pi):.6f}")
    return EXIT_OK


def cmd_walk(args, out: _Out) -> int:
    if (args.j is None) != (args.l is None):
        raise ConfigInvalid("give both --j and --l, or neither for the table")
    pairs = [(args.j, args.l)] if args.j is not None else [(j, l) for l in range(3, 7) for j in range(2, l)]
    seed = 0 if args.seed is None else args.seed
    rows = []
    for k, (j, l) in enumerate(pairs):
        exact = biased_walk_hit(j, l)
        est = biased_walk_mc(j, l, args.paths, np.random.default_rng(seed_for(seed, j, l, k)))
        rows.append(
            {
                "j": j,
                "l": l,
                "exact": f"{exact.numerator}/{exact.denominator}",
                "exact_value": float(exact),
                "mc": est.estimate,
                "stderr": est.stderr,
                "within_3se": est.within(float(exact), 3.0),
            }
        )
        out.say(
            f"j={j} l={l}  exact {float(exact):.6f} ({exact.numerator}/{exact.denominator})"
            f"  mc {est.estimate:.6f} +- {est.stderr:.6f}"
        )
    if args.format == "json":
        out.write("walk.json", _dumps(rows))
    else:
        lines = ["j,l,exact,exact_value,mc,stderr,within_3se"]
        lines += [",".join(str(r[k]) for k in ("j", "l", "exact", "exact_value", "mc", "stderr", "within_3se")) for r in rows]
        out.write("walk.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_dist(args, out: _Out) -> int:
    law = Law(_law(args.law))
    out.say(f"{law}: mean {law.mean:.6g}, variance {law.variance:.6g}, unbounded {law.unbounded}")
    rows = []
    for r in args.r:
        row: dict[str, Any] = {"r": r}
        if law.unbounded:
            c = law.s_inverse(r)
            row.update(c_r=c, S_c_r=law.big_s(c), c_r_over_log_r=c / math.log(r) if r > 1 else None)
            row["ratio_s_inverse_2"] = law.ratio_s_inverse(2.0, r)
            if r > 1.0 / law.mean:
                row["drift_a0.5_kappa0"] = drift(make_params(law, r, 0.0), 0.5)
            out.say(
                f"r={r:g}  c_r={c:.6g}  S(c_r)={row['S_c_r']:.6g}  S^-1(2r)/S^-1(r)={row['ratio_s_inverse_2']:.6g}"
            )
        row["ratio_tail_2_at_r"] = law.ratio_tail(2.0, r) if law.tail(r) > 0 else None
        rows.append(row)
    if args.format == "json":
        out.write("dist.json", _dumps({"law": law.spec.to_json(), "rows": rows}))
    else:
        keys = sorted({k for row in rows for k in row} - {"r"})
        lines = [",".join(["r"] + keys)]
        for row in rows:
            lines.append(",".join([repr(row["r"])] + ["" if row.get(k) is None else repr(row[k]) for k in keys]))
        out.write("dist.csv", "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default=None, help="directory for output files")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    ap = argparse.ArgumentParser(prog="srpt-ht", description="SRPT heavy-traffic simulation toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate one trajectory")
    p.add_argument("--config", required=True)

    p = sub.add_parser("verify", parents=[common], help="run the named property checks")
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on trial counts")
    p.add_argument("--only", default=None, help="comma-separated check or module names")
    p.add_argument("--list", action="store_true", help="list check names and exit")
    p.add_argument("--workers", type=int, default=2)

    p = sub.add_parser("sweep", parents=[common], help="coupled ensembles and the convergence report")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None, help="default: SRPT_THREADS or CPU count")
    p.add_argument("--fclt", action="store_true", help="also run the arrival-process CLT check")

    p = sub.add_parser("rbm", parents=[common], help="reflected Brownian motion ensemble")
    p.add_argument("--config", default=None)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=2**14)
    p.add_argument("--paths", type=int, default=10_000)

    p = sub.add_parser("walk", parents=[common], help="biased walk hitting probabilities")
    p.add_argument("--j", type=int, default=None)
    p.add_argument("--l", type=int, default=None)
    p.add_argument("--paths", type=int, default=100_000)

    p = sub.add_parser("dist", parents=[common], help="scale-function tables")
    p.add_argument("--law", required=True, help="e.g. exponential:1, weibull:1,2, pareto:2,1")
    p.add_argument("--r", type=float, nargs="+", default=[10.0])
    return ap


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "rbm": cmd_rbm,
    "walk": cmd_walk,
    "dist": cmd_dist,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = _Out(args.out_dir, args.quiet)
        return COMMANDS[args.cmd](args, out)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SrptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
