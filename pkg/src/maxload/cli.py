"""Command line entry point for ``maxload``.

Exit codes: 0 success, 2 usage or input error, 3 size cap refusal,
4 numeric invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from maxload.dynamic_opt import (
    ExactDpPolicy,
    adaptivity_gap,
    classify_regime,
    exact_dp,
    export_policy,
    solve_dynamic,
)
from maxload.errors import CapExceededError, DomainError, InvariantViolation, MaxLoadError
from maxload.model import generate_instance, load_instance, save_instance
from maxload.oracle import expected_max_load
from maxload.simulate import estimate_policy_value
from maxload.static_opt import best_weight_ordered, exact_solve, ptas_solve

log = logging.getLogger("maxload")

EXIT_USAGE, EXIT_CAP, EXIT_INVARIANT = 2, 3, 4
SMOKE_REPS = 20
FULL_REPS = 1000


def fmt(x: float) -> str:
    return format(x, ".12g")


def _round(obj):
    """Floats to 12 significant digits, recursively."""
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(doc, out: str | None) -> None:
    _emit(json.dumps(_round(doc), indent=2) + "\n", out)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("grid must not be empty")
    return vals


def _sigma(text: str):
    if text == "half-mu":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--sigma takes a number or 'half-mu', got {text!r}") from None


# ---------------------------------------------------------------- commands


def cmd_eval(args) -> int:
    instance = load_instance(args.instance)
    _emit(fmt(expected_max_load(instance, args.assortment)) + "\n", args.out)
    return 0


def cmd_solve_static(args) -> int:
    instance = load_instance(args.instance)
    if args.method == "exact":
        report = exact_solve(instance)
    elif args.method == "weight-ordered":
        report = best_weight_ordered(instance)
    else:
        report = ptas_solve(instance, args.epsilon)
    _emit_json(report.to_dict(), args.out)
    return 0


def _overrides(args) -> dict:
    return {"override_tau": args.override_tau, "override_beta": args.override_beta, "force_regime": args.force_regime}


def cmd_solve_dynamic(args) -> int:
    instance = load_instance(args.instance)
    if args.method == "exact":
        value, table = exact_dp(instance)
        policy = ExactDpPolicy(table)
        doc = {"method": "exact", "value": value, "states": len(table)}
    else:
        params = classify_regime(instance, args.epsilon, **_overrides(args))
        report = solve_dynamic(instance, args.epsilon, params)
        policy = report.policy
        doc = {"method": "truncated", **report.to_dict()}
        if args.reps >= 2:
            mean, stderr = estimate_policy_value(instance, policy, args.reps, args.seed)
            doc["estimate"] = {"mean": mean, "stderr": stderr, "samples": args.reps, "seed": args.seed}
    doc["policy"] = export_policy(policy, instance)
    _emit_json(doc, args.out)
    return 0


def _gap_doc(report) -> dict:
    doc = _round(report.to_dict())
    doc["r_I"] = round(report.r_I, 2)
    return doc


def cmd_gap(args) -> int:
    instance = load_instance(args.instance)
    _emit(json.dumps(_gap_doc(adaptivity_gap(instance)), indent=2) + "\n", args.out)
    return 0


def cmd_gen(args) -> int:
    sigma = args.mu / 2 if args.sigma == "half-mu" else args.sigma
    instance = generate_instance(args.n, args.T, args.mu, sigma, args.seed)
    if args.out:
        save_instance(instance, args.out)
    else:
        sys.stdout.write(json.dumps(instance.to_dict(), indent=2) + "\n")
    return 0


# ---------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepConfig:
    param: str
    grid: tuple[float, ...]
    n: int
    mu: float
    T: int
    sigma: object
    reps: int
    seed: int
    method: str

    def __post_init__(self):
        if not self.grid:
            raise DomainError("grid must not be empty")
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        if self.param not in ("T", "mu"):
            raise DomainError(f"--param must be T or mu, got {self.param!r}")

    def cell(self, value: float) -> tuple[int, float, float]:
        T = int(value) if self.param == "T" else self.T
        mu = float(value) if self.param == "mu" else self.mu
        if self.param == "T" and T != value:
            raise DomainError(f"T grid values must be integers, got {value}")
        sigma = mu / 2 if self.sigma == "half-mu" else float(self.sigma)
        return T, mu, sigma


@dataclass(frozen=True)
class CellSummary:
    param: str
    value: float
    reps: int
    min: float | None = None
    q1: float | None = None
    median: float | None = None
    mean: float | None = None
    q3: float | None = None
    max: float | None = None
    status: str = "ok"
    reason: str = ""

    @classmethod
    def of(cls, param: str, value: float, stats: Sequence[float]) -> CellSummary:
        a = np.asarray(stats, dtype=float)
        q1, med, q3 = np.percentile(a, [25, 50, 75])
        return cls(param, value, len(a), float(a.min()), float(q1), float(med), float(a.mean()), float(q3), float(a.max()))


def replication_seed(seed: int, cell: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, cell, rep]).generate_state(1, np.uint64)[0])


def _replicate(job) -> float:
    method, n, T, mu, sigma, seed = job
    instance = generate_instance(n, T, mu, sigma, seed)
    if method == "static-size":
        return float(exact_solve(instance).size)
    return adaptivity_gap(instance).r_I


def run_sweep(config: SweepConfig, jobs: int = 1) -> list[CellSummary]:
    rows = []
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        for c, value in enumerate(config.grid):
            T, mu, sigma = config.cell(value)
            work = [(config.method, config.n, T, mu, sigma, replication_seed(config.seed, c, r)) for r in range(config.reps)]
            log.info("cell %d/%d: %s=%s (%d reps)", c + 1, len(config.grid), config.param, value, config.reps)
            try:
                stats = list(pool.map(_replicate, work)) if pool else [_replicate(w) for w in work]
            except CapExceededError as exc:
                rows.append(CellSummary(config.param, value, config.reps, status="skipped", reason=str(exc)))
                continue
            rows.append(CellSummary.of(config.param, value, stats))
    finally:
        if pool:
            pool.shutdown()
    return rows


SWEEP_FIELDS = ["param", "value", "reps", "min", "q1", "median", "mean", "q3", "max", "status", "reason"]


def sweep_csv(rows: Sequence[CellSummary]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else fmt(v) if isinstance(v, float) else v) for k, v in asdict(row).items()})
    return buf.getvalue()


def cmd_sweep(args) -> int:
    reps = SMOKE_REPS if args.smoke else (args.reps or FULL_REPS)
    if args.grid is None:
        raise DomainError("sweep needs --grid")
    config = SweepConfig(
        param=args.param,
        grid=tuple(args.grid),
        n=args.n,
        mu=args.mu,
        T=args.T,
        sigma=args.sigma,
        reps=reps,
        seed=args.seed,
        method=args.method,
    )
    rows = run_sweep(config, args.jobs)
    if args.format == "json":
        _emit_json([asdict(r) for r in rows], args.out)
    else:
        _emit(sweep_csv(rows), args.out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxload", description="Maximum-load assortment optimisation under MNL choice.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("--instance", required=True, help="instance JSON file")
        sp.add_argument("--out", help="write output here instead of stdout")

    sp = sub.add_parser("eval", help="expected max load of a static assortment")
    common(sp)
    sp.add_argument("--assortment", type=_int_list, required=True, help="e.g. 1,2,5")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("solve-static", help="optimal or approximate static assortment")
    common(sp)
    sp.add_argument("--method", choices=["exact", "weight-ordered", "ptas"], default="exact")
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.set_defaults(func=cmd_solve_static)

    sp = sub.add_parser("solve-dynamic", help="exact DP or truncated adaptive policy")
    common(sp)
    sp.add_argument("--method", choices=["exact", "truncated"], default="exact")
    sp.add_argument("--epsilon", type=float, default=0.25)
    sp.add_argument("--override-tau", type=float)
    sp.add_argument("--override-beta", type=int)
    sp.add_argument("--force-regime", choices=["high", "low"])
    sp.add_argument("--reps", type=int, default=10_000, help="simulated trajectories for the value estimate")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_solve_dynamic)

    sp = sub.add_parser("gap", help="adaptivity gap report")
    common(sp)
    sp.set_defaults(func=cmd_gap)

    sp = sub.add_parser("sweep", help="random-instance experiment grid")
    common(sp, instance=False)
    sp.add_argument("--param", choices=["T", "mu"], default="T")
    sp.add_argument("--grid", type=_float_list)
    sp.add_argument("--method", choices=["static-size", "gap"], default="static-size")
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--mu", type=float, default=0.05)
    sp.add_argument("--T", type=int, default=2)
    sp.add_argument("--sigma", type=_sigma, default="half-mu")
    sp.add_argument("--reps", type=int)
    sp.add_argument("--smoke", action="store_true", help=f"{SMOKE_REPS} replications per cell")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--progress", action="store_true", help="log each cell to stderr")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("gen", help="draw a random instance")
    common(sp, instance=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--T", type=int, required=True)
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--sigma", type=_sigma, default="half-mu")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "progress", False):
        logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CapExceededError as exc:
        print(f"maxload: refused: {exc}", file=sys.stderr)
        return EXIT_CAP
    except InvariantViolation as exc:
        print(f"maxload: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DomainError, MaxLoadError, OSError) as exc:
        print(f"maxload: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
