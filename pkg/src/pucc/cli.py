"""Command-line entry point.

Exit status: 0 on success, 1 when a solve had to fall back or a solution
fails verification, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .driver import RunLog, read_run_logs, rtd, solve, write_run_logs
from .model import (
    FAMILIES,
    InstanceFormatError,
    SolverParams,
    area_lower_bound,
    generate_instance,
    read_instance,
    read_solution,
    render_svg,
    verify_solution,
    write_instance,
    write_solution,
)
from .search import Budget
from .vacancy import detect_all

OK, FAILED, USAGE = 0, 1, 2
VERIFY_TOL = 1e-9
MATCH_TOL = 1e-6

BENCH_COLUMNS = ("instance", "seed", "R_best", "feasible", "elapsed_seconds", "t_final")
SUMMARY_COLUMNS = ("instance", "runs", "best", "avg", "worst", "success_rate", "mean_t_final")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit; report through the status code instead
        raise UsageError(f"{self.prog}: {message}")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pucc", description="Pack unequal circles into the smallest circle.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a benchmark instance")
    g.add_argument("--family", required=True, choices=sorted(FAMILIES))
    g.add_argument("--n", required=True, type=_positive_int)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="search for a small container")
    s.add_argument("--instance", required=True)
    s.add_argument("--time-limit", type=_positive_float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--svg")
    s.add_argument("--no-shs-core", action="store_true")
    s.add_argument("--iter-budget", type=_positive_int, help="layout optimizations allowed; replaces the clock")

    v = sub.add_parser("verify", help="check a solution for overlaps")
    v.add_argument("--instance", required=True)
    v.add_argument("--solution", required=True)
    v.add_argument("--tol", type=float, default=VERIFY_TOL)

    r = sub.add_parser("render", help="draw a solution as SVG")
    r.add_argument("--instance", required=True)
    r.add_argument("--solution", required=True)
    r.add_argument("--out", required=True)

    h = sub.add_parser("vacancies", help="list holes in a solution")
    h.add_argument("--instance", required=True)
    h.add_argument("--solution", required=True)
    h.add_argument("--out")

    b = sub.add_parser("bench", help="multi-seed campaign over a family")
    b.add_argument("--family", required=True, choices=sorted(FAMILIES))
    b.add_argument("--n-min", required=True, type=_positive_int)
    b.add_argument("--n-max", required=True, type=_positive_int)
    b.add_argument("--runs", required=True, type=_positive_int)
    b.add_argument("--time-limit", required=True, type=_positive_float)
    b.add_argument("--threads", type=_positive_int, default=1)
    b.add_argument("--csv", required=True)

    t = sub.add_parser("rtd", help="empirical run-time distribution from run logs")
    t.add_argument("--log", required=True)
    t.add_argument("--target", required=True, type=float)
    t.add_argument("--n-runs", required=True, type=_positive_int)
    t.add_argument("--out", required=True)
    return p


# ------------------------------------------------------------------ commands


def _load_pair(instance_path: str, solution_path: str):
    instance = read_instance(instance_path)
    radii, config = read_solution(solution_path)
    if config.n != instance.n:
        raise InstanceFormatError(
            f"{solution_path}: solution has {config.n} circles, instance has {instance.n}"
        )
    return instance, radii, config


def cmd_gen(args) -> int:
    write_instance(generate_instance(args.family, args.n), args.out)
    return OK


def cmd_solve(args) -> int:
    if args.time_limit is None and args.iter_budget is None:
        raise UsageError("solve: one of --time-limit or --iter-budget is required")
    instance = read_instance(args.instance)
    params = SolverParams(enable_shs_core=not args.no_shs_core)
    # an iteration budget makes the run reproducible, so the clock is ignored
    if args.iter_budget is not None:
        budget = Budget(iter_limit=args.iter_budget)
    else:
        budget = Budget(time_limit=args.time_limit)
    result = solve(instance, params, budget, seed=args.seed)
    write_solution(instance, result.best_configuration, args.out)
    if args.svg:
        Path(args.svg).write_text(render_svg(instance, result.best_configuration))
    report = verify_solution(instance, result.best_configuration, tol=VERIFY_TOL)
    print(f"{instance.name} R={result.best_radius:.10f} time={result.elapsed_seconds:.2f}s feasible={report.feasible}")
    return OK if report.feasible and not result.fallback else FAILED


def cmd_verify(args) -> int:
    instance, radii, config = _load_pair(args.instance, args.solution)
    report = verify_solution(instance, config, tol=args.tol)
    bound = area_lower_bound(instance)
    radii_ok = bool(all(math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12) for a, b in zip(radii, instance.radii)))
    ok = report.feasible and radii_ok and config.container_radius >= bound
    print(
        f"R={config.container_radius:.15g} max_depth={report.max_depth:.3e} "
        f"(pair {report.max_pair_depth:.3e}, boundary {report.max_boundary_depth:.3e}) "
        f"energy={report.energy:.3e} {'feasible' if ok else 'INFEASIBLE'}"
    )
    if not radii_ok:
        print("radii in the solution do not match the instance")
    if config.container_radius < bound:
        print(f"R is below the area bound {bound:.15g}")
    return OK if ok else FAILED


def cmd_render(args) -> int:
    instance, _, config = _load_pair(args.instance, args.solution)
    Path(args.out).write_text(render_svg(instance, config))
    return OK


def cmd_vacancies(args) -> int:
    instance, _, config = _load_pair(args.instance, args.solution)
    holes = detect_all(instance, config)
    rows = [(h.center[0], h.center[1], h.radius) for h in holes]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("center_x", "center_y", "radius"))
            w.writerows([repr(x) for x in row] for row in rows)
    else:
        for x, y, r in rows:
            print(f"{x:.10f} {y:.10f} {r:.10f}")
    return OK


def _bench_one(job):
    family, n, seed, time_limit = job
    instance = generate_instance(family, n)
    result = solve(instance, SolverParams(), Budget(time_limit=time_limit), seed=seed)
    feasible = verify_solution(instance, result.best_configuration, tol=VERIFY_TOL).feasible
    row = {
        "instance": instance.name,
        "seed": seed,
        "R_best": result.best_radius,
        "feasible": int(feasible),
        "elapsed_seconds": result.elapsed_seconds,
        "t_final": result.time_to_best,
    }
    return row, result.log


def summarize(rows: Sequence[Dict]) -> List[Dict]:
    """Per-instance best/avg/worst of feasible runs, hit rate on the best and mean time to final."""
    groups: Dict[str, List[Dict]] = {}
    for row in rows:
        groups.setdefault(row["instance"], []).append(row)
    out = []
    for name, group in groups.items():
        radii = [float(r["R_best"]) for r in group if int(r["feasible"])]
        best = min(radii) if radii else math.inf
        hits = sum(1 for x in radii if x - best <= MATCH_TOL)
        out.append(
            {
                "instance": name,
                "runs": len(group),
                "best": best,
                "avg": statistics.fmean(radii) if radii else math.inf,
                "worst": max(radii) if radii else math.inf,
                "success_rate": hits / len(group),
                "mean_t_final": statistics.fmean(float(r["t_final"]) for r in group),
            }
        )
    return out


def read_bench_csv(path) -> List[Dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + "_summary.csv")


def log_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + "_log.csv")


def _write_dicts(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])


def cmd_bench(args) -> int:
    if args.n_min > args.n_max:
        raise UsageError("bench: --n-min must not exceed --n-max")
    jobs = [
        (args.family, n, seed, args.time_limit)
        for n in range(args.n_min, args.n_max + 1)
        for seed in range(1, args.runs + 1)
    ]
    if args.threads == 1:
        done = [_bench_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            done = list(pool.map(_bench_one, jobs))
    rows = [row for row, _ in done]
    logs: List[RunLog] = [log for _, log in done]
    _write_dicts(args.csv, BENCH_COLUMNS, rows)
    write_run_logs(logs, log_path(args.csv))
    # recompute from the file so the summary matches what a reader of the CSV would get
    summary = summarize(read_bench_csv(args.csv))
    _write_dicts(summary_path(args.csv), SUMMARY_COLUMNS, summary)
    for s in summary:
        print(
            f"{s['instance']:>16} best={s['best']:.8f} avg={s['avg']:.8f} worst={s['worst']:.8f} "
            f"SR={s['success_rate']:.2f} t={s['mean_t_final']:.2f}s"
        )
    return OK if all(int(r["feasible"]) for r in rows) else FAILED


def cmd_rtd(args) -> int:
    logs = read_run_logs(args.log)
    if len(logs) > args.n_runs:
        raise UsageError(f"rtd: log holds {len(logs)} runs but --n-runs is {args.n_runs}")
    times = []
    for log in logs:
        t = log.first_time_at_or_below(args.target + MATCH_TOL)
        if t is not None:
            times.append(t)
    dist = rtd(times, args.n_runs)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t_seconds", "P"))
        for t, p in dist.table():
            w.writerow((repr(t), repr(p)))
    return OK


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "render": cmd_render,
    "vacancies": cmd_vacancies,
    "bench": cmd_bench,
    "rtd": cmd_rtd,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE
    except (InstanceFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run_cli())
