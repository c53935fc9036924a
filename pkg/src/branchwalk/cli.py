"""Command line front end: reproducible experiments, CSV artifacts, summaries.

Every subcommand resolves one effective RunConfig (config file, then
BRANCHWALK_JOBS, then flags), writes `config.json`, its CSV tables, and a
`summary.txt` with one PASS/FAIL line per check into the output directory.
All replica streams are pure functions of (master_seed, replica, label), and
replica fan-out reduces in index order, so artifacts are byte-identical
across reruns and across --jobs values.

Exit codes: 0 all checks pass, 1 some check failed, 2 usage or config error,
3 resource trouble (partial artifacts are flagged in the summary).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    SURVIVAL_DEPTH,
    ConditioningError,
    _replica_map,
    barrier_sum,
    corollary22_frequency,
    find_umin,
    lowest_u_vertices,
    prop23_diagnostic,
    sigma2,
    surviving_environment,
    theorem21_report,
)
from .config import KNOWN_CHECKS, RunConfig
from .csvio import write_csv
from .excursion import ExcursionLaw, path_stats, sample_total_local_times
from .families import CalibrationError, DegenerateLawError
from .rng import make_generator
from .spine import G_LIBRARY, estimate_3_8, many_to_one_check, persistence_curve
from .tree import ArenaCapacityError, ExtinctEnvironmentError, MarkedTree
from .walk import BarrierConfig, Walk

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

#: one-sided 95% point, used by the non-increasing trend slack
_Z_TREND = 1.6448536269514722


class UsageError(ValueError):
    """Bad flag value or config content; nothing has been written yet."""


@dataclass(frozen=True)
class CheckLine:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RunResult:
    checks: list[CheckLine] = field(default_factory=list)
    partial: bool = False

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckLine(name, bool(passed), detail))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------


def effective_config(args: argparse.Namespace) -> RunConfig:
    """Config file -> env -> flags; validation errors become usage errors."""
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config file: {exc}") from exc

    jobs = args.jobs
    if jobs is None:
        env = os.environ.get("BRANCHWALK_JOBS")
        if env is not None:
            try:
                jobs = int(env)
            except ValueError:
                raise UsageError(f"BRANCHWALK_JOBS={env!r} is not an integer")
    overrides = dict(
        master_seed=args.seed,
        replicas=args.replicas,
        out_dir=args.out,
        jobs=jobs,
    )
    if getattr(args, "family", None) is not None:
        overrides["family"] = args.family
        overrides["law_params"] = {}
    if getattr(args, "n_grid", None) is not None:
        overrides["n_grid"] = tuple(args.n_grid)
    if getattr(args, "eps", None) is not None:
        overrides["eps_grid"] = tuple(args.eps)
    if getattr(args, "gamma", None) is not None:
        overrides["gamma"] = args.gamma
    if getattr(args, "checks", None) is not None:
        overrides["checks"] = tuple(args.checks)
    try:
        return cfg.with_overrides(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# artifact writing
# ---------------------------------------------------------------------------


def _emit(out: Path, name: str, schema: str, cfg: RunConfig, columns, rows,
          extra_meta=()) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / name, schema, cfg.config_hash, columns, rows, extra_meta)


def _write_summary(out: Path, cfg: RunConfig, command: str,
                   result: RunResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.json")
    lines = [
        f"branchwalk {__version__}",
        f"run_id: {cfg.config_hash[:12]}",
        f"config_hash: {cfg.config_hash}",
        f"command: {command}",
        f"family: {cfg.family}",
        f"master_seed: {cfg.master_seed}",
        f"replicas: {cfg.replicas}",
        "checks:",
    ]
    for c in result.checks:
        mark = "PASS" if c.passed else "FAIL"
        suffix = f"  ({c.detail})" if c.detail else ""
        lines.append(f"  {c.name}: {mark}{suffix}")
    if not result.checks:
        lines.append("  (none)")
    overall = "PARTIAL" if result.partial else ("PASS" if result.ok else "FAIL")
    lines.append(f"overall: {overall}")
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _trend_non_increasing(counts, used) -> bool:
    """One-sided slack test: each later rate at most the earlier one plus
    z * pooled binomial standard error."""
    if used <= 0:
        return True
    ps = [c / used for c in counts]
    ses = [math.sqrt(p * (1.0 - p) / used) for p in ps]
    for j in range(len(ps) - 1):
        slack = _Z_TREND * math.hypot(ses[j], ses[j + 1])
        if ps[j + 1] > ps[j] + slack:
            return False
    return True


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------


def run_calibrate(cfg: RunConfig, out: Path) -> RunResult:
    law = cfg.law()
    doc = law.to_doc()
    res = doc["residuals"]
    result = RunResult()
    result.add("calibrate:boundary_residuals",
               abs(res["mass"]) <= 1e-10 and abs(res["mean"]) <= 1e-10,
               f"mass={res['mass']:.3e} mean={res['mean']:.3e}")
    result.add("calibrate:sigma2_positive", doc["sigma2"] > 0.0,
               f"sigma2={doc['sigma2']:.12g}")
    out.mkdir(parents=True, exist_ok=True)
    law.dump(out / f"law_{cfg.family}.json")
    rows = [(cfg.family, v, p) for v, p in
            zip(doc["params"]["values"], doc["params"]["probs"])]
    _emit(out, "calibrate.csv", "calibrate", cfg,
          ("family", "displacement", "probability"), rows,
          extra_meta=(("sigma2", "%.17g" % doc["sigma2"]),
                      ("mean_offspring", "%.17g" % doc["mean_offspring"]),
                      ("residual_mass", "%.17g" % res["mass"]),
                      ("residual_mean", "%.17g" % res["mean"])))
    return result


def run_simulate(cfg: RunConfig, out: Path, n: int, top: int) -> RunResult:
    if n < 1:
        raise UsageError("simulate needs --n >= 1")
    if top < 1:
        raise UsageError("simulate needs --top >= 1")
    law = cfg.law()

    def worker(r):
        tree = surviving_environment(law, cfg.master_seed, r, "sim",
                                     arena_cap=cfg.arena_cap)
        walk = Walk(tree, make_generator(cfg.master_seed, r, "sim:move"))
        walk.run(n)
        ids = np.sort(walk.visited_ids())
        counts = walk.L[ids]
        order = np.lexsort((ids, -counts))[:top]
        sites = [(r, int(ids[i]), int(tree.depth[ids[i]]),
                  float(tree.U[ids[i]]), int(counts[i])) for i in order]
        fav = min(walk.favorites)
        summary = (r, walk.steps, walk.max_depth, int(ids.size),
                   int(walk.root_returns().size), walk.ghost_visits,
                   fav, walk.max_count, float(tree.U[fav]),
                   walk.audit_favorites())
        return summary, sites

    results = _replica_map(worker, cfg.replicas, cfg.jobs)
    result = RunResult()
    result.add("simulate:favorites_audit", all(s[-1] for s, _ in results))
    _emit(out, "simulate.csv", "simulate", cfg,
          ("replica", "steps", "max_depth", "distinct_visited",
           "root_returns", "ghost_visits", "favorite", "favorite_count",
           "favorite_U", "audit"),
          [s for s, _ in results], extra_meta=(("n", str(n)),))
    _emit(out, "simulate_sites.csv", "simulate_sites", cfg,
          ("replica", "vertex", "depth", "U", "local_time"),
          [row for _, sites in results for row in sites],
          extra_meta=(("n", str(n)), ("top", str(top))))
    return result


def run_excursions(cfg: RunConfig, out: Path, m: int, vertices: int,
                   samples: int) -> RunResult:
    if m < 1:
        raise UsageError("excursions needs --m >= 1")
    if vertices < 1:
        raise UsageError("excursions needs --vertices >= 1")
    if samples < 2:
        raise UsageError("excursions needs --samples >= 2")
    law = cfg.law()
    tree = surviving_environment(law, cfg.master_seed, 0, "exc",
                                 arena_cap=cfg.arena_cap)
    low = [x for _, x in lowest_u_vertices(tree, vertices + 1,
                                           lambda_cap=cfg.lambda_cap) if x != 0]
    low = low[:vertices]
    rows = []
    all_ok = True
    for x in low:
        ps = path_stats(tree, x)
        xlaw = ExcursionLaw.from_path_stats(ps)
        rng = make_generator(cfg.master_seed, x, "exc:draw")
        totals = sample_total_local_times(xlaw, m, rng, samples) / m
        measured = float(totals.mean())
        se = float(totals.std(ddof=1) / math.sqrt(samples))
        z = (measured - ps.mean) / se if se > 0 else 0.0
        ok = abs(z) <= 4.0
        all_ok = all_ok and ok
        rows.append((x, int(tree.depth[x]), float(tree.U[x]), ps.a, ps.p,
                     ps.mean, measured, se, z, ok))
    result = RunResult()
    result.add("excursions:means_within_4se", all_ok,
               f"{len(rows)} vertices, m={m}, samples={samples}")
    _emit(out, "excursions.csv", "excursions", cfg,
          ("vertex", "depth", "U", "a", "p", "exact_mean", "measured_mean",
           "stderr", "z", "passed"), rows,
          extra_meta=(("m", str(m)), ("samples", str(samples))))
    return result


def run_spine_check(cfg: RunConfig, out: Path, trials: int, n_max: int,
                    b: float, lambdas) -> RunResult:
    if trials < 2:
        raise UsageError("spine-check needs --trials >= 2")
    if not 1 <= n_max <= 6:
        raise UsageError("spine-check needs --n-max in 1..6")
    law = cfg.law()
    s2 = sigma2(law)
    rows = []
    m2o_ok = True
    for g_id in sorted(G_LIBRARY):
        for n in range(1, n_max + 1):
            rng = make_generator(cfg.master_seed, 0, f"spine:m2o:g{g_id}:n{n}")
            r = many_to_one_check(law, n, g_id, trials=trials, rng=rng)
            ok = abs(r.gap) <= 4.0 * r.combined_se
            m2o_ok = m2o_ok and ok
            rows.append((f"many_to_one:g{g_id}", float(n), r.lhs, r.rhs,
                         r.se_lhs, r.se_rhs, ok))
    curve = persistence_curve(
        law, trials=trials, rng=make_generator(cfg.master_seed, 0, "spine:persistence"))
    slope_ok = math.isfinite(curve.slope) and abs(curve.slope + 0.5) <= 0.1
    rows.append(("persistence_slope", float(curve.ks.max()), curve.slope,
                 -0.5, 0.0, 0.0, slope_ok))
    ceiling = 2.0 / (s2 * b * b)
    sum_ok = True
    for lam in lambdas:
        rng = make_generator(cfg.master_seed, 0, f"spine:stopped:{lam:g}")
        est = estimate_3_8(law, b, lam, trials=max(trials // 10, 2), rng=rng)
        ok = est.value <= ceiling + 4.0 * est.se
        sum_ok = sum_ok and ok
        rows.append(("stopped_sum_ceiling", float(lam), est.value, ceiling,
                     est.se, 0.0, ok))
    result = RunResult()
    result.add("spine:many_to_one_agreement", m2o_ok,
               f"{len(G_LIBRARY) * n_max} combinations at {trials} trials")
    result.add("spine:persistence_slope", slope_ok,
               f"slope={curve.slope:.4f} target=-0.5 band=0.1")
    result.add("spine:stopped_sum_ceiling", sum_ok,
               f"ceiling={ceiling:.6g} at b={b:g}")
    _emit(out, "spine_check.csv", "spine_check", cfg,
          ("check", "n_or_k", "lhs", "rhs", "stderr_lhs", "stderr_rhs",
           "passed"), rows, extra_meta=(("trials", str(trials)), ("b", "%g" % b)))
    return result


def run_umin(cfg: RunConfig, out: Path) -> RunResult:
    law = cfg.law()

    def worker(r):
        tree = MarkedTree(law, make_generator(cfg.master_seed, r, "umin:env"),
                          arena_cap=cfg.arena_cap)
        if not tree.survives_to(SURVIVAL_DEPTH):
            return (r, False, False, math.nan, 0, math.nan)
        um = find_umin(tree, lambda_cap=cfg.lambda_cap)
        return (r, True, um.certified, um.min_value, len(um.minimizers),
                um.frontier_bound)

    rows = _replica_map(worker, cfg.replicas, cfg.jobs)
    surviving = [row for row in rows if row[1]]
    certified = sum(1 for row in surviving if row[2])
    result = RunResult()
    result.add("umin:any_certified", certified > 0,
               f"{certified}/{len(surviving)} surviving replicas certified")
    _emit(out, "umin.csv", "umin", cfg,
          ("replica", "survived", "certified", "min_value",
           "minimizer_count", "frontier_bound"), rows)
    return result


def run_theorem21(cfg: RunConfig, out: Path, vertices: int, m: int,
                  excursion_replicas: int) -> RunResult:
    if vertices < 1:
        raise UsageError("theorem21 needs --vertices >= 1")
    law = cfg.law()
    report = theorem21_report(
        law, cfg.master_seed, n_grid=cfg.n_grid, vertex_budget=vertices,
        replicas=cfg.replicas, excursion_m=m,
        excursion_replicas=excursion_replicas, lambda_cap=cfg.lambda_cap)
    exc_ok = True
    exc_rows = []
    for row in report.excursion_rows:
        z = (row.mean - row.predicted) / row.se if row.se > 0 else 0.0
        ok = abs(z) <= 4.0
        exc_ok = exc_ok and ok
        exc_rows.append((row.vertex, row.U, row.mean, row.se, row.predicted,
                         z, ok))
    result = RunResult()
    result.add("theorem21:excursion_means_within_4se", exc_ok,
               f"{len(exc_rows)} vertices, m={report.excursion_m}")
    result.add("theorem21:argmin_certified", report.certified)
    meta = (("sigma2", "%.17g" % report.sigma2),
            ("dinf", "%.17g" % report.dinf),
            ("replicas", str(report.replicas)))
    _emit(out, "theorem21.csv", "theorem21", cfg,
          ("n", "vertex", "U", "measured", "predicted", "ratio"),
          [(r.n, r.vertex, r.U, r.measured, r.predicted, r.ratio)
           for r in report.rows], extra_meta=meta)
    _emit(out, "theorem21_favorites.csv", "theorem21_favorites", cfg,
          ("n", "frequency"),
          list(zip(report.n_grid, report.favorite_frequency)))
    _emit(out, "theorem21_excursions.csv", "theorem21_excursions", cfg,
          ("vertex", "U", "measured_mean", "stderr", "predicted", "z",
           "passed"), exc_rows, extra_meta=(("m", str(report.excursion_m)),))
    return result


def run_corollary22(cfg: RunConfig, out: Path) -> RunResult:
    law = cfg.law()
    table = corollary22_frequency(
        law, cfg.master_seed, n_grid=cfg.n_grid, replicas=cfg.replicas,
        lambda_cap=cfg.lambda_cap, jobs=cfg.jobs)
    result = RunResult()
    result.add("corollary22:favorites_audit", table.audit_ok,
               f"{table.included} included replicas")
    rows = [(n, c, table.included, f, lo, hi) for n, c, f, lo, hi in
            zip(table.n_grid, table.counts, table.frequency,
                table.ci_low, table.ci_high)]
    _emit(out, "corollary22.csv", "corollary22", cfg,
          ("n", "count", "included", "frequency", "ci_low", "ci_high"), rows,
          extra_meta=(("excluded_uncertified", str(table.excluded_uncertified)),
                      ("excluded_extinct", str(table.excluded_extinct)),
                      ("replicas", str(table.replicas))))
    return result


def run_prop23(cfg: RunConfig, out: Path) -> RunResult:
    law = cfg.law()
    table = prop23_diagnostic(law, cfg.eps_grid, cfg.n_grid,
                              replicas=cfg.replicas, seed=cfg.master_seed,
                              jobs=cfg.jobs)
    trend_ok = all(_trend_non_increasing(row, table.replicas_used)
                   for row in table.counts)
    result = RunResult()
    result.add("prop23:trend_non_increasing", trend_ok,
               f"{table.replicas_used} surviving replicas")
    rows = []
    for i, eps in enumerate(table.eps_grid):
        for j, n in enumerate(table.n_grid):
            rows.append((eps, table.thresholds[i], n, table.counts[i][j],
                         table.probability[i][j], table.replicas_used))
    _emit(out, "prop23.csv", "prop23", cfg,
          ("eps", "threshold", "n", "count", "probability", "replicas_used"),
          rows)
    return result


def run_barrier(cfg: RunConfig, out: Path, sum_n_cap: int,
                sum_replicas: int, sum_budget: int) -> RunResult:
    if sum_budget < 1:
        raise UsageError("barrier needs --sum-budget >= 1")
    law = cfg.law()
    gamma = cfg.gamma
    n_grid = cfg.n_grid

    def worker(r):
        tree = MarkedTree(law, make_generator(cfg.master_seed, r, "bar:env"),
                          arena_cap=cfg.arena_cap)
        if not tree.survives_to(SURVIVAL_DEPTH):
            return None
        hits, sums = [], []
        for n in n_grid:
            walk = Walk(tree, make_generator(cfg.master_seed, r, f"bar:move:{n}"),
                        barrier=BarrierConfig(horizon=n, gamma=gamma))
            walk.run(n)
            hits.append(walk.barrier_hit)
            if r < sum_replicas and n <= sum_n_cap:
                sums.append(barrier_sum(tree, n, gamma, max_vertices=sum_budget))
            else:
                sums.append(None)
        return hits, sums

    results = [res for res in _replica_map(worker, cfg.replicas, cfg.jobs)
               if res is not None]
    used = len(results)
    rows = []
    all_usable = True
    any_arena_limited = False
    for j, n in enumerate(n_grid):
        hit_count = sum(1 for hits, _ in results if hits[j])
        sums = [s[j] for _, s in results if s[j] is not None]
        usable = all(bs.converged(rel_tol=1e-2) for bs in sums)
        all_usable = all_usable and usable
        any_arena_limited = any_arena_limited or any(
            bs.arena_limited for bs in sums)
        vals = [bs.value for bs in sums]
        mean = float(np.mean(vals)) if vals else math.nan
        se = (float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
              if len(vals) > 1 else math.nan)
        frontier = max((bs.frontier_mass for bs in sums), default=0.0)
        rows.append((n, gamma, hit_count, used,
                     hit_count / used if used else 0.0, mean, se,
                     len(vals), frontier, usable))
    trend_ok = _trend_non_increasing([row[2] for row in rows], used)
    result = RunResult()
    result.add("barrier:hit_trend_non_increasing", trend_ok,
               f"{used} surviving replicas at gamma={gamma:g}")
    result.add("barrier:sum_truncation_converged", all_usable,
               f"budget {sum_budget} vertices")
    result.partial = result.partial or any_arena_limited
    _emit(out, "barrier.csv", "barrier", cfg,
          ("n", "gamma", "hit_count", "replicas_used", "hit_fraction",
           "sum_mean", "sum_stderr", "sum_replicas", "frontier_mass",
           "converged"), rows,
          extra_meta=(("partial", str(any_arena_limited).lower()),
                      ("sum_budget", str(sum_budget))))
    return result


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchwalk",
        description="simulation and numerical checks for biased walks on "
                    "marked branching trees")
    parser.add_argument("--version", action="version",
                        version=f"branchwalk {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file mirroring RunConfig")
    common.add_argument("--family", choices=("f1", "f2", "f3", "degenerate"),
                        help="law preset override")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--replicas", type=int, help="replica count override")
    common.add_argument("--out", help="output directory override")
    common.add_argument("--jobs", type=int,
                        help="worker threads (or BRANCHWALK_JOBS)")

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("calibrate", parents=[common],
                   help="solve the two boundary equations and emit the law document")

    p = sub.add_parser("simulate", parents=[common],
                       help="run walks and emit per-replica local-time summaries")
    p.add_argument("--n", type=int, required=True, help="steps per walk")
    p.add_argument("--top", type=int, default=20,
                   help="most-visited sites kept per replica")

    p = sub.add_parser("excursions", parents=[common],
                       help="check excursion-sum means against the exact law")
    p.add_argument("--m", type=int, default=1000, help="excursions per sum")
    p.add_argument("--vertices", type=int, default=5,
                   help="lowest-potential vertices to test")
    p.add_argument("--samples", type=int, default=2000,
                   help="independent sums per vertex")

    p = sub.add_parser("spine-check", parents=[common],
                       help="generation-sum identities, persistence slope, stopped sums")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--n-max", type=int, default=3,
                   help="largest generation for the two-sided identity")
    p.add_argument("--b", type=float, default=0.05,
                   help="exponential tilt for the stopped sums")
    p.add_argument("--lambdas", type=float, nargs="+",
                   default=(5.0, 10.0, 20.0, 40.0),
                   help="drop thresholds for the stopped sums")

    sub.add_parser("umin", parents=[common],
                   help="per-replica potential minimizer search with certification")

    p = sub.add_parser("theorem21", parents=[common],
                       help="scaled local times against the potential prediction")
    p.add_argument("--n-grid", type=int, nargs="+", help="walk lengths")
    p.add_argument("--vertices", type=int, default=5)
    p.add_argument("--m", type=int, default=1000, help="excursions per mean")
    p.add_argument("--excursion-replicas", type=int, default=16)

    p = sub.add_parser("corollary22", parents=[common],
                       help="favorite-site containment frequency by walk length")
    p.add_argument("--n-grid", type=int, nargs="+", help="walk lengths")

    p = sub.add_parser("prop23", parents=[common],
                       help="high-potential local-time ceiling probabilities")
    p.add_argument("--n-grid", type=int, nargs="+", help="walk lengths")
    p.add_argument("--eps", type=float, nargs="+", help="ceiling levels")

    p = sub.add_parser("barrier", parents=[common],
                       help="barrier-crossing frequency and restricted weight sums")
    p.add_argument("--n-grid", type=int, nargs="+", help="walk lengths")
    p.add_argument("--gamma", type=float, help="barrier exponent")
    p.add_argument("--sum-n-cap", type=int, default=2000,
                   help="largest n for the weight-sum enumeration")
    p.add_argument("--sum-replicas", type=int, default=4,
                   help="replicas that evaluate the weight sum")
    p.add_argument("--sum-budget", type=int, default=1 << 17,
                   help="vertex budget per weight-sum enumeration")

    p = sub.add_parser("report-data", parents=[common],
                       help="run the selected checks and bundle all artifacts")
    p.add_argument("--checks", nargs="+", choices=KNOWN_CHECKS,
                   help="subset of checks to run")

    return parser


def _dispatch(command: str, cfg: RunConfig, args: argparse.Namespace,
              out: Path) -> RunResult:
    if command == "calibrate":
        return run_calibrate(cfg, out)
    if command == "simulate":
        return run_simulate(cfg, out, args.n, args.top)
    if command == "excursions":
        return run_excursions(cfg, out, args.m, args.vertices, args.samples)
    if command == "spine-check":
        return run_spine_check(cfg, out, args.trials, args.n_max, args.b,
                               args.lambdas)
    if command == "umin":
        return run_umin(cfg, out)
    if command == "theorem21":
        return run_theorem21(cfg, out, args.vertices, args.m,
                             args.excursion_replicas)
    if command == "corollary22":
        return run_corollary22(cfg, out)
    if command == "prop23":
        return run_prop23(cfg, out)
    if command == "barrier":
        return run_barrier(cfg, out, args.sum_n_cap, args.sum_replicas,
                           args.sum_budget)
    if command == "report-data":
        return run_report_data(cfg, out)
    raise UsageError(f"unknown command {command!r}")


def run_report_data(cfg: RunConfig, out: Path) -> RunResult:
    law = cfg.law()
    out.mkdir(parents=True, exist_ok=True)
    law.dump(out / "law.json")
    combined = RunResult()
    combined.checks.extend(run_calibrate(cfg, out).checks)
    for check in cfg.checks:
        if check == "theorem21":
            sub = run_theorem21(cfg, out, vertices=5, m=cfg.m_grid[0],
                                excursion_replicas=16)
        elif check == "corollary22":
            sub = run_corollary22(cfg, out)
        elif check == "prop23":
            sub = run_prop23(cfg, out)
        elif check == "barrier":
            sub = run_barrier(cfg, out, sum_n_cap=2000, sum_replicas=4,
                              sum_budget=1 << 17)
        elif check == "spine":
            sub = run_spine_check(cfg, out, trials=100_000, n_max=3, b=0.05,
                                  lambdas=(5.0, 10.0, 20.0, 40.0))
        else:
            raise UsageError(f"unknown check {check!r}")
        combined.checks.extend(sub.checks)
        combined.partial = combined.partial or sub.partial
    return combined


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = effective_config(args)
        out = Path(cfg.out_dir)
        result = _dispatch(args.command, cfg, args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CalibrationError, DegenerateLawError, ValueError) as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArenaCapacityError, ConditioningError,
            ExtinctEnvironmentError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    _write_summary(out, cfg, args.command, result)
    if result.partial:
        return EXIT_RESOURCE
    return EXIT_OK if result.ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
