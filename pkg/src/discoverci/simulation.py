"""Synthetic ground truths and the benchmark harness.

Random DAGs over a fixed topological order, linear structural equation
models with scaled weights, exact total-effect computation, and the
replicated coverage/length experiment comparing the resampled union
interval against the single-selection and known-graph baselines.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .discovery import ResampleConfig, resampled_pc_runs
from .exceptions import NoValidGraphsError
from .graphs import BackgroundKnowledge, Dag, TierOrder
from .inference import (
    ADJUST_PARENTS,
    c_star_heuristic,
    effect_union_report,
    naive_ci,
    oracle_ci,
)
from .stats import DataMatrix, correlation_from_data

BENCH_CSV_COLUMNS = (
    "scenario",
    "method",
    "c_star",
    "M",
    "n",
    "coverage",
    "avg_length_union",
    "avg_length_hull",
    "kept_pct",
    "no_interval_pct",
    "replicates",
    "seed",
)


# ---------------------------------------------------------------------------
# ground-truth generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedDag:
    """A DAG together with one weight per edge."""

    dag: Dag
    weights: dict

    def __post_init__(self):
        keys = frozenset(self.weights)
        if keys != frozenset(self.dag.edges):
            raise ValueError("weights must cover exactly the DAG's edges")

    def weight_matrix(self) -> np.ndarray:
        a = np.zeros((self.dag.d, self.dag.d))
        for (i, j), w in self.weights.items():
            a[i, j] = w
        return a


def random_dag(d: int, expected_neighbors: float, rng: np.random.Generator) -> Dag:
    """Random DAG over the identity order with a target expected degree.

    Each forward pair (i, j), i < j, is an edge independently with
    probability expected_neighbors / (d - 1), making the expected number
    of neighbors per node equal to the target.
    """
    if not 0 < expected_neighbors <= d - 1:
        raise ValueError("expected_neighbors must lie in (0, d-1]")
    p = expected_neighbors / (d - 1)
    draws = rng.random(d * (d - 1) // 2)
    edges = []
    t = 0
    for i in range(d):
        for j in range(i + 1, d):
            if draws[t] < p:
                edges.append((i, j))
            t += 1
    return Dag(d, edges)


def draw_and_scale_weights(dag: Dag, rng: np.random.Generator) -> WeightedDag:
    """Draw edge weights from +/- Uniform(0.5, 1) and rescale per child.

    Raw magnitudes lie in (0.5, 1) with a random sign; each child's
    incoming weights are then divided by the square root of one plus
    their summed squares, which keeps every child's explained variance
    below its noise variance.
    """
    raw: dict = {}
    for edge in sorted(dag.edges):
        mag = float(rng.uniform(0.5, 1.0))
        sign = -1.0 if rng.random() < 0.5 else 1.0
        raw[edge] = sign * mag
    weights: dict = {}
    for j in range(dag.d):
        incoming = [(k, j) for k in sorted(dag.parent_sets[j])]
        if not incoming:
            continue
        denom = math.sqrt(sum(raw[e] ** 2 for e in incoming) + 1.0)
        for e in incoming:
            weights[e] = raw[e] / denom
    return WeightedDag(dag=dag, weights=weights)


def sample_sem(wd: WeightedDag, n: int, rng: np.random.Generator) -> DataMatrix:
    """Sample the linear structural model with unit normal noise."""
    if n < 1:
        raise ValueError("need at least one sample")
    d = wd.dag.d
    x = np.empty((n, d))
    for v in wd.dag.topological_order:
        x[:, v] = rng.standard_normal(n)
        for p in sorted(wd.dag.parent_sets[v]):
            x[:, v] += wd.weights[(p, v)] * x[:, p]
    return DataMatrix(x)


def true_effect(wd: WeightedDag, exposure: int, outcome: int) -> float:
    """Exact total causal effect of exposure on outcome.

    Sum over all directed paths of the product of edge weights, computed
    as the (exposure, outcome) entry of the geometric series of the
    weighted adjacency matrix. Cross-validated on every call against the
    population regression coefficient of the outcome on the exposure
    given the exposure's parents; a disagreement beyond 1e-10 means the
    weighted graph is inconsistent and raises.
    """
    d = wd.dag.d
    if not (0 <= exposure < d and 0 <= outcome < d) or exposure == outcome:
        raise ValueError("exposure and outcome must be distinct valid nodes")

    # no directed path means an exactly zero effect, and skipping the
    # algebra keeps the regression check in its domain of validity: a
    # reachable outcome is a descendant, never a parent of the exposure
    reached = {exposure}
    frontier = [exposure]
    while frontier:
        v = frontier.pop()
        for p, c in wd.weights:
            if p == v and c not in reached:
                reached.add(c)
                frontier.append(c)
    if outcome not in reached:
        return 0.0

    a = wd.weight_matrix()
    series = np.linalg.solve(np.eye(d) - a, np.eye(d))
    effect = float(series[exposure, outcome])

    # population covariance of the SEM: X = A^T X + eps
    b = np.linalg.solve(np.eye(d) - a.T, np.eye(d))
    sigma = b @ b.T
    regressors = [exposure] + sorted(wd.dag.parent_sets[exposure])
    sub = sigma[np.ix_(regressors, regressors)]
    rhs = sigma[regressors, outcome]
    coef = float(np.linalg.solve(sub, rhs)[0])
    if abs(coef - effect) > 1e-10:
        raise RuntimeError(
            f"effect cross-check failed: series {effect} vs regression {coef}"
        )
    return effect


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """One benchmark scenario: a ground-truth family plus pipeline knobs.

    ``c_star`` fixes the shrinkage scale; ``c_star_grid`` instead picks
    it per replicate by the kept-fraction heuristic. Exactly one of the
    two must be set when the resample method runs.
    """

    scenario: str
    d: int
    expected_neighbors: float
    n: int
    n_resamples: int
    nu: float
    gamma: float
    max_adj: int
    exposure: int
    outcome: int
    replicates: int
    master_seed: int
    c_star: Optional[float] = None
    c_star_grid: Optional[tuple] = None
    tiers: Optional[TierOrder] = None
    bk: Optional[BackgroundKnowledge] = None
    max_cond_size: Optional[int] = None
    truncation: Optional[float] = None
    half_factor: bool = True
    adjust_policy: str = ADJUST_PARENTS
    naive_alphas: tuple = (0.01, 0.05)
    methods: tuple = ("resample", "naive", "oracle")

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if self.exposure == self.outcome:
            raise ValueError("exposure and outcome must differ")
        if "resample" in self.methods:
            if (self.c_star is None) == (self.c_star_grid is None):
                raise ValueError("set exactly one of c_star and c_star_grid")
        if self.tiers is not None:
            if self.tiers.d != self.d:
                raise ValueError("tier vector length must equal d")
            if self.tiers.tiers[self.exposure] > self.tiers.tiers[self.outcome]:
                raise ValueError("exposure must not lie in a later tier than outcome")
        unknown = set(self.methods) - {"resample", "naive", "oracle"}
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def resample_config(self, c_star: float, master_seed: int) -> ResampleConfig:
        return ResampleConfig(
            n_resamples=self.n_resamples,
            c_star=c_star,
            nu=self.nu,
            max_adj=self.max_adj,
            max_cond_size=self.max_cond_size,
            truncation=self.truncation,
            master_seed=master_seed,
            half_factor=self.half_factor,
        )


@dataclass(frozen=True)
class BenchRecord:
    """One aggregated row of a benchmark: a (scenario, method) cell."""

    scenario: str
    method: str
    c_star: Optional[float]
    n_resamples: int
    n: int
    coverage: float
    avg_length_union: float
    avg_length_hull: float
    kept_pct: float
    no_interval_pct: float
    replicates: int
    seed: int


@dataclass(frozen=True)
class ReplicateOutcome:
    """One method's result on one replicate.

    ``covered``/lengths are None when no interval was produced;
    ``kept_fraction`` is None for methods without screening.
    """

    covered: Optional[bool]
    length_union: Optional[float]
    length_hull: Optional[float]
    kept_fraction: Optional[float] = None
    c_star: Optional[float] = None


def replicate_seed(master_seed: int, rep: int) -> int:
    """Derived integer seed for one replicate, stable across platforms."""
    ss = np.random.SeedSequence([int(master_seed), int(rep)])
    return int(ss.generate_state(1, np.uint64)[0])


def _run_replicate(cfg: ScenarioConfig, rep: int) -> dict:
    """All methods on one fresh draw of (DAG, weights, data)."""
    seed = replicate_seed(cfg.master_seed, rep)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, rep, 1]))
    dag = random_dag(cfg.d, cfg.expected_neighbors, rng)
    wd = draw_and_scale_weights(dag, rng)
    x = sample_sem(wd, cfg.n, rng)
    truth = true_effect(wd, cfg.exposure, cfg.outcome)
    tiers = cfg.tiers if cfg.tiers is not None else TierOrder.trivial(cfg.d)

    out: dict = {}
    if "resample" in cfg.methods:
        stats = correlation_from_data(x)
        if cfg.c_star_grid is not None:
            pick = c_star_heuristic(
                stats,
                cfg.c_star_grid,
                cfg.resample_config(cfg.c_star_grid[0], seed),
                tiers=tiers,
                bk=cfg.bk,
            )
            batch = pick.chosen_batch
            used_c = pick.chosen
        else:
            batch = resampled_pc_runs(
                stats, cfg.resample_config(cfg.c_star, seed), tiers=tiers, bk=cfg.bk
            )
            used_c = cfg.c_star
        if batch is None:
            out["resample"] = ReplicateOutcome(None, None, None, 0.0, None)
        else:
            try:
                report = effect_union_report(
                    x,
                    batch,
                    cfg.exposure,
                    cfg.outcome,
                    cfg.gamma,
                    tiers=tiers,
                    bk=cfg.bk,
                    adjust_policy=cfg.adjust_policy,
                )
                out["resample"] = ReplicateOutcome(
                    covered=report.ci_union.contains(truth),
                    length_union=report.ci_union.total_length,
                    length_hull=report.ci_union.hull.length,
                    kept_fraction=report.kept_fraction,
                    c_star=used_c,
                )
            except NoValidGraphsError as err:
                frac = err.kept_table[0][1] if err.kept_table else 0.0
                out["resample"] = ReplicateOutcome(None, None, None, frac, used_c)

    if "naive" in cfg.methods:
        for alpha in cfg.naive_alphas:
            union = naive_ci(
                x,
                alpha,
                cfg.gamma,
                cfg.exposure,
                cfg.outcome,
                tiers=tiers,
                bk=cfg.bk,
                max_cond_size=cfg.max_cond_size
                if cfg.max_cond_size is not None
                else cfg.max_adj,
                adjust_policy=cfg.adjust_policy,
                half_factor=cfg.half_factor,
            )
            key = f"naive({alpha:g})"
            if union is None:
                out[key] = ReplicateOutcome(None, None, None, 0.0, None)
            else:
                out[key] = ReplicateOutcome(
                    covered=union.contains(truth),
                    length_union=union.total_length,
                    length_hull=union.hull.length,
                    kept_fraction=1.0,
                )

    if "oracle" in cfg.methods:
        iv = oracle_ci(x, dag, cfg.gamma, cfg.exposure, cfg.outcome)
        out["oracle"] = ReplicateOutcome(
            covered=iv.contains(truth),
            length_union=iv.length,
            length_hull=iv.length,
            kept_fraction=None,
        )
    return out


def aggregate_outcomes(
    scenario: str,
    method: str,
    outcomes: Iterable[ReplicateOutcome],
    cfg: ScenarioConfig,
    c_star: Optional[float],
) -> BenchRecord:
    """Fold per-replicate outcomes into one benchmark row.

    Replicates without an interval enter neither the coverage numerator
    nor its denominator; their frequency is reported separately.
    """
    outcomes = list(outcomes)
    total = len(outcomes)
    with_interval = [o for o in outcomes if o.covered is not None]
    n_cov = len(with_interval)
    coverage = (
        sum(1 for o in with_interval if o.covered) / n_cov if n_cov else math.nan
    )
    avg_union = (
        sum(o.length_union for o in with_interval) / n_cov if n_cov else math.nan
    )
    avg_hull = (
        sum(o.length_hull for o in with_interval) / n_cov if n_cov else math.nan
    )
    kept_vals = [o.kept_fraction for o in outcomes if o.kept_fraction is not None]
    kept_pct = 100.0 * sum(kept_vals) / len(kept_vals) if kept_vals else math.nan
    return BenchRecord(
        scenario=scenario,
        method=method,
        c_star=c_star,
        n_resamples=cfg.n_resamples,
        n=cfg.n,
        coverage=coverage,
        avg_length_union=avg_union,
        avg_length_hull=avg_hull,
        kept_pct=kept_pct,
        no_interval_pct=100.0 * (total - n_cov) / total,
        replicates=total,
        seed=cfg.master_seed,
    )


def run_scenario(cfg: ScenarioConfig, jobs: int = 1, return_details: bool = False):
    """Run every replicate and aggregate one record per method.

    Replicates are independent jobs; with ``jobs`` > 1 they execute on a
    process pool, and results are always folded in replicate order, so
    the output is bit-identical for any worker count.
    """
    if jobs < 1:
        raise ValueError("jobs must be positive")
    reps = range(cfg.replicates)
    if jobs == 1:
        per_rep = [_run_replicate(cfg, r) for r in reps]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_rep = list(pool.map(_run_replicate, [cfg] * cfg.replicates, reps))

    methods: list[str] = []
    if "resample" in cfg.methods:
        methods.append("resample")
    if "naive" in cfg.methods:
        methods.extend(f"naive({a:g})" for a in cfg.naive_alphas)
    if "oracle" in cfg.methods:
        methods.append("oracle")

    records = []
    for method in methods:
        outcomes = [d[method] for d in per_rep]
        if method == "resample":
            c_star = cfg.c_star  # None under the per-replicate heuristic
        else:
            c_star = None
        records.append(aggregate_outcomes(cfg.scenario, method, outcomes, cfg, c_star))
    if return_details:
        return records, per_rep
    return records


def sweep_c_star(cfg: ScenarioConfig, grid: Iterable[float], jobs: int = 1):
    """One fixed-c* scenario per grid point, sharing replicate data.

    Replicate seeds depend only on (master_seed, replicate), so every
    grid point sees identical DAGs and datasets; baselines are computed
    once on the first point.
    """
    grid = [float(c) for c in grid]
    if not grid:
        raise ValueError("grid must be nonempty")
    records = []
    for idx, c in enumerate(grid):
        methods = cfg.methods if idx == 0 else ("resample",)
        sub = replace(cfg, c_star=c, c_star_grid=None, methods=methods)
        records.extend(run_scenario(sub, jobs=jobs))
    return records


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_bench_csv(records: Iterable[BenchRecord], fh) -> None:
    """Write records as tidy CSV with the fixed column set."""
    w = csv.writer(fh)
    w.writerow(BENCH_CSV_COLUMNS)
    for r in records:
        w.writerow(
            [
                _format_cell(v)
                for v in (
                    r.scenario,
                    r.method,
                    r.c_star,
                    r.n_resamples,
                    r.n,
                    r.coverage,
                    r.avg_length_union,
                    r.avg_length_hull,
                    r.kept_pct,
                    r.no_interval_pct,
                    r.replicates,
                    r.seed,
                )
            ]
        )


def read_bench_csv(fh) -> list:
    """Read back what write_bench_csv produced."""
    rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != BENCH_CSV_COLUMNS:
        raise ValueError("not a benchmark CSV: unexpected header")
    out = []
    for row in rows[1:]:
        if len(row) != len(BENCH_CSV_COLUMNS):
            raise ValueError(f"malformed benchmark CSV row: {row!r}")
        out.append(
            BenchRecord(
                scenario=row[0],
                method=row[1],
                c_star=float(row[2]) if row[2] else None,
                n_resamples=int(row[3]),
                n=int(row[4]),
                coverage=float(row[5]),
                avg_length_union=float(row[6]),
                avg_length_hull=float(row[7]),
                kept_pct=float(row[8]),
                no_interval_pct=float(row[9]),
                replicates=int(row[10]),
                seed=int(row[11]),
            )
        )
    return out


def bench_csv_string(records: Iterable[BenchRecord]) -> str:
    buf = io.StringIO()
    write_bench_csv(records, buf)
    return buf.getvalue()
