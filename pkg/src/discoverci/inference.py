"""Effect intervals after structure search: screening, estimation, unions.

The resampled batch yields M candidate graphs. Screening keeps the
indices whose graph is a valid pattern (optionally under background
knowledge); each kept graph is expanded into its equivalence class,
estimates are grouped by distinct adjustment set, and per-set Wald
intervals at level gamma - nu are merged into a union confidence set.
Two single-selection baselines ship alongside: a plain one-shot search
interval and the interval an all-knowing adjustment would produce.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .discovery import (
    ResampleBatch,
    ResampleConfig,
    fixed_threshold_test,
    pc_stable_tiered,
    resampled_pc_runs,
)
from .exceptions import EnumerationOverflowError, NoValidGraphsError, SingularityError
from .graphs import (
    BackgroundKnowledge,
    Dag,
    DEFAULT_ENUMERATION_CAP,
    MixedGraph,
    TierOrder,
    enumerate_dags,
    is_valid_cpdag,
)
from .stats import (
    DataMatrix,
    EffectEstimate,
    correlation_from_data,
    normal_quantile,
    ols_effect,
)

ADJUST_PARENTS = "parents-only"
ADJUST_TIER_BLOCK = "parents-plus-tier-block"


@dataclass(frozen=True)
class Interval:
    """A closed interval with finite endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class IntervalUnion:
    """Disjoint sorted closed intervals with their hull and total measure.

    Touching intervals merge: [0, 1] and [1, 2] become [0, 2], matching
    the closed-set union.
    """

    parts: tuple
    hull: Interval
    total_length: float

    @classmethod
    def from_intervals(cls, intervals: Iterable[Interval]) -> "IntervalUnion":
        pool = sorted(intervals, key=lambda iv: (iv.lo, iv.hi))
        if not pool:
            raise ValueError("cannot build a union of zero intervals")
        merged = [pool[0]]
        for iv in pool[1:]:
            last = merged[-1]
            if iv.lo <= last.hi:
                if iv.hi > last.hi:
                    merged[-1] = Interval(last.lo, iv.hi)
            else:
                merged.append(iv)
        total = sum(iv.length for iv in merged)
        return cls(
            parts=tuple(merged),
            hull=Interval(merged[0].lo, merged[-1].hi),
            total_length=total,
        )

    def contains(self, x: float) -> bool:
        return any(iv.contains(x) for iv in self.parts)

    def __len__(self) -> int:
        return len(self.parts)


def wald_interval(beta: float, se: float, alpha: float) -> Interval:
    """Two-sided normal interval beta +/- z_{alpha/2} * se."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    half = normal_quantile(1.0 - alpha / 2.0) * se
    return Interval(beta - half, beta + half)


# ---------------------------------------------------------------------------
# screening and per-graph estimation
# ---------------------------------------------------------------------------


def screen(
    batch: ResampleBatch,
    level: str = "strict",
    bk: Optional[BackgroundKnowledge] = None,
    tiers: Optional[TierOrder] = None,
) -> tuple:
    """Indices of runs whose graph passes validity screening."""
    return tuple(
        m
        for m, res in enumerate(batch.results)
        if is_valid_cpdag(res.graph, level=level, bk=bk, tiers=tiers)
    )


def _adjust_sets_for_graph(
    c: MixedGraph,
    exposure: int,
    outcome: int,
    adjust_policy: str,
    tiers: Optional[TierOrder],
    cap: int,
    scope: Optional[frozenset] = None,
):
    """Distinct adjustment sets with DAG multiplicities, plus overflow flag.

    Groups the enumerated class by the adjustment set the policy
    produces; the estimator depends on the graph only through that set,
    so duplicates are estimated once and carry their count.

    With a ``scope``, only the induced subgraph over it is enumerated,
    since marks outside the scope were never screened and may be
    incoherent. Out-of-scope neighbors pointing into the exposure are
    parents in every member of the class (cross-tier edges are always
    tier-forced), so they join each parent set unconditionally.
    """
    if adjust_policy not in (ADJUST_PARENTS, ADJUST_TIER_BLOCK):
        raise ValueError(f"unknown adjust_policy {adjust_policy!r}")
    if adjust_policy == ADJUST_TIER_BLOCK and tiers is None:
        raise ValueError("tier-block adjustment needs a tier assignment")

    overflow = False
    if scope is not None:
        if exposure not in scope or outcome not in scope:
            raise ValueError("exposure and outcome must lie inside the validity scope")
        sub, keep = c.induced(scope)
        try:
            dags = enumerate_dags(sub, cap=cap)
        except EnumerationOverflowError as err:
            dags = err.partial
            overflow = True
        sub_exposure = keep.index(exposure)
        fixed = frozenset(
            v for v in range(c.d) if v not in scope and c.has_directed(v, exposure)
        )
        parent_sets = [
            frozenset(keep[p] for p in dag.parent_sets[sub_exposure]) | fixed
            for dag in dags
        ]
    else:
        try:
            dags = enumerate_dags(c, cap=cap)
        except EnumerationOverflowError as err:
            dags = err.partial
            overflow = True
        parent_sets = [frozenset(dag.parent_sets[exposure]) for dag in dags]

    earlier: frozenset = frozenset()
    if adjust_policy == ADJUST_TIER_BLOCK:
        t_exp = tiers.tiers[exposure]
        earlier = frozenset(v for v in range(c.d) if tiers.tiers[v] < t_exp)

    counts: dict[frozenset, int] = {}
    for a in parent_sets:
        adjust = (a | earlier) - {outcome, exposure}
        counts[adjust] = counts.get(adjust, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: tuple(sorted(kv[0])))
    return ordered, overflow


def estimates_for_graph(
    x: DataMatrix,
    c: MixedGraph,
    exposure: int,
    outcome: int,
    adjust_policy: str = ADJUST_PARENTS,
    tiers: Optional[TierOrder] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    scope: Optional[frozenset] = None,
) -> list:
    """One effect estimate per distinct adjustment set in c's class.

    Enumerates the DAGs the pattern represents, reads off the exposure's
    parents in each, applies the adjustment policy (parents only, or
    parents plus every node in a strictly earlier tier), and regresses
    once per distinct resulting set. Singular adjustment sets are
    skipped with a warning. If enumeration overflows the cap, estimates
    for the partial class are attached to the raised error.

    ``scope`` restricts enumeration to the induced subgraph over those
    nodes, matching screening that was limited to the same scope; both
    endpoints must then lie inside it.
    """
    if exposure == outcome:
        raise ValueError("exposure and outcome must differ")
    ordered, overflow = _adjust_sets_for_graph(
        c, exposure, outcome, adjust_policy, tiers, cap, scope
    )
    out = []
    for adjust, count in ordered:
        try:
            est = ols_effect(x, exposure, outcome, sorted(adjust))
        except SingularityError:
            warnings.warn(
                f"adjustment set {sorted(adjust)} skipped: singular design",
                stacklevel=2,
            )
            continue
        out.append(replace(est, dag_count=count))
    if overflow:
        raise EnumerationOverflowError(partial=out, cap=cap)
    return out


def aggregate_ci(estimates: Iterable[EffectEstimate], gamma: float, nu: float) -> IntervalUnion:
    """Merge per-estimate Wald intervals at level gamma - nu.

    The screening step spends nu of the error budget, so each interval
    is widened to level alpha1 = gamma - nu before the union.
    """
    if not 0.0 < nu < gamma < 1.0:
        raise ValueError("need 0 < nu < gamma < 1")
    estimates = list(estimates)
    if not estimates:
        raise NoValidGraphsError()
    alpha1 = gamma - nu
    return IntervalUnion.from_intervals(
        wald_interval(e.beta, e.se, alpha1) for e in estimates
    )


# ---------------------------------------------------------------------------
# the full report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregationReport:
    """Everything the union confidence set run produced.

    ``per_graph_estimates`` maps each kept run index to the estimate
    list of its graph; identical graphs across runs share the same
    estimates.
    """

    kept_indices: tuple
    total_runs: int
    per_graph_estimates: tuple
    ci_union: IntervalUnion
    gamma: float
    nu: float
    alpha1: float
    enumeration_overflow: bool

    @property
    def kept_fraction(self) -> float:
        return len(self.kept_indices) / self.total_runs

    def distinct_estimates(self) -> list:
        seen = set()
        out = []
        for _, ests in self.per_graph_estimates:
            for e in ests:
                key = (e.beta, e.se, e.adjust_set)
                if key not in seen:
                    seen.add(key)
                    out.append(e)
        return out

    def to_json_dict(self) -> dict:
        return {
            "kept_indices": list(self.kept_indices),
            "kept_count": len(self.kept_indices),
            "total_runs": self.total_runs,
            "kept_fraction": self.kept_fraction,
            "gamma": self.gamma,
            "nu": self.nu,
            "alpha1": self.alpha1,
            "enumeration_overflow": self.enumeration_overflow,
            "per_graph_estimates": [
                {
                    "run_index": m,
                    "estimates": [
                        {
                            "beta": e.beta,
                            "se": e.se,
                            "adjust": sorted(e.adjust_set),
                            "dag_count": e.dag_count,
                        }
                        for e in ests
                    ],
                }
                for m, ests in self.per_graph_estimates
            ],
            "interval_union": {
                "parts": [[iv.lo, iv.hi] for iv in self.ci_union.parts],
                "hull": [self.ci_union.hull.lo, self.ci_union.hull.hi],
                "total_length": self.ci_union.total_length,
            },
        }


def effect_union_report(
    x: DataMatrix,
    batch: ResampleBatch,
    exposure: int,
    outcome: int,
    gamma: float,
    tiers: Optional[TierOrder] = None,
    bk: Optional[BackgroundKnowledge] = None,
    validity_level: str = "strict",
    adjust_policy: str = ADJUST_PARENTS,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> AggregationReport:
    """Screen a batch, estimate per kept graph, and merge the intervals.

    Raises
    ------
    NoValidGraphsError
        When screening keeps nothing, or every kept graph's estimates
        were skipped. The error carries the (c_star, kept fraction)
        table for reporting.
    """
    nu = batch.config.nu
    if not nu < gamma < 1.0:
        raise ValueError("need nu < gamma < 1")
    kept = screen(batch, level=validity_level, bk=bk, tiers=tiers)
    kept_table = ((batch.config.c_star, len(kept) / len(batch.results)),)
    if not kept:
        raise NoValidGraphsError(kept_table=kept_table)

    scope = bk.validity_scope if bk is not None else None
    by_graph: dict[MixedGraph, tuple] = {}
    overflow = False
    for m in kept:
        g = batch.results[m].graph
        if g not in by_graph:
            try:
                ests = estimates_for_graph(
                    x, g, exposure, outcome, adjust_policy, tiers, cap, scope
                )
            except EnumerationOverflowError as err:
                ests = err.partial
                overflow = True
            by_graph[g] = tuple(ests)

    per_graph = tuple((m, by_graph[batch.results[m].graph]) for m in kept)
    all_estimates = [e for _, ests in per_graph for e in ests]
    if not all_estimates:
        raise NoValidGraphsError(kept_table=kept_table)
    union = aggregate_ci(all_estimates, gamma, nu)
    return AggregationReport(
        kept_indices=kept,
        total_runs=len(batch.results),
        per_graph_estimates=per_graph,
        ci_union=union,
        gamma=gamma,
        nu=nu,
        alpha1=gamma - nu,
        enumeration_overflow=overflow,
    )


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def naive_ci(
    x: DataMatrix,
    alpha: float,
    gamma: float,
    exposure: int,
    outcome: int,
    tiers: Optional[TierOrder] = None,
    bk: Optional[BackgroundKnowledge] = None,
    max_cond_size: Optional[int] = None,
    adjust_policy: str = ADJUST_PARENTS,
    validity_level: str = "strict",
    cap: int = DEFAULT_ENUMERATION_CAP,
    half_factor: bool = True,
) -> Optional[IntervalUnion]:
    """Single-search union interval that treats the selected graph as known.

    Runs the search once at significance level alpha, and, if the output
    is a valid pattern, unions the per-adjustment-set Wald intervals at
    level gamma with no selection correction. Returns None when the
    selected graph is invalid or yields no estimates; callers count
    those runs separately.
    """
    stats = correlation_from_data(x)
    threshold = normal_quantile(1.0 - alpha / 2.0)
    test = fixed_threshold_test(stats, threshold, max_cond_size, half_factor)
    if tiers is None:
        tiers = TierOrder.trivial(x.d)
    res = pc_stable_tiered(test, tiers, bk=bk, max_cond_size=max_cond_size)
    if not is_valid_cpdag(res.graph, level=validity_level, bk=bk, tiers=tiers):
        return None
    scope = bk.validity_scope if bk is not None else None
    try:
        ests = estimates_for_graph(
            x, res.graph, exposure, outcome, adjust_policy, tiers, cap, scope
        )
    except EnumerationOverflowError as err:
        ests = err.partial
    if not ests:
        return None
    return IntervalUnion.from_intervals(
        wald_interval(e.beta, e.se, gamma) for e in ests
    )


def oracle_ci(
    x: DataMatrix,
    g_true: Dag,
    gamma: float,
    exposure: int,
    outcome: int,
) -> Interval:
    """Wald interval adjusting for the exposure's true parents."""
    adjust = sorted(g_true.parent_sets[exposure] - {outcome})
    est = ols_effect(x, exposure, outcome, adjust)
    return wald_interval(est.beta, est.se, gamma)


# ---------------------------------------------------------------------------
# shrinkage-scale selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeuristicResult:
    """Outcome of the kept-fraction scan over a shrinkage-scale grid.

    ``chosen`` is None when no grid point kept any graph, in which case
    ``chosen_batch`` is None too. ``table`` always holds one
    (c_star, kept fraction) row per grid point.
    """

    chosen: Optional[float]
    table: tuple
    chosen_batch: Optional[ResampleBatch]


def c_star_heuristic(
    stats,
    grid: Iterable[float],
    cfg_template: ResampleConfig,
    tiers: Optional[TierOrder] = None,
    bk: Optional[BackgroundKnowledge] = None,
    validity_level: str = "strict",
) -> HeuristicResult:
    """Pick the shrinkage scale that minimizes the kept-graph fraction.

    Runs the full resampled batch at every grid point, screens it, and
    returns the point with the smallest positive kept fraction (ties go
    to the smallest scale). Grid points keeping zero graphs cannot
    support inference and are recorded in the table but never chosen.
    """
    grid = sorted(set(float(c) for c in grid))
    if not grid:
        raise ValueError("grid must be nonempty")
    table = []
    best = None  # (fraction, c_star, batch)
    for c in grid:
        cfg = replace(cfg_template, c_star=c)
        batch = resampled_pc_runs(stats, cfg, tiers=tiers, bk=bk)
        kept = screen(batch, level=validity_level, bk=bk, tiers=tiers)
        frac = len(kept) / len(batch.results)
        table.append((c, frac))
        if frac > 0.0 and (best is None or (frac, c) < (best[0], best[1])):
            best = (frac, c, batch)
    if best is None:
        return HeuristicResult(chosen=None, table=tuple(table), chosen_batch=None)
    return HeuristicResult(chosen=best[1], table=tuple(table), chosen_batch=best[2])
