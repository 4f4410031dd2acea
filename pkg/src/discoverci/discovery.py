"""Constraint-based structure discovery with tiers, and its resampled runs.

Two layers live here. ``pc_stable_tiered`` is an order-independent
constraint-based search over a pluggable conditional-independence test:
adjacency sets are snapshotted per level so deletion order inside a
level cannot change the skeleton, temporal tiers prune conditioning
sets that lie in the future of both endpoints, and orientation respects
tiers and forbidden directions.

``resampled_pc_runs`` repeats that search M times, each time perturbing
every test statistic with one standard normal draw (optionally
truncated) and comparing against a fixed shrinking threshold. Draws are
addressed by (master seed, run, pair, conditioning-set) keys, so the
whole batch is deterministic and any single decision can be replayed in
isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .exceptions import DegreesOfFreedomError, SingularityError
from .graphs import (
    BackgroundKnowledge,
    Dag,
    MixedGraph,
    SepsetTable,
    TierOrder,
    _pair_index,
    apply_meek_rules,
    d_separated,
    orient_v_structures,
)
from .stats import (
    GaussianSuffStats,
    KeyedRng,
    _pcorr_from_inverse,
    fisher_z,
    keyed_uniform_array,
    mix64_array,
    noise_from_uniform_array,
    normal_quantile,
    resample_statistic,
    run_hash,
    submatrix_inverse,
)

INDEPENDENT = "independent"
DEPENDENT = "dependent"
CANNOT_TEST = "cannot_test"

_STATUS_OK = 0
_STATUS_DOF = 1
_STATUS_SINGULAR = 2

_DENSE_LIMIT = 13  # above this, per-pair mask tables switch to dicts


# ---------------------------------------------------------------------------
# threshold constants
# ---------------------------------------------------------------------------


def max_test_count(d: int, max_adj: int) -> int:
    """Upper bound on independence tests in one search run.

    d(d-1)/2 ordered-pair hypotheses times (max_adj + 1) conditioning
    levels. This constant calibrates the per-test significance split.

    Examples
    --------
    >>> max_test_count(10, 7)
    360
    """
    if d < 2 or max_adj < 0:
        raise ValueError("need d >= 2 and max_adj >= 0")
    return d * (d - 1) // 2 * (max_adj + 1)


def threshold_shrinkage(c_star: float, n, n_resamples: int, bound: int) -> float:
    """The factor c* (ln n / M)^(1/bound), evaluated in log domain.

    Shrinks the rejection threshold as the number of resampled runs M
    grows, the engine behind the coverage guarantee.
    """
    if c_star <= 0 or n < 2 or n_resamples < 1 or bound < 1:
        raise ValueError("invalid shrinkage inputs")
    return c_star * math.exp(math.log(math.log(n) / n_resamples) / bound)


def recovery_error_bound(n, n_resamples: int, nu: float, bound: int) -> float:
    """Diagnostic bound on the graph-recovery error term.

    (1/2) (2 ln n / (c M))^(1/bound) with
    c = (2 pi)^(-bound/2) exp(-(bound/2) z^2), z the 1 - nu/(2 bound)
    normal quantile. Evaluated fully in log domain: for realistic bounds
    (hundreds) the constant c underflows double precision.
    """
    if not 0.0 < nu < 0.5:
        raise ValueError("nu must lie in (0, 1/2)")
    if n < 2 or n_resamples < 1 or bound < 1:
        raise ValueError("invalid inputs")
    z = normal_quantile(1.0 - nu / (2.0 * bound))
    log_c = -(bound / 2.0) * (math.log(2.0 * math.pi) + z * z)
    log_err = -math.log(2.0) + (math.log(2.0 * math.log(n)) - log_c - math.log(n_resamples)) / bound
    return math.exp(log_err)


# ---------------------------------------------------------------------------
# conditional-independence tests
# ---------------------------------------------------------------------------


class OracleCiTest:
    """Perfect test answering from d-separation in a known DAG.

    The returned statistic is an indicator (0 when independent, 1 when
    dependent); only the decision matters for an oracle.
    """

    def __init__(self, dag: Dag):
        self.dag = dag

    def decide(self, i: int, j: int, s: Iterable[int]):
        if d_separated(self.dag, i, j, frozenset(s)):
            return INDEPENDENT, 0.0
        return DEPENDENT, 1.0


class FisherZTest:
    """Gaussian conditional-independence test on sufficient statistics.

    Configure with either a significance level ``alpha`` (two-sided
    normal quantile threshold) or a fixed ``threshold`` on |z|. Too few
    degrees of freedom or a singular submatrix yield "cannot_test",
    which the search treats as "keep the edge".
    """

    def __init__(
        self,
        stats: GaussianSuffStats,
        alpha: Optional[float] = None,
        threshold: Optional[float] = None,
        half_factor: bool = True,
    ):
        if (alpha is None) == (threshold is None):
            raise ValueError("give exactly one of alpha or threshold")
        if alpha is not None:
            if not 0.0 < alpha < 1.0:
                raise ValueError("alpha must lie in (0, 1)")
            threshold = normal_quantile(1.0 - alpha / 2.0)
        elif threshold < 0.0:
            raise ValueError("threshold must be nonnegative")
        self.stats = stats
        self.threshold = float(threshold)
        self.half_factor = half_factor
        self.clamp_count = 0

    def decide(self, i: int, j: int, s: Iterable[int]):
        # canonical endpoint order: the inverse is only symmetric up to
        # rounding, and the decision must be bitwise symmetric in (i, j)
        a, b = (i, j) if i < j else (j, i)
        cond = frozenset(s)
        subset = tuple(sorted({int(a), int(b)} | cond))
        try:
            P = submatrix_inverse(self.stats.corr, subset)
        except SingularityError:
            return CANNOT_TEST, 0.0
        rho, clamped = _pcorr_from_inverse(P, subset.index(a), subset.index(b))
        self.clamp_count += clamped
        try:
            z = fisher_z(rho, self.stats.n, len(cond), self.half_factor)
        except DegreesOfFreedomError:
            return CANNOT_TEST, 0.0
        return (DEPENDENT if abs(z) > self.threshold else INDEPENDENT), z


@lru_cache(maxsize=200_000)
def _subsets_and_masks(cands: tuple, size: int):
    """All size-``size`` subsets of ``cands`` plus their bitmask keys."""
    subs = tuple(combinations(cands, size))
    masks = tuple(sum(1 << v for v in sub) for sub in subs)
    return subs, masks


def _scan_with_decide(test, i: int, j: int, cands: tuple, size: int):
    """Sequential scan over conditioning sets using only decide()."""
    cannot = 0
    tested = 0
    for sub in combinations(cands, size):
        tested += 1
        code, _ = test.decide(i, j, sub)
        if code == INDEPENDENT:
            return sub, tested, cannot
        if code == CANNOT_TEST:
            cannot += 1
    return None, tested, cannot


# ---------------------------------------------------------------------------
# precomputed statistic table for resampled runs
# ---------------------------------------------------------------------------


class _StatisticTable:
    """Every z statistic a capped search could request, computed once.

    For each variable subset W with 2 <= |W| <= max_cond_size + 2 the
    correlation submatrix is inverted once, filling the statistic for
    every pair inside W conditioned on the rest of W. Entries carry a
    status: usable, too few degrees of freedom, or singular; the latter
    two always keep the edge. Uses dense per-pair arrays indexed by the
    conditioning set's bitmask up to ``dense_limit`` variables and
    dictionaries beyond.

    Statistics are computed by the same public routines as the lazy
    :class:`FisherZTest` path, so the two agree bit for bit.
    """

    def __init__(self, stats: GaussianSuffStats, max_cond_size: int, half_factor: bool, dense_limit: int = _DENSE_LIMIT):
        d = stats.d
        n = stats.n
        self.stats = stats
        self.d = d
        self.max_cond_size = max_cond_size
        self.half_factor = half_factor
        self.dense = d <= dense_limit
        self.clamp_count = 0
        self.dof_blocked = 0
        self.singular = 0

        pair_ids: list[int] = []
        masks: list[int] = []
        zhats: list[float] = []
        statuses: list[int] = []

        max_w = min(max_cond_size + 2, d)
        for k in range(2, max_w + 1):
            cond_size = k - 2
            dof_ok = n - cond_size - 3 >= 1
            for w in combinations(range(d), k):
                wmask = 0
                for v in w:
                    wmask |= 1 << v
                if not dof_ok:
                    P = None
                    status = _STATUS_DOF
                else:
                    try:
                        P = submatrix_inverse(stats.corr, w)
                        status = _STATUS_OK
                    except SingularityError:
                        P = None
                        status = _STATUS_SINGULAR
                for ai in range(k):
                    for bi in range(ai + 1, k):
                        a, b = w[ai], w[bi]
                        if P is None:
                            z = 0.0
                        else:
                            rho, clamped = _pcorr_from_inverse(P, ai, bi)
                            self.clamp_count += clamped
                            z = fisher_z(rho, n, cond_size, half_factor)
                        pair_ids.append(_pair_index(d, a, b))
                        masks.append(wmask ^ (1 << a) ^ (1 << b))
                        zhats.append(z)
                        statuses.append(status)
                if status == _STATUS_DOF:
                    self.dof_blocked += k * (k - 1) // 2
                elif status == _STATUS_SINGULAR:
                    self.singular += k * (k - 1) // 2

        self.pair_ids = np.asarray(pair_ids, dtype=np.int64)
        self.masks = np.asarray(masks, dtype=np.int64)
        self.zhat_flat = np.asarray(zhats, dtype=np.float64)
        self.status_flat = np.asarray(statuses, dtype=np.int8)
        self.entry_hashes = self._hash_entries(self.pair_ids, self.masks)
        self.n_entries = len(pair_ids)

        npairs = d * (d - 1) // 2
        if self.dense:
            zd = np.zeros((npairs, 1 << d))
            sd = np.full((npairs, 1 << d), _STATUS_DOF, dtype=np.int8)
            zd[self.pair_ids, self.masks] = self.zhat_flat
            sd[self.pair_ids, self.masks] = self.status_flat
            self._zhat_dense = zd
            self._status_rows = sd.tolist()
        else:
            self._zhat_map = {
                (int(p), int(m)): float(z)
                for p, m, z in zip(pair_ids, masks, zhats)
            }
            self._status_map = {
                (int(p), int(m)): int(st)
                for p, m, st in zip(pair_ids, masks, statuses)
            }

    @staticmethod
    def _hash_entries(pair_ids: np.ndarray, masks: np.ndarray) -> np.ndarray:
        golden = np.uint64(0x9E3779B97F4A7C15)
        inner = pair_ids.astype(np.uint64) * golden
        return mix64_array(masks.astype(np.uint64) ^ mix64_array(inner))

    def lookup(self, pair: int, mask: int) -> tuple[int, float]:
        """(status, z statistic) for one table entry."""
        if self.dense:
            return self._status_rows[pair][mask], float(self._zhat_dense[pair, mask])
        st = self._status_map.get((pair, mask))
        if st is None:
            return _STATUS_DOF, 0.0
        return st, self._zhat_map[(pair, mask)]

    def keep_rows(self, master_seed: int, run_index: int, threshold: float, truncation: Optional[float]):
        """Per-run boolean edge-keep table over (pair, conditioning mask).

        True means the perturbed test keeps the edge (dependent or not
        testable). Dense mode returns nested lists for O(1) lookups;
        sparse mode returns a dict over filled entries.
        """
        u = keyed_uniform_array(self.entry_hashes, run_hash(master_seed, run_index))
        z = self.zhat_flat + noise_from_uniform_array(u, truncation)
        reject = np.abs(z) > threshold
        reject |= self.status_flat != _STATUS_OK
        if self.dense:
            dense = np.ones((self.d * (self.d - 1) // 2, 1 << self.d), dtype=bool)
            dense[self.pair_ids, self.masks] = reject
            return dense.tolist()
        return {
            (int(p), int(m)): bool(r)
            for p, m, r in zip(self.pair_ids, self.masks, reject)
        }


@lru_cache(maxsize=4)
def _statistic_table(stats: GaussianSuffStats, max_cond_size: int, half_factor: bool, dense_limit: int) -> _StatisticTable:
    return _StatisticTable(stats, max_cond_size, half_factor, dense_limit)


def fixed_threshold_test(
    stats: GaussianSuffStats,
    threshold: float,
    max_cond_size: Optional[int] = None,
    half_factor: bool = True,
):
    """A deterministic |z| > threshold test, table-backed when capped.

    With ``max_cond_size`` given, decisions come from the shared
    precomputed statistic table (fast vectorized scans); uncapped tests
    fall back to lazy per-query evaluation. Both produce bit-identical
    statistics.
    """
    if max_cond_size is None:
        return FisherZTest(stats, threshold=threshold, half_factor=half_factor)
    table = _statistic_table(stats, max_cond_size, half_factor, _DENSE_LIMIT)
    # truncation 0 collapses the perturbation to exactly the estimated
    # statistic, so any seed yields the same fixed-threshold decisions
    return _PerturbedRunTest(table, 0, 0, threshold, truncation=0.0)


class _PerturbedRunTest:
    """The test one resampled run sees: perturbed statistics, fixed threshold."""

    def __init__(self, table: _StatisticTable, master_seed: int, run_index: int, threshold: float, truncation: Optional[float], record: bool = False):
        self.table = table
        self.master_seed = master_seed
        self.run_index = run_index
        self.threshold = threshold
        self.truncation = truncation
        self.records: Optional[list] = [] if record else None
        # recording needs every decision to flow through decide()
        self.supports_scan = not record
        self._keep = table.keep_rows(master_seed, run_index, threshold, truncation)

    def decide(self, i: int, j: int, s: Iterable[int]):
        a, b = (i, j) if i < j else (j, i)
        pair = _pair_index(self.table.d, a, b)
        mask = 0
        for v in s:
            mask |= 1 << v
        status, z_hat = self.table.lookup(pair, mask)
        if status != _STATUS_OK:
            if self.records is not None:
                self.records.append((i, j, tuple(sorted(s)), None, CANNOT_TEST))
            return CANNOT_TEST, 0.0
        z = resample_statistic(
            z_hat, KeyedRng(self.master_seed, self.run_index, pair, mask), self.truncation
        )
        code = DEPENDENT if abs(z) > self.threshold else INDEPENDENT
        if self.records is not None:
            self.records.append((i, j, tuple(sorted(s)), z, code))
        return code, z

    def scan(self, i: int, j: int, cands: tuple, size: int):
        subs, masks = _subsets_and_masks(cands, size)
        a, b = (i, j) if i < j else (j, i)
        pair = _pair_index(self.table.d, a, b)
        cannot = 0
        if self.table.dense:
            keep_row = self._keep[pair]
            status_row = self.table._status_rows[pair]
            for t, m in enumerate(masks):
                if not keep_row[m]:
                    return subs[t], t + 1, cannot
                if status_row[m]:
                    cannot += 1
        else:
            keep = self._keep
            for t, m in enumerate(masks):
                entry = keep.get((pair, m), True)
                if not entry:
                    return subs[t], t + 1, cannot
                if self.table.lookup(pair, m)[0] != _STATUS_OK:
                    cannot += 1
        return None, len(subs), cannot


# ---------------------------------------------------------------------------
# the tiered order-independent search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscoveryResult:
    """One search outcome: the graph, its separation sets, diagnostics.

    diagnostics keys: tests_performed, cannot_test, levels, flags
    (sorted conflict-flag names), and clamp_count when the test tracks
    clamping.
    """

    graph: MixedGraph
    sepsets: SepsetTable
    diagnostics: dict


@dataclass(frozen=True)
class ResampleConfig:
    """Knobs for a resampled batch.

    ``max_cond_size`` defaults to ``max_adj``: the same constant that
    sizes the test budget also caps conditioning sets.
    """

    n_resamples: int
    c_star: float
    nu: float
    max_adj: int
    max_cond_size: Optional[int] = None
    truncation: Optional[float] = None
    master_seed: int = 0
    half_factor: bool = True
    orient_mode: str = "standard"
    record_tests: bool = False

    def __post_init__(self):
        if self.n_resamples < 1:
            raise ValueError("need at least one run")
        if self.c_star <= 0:
            raise ValueError("c_star must be positive")
        if not 0.0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 1/2)")
        if self.max_adj < 0:
            raise ValueError("max_adj must be nonnegative")
        if self.max_cond_size is not None and self.max_cond_size < 0:
            raise ValueError("max_cond_size must be nonnegative")
        if self.truncation is not None and self.truncation < 0:
            raise ValueError("truncation must be nonnegative")
        if self.orient_mode not in ("standard", "majority"):
            raise ValueError(f"unknown orient_mode {self.orient_mode!r}")

    @property
    def effective_max_cond_size(self) -> int:
        return self.max_adj if self.max_cond_size is None else self.max_cond_size


@dataclass(frozen=True)
class ResampleBatch:
    """All M perturbed-search results plus the constants that shaped them.

    ``run_keys[m]`` is the derived seed key for run m; together with the
    master seed and the entry addressing scheme it pins down every draw
    the run consumed, so any decision can be replayed offline.
    """

    config: ResampleConfig
    results: tuple
    run_keys: tuple
    threshold: float
    shrinkage: float
    test_bound: int
    diagnostics: dict

    def __len__(self) -> int:
        return len(self.results)

    def graphs(self) -> list[MixedGraph]:
        return [r.graph for r in self.results]


def pc_stable_tiered(
    test,
    tiers: TierOrder,
    bk: Optional[BackgroundKnowledge] = None,
    max_cond_size: Optional[int] = None,
    orient_mode: str = "standard",
) -> DiscoveryResult:
    """Order-independent constraint-based search under temporal tiers.

    Starts from the complete undirected graph (minus forbidden
    adjacencies), deletes edges level by level against per-level
    adjacency snapshots, skips any conditioning set containing a node in
    the future of both endpoints, then orients: cross-tier edges first,
    v-structures from the recorded separation sets (or by majority
    re-testing), and the closure rules. Forbidden directions are never
    produced.

    ``test`` must provide decide(i, j, S) -> (code, statistic); a
    vectorizing test may add scan(i, j, candidates, size) and set
    ``supports_scan``.
    """
    d = tiers.d
    if bk is None:
        bk = BackgroundKnowledge()
    bk.validate_for(d)
    if orient_mode not in ("standard", "majority"):
        raise ValueError(f"unknown orient_mode {orient_mode!r}")

    adj = [set(range(d)) - {i} for i in range(d)]
    for a, b in bk.forbidden_adjacencies:
        adj[a].discard(b)
        adj[b].discard(a)
    banned = [[frozenset()] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            if i != j:
                banned[i][j] = tiers.later_than_both(i, j)

    sepsets = SepsetTable()
    tests_performed = 0
    cannot_count = 0
    use_scan = getattr(test, "supports_scan", False)

    level = 0
    while max_cond_size is None or level <= max_cond_size:
        snapshot = tuple(frozenset(adj[v]) for v in range(d))
        any_eligible = False
        for i in range(d):
            for j in sorted(snapshot[i]):
                if j not in adj[i]:
                    continue  # deleted earlier within this level
                cands = tuple(sorted(snapshot[i] - {j} - banned[i][j]))
                if len(cands) < level:
                    continue
                any_eligible = True
                if use_scan:
                    sep, tested, cannot = test.scan(i, j, cands, level)
                else:
                    sep, tested, cannot = _scan_with_decide(test, i, j, cands, level)
                tests_performed += tested
                cannot_count += cannot
                if sep is not None:
                    adj[i].discard(j)
                    adj[j].discard(i)
                    sepsets.set(i, j, sep)
        if not any_eligible:
            break
        level += 1

    skeleton = MixedGraph.from_edges(
        d, undirected=[(i, j) for i in range(d) for j in sorted(adj[i]) if i < j]
    )
    oriented, flags_v = orient_v_structures(
        skeleton,
        sepsets,
        tiers=tiers,
        mode=orient_mode,
        test=test,
        max_cond_size=max_cond_size,
        forbidden=bk.forbidden_edges,
    )
    closed, flags_m = apply_meek_rules(oriented, tiers=tiers, forbidden=bk.forbidden_edges)

    diagnostics = {
        "tests_performed": tests_performed,
        "cannot_test": cannot_count,
        "levels": level,
        "flags": sorted(flags_v | flags_m),
    }
    clamp = getattr(test, "clamp_count", None)
    if clamp is not None:
        diagnostics["clamp_count"] = clamp
    return DiscoveryResult(graph=closed, sepsets=sepsets, diagnostics=diagnostics)


def resampled_pc_runs(
    stats: GaussianSuffStats,
    cfg: ResampleConfig,
    tiers: Optional[TierOrder] = None,
    bk: Optional[BackgroundKnowledge] = None,
) -> ResampleBatch:
    """Run the tiered search M times over perturbed test statistics.

    Each run m perturbs every statistic once with an independent
    N(0, 1) draw (truncated when configured) addressed by
    (master_seed, m, pair, conditioning set), and rejects independence
    when the perturbed |z| exceeds the fixed shrinking threshold. Same
    seed, same batch, bit for bit, regardless of scheduling.
    """
    d = stats.d
    if tiers is None:
        tiers = TierOrder.trivial(d)
    if tiers.d != d:
        raise ValueError("tier vector length must equal variable count")

    maxc = cfg.effective_max_cond_size
    bound = max_test_count(d, cfg.max_adj)
    shrink = threshold_shrinkage(cfg.c_star, stats.n, cfg.n_resamples, bound)
    threshold = shrink * normal_quantile(1.0 - cfg.nu / (2.0 * bound))
    table = _statistic_table(stats, maxc, cfg.half_factor, _DENSE_LIMIT)

    results = []
    for m in range(cfg.n_resamples):
        run_test = _PerturbedRunTest(
            table, cfg.master_seed, m, threshold, cfg.truncation, record=cfg.record_tests
        )
        res = pc_stable_tiered(
            run_test, tiers, bk, max_cond_size=maxc, orient_mode=cfg.orient_mode
        )
        if cfg.record_tests:
            diag = dict(res.diagnostics)
            diag["tests"] = tuple(run_test.records)
            res = DiscoveryResult(graph=res.graph, sepsets=res.sepsets, diagnostics=diag)
        results.append(res)

    diagnostics = {
        "clamp_count": table.clamp_count,
        "table_entries": table.n_entries,
        "dof_blocked_entries": table.dof_blocked,
        "singular_entries": table.singular,
    }
    return ResampleBatch(
        config=cfg,
        results=tuple(results),
        run_keys=tuple(run_hash(cfg.master_seed, m) for m in range(cfg.n_resamples)),
        threshold=threshold,
        shrinkage=shrink,
        test_bound=bound,
        diagnostics=diagnostics,
    )
