"""Gaussian statistics for conditional-independence testing and effects.

Everything downstream of raw data flows through here: sample
correlations, partial correlations via submatrix inversion, the
variance-stabilized z statistic, perturbed (resampled) statistics with
optional truncation, OLS effect estimates with conventional standard
errors, and normal-distribution helpers.

Randomness is counter-based: every perturbation draw is addressed by a
key (master seed, run index, pair index, subset key) and computed by a
pure hash, so any single draw can be reproduced in isolation and the
whole procedure is deterministic under any parallel schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import ndtr, ndtri

from .exceptions import DegreesOfFreedomError, SingularityError

RHO_CLAMP = 1.0 - 1e-12
CONDITION_LIMIT = 1e12
RANK_TOL_FACTOR = 1e-10


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n-by-d sample matrix with column names.

    Rows are i.i.d. observations, columns are variables. Values must be
    finite; n >= 2 and d >= 2.
    """

    values: np.ndarray
    names: tuple[str, ...]

    def __init__(self, values, names: Optional[Iterable[str]] = None):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("data must be a 2-d array")
        n, d = arr.shape
        if n < 2:
            raise ValueError("need at least 2 samples")
        if d < 2:
            raise ValueError("need at least 2 variables")
        if not np.isfinite(arr).all():
            raise ValueError("data contains non-finite values")
        if names is None:
            ns = tuple(f"X{i}" for i in range(d))
        else:
            ns = tuple(str(x) for x in names)
            if len(ns) != d:
                raise ValueError(f"need {d} column names, got {len(ns)}")
            if len(set(ns)) != d:
                raise ValueError("column names must be unique")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "names", ns)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no column named {name!r}") from None


@dataclass(frozen=True, eq=False)
class GaussianSuffStats:
    """Sample correlation matrix plus the sample size behind it.

    Equality and hashing go by content, so instances can key caches.
    """

    corr: np.ndarray
    n: int

    def __init__(self, corr, n: int):
        m = np.asarray(corr, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("correlation matrix must be square")
        if m.shape[0] < 2:
            raise ValueError("need at least 2 variables")
        if not np.isfinite(m).all():
            raise ValueError("correlation matrix contains non-finite values")
        if np.abs(m - m.T).max() > 1e-8:
            raise ValueError("correlation matrix must be symmetric")
        if np.abs(np.diag(m) - 1.0).max() > 1e-8:
            raise ValueError("correlation matrix needs a unit diagonal")
        if np.abs(m).max() > 1.0 + 1e-8:
            raise ValueError("correlation entries must lie in [-1, 1]")
        if int(n) < 2:
            raise ValueError("sample size must be at least 2")
        m = np.clip((m + m.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(m, 1.0)
        m.setflags(write=False)
        object.__setattr__(self, "corr", m)
        object.__setattr__(self, "n", int(n))

    @property
    def d(self) -> int:
        return self.corr.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GaussianSuffStats):
            return NotImplemented
        return self.n == other.n and self.corr.tobytes() == other.corr.tobytes()

    def __hash__(self):
        return hash((self.n, self.corr.tobytes()))


@dataclass(frozen=True)
class TestStatistic:
    """Realized conditional-independence statistic for one (i, j, S)."""

    __test__ = False  # name collides with pytest's collector prefix

    z: float
    rho: float
    cond_size: int

    def __post_init__(self):
        if not math.isfinite(self.z):
            raise ValueError("statistic must be finite")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly inside (-1, 1)")


@dataclass(frozen=True)
class EffectEstimate:
    """One adjusted effect estimate.

    ``dag_count`` records how many enumerated DAGs share this adjustment
    set; duplicate parent sets are estimated once and carry their
    multiplicity here.
    """

    beta: float
    se: float
    adjust_set: frozenset
    dag_count: int = 1

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if not (math.isfinite(self.se) and self.se >= 0.0):
            raise ValueError("se must be finite and nonnegative")
        if self.dag_count < 1:
            raise ValueError("dag_count must be positive")
        object.__setattr__(self, "adjust_set", frozenset(self.adjust_set))


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------


def correlation_from_data(x: DataMatrix) -> GaussianSuffStats:
    """Pearson correlation matrix and sample size from raw data."""
    sd = x.values.std(axis=0)
    dead = np.nonzero(sd == 0.0)[0]
    if dead.size:
        raise ValueError(f"column {x.names[int(dead[0])]!r} is constant")
    corr = np.corrcoef(x.values, rowvar=False)
    return GaussianSuffStats(corr, x.n)


def submatrix_inverse(corr: np.ndarray, subset: tuple[int, ...]) -> np.ndarray:
    """Inverse of the correlation submatrix on ``subset`` (sorted indices).

    Raises :class:`~discoverci.exceptions.SingularityError` when the
    submatrix is singular or its condition number exceeds 1e12. This is
    the single code path for partial correlations, shared by the lazy
    and the bulk-table callers, so both see bit-identical floats.
    """
    m = corr[np.ix_(subset, subset)]
    w = np.linalg.eigvalsh(m)
    if w[0] <= 0.0 or w[-1] > CONDITION_LIMIT * w[0]:
        raise SingularityError(f"correlation submatrix on {subset} is numerically singular")
    try:
        factor = cho_factor(m, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigvalsh guards first
        raise SingularityError(str(exc)) from exc
    return cho_solve(factor, np.eye(len(subset)))


def _pcorr_from_inverse(P: np.ndarray, a: int, b: int) -> tuple[float, bool]:
    rho = -P[a, b] / math.sqrt(P[a, a] * P[b, b])
    if rho > RHO_CLAMP:
        return RHO_CLAMP, True
    if rho < -RHO_CLAMP:
        return -RHO_CLAMP, True
    return float(rho), False


def partial_correlation(s: GaussianSuffStats, i: int, j: int, cond: Iterable[int]) -> float:
    """Partial correlation of variables i and j given the set ``cond``.

    Computed from the inverse of the correlation submatrix on
    {i, j} | cond and clamped to (-1, 1) by a 1e-12 margin.

    Examples
    --------
    >>> s = GaussianSuffStats(np.eye(3), 100)
    >>> partial_correlation(s, 0, 1, [2])
    0.0
    """
    cond = frozenset(int(v) for v in cond)
    i, j = int(i), int(j)
    if i == j or i in cond or j in cond:
        raise ValueError("endpoints must be distinct and outside the conditioning set")
    if i > j:
        i, j = j, i  # the inverse is symmetric only up to rounding
    subset = tuple(sorted({i, j} | cond))
    if subset[0] < 0 or subset[-1] >= s.d:
        raise ValueError("variable index out of range")
    P = submatrix_inverse(s.corr, subset)
    rho, _ = _pcorr_from_inverse(P, subset.index(i), subset.index(j))
    return rho


def fisher_z(rho: float, n: int, cond_size: int, half_factor: bool = True) -> float:
    """Variance-stabilizing transform of a (partial) correlation.

    With ``half_factor`` (the default) this is the standard
    sqrt(n - |S| - 3) * arctanh(rho), asymptotically N(0,1) under the
    null; without it the 1/2 inside arctanh is dropped, doubling the
    statistic.

    Raises
    ------
    DegreesOfFreedomError
        When n - cond_size - 3 < 1; callers treat this as "cannot test".
    """
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie strictly inside (-1, 1)")
    dof = n - cond_size - 3
    if dof < 1:
        raise DegreesOfFreedomError(
            f"n={n} leaves {dof} degrees of freedom for |S|={cond_size}"
        )
    z = math.sqrt(dof) * math.atanh(rho)
    return z if half_factor else 2.0 * z


# ---------------------------------------------------------------------------
# counter-based randomness
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_MIX_M1 = 0xBF58476D1CE4E5B9
_MIX_M2 = 0x94D049BB133111EB
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """One 64-bit finalizer round (splitmix-style avalanche)."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * _MIX_M1) & _MASK64
    x ^= x >> 27
    x = (x * _MIX_M2) & _MASK64
    x ^= x >> 31
    return x


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64`; bit-identical to the scalar version."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_MIX_M1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_MIX_M2)
    x ^= x >> np.uint64(31)
    return x


def entry_hash(pair_index: int, subset_key: int) -> int:
    """Run-independent half of a draw key (one value per (pair, subset))."""
    return mix64((subset_key & _MASK64) ^ mix64(pair_index * _GOLDEN))


def run_hash(master_seed: int, run_index: int) -> int:
    """Run-dependent half of a draw key."""
    return mix64((master_seed & _MASK64) ^ mix64(run_index + _GOLDEN))


def _hash_to_unit(x: int) -> float:
    # 53 mantissa bits, offset half a step: strictly inside (0, 1)
    return (x >> 11) * 2.0**-53 + 2.0**-54


def keyed_uniform(master_seed: int, run_index: int, pair_index: int, subset_key: int) -> float:
    """The uniform variate addressed by one draw key, in (0, 1)."""
    return _hash_to_unit(mix64(entry_hash(pair_index, subset_key) ^ run_hash(master_seed, run_index)))


def keyed_uniform_array(entry_hashes: np.ndarray, run_hash_value: int) -> np.ndarray:
    """Vectorized :func:`keyed_uniform` over precomputed entry hashes."""
    mixed = mix64_array(entry_hashes ^ np.uint64(run_hash_value))
    return (mixed >> np.uint64(11)) * 2.0**-53 + 2.0**-54


class KeyedRng:
    """Single-draw generator addressed by a fixed key.

    ``random()`` always returns the same uniform for the same key, which
    makes the one-draw-per-hypothesis rule a property of the generator
    rather than of caller bookkeeping.
    """

    __slots__ = ("master_seed", "run_index", "pair_index", "subset_key")

    def __init__(self, master_seed: int, run_index: int, pair_index: int, subset_key: int):
        self.master_seed = int(master_seed)
        self.run_index = int(run_index)
        self.pair_index = int(pair_index)
        self.subset_key = int(subset_key)

    def random(self) -> float:
        return keyed_uniform(self.master_seed, self.run_index, self.pair_index, self.subset_key)


def _uniform_open(rng) -> float:
    """A uniform in strictly-open (0, 1) from any generator-like object."""
    if isinstance(rng, np.random.Generator):
        # 53 random bits plus a half step keeps 0 and 1 unreachable
        return (int(rng.integers(1 << 53)) + 0.5) * 2.0**-53
    return float(rng.random())


def resample_statistic(z_hat: float, rng, truncation: Optional[float] = None) -> float:
    """One perturbed copy of a test statistic: a draw from N(z_hat, 1).

    ``truncation=c`` restricts the draw to [z_hat - c, z_hat + c] via the
    inverse CDF (c = 0 degenerates to z_hat exactly, the noiseless
    limit). ``rng`` may be a numpy Generator or a :class:`KeyedRng`.
    """
    if not math.isfinite(z_hat):
        raise ValueError("z_hat must be finite")
    u = _uniform_open(rng)
    if truncation is None:
        return z_hat + float(ndtri(u))
    c = float(truncation)
    if c < 0.0:
        raise ValueError("truncation must be nonnegative")
    lo = float(ndtr(-c))
    hi = float(ndtr(c))
    return z_hat + float(ndtri(lo + u * (hi - lo)))


def noise_from_uniform_array(u: np.ndarray, truncation: Optional[float] = None) -> np.ndarray:
    """Vectorized noise matching :func:`resample_statistic`'s mapping."""
    if truncation is None:
        return ndtri(u)
    c = float(truncation)
    if c < 0.0:
        raise ValueError("truncation must be nonnegative")
    lo = ndtr(-c)
    hi = ndtr(c)
    return ndtri(lo + u * (hi - lo))


# ---------------------------------------------------------------------------
# effect estimation
# ---------------------------------------------------------------------------


def ols_effect(
    x: DataMatrix,
    exposure: int,
    outcome: int,
    adjust: Iterable[int],
) -> EffectEstimate:
    """OLS of outcome on intercept + exposure + adjustment set.

    Returns the exposure coefficient with its conventional homoscedastic
    standard error. The solve goes through a QR factorization with rank
    tolerance 1e-10 times the largest column norm.

    Raises
    ------
    SingularityError
        On a rank-deficient design (e.g., collinear adjustment columns).
    DegreesOfFreedomError
        When there are no residual degrees of freedom for the variance.
    """
    exposure, outcome = int(exposure), int(outcome)
    adj = tuple(sorted(int(v) for v in set(adjust)))
    if exposure == outcome:
        raise ValueError("exposure and outcome must differ")
    if exposure in adj or outcome in adj:
        raise ValueError("adjustment set must exclude exposure and outcome")
    for v in (exposure, outcome, *adj):
        if not 0 <= v < x.d:
            raise ValueError(f"variable index {v} out of range")

    n = x.n
    design = np.empty((n, 2 + len(adj)))
    design[:, 0] = 1.0
    design[:, 1] = x.values[:, exposure]
    if adj:
        design[:, 2:] = x.values[:, adj]
    y = x.values[:, outcome]

    p = design.shape[1]
    if n - p < 1:
        raise DegreesOfFreedomError(f"n={n} cannot fit {p} coefficients with a variance")
    q, r = np.linalg.qr(design)
    tol = RANK_TOL_FACTOR * float(np.linalg.norm(design, axis=0).max())
    if np.abs(np.diag(r)).min() <= tol:
        raise SingularityError("design matrix is rank deficient")
    coef = solve_triangular(r, q.T @ y, lower=False)
    resid = y - design @ coef
    sigma2 = float(resid @ resid) / (n - p)
    rinv = solve_triangular(r, np.eye(p), lower=False)
    var_beta = sigma2 * float((rinv @ rinv.T)[1, 1])
    se = math.sqrt(max(var_beta, 0.0))
    return EffectEstimate(beta=float(coef[1]), se=se, adjust_set=frozenset(adj))


# ---------------------------------------------------------------------------
# normal distribution helpers
# ---------------------------------------------------------------------------


def normal_quantile(p: float) -> float:
    """Standard normal inverse CDF.

    Examples
    --------
    >>> normal_quantile(0.5)
    0.0
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    return float(ndtri(p))


def normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    return float(ndtr(float(x)))
