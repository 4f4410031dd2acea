"""Graph structures and structural algorithms for causal discovery.

Nodes are integers ``0..d-1``. Two graph values exist: :class:`Dag` for
fully directed acyclic graphs and :class:`MixedGraph` for partially
directed graphs whose unordered pairs carry one mark each (none,
undirected, directed either way, or bidirected). Both are immutable;
every algorithm here is a pure function.

The module covers acyclicity, d-separation, v-structure orientation,
Meek-rule closure, DAG-to-pattern conversion, validity checks used to
screen discovery output, enumeration of the DAGs represented by a
pattern, and text/DOT serialization.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Iterator, Optional

import numpy as np

from .exceptions import CycleError, EnumerationOverflowError, GraphFormatError

MARK_NONE = 0
MARK_UNDIRECTED = 1
MARK_FORWARD = 2  # low-index node -> high-index node
MARK_BACKWARD = 3  # high-index node -> low-index node
MARK_BIDIRECTED = 4

DEFAULT_ENUMERATION_CAP = 10_000

_EDGE_LINE = re.compile(r"^(\S+) (->|--|<->) (\S+)$")
_DOT_NODE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)";$')
_DOT_EDGE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)" -> "((?:[^"\\]|\\.)*)"(?: \[dir=(none|both)\])?;$')


def _pair_index(d: int, i: int, j: int) -> int:
    """Flat upper-triangular index of the unordered pair (i, j), i < j."""
    if i > j:
        i, j = j, i
    return i * (2 * d - i - 1) // 2 + (j - i - 1)


def _check_node(d: int, i) -> int:
    if not isinstance(i, (int, np.integer)) or not 0 <= i < d:
        raise ValueError(f"node {i!r} out of range for d={d}")
    return int(i)


@dataclass(frozen=True)
class Dag:
    """A directed acyclic graph on nodes ``0..d-1``.

    Parameters
    ----------
    d : int
        Number of nodes, at least 2.
    edges : frozenset of (parent, child) pairs
        Directed edges. Construction fails on self-loops, two-cycles,
        out-of-range nodes, or any directed cycle.
    """

    d: int
    edges: frozenset

    def __init__(self, d: int, edges: Iterable[tuple[int, int]] = ()):
        if d < 2:
            raise ValueError("a graph needs at least 2 nodes")
        es = frozenset((int(a), int(b)) for a, b in edges)
        for a, b in es:
            _check_node(d, a)
            _check_node(d, b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if (b, a) in es:
                raise ValueError(f"both {a}->{b} and {b}->{a} present")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "edges", es)
        if self.topological_order is None:
            raise CycleError("edge set contains a directed cycle")

    @cached_property
    def parent_sets(self) -> tuple[frozenset, ...]:
        out = [set() for _ in range(self.d)]
        for a, b in self.edges:
            out[b].add(a)
        return tuple(frozenset(s) for s in out)

    @cached_property
    def child_sets(self) -> tuple[frozenset, ...]:
        out = [set() for _ in range(self.d)]
        for a, b in self.edges:
            out[a].add(b)
        return tuple(frozenset(s) for s in out)

    @cached_property
    def topological_order(self) -> Optional[tuple[int, ...]]:
        """A topological order of the nodes, or None if there is a cycle."""
        indeg = [0] * self.d
        children = [[] for _ in range(self.d)]
        for a, b in self.edges:
            indeg[b] += 1
            children[a].append(b)
        frontier = sorted(i for i in range(self.d) if indeg[i] == 0)
        order = []
        while frontier:
            v = frontier.pop()
            order.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    frontier.append(c)
        return tuple(order) if len(order) == self.d else None

    def to_mixed(self) -> "MixedGraph":
        """The same graph as a MixedGraph with every edge directed."""
        return MixedGraph.from_edges(self.d, directed=self.edges)

    def __repr__(self):
        return f"Dag(d={self.d}, edges={sorted(self.edges)})"


class MixedGraph:
    """A partially directed graph with one mark per unordered pair.

    Marks are none, undirected (``i -- j``), directed (``i -> j`` or
    ``j -> i``), or bidirected (``i <-> j``). Storage is a flat
    upper-triangular array of mark codes, so mark access is O(1).
    Instances are immutable; ``==`` and ``hash`` compare structure.
    """

    __slots__ = ("d", "_marks")

    def __init__(self, d: int, marks: Optional[np.ndarray] = None):
        if d < 2:
            raise ValueError("a graph needs at least 2 nodes")
        npairs = d * (d - 1) // 2
        if marks is None:
            marks = np.zeros(npairs, dtype=np.int8)
        else:
            marks = np.asarray(marks, dtype=np.int8).copy()
            if marks.shape != (npairs,):
                raise ValueError(f"marks must have length {npairs}")
            if marks.min(initial=0) < 0 or marks.max(initial=0) > 4:
                raise ValueError("unknown mark code")
        marks.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "_marks", marks)

    def __setattr__(self, name, value):
        raise AttributeError("MixedGraph is immutable")

    @classmethod
    def complete_undirected(cls, d: int) -> "MixedGraph":
        g = cls(d)
        marks = g._marks.copy()
        marks[:] = MARK_UNDIRECTED
        return cls(d, marks)

    @classmethod
    def from_edges(
        cls,
        d: int,
        directed: Iterable[tuple[int, int]] = (),
        undirected: Iterable[tuple[int, int]] = (),
        bidirected: Iterable[tuple[int, int]] = (),
    ) -> "MixedGraph":
        """Build a graph from explicit edge lists.

        Listing the same unordered pair twice is an error, so the three
        edge kinds cannot silently overwrite each other.
        """
        npairs = d * (d - 1) // 2
        marks = np.zeros(npairs, dtype=np.int8)
        seen = set()

        def put(a, b, code):
            a = _check_node(d, a)
            b = _check_node(d, b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"pair {key} listed more than once")
            seen.add(key)
            marks[_pair_index(d, a, b)] = code

        for a, b in directed:
            put(a, b, MARK_FORWARD if a < b else MARK_BACKWARD)
        for a, b in undirected:
            put(a, b, MARK_UNDIRECTED)
        for a, b in bidirected:
            put(a, b, MARK_BIDIRECTED)
        return cls(d, marks)

    # -- mark queries ---------------------------------------------------

    def mark(self, i: int, j: int) -> int:
        """Raw mark code of the unordered pair, orientation seen from i < j."""
        i = _check_node(self.d, i)
        j = _check_node(self.d, j)
        if i == j:
            raise ValueError("no self-pairs")
        return int(self._marks[_pair_index(self.d, i, j)])

    def adjacent(self, i: int, j: int) -> bool:
        return self.mark(i, j) != MARK_NONE

    def has_directed(self, i: int, j: int) -> bool:
        """True iff the directed mark i -> j is present."""
        m = self.mark(i, j)
        return m == (MARK_FORWARD if i < j else MARK_BACKWARD)

    def has_undirected(self, i: int, j: int) -> bool:
        return self.mark(i, j) == MARK_UNDIRECTED

    def has_bidirected(self, i: int, j: int) -> bool:
        return self.mark(i, j) == MARK_BIDIRECTED

    def neighbors(self, i: int) -> frozenset:
        """All nodes adjacent to i by any mark."""
        i = _check_node(self.d, i)
        return frozenset(j for j in range(self.d) if j != i and self.adjacent(i, j))

    # -- edge iteration (canonical order: by sorted pair) ----------------

    def directed_edges(self) -> Iterator[tuple[int, int]]:
        for i, j in combinations(range(self.d), 2):
            m = self._marks[_pair_index(self.d, i, j)]
            if m == MARK_FORWARD:
                yield (i, j)
            elif m == MARK_BACKWARD:
                yield (j, i)

    def undirected_edges(self) -> Iterator[tuple[int, int]]:
        for i, j in combinations(range(self.d), 2):
            if self._marks[_pair_index(self.d, i, j)] == MARK_UNDIRECTED:
                yield (i, j)

    def bidirected_edges(self) -> Iterator[tuple[int, int]]:
        for i, j in combinations(range(self.d), 2):
            if self._marks[_pair_index(self.d, i, j)] == MARK_BIDIRECTED:
                yield (i, j)

    def has_any_bidirected(self) -> bool:
        return bool((self._marks == MARK_BIDIRECTED).any())

    def skeleton_pairs(self) -> Iterator[tuple[int, int]]:
        """All adjacent unordered pairs, sorted."""
        for i, j in combinations(range(self.d), 2):
            if self._marks[_pair_index(self.d, i, j)] != MARK_NONE:
                yield (i, j)

    def induced(self, nodes: Iterable[int]) -> tuple["MixedGraph", tuple[int, ...]]:
        """Induced subgraph on the given nodes.

        Returns the subgraph (relabeled 0..k-1 in ascending original
        order) and the tuple mapping new index -> original node.
        """
        keep = tuple(sorted({_check_node(self.d, v) for v in nodes}))
        if len(keep) < 2:
            raise ValueError("induced subgraph needs at least 2 nodes")
        k = len(keep)
        marks = np.zeros(k * (k - 1) // 2, dtype=np.int8)
        for a, b in combinations(range(k), 2):
            marks[_pair_index(k, a, b)] = self._marks[_pair_index(self.d, keep[a], keep[b])]
        return MixedGraph(k, marks), keep

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self.d == other.d and self._marks.tobytes() == other._marks.tobytes()

    def __hash__(self):
        return hash((self.d, self._marks.tobytes()))

    def __repr__(self):
        parts = []
        for i, j in self.directed_edges():
            parts.append(f"{i}->{j}")
        for i, j in self.undirected_edges():
            parts.append(f"{i}--{j}")
        for i, j in self.bidirected_edges():
            parts.append(f"{i}<->{j}")
        return f"MixedGraph(d={self.d}, [{', '.join(parts)}])"


@dataclass(frozen=True)
class TierOrder:
    """A partial temporal order: one positive tier label per node.

    Edges may never point from a later tier to an earlier one; an edge
    between different tiers is therefore forced earlier -> later. Equal
    labels leave the pair unconstrained.
    """

    tiers: tuple[int, ...]

    def __init__(self, tiers: Iterable[int]):
        ts = tuple(int(t) for t in tiers)
        if len(ts) < 2:
            raise ValueError("need a tier for each of at least 2 nodes")
        if any(t < 1 for t in ts):
            raise ValueError("tiers are positive integers")
        object.__setattr__(self, "tiers", ts)

    @classmethod
    def trivial(cls, d: int) -> "TierOrder":
        """All nodes in one tier (no temporal constraints)."""
        return cls((1,) * d)

    @property
    def d(self) -> int:
        return len(self.tiers)

    def is_trivial(self) -> bool:
        return len(set(self.tiers)) == 1

    def forces(self, i: int, j: int) -> Optional[tuple[int, int]]:
        """The forced direction of an i-j edge, or None within a tier."""
        ti, tj = self.tiers[i], self.tiers[j]
        if ti < tj:
            return (i, j)
        if tj < ti:
            return (j, i)
        return None

    def forbids(self, i: int, j: int) -> bool:
        """True iff the directed edge i -> j would point back in time."""
        return self.tiers[i] > self.tiers[j]

    def later_than_both(self, i: int, j: int) -> frozenset:
        """Nodes in a strictly later tier than both i and j.

        These are never eligible to enter a conditioning set for the
        pair (i, j): conditioning on the future of both endpoints is
        skipped by the tiered search.
        """
        cut = max(self.tiers[i], self.tiers[j])
        return frozenset(k for k, t in enumerate(self.tiers) if t > cut)


@dataclass(frozen=True)
class BackgroundKnowledge:
    """Hard structural constraints supplied to discovery and screening.

    Fields
    ------
    forbidden_edges : ordered pairs (i, j) whose direction i -> j must
        never be produced; the adjacency itself stays allowed.
    required_adjacencies : unordered pairs that a valid output graph
        must keep adjacent (any mark).
    forbidden_adjacencies : unordered pairs removed before the search
        starts; no test is ever run for them.
    validity_scope : optional node subset; validity screening then
        applies to the induced subgraph on these nodes only.
    """

    forbidden_edges: frozenset = frozenset()
    required_adjacencies: frozenset = frozenset()
    forbidden_adjacencies: frozenset = frozenset()
    validity_scope: Optional[frozenset] = None

    def __init__(
        self,
        forbidden_edges: Iterable[tuple[int, int]] = (),
        required_adjacencies: Iterable[tuple[int, int]] = (),
        forbidden_adjacencies: Iterable[tuple[int, int]] = (),
        validity_scope: Optional[Iterable[int]] = None,
    ):
        fe = frozenset((int(a), int(b)) for a, b in forbidden_edges)
        ra = frozenset(tuple(sorted((int(a), int(b)))) for a, b in required_adjacencies)
        fa = frozenset(tuple(sorted((int(a), int(b)))) for a, b in forbidden_adjacencies)
        for a, b in fe | ra | fa:
            if a == b:
                raise ValueError("pairs must join distinct nodes")
        scope = None if validity_scope is None else frozenset(int(v) for v in validity_scope)
        if scope is not None and len(scope) < 2:
            raise ValueError("validity_scope needs at least 2 nodes")
        object.__setattr__(self, "forbidden_edges", fe)
        object.__setattr__(self, "required_adjacencies", ra)
        object.__setattr__(self, "forbidden_adjacencies", fa)
        object.__setattr__(self, "validity_scope", scope)

    def validate_for(self, d: int) -> None:
        nodes = set()
        for a, b in self.forbidden_edges | self.required_adjacencies | self.forbidden_adjacencies:
            nodes.update((a, b))
        if self.validity_scope:
            nodes.update(self.validity_scope)
        for v in nodes:
            _check_node(d, v)


class SepsetTable:
    """Separating sets recorded for deleted edges, keyed by unordered pair."""

    def __init__(self):
        self._table: dict[tuple[int, int], frozenset] = {}

    @staticmethod
    def _key(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i < j else (j, i)

    def get(self, i: int, j: int) -> Optional[frozenset]:
        return self._table.get(self._key(i, j))

    def set(self, i: int, j: int, sepset: Iterable[int]) -> None:
        s = frozenset(int(v) for v in sepset)
        if i in s or j in s:
            raise ValueError("a separating set excludes its endpoints")
        self._table[self._key(i, j)] = s

    def __contains__(self, pair) -> bool:
        return self._key(*pair) in self._table

    def __len__(self) -> int:
        return len(self._table)

    def items(self) -> Iterator[tuple[tuple[int, int], frozenset]]:
        return iter(sorted(self._table.items()))

    def __repr__(self):
        body = ", ".join(f"{k}: {sorted(v)}" for k, v in self.items())
        return f"SepsetTable({{{body}}})"


# ---------------------------------------------------------------------------
# Mutable bitmask scratch representation used by the orientation algorithms.
# Never exposed: public inputs and outputs are Dag / MixedGraph.
# ---------------------------------------------------------------------------


class _Pdag:
    __slots__ = ("d", "und", "out", "inn", "bi")

    def __init__(self, d: int):
        self.d = d
        self.und = [0] * d
        self.out = [0] * d
        self.inn = [0] * d
        self.bi = [0] * d

    @classmethod
    def from_mixed(cls, g: MixedGraph) -> "_Pdag":
        p = cls(g.d)
        for i, j in g.undirected_edges():
            p.und[i] |= 1 << j
            p.und[j] |= 1 << i
        for i, j in g.directed_edges():
            p.out[i] |= 1 << j
            p.inn[j] |= 1 << i
        for i, j in g.bidirected_edges():
            p.bi[i] |= 1 << j
            p.bi[j] |= 1 << i
        return p

    def to_mixed(self) -> MixedGraph:
        d = self.d
        marks = np.zeros(d * (d - 1) // 2, dtype=np.int8)
        for i in range(d):
            for j in _bits_above(self.und[i], i):
                marks[_pair_index(d, i, j)] = MARK_UNDIRECTED
            for j in _bits(self.out[i]):
                if j > i:
                    marks[_pair_index(d, i, j)] = MARK_FORWARD
                else:
                    marks[_pair_index(d, j, i)] = MARK_BACKWARD
            for j in _bits_above(self.bi[i], i):
                marks[_pair_index(d, i, j)] = MARK_BIDIRECTED
        return MixedGraph(d, marks)

    def copy(self) -> "_Pdag":
        p = _Pdag.__new__(_Pdag)
        p.d = self.d
        p.und = self.und.copy()
        p.out = self.out.copy()
        p.inn = self.inn.copy()
        p.bi = self.bi.copy()
        return p

    def adj(self, i: int) -> int:
        return self.und[i] | self.out[i] | self.inn[i] | self.bi[i]

    def orient(self, a: int, b: int) -> None:
        """Turn the undirected edge a - b into a -> b."""
        mb = 1 << b
        ma = 1 << a
        self.und[a] &= ~mb
        self.und[b] &= ~ma
        self.out[a] |= mb
        self.inn[b] |= ma

    def make_bidirected(self, a: int, b: int) -> None:
        mb = 1 << b
        ma = 1 << a
        self.und[a] &= ~mb
        self.und[b] &= ~ma
        self.out[a] &= ~mb
        self.out[b] &= ~ma
        self.inn[a] &= ~mb
        self.inn[b] &= ~ma
        self.bi[a] |= mb
        self.bi[b] |= ma

    def directed_acyclic(self) -> bool:
        return _masks_acyclic(self.out)


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _bits_above(mask: int, i: int) -> Iterator[int]:
    return _bits(mask >> (i + 1) << (i + 1))


def _masks_acyclic(out_masks: list[int]) -> bool:
    d = len(out_masks)
    indeg = [0] * d
    for i in range(d):
        for j in _bits(out_masks[i]):
            indeg[j] += 1
    frontier = [i for i in range(d) if indeg[i] == 0]
    seen = 0
    while frontier:
        v = frontier.pop()
        seen += 1
        for j in _bits(out_masks[v]):
            indeg[j] -= 1
            if indeg[j] == 0:
                frontier.append(j)
    return seen == d


# ---------------------------------------------------------------------------
# Structural predicates
# ---------------------------------------------------------------------------


def is_acyclic(g) -> bool:
    """True iff the directed part of the graph has no directed cycle.

    Accepts a :class:`Dag` (always True by construction, kept for
    symmetry) or a :class:`MixedGraph`, whose undirected and bidirected
    marks are ignored.
    """
    if isinstance(g, Dag):
        return g.topological_order is not None
    out = [0] * g.d
    for a, b in g.directed_edges():
        out[a] |= 1 << b
    return _masks_acyclic(out)


def parents(g, i: int) -> frozenset:
    """All nodes k with a directed mark k -> i."""
    if isinstance(g, Dag):
        return g.parent_sets[_check_node(g.d, i)]
    i = _check_node(g.d, i)
    return frozenset(k for k in range(g.d) if k != i and g.has_directed(k, i))


def vstructures(g) -> frozenset:
    """Unshielded colliders (i, k, j) with i < j, as directed-mark patterns.

    For a :class:`Dag` these are its v-structures. For a
    :class:`MixedGraph` a triple counts only when both marks are
    directed into k and i, j are nonadjacent.
    """
    if isinstance(g, Dag):
        mixed = g.to_mixed()
    else:
        mixed = g
    out = set()
    for k in range(mixed.d):
        ps = sorted(p for p in range(mixed.d) if p != k and mixed.has_directed(p, k))
        for i, j in combinations(ps, 2):
            if not mixed.adjacent(i, j):
                out.add((i, k, j))
    return frozenset(out)


def d_separated(g: Dag, i: int, j: int, s: Iterable[int]) -> bool:
    """Whether S blocks every path between i and j in the DAG.

    Standard reachability over (node, entry-direction) states: walking
    through a non-collider is blocked exactly when the node is in S,
    and a collider passes exactly when it has a descendant in S.

    Examples
    --------
    >>> g = Dag(3, [(0, 1), (1, 2)])
    >>> d_separated(g, 0, 2, {1})
    True
    >>> g = Dag(3, [(0, 1), (2, 1)])
    >>> d_separated(g, 0, 2, set()), d_separated(g, 0, 2, {1})
    (True, False)
    """
    i = _check_node(g.d, i)
    j = _check_node(g.d, j)
    ss = frozenset(_check_node(g.d, v) for v in s)
    if i == j or i in ss or j in ss:
        raise ValueError("endpoints must be distinct and outside S")

    # ancestors of S (inclusive), for collider opening
    anc = set(ss)
    stack = list(ss)
    while stack:
        v = stack.pop()
        for p in g.parent_sets[v]:
            if p not in anc:
                anc.add(p)
                stack.append(p)

    up, down = True, False
    visited = {(i, up)}
    stack = [(i, up)]
    while stack:
        v, direction = stack.pop()
        if v == j:
            return False
        nxt = []
        if direction is up:
            if v not in ss:
                nxt += [(p, up) for p in g.parent_sets[v]]
                nxt += [(c, down) for c in g.child_sets[v]]
        else:
            if v not in ss:
                nxt += [(c, down) for c in g.child_sets[v]]
            if v in anc:
                nxt += [(p, up) for p in g.parent_sets[v]]
        for state in nxt:
            if state not in visited:
                visited.add(state)
                stack.append(state)
    return True


# ---------------------------------------------------------------------------
# Orientation
# ---------------------------------------------------------------------------

FLAG_COLLIDER_BIDIRECTED = "collider_conflict_bidirected"
FLAG_TIER_CONFLICT = "tier_vs_collider_conflict"
FLAG_FORBIDDEN_CONFLICT = "forbidden_direction_blocked"
FLAG_MISSING_SEPSET = "unshielded_triple_without_sepset"
FLAG_AMBIGUOUS_TRIPLE = "majority_ambiguous_triple"
FLAG_MEEK_SKIPPED = "meek_skipped_bidirected_marks"


def _force_tiers(p: _Pdag, tiers: Optional[TierOrder], forbidden: frozenset, flags: set) -> None:
    """Orient every undirected cross-tier edge earlier -> later."""
    if tiers is None:
        return
    for i in range(p.d):
        for j in _bits_above(p.und[i], i):
            direction = tiers.forces(i, j)
            if direction is None:
                continue
            if direction in forbidden:
                flags.add(FLAG_FORBIDDEN_CONFLICT)
                continue
            p.orient(*direction)


def _try_collider_arrow(
    p: _Pdag,
    src: int,
    k: int,
    tiers: Optional[TierOrder],
    forbidden: frozenset,
    flags: set,
) -> None:
    """Set the arrowhead src -> k demanded by a collider, if allowed.

    Tier-forced directions win over colliders; a forbidden direction is
    never produced; an opposing same-tier arrowhead becomes bidirected.
    """
    mk = 1 << k
    if p.out[src] & mk or p.bi[src] & mk:
        return
    if tiers is not None and tiers.forbids(src, k):
        flags.add(FLAG_TIER_CONFLICT)
        return
    if (src, k) in forbidden:
        flags.add(FLAG_FORBIDDEN_CONFLICT)
        return
    if p.und[src] & mk:
        p.orient(src, k)
    elif p.inn[src] & mk:  # existing arrowhead k -> src from another collider
        p.make_bidirected(src, k)
        flags.add(FLAG_COLLIDER_BIDIRECTED)


def orient_v_structures(
    skeleton: MixedGraph,
    sepsets: SepsetTable,
    tiers: Optional[TierOrder] = None,
    mode: str = "standard",
    test=None,
    max_cond_size: Optional[int] = None,
    forbidden: Iterable[tuple[int, int]] = (),
) -> tuple[MixedGraph, frozenset]:
    """Orient unshielded triples as colliders where the sepsets say so.

    Parameters
    ----------
    skeleton : MixedGraph
        The skeleton, undirected except for tier-forced directed marks.
    sepsets : SepsetTable
        Separating sets recorded when edges were deleted.
    tiers : TierOrder, optional
        Temporal tiers; arrowheads never violate them. Cross-tier
        undirected edges are forced earlier -> later first.
    mode : "standard" or "majority"
        Standard orients (i, k, j) as a collider iff k is not in the
        recorded sepset of (i, j). Majority re-tests every eligible
        conditioning set drawn from either endpoint's adjacency and
        orients iff k appears in under half the separating sets; exactly
        half marks the triple ambiguous and leaves it alone.
    test : CiTest-like, optional
        Required in majority mode: decide(i, j, S) -> (code, stat) with
        code "independent" / "dependent" / "cannot_test".
    max_cond_size : int, optional
        Cap on |S| during majority re-testing.
    forbidden : ordered pairs
        Directions that are never produced.

    Returns
    -------
    (MixedGraph, frozenset of str)
        The oriented graph and any conflict flags raised.
    """
    if mode not in ("standard", "majority"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "majority" and test is None:
        raise ValueError("majority mode needs an independence-test callback")
    forbidden = frozenset((int(a), int(b)) for a, b in forbidden)
    flags: set = set()
    p = _Pdag.from_mixed(skeleton)
    _force_tiers(p, tiers, forbidden, flags)

    for k in range(p.d):
        adj_k = sorted(_bits(p.adj(k)))
        for i, j in combinations(adj_k, 2):
            if p.adj(i) & (1 << j):
                continue  # shielded
            if mode == "standard":
                sep = sepsets.get(i, j)
                if sep is None:
                    flags.add(FLAG_MISSING_SEPSET)
                    continue
                collider = k not in sep
            else:
                collider = _majority_is_collider(p, i, k, j, test, tiers, max_cond_size, flags)
                if collider is None:
                    continue
            if collider:
                _try_collider_arrow(p, i, k, tiers, forbidden, flags)
                _try_collider_arrow(p, j, k, tiers, forbidden, flags)
    return p.to_mixed(), frozenset(flags)


def _majority_is_collider(
    p: _Pdag,
    i: int,
    k: int,
    j: int,
    test,
    tiers: Optional[TierOrder],
    max_cond_size: Optional[int],
    flags: set,
) -> Optional[bool]:
    """Collider verdict for one triple under the majority rule.

    Returns True/False for a clear verdict and None when the triple is
    ambiguous (k in exactly half the separating sets) or no separating
    set is found at all.
    """
    banned = tiers.later_than_both(i, j) if tiers is not None else frozenset()
    candidates: set = set()
    for a, b in ((i, j), (j, i)):
        base = sorted(v for v in _bits(p.adj(a)) if v != b and v not in banned)
        top = len(base) if max_cond_size is None else min(max_cond_size, len(base))
        for size in range(top + 1):
            for sub in combinations(base, size):
                candidates.add(frozenset(sub))
    separating = []
    for s in sorted(candidates, key=sorted):
        code, _ = test.decide(i, j, s)
        if code == "independent":
            separating.append(s)
    if not separating:
        flags.add(FLAG_MISSING_SEPSET)
        return None
    frac = sum(1 for s in separating if k in s) / len(separating)
    if frac == 0.5:
        flags.add(FLAG_AMBIGUOUS_TRIPLE)
        return None
    return frac < 0.5


def _meek_closure(p: _Pdag, tiers: Optional[TierOrder], forbidden: frozenset, flags: set) -> None:
    """Apply rules R1-R4 to a fixed point, in place.

    Each rule only ever turns an undirected edge into a directed one,
    so existing orientations are never reversed or removed.
    """

    def orientable(a, b):
        if (a, b) in forbidden:
            flags.add(FLAG_FORBIDDEN_CONFLICT)
            return False
        if tiers is not None and tiers.forbids(a, b):
            # cross-tier edges were force-oriented up front, so an
            # undirected edge can only violate tiers if that forcing was
            # itself blocked by `forbidden`
            flags.add(FLAG_TIER_CONFLICT)
            return False
        return True

    changed = True
    while changed:
        changed = False
        for a in range(p.d):
            adj_a = p.adj(a)
            und_a = p.und[a]
            if not und_a and not p.out[a]:
                continue
            # R1: a -> b, b - c, a and c nonadjacent  =>  b -> c
            for b in _bits(p.out[a]):
                for c in _bits(p.und[b] & ~adj_a & ~(1 << a)):
                    if orientable(b, c):
                        p.orient(b, c)
                        changed = True
            for b in _bits(und_a):
                # an earlier rule in this same pass may have oriented a - b
                if not (p.und[a] & (1 << b)):
                    continue
                # R2: a -> k -> b with a - b  =>  a -> b
                if p.out[a] & p.inn[b]:
                    if orientable(a, b):
                        p.orient(a, b)
                        changed = True
                        continue
                # R3: a - c, a - d, c -> b, d -> b, c and d nonadjacent  =>  a -> b
                shared = p.und[a] & p.inn[b]
                if shared:
                    hit = False
                    for c in _bits(shared):
                        if shared & ~p.adj(c) & ~(1 << c):
                            hit = True
                            break
                    if hit and orientable(a, b):
                        p.orient(a, b)
                        changed = True
                        continue
                # R4: a - d, d -> c, c -> b, d and b nonadjacent, a and c
                # adjacent  =>  a -> b
                hit = False
                for c in _bits(p.inn[b] & p.adj(a)):
                    if p.inn[c] & p.und[a] & ~p.adj(b) & ~(1 << b):
                        hit = True
                        break
                if hit and orientable(a, b):
                    p.orient(a, b)
                    changed = True


def apply_meek_rules(
    g: MixedGraph,
    tiers: Optional[TierOrder] = None,
    forbidden: Iterable[tuple[int, int]] = (),
) -> tuple[MixedGraph, frozenset]:
    """Close a partially directed graph under Meek rules R1-R4.

    Undirected cross-tier edges are first forced earlier -> later. A
    graph containing bidirected marks is returned unchanged with a flag:
    closure is undefined there and the graph is already invalid.

    Returns
    -------
    (MixedGraph, frozenset of str)
        The closed graph and any flags raised.
    """
    forbidden = frozenset((int(a), int(b)) for a, b in forbidden)
    if g.has_any_bidirected():
        return g, frozenset({FLAG_MEEK_SKIPPED})
    flags: set = set()
    p = _Pdag.from_mixed(g)
    _force_tiers(p, tiers, forbidden, flags)
    _meek_closure(p, tiers, forbidden, flags)
    return p.to_mixed(), frozenset(flags)


def cpdag_from_dag(g: Dag, tiers: Optional[TierOrder] = None) -> MixedGraph:
    """The maximally oriented pattern of a DAG.

    With no tiers this is the familiar equivalence-class pattern: the
    skeleton plus v-structures, closed under the Meek rules, directing
    exactly the edges common to every equivalent DAG. A tier order adds
    its forced orientations before closure, giving the pattern of the
    tier-consistent subclass.

    Examples
    --------
    >>> cpdag_from_dag(Dag(3, [(0, 1), (1, 2)])).mark(0, 1) == MARK_UNDIRECTED
    True
    >>> cpdag_from_dag(Dag(3, [(0, 1), (2, 1)])).has_directed(2, 1)
    True
    """
    if tiers is not None and tiers.d != g.d:
        raise ValueError("tier vector length must equal node count")
    p = _Pdag(g.d)
    for a, b in g.edges:
        p.und[a] |= 1 << b
        p.und[b] |= 1 << a
    for i, k, j in vstructures(g):
        for src in (i, j):
            if p.und[src] & (1 << k):
                p.orient(src, k)
    if tiers is not None:
        for a, b in g.edges:
            if tiers.forbids(a, b):
                raise ValueError(f"tier order contradicts edge {a}->{b} of the DAG")
        for i in range(g.d):
            for j in _bits_above(p.und[i], i):
                direction = tiers.forces(i, j)
                if direction is not None:
                    p.orient(*direction)
    flags: set = set()
    _meek_closure(p, tiers, frozenset(), flags)
    return p.to_mixed()


# ---------------------------------------------------------------------------
# Extension, validity, enumeration
# ---------------------------------------------------------------------------


def consistent_extension(g: MixedGraph) -> Optional[Dag]:
    """One DAG extending the pattern, or None when no extension exists.

    An extension keeps the skeleton, keeps every directed mark, and
    creates no new unshielded collider. Uses the classic peeling
    construction: repeatedly find a node with no outgoing directed
    edges whose undirected neighbors are adjacent to all its other
    neighbors, orient its undirected edges inward, and remove it.
    Failure to find such a node at any step means no extension exists.
    """
    if g.has_any_bidirected():
        return None
    p = _Pdag.from_mixed(g)
    remaining = (1 << g.d) - 1
    while remaining:
        found = None
        for x in _bits(remaining):
            if p.out[x] & remaining:
                continue
            adj_x = p.adj(x) & remaining
            und_x = p.und[x] & remaining
            ok = True
            for y in _bits(und_x):
                if adj_x & ~p.adj(y) & ~(1 << y):
                    ok = False
                    break
            if ok:
                found = x
                break
        if found is None:
            return None
        for y in _bits(p.und[found] & remaining):
            p.orient(y, found)
        remaining &= ~(1 << found)
    edges = [(i, j) for i in range(g.d) for j in _bits(p.out[i])]
    return Dag(g.d, edges)


def is_valid_cpdag(
    g: MixedGraph,
    level: str = "strict",
    bk: Optional[BackgroundKnowledge] = None,
    tiers: Optional[TierOrder] = None,
) -> bool:
    """Whether a discovery output counts as a usable equivalence-class pattern.

    Basic level: no bidirected marks and an acyclic directed part.
    Strict level (default) additionally demands that a consistent
    extension exists and that re-deriving the maximally oriented graph
    from that extension (its skeleton and v-structures, under the tier
    order) reproduces ``g`` exactly, i.e. the graph is a genuine closure
    fixed point. With a ``validity_scope`` in ``bk``, the structural
    check runs on the induced subgraph over that scope, leaving
    cross-scope edges out of it; the fixed-point comparison is dropped
    there, because in-scope orientations may be compelled by colliders
    and tier-forced edges outside the scope and so cannot be reproduced
    from the scope alone. Required adjacencies from ``bk`` must be
    present in the full graph at either level.
    """
    if level not in ("basic", "strict"):
        raise ValueError(f"unknown level {level!r}")
    if bk is not None:
        bk.validate_for(g.d)
        for a, b in bk.required_adjacencies:
            if not g.adjacent(a, b):
                return False

    scoped = bk is not None and bk.validity_scope is not None
    target = g
    scoped_tiers = tiers
    if scoped:
        target, keep = g.induced(bk.validity_scope)
        if tiers is not None:
            scoped_tiers = TierOrder(tuple(tiers.tiers[v] for v in keep))

    if target.has_any_bidirected() or not is_acyclic(target):
        return False
    if scoped_tiers is not None:
        for a, b in target.directed_edges():
            if scoped_tiers.forbids(a, b):
                return False
    if level == "basic":
        return True

    ext = consistent_extension(target)
    if ext is None:
        return False
    if scoped:
        return True
    try:
        rederived = cpdag_from_dag(ext, scoped_tiers)
    except ValueError:
        # the extension contradicts the tiers, e.g. an undirected edge
        # spanning tiers that a valid pattern would have oriented
        return False
    return rederived == target


def enumerate_dags(c: MixedGraph, cap: int = DEFAULT_ENUMERATION_CAP) -> list[Dag]:
    """All DAGs the pattern represents, up to ``cap``.

    Each returned DAG keeps the skeleton and every directed mark of
    ``c`` and introduces neither a new unshielded collider nor a cycle.
    The search picks an undirected edge, tries both orientations, closes
    under Meek rules, and recurses; results are deduplicated and sorted
    by edge list. Exceeding ``cap`` raises
    :class:`~discoverci.exceptions.EnumerationOverflowError` carrying
    the partial list.

    Examples
    --------
    >>> chain = MixedGraph.from_edges(3, undirected=[(0, 1), (1, 2)])
    >>> len(enumerate_dags(chain))
    3
    """
    if cap < 1:
        raise ValueError("cap must be positive")
    if c.has_any_bidirected() or not is_acyclic(c):
        raise ValueError("input graph fails basic validity")
    base_vstructs = vstructures(c)
    found: dict[tuple, Dag] = {}

    def first_undirected(p: _Pdag) -> Optional[tuple[int, int]]:
        for i in range(p.d):
            for j in _bits_above(p.und[i], i):
                return (i, j)
        return None

    def rec(p: _Pdag) -> None:
        edge = first_undirected(p)
        if edge is None:
            edges = tuple(sorted((i, j) for i in range(p.d) for j in _bits(p.out[i])))
            if edges in found:
                return
            if not p.directed_acyclic():
                return
            dag = Dag(p.d, edges)
            if vstructures(dag) != base_vstructs:
                return
            if len(found) >= cap:
                raise EnumerationOverflowError(sorted(found.values(), key=lambda g: sorted(g.edges)), cap)
            found[edges] = dag
            return
        i, j = edge
        for a, b in ((i, j), (j, i)):
            q = p.copy()
            q.orient(a, b)
            _meek_closure(q, None, frozenset(), set())
            if q.directed_acyclic():
                rec(q)

    rec(_Pdag.from_mixed(c))
    return sorted(found.values(), key=lambda g: sorted(g.edges))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _default_names(d: int) -> tuple[str, ...]:
    return tuple(f"X{i}" for i in range(d))


def _check_names(d: int, names: Optional[Iterable[str]]) -> tuple[str, ...]:
    if names is None:
        return _default_names(d)
    ns = tuple(str(n) for n in names)
    if len(ns) != d:
        raise GraphFormatError(f"need {d} names, got {len(ns)}")
    if len(set(ns)) != d:
        raise GraphFormatError("node names must be unique")
    for n in ns:
        if not n or any(ch.isspace() for ch in n) or n in ("->", "--", "<->"):
            raise GraphFormatError(f"unusable node name {n!r}")
    return ns


def write_edge_list(g: MixedGraph, names: Optional[Iterable[str]] = None) -> str:
    """Serialize to the line-per-edge text format.

    The first line lists the node names in index order (which keeps
    isolated nodes); each following line is ``a -> b``, ``a -- b`` or
    ``a <-> b`` in canonical pair order. The output round-trips
    byte-exactly through :func:`parse_edge_list`.
    """
    ns = _check_names(g.d, names)
    lines = ["nodes: " + " ".join(ns)]
    for i, j in g.skeleton_pairs():
        m = g.mark(i, j)
        if m == MARK_UNDIRECTED:
            lines.append(f"{ns[i]} -- {ns[j]}")
        elif m == MARK_FORWARD:
            lines.append(f"{ns[i]} -> {ns[j]}")
        elif m == MARK_BACKWARD:
            lines.append(f"{ns[j]} -> {ns[i]}")
        else:
            lines.append(f"{ns[i]} <-> {ns[j]}")
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> tuple[MixedGraph, tuple[str, ...]]:
    """Inverse of :func:`write_edge_list`."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("nodes: "):
        raise GraphFormatError("first line must be 'nodes: <name> <name> ...'")
    names = tuple(lines[0][len("nodes: "):].split(" "))
    if len(names) < 2 or len(set(names)) != len(names) or any(not n for n in names):
        raise GraphFormatError("node list must have at least 2 distinct nonempty names")
    index = {n: i for i, n in enumerate(names)}
    directed, undirected, bidirected = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        m = _EDGE_LINE.match(line)
        if m is None:
            raise GraphFormatError(f"line {lineno}: cannot parse edge {line!r}")
        a, op, b = m.groups()
        if a not in index or b not in index:
            raise GraphFormatError(f"line {lineno}: unknown node name")
        pair = (index[a], index[b])
        if op == "->":
            directed.append(pair)
        elif op == "--":
            undirected.append(pair)
        else:
            bidirected.append(pair)
    try:
        g = MixedGraph.from_edges(len(names), directed, undirected, bidirected)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from exc
    return g, names


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_unquote(raw: str) -> str:
    return raw.replace('\\"', '"').replace("\\\\", "\\")


def write_dot(g: MixedGraph, names: Optional[Iterable[str]] = None) -> str:
    """Serialize to a DOT digraph (undirected edges use dir=none).

    Round-trips byte-exactly through :func:`parse_dot`.
    """
    ns = _check_names(g.d, names)
    lines = ["digraph {"]
    for n in ns:
        lines.append(f"  {_dot_quote(n)};")
    for i, j in g.skeleton_pairs():
        m = g.mark(i, j)
        if m == MARK_UNDIRECTED:
            lines.append(f"  {_dot_quote(ns[i])} -> {_dot_quote(ns[j])} [dir=none];")
        elif m == MARK_FORWARD:
            lines.append(f"  {_dot_quote(ns[i])} -> {_dot_quote(ns[j])};")
        elif m == MARK_BACKWARD:
            lines.append(f"  {_dot_quote(ns[j])} -> {_dot_quote(ns[i])};")
        else:
            lines.append(f"  {_dot_quote(ns[i])} -> {_dot_quote(ns[j])} [dir=both];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def parse_dot(text: str) -> tuple[MixedGraph, tuple[str, ...]]:
    """Inverse of :func:`write_dot` (accepts only that dialect)."""
    lines = text.splitlines()
    if not lines or lines[0] != "digraph {" or lines[-1] != "}":
        raise GraphFormatError("expected a 'digraph { ... }' block")
    names: list[str] = []
    edges: list[tuple[str, str, Optional[str]]] = []
    for lineno, line in enumerate(lines[1:-1], start=2):
        m = _DOT_NODE.match(line)
        if m is not None:
            names.append(_dot_unquote(m.group(1)))
            continue
        m = _DOT_EDGE.match(line)
        if m is not None:
            a, b, attr = m.groups()
            edges.append((_dot_unquote(a), _dot_unquote(b), attr))
            continue
        raise GraphFormatError(f"line {lineno}: cannot parse {line!r}")
    if len(names) < 2 or len(set(names)) != len(names):
        raise GraphFormatError("need at least 2 distinct node declarations")
    index = {n: i for i, n in enumerate(names)}
    directed, undirected, bidirected = [], [], []
    for a, b, attr in edges:
        if a not in index or b not in index:
            raise GraphFormatError(f"edge references undeclared node {a!r} or {b!r}")
        pair = (index[a], index[b])
        if attr is None:
            directed.append(pair)
        elif attr == "none":
            undirected.append(pair)
        else:
            bidirected.append(pair)
    try:
        g = MixedGraph.from_edges(len(names), directed, undirected, bidirected)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from exc
    return g, tuple(names)
