"""Query-shaped anomaly search.

The search alternates two bounds. The upper bound is a structure-free set
of at most ``m`` high-priority vertices; the lower bound assembles stars
rooted in that set into a subgraph close (in edit distance) to the query.
Vertices that fall out of agreement between the two are replaced by the
next unconsumed vertices in priority order until the two scores meet.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, permutations

import numpy as np

from .ged import EXACT_LIMIT, DEFAULT_NODE_BUDGET, ged, ged_lower_bound
from .graph import AttributedGraph, QueryGraph, Subgraph, induced_subgraph
from .stats import PriorityOrder, ScoreSpec, ScoreValue, SubsetScorer, priority_sort

log = logging.getLogger(__name__)

SCHEMA = "anomq/v1"
EMPTY = Subgraph(frozenset(), frozenset())


class QueryError(ValueError):
    """Precondition failure, e.g. a query larger than the graph."""


@dataclass(frozen=True)
class StarPattern:
    """Query vertex ``center_query_vertex`` with its ``leaf_count`` neighbours.

    ``leaf_edges`` are the query edges among those neighbours, on local leaf
    indices ``0..leaf_count-1``; empty for a plain star.
    """

    center_query_vertex: int
    leaf_count: int
    leaf_edges: frozenset[tuple[int, int]] = frozenset()

    @property
    def leaf_signature(self):
        return _canonical_form(self.leaf_count, self.leaf_edges)


@dataclass(frozen=True)
class StarMatch:
    root: int
    pattern_index: int
    vertices: frozenset[int]
    score: float


@dataclass
class TraceRow:
    iteration: int
    f_up: float
    f_low: float
    ged: int | None
    s_up: list[int]
    s_low: list[int]


@dataclass
class SearchState:
    i: int = 0
    s_up: frozenset[int] = frozenset()
    s_low: Subgraph = EMPTY
    consumed: int = 0
    epsilon: float = 1e-6
    trace: list[TraceRow] = field(default_factory=list)


@dataclass
class QueryResult:
    subgraph: Subgraph
    score: ScoreValue
    ged: int | None
    ged_exact: bool
    iterations: int
    feasible: bool
    status: str
    trace: list[TraceRow]
    runtime_ms: float = 0.0

    @property
    def vertices(self) -> list[int]:
        return self.subgraph.vertices

    @property
    def no_signal(self) -> bool:
        return self.score.value <= 0.0

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "vertices": self.subgraph.vertices,
            "edges": sorted(map(list, self.subgraph.edges)),
            "score": self.score.value,
            "alpha_star": self.score.alpha_star,
            "ged": self.ged,
            "ged_exact": self.ged_exact,
            "iterations": self.iterations,
            "feasible": self.feasible,
            "no_signal": self.no_signal,
            "status": self.status,
            "trace": [
                {"iteration": t.iteration, "f_up": t.f_up, "f_low": t.f_low, "ged": t.ged,
                 "s_up": t.s_up, "s_low": t.s_low}
                for t in self.trace
            ],
            "runtime_ms": self.runtime_ms,
        }


def decompose_stars(q: QueryGraph) -> list[StarPattern]:
    """One star per query vertex: the vertex and all of its neighbours."""
    adj: dict[int, set[int]] = {v: set() for v in range(q.m)}
    for u, w in q.edges:
        adj[u].add(w)
        adj[w].add(u)
    out = []
    for v in range(q.m):
        leaves = sorted(adj[v])
        local = {x: i for i, x in enumerate(leaves)}
        among = frozenset((local[a], local[b]) for a, b in q.edges if a in local and b in local)
        out.append(StarPattern(v, len(leaves), among))
    return out


# leaf sets larger than this skip the exact neighbourhood-shape check
MAX_SHAPED_LEAVES = 6
# extra lowest-rank neighbours considered beyond leaf_count when shaping leaves
LEAF_POOL_SLACK = 4
# leaf sets kept per (root, pattern) for the assembly
STAR_ALTERNATIVES = 3


@lru_cache(maxsize=4096)
def _canonical_form(k: int, edges: frozenset) -> tuple:
    """Isomorphism-invariant key of a graph on ``0..k-1`` (brute force, small ``k``)."""
    if k > MAX_SHAPED_LEAVES:
        return (k, len(edges))
    best = None
    for perm in permutations(range(k)):
        code = tuple(sorted((min(perm[a], perm[b]), max(perm[a], perm[b])) for a, b in edges))
        if best is None or code < best:
            best = code
    return (k, best)


def query_order(g: AttributedGraph, order: PriorityOrder, q: QueryGraph) -> PriorityOrder:
    """Re-rank ``order`` with ties broken by closeness of degree to the query's max degree, then id."""
    dgap = np.abs(g.degrees - q.max_degree)
    ranked = np.lexsort((np.arange(g.n), dgap, -order.key))
    return PriorityOrder(ranked, order.key)


def select_roots(g: AttributedGraph, order: PriorityOrder, q: QueryGraph) -> list[int]:
    """The ``m`` best vertices by (priority, closeness of degree to the query's max degree, id)."""
    if g.n < q.m:
        raise QueryError(f"query has {q.m} vertices but graph only {g.n}")
    return sorted(int(v) for v in query_order(g, order, q).order[:q.m])


def build_upper_bound(state: SearchState, order: PriorityOrder, m: int) -> frozenset[int]:
    """Keep the part of ``s_up`` the lower bound agreed with and refill to ``m``
    from the unconsumed tail of ``order``. Advances ``state.consumed``."""
    keep = state.s_up & state.s_low.vertex_set
    need = m - len(keep)
    new = []
    seq = order.order
    while need > 0 and state.consumed < len(seq):
        v = int(seq[state.consumed])
        state.consumed += 1
        if v not in keep:
            new.append(v)
            need -= 1
    return frozenset(keep) | frozenset(new)


def best_star_match(g: AttributedGraph, v: int, pat: StarPattern, scorer: SubsetScorer,
                    pattern_index: int = 0, rank_key: np.ndarray | None = None) -> StarMatch | None:
    """Highest-scoring star ``v + leaves`` shaped like ``pat``; None if ``deg(v) < leaf_count``.

    Leaves are drawn from the ``leaf_count + LEAF_POOL_SLACK`` most anomalous
    neighbours (``rank_key``, smaller = more anomalous, ties by id) and must
    induce the same adjacency among themselves as the query vertex's
    neighbours do. When no pooled leaf set has that shape, the
    ``leaf_count`` most anomalous neighbours are used as they are.
    """
    found = star_matches(g, v, pat, scorer, pattern_index, rank_key, limit=1)
    return found[0] if found else None


def star_matches(g: AttributedGraph, v: int, pat: StarPattern, scorer: SubsetScorer,
                 pattern_index: int = 0, rank_key: np.ndarray | None = None,
                 limit: int = 1) -> list[StarMatch]:
    """Up to ``limit`` distinct star matches at ``v``, best first (see :func:`best_star_match`)."""
    nb = g.neighbors(v)
    k = pat.leaf_count
    if len(nb) < k:
        return []
    if rank_key is None:
        rank_key = _rank_key(g, scorer)
    ranked = [int(x) for x in nb[np.lexsort((nb, rank_key[nb]))]]
    fallback = frozenset(ranked[:k]) | {int(v)}
    if k > MAX_SHAPED_LEAVES or k == 0:
        return [StarMatch(int(v), pattern_index, fallback, scorer.value(sorted(fallback)))]

    pool = ranked[:k + LEAF_POOL_SLACK]
    target = pat.leaf_signature
    pair_edge = {(a, b): g.has_edge(a, b) for a, b in combinations(pool, 2)}
    found = []
    for leaves in combinations(pool, k):
        edges = frozenset((i, j) for i, j in combinations(range(k), 2)
                          if pair_edge[(leaves[i], leaves[j])])
        if _canonical_form(k, edges) != target:
            continue
        verts = frozenset(leaves) | {int(v)}
        found.append((-scorer.value(sorted(verts)), len(found), verts))
        if limit == 1 and leaves == tuple(pool[:k]) and scorer.spec.nonparametric:
            break  # BJ/HC are monotone in the ranking, so nothing scores higher
    if not found:
        return [StarMatch(int(v), pattern_index, fallback, scorer.value(sorted(fallback)))]
    found.sort(key=lambda t: t[:2])
    return [StarMatch(int(v), pattern_index, verts, -neg) for neg, _, verts in found[:limit]]


def _rank_key(g, scorer: SubsetScorer) -> np.ndarray:
    if scorer.spec.nonparametric:
        return np.asarray(g.pvalues, dtype=float)
    return -(scorer.C / scorer.B)


class _GedCache:
    """Per-query memo of induced unions and their distance to ``q``.

    A union is only solved when a cheap degree-sequence bound is within the
    caller's cutoff, and the solve itself stops at that cutoff. A failed
    solve raises the cached lower bound; a successful one is kept for good.
    """

    def __init__(self, g, q, exact_limit, node_budget):
        self.g, self.q = g, q
        self.exact_limit, self.node_budget = exact_limit, node_budget
        self.subs: dict[frozenset, Subgraph] = {}
        self.known: dict[frozenset, tuple[int, bool]] = {}
        self.lower: dict[frozenset, int] = {}

    def subgraph(self, vs: frozenset) -> Subgraph:
        sub = self.subs.get(vs)
        if sub is None:
            sub = self.subs[vs] = induced_subgraph(self.g, vs)
        return sub

    def distance(self, vs: frozenset, max_distance=None) -> int | None:
        """Distance of ``vs`` to ``q``, or None if it exceeds ``max_distance``."""
        hit = self.known.get(vs)
        if hit is None:
            sub = self.subgraph(vs)
            if max_distance is not None:
                lower = self.lower.get(vs)
                if lower is None:
                    lower = self.lower[vs] = ged_lower_bound(sub, self.q)
                if lower > max_distance:
                    return None
            res = ged(sub, self.q, self.exact_limit, self.node_budget, max_distance)
            if res is None:
                self.lower[vs] = max_distance + 1
                return None
            hit = self.known[vs] = (res.distance, res.exact)
        if max_distance is not None and hit[0] > max_distance:
            return None
        return hit[0]

    def __call__(self, vs: frozenset) -> tuple[Subgraph, int, bool]:
        """``(subgraph, distance, exact)``."""
        self.distance(vs)
        return (self.subgraph(vs),) + self.known[vs]


def max_q(g: AttributedGraph, s_up, q: QueryGraph, spec: ScoreSpec | None = None, *,
          scorer: SubsetScorer | None = None, ged_fn=None, match_memo: dict | None = None,
          score_memo: dict | None = None,
          exact_limit: int = EXACT_LIMIT, node_budget: int | None = DEFAULT_NODE_BUDGET,
          multi_start: bool = True, star_alternatives: int = STAR_ALTERNATIVES
          ) -> tuple[Subgraph, int | None, bool]:
    """Assemble star matches rooted in ``s_up`` into a query-like subgraph.

    Starting from the empty set, repeatedly union the unused match whose
    induced union is closest to ``q`` (ties: higher union score, higher match
    score, lower root id, lower pattern index) and stop once the distance strictly increases
    or no match is left. Returns ``(subgraph, ged, ged_is_exact)`` for the
    last set before the increase; the empty subgraph if no star fits.

    With ``multi_start`` the assembly is rerun seeded with every distinct
    match and the closest result (ties: higher score) is kept; this recovers
    shapes that only appear as the union of two individually worse stars.
    """
    if not s_up:
        raise QueryError("max_q needs a non-empty upper-bound set")
    scorer = scorer or SubsetScorer(g, spec)
    ged_fn = ged_fn or _GedCache(g, q, exact_limit, node_budget)
    rank_key = _rank_key(g, scorer)
    patterns = decompose_stars(q)
    match_memo = {} if match_memo is None else match_memo

    matches: list[StarMatch] = []
    for v in sorted(s_up):
        for k, pat in enumerate(patterns):
            key = (v, pat.leaf_count, pat.leaf_signature, star_alternatives)
            if key not in match_memo:
                match_memo[key] = star_matches(g, v, pat, scorer, k, rank_key, star_alternatives)
            for sm in match_memo[key]:
                matches.append(StarMatch(sm.root, k, sm.vertices, sm.score))
    if not matches:
        return EMPTY, None, True

    score_memo = {} if score_memo is None else score_memo

    def union_score(vs):
        if vs not in score_memo:
            score_memo[vs] = scorer.value(sorted(vs))
        return score_memo[vs]

    # the greedy continuation depends only on the current vertex set (every
    # consumed match is a subset of it), so restarts share one memo
    finished: dict[frozenset, tuple[Subgraph, int | None, bool]] = {}

    def assemble(first: StarMatch | None):
        current: frozenset[int] = frozenset()
        cur_ged = float("inf")  # the first step is always taken
        cur_sub, cur_exact = EMPTY, True
        if first is not None:
            current = first.vertices
            cur_sub, cur_ged, cur_exact = ged_fn(current)
        path = []
        while current not in finished:
            path.append(current)
            best = None
            for sm in matches:
                union = current | sm.vertices
                if union == current:
                    continue
                cutoff = cur_ged if best is None else min(cur_ged, best[0][0])
                d = ged_fn.distance(union, cutoff)
                if d is None:
                    continue
                key = (d, -union_score(union), -sm.score, sm.root, sm.pattern_index)
                if best is None or key < best[0]:
                    best = (key, union)
            if best is None:
                finished[current] = (cur_sub, cur_ged, cur_exact)
                break
            current = best[1]
            cur_sub, cur_ged, cur_exact = ged_fn(current)
        out = finished[current]
        for vs in path:
            finished[vs] = out
        return out

    if not multi_start:
        return assemble(None)
    best_out, best_key = None, None
    seen: set[frozenset] = set()
    for sm in matches:
        if sm.vertices in seen:
            continue
        seen.add(sm.vertices)
        out = assemble(sm)
        key = (out[1], -union_score(out[0].vertex_set))
        if best_key is None or key < best_key:
            best_out, best_key = out, key
    return best_out


def anomaly_max_q(g: AttributedGraph, q: QueryGraph, spec: ScoreSpec | None = None,
                  epsilon: float = 1e-6, max_iters: int | None = None, *,
                  exact_limit: int = EXACT_LIMIT,
                  node_budget: int | None = DEFAULT_NODE_BUDGET,
                  multi_start: bool = True, star_alternatives: int = STAR_ALTERNATIVES) -> QueryResult:
    """Most anomalous subgraph approximately isomorphic to ``q``.

    Iterates upper-bound refill and star assembly until
    ``|F(s_up) - F(s_low)| < epsilon``, the priority order is exhausted,
    the upper bound reaches a fixed point, or ``max_iters`` (default ``n``)
    passes. Returns the best lower bound seen in any iteration: closest to
    ``q`` in edit distance, then highest score, then earliest.
    """
    t0 = time.perf_counter()
    spec = spec or ScoreSpec()
    if g.n < q.m:
        raise QueryError(f"query has {q.m} vertices but graph only {g.n}")
    max_iters = g.n if max_iters is None else max_iters
    scorer = SubsetScorer(g, spec)
    order = query_order(g, priority_sort(g, spec), q)
    ged_fn = _GedCache(g, q, exact_limit, node_budget)
    match_memo: dict = {}
    score_memo: dict = {}
    state = SearchState(epsilon=epsilon)

    best = None  # (key, subgraph, ScoreValue, ged, exact)
    status = "max_iters"
    while state.i < max_iters:
        prev_up = state.s_up
        s_up = build_upper_bound(state, order, q.m)
        if not s_up:
            status = "exhausted"
            break
        if state.i > 0 and s_up == prev_up:
            status = "fixed_point"
            break
        state.s_up = s_up
        s_low, d, exact = max_q(g, s_up, q, scorer=scorer, ged_fn=ged_fn, match_memo=match_memo,
                                score_memo=score_memo, multi_start=multi_start,
                                star_alternatives=star_alternatives)
        state.s_low = s_low
        f_up = scorer.value(sorted(s_up))
        low_sv = scorer(s_low.vertices)
        state.i += 1
        state.trace.append(TraceRow(state.i, f_up, low_sv.value, d, sorted(s_up), s_low.vertices))
        if s_low.vertex_set:
            key = (-d, low_sv.value, -state.i)
            if best is None or key > best[0]:
                best = (key, s_low, low_sv, d, exact)
        # an empty lower bound is no feasible solution, so it cannot certify convergence
        if s_low.vertex_set and abs(f_up - low_sv.value) < epsilon:
            status = "converged"
            break
        if state.consumed >= len(order) and not (s_up - s_low.vertex_set):
            status = "exhausted"
            break

    runtime = (time.perf_counter() - t0) * 1000
    if best is None:
        return QueryResult(EMPTY, ScoreValue(0.0), None, True, state.i, False,
                           "infeasible", state.trace, runtime)
    _, sub, sv, d, exact = best
    return QueryResult(sub, sv, d, exact, state.i, True, status, state.trace, runtime)
