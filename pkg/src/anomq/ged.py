"""Graph edit distance on unlabeled graphs with unit costs.

Vertex insertion/deletion and edge insertion/deletion all cost 1 and
relabelling is free. For such costs an optimal edit path maps every vertex
of the smaller graph onto a distinct vertex of the larger one, so

    ged(A, B) = |n_A - n_B| + |E_A| + |E_B| - 2 * (edges preserved by the map)

and the search reduces to maximising preserved edges over injections.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from math import perm

import numpy as np

EXACT_LIMIT = 16
DEFAULT_NODE_BUDGET = 200_000
# pairs with at most this many injections are scored exhaustively in one vectorised pass
ENUMERATION_LIMIT = 200_000


@dataclass(frozen=True)
class GedResult:
    distance: int
    exact: bool
    mapping: dict[int, int | None] | None = None


class GedTooLarge(ValueError):
    pass


def _adjacency(g) -> tuple[list, dict]:
    """Return (vertex list, adjacency dict of sets) for any object with ``vertices``/``edges``."""
    if isinstance(g, tuple):
        verts, edges = g
    else:
        verts, edges = g.vertices, g.edges
    verts = list(verts)
    adj = {v: set() for v in verts}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return verts, adj


def _n_edges(adj) -> int:
    return sum(len(s) for s in adj.values()) // 2


def _cost(na, nb, ea, eb, preserved) -> int:
    return abs(na - nb) + ea + eb - 2 * preserved


def _preserved(small_adj, large_adj, mapping) -> int:
    kept = 0
    for u, nbrs in small_adj.items():
        mu = mapping[u]
        for w in nbrs:
            if u < w and mapping[w] in large_adj[mu]:
                kept += 1
    return kept


def _orient(a, b):
    va, adj_a = _adjacency(a)
    vb, adj_b = _adjacency(b)
    swapped = len(va) > len(vb)
    if swapped:
        va, adj_a, vb, adj_b = vb, adj_b, va, adj_a
    return va, adj_a, vb, adj_b, swapped


def _export_mapping(mapping, small_v, large_v, swapped):
    """Mapping from ``a``'s vertices to ``b``'s (``None`` = deleted)."""
    if not swapped:
        return dict(mapping)
    inv = {w: u for u, w in mapping.items()}
    return {w: inv.get(w) for w in large_v}


def ged_exact(a, b, exact_limit: int = EXACT_LIMIT,
              node_budget: int | None = DEFAULT_NODE_BUDGET) -> GedResult:
    """Minimum unit-cost edit distance by depth-first branch and bound.

    Vertices of the smaller graph are placed in BFS order onto the larger
    graph. A branch is cut when the edges already preserved plus an upper
    bound on those still undecided cannot beat the incumbent. If
    ``node_budget`` search nodes are exhausted the incumbent is returned
    with ``exact=False``.
    """
    return _search(a, b, exact_limit, node_budget, None)


def ged_within(a, b, max_distance: int, exact_limit: int = EXACT_LIMIT,
               node_budget: int | None = DEFAULT_NODE_BUDGET) -> GedResult | None:
    """Exact distance if it is at most ``max_distance``, else None.

    Much cheaper than :func:`ged_exact` when most candidates are far away,
    because the cutoff seeds the branch-and-bound incumbent.
    """
    return _search(a, b, exact_limit, node_budget, max_distance)


def ged_lower_bound(a, b) -> int:
    """Cheap lower bound on the unit-cost distance from vertex counts and degree sequences."""
    small_v, sadj, large_v, ladj, _ = _orient(a, b)
    es, el = _n_edges(sadj), _n_edges(ladj)
    pair = _pairing_bound([len(sadj[v]) for v in small_v], [len(ladj[x]) for x in large_v])
    return abs(len(small_v) - len(large_v)) + es + el - 2 * min(es, el, pair // 2)


def _search(a, b, exact_limit, node_budget, max_distance):
    small_v, sadj, large_v, ladj, swapped = _orient(a, b)
    if len(small_v) + len(large_v) > exact_limit:
        raise GedTooLarge(f"{len(small_v)} + {len(large_v)} vertices exceed exact_limit={exact_limit}")
    es, el = _n_edges(sadj), _n_edges(ladj)
    ns, nl = len(small_v), len(large_v)
    if ns == 0:
        d = nl + el
        if max_distance is not None and d > max_distance:
            return None
        return GedResult(d, True, _export_mapping({}, small_v, large_v, swapped))

    order = _bfs_order(small_v, sadj)
    pos = {v: i for i, v in enumerate(order)}
    # edges from order[i] back to earlier-placed vertices
    back = [[w for w in sadj[v] if pos[w] < i] for i, v in enumerate(order)]
    # undecided[i]: small edges whose later endpoint sits at position >= i
    undecided = [0] * (ns + 1)
    for i in range(ns - 1, -1, -1):
        undecided[i] = undecided[i + 1] + len(back[i])
    sdeg = [len(sadj[v]) for v in order]
    cap = min(es, el, _pairing_bound(sdeg, [len(ladj[x]) for x in large_v]) // 2)

    fixed = abs(ns - nl) + es + el
    if max_distance is not None and -(-(fixed - max_distance) // 2) > cap:
        return None
    if perm(nl, ns) <= ENUMERATION_LIMIT:
        kept, best_map = _enumerate(small_v, sadj, large_v, ladj)
        dist = fixed - 2 * kept
        if max_distance is not None and dist > max_distance:
            return None
        return GedResult(dist, True, _export_mapping(best_map, small_v, large_v, swapped))

    if max_distance is None:
        start = _greedy_assignment(small_v, sadj, large_v, ladj)
        best_kept, best_map = _preserved(sadj, ladj, start), dict(start)
    else:
        # a solution must keep at least ceil((fixed - max_distance) / 2) edges
        need = -(-(fixed - max_distance) // 2)
        if need > cap:
            return None
        best_kept, best_map = max(need, 0) - 1, None

    mapping: dict[int, int] = {}
    used: set[int] = set()
    nodes = 0
    exhausted = False

    def dfs(i: int, kept: int):
        nonlocal best_kept, best_map, nodes, exhausted
        if i == ns:
            if kept > best_kept:
                best_kept, best_map = kept, dict(mapping)
            return
        nodes += 1
        if node_budget is not None and nodes > node_budget:
            exhausted = True
            return
        v = order[i]
        images = [mapping[w] for w in back[i]]
        rest = undecided[i + 1]
        cands = []
        for x in large_v:
            if x in used:
                continue
            gain = 0
            for y in images:
                if y in ladj[x]:
                    gain += 1
            if kept + gain + rest > best_kept:
                cands.append((gain, x))
        cands.sort(key=lambda t: -t[0])
        for gain, x in cands:
            if kept + gain + rest <= best_kept:
                break
            mapping[v] = x
            used.add(x)
            dfs(i + 1, kept + gain)
            used.discard(x)
            del mapping[v]
            if exhausted or best_kept >= cap:
                return

    dfs(0, 0)
    if best_map is None:
        if exhausted:
            alt = ged_bounded(a, b)
            return alt if alt.distance <= max_distance else None
        return None
    dist = fixed - 2 * best_kept
    return GedResult(dist, not exhausted, _export_mapping(best_map, small_v, large_v, swapped))


@lru_cache(maxsize=32)
def _injections(nl: int, ns: int) -> np.ndarray:
    out = np.array(list(permutations(range(nl), ns)), dtype=np.int8)
    out.setflags(write=False)
    return out


def _enumerate(small_v, sadj, large_v, ladj) -> tuple[int, dict]:
    """Best injection by scoring every one of them; ties go to the first in lexicographic order."""
    sidx = {v: i for i, v in enumerate(small_v)}
    lidx = {v: i for i, v in enumerate(large_v)}
    L = np.zeros((len(large_v), len(large_v)), dtype=np.int8)
    for u, nbrs in ladj.items():
        for w in nbrs:
            L[lidx[u], lidx[w]] = 1
    inj = _injections(len(large_v), len(small_v))
    kept = np.zeros(len(inj), dtype=np.int16)
    for u, nbrs in sadj.items():
        for w in nbrs:
            if sidx[u] < sidx[w]:
                kept += L[inj[:, sidx[u]], inj[:, sidx[w]]]
    best = int(np.argmax(kept))
    row = inj[best]
    return int(kept[best]), {v: large_v[int(row[i])] for i, v in enumerate(small_v)}


def _pairing_bound(sdeg, ldeg) -> int:
    """Upper bound on twice the preserved edge count: a vertex ``u`` mapped to
    ``x`` keeps at most ``min(deg(u), deg(x))`` incident edges and every kept
    edge is seen from both ends. Sorted pairing maximises the sum."""
    a = sorted(sdeg, reverse=True)
    b = sorted(ldeg, reverse=True)
    return sum(min(x, y) for x, y in zip(a, b))


def _bfs_order(verts, adj) -> list:
    order, seen = [], set()
    for root in sorted(verts, key=lambda v: (-len(adj[v]), v)):
        if root in seen:
            continue
        seen.add(root)
        queue = [root]
        while queue:
            u = queue.pop(0)
            order.append(u)
            for w in sorted(adj[u] - seen, key=lambda v: (-len(adj[v]), v)):
                seen.add(w)
                queue.append(w)
    return order


def _greedy_assignment(small_v, sadj, large_v, ladj) -> dict:
    """Neighbour-aware greedy injection: BFS over the small graph, each vertex
    goes to the free large vertex keeping most edges, then closest degree."""
    mapping, used = {}, set()
    for v in _bfs_order(small_v, sadj):
        images = [mapping[w] for w in sadj[v] if w in mapping]
        best = None
        for x in large_v:
            if x in used:
                continue
            key = (-sum(1 for y in images if y in ladj[x]), abs(len(ladj[x]) - len(sadj[v])),
                   -len(ladj[x]))
            if best is None or key < best[0]:
                best = (key, x)
        mapping[v] = best[1]
        used.add(best[1])
    return mapping


def _degree_sorted_assignment(small_v, sadj, large_v, ladj) -> dict:
    s = sorted(small_v, key=lambda v: (-len(sadj[v]), v))
    l = sorted(large_v, key=lambda v: (-len(ladj[v]), v))
    return dict(zip(s, l))


def ged_bounded(a, b, max_swap_rounds: int = 50) -> GedResult:
    """Upper bound on the GED from heuristic vertex assignments.

    Starts from the better of a degree-sorted assignment and a
    neighbour-aware greedy assignment, then applies improving pairwise
    swaps (including swaps with unused large-graph vertices). Every
    candidate is a valid edit path, so the result never undercuts the true
    distance.
    """
    small_v, sadj, large_v, ladj, swapped = _orient(a, b)
    ns, nl = len(small_v), len(large_v)
    es, el = _n_edges(sadj), _n_edges(ladj)
    if ns == 0:
        return GedResult(nl + el, False, _export_mapping({}, small_v, large_v, swapped))
    cands = [_degree_sorted_assignment(small_v, sadj, large_v, ladj),
             _greedy_assignment(small_v, sadj, large_v, ladj)]
    mapping = max(cands, key=lambda m: _preserved(sadj, ladj, m))
    kept = _preserved(sadj, ladj, mapping)
    cap = min(es, el)
    for _ in range(max_swap_rounds):
        if kept == cap:
            break
        improved = False
        free = [x for x in large_v if x not in set(mapping.values())]
        for u, w in combinations(small_v, 2):
            mapping[u], mapping[w] = mapping[w], mapping[u]
            k = _preserved(sadj, ladj, mapping)
            if k > kept:
                kept, improved = k, True
            else:
                mapping[u], mapping[w] = mapping[w], mapping[u]
        for u in small_v:
            for j, x in enumerate(free):
                old = mapping[u]
                mapping[u] = x
                k = _preserved(sadj, ladj, mapping)
                if k > kept:
                    kept, improved = k, True
                    free[j] = old
                else:
                    mapping[u] = old
        if not improved:
            break
    return GedResult(_cost(ns, nl, es, el, kept), False,
                     _export_mapping(mapping, small_v, large_v, swapped))


def ged(a, b, exact_limit: int = EXACT_LIMIT, node_budget: int | None = DEFAULT_NODE_BUDGET,
        max_distance: int | None = None) -> GedResult | None:
    """Exact distance when the pair is small enough, bounded heuristic otherwise.

    With ``max_distance`` set, returns None when the distance provably (or,
    on the heuristic path, apparently) exceeds it.
    """
    na = len(a[0]) if isinstance(a, tuple) else len(list(a.vertices))
    nb = len(b[0]) if isinstance(b, tuple) else len(list(b.vertices))
    if na + nb <= exact_limit:
        res = _search(a, b, exact_limit, node_budget, max_distance)
        if res is None or res.exact:
            return res
        alt = ged_bounded(a, b)
        return alt if alt.distance < res.distance else res
    res = ged_bounded(a, b)
    if max_distance is not None and res.distance > max_distance:
        return None
    return res
