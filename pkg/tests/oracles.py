"""Independent reference implementations used only by the tests.

Nothing here imports the package's scoring or GED code, so agreement with
the package is evidence rather than tautology.
"""

from __future__ import annotations

import math
from collections import deque
from functools import lru_cache
from itertools import combinations

import networkx as nx
import numpy as np

MAX_ORACLE_VERTICES = 5


# ---------------------------------------------------------------------------
# scan statistics
# ---------------------------------------------------------------------------

def kl_bernoulli(x, a):
    """Bernoulli KL(x || a) with 0 log 0 = 0, written out term by term."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(x > 0, x * np.log(x / a), 0.0)
        t2 = np.where(x < 1, (1 - x) * np.log((1 - x) / (1 - a)), 0.0)
    return t1 + t2


def bj_ref(alpha, n_alpha, n):
    n_alpha = np.asarray(n_alpha, dtype=float)
    n = np.asarray(n, dtype=float)
    frac = np.divide(n_alpha, n, out=np.zeros_like(n_alpha), where=n > 0)
    val = n * kl_bernoulli(frac, alpha)
    return np.where(frac > alpha, val, 0.0)


def hc_ref(alpha, n_alpha, n):
    n_alpha = np.asarray(n_alpha, dtype=float)
    n = np.asarray(n, dtype=float)
    den = np.sqrt(np.maximum(n * alpha * (1 - alpha), 1e-300))
    return np.where(n > 0, np.maximum(0.0, (n_alpha - n * alpha) / den), 0.0)


def exhaustive_subset_max(p, statistic="BJ", alpha_max=0.15) -> float:
    """max over all 2^n - 1 non-empty subsets and every threshold in the global grid."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    masks = np.arange(1, 1 << n)
    member = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
    size = member.sum(axis=1)
    grid = np.unique(np.append(p[p <= alpha_max], alpha_max))
    grid = grid[grid < 1]
    fn = bj_ref if statistic == "BJ" else hc_ref
    best = 0.0
    for a in grid:
        n_a = member @ (p <= a).astype(float)
        best = max(best, float(fn(a, n_a, size).max()))
    return best


def ebp_ref(C, B):
    return C * math.log(C / B) + B - C if C > B else 0.0


def kull_ref(C, B, Ct, Bt):
    """Poisson likelihood ratio written as log L(alt) - log L(null)."""
    def ll(c, mu):
        return (c * math.log(mu) if c > 0 else 0.0) - mu
    if C / B <= (Ct - C) / (Bt - B):
        return 0.0
    q_in, q_out, q0 = C / B, (Ct - C) / (Bt - B), Ct / Bt
    alt = ll(C, q_in * B) + ll(Ct - C, q_out * (Bt - B))
    null = ll(C, q0 * B) + ll(Ct - C, q0 * (Bt - B))
    return alt - null


# ---------------------------------------------------------------------------
# graph edit distance by breadth-first search over edit operations
# ---------------------------------------------------------------------------

def _graph(n, edges) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    return g


class EditSpace:
    """All unlabeled graphs on at most ``max_n`` vertices, linked by single
    unit-cost edits (edge insert/delete, isolated vertex insert/delete).
    Shortest path lengths in this space are edit distances."""

    def __init__(self, max_n: int = MAX_ORACLE_VERTICES):
        self.max_n = max_n
        self.classes: list[nx.Graph] = []
        self.buckets: dict[tuple, list[int]] = {}
        for k in range(0, max_n + 1):
            for edges in _all_edge_sets(k):
                self.index(_graph(k, edges), add=True)
        self.adj = [set() for _ in self.classes]
        for i, g in enumerate(self.classes):
            for h in _one_edit(g, max_n):
                self.adj[i].add(self.index(h))
        self._dist: dict[int, list[int]] = {}

    @staticmethod
    def _key(g):
        return g.number_of_nodes(), g.number_of_edges(), tuple(sorted(d for _, d in g.degree()))

    def index(self, g: nx.Graph, add: bool = False) -> int:
        bucket = self.buckets.setdefault(self._key(g), [])
        for i in bucket:
            if nx.is_isomorphic(self.classes[i], g):
                return i
        if not add:
            raise KeyError("graph outside the enumerated space")
        self.classes.append(g)
        bucket.append(len(self.classes) - 1)
        return len(self.classes) - 1

    def distance(self, a: nx.Graph, b: nx.Graph) -> int:
        i, j = self.index(a), self.index(b)
        if i not in self._dist:
            dist = [-1] * len(self.classes)
            dist[i] = 0
            queue = deque([i])
            while queue:
                u = queue.popleft()
                for w in self.adj[u]:
                    if dist[w] < 0:
                        dist[w] = dist[u] + 1
                        queue.append(w)
            self._dist[i] = dist
        return self._dist[i][j]


def _all_edge_sets(k):
    pairs = list(combinations(range(k), 2))
    for mask in range(1 << len(pairs)):
        yield [pairs[t] for t in range(len(pairs)) if mask >> t & 1]


def _one_edit(g: nx.Graph, max_n: int):
    n = g.number_of_nodes()
    for u, v in combinations(range(n), 2):
        h = g.copy()
        if h.has_edge(u, v):
            h.remove_edge(u, v)
        else:
            h.add_edge(u, v)
        yield h
    if n < max_n:
        h = g.copy()
        h.add_node(n)
        yield h
    for v in range(n):
        if g.degree(v) == 0:
            h = g.copy()
            h.remove_node(v)
            yield nx.convert_node_labels_to_integers(h)


@lru_cache(maxsize=1)
def edit_space() -> EditSpace:
    return EditSpace()


def random_small_graph(rng: np.random.Generator, max_n: int = MAX_ORACLE_VERTICES):
    n = int(rng.integers(0, max_n + 1))
    dens = rng.uniform(0, 1)
    edges = [(u, v) for u, v in combinations(range(n), 2) if rng.random() < dens]
    return n, edges
