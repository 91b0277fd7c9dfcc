"""Attributed network model, file ingestion and query-shape builders."""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Edge = tuple[int, int]
_N_HEADER = re.compile(r"^#\s*n=(\d+)")


class GraphFormatError(ValueError):
    """Raised for malformed graph, attribute or query input."""


def _canonical_edges(edges: Iterable[Sequence[int]]) -> tuple[np.ndarray, int, int]:
    """Return unique (u < v) edges plus the number of self-loops and duplicates dropped."""
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64), 0, 0
    arr = arr.reshape(-1, 2)
    loops = arr[:, 0] == arr[:, 1]
    n_loops = int(loops.sum())
    arr = np.sort(arr[~loops], axis=1)
    uniq = np.unique(arr, axis=0)
    return uniq, n_loops, len(arr) - len(uniq)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected graph on dense ids ``0..n-1`` stored in CSR form.

    ``attrs`` is the ``n x T`` observation matrix and ``pvalues`` an optional
    per-vertex vector in (0, 1]. Instances are treated as immutable; the
    ``with_*`` helpers return new graphs sharing the adjacency arrays.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    attrs: np.ndarray | None = None
    pvalues: np.ndarray | None = None
    names: tuple[str, ...] | None = None
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.attrs is not None and self.attrs.shape[0] != self.n:
            raise GraphFormatError(f"attrs has {self.attrs.shape[0]} rows, expected {self.n}")
        if self.pvalues is not None:
            p = self.pvalues
            if p.shape != (self.n,):
                raise GraphFormatError(f"pvalues has shape {p.shape}, expected ({self.n},)")
            if not np.all((p > 0) & (p <= 1)):
                raise GraphFormatError("p-values must lie in (0, 1]")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], **kw) -> "AttributedGraph":
        uniq, n_loops, n_dups = _canonical_edges(edges)
        if uniq.size and (uniq.min() < 0 or uniq.max() >= n):
            raise GraphFormatError(f"edge endpoint outside 0..{n - 1}")
        src = np.concatenate([uniq[:, 0], uniq[:, 1]])
        dst = np.concatenate([uniq[:, 1], uniq[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        stats = {"vertices": n, "edges": len(uniq), "self_loops_dropped": n_loops,
                 "duplicates_dropped": n_dups}
        return cls(n=n, indptr=indptr, indices=dst.astype(np.int64), stats=stats, **kw)

    # adjacency ----------------------------------------------------------
    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edges(self) -> np.ndarray:
        """All edges as an ``(p, 2)`` array with ``u < v``."""
        src = np.repeat(np.arange(self.n), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    # derived graphs -----------------------------------------------------
    def with_pvalues(self, pvalues) -> "AttributedGraph":
        p = np.asarray(pvalues, dtype=float)
        return AttributedGraph(self.n, self.indptr, self.indices, self.attrs, p, self.names,
                               dict(self.stats))

    def with_attrs(self, attrs) -> "AttributedGraph":
        a = np.asarray(attrs, dtype=float)
        return AttributedGraph(self.n, self.indptr, self.indices, a, self.pvalues, self.names,
                               dict(self.stats))


@dataclass(frozen=True)
class Subgraph:
    """Vertex-induced subgraph of a host graph."""

    vertex_set: frozenset[int]
    edges: frozenset[Edge]

    @property
    def vertices(self) -> list[int]:
        return sorted(self.vertex_set)

    def __len__(self):
        return len(self.vertex_set)


@dataclass(frozen=True)
class QueryGraph:
    """Small connected target shape on vertices ``0..m-1``."""

    m: int
    edges: frozenset[Edge]
    shape_tag: str = "custom"

    def __post_init__(self):
        if self.m < 2:
            raise GraphFormatError(f"query needs at least 2 vertices, got {self.m}")
        for u, v in self.edges:
            if u == v:
                raise GraphFormatError(f"self-loop on query vertex {u}")
            if not (0 <= u < self.m and 0 <= v < self.m):
                raise GraphFormatError(f"query edge ({u}, {v}) outside 0..{self.m - 1}")
        if not _connected(self.m, self.edges):
            raise GraphFormatError("query graph is disconnected")

    @property
    def vertices(self) -> range:
        return range(self.m)

    def degree_sequence(self) -> list[int]:
        deg = [0] * self.m
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return max(self.degree_sequence())

    def to_json(self) -> dict:
        return {"shape": self.shape_tag, "m": self.m, "edges": sorted(map(list, self.edges))}


def _connected(m: int, edges: Iterable[Edge]) -> bool:
    adj: dict[int, list[int]] = {v: [] for v in range(m)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == m


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def load_edge_list(path) -> AttributedGraph:
    """Read a whitespace/TAB separated ``src dst`` edge list.

    Lines starting with ``#`` are ignored, except that a ``# n=<count>``
    comment (as written by :func:`write_edge_list`) keeps trailing isolated
    vertices. Self-loops and duplicate
    (including reversed) edges are dropped and counted in ``graph.stats``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphFormatError(f"cannot read edge list {path}: {exc}") from exc
    pairs = []
    declared_n = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            m = _N_HEADER.search(line)
            if m:
                declared_n = int(m.group(1))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'src<TAB>dst', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: non-integer vertex id in {line!r}") from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"{path}:{lineno}: negative vertex id")
        pairs.append((u, v))
    if not pairs:
        raise GraphFormatError(f"{path}: empty graph")
    n = max(declared_n, max(max(p) for p in pairs) + 1)
    g = AttributedGraph.from_edges(n, pairs)
    dropped = g.stats["self_loops_dropped"] + g.stats["duplicates_dropped"]
    if dropped:
        log.warning("%s: dropped %d self-loops and %d duplicate edges", path,
                    g.stats["self_loops_dropped"], g.stats["duplicates_dropped"])
    return g


def write_edge_list(g: AttributedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={g.n} edges={g.n_edges}\n")
        for u, v in g.edges():
            fh.write(f"{u}\t{v}\n")


def load_attributes(path, g: AttributedGraph, fill_value: float = 0.0) -> AttributedGraph:
    """Attach an ``n x T`` attribute matrix read from ``vertex,t_0,...`` CSV.

    Vertices without a row are filled with ``fill_value``; the count is
    stored as ``stats["attrs_missing"]``.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise GraphFormatError(f"cannot read attributes {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "vertex" or len(header) < 2:
            raise GraphFormatError(f"{path}: header must be 'vertex,t_0,...'")
        T = len(header) - 1
        attrs = np.full((g.n, T), fill_value, dtype=float)
        seen = np.zeros(g.n, dtype=bool)
        for rowno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != T + 1:
                raise GraphFormatError(f"{path}:{rowno}: expected {T + 1} columns, got {len(row)}")
            try:
                v = int(row[0])
            except ValueError:
                raise GraphFormatError(f"{path}:{rowno}: bad vertex id {row[0]!r}") from None
            if not 0 <= v < g.n:
                raise GraphFormatError(f"{path}:{rowno}: vertex {v} outside 0..{g.n - 1}")
            if seen[v]:
                raise GraphFormatError(f"{path}:{rowno}: duplicate row for vertex {v}")
            seen[v] = True
            for col, cell in enumerate(row[1:], 1):
                try:
                    attrs[v, col - 1] = float(cell)
                except ValueError:
                    raise GraphFormatError(
                        f"{path}:{rowno}: non-numeric cell {cell!r} in column {header[col]!r}"
                    ) from None
    out = g.with_attrs(attrs)
    out.stats["attrs_missing"] = int((~seen).sum())
    if out.stats["attrs_missing"]:
        log.warning("%s: %d vertices without attribute row filled with %s", path,
                    out.stats["attrs_missing"], fill_value)
    return out


def load_pvalues(path, g: AttributedGraph) -> AttributedGraph:
    """Attach p-values from a ``vertex,pvalue`` CSV. Every vertex needs a row."""
    p = np.full(g.n, np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["vertex", "pvalue"]:
            raise GraphFormatError(f"{path}: header must be 'vertex,pvalue'")
        for rowno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                v, val = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise GraphFormatError(f"{path}:{rowno}: malformed row {row!r}") from None
            if not 0 <= v < g.n:
                raise GraphFormatError(f"{path}:{rowno}: vertex {v} outside 0..{g.n - 1}")
            p[v] = val
    if np.isnan(p).any():
        raise GraphFormatError(f"{path}: {int(np.isnan(p).sum())} vertices lack a p-value")
    return g.with_pvalues(p)


def write_pvalues(pvalues, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "pvalue"])
        for v, p in enumerate(pvalues):
            w.writerow([v, repr(float(p))])


# ---------------------------------------------------------------------------
# subgraphs
# ---------------------------------------------------------------------------

def induced_subgraph(g: AttributedGraph, vs: Iterable[int]) -> Subgraph:
    vset = frozenset(int(v) for v in vs)
    for v in vset:
        if not 0 <= v < g.n:
            raise IndexError(f"vertex {v} outside 0..{g.n - 1}")
    edges = set()
    for u in vset:
        for w in g.neighbors(u):
            w = int(w)
            if u < w and w in vset:
                edges.add((u, w))
    return Subgraph(vset, frozenset(edges))


# ---------------------------------------------------------------------------
# query shapes
# ---------------------------------------------------------------------------

def ring(k: int) -> QueryGraph:
    if k < 3:
        raise GraphFormatError("ring needs k >= 3")
    return QueryGraph(k, frozenset((min(i, (i + 1) % k), max(i, (i + 1) % k)) for i in range(k)), "ring")


def line(k: int) -> QueryGraph:
    return QueryGraph(k, frozenset((i, i + 1) for i in range(k - 1)), "line")


def star(k: int) -> QueryGraph:
    """Center 0 with ``k`` leaves."""
    return QueryGraph(k + 1, frozenset((0, i) for i in range(1, k + 1)), "star")


def bipartite(a: int, b: int) -> QueryGraph:
    if a < 1 or b < 1:
        raise GraphFormatError("bipartite needs a, b >= 1")
    return QueryGraph(a + b, frozenset((i, a + j) for i in range(a) for j in range(b)), "bipartite")


def tree(branching: int, depth: int) -> QueryGraph:
    """Balanced tree; vertices numbered breadth-first from the root."""
    if branching < 1 or depth < 1:
        raise GraphFormatError("tree needs branching >= 1 and depth >= 1")
    edges = []
    frontier, nxt = [0], 1
    for _ in range(depth):
        new = []
        for parent in frontier:
            for _ in range(branching):
                edges.append((parent, nxt))
                new.append(nxt)
                nxt += 1
        frontier = new
    return QueryGraph(nxt, frozenset(edges), "tree")


def from_edge_list(edges: Iterable[Sequence[int]], shape_tag: str = "custom") -> QueryGraph:
    uniq, _, _ = _canonical_edges(edges)
    if uniq.size == 0:
        raise GraphFormatError("explicit query has no edges")
    ids = sorted(set(uniq.ravel().tolist()))
    if ids != list(range(len(ids))):
        raise GraphFormatError("explicit query vertex ids must be 0..m-1 without gaps")
    return QueryGraph(len(ids), frozenset(map(tuple, uniq.tolist())), shape_tag)


def build_query(shape_spec) -> QueryGraph:
    """Build a query from a dict, JSON text, or shorthand such as ``"ring(3)"``.

    Dict forms: ``{"shape": "ring", "k": 3}``, ``{"shape": "star", "k": 4}``,
    ``{"shape": "bipartite", "a": 2, "b": 3}``,
    ``{"shape": "tree", "branching": 2, "depth": 2}`` or ``{"edges": [[0, 1], ...]}``.
    """
    if isinstance(shape_spec, QueryGraph):
        return shape_spec
    if isinstance(shape_spec, str):
        s = shape_spec.strip()
        if s.startswith("{"):
            shape_spec = json.loads(s)
        else:
            shape_spec = _parse_shorthand(s)
    spec = dict(shape_spec)
    if "edges" in spec:
        return from_edge_list(spec["edges"], spec.get("shape", "custom"))
    shape = spec.get("shape")
    try:
        if shape == "ring":
            return ring(int(spec["k"]))
        if shape == "line":
            return line(int(spec["k"]))
        if shape == "star":
            return star(int(spec["k"]))
        if shape == "bipartite":
            return bipartite(int(spec["a"]), int(spec["b"]))
        if shape == "tree":
            return tree(int(spec["branching"]), int(spec["depth"]))
    except KeyError as exc:
        raise GraphFormatError(f"query shape {shape!r} missing parameter {exc}") from None
    raise GraphFormatError(f"unknown query shape {shape!r}")


_SHORTHAND_KEYS = {"ring": ("k",), "line": ("k",), "star": ("k",), "bipartite": ("a", "b"),
                   "tree": ("branching", "depth")}


def _parse_shorthand(s: str) -> dict:
    name, _, rest = s.partition("(")
    name = name.strip()
    if name not in _SHORTHAND_KEYS or not rest.endswith(")"):
        raise GraphFormatError(f"cannot parse query shorthand {s!r}")
    args = [a.strip() for a in rest[:-1].split(",") if a.strip()]
    keys = _SHORTHAND_KEYS[name]
    if len(args) != len(keys):
        raise GraphFormatError(f"{name} takes {len(keys)} argument(s), got {len(args)}")
    try:
        return {"shape": name, **{k: int(a) for k, a in zip(keys, args)}}
    except ValueError:
        raise GraphFormatError(f"non-integer argument in {s!r}") from None


def double_star(k: int) -> QueryGraph:
    """Two adjacent centers with ``k`` leaves each."""
    edges = [(0, 1)] + [(0, 2 + i) for i in range(k)] + [(1, 2 + k + i) for i in range(k)]
    return QueryGraph(2 + 2 * k, frozenset(edges), "double_star")


DEFAULT_QUERIES: dict[str, QueryGraph] = {
    "Q1": ring(3),
    "Q2": line(4),
    "Q3": star(4),
    "Q4": bipartite(2, 3),
    "Q5": tree(2, 2),
    "Q6": double_star(2),
}
