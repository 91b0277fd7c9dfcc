"""Synthetic attributed networks with a planted query-shaped anomaly."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import AttributedGraph, QueryGraph, build_query, write_edge_list, write_pvalues

TOPOLOGIES = ("king-grid", "random")
_TINY = np.nextafter(0.0, 1.0)


@dataclass(frozen=True)
class SimConfig:
    n: int = 400
    topology: str = "king-grid"
    sparsity: float = 0.4
    planted_shape: object = "ring(3)"
    planted_pvalue_max: float = 0.15
    background_pvalue_min: float = 0.2
    noise_percent: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if not 0 < self.sparsity <= 1:
            raise ValueError(f"sparsity must be in (0, 1], got {self.sparsity}")
        if not self.planted_pvalue_max < self.background_pvalue_min:
            raise ValueError("planted_pvalue_max must be below background_pvalue_min")
        if not 0 <= self.noise_percent <= 100:
            raise ValueError("noise_percent must be in [0, 100]")

    @property
    def query(self) -> QueryGraph:
        return build_query(self.planted_shape)


@dataclass(frozen=True)
class GroundTruth:
    planted_vertices: tuple[int, ...]
    planted_edges: tuple[tuple[int, int], ...]
    mapping: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {"planted_vertices": list(self.planted_vertices),
                "planted_edges": [list(e) for e in self.planted_edges],
                "mapping": {str(k): v for k, v in self.mapping.items()}}


def king_grid_edges(n: int, rng: np.random.Generator, keep: float) -> np.ndarray:
    """8-neighbour lattice on a ceil(sqrt n)-wide grid, truncated to the first
    ``n`` cells in row-major order; each edge kept with probability ``keep``."""
    s = math.isqrt(n - 1) + 1 if n > 1 else 1
    ids = np.arange(n)
    r, c = ids // s, ids % s
    parts = []
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        rr, cc = r + dr, c + dc
        ok = (rr < s) & (cc >= 0) & (cc < s)
        tgt = rr * s + cc
        ok &= tgt < n
        parts.append(np.column_stack([ids[ok], tgt[ok]]))
    edges = np.concatenate(parts)
    if keep < 1:
        edges = edges[rng.random(len(edges)) < keep]
    return edges


def random_edges(n: int, rng: np.random.Generator, sparsity: float) -> np.ndarray:
    """Uniform random graph with ``round(4 n sparsity)`` edges, the king-grid density."""
    target = int(round(4 * n * sparsity))
    target = min(target, n * (n - 1) // 2)
    seen: set[tuple[int, int]] = set()
    while len(seen) < target:
        batch = rng.integers(0, n, size=(2 * (target - len(seen)) + 8, 2))
        for u, v in batch:
            if u != v:
                seen.add((min(u, v), max(u, v)))
                if len(seen) == target:
                    break
    return np.array(sorted(seen), dtype=np.int64).reshape(-1, 2)


def generate(cfg: SimConfig) -> tuple[AttributedGraph, GroundTruth]:
    """Build the topology, plant the query shape on random vertices and draw p-values.

    The planted vertex set is made exactly shape-induced: background edges
    among planted vertices are removed before the shape edges are added.
    Noise (``cfg.noise_percent``) is applied last via :func:`flip_noise`.
    """
    q = cfg.query
    if cfg.n < q.m:
        raise ValueError(f"n={cfg.n} is smaller than the planted shape ({q.m} vertices)")
    rng = np.random.default_rng(cfg.seed)
    if cfg.topology == "king-grid":
        edges = king_grid_edges(cfg.n, rng, cfg.sparsity)
    else:
        edges = random_edges(cfg.n, rng, cfg.sparsity)

    planted = rng.choice(cfg.n, size=q.m, replace=False)
    pset = set(planted.tolist())
    if len(edges):
        inside = np.isin(edges[:, 0], planted) & np.isin(edges[:, 1], planted)
        edges = edges[~inside]
    shape_edges = np.array([(planted[u], planted[v]) for u, v in sorted(q.edges)], dtype=np.int64)
    edges = np.concatenate([edges.reshape(-1, 2), shape_edges])

    p = 1.0 - rng.uniform(0.0, 1.0 - cfg.background_pvalue_min, size=cfg.n)
    planted_p = rng.uniform(0.0, cfg.planted_pvalue_max, size=q.m)
    p[planted] = np.maximum(planted_p, _TINY)
    if cfg.noise_percent:
        p = flip_noise(p, cfg.noise_percent, rng)

    g = AttributedGraph.from_edges(cfg.n, edges, pvalues=p)
    truth_edges = tuple(sorted((min(a, b), max(a, b)) for a, b in shape_edges.tolist()))
    truth = GroundTruth(tuple(sorted(pset)), truth_edges,
                        {int(i): int(v) for i, v in enumerate(planted)})
    return g, truth


def noise_indices(n: int, K: float, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    count = int(round(K / 100 * n))
    return rng.choice(n, size=count, replace=False)


def flip_noise(pvals, K: float, seed=None) -> np.ndarray:
    """Flip ``p -> 1 - p`` on ``round(K n / 100)`` distinct uniformly chosen vertices."""
    if not 0 <= K <= 100:
        raise ValueError(f"K must be in [0, 100], got {K}")
    p = np.array(pvals, dtype=float, copy=True)
    idx = noise_indices(len(p), K, seed)
    p[idx] = np.clip(1.0 - p[idx], _TINY, 1.0)
    return p


def write_dataset(g: AttributedGraph, truth: GroundTruth, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"graph": out / "graph.tsv", "pvalues": out / "pvalues.csv", "truth": out / "truth.json"}
    write_edge_list(g, paths["graph"])
    write_pvalues(g.pvalues, paths["pvalues"])
    paths["truth"].write_text(json.dumps(truth.to_json(), indent=2) + "\n", encoding="utf-8")
    return paths
