"""Precision, brute-force oracle, experiment runner and scaling benchmark."""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .engine import SCHEMA, QueryResult, anomaly_max_q
from .ged import ged_exact
from .graph import (DEFAULT_QUERIES, AttributedGraph, QueryGraph, Subgraph, build_query,
                    induced_subgraph, load_edge_list, load_pvalues, _connected)
from .simgen import GroundTruth, SimConfig, flip_noise, generate
from .stats import ScoreSpec, ScoreValue, SubsetScorer

log = logging.getLogger(__name__)

ORACLE_MAX_N = 15


def precision(found, truth) -> float:
    """Fraction of returned vertices that are truly anomalous; 0 for an empty result."""
    found, truth = set(found), set(truth)
    if not found:
        return 0.0
    return len(found & truth) / len(found)


@dataclass
class OracleResult:
    subgraph: Subgraph | None
    score: ScoreValue
    candidates: int

    @property
    def feasible(self) -> bool:
        return self.subgraph is not None


def oracle_search(g: AttributedGraph, q: QueryGraph, spec: ScoreSpec | None = None,
                  override: bool = False) -> OracleResult:
    """Exhaustive optimum over vertex sets whose induced subgraph is isomorphic to ``q``.

    Ties go to the lexicographically smallest sorted vertex tuple.
    """
    spec = spec or ScoreSpec()
    if g.n > ORACLE_MAX_N and not override:
        raise ValueError(f"oracle_search limited to n <= {ORACLE_MAX_N} (got {g.n}); pass override=True")
    scorer = SubsetScorer(g, spec)
    n_edges = len(q.edges)
    best: tuple[float, tuple[int, ...]] | None = None
    best_sub, best_sv, count = None, ScoreValue(0.0), 0
    for combo in combinations(range(g.n), q.m):
        sub = induced_subgraph(g, combo)
        if len(sub.edges) != n_edges:
            continue
        local = {v: i for i, v in enumerate(combo)}
        if not _connected(q.m, [(local[u], local[v]) for u, v in sub.edges]):
            continue
        if ged_exact(sub, q, exact_limit=2 * q.m, node_budget=None).distance != 0:
            continue
        count += 1
        sv = scorer(combo)
        if best is None or sv.value > best[0]:
            best, best_sub, best_sv = (sv.value, combo), sub, sv
    return OracleResult(best_sub, best_sv, count)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    """``dataset`` is either a :class:`SimConfig` (one planted copy of each
    query is generated per trial) or a directory holding ``graph.tsv``,
    ``pvalues.csv`` and ``truth.json``."""

    dataset: SimConfig | str = field(default_factory=SimConfig)
    queries: dict[str, object] = field(default_factory=lambda: dict(DEFAULT_QUERIES))
    statistics: tuple[str, ...] = ("BJ",)
    noise_levels: tuple[float, ...] = (5, 10, 20)
    trials: int = 10
    seed: int = 0
    alpha_max: float = 0.15
    epsilon: float = 1e-6
    record_timing: bool = True
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.queries:
            raise ValueError("at least one query is required")

    @classmethod
    def from_json(cls, obj) -> "ExperimentSpec":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text(encoding="utf-8"))
        obj = dict(obj)
        ds = obj.get("dataset", {})
        if isinstance(ds, dict):
            obj["dataset"] = SimConfig(**ds)
        qs = obj.get("queries")
        if isinstance(qs, list):
            obj["queries"] = {f"Q{i + 1}": s for i, s in enumerate(qs)}
        for key in ("statistics", "noise_levels"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return cls(**obj)


@dataclass
class ResultRow:
    query: str
    statistic: str
    noise: float
    trial: int
    precision: float
    score: float
    ged: int
    runtime_ms: float
    iterations: int
    feasible: bool

    def __post_init__(self):
        if not 0 <= self.precision <= 1:
            raise ValueError(f"precision out of range: {self.precision}")

    @classmethod
    def from_csv_row(cls, row: dict) -> "ResultRow":
        conv = {"query": str, "statistic": str, "noise": float, "trial": int, "precision": float,
                "score": float, "ged": int, "runtime_ms": float, "iterations": int,
                "feasible": lambda s: s == "True"}
        return cls(**{k: conv[k](row[k]) for k in conv})


def _trial_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _load_dataset_dir(path) -> tuple[AttributedGraph, GroundTruth]:
    path = Path(path)
    try:
        g = load_pvalues(path / "pvalues.csv", load_edge_list(path / "graph.tsv"))
        truth = json.loads((path / "truth.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ValueError(f"failed to load dataset {path}: {exc}") from exc
    return g, GroundTruth(tuple(truth["planted_vertices"]),
                          tuple(map(tuple, truth.get("planted_edges", []))))


def run_trial(g: AttributedGraph, truth, q: QueryGraph, spec: ScoreSpec,
              epsilon: float = 1e-6) -> tuple[QueryResult, float]:
    res = anomaly_max_q(g, q, spec, epsilon)
    return res, precision(res.vertices, truth.planted_vertices)


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run every (query, statistic, noise, trial) cell; optionally write CSV + JSON.

    Returns ``{"rows": [...ResultRow], "aggregates": [...]}``.
    """
    rows: list[ResultRow] = []
    loaded = None
    if not isinstance(spec.dataset, SimConfig):
        loaded = _load_dataset_dir(spec.dataset)
    for qi, (qid, qspec) in enumerate(spec.queries.items()):
        q = build_query(qspec)
        for trial in range(spec.trials):
            if loaded is None:
                cfg = replace(spec.dataset, planted_shape=q, noise_percent=0,
                              seed=_trial_seed(spec.seed, qi, trial))
                base, truth = generate(cfg)
            else:
                base, truth = loaded
            for ki, K in enumerate(spec.noise_levels):
                noisy = base.with_pvalues(
                    flip_noise(base.pvalues, K, _trial_seed(spec.seed, qi, trial, ki, 1)))
                for stat in spec.statistics:
                    sspec = ScoreSpec(stat, spec.alpha_max)
                    res, prec = run_trial(noisy, truth, q, sspec, spec.epsilon)
                    rows.append(ResultRow(
                        qid, sspec.statistic, float(K), trial, prec, res.score.value,
                        -1 if res.ged is None else int(res.ged),
                        round(res.runtime_ms, 3) if spec.record_timing else 0.0,
                        res.iterations, res.feasible))
    rows.sort(key=lambda r: (r.query, r.statistic, r.noise, r.trial))
    out = {"schema": SCHEMA, "rows": rows, "aggregates": aggregate(rows)}
    if spec.output:
        write_results(out, spec.output)
    return out


def aggregate(rows: list[ResultRow]) -> list[dict]:
    cells: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        cells.setdefault((r.query, r.statistic, r.noise), []).append(r)
    agg = []
    for (qid, stat, K), rs in sorted(cells.items()):
        prec = [r.precision for r in rs]
        agg.append({
            "query": qid, "statistic": stat, "noise": K, "trials": len(rs),
            "precision_mean": statistics.fmean(prec),
            "precision_std": statistics.pstdev(prec) if len(prec) > 1 else 0.0,
            "ged_mean": statistics.fmean(r.ged for r in rs),
            "runtime_ms_mean": statistics.fmean(r.runtime_ms for r in rs),
        })
    return agg


def precision_triples(aggregates: list[dict]) -> dict[tuple[str, str], tuple[float, ...]]:
    """Mean precision per (query, statistic) ordered by noise level, as in a results table."""
    out: dict[tuple[str, str], list] = {}
    for a in sorted(aggregates, key=lambda a: (a["query"], a["statistic"], a["noise"])):
        out.setdefault((a["query"], a["statistic"]), []).append(round(a["precision_mean"], 2))
    return {k: tuple(v) for k, v in out.items()}


ROW_FIELDS = [f.name for f in fields(ResultRow)]


def write_results(result: dict, output) -> tuple[Path, Path]:
    """Write ``<output>.csv`` (one line per ResultRow) and ``<output>.json``."""
    base = Path(output)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=ROW_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in result["rows"]:
            w.writerow(asdict(r))
    payload = {"schema": SCHEMA, "rows": [asdict(r) for r in result["rows"]],
               "aggregates": result["aggregates"]}
    json_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return csv_path, json_path


def read_rows_csv(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [ResultRow.from_csv_row(r) for r in csv.DictReader(fh)]


def read_rows_json(path) -> list[ResultRow]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [ResultRow(**r) for r in payload["rows"]]


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def bench_scaling(sizes, q: QueryGraph, spec: ScoreSpec | None = None, repeats: int = 3,
                  seed: int = 0, sparsity: float = 0.4) -> dict:
    """Median query wall time per graph size (generation excluded) and the log-log slope."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    spec = spec or ScoreSpec()
    rows = []
    for n in sizes:
        try:
            g, _ = generate(SimConfig(n=n, sparsity=sparsity, planted_shape=q, seed=seed))
            times, res = [], None
            anomaly_max_q(g, q, spec)  # warm-up
            for _ in range(repeats):
                t0 = time.perf_counter()
                res = anomaly_max_q(g, q, spec)
                times.append((time.perf_counter() - t0) * 1000)
        except MemoryError:
            log.warning("out of memory at n=%d; skipping remaining sizes", n)
            rows.append({"n": n, "error": "memory"})
            break
        rows.append({"n": n, "edges": g.n_edges, "median_ms": statistics.median(times),
                     "min_ms": min(times), "max_ms": max(times), "iterations": res.iterations})
    ok = [r for r in rows if "error" not in r]
    slope = None
    if len(ok) >= 2:
        x = np.log10([r["n"] for r in ok])
        y = np.log10([max(r["median_ms"], 1e-6) for r in ok])
        slope = float(np.polyfit(x, y, 1)[0])
    return {"schema": SCHEMA, "query": q.to_json(), "statistic": spec.statistic,
            "rows": rows, "slope": slope}
