"""``anomq`` command line: query, simulate, eval, bench, oracle."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .engine import SCHEMA, QueryError, anomaly_max_q
from .evaluation import ORACLE_MAX_N, ExperimentSpec, bench_scaling, oracle_search, run_experiment
from .ged import DEFAULT_NODE_BUDGET, EXACT_LIMIT, GedTooLarge
from .graph import GraphFormatError, build_query, load_attributes, load_edge_list, load_pvalues
from .simgen import TOPOLOGIES, SimConfig, generate, write_dataset
from .stats import STATISTICS, ScoreSpec, calibrate_pvalues

log = logging.getLogger("anomq")

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


class ResourceLimit(RuntimeError):
    pass


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _score_spec(args) -> ScoreSpec:
    baseline = None
    if getattr(args, "baseline", None):
        baseline = tuple(int(c) for c in args.baseline.split(","))
    return ScoreSpec(args.stat.upper(), args.alpha_max, baseline, args.eval_column)


def _load_graph(args, spec: ScoreSpec):
    g = load_edge_list(args.graph)
    if args.pvalues:
        if not spec.nonparametric:
            raise ValueError(f"{spec.statistic} needs --attrs, not --pvalues")
        return load_pvalues(args.pvalues, g)
    g = load_attributes(args.attrs, g)
    if spec.nonparametric:
        g = g.with_pvalues(calibrate_pvalues(g, spec))
    return g


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="edge list (one 'u v' pair per line)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--attrs", help="CSV 'vertex,t0,t1,...' of per-vertex observations")
    src.add_argument("--pvalues", help="CSV 'vertex,pvalue'")
    p.add_argument("--query", default="ring(3)", help="shape like 'line(4)', JSON, or a JSON file")
    p.add_argument("--stat", default="bj", type=str.lower,
                   choices=[s.lower() for s in STATISTICS])
    p.add_argument("--alpha-max", type=float, default=0.15)
    p.add_argument("--baseline", help="comma-separated baseline columns (default: all but eval)")
    p.add_argument("--eval-column", type=int, default=-1)
    p.add_argument("--out", help="write JSON here instead of stdout")


def _query_arg(text: str):
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        text = path.read_text(encoding="utf-8")
    return build_query(text)


def cmd_query(args) -> int:
    spec = _score_spec(args)
    g = _load_graph(args, spec)
    q = _query_arg(args.query)
    res = anomaly_max_q(g, q, spec, args.epsilon, args.max_iters,
                        exact_limit=args.exact_limit, node_budget=args.node_budget)
    payload = res.to_json()
    payload["query"] = q.to_json()
    payload["statistic"] = spec.statistic
    _emit(payload, args.out)
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_oracle(args) -> int:
    spec = _score_spec(args)
    g = _load_graph(args, spec)
    q = _query_arg(args.query)
    if g.n > ORACLE_MAX_N and not args.override:
        raise ResourceLimit(f"oracle is limited to n <= {ORACLE_MAX_N} (got {g.n}); use --override")
    res = oracle_search(g, q, spec, override=args.override)
    sub = res.subgraph
    _emit({"schema": SCHEMA, "feasible": res.feasible, "candidates": res.candidates,
           "vertices": sub.vertices if sub else [],
           "edges": sorted(map(list, sub.edges)) if sub else [],
           "score": res.score.value, "alpha_star": res.score.alpha_star}, args.out)
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    cfg = SimConfig(n=args.n, topology=args.topology, sparsity=args.sparsity,
                    planted_shape=args.shape, planted_pvalue_max=args.planted_pmax,
                    background_pvalue_min=args.background_pmin, noise_percent=args.noise,
                    seed=args.seed)
    g, truth = generate(cfg)
    paths = write_dataset(g, truth, args.out_dir)
    cfg_json = asdict(cfg) | {"planted_shape": cfg.query.to_json()}
    Path(args.out_dir, "config.json").write_text(
        json.dumps({"schema": SCHEMA, **cfg_json}, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %s (n=%d, edges=%d)", ", ".join(str(p) for p in paths.values()),
             g.n, g.n_edges)
    return EXIT_OK


def cmd_eval(args) -> int:
    spec = ExperimentSpec.from_json(args.spec)
    if args.out:
        spec.output = args.out
    result = run_experiment(spec)
    if not spec.output:
        _emit({"schema": SCHEMA, "rows": [asdict(r) for r in result["rows"]],
               "aggregates": result["aggregates"]}, None)
    else:
        for a in result["aggregates"]:
            log.info("%s %s K=%g precision %.3f +- %.3f", a["query"], a["statistic"], a["noise"],
                     a["precision_mean"], a["precision_std"])
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(float(s)) for s in args.sizes.split(",")]
    q = _query_arg(args.query)
    res = bench_scaling(sizes, q, ScoreSpec(args.stat.upper(), args.alpha_max),
                        repeats=args.repeats, seed=args.seed)
    _emit(res, args.out)
    if any("error" in r for r in res["rows"]):
        return EXIT_RESOURCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anomq", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("query", help="find the most anomalous query-shaped subgraph")
    _add_data_args(p)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT,
                   help="largest combined vertex count solved by exact GED")
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("oracle", help="exhaustive optimum on a small graph")
    _add_data_args(p)
    p.add_argument("--override", action="store_true", help=f"allow n > {ORACLE_MAX_N}")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", help="write a synthetic dataset with a planted shape")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--topology", choices=TOPOLOGIES, default="king-grid")
    p.add_argument("--sparsity", type=float, default=0.4)
    p.add_argument("--shape", default="ring(3)")
    p.add_argument("--planted-pmax", type=float, default=0.15)
    p.add_argument("--background-pmin", type=float, default=0.2)
    p.add_argument("--noise", type=float, default=0.0, help="percent of p-values flipped")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="run an experiment grid from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", help="output base path; writes .csv and .json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="query wall time against graph size")
    p.add_argument("--sizes", default="100,1000,10000")
    p.add_argument("--query", default="ring(3)")
    p.add_argument("--stat", default="bj", type=str.lower, choices=["bj", "hc"])
    p.add_argument("--alpha-max", type=float, default=0.15)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MemoryError, GedTooLarge, ResourceLimit) as exc:
        print(f"anomq: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except QueryError as exc:
        print(f"anomq: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (GraphFormatError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"anomq: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
