"""Query-shaped anomalous subgraph detection in attributed networks."""

from .engine import (QueryError, QueryResult, StarMatch, StarPattern, anomaly_max_q,
                     best_star_match, build_upper_bound, decompose_stars, max_q, select_roots)
from .evaluation import ExperimentSpec, bench_scaling, oracle_search, precision, run_experiment
from .ged import GedResult, ged, ged_bounded, ged_exact, ged_within
from .graph import (AttributedGraph, GraphFormatError, QueryGraph, Subgraph, build_query,
                    induced_subgraph, load_attributes, load_edge_list, load_pvalues)
from .simgen import SimConfig, flip_noise, generate
from .stats import (ScoreSpec, ScoreValue, bj_score, calibrate_pvalues, ebp_score, hc_score,
                    kulldorff_score, ltss_prefix_max, npss_score, priority_sort)

__version__ = "0.1.0"
