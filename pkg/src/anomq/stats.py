"""Empirical p-values, scan statistics and linear-time subset scanning.

Nonparametric statistics (BJ, HC) score a vertex set through the count of
p-values at or below a threshold ``alpha``. Parametric statistics (EBP,
KULL) score aggregate observed counts ``C`` against baselines ``B``.
All four are one-sided: they vanish unless the set looks elevated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NONPARAMETRIC = ("BJ", "HC")
PARAMETRIC = ("EBP", "KULL")
STATISTICS = NONPARAMETRIC + PARAMETRIC

# floor applied to per-vertex baselines so EBP/KULL stay defined on all-zero history
MIN_BASELINE = 1e-6


@dataclass(frozen=True)
class ScoreSpec:
    """Which statistic to maximise and how the attribute matrix is read.

    ``baseline`` lists the attribute columns forming the history; ``None``
    means every column except ``eval_column``. ``eval_column`` may be
    negative (``-1`` is the latest observation).
    """

    statistic: str = "BJ"
    alpha_max: float = 0.15
    baseline: tuple[int, ...] | None = None
    eval_column: int = -1

    def __post_init__(self):
        stat = self.statistic.upper()
        object.__setattr__(self, "statistic", stat)
        if stat not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}; choose from {STATISTICS}")
        if not 0 < self.alpha_max <= 1:
            raise ValueError(f"alpha_max must be in (0, 1], got {self.alpha_max}")
        if self.baseline is not None:
            object.__setattr__(self, "baseline", tuple(int(c) for c in self.baseline))
            if not self.baseline:
                raise ValueError("baseline window is empty")

    @property
    def nonparametric(self) -> bool:
        return self.statistic in NONPARAMETRIC

    def columns(self, T: int) -> tuple[list[int], int]:
        """Resolve (baseline columns, eval column) against a ``T``-column matrix."""
        ev = self.eval_column % T if -T <= self.eval_column < T else None
        if ev is None:
            raise ValueError(f"eval_column {self.eval_column} outside a {T}-column matrix")
        if self.baseline is None:
            base = [c for c in range(T) if c != ev]
        else:
            base = [c % T for c in self.baseline]
            if any(not -T <= c < T for c in self.baseline):
                raise ValueError(f"baseline column outside a {T}-column matrix")
        if not base:
            raise ValueError("baseline window is empty")
        if ev in base:
            raise ValueError("baseline window overlaps eval_column")
        return base, ev


@dataclass(frozen=True)
class ScoreValue:
    value: float
    alpha_star: float | None = None
    n_alpha: int = 0
    n_total: int = 0


@dataclass(frozen=True)
class PriorityOrder:
    order: np.ndarray
    key: np.ndarray

    def __len__(self):
        return len(self.order)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def calibrate_pvalues(g, spec: ScoreSpec) -> np.ndarray:
    """Rank-based empirical p-value of each vertex's eval column against its baseline.

    ``p_v = (1 + #{t in baseline : w[v, t] >= w[v, eval]}) / (|baseline| + 1)``
    """
    attrs = g.attrs if hasattr(g, "attrs") else g
    if attrs is None:
        raise ValueError("graph has no attribute matrix to calibrate")
    W = np.asarray(attrs, dtype=float)
    if W.ndim != 2:
        raise ValueError("attribute matrix must be 2-D")
    base, ev = spec.columns(W.shape[1])
    hist = W[:, base]
    exceed = (hist >= W[:, [ev]]).sum(axis=1)
    return (1.0 + exceed) / (len(base) + 1.0)


def counts_and_baselines(g, spec: ScoreSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex observed count ``C`` (eval column) and baseline mean ``B``."""
    if g.attrs is None:
        raise ValueError(f"{spec.statistic} needs an attribute matrix")
    base, ev = spec.columns(g.attrs.shape[1])
    C = g.attrs[:, ev].astype(float)
    B = np.maximum(g.attrs[:, base].mean(axis=1), MIN_BASELINE)
    if (C < 0).any():
        raise ValueError(f"{spec.statistic} needs non-negative observations")
    return C, B


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def _xlogy(x, y):
    return x * math.log(y) if x > 0 else 0.0


def ebp_score(C: float, B: float) -> float:
    """Expectation-based Poisson log-likelihood ratio."""
    if B <= 0:
        raise ValueError(f"baseline must be positive, got {B}")
    if C <= B:
        return 0.0
    return C * math.log(C / B) + B - C


def kulldorff_score(C: float, B: float, C_tot: float, B_tot: float) -> float:
    """Kulldorff's log-likelihood ratio for an elevated inside rate."""
    if B <= 0 or B >= B_tot:
        raise ValueError(f"need 0 < B < B_tot, got B={B}, B_tot={B_tot}")
    C_out, B_out = C_tot - C, B_tot - B
    if C / B <= C_out / B_out:
        return 0.0
    val = _xlogy(C, C / B) + _xlogy(C_out, C_out / B_out) - _xlogy(C_tot, C_tot / B_tot)
    return max(val, 0.0)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")


def bj_score(alpha: float, n_alpha: int, n: int) -> float:
    """Berk-Jones: ``n * KL(n_alpha / n, alpha)``, zero unless ``n_alpha / n > alpha``."""
    _check_alpha(alpha)
    return float(_bj(np.float64(alpha), np.float64(n_alpha), np.float64(n)))


def hc_score(alpha: float, n_alpha: int, n: int) -> float:
    """Higher criticism ``(n_alpha - n alpha) / sqrt(n alpha (1 - alpha))``, clamped at 0."""
    _check_alpha(alpha)
    return float(_hc(np.float64(alpha), np.float64(n_alpha), np.float64(n)))


def _bj(alpha, n_alpha, n):
    alpha, n_alpha, n = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (alpha, n_alpha, n)))
    q = np.divide(n_alpha, n, out=np.zeros_like(n_alpha), where=n > 0)
    out = np.zeros(q.shape)
    pos = q > alpha
    qp, ap = q[pos], alpha[pos]
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(qp < 1, (1 - qp) * np.log((1 - qp) / (1 - ap)), 0.0)
    out[pos] = n[pos] * (qp * np.log(qp / ap) + tail)
    return out if out.ndim else out[()]


def _hc(alpha, n_alpha, n):
    alpha, n_alpha, n = (np.asarray(x, dtype=float) for x in (alpha, n_alpha, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (n_alpha - n * alpha) / np.sqrt(n * alpha * (1 - alpha))
    return np.where(n_alpha > n * alpha, z, 0.0)


_NP_STAT = {"BJ": _bj, "HC": _hc}


def npss_score(pvals, spec: ScoreSpec, counts=None, baselines=None,
               totals: tuple[float, float] | None = None) -> ScoreValue:
    """Score one vertex set.

    For BJ/HC the statistic is maximised over the lossless alpha grid
    ``{distinct p <= alpha_max} | {alpha_max}``; ties go to the smaller alpha.
    For EBP/KULL pass per-vertex ``counts`` and ``baselines`` (and the whole
    graph ``totals=(C_tot, B_tot)`` for KULL); ``pvals`` is then ignored.
    """
    if spec.nonparametric:
        p = np.sort(np.asarray(pvals, dtype=float))
        if p.size == 0:
            raise ValueError("cannot score an empty vertex set")
        grid = np.unique(np.append(p[p <= spec.alpha_max], spec.alpha_max))
        n_alpha = np.searchsorted(p, grid, side="right")
        alpha = np.minimum(grid, np.nextafter(1.0, 0.0))
        vals = _NP_STAT[spec.statistic](alpha, n_alpha, p.size)
        i = int(np.argmax(vals))
        return ScoreValue(float(vals[i]), float(grid[i]), int(n_alpha[i]), int(p.size))
    if counts is None or baselines is None:
        raise ValueError(f"{spec.statistic} scores need counts and baselines")
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0:
        raise ValueError("cannot score an empty vertex set")
    C, B = float(counts.sum()), float(np.sum(baselines))
    if spec.statistic == "EBP":
        val = ebp_score(C, B)
    else:
        if totals is None:
            raise ValueError("KULL needs whole-graph totals")
        C_tot, B_tot = totals
        val = 0.0 if B >= B_tot * (1 - 1e-12) else kulldorff_score(C, B, C_tot, B_tot)
    return ScoreValue(val, None, 0, int(counts.size))


class SubsetScorer:
    """Binds a :class:`ScoreSpec` to a graph so vertex sets can be scored by id."""

    def __init__(self, g, spec: ScoreSpec):
        self.spec = spec
        if spec.nonparametric:
            if g.pvalues is None:
                raise ValueError("graph has no p-values; calibrate first")
            self.pvalues = g.pvalues
        else:
            self.C, self.B = counts_and_baselines(g, spec)
            self.totals = (float(self.C.sum()), float(self.B.sum()))

    def __call__(self, vertices: Sequence[int]) -> ScoreValue:
        idx = np.fromiter(vertices, dtype=np.int64)
        if idx.size == 0:
            return ScoreValue(0.0, None, 0, 0)
        if self.spec.nonparametric:
            return npss_score(self.pvalues[idx], self.spec)
        return npss_score(None, self.spec, self.C[idx], self.B[idx], self.totals)

    def value(self, vertices: Sequence[int]) -> float:
        return self(vertices).value


# ---------------------------------------------------------------------------
# priority and LTSS
# ---------------------------------------------------------------------------

def priority_sort(g, spec: ScoreSpec) -> PriorityOrder:
    """Most anomalous first; ties by ascending vertex id.

    BJ/HC rank by ascending p-value (key ``-p``); EBP/KULL rank by
    descending ``C / B``.
    """
    if spec.nonparametric:
        if g.pvalues is None:
            raise ValueError("graph has no p-values; calibrate first")
        key = -np.asarray(g.pvalues, dtype=float)
    else:
        C, B = counts_and_baselines(g, spec)
        key = C / B
    order = np.lexsort((np.arange(len(key)), -key))
    return PriorityOrder(order, key)


def ltss_prefix_max(order: PriorityOrder, pvals, spec: ScoreSpec, k_max: int,
                    counts=None, baselines=None) -> tuple[int, ScoreValue]:
    """Best prefix ``{v_(1), ..., v_(k)}``, ``k <= k_max``; ties go to the shortest prefix.

    For BJ/HC the alpha threshold is maximised jointly with ``k``.
    """
    n = len(order)
    if not 1 <= k_max <= n:
        raise ValueError(f"k_max must be in 1..{n}, got {k_max}")
    idx = order.order[:k_max]
    if spec.nonparametric:
        p = np.asarray(pvals, dtype=float)[idx]
        best_k, best = 1, None
        for k in range(1, k_max + 1):
            sv = npss_score(p[:k], spec)
            if best is None or sv.value > best.value:
                best_k, best = k, sv
        return best_k, best
    C = np.asarray(counts, dtype=float)
    B = np.asarray(baselines, dtype=float)
    totals = (float(C.sum()), float(B.sum()))
    cC, cB = np.cumsum(C[idx]), np.cumsum(B[idx])
    best_k, best = 1, None
    for k in range(1, k_max + 1):
        if spec.statistic == "EBP":
            val = ebp_score(cC[k - 1], cB[k - 1])
        else:
            val = 0.0 if cB[k - 1] >= totals[1] * (1 - 1e-12) else kulldorff_score(
                cC[k - 1], cB[k - 1], *totals)
        if best is None or val > best.value:
            best_k, best = k, ScoreValue(val, None, 0, k)
    return best_k, best
