"""Identifiability-gap diagnostics.

Three related quantities:

* the bivariate gap between a pair's two orientations, computable as a single
  mutual information I(x - E[x|y]; y) between the anti-causal regression
  residual and the putative effect -- zero exactly in the linear-Gaussian
  case, positive when the pair's orientation is identified;
* per-edge reversal gaps of a weight matrix, w(i->j) - w(j->i), the score
  penalty of flipping one edge;
* the empirical gap between the best and second-best scoring trees, the
  second-best found by re-solving with each of the p-1 optimal edges
  forbidden in turn.

Significance of the bivariate gap uses a permutation test of the mutual
information (the residual re-paired with permuted effect values); the
permuted statistic is evaluated on a capped subsample for runtime, which
leaves the test's level exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arborescence import DirectedTree, min_arborescence, second_best_trees
from .entropy import EntropyConfig, mutual_information
from .smoother import SmootherConfig, fit, predict
from .weights import WeightMatrix, ordered_pairs

__all__ = [
    "GapReport",
    "bivariate_gap",
    "bivariate_gap_test",
    "edge_reversal_gaps",
    "empirical_gap",
    "gap_report_to_json",
]


@dataclass(frozen=True)
class GapReport:
    """Best-vs-second-best score gap plus per-edge reversal diagnostics."""

    columns: list[str]
    kind: str
    best_tree: DirectedTree
    best_total: float
    second_tree: DirectedTree
    second_total: float
    empirical_gap: float
    reversal_gaps: dict = field(default_factory=dict)  # best-tree edge -> gap
    min_reversal_gap: float | None = None
    bivariate: float | None = None

    def __post_init__(self):
        if self.empirical_gap < 0.0:
            raise ValueError("second-best total cannot undercut the best total")


def bivariate_gap(
    x,
    y,
    smoother_cfg: SmootherConfig | None = None,
    entropy_cfg: EntropyConfig | None = None,
) -> float:
    """I(x - phi_hat(y); y): mutual information between the residual of
    regressing x on y and y itself. Near zero when the pair is equally well
    explained in both directions (e.g. linear-Gaussian), positive when the
    x -> y orientation is identified."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 100:
        raise ValueError(f"need at least 100 observations, got {len(x)}")
    f = fit(y, x, smoother_cfg or SmootherConfig())
    resid = x - predict(f, y)
    return mutual_information(resid, y, entropy_cfg or EntropyConfig())


def bivariate_gap_test(
    x,
    y,
    smoother_cfg: SmootherConfig | None = None,
    entropy_cfg: EntropyConfig | None = None,
    permutations: int = 200,
    seed: int = 0,
    subsample: int = 2000,
):
    """Returns (gap, p_value): the full-sample gap plus a permutation p-value
    for the hypothesis that the gap is zero.

    The test statistic is the residual/effect mutual information on a
    deterministic subsample of at most ``subsample`` points; the observed
    statistic and every permuted replicate use the same points, so
    exchangeability under the null is preserved exactly.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    smoother_cfg = smoother_cfg or SmootherConfig()
    entropy_cfg = entropy_cfg or EntropyConfig()
    gap = bivariate_gap(x, y, smoother_cfg, entropy_cfg)

    f = fit(y, x, smoother_cfg)
    resid = x - predict(f, y)
    n = len(x)
    idx = np.unique(np.linspace(0, n - 1, min(n, subsample)).astype(int))
    r_sub, y_sub = resid[idx], y[idx]
    observed = mutual_information(r_sub, y_sub, entropy_cfg)
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(permutations):
        stat = mutual_information(r_sub, rng.permutation(y_sub), entropy_cfg)
        if stat >= observed:
            exceed += 1
    p_value = (1 + exceed) / (permutations + 1)
    return gap, p_value


def edge_reversal_gaps(w: WeightMatrix) -> dict:
    """Antisymmetric map over ordered pairs: gap(j, i) = w(i->j) - w(j->i),
    the score cost of carrying the pair in the j -> i direction instead of
    reversed. Positive values favour j -> i locally."""
    return {
        (j, i): float(w.matrix[i, j] - w.matrix[j, i])
        for j, i in ordered_pairs(w.p)
    }


def empirical_gap(w: WeightMatrix) -> GapReport:
    """Best tree, second-best tree (via the p-1 single-edge removals) and
    their score difference; per-edge reversal gaps are attached for the best
    tree's edges."""
    best_tree, best_total = min_arborescence(w)
    ranked = second_best_trees(w)
    second_tree, second_total = ranked[0]
    reversal = edge_reversal_gaps(w)
    per_edge = {edge: reversal[edge] for edge in best_tree.edges()}
    return GapReport(
        columns=list(w.columns),
        kind=w.kind,
        best_tree=best_tree,
        best_total=best_total,
        second_tree=second_tree,
        second_total=second_total,
        empirical_gap=second_total - best_total,
        reversal_gaps=per_edge,
        min_reversal_gap=min(per_edge.values()) if per_edge else None,
    )


def gap_report_to_json(g: GapReport) -> dict:
    names = g.columns
    return {
        "kind": g.kind,
        "best": {
            "root": names[g.best_tree.root],
            "edges": [{"from": names[j], "to": names[i]} for j, i in g.best_tree.edges()],
            "total": float(g.best_total),
        },
        "second_best": {
            "root": names[g.second_tree.root],
            "edges": [{"from": names[j], "to": names[i]} for j, i in g.second_tree.edges()],
            "total": float(g.second_total),
        },
        "empirical_gap": float(g.empirical_gap),
        "reversal_gaps": [
            {"from": names[j], "to": names[i], "gap": float(v)}
            for (j, i), v in sorted(g.reversal_gaps.items())
        ],
        "min_reversal_gap": None if g.min_reversal_gap is None else float(g.min_reversal_gap),
        "bivariate": None if g.bivariate is None else float(g.bivariate),
    }
