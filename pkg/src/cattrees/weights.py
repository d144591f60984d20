"""Directed edge weights: the score decomposition fed to the tree solver.

For every ordered pair (j, i) a smoother of column i on column j produces
residuals r = x_i - phi_hat(x_j); the pair's weight is either

* gaussian: 0.5 * log( Var(r) / Var(x_i) ), or
* entropy:  h_hat(r) - h_hat(x_i),

with divisor-n variances. On a plain dataset the smoother is both trained and
evaluated on the full sample and the residual variance is centered. Under
sample splitting (the inference regime) smoothers are trained on the auxiliary
half and evaluated on the main half, and the numerator is the uncentered mean
squared residual; the marginal variance stays centered. Summing a tree's edge
weights recovers its score up to a constant shared by all trees, so the
minimizing tree is unchanged.

Residual vectors are cached per pair for reuse by the inference module, which
avoids refitting all p*(p-1) smoothers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, DegenerateDataError, SplitDataset
from .entropy import EntropyConfig, entropy_knn
from .smoother import SmootherConfig, fit, predict

__all__ = [
    "WeightMatrix",
    "gaussian_weight",
    "entropy_weight",
    "weight_matrix",
    "ordered_pairs",
    "weight_matrix_to_json",
    "weight_matrix_from_json",
]

KINDS = ("gaussian", "entropy")


def ordered_pairs(p: int) -> list:
    """Canonical ordering of the p*(p-1) directed pairs (tail j, head i):
    grouped by head, tails ascending. Shared with the inference module."""
    return [(j, i) for i in range(p) for j in range(p) if j != i]


@dataclass(frozen=True)
class WeightMatrix:
    """All p*(p-1) directed edge weights plus the residual caches behind them.

    ``matrix[j, i]`` is the weight of edge j -> i; the diagonal is NaN and
    never read. ``residuals[(j, i)]`` is the evaluation-sample residual vector
    of that pair, ``eval_values`` the evaluation sample itself (the main half
    under splitting).
    """

    columns: list[str]
    kind: str
    matrix: np.ndarray = field(repr=False)
    residuals: dict = field(repr=False)
    eval_values: np.ndarray = field(repr=False)
    split: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        p = len(self.columns)
        if self.matrix.shape != (p, p):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match p={p}")
        off = ~np.eye(p, dtype=bool)
        if not np.all(np.isfinite(self.matrix[off])):
            raise ValueError("off-diagonal weights must be finite")
        n = self.eval_values.shape[0]
        for pair, r in self.residuals.items():
            if len(r) != n:
                raise ValueError(f"residual cache for {pair} has length {len(r)}, expected {n}")

    @property
    def p(self) -> int:
        return len(self.columns)

    def weight(self, j: int, i: int) -> float:
        if j == i:
            raise ValueError("diagonal weights are undefined")
        return float(self.matrix[j, i])


def _var_n(x: np.ndarray) -> float:
    return float(np.mean(x * x) - np.mean(x) ** 2)


def gaussian_weight(residuals, marginal) -> float:
    """0.5 * log(Var(residuals) / Var(marginal)), divisor-n variances."""
    r = np.asarray(residuals, dtype=float)
    m = np.asarray(marginal, dtype=float)
    vr, vm = _var_n(r), _var_n(m)
    if vr <= 0.0:
        raise DegenerateDataError(f"residual variance is {vr!r}; log undefined")
    if vm <= 0.0:
        raise DegenerateDataError(f"marginal variance is {vm!r}; log undefined")
    return 0.5 * float(np.log(vr / vm))


def entropy_weight(residuals, marginal, cfg: EntropyConfig | None = None) -> float:
    """h_hat(residuals) - h_hat(marginal), both one-dimensional."""
    cfg = cfg or EntropyConfig()
    return entropy_knn(np.asarray(residuals, dtype=float), cfg) - entropy_knn(
        np.asarray(marginal, dtype=float), cfg
    )


# residual variance below this fraction of the marginal variance marks a
# numerically perfect fit (a noiseless deterministic pair); its log-weight
# would be float noise around -inf
_DEGENERATE_RATIO = 1e-24


def _pair_weight(args):
    j, i, train, evaluation, names, kind, smoother_cfg, entropy_cfg, split = args
    try:
        f = fit(train[:, j], train[:, i], smoother_cfg, predictor=names[j], response=names[i])
        resid = evaluation[:, i] - predict(f, evaluation[:, j])
        vm = _var_n(evaluation[:, i])
        if vm <= 0.0:
            raise DegenerateDataError("zero marginal variance")
        if _var_n(resid) <= _DEGENERATE_RATIO * vm:
            raise DegenerateDataError("residual variance is numerically zero (perfect fit)")
        if kind == "gaussian":
            num = float(np.mean(resid * resid)) if split else _var_n(resid)
            w = 0.5 * float(np.log(num / vm))
        else:
            w = entropy_weight(resid, evaluation[:, i], entropy_cfg)
    except Exception as exc:
        raise DegenerateDataError(f"edge weight ({names[j]} -> {names[i]}) failed: {exc}") from exc
    return j, i, w, resid


def weight_matrix(
    d: Dataset | SplitDataset,
    kind: str = "gaussian",
    smoother_cfg: SmootherConfig | None = None,
    entropy_cfg: EntropyConfig | None = None,
    threads: int = 1,
) -> WeightMatrix:
    """Compute all p*(p-1) edge weights of a dataset.

    Passing a SplitDataset selects the sample-split regime: smoothers train on
    the auxiliary half, residual moments come from the main half. Pair
    computations are independent; with threads > 1 they run in a thread pool
    and produce results identical to the sequential order.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    smoother_cfg = smoother_cfg or SmootherConfig()
    entropy_cfg = entropy_cfg or EntropyConfig()

    if isinstance(d, SplitDataset):
        train, evaluation = d.auxiliary.values, d.main.values
        names, split = d.main.columns, True
    elif isinstance(d, Dataset):
        train = evaluation = d.values
        names, split = d.columns, False
    else:
        raise TypeError(f"expected Dataset or SplitDataset, got {type(d).__name__}")

    p = len(names)
    jobs = [
        (j, i, train, evaluation, names, kind, smoother_cfg, entropy_cfg, split)
        for j, i in ordered_pairs(p)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_pair_weight, jobs))
    else:
        results = [_pair_weight(job) for job in jobs]

    matrix = np.full((p, p), np.nan)
    residuals = {}
    for j, i, w, resid in results:
        matrix[j, i] = w
        residuals[(j, i)] = resid
    return WeightMatrix(
        columns=list(names),
        kind=kind,
        matrix=matrix,
        residuals=residuals,
        eval_values=evaluation,
        split=split,
    )


def weight_matrix_to_json(w: WeightMatrix) -> dict:
    return {
        "names": list(w.columns),
        "kind": w.kind,
        "entries": [
            {"from": w.columns[j], "to": w.columns[i], "weight": float(w.matrix[j, i])}
            for j, i in ordered_pairs(w.p)
        ],
    }


def weight_matrix_from_json(obj: dict) -> WeightMatrix:
    """Rebuild a weight matrix from its JSON form (no residual caches)."""
    names = list(obj["names"])
    p = len(names)
    idx = {nm: i for i, nm in enumerate(names)}
    matrix = np.full((p, p), np.nan)
    for e in obj["entries"]:
        matrix[idx[e["from"]], idx[e["to"]]] = float(e["weight"])
    return WeightMatrix(
        columns=names,
        kind=obj["kind"],
        matrix=matrix,
        residuals={},
        eval_values=np.zeros((0, p)),
        split=False,
    )
