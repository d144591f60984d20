"""Ground-truth model generation, sampling, and evaluation metrics.

Tree shapes come in two flavours: type 1 scans node pairs j < i and forces a
chain edge j -> j+1 for still-unparented nodes while adding earlier parents
with a small Bernoulli probability (many leaves); type 2 draws each node's
parent uniformly from its predecessors (many branch nodes).

Causal mechanisms are smooth random functions realized by random Fourier
features of the unit-bandwidth squared-exponential kernel: with M = 100,
f(x) = sqrt(2/M) * sum_m a_m cos(w_m x + b_m), w_m ~ N(0,1), b_m ~ U(0, 2pi),
a_m ~ N(0,1). In expectation over the draws, Cov(f(x), f(x')) =
exp(-(x-x')^2 / 2); unlike grid-sampled process paths these evaluate exactly
anywhere.

Noise deviates from Gaussianity through a shape parameter: N(alpha) =
sign(Z) |Z|^alpha with Z ~ N(0, sigma^2); alpha = 1 is exactly Gaussian.

All generators are bitwise reproducible from their seeds; benchmark
repetitions derive child seeds through spawn keys so results do not depend on
execution order.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arborescence import DirectedTree, min_arborescence, tree_to_json
from .data import Dataset
from .entropy import EntropyConfig
from .smoother import SmootherConfig
from .weights import weight_matrix

__all__ = [
    "FourierFeatureFunction",
    "ScmSpec",
    "Metrics",
    "BenchmarkGrid",
    "gen_tree_type1",
    "gen_tree_type2",
    "gen_dag_single_rooted",
    "sample_causal_function",
    "sample_noise",
    "sample_scm",
    "random_scm",
    "chain3_spec",
    "bivariate_spec",
    "preset_spec",
    "PRESETS",
    "shd",
    "ancestor_metrics",
    "run_benchmark",
]

_RFF_FEATURES = 100


def gen_tree_type1(p: int, edge_prob: float = 0.1, seed: int = 0) -> DirectedTree:
    """Many-leaf trees: scan pairs j < i in order; force the edge when
    i == j + 1 and i is still unparented, otherwise attach with probability
    ``edge_prob`` if unparented."""
    if p < 2:
        raise ValueError("need p >= 2")
    rng = np.random.default_rng(seed)
    parent = [None] * p
    for j in range(p):
        for i in range(j + 1, p):
            if parent[i] is None:
                if i == j + 1:
                    parent[i] = j
                elif rng.random() < edge_prob:
                    parent[i] = j
    return DirectedTree(tuple(parent))


def gen_tree_type2(p: int, seed: int = 0) -> DirectedTree:
    """Many-branch trees: node i's parent is uniform on {0, ..., i-1}."""
    if p < 2:
        raise ValueError("need p >= 2")
    rng = np.random.default_rng(seed)
    parent = [None] + [int(rng.integers(0, i)) for i in range(1, p)]
    return DirectedTree(tuple(parent))


def gen_dag_single_rooted(p: int, seed: int = 0, extra_prob: float = 0.05) -> set:
    """Experimental: single-rooted DAG edge set built from a type-1 tree by
    adding each absent upper-triangular edge with probability ``extra_prob``.
    Returned as a set of (tail, head) pairs, not a DirectedTree."""
    rng = np.random.default_rng(seed)
    tree = gen_tree_type1(p, seed=seed)
    edges = set(tree.edges())
    for j in range(p):
        for i in range(j + 1, p):
            if (j, i) not in edges and rng.random() < extra_prob:
                edges.add((j, i))
    return edges


@dataclass(frozen=True)
class FourierFeatureFunction:
    """A smooth random function drawn from the unit-bandwidth RBF prior."""

    freqs: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)
    amps: np.ndarray = field(repr=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.sqrt(2.0 / len(self.amps)) * (
            np.cos(np.outer(x, self.freqs) + self.phases) @ self.amps
        )
        return float(out[0]) if scalar else out


def sample_causal_function(seed) -> FourierFeatureFunction:
    """Draw one random smooth function; fixed draw order (freqs, phases,
    amplitudes) keeps it reproducible. ``seed`` may be an int or a
    SeedSequence."""
    rng = np.random.default_rng(seed)
    freqs = rng.normal(0.0, 1.0, _RFF_FEATURES)
    phases = rng.uniform(0.0, 2.0 * np.pi, _RFF_FEATURES)
    amps = rng.normal(0.0, 1.0, _RFF_FEATURES)
    return FourierFeatureFunction(freqs=freqs, phases=phases, amps=amps)


def sample_noise(alpha: float, sigma: float, n: int, seed) -> np.ndarray:
    """sign(Z) |Z|^alpha with Z ~ N(0, sigma^2); alpha = 1 is exactly Gaussian."""
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    z = np.random.default_rng(seed).normal(0.0, sigma, n)
    if alpha == 1.0:
        return z
    return np.sign(z) * np.abs(z) ** alpha


def _nowhere_constant(f, lo=-3.0, hi=3.0, points=1000, run=10) -> bool:
    vals = f(np.linspace(lo, hi, points))
    same = np.isclose(vals[1:], vals[:-1], rtol=0.0, atol=0.0)
    streak = 0
    for s in same:
        streak = streak + 1 if s else 0
        if streak >= run - 1:
            return False
    return True


@dataclass(frozen=True)
class ScmSpec:
    """A fully specified additive-noise model over a directed tree.

    ``functions[i]`` maps the parent value to node i's mean contribution
    (None exactly at the root); ``noise[i]`` is the (alpha, sigma) shape/scale
    pair of node i's innovation. Functions must be nowhere constant, checked
    on a 1000-point grid.
    """

    tree: DirectedTree
    functions: tuple
    noise: tuple
    seed: int
    columns: tuple = ()

    def __post_init__(self):
        p = self.tree.p
        if len(self.functions) != p or len(self.noise) != p:
            raise ValueError("functions and noise must have one entry per node")
        cols = tuple(self.columns) if self.columns else tuple(f"X{i + 1}" for i in range(p))
        if len(cols) != p:
            raise ValueError(f"{len(cols)} column names for {p} nodes")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "noise", tuple((float(a), float(s)) for a, s in self.noise))
        for i in range(p):
            if (self.functions[i] is None) != (i == self.tree.root):
                raise ValueError(f"node {i}: function must be None exactly at the root")
            if self.functions[i] is not None and not _nowhere_constant(self.functions[i]):
                raise ValueError(f"causal function of node {i} is locally constant")
        for a, s in self.noise:
            if a <= 0 or s <= 0:
                raise ValueError("noise shape and scale must be positive")

    @property
    def p(self) -> int:
        return self.tree.p


def random_scm(tree: DirectedTree, alpha: float = 1.0, seed: int = 0, columns=()) -> ScmSpec:
    """Random mechanisms and noise scales for a given tree: smooth random
    functions at the non-roots, noise sd uniform on (1, 2) at the root and on
    (1/5, sqrt(2)/5) elsewhere."""
    sq = np.random.SeedSequence(seed)
    rng = np.random.default_rng(sq)
    p = tree.p
    functions, noise = [], []
    fn_seeds = sq.spawn(p)
    for i in range(p):
        if i == tree.root:
            functions.append(None)
            noise.append((alpha, float(rng.uniform(1.0, 2.0))))
        else:
            f = sample_causal_function(fn_seeds[i])
            while not _nowhere_constant(f):  # essentially never triggers
                fn_seeds[i] = fn_seeds[i].spawn(1)[0]
                f = sample_causal_function(fn_seeds[i])
            functions.append(f)
            noise.append((alpha, float(rng.uniform(0.2, np.sqrt(2.0) / 5.0))))
    return ScmSpec(tree=tree, functions=tuple(functions), noise=tuple(noise), seed=seed, columns=columns)


def sample_scm(spec: ScmSpec, n: int) -> Dataset:
    """Generate n rows in topological order; per-node noise streams derive
    from (spec.seed, node index) so the draw is schedule independent."""
    p = spec.p
    values = np.zeros((n, p))
    order = sorted(range(p), key=lambda i: len(spec.tree.ancestors(i)))
    for i in order:
        a, s = spec.noise[i]
        eps = sample_noise(a, s, n, np.random.SeedSequence(spec.seed, spawn_key=(i,)))
        pa = spec.tree.parent[i]
        if pa is None:
            values[:, i] = eps
        else:
            values[:, i] = spec.functions[i](values[:, pa]) + eps
    return Dataset(columns=list(spec.columns), values=values)


class _Cubic:
    def __init__(self, scale: float):
        self.scale = scale

    def __call__(self, x):
        return np.asarray(x, dtype=float) ** 3 / self.scale


class _Identity:
    def __call__(self, x):
        return np.asarray(x, dtype=float)


class _CubicLinearMix:
    def __init__(self, lam: float):
        self.lam = lam

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 - self.lam) * x**3 + self.lam * x


def chain3_spec(seed: int = 0) -> ScmSpec:
    """The three-node chain X -> Y -> Z that defeats greedy edge selection:
    X = N_X, Y = X^3 / sd(X^3) + N_Y, Z = Y + N_Z with noise variances
    (1.5, 0.5, 0.5). The normalizer sd(X^3) = sqrt(15 * 1.5^3) is analytic
    (sixth Gaussian moment), not a sample quantity, so the preset is
    deterministic; it scales the cubic signal to unit variance, which makes Y
    markedly non-Gaussian. Locally the reversed edge Z -> Y then scores best,
    so greedy edge picking reverses it, while the global tree optimum is still
    the causal chain."""
    var_x = 1.5
    sd_x3 = np.sqrt(15.0 * var_x**3)
    tree = DirectedTree((None, 0, 1))
    return ScmSpec(
        tree=tree,
        functions=(None, _Cubic(sd_x3), _Identity()),
        noise=((1.0, np.sqrt(1.5)), (1.0, np.sqrt(0.5)), (1.0, np.sqrt(0.5))),
        seed=seed,
        columns=("X", "Y", "Z"),
    )


def bivariate_spec(lam: float, alpha: float, seed: int = 0) -> ScmSpec:
    """Two-node family: X = sign(Z)|Z|^alpha with Z ~ N(0,1),
    Y = (1-lam) X^3 + lam X + N(0,1). lam=1, alpha=1 is the non-identifiable
    linear-Gaussian corner; lam=0 the cubic mechanism."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam}")
    tree = DirectedTree((None, 0))
    return ScmSpec(
        tree=tree,
        functions=(None, _CubicLinearMix(lam)),
        noise=((alpha, 1.0), (1.0, 1.0)),
        seed=seed,
        columns=("X", "Y"),
    )


PRESETS = {
    "chain3": chain3_spec,
    "linear2": lambda seed=0: bivariate_spec(1.0, 1.0, seed),
    "cubic2": lambda seed=0: bivariate_spec(0.0, 1.0, seed),
}


def preset_spec(name: str, seed: int = 0) -> ScmSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; options: {sorted(PRESETS)}")
    return PRESETS[name](seed=seed)


def _edge_set(g) -> set:
    if isinstance(g, DirectedTree):
        return set(g.edges())
    if isinstance(g, (set, frozenset, list, tuple)):
        return {(int(j), int(i)) for j, i in g}
    raise TypeError(f"cannot interpret {type(g).__name__} as a graph")


def shd(a, b) -> int:
    """Structural Hamming distance: additions + deletions + reversals between
    edge sets, a reversal counting one. Accepts trees or raw edge sets."""
    ea, eb = _edge_set(a), _edge_set(b)
    pairs = {frozenset(e) for e in ea} | {frozenset(e) for e in eb}
    dist = 0
    for pair in pairs:
        j, i = tuple(pair)
        in_a = [(j, i) in ea, (i, j) in ea]
        in_b = [(j, i) in eb, (i, j) in eb]
        if in_a != in_b:
            dist += 1
    return dist


def _ancestor_pairs(edges: set) -> set:
    children = {}
    for j, i in edges:
        children.setdefault(j, set()).add(i)
    pairs = set()
    for start in {j for j, _ in edges}:
        stack = list(children.get(start, ()))
        seen = set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            pairs.add((start, node))
            stack.extend(children.get(node, ()))
    return pairs


@dataclass(frozen=True)
class Metrics:
    """shd plus ancestor classification quality of a fitted graph.

    ancestor_tpr is the fraction of predicted ancestor pairs that are real
    (None when nothing is predicted); ancestor_recall the fraction of real
    ancestor pairs recovered.
    """

    shd: int
    ancestor_tpr: float | None
    ancestor_recall: float


def ancestor_metrics(fitted, truth) -> Metrics:
    pred = _ancestor_pairs(_edge_set(fitted))
    true = _ancestor_pairs(_edge_set(truth))
    tpr = len(pred & true) / len(pred) if pred else None
    recall = len(pred & true) / len(true) if true else 1.0
    return Metrics(shd=shd(fitted, truth), ancestor_tpr=tpr, ancestor_recall=recall)


@dataclass
class BenchmarkGrid:
    p: tuple = (16,)
    n: tuple = (50, 500)
    tree_type: tuple = (1,)
    alpha: tuple = (1.0,)
    scores: tuple = ("gaussian",)
    reps: int = 10

    def __post_init__(self):
        self.p = tuple(int(v) for v in np.atleast_1d(self.p))
        self.n = tuple(int(v) for v in np.atleast_1d(self.n))
        self.tree_type = tuple(int(v) for v in np.atleast_1d(self.tree_type))
        self.alpha = tuple(float(v) for v in np.atleast_1d(self.alpha))
        self.scores = tuple(np.atleast_1d(self.scores))
        if not (self.p and self.n and self.tree_type and self.alpha and self.scores):
            raise ValueError("benchmark grid has an empty axis")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")

    def cells(self):
        return list(itertools.product(self.p, self.n, self.tree_type, self.alpha))


def _one_rep(args):
    (cell_idx, rep, p, n, tree_type, alpha, scores, seed,
     smoother_cfg, entropy_cfg) = args
    sq = np.random.SeedSequence(seed, spawn_key=(cell_idx, rep))
    tree_seed, scm_seed = (int(s) for s in sq.generate_state(2))
    gen = gen_tree_type1 if tree_type == 1 else gen_tree_type2
    tree = gen(p, seed=tree_seed)
    spec = random_scm(tree, alpha=alpha, seed=scm_seed)
    data = sample_scm(spec, n)
    rows = []
    for score in scores:
        try:
            w = weight_matrix(data, kind=score, smoother_cfg=smoother_cfg, entropy_cfg=entropy_cfg)
            fitted, _ = min_arborescence(w)
            m = ancestor_metrics(fitted, tree)
            rows.append({
                "p": p, "n": n, "tree_type": tree_type, "alpha": alpha,
                "score": score, "rep": rep, "shd": m.shd,
                "ancestor_tpr": m.ancestor_tpr, "ancestor_recall": m.ancestor_recall,
                "error": "",
            })
        except Exception as exc:  # recorded, not fatal
            rows.append({
                "p": p, "n": n, "tree_type": tree_type, "alpha": alpha,
                "score": score, "rep": rep, "shd": None,
                "ancestor_tpr": None, "ancestor_recall": None,
                "error": f"{type(exc).__name__}: {exc}",
            })
    return rows


def run_benchmark(
    grid: BenchmarkGrid,
    seed: int = 0,
    smoother_cfg: SmootherConfig | None = None,
    entropy_cfg: EntropyConfig | None = None,
    threads: int = 1,
):
    """Run the full grid; returns (rows, summary).

    Each (cell, rep) derives its own seed through a spawn key, so results are
    identical regardless of evaluation order or thread count.
    """
    smoother_cfg = smoother_cfg or SmootherConfig()
    entropy_cfg = entropy_cfg or EntropyConfig()
    jobs = []
    for cell_idx, (p, n, tree_type, alpha) in enumerate(grid.cells()):
        for rep in range(grid.reps):
            jobs.append((cell_idx, rep, p, n, tree_type, alpha, grid.scores,
                         seed, smoother_cfg, entropy_cfg))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_one_rep, jobs))
    else:
        chunks = [_one_rep(job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]

    summary = []
    for (p, n, tree_type, alpha) in grid.cells():
        for score in grid.scores:
            sub = [
                r for r in rows
                if (r["p"], r["n"], r["tree_type"], r["alpha"], r["score"]) ==
                   (p, n, tree_type, alpha, score) and not r["error"]
            ]
            shds = np.array([r["shd"] for r in sub], dtype=float)
            entry = {
                "p": p, "n": n, "tree_type": tree_type, "alpha": alpha, "score": score,
                "reps_ok": len(sub), "reps_failed": grid.reps - len(sub),
            }
            if len(sub):
                q25, q50, q75 = np.percentile(shds, [25, 50, 75])
                entry.update(shd_median=float(q50), shd_iqr=float(q75 - q25))
                recalls = [r["ancestor_recall"] for r in sub]
                tprs = [r["ancestor_tpr"] for r in sub if r["ancestor_tpr"] is not None]
                entry.update(
                    ancestor_recall_mean=float(np.mean(recalls)),
                    ancestor_tpr_mean=float(np.mean(tprs)) if tprs else None,
                )
            summary.append(entry)
    return rows, summary


_CSV_FIELDS = ["p", "n", "tree_type", "alpha", "score", "rep",
               "shd", "ancestor_tpr", "ancestor_recall", "error"]


def benchmark_rows_to_csv(rows) -> str:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    lines = [",".join(_CSV_FIELDS)]
    for r in rows:
        lines.append(",".join(fmt(r[k]) for k in _CSV_FIELDS))
    return "\n".join(lines) + "\n"


def scm_truth_json(spec: ScmSpec) -> dict:
    obj = tree_to_json(spec.tree, list(spec.columns))
    obj["noise"] = [{"alpha": a, "sigma": s} for a, s in spec.noise]
    obj["seed"] = spec.seed
    return obj


def save_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
