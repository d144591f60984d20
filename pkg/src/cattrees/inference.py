"""Edge-weight confidence intervals and substructure hypothesis tests.

Built on the sample-split weight matrix: with smoothers trained on the
auxiliary half, each estimated weight is half the log-ratio of two empirical
means of i.i.d. quantities, so a delta-method variance and a Bonferroni
quantile give simultaneous confidence intervals

    [l, u]_ji = 0.5 * log(mu_ji / nu_i) -+ z * sigma_ji / (2 sqrt(n)),

with z the upper alpha / (2 p (p-1)) standard normal quantile and

    sigma_ji^2 = S_M[ji,ji]/mu_ji^2 + S_V[i,i]/nu_i^2 - 2 S_MV[ji,i]/(mu_ji nu_i).

A substructure constraint set R is tested by comparing the R-constrained
minimum tree total under the lower weights against the unconstrained minimum
under the upper weights: reject when the former exceeds the latter. Both
scores are weakly monotone in the weights, which is what makes the one-sided
comparison a level-alpha test; the same interval pair serves any number of
(possibly data-dependent) constraint sets without further correction.

The per-edge intervals themselves are biased (non-causal-pair residuals need
not converge to conditional-mean residuals); only the test decision carries
the asymptotic guarantee, which the README points out.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .arborescence import EdgeConstraintSet, InfeasibleConstraintError, min_arborescence
from .weights import WeightMatrix, ordered_pairs

__all__ = [
    "MomentSummaries",
    "ConfidenceReport",
    "TestReport",
    "moment_summaries",
    "confidence_intervals",
    "test_substructure",
    "test_many",
    "confidence_report_to_json",
    "test_report_to_json",
]


@dataclass(frozen=True)
class MomentSummaries:
    """Empirical first and second moments of the squared residual vectors and
    squared centered observations, divisor n throughout."""

    columns: list[str]
    pairs: list
    mu: np.ndarray = field(repr=False)  # (q,), mean squared residual per pair
    nu: np.ndarray = field(repr=False)  # (p,), centered second moment per node
    sigma_m: np.ndarray = field(repr=False)  # (q, q)
    sigma_v: np.ndarray = field(repr=False)  # (p, p)
    sigma_mv: np.ndarray = field(repr=False)  # (q, p)
    n: int = 0

    def __post_init__(self):
        q, p = len(self.pairs), len(self.columns)
        if self.mu.shape != (q,) or self.nu.shape != (p,):
            raise ValueError("moment vector shapes do not match pair/node counts")
        if self.sigma_m.shape != (q, q) or self.sigma_v.shape != (p, p) or self.sigma_mv.shape != (q, p):
            raise ValueError("covariance block shapes do not match pair/node counts")
        if np.any(self.mu <= 0.0) or np.any(self.nu <= 0.0):
            raise ValueError("mu and nu must be strictly positive")


@dataclass(frozen=True)
class ConfidenceReport:
    """Simultaneous intervals [lo, hi] around each estimated edge weight."""

    columns: list[str]
    alpha: float
    z: float
    n: int
    pairs: list
    w: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return len(self.columns)

    def _as_matrix(self, vec: np.ndarray) -> np.ndarray:
        mat = np.full((self.p, self.p), np.nan)
        for a, (j, i) in enumerate(self.pairs):
            mat[j, i] = vec[a]
        return mat

    def lo_matrix(self) -> np.ndarray:
        return self._as_matrix(self.lo)

    def hi_matrix(self) -> np.ndarray:
        return self._as_matrix(self.hi)


@dataclass(frozen=True)
class TestReport:
    """Decision record of one substructure test at level alpha.

    reject is True exactly when the constrained lower-weight optimum exceeds
    the unconstrained upper-weight optimum, or when no tree satisfies the
    constraints at all (the hypothesis is then impossible; the flag says why).
    """

    constraint: EdgeConstraintSet
    alpha: float
    s_lower: float | None
    s_upper: float
    reject: bool
    infeasible: bool = False


def moment_summaries(w: WeightMatrix) -> MomentSummaries:
    """Assemble the moment vectors and covariance blocks from the residual
    caches of a sample-split weight matrix."""
    if not w.split:
        raise ValueError(
            "moment summaries require sample-split residuals "
            "(weight_matrix on a SplitDataset)"
        )
    p = w.p
    pairs = ordered_pairs(p)
    missing = [pr for pr in pairs if pr not in w.residuals]
    if missing:
        raise ValueError(f"residual caches missing for pairs {missing[:4]}")
    n = w.eval_values.shape[0]
    q = len(pairs)
    if n < q + p:
        warnings.warn(
            f"n={n} below the recommended p(p-1)+p={q + p}; "
            "moment estimates will be noisy",
            RuntimeWarning,
            stacklevel=2,
        )

    m_stack = np.column_stack([w.residuals[pr] ** 2 for pr in pairs])  # (n, q)
    centered = w.eval_values - w.eval_values.mean(axis=0)
    v_stack = centered**2  # (n, p)
    mu = m_stack.mean(axis=0)
    nu = v_stack.mean(axis=0)
    if np.any(mu <= 0.0):
        bad = pairs[int(np.argmin(mu))]
        raise ValueError(f"degenerate mean squared residual for pair {bad}")
    if np.any(nu <= 0.0):
        raise ValueError("degenerate marginal second moment")

    both = np.concatenate([m_stack, v_stack], axis=1)
    cov = np.cov(both, rowvar=False, bias=True)
    return MomentSummaries(
        columns=list(w.columns),
        pairs=pairs,
        mu=mu,
        nu=nu,
        sigma_m=cov[:q, :q],
        sigma_v=cov[q:, q:],
        sigma_mv=cov[:q, q:],
        n=n,
    )


def confidence_intervals(ms: MomentSummaries, alpha: float) -> ConfidenceReport:
    """Simultaneous (Bonferroni over all p(p-1) pairs) intervals for the edge
    weights; numerically negative delta-method variances clamp to zero with a
    warning."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    p = len(ms.columns)
    q = len(ms.pairs)
    z = float(norm.isf(alpha / (2.0 * q)))
    w = np.empty(q)
    var = np.empty(q)
    for a, (j, i) in enumerate(ms.pairs):
        w[a] = 0.5 * np.log(ms.mu[a] / ms.nu[i])
        var[a] = (
            ms.sigma_m[a, a] / ms.mu[a] ** 2
            + ms.sigma_v[i, i] / ms.nu[i] ** 2
            - 2.0 * ms.sigma_mv[a, i] / (ms.mu[a] * ms.nu[i])
        )
    if np.any(var < 0.0):
        warnings.warn(
            "negative delta-method variance clamped to zero "
            f"({int((var < 0).sum())} of {q} pairs)",
            RuntimeWarning,
            stacklevel=2,
        )
        var = np.maximum(var, 0.0)
    sigma = np.sqrt(var)
    half = z * sigma / (2.0 * np.sqrt(ms.n))
    return ConfidenceReport(
        columns=list(ms.columns),
        alpha=alpha,
        z=z,
        n=ms.n,
        pairs=list(ms.pairs),
        w=w,
        sigma=sigma,
        lo=w - half,
        hi=w + half,
    )


def test_substructure(cr: ConfidenceReport, constraint: EdgeConstraintSet) -> TestReport:
    """One-sided comparison of the constrained optimum under lower weights
    against the unconstrained optimum under upper weights."""
    _, s_upper = min_arborescence(cr.hi_matrix())
    try:
        _, s_lower = min_arborescence(cr.lo_matrix(), constraint)
    except InfeasibleConstraintError:
        return TestReport(
            constraint=constraint,
            alpha=cr.alpha,
            s_lower=None,
            s_upper=s_upper,
            reject=True,
            infeasible=True,
        )
    return TestReport(
        constraint=constraint,
        alpha=cr.alpha,
        s_lower=s_lower,
        s_upper=s_upper,
        reject=bool(s_lower > s_upper),
        infeasible=False,
    )


def test_many(cr: ConfidenceReport, constraints) -> list:
    """Evaluate several constraint sets against the same interval pair; the
    shared region is what controls the family-wise error, so no further
    multiplicity correction is applied."""
    return [test_substructure(cr, c) for c in constraints]


def confidence_report_to_json(cr: ConfidenceReport) -> dict:
    return {
        "alpha": cr.alpha,
        "z": cr.z,
        "n": cr.n,
        "edges": [
            {
                "from": cr.columns[j],
                "to": cr.columns[i],
                "w": float(cr.w[a]),
                "sigma": float(cr.sigma[a]),
                "lo": float(cr.lo[a]),
                "hi": float(cr.hi[a]),
            }
            for a, (j, i) in enumerate(cr.pairs)
        ],
    }


def constraint_strings(c: EdgeConstraintSet, names) -> list:
    out = [f"{names[j]}->{names[i]}" for j, i in sorted(c.required)]
    out += [f"{names[j]}-x>{names[i]}" for j, i in sorted(c.forbidden)]
    if c.root is not None:
        out.append(f"root:{names[c.root]}")
    return out


def test_report_to_json(tr: TestReport, names) -> dict:
    return {
        "constraints": constraint_strings(tr.constraint, names),
        "alpha": tr.alpha,
        "s_lower": None if tr.s_lower is None else float(tr.s_lower),
        "s_upper": float(tr.s_upper),
        "reject": tr.reject,
        "infeasible": tr.infeasible,
    }
