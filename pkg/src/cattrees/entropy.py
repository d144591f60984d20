"""Differential entropy and mutual information by k-nearest-neighbour
distances.

The estimator is the plain (unweighted) Kozachenko-Leonenko construction with
Euclidean distances,

    h_hat = psi(n) - psi(k) + log(c_d) + (d / n) * sum_m log(rho_{k,m}),

where rho_{k,m} is the distance from point m to its k-th nearest neighbour and
c_d the d-dimensional unit-ball volume. We use it at d <= 2 only, where it is
accurate without the weighting schemes needed in higher dimensions; this is a
deliberate simplification relative to weighted-kNN alternatives and is noted
in the README. Natural logarithms throughout, so every value is in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

__all__ = ["EntropyConfig", "DegenerateSampleError", "entropy_knn", "mutual_information"]

_JITTER_SEED = 0x1CEB00DA  # fixed stream for duplicate tie-breaking
_JITTER_SCALE = 1e-10

_UNIT_BALL_VOLUME = {1: 2.0, 2: np.pi}


class DegenerateSampleError(ValueError):
    """Sample geometry leaves the entropy estimate undefined (duplicates that
    cannot be separated, or a singular joint distribution)."""


@dataclass
class EntropyConfig:
    k: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


def _as_points(samples) -> np.ndarray:
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"samples must be 1-d or 2-d, got shape {pts.shape}")
    if pts.shape[1] not in (1, 2):
        raise ValueError(f"estimator supports d in {{1, 2}}, got d={pts.shape[1]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("samples contain non-finite values")
    return pts


def _break_duplicates(pts: np.ndarray) -> np.ndarray:
    """Separate exactly duplicated rows with a deterministic tiny jitter.

    Each member of a duplicate group receives a scalar draw from a fixed
    seeded stream, scaled by 1e-10 times the per-coordinate standard
    deviation, so distances stay invariant under coordinate reordering.
    """
    _, inverse, counts = np.unique(pts, axis=0, return_inverse=True, return_counts=True)
    dup_rows = np.flatnonzero(counts[inverse] > 1)
    if dup_rows.size == 0:
        return pts
    sd = pts.std(axis=0)
    if np.all(sd == 0.0):
        raise DegenerateSampleError("all points identical; jitter cannot separate them")
    rng = np.random.default_rng(_JITTER_SEED)
    u = rng.uniform(-1.0, 1.0, size=dup_rows.size)
    out = pts.copy()
    out[dup_rows] = out[dup_rows] + u[:, None] * (_JITTER_SCALE * sd)[None, :]
    return out


def entropy_knn(samples, cfg: EntropyConfig | None = None) -> float:
    """Kozachenko-Leonenko differential entropy estimate in nats (d <= 2)."""
    cfg = cfg or EntropyConfig()
    pts = _as_points(samples)
    n, d = pts.shape
    if n <= cfg.k:
        raise ValueError(f"need n > k, got n={n}, k={cfg.k}")
    if d == 2:
        cov = np.cov(pts.T)
        scale = float(cov[0, 0] * cov[1, 1])
        if np.linalg.det(cov) <= 1e-12 * max(scale, np.finfo(float).tiny):
            raise DegenerateSampleError(
                "joint sample is (numerically) affinely degenerate; "
                "its differential entropy is -inf"
            )
    pts = _break_duplicates(pts)
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=cfg.k + 1)
    rho = dist[:, cfg.k]
    if np.any(rho <= 0.0):
        raise DegenerateSampleError("zero k-th neighbour distance after jitter")
    return float(
        digamma(n) - digamma(cfg.k) + np.log(_UNIT_BALL_VOLUME[d]) + d * np.mean(np.log(rho))
    )


def mutual_information(x, y, cfg: EntropyConfig | None = None) -> float:
    """I(x; y) = h(x) + h(y) - h(x, y), raw (possibly slightly negative).

    Reports that need a nonnegative value clamp at zero downstream; the raw
    value is what this function returns.
    """
    cfg = cfg or EntropyConfig()
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    hx = entropy_knn(x, cfg)
    hy = entropy_knn(y, cfg)
    hxy = entropy_knn(np.column_stack([x, y]), cfg)
    return hx + hy - hxy
