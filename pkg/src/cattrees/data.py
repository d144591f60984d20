"""Dataset container, CSV ingestion, deterministic splitting, summary statistics.

All downstream estimators consume the ``Dataset`` type defined here. Data are
kept as a plain (n, p) float64 matrix; instances are treated as immutable and
can be shared freely across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "SplitDataset",
    "DegenerateDataError",
    "CsvParseError",
    "load_csv",
    "save_csv",
    "split",
    "column_variance",
    "standardize",
]


class CsvParseError(ValueError):
    """Raised when a CSV cell or row cannot be turned into finite numbers."""


class DegenerateDataError(ValueError):
    """Raised when a variance (or other moment) is too degenerate to use."""


@dataclass(frozen=True)
class Dataset:
    """An (n, p) sample of jointly observed real variables.

    Invariants: entries finite, column names unique, p >= 2. Construction from
    raw files additionally requires n >= 2 (see ``load_csv``); split halves may
    hold a single row.
    """

    columns: list[str]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError(f"values must be 2-d, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)
        n, p = vals.shape
        if p < 2:
            raise ValueError(f"need at least 2 columns, got {p}")
        if n < 1:
            raise ValueError("dataset has no rows")
        if len(self.columns) != p:
            raise ValueError(f"{len(self.columns)} names for {p} columns")
        if len(set(self.columns)) != p:
            raise ValueError("column names are not unique")
        if not np.all(np.isfinite(vals)):
            r, c = np.argwhere(~np.isfinite(vals))[0]
            raise ValueError(f"non-finite value at row {r}, column {self.columns[c]!r}")
        vals.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"unknown column {name!r}; have {self.columns}") from None


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint halves of one sample: ``main`` for evaluating residual moments,
    ``auxiliary`` for training the regression smoothers."""

    main: Dataset
    auxiliary: Dataset

    def __post_init__(self):
        if self.main.columns != self.auxiliary.columns:
            raise ValueError("split halves must share identical column names")

    @property
    def p(self) -> int:
        return self.main.p


def load_csv(path, has_header: bool = True) -> Dataset:
    """Read a comma-separated numeric file into a Dataset.

    The file may carry a single header line; without one, columns are named
    X1..Xp. Every cell must parse as a finite real; errors report the
    offending (row, column) location using 1-based file coordinates.
    """
    with open(path, "r") as fh:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines:
        raise CsvParseError(f"{path}: empty file")

    if has_header:
        names = [c.strip() for c in lines[0].split(",")]
        body = lines[1:]
        first_row = 2
    else:
        names = None
        body = lines
        first_row = 1
    if not body:
        raise CsvParseError(f"{path}: no data rows")

    rows = []
    width = None
    for r, ln in enumerate(body, start=first_row):
        cells = ln.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise CsvParseError(f"{path}: row {r} has {len(cells)} cells, expected {width}")
        parsed = []
        for c, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise CsvParseError(f"{path}: unparseable cell at row {r}, column {c}: {cell!r}") from None
            if not np.isfinite(v):
                raise CsvParseError(f"{path}: non-finite value at row {r}, column {c}: {cell!r}")
            parsed.append(v)
        rows.append(parsed)

    mat = np.array(rows, dtype=float)
    if mat.shape[1] < 2:
        raise CsvParseError(f"{path}: need at least 2 columns, got {mat.shape[1]}")
    if mat.shape[0] < 2:
        raise CsvParseError(f"{path}: need at least 2 rows, got {mat.shape[0]}")
    if names is None:
        names = [f"X{i + 1}" for i in range(mat.shape[1])]
    return Dataset(columns=names, values=mat)


def save_csv(d: Dataset, path) -> None:
    """Write a Dataset with a header line; floats at 17 significant digits so
    that load_csv(save_csv(d)) round-trips exactly."""
    with open(path, "w") as fh:
        fh.write(",".join(d.columns) + "\n")
        for row in d.values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def split(d: Dataset, fraction: float, seed: int) -> SplitDataset:
    """Partition rows into disjoint (main, auxiliary) halves.

    ``fraction`` is the share of rows routed to the auxiliary (regression
    training) half, rounded down. The permutation is a deterministic function
    of ``seed``; the two halves form an exact partition of the input rows.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = d.n
    n_aux = int(n * fraction)
    n_main = n - n_aux
    if n_aux < 1 or n_main < 1:
        raise ValueError(f"fraction {fraction} leaves an empty half for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    aux_idx = np.sort(perm[:n_aux])
    main_idx = np.sort(perm[n_aux:])
    return SplitDataset(
        main=Dataset(columns=list(d.columns), values=d.values[main_idx]),
        auxiliary=Dataset(columns=list(d.columns), values=d.values[aux_idx]),
    )


def column_variance(d: Dataset, i: int) -> float:
    """Population-style variance (divisor n) of column i:
    (1/n) sum x^2 - ((1/n) sum x)^2.

    A non-positive result is flagged with a warning; downstream weight
    computations treat it as a hard error because its log is undefined.
    """
    x = d.column(i)
    if x.shape[0] < 2:
        raise ValueError("variance needs at least 2 observations")
    v = float(np.mean(x * x) - np.mean(x) ** 2)
    if v <= 0.0:
        warnings.warn(
            f"column {d.columns[i]!r} is degenerate (variance {v!r})",
            RuntimeWarning,
            stacklevel=2,
        )
    return v


def standardize(d: Dataset) -> Dataset:
    """Rescale every column to unit (divisor-n) variance, keeping means.

    Off by default in all pipelines: marginal variances carry causal-order
    signal in simulated additive models, so normalization is a user choice.
    """
    sds = []
    for i in range(d.p):
        v = column_variance(d, i)
        if v <= 0.0:
            raise DegenerateDataError(f"cannot standardize degenerate column {d.columns[i]!r}")
        sds.append(np.sqrt(v))
    mu = d.values.mean(axis=0)
    vals = (d.values - mu) / np.array(sds) + mu
    return Dataset(columns=list(d.columns), values=vals)
