"""Dataset ingestion and preparation.

Loads delimited text with a header row, infers a per-column kind (or takes
a schema override), drops and counts rows with missing cells, recodes
categorical labels to dense zero-based codes, and provides the seeded
train/validation/test split and a nearest-neighbor outlier filter.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataFormatError
from .leaves import families_for_column

MISSING_TOKENS = {"", "na", "nan", "null", "?"}
MAX_CATEGORICAL_LEVELS = 20

KIND_ALIASES = {
    "continuous": "continuous",
    "positive": "positive",
    "continuous-positive": "positive",
    "count": "count",
    "categorical": "categorical",
}


@dataclass(frozen=True)
class Column:
    """One column's metadata.

    ``kind`` is ``continuous``, ``positive``, ``count``, or
    ``categorical:K``.  For categorical columns ``levels[c]`` is the original
    label encoded as code ``c``; codes are dense and zero-based.
    """

    name: str
    kind: str
    levels: tuple = ()


@dataclass
class Dataset:
    """A fully ingested value table plus column metadata and provenance."""

    X: np.ndarray
    columns: list[Column]
    source: str = ""
    split_tag: str = ""
    dropped_rows: int = 0

    @property
    def num_rows(self) -> int:
        return self.X.shape[0]

    @property
    def num_dims(self) -> int:
        return self.X.shape[1]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def kinds(self) -> list[str]:
        return [c.kind for c in self.columns]

    def leaf_spec(self) -> list[tuple[str, ...]]:
        """Per-dimension leaf family candidates for the graph builder."""
        return [families_for_column(k) for k in self.kinds]


def _parse_int(s: str):
    try:
        return int(s)
    except ValueError:
        return None


def _parse_float(s: str):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if np.isfinite(v) else None


def _infer_kind(cells: list[str]) -> str:
    ints = [_parse_int(s) for s in cells]
    if all(v is not None for v in ints):
        if len(set(ints)) <= MAX_CATEGORICAL_LEVELS:
            return "categorical"
        # Unbounded-looking integer columns are counts when non-negative;
        # negative values rule the count family out, so fall back.
        return "count" if min(ints) >= 0 else "continuous"
    floats = [_parse_float(s) for s in cells]
    if all(v is not None for v in floats):
        return "positive" if min(floats) > 0 else "continuous"
    return "categorical"


def _encode_column(name: str, cells: list[str], kind: str) -> tuple[np.ndarray, Column]:
    if kind.startswith("categorical"):
        forced_k = None
        if ":" in kind:
            forced_k = int(kind.split(":", 1)[1])
            if forced_k < 1:
                raise DataFormatError(f"column {name!r}: categorical size must be >= 1")
        levels = sorted(set(cells), key=lambda s: (len(s), s))
        # Numeric labels sort numerically so codes are stable and readable.
        if all(_parse_float(s) is not None for s in levels):
            levels = sorted(levels, key=lambda s: float(s))
        if forced_k is not None and len(levels) > forced_k:
            raise DataFormatError(
                f"column {name!r}: {len(levels)} distinct values exceed "
                f"declared categorical size {forced_k}"
            )
        k = forced_k if forced_k is not None else len(levels)
        code = {s: c for c, s in enumerate(levels)}
        values = np.asarray([code[s] for s in cells], dtype=float)
        return values, Column(name, f"categorical:{k}", tuple(levels))
    values = np.empty(len(cells))
    for i, s in enumerate(cells):
        v = _parse_float(s)
        if v is None:
            raise DataFormatError(
                f"column {name!r} row {i + 1}: cannot parse {s!r} as a number"
            )
        values[i] = v
    if kind == "count":
        bad = np.nonzero((values < 0) | (values != np.floor(values)))[0]
        if bad.size:
            raise DataFormatError(
                f"column {name!r} row {bad[0] + 1}: value {values[bad[0]]!r} "
                "is not a non-negative integer"
            )
    elif kind == "positive":
        bad = np.nonzero(values < 0)[0]
        if bad.size:
            raise DataFormatError(
                f"column {name!r} row {bad[0] + 1}: value {values[bad[0]]!r} "
                "is negative"
            )
    return values, Column(name, kind)


def _normalize_kind(name: str, kind: str) -> str:
    k = kind.strip().lower()
    if k.startswith("categorical:"):
        return k
    if k in KIND_ALIASES:
        return KIND_ALIASES[k]
    raise DataFormatError(f"column {name!r}: unknown kind {kind!r}")


def load_schema(path) -> dict:
    """Read a ``{column name: kind}`` JSON mapping."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in obj.items()
    ):
        raise DataFormatError("schema must be a JSON object mapping names to kinds")
    return obj


def load_delimited(path, schema: dict | None = None) -> Dataset:
    """Load a comma- or tab-delimited text file with a header row.

    Rows containing missing cells (empty, ``na``, ``nan``, ``null``, ``?``)
    are dropped and counted in ``dropped_rows``.  Column kinds are inferred
    — integer-valued with at most 20 distinct values means categorical,
    other non-negative integer columns mean count, strictly positive reals
    mean positive, anything else numeric means continuous, non-numeric means
    categorical — unless ``schema`` maps the column name to a kind.
    Categorical labels are recoded to dense zero-based codes with the
    original labels kept in the column metadata.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        head = fh.readline()
        if not head.strip():
            raise DataFormatError(f"{path}: empty file or blank header")
        delim = "\t" if "\t" in head else ","
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delim)
        header = [h.strip() for h in next(reader)]
        raw = [[c.strip() for c in row] for row in reader if row]
    d = len(header)
    if schema:
        unknown = set(schema) - set(header)
        if unknown:
            raise DataFormatError(f"schema names not in header: {sorted(unknown)}")
    kept: list[list[str]] = []
    dropped = 0
    for i, row in enumerate(raw):
        if len(row) != d:
            raise DataFormatError(
                f"row {i + 1}: expected {d} fields, got {len(row)}"
            )
        if any(c.lower() in MISSING_TOKENS for c in row):
            dropped += 1
            continue
        kept.append(row)
    if not kept:
        raise DataFormatError(f"{path}: no complete rows")
    cols: list[Column] = []
    mats = []
    for j, name in enumerate(header):
        cells = [row[j] for row in kept]
        if schema and name in schema:
            kind = _normalize_kind(name, schema[name])
        else:
            kind = _infer_kind(cells)
        values, col = _encode_column(name, cells, kind)
        mats.append(values)
        cols.append(col)
    return Dataset(
        X=np.column_stack(mats),
        columns=cols,
        source=str(path),
        dropped_rows=dropped,
    )


def _format_cell(value: float, col: Column) -> str:
    if col.kind.startswith("categorical") and col.levels:
        return str(col.levels[int(value)])
    if col.kind == "count":
        return str(int(value))
    return repr(float(value))


def save_delimited(path, ds: Dataset) -> None:
    """Write a dataset back to comma-delimited text (labels restored)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.names)
        for row in ds.X:
            writer.writerow([_format_cell(v, c) for v, c in zip(row, ds.columns)])


def split(ds: Dataset, ratios=(8, 1, 1), seed: int = 0):
    """Seeded shuffle then contiguous train/validation/test split.

    The three parts are disjoint and exhaustive; sizes follow cumulative
    rounding of the ratios, e.g. 100 rows at (8, 1, 1) gives (80, 10, 10).
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    n = ds.num_rows
    perm = np.random.default_rng(seed).permutation(n)
    total = float(sum(ratios))
    edge1 = int(n * ratios[0] / total)
    edge2 = int(n * (ratios[0] + ratios[1]) / total)
    parts = (perm[:edge1], perm[edge1:edge2], perm[edge2:])
    tags = ("train", "val", "test")
    return tuple(
        replace(ds, X=ds.X[idx].copy(), split_tag=tag)
        for idx, tag in zip(parts, tags)
    )


@dataclass
class FilterReport:
    """Which rows the outlier filter removed and why."""

    removed_indices: np.ndarray
    threshold: float
    scores: np.ndarray

    @property
    def removed(self) -> int:
        return int(self.removed_indices.size)


def knn_outlier_filter(ds: Dataset, k: int = 5, quantile: float = 0.99):
    """Drop rows far from their nearest neighbors.

    Every column is standardized (zero mean, unit spread; constant columns
    left centered), each row is scored by its mean Euclidean distance to its
    ``k`` nearest neighbors, and rows scoring strictly above the given
    quantile of that statistic are removed.  Quantile 1.0 therefore removes
    nothing, and at most ``(1 - quantile) * N + 1`` rows ever go.
    """
    n = ds.num_rows
    if n <= k:
        raise DataFormatError(f"need more than k={k} rows, got {n}")
    if not 0 < quantile <= 1:
        raise ValueError("quantile must lie in (0, 1]")
    z = ds.X - ds.X.mean(axis=0)
    scale = ds.X.std(axis=0)
    scale[scale == 0] = 1.0
    z /= scale
    dist, _ = cKDTree(z).query(z, k=k + 1)
    scores = dist[:, 1:].mean(axis=1)
    threshold = float(np.quantile(scores, quantile))
    removed = np.nonzero(scores > threshold)[0]
    keep = np.nonzero(scores <= threshold)[0]
    filtered = replace(ds, X=ds.X[keep].copy())
    return filtered, FilterReport(
        removed_indices=removed, threshold=threshold, scores=scores
    )
