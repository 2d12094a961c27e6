"""Typed, immutable dataset layer with explicit missingness.

Reads RFC-4180 CSV into typed columns (continuous or categorical), infers
per-variable metadata including the hierarchical level of each variable when
the data are grouped, summarises missing-data patterns, and provides the
centre/scale and contrast-coding primitives the model builder relies on.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

LEVEL_ONE = "lvlone"


def _fmt_num(x: float) -> str:
    """Format a numeric category label the way R prints factor levels."""
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# Columns and Dataset


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # 'continuous' | 'categorical'
    values: np.ndarray  # float values, or float codes 1..K for categorical
    missing: np.ndarray  # bool mask, True where the cell was not observed
    categories: tuple = ()  # labels in first-appearance order (categorical only)

    def __post_init__(self):
        self.values.flags.writeable = False
        self.missing.flags.writeable = False

    @property
    def n_missing_cells(self) -> int:
        return int(self.missing.sum())

    def observed(self) -> np.ndarray:
        return self.values[~self.missing]


@dataclass(frozen=True)
class Dataset:
    columns: dict
    n_rows: int
    source: str | None = None

    @property
    def names(self) -> list:
        return list(self.columns)

    def __getitem__(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"no column named {name!r} in the data") from None

    def require(self, names) -> None:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise DataError(f"data is missing required column(s): {', '.join(sorted(missing))}")


def read_csv(path_or_buffer, na_token: str = "NA", source: str | None = None) -> Dataset:
    """Read a CSV file into a :class:`Dataset`.

    Cells equal to ``na_token`` or empty are treated as missing. A column is
    continuous when every observed cell parses as a number, categorical
    otherwise; category order is the order of first appearance.
    """
    if isinstance(path_or_buffer, (str, bytes)):
        with open(path_or_buffer, "r", encoding="utf-8", newline="") as fh:
            return read_csv(fh, na_token=na_token, source=str(path_or_buffer))
    if isinstance(path_or_buffer, io.TextIOBase) or hasattr(path_or_buffer, "read"):
        reader = csv.reader(path_or_buffer)
    else:
        raise DataError(f"cannot read CSV from {type(path_or_buffer).__name__}")

    try:
        header = next(reader)
    except StopIteration:
        raise DataError("CSV file is empty") from None
    header = [h.strip() for h in header]
    if any(not h for h in header):
        raise DataError("CSV header contains an empty column name")
    dupes = {h for h in header if header.count(h) > 1}
    if dupes:
        raise DataError(f"CSV header contains duplicate column name(s): {', '.join(sorted(dupes))}")

    cells: list = []
    for rownr, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise DataError(
                f"CSV row {rownr} has {len(row)} cells, expected {len(header)}"
            )
        cells.append([c.strip() for c in row])
    if not cells:
        raise DataError("CSV file has a header but no data rows")

    n = len(cells)
    columns: dict = {}
    for j, name in enumerate(header):
        raw = [cells[i][j] for i in range(n)]
        missing = np.array([c == "" or c == na_token for c in raw], dtype=bool)
        observed = [c for c, m in zip(raw, missing) if not m]
        numeric = True
        for c in observed:
            try:
                float(c)
            except ValueError:
                numeric = False
                break
        if numeric and observed:
            values = np.full(n, np.nan)
            for i, (c, m) in enumerate(zip(raw, missing)):
                if not m:
                    values[i] = float(c)
            columns[name] = Column(name, "continuous", values, missing)
        else:
            categories: list = []
            codes = np.zeros(n)
            for i, (c, m) in enumerate(zip(raw, missing)):
                if m:
                    continue
                if c not in categories:
                    categories.append(c)
                codes[i] = categories.index(c) + 1
            columns[name] = Column(name, "categorical", codes, missing, tuple(categories))
    return Dataset(columns=columns, n_rows=n, source=source)


# ---------------------------------------------------------------------------
# Grouping


@dataclass(frozen=True)
class GroupIndex:
    """Row <-> group bookkeeping for two-level data."""

    var: str
    labels: tuple  # group labels in first-appearance order
    codes: np.ndarray  # 0-based group index per row
    rep_rows: np.ndarray  # first data row of each group

    @property
    def n_groups(self) -> int:
        return len(self.labels)

    def rows_of(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.codes == g)


def group_index(ds: Dataset, grouping: str) -> GroupIndex:
    col = ds[grouping]
    if col.n_missing_cells:
        raise DataError(f"grouping variable {grouping!r} has missing values")
    labels: list = []
    seen: dict = {}
    codes = np.zeros(ds.n_rows, dtype=int)
    rep: list = []
    for i in range(ds.n_rows):
        if col.kind == "categorical":
            key = col.categories[int(col.values[i]) - 1]
        else:
            key = _fmt_num(col.values[i])
        if key not in seen:
            seen[key] = len(labels)
            labels.append(key)
            rep.append(i)
        codes[i] = seen[key]
    return GroupIndex(grouping, tuple(labels), codes, np.array(rep, dtype=int))


# ---------------------------------------------------------------------------
# Variable metadata


@dataclass(frozen=True)
class VariableMeta:
    name: str
    vtype: str  # 'continuous' | 'binary' | 'categorical' | 'ordered'
    level: str  # LEVEL_ONE or the grouping variable's name
    n_missing: int  # counted at the variable's own level
    n_units: int  # rows for level-one variables, groups otherwise
    categories: tuple = ()
    mean: float | None = None
    sd: float | None = None

    @property
    def is_categorical(self) -> bool:
        return self.vtype in ("binary", "categorical", "ordered")

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def incomplete(self) -> bool:
        return self.n_missing > 0


def _group_constant(col: Column, gi: GroupIndex) -> bool:
    for g in range(gi.n_groups):
        rows = gi.rows_of(g)
        vals = col.values[rows][~col.missing[rows]]
        if vals.size > 1 and not np.all(vals == vals[0]):
            return False
    return True


def infer_variable_meta(
    ds: Dataset,
    grouping: str | None = None,
    overrides: dict | None = None,
) -> dict:
    """Infer a :class:`VariableMeta` for every column.

    Numeric columns with exactly two distinct observed values become binary
    factors. When ``grouping`` is given, columns constant within every group
    are treated as group-level variables, with missingness counted per group
    (a group is missing when it has no observed value at all). ``overrides``
    may force a type per variable, e.g. ``{"smoke": {"type": "ordered",
    "order": ["never", "former", "current"]}}``.
    """
    overrides = overrides or {}
    unknown = set(overrides) - set(ds.columns)
    if unknown:
        raise ConfigError(f"type override(s) for unknown column(s): {', '.join(sorted(unknown))}")
    gi = group_index(ds, grouping) if grouping else None

    metas: dict = {}
    for name, col in ds.columns.items():
        spec = dict(overrides.get(name, {}))
        declared = spec.pop("type", None)
        order = spec.pop("order", None)
        if spec:
            raise ConfigError(f"unknown keys in type override for {name!r}: {', '.join(sorted(spec))}")

        # level
        if grouping and name == grouping:
            level = grouping
            n_units = gi.n_groups
        elif gi is not None and _group_constant(col, gi):
            level = grouping
            n_units = gi.n_groups
        else:
            level = LEVEL_ONE
            n_units = ds.n_rows

        # type and categories
        observed = col.observed()
        distinct = np.unique(observed)
        if col.kind == "categorical":
            categories = col.categories
            if declared == "continuous":
                raise ConfigError(f"column {name!r} has non-numeric values; cannot declare it continuous")
            if declared == "ordered":
                categories = _ordered_categories(name, col.categories, order)
                vtype = "ordered"
            elif len(categories) == 2:
                vtype = "binary"
            else:
                vtype = "categorical"
        else:
            if declared in ("categorical", "ordered", "binary") or (
                declared is None and distinct.size == 2
            ):
                categories = tuple(_fmt_num(v) for v in distinct)  # ascending numeric order
                if declared == "ordered" and order is not None:
                    categories = _ordered_categories(name, categories, order)
                if declared == "ordered":
                    vtype = "ordered"
                elif len(categories) == 2:
                    vtype = "binary"
                else:
                    vtype = "categorical"
            else:
                categories = ()
                vtype = "continuous"

        # missingness at the variable's level
        if level != LEVEL_ONE and name != grouping:
            n_missing = 0
            for g in range(gi.n_groups):
                rows = gi.rows_of(g)
                if col.missing[rows].all():
                    n_missing += 1
        elif name == grouping:
            n_missing = 0
        else:
            n_missing = col.n_missing_cells

        mean = sd = None
        if vtype == "continuous" and observed.size >= 2:
            mean = float(observed.mean())
            sd = float(observed.std(ddof=1))

        metas[name] = VariableMeta(
            name=name,
            vtype=vtype,
            level=level,
            n_missing=n_missing,
            n_units=n_units,
            categories=categories,
            mean=mean,
            sd=sd,
        )
    return metas


def _ordered_categories(name: str, found, order) -> tuple:
    if order is None:
        raise ConfigError(
            f"ordered variable {name!r} needs an explicit category order "
            "(an 'order' list in its type override)"
        )
    order = [str(o) for o in order]
    if sorted(order) != sorted(found):
        raise ConfigError(
            f"category order for {name!r} must list exactly its observed categories "
            f"{sorted(found)}; got {order}"
        )
    return tuple(order)


def category_codes(ds: Dataset, meta: VariableMeta) -> np.ndarray:
    """Float codes 1..K for a categorical variable (0 where missing).

    Codes follow ``meta.categories`` order, which may differ from the raw
    column's first-appearance order for ordered variables or numeric factors.
    """
    col = ds[meta.name]
    codes = np.zeros(ds.n_rows)
    if col.kind == "categorical":
        lookup = {col.categories.index(c) + 1: k + 1 for k, c in enumerate(meta.categories)
                  if c in col.categories}
        for i in range(ds.n_rows):
            if not col.missing[i]:
                codes[i] = lookup[int(col.values[i])]
    else:
        lookup_num = {float(c): k + 1 for k, c in enumerate(meta.categories)}
        for i in range(ds.n_rows):
            if not col.missing[i]:
                codes[i] = lookup_num[float(col.values[i])]
    return codes


# ---------------------------------------------------------------------------
# Missing-data pattern


@dataclass(frozen=True)
class MdPattern:
    variables: tuple  # column names, fewest missing first
    patterns: np.ndarray  # n_patterns x n_vars of 0/1 (1 = observed)
    counts: np.ndarray  # rows exhibiting each pattern
    n_missing: np.ndarray  # total missing cells per variable, aligned with `variables`


def md_pattern(ds: Dataset, variables=None) -> MdPattern:
    """Tabulate the distinct missingness patterns in the data.

    Columns are ordered by their total number of missing values (ascending,
    ties keep the original column order). Patterns are ordered by frequency
    (descending), ties broken by the pattern's 0/1 string in descending
    lexicographic order, so more-complete patterns come first.
    """
    names = list(variables) if variables is not None else ds.names
    ds.require(names)
    order = sorted(range(len(names)), key=lambda j: ds[names[j]].n_missing_cells)
    names = [names[j] for j in order]

    mask = np.column_stack([~ds[n].missing for n in names]).astype(int)
    seen: dict = {}
    for i in range(ds.n_rows):
        key = tuple(mask[i])
        seen[key] = seen.get(key, 0) + 1
    rows = sorted(seen.items(), key=lambda kv: (-kv[1], tuple(-b for b in kv[0])))
    patterns = np.array([list(k) for k, _ in rows], dtype=int)
    counts = np.array([c for _, c in rows], dtype=int)
    n_missing = np.array([ds[n].n_missing_cells for n in names], dtype=int)
    return MdPattern(tuple(names), patterns, counts, n_missing)


def md_pattern_rows(pat: MdPattern) -> list:
    """Rows for CSV emission: header, one row per pattern with its count,
    and a trailing row of per-variable missing totals."""
    out = [list(pat.variables) + ["count"]]
    for i in range(len(pat.counts)):
        out.append([int(v) for v in pat.patterns[i]] + [int(pat.counts[i])])
    out.append([int(v) for v in pat.n_missing] + [int(pat.n_missing.sum())])
    return out


# ---------------------------------------------------------------------------
# Scaling and contrasts


@dataclass(frozen=True)
class ScaleStats:
    mean: float
    sd: float


def scaling_stats(values: np.ndarray, missing: np.ndarray | None = None) -> ScaleStats:
    """Observed mean and sample standard deviation of a numeric column."""
    observed = values if missing is None else values[~missing]
    observed = observed[np.isfinite(observed)]
    if observed.size < 2:
        raise DataError("scaling needs at least two observed values")
    sd = float(observed.std(ddof=1))
    if sd == 0.0:
        raise DataError("cannot scale a column with zero variance")
    return ScaleStats(mean=float(observed.mean()), sd=sd)


def apply_scaling(values: np.ndarray, stats: ScaleStats) -> np.ndarray:
    return (values - stats.mean) / stats.sd


def resolve_refcat(meta: VariableMeta, spec=None, codes: np.ndarray | None = None) -> int:
    """Resolve a reference-category request to a 0-based category index.

    ``spec`` may be None or "first" (default), "last", "largest" (most
    frequent observed category, ties to the earlier category), a category
    label, or a 1-based integer index.
    """
    if not meta.is_categorical:
        raise ConfigError(f"{meta.name!r} is not categorical; it has no reference category")
    K = meta.n_categories
    if spec is None or spec == "first":
        return 0
    if spec == "last":
        return K - 1
    if spec == "largest":
        if codes is None:
            raise ConfigError("resolving refcat='largest' needs the observed codes")
        counts = np.bincount(codes[codes > 0].astype(int), minlength=K + 1)[1:]
        return int(np.argmax(counts))  # argmax takes the first (lowest-order) maximum
    if isinstance(spec, bool):
        raise ConfigError(f"invalid reference category {spec!r} for {meta.name!r}")
    if isinstance(spec, (int, np.integer)) or (
        isinstance(spec, float) and float(spec).is_integer()
    ):
        idx = int(spec)
        if not 1 <= idx <= K:
            raise ConfigError(
                f"reference category index {idx} for {meta.name!r} is out of range 1..{K}"
            )
        return idx - 1
    if isinstance(spec, str):
        if spec in meta.categories:
            return meta.categories.index(spec)
        raise ConfigError(
            f"unknown reference category {spec!r} for {meta.name!r}; "
            f"categories are {list(meta.categories)}"
        )
    raise ConfigError(f"invalid reference category {spec!r} for {meta.name!r}")


def encode_contrasts(
    codes: np.ndarray,
    n_categories: int,
    ref_index: int = 0,
    coding: str = "dummy",
) -> np.ndarray:
    """Contrast columns for codes 1..K; one column per non-reference category.

    Dummy coding indicates each non-reference category; effect coding
    additionally marks reference-category rows with -1 in every column.
    Missing cells (code 0) become NaN rows.
    """
    if coding not in ("dummy", "effect"):
        raise ConfigError(f"unknown contrast coding {coding!r}; use 'dummy' or 'effect'")
    cats = [k for k in range(n_categories) if k != ref_index]
    out = np.zeros((codes.shape[0], len(cats)))
    with np.errstate(invalid="ignore"):
        for j, k in enumerate(cats):
            out[:, j] = (codes == k + 1).astype(float)
        if coding == "effect":
            out[codes == ref_index + 1] = -1.0
        out[~np.isfinite(codes) | (codes == 0)] = np.nan
    return out


def contrast_names(var: str, categories, ref_index: int) -> list:
    return [f"{var}{c}" for k, c in enumerate(categories) if k != ref_index]
