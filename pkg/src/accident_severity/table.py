"""Columnar in-memory tables with explicit missing cells.

A :class:`ColumnTable` stores one numpy array per column plus a boolean
mask marking missing cells.  Values under the mask are placeholders and are
never exposed: cell accessors return the :data:`MISSING` singleton instead.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

KINDS = ("numeric", "boolean", "categorical", "text", "timestamp")
DEFAULT_MISSING_MARKERS = ("", "NA")

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_BOOL_LITERALS = {"true": True, "false": False, "True": True, "False": False}


class _Missing:
    """Marker for a missing cell."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Missing, ())


MISSING = _Missing()


class TableError(ValueError):
    """Raised for malformed input or references to unknown columns."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    nullable: bool = True

    def __post_init__(self):
        if not self.name:
            raise TableError("column name must be non-empty")
        if self.kind not in KINDS:
            raise TableError(f"unknown column kind {self.kind!r} for {self.name!r}")


def _placeholder(kind):
    if kind == "numeric":
        return 0.0
    if kind == "boolean":
        return False
    return ""


def _dtype(kind):
    if kind == "numeric":
        return np.float64
    if kind == "boolean":
        return np.bool_
    return object


def _frozen(arr):
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


class ColumnTable:
    """Immutable columnar dataset.

    Parameters
    ----------
    schema : sequence of ColumnSpec
    values : mapping of column name to array of cell values
    missing : mapping of column name to boolean mask, optional
        Columns absent from the mapping have no missing cells.
    n_rows : int, optional
        Row count; needed only for a table without columns.
    """

    def __init__(self, schema: Sequence[ColumnSpec], values: Mapping, missing: Mapping | None = None,
                 n_rows: int | None = None):
        schema = tuple(schema)
        names = [s.name for s in schema]
        if len(set(names)) != len(names):
            raise TableError(f"duplicate column names in schema: {names}")
        missing = missing or {}
        self._schema = schema
        self._index = {s.name: i for i, s in enumerate(schema)}
        self._values = {}
        self._missing = {}
        n = n_rows
        for spec in schema:
            if spec.name not in values:
                raise TableError(f"no values supplied for column {spec.name!r}")
            vals = np.asarray(values[spec.name], dtype=_dtype(spec.kind))
            if vals.ndim != 1:
                raise TableError(f"column {spec.name!r} must be one-dimensional")
            mask = missing.get(spec.name)
            mask = np.zeros(len(vals), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
            if n is None:
                n = len(vals)
            if len(vals) != n or len(mask) != n:
                raise TableError(f"column {spec.name!r} has {len(vals)} cells, expected {n}")
            if mask.any():
                vals = vals.copy()
                vals[mask] = _placeholder(spec.kind)
            self._values[spec.name] = _frozen(vals)
            self._missing[spec.name] = _frozen(mask)
        self._row_count = 0 if n is None else n

    @classmethod
    def from_cells(cls, schema: Sequence[ColumnSpec], cells: Mapping[str, Sequence]):
        """Build a table from per-column cell lists where MISSING/None mark missing cells."""
        values, missing = {}, {}
        for spec in schema:
            col = list(cells[spec.name])
            mask = [c is MISSING or c is None for c in col]
            fill = _placeholder(spec.kind)
            values[spec.name] = [fill if m else c for c, m in zip(col, mask)]
            missing[spec.name] = mask
        return cls(schema, values, missing)

    # -- accessors -----------------------------------------------------------------
    @property
    def schema(self) -> tuple[ColumnSpec, ...]:
        return self._schema

    @property
    def names(self) -> list[str]:
        return [s.name for s in self._schema]

    @property
    def row_count(self) -> int:
        return self._row_count

    @property
    def n_columns(self) -> int:
        return len(self._schema)

    def __len__(self):
        return self._row_count

    def __contains__(self, name):
        return name in self._index

    def __repr__(self):
        return f"ColumnTable({self._row_count} rows x {len(self._schema)} columns)"

    def spec(self, name: str) -> ColumnSpec:
        self._check(name)
        return self._schema[self._index[name]]

    def values(self, name: str) -> np.ndarray:
        """Raw value array; entries under the missing mask are placeholders."""
        self._check(name)
        return self._values[name]

    def missing(self, name: str) -> np.ndarray:
        self._check(name)
        return self._missing[name]

    def column(self, name: str) -> list:
        """Cell list with MISSING in place of missing cells."""
        vals, mask = self.values(name), self.missing(name)
        return [MISSING if m else _py(v) for v, m in zip(vals, mask)]

    def row(self, i: int) -> dict:
        return {
            s.name: MISSING if self._missing[s.name][i] else _py(self._values[s.name][i])
            for s in self._schema
        }

    def rows(self) -> Iterable[dict]:
        for i in range(self._row_count):
            yield self.row(i)

    def _check(self, name):
        if name not in self._index:
            raise TableError(f"unknown column {name!r}")

    # -- derivations ---------------------------------------------------------------
    def take(self, indices) -> "ColumnTable":
        """Rows at ``indices`` (repeats allowed), in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        return ColumnTable(
            self._schema,
            {n: v[idx] for n, v in self._values.items()},
            {n: m[idx] for n, m in self._missing.items()},
            n_rows=len(idx),
        )

    def select_columns(self, names: Sequence[str]) -> "ColumnTable":
        for n in names:
            self._check(n)
        schema = [self.spec(n) for n in names]
        return ColumnTable(
            schema, {n: self._values[n] for n in names}, {n: self._missing[n] for n in names}, self._row_count
        )

    def drop_columns(self, names: Sequence[str]) -> "ColumnTable":
        for n in names:
            self._check(n)
        keep = [s.name for s in self._schema if s.name not in set(names)]
        return self.select_columns(keep)

    def filter_rows(self, predicate: Callable[[dict], bool]) -> "ColumnTable":
        """Keep rows for which ``predicate(row_dict)`` is truthy; missing cells arrive as MISSING."""
        keep = [i for i, r in enumerate(self.rows()) if predicate(r)]
        return self.take(keep)

    def mask_rows(self, keep) -> "ColumnTable":
        return self.take(np.flatnonzero(np.asarray(keep, dtype=bool)))

    def with_column(self, spec: ColumnSpec, values, missing=None, *, position: int | None = None) -> "ColumnTable":
        """Add or replace a column.  A replaced column keeps its position."""
        schema = list(self._schema)
        vals = dict(self._values)
        miss = dict(self._missing)
        if spec.name in self._index:
            schema[self._index[spec.name]] = spec
        elif position is None:
            schema.append(spec)
        else:
            schema.insert(position, spec)
        vals[spec.name] = values
        miss[spec.name] = np.zeros(self._row_count, dtype=bool) if missing is None else missing
        return ColumnTable(schema, vals, miss, self._row_count)

    def rename(self, mapping: Mapping[str, str]) -> "ColumnTable":
        schema = [ColumnSpec(mapping.get(s.name, s.name), s.kind, s.nullable) for s in self._schema]
        return ColumnTable(
            schema,
            {mapping.get(n, n): v for n, v in self._values.items()},
            {mapping.get(n, n): m for n, m in self._missing.items()},
            self._row_count,
        )

    def equals(self, other: "ColumnTable") -> bool:
        if self._schema != other._schema or self._row_count != other._row_count:
            return False
        for n in self.names:
            if not np.array_equal(self._missing[n], other._missing[n]):
                return False
            if not np.array_equal(self._values[n], other._values[n]):
                return False
        return True


def _py(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


# -- CSV ---------------------------------------------------------------------------


def _is_number(s):
    return bool(_NUMBER_RE.match(s.strip()))


def infer_kind(cells: Iterable[str]) -> str:
    """numeric -> boolean -> categorical, over non-missing raw strings."""
    cells = list(cells)
    if cells and all(_is_number(c) for c in cells):
        return "numeric"
    if cells and all(c in _BOOL_LITERALS for c in cells):
        return "boolean"
    return "categorical"


def _parse(raw, kind, name, row_no):
    if kind == "numeric":
        if not _is_number(raw):
            raise TableError(f"column {name!r}, row {row_no}: cannot parse {raw!r} as numeric")
        return float(raw)
    if kind == "boolean":
        low = raw.strip().lower()
        if low not in ("true", "false"):
            raise TableError(f"column {name!r}, row {row_no}: cannot parse {raw!r} as boolean")
        return low == "true"
    return raw


def read_csv(path, schema: Sequence[ColumnSpec] | None = None,
             missing_markers: Sequence[str] = DEFAULT_MISSING_MARKERS) -> ColumnTable:
    """Read a comma-separated file with a header row.

    Without ``schema`` every column's kind is inferred.  With a schema, the
    file's header must contain each declared column; cells are parsed to the
    declared kind.  Row numbers in error messages are 1-based file lines.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc
    markers = set(missing_markers)
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path} is empty; a header row is required") from None
        raw = [[] for _ in header]
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise TableError(f"{path}: row {line_no} has {len(rec)} fields, expected {len(header)}")
            for j, cell in enumerate(rec):
                raw[j].append(cell)

    if schema is None:
        schema = [
            ColumnSpec(name, infer_kind(c for c in col if c not in markers))
            for name, col in zip(header, raw)
        ]
    else:
        schema = list(schema)
    pos = {name: j for j, name in enumerate(header)}
    values, missing = {}, {}
    for spec in schema:
        if spec.name not in pos:
            raise TableError(f"{path}: declared column {spec.name!r} not in header")
        col = raw[pos[spec.name]]
        mask = [c in markers for c in col]
        fill = _placeholder(spec.kind)
        values[spec.name] = [
            fill if m else _parse(c, spec.kind, spec.name, i + 2)
            for i, (c, m) in enumerate(zip(col, mask))
        ]
        missing[spec.name] = mask
    return ColumnTable(schema, values, missing)


def format_cell(value, kind) -> str:
    if value is MISSING:
        return ""
    if kind == "numeric":
        f = float(value)
        return str(int(f)) if f.is_integer() and abs(f) < 1e15 else repr(f)
    if kind == "boolean":
        return "True" if value else "False"
    return str(value)


def write_csv(t: ColumnTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(t.names)
        kinds = [s.kind for s in t.schema]
        cols = [t.column(n) for n in t.names]
        for i in range(t.row_count):
            w.writerow([format_cell(col[i], k) for col, k in zip(cols, kinds)])


def schema_to_json(schema: Sequence[ColumnSpec]) -> list[dict]:
    return [{"name": s.name, "kind": s.kind, "nullable": s.nullable} for s in schema]


def schema_from_json(doc: Sequence[Mapping]) -> list[ColumnSpec]:
    return [ColumnSpec(d["name"], d["kind"], d.get("nullable", True)) for d in doc]


def write_schema(schema: Sequence[ColumnSpec], path) -> None:
    Path(path).write_text(json.dumps(schema_to_json(schema), indent=2) + "\n", encoding="utf-8")


def read_schema(path) -> list[ColumnSpec]:
    return schema_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# -- reports -------------------------------------------------------------------------


@dataclass(frozen=True)
class MissingnessRow:
    name: str
    kind: str
    distinct_levels: int
    n_complete: int
    n_miss: int
    miss_prop: float

    @property
    def miss_prop_display(self) -> float:
        return round(self.miss_prop, 3)


@dataclass
class MissingnessReport:
    row_count: int
    rows: list[MissingnessRow] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, name) -> MissingnessRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_tsv(self) -> str:
        lines = ["Col.num\tV.name\tMode\tN.level\tncom\tnmiss\tMiss.prop"]
        for i, r in enumerate(self.rows, start=1):
            lines.append(
                f"{i}\t{r.name}\t{r.kind}\t{r.distinct_levels}\t{r.n_complete}\t{r.n_miss}\t{r.miss_prop_display:g}"
            )
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "row_count": self.row_count,
            "columns": [
                {
                    "name": r.name,
                    "kind": r.kind,
                    "distinct_levels": r.distinct_levels,
                    "n_complete": r.n_complete,
                    "n_miss": r.n_miss,
                    "miss_prop": r.miss_prop,
                }
                for r in self.rows
            ],
        }


def missingness_report(t: ColumnTable) -> MissingnessReport:
    n = t.row_count
    rows = []
    for spec in t.schema:
        mask = t.missing(spec.name)
        present = t.values(spec.name)[~mask]
        n_miss = int(mask.sum())
        rows.append(
            MissingnessRow(
                name=spec.name,
                kind=spec.kind,
                distinct_levels=len(set(present.tolist())),
                n_complete=n - n_miss,
                n_miss=n_miss,
                miss_prop=n_miss / n if n else 0.0,
            )
        )
    return MissingnessReport(n, rows)


@dataclass
class FrequencyTable:
    column: str
    keys: list
    counts: list[int]

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def proportions(self) -> list[float]:
        total = self.total
        return [c / total for c in self.counts] if total else []

    def as_dict(self) -> dict:
        return dict(zip(self.keys, self.counts))

    def proportion(self, key) -> float:
        return self.proportions[self.keys.index(key)]

    def to_tsv(self) -> str:
        lines = [f"{self.column}\tcount\tproportion"]
        for k, c, p in zip(self.keys, self.counts, self.proportions):
            lines.append(f"{_key_text(k)}\t{c}\t{p:.6f}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "column": self.column,
            "groups": [
                {"key": _key_text(k), "count": c, "proportion": p}
                for k, c, p in zip(self.keys, self.counts, self.proportions)
            ],
        }


def _key_text(k):
    return "missing" if k is MISSING else str(k)


def group_count(t: ColumnTable, column: str) -> FrequencyTable:
    """Counts per distinct value, descending; ties ordered by key text."""
    counts: dict = {}
    for cell in t.column(column):
        counts[cell] = counts.get(cell, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], _key_text(kv[0])))
    return FrequencyTable(column, [k for k, _ in ordered], [c for _, c in ordered])
