"""Cleaning and feature engineering for the US accidents table.

Every step is a pure ``ColumnTable -> ColumnTable`` function that optionally
appends to a :class:`CleanSummary`.  :func:`clean` runs them in the fixed
order: drop columns, weather flags, wind direction, time parts, median
imputation, row drops, severity binarisation, state filter.
"""

from __future__ import annotations

import datetime as _dt
import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .table import ColumnSpec, ColumnTable, TableError

logger = logging.getLogger(__name__)

SEVERE = "severe"
LESS_SEVERE = "less severe"
TARGET = "Severity"

FLAG_NAMES = ("Clear", "Cloud", "Rain", "Heavy_Rain", "Snow", "Heavy_Snow", "Fog")

DEFAULT_DROP = (
    "ID", "Description", "Distance(Mile)", "End_time", "End_Lat", "End_lng", "City",
    "Weather_Timestamp", "Airport_code", "Street_Number", "Side", "Country", "Zipcode",
    "Turning_loop",
    # spellings used by later releases of the Kaggle file
    "Distance(mi)", "Street", "Number", "Source",
    # mostly-missing; dropped rather than imputed
    "Wind_Chill(F)",
)

DEFAULT_WIND_MAP = {
    "Calm": "CALM",
    "East": "E",
    "North": "N",
    "South": "S",
    "West": "W",
    "Variable": "VAR",
}

DEFAULT_WEATHER_RULES = (
    ("Heavy_Snow", ("heavy snow", "blowing snow")),
    ("Heavy_Rain", ("heavy rain", "thunderstorm", "t-storm")),
    ("Snow", ("snow", "sleet", "wintry")),
    ("Rain", ("rain", "drizzle", "shower")),
    ("Fog", ("fog", "mist", "haze")),
    ("Cloud", ("cloud", "overcast")),
    ("Clear", ("clear", "fair")),
)

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")

_TIMESTAMP_RE = re.compile(r"^\s*(\d{4})-(\d{2})-(\d{2})[ T](\d{2}):(\d{2}):(\d{2})(\.\d+)?\s*$")


class PrepError(ValueError):
    pass


def canonical_name(name: str) -> str:
    """Lowercased name without unit suffix or punctuation: 'Wind_Chill(F)' -> 'windchill'."""
    base = name.split("(", 1)[0]
    return re.sub(r"[^0-9a-z]", "", base.lower())


def resolve_column(t: ColumnTable, name: str) -> str | None:
    """Find the table column matching ``name`` exactly or by canonical name."""
    if name in t:
        return name
    want = canonical_name(name)
    for n in t.names:
        if canonical_name(n) == want:
            return n
    return None


@dataclass
class LogEntry:
    action: str
    rows_removed: int = 0
    note: str = ""


@dataclass
class CleanSummary:
    rows_before: int = 0
    rows_after: int = 0
    columns_before: int = 0
    columns_after: int = 0
    actions: list[LogEntry] = field(default_factory=list)

    def add(self, action, rows_removed=0, note=""):
        self.actions.append(LogEntry(action, rows_removed, note))
        if note:
            logger.info("%s: %s", action, note)

    @property
    def rows_removed(self) -> int:
        return sum(a.rows_removed for a in self.actions)

    def to_dict(self) -> dict:
        return {
            "rows_before": self.rows_before,
            "rows_after": self.rows_after,
            "columns_before": self.columns_before,
            "columns_after": self.columns_after,
            "actions": [
                {"action": a.action, "rows_removed": a.rows_removed, "note": a.note} for a in self.actions
            ],
        }

    def to_text(self) -> str:
        lines = [
            f"rows: {self.rows_before} -> {self.rows_after}",
            f"columns: {self.columns_before} -> {self.columns_after}",
        ]
        for a in self.actions:
            extra = f" [{a.rows_removed} rows removed]" if a.rows_removed else ""
            lines.append(f"{a.action}{extra}" + (f": {a.note}" if a.note else ""))
        return "\n".join(lines) + "\n"


@dataclass
class CleaningConfig:
    columns_to_drop: list[str] = field(default_factory=lambda: list(DEFAULT_DROP))
    wind_direction_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_WIND_MAP))
    weather_keyword_rules: list[tuple[str, tuple[str, ...]]] = field(
        default_factory=lambda: [(n, tuple(k)) for n, k in DEFAULT_WEATHER_RULES]
    )
    impute_median_columns: list[str] = field(default_factory=lambda: ["Precipitation(in)"])
    # None means every column
    drop_missing_row_columns: list[str] | None = None
    severity_threshold: int = 3
    state_filter: str | None = None

    def __post_init__(self):
        if self.severity_threshold not in (2, 3, 4):
            raise PrepError(f"severity_threshold must be 2, 3 or 4, got {self.severity_threshold}")
        names = {n for n, _ in self.weather_keyword_rules}
        if names != set(FLAG_NAMES):
            raise PrepError(f"weather flag names must be exactly {sorted(FLAG_NAMES)}, got {sorted(names)}")


def _log(log, action, rows_removed=0, note=""):
    if log is not None:
        log.add(action, rows_removed, note)
    elif note:
        logger.info("%s: %s", action, note)


def drop_irrelevant_columns(t: ColumnTable, columns: Sequence[str] = DEFAULT_DROP, log=None) -> ColumnTable:
    present, absent = [], []
    for name in columns:
        actual = resolve_column(t, name)
        if actual is None:
            absent.append(name)
        elif actual not in present:
            present.append(actual)
    note = f"dropped {len(present)} columns"
    if absent:
        note += f"; not present: {', '.join(absent)}"
    _log(log, "drop_irrelevant_columns", 0, note)
    return t.drop_columns(present)


def normalize_wind_direction(t: ColumnTable, mapping=None, column="Wind_Direction", log=None) -> ColumnTable:
    mapping = DEFAULT_WIND_MAP if mapping is None else mapping
    name = resolve_column(t, column)
    if name is None:
        _log(log, "normalize_wind_direction", 0, f"column {column} absent, skipped")
        return t
    canon = set(mapping.values())
    lookup = {k.lower(): v for k, v in mapping.items()}
    lookup.update({v.lower(): v for v in canon})
    vals = t.values(name)
    mask = t.missing(name)
    out = np.empty(len(vals), dtype=object)
    novel = set()
    for i, v in enumerate(vals):
        if mask[i]:
            out[i] = ""
            continue
        s = str(v).strip()
        mapped = lookup.get(s.lower())
        if mapped is None:
            mapped = s.upper()
            if not re.fullmatch(r"[NSEW]{1,3}", mapped):
                novel.add(s)
                mapped = s
        out[i] = mapped
    levels = sorted(set(out[~mask].tolist()))
    note = f"{len(levels)} levels"
    if novel:
        note += f"; unmapped values passed through: {', '.join(sorted(novel))}"
    _log(log, "normalize_wind_direction", 0, note)
    return t.with_column(ColumnSpec(name, "categorical"), out, mask)


def weather_flags(condition: str | None, rules=DEFAULT_WEATHER_RULES) -> dict[str, bool]:
    """Flags fired by one Weather_Condition string."""
    text = (condition or "").lower()
    return {flag: any(k in text for k in keywords) for flag, keywords in rules}


def extract_weather_flags(t: ColumnTable, rules=None, column="Weather_Condition", log=None) -> ColumnTable:
    rules = DEFAULT_WEATHER_RULES if rules is None else rules
    name = resolve_column(t, column)
    if name is None:
        _log(log, "extract_weather_flags", 0, f"column {column} absent, skipped")
        return t
    vals, mask = t.values(name), t.missing(name)
    per_row = [weather_flags(None if m else v, rules) for v, m in zip(vals, mask)]
    out = t.drop_columns([name])
    for flag in FLAG_NAMES:
        out = out.with_column(ColumnSpec(flag, "boolean"), np.array([r[flag] for r in per_row], dtype=bool))
    _log(log, "extract_weather_flags", 0, f"added {', '.join(FLAG_NAMES)}; removed {name}")
    return out


def parse_timestamp(text: str) -> _dt.datetime:
    m = _TIMESTAMP_RE.match(text)
    if not m:
        raise ValueError(f"unparseable timestamp {text!r}")
    return _dt.datetime(*(int(g) for g in m.groups()[:6]))


def extract_time_parts(t: ColumnTable, column="Start_Time", log=None) -> ColumnTable:
    """Add Year, Month and weekday Day; rows with unparseable timestamps are dropped."""
    name = resolve_column(t, column)
    if name is None:
        _log(log, "extract_time_parts", 0, f"column {column} absent, skipped")
        return t
    vals, mask = t.values(name), t.missing(name)
    n = t.row_count
    year = np.zeros(n)
    month = np.zeros(n)
    day = np.empty(n, dtype=object)
    ok = np.ones(n, dtype=bool)
    bad = []
    for i in range(n):
        try:
            if mask[i]:
                raise ValueError("missing timestamp")
            ts = parse_timestamp(str(vals[i]))
        except ValueError:
            ok[i] = False
            if len(bad) < 5:
                bad.append(repr(None if mask[i] else vals[i]))
            day[i] = ""
            continue
        year[i], month[i], day[i] = ts.year, ts.month, WEEKDAYS[ts.weekday()]
    out = t.drop_columns([name])
    out = out.with_column(ColumnSpec("Year", "numeric"), year)
    out = out.with_column(ColumnSpec("Month", "numeric"), month)
    out = out.with_column(ColumnSpec("Day", "categorical"), day)
    removed = int((~ok).sum())
    note = f"added Year, Month, Day from {name}"
    if removed:
        note += f"; unparseable timestamps e.g. {', '.join(bad)}"
        out = out.mask_rows(ok)
    _log(log, "extract_time_parts", removed, note)
    return out


def impute_median(t: ColumnTable, column: str, log=None) -> ColumnTable:
    name = resolve_column(t, column)
    if name is None:
        raise PrepError(f"unknown column {column!r}")
    spec = t.spec(name)
    if spec.kind != "numeric":
        raise PrepError(f"cannot median-impute {spec.kind} column {name!r}")
    vals, mask = t.values(name), t.missing(name)
    if mask.all():
        raise PrepError(f"column {name!r} has no observed values to take a median of")
    if not mask.any():
        return t
    med = float(np.median(vals[~mask]))
    filled = np.where(mask, med, vals)
    _log(log, "impute_median", 0, f"{name}: {int(mask.sum())} cells set to median {med:g}")
    return t.with_column(spec, filled)


def drop_missing_rows(t: ColumnTable, columns: Sequence[str] | None = None, log=None) -> ColumnTable:
    if columns is None:
        names = t.names
    else:
        names = []
        for c in columns:
            actual = resolve_column(t, c)
            if actual is None:
                raise TableError(f"unknown column {c!r}")
            names.append(actual)
    if not names:
        return t
    bad = np.zeros(t.row_count, dtype=bool)
    per_col = []
    for n in names:
        m = t.missing(n)
        if m.any():
            per_col.append(f"{n}={int(m.sum())}")
        bad |= m
    removed = int(bad.sum())
    _log(log, "drop_missing_rows", removed, ", ".join(per_col))
    return t.mask_rows(~bad) if removed else t


def binarize_severity(t: ColumnTable, threshold: int = 3, column: str = TARGET, log=None) -> ColumnTable:
    """Replace 1-4 Severity with 'severe' (>= threshold) / 'less severe'."""
    if threshold not in (2, 3, 4):
        raise PrepError(f"threshold must be 2, 3 or 4, got {threshold}")
    if column not in t:
        raise TableError(f"unknown column {column!r}")
    spec = t.spec(column)
    vals, mask = t.values(column), t.missing(column)
    if spec.kind != "numeric":
        present = set(vals[~mask].tolist())
        if present <= {SEVERE, LESS_SEVERE} and not mask.any():
            return t
        raise PrepError(f"column {column!r} is {spec.kind}, expected numeric severity 1-4")
    if mask.any():
        raise PrepError(f"column {column!r} has {int(mask.sum())} missing cells")
    bad = ~np.isin(vals, [1.0, 2.0, 3.0, 4.0])
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise PrepError(f"severity value {vals[i]:g} at row {i} outside 1-4")
    labels = np.where(vals >= threshold, SEVERE, LESS_SEVERE).astype(object)
    _log(log, "binarize_severity", 0, f"severe = Severity >= {threshold}")
    return t.with_column(ColumnSpec(column, "categorical", nullable=False), labels)


def filter_state(t: ColumnTable, code: str, column: str = "State", log=None) -> ColumnTable:
    if column not in t:
        raise TableError(f"unknown column {column!r}")
    keep = (t.values(column) == code) & ~t.missing(column)
    out = t.mask_rows(keep)
    _log(log, "filter_state", t.row_count - out.row_count, f"kept State == {code}")
    return out


def clean(t: ColumnTable, cfg: CleaningConfig | None = None) -> tuple[ColumnTable, CleanSummary]:
    cfg = cfg or CleaningConfig()
    log = CleanSummary(rows_before=t.row_count, columns_before=t.n_columns)
    out = drop_irrelevant_columns(t, cfg.columns_to_drop, log=log)
    out = extract_weather_flags(out, cfg.weather_keyword_rules, log=log)
    out = normalize_wind_direction(out, cfg.wind_direction_map, log=log)
    out = extract_time_parts(out, log=log)
    for col in cfg.impute_median_columns:
        if resolve_column(out, col) is None:
            log.add("impute_median", 0, f"column {col} absent, skipped")
            continue
        out = impute_median(out, col, log=log)
    out = drop_missing_rows(out, cfg.drop_missing_row_columns, log=log)
    out = binarize_severity(out, cfg.severity_threshold, log=log)
    if cfg.state_filter:
        out = filter_state(out, cfg.state_filter, log=log)
    log.rows_after = out.row_count
    log.columns_after = out.n_columns
    n_features = out.n_columns - 1
    log.add("summary", 0, f"{out.row_count} rows, {n_features} non-target variables")
    return out, log
