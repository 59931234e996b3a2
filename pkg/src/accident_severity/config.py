"""Pipeline configuration and its plain-text ``key = value`` file format.

Example::

    input = US_Accidents_March23.csv
    seed = 42
    state_filter = CA
    n_trees = 500
    rebalance_mode = undersample
    columns_to_drop = ID, Description, Source
    weather_keyword_rules = Heavy_Snow: heavy snow | blowing snow; Snow: snow; ...

An optional ``[pipeline]`` section header is accepted.  List values are
comma-separated; ``none`` clears an optional value.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .forest import ForestConfig
from .partition import RebalanceConfig
from .prep import CleaningConfig
from .table import DEFAULT_MISSING_MARKERS

REBALANCE_ORDERS = ("train", "before_split", "none")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    input: str | None = None
    out: str = "out"
    seed: int = 0
    target: str = "Severity"
    positive: str = "severe"
    missing_markers: list[str] = field(default_factory=lambda: list(DEFAULT_MISSING_MARKERS))
    cleaning: CleaningConfig = field(default_factory=CleaningConfig)
    alpha: float = 0.05
    split_ratio: float = 2 / 3
    stratify: bool = False
    rebalance_mode: str = "undersample"
    target_ratio: float = 1.0
    rebalance_order: str = "train"
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 1
    max_depth: int | None = None
    n_jobs: int | None = None
    oob: bool = False
    include_coordinates: bool = False
    screen_filter: bool = False
    features: list[str] | None = None
    cv_folds: int = 5

    def __post_init__(self):
        if self.rebalance_order not in REBALANCE_ORDERS:
            raise ConfigError(f"rebalance_order must be one of {REBALANCE_ORDERS}, got {self.rebalance_order!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")

    def rebalance(self) -> RebalanceConfig:
        return RebalanceConfig(self.rebalance_mode, self.target_ratio, self.seed)

    def forest(self) -> ForestConfig:
        return ForestConfig(
            n_trees=self.n_trees, mtry=self.mtry, min_leaf=self.min_leaf, max_depth=self.max_depth,
            seed=self.seed, n_jobs=self.n_jobs, oob=self.oob,
        )

    def snapshot(self) -> dict:
        """JSON-ready view; excludes settings that cannot change results (workers, output dir)."""
        d = dataclasses.asdict(self)
        d.pop("n_jobs")
        d.pop("out")
        d["cleaning"]["weather_keyword_rules"] = [[n, list(k)] for n, k in self.cleaning.weather_keyword_rules]
        return d


_CLEANING_KEYS = {f.name for f in dataclasses.fields(CleaningConfig)}
_PIPELINE_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _none(text):
    return text.strip().lower() in ("none", "null", "")


def _list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _mapping(text):
    out = {}
    for part in _list(text):
        if ":" not in part:
            raise ConfigError(f"expected key:value, got {part!r}")
        k, v = part.split(":", 1)
        out[k.strip()] = v.strip()
    return out


def _rules(text):
    rules = []
    for part in text.split(";"):
        if not part.strip():
            continue
        if ":" not in part:
            raise ConfigError(f"expected Flag: keyword | keyword, got {part!r}")
        name, kws = part.split(":", 1)
        rules.append((name.strip(), tuple(k.strip().lower() for k in kws.split("|") if k.strip())))
    return rules


_INT = {"seed", "n_trees", "min_leaf", "cv_folds", "severity_threshold"}
_OPT_INT = {"mtry", "max_depth", "n_jobs"}
_FLOAT = {"alpha", "split_ratio", "target_ratio"}
_BOOL = {"stratify", "oob", "include_coordinates", "screen_filter"}
_LIST = {"features", "columns_to_drop", "impute_median_columns", "drop_missing_row_columns"}


def _convert(key, text):
    if key in _INT:
        return int(text)
    if key in _OPT_INT:
        return None if _none(text) else int(text)
    if key in _FLOAT:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    if key in _BOOL:
        return _bool(text)
    if key in _LIST:
        return None if text.strip().lower() == "none" else _list(text)
    if key == "missing_markers":
        return [m.strip().strip('"') for m in text.split(",")]
    if key == "wind_direction_map":
        return _mapping(text)
    if key == "weather_keyword_rules":
        return _rules(text)
    if key in ("input", "state_filter"):
        return None if _none(text) else text.strip()
    return text.strip()


def parse_config(text: str) -> PipelineConfig:
    if not text.lstrip().startswith("["):
        text = "[pipeline]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    top, clean = {}, {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            try:
                value = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
            if key in _CLEANING_KEYS:
                clean[key] = value
            elif key in _PIPELINE_FIELDS and key != "cleaning":
                top[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
    try:
        return PipelineConfig(cleaning=CleaningConfig(**clean), **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
