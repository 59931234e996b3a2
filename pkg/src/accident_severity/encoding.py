"""Turn a ColumnTable into the numeric design matrix the forest trains on."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .prep import resolve_column
from .table import ColumnTable, TableError

# default model feature set
MODEL_FEATURES = (
    "Temperature(F)", "Humidity(%)", "Pressure(in)", "Visibility(mi)", "Wind_Speed(mph)",
    "Precipitation(in)",
    "Amenity", "Bump", "Crossing", "Give_Way", "Junction", "No_Exit", "Railway",
    "Roundabout", "Station", "Stop", "Traffic_Calming", "Traffic_Signal",
    "Sunrise_Sunset", "Civil_Twilight", "Nautical_Twilight", "Astronomical_Twilight",
    "Clear", "Cloud", "Rain", "Heavy_Rain", "Snow", "Heavy_Snow", "Fog",
)
COORDINATE_FEATURES = ("Start_Lat", "Start_Lng")


def model_feature_columns(t: ColumnTable, include_coordinates: bool = False, features=None) -> list[str]:
    """Resolve the model feature list against the table's actual column names."""
    wanted = list(MODEL_FEATURES if features is None else features)
    if include_coordinates:
        wanted = list(COORDINATE_FEATURES) + wanted
    found, absent = [], []
    for name in wanted:
        actual = resolve_column(t, name)
        (absent if actual is None else found).append(actual or name)
    if absent and features is not None:
        raise TableError(f"feature columns not in table: {', '.join(absent)}")
    return found


class FeatureEncoder(TransformerMixin, BaseEstimator):
    """Numeric and boolean columns pass through; categoricals become indicators.

    A two-level categorical becomes one 0/1 column named after the variable
    (1 = the later level in sort order).  Wider categoricals are one-hot
    encoded as ``name=level`` columns; :attr:`groups_` maps every output
    column back to its source variable.
    """

    def __init__(self, columns=None):
        self.columns = columns

    def fit(self, X: ColumnTable, y=None):
        names = list(X.names if self.columns is None else self.columns)
        self.encodings_ = []
        for name in names:
            spec = X.spec(name)
            if spec.kind in ("numeric", "boolean"):
                self.encodings_.append((name, spec.kind, []))
            elif spec.kind == "categorical":
                vals = X.values(name)[~X.missing(name)]
                levels = sorted(set(vals.tolist()), key=str)
                self.encodings_.append((name, "categorical", levels))
            else:
                raise TableError(f"cannot encode {spec.kind} column {name!r}")
        self._finish()
        return self

    def _finish(self):
        out_names, kinds, groups = [], [], []
        for name, kind, levels in self.encodings_:
            if kind == "categorical" and len(levels) > 2:
                for lv in levels:
                    out_names.append(f"{name}={lv}")
                    kinds.append("boolean")
                    groups.append(name)
            else:
                out_names.append(name)
                kinds.append("numeric" if kind == "numeric" else "boolean")
                groups.append(name)
        self.feature_names_out_ = out_names
        self.feature_kinds_ = kinds
        self.groups_ = groups

    def transform(self, X: ColumnTable) -> np.ndarray:
        check_is_fitted(self, "encodings_")
        cols = []
        for name, kind, levels in self.encodings_:
            if X.missing(name).any():
                raise TableError(f"column {name!r} has missing cells")
            vals = X.values(name)
            if kind in ("numeric", "boolean"):
                if X.spec(name).kind not in ("numeric", "boolean"):
                    raise TableError(f"column {name!r} is {X.spec(name).kind}, model expects {kind}")
                cols.append(vals.astype(float))
            elif len(levels) > 2:
                for lv in levels:
                    cols.append((vals == lv).astype(float))
            else:
                cols.append((vals == levels[-1]).astype(float) if levels else np.zeros(len(vals)))
        if not cols:
            return np.zeros((X.row_count, 0))
        return np.column_stack(cols)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "encodings_")
        return np.asarray(self.feature_names_out_, dtype=object)

    def to_dict(self) -> dict:
        check_is_fitted(self, "encodings_")
        return {"encodings": [[n, k, list(lv)] for n, k, lv in self.encodings_]}

    @classmethod
    def from_dict(cls, doc) -> "FeatureEncoder":
        enc = cls(columns=[e[0] for e in doc["encodings"]])
        enc.encodings_ = [(n, k, list(lv)) for n, k, lv in doc["encodings"]]
        enc._finish()
        return enc
