"""Synthetic data: a small US-accidents-shaped sample and planted-signal tables.

The accidents sample mimics the Kaggle file's columns, spellings and
missing-cell patterns (empty strings and "NA") at desk scale.  Regenerate the
bundled copy with ``python -m accident_severity.fixture``.
"""

from __future__ import annotations

import csv
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .partition import make_rng
from .table import ColumnSpec, ColumnTable

KAGGLE_COLUMNS = (
    "ID", "Source", "Severity", "Start_Time", "End_Time", "Start_Lat", "Start_Lng", "End_Lat",
    "End_Lng", "Distance(mi)", "Description", "Street", "City", "County", "State", "Zipcode",
    "Country", "Timezone", "Airport_Code", "Weather_Timestamp", "Temperature(F)", "Wind_Chill(F)",
    "Humidity(%)", "Pressure(in)", "Visibility(mi)", "Wind_Direction", "Wind_Speed(mph)",
    "Precipitation(in)", "Weather_Condition", "Amenity", "Bump", "Crossing", "Give_Way",
    "Junction", "No_Exit", "Railway", "Roundabout", "Station", "Stop", "Traffic_Calming",
    "Traffic_Signal", "Turning_Loop", "Sunrise_Sunset", "Civil_Twilight", "Nautical_Twilight",
    "Astronomical_Twilight",
)

POI_COLUMNS = (
    "Amenity", "Bump", "Crossing", "Give_Way", "Junction", "No_Exit", "Railway", "Roundabout",
    "Station", "Stop", "Traffic_Calming", "Traffic_Signal", "Turning_Loop",
)
POI_RATES = (0.012, 0.001, 0.11, 0.005, 0.07, 0.003, 0.009, 0.0005, 0.026, 0.028, 0.001, 0.15, 0.0)

WEATHER = (
    ("Fair", 0.33), ("Clear", 0.1), ("Mostly Cloudy", 0.12), ("Cloudy", 0.1), ("Partly Cloudy", 0.08),
    ("Overcast", 0.05), ("Light Rain", 0.06), ("Rain", 0.02), ("Heavy Rain", 0.01),
    ("Light Drizzle", 0.01), ("Fog", 0.015), ("Haze", 0.02), ("Light Snow", 0.015), ("Snow", 0.005),
    ("Heavy Snow", 0.003), ("Blowing Snow", 0.002), ("Thunderstorm", 0.006), ("T-Storm", 0.004),
    ("Wintry Mix", 0.003), ("Scattered Clouds", 0.02),
)
WIND = (
    "Calm", "CALM", "North", "N", "NNE", "NE", "ENE", "East", "E", "ESE", "SE", "SSE", "South", "S",
    "SSW", "SW", "WSW", "West", "W", "WNW", "NW", "NNW", "Variable", "VAR",
)
STATES = (("CA", 0.55), ("FL", 0.12), ("TX", 0.09), ("SC", 0.05), ("NY", 0.05), ("NC", 0.05),
          ("OR", 0.04), ("VA", 0.05))
TIMEZONES = {"CA": "US/Pacific", "OR": "US/Pacific", "TX": "US/Central"}
COUNTIES = ("Los Angeles", "Orange", "San Diego", "Sacramento", "Miami-Dade", "Harris", "Kings")


def _choice(rng, items, n):
    labels = [i[0] for i in items]
    p = np.array([i[1] for i in items], dtype=float)
    return rng.choice(labels, size=n, p=p / p.sum())


def _fmt(x, digits=1):
    return f"{x:.{digits}f}"


def make_accidents_rows(n: int = 1000, seed: int = 7) -> list[list[str]]:
    """Raw string rows (header first) shaped like the Kaggle US-accidents CSV."""
    rng = make_rng(seed)
    state = _choice(rng, STATES, n)
    weather = _choice(rng, WEATHER, n)
    temp = rng.normal(62, 15, n)
    humidity = np.clip(rng.normal(64, 20, n), 5, 100).round()
    pressure = rng.normal(29.7, 0.6, n)
    visibility = np.clip(rng.gamma(6, 1.5, n), 0.1, 10)
    wind_speed = np.clip(rng.gamma(2.2, 3.5, n), 0, 60)
    precip = np.where(rng.random(n) < 0.15, rng.exponential(0.05, n), 0.0)
    poi = {c: rng.random(n) < r for c, r in zip(POI_COLUMNS, POI_RATES)}
    night = rng.random(n) < 0.3

    lower = np.array([w.lower() for w in weather])
    clear = np.array(["clear" in w or "fair" in w for w in lower])
    lin = (
        -1.3 + 0.09 * (wind_speed - 7.7) - 1.1 * (pressure - 29.7) + 0.012 * (humidity - 64)
        - 0.6 * clear - 0.08 * (visibility - 9) - 0.8 * poi["Traffic_Signal"] - 0.6 * poi["Crossing"]
        + 0.5 * poi["Junction"] + 0.3 * night
    )
    severe = rng.random(n) < 1 / (1 + np.exp(-lin))
    severity = np.where(severe, rng.choice([3, 4], size=n, p=[0.8, 0.2]), rng.choice([1, 2], size=n, p=[0.05, 0.95]))

    start = np.datetime64("2016-02-08T00:00:00") + rng.integers(0, 7 * 365 * 86400, size=n).astype("timedelta64[s]")
    miss = {
        "Wind_Chill(F)": 0.17, "Precipitation(in)": 0.19, "Temperature(F)": 0.02, "Humidity(%)": 0.025,
        "Pressure(in)": 0.02, "Visibility(mi)": 0.025, "Wind_Direction": 0.025, "Wind_Speed(mph)": 0.05,
        "Weather_Condition": 0.02, "Timezone": 0.004, "Sunrise_Sunset": 0.003,
    }
    miss_mask = {c: rng.random(n) < r for c, r in miss.items()}
    na_token = rng.random(n) < 0.5
    wind_dir = rng.choice(WIND, size=n)
    county = rng.choice(COUNTIES, size=n)

    rows = [list(KAGGLE_COLUMNS)]
    for i in range(n):
        ts = str(start[i]).replace("T", " ")
        if i % 97 == 3:
            ts += ".000000000"
        if i in (11, 512):
            ts = "not a date"
        end_ts = str(start[i] + np.timedelta64(int(rng.integers(600, 7200)), "s")).replace("T", " ")
        lat = 34.0 + rng.normal(0, 2)
        lng = -118.0 + rng.normal(0, 3)
        twilight = "Night" if night[i] else "Day"
        rec = {
            "ID": f"A-{i + 1}",
            "Source": "Source1" if i % 3 else "Source2",
            "Severity": str(int(severity[i])),
            "Start_Time": ts,
            "End_Time": end_ts,
            "Start_Lat": _fmt(lat, 5),
            "Start_Lng": _fmt(lng, 5),
            "End_Lat": _fmt(lat + 0.01, 5) if i % 4 else "",
            "End_Lng": _fmt(lng + 0.01, 5) if i % 4 else "",
            "Distance(mi)": _fmt(rng.exponential(0.5), 3),
            "Description": f"Incident on road {i % 50}, lane blocked",
            "Street": f"Route {i % 40}",
            "City": "Springfield" if i % 2 else "Riverside",
            "County": county[i],
            "State": state[i],
            "Zipcode": f"{90000 + i % 900:05d}",
            "Country": "US",
            "Timezone": TIMEZONES.get(state[i], "US/Eastern"),
            "Airport_Code": "KLAX",
            "Weather_Timestamp": ts,
            "Temperature(F)": _fmt(temp[i]),
            "Wind_Chill(F)": _fmt(temp[i] - 3),
            "Humidity(%)": _fmt(humidity[i], 0),
            "Pressure(in)": _fmt(pressure[i], 2),
            "Visibility(mi)": _fmt(visibility[i]),
            "Wind_Direction": wind_dir[i],
            "Wind_Speed(mph)": _fmt(wind_speed[i]),
            "Precipitation(in)": _fmt(precip[i], 2),
            "Weather_Condition": weather[i],
            "Sunrise_Sunset": twilight,
            "Civil_Twilight": twilight if rng.random() > 0.05 else ("Day" if night[i] else "Night"),
            "Nautical_Twilight": twilight if rng.random() > 0.1 else ("Day" if night[i] else "Night"),
            "Astronomical_Twilight": twilight if rng.random() > 0.15 else ("Day" if night[i] else "Night"),
        }
        for c in POI_COLUMNS:
            rec[c] = "True" if poi[c][i] else "False"
        for c, mask in miss_mask.items():
            if mask[i]:
                rec[c] = "NA" if na_token[i] else ""
        if rec["Sunrise_Sunset"] in ("", "NA"):
            for c in ("Civil_Twilight", "Nautical_Twilight", "Astronomical_Twilight"):
                rec[c] = rec["Sunrise_Sunset"]
        rows.append([rec[c] for c in KAGGLE_COLUMNS])
    return rows


def write_accidents_csv(path, n: int = 1000, seed: int = 7) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(make_accidents_rows(n, seed))


def sample_csv_path() -> Path:
    """Location of the bundled 1,000-row sample."""
    return Path(str(resources.files("accident_severity") / "data" / "sample_accidents.csv"))


def planted_signal(n: int = 5000, n_informative: int = 3, n_noise: int = 10, shift: float = 2.0,
                   minority: float = 0.3, seed: int = 0, target: str = "label") -> ColumnTable:
    """Gaussian features where the first ``n_informative`` shift by ``shift`` sd in the positive class."""
    rng = make_rng(seed)
    y = rng.random(n) < minority
    cols = {}
    schema = []
    for j in range(n_informative):
        schema.append(ColumnSpec(f"signal_{j}", "numeric"))
        cols[f"signal_{j}"] = rng.normal(0, 1, n) + shift * y
    for j in range(n_noise):
        schema.append(ColumnSpec(f"noise_{j}", "numeric"))
        cols[f"noise_{j}"] = rng.normal(0, 1, n)
    schema.append(ColumnSpec(target, "categorical"))
    cols[target] = np.where(y, "positive", "negative").astype(object)
    return ColumnTable(schema, cols)


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "data" / "sample_accidents.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_accidents_csv(out)
    print(f"wrote {out}")
