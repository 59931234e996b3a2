import pytest

from accident_severity.config import ConfigError, PipelineConfig, load_config, parse_config


def test_defaults():
    cfg = parse_config("")
    assert cfg == PipelineConfig()
    assert cfg.n_trees == 500 and cfg.split_ratio == pytest.approx(2 / 3)


def test_full_example():
    cfg = parse_config(
        """
        input = data.csv
        seed = 42
        state_filter = CA
        split_ratio = 2/3
        n_trees = 100   # fewer for a quick run
        mtry = none
        stratify = yes
        columns_to_drop = ID, Description
        wind_direction_map = Calm:CALM, East:E
        weather_keyword_rules = Heavy_Snow: heavy snow; Heavy_Rain: heavy rain; Snow: snow; Rain: rain | drizzle; Fog: fog; Cloud: cloud; Clear: clear | fair
        missing_markers = "", NA, N/A
        """
    )
    assert cfg.input == "data.csv" and cfg.seed == 42
    assert cfg.cleaning.state_filter == "CA"
    assert cfg.n_trees == 100 and cfg.mtry is None and cfg.stratify
    assert cfg.cleaning.columns_to_drop == ["ID", "Description"]
    assert cfg.cleaning.wind_direction_map == {"Calm": "CALM", "East": "E"}
    assert ("Rain", ("rain", "drizzle")) in cfg.cleaning.weather_keyword_rules
    assert cfg.missing_markers == ["", "NA", "N/A"]


def test_section_header_accepted():
    assert parse_config("[pipeline]\nseed = 3\n").seed == 3


@pytest.mark.parametrize("text", [
    "bogus = 1", "n_trees = many", "stratify = perhaps", "rebalance_order = sometimes", "alpha = 2",
    "severity_threshold = 7", "wind_direction_map = Calm", "= 3",
])
def test_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_missing(tmp_path):
    with pytest.raises(ConfigError, match="nope"):
        load_config(tmp_path / "nope.cfg")


def test_snapshot_excludes_workers():
    snap = PipelineConfig(n_jobs=4, out="x").snapshot()
    assert "n_jobs" not in snap and "out" not in snap
    assert snap["cleaning"]["severity_threshold"] == 3
