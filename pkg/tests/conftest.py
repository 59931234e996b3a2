import pytest

from accident_severity.fixture import planted_signal, sample_csv_path
from accident_severity.prep import clean
from accident_severity.table import read_csv


@pytest.fixture(scope="session")
def sample_path():
    return sample_csv_path()


@pytest.fixture(scope="session")
def raw_sample(sample_path):
    return read_csv(sample_path)


@pytest.fixture(scope="session")
def cleaned_sample(raw_sample):
    table, _ = clean(raw_sample)
    return table


@pytest.fixture(scope="session")
def planted():
    return planted_signal(n=1200, seed=3)
