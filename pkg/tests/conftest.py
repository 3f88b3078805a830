import numpy as np
import pytest

from hydrochar import data


@pytest.fixture(scope="session")
def small_dataset():
    return data.generate_synthetic(80, seed=101)


@pytest.fixture(scope="session")
def medium_dataset():
    return data.generate_synthetic(300, seed=202)


@pytest.fixture()
def csv_factory(tmp_path):
    """Write rows (list of cell lists) under the canonical header."""

    def make(rows, name="data.csv", header=None):
        head = ",".join(data.CSV_HEADER if header is None else header)
        lines = [head] + [",".join(str(c) for c in row) for row in rows]
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return make


def valid_row(**overrides):
    """One schema-valid CSV row as a list of 21 cells."""
    base = {
        "biomass_c": 45.0,
        "biomass_h": 6.0,
        "biomass_n": 1.0,
        "biomass_s": 0.2,
        "biomass_o": 40.0,
        "biomass_vm": 70.0,
        "biomass_fc": 15.0,
        "biomass_ash": 8.0,
        "temperature_c": 220.0,
        "time_min": 60.0,
        "water_wt": 80.0,
        "hc_yield": 55.0,
        "hc_hhv": 24.0,
        "hc_vm": 45.0,
        "hc_fc": 40.0,
        "hc_ash": 12.0,
        "hc_c": 60.0,
        "hc_h": 5.0,
        "hc_n": 1.1,
        "hc_s": 0.1,
        "hc_o": 25.0,
    }
    base.update(overrides)
    return [base[c] for c in data.CSV_HEADER]


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
