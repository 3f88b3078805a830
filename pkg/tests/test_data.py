import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrochar import data
from hydrochar.errors import (
    ConstantColumn,
    ConstraintViolation,
    EmptyDataset,
    MissingColumn,
    TooFewRows,
    UnparseableCell,
    ZeroCarbon,
)

from conftest import valid_row


# ---------------------------------------------------------------- load_csv

def test_header_only_is_empty(csv_factory):
    path = csv_factory([])
    with pytest.raises(EmptyDataset):
        data.load_csv(path)


def test_out_of_envelope_temperature_warns(csv_factory):
    path = csv_factory([valid_row(temperature_c=400.0)])
    ds = data.load_csv(path)
    assert ds.n_rows == 1
    assert len(ds.warnings) == 1
    assert "temperature_c" in ds.warnings[0]


def test_out_of_envelope_time_warns(csv_factory):
    ds = data.load_csv(csv_factory([valid_row(time_min=700.0)]))
    assert len(ds.warnings) == 1 and "time_min" in ds.warnings[0]


def test_wtpct_bound_rejected(csv_factory):
    path = csv_factory([valid_row(biomass_c=105.0)])
    with pytest.raises(ConstraintViolation):
        data.load_csv(path)


def test_sum_constraints_rejected(csv_factory):
    row = valid_row(biomass_c=60.0, biomass_o=45.0)  # CHNSO = 112.2
    with pytest.raises(ConstraintViolation):
        data.load_csv(csv_factory([row]))


def test_target_ranges_rejected(csv_factory):
    with pytest.raises(ConstraintViolation):
        data.load_csv(csv_factory([valid_row(hc_yield=0.0)]))
    with pytest.raises(ConstraintViolation):
        data.load_csv(csv_factory([valid_row(hc_hhv=60.0)]))


def test_missing_column(csv_factory):
    path = csv_factory([valid_row()[:-1]], header=data.CSV_HEADER[:-1])
    with pytest.raises(MissingColumn):
        data.load_csv(path)


def test_unparseable_cell(csv_factory):
    path = csv_factory([valid_row(hc_hhv="abc")])
    with pytest.raises(UnparseableCell) as err:
        data.load_csv(path)
    assert err.value.col == "hc_hhv"


def test_missing_feature_cell_rejected(csv_factory):
    path = csv_factory([valid_row(water_wt="")])
    with pytest.raises(UnparseableCell):
        data.load_csv(path)


def test_empty_target_cells_become_absent(csv_factory):
    ds = data.load_csv(csv_factory([valid_row(hc_yield="", hc_s="")]))
    tr = ds.rows[0][1]
    assert tr.yield_pct is None and tr.hc_s is None and tr.hhv == 24.0
    vals, mask = ds.column("hc_yield")
    assert not mask[0] and np.isnan(vals[0])


def test_roundtrip_preserves_12_significant_digits(tmp_path, csv_factory):
    gnarly = valid_row(
        biomass_c=45.123456789012345,
        hc_hhv=24.000000000123456,
        time_min=1.0 / 3.0 * 100.0,
    )
    src = csv_factory([gnarly, valid_row()])
    ds = data.load_csv(src)
    out = tmp_path / "rt.csv"
    data.write_csv(ds, out)
    before = [float(c) for c in src.read_text().splitlines()[1].split(",")]
    after = [float(c) for c in out.read_text().splitlines()[1].split(",")]
    for b, a in zip(before, after):
        assert a == pytest.approx(b, rel=1e-11)


def test_write_then_load_is_identity(tmp_path, small_dataset):
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    data.write_csv(small_dataset, p1)
    data.write_csv(data.load_csv(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


# ------------------------------------------------------------------ scaler

def test_scaler_hand_values():
    s = data.Scaler.fit(np.array([1.0, 2.0, 3.0]))
    assert s.means[0] == pytest.approx(2.0, abs=1e-15)
    assert s.stds[0] == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-12)
    got = s.transform(np.array([[1.0], [2.0], [3.0]])).ravel()
    assert got == pytest.approx([-1.22474487, 0.0, 1.22474487], abs=1e-8)


def test_scaler_rejects_constant_column():
    with pytest.raises(ConstantColumn):
        data.Scaler.fit(np.array([5.0, 5.0, 5.0]))


@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=40).filter(
        lambda v: max(v) - min(v) > 1e-9
    )
)
def test_scaler_roundtrip_and_normalization(values):
    col = np.array(values)
    s = data.Scaler.fit(col)
    z = s.transform(col[:, None])
    assert np.allclose(s.inverse_transform(z).ravel(), col, atol=1e-10 * max(1.0, np.abs(col).max()))
    assert abs(z.mean()) < 1e-10
    assert abs(z.std() - 1.0) < 1e-10


def test_fit_scaler_train_rows_only(small_dataset):
    rows = np.arange(10)
    s = data.fit_scaler(small_dataset, columns=["temperature_c"], rows=rows)
    expect = small_dataset.feature_matrix()[rows, 8].mean()
    assert s.means[0] == pytest.approx(expect, rel=1e-12)


# ------------------------------------------------------------------- split

def test_split_sizes_example():
    ds = data.generate_synthetic(10, seed=0)
    plan = data.split(ds, test_fraction=0.2, k=5, seed=1)
    assert len(plan.test_indices) == 2
    assert len(plan.train_indices) == 8
    sizes = sorted(np.bincount(plan.fold_assignments, minlength=5), reverse=True)
    assert sizes == [2, 2, 2, 1, 1]


def test_split_deterministic():
    ds = data.generate_synthetic(40, seed=0)
    a = data.split(ds, seed=9)
    b = data.split(ds, seed=9)
    assert np.array_equal(a.train_indices, b.train_indices)
    assert np.array_equal(a.test_indices, b.test_indices)
    assert np.array_equal(a.fold_assignments, b.fold_assignments)


def test_split_too_few_rows():
    ds = data.generate_synthetic(4, seed=0)
    with pytest.raises(TooFewRows):
        data.split(ds, k=5, seed=0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(7, 60), seed=st.integers(0, 1000), k=st.integers(2, 5))
def test_split_coverage_invariants(n, seed, k):
    ds = data.generate_synthetic(n, seed=0)
    plan = data.split(ds, k=k, seed=seed)
    train = set(plan.train_indices.tolist())
    test = set(plan.test_indices.tolist())
    assert not (train & test)
    assert train | test == set(range(n))
    assert len(plan.test_indices) == int(round(0.2 * n))
    counts = np.bincount(plan.fold_assignments, minlength=k)
    assert counts.max() - counts.min() <= 1


# ------------------------------------------------------------ van krevelen

def test_van_krevelen_unit_moles():
    assert data.van_krevelen(12.011, 1.008, 15.999) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_van_krevelen_ratio_arithmetic():
    assert data.van_krevelen(12.011, 2.016, 0.0) == pytest.approx((2.0, 0.0), abs=1e-12)


def test_van_krevelen_hand_case():
    hc, oc = data.van_krevelen(50.0, 6.0, 40.0)
    assert hc == pytest.approx(1.4299, abs=5e-5)
    assert oc == pytest.approx(0.6006, abs=5e-5)


def test_van_krevelen_zero_carbon():
    with pytest.raises(ZeroCarbon):
        data.van_krevelen(0.0, 6.0, 40.0)


@given(scale=st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False))
def test_van_krevelen_scale_invariance(scale):
    base = data.van_krevelen(50.0, 6.0, 40.0)
    scaled = data.van_krevelen(50.0 * scale, 6.0 * scale, 40.0 * scale)
    assert scaled[0] == pytest.approx(base[0], rel=1e-12)
    assert scaled[1] == pytest.approx(base[1], rel=1e-12)


# --------------------------------------------------------------- synthetic

def test_synthetic_rejects_bad_args():
    with pytest.raises(ValueError):
        data.generate_synthetic(0, seed=1)
    with pytest.raises(ValueError):
        data.generate_synthetic(5, seed=1, noise_sd=-0.1)


def test_synthetic_deterministic(tmp_path):
    a = data.generate_synthetic(60, seed=5, noise_sd=0.3)
    b = data.generate_synthetic(60, seed=5, noise_sd=0.3)
    assert a.to_csv_text() == b.to_csv_text()
    c = data.generate_synthetic(60, seed=6, noise_sd=0.3)
    assert a.to_csv_text() != c.to_csv_text()


def test_synthetic_rows_valid_and_in_envelope(tmp_path):
    ds = data.generate_synthetic(200, seed=3, noise_sd=1.5)
    path = tmp_path / "synth.csv"
    data.write_csv(ds, path)
    loaded = data.load_csv(path)
    assert loaded.n_rows == 200
    assert loaded.warnings == []


def test_synthetic_noiseless_is_tree_learnable():
    from hydrochar.cart import TreeParams, fit_tree
    from hydrochar.stats import r_squared

    ds = data.generate_synthetic(500, seed=8)
    x = ds.feature_matrix()
    y = ds.target_matrix()[:, 4]  # ash content
    tree = fit_tree(x, y, TreeParams())
    assert r_squared(y, tree.predict_batch(x)) == 1.0


def test_mass_balance_ok():
    good = valid_row()
    arr = np.array([[float(v) for v in good[:11]]])
    assert data.mass_balance_ok(arr)[0]
    bad = arr.copy()
    bad[0, 0] = 70.0  # CHNSO > 101
    assert not data.mass_balance_ok(bad)[0]


def test_fingerprint_tracks_content(small_dataset):
    other = data.generate_synthetic(80, seed=999)
    assert small_dataset.fingerprint() != other.fingerprint()
    assert small_dataset.fingerprint() == small_dataset.fingerprint()
