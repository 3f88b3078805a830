"""HTC dataset handling: schema, CSV I/O, splitting, scaling, synthetic data.

The canonical table has 11 independent variables (biomass ultimate and
proximate analysis plus reaction conditions) and 10 hydrochar responses.
Any subset of the responses may be reported for a given experiment; absent
cells stay absent (no imputation).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConstantColumn,
    ConstraintViolation,
    EmptyDataset,
    MissingColumn,
    TooFewRows,
    UnparseableCell,
    ZeroCarbon,
)

FEATURE_COLUMNS = (
    "biomass_c",
    "biomass_h",
    "biomass_n",
    "biomass_s",
    "biomass_o",
    "biomass_vm",
    "biomass_fc",
    "biomass_ash",
    "temperature_c",
    "time_min",
    "water_wt",
)
TARGET_COLUMNS = (
    "hc_yield",
    "hc_hhv",
    "hc_vm",
    "hc_fc",
    "hc_ash",
    "hc_c",
    "hc_h",
    "hc_n",
    "hc_s",
    "hc_o",
)
CSV_HEADER = FEATURE_COLUMNS + TARGET_COLUMNS

# Measurement slack allowed on reported wt% sums.
SUM_TOLERANCE = 1.0

# Operating envelope covered by published HTC studies. Values outside it
# load fine but are flagged, because queries there extrapolate.
TEMPERATURE_ENVELOPE = (100.0, 375.0)
TIME_ENVELOPE = (5.0, 600.0)

_MASS_C = 12.011
_MASS_H = 1.008
_MASS_O = 15.999

_WT_FEATURE_FIELDS = (
    "biomass_c",
    "biomass_h",
    "biomass_n",
    "biomass_s",
    "biomass_o",
    "biomass_vm",
    "biomass_fc",
    "biomass_ash",
    "water_content",
)

# CSV column -> TargetRecord attribute.
TARGET_FIELD_BY_COLUMN = {
    "hc_yield": "yield_pct",
    "hc_hhv": "hhv",
    "hc_vm": "hc_vm",
    "hc_fc": "hc_fc",
    "hc_ash": "hc_ash",
    "hc_c": "hc_c",
    "hc_h": "hc_h",
    "hc_n": "hc_n",
    "hc_s": "hc_s",
    "hc_o": "hc_o",
}


@dataclass(frozen=True)
class FeatureVector:
    """One experiment's independent variables (wt% fields on a dry basis)."""

    biomass_c: float
    biomass_h: float
    biomass_n: float
    biomass_s: float
    biomass_o: float
    biomass_vm: float
    biomass_fc: float
    biomass_ash: float
    temperature: float
    time: float
    water_content: float

    def validate(self, row: int | None = None) -> None:
        for name in _WT_FEATURE_FIELDS:
            v = getattr(self, name)
            if not (0.0 <= v <= 100.0):
                raise ConstraintViolation(f"{name}={v} outside [0, 100] wt%", row=row)
        if not self.temperature > 0.0:
            raise ConstraintViolation(f"temperature_c={self.temperature} must be > 0", row=row)
        if not self.time > 0.0:
            raise ConstraintViolation(f"time_min={self.time} must be > 0", row=row)
        ultimate = self.biomass_c + self.biomass_h + self.biomass_n + self.biomass_s + self.biomass_o
        if ultimate > 100.0 + SUM_TOLERANCE:
            raise ConstraintViolation(
                f"biomass C+H+N+S+O = {ultimate:.4g} exceeds {100.0 + SUM_TOLERANCE} wt%", row=row
            )
        proximate = self.biomass_vm + self.biomass_fc + self.biomass_ash
        if proximate > 100.0 + SUM_TOLERANCE:
            raise ConstraintViolation(
                f"biomass VM+FC+ash = {proximate:.4g} exceeds {100.0 + SUM_TOLERANCE} wt%", row=row
            )

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.biomass_c,
                self.biomass_h,
                self.biomass_n,
                self.biomass_s,
                self.biomass_o,
                self.biomass_vm,
                self.biomass_fc,
                self.biomass_ash,
                self.temperature,
                self.time,
                self.water_content,
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class TargetRecord:
    """Hydrochar responses for one experiment; None marks an unreported value."""

    yield_pct: float | None = None
    hhv: float | None = None
    hc_vm: float | None = None
    hc_fc: float | None = None
    hc_ash: float | None = None
    hc_c: float | None = None
    hc_h: float | None = None
    hc_n: float | None = None
    hc_s: float | None = None
    hc_o: float | None = None

    def validate(self, row: int | None = None) -> None:
        if self.yield_pct is not None and not (0.0 < self.yield_pct <= 100.0):
            raise ConstraintViolation(f"hc_yield={self.yield_pct} outside (0, 100]", row=row)
        if self.hhv is not None and not (0.0 < self.hhv <= 50.0):
            raise ConstraintViolation(f"hc_hhv={self.hhv} outside (0, 50] MJ/kg", row=row)
        for col in ("hc_vm", "hc_fc", "hc_ash", "hc_c", "hc_h", "hc_n", "hc_s", "hc_o"):
            v = getattr(self, col)
            if v is not None and not (0.0 <= v <= 100.0):
                raise ConstraintViolation(f"{col}={v} outside [0, 100] wt%", row=row)

    def as_array(self) -> np.ndarray:
        vals = [getattr(self, TARGET_FIELD_BY_COLUMN[col]) for col in TARGET_COLUMNS]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)


class Dataset:
    """Immutable table of (FeatureVector, TargetRecord) rows.

    Matrices are cached at construction and exposed read-only, so a Dataset
    can be shared freely across threads.
    """

    def __init__(self, rows, warnings=None):
        rows = list(rows)
        if not rows:
            raise EmptyDataset("dataset has no rows")
        self.rows = rows
        self.feature_names = FEATURE_COLUMNS
        self.target_names = TARGET_COLUMNS
        self.warnings = list(warnings or [])
        self._x = np.array([fv.as_array() for fv, _ in rows])
        self._y = np.array([tr.as_array() for _, tr in rows])
        self._x.setflags(write=False)
        self._y.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def feature_matrix(self) -> np.ndarray:
        """All feature rows as an (n, 11) read-only array."""
        return self._x

    def target_matrix(self) -> np.ndarray:
        """All target rows as an (n, 10) read-only array with NaN for absent."""
        return self._y

    def column(self, label: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, present_mask) for a feature or target column."""
        if label in FEATURE_COLUMNS:
            vals = self._x[:, FEATURE_COLUMNS.index(label)]
            return vals, np.ones(len(vals), dtype=bool)
        if label in TARGET_COLUMNS:
            vals = self._y[:, TARGET_COLUMNS.index(label)]
            return vals, ~np.isnan(vals)
        raise KeyError(label)

    def to_csv_text(self) -> str:
        lines = [",".join(CSV_HEADER)]
        for i in range(self.n_rows):
            cells = [_format_cell(v) for v in self._x[i]]
            cells += ["" if np.isnan(v) else _format_cell(v) for v in self._y[i]]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        """SHA-256 of the canonical CSV serialization."""
        return hashlib.sha256(self.to_csv_text().encode("utf-8")).hexdigest()


def _format_cell(v: float) -> str:
    return format(float(v), ".12g")


def load_csv(path) -> Dataset:
    """Load and validate a dataset from the canonical 21-column CSV schema.

    Empty target cells become absent values. Rows violating hard invariants
    are rejected; temperatures or times outside the published operating
    envelope load fine but are collected into ``Dataset.warnings``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset(f"{path}: file is empty")
        header = tuple(h.strip() for h in header)
        if header != CSV_HEADER:
            missing = [c for c in CSV_HEADER if c not in header]
            if missing:
                raise MissingColumn(f"{path}: missing column(s) {missing}")
            raise MissingColumn(f"{path}: header does not match the canonical column order")
        rows = []
        warnings: list[str] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(cell.strip() == "" for cell in rec):
                continue
            if len(rec) != len(CSV_HEADER):
                raise UnparseableCell(lineno, "(row)", f"expected {len(CSV_HEADER)} cells, got {len(rec)}")
            feats = [_parse_cell(rec[j], lineno, CSV_HEADER[j], required=True) for j in range(11)]
            targs = {
                TARGET_FIELD_BY_COLUMN[CSV_HEADER[j]]: _parse_cell(rec[j], lineno, CSV_HEADER[j], required=False)
                for j in range(11, 21)
            }
            fv = FeatureVector(*feats)
            tr = TargetRecord(**targs)
            fv.validate(row=lineno)
            tr.validate(row=lineno)
            lo, hi = TEMPERATURE_ENVELOPE
            if not (lo <= fv.temperature <= hi):
                warnings.append(f"row {lineno}: temperature_c={fv.temperature:g} outside observed envelope [{lo:g}, {hi:g}]")
            lo, hi = TIME_ENVELOPE
            if not (lo <= fv.time <= hi):
                warnings.append(f"row {lineno}: time_min={fv.time:g} outside observed envelope [{lo:g}, {hi:g}]")
            rows.append((fv, tr))
    if not rows:
        raise EmptyDataset(f"{path}: header only, no data rows")
    return Dataset(rows, warnings)


def _parse_cell(text: str, row: int, col: str, required: bool):
    text = text.strip()
    if text == "":
        if required:
            raise UnparseableCell(row, col, text)
        return None
    try:
        return float(text)
    except ValueError:
        raise UnparseableCell(row, col, text) from None


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the canonical schema (12 significant digits)."""
    Path(path).write_text(dataset.to_csv_text(), encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class Scaler:
    """Column-wise standardizer using population (divide-by-n) deviations."""

    means: np.ndarray
    stds: np.ndarray
    columns: tuple[str, ...] | None = None

    @classmethod
    def fit(cls, matrix, columns=None) -> "Scaler":
        m = np.asarray(matrix, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        means = np.nanmean(m, axis=0)
        stds = np.nanstd(m, axis=0)
        for j in range(m.shape[1]):
            if not stds[j] > 0.0:
                name = columns[j] if columns is not None else f"column {j}"
                raise ConstantColumn(f"{name} has fewer than 2 distinct values")
        means.setflags(write=False)
        stds.setflags(write=False)
        return cls(means=means, stds=stds, columns=tuple(columns) if columns is not None else None)

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.means) / self.stds

    def inverse_transform(self, x):
        return np.asarray(x, dtype=float) * self.stds + self.means

    def to_dict(self) -> dict:
        return {
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "columns": list(self.columns) if self.columns is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        means = np.array(d["means"], dtype=float)
        stds = np.array(d["stds"], dtype=float)
        means.setflags(write=False)
        stds.setflags(write=False)
        cols = d.get("columns")
        return cls(means=means, stds=stds, columns=tuple(cols) if cols is not None else None)


def fit_scaler(dataset: Dataset, columns=None, rows=None) -> Scaler:
    """Fit a Scaler on named dataset columns.

    ``rows`` restricts the fit to an index subset (pass the training split to
    avoid leaking test statistics). Absent target cells are ignored at fit
    time; a column with fewer than two distinct present values is rejected.
    """
    cols = tuple(columns) if columns is not None else FEATURE_COLUMNS
    mat = np.column_stack([dataset.column(c)[0] for c in cols])
    if rows is not None:
        mat = mat[np.asarray(rows, dtype=int)]
    return Scaler.fit(mat, columns=cols)


@dataclass(frozen=True)
class SplitPlan:
    """Shared train/test partition plus fold ids for the training rows."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    fold_assignments: np.ndarray  # parallel to train_indices

    @property
    def k(self) -> int:
        return int(self.fold_assignments.max()) + 1


def split(dataset: Dataset, test_fraction: float = 0.2, k: int = 5, seed: int = 0) -> SplitPlan:
    """Shuffle rows with a seeded generator, hold out a test fraction, and
    partition the remaining training rows into k folds of near-equal size."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if k < 2:
        raise ValueError("k must be >= 2")
    n = dataset.n_rows
    n_test = int(round(n * test_fraction))
    n_train = n - n_test
    if n < k + 1 or n_train < k:
        raise TooFewRows(f"n={n} cannot support k={k} folds plus a test split")
    perm = np.random.default_rng(seed).permutation(n)
    test = np.sort(perm[:n_test])
    train_shuffled = perm[n_test:]
    fold_of = {}
    for fold_id, chunk in enumerate(np.array_split(train_shuffled, k)):
        for row in chunk:
            fold_of[int(row)] = fold_id
    train = np.sort(train_shuffled)
    folds = np.array([fold_of[int(r)] for r in train], dtype=int)
    for arr in (train, test, folds):
        arr.setflags(write=False)
    return SplitPlan(train_indices=train, test_indices=test, fold_assignments=folds)


def van_krevelen(c_wt: float, h_wt: float, o_wt: float) -> tuple[float, float]:
    """Atomic H/C and O/C ratios from mass fractions (wt%)."""
    if not c_wt > 0.0:
        raise ZeroCarbon(f"carbon mass fraction must be positive, got {c_wt}")
    c_mol = c_wt / _MASS_C
    return (h_wt / _MASS_H) / c_mol, (o_wt / _MASS_O) / c_mol


def mass_balance_ok(features) -> np.ndarray:
    """Vectorized wt%-sum feasibility check on raw feature rows."""
    f = np.atleast_2d(np.asarray(features, dtype=float))
    ultimate = f[:, 0:5].sum(axis=1)
    proximate = f[:, 5:8].sum(axis=1)
    return (ultimate <= 100.0 + SUM_TOLERANCE) & (proximate <= 100.0 + SUM_TOLERANCE)


# ---------------------------------------------------------------------------
# Synthetic data
#
# The generator samples features uniformly inside the operating envelope and
# produces targets from the smooth response surface below, optionally plus
# Gaussian noise. It exists so the pipeline can be exercised end to end
# without the (non-redistributable) literature dataset.
# ---------------------------------------------------------------------------

# Per-target noise scale: generate_synthetic adds noise with standard
# deviation noise_sd * scale, so noise_sd = 1 is "comparable to the signal".
SYNTHETIC_NOISE_SCALE = {
    "hc_yield": 12.0,
    "hc_hhv": 4.0,
    "hc_vm": 11.0,
    "hc_fc": 9.0,
    "hc_ash": 15.0,
    "hc_c": 13.0,
    "hc_h": 1.2,
    "hc_n": 1.0,
    "hc_s": 0.25,
    "hc_o": 11.0,
}

_TARGET_CLIP = {
    "hc_yield": (0.1, 100.0),
    "hc_hhv": (0.1, 50.0),
    "hc_vm": (0.0, 100.0),
    "hc_fc": (0.0, 100.0),
    "hc_ash": (0.0, 100.0),
    "hc_c": (0.0, 100.0),
    "hc_h": (0.0, 100.0),
    "hc_n": (0.0, 100.0),
    "hc_s": (0.0, 100.0),
    "hc_o": (0.0, 100.0),
}


def ground_truth_targets(x) -> np.ndarray:
    """Noise-free synthetic response surface (columns follow TARGET_COLUMNS).

    Each response is a smooth function of one dominant feature plus a small
    secondary term: yield falls with reaction severity, heating value rises
    with biomass carbon, and hydrochar composition tracks the feedstock.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    c, h, n, s, o = (x[:, j] for j in range(5))
    vm, fc, ash = (x[:, j] for j in range(5, 8))
    temp, time_, water = (x[:, j] for j in range(8, 11))
    dt = temp - 100.0
    out = np.empty((x.shape[0], len(TARGET_COLUMNS)))
    out[:, 0] = 90.0 - 0.155 * dt - 0.006 * (time_ - 5.0)
    out[:, 1] = 7.0 + 0.33 * c - 0.012 * (water - 40.0)
    out[:, 2] = 5.0 + 0.82 * vm - 0.04 * dt
    out[:, 3] = 12.0 + 0.55 * fc + 0.05 * dt
    out[:, 4] = 1.03 * ash + 0.02 * dt
    out[:, 5] = 1.12 * c + 0.035 * dt
    out[:, 6] = 0.92 * h - 0.004 * dt
    out[:, 7] = 1.18 * n + 0.15
    out[:, 8] = 0.9 * s + 0.01
    out[:, 9] = 0.78 * o - 0.03 * dt + 4.0
    return out


def generate_synthetic(n: int, seed: int, noise_sd: float = 0.0) -> Dataset:
    """Deterministic synthetic dataset with all 10 targets present.

    Features are sampled uniformly inside the observed envelope, with the
    oxygen / volatile-matter / fixed-carbon draws capped so every row obeys
    the wt%-sum constraints. Targets outside their valid range after noise
    are clipped.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise_sd < 0.0:
        raise ValueError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    c = rng.uniform(22.65, 63.82, n)
    h = rng.uniform(2.9, 8.1, n)
    n_mass = rng.uniform(0.1, 3.0, n)
    s = rng.uniform(0.01, 1.0, n)
    o = rng.uniform(10.5, np.minimum(60.5, 100.0 - (c + h + n_mass + s)))
    ash = rng.uniform(0.16, 49.85, n)
    vm = rng.uniform(47.38, np.minimum(93.42, 100.0 - ash))
    fc = rng.uniform(0.0, 100.0 - vm - ash)
    temp = rng.uniform(*TEMPERATURE_ENVELOPE, n)
    time_ = rng.uniform(*TIME_ENVELOPE, n)
    water = rng.uniform(40.0, 95.0, n)
    x = np.column_stack([c, h, n_mass, s, o, vm, fc, ash, temp, time_, water])
    y = ground_truth_targets(x)
    if noise_sd > 0.0:
        scales = np.array([SYNTHETIC_NOISE_SCALE[t] for t in TARGET_COLUMNS])
        y = y + rng.standard_normal(y.shape) * (noise_sd * scales)
    for j, t in enumerate(TARGET_COLUMNS):
        lo, hi = _TARGET_CLIP[t]
        np.clip(y[:, j], lo, hi, out=y[:, j])
    rows = []
    for i in range(n):
        fv = FeatureVector(*x[i])
        tr = TargetRecord(**{TARGET_FIELD_BY_COLUMN[col]: float(y[i, j]) for j, col in enumerate(TARGET_COLUMNS)})
        fv.validate()
        tr.validate()
        rows.append((fv, tr))
    return Dataset(rows)
