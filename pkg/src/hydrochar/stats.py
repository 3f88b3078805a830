"""Evaluation metrics, Spearman correlation, and eigenvalue factor analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FEATURE_COLUMNS, TARGET_COLUMNS
from .errors import (
    DegenerateActual,
    DegenerateInput,
    LengthMismatch,
    SingularInput,
    TooFewRows,
)


@dataclass(frozen=True)
class MetricsReport:
    """R^2 / RMSE / MAE for one (model, target, phase) combination."""

    r2: float
    rmse: float
    mae: float
    n: int

    def as_dict(self) -> dict:
        return {"r2": self.r2, "rmse": self.rmse, "mae": self.mae, "n": self.n}


def _paired(actual, predicted, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if len(a) != len(p):
        raise LengthMismatch(f"actual has {len(a)} values, predicted has {len(p)}")
    if len(a) < min_len:
        raise LengthMismatch(f"need at least {min_len} pairs, got {len(a)}")
    return a, p


def r_squared(actual, predicted) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot."""
    a, p = _paired(actual, predicted, 2)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateActual("actual values are all identical")
    ss_res = float(np.sum((p - a) ** 2))
    return 1.0 - ss_res / ss_tot


def rmse(actual, predicted) -> float:
    a, p = _paired(actual, predicted, 1)
    return math.sqrt(float(np.mean((p - a) ** 2)))


def mae(actual, predicted, scale_100: bool = False) -> float:
    """Mean absolute error.

    ``scale_100`` multiplies the result by 100; reported error magnitudes are
    only self-consistent without it, so it defaults off.
    """
    a, p = _paired(actual, predicted, 1)
    v = float(np.mean(np.abs(a - p)))
    return v * 100.0 if scale_100 else v


def metrics_report(actual, predicted) -> MetricsReport:
    a, p = _paired(actual, predicted, 2)
    return MetricsReport(r2=r_squared(a, p), rmse=rmse(a, p), mae=mae(a, p), n=len(a))


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    v = np.asarray(values, dtype=float).ravel()
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=float)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(np.dot(xc, xc)))
    sy = math.sqrt(float(np.dot(yc, yc)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInput("constant vector has no defined correlation")
    r = float(np.dot(xc, yc)) / (sx * sy)
    return min(1.0, max(-1.0, r))


def spearman(x, y) -> float:
    """Spearman rank correlation with average-rank tie handling.

    Computed as the Pearson correlation of the two average-rank vectors,
    which reduces to the classic squared-rank-difference formula whenever
    there are no ties.
    """
    a, b = _paired(x, y, 3)
    return _pearson(average_ranks(a), average_ranks(b))


def spearman_rank_difference(x, y) -> float:
    """Closed-form Spearman coefficient 1 - 6*sum(d^2) / (n(n^2-1)).

    Exact only for tie-free inputs; with ties prefer :func:`spearman`.
    """
    a, b = _paired(x, y, 3)
    if len(np.unique(a)) < 2 or len(np.unique(b)) < 2:
        raise DegenerateInput("constant vector has no defined correlation")
    d = average_ranks(a) - average_ranks(b)
    n = len(a)
    return 1.0 - 6.0 * float(np.dot(d, d)) / (n * (n * n - 1))


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric matrix of pairwise Spearman coefficients; NaN marks pairs
    with too few joint observations for a defined value."""

    labels: tuple[str, ...]
    values: np.ndarray

    def to_csv_text(self) -> str:
        lines = ["," + ",".join(self.labels)]
        for i, lab in enumerate(self.labels):
            cells = ["" if np.isnan(v) else format(v, ".12g") for v in self.values[i]]
            lines.append(lab + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        return {
            "labels": list(self.labels),
            "values": [[None if np.isnan(v) else float(v) for v in row] for row in self.values],
        }


def correlation_matrix(dataset: Dataset, min_joint: int = 3) -> CorrelationMatrix:
    """Pairwise Spearman matrix over all 21 input and output variables.

    Each pair uses the rows where both variables are present; pairs with
    fewer than ``min_joint`` joint observations, or with a constant joint
    subvector, are marked absent (NaN).
    """
    if dataset.n_rows < min_joint:
        raise TooFewRows(f"need at least {min_joint} rows, got {dataset.n_rows}")
    labels = tuple(FEATURE_COLUMNS) + tuple(TARGET_COLUMNS)
    cols = [dataset.column(lab) for lab in labels]
    p = len(labels)
    out = np.full((p, p), np.nan)
    np.fill_diagonal(out, 1.0)
    for i in range(p):
        vi, mi = cols[i]
        for j in range(i + 1, p):
            vj, mj = cols[j]
            joint = mi & mj
            if int(joint.sum()) < min_joint:
                continue
            try:
                r = spearman(vi[joint], vj[joint])
            except DegenerateInput:
                continue
            out[i, j] = out[j, i] = r
    out.setflags(write=False)
    return CorrelationMatrix(labels=labels, values=out)


def jacobi_eigendecomposition(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns, both in
    unsorted rotation order. Stops when the off-diagonal Frobenius norm drops
    below ``tol`` or after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-10):
        raise ValueError("input must be a symmetric square matrix")
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(a, -1) ** 2) * 2.0))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app, aqq = a[p, p], a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                arp = a[:, p].copy()
                arq = a[:, q].copy()
                mask = np.ones(n, dtype=bool)
                mask[[p, q]] = False
                a[mask, p] = c * arp[mask] - s * arq[mask]
                a[mask, q] = s * arp[mask] + c * arq[mask]
                a[p, mask] = a[mask, p]
                a[q, mask] = a[mask, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    return np.diag(a).copy(), v


@dataclass(frozen=True)
class FactorResult:
    """Eigen-structure of a correlation matrix: eigenvalues in descending
    order, per-factor variance fractions, and loadings (eigenvectors scaled
    by the square root of their eigenvalue)."""

    labels: tuple[str, ...]
    eigenvalues: np.ndarray
    variance_fraction: np.ndarray
    cumulative_fraction: np.ndarray
    loadings: np.ndarray  # variables x factors
    correlation: np.ndarray

    def to_json_obj(self) -> dict:
        return {
            "labels": list(self.labels),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "variance_fraction": [float(v) for v in self.variance_fraction],
            "cumulative_fraction": [float(v) for v in self.cumulative_fraction],
            "loadings": [[float(v) for v in row] for row in self.loadings],
        }

    def to_csv_text(self) -> str:
        """Loadings as a labeled table, one factor per column, plus the
        eigenvalue and variance rows at the bottom."""
        k = self.loadings.shape[1]
        lines = ["variable," + ",".join(f"factor_{j + 1}" for j in range(k))]
        for lab, row in zip(self.labels, self.loadings):
            lines.append(lab + "," + ",".join(format(v, ".12g") for v in row))
        lines.append("eigenvalue," + ",".join(format(v, ".12g") for v in self.eigenvalues))
        lines.append("variance_fraction," + ",".join(format(v, ".12g") for v in self.variance_fraction))
        lines.append("cumulative_fraction," + ",".join(format(v, ".12g") for v in self.cumulative_fraction))
        return "\n".join(lines) + "\n"


def factor_analysis(dataset: Dataset, columns) -> FactorResult:
    """Unrotated factor analysis of the selected columns.

    Rows incomplete on the selection are dropped; the Pearson correlation
    matrix of the standardized remainder is eigen-decomposed with Jacobi
    rotations. Each eigenvector is signed so its largest-magnitude entry is
    positive.
    """
    cols = tuple(columns)
    if len(cols) < 2:
        raise ValueError("need at least 2 columns")
    vals = []
    mask = np.ones(dataset.n_rows, dtype=bool)
    for c in cols:
        v, m = dataset.column(c)
        vals.append(v)
        mask &= m
    if int(mask.sum()) < 3:
        raise TooFewRows(f"only {int(mask.sum())} rows complete on the selection")
    m = np.column_stack(vals)[mask]
    means = m.mean(axis=0)
    stds = m.std(axis=0)
    for j, c in enumerate(cols):
        if not stds[j] > 0.0:
            raise SingularInput(f"column {c} is constant on the complete rows")
    z = (m - means) / stds
    corr = (z.T @ z) / z.shape[0]
    corr = 0.5 * (corr + corr.T)
    eigvals, eigvecs = jacobi_eigendecomposition(corr)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    eigvals[(eigvals < 0.0) & (eigvals >= -1e-10)] = 0.0
    for j in range(eigvecs.shape[1]):
        lead = np.argmax(np.abs(eigvecs[:, j]))
        if eigvecs[lead, j] < 0.0:
            eigvecs[:, j] = -eigvecs[:, j]
    total = float(eigvals.sum())
    frac = eigvals / total
    loadings = eigvecs * np.sqrt(np.maximum(eigvals, 0.0))
    return FactorResult(
        labels=cols,
        eigenvalues=eigvals,
        variance_fraction=frac,
        cumulative_fraction=np.cumsum(frac),
        loadings=loadings,
        correlation=corr,
    )
