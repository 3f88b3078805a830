"""Exact Shapley-value attribution for any batch prediction function.

Values use the interventional (marginal) game: a coalition's value is the
mean model output over background rows with the coalition's features
replaced by the explained point. All 2^d coalitions are enumerated, so the
result is exact and the efficiency identity holds to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyBackground, EmptyInput, TooManyFeatures

MAX_FEATURES = 20
_EVAL_CHUNK = 1 << 14  # coalition rows per model call, keeps memory flat


@dataclass(frozen=True)
class ShapExplanation:
    """Per-feature attributions for one prediction, in target units."""

    feature_values: np.ndarray
    phi: np.ndarray
    base_value: float

    @property
    def prediction(self) -> float:
        return self.base_value + float(self.phi.sum())


@dataclass(frozen=True)
class GlobalImportance:
    """Mean absolute attribution per feature over an explained set."""

    mean_abs_phi: np.ndarray
    ranking: np.ndarray  # feature indices, most important first


def coalition_values(predict_fn, x: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Value v(S) for every coalition bitmask S in [0, 2^d)."""
    d = len(x)
    n_bg = len(background)
    n_masks = 1 << d
    bit_cols = np.arange(d)
    values = np.empty(n_masks)
    for start in range(0, n_masks, _EVAL_CHUNK):
        masks = np.arange(start, min(start + _EVAL_CHUNK, n_masks))
        bits = ((masks[:, None] >> bit_cols) & 1).astype(bool)
        rows = np.where(bits[:, None, :], x[None, None, :], background[None, :, :])
        preds = np.asarray(predict_fn(rows.reshape(-1, d)), dtype=float)
        values[masks] = preds.reshape(len(masks), n_bg).mean(axis=1)
    return values


def explain(predict_fn, x, background) -> ShapExplanation:
    """Exact Shapley attribution of ``predict_fn`` at ``x``.

    ``predict_fn`` must accept an (m, d) array and return m predictions.
    ``background`` supplies the reference distribution for absent features.
    """
    x = np.asarray(x, dtype=float).ravel()
    background = np.atleast_2d(np.asarray(background, dtype=float))
    d = len(x)
    if d > MAX_FEATURES:
        raise TooManyFeatures(f"{d} features exceeds the exact-enumeration cap of {MAX_FEATURES}")
    if background.shape[0] == 0:
        raise EmptyBackground("background matrix has no rows")
    if background.shape[1] != d:
        raise DimensionMismatch(f"background has {background.shape[1]} features, x has {d}")
    v = coalition_values(predict_fn, x, background)
    masks = np.arange(1 << d)
    sizes = np.zeros(1 << d, dtype=int)
    for i in range(d):
        sizes += (masks >> i) & 1
    fact = [math.factorial(k) for k in range(d + 1)]
    # weight for adding feature i to a coalition of size s (i excluded)
    weight = np.array([fact[s] * fact[d - s - 1] / fact[d] for s in range(d)])
    phi = np.empty(d)
    for i in range(d):
        without = (masks & (1 << i)) == 0
        base = masks[without]
        phi[i] = float(np.sum(weight[sizes[base]] * (v[base | (1 << i)] - v[base])))
    phi.setflags(write=False)
    x.setflags(write=False)
    return ShapExplanation(feature_values=x, phi=phi, base_value=float(v[0]))


def global_importance(predict_fn, rows, background) -> GlobalImportance:
    """Mean |phi| per feature across all given rows, plus the ranking."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0:
        raise EmptyInput("no rows to explain")
    abs_sum = np.zeros(rows.shape[1])
    for r in rows:
        abs_sum += np.abs(explain(predict_fn, r, background).phi)
    mean_abs = abs_sum / rows.shape[0]
    ranking = np.argsort(-mean_abs, kind="stable")
    mean_abs.setflags(write=False)
    ranking.setflags(write=False)
    return GlobalImportance(mean_abs_phi=mean_abs, ranking=ranking)


@dataclass(frozen=True)
class PlotData:
    """Tabular plot inputs: beeswarm triples, bar means, heatmap matrix."""

    feature_names: tuple[str, ...]
    beeswarm: list[tuple[str, float, float]]  # (feature, phi, raw value)
    bar: list[tuple[str, float]]  # (feature, mean |phi|), ranked
    heatmap: np.ndarray  # rows x features phi
    fx: np.ndarray  # per-row prediction


def emit_plot_data(explanations, feature_names=None, out_dir=None, provenance: str = "") -> PlotData:
    """Assemble beeswarm/bar/heatmap tables from a set of explanations.

    With ``out_dir`` set, writes beeswarm.csv, bar.csv, heatmap.csv, and a
    static importance.svg bar chart into it. ``provenance`` is an optional
    comment line prepended to each CSV.
    """
    explanations = list(explanations)
    if not explanations:
        raise EmptyInput("no explanations given")
    d = len(explanations[0].phi)
    for e in explanations:
        if len(e.phi) != d or len(e.feature_values) != d:
            raise DimensionMismatch("explanations have inconsistent feature counts")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(d))
    if len(names) != d:
        raise DimensionMismatch(f"{len(names)} names for {d} features")
    phi_mat = np.array([e.phi for e in explanations])
    raw_mat = np.array([e.feature_values for e in explanations])
    fx = np.array([e.prediction for e in explanations])
    beeswarm = [
        (names[j], float(phi_mat[i, j]), float(raw_mat[i, j]))
        for i in range(len(explanations))
        for j in range(d)
    ]
    mean_abs = np.abs(phi_mat).mean(axis=0)
    order = np.argsort(-mean_abs, kind="stable")
    bar = [(names[j], float(mean_abs[j])) for j in order]
    out = PlotData(feature_names=names, beeswarm=beeswarm, bar=bar, heatmap=phi_mat, fx=fx)
    if out_dir is not None:
        _write_plot_files(out, Path(out_dir), provenance)
    return out


def _write_plot_files(plot: PlotData, out_dir: Path, provenance: str = "") -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    pre = [provenance] if provenance else []
    d = len(plot.feature_names)

    lines = pre + ["row,feature,phi,feature_value"]
    for i in range(len(plot.fx)):
        for j in range(d):
            name, phi, raw = plot.beeswarm[i * d + j]
            lines.append(f"{i},{name},{phi!r},{raw!r}")
    (out_dir / "beeswarm.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = pre + ["feature,mean_abs_phi"]
    lines += [f"{name},{val!r}" for name, val in plot.bar]
    (out_dir / "bar.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = pre + ["row,fx," + ",".join(plot.feature_names)]
    for i in range(len(plot.fx)):
        cells = ",".join(repr(float(v)) for v in plot.heatmap[i])
        lines.append(f"{i},{plot.fx[i]!r},{cells}")
    (out_dir / "heatmap.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    svg = importance_svg(plot)
    if provenance:
        svg = svg.replace("\n", f"\n<!-- {provenance.lstrip('# ')} -->\n", 1)
    (out_dir / "importance.svg").write_text(svg, encoding="utf-8")


def importance_svg(plot: PlotData, width: int = 800, height: int = 400) -> str:
    """Static horizontal bar chart of mean |phi|, most important on top."""
    bars = plot.bar
    n = len(bars)
    label_w = 170
    margin = 10
    chart_w = width - label_w - 2 * margin
    row_h = (height - 2 * margin) / max(n, 1)
    vmax = max((v for _, v in bars), default=0.0) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">',
        f'<!-- mean absolute attribution per feature -->',
    ]
    for i, (name, val) in enumerate(bars):
        y = margin + i * row_h
        bar_w = chart_w * val / vmax
        parts.append(
            f'<text x="{label_w - 6}" y="{y + row_h * 0.68:.2f}" text-anchor="end" '
            f'font-family="monospace" font-size="12">{name}</text>'
        )
        parts.append(
            f'<rect x="{label_w}" y="{y + row_h * 0.15:.2f}" width="{bar_w:.3f}" '
            f'height="{row_h * 0.7:.2f}" fill="#2b7a78"/>'
        )
        parts.append(
            f'<text x="{label_w + bar_w + 4:.3f}" y="{y + row_h * 0.68:.2f}" '
            f'font-family="monospace" font-size="11">{val:.6g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
