"""Aggregation and export: summary tables, binned scatter series, heatmaps.

Inputs are the plain dict rows produced at scoring time (one per example
and one per (source, target) pair).  All aggregation iterates in sorted
order and all numbers are written at fixed precision, so re-exporting the
same store yields byte-identical files.  Correlations and accuracies are
kept in natural units internally and scaled (x100) only here, at export.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import metrics, textcore
from .textcore import TARGET_LEVELS


class UnknownVariable(ValueError):
    """Heatmap variable name outside the supported set."""


HEATMAP_VARIABLES = ("generated_fres", "wer", "semantic_f1", "length_change")

_VARIABLE_KEYS = {
    "generated_fres": "generated_fres",
    "wer": "self_wer",
    "semantic_f1": "sem_f1",
    "length_change": "length_change_pct",
}


def canonical_variable(name: str) -> str:
    canon = name.replace("-", "_").lower()
    if canon not in HEATMAP_VARIABLES:
        raise UnknownVariable(f"unknown variable {name!r}; choose from {HEATMAP_VARIABLES}")
    return canon


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def individual_summary(example_rows: Iterable[Mapping]) -> dict:
    """Mean and population std of the three individual-scale metrics.

    Rank correlation and accuracy are scaled x100 for display, matching
    how the summary table is conventionally read.
    """
    rows = list(example_rows)
    if not rows:
        raise ValueError("no example scores to summarize")
    rho = [100.0 * r["spearman_rho"] for r in rows]
    rmse = [float(r["rmse"]) for r in rows]
    acc = [100.0 * r["accuracy"] for r in rows]
    out = {"n_examples": len(rows), "metrics": {}}
    for name, values in (("spearman_rho_x100", rho), ("rmse", rmse), ("accuracy_x100", acc)):
        mean, std = _mean_std(values)
        out["metrics"][name] = {"mean": mean, "std": std}
    return out


def population_summary(
    pair_rows: Iterable[Mapping], targets: Sequence[int] = TARGET_LEVELS
) -> list[dict]:
    """Per-target-class fit of generated score against source score.

    The leading "Source" row is the identity reference (pcc 1, slope 1,
    intercept 0, r^2 1).  A class whose fit is degenerate (fewer than two
    pairs or a constant side) gets null fields rather than zeros: zero
    would read as perfect decorrelation, which is the success criterion.
    """
    rows = list(pair_rows)
    by_target: dict[int, list[tuple[float, float]]] = {t: [] for t in targets}
    source_ids = set()
    for row in rows:
        source_ids.add(row["source_id"])
        t = row["target_level"]
        if t in by_target:
            by_target[t].append((float(row["source_fres"]), float(row["generated_fres"])))
    out = [{
        "target": "Source", "pcc": 1.0, "slope_a": 1.0, "intercept_b": 0.0,
        "r_squared": 1.0, "n": len(source_ids),
    }]
    for t in targets:
        points = by_target[t]
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        try:
            fit = metrics.ols_fit(xs, ys, target_level=t)
            out.append({
                "target": t, "pcc": fit.pcc, "slope_a": fit.slope_a,
                "intercept_b": fit.intercept_b, "r_squared": fit.r_squared, "n": fit.n,
            })
        except metrics.DegenerateInput:
            out.append({
                "target": t, "pcc": None, "slope_a": None, "intercept_b": None,
                "r_squared": None, "n": len(points),
            })
    return out


def binned_scatter(
    pair_rows: Iterable[Mapping],
    bin_width: float = 5.0,
    min_count: int = 10,
    targets: Sequence[int] = TARGET_LEVELS,
) -> dict[int, list[dict]]:
    """Mean generated score per source-score bin, one series per target.

    Bins are anchored at 0 with the given width; bins holding fewer than
    ``min_count`` pairs are omitted.  Each point carries the bin center,
    the mean source score inside the bin (exactly on y=x for a copy run)
    and the mean generated score.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    acc: dict[int, dict[int, list[tuple[float, float]]]] = {t: {} for t in targets}
    for row in pair_rows:
        t = row["target_level"]
        if t not in acc:
            continue
        idx = math.floor(float(row["source_fres"]) / bin_width)
        acc[t].setdefault(idx, []).append(
            (float(row["source_fres"]), float(row["generated_fres"]))
        )
    series: dict[int, list[dict]] = {}
    for t in targets:
        points = []
        for idx in sorted(acc[t]):
            bucket = acc[t][idx]
            if len(bucket) < min_count:
                continue
            points.append({
                "bin_center": (idx + 0.5) * bin_width,
                "mean_source_fres": math.fsum(x for x, _ in bucket) / len(bucket),
                "mean_generated_fres": math.fsum(y for _, y in bucket) / len(bucket),
                "count": len(bucket),
            })
        series[t] = points
    return series


@dataclass(frozen=True)
class HeatmapGrid:
    """8x8 grid of means keyed by (source class, target class)."""

    variable: str
    classes: tuple[int, ...]
    means: dict[tuple[int, int], float]
    counts: dict[tuple[int, int], int]
    clamped_sources: int


def heatmap(
    pair_rows: Iterable[Mapping],
    variable: str,
    targets: Sequence[int] = TARGET_LEVELS,
    length_in_words: bool = False,
) -> HeatmapGrid:
    """Mean of one variable for each (source class, target class) cell.

    Sources scoring outside [0, 100] are clamped to the nearest class and
    tallied in ``clamped_sources`` (dropping them would bias the edge
    cells).  ``length_in_words`` switches the length variable from percent
    change to an absolute word delta.
    """
    variable = canonical_variable(variable)
    key = _VARIABLE_KEYS[variable]
    sums: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}
    clamped = 0
    for row in pair_rows:
        f = float(row["source_fres"])
        cls = textcore.classify(f)
        if cls is None:
            clamped += 1
            label = targets[0] if f < 0 else targets[-1]
        else:
            label = cls.label
        if variable == "length_change" and length_in_words:
            value = row["n_words_generated"] - row["n_words_source"]
        else:
            value = row.get(key)
        if value is None:
            continue  # semantic scoring disabled for this run
        cell = (label, row["target_level"])
        sums[cell] = sums.get(cell, 0.0) + float(value)
        counts[cell] = counts.get(cell, 0) + 1
    means = {cell: sums[cell] / counts[cell] for cell in sums}
    return HeatmapGrid(
        variable=variable,
        classes=tuple(targets),
        means=means,
        counts=counts,
        clamped_sources=clamped,
    )


# --- export ---------------------------------------------------------------------


def _fmt(value, places: int = 4) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return f"{value:.{places}f}"


def _round6(value):
    return None if value is None else round(float(value), 6)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def export_report(
    out_dir: str | Path,
    example_rows: list[dict],
    pair_rows: list[dict],
    *,
    targets: Sequence[int] = TARGET_LEVELS,
    bin_width: float = 5.0,
    min_count: int = 10,
    charts: bool = False,
    length_in_words: bool = False,
) -> list[Path]:
    """Write every summary as CSV and JSON (and optional SVG charts)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    ind = individual_summary(example_rows)
    path = out_dir / "summary_individual.csv"
    _write_csv(path, ["metric", "mean", "std"], [
        [name, _fmt(vals["mean"]), _fmt(vals["std"])]
        for name, vals in ind["metrics"].items()
    ])
    written.append(path)
    path = out_dir / "summary_individual.json"
    _write_json(path, {
        "n_examples": ind["n_examples"],
        "metrics": {
            name: {"mean": _round6(v["mean"]), "std": _round6(v["std"])}
            for name, v in ind["metrics"].items()
        },
    })
    written.append(path)

    pop = population_summary(pair_rows, targets)
    path = out_dir / "summary_population.csv"
    _write_csv(path, ["target", "pcc_x100", "slope_a", "intercept_b", "r_squared", "n"], [
        [
            row["target"],
            _fmt(None if row["pcc"] is None else 100.0 * row["pcc"], 2),
            _fmt(row["slope_a"]),
            _fmt(row["intercept_b"]),
            _fmt(row["r_squared"]),
            row["n"],
        ]
        for row in pop
    ])
    written.append(path)
    path = out_dir / "summary_population.json"
    _write_json(path, [
        {key: (_round6(v) if key not in ("target", "n") else v) for key, v in row.items()}
        for row in pop
    ])
    written.append(path)

    series = binned_scatter(pair_rows, bin_width=bin_width, min_count=min_count, targets=targets)
    for t in targets:
        path = out_dir / f"scatter_{t}.csv"
        _write_csv(path, ["bin_center", "mean_source_fres", "mean_generated_fres", "count"], [
            [_fmt(p["bin_center"], 2), _fmt(p["mean_source_fres"]),
             _fmt(p["mean_generated_fres"]), p["count"]]
            for p in series[t]
        ])
        written.append(path)
    path = out_dir / "scatter.json"
    _write_json(path, {
        str(t): [
            {k: (_round6(v) if k != "count" else v) for k, v in p.items()}
            for p in series[t]
        ]
        for t in targets
    })
    written.append(path)

    grids = []
    for variable in HEATMAP_VARIABLES:
        grid = heatmap(pair_rows, variable, targets=targets, length_in_words=length_in_words)
        grids.append(grid)
        header = ["source_class\\target_class"] + [str(t) for t in targets]
        rows = []
        for src in targets:
            rows.append([str(src)] + [
                _fmt(grid.means.get((src, tgt))) for tgt in targets
            ])
        path = out_dir / f"heatmap_{variable}.csv"
        _write_csv(path, header, rows)
        written.append(path)
        path = out_dir / f"heatmap_{variable}.json"
        _write_json(path, {
            "variable": variable,
            "classes": list(targets),
            "clamped_sources": grid.clamped_sources,
            "cells": [
                {
                    "source_class": src, "target_class": tgt,
                    "mean": _round6(grid.means.get((src, tgt))),
                    "count": grid.counts.get((src, tgt), 0),
                }
                for src in targets for tgt in targets
            ],
        })
        written.append(path)

    if charts:
        chart_dir = out_dir / "charts"
        chart_dir.mkdir(exist_ok=True)
        path = chart_dir / "scatter.svg"
        path.write_text(_scatter_svg(series, targets), "utf-8")
        written.append(path)
        for grid in grids:
            path = chart_dir / f"heatmap_{grid.variable}.svg"
            path.write_text(_heatmap_svg(grid, targets), "utf-8")
            written.append(path)
    return written


_SERIES_COLORS = (
    "#4053d3", "#ddb310", "#b51d14", "#00beff",
    "#fb49b0", "#00b25d", "#cacaca", "#5d5d5d",
)


def _scatter_svg(series: dict[int, list[dict]], targets: Sequence[int]) -> str:
    w, h, margin = 520, 420, 45
    def sx(v): return margin + (v / 100.0) * (w - 2 * margin)
    def sy(v): return h - margin - (max(0.0, min(100.0, v)) / 100.0) * (h - 2 * margin)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{margin}" y1="{h-margin}" x2="{w-margin}" y2="{h-margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{h-margin}" stroke="black"/>',
    ]
    for tick in range(0, 101, 20):
        parts.append(
            f'<text x="{sx(tick):.1f}" y="{h-margin+16}" font-size="10" '
            f'text-anchor="middle">{tick}</text>'
        )
        parts.append(
            f'<text x="{margin-8}" y="{sy(tick)+3:.1f}" font-size="10" '
            f'text-anchor="end">{tick}</text>'
        )
    for i, t in enumerate(targets):
        points = series.get(t, [])
        if points:
            coords = " ".join(
                f"{sx(p['bin_center']):.1f},{sy(p['mean_generated_fres']):.1f}" for p in points
            )
            parts.append(
                f'<polyline points="{coords}" fill="none" '
                f'stroke="{_SERIES_COLORS[i % len(_SERIES_COLORS)]}" stroke-width="1.5"/>'
            )
        parts.append(
            f'<text x="{w-margin+4}" y="{margin+12*i+10}" font-size="10" '
            f'fill="{_SERIES_COLORS[i % len(_SERIES_COLORS)]}">target {t}</text>'
        )
    parts.append(
        f'<text x="{w/2:.0f}" y="{h-8}" font-size="11" text-anchor="middle">'
        "source reading ease (binned)</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _heatmap_svg(grid: HeatmapGrid, targets: Sequence[int]) -> str:
    cell, margin = 42, 55
    n = len(targets)
    w = h = margin + n * cell + 15
    values = [v for v in grid.means.values()]
    lo = min(values) if values else 0.0
    hi = max(values) if values else 1.0
    span = (hi - lo) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{margin}" y="14" font-size="11">{grid.variable} '
        "(rows: source class, columns: target class)</text>",
    ]
    for i, src in enumerate(targets):
        parts.append(
            f'<text x="{margin-6}" y="{margin + i*cell + cell/2 + 3:.0f}" '
            f'font-size="10" text-anchor="end">{src}</text>'
        )
        for j, tgt in enumerate(targets):
            x, y = margin + j * cell, margin + i * cell
            mean = grid.means.get((src, tgt))
            if mean is None:
                fill = "white"
            else:
                shade = int(235 - 195 * (mean - lo) / span)
                fill = f"rgb({shade},{shade},255)"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{fill}" stroke="#999"/>'
            )
            if mean is not None:
                parts.append(
                    f'<text x="{x + cell/2:.0f}" y="{y + cell/2 + 3:.0f}" font-size="8" '
                    f'text-anchor="middle">{mean:.1f}</text>'
                )
    for j, tgt in enumerate(targets):
        parts.append(
            f'<text x="{margin + j*cell + cell/2:.0f}" y="{margin-6}" '
            f'font-size="10" text-anchor="middle">{tgt}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
