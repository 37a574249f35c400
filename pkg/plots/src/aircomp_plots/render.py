"""Turn experiment CSV rows into figure images.

A figure spec names the input CSVs, the x/y columns, the grouping keys that
define series, optional row filters, axis scales and panels. Rendering is
deterministic for identical inputs (fixed SVG hash salt, no timestamps).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

plt.rcParams["svg.hashsalt"] = "aircomp-plots"

_SERIES_STYLES = ["o-", "s--", "^-.", "d:", "v-", "p--", "*-.", "x:", "+-", "h--"]


@dataclass(frozen=True)
class FigureSpec:
    """Declarative description of one rendered figure."""

    figure_ref: str
    csv: tuple
    x: str = "sweep_value"
    y: str = "value"
    yerr: str | None = "stderr"
    series_by: tuple = ("mapping",)
    filter: dict = field(default_factory=dict)
    panels: tuple = ()
    xscale: str = "linear"
    yscale: str = "linear"
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    format: str = "svg"
    # overlay helper: {"by": <column>, "reference": <value>} annotates the
    # worst relative deviation of every other curve from the reference curve
    # sharing the remaining series keys (e.g. empirical vs closed form)
    annotate_gap: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "csv", tuple(self.csv))
        object.__setattr__(self, "series_by", tuple(self.series_by))
        object.__setattr__(self, "panels", tuple(self.panels))


@dataclass(frozen=True)
class RenderResult:
    out_path: str
    n_series: int
    n_points: int
    max_gap: float | None = None


def load_figure_spec(source):
    """Load a spec from a JSON path or a bundled name like ``fig5``."""
    path = Path(source)
    if not path.exists() and path.suffix != ".json" and path.name == str(source):
        ref = resources.files("aircomp_plots").joinpath(f"figspecs/{source}.json")
        if not ref.is_file():
            raise ValueError(f"no bundled figure spec named {source!r}")
        obj = json.loads(ref.read_text())
    else:
        try:
            obj = json.loads(path.read_text())
        except FileNotFoundError:
            raise ValueError(f"figure spec not found: {source}")
        except json.JSONDecodeError as err:
            raise ValueError(f"invalid JSON in {source}: {err}")
    return FigureSpec(**obj)


def read_rows(csv_paths):
    rows = []
    header = None
    for path in csv_paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ValueError(f"no data: {path} is empty")
            header = set(reader.fieldnames) if header is None else header & set(reader.fieldnames)
            rows.extend(reader)
    if not rows:
        raise ValueError(f"no data rows in {', '.join(map(str, csv_paths))}")
    return rows, header


def _match(row, flt):
    return all(str(row.get(k, "")) == str(v) for k, v in flt.items())


def _series_groups(rows, spec, panel_filter):
    groups = {}
    for row in rows:
        if not _match(row, spec.filter) or not _match(row, panel_filter):
            continue
        key = tuple(str(row[k]) for k in spec.series_by)
        groups.setdefault(key, []).append(row)
    return groups


def _draw_panel(ax, rows, spec, panel):
    groups = _series_groups(rows, spec, panel.get("filter", {}))
    if not groups:
        raise ValueError(f"no data after filtering for {spec.figure_ref}")
    n_points = 0
    for style, (key, grp) in zip(_SERIES_STYLES * 10, sorted(groups.items())):
        pts = sorted((float(r[spec.x]), r) for r in grp)
        xs = [p[0] for p in pts]
        ys = [float(p[1][spec.y]) for p in pts]
        errs = None
        if spec.yerr and any(p[1].get(spec.yerr) for p in pts):
            errs = [float(p[1][spec.yerr]) if p[1].get(spec.yerr) else 0.0 for p in pts]
        label = ", ".join(key)
        ax.errorbar(xs, ys, yerr=errs, fmt=style, ms=4, lw=1.2, capsize=2, label=label)
        n_points += len(xs)
    ax.set_xscale(panel.get("xscale", spec.xscale))
    ax.set_yscale(panel.get("yscale", spec.yscale))
    ax.set_xlabel(panel.get("xlabel", spec.xlabel))
    ax.set_ylabel(panel.get("ylabel", spec.ylabel))
    if panel.get("title", ""):
        ax.set_title(panel["title"], fontsize=9)
    ax.grid(True, alpha=0.3, ls="--")
    ax.legend(fontsize=7)
    return len(groups), n_points


def render(spec, csv_paths=None, out=None):
    """Render one figure spec to an image file.

    csv_paths overrides the spec's inputs; out defaults to
    ``<figure_ref>.<format>``. Returns a RenderResult with the series count
    of the first panel.
    """
    paths = list(csv_paths) if csv_paths else list(spec.csv)
    if not paths:
        raise ValueError("no input CSVs given")
    rows, header = read_rows(paths)
    needed = {spec.x, spec.y} | set(spec.series_by) | set(spec.filter)
    missing = sorted(needed - header)
    if missing:
        raise ValueError(f"columns missing from CSV header: {', '.join(missing)}")

    panels = list(spec.panels) or [{}]
    fig, axes = plt.subplots(
        1, len(panels), figsize=(4.2 * len(panels), 3.4), squeeze=False, dpi=150
    )
    try:
        n_series = n_points = 0
        max_gap = None
        for i, (ax, panel) in enumerate(zip(axes[0], panels)):
            ns, np_ = _draw_panel(ax, rows, spec, panel)
            if i == 0:
                n_series = ns
            n_points += np_
        if spec.annotate_gap:
            max_gap = _max_relative_gap(rows, spec)
            axes[0][0].text(
                0.02, 0.02,
                f"max gap vs {spec.annotate_gap['reference']}: {max_gap:.2%}",
                transform=axes[0][0].transAxes, fontsize=7,
                bbox={"boxstyle": "round", "fc": "white", "alpha": 0.8},
            )
        if spec.title:
            fig.suptitle(spec.title, fontsize=10)
        fig.tight_layout()
        out_path = str(out) if out else f"{spec.figure_ref}.{spec.format}"
        fmt = out_path.rsplit(".", 1)[-1].lower() if "." in out_path else spec.format
        fig.savefig(out_path, format=fmt, metadata=_stable_metadata(fmt))
    finally:
        plt.close(fig)
    return RenderResult(out_path=out_path, n_series=n_series, n_points=n_points, max_gap=max_gap)


def _max_relative_gap(rows, spec):
    """Worst |other - reference| / |reference| across matching x positions."""
    by, ref_val = spec.annotate_gap["by"], str(spec.annotate_gap["reference"])
    keys = [k for k in spec.series_by if k != by]
    ref, other = {}, {}
    for r in rows:
        if not _match(r, spec.filter):
            continue
        key = tuple(str(r[k]) for k in keys) + (float(r[spec.x]),)
        bucket = ref if str(r[by]) == ref_val else other
        bucket.setdefault(key, []).append(float(r[spec.y]))
    gaps = [
        abs(v - ref[key][0]) / abs(ref[key][0])
        for key, vals in other.items()
        if key in ref and ref[key][0] != 0
        for v in vals
    ]
    if not gaps:
        raise ValueError("gap annotation found no overlapping reference points")
    return max(gaps)


def _stable_metadata(fmt):
    if fmt == "svg":
        return {"Date": None}
    if fmt == "png":
        return {"Software": None}
    return None
