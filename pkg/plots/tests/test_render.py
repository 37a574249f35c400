"""Render every bundled figure spec from its experiment's CSV output.

The experiment configs come from the aircomp package and are executed at
reduced trial counts so the whole pipeline (config -> CSV -> image) runs in
seconds; the CSV schema is identical to the full-scale runs.
"""

import csv
import json

import pytest

from aircomp import cli as aircomp_cli
from aircomp_plots import load_figure_spec, render
from aircomp_plots.cli import main as plots_main

FIGURES = [f"fig{i}" for i in range(2, 14)]


@pytest.fixture(scope="session")
def csv_dir(tmp_path_factory):
    """One reduced-scale CSV per bundled experiment config."""
    out = tmp_path_factory.mktemp("csv")
    for name in FIGURES:
        cfg = aircomp_cli.load_config(name)
        sub = cfg["subcommand"]
        args = [sub, "--config", name, "--out", str(out / f"{name}.csv")]
        if sub in ("simulate", "mv"):
            args += ["--trials", "400"]
        elif sub == "fl":
            args += ["--trials", "3", "--rounds", "30"]
        assert aircomp_cli.main(args) == 0, name
    return out


@pytest.mark.parametrize("name", FIGURES)
def test_bundled_spec_renders(name, csv_dir, tmp_path):
    spec = load_figure_spec(name)
    out = tmp_path / f"{name}.svg"
    result = render(spec, csv_paths=[csv_dir / f"{name}.csv"], out=out)
    assert out.exists() and out.stat().st_size > 0
    assert result.n_series >= 1 and result.n_points >= 1


def test_fig5_has_exactly_four_series(csv_dir, tmp_path):
    result = render(
        load_figure_spec("fig5"),
        csv_paths=[csv_dir / "fig5.csv"],
        out=tmp_path / "fig5.svg",
    )
    assert result.n_series == 4


def test_render_is_deterministic(csv_dir, tmp_path):
    paths = []
    for tag in ("a", "b"):
        out = tmp_path / f"fig3-{tag}.svg"
        render(load_figure_spec("fig3"), csv_paths=[csv_dir / "fig3.csv"], out=out)
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_missing_column_is_an_error(tmp_path):
    bad = tmp_path / "bad.csv"
    with open(bad, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep_value", "value"])
        writer.writerow([1.0, 2.0])
    with pytest.raises(ValueError, match="columns missing"):
        render(load_figure_spec("fig5"), csv_paths=[bad], out=tmp_path / "x.svg")


def test_empty_csv_is_an_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="no data"):
        render(load_figure_spec("fig5"), csv_paths=[empty], out=tmp_path / "x.svg")
    header_only = tmp_path / "header.csv"
    header_only.write_text(",".join(aircomp_cli.CSV_COLUMNS) + "\n")
    with pytest.raises(ValueError, match="no data"):
        render(load_figure_spec("fig5"), csv_paths=[header_only], out=tmp_path / "x.svg")


def test_filtered_out_everything_is_an_error(csv_dir, tmp_path):
    spec = load_figure_spec("fig5")
    bad = type(spec)(**{**spec.__dict__, "filter": {"mapping": "nonexistent"}})
    with pytest.raises(ValueError, match="no data after filtering"):
        render(bad, csv_paths=[csv_dir / "fig5.csv"], out=tmp_path / "x.svg")


def test_cli_end_to_end(csv_dir, tmp_path, capsys):
    out = tmp_path / "fig9.svg"
    rc = plots_main(["--spec", "fig9", "--csv", str(csv_dir / "fig9.csv"), "--out", str(out)])
    assert rc == 0 and out.exists()
    assert "2 series" in capsys.readouterr().out
    rc = plots_main(["--spec", "nope", "--csv", str(csv_dir / "fig9.csv")])
    assert rc == 2


def test_theory_empirical_overlay_with_gap_annotation(tmp_path):
    grid = "100,1000,10000,100000"
    theory_csv = tmp_path / "theory.csv"
    emp_csv = tmp_path / "emp.csv"
    assert aircomp_cli.main(["theory", "--table", "2", "--K", "10", "--M", "1", "--L", "2",
                             "--beta-grid", grid, "--out", str(theory_csv)]) == 0
    assert aircomp_cli.main(["simulate", "--config", "fig4", "--out", str(emp_csv),
                             "--trials", "20000"]) == 0
    spec = load_figure_spec(str(_overlay_spec(tmp_path)))
    result = render(spec, csv_paths=[theory_csv, emp_csv], out=tmp_path / "overlay.svg")
    assert result.n_series == 4  # (sc, affine/aa) x (theory, raw) at M = 1
    assert result.max_gap is not None and 0 < result.max_gap < 0.10
    # annotation agrees with the harness's own deviation computation
    from aircomp.montecarlo import compare_to_theory
    import aircomp.theory as th

    rows = [r for r in csv.DictReader(open(emp_csv)) if r["csi"] == "sc"]
    refs = [
        th.total_mse_x("sc", r["mapping"], 10, 1, 2,
                       (1 if r["mapping"] == "affine" else 0.5) / float(r["beta"]))
        for r in rows
    ]

    class Rec:
        def __init__(self, v):
            self.value = float(v)

    _, worst = compare_to_theory([Rec(r["value"]) for r in rows], refs)
    assert result.max_gap == pytest.approx(worst, rel=1e-12)


def _overlay_spec(tmp_path):
    spec = {
        "figure_ref": "overlay",
        "csv": [],
        "series_by": ["mapping", "estimator"],
        "filter": {"csi": "sc", "M": "1"},
        "annotate_gap": {"by": "estimator", "reference": "theory"},
        "xscale": "log", "yscale": "log",
    }
    path = tmp_path / "overlay.json"
    path.write_text(json.dumps(spec))
    return path


def test_spec_json_fields_exist_in_schema():
    # every grouping key a bundled spec uses must exist in the CSV schema
    fl_columns = set(aircomp_cli.FL_CSV_COLUMNS)
    flat_columns = set(aircomp_cli.CSV_COLUMNS)
    for name in FIGURES:
        spec = load_figure_spec(name)
        cols = fl_columns if name == "fig13" else flat_columns
        assert set(spec.series_by) <= cols, name
        assert spec.x in cols and spec.y in cols, name
