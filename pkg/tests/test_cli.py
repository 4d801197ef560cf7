"""Tests for CSV/schema ingestion, option parsing and the CLI end to end.

The end-to-end tests run each subcommand through ``main(argv)`` on small
synthetic datasets and check the files it leaves behind, including byte
determinism of the result files across thread counts.
"""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import special as sp

from sorted_effects.cli import load_csv, load_schema, main, parse_grid
from sorted_effects.confset import SUMMARY_STATS
from sorted_effects.data import DataError, FACTOR, NUMERIC
from sorted_effects.synth import synth_table, write_synth


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def read_csv_dict(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


# ----------------------------------------------------------------------
# load_csv
# ----------------------------------------------------------------------


def test_load_csv_numeric_and_factor(tmp_path):
    path = write_lines(tmp_path / "d.csv", [
        "y,g,x",
        "1.5,west,0",
        "2.5,east,1",
        "-3,west,2",
        "0.25,north,3",
    ])
    ds, dropped = load_csv(path, factors=("g",))
    assert dropped == 0
    assert ds.n_rows == 4
    assert ds.names == ["y", "g", "x"]
    assert ds.kind("y") == NUMERIC
    assert ds.kind("g") == FACTOR
    # levels in first-appearance order, not alphabetical
    assert ds.levels("g") == ("west", "east", "north")
    assert_array_equal(ds.codes("g"), [0, 1, 0, 2])
    assert_allclose(ds.numeric("y"), [1.5, 2.5, -3.0, 0.25])


def test_load_csv_strips_whitespace(tmp_path):
    path = write_lines(tmp_path / "d.csv", [
        " y , g ",
        " 1 , a ",
        "2, a",
    ])
    ds, _ = load_csv(path, factors=("g",))
    assert ds.names == ["y", "g"]
    assert ds.levels("g") == ("a",)
    assert_allclose(ds.numeric("y"), [1.0, 2.0])


def test_load_csv_missing_cell_names_row_and_column(tmp_path):
    path = write_lines(tmp_path / "d.csv", [
        "y,x",
        "1,2",
        "3,NA",
        "5,6",
    ])
    with pytest.raises(DataError, match=r"row 3, column 'x'"):
        load_csv(path)
    with pytest.raises(DataError, match="drop-na"):
        load_csv(path)


def test_load_csv_drop_na_counts_rows(tmp_path):
    path = write_lines(tmp_path / "d.csv", [
        "y,x",
        "1,2",
        ",4",
        "5,6",
        "7,nan",
    ])
    ds, dropped = load_csv(path, drop_na=True)
    assert dropped == 2
    assert ds.n_rows == 2
    assert_allclose(ds.numeric("y"), [1.0, 5.0])
    assert_allclose(ds.numeric("x"), [2.0, 6.0])


def test_load_csv_all_rows_incomplete(tmp_path):
    path = write_lines(tmp_path / "d.csv", ["y,x", "NA,1", "2,"])
    with pytest.raises(DataError, match="no complete rows"):
        load_csv(path, drop_na=True)


def test_load_csv_duplicate_header(tmp_path):
    path = write_lines(tmp_path / "d.csv", ["y,x,y,x", "1,2,3,4"])
    with pytest.raises(DataError, match=r"\['x', 'y'\]"):
        load_csv(path)


def test_load_csv_ragged_row(tmp_path):
    path = write_lines(tmp_path / "d.csv", [
        "y,x,z",
        "1,2,3",
        "4,5,6,7",
    ])
    with pytest.raises(DataError, match="row 3 has 4 fields, expected 3"):
        load_csv(path)


def test_load_csv_non_numeric_cell(tmp_path):
    path = write_lines(tmp_path / "d.csv", ["y,g", "1,red", "2,blue"])
    with pytest.raises(DataError, match="declare the column as a factor"):
        load_csv(path)
    ds, _ = load_csv(path, factors=("g",))
    assert ds.levels("g") == ("red", "blue")


def test_load_csv_unknown_factor(tmp_path):
    path = write_lines(tmp_path / "d.csv", ["y,x", "1,2"])
    with pytest.raises(DataError, match="declared factor 'g'"):
        load_csv(path, factors=("g",))


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("")
    with pytest.raises(DataError, match="empty file"):
        load_csv(str(path))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_csv(str(tmp_path / "nope.csv"))


# ----------------------------------------------------------------------
# load_schema
# ----------------------------------------------------------------------


def test_load_schema_valid(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"factors": ["g", "h"], "weight": "w"}')
    assert load_schema(str(path)) == {"factors": ["g", "h"], "weight": "w"}


def test_load_schema_defaults(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{}")
    assert load_schema(str(path)) == {"factors": [], "weight": None}


def test_load_schema_rejects_bad_input(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{not json")
    with pytest.raises(DataError, match="invalid JSON"):
        load_schema(str(path))
    path.write_text('["g"]')
    with pytest.raises(DataError, match="JSON object"):
        load_schema(str(path))
    path.write_text('{"factors": "g"}')
    with pytest.raises(DataError, match="'factors' must be a list"):
        load_schema(str(path))
    path.write_text('{"weight": 3}')
    with pytest.raises(DataError, match="'weight' must be a column name"):
        load_schema(str(path))


# ----------------------------------------------------------------------
# parse_grid
# ----------------------------------------------------------------------


def test_parse_grid_range():
    assert_allclose(parse_grid("1:9/10"), np.arange(1, 10) / 10)
    assert_allclose(parse_grid("2:98/100"), np.arange(2, 99) / 100)
    assert parse_grid("5:5/10") == (0.5,)


def test_parse_grid_comma_list():
    assert parse_grid("0.25,0.5,0.75") == (0.25, 0.5, 0.75)
    assert parse_grid(" 0.5 ") == (0.5,)


def test_parse_grid_errors():
    for bad in ("a:b/c", "1:9", "1:9/10/3", "x,y"):
        with pytest.raises(ValueError, match="cannot parse grid"):
            parse_grid(bad)
    for bad in ("9:1/10", "1:9/0"):
        with pytest.raises(ValueError, match="bad grid bounds"):
            parse_grid(bad)


# ----------------------------------------------------------------------
# synthetic benchmark data
# ----------------------------------------------------------------------


def test_synth_linear_ground_truth():
    table = synth_table("linear", 500, seed=3)
    assert list(table) == ["y", "t", "x", "delta_true"]
    assert_array_equal(table["delta_true"], np.full(500, 2.0))
    # y is exactly the stated linear model plus unit-variance noise
    resid = table["y"] - (1.0 + 2.0 * table["t"] - table["x"])
    assert abs(resid.mean()) < 0.2
    assert 0.7 < resid.std() < 1.3


def test_synth_logit_het_ground_truth():
    table = synth_table("logit-het", 800, seed=9)
    assert set(np.unique(table["y"])) <= {0.0, 1.0}
    assert set(np.unique(table["t"])) == {0.0, 1.0}
    assert table["x"].min() >= -2.0 and table["x"].max() <= 2.0
    want = sp.expit(0.5 + 0.75 * table["x"]) - sp.expit(-0.5 + 0.75 * table["x"])
    assert_allclose(table["delta_true"], want, atol=1e-12)


def test_synth_validation():
    with pytest.raises(ValueError, match="unknown dgp"):
        synth_table("cubic", 100)
    with pytest.raises(ValueError, match="at least 2"):
        synth_table("linear", 1)


def test_write_synth_byte_deterministic(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    write_synth(a, "qr-shift", 200, seed=5)
    write_synth(b, "qr-shift", 200, seed=5)
    write_synth(c, "qr-shift", 200, seed=6)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    header, rows = read_csv_dict(a)
    assert header == ["y", "t", "x", "delta_true"]
    assert len(rows) == 200


def test_synth_subcommand(tmp_path):
    out_dir = tmp_path / "synth"
    rc = main(["synth", "--dgp", "linear", "-n", "50", "--seed", "2",
               "--out-dir", str(out_dir)])
    assert rc == 0
    header, rows = read_csv_dict(out_dir / "linear.csv")
    assert header == ["y", "t", "x", "delta_true"]
    assert len(rows) == 50
    assert all(row[3] == "2" for row in rows)

    explicit = tmp_path / "custom.csv"
    rc = main(["synth", "--dgp", "linear", "-n", "50", "--seed", "2",
               "--out", str(explicit)])
    assert rc == 0
    assert explicit.read_bytes() == (out_dir / "linear.csv").read_bytes()


# ----------------------------------------------------------------------
# end-to-end subcommands
# ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def linear_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "linear.csv"
    write_synth(path, "linear", 300, seed=11)
    return str(path)


@pytest.fixture(scope="module")
def het_csv(tmp_path_factory):
    # logistic data whose treatment effect varies with x, so the
    # most/least-affected groups are well separated
    path = tmp_path_factory.mktemp("data") / "het.csv"
    write_synth(path, "logit-het", 400, seed=13)
    return str(path)


def spe_argv(linear_csv, out_dir, extra=()):
    return [
        "spe", "--data", linear_csv, "--fm", "y ~ t + x", "--var", "t",
        "--var-type", "continuous", "-b", "40", "--seed", "7",
        "--out-dir", str(out_dir), *extra,
    ]


def test_spe_end_to_end(linear_csv, tmp_path):
    rc = main(spe_argv(linear_csv, tmp_path))
    assert rc == 0

    header, rows = read_csv_dict(tmp_path / "spe.csv")
    assert header == ["u", "estimate", "se", "lower_pointwise",
                      "upper_pointwise", "lower_uniform", "upper_uniform"]
    assert len(rows) == 9  # default grid 0.1..0.9
    body = np.array(rows, dtype=float)
    assert_allclose(body[:, 0], np.arange(1, 10) / 10)
    # constant-effect model: the curve should sit near the coefficient 2
    assert np.all(np.abs(body[:, 1] - 2.0) < 0.5)
    assert np.all(body[:, 5] <= body[:, 3] + 1e-12)  # uniform wider
    assert np.all(body[:, 4] <= body[:, 6] + 1e-12)

    header, rows = read_csv_dict(tmp_path / "ape.csv")
    assert header == ["estimate", "se", "lower", "upper"]
    ape = float(rows[0][0])
    assert abs(ape - 2.0) < 0.5

    svg = (tmp_path / "spe.svg").read_bytes()
    assert svg.lstrip().startswith(b"<?xml")

    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["command"] == "spe"
    assert meta["config"]["b"] == 40
    assert meta["config"]["seed"] == 7
    assert meta["config"]["var"] == "t"
    assert meta["n_rows"] == 300
    assert meta["n_dropped"] == 0
    assert meta["wall_time_s"] > 0
    assert "diagnostics" in meta


def test_spe_deterministic_across_thread_counts(linear_csv, tmp_path):
    serial, threaded = tmp_path / "serial", tmp_path / "threaded"
    assert main(spe_argv(linear_csv, serial)) == 0
    assert main(spe_argv(linear_csv, threaded,
                         ("--parallel", "--ncores", "3"))) == 0
    for name in ("spe.csv", "ape.csv", "spe.svg"):
        assert (serial / name).read_bytes() == (threaded / name).read_bytes()
    # meta.json is exempt: wall time and thread settings differ
    a = json.loads((serial / "meta.json").read_text())
    b = json.loads((threaded / "meta.json").read_text())
    assert a["crit_uniform"] == b["crit_uniform"]
    assert a["diagnostics"] == b["diagnostics"]


def test_ca_moment_both_end_to_end(het_csv, tmp_path):
    rc = main([
        "ca", "--data", het_csv, "--fm", "y ~ t + x", "--method", "logit",
        "--var", "t", "--t", "x,t", "--u", "0.25",
        "-b", "40", "--seed", "7", "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    header, rows = read_csv_dict(tmp_path / "ca_moments.csv")
    assert header == ["variable", "most", "most_se", "least", "least_se"]
    assert [row[0] for row in rows] == ["x", "t"]
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["command"] == "ca"
    assert meta["config"]["interest"] == "moment"


def test_ca_moment_diff_end_to_end(het_csv, tmp_path):
    rc = main([
        "ca", "--data", het_csv, "--fm", "y ~ t + x", "--method", "logit",
        "--var", "t", "--t", "x", "--cl", "diff",
        "-b", "40", "--seed", "7", "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    header, rows = read_csv_dict(tmp_path / "ca_moments.csv")
    assert header == ["variable", "estimate", "se", "joint_p", "p"]
    assert rows[0][0] == "x"
    # every p-value lands in [0, 1]
    for row in rows:
        assert 0.0 <= float(row[3]) <= 1.0
        assert 0.0 <= float(row[4]) <= 1.0


def test_ca_dist_end_to_end(het_csv, tmp_path):
    rc = main([
        "ca", "--data", het_csv, "--fm", "y ~ t + x", "--method", "logit",
        "--var", "t", "--t", "x", "--interest", "dist",
        "--range-cb", "10:90/100", "-b", "40", "--seed", "7",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    header, rows = read_csv_dict(tmp_path / "ca_dist.csv")
    assert header == ["variable", "point", "most", "most_lower", "most_upper",
                      "least", "least_lower", "least_upper"]
    assert {row[0] for row in rows} == {"x"}
    cdf = np.array([row[2] for row in rows], dtype=float)
    assert np.all(np.diff(cdf) >= -1e-12)
    assert np.all((cdf >= 0.0) & (cdf <= 1.0))
    assert (tmp_path / "ca_dist_x.svg").exists()


def test_subpop_end_to_end(het_csv, tmp_path):
    rc = main([
        "subpop", "--data", het_csv, "--fm", "y ~ t + x", "--method", "logit",
        "--var", "t", "--u", "0.25", "--vars", "x,y",
        "--varx", "x", "--vary", "y", "-b", "40", "--seed", "7",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    for name in ("most", "least"):
        header, rows = read_csv_dict(tmp_path / f"subpop_members_{name}.csv")
        assert header == ["y", "t", "x", "delta_true"]
        assert rows  # outer sets contain at least the estimated tails

    header, rows = read_csv_dict(tmp_path / "subpop_stats.csv")
    assert header[:2] == ["group", "stat"]
    assert set(header[2:]) == {"x", "y"}
    assert [row[0] for row in rows[:6]] == ["most"] * 6
    assert [row[0] for row in rows[6:]] == ["least"] * 6
    assert [row[1] for row in rows[:6]] == list(SUMMARY_STATS)
    assert [row[1] for row in rows[6:]] == list(SUMMARY_STATS)

    assert (tmp_path / "subpop_proj.svg").exists()
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["command"] == "subpop"
    assert meta["crit_most"] >= 0.0
    assert meta["crit_least"] >= 0.0


def test_schema_and_factor_flags(tmp_path):
    table = synth_table("linear", 120, seed=4)
    path = tmp_path / "d.csv"
    with open(path, "w") as fh:
        fh.write("y,t,x,g\n")
        for i in range(120):
            g = "a" if table["x"][i] < 0 else "b"
            fh.write(f"{table['y'][i]:.6f},{table['t'][i]:.6f},"
                     f"{table['x'][i]:.6f},{g}\n")
    schema = tmp_path / "schema.json"
    schema.write_text('{"factors": ["g"], "weight": null}')
    rc = main([
        "spe", "--data", str(path), "--schema", str(schema),
        "--fm", "y ~ t + x + g", "--var", "t", "--var-type", "continuous",
        "-b", "30", "--seed", "5", "--out-dir", str(tmp_path / "out"),
    ])
    assert rc == 0
    assert (tmp_path / "out" / "spe.csv").exists()


# ----------------------------------------------------------------------
# failure reporting
# ----------------------------------------------------------------------


def run_expecting_error(capsys, argv):
    rc = main(argv)
    captured = capsys.readouterr()
    assert rc == 1
    payload = json.loads(captured.err.strip().splitlines()[-1])
    assert set(payload) == {"error", "message"}
    return payload


def test_error_category_data(capsys, tmp_path, linear_csv):
    payload = run_expecting_error(capsys, [
        "spe", "--data", str(tmp_path / "missing.csv"), "--fm", "y ~ t",
        "--var", "t", "--out-dir", str(tmp_path),
    ])
    assert payload["error"] == "data"
    assert "missing.csv" in payload["message"]


def test_error_category_formula(capsys, tmp_path, linear_csv):
    payload = run_expecting_error(capsys, [
        "spe", "--data", linear_csv, "--fm", "y ~ t +", "--var", "t",
        "--out-dir", str(tmp_path),
    ])
    assert payload["error"] == "formula"


def test_error_category_options(capsys, tmp_path, linear_csv):
    payload = run_expecting_error(capsys, [
        "spe", "--data", linear_csv, "--fm", "y ~ t + x", "--var", "t",
        "--var-type", "continuous", "--us", "9:1/10",
        "--out-dir", str(tmp_path),
    ])
    assert payload["error"] == "options"


def test_error_category_model(capsys, tmp_path):
    # perfectly separated logit data cannot be fit
    path = write_lines(tmp_path / "sep.csv", [
        "y,x",
        *(f"{int(i >= 10)},{i}" for i in range(20)),
    ])
    payload = run_expecting_error(capsys, [
        "spe", "--data", path, "--fm", "y ~ x", "--method", "logit",
        "--var", "x", "--var-type", "continuous", "-b", "10",
        "--out-dir", str(tmp_path),
    ])
    assert payload["error"] == "model"


def test_error_unknown_variable(capsys, tmp_path, linear_csv):
    payload = run_expecting_error(capsys, [
        "spe", "--data", linear_csv, "--fm", "y ~ t + nope", "--var", "t",
        "--var-type", "continuous", "--out-dir", str(tmp_path),
    ])
    assert payload["error"] == "formula"
    assert "nope" in payload["message"]
