import csv
import io
import json
import math
import subprocess
import sys
from importlib.resources import files

import jsonschema
import pytest

from critballs import __version__, cli
from critballs.cli import format_number, main
from critballs.errors import ConvergenceError

SCHEMA = json.loads(files("critballs").joinpath("envelope.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def envelope(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    return doc


def column(doc, name):
    i = doc["payload"]["columns"].index(name)
    return [row[i] for row in doc["payload"]["rows"]]


# -- volume and threshold -------------------------------------------------------------------


def test_volume_schatten2_example(capsys):
    doc = envelope(capsys, "volume", "--family", "schatten", "--p", "2", "--beta", "2", "--n", "3")
    target = 4.5 * math.log(math.pi) - math.lgamma(5.5)
    assert column(doc, "log_volume")[0] == pytest.approx(target, rel=1e-14)
    assert doc["tool"] == "critballs" and doc["version"] == __version__
    assert doc["config"]["subcommand"] == "volume"


def test_volume_cube_example(capsys):
    doc = envelope(capsys, "volume", "--family", "lp", "--p", "inf", "--n", "7")
    assert column(doc, "log_volume")[0] == pytest.approx(7 * math.log(2), rel=1e-14)
    assert doc["config"]["parameters"]["p"] == "inf"


def test_volume_interval_example(capsys):
    doc = envelope(capsys, "volume", "--family", "schatten", "--p", "inf", "--beta", "1", "--n", "1")
    assert column(doc, "log_volume")[0] == pytest.approx(math.log(2), rel=1e-14)
    assert column(doc, "expansion_residual")[0] is None


def test_volume_range_is_inclusive(capsys):
    doc = envelope(capsys, "volume", "--family", "lp", "--p", "1.5", "--n-range", "2:10:4")
    assert column(doc, "n") == [2, 6, 10]


@pytest.mark.parametrize("argv", [
    ["volume", "--family", "schatten", "--p", "3", "--beta", "2", "--n", "3"],
    ["volume", "--family", "lp", "--p", "2", "--beta", "2", "--n", "3"],
    ["volume", "--family", "lp", "--p", "0.5", "--n", "3"],
    ["volume", "--family", "lp", "--p", "2", "--n", "3", "--precision", "5"],
    ["volume", "--family", "lp", "--p", "2", "--n", "3", "--precision", "18"],
    ["volume", "--family", "lp", "--p", "2", "--n", "3", "--bogus"],
    ["volume", "--family", "lp", "--p", "2", "--n", "3", "--prec", "8"],
    ["threshold", "--family", "lp", "--p", "2", "--q", "3"],
    ["intersect", "--family", "lp", "--p", "2", "--q", "1", "--n", "5", "--t", "1", "--samples", "99"],
    ["intersect", "--family", "schatten", "--p", "inf", "--q", "2", "--beta", "2", "--n", "5",
     "--t", "1", "--samples", "200"],
    ["tw-table", "--beta", "2", "--at", "9"],
    ["gumbel", "--p", "1", "--n", "2", "--samples", "200"],
    ["clt", "--beta", "2", "--n", "9", "--samples", "200"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == "" and err


@pytest.mark.parametrize("exc", [ConvergenceError("no bracket"), MemoryError(), FloatingPointError()])
def test_runtime_errors_exit_3(capsys, monkeypatch, exc):
    def fail(*args, **kwargs):
        raise exc

    monkeypatch.setattr(cli, "intersection_scan", fail)
    code, out, err = run(capsys, "intersect", "--family", "lp", "--p", "2", "--q", "1", "--n", "5",
                         "--t", "1", "--samples", "200")
    assert code == 3 and out == "" and err


@pytest.mark.parametrize("argv,value", [
    (["--family", "lp", "--p", "1", "--q", "inf"], math.exp(-1)),
    (["--family", "schatten", "--p", "2", "--q", "inf", "--beta", "2"], math.exp(0.25)),
    (["--family", "schatten", "--p", "3", "--q", "3", "--beta", "4"], 1.0),
])
def test_threshold_examples(capsys, argv, value):
    doc = envelope(capsys, "threshold", *argv)
    assert column(doc, "threshold")[0] == pytest.approx(value, rel=1e-14)
    assert column(doc, "provenance")[0]


# -- stochastic commands -------------------------------------------------------------------------


def test_intersect_identical_balls(capsys):
    doc = envelope(capsys, "intersect", "--family", "lp", "--p", "2", "--q", "2", "--n", "20",
                   "--t", "1", "--samples", "500", "--seed", "3")
    assert column(doc, "value") == [1] and column(doc, "stderr") == [0]
    assert column(doc, "seed") == [3] and doc["config"]["seed"] == 3


INTERSECT = ["intersect", "--family", "lp", "--p", "1", "--q", "inf", "--n-range", "50:150:50",
             "--t-grid", "0.3:0.45:0.05", "--log-dilate", "--samples", "2000"]


def test_same_seed_is_byte_identical(capsys):
    a = run(capsys, *INTERSECT, "--seed", "11")[1]
    b = run(capsys, *INTERSECT, "--seed", "11")[1]
    assert a == b


def test_thread_count_does_not_change_output(capsys):
    ref = run(capsys, *INTERSECT, "--seed", "12", "--threads", "1")[1]
    for k in ("2", "8"):
        assert run(capsys, *INTERSECT, "--seed", "12", "--threads", k)[1] == ref


def test_different_seeds_agree_within_sampling_error(capsys):
    a = json.loads(run(capsys, *INTERSECT, "--seed", "1")[1])
    b = json.loads(run(capsys, *INTERSECT, "--seed", "2")[1])
    assert column(a, "value") != column(b, "value")
    for va, sa, vb, sb in zip(column(a, "value"), column(a, "stderr"),
                              column(b, "value"), column(b, "stderr")):
        assert abs(va - vb) <= 6 * math.hypot(sa, sb) + 1e-12


def test_intersect_gumbel_prediction_column(capsys):
    doc = envelope(capsys, *INTERSECT, "--seed", "4")
    pred, val = column(doc, "gumbel_prediction"), column(doc, "value")
    assert all(0 <= p <= 1 for p in pred)
    assert max(abs(p - v) for p, v in zip(pred, val)) < 0.1


def test_tw_table_example(capsys):
    doc = envelope(capsys, "tw-table", "--beta", "2", "--at", "0")
    assert column(doc, "F2")[0] == pytest.approx(0.969373, abs=5e-4)


def test_tw_table_all_betas(capsys):
    doc = envelope(capsys, "tw-table", "--x-min", "-2", "--x-max", "2", "--step", "0.5")
    assert doc["payload"]["columns"] == ["x", "F1", "F2", "F4"]
    assert column(doc, "x") == [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2]
    for name in ("F1", "F2", "F4"):
        F = column(doc, name)
        assert all(a < b for a, b in zip(F, F[1:]))


def test_independence_summary(capsys):
    doc = envelope(capsys, "independence", "--beta", "2", "--n", "40", "--samples", "1000",
                   "--threads", "4")
    summary = doc["payload"]["summary"]
    gaps = column(doc, "gap")
    assert summary["max_abs_gap"] == pytest.approx(max(abs(g) for g in gaps), rel=1e-12)
    assert summary["count"] == 1000 and summary["beta"] == 2


def test_gumbel_command(capsys):
    doc = envelope(capsys, "gumbel", "--p", "1", "--n", "1000", "--samples", "2000")
    assert column(doc, "ks")[0] < 0.06
    assert column(doc, "gumbel_cdf_at_0")[0] == pytest.approx(math.exp(-1), rel=1e-14)


def test_clt_command_against_radial_law(capsys):
    doc = envelope(capsys, "clt", "--beta", "4", "--n", "100", "--samples", "2000")
    mean, se = column(doc, "mean")[0], column(doc, "stderr")[0]
    d = 100 * 199
    exact = 100 * (math.exp(math.lgamma((d + 1) / 2) - math.lgamma(d / 2)) / 200 - 0.5)
    assert abs(mean - exact) <= 4 * se
    assert column(doc, "radial_law_mean")[0] == pytest.approx(-0.125)


# -- formatting ----------------------------------------------------------------------------------


def test_csv_layout(capsys):
    code, out, _ = run(capsys, "volume", "--family", "lp", "--p", "2", "--n-range", "1:3",
                       "--format", "csv")
    assert code == 0
    assert "\r" not in out and out.endswith("\n")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:3] == ["n", "dimension", "log_volume"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]


def test_csv_carries_summary_columns(capsys):
    code, out, _ = run(capsys, "independence", "--beta", "2", "--n", "20", "--samples", "200",
                       "--format", "csv")
    header = next(csv.reader(io.StringIO(out)))
    assert "max_abs_gap" in header and "gap" in header


@pytest.mark.parametrize("digits", [6, 9, 15, 17])
def test_round_trip_at_precision(capsys, digits):
    doc = envelope(capsys, "volume", "--family", "lp", "--p", "1.7", "--n-range", "1:20",
                   "--precision", str(digits))
    for row in doc["payload"]["rows"]:
        for v in row:
            if isinstance(v, float):
                assert format_number(v, digits) == repr(v) or float(format_number(v, digits)) == v


def test_precision_limits_significant_digits(capsys):
    doc = envelope(capsys, "volume", "--family", "lp", "--p", "2", "--n", "5", "--precision", "6")
    v = column(doc, "log_volume")[0]
    assert v == float(f"{math.log(8 * math.pi**2 / 15):.6g}")


def test_format_number_edge_cases():
    assert format_number(math.nan, 15) == "null"
    assert format_number(-0.0, 15) == "0"
    assert format_number(3, 15) == "3"
    assert format_number(0.1, 17) == "0.10000000000000001"


def test_out_writes_file(capsys, tmp_path):
    target = tmp_path / "vol.json"
    code, out, _ = run(capsys, "volume", "--family", "lp", "--p", "2", "--n", "4", "--out", str(target))
    assert code == 0 and out == ""
    doc = json.loads(target.read_text())
    jsonschema.validate(doc, SCHEMA)
    assert doc["config"]["out"] == str(target)


def test_timestamp_is_fixed_by_default(capsys):
    doc = envelope(capsys, "threshold", "--family", "lp", "--p", "1", "--q", "inf")
    assert doc["timestamp"] == "1970-01-01T00:00:00Z"
    doc = envelope(capsys, "threshold", "--family", "lp", "--p", "1", "--q", "inf", "--timestamp", "now")
    assert doc["timestamp"] != "1970-01-01T00:00:00Z"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "critballs", "threshold", "--family", "lp",
                           "--p", "inf", "--q", "inf"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stderr == ""
    assert json.loads(proc.stdout)["payload"]["rows"][0][4] == 1
    proc = subprocess.run([sys.executable, "-m", "critballs", "--nope"], capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stdout == ""
