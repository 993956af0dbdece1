"""Command-line interface: argument handling, outputs, exit codes."""

from __future__ import annotations

import csv
import math

import pytest

from layered_lsh import read_vectors
from layered_lsh.bench import CSV_COLUMNS
from layered_lsh.cli import load_config, main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A generated workload shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    rc = main([
        "gen", "--data", str(root / "data.lshv"), "--queries", str(root / "queries.lshv"),
        "--n", "400", "--nq", "60", "--dim", "8", "--r", "0.3", "--seed", "5",
    ])
    assert rc == 0
    return root


def run_flags(root, extra=()):
    return [
        "--data", str(root / "data.lshv"),
        "--queries", str(root / "queries.lshv"),
        "--k", "6", "--w", "0.5", "--l", "30", "--machines", "8",
        "--seed", "5",
        *extra,
    ]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def columns_without_wall(row):
    wall = CSV_COLUMNS.index("wall_ms")
    return row[:wall] + row[wall + 1 :]


# --- gen ----------------------------------------------------------------------


def test_gen_is_reproducible(workspace, tmp_path, capsys):
    rc = main([
        "gen", "--data", str(tmp_path / "d.lshv"), "--queries", str(tmp_path / "q.lshv"),
        "--n", "400", "--nq", "60", "--dim", "8", "--r", "0.3", "--seed", "5",
    ])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out
    assert (tmp_path / "d.lshv").read_bytes() == (workspace / "data.lshv").read_bytes()
    assert (tmp_path / "q.lshv").read_bytes() == (workspace / "queries.lshv").read_bytes()
    ds = read_vectors(tmp_path / "d.lshv")
    assert ds.n == 400 and ds.dim == 8


# --- run ----------------------------------------------------------------------


def test_run_writes_metrics_and_results(workspace, tmp_path, capsys):
    out = tmp_path / "metrics.csv"
    rc = main(["run", *run_flags(workspace), "--scheme", "layered", "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "layered:" in printed and "recall_cr=" in printed

    rows = read_csv(out)
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 2
    row = dict(zip(CSV_COLUMNS, rows[1]))
    assert row["scheme"] == "layered"
    assert row["n"] == "400" and row["n_q"] == "60"
    assert row["k"] == "6" and row["l"] == "30"
    assert row["probe_self"] == "on"

    results = read_csv(tmp_path / "metrics.csv.results.csv")
    assert results[0] == ["query_id", "point_id", "distance"]
    assert int(row["matches"]) == len(results) - 1


def test_run_appends_to_existing_csv(workspace, tmp_path):
    out = tmp_path / "metrics.csv"
    for scheme in ("simple", "layered"):
        rc = main(["run", *run_flags(workspace), "--scheme", scheme, "--out", str(out)])
        assert rc == 0
    rows = read_csv(out)
    assert len(rows) == 3  # one header, two data rows
    assert rows[1][1] == "simple" and rows[2][1] == "layered"


def test_run_rows_identical_across_threads(workspace, tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["run", *run_flags(workspace), "--threads", "1", "--out", str(out1)]) == 0
    assert main(["run", *run_flags(workspace), "--threads", "8", "--out", str(out2)]) == 0
    r1, r2 = read_csv(out1), read_csv(out2)
    assert columns_without_wall(r1[1]) == columns_without_wall(r2[1])
    # result pairs byte-identical
    assert (tmp_path / "a.csv.results.csv").read_bytes() == (
        tmp_path / "b.csv.results.csv"
    ).read_bytes()


def test_run_results_flag_overrides_default_path(workspace, tmp_path):
    res = tmp_path / "pairs.csv"
    rc = main([
        "run", *run_flags(workspace), "--out", str(tmp_path / "m.csv"),
        "--results", str(res),
    ])
    assert rc == 0
    assert res.exists()
    assert not (tmp_path / "m.csv.results.csv").exists()


# --- config files ---------------------------------------------------------------


def test_config_file_and_flag_precedence(workspace, tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        "# benchmark defaults\n"
        f"data={workspace / 'data.lshv'}\n"
        f"queries={workspace / 'queries.lshv'}\n"
        "k=6\nw=0.5\nl=30\nmachines=8\nseed=5\n"
        "scheme=layered\nprobe-self=on\n"
    )
    out_cfg = tmp_path / "from_config.csv"
    rc = main(["run", "--config", str(cfg), "--out", str(out_cfg)])
    assert rc == 0
    out_flags = tmp_path / "from_flags.csv"
    rc = main(["run", *run_flags(workspace), "--scheme", "layered", "--out", str(out_flags)])
    assert rc == 0
    assert columns_without_wall(read_csv(out_cfg)[1]) == columns_without_wall(
        read_csv(out_flags)[1]
    )

    # a flag beats the config value
    out_override = tmp_path / "override.csv"
    rc = main(["run", "--config", str(cfg), "--k", "4", "--out", str(out_override)])
    assert rc == 0
    assert dict(zip(CSV_COLUMNS, read_csv(out_override)[1]))["k"] == "4"


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("k=6\njust words\n")
    with pytest.raises(Exception) as err:
        load_config(bad)
    assert "2" in str(err.value)  # line number in the message


# --- sweep ----------------------------------------------------------------------


def test_sweep_csv_layout_and_fanout_trend(workspace, tmp_path):
    out = tmp_path / "sweep.csv"
    k = 6
    grid = f"{math.sqrt(k)},{2 * math.sqrt(k)},{4 * math.sqrt(k)}"
    rc = main([
        "sweep", *run_flags(workspace), "--sweep", "dparam", "--grid", grid,
        "--out", str(out),
    ])
    assert rc == 0
    rows = read_csv(out)
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 7  # 3 grid values x 2 schemes
    layered = [dict(zip(CSV_COLUMNS, r)) for r in rows[1:] if r[1] == "layered"]
    assert len(layered) == 3
    fanouts = [float(row["mean_f_q"]) for row in layered]
    assert fanouts == sorted(fanouts, reverse=True)
    # the simple scheme ignores the outer width entirely
    simple = [dict(zip(CSV_COLUMNS, r)) for r in rows[1:] if r[1] == "simple"]
    assert len({row["query_messages"] for row in simple}) == 1


def test_sweep_is_deterministic(workspace, tmp_path):
    args = [
        "sweep", *run_flags(workspace), "--sweep", "l", "--grid", "10,30",
    ]
    out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    assert main([*args, "--threads", "1", "--out", str(out1)]) == 0
    assert main([*args, "--threads", "4", "--out", str(out2)]) == 0
    r1, r2 = read_csv(out1), read_csv(out2)
    assert [columns_without_wall(r) for r in r1[1:]] == [
        columns_without_wall(r) for r in r2[1:]
    ]


# --- tune-d ---------------------------------------------------------------------


def test_tune_d_reports_best_width(workspace, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    rc = main([
        "tune-d", *run_flags(workspace), "--iters", "3", "--out", str(out),
    ])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "best dparam" in printed
    rows = read_csv(out)
    assert rows[0][0] == "step"
    objectives = {float(r[1]): float(r[2]) for r in rows[1:]}
    best = float(printed.split("best dparam ")[1].split(" ")[0])
    assert objectives[best] == min(objectives.values())
    # default bracket endpoints were evaluated
    lo, hi = math.sqrt(6) / 4, 8 * math.sqrt(6)
    assert min(objectives) == pytest.approx(lo)
    assert max(objectives) == pytest.approx(hi)


# --- exit codes -----------------------------------------------------------------


def test_exit_code_for_missing_file(workspace, tmp_path, capsys):
    rc = main([
        "run", "--data", str(tmp_path / "absent.lshv"),
        "--queries", str(workspace / "queries.lshv"), "--out", str(tmp_path / "m.csv"),
    ])
    assert rc == 3
    assert "error" in capsys.readouterr().err


def test_exit_code_for_bad_parameters(workspace, tmp_path, capsys):
    rc = main(["run", *run_flags(workspace), "--k", "0", "--out", str(tmp_path / "m.csv")])
    assert rc == 2
    assert "parameter error" in capsys.readouterr().err
    rc = main(["run", *run_flags(workspace)])  # no --out
    assert rc == 2


def test_exit_code_for_malformed_vectors(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.lshv"
    bad.write_bytes(b"not a vector file")
    rc = main([
        "run", "--data", str(bad), "--queries", str(workspace / "queries.lshv"),
        "--out", str(tmp_path / "m.csv"),
    ])
    assert rc == 3
    err = capsys.readouterr().err
    assert "format error" in err
    assert "byte offset" in err
