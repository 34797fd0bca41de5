"""Tests for manifests, the operation registry, reports, and the CLI."""

import json

import pytest
from click.testing import CliRunner

from schurmult.bench import (
    DEFAULTS,
    ExperimentManifest,
    built_in_manifest,
    manifest_from_json,
    parse_graph,
    run_manifest,
    write_reports,
)
from schurmult.cli import main
from schurmult.medgraph import cayley_ball


def small_manifest(op, grid, **kw):
    return ExperimentManifest("t", op, tuple(grid), **kw)


# ---------------------------------------------------------------- manifests


def test_manifest_rejects_unknown_operation():
    with pytest.raises(ValueError, match="unknown operation"):
        small_manifest("hankel.no_such_op", [])


def test_manifest_rejects_bad_sizes():
    with pytest.raises(ValueError, match="strictly increasing"):
        small_manifest("hankel.rank_one_geom", [], sizes=(64, 64, 128))
    with pytest.raises(ValueError, match="strictly increasing"):
        small_manifest("hankel.rank_one_geom", [], sizes=(256, 128))


def test_manifest_rejects_unknown_symbol():
    row = {"symbol": "NOT_A_SYMBOL", "level": 1, "tag": "A"}
    with pytest.raises(ValueError, match="unknown symbol"):
        small_manifest("hankel.s1_estimate", [row])


def test_manifest_round_trip_from_json():
    text = json.dumps({
        "experiment": "demo",
        "operation": "hankel.rank_one_geom",
        "grid": [{"level": 1, "r": 0.5, "K": 40}],
        "sizes": [32, 64],
        "tol": 1e-9,
        "seed": 7,
    })
    m = manifest_from_json(text)
    assert m.operation == "hankel.rank_one_geom"
    assert m.sizes == (32, 64)
    assert m.tol == 1e-9 and m.seed == 7
    assert m.grid[0]["r"] == 0.5


def test_built_in_manifests_exist():
    assert len(built_in_manifest("inclusions").grid) == 36
    assert len(built_in_manifest("geom-norms").grid) == 9
    with pytest.raises(ValueError):
        built_in_manifest("nope")


# ---------------------------------------------------------------- graph exprs


def test_parse_graph_tree_ball_sizes():
    assert parse_graph("T3ball(2)").size == 10
    assert parse_graph("T4ball(1)").size == 5
    assert parse_graph(" T3ball( 2 ) ".replace(" ", "")).size == 10


def test_parse_graph_product_and_cayley():
    g = parse_graph("product(T3ball(1), T3ball(1))")
    assert g.size == 16
    assert parse_graph("cayley(2)").size == cayley_ball(2).size


def test_parse_graph_errors():
    for expr in ("noparens", "foo(2)", "T2ball(1)", "product()"):
        with pytest.raises(ValueError):
            parse_graph(expr)


# ---------------------------------------------------------------- running


def test_geom_norms_rows_all_match(tmp_path):
    result = run_manifest(built_in_manifest("geom-norms"), out_dir=tmp_path)
    assert result.exit_code == 0
    assert len(result.rows) == 9
    for row in result.rows:
        assert row.verdicts["agreement"] == "MATCH"
        assert row.values["error"] <= DEFAULTS["tol"]
    assert result.csv_path.exists() and result.json_path.exists()


def test_csv_report_is_byte_identical(tmp_path):
    manifest = built_in_manifest("geom-norms")
    a = run_manifest(manifest, out_dir=tmp_path / "a")
    b = run_manifest(manifest, out_dir=tmp_path / "b")
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()


def test_json_report_records_settings(tmp_path):
    result = run_manifest(built_in_manifest("geom-norms"), out_dir=tmp_path)
    payload = json.loads(result.json_path.read_text())
    assert payload["defaults"]["sizes"] == list(DEFAULTS["sizes"])
    assert payload["seed"] == 0
    assert payload["exit_code"] == 0
    assert all("wall_time" in row for row in payload["rows"])


def test_mismatch_row_fails_run(tmp_path):
    grid = ({"level": 1, "r": 0.9, "K": 3},)   # truncation error ~0.9^8
    manifest = small_manifest("hankel.rank_one_geom", grid, tol=1e-12)
    result = run_manifest(manifest, out_dir=tmp_path)
    assert result.exit_code == 1
    assert result.rows[0].status == "fail"
    assert result.rows[0].verdicts["agreement"] == "MISMATCH"


def test_refusal_row_is_error_not_fail():
    # uncentered symbol: the witness builder refuses, the run does not "fail"
    grid = ({"symbol": "PARITY", "params": [], "N": 1, "radius": 2, "K": 8},)
    result = run_manifest(small_manifest("mlab.tree_product_witness", grid))
    assert result.exit_code == 0
    assert result.rows[0].status == "error"
    assert "split_radial" in result.rows[0].message


def test_broken_tail_row_is_assertion_fail():
    grid = ({"symbol": "GEOM", "params": [0.9], "N": 1, "radius": 2,
             "K": 8, "j_tail": 2},)
    result = run_manifest(small_manifest("mlab.tree_product_witness", grid,
                                         tol=1e-6))
    assert result.exit_code == 1
    assert result.rows[0].status == "fail"


def test_jobs_env_is_respected(tmp_path, monkeypatch):
    monkeypatch.setenv("WORKBENCH_JOBS", "2")
    result = run_manifest(built_in_manifest("geom-norms"), out_dir=tmp_path)
    assert result.exit_code == 0
    # parallel execution must not reorder rows
    levels = [row.params["level"] for row in result.rows]
    assert levels == sorted(levels)


def test_write_reports_table_symbol(tmp_path):
    # complex table entries must survive the CSV and JSON writers
    grid = ({"symbol": "TABLE", "params": [[0.0, 0.5j, 0.25], "ZERO"],
             "level": 1, "tag": "A"},)
    result = run_manifest(small_manifest("hankel.s1_estimate", grid,
                                         sizes=(16, 32)))
    assert result.rows[0].status == "ok"
    csv_path, json_path = write_reports(result, tmp_path)
    header = csv_path.read_text().splitlines()[0]
    assert "estimate" in header and "status" in header
    payload = json.loads(json_path.read_text())
    assert payload["rows"][0]["params"]["params"][0][1] == [0.0, 0.5]


# ---------------------------------------------------------------- cli


def invoke(*args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


def test_cli_classes_verdict_line():
    res = invoke("classes", "--symbol", "ALT_POWER", "--params", "alpha=2.5",
                 "--n", "2", "--class", "B")
    assert res.exit_code == 0
    assert "CONVERGENT" in res.output


def test_cli_norms_match():
    res = invoke("norms", "--n", "2", "--params", "r=0.9")
    assert res.exit_code == 0
    assert "MATCH" in res.output


def test_cli_graphs_serre():
    res = invoke("graphs", "--check", "serre", "--r", "2")
    assert res.exit_code == 0
    assert "doubling=PASS" in res.output and "partition=PASS" in res.output


def test_cli_sdp_emits_json():
    res = invoke("sdp", "--graph", "T3ball(1)", "--symbol", "GEOM",
                 "--params", "r=0.5", "--tol", "1e-3")
    assert res.exit_code == 0
    payload = json.loads(res.output)
    assert payload["upper"] - payload["lower"] <= 1e-3 + 1e-12
    assert payload["witness"]["reproduction_error"] <= 1e-8


def test_cli_witness_tail_and_reproduction():
    res = invoke("witness", "--symbol", "GEOM", "--params", "r=0.5",
                 "--n", "1", "--radius", "2", "--k", "12")
    assert res.exit_code == 0
    payload = json.loads(res.output)
    assert payload["reproduction_error"] <= payload["tail_bound"] + 1e-9


def test_cli_run_writes_reports(tmp_path):
    res = invoke("run", "geom-norms", "--out", str(tmp_path))
    assert res.exit_code == 0
    assert (tmp_path / "geom-norms.csv").exists()
    assert (tmp_path / "geom-norms.json").exists()


def test_cli_run_manifest_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({
        "experiment": "file-demo",
        "operation": "hankel.rank_one_geom",
        "grid": [{"level": 1, "r": 0.5, "K": 40}],
        "out": "file-demo",
    }))
    res = invoke("run", str(path), "--out", str(tmp_path))
    assert res.exit_code == 0
    assert (tmp_path / "file-demo.csv").exists()


def test_cli_usage_errors_exit_two():
    runner = CliRunner()
    assert runner.invoke(main, ["classes"]).exit_code == 2
    assert runner.invoke(main, ["run", "no-such-manifest"]).exit_code == 2
    assert runner.invoke(
        main, ["sdp", "--graph", "foo(1)", "--symbol", "GEOM",
               "--params", "r=0.5"]).exit_code == 2


def test_cli_failing_row_exits_one(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({
        "experiment": "bad",
        "operation": "hankel.rank_one_geom",
        "grid": [{"level": 1, "r": 0.9, "K": 3}],
        "tol": 1e-12,
        "out": "bad",
    }))
    res = CliRunner().invoke(main, ["run", str(path), "--out", str(tmp_path)])
    assert res.exit_code == 1
