"""Tests for the command-line interface and its file formats."""

import io
import json
import math

import numpy as np
import pytest

from discoverci.cli import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_NO_VALID_GRAPHS,
    EXIT_OK,
    build_panels,
    format_tier_spec,
    main,
    parse_forbidden_edges,
    parse_required_adjacencies,
    parse_tier_spec,
    read_data_csv,
    render_panel_svg,
    resolve_column,
    write_data_csv,
)
from discoverci.exceptions import ConfigError, DataError
from discoverci.graphs import MixedGraph, TierOrder, parse_edge_list, write_edge_list
from discoverci.simulation import BENCH_CSV_COLUMNS, read_bench_csv
from discoverci.stats import DataMatrix

NAMES = ("alpha", "beta", "gamma")


def chain_matrix(n=400, seed=7) -> DataMatrix:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n)
    b = 0.8 * a + rng.standard_normal(n)
    c = 0.7 * b + rng.standard_normal(n)
    return DataMatrix(np.column_stack([a, b, c]), NAMES)


def write_chain_csv(path) -> None:
    with open(path, "w", newline="") as fh:
        write_data_csv(chain_matrix(), fh)


# ---------------------------------------------------------------------------
# dataset CSV
# ---------------------------------------------------------------------------


def test_data_csv_roundtrip_exact():
    rng = np.random.default_rng(0xD15CB)
    x = DataMatrix(rng.standard_normal((40, 4)) * 10.0 ** rng.integers(-8, 8, (40, 4)))
    buf = io.StringIO()
    write_data_csv(x, buf)
    back = read_data_csv(io.StringIO(buf.getvalue()))
    assert back.names == x.names
    assert np.array_equal(back.values, x.values)


def test_data_csv_malformed_cell_names_row_and_column():
    with pytest.raises(DataError, match=r"row 3, column 'b'"):
        read_data_csv(io.StringIO("a,b,c\n1,2,3\n4,oops,6\n"))


def test_data_csv_ragged_row():
    with pytest.raises(DataError, match="row 2"):
        read_data_csv(io.StringIO("a,b,c\n1,2\n"))


def test_data_csv_non_finite_cell():
    with pytest.raises(DataError, match=r"row 2, column 'a'"):
        read_data_csv(io.StringIO("a,b\ninf,2\n3,4\n"))


def test_data_csv_needs_rows_and_columns():
    with pytest.raises(DataError):
        read_data_csv(io.StringIO(""))
    with pytest.raises(DataError):
        read_data_csv(io.StringIO("only\n1\n2\n"))
    with pytest.raises(DataError):
        read_data_csv(io.StringIO("a,b\n1,2\n"))


def test_read_data_csv_missing_file(tmp_path):
    with pytest.raises(DataError):
        read_data_csv(str(tmp_path / "nope.csv"))


# ---------------------------------------------------------------------------
# spec parsing
# ---------------------------------------------------------------------------


def test_resolve_column_by_name_and_index():
    assert resolve_column("beta", NAMES) == 1
    assert resolve_column(" 2 ", NAMES) == 2
    with pytest.raises(ConfigError, match="unknown variable"):
        resolve_column("delta", NAMES)
    with pytest.raises(ConfigError):
        resolve_column("7", NAMES)


def test_parse_tier_spec():
    t = parse_tier_spec("alpha,beta:1;gamma:2", NAMES)
    assert t.tiers == (1, 1, 2)
    # order inside the spec does not matter
    assert parse_tier_spec("gamma:2;beta:1;alpha:1", NAMES).tiers == (1, 1, 2)


def test_parse_tier_spec_errors():
    with pytest.raises(ConfigError, match="misses columns"):
        parse_tier_spec("alpha:1;beta:1", NAMES)
    with pytest.raises(ConfigError, match="two tiers"):
        parse_tier_spec("alpha:1;alpha,beta,gamma:2", NAMES)
    with pytest.raises(ConfigError, match="not an integer"):
        parse_tier_spec("alpha,beta,gamma:x", NAMES)
    with pytest.raises(ConfigError, match="missing"):
        parse_tier_spec("alpha,beta,gamma", NAMES)
    with pytest.raises(ConfigError, match="positive"):
        parse_tier_spec("alpha,beta,gamma:0", NAMES)


def test_format_tier_spec_roundtrip():
    spec = format_tier_spec(TierOrder((2, 1, 2)), NAMES)
    assert spec == "beta:1;alpha,gamma:2"
    assert parse_tier_spec(spec, NAMES).tiers == (2, 1, 2)


def test_parse_forbidden_edges():
    assert parse_forbidden_edges("alpha->beta; gamma->alpha", NAMES) == [(0, 1), (2, 0)]
    with pytest.raises(ConfigError, match="X->Y"):
        parse_forbidden_edges("alpha-beta", NAMES)
    with pytest.raises(ConfigError, match="distinct"):
        parse_forbidden_edges("alpha->alpha", NAMES)


def test_parse_required_adjacencies():
    assert parse_required_adjacencies("alpha-gamma", NAMES) == [(0, 2)]
    # hyphenated column names resolve thanks to the leftmost-match rule
    names = ("x-ray", "beta")
    assert parse_required_adjacencies("x-ray-beta", names) == [(0, 1)]
    with pytest.raises(ConfigError, match="required adjacency"):
        parse_required_adjacencies("alpha~gamma", NAMES)


# ---------------------------------------------------------------------------
# discover
# ---------------------------------------------------------------------------


def test_discover_golden_edge_list(tmp_path):
    data = tmp_path / "chain.csv"
    out = tmp_path / "out"
    write_chain_csv(data)
    rc = main(
        [
            "discover",
            "--data", str(data),
            "--m", "1",
            "--c-star", "0.05",
            "--seed", "11",
            "--out", str(out),
        ]
    )
    assert rc == EXIT_OK
    text = (out / "graph_000.edgelist").read_text()
    expected = write_edge_list(
        MixedGraph.from_edges(3, undirected=[(0, 1), (1, 2)]), NAMES
    )
    assert text == expected

    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["config"]["seed"] == 11
    assert diag["valid"] == [True]
    assert diag["kept_indices"] == [0]
    assert diag["runs"][0]["tests_performed"] > 0


def test_discover_rerun_is_bit_identical(tmp_path):
    data = tmp_path / "chain.csv"
    write_chain_csv(data)
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(
            [
                "discover",
                "--data", str(data),
                "--m", "3",
                "--c-star", "0.05",
                "--seed", "4",
                "--out", str(out),
            ]
        )
        assert rc == EXIT_OK
        blob = b"".join(sorted(p.read_bytes() for p in out.iterdir()))
        blobs.append(blob)
    assert blobs[0] == blobs[1]


def test_discover_respects_tier_rule(tmp_path):
    data = tmp_path / "chain.csv"
    out = tmp_path / "out"
    write_chain_csv(data)
    rc = main(
        [
            "discover",
            "--data", str(data),
            "--tiers", "alpha,beta:1;gamma:2",
            "--m", "5",
            "--c-star", "0.05",
            "--seed", "3",
            "--out", str(out),
        ]
    )
    assert rc == EXIT_OK
    last = 2  # gamma
    for path in sorted(out.glob("graph_*.edgelist")):
        g, names = parse_edge_list(path.read_text())
        assert names == NAMES
        for a, b in g.directed_edges():
            assert not (a == last and b != last)


def test_discover_dot_format(tmp_path):
    data = tmp_path / "chain.csv"
    out = tmp_path / "out"
    write_chain_csv(data)
    rc = main(
        [
            "discover",
            "--data", str(data),
            "--m", "1",
            "--c-star", "0.05",
            "--seed", "11",
            "--format", "dot",
            "--out", str(out),
        ]
    )
    assert rc == EXIT_OK
    assert (out / "graph_000.dot").read_text().startswith("digraph {")


def test_discover_missing_flags():
    assert main(["discover", "--c-star", "0.05", "--out", "x"]) == EXIT_CONFIG_ERROR


def test_discover_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,oops\n2,3\n")
    rc = main(
        ["discover", "--data", str(bad), "--c-star", "0.05", "--seed", "1", "--out", str(tmp_path / "o")]
    )
    assert rc == EXIT_DATA_ERROR


# ---------------------------------------------------------------------------
# effect
# ---------------------------------------------------------------------------


def run_effect(tmp_path, *extra, data=None):
    if data is None:
        data = tmp_path / "chain.csv"
        if not data.exists():
            write_chain_csv(data)
    out = tmp_path / "report.json"
    rc = main(
        [
            "effect",
            "--data", str(data),
            "--exposure", "alpha",
            "--outcome", "gamma",
            "--seed", "11",
            "--out", str(out),
            *extra,
        ]
    )
    payload = json.loads(out.read_text()) if out.exists() else None
    return rc, payload, out


def test_effect_report_shape(tmp_path):
    rc, rep, _ = run_effect(tmp_path, "--m", "10", "--c-star", "0.05")
    assert rc == EXIT_OK
    assert rep["alpha1"] == pytest.approx(0.025)
    body = rep["reports"]["parents-only"]
    assert body["kept_count"] == body["total_runs"] == 10
    hull = body["interval_union"]["hull"]
    assert hull[0] < 0.8 * 0.7 < hull[1]


def test_effect_echo_rerun_bit_identical(tmp_path):
    rc, _, out = run_effect(tmp_path, "--m", "10", "--c-star", "0.05")
    assert rc == EXIT_OK
    out2 = tmp_path / "report2.json"
    rc2 = main(["effect", "--config", str(out), "--out", str(out2)])
    assert rc2 == EXIT_OK
    assert out.read_bytes() == out2.read_bytes()


def test_effect_heuristic_grid_echo(tmp_path):
    rc, rep, _ = run_effect(tmp_path, "--m", "8", "--c-star-grid", "0.02,0.05")
    assert rc == EXIT_OK
    assert rep["heuristic"]["chosen"] in (0.02, 0.05)
    assert [row[0] for row in rep["heuristic"]["table"]] == [0.02, 0.05]


def test_effect_both_policies(tmp_path):
    rc, rep, _ = run_effect(
        tmp_path,
        "--m", "6",
        "--c-star", "0.05",
        "--tiers", "alpha,beta:1;gamma:2",
        "--both-policies",
    )
    assert rc == EXIT_OK
    assert set(rep["reports"]) == {"parents-only", "parents-plus-tier-block"}


def test_effect_no_valid_graphs_exit_code(tmp_path):
    data = tmp_path / "indep.csv"
    rng = np.random.default_rng(3)
    with open(data, "w", newline="") as fh:
        write_data_csv(DataMatrix(rng.standard_normal((100, 3)), ("p", "q", "r")), fh)
    out = tmp_path / "rep.json"
    rc = main(
        [
            "effect",
            "--data", str(data),
            "--exposure", "p",
            "--outcome", "r",
            "--c-star", "50000",
            "--seed", "2",
            "--required", "p-r",
            "--out", str(out),
        ]
    )
    assert rc == EXIT_NO_VALID_GRAPHS
    rep = json.loads(out.read_text())
    assert rep["no_valid_graphs"] is True
    assert rep["kept_table"] == [[50000.0, 0.0]]


def test_effect_config_errors(tmp_path):
    data = tmp_path / "chain.csv"
    write_chain_csv(data)
    base = ["effect", "--data", str(data), "--seed", "1"]
    # missing exposure/outcome
    assert main(base + ["--c-star", "0.05"]) == EXIT_CONFIG_ERROR
    pair = ["--exposure", "alpha", "--outcome", "gamma"]
    # neither or both of c-star and the grid
    assert main(base + pair) == EXIT_CONFIG_ERROR
    assert (
        main(base + pair + ["--c-star", "0.05", "--c-star-grid", "0.01,0.02"])
        == EXIT_CONFIG_ERROR
    )
    # unknown outcome name
    assert (
        main(base + ["--exposure", "alpha", "--outcome", "nope", "--c-star", "0.05"])
        == EXIT_CONFIG_ERROR
    )
    # exposure in a later tier than outcome
    assert (
        main(
            base
            + ["--exposure", "gamma", "--outcome", "alpha", "--c-star", "0.05"]
            + ["--tiers", "alpha,beta:1;gamma:2"]
        )
        == EXIT_CONFIG_ERROR
    )
    # gamma must exceed nu
    assert (
        main(base + pair + ["--c-star", "0.05", "--gamma", "0.01", "--nu", "0.025"])
        == EXIT_CONFIG_ERROR
    )


def test_effect_entropy_seed_is_printed_and_echoed(tmp_path, capsys):
    data = tmp_path / "chain.csv"
    write_chain_csv(data)
    out = tmp_path / "rep.json"
    rc = main(
        [
            "effect",
            "--data", str(data),
            "--exposure", "alpha",
            "--outcome", "gamma",
            "--m", "2",
            "--c-star", "0.05",
            "--out", str(out),
        ]
    )
    assert rc == EXIT_OK
    err = capsys.readouterr().err
    assert "seed: " in err
    printed = int(err.split("seed: ")[1].split()[0])
    assert json.loads(out.read_text())["config"]["seed"] == printed


# ---------------------------------------------------------------------------
# bench and plot-data
# ---------------------------------------------------------------------------


def write_scenario(path, **overrides):
    cfg = {
        "scenario": "toy",
        "d": 5,
        "expected_neighbors": 2.0,
        "n": 150,
        "M": 4,
        "nu": 0.025,
        "gamma": 0.05,
        "max_adj": 3,
        "exposure": 1,
        "outcome": 4,
        "replicates": 3,
        "seed": 99,
        "c_star": 0.05,
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return cfg


def test_bench_scenario_sweep(tmp_path):
    scen = tmp_path / "scen.json"
    write_scenario(scen, sweep={"c_star": [0.02, 0.05]})
    out = tmp_path / "bench.csv"
    rc = main(["bench", "--scenario", str(scen), "--out", str(out)])
    assert rc == EXIT_OK
    with open(out, newline="") as fh:
        records = read_bench_csv(fh)
    assert [r.method for r in records] == [
        "resample",
        "naive(0.01)",
        "naive(0.05)",
        "oracle",
        "resample",
    ]
    assert [r.c_star for r in records if r.method == "resample"] == [0.02, 0.05]
    assert out.read_text().splitlines()[0] == ",".join(BENCH_CSV_COLUMNS)


def test_bench_sidecar_rerun_bit_identical(tmp_path):
    scen = tmp_path / "scen.json"
    write_scenario(scen)
    out1 = tmp_path / "b1.csv"
    assert main(["bench", "--scenario", str(scen), "--out", str(out1)]) == EXIT_OK
    out2 = tmp_path / "b2.csv"
    rc = main(["bench", "--scenario", str(out1) + ".config.json", "--out", str(out2)])
    assert rc == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()


def test_bench_jobs_bit_identical(tmp_path):
    scen = tmp_path / "scen.json"
    write_scenario(scen)
    outs = []
    for name, jobs in (("j1.csv", "1"), ("j2.csv", "2")):
        out = tmp_path / name
        rc = main(["bench", "--scenario", str(scen), "--jobs", jobs, "--out", str(out)])
        assert rc == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_bench_replicates_override_and_m_sweep(tmp_path):
    scen = tmp_path / "scen.json"
    write_scenario(scen, sweep={"M": [2, 4]})
    out = tmp_path / "bench.csv"
    rc = main(
        ["bench", "--scenario", str(scen), "--replicates", "2", "--out", str(out)]
    )
    assert rc == EXIT_OK
    with open(out, newline="") as fh:
        records = read_bench_csv(fh)
    assert sorted({r.n_resamples for r in records}) == [2, 4]
    assert all(r.replicates == 2 for r in records)


def test_bench_flag_conflicts(tmp_path):
    assert main(["bench", "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG_ERROR
    scen = tmp_path / "scen.json"
    write_scenario(scen)
    rc = main(
        [
            "bench",
            "--scenario", str(scen),
            "--paper-fig", "1",
            "--out", str(tmp_path / "x.csv"),
        ]
    )
    assert rc == EXIT_CONFIG_ERROR
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["bench", "--scenario", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG_ERROR


def test_bench_jobs_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("DISCOVERCI_JOBS", "not-a-number")
    scen = tmp_path / "scen.json"
    write_scenario(scen)
    rc = main(["bench", "--scenario", str(scen), "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_CONFIG_ERROR
    monkeypatch.setenv("DISCOVERCI_JOBS", "2")
    rc = main(["bench", "--scenario", str(scen), "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_OK


def test_plot_data_panels(tmp_path):
    scen = tmp_path / "scen.json"
    write_scenario(scen, sweep={"c_star": [0.02, 0.05]})
    bench = tmp_path / "bench.csv"
    assert main(["bench", "--scenario", str(scen), "--out", str(bench)]) == EXIT_OK
    out = tmp_path / "panels.json"
    svg_dir = tmp_path / "charts"
    rc = main(
        ["plot-data", "--bench", str(bench), "--out", str(out), "--svg", str(svg_dir)]
    )
    assert rc == EXIT_OK
    payload = json.loads(out.read_text())
    coverage = [p for p in payload["panels"] if p["metric"] == "coverage"][0]
    assert coverage["x"] == "c_star"
    by_method = {s["method"]: s for s in coverage["series"]}
    assert [x for x, _ in by_method["resample"]["points"]] == [0.02, 0.05]
    assert "baseline" in by_method["oracle"]
    svgs = sorted(p.name for p in svg_dir.iterdir())
    assert "toy_coverage.svg" in svgs
    text = (svg_dir / "toy_coverage.svg").read_text()
    assert text.startswith("<svg") and "polyline" in text


def test_plot_data_missing_and_foreign_input(tmp_path):
    assert (
        main(["plot-data", "--bench", str(tmp_path / "no.csv"), "--out", str(tmp_path / "p.json")])
        == EXIT_DATA_ERROR
    )
    foreign = tmp_path / "foreign.csv"
    foreign.write_text("a,b\n1,2\n")
    assert (
        main(["plot-data", "--bench", str(foreign), "--out", str(tmp_path / "p.json")])
        == EXIT_DATA_ERROR
    )


def test_build_panels_axis_detection():
    from discoverci.simulation import BenchRecord

    def rec(method, c_star, m, cov):
        return BenchRecord(
            scenario="s",
            method=method,
            c_star=c_star,
            n_resamples=m,
            n=500,
            coverage=cov,
            avg_length_union=1.0,
            avg_length_hull=1.0,
            kept_pct=math.nan,
            no_interval_pct=0.0,
            replicates=10,
            seed=0,
        )

    swept_m = [rec("resample", 0.01, m, 0.9) for m in (10, 50)]
    panels = build_panels(swept_m)
    assert panels[0]["x"] == "M"
    # nan metrics drop out instead of polluting the series
    kept = [p for p in panels if p["metric"] == "kept_pct"]
    assert kept == []
    svg = render_panel_svg(panels[0])
    assert svg.startswith("<svg")
