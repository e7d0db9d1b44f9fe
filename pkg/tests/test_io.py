"""Tests for CSV loading, run configs, and output writers."""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from plm.engine import AnalysisConfig, ResultTable, TableRow, run_contour, \
    run_line
from plm.adjust import PlaceboSpec, dispatch_case
from plm.errors import (
    AmbiguousSpec,
    ConfigError,
    DataError,
    DuplicateHeader,
    IoError,
    NonFiniteValue,
    ParseError,
    TooFewRows,
)
from plm.io import (
    RunConfig,
    check_fixture_manifest,
    emit_outputs,
    load_csv,
    parse_run_config,
    read_table_csv,
    render_contour_svg,
    render_line_svg,
    write_contour_csv,
    write_contour_json,
    write_line_csvs,
    write_table_csv,
)
from plm.selfcheck import random_recipe
from plm.simulate import simulate_scm

SVG_NS = "{http://www.w3.org/2000/svg}"


def _write_dataset(path, data):
    lines = [",".join(data.names)]
    matrix = data.matrix(data.names)
    for row in matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _sim_data(seed=1, n=300):
    return simulate_scm(random_recipe("b", seed=seed, n=n))


def _spec():
    return PlaceboSpec(outcome_col="Y", treatment_col="D", placebo_col="P",
                       role="placebo_outcome", edge_d_to_p=True)


def _config_payload(data_path, **overrides):
    payload = {
        "data_path": str(data_path),
        "outcome": "Y",
        "treatment": "D",
        "placebo": "P",
        "role": "placebo_outcome",
        "edges": {"d_to_p": True},
        "covariates": ["Z1"],
        "k": [-2.0, 2.0],
        "direct": [-0.5, 0.5],
        "grid": 15,
        "bootstrap": {"reps": 120, "seed": 9},
        "ci_level": 0.9,
    }
    payload.update(overrides)
    return payload


def _write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_load_csv_round_trip(tmp_path):
    data = _sim_data(seed=7, n=40)
    path = _write_dataset(tmp_path / "data.csv", data)
    loaded = load_csv(path)
    assert loaded.names == data.names
    for name in data.names:
        # repr serialization means the floats survive exactly.
        assert np.array_equal(loaded[name], data[name])


def test_load_csv_reports_bad_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("D,P,Y\n0,1.0,2.0\n1,NA,3.0\n", encoding="utf-8")
    with pytest.raises(NonFiniteValue, match=r"row 3.*'P'.*'NA'"):
        load_csv(path)
    path.write_text("D,Y\n0,inf\n", encoding="utf-8")
    with pytest.raises(NonFiniteValue, match=r"row 2.*'Y'"):
        load_csv(path)


def test_load_csv_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("D,P,Y\n0,1,2\n0,1\n", encoding="utf-8")
    with pytest.raises(ParseError, match="row 3"):
        load_csv(path)


def test_load_csv_duplicate_header(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("D,Y,D\n0,1,2\n", encoding="utf-8")
    with pytest.raises(DuplicateHeader, match="'D'"):
        load_csv(path)


def test_load_csv_empty_and_header_only(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ParseError, match="empty"):
        load_csv(empty)
    header_only = tmp_path / "header.csv"
    header_only.write_text("D,Y\n", encoding="utf-8")
    with pytest.raises(TooFewRows):
        load_csv(header_only)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_skips_blank_lines(tmp_path):
    path = tmp_path / "blank.csv"
    path.write_text("D,Y\n0,1\n\n1,2\n", encoding="utf-8")
    data = load_csv(path)
    assert data.n_rows == 2


def test_fixture_manifest_check(tmp_path):
    data = load_csv(_write_dataset(tmp_path / "d.csv", _sim_data(n=25)))
    manifest = {
        "n_rows": data.n_rows,
        "column_means": {name: float(np.mean(data[name]))
                         for name in data.names},
    }
    check_fixture_manifest(data, manifest)
    with pytest.raises(DataError, match="rows"):
        check_fixture_manifest(data, {**manifest, "n_rows": 99})
    wrong = dict(manifest["column_means"])
    wrong["Y"] += 0.1
    with pytest.raises(DataError, match="'Y'"):
        check_fixture_manifest(data, {**manifest, "column_means": wrong})


def test_parse_run_config_builds_spec(tmp_path):
    data_path = _write_dataset(tmp_path / "data.csv", _sim_data(n=30))
    (tmp_path / "out").mkdir()
    payload = _config_payload(
        "data.csv",
        outputs={"table": "out/table.csv", "svg": "out/plot.svg"},
    )
    cfg = parse_run_config(_write_config(tmp_path, payload))
    assert cfg.data_path == data_path.resolve()
    assert cfg.spec.role == "placebo_outcome"
    assert cfg.spec.edge_d_to_p is True
    assert cfg.spec.covariate_cols == ("Z1",)
    assert cfg.k_range == (-2.0, 2.0)
    assert cfg.direct_range == (-0.5, 0.5)
    assert cfg.grid == 15
    assert cfg.bootstrap_reps == 120
    assert cfg.seed == 9
    assert cfg.ci_level == 0.9
    assert cfg.outputs["table"] == (tmp_path / "out" / "table.csv").resolve()
    engine_cfg = cfg.analysis_config()
    assert isinstance(engine_cfg, AnalysisConfig)
    assert engine_cfg.seed == 9
    assert cfg.analysis_config(seed=99).seed == 99


def test_run_config_paths_resolve_against_config_dir(tmp_path):
    _write_dataset(tmp_path / "data.csv", _sim_data(n=25))
    nested = tmp_path / "cfg"
    nested.mkdir()
    payload = _config_payload("../data.csv",
                              outputs={"table": "../table.csv"})
    cfg = parse_run_config(_write_config(nested, payload))
    assert cfg.data_path == (tmp_path / "data.csv").resolve()
    assert cfg.outputs["table"] == (tmp_path / "table.csv").resolve()


@pytest.mark.parametrize("mutate", [
    {"typo_key": 1},
    {"edges": {"d_to_p": True, "q_to_r": True}},
    {"bootstrap": {"reps": 10, "chains": 2}},
    {"outputs": {"pdf": "x.pdf"}},
])
def test_run_config_rejects_unknown_keys(tmp_path, mutate):
    _write_dataset(tmp_path / "data.csv", _sim_data(n=25))
    payload = _config_payload("data.csv", **mutate)
    with pytest.raises(ConfigError, match="unknown"):
        parse_run_config(_write_config(tmp_path, payload))


def test_run_config_requires_core_fields(tmp_path):
    _write_dataset(tmp_path / "data.csv", _sim_data(n=25))
    payload = _config_payload("data.csv")
    del payload["treatment"]
    with pytest.raises(ConfigError, match="treatment"):
        parse_run_config(_write_config(tmp_path, payload))


def test_run_config_missing_data_file(tmp_path):
    payload = _config_payload("absent.csv")
    with pytest.raises(ConfigError, match="absent.csv"):
        parse_run_config(_write_config(tmp_path, payload))


def test_run_config_edge_role_consistency(tmp_path):
    _write_dataset(tmp_path / "data.csv", _sim_data(n=25))

    def parse(**overrides):
        payload = _config_payload("data.csv", **overrides)
        return parse_run_config(_write_config(tmp_path, payload))

    with pytest.raises(AmbiguousSpec):
        parse(edges={"p_to_d": True})
    with pytest.raises(AmbiguousSpec):
        parse(edges={"y_to_p": True})
    # The same flags are redundant but consistent with their own roles.
    assert parse(edges={"p_to_d": True},
                 role="observed_confounder_2").spec.role \
        == "observed_confounder_2"
    assert parse(edges={"y_to_p": True}, role="post_outcome").spec.role \
        == "post_outcome"
    with pytest.raises(ConfigError, match="true or false"):
        parse(edges={"d_to_p": 1})


def test_run_config_mediator_role_is_acknowledged(tmp_path):
    _write_dataset(tmp_path / "data.csv", _sim_data(n=25))
    payload = _config_payload(
        "data.csv", role="mediator",
        edges={"d_to_p": True, "p_to_y": True},
    )
    cfg = parse_run_config(_write_config(tmp_path, payload))
    assert cfg.spec.acknowledge_mediator is True


def test_run_config_malformed_inputs(tmp_path):
    _write_dataset(tmp_path / "data.csv", _sim_data(n=25))
    with pytest.raises(ConfigError, match="grid"):
        parse_run_config(_write_config(
            tmp_path, _config_payload("data.csv", grid=2.5)))
    with pytest.raises(ConfigError, match="pair"):
        parse_run_config(_write_config(
            tmp_path, _config_payload("data.csv", k=[1.0])))
    with pytest.raises(ConfigError, match="role"):
        parse_run_config(_write_config(
            tmp_path, _config_payload("data.csv", role="thing")))
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        parse_run_config(bad_json)
    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="object"):
        parse_run_config(listy)
    with pytest.raises(ConfigError, match="does not exist"):
        parse_run_config(_write_config(
            tmp_path,
            _config_payload("data.csv",
                            outputs={"table": "no_dir/table.csv"})))


def test_table_csv_round_trip(tmp_path):
    rows = (
        TableRow("SOO", 0.0, 0.0, 0.1 + 0.2, 1.0 / 3.0, -1e-17, 2.0),
        TableRow("Grid", -1.5, 0.25, np.pi, 0.0123456789012345, -1.0, 1.0),
    )
    table = ResultTable(rows=rows, metadata={"role": "placebo_outcome"})
    path = tmp_path / "table.csv"
    write_table_csv(table, path)
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == \
        "label,k,direct_effect,estimate,std_error,ci_low,ci_high"
    loaded = read_table_csv(path)
    assert loaded.rows == rows
    with pytest.raises(ParseError, match="header"):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n", encoding="utf-8")
        read_table_csv(bad)


def test_contour_csv_and_json(tmp_path):
    data = _sim_data()
    cfg = AnalysisConfig(spec=_spec(), direct_range=(-1.0, 1.0),
                         grid_points_per_axis=15, bootstrap_reps=50)
    grid = run_contour(data, cfg)
    csv_path = tmp_path / "contour.csv"
    write_contour_csv(grid, csv_path)
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "k,direct,estimate"
    assert len(lines) == 1 + 15 * 15
    k, dv, est = (float(v) for v in lines[1].split(","))
    assert k == grid.k_values[0]
    assert dv == grid.direct_values[0]
    assert est == grid.estimates[0, 0]
    json_path = tmp_path / "contour.json"
    write_contour_json(grid, json_path)
    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert set(payload) == {"k_values", "direct_values", "zero_contour",
                            "metadata"}
    assert payload["k_values"] == [float(v) for v in grid.k_values]
    assert len(payload["zero_contour"]) == len(grid.zero_contour)
    first = np.asarray(payload["zero_contour"][0])
    assert np.array_equal(first, grid.zero_contour[0])


def test_line_csv_single_and_multi(tmp_path):
    data = _sim_data()
    cfg = AnalysisConfig(spec=_spec(), direct_range=(-1.0, 1.0),
                         grid_points_per_axis=9, bootstrap_reps=60, seed=3)
    single = run_line(data, cfg, varying="k", fixed_percentiles=(0.5,))
    path = tmp_path / "line.csv"
    written = write_line_csvs(single, path)
    assert written == [path]
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "k,estimate,ci_low,ci_high,fixed_direct"
    assert len(lines) == 1 + 9
    assert all(line.endswith(repr(0.0)) for line in lines[1:])

    double = run_line(data, cfg, varying="k", fixed_percentiles=(0.25, 0.75))
    written = write_line_csvs(double, tmp_path / "multi.csv")
    assert [p.name for p in written] == ["multi_1.csv", "multi_2.csv"]
    body = written[1].read_text(encoding="utf-8").splitlines()
    assert body[1].endswith(repr(0.5))


def test_contour_svg_valid_xml_one_path_per_polyline():
    data = _sim_data()
    cfg = AnalysisConfig(spec=_spec(), direct_range=(-1.0, 1.0),
                         grid_points_per_axis=21, bootstrap_reps=50)
    grid = run_contour(data, cfg)
    assert grid.zero_contour
    svg = render_contour_svg(grid)
    root = ET.fromstring(svg)
    assert root.tag == f"{SVG_NS}svg"
    paths = root.findall(f".//{SVG_NS}path")
    assert len(paths) == len(grid.zero_contour)
    assert root.findall(f".//{SVG_NS}rect")
    assert root.findall(f".//{SVG_NS}text")


def test_line_svg_curves_and_ribbons():
    data = _sim_data()
    cfg = AnalysisConfig(spec=_spec(), direct_range=(-1.0, 1.0),
                         grid_points_per_axis=9, bootstrap_reps=60, seed=3)
    line = run_line(data, cfg, varying="k", fixed_percentiles=(0.0, 1.0))
    svg = render_line_svg(line)
    root = ET.fromstring(svg)
    assert len(root.findall(f".//{SVG_NS}polyline")) == 2
    assert len(root.findall(f".//{SVG_NS}path")) == 2


def test_emit_outputs_writes_configured_results(tmp_path):
    data = _sim_data()
    data_path = _write_dataset(tmp_path / "data.csv", data)
    payload = _config_payload(
        "data.csv", grid=9,
        bootstrap={"reps": 60, "seed": 3},
        outputs={"table": "table.csv", "contour": "contour.csv",
                 "line": "line.csv", "svg": "plot.svg"},
    )
    cfg = parse_run_config(_write_config(tmp_path, payload))
    engine_cfg = cfg.analysis_config()
    from plm.engine import run_table
    results = {
        "table": run_table(load_csv(data_path), engine_cfg),
        "contour": run_contour(load_csv(data_path), engine_cfg),
        "line": run_line(load_csv(data_path), engine_cfg),
    }
    written = emit_outputs(results, cfg)
    names = [p.name for p in written]
    assert names == ["table.csv", "contour.csv", "contour.json",
                     "line.csv", "plot.svg"]
    svg_text = (tmp_path / "plot.svg").read_text(encoding="utf-8")
    assert svg_text.count("<path") == len(results["contour"].zero_contour)

    # Second emission produces identical bytes.
    before = {p: p.read_bytes() for p in written}
    emit_outputs(results, cfg)
    for p, blob in before.items():
        assert p.read_bytes() == blob

    # Without a contour result the svg falls back to the line slice.
    emit_outputs({"line": results["line"]}, cfg)
    assert "<polyline" in (tmp_path / "plot.svg").read_text(encoding="utf-8")

    # Configured outputs with no matching result are skipped.
    only_table = emit_outputs({"table": results["table"]}, cfg)
    assert [p.name for p in only_table] == ["table.csv"]
