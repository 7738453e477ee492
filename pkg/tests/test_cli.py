"""Command-line interface: exit codes, output files, formats."""

import csv
import json
from pathlib import Path

import pytest

import daqflow
from daqflow.cli import COSTS_COLUMNS, main
from daqflow.scenario import CSV_COLUMNS

CONFIG_DIR = Path(daqflow.__file__).parent / "configs"

# small sample_count keeps the menu fit cheap; the node roles make the
# skill axis and variant machinery reachable
FULL = """\
schema_version: 1
conditions: {pileup: 1, reference_pileup: 1}
nodes:
  - {kind: sensor, id: s, sample_size: "1 kb", sample_rate: "1 MHz", relevant_fraction: 0.3}
  - kind: process
    id: sel
    role: l1t
    complexity: {form: linear, slope: 2}
    energy_per_op: "10 pJ/op"
    output_size: {form: linear, slope: 1}
    classifier: m
    reduction_target: 4
  - {kind: output, id: out}
links:
  - {id: a, source: s, target: sel, energy_per_bit: "1 pJ/bit", bandwidth_per_channel: "1 Gb/s"}
  - {id: b, source: sel, target: out, energy_per_bit: "1 pJ/bit", bandwidth_per_channel: "1 Gb/s"}
calibration:
  menus:
    m:
      mode: summed
      sample_count: 1000
      paths:
        - {name: x, threshold: "30 GeV", width: "2 GeV", plateau: 0.95, empirical_rate: "10 kHz", input_rate: "40 MHz"}
sweep:
  skill: [1.0, 1.1]
"""


@pytest.fixture()
def full_cfg(tmp_path):
    p = tmp_path / "full.cfg"
    p.write_text(FULL)
    return p


def test_validate_reports_ok(capsys):
    assert main(["validate", str(CONFIG_DIR / "cms_run3.cfg")]) == 0
    out = capsys.readouterr().out
    assert ": OK (" in out and "2 classifiers" in out


def test_validate_rejects_broken_topology(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(
        "schema_version: 1\n"
        "conditions: {pileup: 1, reference_pileup: 1}\n"
        "nodes:\n"
        '  - {kind: sensor, id: s, sample_size: "1 kb", sample_rate: "1 kHz"}\n'
        "  - {kind: output, id: out}\n"
        "links:\n"
        '  - {id: a, source: s, target: ghost, energy_per_bit: "1 pJ/bit",'
        ' bandwidth_per_channel: "1 Gb/s"}\n'
    )
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "invalid graph" in err and "ghost" in err


def test_missing_and_malformed_configs_exit_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2
    assert "config error" in capsys.readouterr().err

    garbled = tmp_path / "garbled.cfg"
    garbled.write_text("nodes: [unclosed\n")
    assert main(["validate", str(garbled)]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_writes_csv(full_cfg, tmp_path, capsys):
    out = tmp_path / "row.csv"
    assert main(["run", str(full_cfg), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "productivity" in stdout and f"wrote {out}" in stdout
    with out.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 2
    by_col = dict(zip(rows[0], rows[1]))
    assert float(by_col["power_w"]) > 0
    assert by_col["error"] == ""


def test_run_json_payload(full_cfg, tmp_path):
    out = tmp_path / "row.json"
    assert main(["run", str(full_cfg), "--format", "json", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert set(payload) == {
        "config", "row", "score", "costs", "storage_rate_bit_s", "nodes", "edges",
    }
    assert set(payload["row"]) == set(CSV_COLUMNS)
    sel = next(n for n in payload["nodes"] if n["node"] == "sel")
    assert {"tp_hz", "fp_hz", "tn_hz", "fn_hz", "threshold", "boundary_keep"} <= set(sel)
    for edge in payload["edges"]:
        assert edge["required_channels"] >= 1
    out_edge = next(e for e in payload["edges"] if e["target"] == "out")
    assert out_edge["rate_hz"] == pytest.approx(1e6 / 4.0, rel=1e-9)
    assert payload["storage_rate_bit_s"] == pytest.approx(out_edge["rate_hz"] * 1000.0)


def test_seeded_runs_are_reproducible(full_cfg, tmp_path):
    a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
    assert main(["run", str(full_cfg), "--format", "json", "--out", str(a), "--seed", "7"]) == 0
    assert main(["run", str(full_cfg), "--format", "json", "--out", str(b), "--seed", "7"]) == 0
    assert main(["run", str(full_cfg), "--format", "json", "--out", str(c), "--seed", "8"]) == 0
    assert a.read_text() == b.read_text()
    assert json.loads(a.read_text())["row"] != json.loads(c.read_text())["row"]


def test_sweep_default_filename_in_directory(full_cfg, tmp_path, capsys):
    outdir = tmp_path / "results"
    assert main(["sweep", str(full_cfg), "--out", str(outdir)]) == 0
    target = outdir / "full_sweep.csv"
    assert target.is_file()
    with target.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 3  # two skill points
    assert {r[2] for r in rows[1:]} == {"1.0", "1.1"}
    assert all(r[-1] == "" for r in rows[1:])


def test_out_falls_back_to_environment(full_cfg, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DAQFLOW_OUT", str(tmp_path / "envdir"))
    assert main(["run", str(full_cfg)]) == 0
    assert (tmp_path / "envdir" / "full_run.csv").is_file()


def test_costs_csv(full_cfg, tmp_path):
    out = tmp_path / "costs.csv"
    assert main(["costs", str(full_cfg), "--out", str(out)]) == 0
    with out.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(COSTS_COLUMNS)
    values = dict(zip(rows[0], rows[1]))
    assert float(values["e_fp_j"]) == pytest.approx(
        float(values["e_tp_j"]) - float(values["e_tn_j"]), rel=1e-9
    )
    assert values["degenerate"] == "False"


def test_report_prefixes_table_and_label(tmp_path, capsys):
    mini = (
        "schema_version: 1\n"
        "conditions: {pileup: 1, reference_pileup: 1}\n"
        "nodes:\n"
        '  - {kind: sensor, id: s, sample_size: "1 kb", sample_rate: "1 kHz", relevant_fraction: 0.5}\n'
        "  - {kind: output, id: out}\n"
        "links:\n"
        '  - {id: a, source: s, target: out, energy_per_bit: "1 pJ/bit",'
        ' bandwidth_per_channel: "1 Gb/s"}\n'
    )
    (tmp_path / "mini.cfg").write_text(mini)
    (tmp_path / "tables.cfg").write_text(
        mini
        + "report:\n"
        "  tables:\n"
        "    - title: T\n"
        "      rows:\n"
        "        - {label: A, config: mini.cfg}\n"
        "        - {label: B, config: mini.cfg}\n"
    )
    out = tmp_path / "report.csv"
    assert main(["report", str(tmp_path / "tables.cfg"), "--out", str(out)]) == 0
    with out.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["table", "label"] + list(CSV_COLUMNS)
    assert [r[:2] for r in rows[1:]] == [["T", "A"], ["T", "B"]]

    # a config without a report section cannot be reported on
    assert main(["report", str(tmp_path / "mini.cfg")]) == 2


def test_strict_escalates_model_warnings(tmp_path, capsys):
    clamped = tmp_path / "clamped.cfg"
    clamped.write_text(
        "schema_version: 1\n"
        "conditions: {pileup: 200, reference_pileup: 50}\n"
        "nodes:\n"
        "  - kind: sensor\n"
        "    id: s\n"
        '    sample_size: "1 kb"\n'
        '    sample_rate: "1 kHz"\n'
        "    relevant_fraction: 0.5\n"
        "    pileup_scaling: {form: table, pileups: [50, 100], multipliers: [1, 2]}\n"
        "  - {kind: output, id: out}\n"
        "links:\n"
        '  - {id: a, source: s, target: out, energy_per_bit: "1 pJ/bit",'
        ' bandwidth_per_channel: "1 Gb/s"}\n'
    )
    with pytest.warns(daqflow.errors.ModelWarning):
        assert main(["run", str(clamped)]) == 0
    capsys.readouterr()
    assert main(["run", str(clamped), "--strict"]) == 1
    assert "error (strict)" in capsys.readouterr().err
