import json
from pathlib import Path

import pytest

from ssrkit import cli
from ssrkit.cli import EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, SCENARIOS, main, write_paths, write_summary

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run_cli(tmp_path, doc, *extra):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(doc))
    return main(["run", str(cfg), "--out", str(tmp_path / "out"), *extra])


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_every_scenario_matches_expected_verdict(name, tmp_path, capsys):
    code = main(["run", str(CONFIGS / f"{name}.json"), "--out", str(tmp_path)])
    out = capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text())
    assert code == EXIT_OK, out
    assert report["verdict"] == SCENARIOS[name].expected
    assert (tmp_path / "summary.csv").read_text().startswith("feature,statistic,p_value,pass\n")
    assert (tmp_path / "paths.jsonl").exists()


def test_strong_fermion_number_report(tmp_path):
    assert run_cli(tmp_path, {"scenario": "strong-ssr-fermion-number", "run": {"n": 500}}) == EXIT_OK
    report = json.loads((tmp_path / "out" / "report.json").read_text())["report"]
    conds = report["conditions"]
    for name in ("function_of_configuration", "commutes_with_hamiltonian", "commutes_with_h_jump",
                 "commutes_with_h_diag", "no_cross_sector_jumps", "rate_identity",
                 "conditional_distribution", "expectation_constant"):
        assert isinstance(conds[name]["value"], (int, float))
    assert report["verdict"] == "strong"


def test_paths_file_format(tmp_path):
    run_cli(tmp_path, {"scenario": "strong-ssr-two-component", "run": {"n": 50}})
    lines = (tmp_path / "out" / "paths.jsonl").read_text().splitlines()
    assert len(lines) == 50
    rec = json.loads(lines[0])
    assert set(rec) == {"seed", "initial_config", "events"}
    for line in lines:
        for t, a, b in json.loads(line)["events"]:
            assert 0 < t < 1 and a != b


@pytest.mark.parametrize("name", ["strong-ssr-two-component", "grw-flash-ssr"])
def test_rerun_is_byte_identical(name, tmp_path):
    doc = {"scenario": name, "run": {"n": 300, "seed": 11}}
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        assert run_cli(d, doc) == EXIT_OK
        outs.append({p.name: p.read_bytes() for p in sorted((d / "out").iterdir())})
    assert outs[0] == outs[1]
    assert outs[0]["paths.jsonl"] or outs[0].get("flashes.jsonl")


def test_seed_override_changes_paths(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    run_cli(a, {"scenario": "strong-ssr-two-component", "run": {"n": 100}}, "--seed", "1")
    run_cli(b, {"scenario": "strong-ssr-two-component", "run": {"n": 100}}, "--seed", "2")
    assert (a / "out" / "paths.jsonl").read_bytes() != (b / "out" / "paths.jsonl").read_bytes()


def test_n_override(tmp_path):
    run_cli(tmp_path, {"scenario": "strong-ssr-two-component"}, "--n", "20")
    assert len((tmp_path / "out" / "paths.jsonl").read_text().splitlines()) == 20


@pytest.mark.parametrize("doc,field", [
    ({"scenario": "strong-ssr-fermion-number", "run": {"n": -3}}, "run.n"),
    ({"scenario": "no-such-scenario"}, "scenario"),
    ({"scenario": "strong-ssr-fermion-number", "run": {"dt": "fast"}}, "run.dt"),
    ({"scenario": "strong-ssr-fermion-number", "bogus": 1}, "bogus"),
    ({"scenario": "strong-ssr-fermion-number",
      "model": {"builder": "fermion_boson", "params": {"sites": 0, "fermion_counts": [1],
                                                         "max_total_bosons": 1}}}, "model.params.sites"),
    ({"scenario": "strong-ssr-fermion-number", "observable": "spin"}, "observable"),
    ({"run": {}}, "scenario"),
])
def test_malformed_config_exits_2_and_names_field(doc, field, tmp_path, capsys):
    assert run_cli(tmp_path, doc) == EXIT_USAGE
    err = capsys.readouterr().err
    assert f"config error at {field}" in err


def test_unreadable_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_USAGE
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["run", str(tmp_path / "bad.json")]) == EXIT_USAGE
    assert "invalid JSON" in capsys.readouterr().err


def test_mismatch_exits_1(tmp_path, monkeypatch, capsys):
    sc = SCENARIOS["decoherence-convergence"]
    monkeypatch.setitem(SCENARIOS, sc.name, cli.Scenario(sc.name, "strong", sc.run, sc.default_model,
                                                         sc.observable, sc.defaults))
    assert run_cli(tmp_path, {"scenario": sc.name}) == EXIT_MISMATCH
    assert "does not match" in capsys.readouterr().err


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert all(name in out for name in SCENARIOS)


def test_empty_outputs_are_header_only(tmp_path):
    write_summary(tmp_path / "s.csv", [])
    write_paths(tmp_path / "p.jsonl", None)
    assert (tmp_path / "s.csv").read_text() == "feature,statistic,p_value,pass\n"
    assert (tmp_path / "p.jsonl").read_text() == ""


def test_float_serialization_round_trips():
    x = 0.1 + 0.2
    assert json.loads(cli.to_json({"x": x}))["x"] == x
