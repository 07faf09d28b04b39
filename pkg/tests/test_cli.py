from __future__ import annotations

import csv
import io
import json

import jsonschema
import pytest
from conftest import CORPUS, SCHEMAS

from probref.cli import ACCEPT, INCONCLUSIVE, REJECT, USAGE, main


def _schema(name: str) -> dict:
    return json.loads((SCHEMAS / f"{name}.json").read_text(encoding="utf-8"))


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, schema: str, *argv: str) -> tuple[int, dict]:
    code, out, _ = run(capsys, *argv)
    doc = json.loads(out)
    jsonschema.validate(doc, _schema(schema))
    return code, doc


@pytest.fixture
def flips_file() -> str:
    return str(CORPUS / "flips" / "program.rml")


def test_run_terminates(capsys, flips_file):
    code, doc = run_json(capsys, "run", "run", "--program", flips_file, "--seed", "3")
    assert code == ACCEPT
    assert doc["outcome"] == "terminated"
    assert doc["value"] == "()"


def test_run_is_reproducible(capsys, flips_file):
    _, a = run_json(capsys, "run", "run", "--program", flips_file, "--seed", "9")
    _, b = run_json(capsys, "run", "run", "--program", flips_file, "--seed", "9")
    assert a == b


def test_run_budget_and_stuck(capsys, tmp_path):
    loop = tmp_path / "loop.rml"
    loop.write_text("while true do () end\n")
    code, doc = run_json(capsys, "run", "run", "--program", str(loop), "--steps", "30")
    assert (code, doc["outcome"]) == (INCONCLUSIVE, "budget_exhausted")
    bad = tmp_path / "bad.rml"
    bad.write_text("1 + true")
    code, doc = run_json(capsys, "run", "run", "--program", str(bad))
    assert (code, doc["outcome"]) == (REJECT, "stuck")


def test_run_with_bindings_and_tape(capsys):
    walk = str(CORPUS / "walk" / "labeled.rml")
    code, doc = run_json(capsys, "run", "run", "--program", walk, "--bind", "n=1", "--bind", "t=tape#0", "--tape", "1:0")
    assert code == ACCEPT
    # the presampled 0 sends the walk away from the origin first
    assert doc["steps"] > 0


def test_open_program_is_a_usage_error(capsys, tmp_path):
    p = tmp_path / "open.rml"
    p.write_text("x + 1")
    code, _, err = run(capsys, "run", "--program", str(p))
    assert code == USAGE
    assert "free variables" in err


def test_parse_error_is_a_usage_error(capsys, tmp_path):
    p = tmp_path / "bad.rml"
    p.write_text("let x = in 3")
    code, _, err = run(capsys, "run", "--program", str(p))
    assert code == USAGE
    assert "line 1, column 9" in err


def test_bad_arguments_exit_with_usage(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == USAGE
    with pytest.raises(SystemExit) as info:
        main(["exec", "--model", "flip", "--n", "-1"])
    assert info.value.code == USAGE
    with pytest.raises(SystemExit) as info:
        main(["rsm", "--cert", "x.json"])
    assert info.value.code == USAGE


def test_exec_program_and_model(capsys, flips_file):
    code, doc = run_json(capsys, "exec", "exec", "--model", "flip", "--start", "true", "--n", "3")
    assert (code, doc["mass"]) == (ACCEPT, "7/8")
    code, doc = run_json(capsys, "exec", "exec", "--program", flips_file, "--n", "9")
    assert doc["mass"] == "3/4"
    code, out, _ = run(capsys, "exec", "--model", "flip", "--n", "2", "--format", "csv")
    assert list(csv.reader(io.StringIO(out)))[-1] == ["2", "3", "4"]
    code, out, _ = run(capsys, "exec", "--model", "flip", "--n", "2", "--format", "text")
    assert out.strip() == "mass at depth 2: 3/4"


def test_exec_gw_needs_mu(capsys):
    code, _, _ = run(capsys, "exec", "--model", "gw_walk", "--n", "2")
    assert code == USAGE
    code, doc = run_json(capsys, "exec", "exec", "--model", "gw_walk", "--mu", '{"0": "1/3", "1": "1/3", "2": "1/3"}', "--start", "1", "--n", "2")
    assert doc["mass"] == "4/9"


def test_exec_json_model(capsys):
    code, doc = run_json(capsys, "exec", "exec", "--model", str(CORPUS / "listgen" / "model.json"), "--n", "3")
    assert doc["mass"] == "5/8"


def test_state_cap_is_inconclusive(capsys):
    code, _, _ = run(capsys, "exec", "--model", "random_walk", "--start", "1", "--n", "30", "--states", "3")
    assert code == INCONCLUSIVE


def test_estimate(capsys, flips_file):
    code, doc = run_json(capsys, "estimate", "estimate", "--program", flips_file, "--trials", "200", "--seed", "1")
    assert code == ACCEPT
    assert doc["advisory"] is True
    assert doc["interval"][0] <= 1.0 <= doc["interval"][1]


def test_coupling_solve_and_check(capsys, tmp_path):
    code, doc = run_json(capsys, "coupling", "coupling", "--mu1", '{"0": "1/2", "1": "1/2"}', "--mu2", '{"0": "1/4"}', "--rel", "full")
    assert (code, doc["exists"], doc["deficit"]) == (REJECT, False, "3/4")
    code, doc = run_json(capsys, "coupling", "coupling", "--mu1", '{"0": "1/2", "1": "1/2"}', "--mu2", '{"1": "1/2", "0": "1/2"}')
    assert (code, doc["exists"]) == (ACCEPT, True)
    w = tmp_path / "w.json"
    w.write_text(json.dumps(doc["witness"]))
    code, doc = run_json(capsys, "coupling", "coupling", "--mu1", '{"0": "1/2", "1": "1/2"}', "--mu2", '{"0": "1/2", "1": "1/2"}', "--witness", str(w))
    assert (code, doc["valid"]) == (ACCEPT, True)
    code, doc = run_json(capsys, "coupling", "coupling", "--mu1", '{"0": "1/2", "1": "1/2"}', "--mu2", '{"0": "1"}', "--witness", str(w))
    assert (code, doc["valid"]) == (REJECT, False)


def test_coupling_bad_input(capsys):
    code, _, _ = run(capsys, "coupling", "--mu1", '{"0": "3/2"}', "--mu2", "{}")
    assert code == USAGE
    code, _, _ = run(capsys, "coupling", "--mu1", "{}", "--mu2", "{}", "--rel", "nonsense")
    assert code == USAGE


@pytest.mark.parametrize("case, model", [("flips", "flip"), ("walk", "random_walk"), ("listgen", "listgen")])
def test_refine_corpus(capsys, case, model):
    d = CORPUS / case
    code, doc = run_json(
        capsys, "refine", "refine", "--model", model, "--program", str(d / "program.rml"), "--cert", str(d / "refinement.json")
    )
    assert code == ACCEPT
    assert doc["verdict"] == "accept"


def test_refine_reject_and_inconclusive(capsys, tmp_path):
    d = CORPUS / "flips"
    cert = json.loads((d / "refinement.json").read_text())
    del cert["nodes"]["toss"]["relation"][1]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cert))
    code, doc = run_json(capsys, "refine", "refine", "--model", "flip", "--program", str(d / "program.rml"), "--cert", str(bad))
    assert code == REJECT
    assert doc["failures"][0]["deficit"] == "1/2"
    w = CORPUS / "walk"
    code, doc = run_json(
        capsys, "refine", "refine", "--model", "random_walk", "--program", str(w / "program.rml"), "--cert", str(w / "refinement.json"), "--budget", "3"
    )
    assert code == INCONCLUSIVE


def test_refine_malformed_certificate(capsys, tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text('{"nodes": {}}')
    code, _, _ = run(capsys, "refine", "--model", "flip", "--program", str(CORPUS / "flips" / "program.rml"), "--cert", str(bad))
    assert code == USAGE


def test_rsm(capsys, tmp_path):
    code, doc = run_json(capsys, "rsm", "rsm", "--model", "listgen", "--cert", str(CORPUS / "listgen" / "rsm.json"))
    assert code == ACCEPT
    assert doc["verdict"] == "verified on explored set"
    cert = tmp_path / "flip.json"
    cert.write_text(json.dumps({"f": [{"state": True, "num": 2, "den": 1}, {"state": False, "num": 0, "den": 1}], "epsilon": {"num": 2, "den": 1}}))
    code, doc = run_json(capsys, "rsm", "rsm", "--model", "flip", "--cert", str(cert))
    assert code == REJECT
    code, doc = run_json(capsys, "rsm", "rsm", "--model", "flip", "--cert", str(cert), "--states-list", "[false]")
    assert code == ACCEPT


def test_compare(capsys, tmp_path, flips_file):
    out = tmp_path / "curves.csv"
    code, doc = run_json(capsys, "compare", "compare", "--model", "flip", "--start", "true", "--program", flips_file, "--n", "4", "--depth", "20", "--csv-out", str(out))
    assert (code, doc["witness_depth"]) == (ACCEPT, 19)
    assert out.read_text().startswith("depth,model_num")
    code, doc = run_json(capsys, "compare", "compare", "--model", "flip", "--start", "true", "--program", flips_file, "--n", "4", "--depth", "5")
    assert code == INCONCLUSIVE


def test_corpus_list_and_case(capsys):
    code, doc = run_json(capsys, "corpus", "corpus", "--list")
    assert [c["name"] for c in doc["cases"]] == ["walk", "flips", "listgen", "lazy_real", "treap", "galton_watson"]
    code, doc = run_json(capsys, "corpus", "corpus", "flips")
    assert code == ACCEPT
    assert {c["check"] for c in doc["results"][0]["checks"]} == {"refinement", "compare", "erasure"}
    code, _, _ = run(capsys, "corpus", "nope")
    assert code == USAGE


def test_seed_from_environment(capsys, flips_file, monkeypatch):
    monkeypatch.setenv("PROBREF_SEED", "42")
    _, a = run_json(capsys, "run", "run", "--program", flips_file)
    _, b = run_json(capsys, "run", "run", "--program", flips_file, "--seed", "42")
    assert a == b


@pytest.mark.parametrize(
    "path, schema",
    [(p, "certificate") for p in sorted(CORPUS.glob("*/refinement.json"))]
    + [(p, "rsm_certificate") for p in sorted(CORPUS.glob("*/rsm.json"))]
    + [(p, "model") for p in sorted(CORPUS.glob("*/model.json"))]
    + [(p, "meta") for p in sorted(CORPUS.glob("*/meta.json"))],
    ids=lambda v: v if isinstance(v, str) else f"{v.parent.name}/{v.name}",
)
def test_fixture_files_match_schemas(path, schema):
    jsonschema.validate(json.loads(path.read_text(encoding="utf-8")), _schema(schema))


def test_schemas_are_valid():
    for p in SCHEMAS.glob("*.json"):
        jsonschema.Draft202012Validator.check_schema(json.loads(p.read_text(encoding="utf-8")))
