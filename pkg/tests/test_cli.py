import json
import math
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qidlaws.bv import PiecewiseBV
from qidlaws.cli import (
    EXIT,
    OUTPUT_ENV,
    RunConfig,
    ScenarioParseError,
    build_parser,
    main,
    parse_scenario,
    run,
    serialize_scenario,
)
from qidlaws.levy_khinchine import SpectralPair
from qidlaws.scenarios import ScenarioSpec, realize_bv

from strategies import bv_functions


def doc(**fields):
    return json.dumps({"schema": 1, **fields})


def write(tmp_path, text, name="scenario.json"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# --- parsing ---------------------------------------------------------------


def test_parse_example2():
    spec = parse_scenario(doc(family="example2", indices=[1, 2, 4]))
    seq = realize_bv(spec)
    assert len(seq) == 3
    for n, G in zip((1, 2, 4), seq):
        assert G == PiecewiseBV([(0.0, n), (1.0 / n**2, -n)])


def test_parse_custom_singleton():
    text = doc(family="custom", explicit=[{"gamma": 0.5, "tau": 2, "atoms": [[1, 0.25]], "segments": [[0, 1, -0.5]]}])
    spec = parse_scenario(text)
    assert spec.indices == (1,)
    assert spec.explicit == (SpectralPair(0.5, PiecewiseBV([(1.0, 0.25)], [(0.0, 1.0, -0.5)]), 2.0),)


def test_parse_poisson():
    spec = parse_scenario(doc(family="poisson", params={"lambda": 1}, indices=[1]))
    from qidlaws.scenarios import realize

    (pair,) = realize(spec)
    assert pair.G == PiecewiseBV.step(1.0, 0.5)
    assert pair.gamma == pytest.approx(math.sin(1.0))


@pytest.mark.parametrize(
    "text,where",
    [
        ("", "line 1"),
        ('{"schema": 1,\n "family": "example1",\n "indices": [1, 2,]}', "line 3"),
        (doc(family="nope"), "family: unknown family"),
        (doc(family="example1", indices=[1, 4, 2]), "indices[2]"),
        (doc(family="example1", indices=[1, 2.5]), "indices[1]"),
        (doc(family="example1", colour="red"), "unknown field(s) colour"),
        (doc(family="poisson", params={"lambda": "one"}), "params.lambda"),
        (doc(family="custom", explicit=[{"gamma": 0, "atoms": [[1, 2, 3]]}]), "explicit[0].atoms[0]"),
        (doc(family="custom", explicit=[{"gamma": 0, "segments": [[1, 0]]}]), "explicit[0].segments[0]"),
        (doc(family="custom", explicit=[{"atoms": []}]), "explicit[0]: missing field 'gamma'"),
        (json.dumps({"family": "example1"}), "schema"),
        ("[1, 2]", "top level"),
    ],
)
def test_parse_errors_are_positional(text, where):
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(text)
    assert where in str(info.value)


@st.composite
def scenarios(draw):
    indices = tuple(sorted(draw(st.sets(st.integers(1, 10**6), min_size=1, max_size=6))))
    family = draw(st.sampled_from(["example1", "example3", "atom_drift", "qid_ratio", "poisson", "custom"]))
    if family == "custom":
        pairs = tuple(
            SpectralPair(draw(st.floats(-5, 5)), draw(bv_functions()), draw(st.floats(0.25, 4)))
            for _ in indices
        )
        return ScenarioSpec("custom", indices=indices, explicit=pairs)
    params = {}
    if family == "poisson":
        params = {"lambda": draw(st.floats(0.1, 5)), "location": draw(st.floats(-3, 3))}
    return ScenarioSpec(family, params, indices)


@given(scenarios())
@settings(max_examples=60, deadline=None)
def test_round_trip(spec):
    again = parse_scenario(serialize_scenario(spec))
    assert again == spec
    assert serialize_scenario(again) == serialize_scenario(spec)


# --- runs ------------------------------------------------------------------


def test_example1_end_to_end(tmp_path):
    out = tmp_path / "e1"
    assert main(["example", "--id", "1", "--output-dir", str(out)]) == EXIT["confirmed"]
    report = (out / "report.txt").read_text()
    assert "n=1: -2, n=2: 2, n=4: 2" in report and "n=256: 2" in report
    assert "classification: difference route confirmed, basic confirmed, weak refuted" in report
    rows = (out / "integral_cos_1_pi_x.csv").read_text().splitlines()
    assert rows[0] == "n,statistic" and rows[1] == "1,-2" and rows[2] == "2,2"
    meta = json.loads((out / "meta.json").read_text())
    assert meta["exit_status"] == 0 and meta["scenario"]["family"] == "example1"


def test_lemma1(tmp_path):
    out = tmp_path / "l1"
    assert main(["lemma1", "--t", "1", "--tau", "1", "--output-dir", str(out)]) == 0
    rows = (out / "lemma1.csv").read_text().splitlines()
    assert rows[0] == "x,residual" and len(rows) == 402
    assert max(float(r.split(",")[1]) for r in rows[1:]) < 1e-6


def test_empty_scenario_exits_1(tmp_path, capsys):
    path = write(tmp_path, "")
    assert main(["diagnose", "--scenario", path, "--output-dir", str(tmp_path / "o")]) == 1
    assert "line 1: empty scenario document" in capsys.readouterr().err
    assert "verdict: error (exit 1)" in (tmp_path / "o" / "report.txt").read_text()


def test_bad_grid_exits_1(capsys):
    assert main(["lemma1", "--t-min", "1"]) == 1
    assert "t_min < 0 < t_max" in capsys.readouterr().err


@pytest.mark.parametrize(
    "family,check,status",
    [("example1", "weak", 2), ("example3", "difference", 2), ("example3", "weak", 0), ("example2", "qid", 3)],
)
def test_exit_status_matches_verdict(tmp_path, family, check, status):
    path = write(tmp_path, doc(family=family))
    out = tmp_path / "o"
    code = main(["diagnose", "--scenario", path, "--check", check, "--output-dir", str(out)])
    assert code == status
    meta = json.loads((out / "meta.json").read_text())
    assert EXIT[meta["verdict"]] == code == meta["exit_status"]


def test_theorem_defaults(tmp_path):
    assert main(["theorem", "--id", "6", "--output-dir", str(tmp_path / "t6")]) == 0
    report = (tmp_path / "t6" / "report.txt").read_text()
    assert "mass_bound_holds: True" in report
    assert main(["theorem", "--id", "4", "--output-dir", str(tmp_path / "t4")]) == 0
    assert "misprint" in (tmp_path / "t4" / "report.txt").read_text()
    assert main(["theorem", "--id", "2", "--output-dir", str(tmp_path / "t2")]) == 1


def test_csv_outputs_are_byte_identical(tmp_path):
    path = write(tmp_path, doc(family="qid_ratio", indices=[1, 2, 4]))
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["cf-eval", "--scenario", path, "--t-min", "-5", "--t-max", "5", "--t-step", "0.5", "--output-dir", str(out)]) == 0
        outputs.append(out)
    a, b = (sorted(p.iterdir()) for p in outputs)
    assert [p.name for p in a] == [p.name for p in b]
    for x, y in zip(a, b):
        if x.name != "meta.json":  # meta records the output directory
            assert x.read_bytes() == y.read_bytes()
    rows = (outputs[0] / "cf.csv").read_bytes().split(b"\n")
    assert rows[0] == b"n,t,re,im" and b"\r" not in rows[1]
    assert len(rows) == 1 + 3 * 21 + 1


def test_recover_and_transform(tmp_path):
    path = write(tmp_path, doc(family="poisson", indices=[1]))
    assert main(["recover", "--scenario", path, "--output-dir", str(tmp_path / "r")]) == 0
    gamma = (tmp_path / "r" / "gamma.csv").read_text().splitlines()[1]
    assert float(gamma.split(",")[1]) == pytest.approx(math.sin(1.0), abs=1e-10)
    err = (tmp_path / "r" / "transform_error.csv").read_text().splitlines()[1]
    assert float(err.split(",")[1]) < 1e-4
    assert main(["transform", "--scenario", path, "--output-dir", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "transform.csv").exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "from-env"))
    args = build_parser().parse_args(["lemma1"])
    assert args.output_dir == str(tmp_path / "from-env")


def test_module_entry_point(tmp_path):
    env = dict(os.environ, **{OUTPUT_ENV: str(tmp_path / "sub")})
    proc = subprocess.run(
        [sys.executable, "-m", "qidlaws", "example", "--id", "3"], env=env, capture_output=True, text=True, timeout=120
    )
    assert proc.returncode == 0, proc.stderr
    assert "weak confirmed" in (tmp_path / "sub" / "report.txt").read_text()


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("plot")
    with pytest.raises(ValueError):
        RunConfig("lemma1", t_step=0.0)
    assert run(RunConfig("lemma1", output_dir="/proc/qidlaws-cannot-write")) == 1
