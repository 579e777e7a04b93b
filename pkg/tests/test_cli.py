import io
import json
import math
import os
from pathlib import Path

import pytest

from bgd_harmonics.cli import dumps, fmt, main
from bgd_harmonics.registry import EXAMPLES

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("BGD_REGEN_GOLDEN") == "1"


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def run_json(*argv):
    code, text = run(*argv)
    return code, json.loads(text)


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_fmt_and_dumps():
    assert fmt(1 / 3) == "0.33333333333333331"
    assert fmt(float("nan")) == "NaN"
    assert json.loads(dumps({"a": [1, 0.1], "b": None, "c": True})) == {"a": [1, 0.1], "b": None, "c": True}


# --------------------------------------------------------------- validate


def test_validate_example():
    code, rep = run_json("validate", "--example", "sg-bottom")
    assert code == 0 and rep["ok"]


def test_validate_malformed_json(tmp_path):
    code, _ = run("validate", "--input", write(tmp_path, "bad.json", "{not json"))
    assert code == 1


def test_validate_missing_file():
    assert run("validate", "--input", "/nonexistent/spec.json")[0] == 1


def test_validate_reports_closure_violation(tmp_path):
    doc = json.loads(json.dumps(EXAMPLES["sg-cut"].document))
    doc["domains"][1]["in_v0"] = []
    code, rep = run_json("validate", "--input", write(tmp_path, "spec.json", doc))
    assert code == 2
    msgs = {c["name"]: c["message"] for c in rep["checks"] if not c["passed"]}
    assert "edges [2]" in msgs["domain[1].v0_closure"]


def test_validate_incompatible_structure(tmp_path):
    doc = json.loads(json.dumps(EXAMPLES["sg-bottom"].document))
    doc["structure"]["renorm"] = [0.5, 0.5, 0.5]
    code, rep = run_json("validate", "--input", write(tmp_path, "spec.json", doc))
    assert code == 2
    assert "compatible" in [c["name"] for c in rep["checks"] if not c["passed"]]


# --------------------------------------------------------------- matrices


def test_matrices_sg_cut_negative_entry():
    code, doc = run_json("matrices", "--example", "sg-cut")
    assert code == 0
    m2 = doc["matrices"][1]["matrix"]
    assert m2[0][2] == pytest.approx(-1 / 3, abs=1e-9)
    assert doc["bracket_width"] < 1e-10


def test_matrices_vicsek():
    _, doc = run_json("matrices", "--example", "vicsek")
    assert doc["matrices"][2]["matrix"][3][2] == pytest.approx((math.sqrt(69) - 7) / 4, abs=1e-9)


def test_matrices_coarse_tolerance(capsys):
    code, doc = run_json("matrices", "--example", "sg-bottom", "--tol", "1e-3")
    assert code == 0 and doc["tol"] == 1e-3
    assert 0 <= doc["bracket_width"] < 1e-3
    assert "bracket width" in capsys.readouterr().err


def test_matrices_no_convergence():
    assert run("matrices", "--example", "sg-cut", "--max-iter", "2")[0] == 3


def test_matrices_csv_rows():
    code, text = run("matrices", "--example", "sg-bottom", "--format", "csv")
    lines = text.splitlines()
    assert lines[0] == "edge,row,col,value" and len(lines) == 1 + 2 * 9


def test_trace_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("BGD_HARMONICS_CACHE", str(tmp_path))
    first = run("trace", "--example", "sg-cut")
    assert len(list(tmp_path.iterdir())) == 1
    assert run("trace", "--example", "sg-cut") == first


# ---------------------------------------------------------------- measure


def test_measure_sg_bottom_uniform():
    code, text = run("measure", "--example", "sg-bottom", "-k", "3", "-m", "3", "--format", "csv")
    rows = [line.split(",") for line in text.splitlines()[1:-1]]
    assert code == 0 and len(rows) == 8
    assert all(float(p) == pytest.approx(0.125, abs=1e-9) for _, p in rows)
    assert text.splitlines()[-1].startswith("# total 0.99999")


def test_measure_hexagasket():
    _, doc = run_json("measure", "--example", "hexagasket", "-k", "5", "-m", "1")
    assert [r["probability"] for r in doc["measure"]] == pytest.approx([1 / 3, 2 / 3], abs=1e-9)


def test_measure_sg_cut_dirac_terms(tmp_path):
    plot = tmp_path / "plot.json"
    _, doc = run_json("measure", "--example", "sg-cut", "-k", "1", "-m", "4", "--plot-data", str(plot))
    masses = {r["word"]: r["probability"] for r in doc["measure"]}
    for n in range(4):
        assert masses["g1" * n + "g2" + "g3" * (3 - n)] == pytest.approx(2 / 3 ** (n + 1), abs=1e-9)
    cum = json.loads(plot.read_text())["cumulative"]
    assert cum[0] == [0, 0] and cum[-1][1] == pytest.approx(1.0)


def test_measure_errors():
    assert run("measure", "--example", "sg-cut", "-i", "1", "-k", "2")[0] == 2
    assert run("measure", "--example", "sg-cut", "-i", "9")[0] == 2
    assert run("measure", "--example", "sg-bottom", "-m", "40")[0] == 2
    assert run("measure")[0] == 1


# --------------------------------------------------------- poisson/energy


def test_poisson_inline_and_file(tmp_path):
    _, doc = run_json("poisson", "--example", "sg-cut", "--f", '{"g1": 1, "g2": 0}')
    assert doc["value"] == pytest.approx(1 / 3, abs=1e-9)
    path = write(tmp_path, "f.json", {"g1": 1, "g2": 0})
    _, doc = run_json("poisson", "--example", "sg-bottom", "--f", write(tmp_path, "g.json", {"g1": 1, "g2": 0}))
    assert doc["value"] == pytest.approx(0.5, abs=1e-9)
    _, doc = run_json("poisson", "--example", "sg-cut", "--f", path, "--v0-flux", '{"1": 0.5}')
    assert doc["value"] == pytest.approx(1 / 3 + 0.5 / 3, abs=1e-9)


def test_poisson_depth_mismatch():
    assert run("poisson", "--example", "sg-cut", "--f", '{"g1": 1, "g2": 0}', "-m", "2")[0] == 2
    assert run("poisson", "--example", "sg-cut", "--f", '{"g3": 1}')[0] == 2


def test_energy_constant_gives_nan_with_note():
    code, doc = run_json("energy", "--example", "sg-bottom", "--f", '{"g1": 1, "g2": 1}')
    assert code == 0 and math.isnan(doc["ratio"]) and "constant" in doc["note"]


def test_energy_indicator():
    _, doc = run_json("energy", "--example", "sg-bottom", "--f", '{"g1": 1, "g2": 0}')
    assert doc["harmonic_energy"] == pytest.approx(35 / 32, abs=1e-9)
    assert doc["ratio"] == pytest.approx(35 / 64, abs=1e-9)


def test_energy_batch_bracket():
    code, doc = run_json("energy", "--example", "hexagasket", "--batch", "20", "--seed", "1", "-m", "2")
    assert code == 0 and len(doc["samples"]) == 20
    lo, hi = doc["bracket"]
    assert 0 < lo <= hi < 1


def test_energy_needs_data():
    assert run("energy", "--example", "sg-bottom")[0] == 1
    assert run("energy", "--example", "sg-bottom", "--batch", "2")[0] == 2


# -------------------------------------------------------------- crosscheck


def test_crosscheck_sg_bottom():
    code, doc = run_json("crosscheck", "--example", "sg-bottom", "-m", "1", "-n", "8")
    assert code == 0 and doc["final_discrepancy"] < 1e-4 and "monte_carlo" not in doc


def test_crosscheck_direct_only_csv():
    code, text = run("crosscheck", "--example", "vicsek", "-m", "1", "-n", "7", "--walkers", "0", "--format", "csv")
    assert code == 0
    assert text.splitlines()[0] == "n,mode,max_discrepancy,node_count,solve_ms"


def test_crosscheck_monte_carlo_reproducible():
    argv = ["crosscheck", "--example", "hexagasket", "-m", "2", "-n", "8", "--walkers", "100000", "--seed", "7"]
    code, a = run_json(*argv)
    _, b = run_json(*argv, "--threads", "4")
    assert code == 0
    assert a["monte_carlo"] == b["monte_carlo"]
    assert all(r["z"] <= 3 for r in a["monte_carlo"]["rows"])


def test_crosscheck_threshold_exit():
    assert run("crosscheck", "--example", "sg-cut", "-m", "1", "-n", "3", "--threshold", "1e-12")[0] == 4


# ---------------------------------------------------------------- golden

GOLDEN_RUNS = {
    "matrices_sg-bottom.json": ["matrices", "--example", "sg-bottom"],
    "matrices_sg-cut.json": ["matrices", "--example", "sg-cut"],
    "matrices_hexagasket.json": ["matrices", "--example", "hexagasket"],
    "matrices_vicsek.json": ["matrices", "--example", "vicsek"],
    "measure_sg-bottom.csv": ["measure", "--example", "sg-bottom", "-k", "3", "-m", "3", "--format", "csv"],
    "measure_sg-cut.csv": ["measure", "--example", "sg-cut", "-k", "1", "-m", "4", "--format", "csv"],
    "measure_hexagasket.json": ["measure", "--example", "hexagasket", "-k", "5", "-m", "1"],
    "trace_vicsek.csv": ["trace", "--example", "vicsek", "--format", "csv"],
    "energy_hexagasket.json": ["energy", "--example", "hexagasket", "--batch", "3", "-m", "2", "--seed", "1"],
}


@pytest.mark.parametrize("name", sorted(GOLDEN_RUNS))
def test_golden_output(name):
    code, text = run(*GOLDEN_RUNS[name])
    assert code == 0
    path = GOLDEN / name
    if REGEN:
        path.write_text(text)
    assert text == path.read_text()
