import csv
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dacfdi.cli import main
from dacfdi.scenario_file import ScenarioError, dump_scenario, parse_scenario
from dacfdi.scenarios import builtin

SMALL = """\
[graph]
nodes = 3
edges = [[1, 2], [2, 3]]

[estimator]
kind = "rac"

[signals]
amplitude = [1.0, 2.0, 3.0]
phase = [0.0, 0.5, 1.0]

[run]
t_end = 2.0
window = [1.0, 2.0]
"""


def write(tmp_path, text, name="sc.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def read_metrics(path):
    out = {}
    for line in path.read_text().splitlines():
        k, _, v = line.partition(" = ")
        out[k] = float(v)
    return out


def test_run_writes_bundle(tmp_path, capsys):
    sc = write(tmp_path, SMALL)
    assert main(["run", sc, "--out", str(tmp_path / "out")]) == 0
    with open(tmp_path / "out" / "trajectory.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "nu_1", "nu_2", "nu_3", "err_1", "err_2", "err_3", "phibar_1",
                       "fhat_1_2", "fhat_2_1", "fhat_2_3", "fhat_3_2",
                       "x2norm_1", "x2norm_2", "x2norm_3"]
    assert len(rows) == 1 + 201
    number = re.compile(r"^-?(\d+(\.\d*)?|\.\d+)(e[+-]\d+)?$|^nan$")
    assert all(number.match(v) for r in rows[1:] for v in r)
    m = read_metrics(tmp_path / "out" / "metrics.txt")
    assert {"max_rms_err_1_2", "rms_err_node3_1_2", "conditions_ok"} <= set(m)
    assert "wrote" in capsys.readouterr().out


def test_zero_input_columns(tmp_path):
    text = SMALL.replace("amplitude = [1.0, 2.0, 3.0]", "amplitude = [0.0, 0.0, 0.0]")
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path)]) == 0
    data = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True)
    for k in (1, 2, 3):
        assert not np.any(data[f"nu_{k}"])


def test_run_is_byte_reproducible(tmp_path):
    sc = write(tmp_path, SMALL)
    main(["run", sc, "--out", str(tmp_path / "a")])
    main(["run", sc, "--out", str(tmp_path / "b")])
    for f in ("trajectory.csv", "metrics.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_accommodated_builtin_metric(tmp_path):
    assert main(["run", "example1_isac/accommodated", "--out", str(tmp_path)]) == 0
    m = read_metrics(tmp_path / "metrics.txt")
    assert m["rms_err_node1_40_50"] < 1e-3
    assert m["max_rms_err_40_50"] < 1e-3
    assert m["rms_fhat_err_1_2_35_50"] < 1e-3


def test_malformed_edges_name_the_line(tmp_path, capsys):
    text = SMALL.replace("edges = [[1, 2], [2, 3]]", "edges = [[1, 2], [2]]")
    assert main(["check", write(tmp_path, text)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_unknown_section_and_syntax_errors(tmp_path, capsys):
    assert main(["check", write(tmp_path, SMALL + "\n[bogus]\nx = 1\n")]) == 1
    assert "line 16" in capsys.readouterr().err
    assert main(["check", write(tmp_path, "[graph\nnodes = 3\n")]) == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["check", str(tmp_path / "missing.toml")]) == 1


def test_check_default_passes(capsys):
    assert main(["check", "example1_isac"]) == 0
    out = capsys.readouterr().out
    assert "all checks: PASS" in out and "lambda_2 = 0.267949192" in out


def test_check_wrong_internal_model(tmp_path, capsys):
    text = SMALL.replace('kind = "rac"', 'kind = "isac"\ng_num = [1.0]\ng_den = [0.0, 1.0]')
    assert main(["check", write(tmp_path, text)]) == 3
    assert "cond (iv) d_g = p_g d: FAIL" in capsys.readouterr().out


def test_check_disconnected_graph(tmp_path, capsys):
    text = SMALL.replace("edges = [[1, 2], [2, 3]]", "edges = [[1, 2]]")
    assert main(["check", write(tmp_path, text)]) == 3
    out = capsys.readouterr().out
    assert "lambda_2 = 0" in out and "premise connected graph (lambda_2 > 0): FAIL" in out


def test_design_reference_isac(capsys):
    assert main(["design", "example1_isac"]) == 0
    out = capsys.readouterr().out
    assert "H^T =\n  [0, 0, 1]" in out
    assert "  [-3, -6.75, 0]" in out
    assert "eig(F) = -100+0j, -3+2.59808j, -3-2.59808j" in out
    assert "K^T =\n  [1, 0, -3]" in out  # K1 + F H collapses for H = E


def test_design_default_pole_rac(capsys):
    assert main(["design", "example1_rac"]) == 0
    assert "F Hurwitz: yes" in capsys.readouterr().out


def test_design_existence_failure(tmp_path, capsys):
    text = SMALL.replace('kind = "rac"', 'kind = "isac"\nh_num = [-1.0, -2.0]\nh_den = [2.0, 1.0, 1.0]')
    assert main(["design", write(tmp_path, text)]) == 3
    assert "invariant zeros" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path, capsys):
    text = SMALL + "\n[initial]\nx1 = [[1e308, 1e308], [0.0, 0.0], [0.0, 0.0]]\n"
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path)]) == 2
    assert "divergence at t=" in capsys.readouterr().err


def test_overrides_and_usage(tmp_path):
    assert main(["run", "example2_rac/fault", "--t-end", "1", "--dt", "0.002",
                 "--out", str(tmp_path)]) == 0
    data = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True)
    assert data["t"][-1] == 1.0 and data["t"][1] == pytest.approx(0.02)
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert main(["check", "example1_isac/bogus"]) == 1


@pytest.mark.parametrize("name", ["example1_isac/fault", "example2_rac/accommodated",
                                  "example1_rac/clean", "example2_isac/fault"])
def test_builtin_round_trip(name):
    sc = builtin(name)
    again = parse_scenario(dump_scenario(sc), name=sc.name)
    assert again == sc
    assert dump_scenario(again) == dump_scenario(sc)


def test_export_then_run(tmp_path):
    out = tmp_path / "ex.toml"
    assert main(["export", "example2_rac/accommodated", "-o", str(out)]) == 0
    assert parse_scenario(out.read_text()) == builtin("example2_rac/accommodated")


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3),
       st.lists(st.floats(0, 6.3), min_size=3, max_size=3),
       st.booleans(), st.sampled_from(["isac", "rac"]))
def test_file_round_trip(amps, phases, acc, kind):
    text = SMALL.replace("amplitude = [1.0, 2.0, 3.0]", f"amplitude = {[float(a) for a in amps]}")
    text = text.replace("phase = [0.0, 0.5, 1.0]", f"phase = {[float(p) for p in phases]}")
    text = text.replace('kind = "rac"', f'kind = "{kind}"')
    text += f"accommodation = {'true' if acc else 'false'}\n"
    sc = parse_scenario(text)
    assert parse_scenario(dump_scenario(sc)) == sc


def test_parse_error_carries_line():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(SMALL.replace("nodes = 3", 'nodes = "three"'))
    assert exc.value.line == 2
