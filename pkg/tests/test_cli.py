import csv
import io
import json
import math
import re
from pathlib import Path

import numpy as np
import pytest

from ismc import __version__, cli
from ismc.errors import PropernessError

CONFIGS = Path(__file__).parent.parent / "configs"

IS_CONFIG = """\
seed = 42
trials = 3
method = "is"
integrands = ["x0", "x0^2"]

[target]
name = "std-gaussian"
dim = 1

[is]
samples = 200
proposal = { family = "student-t", location = [0.5], scale = 2.0, dof = 4 }
"""


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def data_rows(text):
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    return list(csv.reader(lines))


def test_estimate_to_stdout(tmp_path):
    code, out, _ = run(["estimate", "--config", write(tmp_path, IS_CONFIG)])
    assert code == 0
    body, summary = out.split("\n\n")
    assert body.splitlines()[0] == f"# ismc {__version__} schema=1 command=estimate"
    rows = data_rows(body)
    assert rows[0] == ["trial", "iteration", "uis[x0]", "snis[x0]", "uis[x0^2]", "snis[x0^2]",
                       "log_z_hat", "ess_hat", "inv_max_weight", "target_evals",
                       "proposal_evals", "wall_time_ms"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert all(r[-1] == "" for r in rows[1:])
    assert all(r[-3:-1] == ["200", "200"] for r in rows[1:])
    srows = data_rows(summary)
    assert srows[0] == ["group", "quantity", "n", "mean", "variance", "oracle"]
    oracle = {r[1]: r[5] for r in srows[1:]}
    assert float(oracle["snis[x0^2]"]) == pytest.approx(1.0, abs=1e-8)
    assert float(oracle["log_z_hat"]) == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-15)


def test_numbers_have_17_significant_digits(tmp_path):
    _, out, _ = run(["estimate", "--config", write(tmp_path, IS_CONFIG)])
    row = data_rows(out.split("\n\n")[0])[1]
    value = row[3]
    assert float(value) == float(format(float(value), ".17g"))
    assert len(re.sub(r"[-.]|e.*", "", value).lstrip("0")) >= 15


def test_byte_identical_reruns_and_workers(tmp_path):
    cfg = write(tmp_path, IS_CONFIG)
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert run(["estimate", "--config", cfg, "--out", str(a)])[0] == 0
    assert run(["estimate", "--config", cfg, "--out", str(b)])[0] == 0
    assert run(["estimate", "--config", cfg, "--out", str(c), "--workers", "3"])[0] == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    summary = lambda p: p.with_name(p.stem + ".summary.csv").read_bytes()
    assert summary(a) == summary(b) == summary(c)


def test_more_trials_keep_earlier_rows(tmp_path):
    cfg = write(tmp_path, IS_CONFIG)
    _, three, _ = run(["estimate", "--config", cfg])
    _, five, _ = run(["estimate", "--config", cfg, "--trials", "5"])
    r3, r5 = data_rows(three.split("\n\n")[0]), data_rows(five.split("\n\n")[0])
    assert r5[: len(r3)] == r3 and len(r5) == 6


def test_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path, IS_CONFIG)
    assert run(["estimate", "--config", cfg])[1] != run(["estimate", "--config", cfg, "--seed", "7"])[1]


def test_timing_fills_wall_time(tmp_path):
    _, out, _ = run(["estimate", "--config", write(tmp_path, IS_CONFIG), "--timing"])
    rows = data_rows(out.split("\n\n")[0])[1:]
    assert all(float(r[-1]) >= 0 for r in rows)


def test_json_output(tmp_path):
    path = tmp_path / "out.json"
    code, _, _ = run(["estimate", "--config", write(tmp_path, IS_CONFIG),
                      "--format", "json", "--out", str(path)])
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["version"] == __version__ and doc["schema"] == 1
    assert doc["columns"][:2] == ["trial", "iteration"]
    assert len(doc["rows"]) == 3 and len(doc["summary"]) > 0


def test_dm_pmc_summary_counters(tmp_path):
    out = tmp_path / "dm.csv"
    code, _, _ = run(["ais", "--config", str(CONFIGS / "ais_dm_pmc.toml"), "--out", str(out),
                      "--trials", "2"])
    assert code == 0
    rows = data_rows((tmp_path / "dm.summary.csv").read_text())
    pooled = {r[1]: r for r in rows[1:] if r[0] == "pooled"}
    assert float(pooled["target_evals"][3]) == 1000
    assert float(pooled["proposal_evals"][3]) == 10000
    body = data_rows(out.read_text())
    iters = [r[1] for r in body[1:] if r[0] == "0"]
    assert iters == [str(j) for j in range(20)] + ["pooled"]


def test_compare_reports_variance_ratio(tmp_path):
    code, out, _ = run(["compare", "--config", str(CONFIGS / "compare_n1_n3.toml"),
                        "--trials", "20"])
    assert code == 0
    body, summary = out.split("\n\n")
    header = data_rows(body)[0]
    assert "snis[n1][x0]" in header and "snis[n3][x0]" in header
    assert "proposal_evals[n1]" in header and "proposal_evals[n3]" in header
    ratio = [r for r in data_rows(summary) if r[1] == "variance_ratio[n1/n3][x0]"]
    assert len(ratio) == 1 and float(ratio[0][3]) > 0
    rows = data_rows(body)[1:]
    i1, i3 = header.index("proposal_evals[n1]"), header.index("proposal_evals[n3]")
    assert all((r[i1], r[i3]) == ("2", "4") for r in rows)


def test_subcommand_must_match_method(tmp_path):
    code, _, err = run(["ais", "--config", write(tmp_path, IS_CONFIG)])
    assert code == 2 and "ais" in err


def test_config_error_exit_code(tmp_path):
    code, _, err = run(["estimate", "--config", write(tmp_path, IS_CONFIG.replace("samples = 200",
                                                                                 "samples = -1"))])
    assert code == 2
    assert re.search(r"exp\.toml:11: ", err)


def test_bad_flags_exit_code(tmp_path):
    cfg = write(tmp_path, IS_CONFIG)
    assert run(["estimate", "--config", cfg, "--workers", "0"])[0] == 2
    assert run(["estimate", "--config", cfg, "--trials", "0"])[0] == 2
    assert run(["estimate", "--config", cfg, "--seed", "-1"])[0] == 2
    assert run(["bogus"])[0] == 2
    assert run(["estimate"])[0] == 2


def test_properness_violation_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise PropernessError("proposal density is zero", np.array([1.5]))

    monkeypatch.setattr(cli, "run_experiment", boom)
    code, _, err = run(["estimate", "--config", write(tmp_path, IS_CONFIG)])
    assert code == 3
    assert "1.5" in err


def test_diag_identical_values(tmp_path):
    p = write(tmp_path, "-2.5\n" * 100, "w.txt")
    code, out, _ = run(["diag", p])
    assert code == 0
    vals = dict(line.split(",") for line in out.splitlines())
    assert float(vals["ess_hat"]) == 100 and vals["n"] == "100" and float(vals["fraction"]) == 1


def test_diag_hand_evaluated(tmp_path):
    text = "# weights\n" + "\n".join(repr(math.log(w)) for w in (0.5, 0.25, 0.25)) + "\n\n"
    code, out, _ = run(["diag", write(tmp_path, text, "w.txt")])
    vals = dict(line.split(",") for line in out.splitlines())
    assert round(float(vals["ess_hat"]), 4) == 2.6667
    assert float(vals["inv_max_weight"]) == pytest.approx(2.0)


def test_diag_accepts_minus_inf(tmp_path):
    code, out, _ = run(["diag", write(tmp_path, "0\n-inf\n-inf\n", "w.txt")])
    assert code == 0 and "ess_hat,1\n" in out


@pytest.mark.parametrize("text,line", [("", None), ("0\nabc\n", 2), ("0\nnan\n", 2), ("inf\n", 1),
                                       ("-inf\n-inf\n", None)])
def test_diag_errors(tmp_path, text, line):
    code, _, err = run(["diag", write(tmp_path, text, "w.txt")])
    assert code == 2
    if line is not None:
        assert f"w.txt:{line}:" in err


def test_diag_missing_file(tmp_path):
    assert run(["diag", str(tmp_path / "nope.txt")])[0] == 2


def test_cost_table():
    code, out, _ = run(["cost", "--K", "5", "--N", "10", "--J", "20"])
    assert code == 0
    rows = {r[0]: r for r in data_rows(out)[1:]}
    assert len(rows) == 8
    assert rows["dm-pmc"][4:] == ["1000", "10000"]
    code, out, _ = run(["cost", "--K", "50", "--J", "10", "--algorithm", "amis"])
    assert data_rows(out)[1] == ["amis", "50", "1", "10", "500", "5000"]
    assert run(["cost", "--K", "0"])[0] == 2


def test_log_level_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ISMC_LOG", "nonsense")
    assert run(["cost"])[0] == 0
