from pathlib import Path

import numpy as np
import pytest

from ismc.config import ConfigError, load_config, locate, parse_config

CONFIGS = Path(__file__).parent.parent / "configs"

BASE = """\
seed = 5
trials = 2
method = "is"
integrands = ["x0", "x0^2"]

[target]
name = "std-gaussian"
dim = 1

[is]
samples = 100
proposal = { family = "gaussian", location = [0.0], cov = 4.0 }
"""


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_are_valid(path):
    exp = load_config(path)
    assert exp.trials >= 1
    exp.build_target()
    exp.build_integrands()


def test_parse_is_config():
    exp = parse_config(BASE)
    assert exp.master_seed == 5 and exp.trials == 2 and exp.method == "is"
    assert exp.integrands == ("x0", "x0^2")
    assert exp.is_cfg["samples"] == 100
    assert exp.output_format == "csv" and exp.output_path is None
    q = exp.build_is_proposal()
    assert q.params.scale[0, 0] == 4.0


def error_line(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text, source="exp.toml")
    return info.value.line, str(info.value)


@pytest.mark.parametrize(
    "old,new,line,fragment",
    [
        ("seed = 5", "seed = -5", 1, "seed"),
        ("trials = 2", "trials = 0", 2, "trials"),
        ('method = "is"', 'method = "smc"', 3, "method"),
        ('integrands = ["x0", "x0^2"]', 'integrands = ["x3"]', 4, "x3"),
        ('name = "std-gaussian"', 'name = "rosenbrock"', 7, "rosenbrock"),
        ("samples = 100", "samples = 0", 11, "samples"),
        ("samples = 100", 'samples = "many"', 11, "wrong type"),
        ("cov = 4.0", "cov = -4.0", 12, "positive definite"),
        ("dim = 1", "dim = 1\ncolour = 3", 9, "colour"),
    ],
)
def test_errors_carry_line_numbers(old, new, line, fragment):
    got_line, msg = error_line(BASE.replace(old, new))
    assert got_line == line
    assert msg.startswith(f"exp.toml:{line}:")
    assert fragment in msg


def test_missing_seed_and_syntax_error():
    _, msg = error_line(BASE.replace("seed = 5\n", ""))
    assert "seed" in msg
    line, msg = error_line(BASE.replace("dim = 1", "dim = = 1"))
    assert line == 8 and "syntax" in msg


def test_unknown_top_level_key():
    line, msg = error_line("speed = 3\n" + BASE)
    assert line == 1 and "speed" in msg


MIS = """\
seed = 1
method = "mis"

[target]
name = "gaussian-mixture"
dim = 1
params = { means = [[-3.0], [3.0]], weights = [0.5, 0.5], vars = [1.0, 1.0] }

[mis]
scheme = "partial_dm"
partition = [[0, 1], [2]]
proposals = [
  { family = "gaussian", location = [-3.0], cov = 1.0 },
  { family = "gaussian", location = [0.0], cov = 1.0 },
  { family = "student-t", location = [3.0], scale = 1.0, dof = 5 },
]
"""


def test_parse_mis_config():
    exp = parse_config(MIS)
    assert exp.build_scheme("partial_dm").partition == ((0, 1), (2,))
    assert [q.family for q in exp.build_mis_proposals()] == ["gaussian", "gaussian", "student-t"]


def test_mis_partition_error_line():
    line, msg = error_line(MIS.replace("[[0, 1], [2]]", "[[0, 1], [1, 2]]"))
    assert line == 10 and "partition" in msg


AIS = """\
seed = 1
method = "ais"

[target]
name = "banana"
dim = 2

[ais]
algorithm = "dm-pmc"
n_proposals = 4
samples_per_proposal = 2
iterations = 3
init_uniform = [-5.0, 5.0]
"""


def test_parse_ais_algorithm_presets():
    exp = parse_config(AIS)
    assert exp.ais_cfg["adapter"] == "pmc_resample"
    assert exp.ais_cfg["weighting"] == "spatial_mixture"
    cfg = exp.build_ais_config(np.random.default_rng(0))
    assert cfg.n_proposals == 4 and cfg.dim == 2
    locs = np.array([p.location for p in cfg.init_params])
    assert np.all((locs >= -5) & (locs <= 5))
    n_pmc = parse_config(AIS.replace("dm-pmc", "n-pmc"))
    assert n_pmc.ais_cfg["clip_tau"] == "auto"
    amis = parse_config(AIS.replace('"dm-pmc"', '"amis"').replace("n_proposals = 4\n", ""))
    assert amis.ais_cfg["n_proposals"] == 1


def test_ais_errors():
    line, msg = error_line(AIS.replace('"dm-pmc"', '"m-pmc"'))
    assert line == 9 and "algorithm" in msg
    line, msg = error_line(AIS + "init_locations = [[0.0, 0.0]]\n")
    assert line == 8 and "exactly one" in msg
    line, msg = error_line(AIS.replace('algorithm = "dm-pmc"', 'algorithm = "amis"'))
    assert "n_proposals" in msg
    line, msg = error_line(AIS.replace("iterations = 3", "iterations = 0"))
    assert line == 12


def test_locate():
    text = "a = 1\n[t]\nb = 2\n  c = 3\n[u]\nb = 4\n"
    assert locate(text, None, "a") == 1
    assert locate(text, "t", "c") == 4
    assert locate(text, "u", "b") == 6
    assert locate(text, "u", "zzz") == 5
    assert locate(None, "u", "b") is None


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "missing.toml")
    assert "cannot read" in str(info.value)
