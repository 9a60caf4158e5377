import json
import subprocess
import sys

import pytest

from hiercan.cli import clean, main
from hiercan.config import ConfigError, config_hash, load, resolve

BASE = """
[params]
family = "polynomial"
a = 0.0
b = 0.0
const_mu = 0.5

[environment]
law = "two_point"
lo = 0.5
hi = 1.5
seed = 7

[model]
N = 3
K = 2
M = 6
d0 = 0.5

[run]
seed = 1
kmax = 50
horizons = [1.0, 5.0]
replicas = 1200
level_cut = 3
horizon = 3.0
n_particles = 100
j = [100]
alpha = [[1.0, 0.5]]
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(BASE)
    return p


@pytest.fixture
def case_c_file(tmp_path):
    # b = -1 puts the flat family into the slow-growth case with a delta limit
    p = tmp_path / "case_c.toml"
    p.write_text(BASE.replace("b = 0.0", "b = -1.0"))
    return p


def _run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd", ["classify", "recursion", "coalescent", "hazard", "forward", "mkv", "delta",
                                 "report"])
def test_commands_write_outputs(cmd, case_c_file, tmp_path, capsys):
    out = tmp_path / "out"
    code, stdout, err = _run([cmd, "--config", str(case_c_file), "--out", str(out)], capsys)
    assert code == 0, err
    json.loads(stdout)
    doc = json.loads((out / f"{cmd}.json").read_text())
    assert doc["command"] == cmd and doc["config_hash"] == load(case_c_file).hash


def test_delta_without_limit_is_runtime_error(cfg_file, tmp_path, capsys):
    code, _, err = _run(["delta", "--config", str(cfg_file), "--out", str(tmp_path)], capsys)
    assert code == 1 and "no variance-increment limit" in json.loads(err)["message"]


def test_classify_flat_is_clustering(cfg_file, tmp_path, capsys):
    code, stdout, _ = _run(["classify", "--config", str(cfg_file), "--out", str(tmp_path)], capsys)
    res = json.loads(stdout)
    assert code == 0 and res["dichotomy"]["regime"] == "clustering"


def test_recursion_csv(cfg_file, tmp_path, capsys):
    code, _, _ = _run(["recursion", "--config", str(cfg_file), "--out", str(tmp_path), "--format", "csv"], capsys)
    lines = (tmp_path / "recursion_trace.csv").read_text().splitlines()
    assert code == 0
    assert lines[0] == f"# config_hash={load(cfg_file).hash}"
    assert len(lines) == 2 + 51


def test_unknown_key_exit_2(cfg_file, tmp_path, capsys):
    cfg_file.write_text(BASE.replace('a = 0.0', 'a = 0.0\nbogus = 1'))
    code, _, err = _run(["classify", "--config", str(cfg_file), "--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads(err) == {"error": "config", "key": "params.bogus", "message": "unknown key"}


@pytest.mark.parametrize("old,new,key", [('lo = 0.5', 'lo = -0.5', "environment"),
                                         ('N = 3', 'N = 1', "model.N"),
                                         ('family = "polynomial"', 'family = "cubic"', "params.family"),
                                         ('horizons = [1.0, 5.0]', 'horizons = "x"', "run.horizons")])
def test_invalid_values_exit_2(cfg_file, tmp_path, capsys, old, new, key):
    cfg_file.write_text(BASE.replace(old, new))
    code, _, err = _run(["classify", "--config", str(cfg_file), "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(err)["key"].startswith(key)


def test_missing_file_exit_2(tmp_path, capsys):
    code, _, err = _run(["classify", "--config", str(tmp_path / "nope.toml")], capsys)
    assert code == 2 and json.loads(err)["error"] == "config"


def test_runtime_failure_exit_1(cfg_file, tmp_path, capsys):
    # an explicit sequence too short for the requested recursion depth
    cfg_file.write_text(BASE.replace('family = "polynomial"\na = 0.0\nb = 0.0\nconst_mu = 0.5',
                                     'family = "explicit"\nc = [1.0, 1.0]\nlam = [1.0, 1.0]'))
    code, _, err = _run(["recursion", "--config", str(cfg_file), "--out", str(tmp_path)], capsys)
    assert code == 1 and json.loads(err)["error"] == "runtime"


def test_seed_override_changes_hash(cfg_file, tmp_path, capsys):
    _run(["coalescent", "--config", str(cfg_file), "--out", str(tmp_path / "a")], capsys)
    _run(["coalescent", "--config", str(cfg_file), "--out", str(tmp_path / "b"), "--seed", "2"], capsys)
    a = json.loads((tmp_path / "a" / "coalescent.json").read_text())
    b = json.loads((tmp_path / "b" / "coalescent.json").read_text())
    assert a["config_hash"] != b["config_hash"] and b["config"]["run"]["seed"] == 2


def test_workers_do_not_change_output(cfg_file, tmp_path, capsys):
    for w in ("1", "2"):
        _run(["coalescent", "--config", str(cfg_file), "--out", str(tmp_path / w), "--workers", w], capsys)
    assert (tmp_path / "1" / "coalescent.json").read_bytes() == (tmp_path / "2" / "coalescent.json").read_bytes()


def test_hash_ignores_output_section(cfg_file):
    a = load(cfg_file)
    raw = {"params": {"family": "polynomial"}, "output": {"dir": "elsewhere"}}
    assert config_hash(resolve(raw).resolved) == config_hash(resolve({"params": {"family": "polynomial"}}).resolved)
    assert len(a.hash) == 16


def test_json_config_accepted(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"params": {"family": "exponential", "c": 2.0}}))
    assert load(p).params.to_dict()["family"] == "exponential"
    with pytest.raises(ConfigError):
        resolve({"params": {"family": "explicit", "c": [1.0]}})


def test_clean_non_finite():
    assert clean({"a": float("inf"), "b": [float("nan"), 1.0]}) == {"a": "inf", "b": ["nan", 1.0]}


def test_module_entry_point(case_c_file, tmp_path):
    r = subprocess.run([sys.executable, "-m", "hiercan", "delta", "--config", str(case_c_file), "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "table" in json.loads(r.stdout)
