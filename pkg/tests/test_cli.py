import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from artifact.cli import (EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, config_hash,
                          load_config, main)
from artifact.errors import ConfigError
from artifact.suites import bundled_suites, suite_config

KIND1_TOML = """\
action = "{action}"
expect = "kind1"

[grid]
N = 400
R_max = 20.0

[potential]
family = "square_well"
params = [1.0]

[tune]
wave = 0
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_list_suites(capsys):
    assert main(["--list-suites"]) == EXIT_OK
    assert capsys.readouterr().out.split() == bundled_suites()


def test_bundled_suites_parse():
    assert len(bundled_suites()) == 5
    for name in bundled_suites():
        assert suite_config(name)["suite"] == name
    with pytest.raises(KeyError):
        suite_config("nope")


def test_classify_run_writes_report(tmp_path, capsys):
    cfg = write(tmp_path, KIND1_TOML.format(action="classify"))
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["threshold"]["classification"] == "kind1"
    assert rep["passed"] is True
    assert rep["metadata"]["kernel_backend"] in ("numba", "numpy")
    assert "classification: kind1" in capsys.readouterr().out


def test_malformed_toml_writes_nothing(tmp_path, capsys):
    cfg = write(tmp_path, "action = \n[grid\n")
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "malformed TOML" in capsys.readouterr().err


@pytest.mark.parametrize("patch, needle", [
    (("N = 400", "N = -4"), "line 5: [grid] N: must be positive"),
    (('family = "square_well"', 'family = "cubic"'), "line 9: [potential] family"),
    (("wave = 0", "wav = 0"), "[tune]"),
    (('expect = "kind1"', 'expect = "kind7"'), "line 2: expect"),
])
def test_config_errors_are_located(tmp_path, patch, needle):
    cfg = write(tmp_path, KIND1_TOML.format(action="classify").replace(*patch))
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert needle in str(exc.value)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.toml")]) == EXIT_CONFIG


def test_numerical_failure_exit(tmp_path, capsys):
    cfg = write(tmp_path, KIND1_TOML.format(action="tune") + "bracket = [0.1, 0.2]\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL
    assert "TuningError" in capsys.readouterr().err


def test_acceptance_failure_exit(tmp_path):
    text = KIND1_TOML.format(action="classify").replace("[tune]\nwave = 0\n", "")
    text = text.replace('params = [1.0]', 'params = [1.0]\ncoupling = 1.0')
    cfg = write(tmp_path, text)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_ACCEPTANCE
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["threshold"]["classification"] == "generic"
    assert rep["passed"] is False


def test_suite_key_in_config(tmp_path):
    cfg = write(tmp_path, 'suite = "kind1-well"\naction = "classify"\n')
    parsed = load_config(cfg)
    assert parsed.suite == "kind1-well" and parsed.expect == "kind1"
    bad = write(tmp_path, 'suite = "nope"\n', "bad.toml")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(bad)


def test_config_hash_is_git_blob_sha():
    raw = {"b": 1, "a": [1, 2]}
    body = b'{"a":[1,2],"b":1}'
    assert config_hash(raw) == hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def test_trace_csv_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["--suite", "generic-well", "--action", "evolve", "--out", str(out)]) == EXIT_OK
        outs.append((out / "traces" / "generic-well.csv").read_bytes())
    assert outs[0] == outs[1]
    head = outs[0].split(b"\r\n")[0]
    assert head == b"time,norm_kind,value,residual_value,wave_breakdown"


def test_plots_are_reproducible(tmp_path):
    pytest.importorskip("matplotlib")
    svgs = []
    for k in range(2):
        out = tmp_path / f"p{k}"
        main(["--suite", "generic-well", "--action", "evolve", "--plots", "--out", str(out)])
        svgs.append((out / "plots" / "generic-well.svg").read_bytes())
    assert svgs[0] == svgs[1] and b"<svg" in svgs[0]


def test_report_reuse_matches_fresh_run(tmp_path):
    first = tmp_path / "first"
    cfg = write(tmp_path, KIND1_TOML.format(action="laurent"))
    assert main(["--config", str(cfg), "--out", str(first)]) == EXIT_OK
    reuse = write(tmp_path, KIND1_TOML.format(action="laurent")
                  + f'\n[threshold]\nfrom_report = "{first / "report.json"}"\n', "reuse.toml")
    second = tmp_path / "second"
    assert main(["--config", str(reuse), "--out", str(second)]) == EXIT_OK
    a = json.loads((first / "report.json").read_text())
    b = json.loads((second / "report.json").read_text())
    assert "reused_report" in b and "tuning" not in b
    for key in ("norm_A_minus2", "norm_A_minus1", "norm_A_0"):
        assert b["laurent"][key] == pytest.approx(a["laurent"][key], rel=1e-12)
    assert b["threshold"]["a"] == a["threshold"]["a"]


def test_verify_kernels_needs_no_potential(tmp_path):
    cfg = write(tmp_path, 'action = "verify-kernels"\n')
    assert main(["--config", str(cfg), "--out", str(tmp_path / "k")]) == EXIT_OK
    rep = json.loads((tmp_path / "k" / "report.json").read_text())
    assert set(rep["kernels"]) == {"resolvent", "d_resolvent", "diffq1", "d_diffq1", "diffq2", "d_diffq2"}
    assert rep["timings"]["kernels"] < 1.0


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "artifact", "--list-suites"],
                         capture_output=True, text=True, check=True)
    assert "kind1-well" in res.stdout


def test_numpy_backend_agrees_with_numba(tmp_path):
    script = ("import json, numpy as np\n"
              "from artifact.cli import parse_config, run_pipeline\n"
              "from artifact.suites import suite_config\n"
              "from artifact import _kernels\n"
              "rep, _, _ = run_pipeline(parse_config(suite_config('kind1-well', 'evolve')))\n"
              "print(json.dumps({'backend': _kernels.BACKEND,"
              " 'sup': rep['evolution']['fitted_exponents']['sup_interior']['exponent'],"
              " 'a': rep['threshold']['a']}))\n")
    results = []
    for flag in ("0", "1"):
        env = dict(os.environ, ARTIFACT_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True,
                             text=True, check=True)
        results.append(json.loads(out.stdout.strip().splitlines()[-1]))
    assert results[1]["backend"] == "numpy"
    assert results[0]["sup"] == pytest.approx(results[1]["sup"], rel=1e-10)
    np.testing.assert_allclose(results[0]["a"], results[1]["a"], rtol=1e-12)
