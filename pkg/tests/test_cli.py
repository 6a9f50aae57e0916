import json
import shutil
import subprocess
import sys

import pytest

from dynrmat import elliptic as ell
from dynrmat.harness.cli import dumps17, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_passes_with_exit_zero(capsys):
    code, out, _ = run_cli(capsys, "verify", "--suite", "elliptic", "--samples", "5")
    assert code == 0
    assert "THIRD" in out


def test_verify_failure_gives_exit_one(tmp_path, capsys):
    cfg = tmp_path / "tight.json"
    cfg.write_text(json.dumps({"suites": ["elliptic"], "relations": ["CUB"], "samples": 3, "tol": 1e-300}))
    code, _, _ = run_cli(capsys, "verify", "--config", str(cfg), "--quiet")
    assert code == 1


@pytest.mark.parametrize("content", ["{not json", json.dumps({"N": 1}), json.dumps({"unknown_key": 3}),
                                     json.dumps([1, 2])])
def test_bad_config_gives_exit_two(tmp_path, capsys, content):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    code, _, err = run_cli(capsys, "verify", "--config", str(cfg))
    assert code == 2
    assert "configuration error" in err


def test_missing_config_and_unknown_relation(tmp_path, capsys):
    assert run_cli(capsys, "verify", "--config", str(tmp_path / "absent.json"))[0] == 2
    assert run_cli(capsys, "verify", "--relations", "NOPE")[0] == 2


def test_argument_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--samples", "many"])
    assert exc.value.code == 2


def test_json_report_to_file_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run_cli(capsys, "verify", "--suite", "face", "--samples", "4", "--json", str(p), "--quiet")[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    data = json.loads(paths[0].read_text())
    assert data["schema"] == 1 and data["pass"] is True


def test_eval_theta_prints_seventeen_digits(capsys):
    code, out, _ = run_cli(capsys, "eval", "--object", "theta", "--z", "0.2+0.1i", "--tau", "0.31+1.27i")
    assert code == 0
    data = json.loads(out)
    ctx = ell.EllipticContext(0.31 + 1.27j)
    assert complex(*data["value"]) == ell.theta(0.2 + 0.1j, ctx)
    assert '"value": [' in out


@pytest.mark.parametrize("argv", [
    ["--object", "R", "--N", "2", "--z", "0.3+0.1i", "--w=-0.2+0.4i"],
    ["--matrix", "RB", "--N", "2", "--d", "0.15+0.2i"],
    ["--object", "rbar", "--N", "3", "--z", "0.3+0.1i"],
    ["--fn", "phi", "--z", "0.3+0.1i", "--s", "0.2-0.1i"],
    ["--object", "I_2", "--N", "3", "--z", "0.3+0.1i"],
    ["--object", "L_RS", "--N", "2", "--z", "0.3+0.1i"],
])
def test_eval_objects(capsys, argv):
    code, out, _ = run_cli(capsys, "eval", *argv)
    assert code == 0
    assert json.loads(out)["object"] == argv[1]


def test_eval_rejects_unknown_object_and_missing_arguments(capsys):
    assert run_cli(capsys, "eval", "--object", "banana", "--z", "0.1")[0] == 2
    assert run_cli(capsys, "eval", "--object", "R", "--z", "0.1+0.2i")[0] == 2
    assert run_cli(capsys, "eval", "--object", "I_9", "--N", "3", "--z", "0.1+0.2i")[0] == 2
    assert run_cli(capsys, "eval", "--object", "theta", "--z", "0")[0] == 0
    assert run_cli(capsys, "eval", "--object", "phi", "--z", "0", "--s", "0.3")[0] == 2


def test_family_table_and_json(capsys):
    code, out, _ = run_cli(capsys, "family", "--N", "2", "--z", "0.3+0.1i")
    assert code == 0 and "I_2:" in out
    code, out, _ = run_cli(capsys, "family", "--N", "2", "--z", "0.3+0.1i", "--json")
    assert [e["k"] for e in json.loads(out)["family"]] == [0, 1, 2]


def test_dumps17_round_trips_floats():
    x = 0.1 + 0.2
    assert float(json.loads(dumps17({"x": x}))["x"]) == x
    with pytest.raises(ell.ConfigurationError):
        dumps17(float("inf"))


def test_console_script_is_byte_identical():
    exe = shutil.which("dynrmat")
    cmd = [exe] if exe else [sys.executable, "-m", "dynrmat.harness"]
    cmd += ["verify", "--suite", "elliptic", "--samples", "4", "--json", "-", "--quiet"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and json.loads(a)["pass"] is True


def test_eval_theta_at_tau_i_matches_triple_product(capsys):
    import numpy as np

    code, out, _ = run_cli(capsys, "eval", "--fn", "theta", "--z", "0.3", "--tau", "1i")
    q = np.exp(-np.pi)
    m = np.arange(1, 200)
    oracle = 2 * q**0.25 * np.sin(0.3 * np.pi) * np.prod((1 - q ** (2 * m)) * (1 - 2 * q ** (2 * m) * np.cos(0.6 * np.pi) + q ** (4 * m)))
    assert code == 0
    assert abs(complex(*json.loads(out)["value"]) - oracle) < 1e-12
