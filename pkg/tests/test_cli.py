import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from walrasian import PLC, Economy
from walrasian import io
from walrasian.cli import main

from conftest import EDGEWORTH, EQUILIBRIUM, IRRATIONAL, SQRT


@pytest.fixture
def files(tmp_path):
    def put(name, doc):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(doc))
        return str(path)
    return {
        "econ": put("econ", io.economy_to_dict(EDGEWORTH)),
        "eq": put("eq", io.allocation_to_dict(EQUILIBRIUM)),
        "irr": put("irr", io.allocation_to_dict(IRRATIONAL)),
        "bad": put("bad", io.allocation_to_dict([[1.5, 1.5], [1.5, 1.7]])),
        "price": put("price", {"schema_version": 1, "price": [0.5, 0.5]}),
        "replica": put("replica", io.allocation_to_dict(
            [[2.5, 0.5], [1, 2], [1.5, 1.5], [1, 2]], n=2)),
        "mixed": put("mixed", io.economy_to_dict(Economy.from_arrays(
            np.eye(2), [SQRT, PLC(np.array([[1.0, 2.0]]), np.zeros(1))]))),
        "malformed": str(tmp_path / "malformed.json"),
        "tmp": tmp_path,
    }


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_cmd_test_yes_and_no(files, capsys):
    code, doc = run(capsys, "test", files["econ"], files["eq"], "--epsilon", "0.05")
    assert code == 0 and doc["verdict"] == "yes"
    assert abs(doc["price"][0] - 0.5) <= 0.05
    io.validate(doc, "report")
    code, doc = run(capsys, "test", files["econ"], files["irr"], "--epsilon", "0.1")
    assert code == 0 and doc["verdict"] == "no"


def test_cmd_test_input_errors(files, capsys):
    assert main(["test", files["econ"], files["bad"]]) == 1
    assert main(["test", files["mixed"], files["eq"]]) == 1
    Path(files["malformed"]).write_text('{"schema_version": 1,\n "bundles": [[1, 2],\n}')
    assert main(["test", files["econ"], files["malformed"]]) == 1
    assert "malformed.json:3" in capsys.readouterr().err
    assert main(["test", files["econ"], files["eq"], "--tol", "-1"]) == 1
    assert main(["nonsense"]) == 1


def test_cmd_test_numerical_failure(files, capsys):
    # one projection step certifies neither containment nor separation
    assert main(["test", files["econ"], files["eq"], "--max-iters", "1"]) == 2
    assert "without certifying" in capsys.readouterr().err


def test_cmd_block(files, capsys):
    code, doc = run(capsys, "block", files["econ"], files["irr"], "--epsilon", "0.1",
                    "--k", "8", "--eta", "0.01")
    assert code == 0 and doc["certificate_ok"] and doc["coalition"]["size"] <= 8
    code, doc = run(capsys, "block", files["econ"], files["eq"], "--epsilon", "0.05")
    assert code == 0 and doc["coalition"] is None and doc["diagnostic"]
    assert main(["block", files["econ"], files["irr"], "--k", "0"]) == 1


def test_cmd_verify_params_convert(files, capsys):
    code, doc = run(capsys, "verify", files["econ"], files["eq"], files["price"])
    assert code == 0 and doc["passed"]
    code, doc = run(capsys, "params", files["econ"], "--epsilon", "0.2")
    assert code == 0 and doc["delta"] == pytest.approx(0.1) and doc["curvature_valid"]
    code, doc = run(capsys, "convert", files["econ"], files["eq"], files["price"])
    assert code == 0 and doc["passed"]


def test_cmd_replica(files, capsys):
    code, doc = run(capsys, "replica", files["econ"], files["replica"])
    assert code == 0 and not doc["equal_treatment"] and doc["violating_type"] == 0
    assert doc["certificate_ok"] and doc["coalition"]["size"] == 2
    code, doc = run(capsys, "replica", files["econ"], files["eq"], "--n", "3")
    assert code == 0 and doc["equal_treatment"] and len(doc["allocation"]["bundles"]) == 6


def test_cmd_oracle(files, capsys):
    code, doc = run(capsys, "oracle", "grid", files["econ"], files["irr"], "--epsilon", "0.095")
    assert code == 0 and doc["price"] is None
    code, doc = run(capsys, "oracle", "block", files["econ"], files["irr"], "--eta", "0.01")
    assert code == 0 and doc["coalition"]["size"] == 1


def test_output_file_and_determinism(files, capsys):
    out1, out2 = files["tmp"] / "a.json", files["tmp"] / "b.json"
    for out in (out1, out2):
        assert main(["block", files["econ"], files["irr"], "--epsilon", "0.1", "--k", "8",
                     "--seed", "3", "--output", str(out)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    io.validate(json.loads(out1.read_text()), "report")


def test_round_trip_schemas(files):
    econ = io.load_economy(files["econ"])
    assert io.economy_to_dict(econ) == io.economy_to_dict(EDGEWORTH)
    io.validate(io.allocation_to_dict(EQUILIBRIUM), "allocation")


def test_console_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "walrasian.cli", "params", files["econ"]],
                          capture_output=True, text=True, env={"WALRASIAN_LOG_LEVEL": "DEBUG",
                                                               "PATH": ""})
    assert proc.returncode == 0 and json.loads(proc.stdout)["mode"] == "strong"
