"""Command-line interface: exit codes, determinism, and report structure."""

import json

import numpy as np
import pytest

from qlga.cli import (
    EXIT_INVALID,
    EXIT_NOT_QLGA,
    EXIT_NUMERICAL,
    EXIT_QLGA,
    main,
)
from qlga.descriptor import canonical_json
from qlga.gallery import cnot_chain, two_track_gas, partial_adder


@pytest.fixture
def gas_file(tmp_path):
    p = tmp_path / "gas.json"
    p.write_text(canonical_json(two_track_gas().source))
    return str(p)


@pytest.fixture
def chain_file(tmp_path):
    p = tmp_path / "chain.json"
    p.write_text(canonical_json(cnot_chain().source))
    return str(p)


def test_check_lattice_gas_exits_zero(gas_file, capsys):
    assert main(["check", gas_file]) == EXIT_QLGA
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "QLGA"
    assert doc["report"]["d_dims"] == [4, 4]
    assert "decomposition" in doc
    assert "isomorphism" not in doc["decomposition"]


def test_check_non_gas_exits_three(chain_file, capsys):
    assert main(["check", chain_file]) == EXIT_NOT_QLGA
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "NOT_QLGA"
    assert doc["report"]["backend"] == "clifford"
    assert doc["report"]["span_product_dimension"] == 8


def test_check_accepts_inline_json(capsys):
    assert main(["check", canonical_json(two_track_gas().source)]) == EXIT_QLGA
    capsys.readouterr()


def test_invalid_descriptor_exits_one(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{broken")
    assert main(["check", str(p)]) == EXIT_INVALID
    assert main(["check", str(tmp_path / "missing.json")]) == EXIT_INVALID
    capsys.readouterr()


def test_truncated_neighborhood_exits_one(tmp_path, capsys):
    p = tmp_path / "trunc.json"
    p.write_text(canonical_json(
        partial_adder(neighborhood=((0,), (1,))).source))
    assert main(["check", str(p)]) == EXIT_INVALID
    capsys.readouterr()


def test_decompose_embeds_matrices(gas_file, capsys):
    assert main(["decompose", gas_file]) == EXIT_QLGA
    doc = json.loads(capsys.readouterr().out)
    F = np.array([[complex(a, b) for a, b in row]
                  for row in doc["decomposition"]["collision"]])
    assert np.linalg.norm(F.conj().T @ F - np.eye(4)) < 1e-9


def test_verify_reports_passing_checks(gas_file, capsys):
    assert main(["verify", gas_file]) == EXIT_QLGA
    doc = json.loads(capsys.readouterr().out)
    checks = doc["checks"]
    for name in ("roundtrip", "conjugated_form", "one_sided_form",
                 "window_consistency"):
        assert checks[name]["pass"], name
        assert checks[name]["value"] < 1e-9


def test_verify_non_gas_exits_three(chain_file, capsys):
    assert main(["verify", chain_file]) == EXIT_NOT_QLGA
    capsys.readouterr()


def test_output_is_deterministic(gas_file, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["check", gas_file, "--no-timings", "--out", str(a)]) == 0
    assert main(["check", gas_file, "--no-timings", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "timings" not in json.loads(a.read_text())
    capsys.readouterr()


def test_simulate_reports_norm_and_state(gas_file, capsys):
    assert main(["simulate", gas_file, "--excite", "3", "--steps", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["steps"] == 2
    assert abs(doc["norm"] - 1.0) < 1e-9
    assert "state" in doc


def test_simulate_observe_mode(gas_file, capsys):
    assert main(["simulate", gas_file, "--excite", "3", "--steps", "1",
                 "--observe"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert "occupations" in doc and "state" not in doc
    total = sum(sum(p) for p in doc["occupations"].values())
    assert total == pytest.approx(len(doc["occupations"]))


def test_simulate_refuses_non_gas(chain_file, capsys):
    assert main(["simulate", chain_file, "--steps", "1"]) == EXIT_NOT_QLGA
    capsys.readouterr()


def test_backend_flag_clifford(chain_file, capsys):
    assert main(["check", chain_file, "--backend", "clifford"]) == EXIT_NOT_QLGA
    doc = json.loads(capsys.readouterr().out)
    assert doc["report"]["backend"] == "clifford"
