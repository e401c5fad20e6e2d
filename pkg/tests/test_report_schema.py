import io
import json

import jsonschema
import numpy as np
import pytest

from sketchrank.cli import main
from sketchrank.matrixio import write_raw
from sketchrank.report import dumps_report, load_schema, read_report, write_report


@pytest.fixture(scope="module")
def validator():
    schema = load_schema()
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema)


@pytest.fixture(scope="module")
def matrix_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("schema") / "a.bin"
    rng = np.random.default_rng(0)
    write_raw(path, rng.standard_normal((80, 8)) @ rng.standard_normal((8, 60)))
    return path


def run(tmp_path, argv):
    out = tmp_path / "r.json"
    code = main(argv + ["--out", str(out)])
    return code, read_report(out)


def test_estimate_report_validates(validator, matrix_file, tmp_path):
    code, rep = run(tmp_path, ["estimate", str(matrix_file), "--eps", "1e-8", "--r1", "20"])
    assert code == 0
    validator.validate(rep)
    assert rep["r_hat"] == 8


def test_hit_cap_report_validates(validator, matrix_file, tmp_path):
    code, rep = run(tmp_path, ["estimate", str(matrix_file), "--eps", "1e-8", "--r1", "4",
                               "--max-doublings", "1"])
    assert code == 2
    validator.validate(rep)
    assert rep["status"] == "HitCap" and len(rep["rounds"]) == 2


def test_qb_report_validates(validator, matrix_file, tmp_path):
    code, rep = run(tmp_path, ["qb", str(matrix_file), "--eps", "1e-6", "--r1", "20", "--p", "4"])
    assert code == 0
    validator.validate(rep)


def test_verify_report_validates(validator, tmp_path):
    code, rep = run(tmp_path, ["verify", "sandwich", "--trials", "3"])
    assert code == 0
    validator.validate(rep)
    assert "wall_time_ms" not in rep


@pytest.mark.parametrize("mutate", [
    lambda r: r.pop("r_hat"),
    lambda r: r.update(schema_version=2),
    lambda r: r.update(command="plot"),
    lambda r: r["config"].pop("seed"),
    lambda r: r.update(r_hat=-1),
    lambda r: r.update(wall_time_ms="fast"),
])
def test_schema_rejects_broken_estimate(validator, matrix_file, tmp_path, mutate):
    _, rep = run(tmp_path, ["estimate", str(matrix_file), "--eps", "1e-8", "--r1", "20"])
    mutate(rep)
    with pytest.raises(jsonschema.ValidationError):
        validator.validate(rep)


def test_qb_requires_residual(validator, matrix_file, tmp_path):
    _, rep = run(tmp_path, ["qb", str(matrix_file), "--eps", "1e-6", "--r1", "20", "--p", "4"])
    rep.pop("achieved_residual")
    with pytest.raises(jsonschema.ValidationError):
        validator.validate(rep)


def test_verify_forbids_timing(validator, tmp_path):
    _, rep = run(tmp_path, ["verify", "sandwich", "--trials", "2"])
    rep["wall_time_ms"] = 1.0
    with pytest.raises(jsonschema.ValidationError):
        validator.validate(rep)


def test_round_trip(tmp_path, matrix_file):
    _, rep = run(tmp_path, ["estimate", str(matrix_file), "--eps", "1e-8", "--r1", "20"])
    path = tmp_path / "again.json"
    write_report(rep, path)
    assert read_report(path) == rep
    assert dumps_report(rep) == (tmp_path / "r.json").read_text()


def test_stream_output_and_version_check(tmp_path):
    buf = io.StringIO()
    text = write_report({"command": "verify", "config": {"seed": 0}}, stream=buf)
    assert buf.getvalue() == text and json.loads(text)["schema_version"] == 1
    bad = tmp_path / "old.json"
    bad.write_text(json.dumps({"schema_version": 0}))
    with pytest.raises(ValueError):
        read_report(bad)
    with pytest.raises(ValueError):
        dumps_report({"x": float("nan")})
