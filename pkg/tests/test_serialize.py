"""Deterministic JSON/CSV emission."""

import json

import numpy as np
import pytest

from carnotlab import CarnotLabError
from carnotlab.serialize import (csv_text, dumps_json, format_float,
                                 write_csv, write_json)


def test_format_float_17g():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1"
    assert format_float(-2.5e-300) == "-2.5e-300"
    assert format_float(2.0 / 3.0) == "0.66666666666666663"
    for bad in (float("nan"), float("inf"), -float("inf")):
        with pytest.raises(CarnotLabError):
            format_float(bad)


def test_dumps_json_roundtrip_and_order():
    doc = {"b": 1, "a": [1.5, True, None, "x,y"], "nested": {"z": 0.1, "a": 2}}
    text = dumps_json(doc)
    back = json.loads(text)
    assert back == doc
    # insertion order preserved, not sorted
    assert text.index('"b"') < text.index('"a"') < text.index('"nested"')
    assert text.index('"z"') < text.index('"a": 2')
    assert text.endswith("\n")
    # emission is reproducible byte for byte
    assert dumps_json(doc) == text


def test_json_bool_before_int():
    # bools must render as JSON booleans, never as 0/1
    text = dumps_json({"flag": True, "n": 1, "x": np.bool_(False)})
    assert '"flag": true' in text
    assert '"n": 1' in text
    assert '"x": false' in text


def test_json_numpy_scalars_and_arrays():
    text = dumps_json({"v": np.array([1.0, 0.5]), "n": np.int64(3),
                       "x": np.float64(0.25), "empty": np.array([])})
    back = json.loads(text)
    assert back == {"v": [1.0, 0.5], "n": 3, "x": 0.25, "empty": []}


def test_json_rejects_bad_values():
    with pytest.raises(CarnotLabError):
        dumps_json({"x": float("nan")})
    with pytest.raises(CarnotLabError):
        dumps_json({1: "non-string key"})
    with pytest.raises(CarnotLabError):
        dumps_json({"x": object()})


def test_json_full_precision():
    x = 2.0 / 3.0
    text = dumps_json({"x": x})
    assert json.loads(text)["x"] == x


def test_csv_basic_and_quoting():
    text = csv_text(["name", "value", "ok"],
                    [["plain", 0.5, True],
                     ['needs "quotes", commas', 2, False]])
    lines = text.splitlines()
    assert lines[0] == "name,value,ok"
    assert lines[1] == "plain,0.5,true"
    assert lines[2] == '"needs ""quotes"", commas",2,false'
    assert text.endswith("\n")


def test_csv_preamble_and_width_check():
    text = csv_text(["a"], [[1.0]], preamble={"seed": 7, "group": "heisenberg-1"})
    assert text.splitlines()[0] == "# seed=7"
    assert text.splitlines()[1] == "# group=heisenberg-1"
    with pytest.raises(CarnotLabError):
        csv_text(["a", "b"], [[1.0]])
    with pytest.raises(CarnotLabError):
        csv_text(["a"], [[float("inf")]])


def test_writers_return_text(tmp_path):
    jpath = tmp_path / "doc.json"
    text = write_json(jpath, {"x": 1.0})
    assert jpath.read_text() == text
    cpath = tmp_path / "doc.csv"
    text = write_csv(cpath, ["x"], [[1.0]], preamble={"t": 0.5})
    assert cpath.read_text() == text
