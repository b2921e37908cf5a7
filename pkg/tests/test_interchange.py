import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from povm_forge.interchange import (DocumentError, dumps, format_float, povm_dumps, povm_loads)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    s = format_float(x)
    assert float(s) == x
    assert len(s.split("e")[0].replace("-", "").replace(".", "")) == 17


def test_non_finite_become_null():
    assert json.loads(dumps({"a": math.inf, "b": [math.nan]})) == {"a": None, "b": [None]}


def test_catalog_round_trip_bit_identical(entry):
    text = povm_dumps(entry.povm, entry.label)
    back, label = povm_loads(text)
    assert label == entry.label
    assert back.copies == entry.povm.copies
    for a, b in zip(entry.povm.outcomes, back.outcomes):
        assert a.weight == b.weight
        assert a.direction.theta == b.direction.theta
        assert a.direction.psi == b.direction.psi
    np.testing.assert_array_equal(back.vectors, entry.povm.vectors)
    assert povm_dumps(back, label) == text


@pytest.mark.parametrize("text", [
    "not json",
    "[]",
    '{"outcomes": []}',
    '{"copies": 2}',
    '{"copies": 2.5, "outcomes": []}',
    '{"copies": true, "outcomes": []}',
    '{"copies": 2, "outcomes": {}}',
    '{"copies": 2, "outcomes": [{"weight": 1, "theta": 0}]}',
    '{"copies": 2, "outcomes": [{"weight": "x", "theta": 0, "psi": 0}]}',
])
def test_malformed(text):
    with pytest.raises(DocumentError):
        povm_loads(text)


def test_dumps_types():
    doc = {"i": np.int64(3), "f": np.float64(0.5), "b": np.bool_(True), "s": "é", "n": None,
           "arr": np.array([[1.0, 2.0]]), "e": [], "d": {}}
    back = json.loads(dumps(doc))
    assert back == {"i": 3, "f": 0.5, "b": True, "s": "é", "n": None, "arr": [[1.0, 2.0]], "e": [], "d": {}}
    with pytest.raises(TypeError):
        dumps({"x": object()})
