import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraspec.coeffio import CoefficientFileError, dumps, loads, read_coefficients, write_coefficients
from ultraspec.rng import SplitMix64
from ultraspec.spectrum import Manifold, ModelOperator
from ultraspec.synth import DecayProfile, from_profile
from ultraspec.transform import SpectralVector, random_bandlimited
from ultraspec.weights import make_weights


def _lines(v):
    return dumps(v, {"seed": 3}).splitlines()


@pytest.mark.parametrize("manifold", list(Manifold))
@given(seed=st.integers(0, 2**40), shift=st.sampled_from([0.0, 1.0, 0.25]))
def test_round_trip_exact(manifold, seed, shift):
    op = ModelOperator(manifold, shift)
    v = random_bandlimited(op, 6, SplitMix64(seed))
    v = v.scaled(10.0 ** ((seed % 41) - 20))
    w, prov = loads(dumps(v, {"seed": seed, "note": "x", "ratio": 0.1}))
    assert w.operator == op and w.j_max == 6
    assert w.coeffs.tobytes() == v.coeffs.tobytes()
    assert w.log_offset.tobytes() == v.log_offset.tobytes()
    assert prov == {"seed": seed, "note": "x", "ratio": 0.1}


def test_round_trip_with_offsets(tmp_path):
    v = from_profile(ModelOperator(Manifold.CIRCLE), DecayProfile("exponential", L=-3.0, g=1.0), 400)
    assert np.any(v.log_offset)
    p = tmp_path / "grow.jsonl"
    write_coefficients(p, v)
    w, _ = read_coefficients(p)
    np.testing.assert_array_equal(w.log_offset, v.log_offset)
    np.testing.assert_array_equal(w.coeffs, v.coeffs)


def test_file_layout():
    v = SpectralVector(ModelOperator(Manifold.CIRCLE), [1.0, 0.5j, 0.25], 1)
    lines = _lines(v)
    head = json.loads(lines[0])
    assert head == {
        "record": "header", "manifold": "circle", "nu": 2, "shift": 0, "j_max": 1,
        "basis_convention": "v1", "provenance": {"seed": 3},
    }
    assert [json.loads(x)["label"] for x in lines[1:]] == [[0], [-1], [1]]
    assert json.loads(lines[2]) == {"j": 1, "lambda": 1, "k_index": 0, "label": [-1], "re": 0, "im": 0.5, "log_offset": 0}
    assert dumps(v) == dumps(v.copy())


def _mutate(v, lineno, **changes):
    lines = _lines(v)
    rec = json.loads(lines[lineno - 1])
    rec.update(changes)
    lines[lineno - 1] = json.dumps(rec)
    return "\n".join(lines)


@pytest.mark.parametrize(
    "lineno,changes,message",
    [
        (1, {"basis_convention": "v0"}, "basis convention"),
        (1, {"manifold": "torus3"}, "manifold"),
        (1, {"nu": 4}, "nu"),
        (1, {"j_max": -1}, "j_max"),
        (1, {"record": "mode"}, "header"),
        (3, {"j": 2}, "out of order"),
        (3, {"label": [7]}, "label"),
        (3, {"lambda": 5}, "lambda"),
        (3, {"re": "abc"}, "numbers"),
        (4, {"log_offset": 2.0}, "constant within a level"),
    ],
)
def test_errors_carry_line_numbers(lineno, changes, message):
    v = random_bandlimited(ModelOperator(Manifold.CIRCLE), 3, SplitMix64(0))
    with pytest.raises(CoefficientFileError) as exc:
        loads(_mutate(v, lineno, **changes))
    assert message in str(exc.value)
    assert exc.value.line == lineno


def test_structural_errors():
    v = random_bandlimited(ModelOperator(Manifold.SPHERE2), 2, SplitMix64(0))
    lines = _lines(v)
    with pytest.raises(CoefficientFileError, match="empty"):
        loads("\n\n")
    with pytest.raises(CoefficientFileError) as exc:
        loads("\n".join(lines[:5]))
    assert "expected 9 mode records" in str(exc.value)
    bad = lines.copy()
    bad[4] = bad[4][:-3]
    with pytest.raises(CoefficientFileError) as exc:
        loads("\n".join(bad))
    assert exc.value.line == 5 and "malformed" in str(exc.value)
    bad = lines.copy()
    bad[2] = bad[2].replace('"re": ', '"re": 1e999, "x": ')
    with pytest.raises(CoefficientFileError):
        loads("\n".join(bad))
    with pytest.raises(CoefficientFileError, match="cannot read"):
        read_coefficients("/nonexistent/file.jsonl")


def test_writer_rejects_non_finite():
    v = SpectralVector(ModelOperator(Manifold.CIRCLE), [np.nan, 0, 0], 1)
    with pytest.raises(ValueError):
        dumps(v)


def test_associated_fixture_round_trip():
    op = ModelOperator(Manifold.SPHERE2)
    v = from_profile(op, DecayProfile("associated", L=1.0, weights=make_weights("gevrey", 2, s=2)), 30)
    w, _ = loads(dumps(v))
    assert w.coeffs.tobytes() == v.coeffs.tobytes()
