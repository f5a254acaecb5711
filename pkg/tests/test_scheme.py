import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CONTEXT, K780, lambda_scheme, load, two_level
from dressed_limit import corpus
from dressed_limit.exceptions import SchemeSyntaxError, SchemeValidationError
from dressed_limit.scheme import (
    Laser,
    Level,
    MeasurementContext,
    dump_scheme,
    cross_section,
    parse_scheme,
    scheme_to_dict,
    validate_scheme,
)


def _lambda_file(**changes):
    data = {
        "levels": [{"id": 1, "detuning": 0.0}, {"id": 2, "detuning": 50.0, "gamma": 1.0},
                   {"id": 3, "detuning": 0.0}],
        "lasers": [{"id": 1, "wavenumber": K780}, {"id": 2, "wavenumber": K780}],
        "transitions": [{"laser": 1, "lower": 1, "upper": 2, "rabi": 3.0},
                        {"laser": 2, "lower": 3, "upper": 2, "rabi": 4.0}],
        "context": {"column_density": 1e13, "area": 1e-8, "bandwidth": 1e6,
                    "efficiency": 0.9, "initial_level": 1},
    }
    data.update(changes)
    return json.dumps(data)


def test_parse_lambda_shares_upper_level():
    s = parse_scheme(_lambda_file())
    assert len(s.levels) == 3 and len(s.lasers) == 2
    assert [t.upper for t in s.transitions] == [2, 2]


def test_parse_minimal_two_level():
    s = load("two_level.json")
    assert len(s.transitions) == 1
    assert s.transitions[0].lower == 1 and s.transitions[0].upper == 2


def test_unknown_level_is_reported():
    text = _lambda_file(transitions=[{"laser": 1, "lower": 1, "upper": 9, "rabi": 1.0}])
    with pytest.raises(SchemeValidationError) as info:
        parse_scheme(text)
    assert "unknown level" in str(info.value)
    assert info.value.diagnostics[0].field == "upper"


def test_unknown_field_is_an_error():
    with pytest.raises(SchemeSyntaxError, match="unknown field 'colour'"):
        parse_scheme(_lambda_file(colour="blue"))


def test_syntax_error_has_position():
    with pytest.raises(SchemeSyntaxError) as info:
        parse_scheme('{\n  "levels": [,]\n}')
    assert (info.value.line, info.value.column) == (2, 14)


def test_frequency_scale_is_applied():
    data = json.loads(_lambda_file())
    data["units"] = {"frequency_scale": 2.0}
    s = parse_scheme(json.dumps(data))
    assert s.level(2).detuning == 100.0
    assert s.level(2).gamma == 2.0
    assert s.transitions[1].rabi == 8.0


def test_valid_lambda_has_no_diagnostics():
    assert validate_scheme(lambda_scheme()) == []


def test_negative_gamma_diagnostic():
    s = lambda_scheme(gamma=-1.0)
    (d,) = validate_scheme(s)
    assert (d.type, d.ident, d.field, d.rule) == ("Level", 2, "gamma", "gamma >= 0")


def test_efficiency_above_one_diagnostic():
    ctx = MeasurementContext(1e13, 1e-8, 1e6, 1.5)
    (d,) = validate_scheme(lambda_scheme().replace(context=ctx))
    assert d.type == "MeasurementContext" and d.field == "efficiency"


def test_duplicate_pair_on_one_laser_is_rejected():
    s = two_level()
    t = s.transitions[0]
    dup = s.replace(transitions=[t, type(t)(1, 2, 1, 0.5)])
    assert [d.rule for d in validate_scheme(dup)] == ["(laser, lower, upper) unique"]


def test_cross_section_780nm():
    # 6 pi / k^2 with k = 2 pi / lambda is 3 lambda^2 / (2 pi)
    sigma = cross_section(Laser(1, K780))
    assert sigma == pytest.approx(3 * (780e-9) ** 2 / (2 * math.pi), rel=1e-14)
    assert sigma == pytest.approx(2.907e-13, rel=1e-3)


def test_cross_section_unit_wavenumber():
    assert cross_section(Laser(1, 1.0)) == 6 * math.pi


@given(st.floats(min_value=1e3, max_value=1e9))
def test_cross_section_scaling(k):
    assert cross_section(Laser(1, 2 * k)) == cross_section(Laser(1, k)) / 4
    assert cross_section(Laser(1, k * 1.001)) < cross_section(Laser(1, k))


@pytest.mark.parametrize("name", [n for n in corpus.NAMES])
def test_corpus_parses_and_validates(name):
    s = load(name)
    assert validate_scheme(s) == []


finite = st.floats(min_value=-1e9, max_value=1e9, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=1e9)


@given(d2=finite, d3=finite, g=positive, r1=positive, r2=positive,
       k=st.floats(min_value=1e5, max_value=1e8),
       power=st.one_of(st.none(), positive))
def test_round_trip(d2, d3, g, r1, r2, k, power):
    s = lambda_scheme(delta=d2, two_photon=d3, rabi_a=r1, rabi_b=r2, gamma=g)
    s = s.replace(lasers=[Laser(1, k, power), s.lasers[1]])
    again = parse_scheme(dump_scheme(s))
    assert again == s
    assert scheme_to_dict(again) == scheme_to_dict(s)


def test_level_defaults_to_stable():
    assert Level(1, 0.0).gamma == 0.0
    assert CONTEXT.initial_level == 1
